//! Experiment configuration: TOML with `[section]` tables, presets as a base
//! layer, and `key=value` overrides on dotted paths.
//!
//! ```toml
//! preset = "fig2"          # optional base layer
//!
//! [params]                 # any subset when a preset is given
//! omega_a = 0.1
//! delta_b = 2.0
//! delta_c = 1.0
//! g = 0.01
//! drive_b = 100.0
//! drive_c = 100.0
//! kappa_a = 0.0            # kappa_b, kappa_c, nbar_a, nbar_b, nbar_c likewise
//!
//! [dims]
//! a = 2
//! b = 20
//! c = 20
//!
//! [grid]
//! t_max = 6.283185307179586
//! samples = 2001
//! dt = 0.001               # integrator step for open-system runs
//! min_eig_every = 1
//!
//! [outputs]
//! negativity = true        # also: wigner, probabilities, fidelities, open
//! open_fidelities = true   # columns of the open-system table
//! open_negativity = true
//!
//! [variants]
//! formula = "errata"       # or "verbatim"
//! open_hamiltonian = "ext" # or "app"
//! displacement = "steady"  # or "transient"
//! frequency = "mode-a"     # or "mode-c" together with omega_c
//! initial_sign = "plus"    # open-system initial state |+> or |->
//!
//! [approx]
//! n_b = 1                  # excitation numbers for the approximation check
//! n_c = 1
//! threshold = 10.0
//!
//! [wigner]
//! times = [1.85, 3.141592653589793]
//! axis_min = -3.0
//! axis_max = 3.0
//! points = 81
//! re_cut_fixed = [0.5, 0.4] # (Im z_b, Im z_c) on the Re z_b = Re z_c cut
//! im_cut_fixed = [0.5, 0.0] # (Re z_b, Re z_c) on the Im z_b = Im z_c cut
//!
//! [[sweep]]                # optional; one output file per case
//! label = "db1p5"
//! params = { delta_b = 1.5 }
//!
//! [output]
//! dir = "out"
//! ```

use std::path::{Path, PathBuf};

use fredkin_core::analytic::{FormulaVariant, Sign};
use fredkin_core::fock::ModeDims;
use fredkin_core::lindblad::{DisplacementMode, ObservableSet, OpenHamiltonian};
use fredkin_core::model::{FrequencyConvention, SystemParams};
use fredkin_core::wigner::Axis;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::presets;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub omega_a: f64,
    pub delta_b: f64,
    pub delta_c: f64,
    pub g: f64,
    pub drive_b: f64,
    pub drive_c: f64,
    #[serde(default)]
    pub kappa_a: f64,
    #[serde(default)]
    pub kappa_b: f64,
    #[serde(default)]
    pub kappa_c: f64,
    #[serde(default)]
    pub nbar_a: f64,
    #[serde(default)]
    pub nbar_b: f64,
    #[serde(default)]
    pub nbar_c: f64,
}

impl From<ParamsConfig> for SystemParams {
    fn from(p: ParamsConfig) -> Self {
        SystemParams {
            omega_a: p.omega_a,
            delta_b: p.delta_b,
            delta_c: p.delta_c,
            g: p.g,
            drive_b: p.drive_b,
            drive_c: p.drive_c,
            kappa_a: p.kappa_a,
            kappa_b: p.kappa_b,
            kappa_c: p.kappa_c,
            nbar_a: p.nbar_a,
            nbar_b: p.nbar_b,
            nbar_c: p.nbar_c,
        }
    }
}

impl From<SystemParams> for ParamsConfig {
    fn from(p: SystemParams) -> Self {
        ParamsConfig {
            omega_a: p.omega_a,
            delta_b: p.delta_b,
            delta_c: p.delta_c,
            g: p.g,
            drive_b: p.drive_b,
            drive_c: p.drive_c,
            kappa_a: p.kappa_a,
            kappa_b: p.kappa_b,
            kappa_c: p.kappa_c,
            nbar_a: p.nbar_a,
            nbar_b: p.nbar_b,
            nbar_c: p.nbar_c,
        }
    }
}

/// Partial parameters applied on top of the base set for one sweep case.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsPatch {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drive_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drive_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nbar_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nbar_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nbar_c: Option<f64>,
}

impl ParamsPatch {
    pub fn apply(&self, base: ParamsConfig) -> ParamsConfig {
        ParamsConfig {
            omega_a: self.omega_a.unwrap_or(base.omega_a),
            delta_b: self.delta_b.unwrap_or(base.delta_b),
            delta_c: self.delta_c.unwrap_or(base.delta_c),
            g: self.g.unwrap_or(base.g),
            drive_b: self.drive_b.unwrap_or(base.drive_b),
            drive_c: self.drive_c.unwrap_or(base.drive_c),
            kappa_a: self.kappa_a.unwrap_or(base.kappa_a),
            kappa_b: self.kappa_b.unwrap_or(base.kappa_b),
            kappa_c: self.kappa_c.unwrap_or(base.kappa_c),
            nbar_a: self.nbar_a.unwrap_or(base.nbar_a),
            nbar_b: self.nbar_b.unwrap_or(base.nbar_b),
            nbar_c: self.nbar_c.unwrap_or(base.nbar_c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepCase {
    pub label: String,
    #[serde(default)]
    pub params: ParamsPatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimsConfig {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    #[serde(default = "default_cap")]
    pub cap: usize,
}

fn default_cap() -> usize {
    fredkin_core::fock::DEFAULT_DIM_CAP
}

impl DimsConfig {
    pub fn mode_dims(&self) -> fredkin_core::Result<ModeDims> {
        ModeDims::with_cap(self.a, self.b, self.c, self.cap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t_max: f64,
    pub samples: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_min_eig_every")]
    pub min_eig_every: usize,
}

fn default_dt() -> f64 {
    1e-3
}

fn default_min_eig_every() -> usize {
    1
}

impl GridConfig {
    /// `samples` equally spaced times on `[0, t_max]`.
    pub fn times(&self) -> Vec<f64> {
        let n = self.samples;
        (0..n).map(|k| self.t_max * k as f64 / (n - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    #[serde(default)]
    pub negativity: bool,
    #[serde(default)]
    pub wigner: bool,
    #[serde(default)]
    pub probabilities: bool,
    #[serde(default)]
    pub fidelities: bool,
    #[serde(default)]
    pub open: bool,
    /// Fidelity columns of the open-system table.
    #[serde(default = "yes")]
    pub open_fidelities: bool,
    /// Negativity columns of the open-system table.
    #[serde(default = "yes")]
    pub open_negativity: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputsConfig {
    fn default() -> Self {
        Self {
            negativity: false,
            wigner: false,
            probabilities: false,
            fidelities: false,
            open: false,
            open_fidelities: true,
            open_negativity: true,
        }
    }
}

impl OutputsConfig {
    pub fn any(&self) -> bool {
        self.negativity || self.wigner || self.probabilities || self.fidelities || self.open
    }

    pub fn observable_set(&self) -> ObservableSet {
        ObservableSet {
            fidelities: self.open_fidelities,
            negativity: self.open_negativity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormulaChoice {
    Verbatim,
    #[default]
    Errata,
}

impl From<FormulaChoice> for FormulaVariant {
    fn from(f: FormulaChoice) -> Self {
        match f {
            FormulaChoice::Verbatim => FormulaVariant::Verbatim,
            FormulaChoice::Errata => FormulaVariant::Errata,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpenHamiltonianChoice {
    #[default]
    Ext,
    App,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisplacementChoice {
    #[default]
    Steady,
    Transient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrequencyChoice {
    #[default]
    ModeA,
    ModeC,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignChoice {
    #[default]
    Plus,
    Minus,
}

impl From<SignChoice> for Sign {
    fn from(s: SignChoice) -> Self {
        match s {
            SignChoice::Plus => Sign::Plus,
            SignChoice::Minus => Sign::Minus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantsConfig {
    #[serde(default)]
    pub formula: FormulaChoice,
    #[serde(default)]
    pub open_hamiltonian: OpenHamiltonianChoice,
    #[serde(default)]
    pub displacement: DisplacementChoice,
    #[serde(default)]
    pub frequency: FrequencyChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_c: Option<f64>,
    #[serde(default)]
    pub initial_sign: SignChoice,
}

impl VariantsConfig {
    pub fn formula(&self) -> FormulaVariant {
        self.formula.into()
    }

    pub fn open_hamiltonian(&self) -> OpenHamiltonian {
        match self.open_hamiltonian {
            OpenHamiltonianChoice::Ext => OpenHamiltonian::Ext,
            OpenHamiltonianChoice::App => OpenHamiltonian::App,
        }
    }

    pub fn displacement(&self) -> DisplacementMode {
        match self.displacement {
            DisplacementChoice::Steady => DisplacementMode::Steady,
            DisplacementChoice::Transient => DisplacementMode::Transient,
        }
    }

    pub fn frequency(&self) -> FrequencyConvention {
        match (self.frequency, self.omega_c) {
            (FrequencyChoice::ModeC, Some(omega_c)) => FrequencyConvention::ModeC { omega_c },
            _ => FrequencyConvention::ModeA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerConfig {
    pub times: Vec<f64>,
    pub axis_min: f64,
    pub axis_max: f64,
    pub points: usize,
    /// Fixed imaginary parts `(Im z_b, Im z_c)` of the real-diagonal cut.
    pub re_cut_fixed: [f64; 2],
    /// Fixed real parts `(Re z_b, Re z_c)` of the imaginary-diagonal cut.
    pub im_cut_fixed: [f64; 2],
}

impl Default for WignerConfig {
    fn default() -> Self {
        Self {
            times: vec![1.85, std::f64::consts::PI],
            axis_min: -3.0,
            axis_max: 3.0,
            points: 81,
            re_cut_fixed: [0.5, 0.4],
            im_cut_fixed: [0.5, 0.0],
        }
    }
}

impl WignerConfig {
    pub fn axis(&self) -> Axis {
        Axis::new(self.axis_min, self.axis_max, self.points)
    }
}

/// Excitation numbers and threshold for the large-displacement check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproxConfig {
    pub n_b: u32,
    pub n_c: u32,
    pub threshold: f64,
}

impl Default for ApproxConfig {
    fn default() -> Self {
        Self {
            n_b: 1,
            n_c: 1,
            threshold: fredkin_core::model::DEFAULT_APPROX_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputDirConfig {
    pub dir: PathBuf,
}

impl Default for OutputDirConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub params: ParamsConfig,
    pub dims: DimsConfig,
    pub grid: GridConfig,
    pub outputs: OutputsConfig,
    #[serde(default)]
    pub variants: VariantsConfig,
    #[serde(default)]
    pub wigner: WignerConfig,
    #[serde(default)]
    pub approx: ApproxConfig,
    #[serde(default)]
    pub sweep: Vec<SweepCase>,
    #[serde(default)]
    pub output: OutputDirConfig,
}

/// One parameter point of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    /// Empty for a run without a sweep.
    pub label: String,
    pub params: SystemParams,
}

impl Case {
    /// `stem.csv`, or `stem_label.csv` inside a sweep.
    pub fn file_name(&self, stem: &str) -> String {
        if self.label.is_empty() {
            format!("{stem}.csv")
        } else {
            format!("{stem}_{}.csv", self.label)
        }
    }
}

impl ExperimentConfig {
    pub fn cases(&self) -> Vec<Case> {
        if self.sweep.is_empty() {
            return vec![Case {
                label: String::new(),
                params: self.params.into(),
            }];
        }
        self.sweep
            .iter()
            .map(|c| Case {
                label: c.label.clone(),
                params: c.params.apply(self.params).into(),
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if let Some(name) = &self.preset {
            if presets::find(name).is_none() {
                return bad(format!("unknown preset `{name}`"));
            }
        }
        if self.grid.samples < 2 {
            return bad(format!("grid.samples must be at least 2 (got {})", self.grid.samples));
        }
        if !(self.grid.t_max > 0.0) || !self.grid.t_max.is_finite() {
            return bad(format!("grid.t_max must be positive (got {})", self.grid.t_max));
        }
        if !(self.grid.dt > 0.0) || !self.grid.dt.is_finite() {
            return bad(format!("grid.dt must be positive (got {})", self.grid.dt));
        }
        if !self.outputs.any() {
            return bad("no outputs requested: enable at least one key in [outputs]".into());
        }
        self.dims
            .mode_dims()
            .map_err(|e| CliError::Config(format!("dims: {e}")))?;
        if self.variants.frequency == FrequencyChoice::ModeC && self.variants.omega_c.is_none() {
            return bad("variants.frequency = \"mode-c\" requires variants.omega_c".into());
        }
        let mut labels = std::collections::BTreeSet::new();
        for case in &self.sweep {
            let ok = !case.label.is_empty()
                && case
                    .label
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
            if !ok {
                return bad(format!(
                    "sweep label `{}` must be non-empty ASCII letters, digits, `-` or `_`",
                    case.label
                ));
            }
            if !labels.insert(case.label.as_str()) {
                return bad(format!("duplicate sweep label `{}`", case.label));
            }
        }
        for case in self.cases() {
            case.params.validate().map_err(|e| {
                let at = if case.label.is_empty() {
                    String::new()
                } else {
                    format!(" (sweep case `{}`)", case.label)
                };
                CliError::Config(format!("params{at}: {e}"))
            })?;
        }
        if self.outputs.wigner {
            let w = &self.wigner;
            if w.times.is_empty() || w.points == 0 || !(w.axis_max > w.axis_min) {
                return bad("wigner: need times, points > 0 and axis_max > axis_min".into());
            }
        }
        Ok(())
    }
}

const REQUIRED: &str = "`preset`, or all of [params], [dims], [grid] and [outputs]";

/// Sets `value` at a dotted path, creating intermediate tables.
pub fn set_dotted(table: &mut Table, key: &str, value: Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("malformed override key `{key}`")));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => {
                return Err(CliError::Config(format!(
                    "override `{key}`: `{part}` is not a table"
                )))
            }
        };
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Parses `key=value`, reading the value as TOML and falling back to a string.
pub fn parse_override(spec: &str) -> Result<(String, Value), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{spec}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match toml::from_str::<Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    };
    Ok((key.to_string(), value))
}

fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Resolves a raw table: preset base layer, then the table, then overrides.
pub fn resolve(mut table: Table, overrides: &[(String, Value)]) -> Result<ExperimentConfig, CliError> {
    for (k, v) in overrides {
        set_dotted(&mut table, k, v.clone())?;
    }
    let preset = match table.get("preset") {
        None => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err(CliError::Config("`preset` must be a string".into())),
    };
    let merged = match &preset {
        Some(name) => {
            let base = presets::find(name)
                .ok_or_else(|| CliError::Config(format!("unknown preset `{name}`")))?
                .config();
            let mut t = Table::try_from(&base)
                .map_err(|e| CliError::Internal(format!("preset serialization: {e}")))?;
            merge(&mut t, table);
            t
        }
        None => {
            let missing: Vec<&str> = ["params", "dims", "grid", "outputs"]
                .into_iter()
                .filter(|k| !table.contains_key(*k))
                .collect();
            if !missing.is_empty() {
                return Err(CliError::Config(format!(
                    "missing required keys: {} (set {REQUIRED})",
                    missing.join(", ")
                )));
            }
            table
        }
    };
    let cfg: ExperimentConfig = merged
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_str(text: &str, overrides: &[(String, Value)]) -> Result<ExperimentConfig, CliError> {
    let table: Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    resolve(table, overrides)
}

/// Reads a raw config table from a path, or from stdin when the path is `-`.
pub fn read_table(path: &Path) -> Result<Table, CliError> {
    let text = if path == Path::new("-") {
        std::io::read_to_string(std::io::stdin())
    } else {
        std::fs::read_to_string(path)
    }
    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))
}

pub fn load_config(path: &Path, overrides: &[(String, Value)]) -> Result<ExperimentConfig, CliError> {
    resolve(read_table(path)?, overrides)
}

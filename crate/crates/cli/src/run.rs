//! Executes a resolved configuration and writes CSV tables plus the manifest.
//!
//! Files, with `_label` appended to the stem for each sweep case:
//! - `negativity.csv`: `t,N_plus,N_minus` for the closed-system cat states
//! - `probabilities.csv`: `t,P_plus,P_minus,P_plus_approx,P_minus_approx`
//! - `fidelity.csv`: `t,F,F_plus,F_minus`
//! - `open.csv`: the open-system observables table
//! - `wigner_{plus|minus}_{time}_{slice}.csv`: `axis1,axis2,W`, with `time`
//!   like `t1p85` or `tpi` and `slice` one of `re-re`, `im-im`,
//!   `re-diagonal`, `im-diagonal`
//!
//! Undefined values (a vanishing cat superposition, a projection below the
//! probability floor) are written as `NaN`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fredkin_core::analytic::{
    approx_solution, detection_probs, exact_solution, fidelity_f, fidelity_fpm, make_cat, Sign,
};
use fredkin_core::csv::format_row;
use fredkin_core::entanglement::log_negativity_pure;
use fredkin_core::fock::{PairDims, TwoModeState};
use fredkin_core::lindblad::{evolve_observed, initial_state, observables_at, open_generator, EvolveOptions, OpenObservables};
use fredkin_core::model::{check_approx_with_threshold, derive_frame_with, SystemParams};
use fredkin_core::wigner::{wigner_slice, SliceSpec};
use fredkin_core::Error;

use crate::config::{Case, ExperimentConfig};
use crate::manifest::{sha256_hex, CaseRecord, DiagnosticsRecord, OutputRecord, RunManifest, Status};
use crate::CliError;

/// Largest per-mode truncation tried when a cat state needs more levels than
/// the configured dimensions.
const MAX_CAT_DIM: usize = 120;

/// Outcome of a run that produced every requested file.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

impl RunReport {
    pub fn diagnostics_passed(&self) -> bool {
        self.manifest.diagnostics_passed()
    }
}

pub fn case_records(cfg: &ExperimentConfig) -> Result<Vec<CaseRecord>, CliError> {
    let conv = cfg.variants.frequency();
    cfg.cases()
        .into_iter()
        .map(|case| {
            let frame = derive_frame_with(&case.params, conv)?;
            let a = cfg.approx;
            let report = check_approx_with_threshold(&case.params, a.n_b, a.n_c, a.threshold)?;
            Ok(CaseRecord {
                label: case.label,
                params: case.params.into(),
                frame: frame.into(),
                approx: report.into(),
            })
        })
        .collect()
}

/// Runs everything requested by `cfg` into `cfg.output.dir`.
///
/// The manifest is written first with status `partial`, then rewritten with
/// the checksums of every data file. A failing step leaves it marked
/// `failed` with the error as a note.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport, CliError> {
    cfg.validate()?;
    let dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut manifest = RunManifest::new(cfg.clone(), case_records(cfg)?);
    manifest.write(&dir)?;
    match execute(cfg, &dir, &mut manifest) {
        Ok(()) => {
            manifest.status = Status::Complete;
            manifest.write(&dir)?;
            Ok(RunReport { dir, manifest })
        }
        Err(e) => {
            manifest.status = Status::Failed;
            manifest.note = Some(e.to_string());
            if let Err(w) = manifest.write(&dir) {
                log::error!("could not finalize manifest: {w}");
            }
            Err(e)
        }
    }
}

fn execute(cfg: &ExperimentConfig, dir: &Path, manifest: &mut RunManifest) -> Result<(), CliError> {
    let times = cfg.grid.times();
    for case in cfg.cases() {
        let o = &cfg.outputs;
        if o.negativity {
            let rows = negativity_rows(&case.params, &times, cfg)?;
            emit(dir, manifest, &case, "negativity", "t,N_plus,N_minus", &rows)?;
        }
        if o.probabilities {
            let rows = probability_rows(&case.params, &times, cfg)?;
            let header = "t,P_plus,P_minus,P_plus_approx,P_minus_approx";
            emit(dir, manifest, &case, "probabilities", header, &rows)?;
        }
        if o.fidelities {
            let rows = fidelity_rows(&case.params, &times, cfg)?;
            emit(dir, manifest, &case, "fidelity", "t,F,F_plus,F_minus", &rows)?;
        }
        if o.wigner {
            wigner_outputs(dir, manifest, &case, cfg)?;
        }
        if o.open {
            open_output(dir, manifest, &case, &times, cfg)?;
        }
    }
    Ok(())
}

fn write_file(
    dir: &Path,
    manifest: &mut RunManifest,
    name: String,
    kind: &'static str,
    label: &str,
    text: String,
    rows: usize,
) -> Result<(), CliError> {
    let path = dir.join(&name);
    std::fs::write(&path, text.as_bytes()).map_err(|e| CliError::io(&path, e))?;
    log::info!("wrote {}", path.display());
    manifest.outputs.push(OutputRecord {
        path: name,
        kind,
        label: label.to_string(),
        rows,
        sha256: sha256_hex(text.as_bytes()),
    });
    Ok(())
}

fn table(header: &str, rows: &[Vec<f64>]) -> String {
    let mut text = String::with_capacity(rows.len() * 64);
    text.push_str(header);
    text.push('\n');
    for r in rows {
        text.push_str(&format_row(r));
        text.push('\n');
    }
    text
}

fn emit(
    dir: &Path,
    manifest: &mut RunManifest,
    case: &Case,
    stem: &'static str,
    header: &str,
    rows: &[Vec<f64>],
) -> Result<(), CliError> {
    let text = table(header, rows);
    write_file(dir, manifest, case.file_name(stem), stem, &case.label, text, rows.len())
}

fn pair_dims(cfg: &ExperimentConfig) -> Result<PairDims, CliError> {
    Ok(PairDims::new(cfg.dims.b, cfg.dims.c)?)
}

/// Fock-basis cat `|psi_sign(t)>` of the approximate solution, or `None`
/// when the superposition vanishes.
pub fn cat_state(
    params: &SystemParams,
    t: f64,
    sign: Sign,
    dims: PairDims,
) -> Result<Option<TwoModeState>, Error> {
    match make_cat(&approx_solution(params, t)?, sign) {
        Ok(cat) => Ok(Some(cat.to_state_adaptive(dims, MAX_CAT_DIM)?)),
        Err(Error::DegenerateBranch(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn negativity_rows(params: &SystemParams, times: &[f64], cfg: &ExperimentConfig) -> Result<Vec<Vec<f64>>, CliError> {
    let dims = pair_dims(cfg)?;
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        let mut row = vec![t];
        for sign in [Sign::Plus, Sign::Minus] {
            row.push(match cat_state(params, t, sign, dims)? {
                Some(psi) => log_negativity_pure(&psi)?,
                None => f64::NAN,
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

fn probability_rows(params: &SystemParams, times: &[f64], cfg: &ExperimentConfig) -> Result<Vec<Vec<f64>>, CliError> {
    let variant = cfg.variants.formula();
    times
        .iter()
        .map(|&t| {
            let (pp, pm) = detection_probs(&exact_solution(params, t, variant)?);
            let (ap, am) = detection_probs(&approx_solution(params, t)?);
            Ok(vec![t, pp, pm, ap, am])
        })
        .collect()
}

fn fidelity_rows(params: &SystemParams, times: &[f64], cfg: &ExperimentConfig) -> Result<Vec<Vec<f64>>, CliError> {
    let variant = cfg.variants.formula();
    let fpm = |t: f64, sign: Sign| match fidelity_fpm(params, t, sign, variant) {
        Err(Error::DegenerateBranch(_)) => Ok(f64::NAN),
        other => other,
    };
    times
        .iter()
        .map(|&t| {
            Ok(vec![
                t,
                fidelity_f(params, t, variant)?,
                fpm(t, Sign::Plus)?,
                fpm(t, Sign::Minus)?,
            ])
        })
        .collect()
}

/// `t1p85` for 1.85, `tpi` for pi.
pub fn time_tag(t: f64) -> String {
    if (t - std::f64::consts::PI).abs() < 1e-12 {
        "tpi".to_string()
    } else {
        format!("t{}", crate::presets::tag(t))
    }
}

/// The two planes and two diagonal cuts written for every sign and time.
pub fn wigner_specs(cfg: &ExperimentConfig) -> [SliceSpec; 4] {
    let w = &cfg.wigner;
    let axis = w.axis();
    [
        SliceSpec::re_re(axis),
        SliceSpec::im_im(axis),
        SliceSpec::ReDiagonal {
            im_b: w.re_cut_fixed[0],
            im_c: w.re_cut_fixed[1],
            re: axis,
        },
        SliceSpec::ImDiagonal {
            re_b: w.im_cut_fixed[0],
            re_c: w.im_cut_fixed[1],
            im: axis,
        },
    ]
}

fn wigner_outputs(dir: &Path, manifest: &mut RunManifest, case: &Case, cfg: &ExperimentConfig) -> Result<(), CliError> {
    let dims = pair_dims(cfg)?;
    let label = if case.label.is_empty() {
        String::new()
    } else {
        format!("_{}", case.label)
    };
    for sign in [Sign::Plus, Sign::Minus] {
        for &t in &cfg.wigner.times {
            let psi = cat_state(&case.params, t, sign, dims)?.ok_or_else(|| {
                CliError::Core(Error::DegenerateBranch(format!(
                    "{} cat vanishes at t={t}; no Wigner function",
                    sign.name()
                )))
            })?;
            for spec in wigner_specs(cfg) {
                let slice = wigner_slice(&psi, spec)?;
                let mut buf = Vec::new();
                slice
                    .write_csv(&mut buf)
                    .map_err(|e| CliError::Internal(format!("wigner table: {e}")))?;
                let text = String::from_utf8(buf).map_err(|e| CliError::Internal(e.to_string()))?;
                let name = format!("wigner{label}_{}_{}_{}.csv", sign.name(), time_tag(t), spec.name());
                log::info!(
                    "{name}: {} at {}, min {:.6}, max {:.6}",
                    spec.name(),
                    spec.fixed(),
                    slice.min(),
                    slice.max()
                );
                let rows = slice.values.len();
                write_file(dir, manifest, name, "wigner", &case.label, text, rows)?;
            }
        }
    }
    Ok(())
}

fn open_output(
    dir: &Path,
    manifest: &mut RunManifest,
    case: &Case,
    times: &[f64],
    cfg: &ExperimentConfig,
) -> Result<(), CliError> {
    let dims = cfg.dims.mode_dims()?;
    let v = &cfg.variants;
    let gen = open_generator(&case.params, dims, v.open_hamiltonian(), v.frequency(), v.displacement())?;
    let rho0 = initial_state(dims, v.initial_sign.into());
    let opts = EvolveOptions {
        dt: cfg.grid.dt,
        min_eig_every: cfg.grid.min_eig_every,
        strict: false,
        store_states: false,
        ..Default::default()
    };
    let which = cfg.outputs.observable_set();
    let mut text = String::from(OpenObservables::HEADER);
    text.push('\n');
    let name = if case.label.is_empty() { "open" } else { case.label.as_str() };
    log::info!("{name}: integrating {} samples to t={}", times.len(), cfg.grid.t_max);
    let traj = evolve_observed(&rho0, &gen, times, &opts, |t, rho, diag| {
        let obs = observables_at(&case.params, t, rho, diag, which)?;
        let _ = writeln!(text, "{}", format_row(&obs.row()));
        Ok(())
    })?;
    let record = DiagnosticsRecord {
        label: case.label.clone(),
        passed: traj.diagnostics_passed(),
        max_trace_dev: traj.max_trace_dev(),
        min_eig: traj.min_eigenvalue(),
        max_hermiticity_dev: traj.diagnostics.iter().map(|d| d.hermiticity_dev).fold(0.0, f64::max),
        max_step_error: traj.max_step_error,
        steps: traj.steps,
        dt: traj.dt,
    };
    if !record.passed {
        log::warn!(
            "{name}: diagnostics failed (trace deviation {:e}, min eigenvalue {:?})",
            record.max_trace_dev,
            record.min_eig
        );
    }
    manifest.diagnostics.push(record);
    write_file(dir, manifest, case.file_name("open"), "open", &case.label, text, times.len())
}

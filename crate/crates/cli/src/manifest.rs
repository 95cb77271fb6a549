//! `manifest.json`: what was run, with which derived quantities, and which
//! files came out of it.
//!
//! Fields (schema version 1):
//! - `schema_version`: always 1
//! - `tool`: `{ name, version }`
//! - `status`: `partial` while running, then `complete` or `failed`
//! - `note`: error message of a failed run
//! - `config`: the resolved configuration
//! - `cases`: per parameter point, the params, the displaced-frame quantities
//!   and the approximation-check margins
//! - `outputs`: file name relative to the manifest, kind, case label, row
//!   count and SHA-256 of the bytes on disk
//! - `diagnostics`: per open-system trajectory, integrator and positivity
//!   checks
//!
//! Complex numbers are `[re, im]`; non-finite numbers are `null`.

use std::path::Path;

use fredkin_core::c64;
use fredkin_core::model::{ApproxReport, FrameParams};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, ParamsConfig};
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Partial,
    Complete,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct FrameRecord {
    pub xi_b: f64,
    pub xi_c: f64,
    pub g_b: f64,
    pub g_c: f64,
    pub omega_a_tilde: f64,
    pub chi_b_ss: [f64; 2],
    pub chi_c_ss: [f64; 2],
    pub omega_a_1: f64,
}

fn pair(z: c64) -> [f64; 2] {
    [z.re, z.im]
}

impl From<FrameParams> for FrameRecord {
    fn from(f: FrameParams) -> Self {
        Self {
            xi_b: f.xi_b,
            xi_c: f.xi_c,
            g_b: f.g_b,
            g_c: f.g_c,
            omega_a_tilde: f.omega_a_tilde,
            chi_b_ss: pair(f.chi_b_ss),
            chi_c_ss: pair(f.chi_c_ss),
            omega_a_1: f.omega_a_1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ApproxRecord {
    pub n_b: u32,
    pub n_c: u32,
    pub r_b: f64,
    pub r_c: f64,
    pub threshold: f64,
    pub satisfied: bool,
}

impl From<ApproxReport> for ApproxRecord {
    fn from(r: ApproxReport) -> Self {
        Self {
            n_b: r.n_b,
            n_c: r.n_c,
            r_b: r.r_b,
            r_c: r.r_c,
            threshold: r.threshold,
            satisfied: r.satisfied,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseRecord {
    pub label: String,
    pub params: ParamsConfig,
    pub frame: FrameRecord,
    pub approx: ApproxRecord,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputRecord {
    pub path: String,
    pub kind: &'static str,
    pub label: String,
    pub rows: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsRecord {
    pub label: String,
    pub passed: bool,
    pub max_trace_dev: f64,
    pub min_eig: Option<f64>,
    pub max_hermiticity_dev: f64,
    pub max_step_error: f64,
    pub steps: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: Tool,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub config: ExperimentConfig,
    pub cases: Vec<CaseRecord>,
    pub outputs: Vec<OutputRecord>,
    pub diagnostics: Vec<DiagnosticsRecord>,
}

impl RunManifest {
    pub fn new(config: ExperimentConfig, cases: Vec<CaseRecord>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool: Tool {
                name: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
            },
            status: Status::Partial,
            note: None,
            config,
            cases,
            outputs: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    pub fn diagnostics_passed(&self) -> bool {
        self.diagnostics.iter().all(|d| d.passed)
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Internal(format!("manifest serialization: {e}")))?;
        text.push('\n');
        let path = dir.join(FILE_NAME);
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

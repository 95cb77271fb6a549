//! Master-equation evolution in the displaced frame, mode-a measurement and
//! open-system figures of merit.
//!
//! The fast integrator works in the interaction picture generated by the
//! diagonal of the Hamiltonian, `rho~_ij = rho_ij e^{i (E_i - E_j) t}`. The
//! remaining coupling is sparse and slow, and every jump operator moves each
//! basis state to at most one other, so the right-hand side costs a few
//! passes over the density matrix.

use faer::{c64, Mat};

use crate::analytic::{approx_solution, branch_state, make_cat, Sign};
use crate::entanglement::{log_negativity, TwoModeDensity};
use crate::error::{Error, Result};
use crate::fock::{sandwich, DensityMatrix, FockOperator, Ladders, ModeDims, StateVector};
use crate::linalg::{self, CMat};
use crate::model::{
    derive_frame_with, shifted_frequency, steady_displacement, FrequencyConvention, HamiltonianKind,
    HamiltonianTerms, SystemParams,
};

pub const TRACE_TOL: f64 = 1e-7;
pub const MIN_EIG_TOL: f64 = -1e-6;
pub const MIN_PROBABILITY: f64 = 1e-12;

/// Decay rates and thermal occupations of modes a, b, c.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DissipatorSpec {
    pub kappa: [f64; 3],
    pub nbar: [f64; 3],
}

impl DissipatorSpec {
    pub fn from_params(p: &SystemParams) -> Self {
        Self {
            kappa: [p.kappa_a, p.kappa_b, p.kappa_c],
            nbar: [p.nbar_a, p.nbar_b, p.nbar_c],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for v in self.kappa.iter().chain(&self.nbar) {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::InvalidParameter(
                    "decay rates and thermal occupations must be finite and non-negative".into(),
                ));
            }
        }
        Ok(())
    }

    /// `(rate, mode, raising)` for every nonzero jump channel.
    fn channels(&self) -> Vec<(f64, usize, bool)> {
        let mut out = Vec::new();
        for m in 0..3 {
            let (k, n) = (self.kappa[m], self.nbar[m]);
            if k > 0.0 {
                out.push((k * (n + 1.0), m, false));
                if n > 0.0 {
                    out.push((k * n, m, true));
                }
            }
        }
        out
    }
}

fn check_dims(rho: &DensityMatrix, h: &FockOperator) -> Result<()> {
    if rho.dims != h.dims {
        return Err(Error::DimensionMismatch {
            expected: h.dims.total(),
            found: rho.dims.total(),
        });
    }
    let n = rho.dims.total();
    if rho.matrix.nrows() != n || h.matrix.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rho.matrix.nrows(),
        });
    }
    Ok(())
}

/// Dense evaluation of `i[rho, H] + sum kappa (nbar+1) D[o] rho + kappa nbar D[o†] rho`.
pub fn lindblad_rhs(rho: &DensityMatrix, h: &FockOperator, d: &DissipatorSpec) -> Result<CMat> {
    check_dims(rho, h)?;
    d.validate()?;
    let i = c64::new(0.0, 1.0);
    let r = &rho.matrix;
    let mut out = (r * &h.matrix - &h.matrix * r) * faer::Scale(i);
    let l = Ladders::new(rho.dims)?;
    let ops = [&l.a, &l.b, &l.c];
    for (rate, mode, raising) in d.channels() {
        let o = if raising { ops[mode].adjoint().matrix } else { ops[mode].matrix.clone() };
        let od = o.adjoint().to_owned();
        let odo = &od * &o;
        let term = &o * r * &od - (&odo * r + r * &odo) * faer::Scale(c64::new(0.5, 0.0));
        out += term * faer::Scale(c64::new(rate, 0.0));
    }
    Ok(out)
}

/// Compressed sparse rows with a Bohr frequency `E_i - E_j` per entry.
#[derive(Debug, Clone, Default)]
struct Csr {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<c64>,
    freqs: Vec<f64>,
}

impl Csr {
    fn from_dense(m: &CMat, energies: &[f64], skip_diagonal: bool) -> Self {
        let n = m.nrows();
        let mut out = Csr {
            row_ptr: vec![0],
            ..Default::default()
        };
        for i in 0..n {
            for j in 0..n {
                if skip_diagonal && i == j {
                    continue;
                }
                let v = m[(i, j)];
                if v != c64::ZERO {
                    out.cols.push(j);
                    out.vals.push(v);
                    out.freqs.push(energies[i] - energies[j]);
                }
            }
            out.row_ptr.push(out.cols.len());
        }
        out
    }

    fn nnz(&self) -> usize {
        self.cols.len()
    }
}

/// Jump operator with a single nonzero per row: `L[i, src[i]] = weight[i]`.
#[derive(Debug, Clone)]
struct Jump {
    /// Zero where the row is empty; such rows carry zero weight.
    src: Vec<usize>,
    weight: Vec<c64>,
    /// `E_i - E_src(i)`; `None` when it is the same for every row.
    freqs: Option<Vec<f64>>,
}

/// Time-dependent Hermitian perturbation `c(t) O + c(t)* O†`.
pub struct Drive {
    op: Csr,
    op_adj: Csr,
    coeff: Box<dyn Fn(f64) -> c64 + Send + Sync>,
}

/// Structured Lindblad generator over a three-mode truncation.
pub struct Generator {
    dims: ModeDims,
    energies: Vec<f64>,
    coupling: Csr,
    drives: Vec<Drive>,
    jumps: Vec<Jump>,
    decay: Vec<f64>,
}

impl std::fmt::Debug for Generator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Generator")
            .field("dims", &self.dims)
            .field("coupling_nnz", &self.coupling.nnz())
            .field("drives", &self.drives.len())
            .field("jumps", &self.jumps.len())
            .finish()
    }
}

const TILE: usize = 32;

impl Generator {
    pub fn new(h: &FockOperator, d: &DissipatorSpec) -> Result<Self> {
        d.validate()?;
        let n = h.dims.total();
        if h.matrix.nrows() != n || h.matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: h.matrix.nrows(),
            });
        }
        if !linalg::is_finite(h.matrix.as_ref()) {
            return Err(Error::NonFinite("Hamiltonian"));
        }
        let herm = h.hermiticity_deviation();
        if herm > 1e-10 * linalg::max_abs(h.matrix.as_ref()).max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "Hamiltonian is not Hermitian (deviation {herm:e})"
            )));
        }
        let energies: Vec<f64> = (0..n).map(|i| h.matrix[(i, i)].re).collect();
        let coupling = Csr::from_dense(&h.matrix, &energies, true);

        let dims = h.dims;
        let mut jumps = Vec::new();
        let mut decay = vec![0.0; n];
        for (rate, mode, raising) in d.channels() {
            let jump = Self::ladder_jump(dims, &energies, rate, mode, raising);
            for i in 0..n {
                decay[jump.src[i]] += jump.weight[i].norm_sqr();
            }
            jumps.push(jump);
        }
        Ok(Self {
            dims,
            energies,
            coupling,
            drives: Vec::new(),
            jumps,
            decay,
        })
    }

    fn ladder_jump(dims: ModeDims, energies: &[f64], rate: f64, mode: usize, raising: bool) -> Jump {
        let n = dims.total();
        let sizes = [dims.dim_a(), dims.dim_b(), dims.dim_c()];
        let mut src = vec![0; n];
        let mut rows = Vec::new();
        let mut weight = vec![c64::ZERO; n];
        let amp = rate.sqrt();
        for (i, (s, w)) in src.iter_mut().zip(weight.iter_mut()).enumerate() {
            let (na, nb, nc) = dims.occupations(i);
            let mut occ = [na, nb, nc];
            // lowering: L|occ+1> = sqrt(occ+1)|occ>; raising: L|occ-1> = sqrt(occ)|occ>
            if raising {
                if occ[mode] == 0 {
                    continue;
                }
                let k = occ[mode];
                occ[mode] -= 1;
                *w = c64::new(amp * (k as f64).sqrt(), 0.0);
            } else {
                if occ[mode] + 1 >= sizes[mode] {
                    continue;
                }
                occ[mode] += 1;
                *w = c64::new(amp * (occ[mode] as f64).sqrt(), 0.0);
            }
            *s = dims.index(occ[0], occ[1], occ[2]);
            rows.push(i);
        }
        let diffs: Vec<f64> = (0..n).map(|i| energies[i] - energies[src[i]]).collect();
        let uniform = match rows.first() {
            None => true,
            Some(&r) => rows
                .iter()
                .all(|&i| (diffs[i] - diffs[r]).abs() <= 1e-12 * diffs[r].abs().max(1.0)),
        };
        Jump {
            src,
            weight,
            freqs: if uniform { None } else { Some(diffs) },
        }
    }

    /// Adds `coeff(t) op + coeff(t)* op†` to the Hamiltonian.
    pub fn add_drive(
        &mut self,
        op: &FockOperator,
        coeff: impl Fn(f64) -> c64 + Send + Sync + 'static,
    ) -> Result<()> {
        if op.dims != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims.total(),
                found: op.dims.total(),
            });
        }
        self.drives.push(Drive {
            op: Csr::from_dense(&op.matrix, &self.energies, false),
            op_adj: Csr::from_dense(&op.adjoint().matrix, &self.energies, false),
            coeff: Box::new(coeff),
        });
        Ok(())
    }

    pub fn dims(&self) -> ModeDims {
        self.dims
    }

    fn n(&self) -> usize {
        self.dims.total()
    }

    /// Time-dependent values of every sparse term, `c(t) V_ik e^{i w_ik t}`.
    fn sparse_values(&self, t: f64, vals: &mut Vec<Vec<c64>>) {
        let mut terms: Vec<(&Csr, c64)> = vec![(&self.coupling, c64::new(1.0, 0.0))];
        for d in &self.drives {
            let c = (d.coeff)(t);
            terms.push((&d.op, c));
            terms.push((&d.op_adj, c.conj()));
        }
        vals.resize(terms.len(), Vec::new());
        for ((csr, c), out) in terms.iter().zip(vals.iter_mut()) {
            out.clear();
            out.extend(
                csr.vals
                    .iter()
                    .zip(&csr.freqs)
                    .map(|(v, f)| v * c * c64::new(0.0, f * t).exp()),
            );
        }
    }

    fn sparse_terms(&self) -> impl Iterator<Item = &Csr> {
        std::iter::once(&self.coupling).chain(self.drives.iter().flat_map(|d| [&d.op, &d.op_adj]))
    }

    /// Interaction-picture right-hand side; `rho` and `out` are row-major.
    /// Works tile by tile on the upper triangle and mirrors.
    fn rhs(&self, t: f64, rho: &[c64], out: &mut [c64], scratch: &mut Scratch) {
        let n = self.n();
        self.sparse_values(t, &mut scratch.vals);
        let csrs: Vec<&Csr> = self.sparse_terms().collect();
        let vals = &scratch.vals;

        // with a uniform Bohr frequency the interaction-picture phases cancel
        scratch.weights.resize(self.jumps.len(), Vec::new());
        for (jump, w) in self.jumps.iter().zip(scratch.weights.iter_mut()) {
            w.clear();
            match &jump.freqs {
                None => w.extend_from_slice(&jump.weight),
                Some(f) => w.extend(
                    jump.weight
                        .iter()
                        .zip(f)
                        .map(|(w, f)| w * c64::new(0.0, f * t).exp()),
                ),
            }
        }
        let weights = &scratch.weights;

        let mut tile = [[c64::ZERO; TILE]; TILE];
        for bi in (0..n).step_by(TILE) {
            let ie = (bi + TILE).min(n);
            for bj in (bi..n).step_by(TILE) {
                let je = (bj + TILE).min(n);
                let (ni, nj) = (ie - bi, je - bj);
                for row in tile.iter_mut().take(ni) {
                    row[..nj].fill(c64::ZERO);
                }
                // (V rho)_ij
                for (csr, v) in csrs.iter().zip(vals) {
                    for i in bi..ie {
                        let trow = &mut tile[i - bi][..nj];
                        for k in csr.row_ptr[i]..csr.row_ptr[i + 1] {
                            let vk = v[k];
                            let src = &rho[csr.cols[k] * n + bj..csr.cols[k] * n + je];
                            for (a, b) in trow.iter_mut().zip(src) {
                                *a += vk * b;
                            }
                        }
                    }
                }
                // - conj((V rho)_ji)
                for (csr, v) in csrs.iter().zip(vals) {
                    for j in bj..je {
                        let jj = j - bj;
                        for k in csr.row_ptr[j]..csr.row_ptr[j + 1] {
                            let vk = v[k].conj();
                            let src = &rho[csr.cols[k] * n + bi..csr.cols[k] * n + ie];
                            for (ii, b) in src.iter().enumerate() {
                                tile[ii][jj] -= vk * b.conj();
                            }
                        }
                    }
                }
                for i in bi..ie {
                    let gi = 0.5 * self.decay[i];
                    let r = &rho[i * n + bj..i * n + je];
                    for ((a, b), j) in tile[i - bi][..nj].iter_mut().zip(r).zip(bj..je) {
                        *a = c64::new(a.im, -a.re) - b * (gi + 0.5 * self.decay[j]);
                    }
                }
                for (jump, w) in self.jumps.iter().zip(weights) {
                    for i in bi..ie {
                        let wi = w[i];
                        if wi == c64::ZERO {
                            continue;
                        }
                        let src = &rho[jump.src[i] * n..(jump.src[i] + 1) * n];
                        for (jj, a) in tile[i - bi][..nj].iter_mut().enumerate() {
                            let j = bj + jj;
                            *a += wi * w[j].conj() * src[jump.src[j]];
                        }
                    }
                }
                for i in bi..ie {
                    let j0 = if bi == bj { i } else { bj };
                    for j in j0..je {
                        let v = tile[i - bi][j - bj];
                        if i == j {
                            out[i * n + i] = c64::new(v.re, 0.0);
                        } else {
                            out[i * n + j] = v;
                            out[j * n + i] = v.conj();
                        }
                    }
                }
            }
        }
    }

    /// Lab-frame right-hand side at time `t`, for testing against `lindblad_rhs`.
    pub fn lab_rhs(&self, t: f64, rho: &DensityMatrix) -> Result<CMat> {
        if rho.dims != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims.total(),
                found: rho.dims.total(),
            });
        }
        let n = self.n();
        let tilde = self.to_frame(t, &rho.matrix);
        let mut out = vec![c64::ZERO; n * n];
        self.rhs(t, &tilde, &mut out, &mut Scratch::default());
        // d/dt of the lab matrix: back-rotate and add the diagonal commutator
        let mut m = self.from_frame(t, &out).matrix;
        for i in 0..n {
            for j in 0..n {
                let w = self.energies[i] - self.energies[j];
                if w != 0.0 {
                    m[(i, j)] += c64::new(0.0, -w) * rho.matrix[(i, j)];
                }
            }
        }
        Ok(m)
    }

    /// `e^{i E_i t}` for every basis state.
    fn phases(&self, t: f64) -> Vec<c64> {
        self.energies.iter().map(|e| c64::new(0.0, e * t).exp()).collect()
    }

    fn to_frame(&self, t: f64, m: &CMat) -> Vec<c64> {
        let n = self.n();
        let u = self.phases(t);
        let mut out = vec![c64::ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = m[(i, j)] * u[i] * u[j].conj();
            }
        }
        out
    }

    fn from_frame(&self, t: f64, v: &[c64]) -> DensityMatrix {
        let n = self.n();
        let u = self.phases(t);
        DensityMatrix {
            matrix: Mat::from_fn(n, n, |i, j| v[i * n + j] * u[i].conj() * u[j]),
            dims: self.dims,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    /// Initial fixed step.
    pub dt: f64,
    /// Allowed local error of one full step (max entry), estimated as the
    /// difference between one step and two half steps.
    pub step_tol: f64,
    /// Check the step by halving every this many steps (the first step is always checked).
    pub check_every: usize,
    pub max_halvings: u32,
    /// Compute the minimum eigenvalue every this many samples (0 disables).
    pub min_eig_every: usize,
    /// Fail when a diagnostic leaves its tolerance.
    pub strict: bool,
    pub store_states: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            step_tol: 1e-8,
            check_every: 100,
            max_halvings: 6,
            min_eig_every: 1,
            strict: true,
            store_states: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleDiagnostics {
    pub trace_dev: f64,
    pub hermiticity_dev: f64,
    pub min_eig: Option<f64>,
}

impl SampleDiagnostics {
    pub fn passed(&self) -> bool {
        self.trace_dev < TRACE_TOL && self.min_eig.map_or(true, |m| m > MIN_EIG_TOL)
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Empty unless states were requested.
    pub states: Vec<DensityMatrix>,
    pub diagnostics: Vec<SampleDiagnostics>,
    pub dt: f64,
    pub max_step_error: f64,
    pub steps: usize,
}

impl Trajectory {
    pub fn diagnostics_passed(&self) -> bool {
        self.diagnostics.iter().all(|d| d.passed())
    }

    pub fn max_trace_dev(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.trace_dev).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> Option<f64> {
        self.diagnostics
            .iter()
            .filter_map(|d| d.min_eig)
            .reduce(f64::min)
    }
}

#[derive(Default)]
struct Scratch {
    vals: Vec<Vec<c64>>,
    weights: Vec<Vec<c64>>,
}

struct Workspace {
    k: Vec<c64>,
    acc: Vec<c64>,
    tmp: Vec<c64>,
    scratch: Scratch,
}

impl Workspace {
    fn new(len: usize) -> Self {
        Self {
            k: vec![c64::ZERO; len],
            acc: vec![c64::ZERO; len],
            tmp: vec![c64::ZERO; len],
            scratch: Scratch::default(),
        }
    }
}

/// `acc += a k` and `tmp = y + b k` in one pass.
fn stage(acc: &mut [c64], a: f64, tmp: &mut [c64], y: &[c64], b: f64, k: &[c64]) {
    for (((acc, tmp), y), k) in acc.iter_mut().zip(tmp.iter_mut()).zip(y).zip(k) {
        *acc += k * a;
        *tmp = y + k * b;
    }
}

impl Generator {
    fn rk4_step(&self, t: f64, h: f64, y: &mut [c64], ws: &mut Workspace) {
        let Workspace { k, acc, tmp, scratch } = ws;
        acc.copy_from_slice(y);
        self.rhs(t, y, k, scratch);
        stage(acc, h / 6.0, tmp, y, h / 2.0, k);
        self.rhs(t + h / 2.0, tmp, k, scratch);
        stage(acc, h / 3.0, tmp, y, h / 2.0, k);
        self.rhs(t + h / 2.0, tmp, k, scratch);
        stage(acc, h / 3.0, tmp, y, h, k);
        self.rhs(t + h, tmp, k, scratch);
        for (y, (a, k)) in y.iter_mut().zip(acc.iter().zip(k.iter())) {
            *y = a + k * (h / 6.0);
        }
        symmetrize(y, self.n());
    }
}

fn symmetrize(y: &mut [c64], n: usize) {
    for i in 0..n {
        y[i * n + i].im = 0.0;
        for j in i + 1..n {
            let v = (y[i * n + j] + y[j * n + i].conj()) * 0.5;
            y[i * n + j] = v;
            y[j * n + i] = v.conj();
        }
    }
}

fn max_diff(a: &[c64], b: &[c64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn validate_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::EmptyGrid("no sample times"));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("sample times"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("sample times must be strictly increasing".into()));
    }
    Ok(())
}

/// Integrates from `rho0` at `times[0]`, calling `observe` at every sample
/// time with the lab-frame state.
pub fn evolve_observed(
    rho0: &DensityMatrix,
    gen: &Generator,
    times: &[f64],
    opts: &EvolveOptions,
    mut observe: impl FnMut(f64, &DensityMatrix, &SampleDiagnostics) -> Result<()>,
) -> Result<Trajectory> {
    validate_times(times)?;
    if rho0.dims != gen.dims {
        return Err(Error::DimensionMismatch {
            expected: gen.dims.total(),
            found: rho0.dims.total(),
        });
    }
    if !(opts.dt > 0.0) || !opts.dt.is_finite() {
        return Err(Error::StepSize(format!("invalid step {}", opts.dt)));
    }
    let n = gen.n();
    let mut y = gen.to_frame(times[0], &rho0.matrix);
    let mut ws = Workspace::new(n * n);
    let mut probe = vec![c64::ZERO; n * n];
    let mut dt = opts.dt;
    let mut halvings = 0;
    let mut max_err = 0.0f64;
    let mut steps = 0usize;
    let mut traj = Trajectory {
        times: times.to_vec(),
        states: Vec::new(),
        diagnostics: Vec::with_capacity(times.len()),
        dt,
        max_step_error: 0.0,
        steps: 0,
    };

    let mut sample = |k: usize, t: f64, y: &[c64], traj: &mut Trajectory| -> Result<()> {
        let rho = gen.from_frame(t, y);
        let trace_dev = (rho.trace() - c64::new(1.0, 0.0)).norm();
        let want_eig = opts.min_eig_every > 0 && (k % opts.min_eig_every == 0 || k + 1 == times.len());
        let min_eig = if want_eig { Some(rho.min_eigenvalue()?) } else { None };
        let diag = SampleDiagnostics {
            trace_dev,
            hermiticity_dev: rho.hermiticity_deviation(),
            min_eig,
        };
        if opts.strict && !diag.passed() {
            return Err(Error::Diagnostic(format!(
                "t={t}: trace deviation {trace_dev:e}, min eigenvalue {min_eig:?}"
            )));
        }
        observe(t, &rho, &diag)?;
        traj.diagnostics.push(diag);
        if opts.store_states {
            traj.states.push(rho);
        }
        Ok(())
    };

    sample(0, times[0], &y, &mut traj)?;
    let mut t = times[0];
    for (k, &target) in times.iter().enumerate().skip(1) {
        while t < target {
            let remaining = target - t;
            let nsteps = (remaining / dt - 1e-9).ceil().max(1.0);
            let h = remaining / nsteps;
            if opts.check_every > 0 && steps % opts.check_every == 0 {
                probe.copy_from_slice(&y);
                gen.rk4_step(t, h, &mut probe, &mut ws);
                let full = probe.clone();
                probe.copy_from_slice(&y);
                gen.rk4_step(t, h / 2.0, &mut probe, &mut ws);
                gen.rk4_step(t + h / 2.0, h / 2.0, &mut probe, &mut ws);
                // |full - half| = (15/16) of the full step's local error
                let err = max_diff(&full, &probe) * (16.0 / 15.0);
                if err > opts.step_tol {
                    if halvings >= opts.max_halvings {
                        return Err(Error::StepSize(format!(
                            "error estimate {err:e} exceeds {:e} at t={t} with dt={h:e}",
                            opts.step_tol
                        )));
                    }
                    halvings += 1;
                    dt = h / 2.0;
                    log::info!("step error {err:e} at t={t}: halving step to {dt:e}");
                    continue;
                }
                max_err = max_err.max(err);
                y.copy_from_slice(&probe);
                t += h;
                steps += 1;
                // the probe already advanced by two half steps
                if nsteps == 1.0 {
                    t = target;
                }
                continue;
            }
            gen.rk4_step(t, h, &mut y, &mut ws);
            steps += 1;
            t = if nsteps == 1.0 { target } else { t + h };
        }
        sample(k, target, &y, &mut traj)?;
    }
    traj.dt = dt;
    traj.max_step_error = max_err;
    traj.steps = steps;
    Ok(traj)
}

/// Integrates the master equation, keeping every sampled state.
pub fn evolve(
    rho0: &DensityMatrix,
    h: &FockOperator,
    d: &DissipatorSpec,
    times: &[f64],
) -> Result<Trajectory> {
    check_dims(rho0, h)?;
    let gen = Generator::new(h, d)?;
    evolve_observed(rho0, &gen, times, &EvolveOptions::default(), |_, _, _| Ok(()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DisplacementMode {
    #[default]
    Steady,
    Transient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementTrack {
    pub mode: DisplacementMode,
    pub times: Vec<f64>,
    pub chi_b: Vec<c64>,
    pub chi_c: Vec<c64>,
}

/// Residual `|-i Omega - i Delta chi - kappa chi / 2|` of a candidate steady state.
pub fn displacement_residual(drive: f64, delta: f64, kappa: f64, chi: c64) -> f64 {
    (c64::new(0.0, -drive) - c64::new(0.0, delta) * chi - chi * (0.5 * kappa)).norm()
}

/// Closed-form solution of the displacement equation with `chi(0) = 0`.
pub fn transient_displacement(drive: f64, delta: f64, kappa: f64, t: f64) -> c64 {
    let ss = steady_displacement(drive, delta, kappa);
    ss * (c64::new(1.0, 0.0) - (c64::new(-0.5 * kappa, -delta) * t).exp())
}

const TRACK_STEP: f64 = 1e-3;

pub fn displacement_track(
    params: &SystemParams,
    times: &[f64],
    mode: DisplacementMode,
) -> Result<DisplacementTrack> {
    validate_times(times)?;
    if times[0] < 0.0 {
        return Err(Error::InvalidParameter("displacement track starts at t = 0".into()));
    }
    let modes = [
        (params.drive_b, params.delta_b, params.kappa_b),
        (params.drive_c, params.delta_c, params.kappa_c),
    ];
    let mut tracks: [Vec<c64>; 2] = [Vec::new(), Vec::new()];
    for (track, &(drive, delta, kappa)) in tracks.iter_mut().zip(&modes) {
        match mode {
            DisplacementMode::Steady => {
                let ss = steady_displacement(drive, delta, kappa);
                let res = displacement_residual(drive, delta, kappa, ss);
                if res > 1e-10 * drive.abs().max(1.0) {
                    return Err(Error::Diagnostic(format!("steady displacement residual {res:e}")));
                }
                track.resize(times.len(), ss);
            }
            DisplacementMode::Transient => {
                let f = |chi: c64| c64::new(0.0, -drive) - c64::new(0.5 * kappa, delta) * chi;
                let mut chi = c64::ZERO;
                let mut t = 0.0;
                for &target in times {
                    let span = target - t;
                    if span > 0.0 {
                        let n = (span / TRACK_STEP).ceil().max(1.0) as usize;
                        let h = span / n as f64;
                        for _ in 0..n {
                            let k1 = f(chi);
                            let k2 = f(chi + k1 * (h / 2.0));
                            let k3 = f(chi + k2 * (h / 2.0));
                            let k4 = f(chi + k3 * h);
                            chi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
                        }
                        t = target;
                    }
                    track.push(chi);
                }
            }
        }
    }
    let [chi_b, chi_c] = tracks;
    Ok(DisplacementTrack {
        mode,
        times: times.to_vec(),
        chi_b,
        chi_c,
    })
}

/// Which displaced-frame Hamiltonian drives the open system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum OpenHamiltonian {
    #[default]
    Ext,
    App,
}

/// Generator for the displaced-frame master equation. In transient mode the
/// displacement-dependent terms follow `chi(t)` from `chi(0) = 0`.
pub fn open_generator(
    params: &SystemParams,
    dims: ModeDims,
    which: OpenHamiltonian,
    conv: FrequencyConvention,
    mode: DisplacementMode,
) -> Result<Generator> {
    params.validate()?;
    let kind = match which {
        OpenHamiltonian::Ext => HamiltonianKind::OpenExt,
        OpenHamiltonian::App => HamiltonianKind::OpenApp,
    };
    let h = HamiltonianTerms::for_kind(kind, params, conv)?.build(dims);
    let mut gen = Generator::new(&h, &DissipatorSpec::from_params(params))?;
    if mode == DisplacementMode::Transient {
        let f = derive_frame_with(params, conv)?;
        let p = *params;
        let base = match conv {
            FrequencyConvention::ModeA => p.omega_a,
            FrequencyConvention::ModeC { omega_c } => omega_c,
        };
        let chi = move |t: f64| {
            (
                transient_displacement(p.drive_b, p.delta_b, p.kappa_b, t),
                transient_displacement(p.drive_c, p.delta_c, p.kappa_c, t),
            )
        };
        let l = Ladders::new(dims)?;
        let na = l.n_a();
        let omega_ss = f.omega_a_1;
        gen.add_drive(&na, move |t| {
            let (cb, cc) = chi(t);
            c64::new(0.5 * (shifted_frequency(base, p.g, cb, cc) - omega_ss), 0.0)
        })?;
        let (chi_b_ss, chi_c_ss) = (f.chi_b_ss, f.chi_c_ss);
        gen.add_drive(&(&na * &l.b.adjoint()), move |t| (chi(t).1 - chi_c_ss) * p.g)?;
        gen.add_drive(&(&na * &l.c.adjoint()), move |t| (chi(t).0 - chi_b_ss) * p.g)?;
    }
    Ok(gen)
}

/// `|s>_a |0>_b |0>_c` with `|±> = (|0> ± |1>)/sqrt(2)`.
pub fn initial_state(dims: ModeDims, sign: Sign) -> DensityMatrix {
    let mut psi = StateVector::basis(dims, 0, 0, 0);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    psi.amplitudes[0] = c64::new(h, 0.0);
    psi.amplitudes[dims.index(1, 0, 0)] = c64::new(h * sign.factor(), 0.0);
    psi.to_density()
}

/// Contracts mode a against `|±>` and renormalizes, returning the
/// conditional state of modes b, c and the detection probability.
pub fn project_mode_a(rho: &DensityMatrix, sign: Sign) -> Result<(TwoModeDensity, f64)> {
    let dims = rho.dims;
    let m = dims.dim_b() * dims.dim_c();
    let s = sign.factor();
    let r = &rho.matrix;
    let block = Mat::from_fn(m, m, |i, j| {
        (r[(i, j)] + r[(m + i, m + j)] + (r[(i, m + j)] + r[(m + i, j)]) * s) * 0.5
    });
    let p = linalg::trace(block.as_ref()).re;
    if !(p >= MIN_PROBABILITY) {
        return Err(Error::UndefinedConditionalState(p));
    }
    let herm = Mat::from_fn(m, m, |i, j| (block[(i, j)] + block[(j, i)].conj()) * (0.5 / p));
    Ok((TwoModeDensity::new(herm, dims.pair())?, p))
}

/// One row of the open-system observables. Quantities of an undefined
/// conditional state or a vanishing target cat are NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpenObservables {
    pub t: f64,
    pub f: f64,
    pub f_plus: f64,
    pub f_minus: f64,
    pub p_plus: f64,
    pub p_minus: f64,
    pub n_plus: f64,
    pub n_minus: f64,
    pub trace_dev: f64,
    pub min_eig: f64,
}

impl OpenObservables {
    pub const HEADER: &'static str = "t,f,f_plus,f_minus,P_plus,P_minus,N_plus,N_minus,trace_dev,min_eig";

    pub fn row(&self) -> [f64; 10] {
        [
            self.t,
            self.f,
            self.f_plus,
            self.f_minus,
            self.p_plus,
            self.p_minus,
            self.n_plus,
            self.n_minus,
            self.trace_dev,
            self.min_eig,
        ]
    }
}

/// Which observables to evaluate; negativities dominate the cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObservableSet {
    pub fidelities: bool,
    pub negativity: bool,
}

impl Default for ObservableSet {
    fn default() -> Self {
        Self {
            fidelities: true,
            negativity: true,
        }
    }
}

/// `<psi(t)|rho|psi(t)>` against the closed-system approximate state.
pub fn open_fidelity(params: &SystemParams, t: f64, rho: &DensityMatrix) -> Result<f64> {
    let target = branch_state(&approx_solution(params, t)?, rho.dims)?;
    rho.overlap(&target)
}

/// Probability, fidelity against the target cat and negativity for one sign.
pub fn conditional_observables(
    params: &SystemParams,
    t: f64,
    rho: &DensityMatrix,
    sign: Sign,
    which: ObservableSet,
) -> Result<(f64, f64, f64)> {
    let (cond, p) = match project_mode_a(rho, sign) {
        Ok(x) => x,
        Err(Error::UndefinedConditionalState(p)) => return Ok((p.max(0.0), f64::NAN, f64::NAN)),
        Err(e) => return Err(e),
    };
    let fid = if which.fidelities {
        match make_cat(&approx_solution(params, t)?, sign) {
            Ok(cat) => {
                let psi = cat.to_state(rho.dims.pair())?;
                sandwich(cond.matrix(), &psi.amplitudes)
            }
            Err(Error::DegenerateBranch(_)) => f64::NAN,
            Err(e) => return Err(e),
        }
    } else {
        f64::NAN
    };
    let neg = if which.negativity {
        log_negativity(&cond)?.value
    } else {
        f64::NAN
    };
    Ok((p, fid, neg))
}

pub fn observables_at(
    params: &SystemParams,
    t: f64,
    rho: &DensityMatrix,
    diag: &SampleDiagnostics,
    which: ObservableSet,
) -> Result<OpenObservables> {
    let f = if which.fidelities {
        open_fidelity(params, t, rho)?
    } else {
        f64::NAN
    };
    let (p_plus, f_plus, n_plus) = conditional_observables(params, t, rho, Sign::Plus, which)?;
    let (p_minus, f_minus, n_minus) = conditional_observables(params, t, rho, Sign::Minus, which)?;
    Ok(OpenObservables {
        t,
        f,
        f_plus,
        f_minus,
        p_plus,
        p_minus,
        n_plus,
        n_minus,
        trace_dev: diag.trace_dev,
        min_eig: diag.min_eig.unwrap_or(f64::NAN),
    })
}

fn stored(traj: &Trajectory) -> Result<&[DensityMatrix]> {
    if traj.states.len() != traj.times.len() {
        return Err(Error::InvalidParameter("trajectory was evolved without storing states".into()));
    }
    Ok(&traj.states)
}

/// `(t, f, f_plus, f_minus)` along a stored trajectory.
pub fn open_fidelities(traj: &Trajectory, params: &SystemParams) -> Result<Vec<[f64; 4]>> {
    let which = ObservableSet {
        fidelities: true,
        negativity: false,
    };
    stored(traj)?
        .iter()
        .zip(&traj.times)
        .map(|(rho, &t)| {
            let f = open_fidelity(params, t, rho)?;
            let (_, fp, _) = conditional_observables(params, t, rho, Sign::Plus, which)?;
            let (_, fm, _) = conditional_observables(params, t, rho, Sign::Minus, which)?;
            Ok([t, f, fp, fm])
        })
        .collect()
}

/// Logarithmic negativity of the conditional state along a stored trajectory.
pub fn open_negativity(traj: &Trajectory, sign: Sign) -> Result<Vec<f64>> {
    stored(traj)?
        .iter()
        .map(|rho| match project_mode_a(rho, sign) {
            Ok((cond, _)) => Ok(log_negativity(&cond)?.value),
            Err(Error::UndefinedConditionalState(_)) => Ok(f64::NAN),
            Err(e) => Err(e),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_h_app;

    fn random_density(dims: ModeDims, seed: u64) -> DensityMatrix {
        let n = dims.total();
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = Mat::from_fn(n, n, |_, _| c64::new(next(), next()));
        let m = &a * a.adjoint();
        let tr = linalg::trace(m.as_ref()).re;
        DensityMatrix {
            matrix: m * faer::Scale(c64::new(1.0 / tr, 0.0)),
            dims,
        }
    }

    fn lossy() -> SystemParams {
        SystemParams {
            kappa_a: 0.3,
            kappa_b: 0.2,
            kappa_c: 0.1,
            nbar_a: 0.2,
            nbar_b: 0.5,
            nbar_c: 0.0,
            g: 0.3,
            drive_b: 2.0,
            drive_c: 1.5,
            ..SystemParams::default()
        }
    }

    #[test]
    fn dense_rhs_is_traceless() {
        let dims = ModeDims::new(2, 3, 4).unwrap();
        let p = lossy();
        let h = build_h_app(&p, dims).unwrap();
        let rho = random_density(dims, 7);
        let r = lindblad_rhs(&rho, &h, &DissipatorSpec::from_params(&p)).unwrap();
        assert!(linalg::trace(r.as_ref()).norm() < 1e-12);
    }

    #[test]
    fn vacuum_is_dark() {
        let dims = ModeDims::new(2, 3, 3).unwrap();
        let h = FockOperator::zeros(dims);
        let d = DissipatorSpec {
            kappa: [0.4, 0.5, 0.6],
            nbar: [0.0; 3],
        };
        let rho = StateVector::basis(dims, 0, 0, 0).to_density();
        let r = lindblad_rhs(&rho, &h, &d).unwrap();
        assert_eq!(linalg::max_abs(r.as_ref()), 0.0);
    }

    #[test]
    fn amplitude_damping_rate() {
        let dims = ModeDims::new(2, 3, 3).unwrap();
        let h = FockOperator::zeros(dims);
        let d = DissipatorSpec {
            kappa: [0.7, 0.0, 0.0],
            nbar: [0.0; 3],
        };
        let rho = StateVector::basis(dims, 1, 0, 0).to_density();
        let r = lindblad_rhs(&rho, &h, &d).unwrap();
        let na = Ladders::new(dims).unwrap().n_a();
        let rate = DensityMatrix { matrix: r, dims }.expectation(&na).unwrap();
        assert!((rate.re + 0.7).abs() < 1e-14);
    }

    #[test]
    fn structured_rhs_matches_dense() {
        let dims = ModeDims::new(2, 3, 4).unwrap();
        let p = lossy();
        let d = DissipatorSpec::from_params(&p);
        let conv = FrequencyConvention::ModeA;
        let h = HamiltonianTerms::for_kind(HamiltonianKind::OpenExt, &p, conv).unwrap().build(dims);
        let gen = Generator::new(&h, &d).unwrap();
        let rho = random_density(dims, 3);
        let dense = lindblad_rhs(&rho, &h, &d).unwrap();
        for t in [0.0, 0.37, 5.0] {
            let fast = gen.lab_rhs(t, &rho).unwrap();
            assert!(linalg::max_abs_diff(fast.as_ref(), dense.as_ref()) < 1e-12, "t={t}");
        }
    }

    #[test]
    fn structured_rhs_with_dissipative_frame_shifts() {
        // a Hamiltonian whose diagonal is not uniform along jump directions
        let dims = ModeDims::new(3, 3, 3).unwrap();
        let mut h = build_h_app(&lossy(), dims).unwrap();
        for i in 0..dims.total() {
            h.matrix[(i, i)] += c64::new(0.1 * (i * i) as f64, 0.0);
        }
        let d = DissipatorSpec::from_params(&lossy());
        let gen = Generator::new(&h, &d).unwrap();
        assert!(gen.jumps.iter().any(|j| j.freqs.is_some()));
        let rho = random_density(dims, 11);
        let dense = lindblad_rhs(&rho, &h, &d).unwrap();
        let fast = gen.lab_rhs(1.3, &rho).unwrap();
        assert!(linalg::max_abs_diff(fast.as_ref(), dense.as_ref()) < 1e-11);
    }

    #[test]
    fn evolve_matches_liouvillian_exponential() {
        let dims = ModeDims::new(2, 3, 3).unwrap();
        let p = lossy();
        let d = DissipatorSpec::from_params(&p);
        let h = build_h_app(&p, dims).unwrap();
        let n = dims.total();
        // column-stacked superoperator built by applying the dense rhs to basis matrices
        let mut sup = CMat::zeros(n * n, n * n);
        for j in 0..n {
            for i in 0..n {
                let mut e = CMat::zeros(n, n);
                e[(i, j)] = c64::new(1.0, 0.0);
                let r = lindblad_rhs(&DensityMatrix { matrix: e, dims }, &h, &d).unwrap();
                for jj in 0..n {
                    for ii in 0..n {
                        sup[(jj * n + ii, j * n + i)] = r[(ii, jj)];
                    }
                }
            }
        }
        let t = 0.8;
        let prop = linalg::expm((sup * faer::Scale(c64::new(t, 0.0))).as_ref()).unwrap();
        let rho0 = initial_state(dims, Sign::Plus);
        let traj = evolve(&rho0, &h, &d, &[0.0, t]).unwrap();
        let mut err = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                let mut v = c64::ZERO;
                for jj in 0..n {
                    for ii in 0..n {
                        v += prop[(j * n + i, jj * n + ii)] * rho0.matrix[(ii, jj)];
                    }
                }
                err = err.max((v - traj.states[1].matrix[(i, j)]).norm());
            }
        }
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn projection_examples() {
        let dims = ModeDims::new(2, 3, 3).unwrap();
        let (cond, p) = project_mode_a(&initial_state(dims, Sign::Plus), Sign::Plus).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
        assert!((cond.matrix()[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!(matches!(
            project_mode_a(&initial_state(dims, Sign::Plus), Sign::Minus),
            Err(Error::UndefinedConditionalState(_))
        ));
        let ground = StateVector::basis(dims, 0, 0, 0).to_density();
        let (_, pp) = project_mode_a(&ground, Sign::Plus).unwrap();
        let (_, pm) = project_mode_a(&ground, Sign::Minus).unwrap();
        assert!((pp - 0.5).abs() < 1e-15 && (pm - 0.5).abs() < 1e-15);
    }

    #[test]
    fn steady_and_transient_displacements() {
        let p = SystemParams {
            kappa_b: 0.001,
            kappa_c: 0.5,
            ..SystemParams::default()
        };
        let steady = displacement_track(&p, &[0.0, 1.0], DisplacementMode::Steady).unwrap();
        assert!((steady.chi_b[0] - c64::new(-50.0, -0.0125)).norm() < 1e-5);

        let times: Vec<f64> = (0..=50).map(|k| 2.0 * k as f64).collect();
        let tr = displacement_track(&p, &times, DisplacementMode::Transient).unwrap();
        for (k, &t) in times.iter().enumerate() {
            let exact = transient_displacement(p.drive_c, p.delta_c, p.kappa_c, t);
            assert!((tr.chi_c[k] - exact).norm() < 1e-8, "t={t}");
        }
        let ss = steady_displacement(p.drive_c, p.delta_c, p.kappa_c);
        assert!((tr.chi_c[50] - ss).norm() < 1e-6);
    }

    #[test]
    fn rejects_non_increasing_times() {
        let dims = ModeDims::new(2, 2, 2).unwrap();
        let h = FockOperator::zeros(dims);
        let r = evolve(&initial_state(dims, Sign::Plus), &h, &DissipatorSpec::default(), &[0.0, 0.0]);
        assert!(r.is_err());
    }
}

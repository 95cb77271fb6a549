//! Truncated Fock spaces for modes a, b, c and the operators acting on them.
//!
//! Composite basis states are ordered row-major in `(n_a, n_b, n_c)`:
//! `i = n_a * dim_b * dim_c + n_b * dim_c + n_c`.

use std::ops::{Add, Mul, Sub};

use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

pub const DEFAULT_DIM_CAP: usize = 65536;

/// Mode truncations of the three-mode system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeDims {
    dim_a: usize,
    dim_b: usize,
    dim_c: usize,
}

impl ModeDims {
    pub fn new(dim_a: usize, dim_b: usize, dim_c: usize) -> Result<Self> {
        Self::with_cap(dim_a, dim_b, dim_c, DEFAULT_DIM_CAP)
    }

    pub fn with_cap(dim_a: usize, dim_b: usize, dim_c: usize, cap: usize) -> Result<Self> {
        if dim_a < 2 || dim_b < 2 || dim_c < 2 {
            return Err(Error::InvalidDimension(format!(
                "every mode needs at least 2 levels, got ({dim_a}, {dim_b}, {dim_c})"
            )));
        }
        let total = dim_a
            .checked_mul(dim_b)
            .and_then(|x| x.checked_mul(dim_c))
            .filter(|&t| t <= cap)
            .ok_or_else(|| {
                Error::InvalidDimension(format!(
                    "total dimension of ({dim_a}, {dim_b}, {dim_c}) exceeds cap {cap}"
                ))
            })?;
        debug_assert!(total >= 8);
        Ok(Self { dim_a, dim_b, dim_c })
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn dim_c(&self) -> usize {
        self.dim_c
    }

    pub fn total(&self) -> usize {
        self.dim_a * self.dim_b * self.dim_c
    }

    pub fn pair(&self) -> PairDims {
        PairDims {
            dim_b: self.dim_b,
            dim_c: self.dim_c,
        }
    }

    pub fn index(&self, n_a: usize, n_b: usize, n_c: usize) -> usize {
        debug_assert!(n_a < self.dim_a && n_b < self.dim_b && n_c < self.dim_c);
        (n_a * self.dim_b + n_b) * self.dim_c + n_c
    }

    pub fn occupations(&self, index: usize) -> (usize, usize, usize) {
        debug_assert!(index < self.total());
        let n_c = index % self.dim_c;
        let rest = index / self.dim_c;
        (rest / self.dim_b, rest % self.dim_b, n_c)
    }
}

impl Default for ModeDims {
    fn default() -> Self {
        Self {
            dim_a: 2,
            dim_b: 20,
            dim_c: 20,
        }
    }
}

/// Truncations of the two bosonic modes b and c.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PairDims {
    dim_b: usize,
    dim_c: usize,
}

impl PairDims {
    pub fn new(dim_b: usize, dim_c: usize) -> Result<Self> {
        if dim_b < 2 || dim_c < 2 {
            return Err(Error::InvalidDimension(format!(
                "modes b and c need at least 2 levels, got ({dim_b}, {dim_c})"
            )));
        }
        if dim_b.saturating_mul(dim_c) > DEFAULT_DIM_CAP {
            return Err(Error::InvalidDimension(format!(
                "total dimension of ({dim_b}, {dim_c}) exceeds cap {DEFAULT_DIM_CAP}"
            )));
        }
        Ok(Self { dim_b, dim_c })
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn dim_c(&self) -> usize {
        self.dim_c
    }

    pub fn total(&self) -> usize {
        self.dim_b * self.dim_c
    }

    pub fn index(&self, n_b: usize, n_c: usize) -> usize {
        n_b * self.dim_c + n_c
    }
}

/// Square operator on a single truncated mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeOperator {
    pub matrix: CMat,
}

impl ModeOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: CMat::identity(dim, dim),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint().to_owned(),
        }
    }

    pub fn apply(&self, v: &[c64]) -> Vec<c64> {
        let n = self.dim();
        assert_eq!(v.len(), n);
        (0..n)
            .map(|i| (0..n).map(|j| self.matrix[(i, j)] * v[j]).sum())
            .collect()
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 1 {
        return Err(Error::InvalidDimension("mode dimension must be positive".into()));
    }
    Ok(())
}

pub fn annihilation(dim: usize) -> Result<ModeOperator> {
    check_dim(dim)?;
    let matrix = Mat::from_fn(dim, dim, |i, j| {
        if j == i + 1 {
            c64::new((j as f64).sqrt(), 0.0)
        } else {
            c64::ZERO
        }
    });
    Ok(ModeOperator { matrix })
}

pub fn creation(dim: usize) -> Result<ModeOperator> {
    Ok(annihilation(dim)?.adjoint())
}

pub fn number(dim: usize) -> Result<ModeOperator> {
    check_dim(dim)?;
    let matrix = Mat::from_fn(dim, dim, |i, j| {
        if i == j {
            c64::new(i as f64, 0.0)
        } else {
            c64::ZERO
        }
    });
    Ok(ModeOperator { matrix })
}

/// Photon-number parity `(-1)^n`.
pub fn parity(dim: usize) -> Result<ModeOperator> {
    check_dim(dim)?;
    let matrix = Mat::from_fn(dim, dim, |i, j| {
        if i != j {
            c64::ZERO
        } else if i % 2 == 0 {
            c64::new(1.0, 0.0)
        } else {
            c64::new(-1.0, 0.0)
        }
    });
    Ok(ModeOperator { matrix })
}

#[derive(Debug, Clone)]
pub struct Displacement {
    pub operator: ModeOperator,
    /// `max |D D† - I|`, which grows as the truncation edge is reached.
    pub unitarity_deviation: f64,
}

/// `D(z) = exp(z b† - z* b)` exponentiated inside the truncated space.
pub fn displacement(dim: usize, z: c64) -> Result<Displacement> {
    check_dim(dim)?;
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::NonFinite("displacement amplitude"));
    }
    let a = annihilation(dim)?.matrix;
    let ad = a.adjoint().to_owned();
    let gen = &ad * faer::Scale(z) - &a * faer::Scale(z.conj());
    let d = linalg::expm(gen.as_ref())?;
    let dd = &d * d.adjoint();
    let unitarity_deviation = linalg::max_abs_diff(dd.as_ref(), CMat::identity(dim, dim).as_ref());
    Ok(Displacement {
        operator: ModeOperator { matrix: d },
        unitarity_deviation,
    })
}

/// The leading `dim x dim` block of the untruncated displacement operator.
///
/// Uses `<m|D(z)|n> = sqrt(n!/m!) z^(m-n) e^{-|z|^2/2} L_n^(m-n)(|z|^2)` for
/// `m >= n` and `D(z)† = D(-z)` above the diagonal, so no truncation enters.
pub fn displacement_block(dim: usize, z: c64) -> Result<ModeOperator> {
    check_dim(dim)?;
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::NonFinite("displacement amplitude"));
    }
    let x = z.norm_sqr();
    let damp = (-0.5 * x).exp();
    let mut matrix = CMat::zeros(dim, dim);
    for k in 0..dim {
        // L_j^(k)(x) for j = 0.. by the three-term recurrence
        let kf = k as f64;
        let (mut prev, mut cur) = (0.0, 1.0);
        // scale = z^k sqrt(j!/(j+k)!), advanced along the diagonal
        let mut scale = c64::new(1.0, 0.0);
        for i in 1..=k {
            scale *= z / (i as f64).sqrt();
        }
        for j in 0..dim - k {
            if j > 0 {
                let jf = (j - 1) as f64;
                let next = ((2.0 * jf + 1.0 + kf - x) * cur - (jf + kf) * prev) / (jf + 1.0);
                prev = cur;
                cur = next;
                scale *= ((j as f64) / ((j + k) as f64)).sqrt();
            }
            let lower = scale * (damp * cur);
            matrix[(j + k, j)] = lower;
            if k > 0 {
                // <j|D(z)|j+k> = conj(<j+k|D(-z)|j>)
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                matrix[(j, j + k)] = lower.conj() * sign;
            }
        }
    }
    Ok(ModeOperator { matrix })
}

/// Fock amplitudes `e^{-|z|^2/2} z^n / sqrt(n!)` for `n < dim`, not renormalized.
pub fn coherent_amplitudes(dim: usize, z: c64) -> Vec<c64> {
    let mut out = Vec::with_capacity(dim);
    let mut amp = c64::new((-0.5 * z.norm_sqr()).exp(), 0.0);
    for n in 0..dim {
        if n > 0 {
            amp = amp * z / (n as f64).sqrt();
        }
        out.push(amp);
    }
    out
}

/// State vector of a single truncated mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeState {
    pub amplitudes: Vec<c64>,
}

impl ModeState {
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn expectation(&self, op: &ModeOperator) -> Result<c64> {
        if op.dim() != self.amplitudes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.amplitudes.len(),
                found: op.dim(),
            });
        }
        let v = op.apply(&self.amplitudes);
        Ok(inner(&self.amplitudes, &v))
    }
}

/// Coherent state `|z>` truncated and renormalized on the truncated space.
pub fn coherent_state(dim: usize, z: c64) -> Result<ModeState> {
    check_dim(dim)?;
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::NonFinite("coherent amplitude"));
    }
    let mut amplitudes = coherent_amplitudes(dim, z);
    let norm = amplitudes.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    for x in &mut amplitudes {
        *x /= norm;
    }
    Ok(ModeState { amplitudes })
}

/// `<u|v>`
pub fn inner(u: &[c64], v: &[c64]) -> c64 {
    u.iter().zip(v).map(|(x, y)| x.conj() * y).sum()
}

/// Operator on the full three-mode space.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    pub matrix: CMat,
    pub dims: ModeDims,
}

impl FockOperator {
    pub fn zeros(dims: ModeDims) -> Self {
        let n = dims.total();
        Self {
            matrix: CMat::zeros(n, n),
            dims,
        }
    }

    pub fn identity(dims: ModeDims) -> Self {
        let n = dims.total();
        Self {
            matrix: CMat::identity(n, n),
            dims,
        }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint().to_owned(),
            dims: self.dims,
        }
    }

    pub fn scale(&self, s: c64) -> Self {
        Self {
            matrix: &self.matrix * faer::Scale(s),
            dims: self.dims,
        }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        assert_eq!(self.dims, other.dims);
        Self {
            matrix: &self.matrix * &other.matrix - &other.matrix * &self.matrix,
            dims: self.dims,
        }
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        linalg::hermiticity_deviation(self.matrix.as_ref())
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        if psi.dims != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims.total(),
                found: psi.dims.total(),
            });
        }
        let n = self.dims.total();
        let mut out = vec![c64::ZERO; n];
        for j in 0..n {
            let x = psi.amplitudes[j];
            if x == c64::ZERO {
                continue;
            }
            let col = self.matrix.col_as_slice(j);
            for i in 0..n {
                out[i] += col[i] * x;
            }
        }
        Ok(StateVector {
            amplitudes: out,
            dims: self.dims,
        })
    }
}

impl Add for &FockOperator {
    type Output = FockOperator;

    fn add(self, rhs: &FockOperator) -> FockOperator {
        assert_eq!(self.dims, rhs.dims);
        FockOperator {
            matrix: &self.matrix + &rhs.matrix,
            dims: self.dims,
        }
    }
}

impl Sub for &FockOperator {
    type Output = FockOperator;

    fn sub(self, rhs: &FockOperator) -> FockOperator {
        assert_eq!(self.dims, rhs.dims);
        FockOperator {
            matrix: &self.matrix - &rhs.matrix,
            dims: self.dims,
        }
    }
}

impl Mul for &FockOperator {
    type Output = FockOperator;

    fn mul(self, rhs: &FockOperator) -> FockOperator {
        assert_eq!(self.dims, rhs.dims);
        FockOperator {
            matrix: &self.matrix * &rhs.matrix,
            dims: self.dims,
        }
    }
}

/// `op_a ⊗ op_b ⊗ op_c` in the composite ordering.
pub fn tensor3(
    dims: ModeDims,
    op_a: &ModeOperator,
    op_b: &ModeOperator,
    op_c: &ModeOperator,
) -> Result<FockOperator> {
    for (want, got) in [
        (dims.dim_a, op_a.dim()),
        (dims.dim_b, op_b.dim()),
        (dims.dim_c, op_c.dim()),
    ] {
        if want != got {
            return Err(Error::DimensionMismatch {
                expected: want,
                found: got,
            });
        }
    }
    let matrix = op_a.matrix.kron(&op_b.matrix).kron(&op_c.matrix);
    Ok(FockOperator { matrix, dims })
}

/// Ladder operators of all three modes embedded in the composite space.
#[derive(Debug, Clone)]
pub struct Ladders {
    pub dims: ModeDims,
    pub a: FockOperator,
    pub b: FockOperator,
    pub c: FockOperator,
}

impl Ladders {
    pub fn new(dims: ModeDims) -> Result<Self> {
        Ok(Self {
            dims,
            a: on_a(dims, &annihilation(dims.dim_a)?)?,
            b: on_b(dims, &annihilation(dims.dim_b)?)?,
            c: on_c(dims, &annihilation(dims.dim_c)?)?,
        })
    }

    pub fn n_a(&self) -> FockOperator {
        &self.a.adjoint() * &self.a
    }

    pub fn n_b(&self) -> FockOperator {
        &self.b.adjoint() * &self.b
    }

    pub fn n_c(&self) -> FockOperator {
        &self.c.adjoint() * &self.c
    }
}

pub fn on_a(dims: ModeDims, op: &ModeOperator) -> Result<FockOperator> {
    tensor3(
        dims,
        op,
        &ModeOperator::identity(dims.dim_b),
        &ModeOperator::identity(dims.dim_c),
    )
}

pub fn on_b(dims: ModeDims, op: &ModeOperator) -> Result<FockOperator> {
    tensor3(
        dims,
        &ModeOperator::identity(dims.dim_a),
        op,
        &ModeOperator::identity(dims.dim_c),
    )
}

pub fn on_c(dims: ModeDims, op: &ModeOperator) -> Result<FockOperator> {
    tensor3(
        dims,
        &ModeOperator::identity(dims.dim_a),
        &ModeOperator::identity(dims.dim_b),
        op,
    )
}

/// Pure state of the three-mode system.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub amplitudes: Vec<c64>,
    pub dims: ModeDims,
}

impl StateVector {
    pub fn new(amplitudes: Vec<c64>, dims: ModeDims) -> Result<Self> {
        if amplitudes.len() != dims.total() {
            return Err(Error::DimensionMismatch {
                expected: dims.total(),
                found: amplitudes.len(),
            });
        }
        Ok(Self { amplitudes, dims })
    }

    pub fn basis(dims: ModeDims, n_a: usize, n_b: usize, n_c: usize) -> Self {
        let mut amplitudes = vec![c64::ZERO; dims.total()];
        amplitudes[dims.index(n_a, n_b, n_c)] = c64::new(1.0, 0.0);
        Self { amplitudes, dims }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidParameter("cannot normalize a zero state".into()));
        }
        for x in &mut self.amplitudes {
            *x /= n;
        }
        Ok(self)
    }

    pub fn inner(&self, other: &Self) -> c64 {
        inner(&self.amplitudes, &other.amplitudes)
    }

    pub fn expectation(&self, op: &FockOperator) -> Result<c64> {
        Ok(self.inner(&op.apply(self)?))
    }

    pub fn to_density(&self) -> DensityMatrix {
        let n = self.dims.total();
        let v = &self.amplitudes;
        DensityMatrix {
            matrix: Mat::from_fn(n, n, |i, j| v[i] * v[j].conj()),
            dims: self.dims,
        }
    }
}

/// Pure state of modes b and c, stored row-major as `psi[n_b * dim_c + n_c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeState {
    pub amplitudes: Vec<c64>,
    pub dims: PairDims,
}

impl TwoModeState {
    pub fn new(amplitudes: Vec<c64>, dims: PairDims) -> Result<Self> {
        if amplitudes.len() != dims.total() {
            return Err(Error::DimensionMismatch {
                expected: dims.total(),
                found: amplitudes.len(),
            });
        }
        Ok(Self { amplitudes, dims })
    }

    pub fn product(b: &ModeState, c: &ModeState) -> Result<Self> {
        let dims = PairDims::new(b.amplitudes.len(), c.amplitudes.len())?;
        let mut amplitudes = Vec::with_capacity(dims.total());
        for x in &b.amplitudes {
            for y in &c.amplitudes {
                amplitudes.push(x * y);
            }
        }
        Ok(Self { amplitudes, dims })
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &Self) -> c64 {
        inner(&self.amplitudes, &other.amplitudes)
    }

    /// Coefficient matrix `C[n_b, n_c]`.
    pub fn coefficients(&self) -> CMat {
        let dc = self.dims.dim_c;
        Mat::from_fn(self.dims.dim_b, dc, |i, j| self.amplitudes[i * dc + j])
    }
}

/// Density matrix of the three-mode system.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub matrix: CMat,
    pub dims: ModeDims,
}

impl DensityMatrix {
    pub fn trace(&self) -> c64 {
        linalg::trace(self.matrix.as_ref())
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        linalg::hermiticity_deviation(self.matrix.as_ref())
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(linalg::hermitian_eigenvalues(self.matrix.as_ref())?[0])
    }

    pub fn expectation(&self, op: &FockOperator) -> Result<c64> {
        if op.dims != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims.total(),
                found: op.dims.total(),
            });
        }
        let n = self.dims.total();
        let mut acc = c64::ZERO;
        for j in 0..n {
            for i in 0..n {
                acc += self.matrix[(i, j)] * op.matrix[(j, i)];
            }
        }
        Ok(acc)
    }

    /// `<psi|rho|psi>`
    pub fn overlap(&self, psi: &StateVector) -> Result<f64> {
        if psi.dims != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims.total(),
                found: psi.dims.total(),
            });
        }
        Ok(sandwich(&self.matrix, &psi.amplitudes))
    }
}

/// `Re <v|M|v>` for a Hermitian `M`.
pub fn sandwich(m: &CMat, v: &[c64]) -> f64 {
    let n = v.len();
    let mut acc = c64::ZERO;
    for j in 0..n {
        if v[j] == c64::ZERO {
            continue;
        }
        let col = m.col_as_slice(j);
        let mut s = c64::ZERO;
        for i in 0..n {
            s += v[i].conj() * col[i];
        }
        acc += s * v[j];
    }
    acc.re
}

/// `exp(-i H t) psi0` at each requested time.
///
/// Propagators are cached on the step size, so uniformly spaced times cost a
/// single exponential.
pub fn propagate(h: &FockOperator, psi0: &StateVector, times: &[f64]) -> Result<Vec<StateVector>> {
    if h.dims != psi0.dims {
        return Err(Error::DimensionMismatch {
            expected: h.dims.total(),
            found: psi0.dims.total(),
        });
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("propagation times"));
    }
    let mut out = Vec::with_capacity(times.len());
    let mut cache: Option<(f64, FockOperator)> = None;
    let mut state = psi0.clone();
    let mut now = 0.0;
    for &t in times {
        let dt = t - now;
        if dt != 0.0 {
            let reuse = matches!(&cache, Some((s, _)) if (s - dt).abs() <= 1e-12 * dt.abs().max(1.0));
            if !reuse {
                let gen = h.scale(c64::new(0.0, -dt));
                let u = linalg::expm(gen.matrix.as_ref())?;
                cache = Some((dt, FockOperator { matrix: u, dims: h.dims }));
            }
            state = cache.as_ref().unwrap().1.apply(&state)?;
            now = t;
        }
        out.push(state.clone());
    }
    Ok(out)
}

//! Logarithmic negativity of states of modes b and c.

use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::fock::{PairDims, TwoModeState};
use crate::linalg::{self, CMat};

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-8;

/// Density matrix of modes b and c with composite index `n_b * dim_c + n_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeDensity {
    matrix: CMat,
    dims: PairDims,
}

impl TwoModeDensity {
    pub fn new(matrix: CMat, dims: PairDims) -> Result<Self> {
        let n = dims.total();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: matrix.nrows(),
            });
        }
        if !linalg::is_finite(matrix.as_ref()) {
            return Err(Error::NonFinite("density matrix"));
        }
        let herm = linalg::hermiticity_deviation(matrix.as_ref());
        if herm > HERMITIAN_TOL {
            return Err(Error::NotDensityMatrix(format!("Hermiticity deviation {herm:e}")));
        }
        let tr = linalg::trace(matrix.as_ref());
        if (tr - c64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::NotDensityMatrix(format!("trace {tr}")));
        }
        Ok(Self { matrix, dims })
    }

    pub fn from_pure(psi: &TwoModeState) -> Result<Self> {
        let n = psi.dims.total();
        let v = &psi.amplitudes;
        Self::new(Mat::from_fn(n, n, |i, j| v[i] * v[j].conj()), psi.dims)
    }

    /// `rho_b ⊗ rho_c`
    pub fn product(rho_b: &CMat, rho_c: &CMat) -> Result<Self> {
        let dims = PairDims::new(rho_b.nrows(), rho_c.nrows())?;
        Self::new(rho_b.kron(rho_c), dims)
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn dims(&self) -> PairDims {
        self.dims
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }
}

fn check_square(m: &CMat, dims: PairDims) -> Result<()> {
    let n = dims.total();
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m.nrows(),
        });
    }
    Ok(())
}

/// Swaps the mode-c indices of row and column.
pub fn partial_transpose_c_matrix(m: &CMat, dims: PairDims) -> Result<CMat> {
    check_square(m, dims)?;
    let dc = dims.dim_c();
    Ok(Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
        let (ib, ic) = (i / dc, i % dc);
        let (jb, jc) = (j / dc, j % dc);
        m[(ib * dc + jc, jb * dc + ic)]
    }))
}

/// Swaps the mode-b indices of row and column.
pub fn partial_transpose_b_matrix(m: &CMat, dims: PairDims) -> Result<CMat> {
    check_square(m, dims)?;
    let dc = dims.dim_c();
    Ok(Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
        let (ib, ic) = (i / dc, i % dc);
        let (jb, jc) = (j / dc, j % dc);
        m[(jb * dc + ic, ib * dc + jc)]
    }))
}

pub fn partial_transpose_c(rho: &TwoModeDensity) -> CMat {
    partial_transpose_c_matrix(&rho.matrix, rho.dims).expect("dimensions checked on construction")
}

/// Sum of singular values.
pub fn trace_norm(m: &CMat) -> Result<f64> {
    Ok(linalg::singular_values(m.as_ref())?.iter().sum())
}

/// Sum of absolute eigenvalues; valid for Hermitian input only.
pub fn trace_norm_hermitian(m: &CMat) -> Result<f64> {
    Ok(linalg::hermitian_eigenvalues(m.as_ref())?
        .iter()
        .map(|x| x.abs())
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Negativity {
    /// Floored at zero.
    pub value: f64,
    pub raw: f64,
}

impl Negativity {
    fn from_raw(raw: f64) -> Self {
        Self {
            value: raw.max(0.0),
            raw,
        }
    }
}

pub fn log_negativity(rho: &TwoModeDensity) -> Result<Negativity> {
    let pt = partial_transpose_c(rho);
    Ok(Negativity::from_raw(trace_norm_hermitian(&pt)?.log2()))
}

/// Same quantity for a pure state, from the Schmidt coefficients:
/// `|| (|psi><psi|)^{T_c} ||_1 = (sum_k s_k)^2`.
pub fn log_negativity_pure(psi: &TwoModeState) -> Result<f64> {
    let norm = psi.norm();
    if !(norm > 0.0) {
        return Err(Error::InvalidParameter("zero state".into()));
    }
    let sv = linalg::singular_values(psi.coefficients().as_ref())?;
    let s: f64 = sv.iter().sum::<f64>() / norm;
    Ok((2.0 * s.log2()).max(0.0))
}

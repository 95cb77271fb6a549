//! Joint Wigner function of modes b and c from displaced joint parity:
//! `W(z_b, z_c) = (4/pi^2) <A_b(z_b) ⊗ A_c(z_c)>` with
//! `A(z) = D(z) P D(z)† = D(2z) P`.

use std::io::{self, Write};

use faer::c64;

use crate::csv::format_row;
use crate::entanglement::TwoModeDensity;
use crate::error::{Error, Result};
use crate::fock::{displacement_block, PairDims, TwoModeState};
use crate::linalg::CMat;

pub const WIGNER_SCALE: f64 = 4.0 / (std::f64::consts::PI * std::f64::consts::PI);
pub const IMAG_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub z_b: c64,
    pub z_c: c64,
}

/// Displaced parity `D(z) P D(z)†` restricted to the truncated space.
pub fn displaced_parity(dim: usize, z: c64) -> Result<CMat> {
    let mut m = displacement_block(dim, z * 2.0)?.matrix;
    for j in (1..dim).step_by(2) {
        for i in 0..dim {
            m[(i, j)] = -m[(i, j)];
        }
    }
    Ok(m)
}

/// States whose joint displaced parity can be evaluated.
pub trait JointParity {
    fn pair_dims(&self) -> PairDims;

    /// Contracts mode b against `A_b`, returning `R` with
    /// `<A_b ⊗ A_c> = Tr(R A_c)`.
    fn contract_b(&self, a_b: &CMat) -> CMat;
}

impl JointParity for TwoModeState {
    fn pair_dims(&self) -> PairDims {
        self.dims
    }

    fn contract_b(&self, a_b: &CMat) -> CMat {
        let c = self.coefficients();
        let m = a_b * &c;
        m.transpose() * c.conjugate()
    }
}

impl JointParity for TwoModeDensity {
    fn pair_dims(&self) -> PairDims {
        self.dims()
    }

    fn contract_b(&self, a_b: &CMat) -> CMat {
        let dims = self.dims();
        let (db, dc) = (dims.dim_b(), dims.dim_c());
        let rho = self.matrix();
        let mut r = CMat::zeros(dc, dc);
        for i in 0..db {
            for k in 0..db {
                let w = a_b[(i, k)];
                if w == c64::ZERO {
                    continue;
                }
                for j in 0..dc {
                    let col = rho.col_as_slice(i * dc + j);
                    for l in 0..dc {
                        r[(l, j)] += w * col[k * dc + l];
                    }
                }
            }
        }
        r
    }
}

fn trace_product(r: &CMat, a_c: &CMat) -> c64 {
    let n = r.nrows();
    let mut acc = c64::ZERO;
    for l in 0..n {
        for j in 0..n {
            acc += r[(l, j)] * a_c[(j, l)];
        }
    }
    acc
}

fn finish(value: c64) -> Result<f64> {
    if !value.re.is_finite() || !value.im.is_finite() {
        return Err(Error::NonFinite("Wigner value"));
    }
    if value.im.abs() * WIGNER_SCALE > IMAG_TOL {
        return Err(Error::Diagnostic(format!(
            "Wigner imaginary residue {:e}",
            value.im * WIGNER_SCALE
        )));
    }
    Ok(WIGNER_SCALE * value.re)
}

fn outside_comfort(dim: usize, z: c64) -> bool {
    z.norm_sqr() > dim as f64 / 4.0
}

pub fn joint_wigner(state: &impl JointParity, p: PhasePoint) -> Result<f64> {
    let dims = state.pair_dims();
    if outside_comfort(dims.dim_b(), p.z_b) || outside_comfort(dims.dim_c(), p.z_c) {
        log::warn!("phase point {:?} lies outside the truncation comfort region", p);
    }
    let a_b = displaced_parity(dims.dim_b(), p.z_b)?;
    let a_c = displaced_parity(dims.dim_c(), p.z_c)?;
    finish(trace_product(&state.contract_b(&a_b), &a_c))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Self { min, max, count }
    }

    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.min],
            n => (0..n)
                .map(|k| self.min + (self.max - self.min) * k as f64 / (n - 1) as f64)
                .collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::EmptyGrid("axis has no points"));
        }
        if !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::NonFinite("axis bounds"));
        }
        Ok(())
    }
}

impl Default for Axis {
    fn default() -> Self {
        Self::new(-3.0, 3.0, 81)
    }
}

/// A 2D plane or a 1D diagonal cut through the 4D phase space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SliceSpec {
    /// Axes are `Re z_b` and `Re z_c`.
    ReRe { im_b: f64, im_c: f64, re_b: Axis, re_c: Axis },
    /// Axes are `Im z_b` and `Im z_c`.
    ImIm { re_b: f64, re_c: f64, im_b: Axis, im_c: Axis },
    /// `Re z_b = Re z_c` along the axis.
    ReDiagonal { im_b: f64, im_c: f64, re: Axis },
    /// `Im z_b = Im z_c` along the axis.
    ImDiagonal { re_b: f64, re_c: f64, im: Axis },
}

impl SliceSpec {
    pub fn re_re(axis: Axis) -> Self {
        SliceSpec::ReRe {
            im_b: 0.0,
            im_c: 0.0,
            re_b: axis,
            re_c: axis,
        }
    }

    pub fn im_im(axis: Axis) -> Self {
        SliceSpec::ImIm {
            re_b: 0.0,
            re_c: 0.0,
            im_b: axis,
            im_c: axis,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SliceSpec::ReRe { .. } => "re-re",
            SliceSpec::ImIm { .. } => "im-im",
            SliceSpec::ReDiagonal { .. } => "re-diagonal",
            SliceSpec::ImDiagonal { .. } => "im-diagonal",
        }
    }

    pub fn fixed(&self) -> String {
        match *self {
            SliceSpec::ReRe { im_b, im_c, .. } | SliceSpec::ReDiagonal { im_b, im_c, .. } => {
                format!("im_b={im_b},im_c={im_c}")
            }
            SliceSpec::ImIm { re_b, re_c, .. } | SliceSpec::ImDiagonal { re_b, re_c, .. } => {
                format!("re_b={re_b},re_c={re_c}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WignerSlice {
    pub spec: SliceSpec,
    pub axis1: Vec<f64>,
    pub axis2: Vec<f64>,
    /// Row-major over `(axis1, axis2)` for planes; one value per point for cuts.
    pub values: Vec<f64>,
}

impl WignerSlice {
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_line(&self) -> bool {
        matches!(
            self.spec,
            SliceSpec::ReDiagonal { .. } | SliceSpec::ImDiagonal { .. }
        )
    }

    /// Rows `axis1,axis2,W`; along a diagonal cut both coordinates coincide.
    pub fn write_csv(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "axis1,axis2,W")?;
        if self.is_line() {
            for (k, x) in self.axis1.iter().enumerate() {
                writeln!(out, "{}", format_row(&[*x, self.axis2[k], self.values[k]]))?;
            }
        } else {
            let n2 = self.axis2.len();
            for (i, x) in self.axis1.iter().enumerate() {
                for (j, y) in self.axis2.iter().enumerate() {
                    writeln!(out, "{}", format_row(&[*x, *y, self.values[i * n2 + j]]))?;
                }
            }
        }
        Ok(())
    }
}

fn parities(dim: usize, points: &[c64]) -> Result<Vec<CMat>> {
    points.iter().map(|&z| displaced_parity(dim, z)).collect()
}

pub fn wigner_slice(state: &impl JointParity, spec: SliceSpec) -> Result<WignerSlice> {
    let dims = state.pair_dims();
    let (db, dc) = (dims.dim_b(), dims.dim_c());
    let (zb, zc, line): (Vec<c64>, Vec<c64>, bool) = match spec {
        SliceSpec::ReRe { im_b, im_c, re_b, re_c } => {
            re_b.validate()?;
            re_c.validate()?;
            (
                re_b.values().into_iter().map(|x| c64::new(x, im_b)).collect(),
                re_c.values().into_iter().map(|x| c64::new(x, im_c)).collect(),
                false,
            )
        }
        SliceSpec::ImIm { re_b, re_c, im_b, im_c } => {
            im_b.validate()?;
            im_c.validate()?;
            (
                im_b.values().into_iter().map(|y| c64::new(re_b, y)).collect(),
                im_c.values().into_iter().map(|y| c64::new(re_c, y)).collect(),
                false,
            )
        }
        SliceSpec::ReDiagonal { im_b, im_c, re } => {
            re.validate()?;
            let v = re.values();
            (
                v.iter().map(|&x| c64::new(x, im_b)).collect(),
                v.iter().map(|&x| c64::new(x, im_c)).collect(),
                true,
            )
        }
        SliceSpec::ImDiagonal { re_b, re_c, im } => {
            im.validate()?;
            let v = im.values();
            (
                v.iter().map(|&y| c64::new(re_b, y)).collect(),
                v.iter().map(|&y| c64::new(re_c, y)).collect(),
                true,
            )
        }
    };

    let outside = zb.iter().filter(|z| outside_comfort(db, **z)).count()
        + zc.iter().filter(|z| outside_comfort(dc, **z)).count();
    if outside > 0 {
        log::warn!(
            "{} slice: {outside} axis points lie outside the truncation comfort region |z|^2 <= dim/4",
            spec.name()
        );
    }

    let a_c = parities(dc, &zc)?;
    let mut values = Vec::with_capacity(if line { zb.len() } else { zb.len() * zc.len() });
    for (i, &z) in zb.iter().enumerate() {
        let r = state.contract_b(&displaced_parity(db, z)?);
        if line {
            values.push(finish(trace_product(&r, &a_c[i]))?);
        } else {
            for a in &a_c {
                values.push(finish(trace_product(&r, a))?);
            }
        }
    }

    let coord = |v: &[c64], re: bool| -> Vec<f64> { v.iter().map(|z| if re { z.re } else { z.im }).collect() };
    let re_axis = matches!(spec, SliceSpec::ReRe { .. } | SliceSpec::ReDiagonal { .. });
    Ok(WignerSlice {
        spec,
        axis1: coord(&zb, re_axis),
        axis2: coord(&zc, re_axis),
        values,
    })
}

/// Wigner function of a single mode, `(2/pi) <D(z) P D(z)†>`, for pure states.
pub fn single_mode_wigner(psi: &[c64], z: c64) -> Result<f64> {
    let a = displaced_parity(psi.len(), z)?;
    let v: Vec<c64> = (0..psi.len())
        .map(|i| (0..psi.len()).map(|k| a[(i, k)] * psi[k]).sum())
        .collect();
    let e: c64 = psi.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
    Ok(2.0 / std::f64::consts::PI * e.re)
}

//! Closed-form evolution from `(|0>_a + |1>_a)|0>_b|0>_c / sqrt(2)` under the
//! approximate and exact displaced-frame Hamiltonians.

use std::fmt;

use faer::c64;

use crate::error::{Error, Result};
use crate::fock::{coherent_amplitudes, ModeDims, PairDims, StateVector, TwoModeState};
use crate::model::{derive_frame, SystemParams};

/// Selects between the expressions as originally published and the corrected
/// ones that agree with direct numerical evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FormulaVariant {
    Verbatim,
    #[default]
    Errata,
}

impl fmt::Display for FormulaVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FormulaVariant::Verbatim => "verbatim",
            FormulaVariant::Errata => "errata",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Sign::Plus => "plus",
            Sign::Minus => "minus",
        }
    }
}

/// A branch `e^{-i theta} |1>_a |alpha>_b |beta>_c` paired with `|0,0,0>`.
pub trait Branch {
    fn amplitudes(&self) -> (c64, c64);
    fn phase(&self) -> f64;

    fn mean_photons(&self) -> f64 {
        let (a, b) = self.amplitudes();
        a.norm_sqr() + b.norm_sqr()
    }
}

/// Conditional displacement scales `(eta_b(n), eta_c(n))`.
pub fn eta(params: &SystemParams, n: u32) -> (f64, f64) {
    let denom = params.delta_b * params.delta_c;
    let gn = params.g * n as f64;
    (gn * params.drive_c / denom, gn * params.drive_b / denom)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxSolution {
    pub t: f64,
    pub eta_b1: f64,
    pub eta_c1: f64,
    pub alpha1: c64,
    pub beta1: c64,
    pub big_lambda1: f64,
    pub phi1: f64,
    pub theta1: f64,
}

impl Branch for ApproxSolution {
    fn amplitudes(&self) -> (c64, c64) {
        (self.alpha1, self.beta1)
    }

    fn phase(&self) -> f64 {
        self.theta1
    }
}

fn one_minus_phase(x: f64) -> c64 {
    c64::new(1.0, 0.0) - c64::new(0.0, x).exp()
}

pub fn approx_solution(params: &SystemParams, t: f64) -> Result<ApproxSolution> {
    if !t.is_finite() {
        return Err(Error::NonFinite("time"));
    }
    let f = derive_frame(params)?;
    let (db, dc, g) = (params.delta_b, params.delta_c, params.g);
    let (eb, ec) = eta(params, 1);
    let big_lambda1 = db * eb * eb + dc * ec * ec + 2.0 * g * (f.xi_c * eb + f.xi_b * ec);
    let phi1 = eb * eb * (db * t).sin() + ec * ec * (dc * t).sin();
    Ok(ApproxSolution {
        t,
        eta_b1: eb,
        eta_c1: ec,
        alpha1: one_minus_phase(-db * t) * eb,
        beta1: one_minus_phase(-dc * t) * ec,
        big_lambda1,
        phi1,
        theta1: f.omega_a_tilde * t + big_lambda1 * t + phi1,
    })
}

/// Mixing angle `lambda(n)` that diagonalizes the b-c exchange in sector `n`.
pub fn rotation_angle(params: &SystemParams, n: u32) -> Result<f64> {
    if params.delta_b == params.delta_c {
        return Err(Error::SingularFrame("rotation angle undefined for delta_b == delta_c"));
    }
    Ok(0.5 * (2.0 * params.g * n as f64 / (params.delta_c - params.delta_b)).atan())
}

/// Displacements `(zeta_b(n), zeta_c(n))` of the rotated modes in sector `n`.
pub fn zeta(params: &SystemParams, n: u32) -> Result<(f64, f64)> {
    let f = derive_frame(params)?;
    let l = rotation_angle(params, n)?;
    let (s, c) = l.sin_cos();
    let gn = params.g * n as f64;
    let (db, dc) = (params.delta_b, params.delta_c);
    let s2l = (2.0 * l).sin();
    let zb = gn * (f.xi_c * c - f.xi_b * s) / (gn * s2l - (db * c * c + dc * s * s));
    let zc = -gn * (f.xi_c * s + f.xi_b * c) / (gn * s2l + (db * s * s + dc * c * c));
    Ok((zb, zc))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactSolution {
    pub t: f64,
    pub variant: FormulaVariant,
    pub lambda1: f64,
    pub zeta_b1: f64,
    pub zeta_c1: f64,
    pub big_lambda_b: f64,
    pub big_lambda_c: f64,
    pub big_lambda2: f64,
    pub phi2: f64,
    pub theta2: f64,
    pub alpha2: c64,
    pub beta2: c64,
}

impl Branch for ExactSolution {
    fn amplitudes(&self) -> (c64, c64) {
        (self.alpha2, self.beta2)
    }

    fn phase(&self) -> f64 {
        self.theta2
    }
}

pub fn exact_solution(params: &SystemParams, t: f64, variant: FormulaVariant) -> Result<ExactSolution> {
    if !t.is_finite() {
        return Err(Error::NonFinite("time"));
    }
    let f = derive_frame(params)?;
    let l = rotation_angle(params, 1)?;
    let (zb, zc) = zeta(params, 1)?;
    let (s, c) = l.sin_cos();
    let (db, dc, g) = (params.delta_b, params.delta_c, params.g);
    let s2l = (2.0 * l).sin();
    let lb = g * s2l - db * c * c - dc * s * s;
    let lc = g * s2l + db * s * s + dc * c * c;

    let mixed = match variant {
        FormulaVariant::Verbatim => f.xi_c * s - f.xi_b * c,
        FormulaVariant::Errata => f.xi_c * s + f.xi_b * c,
    };
    let big_lambda2 = zb * zb * (db * c * c + dc * s * s)
        + zc * zc * (db * s * s + dc * c * c)
        + 2.0 * g * zb * (f.xi_c * c - f.xi_b * s)
        + 2.0 * g * zc * mixed
        + g * (zc * zc - zb * zb) * s2l;
    let phi2 = zc * zc * (lc * t).sin() - zb * zb * (lb * t).sin();

    let second = match variant {
        FormulaVariant::Verbatim => one_minus_phase(-lb * t),
        FormulaVariant::Errata => one_minus_phase(-lc * t),
    };
    let alpha2 = one_minus_phase(lb * t) * (zb * c) + second * (zc * s);
    let beta2 = one_minus_phase(-lc * t) * (zc * c) - one_minus_phase(lb * t) * (zb * s);

    Ok(ExactSolution {
        t,
        variant,
        lambda1: l,
        zeta_b1: zb,
        zeta_c1: zc,
        big_lambda_b: lb,
        big_lambda_c: lc,
        big_lambda2,
        phi2,
        theta2: f.omega_a_tilde * t + big_lambda2 * t + phi2,
        alpha2,
        beta2,
    })
}

/// Two-mode cat `N (|0>|0> + sign e^{-i phase} |amp_b>|amp_c>)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatState {
    pub amp_b: c64,
    pub amp_c: c64,
    pub phase: f64,
    pub sign: Sign,
    pub norm_const: f64,
}

/// `2 (1 + s e^{-(|a|^2+|b|^2)/2} cos theta)`, the inverse square of the
/// normalization.
fn cat_norm_sq(branch: &impl Branch, sign: Sign) -> f64 {
    2.0 * (1.0 + sign.factor() * (-0.5 * branch.mean_photons()).exp() * branch.phase().cos())
}

pub const DEGENERATE_NORM: f64 = 1e-12;

pub fn make_cat(branch: &impl Branch, sign: Sign) -> Result<CatState> {
    let n2 = cat_norm_sq(branch, sign);
    if !(n2 >= DEGENERATE_NORM) {
        return Err(Error::DegenerateBranch(format!(
            "{} superposition vanishes (norm^2 = {n2:e})",
            sign.name()
        )));
    }
    let (amp_b, amp_c) = branch.amplitudes();
    Ok(CatState {
        amp_b,
        amp_c,
        phase: branch.phase(),
        sign,
        norm_const: n2.powf(-0.5),
    })
}

impl Branch for CatState {
    fn amplitudes(&self) -> (c64, c64) {
        (self.amp_b, self.amp_c)
    }

    fn phase(&self) -> f64 {
        self.phase
    }
}

/// `<x|y>` for coherent states.
pub fn coherent_overlap(x: c64, y: c64) -> c64 {
    (c64::new(-0.5 * (x.norm_sqr() + y.norm_sqr()), 0.0) + x.conj() * y).exp()
}

pub const MAX_TRUNCATION_DEFICIT: f64 = 1e-8;

impl CatState {
    /// Expected normalization recomputed from the amplitudes and phase.
    pub fn expected_norm_const(&self) -> f64 {
        cat_norm_sq(self, self.sign).powf(-0.5)
    }

    /// `<self|other>` evaluated with coherent-state algebra.
    pub fn overlap(&self, other: &CatState) -> c64 {
        let (s1, s2) = (self.sign.factor(), other.sign.factor());
        let vac1 = (-0.5 * self.mean_photons()).exp();
        let vac2 = (-0.5 * other.mean_photons()).exp();
        let e = |x: f64| c64::new(0.0, x).exp();
        let cross = coherent_overlap(self.amp_b, other.amp_b) * coherent_overlap(self.amp_c, other.amp_c);
        let sum = c64::new(1.0, 0.0)
            + e(-other.phase) * (s2 * vac2)
            + e(self.phase) * (s1 * vac1)
            + e(self.phase - other.phase) * cross * (s1 * s2);
        sum * (self.norm_const * other.norm_const)
    }

    /// Fock-basis vector on the given truncation.
    pub fn to_state(&self, dims: PairDims) -> Result<TwoModeState> {
        let vb = coherent_amplitudes(dims.dim_b(), self.amp_b);
        let vc = coherent_amplitudes(dims.dim_c(), self.amp_c);
        let w = c64::new(0.0, -self.phase).exp() * self.sign.factor();
        let mut amplitudes = Vec::with_capacity(dims.total());
        for x in &vb {
            for y in &vc {
                amplitudes.push(w * x * y * self.norm_const);
            }
        }
        amplitudes[0] += c64::new(self.norm_const, 0.0);
        let mut psi = TwoModeState::new(amplitudes, dims)?;
        let norm = psi.norm();
        let deficit = (1.0 - norm).abs();
        if deficit > MAX_TRUNCATION_DEFICIT {
            return Err(Error::Truncation {
                deficit,
                dim: dims.dim_b().min(dims.dim_c()),
            });
        }
        for x in &mut psi.amplitudes {
            *x /= norm;
        }
        Ok(psi)
    }

    /// Like `to_state`, raising both truncations until the norm deficit is
    /// acceptable.
    pub fn to_state_adaptive(&self, min: PairDims, max_dim: usize) -> Result<TwoModeState> {
        let mut dims = min;
        loop {
            match self.to_state(dims) {
                Err(Error::Truncation { .. }) if dims.dim_b().max(dims.dim_c()) < max_dim => {
                    dims = PairDims::new(
                        (dims.dim_b() + 4).min(max_dim),
                        (dims.dim_c() + 4).min(max_dim),
                    )?;
                }
                other => return other,
            }
        }
    }
}

/// `(P_plus, P_minus)` for detecting mode a in `|+>` or `|->`.
pub fn detection_probs(branch: &impl Branch) -> (f64, f64) {
    let x = (-0.5 * branch.mean_photons()).exp() * branch.phase().cos();
    (0.5 * (1.0 + x), 0.5 * (1.0 - x))
}

/// `(|0,0,0> + e^{-i theta} |1, alpha, beta>) / sqrt(2)` on the full space.
pub fn branch_state(branch: &impl Branch, dims: ModeDims) -> Result<StateVector> {
    let (a, b) = branch.amplitudes();
    let vb = coherent_amplitudes(dims.dim_b(), a);
    let vc = coherent_amplitudes(dims.dim_c(), b);
    let w = c64::new(0.0, -branch.phase()).exp() * std::f64::consts::FRAC_1_SQRT_2;
    let mut psi = StateVector::basis(dims, 0, 0, 0);
    psi.amplitudes[0] = c64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    for (nb, x) in vb.iter().enumerate() {
        for (nc, y) in vc.iter().enumerate() {
            psi.amplitudes[dims.index(1, nb, nc)] = w * x * y;
        }
    }
    let deficit = (1.0 - psi.norm()).abs();
    if deficit > MAX_TRUNCATION_DEFICIT {
        return Err(Error::Truncation {
            deficit,
            dim: dims.dim_b().min(dims.dim_c()),
        });
    }
    psi.normalized()
}

/// `<p|q>` between two three-mode branch states.
pub fn branch_overlap(p: &impl Branch, q: &impl Branch) -> c64 {
    let (pa, pb) = p.amplitudes();
    let (qa, qb) = q.amplitudes();
    let cross = coherent_overlap(pa, qa) * coherent_overlap(pb, qb);
    (c64::new(1.0, 0.0) + c64::new(0.0, p.phase() - q.phase()).exp() * cross) * 0.5
}

/// Fidelity between the exact and approximate three-mode states.
pub fn fidelity_f(params: &SystemParams, t: f64, variant: FormulaVariant) -> Result<f64> {
    let app = approx_solution(params, t)?;
    let ext = exact_solution(params, t, variant)?;
    Ok(match variant {
        FormulaVariant::Errata => branch_overlap(&ext, &app).norm_sqr(),
        FormulaVariant::Verbatim => {
            let (a1, b1, a2, b2) = (app.alpha1, app.beta1, ext.alpha2, ext.beta2);
            let sum = a1.norm_sqr() + b1.norm_sqr() + a2.norm_sqr() + b2.norm_sqr();
            let exponent = c64::new(-0.5 * sum, -(app.theta1 + ext.theta2)) + a1 * a2.conj() + b1 * b2.conj();
            0.25 * (c64::new(1.0, 0.0) + exponent.exp()).norm_sqr()
        }
    })
}

/// Fidelity between the exact and approximate two-mode cat states.
pub fn fidelity_fpm(params: &SystemParams, t: f64, sign: Sign, variant: FormulaVariant) -> Result<f64> {
    let app = approx_solution(params, t)?;
    let ext = exact_solution(params, t, variant)?;
    let target = make_cat(&app, sign)?;
    let generated = make_cat(&ext, sign)?;
    Ok(match variant {
        FormulaVariant::Errata => generated.overlap(&target).norm_sqr(),
        FormulaVariant::Verbatim => {
            let s = sign.factor();
            let (a1, b1, a2, b2) = (app.alpha1, app.beta1, ext.alpha2, ext.beta2);
            let (n1, n2) = (a1.norm_sqr() + b1.norm_sqr(), a2.norm_sqr() + b2.norm_sqr());
            let (th1, th2) = (app.theta1, ext.theta2);
            let last = (c64::new(0.0, th1 - th2)
                - (c64::new(n1 + n2, 0.0) + a1.conj() * a2.conj() + b1.conj() * b2.conj()) * 0.5)
                .exp();
            let sum = c64::new(1.0, 0.0)
                + c64::new(-0.5 * n1, th1).exp() * s
                + c64::new(-0.5 * n2, -th2).exp() * s
                + last;
            (target.norm_const * generated.norm_const).powi(2) * sum.norm_sqr()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2() -> SystemParams {
        SystemParams::default()
    }

    #[test]
    fn approx_at_origin_and_half_period() {
        let s = approx_solution(&fig2(), 0.0).unwrap();
        assert_eq!(s.alpha1, c64::ZERO);
        assert_eq!(s.beta1, c64::ZERO);
        assert_eq!(s.theta1, 0.0);

        let s = approx_solution(&fig2(), std::f64::consts::PI).unwrap();
        assert!(s.alpha1.norm() < 1e-14);
        assert!((s.beta1 - c64::new(2.0 * s.eta_c1, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn displacement_shift_matches_completed_square() {
        // Lambda_1 reduces to -(Delta_b eta_b^2 + Delta_c eta_c^2)
        let p = fig2();
        let s = approx_solution(&p, 1.0).unwrap();
        let expect = -(p.delta_b * s.eta_b1.powi(2) + p.delta_c * s.eta_c1.powi(2));
        assert!((s.big_lambda1 - expect).abs() < 1e-12);
    }

    #[test]
    fn rotation_angle_value() {
        let l = rotation_angle(&fig2(), 1).unwrap();
        assert!((l - 0.5 * (-0.02f64).atan()).abs() < 1e-15);
        assert!((l + 0.00999867).abs() < 1e-8);
        let eq = SystemParams {
            delta_b: 1.0,
            ..fig2()
        };
        assert!(rotation_angle(&eq, 1).is_err());
    }

    #[test]
    fn exact_vanishes_without_coupling() {
        let p = SystemParams { g: 0.0, ..fig2() };
        for variant in [FormulaVariant::Verbatim, FormulaVariant::Errata] {
            let s = exact_solution(&p, 1.3, variant).unwrap();
            assert_eq!(s.lambda1, 0.0);
            assert_eq!((s.zeta_b1, s.zeta_c1), (0.0, 0.0));
            assert_eq!(s.alpha2, c64::ZERO);
            assert_eq!(s.beta2, c64::ZERO);
        }
    }

    #[test]
    fn cat_normalization() {
        let s = approx_solution(&fig2(), 0.0).unwrap();
        let cat = make_cat(&s, Sign::Plus).unwrap();
        assert!((cat.norm_const - 0.5).abs() < 1e-15);
        assert!(matches!(make_cat(&s, Sign::Minus), Err(Error::DegenerateBranch(_))));

        let s = approx_solution(&SystemParams { g: 0.2, ..fig2() }, 1.0).unwrap();
        for sign in [Sign::Plus, Sign::Minus] {
            let cat = make_cat(&s, sign).unwrap();
            assert!((cat.norm_const - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-10);
        }
    }

    #[test]
    fn detection_probabilities_at_start() {
        let s = approx_solution(&fig2(), 0.0).unwrap();
        assert_eq!(detection_probs(&s), (1.0, 0.0));
    }

    #[test]
    fn cat_overlap_matches_vectors() {
        let p = fig2();
        let dims = PairDims::new(24, 24).unwrap();
        for t in [0.4, 1.85, 2.9] {
            let a = make_cat(&approx_solution(&p, t).unwrap(), Sign::Plus).unwrap();
            let b = make_cat(&exact_solution(&p, t, FormulaVariant::Errata).unwrap(), Sign::Plus).unwrap();
            let direct = a.to_state(dims).unwrap().inner(&b.to_state(dims).unwrap());
            assert!((direct - a.overlap(&b)).norm() < 1e-10);
        }
    }

    #[test]
    fn self_fidelity_is_one() {
        let s = approx_solution(&fig2(), 2.2).unwrap();
        for sign in [Sign::Plus, Sign::Minus] {
            let c = make_cat(&s, sign).unwrap();
            assert!((c.overlap(&c).norm_sqr() - 1.0).abs() < 1e-12);
        }
        assert!((branch_overlap(&s, &s).norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fidelities_start_at_one() {
        for v in [FormulaVariant::Verbatim, FormulaVariant::Errata] {
            assert!((fidelity_f(&fig2(), 0.0, v).unwrap() - 1.0).abs() < 1e-14);
            assert!((fidelity_fpm(&fig2(), 0.0, Sign::Plus, v).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn truncation_is_detected() {
        let cat = CatState {
            amp_b: c64::new(4.0, 0.0),
            amp_c: c64::ZERO,
            phase: 0.3,
            sign: Sign::Plus,
            norm_const: 0.0,
        };
        let cat = CatState {
            norm_const: cat.expected_norm_const(),
            ..cat
        };
        let small = PairDims::new(10, 10).unwrap();
        assert!(matches!(cat.to_state(small), Err(Error::Truncation { .. })));
        let psi = cat.to_state_adaptive(small, 80).unwrap();
        assert!(psi.dims.dim_b() > 10);
        assert!((psi.norm() - 1.0).abs() < 1e-12);
    }
}

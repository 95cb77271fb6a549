//! System parameters, frame transformations and Hamiltonian builders.
//!
//! Frequencies are in units of the mode-c detuning, so `delta_c = 1` by
//! convention.

use faer::c64;

use crate::error::{Error, Result};
use crate::fock::{FockOperator, ModeDims};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub omega_a: f64,
    pub delta_b: f64,
    pub delta_c: f64,
    pub g: f64,
    pub drive_b: f64,
    pub drive_c: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub kappa_c: f64,
    pub nbar_a: f64,
    pub nbar_b: f64,
    pub nbar_c: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            omega_a: 0.1,
            delta_b: 2.0,
            delta_c: 1.0,
            g: 0.01,
            drive_b: 100.0,
            drive_c: 100.0,
            kappa_a: 0.0,
            kappa_b: 0.0,
            kappa_c: 0.0,
            nbar_a: 0.0,
            nbar_b: 0.0,
            nbar_c: 0.0,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("omega_a", self.omega_a),
            ("delta_b", self.delta_b),
            ("delta_c", self.delta_c),
            ("g", self.g),
            ("drive_b", self.drive_b),
            ("drive_c", self.drive_c),
            ("kappa_a", self.kappa_a),
            ("kappa_b", self.kappa_b),
            ("kappa_c", self.kappa_c),
            ("nbar_a", self.nbar_a),
            ("nbar_b", self.nbar_b),
            ("nbar_c", self.nbar_c),
        ];
        for (name, v) in all {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} is not finite")));
            }
        }
        if self.delta_b == 0.0 || self.delta_c == 0.0 {
            return Err(Error::SingularFrame("detunings must be nonzero"));
        }
        if self.delta_b == self.delta_c {
            return Err(Error::InvalidParameter(
                "delta_b must differ from delta_c: rotation angle and approximation ratios are singular"
                    .into(),
            ));
        }
        if self.g < 0.0 {
            return Err(Error::InvalidParameter("g must be non-negative".into()));
        }
        for (name, v) in &all[6..] {
            if *v < 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be non-negative")));
            }
        }
        Ok(())
    }
}

/// Which bare frequency enters the open-system mode-a frequency.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum FrequencyConvention {
    /// `omega_a + g (chi_b* chi_c + chi_c* chi_b)`, mirroring the closed-system shift.
    #[default]
    ModeA,
    /// `omega_c + g (...)` with an explicitly supplied `omega_c`.
    ModeC { omega_c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameParams {
    pub xi_b: f64,
    pub xi_c: f64,
    pub g_b: f64,
    pub g_c: f64,
    pub omega_a_tilde: f64,
    pub chi_b_ss: c64,
    pub chi_c_ss: c64,
    pub omega_a_1: f64,
}

/// `Omega / (i kappa/2 - Delta)`
pub fn steady_displacement(drive: f64, delta: f64, kappa: f64) -> c64 {
    c64::new(drive, 0.0) / c64::new(-delta, 0.5 * kappa)
}

/// `base + g (chi_b* chi_c + chi_c* chi_b)`
pub fn shifted_frequency(base: f64, g: f64, chi_b: c64, chi_c: c64) -> f64 {
    base + g * 2.0 * (chi_b.conj() * chi_c).re
}

pub fn derive_frame(params: &SystemParams) -> Result<FrameParams> {
    derive_frame_with(params, FrequencyConvention::ModeA)
}

pub fn derive_frame_with(params: &SystemParams, conv: FrequencyConvention) -> Result<FrameParams> {
    if params.delta_b == 0.0 || params.delta_c == 0.0 {
        return Err(Error::SingularFrame("detunings must be nonzero"));
    }
    let xi_b = -params.drive_b / params.delta_b;
    let xi_c = -params.drive_c / params.delta_c;
    let chi_b_ss = steady_displacement(params.drive_b, params.delta_b, params.kappa_b);
    let chi_c_ss = steady_displacement(params.drive_c, params.delta_c, params.kappa_c);
    let base = match conv {
        FrequencyConvention::ModeA => params.omega_a,
        FrequencyConvention::ModeC { omega_c } => omega_c,
    };
    Ok(FrameParams {
        xi_b,
        xi_c,
        g_b: params.g * xi_c,
        g_c: params.g * xi_b,
        omega_a_tilde: params.omega_a + 2.0 * params.g * xi_b * xi_c,
        chi_b_ss,
        chi_c_ss,
        omega_a_1: shifted_frequency(base, params.g, chi_b_ss, chi_c_ss),
    })
}

/// Generic form shared by every Hamiltonian of the model:
///
/// `freq_a n_a + delta_b n_b + delta_c n_c + exchange n_a (b† c + c† b)
///  + N (drive_b b† + drive_b* b + drive_c c† + drive_c* c)`
///
/// where `N = n_a` when `conditional` and the identity otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianTerms {
    pub freq_a: f64,
    pub delta_b: f64,
    pub delta_c: f64,
    pub exchange: f64,
    pub drive_b: c64,
    pub drive_c: c64,
    pub conditional: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HamiltonianKind {
    /// Rotating-frame Hamiltonian with direct drives.
    Interaction,
    /// Displaced frame, all terms kept.
    Ext,
    /// Displaced frame without the three-mode exchange.
    App,
    /// Open-system displaced frame with steady-state displacements.
    OpenExt,
    OpenApp,
}

impl HamiltonianTerms {
    pub fn for_kind(
        kind: HamiltonianKind,
        params: &SystemParams,
        conv: FrequencyConvention,
    ) -> Result<Self> {
        let f = derive_frame_with(params, conv)?;
        let g = params.g;
        let real = |x: f64| c64::new(x, 0.0);
        let base = Self {
            freq_a: f.omega_a_tilde,
            delta_b: params.delta_b,
            delta_c: params.delta_c,
            exchange: g,
            drive_b: real(f.g_b),
            drive_c: real(f.g_c),
            conditional: true,
        };
        Ok(match kind {
            HamiltonianKind::Interaction => Self {
                freq_a: params.omega_a,
                drive_b: real(params.drive_b),
                drive_c: real(params.drive_c),
                conditional: false,
                ..base
            },
            HamiltonianKind::Ext => base,
            HamiltonianKind::App => Self {
                exchange: 0.0,
                ..base
            },
            HamiltonianKind::OpenExt | HamiltonianKind::OpenApp => Self {
                freq_a: f.omega_a_1,
                exchange: if kind == HamiltonianKind::OpenExt { g } else { 0.0 },
                drive_b: f.chi_c_ss * g,
                drive_c: f.chi_b_ss * g,
                ..base
            },
        })
    }

    /// Nonzero matrix elements `(row, col, value)`.
    pub fn entries(&self, dims: ModeDims) -> Vec<(usize, usize, c64)> {
        let mut out = Vec::new();
        let (da, db, dc) = (dims.dim_a(), dims.dim_b(), dims.dim_c());
        for j in 0..dims.total() {
            let (na, nb, nc) = dims.occupations(j);
            let (fa, fb, fc) = (na as f64, nb as f64, nc as f64);
            let diag = self.freq_a * fa + self.delta_b * fb + self.delta_c * fc;
            if diag != 0.0 {
                out.push((j, j, c64::new(diag, 0.0)));
            }
            let _ = da;
            if self.exchange != 0.0 && na > 0 {
                if nb + 1 < db && nc > 0 {
                    let v = self.exchange * fa * ((nb + 1) as f64).sqrt() * fc.sqrt();
                    out.push((dims.index(na, nb + 1, nc - 1), j, c64::new(v, 0.0)));
                }
                if nb > 0 && nc + 1 < dc {
                    let v = self.exchange * fa * fb.sqrt() * ((nc + 1) as f64).sqrt();
                    out.push((dims.index(na, nb - 1, nc + 1), j, c64::new(v, 0.0)));
                }
            }
            let weight = if self.conditional { fa } else { 1.0 };
            if weight != 0.0 {
                if self.drive_b != c64::ZERO {
                    if nb + 1 < db {
                        let s = weight * ((nb + 1) as f64).sqrt();
                        out.push((dims.index(na, nb + 1, nc), j, self.drive_b * s));
                    }
                    if nb > 0 {
                        out.push((dims.index(na, nb - 1, nc), j, self.drive_b.conj() * weight * fb.sqrt()));
                    }
                }
                if self.drive_c != c64::ZERO {
                    if nc + 1 < dc {
                        let s = weight * ((nc + 1) as f64).sqrt();
                        out.push((dims.index(na, nb, nc + 1), j, self.drive_c * s));
                    }
                    if nc > 0 {
                        out.push((dims.index(na, nb, nc - 1), j, self.drive_c.conj() * weight * fc.sqrt()));
                    }
                }
            }
        }
        out
    }

    pub fn build(&self, dims: ModeDims) -> FockOperator {
        let mut op = FockOperator::zeros(dims);
        for (i, j, v) in self.entries(dims) {
            op.matrix[(i, j)] += v;
        }
        op
    }
}

fn build(
    kind: HamiltonianKind,
    params: &SystemParams,
    dims: ModeDims,
    conv: FrequencyConvention,
) -> Result<FockOperator> {
    Ok(HamiltonianTerms::for_kind(kind, params, conv)?.build(dims))
}

pub fn build_h_i(params: &SystemParams, dims: ModeDims) -> Result<FockOperator> {
    build(HamiltonianKind::Interaction, params, dims, FrequencyConvention::ModeA)
}

pub fn build_h_ext(params: &SystemParams, dims: ModeDims) -> Result<FockOperator> {
    build(HamiltonianKind::Ext, params, dims, FrequencyConvention::ModeA)
}

pub fn build_h_app(params: &SystemParams, dims: ModeDims) -> Result<FockOperator> {
    build(HamiltonianKind::App, params, dims, FrequencyConvention::ModeA)
}

pub fn build_h1_ext(
    params: &SystemParams,
    dims: ModeDims,
    conv: FrequencyConvention,
) -> Result<FockOperator> {
    build(HamiltonianKind::OpenExt, params, dims, conv)
}

pub fn build_h1_app(
    params: &SystemParams,
    dims: ModeDims,
    conv: FrequencyConvention,
) -> Result<FockOperator> {
    build(HamiltonianKind::OpenApp, params, dims, conv)
}

pub const DEFAULT_APPROX_THRESHOLD: f64 = 10.0;

/// Margins of the two large-displacement conditions behind the approximate
/// Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxReport {
    pub n_b: u32,
    pub n_c: u32,
    pub r_b: f64,
    pub r_c: f64,
    pub threshold: f64,
    pub satisfied: bool,
}

pub fn check_approx(params: &SystemParams, n_b: u32, n_c: u32) -> Result<ApproxReport> {
    check_approx_with_threshold(params, n_b, n_c, DEFAULT_APPROX_THRESHOLD)
}

pub fn check_approx_with_threshold(
    params: &SystemParams,
    n_b: u32,
    n_c: u32,
    threshold: f64,
) -> Result<ApproxReport> {
    if params.delta_b == params.delta_c {
        return Err(Error::SingularCondition);
    }
    let f = derive_frame(params)?;
    let (db, dc) = (params.delta_b, params.delta_c);
    let ratio = |xi: f64, factor: f64, n: u32| {
        if n == 0 {
            f64::INFINITY
        } else {
            xi.abs() * factor.abs() / (n as f64).sqrt()
        }
    };
    let r_c = ratio(f.xi_c, 1.0 - dc / db, n_c);
    let r_b = ratio(f.xi_b, db / dc - 1.0, n_b);
    Ok(ApproxReport {
        n_b,
        n_c,
        r_b,
        r_c,
        threshold,
        satisfied: r_b >= threshold && r_c >= threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{self, Ladders};
    use crate::linalg;

    fn fig2() -> SystemParams {
        SystemParams::default()
    }

    #[test]
    fn frame_of_fig2_parameters() {
        let f = derive_frame(&fig2()).unwrap();
        assert_eq!(f.xi_b, -50.0);
        assert_eq!(f.xi_c, -100.0);
        assert_eq!(f.g_b, -1.0);
        assert_eq!(f.g_c, -0.5);
        assert!((f.omega_a_tilde - 100.1).abs() < 1e-12);
        assert_eq!(f.chi_b_ss, c64::new(-50.0, 0.0));
        assert_eq!(f.chi_c_ss, c64::new(-100.0, 0.0));
    }

    #[test]
    fn steady_displacement_with_loss() {
        let chi = steady_displacement(100.0, 2.0, 0.001);
        assert!((chi.re + 50.0).abs() < 1e-5);
        assert!((chi.im + 0.0125).abs() < 1e-6);
    }

    #[test]
    fn zero_detuning_is_singular() {
        let p = SystemParams {
            delta_b: 0.0,
            ..fig2()
        };
        assert!(matches!(derive_frame(&p), Err(Error::SingularFrame(_))));
    }

    #[test]
    fn undriven_interaction_hamiltonian_is_diagonal() {
        let p = SystemParams {
            g: 0.0,
            drive_b: 0.0,
            drive_c: 0.0,
            ..fig2()
        };
        let dims = ModeDims::new(2, 4, 3).unwrap();
        let h = build_h_i(&p, dims).unwrap();
        for i in 0..dims.total() {
            for j in 0..dims.total() {
                let (na, nb, nc) = dims.occupations(i);
                let expect = if i == j {
                    0.1 * na as f64 + 2.0 * nb as f64 + nc as f64
                } else {
                    0.0
                };
                assert!((h.matrix[(i, j)] - c64::new(expect, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn builders_match_ladder_algebra() {
        let p = SystemParams {
            kappa_b: 0.3,
            kappa_c: 0.2,
            ..fig2()
        };
        let dims = ModeDims::new(2, 5, 6).unwrap();
        let l = Ladders::new(dims).unwrap();
        let (na, nb, nc) = (l.n_a(), l.n_b(), l.n_c());
        let (bd, cd) = (l.b.adjoint(), l.c.adjoint());
        let re = |x: f64| c64::new(x, 0.0);
        let f = derive_frame(&p).unwrap();
        let swap = &(&bd * &l.c) + &(&cd * &l.b);

        let h_i = &(&(&na.scale(re(p.omega_a)) + &nb.scale(re(p.delta_b))) + &nc.scale(re(p.delta_c)))
            + &(&(&(&na * &swap).scale(re(p.g)) + &(&bd + &l.b).scale(re(p.drive_b)))
                + &(&cd + &l.c).scale(re(p.drive_c)));
        let got = build_h_i(&p, dims).unwrap();
        assert!(linalg::max_abs_diff(got.matrix.as_ref(), h_i.matrix.as_ref()) < 1e-12);

        let diag = &(&na.scale(re(f.omega_a_tilde)) + &nb.scale(re(p.delta_b))) + &nc.scale(re(p.delta_c));
        let disp = &(&na * &(&bd + &l.b)).scale(re(f.g_b)) + &(&na * &(&cd + &l.c)).scale(re(f.g_c));
        let h_app = &diag + &disp;
        let h_ext = &h_app + &(&na * &swap).scale(re(p.g));
        let got = build_h_ext(&p, dims).unwrap();
        assert!(linalg::max_abs_diff(got.matrix.as_ref(), h_ext.matrix.as_ref()) < 1e-12);
        let got = build_h_app(&p, dims).unwrap();
        assert!(linalg::max_abs_diff(got.matrix.as_ref(), h_app.matrix.as_ref()) < 1e-12);

        let g = p.g;
        let open = &(&(&na.scale(re(f.omega_a_1)) + &nb.scale(re(p.delta_b))) + &nc.scale(re(p.delta_c)))
            + &(&(&na * &(&bd.scale(f.chi_c_ss) + &l.b.scale(f.chi_c_ss.conj()))).scale(re(g))
                + &(&na * &(&cd.scale(f.chi_b_ss) + &l.c.scale(f.chi_b_ss.conj()))).scale(re(g)));
        let got = build_h1_app(&p, dims, FrequencyConvention::ModeA).unwrap();
        assert!(linalg::max_abs_diff(got.matrix.as_ref(), open.matrix.as_ref()) < 1e-12);
        assert!(got.hermiticity_deviation() < 1e-14);
    }

    #[test]
    fn conjugation_by_displacements_gives_displaced_frame() {
        // small displacements so the truncated space can hold them
        let p = SystemParams {
            drive_b: 2.0,
            drive_c: 1.0,
            ..fig2()
        };
        let f = derive_frame(&p).unwrap();
        assert_eq!((f.xi_b, f.xi_c), (-1.0, -1.0));
        let big = ModeDims::new(2, 30, 30).unwrap();
        let db = fock::on_b(big, &fock::displacement(30, c64::new(f.xi_b, 0.0)).unwrap().operator).unwrap();
        let dc = fock::on_c(big, &fock::displacement(30, c64::new(f.xi_c, 0.0)).unwrap().operator).unwrap();
        let u = &db * &dc;
        let h = build_h_i(&p, big).unwrap();
        let conj = &(&u.adjoint() * &h) * &u;
        let h_ext = build_h_ext(&p, big).unwrap();
        // the transform also produces the constant -Omega^2/Delta energy shift
        let shift = -(p.drive_b * p.drive_b / p.delta_b + p.drive_c * p.drive_c / p.delta_c);
        let mut err = 0.0f64;
        for i in 0..big.total() {
            let (_, nb, nc) = big.occupations(i);
            if nb >= 8 || nc >= 8 {
                continue;
            }
            for j in 0..big.total() {
                let (_, mb, mc) = big.occupations(j);
                if mb >= 8 || mc >= 8 {
                    continue;
                }
                let expect = h_ext.matrix[(i, j)] + if i == j { c64::new(shift, 0.0) } else { c64::ZERO };
                err = err.max((conj.matrix[(i, j)] - expect).norm());
            }
        }
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn every_hamiltonian_conserves_mode_a_number() {
        let dims = ModeDims::new(3, 5, 5).unwrap();
        let na = Ladders::new(dims).unwrap().n_a();
        let p = SystemParams {
            kappa_b: 0.1,
            ..fig2()
        };
        for kind in [
            HamiltonianKind::Interaction,
            HamiltonianKind::Ext,
            HamiltonianKind::App,
            HamiltonianKind::OpenExt,
            HamiltonianKind::OpenApp,
        ] {
            let h = build(kind, &p, dims, FrequencyConvention::ModeA).unwrap();
            let comm = h.commutator(&na);
            assert!(linalg::max_abs(comm.matrix.as_ref()) < 1e-10, "{kind:?}");
        }
    }

    #[test]
    fn open_frequency_conventions_differ_by_number_term() {
        let p = fig2();
        let dims = ModeDims::new(2, 4, 4).unwrap();
        let h_ext = build_h_ext(&p, dims).unwrap();
        let h1 = build_h1_ext(&p, dims, FrequencyConvention::ModeA).unwrap();
        assert!(linalg::max_abs_diff(h1.matrix.as_ref(), h_ext.matrix.as_ref()) < 1e-10);
        let omega_c = 3.7;
        let h1c = build_h1_ext(&p, dims, FrequencyConvention::ModeC { omega_c }).unwrap();
        let na = Ladders::new(dims).unwrap().n_a();
        let diff = &h1c - &h_ext;
        let expect = na.scale(c64::new(omega_c - p.omega_a, 0.0));
        assert!(linalg::max_abs_diff(diff.matrix.as_ref(), expect.matrix.as_ref()) < 1e-10);
    }

    #[test]
    fn approximation_margins() {
        let r = check_approx(&fig2(), 1, 1).unwrap();
        assert!((r.r_c - 50.0).abs() < 1e-12);
        assert!((r.r_b - 50.0).abs() < 1e-12);
        assert!(r.satisfied);

        let r = check_approx(&SystemParams { drive_c: 0.0, ..fig2() }, 1, 1).unwrap();
        assert_eq!(r.r_c, 0.0);
        assert!(!r.satisfied);

        let r = check_approx(&fig2(), 0, 4).unwrap();
        assert!(r.r_b.is_infinite());
        assert!((r.r_c - 25.0).abs() < 1e-12);

        let near = SystemParams {
            delta_b: 1.0 + 1e-9,
            ..fig2()
        };
        let r = check_approx(&near, 1, 1).unwrap();
        assert!(r.r_b < 1e-5 && r.r_c < 1e-5);

        let eq = SystemParams {
            delta_b: 1.0,
            ..fig2()
        };
        assert_eq!(check_approx(&eq, 1, 1), Err(Error::SingularCondition));
    }
}

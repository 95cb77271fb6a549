use fredkin_core::analytic::{
    approx_solution, branch_state, coherent_overlap, detection_probs, fidelity_f, fidelity_fpm,
    make_cat, FormulaVariant, Sign,
};
use fredkin_core::c64;
use fredkin_core::entanglement::{
    log_negativity, partial_transpose_b_matrix, partial_transpose_c_matrix, trace_norm,
    TwoModeDensity,
};
use fredkin_core::fock::{
    annihilation, coherent_state, creation, displacement, ModeDims, ModeState, PairDims,
    TwoModeState,
};
use fredkin_core::linalg::{self, CMat};
use fredkin_core::model::SystemParams;
use fredkin_core::wigner::{joint_wigner, single_mode_wigner, PhasePoint, WIGNER_SCALE};
use proptest::prelude::*;

fn cz(re: f64, im: f64) -> c64 {
    c64::new(re, im)
}

fn complex(scale: f64) -> impl Strategy<Value = c64> {
    (-scale..scale, -scale..scale).prop_map(|(a, b)| cz(a, b))
}

fn pure_state(dims: PairDims, amps: &[c64]) -> TwoModeState {
    let mut v: Vec<c64> = amps.iter().take(dims.total()).copied().collect();
    let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    TwoModeState::new(v, dims).unwrap()
}

fn random_unitary(dim: usize, entries: &[c64]) -> CMat {
    let h = CMat::from_fn(dim, dim, |i, j| {
        let a = entries[i * dim + j];
        let b = entries[j * dim + i];
        if i == j {
            cz(a.re, 0.0)
        } else if i < j {
            a
        } else {
            b.conj()
        }
    });
    let ih = CMat::from_fn(dim, dim, |i, j| h[(i, j)] * cz(0.0, 1.0));
    linalg::expm(ih.as_ref()).unwrap()
}

fn kron(a: &CMat, b: &CMat) -> CMat {
    let (m, n) = (a.nrows(), b.nrows());
    CMat::from_fn(m * n, m * n, |i, j| a[(i / n, j / n)] * b[(i % n, j % n)])
}

fn fig2() -> SystemParams {
    SystemParams::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn index_round_trip(da in 2usize..5, db in 2usize..7, dc in 2usize..7, seed in 0usize..1000) {
        let dims = ModeDims::new(da, db, dc).unwrap();
        let i = seed % dims.total();
        let (a, b, c) = dims.occupations(i);
        prop_assert_eq!(dims.index(a, b, c), i);
        prop_assert_eq!(i, (a * db + b) * dc + c);
    }

    #[test]
    fn ladder_commutator_is_identity_below_cutoff(dim in 2usize..30) {
        let a = annihilation(dim).unwrap().matrix;
        let ad = creation(dim).unwrap().matrix;
        let comm = &a * &ad - &ad * &a;
        for i in 0..dim {
            for j in 0..dim {
                let expect = if i != j {
                    0.0
                } else if i + 1 < dim {
                    1.0
                } else {
                    -((dim - 1) as f64)
                };
                prop_assert!((comm[(i, j)] - cz(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn displacement_is_unitary(dim in 8usize..40, z in complex(1.0)) {
        let d = displacement(dim, z).unwrap();
        prop_assert!(d.unitarity_deviation < 1e-10);
        let inv = displacement(dim, -z).unwrap().operator.matrix;
        let prod = &d.operator.matrix * &inv;
        // products of truncated displacements are only unitary up to the cutoff
        let low = dim / 4;
        for i in 0..low {
            for j in 0..low {
                let e = if i == j { 1.0 } else { 0.0 };
                prop_assert!((prod[(i, j)] - cz(e, 0.0)).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn coherent_overlap_matches_vectors(x in complex(1.2), y in complex(1.2)) {
        let a = coherent_state(40, x).unwrap();
        let b = coherent_state(40, y).unwrap();
        let num: c64 = a.amplitudes.iter().zip(&b.amplitudes).map(|(p, q)| p.conj() * q).sum();
        prop_assert!((num - coherent_overlap(x, y)).norm() < 1e-9);
    }

    #[test]
    fn negativity_is_local_unitary_invariant(
        amps in prop::collection::vec(complex(1.0), 9),
        ub in prop::collection::vec(complex(1.0), 9),
        uc in prop::collection::vec(complex(1.0), 9),
    ) {
        let dims = PairDims::new(3, 3).unwrap();
        let psi = pure_state(dims, &amps);
        let rho = TwoModeDensity::from_pure(&psi).unwrap();
        let u = kron(&random_unitary(3, &ub), &random_unitary(3, &uc));
        let moved = &u * rho.matrix() * u.adjoint();
        let moved = CMat::from_fn(9, 9, |i, j| (moved[(i, j)] + moved[(j, i)].conj()) * 0.5);
        let n0 = log_negativity(&rho).unwrap().value;
        let n1 = log_negativity(&TwoModeDensity::new(moved, dims).unwrap()).unwrap().value;
        prop_assert!((n0 - n1).abs() < 1e-9);
    }

    #[test]
    fn partial_transposes_share_trace_norm(amps in prop::collection::vec(complex(1.0), 12)) {
        let dims = PairDims::new(3, 4).unwrap();
        let rho = TwoModeDensity::from_pure(&pure_state(dims, &amps)).unwrap();
        let tb = trace_norm(&partial_transpose_b_matrix(rho.matrix(), dims).unwrap()).unwrap();
        let tc = trace_norm(&partial_transpose_c_matrix(rho.matrix(), dims).unwrap()).unwrap();
        prop_assert!((tb - tc).abs() < 1e-10);
    }

    #[test]
    fn detection_probabilities_sum_to_one(t in 0.0f64..(2.0 * std::f64::consts::PI)) {
        let (p, m) = detection_probs(&approx_solution(&fig2(), t).unwrap());
        prop_assert!((p + m - 1.0).abs() < 1e-14);
        prop_assert!((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&m));
    }

    #[test]
    fn fidelities_lie_in_unit_interval(t in 0.0f64..(2.0 * std::f64::consts::PI), db in 1.2f64..3.0) {
        let p = SystemParams { delta_b: db, ..fig2() };
        for v in [FormulaVariant::Verbatim, FormulaVariant::Errata] {
            let f = fidelity_f(&p, t, v).unwrap();
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f), "{v} F={f}");
        }
        for sign in [Sign::Plus, Sign::Minus] {
            if let Ok(f) = fidelity_fpm(&p, t, sign, FormulaVariant::Errata) {
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f));
            }
        }
    }

    #[test]
    fn approximate_state_matches_closed_form_overlaps(t in 0.0f64..6.0) {
        let dims = ModeDims::new(2, 14, 14).unwrap();
        let s = approx_solution(&fig2(), t).unwrap();
        let psi = branch_state(&s, dims).unwrap();
        prop_assert!((psi.norm() - 1.0).abs() < 1e-10);
        let (pp, _) = detection_probs(&s);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let m = dims.dim_b() * dims.dim_c();
        let proj: f64 = (0..m)
            .map(|k| {
                let a0 = if k == 0 { psi.amplitudes[0] } else { c64::ZERO };
                ((a0 + psi.amplitudes[m + k]) * h).norm_sqr()
            })
            .sum();
        prop_assert!((proj - pp).abs() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn product_states_have_zero_negativity(
        b in prop::collection::vec(complex(1.0), 4),
        c in prop::collection::vec(complex(1.0), 5),
    ) {
        let norm = |v: &[c64]| v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let (nb, nc) = (norm(&b), norm(&c));
        let mb = ModeState { amplitudes: b.iter().map(|x| x / nb).collect() };
        let mc = ModeState { amplitudes: c.iter().map(|x| x / nc).collect() };
        let psi = TwoModeState::product(&mb, &mc).unwrap();
        let n = log_negativity(&TwoModeDensity::from_pure(&psi).unwrap()).unwrap().value;
        prop_assert!(n.abs() < 1e-10, "{n}");
    }

    #[test]
    fn wigner_is_bounded(
        amps in prop::collection::vec(complex(1.0), 16),
        zb in complex(1.5),
        zc in complex(1.5),
    ) {
        let psi = pure_state(PairDims::new(4, 4).unwrap(), &amps);
        let w = joint_wigner(&psi, PhasePoint { z_b: zb, z_c: zc }).unwrap();
        prop_assert!(w.abs() <= WIGNER_SCALE + 1e-12);
    }

    #[test]
    fn wigner_factorizes_on_products(
        x in complex(1.0),
        y in complex(1.0),
        zb in complex(1.5),
        zc in complex(1.5),
    ) {
        let (mb, mc) = (coherent_state(30, x).unwrap(), coherent_state(30, y).unwrap());
        let psi = TwoModeState::product(&mb, &mc).unwrap();
        let joint = joint_wigner(&psi, PhasePoint { z_b: zb, z_c: zc }).unwrap();
        let wb = single_mode_wigner(&mb.amplitudes, zb).unwrap();
        let wc = single_mode_wigner(&mc.amplitudes, zc).unwrap();
        prop_assert!((joint - wb * wc).abs() < 1e-10);
        // coherent-state Wigner function
        let expect = WIGNER_SCALE * (-2.0 * ((zb - x).norm_sqr() + (zc - y).norm_sqr())).exp();
        prop_assert!((joint - expect).abs() < 1e-8);
    }

    #[test]
    fn cat_wigner_matches_closed_form(
        t in 0.3f64..6.0,
        plus in any::<bool>(),
        zb in complex(1.5),
        zc in complex(1.5),
    ) {
        let sign = if plus { Sign::Plus } else { Sign::Minus };
        let s = approx_solution(&fig2(), t).unwrap();
        let Ok(cat) = make_cat(&s, sign) else { return Ok(()) };
        let psi = cat.to_state(PairDims::new(20, 20).unwrap()).unwrap();
        let w = joint_wigner(&psi, PhasePoint { z_b: zb, z_c: zc }).unwrap();

        // <x|D(2z)P|y> = e^{-z y* + z* y} <x|2z - y>
        let dp = |z: c64, x: c64, y: c64| (-z * y.conj() + z.conj() * y).exp() * coherent_overlap(x, z * 2.0 - y);
        let w1 = c64::new(0.0, -cat.phase).exp() * sign.factor();
        let branches = [(c64::new(1.0, 0.0), c64::ZERO, c64::ZERO), (w1, cat.amp_b, cat.amp_c)];
        let mut acc = c64::ZERO;
        for (cx, xb, xc) in branches {
            for (cy, yb, yc) in branches {
                acc += cx.conj() * cy * dp(zb, xb, yb) * dp(zc, xc, yc);
            }
        }
        let expect = WIGNER_SCALE * acc.re * cat.norm_const * cat.norm_const;
        prop_assert!((w - expect).abs() < 1e-7, "w={w} expect={expect}");
    }
}

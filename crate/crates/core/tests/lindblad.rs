use fredkin_core::analytic::{approx_solution, branch_state, Sign};
use fredkin_core::c64;
use fredkin_core::fock::{DensityMatrix, FockOperator, Ladders, ModeDims};
use fredkin_core::lindblad::*;
use fredkin_core::model::{build_h1_app, FrequencyConvention, SystemParams};
use std::f64::consts::PI;

fn grid(t_end: f64, samples: usize) -> Vec<f64> {
    (0..samples).map(|k| t_end * k as f64 / (samples - 1) as f64).collect()
}

fn run(gen: &Generator, rho0: &DensityMatrix, times: &[f64], dt: f64) -> Trajectory {
    let opts = EvolveOptions {
        dt,
        ..EvolveOptions::default()
    };
    evolve_observed(rho0, gen, times, &opts, |_, _, _| Ok(())).unwrap()
}

#[test]
fn mode_a_population_decays_exponentially() {
    let p = SystemParams {
        g: 0.0,
        kappa_a: 0.2,
        ..SystemParams::default()
    };
    let dims = ModeDims::new(2, 4, 4).unwrap();
    let h = build_h1_app(&p, dims, FrequencyConvention::ModeA).unwrap();
    let gen = Generator::new(&h, &DissipatorSpec::from_params(&p)).unwrap();
    let times = grid(5.0, 11);
    let traj = run(&gen, &initial_state(dims, Sign::Plus), &times, 1e-3);
    let na = Ladders::new(dims).unwrap().n_a();
    for (rho, t) in traj.states.iter().zip(&times) {
        let n = rho.expectation(&na).unwrap().re;
        assert!((n - 0.5 * (-0.2 * t).exp()).abs() < 1e-6, "t={t} n={n}");
    }
}

#[test]
fn thermal_occupation_is_reached() {
    let dims = ModeDims::new(2, 16, 2).unwrap();
    let l = Ladders::new(dims).unwrap();
    let h = l.n_b().scale(c64::new(2.0, 0.0));
    let d = DissipatorSpec {
        kappa: [0.0, 0.5, 0.0],
        nbar: [0.0, 0.5, 0.0],
    };
    let gen = Generator::new(&h, &d).unwrap();
    let traj = run(&gen, &initial_state(dims, Sign::Plus), &[0.0, 40.0], 1e-2);
    let n = traj.states[1].expectation(&l.n_b()).unwrap().re;
    assert!((n - 0.5).abs() < 1e-4, "{n}");
}

#[test]
fn lossless_evolution_follows_the_approximate_state() {
    let p = SystemParams::default();
    let dims = ModeDims::new(2, 12, 12).unwrap();
    let gen = open_generator(
        &p,
        dims,
        OpenHamiltonian::App,
        FrequencyConvention::ModeA,
        DisplacementMode::Steady,
    )
    .unwrap();
    let times = grid(2.0 * PI, 41);
    let traj = run(&gen, &initial_state(dims, Sign::Plus), &times, 1e-2);
    assert!(traj.max_step_error < 1e-8);
    for (rho, &t) in traj.states.iter().zip(&times) {
        let psi = branch_state(&approx_solution(&p, t).unwrap(), dims).unwrap();
        let f = rho.overlap(&psi).unwrap();
        assert!(f >= 0.999, "t={t} f={f}");
    }
}

#[test]
fn lossy_run_keeps_trace_and_positivity() {
    let p = SystemParams {
        kappa_a: 0.1,
        kappa_b: 0.05,
        kappa_c: 0.05,
        nbar_b: 0.1,
        ..SystemParams::default()
    };
    let dims = ModeDims::new(2, 12, 12).unwrap();
    let gen = open_generator(
        &p,
        dims,
        OpenHamiltonian::Ext,
        FrequencyConvention::ModeA,
        DisplacementMode::Steady,
    )
    .unwrap();
    let traj = run(&gen, &initial_state(dims, Sign::Minus), &grid(3.0, 16), 1e-2);
    assert!(traj.diagnostics_passed());
    assert!(traj.max_trace_dev() < 1e-7);
    assert!(traj.min_eigenvalue().unwrap() > -1e-6);
    for (rho, &t) in traj.states.iter().zip(&traj.times) {
        let o = observables_at(&p, t, rho, &traj.diagnostics[0], ObservableSet::default()).unwrap();
        assert!((0.0..=1.0 + 1e-9).contains(&o.f), "t={t} f={}", o.f);
        assert!((o.p_plus + o.p_minus - 1.0).abs() < 1e-9);
    }
}

#[test]
fn amplitude_damping_purity_dips_then_recovers() {
    // relaxation ends in the pure vacuum, so purity is not monotone
    let dims = ModeDims::new(2, 5, 5).unwrap();
    let d = DissipatorSpec {
        kappa: [0.3, 0.2, 0.1],
        nbar: [0.0; 3],
    };
    let gen = Generator::new(&FockOperator::zeros(dims), &d).unwrap();
    let traj = run(&gen, &initial_state(dims, Sign::Plus), &grid(60.0, 61), 1e-2);
    let purity = |rho: &DensityMatrix| {
        let m = &rho.matrix * &rho.matrix;
        (0..dims.total()).map(|i| m[(i, i)].re).sum::<f64>()
    };
    // only mode a is excited: with p = e^{-kappa_a t}, Tr rho^2 = 1 - p/2 + p^2/2
    for (rho, &t) in traj.states.iter().zip(&traj.times) {
        let p = (-0.3 * t).exp();
        assert!((purity(rho) - (1.0 - 0.5 * p + 0.5 * p * p)).abs() < 1e-9, "t={t}");
    }
    assert!(purity(&traj.states[5]) < purity(&traj.states[0]));
    assert!(purity(&traj.states[60]) > purity(&traj.states[5]));
}

#[test]
fn conditional_states_of_the_initial_state() {
    let p = SystemParams::default();
    let dims = ModeDims::new(2, 6, 6).unwrap();
    let rho = initial_state(dims, Sign::Plus);
    let diag = SampleDiagnostics {
        trace_dev: 0.0,
        hermiticity_dev: 0.0,
        min_eig: None,
    };
    let o = observables_at(&p, 0.0, &rho, &diag, ObservableSet::default()).unwrap();
    assert!((o.f - 1.0).abs() < 1e-12);
    assert!((o.f_plus - 1.0).abs() < 1e-12);
    assert!((o.p_plus - 1.0).abs() < 1e-15 && o.p_minus.abs() < 1e-15);
    assert!(o.n_plus.abs() < 1e-12);
    assert!(o.f_minus.is_nan() && o.n_minus.is_nan());
}

#[test]
fn transient_generator_approaches_steady_generator() {
    let p = SystemParams {
        kappa_b: 2.0,
        kappa_c: 2.0,
        ..SystemParams::default()
    };
    let dims = ModeDims::new(2, 4, 4).unwrap();
    let mk = |mode| {
        open_generator(&p, dims, OpenHamiltonian::Ext, FrequencyConvention::ModeA, mode).unwrap()
    };
    let rho = initial_state(dims, Sign::Plus);
    let late = 60.0;
    let a = mk(DisplacementMode::Transient).lab_rhs(late, &rho).unwrap();
    let b = mk(DisplacementMode::Steady).lab_rhs(late, &rho).unwrap();
    let diff = fredkin_core::linalg::max_abs_diff(a.as_ref(), b.as_ref());
    assert!(diff < 1e-9, "{diff}");
    let early = mk(DisplacementMode::Transient).lab_rhs(0.0, &rho).unwrap();
    let diff0 = fredkin_core::linalg::max_abs_diff(early.as_ref(), b.as_ref());
    assert!(diff0 > 1e-3);
}

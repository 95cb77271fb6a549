//! One preset per figure, with parameters taken from the figure captions.
//!
//! Open-system captions do not state the drive amplitudes; those presets use
//! `Omega_b = Omega_c = 100`.

use std::f64::consts::TAU;

use crate::config::{
    ApproxConfig, DimsConfig, ExperimentConfig, GridConfig, OpenHamiltonianChoice, OutputDirConfig,
    OutputsConfig, ParamsConfig, ParamsPatch, SweepCase, VariantsConfig, WignerConfig,
};

#[derive(Debug, Clone, Copy)]
pub struct Preset {
    pub name: &'static str,
    pub figure: &'static str,
    pub summary: &'static str,
    build: fn() -> ExperimentConfig,
}

impl Preset {
    pub fn config(&self) -> ExperimentConfig {
        let mut cfg = (self.build)();
        cfg.preset = Some(self.name.to_string());
        cfg
    }
}

fn base_params() -> ParamsConfig {
    ParamsConfig {
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

fn closed(params: ParamsConfig, samples: usize, outputs: OutputsConfig) -> ExperimentConfig {
    ExperimentConfig {
        preset: None,
        params,
        dims: DimsConfig {
            a: 2,
            b: 20,
            c: 20,
            cap: fredkin_core::fock::DEFAULT_DIM_CAP,
        },
        grid: GridConfig {
            t_max: TAU,
            samples,
            dt: 1e-3,
            min_eig_every: 1,
        },
        outputs,
        variants: VariantsConfig::default(),
        wigner: WignerConfig::default(),
        approx: ApproxConfig::default(),
        sweep: Vec::new(),
        output: OutputDirConfig::default(),
    }
}

fn fig2() -> ExperimentConfig {
    closed(
        base_params(),
        4001,
        OutputsConfig {
            negativity: true,
            ..Default::default()
        },
    )
}

fn fig3() -> ExperimentConfig {
    closed(
        base_params(),
        2,
        OutputsConfig {
            wigner: true,
            ..Default::default()
        },
    )
}

fn fig4() -> ExperimentConfig {
    closed(
        ParamsConfig {
            omega_a: 1.1,
            drive_b: 200.0,
            drive_c: 200.0,
            ..base_params()
        },
        2001,
        OutputsConfig {
            probabilities: true,
            ..Default::default()
        },
    )
}

fn delta_b_sweep(values: &[f64]) -> Vec<SweepCase> {
    values
        .iter()
        .map(|&d| SweepCase {
            label: format!("db{}", tag(d)),
            params: ParamsPatch {
                delta_b: Some(d),
                ..Default::default()
            },
        })
        .collect()
}

fn fig5(values: &[f64]) -> ExperimentConfig {
    let mut cfg = closed(
        ParamsConfig {
            drive_b: 50.0,
            drive_c: 50.0,
            ..base_params()
        },
        2001,
        OutputsConfig {
            fidelities: true,
            ..Default::default()
        },
    );
    cfg.sweep = delta_b_sweep(values);
    cfg
}

fn fig5a() -> ExperimentConfig {
    fig5(&[1.5, 1.7, 2.5])
}

fn fig5bc() -> ExperimentConfig {
    fig5(&[1.5, 2.0, 3.0])
}

/// `1.5` becomes `1p5`, `0.01` becomes `0p01`.
pub fn tag(x: f64) -> String {
    format!("{x}").replace('-', "m").replace('.', "p")
}

/// Nine cases: one mode's decay rate at 0.01, 0.05 and 0.1 with the other two
/// at 0.001.
fn kappa_sweep() -> Vec<SweepCase> {
    let mut cases = Vec::new();
    for mode in ["a", "b", "c"] {
        for k in [0.01, 0.05, 0.1] {
            let rate = |m: &str| Some(if m == mode { k } else { 0.001 });
            cases.push(SweepCase {
                label: format!("kappa_{mode}_{}", tag(k)),
                params: ParamsPatch {
                    kappa_a: rate("a"),
                    kappa_b: rate("b"),
                    kappa_c: rate("c"),
                    ..Default::default()
                },
            });
        }
    }
    cases
}

/// `dt` keeps the one-step error estimate below the integrator tolerance at
/// this coupling.
fn open(g: f64, dt: f64, which: OpenHamiltonianChoice, fidelities: bool, negativity: bool) -> ExperimentConfig {
    let mut cfg = closed(
        ParamsConfig { g, ..base_params() },
        629,
        OutputsConfig {
            open: true,
            open_fidelities: fidelities,
            open_negativity: negativity,
            ..Default::default()
        },
    );
    cfg.grid.dt = dt;
    cfg.grid.min_eig_every = 10;
    cfg.variants.open_hamiltonian = which;
    cfg.sweep = kappa_sweep();
    cfg
}

fn fig6() -> ExperimentConfig {
    open(0.01, 2e-2, OpenHamiltonianChoice::Ext, true, false)
}

fn fig7() -> ExperimentConfig {
    open(0.02, 5e-3, OpenHamiltonianChoice::App, false, false)
}

fn fig8() -> ExperimentConfig {
    open(0.02, 5e-3, OpenHamiltonianChoice::App, false, true)
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "fig2",
        figure: "Fig. 2",
        summary: "negativities N+/N- over one period; omega_a=0.1, Omega_b=Omega_c=100, g=0.01, delta_b=2",
        build: fig2,
    },
    Preset {
        name: "fig3",
        figure: "Fig. 3",
        summary: "joint Wigner planes and diagonal cuts at t=1.85 and t=pi; Fig. 2 parameters",
        build: fig3,
    },
    Preset {
        name: "fig4",
        figure: "Fig. 4",
        summary: "exact and approximate detection probabilities; omega_a=1.1, Omega_b=Omega_c=200, g=0.01, delta_b=2",
        build: fig4,
    },
    Preset {
        name: "fig5a",
        figure: "Fig. 5(a)",
        summary: "fidelities F, F+/F- for delta_b in {1.5, 1.7, 2.5}; Omega_b=Omega_c=50, g=0.01",
        build: fig5a,
    },
    Preset {
        name: "fig5b",
        figure: "Fig. 5(b)",
        summary: "fidelities F, F+/F- for delta_b in {1.5, 2.0, 3.0}; Omega_b=Omega_c=50, g=0.01",
        build: fig5bc,
    },
    Preset {
        name: "fig5c",
        figure: "Fig. 5(c)",
        summary: "fidelities F, F+/F- for delta_b in {1.5, 2.0, 3.0}; Omega_b=Omega_c=50, g=0.01",
        build: fig5bc,
    },
    Preset {
        name: "fig6",
        figure: "Fig. 6",
        summary: "open-system fidelities f, f+/f- under H1_ext, kappa sweeps; g=0.01, Omega_b=Omega_c=100 (assumed)",
        build: fig6,
    },
    Preset {
        name: "fig7",
        figure: "Fig. 7",
        summary: "open-system probabilities P+/P- under H1_app, kappa sweeps; g=0.02, Omega_b=Omega_c=100 (assumed)",
        build: fig7,
    },
    Preset {
        name: "fig8",
        figure: "Fig. 8",
        summary: "open-system negativities N+/N- under H1_app, kappa sweeps; g=0.02, Omega_b=Omega_c=100 (assumed)",
        build: fig8,
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for p in PRESETS {
            p.config().validate().unwrap_or_else(|e| panic!("{}: {e}", p.name));
        }
    }

    #[test]
    fn tags() {
        assert_eq!(tag(1.5), "1p5");
        assert_eq!(tag(0.01), "0p01");
        assert_eq!(tag(2.0), "2");
    }

    #[test]
    fn kappa_sweep_has_nine_distinct_cases() {
        let s = kappa_sweep();
        assert_eq!(s.len(), 9);
        assert_eq!(s[4].label, "kappa_b_0p05");
        assert_eq!(s[4].params.kappa_b, Some(0.05));
        assert_eq!(s[4].params.kappa_a, Some(0.001));
    }
}

//! Bundled experiment configurations, one set per figure of interest.
//!
//! A preset may expand into several runs (parameter sweeps); each carries its
//! own label and therefore its own output directory.

use crate::config::{ExperimentConfig, Mode, ModelSpec, Rho0Spec};
use crate::error::{CliError, CliResult};

pub const PRESET_NAMES: [&str; 6] = ["fig1", "fig2", "fig3", "fig4", "fig5", "toy"];

/// Default master seed of every preset.
pub const PRESET_SEED: u64 = 1;

fn discrete(label: &str, u: f64, r: f64, n_steps: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(Mode::Discrete, label, ModelSpec::uvrs(u, 1.0, r, -r));
    c.seed = PRESET_SEED;
    c.run.n_steps = Some(n_steps);
    c
}

/// Single trapped-and-flipping trajectory.
pub fn fig1() -> Vec<ExperimentConfig> {
    vec![discrete("fig1", 1.1, 0.00015, 400_000)]
}

/// Position histograms at three times, started from the pure up state.
pub fn fig2() -> Vec<ExperimentConfig> {
    let mut c = discrete("fig2", 1.1, 0.0006, 15_000);
    c.rho0 = Rho0Spec::PureUp;
    c.run.n_trajectories = 10_000;
    c.run.sample_times = vec![2000.0, 6000.0, 15_000.0];
    vec![c]
}

/// Equal-time histograms for three noise strengths.
pub fn fig3() -> Vec<ExperimentConfig> {
    [1.005, 1.05, 1.15]
        .iter()
        .map(|&u| {
            let mut c = discrete(&format!("fig3_u{u}"), u, 0.0006, 5000);
            c.run.n_trajectories = 10_000;
            c.run.sample_times = vec![5000.0];
            c
        })
        .collect()
}

/// Weak-noise trajectory: regular oscillation, no trapping.
pub fn fig4() -> Vec<ExperimentConfig> {
    vec![discrete("fig4", 1.005, 0.00015, 100_000)]
}

/// Effective potential below, at and above the bi-stability threshold, with
/// one Bloch trajectory each.
pub fn fig5() -> Vec<ExperimentConfig> {
    [0.0, 1.0, 2.0]
        .iter()
        .map(|&a| {
            let mut c = ExperimentConfig::new(Mode::Sde, &format!("fig5_a{a}"), ModelSpec::continuum(a, 1.0));
            c.seed = PRESET_SEED;
            c.rho0 = Rho0Spec::PureUp;
            c.run.t_max = Some(50.0);
            c.estimators.potential_range = Some(4.0);
            c
        })
        .collect()
}

/// Telegraph walker compared three ways at `t = 0.5`.
pub fn toy() -> Vec<ExperimentConfig> {
    let mut c = ExperimentConfig::new(Mode::Toy, "toy", ModelSpec::default());
    c.seed = PRESET_SEED;
    c.run.t_max = Some(0.5);
    c.run.n_trajectories = 1_000_000;
    c.grid.dx = 0.01;
    vec![c]
}

pub fn preset(name: &str) -> CliResult<Vec<ExperimentConfig>> {
    match name {
        "fig1" => Ok(fig1()),
        "fig2" => Ok(fig2()),
        "fig3" => Ok(fig3()),
        "fig4" => Ok(fig4()),
        "fig5" => Ok(fig5()),
        "toy" => Ok(toy()),
        _ => Err(CliError::Config(format!("preset: unknown `{name}` (expected one of {})", PRESET_NAMES.join(", ")))),
    }
}

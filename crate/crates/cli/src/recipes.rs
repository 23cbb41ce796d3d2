//! Ready-made configs for the figures, scaled to run on a workstation.

use std::path::PathBuf;

use crate::config::{BulkRule, Experiment, RunConfig};

pub struct Recipe {
    pub name: &'static str,
    pub summary: &'static str,
    pub config: RunConfig,
}

fn powers_of_two(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|k| 2f64.powi(k)).collect()
}

fn recipe(name: &'static str, summary: &'static str, config: RunConfig) -> Recipe {
    Recipe {
        name,
        summary,
        config: RunConfig {
            output: PathBuf::from("out").join(name),
            ..config
        },
    }
}

pub fn figure_recipes() -> Vec<Recipe> {
    let base = RunConfig::for_experiment;
    vec![
        recipe(
            "fig2-trajectory",
            "gap, mixing element and local threshold velocity along one front sweep",
            RunConfig {
                n_sites: 512,
                alphas: vec![1.0 / 64.0, 1.0 / 16.0],
                base_seed: 2,
                ..base(Experiment::SpectralScan)
            },
        ),
        recipe(
            "fig3-thresholds",
            "quantiles of the minimal gap, maximal mixing and threshold velocity versus slope",
            RunConfig {
                n_sites: 256,
                alphas: powers_of_two(-7, -1),
                n_realizations: 200,
                write_trajectories: false,
                bulk_rule: BulkRule::Critical,
                ..base(Experiment::SpectralScan)
            },
        ),
        recipe(
            "fig4-collapse",
            "bulk gap distributions in the scaling variable and the uniform critical comparison",
            RunConfig {
                n_sites: 256,
                alphas: vec![1.0 / 16.0, 1.0 / 64.0, 1.0 / 128.0],
                n_realizations: 400,
                critical_sizes: vec![128, 256],
                critical_samples: 2000,
                ..base(Experiment::GapCollapse)
            },
        ),
        recipe(
            "fig5-landscape",
            "median and tail residual energy over slope and ramp time",
            RunConfig {
                n_sites: 128,
                times: vec![100.0, 2000.0],
                n_realizations: 100,
                ..base(Experiment::Landscape)
            },
        ),
        recipe(
            "fig5-landscape-full",
            "full-size landscape; runs for days on a single core",
            RunConfig {
                n_sites: 512,
                alphas: powers_of_two(-7, 1),
                times: vec![10.0, 100.0, 1000.0, 10000.0],
                n_realizations: 500,
                ..base(Experiment::Landscape)
            },
        ),
        recipe(
            "fig6-comparison",
            "homogeneous ramp against a fixed-slope front over ramp times",
            RunConfig {
                n_sites: 128,
                alphas: vec![1.0 / 32.0],
                times: vec![100.0, 300.0, 1000.0, 3000.0, 10000.0],
                n_realizations: 100,
                ..base(Experiment::Landscape)
            },
        ),
        recipe(
            "fig7-clean",
            "clean chain calibration of gap, mixing and threshold velocity",
            RunConfig {
                n_sites: 512,
                alphas: vec![1.0 / 128.0, 1.0 / 64.0, 1.0 / 32.0],
                clean: true,
                ..base(Experiment::SpectralScan)
            },
        ),
        recipe(
            "kzm-clean",
            "kink density after homogeneous ramps of the clean chain",
            RunConfig {
                n_sites: 256,
                taus: vec![10.0, 30.0, 100.0, 300.0, 1000.0],
                ..base(Experiment::KzmSweep)
            },
        ),
        recipe(
            "kzm-disordered",
            "residual energy density after homogeneous ramps of disordered chains",
            RunConfig {
                n_sites: 128,
                clean: false,
                taus: vec![100.0 / 3.0, 100.0, 1000.0 / 3.0, 1000.0, 10000.0 / 3.0],
                n_realizations: 20,
                ..base(Experiment::KzmSweep)
            },
        ),
        recipe(
            "oracle",
            "free-fermion results against exact diagonalization on small chains",
            base(Experiment::OracleCheck),
        ),
    ]
}

pub fn find(name: &str) -> Option<Recipe> {
    figure_recipes().into_iter().find(|r| r.name == name)
}

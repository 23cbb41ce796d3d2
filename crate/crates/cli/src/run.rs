use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use tfim_front::disorder::{critical_field, CouplingKind, CouplingRealization};
use tfim_front::ed::EvolveOptions as EdOptions;
use tfim_front::oracle::{compare_dynamics, compare_statics};
use tfim_front::profile::{velocity_for, Drive, FrontProfile, Schedule};
use tfim_front::quench::{run_quench, QuenchOptions, QuenchResult};
use tfim_front::spectral::{default_grid_size, scan_trajectory};
use tfim_front::stats::{
    bulk_gap_samples, collapse_histogram, critical_gap_samples, ensemble_realization, fit_collapse_prefactor,
    ks_distance, kzm_sweep, landscape, log_inverse_square_fit, powerlaw_fit, uniform_edges, GridPoint, LandscapeRow,
    LandscapeSpec, QuantileTable,
};

use crate::config::{ConfigError, Experiment, LoadedConfig, RunConfig};
use crate::output::OutputDir;

pub const ORTHOGONALITY_LIMIT: f64 = 1e-8;
pub const PARITY_LIMIT: f64 = 1e-8;
pub const RESIDUAL_FLOOR: f64 = -1e-9;
pub const ORACLE_STATIC_TOL: f64 = 1e-9;
pub const ORACLE_DYNAMIC_TOL: f64 = 1e-7;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("numerical failure: {0}")]
    Numerical(#[from] tfim_front::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Io(_) => 1,
            RunError::Numerical(_) => 2,
        }
    }
}

/// What a finished run produced.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub experiment: &'static str,
    pub files: Vec<PathBuf>,
    /// Invariant violations; any entry makes the run exit with status 2.
    pub violations: Vec<String>,
    pub wall_time_seconds: f64,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.violations.is_empty() {
            0
        } else {
            2
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    experiment: &'static str,
    config: &'a RunConfig,
    files: &'a [PathBuf],
    violations: &'a [String],
    wall_time_seconds: f64,
    workers: usize,
}

/// Validates the config, runs the experiment and writes its data files
/// followed by `manifest.json`.
pub fn run(loaded: &LoadedConfig) -> Result<RunReport, RunError> {
    loaded.validate()?;
    let cfg = &loaded.config;
    let started = Instant::now();
    let mut out = OutputDir::create(&cfg.output)?;
    let violations = match cfg.experiment {
        Experiment::SpectralScan => spectral_scan(cfg, &mut out)?,
        Experiment::GapCollapse => gap_collapse(cfg, &mut out)?,
        Experiment::Quench => quench(cfg, &mut out)?,
        Experiment::Landscape => landscape_run(cfg, &mut out)?,
        Experiment::KzmSweep => kzm(cfg, &mut out)?,
        Experiment::OracleCheck => oracle_check(cfg, &mut out)?,
    };
    let files = out.written().to_vec();
    let wall = started.elapsed().as_secs_f64();
    out.write_json(
        "manifest.json",
        &Manifest {
            tool: "tfim-front",
            version: env!("CARGO_PKG_VERSION"),
            experiment: cfg.experiment.name(),
            config: cfg,
            files: &files,
            violations: &violations,
            wall_time_seconds: wall,
            workers: rayon::current_num_threads(),
        },
    )?;
    Ok(RunReport {
        experiment: cfg.experiment.name(),
        files,
        violations,
        wall_time_seconds: wall,
    })
}

fn realizations(cfg: &RunConfig) -> Result<Vec<CouplingRealization>, RunError> {
    (0..cfg.n_realizations as u64)
        .map(|i| Ok(ensemble_realization(cfg.n_sites, cfg.base_seed, i, cfg.kind())?))
        .collect()
}

fn quench_options(cfg: &RunConfig) -> QuenchOptions {
    QuenchOptions {
        dt: cfg.dt,
        fidelity: cfg.fidelity,
        ..QuenchOptions::default()
    }
}

fn check_invariants(r: &QuenchResult, label: &str, violations: &mut Vec<String>) {
    if !(r.orthogonality_drift < ORTHOGONALITY_LIMIT) {
        violations.push(format!("{label}: orthogonality drift {:e}", r.orthogonality_drift));
    }
    if !(r.parity_drift < PARITY_LIMIT) {
        violations.push(format!("{label}: parity drift {:e}", r.parity_drift));
    }
    if !(r.residual_energy >= RESIDUAL_FLOOR) {
        violations.push(format!("{label}: negative residual energy {:e}", r.residual_energy));
    }
}

#[derive(Serialize)]
struct TrajectoryRow {
    alpha: f64,
    realization: usize,
    seed: u64,
    n_f: f64,
    #[serde(rename = "Delta")]
    delta: f64,
    #[serde(rename = "Omega")]
    omega: f64,
    v_t_local: f64,
    in_bulk: bool,
}

#[derive(Serialize)]
struct ScanSummaryRow {
    alpha: f64,
    realization: usize,
    seed: u64,
    #[serde(rename = "Delta_min")]
    delta_min: f64,
    #[serde(rename = "Omega_max")]
    omega_max: f64,
    v_t_min: f64,
}

#[derive(Serialize)]
struct QuantileRow {
    alpha: f64,
    quantity: &'static str,
    q01: f64,
    q05: f64,
    q50: f64,
    q95: f64,
    q99: f64,
    count: usize,
}

fn spectral_scan(cfg: &RunConfig, out: &mut OutputDir) -> Result<Vec<String>, RunError> {
    let reals = realizations(cfg)?;
    let window = cfg.bulk_window();
    let jobs: Vec<(f64, usize)> = cfg
        .alphas
        .iter()
        .flat_map(|&a| (0..reals.len()).map(move |i| (a, i)))
        .collect();
    let trajs = jobs
        .par_iter()
        .map(|&(a, i)| {
            let p = FrontProfile::new(cfg.g_i, cfg.g_f, a, 1.0)?;
            let grid = (default_grid_size(cfg.n_sites, &p) as f64 * cfg.positions_per_site
                / tfim_front::spectral::DEFAULT_POSITIONS_PER_SITE)
                .ceil()
                .max(10.0) as usize;
            scan_trajectory(&reals[i].couplings, &p, grid, window)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (&(a, i), t) in jobs.iter().zip(&trajs) {
        if cfg.write_trajectories {
            for k in 0..t.front_positions.len() {
                rows.push(TrajectoryRow {
                    alpha: a,
                    realization: i,
                    seed: reals[i].seed,
                    n_f: t.front_positions[k],
                    delta: t.delta[k],
                    omega: t.omega[k],
                    v_t_local: t.v_t_local[k],
                    in_bulk: t.in_bulk(k),
                });
            }
        }
        summary.push(ScanSummaryRow {
            alpha: a,
            realization: i,
            seed: reals[i].seed,
            delta_min: t.delta_min,
            omega_max: t.omega_max,
            v_t_min: t.v_t_min,
        });
    }
    if cfg.write_trajectories {
        out.write_csv("trajectory.csv", &rows)?;
    }
    out.write_csv("summary.csv", &summary)?;
    let mut quantiles = Vec::new();
    for &a in &cfg.alphas {
        let of = |f: fn(&ScanSummaryRow) -> f64| -> Vec<f64> {
            summary
                .iter()
                .filter(|r| r.alpha == a)
                .map(f)
                .filter(|x| x.is_finite())
                .collect()
        };
        for (name, values) in [
            ("Delta_min", of(|r| r.delta_min)),
            ("Omega_max", of(|r| r.omega_max)),
            ("v_t_min", of(|r| r.v_t_min)),
        ] {
            if values.is_empty() {
                continue;
            }
            let q = QuantileTable::from_values(&values)?;
            quantiles.push(QuantileRow {
                alpha: a,
                quantity: name,
                q01: q.q01,
                q05: q.q05,
                q50: q.q50,
                q95: q.q95,
                q99: q.q99,
                count: values.len(),
            });
        }
    }
    out.write_csv("quantiles.csv", &quantiles)?;
    Ok(Vec::new())
}

#[derive(Serialize)]
struct HistogramRow {
    alpha: f64,
    bin_lo: f64,
    bin_hi: f64,
    density: f64,
}

#[derive(Serialize)]
struct CollapseRow {
    alpha: f64,
    samples: usize,
    rejected: usize,
    out_of_range: usize,
    reference_alpha: f64,
    ks_to_reference: f64,
}

#[derive(Serialize)]
struct PrefactorRow {
    c: f64,
    ks: f64,
    critical_samples: usize,
    reference_samples: usize,
}

fn gap_collapse(cfg: &RunConfig, out: &mut OutputDir) -> Result<Vec<String>, RunError> {
    let reals = realizations(cfg)?;
    let window = cfg.bulk_window();
    let edges = uniform_edges(cfg.theta_min, cfg.theta_max, cfg.bins);
    let mut hists = Vec::new();
    for &a in &cfg.alphas {
        let per: Vec<Vec<f64>> = reals
            .par_iter()
            .map(|r| bulk_gap_samples(r, a, cfg.positions_per_site, window))
            .collect::<Result<_, _>>()?;
        let gaps: Vec<f64> = per.into_iter().flatten().collect();
        hists.push(collapse_histogram(&gaps, a, &edges)?);
    }
    // The smallest slope is the reference distribution.
    let reference = hists
        .iter()
        .min_by(|x, y| x.alpha.total_cmp(&y.alpha))
        .expect("validated non-empty");
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for h in &hists {
        for (k, d) in h.density.iter().enumerate() {
            rows.push(HistogramRow {
                alpha: h.alpha,
                bin_lo: h.edges[k],
                bin_hi: h.edges[k + 1],
                density: *d,
            });
        }
        summary.push(CollapseRow {
            alpha: h.alpha,
            samples: h.samples.len(),
            rejected: h.rejected,
            out_of_range: h.out_of_range,
            reference_alpha: reference.alpha,
            ks_to_reference: ks_distance(&h.samples, &reference.samples)?,
        });
    }
    out.write_csv("histogram.csv", &rows)?;
    out.write_csv("collapse.csv", &summary)?;
    if !cfg.critical_sizes.is_empty() {
        let g_c = critical_field(CouplingKind::Disordered, None);
        let crit = critical_gap_samples(&cfg.critical_sizes, cfg.critical_samples, cfg.base_seed ^ 0xC817, g_c)?;
        let fit = fit_collapse_prefactor(&crit, &reference.samples)?;
        out.write_csv(
            "prefactor.csv",
            &[PrefactorRow {
                c: fit.c,
                ks: fit.ks,
                critical_samples: crit.len(),
                reference_samples: reference.samples.len(),
            }],
        )?;
    }
    Ok(Vec::new())
}

/// A drive plus the label columns that identify it.
struct Ramp {
    alpha: f64,
    total_time: f64,
    velocity: Option<f64>,
    drive: Drive,
}

fn ramps(cfg: &RunConfig) -> Result<Vec<Ramp>, RunError> {
    let mut list = Vec::new();
    for &a in &cfg.alphas {
        if cfg.velocities.is_empty() {
            for &t in &cfg.times {
                let v = velocity_for(cfg.n_sites, a, cfg.g_i, cfg.g_f, t)?;
                list.push(Ramp {
                    alpha: a,
                    total_time: t,
                    velocity: Some(v),
                    drive: Drive::Front(FrontProfile::new(cfg.g_i, cfg.g_f, a, v)?),
                });
            }
        } else {
            for &v in &cfg.velocities {
                let p = FrontProfile::new(cfg.g_i, cfg.g_f, a, v)?;
                let drive = Drive::Front(p);
                list.push(Ramp {
                    alpha: a,
                    total_time: drive.schedule(cfg.n_sites)?.total_time,
                    velocity: Some(v),
                    drive,
                });
            }
        }
    }
    if cfg.include_homogeneous {
        for &t in &cfg.times {
            Schedule::homogeneous(cfg.g_i, cfg.g_f, t)?;
            list.push(Ramp {
                alpha: 0.0,
                total_time: t,
                velocity: None,
                drive: Drive::Homogeneous {
                    g_i: cfg.g_i,
                    g_f: cfg.g_f,
                    total_time: t,
                },
            });
        }
    }
    Ok(list)
}

#[derive(Serialize)]
struct QuenchRow {
    alpha: f64,
    #[serde(rename = "T")]
    total_time: f64,
    v: Option<f64>,
    #[serde(rename = "N")]
    n_sites: usize,
    realization: usize,
    seed: u64,
    residual_energy: f64,
    kink_density: f64,
    fidelity: Option<f64>,
    parity_drift: f64,
    orthogonality_drift: f64,
}

#[derive(Serialize)]
struct OracleRow {
    check: &'static str,
    #[serde(rename = "N")]
    n_sites: usize,
    realization: usize,
    seed: u64,
    /// Front position for static checks, ramp time for dynamic ones.
    parameter: f64,
    alpha: f64,
    free_fermion: f64,
    ed: f64,
    abs_error: f64,
    tolerance: f64,
    pass: bool,
}

impl OracleRow {
    #[allow(clippy::too_many_arguments)]
    fn new(
        check: &'static str,
        r: &CouplingRealization,
        realization: usize,
        parameter: f64,
        alpha: f64,
        ff: f64,
        ed: f64,
        tolerance: f64,
    ) -> Self {
        let abs_error = (ff - ed).abs();
        Self {
            check,
            n_sites: r.n_sites,
            realization,
            seed: r.seed,
            parameter,
            alpha,
            free_fermion: ff,
            ed,
            abs_error,
            tolerance,
            pass: abs_error <= tolerance,
        }
    }
}

fn dynamics_rows(
    r: &CouplingRealization,
    i: usize,
    ramp: &Ramp,
    dt: f64,
) -> Result<Vec<OracleRow>, RunError> {
    let c = compare_dynamics(r, &ramp.drive, dt, EdOptions::default())?;
    let (t, a) = (ramp.total_time, ramp.alpha);
    Ok(vec![
        OracleRow::new("residual_energy", r, i, t, a, c.residual_energy_trotter, c.residual_energy_ed, ORACLE_DYNAMIC_TOL),
        OracleRow::new("fidelity", r, i, t, a, c.fidelity_trotter, c.fidelity_ed, ORACLE_DYNAMIC_TOL),
        OracleRow::new("kink_density", r, i, t, a, c.kink_density_trotter, c.kink_density_ed, ORACLE_DYNAMIC_TOL),
    ])
}

fn oracle_violations(rows: &[OracleRow]) -> Vec<String> {
    rows.iter()
        .filter(|r| !r.pass)
        .map(|r| {
            format!(
                "oracle {} N={} seed={} parameter={}: |{} - {}| = {:e} > {:e}",
                r.check, r.n_sites, r.seed, r.parameter, r.free_fermion, r.ed, r.abs_error, r.tolerance
            )
        })
        .collect()
}

fn quench(cfg: &RunConfig, out: &mut OutputDir) -> Result<Vec<String>, RunError> {
    let reals = realizations(cfg)?;
    let ramps = ramps(cfg)?;
    let opts = quench_options(cfg);
    let jobs: Vec<(usize, usize)> = (0..ramps.len())
        .flat_map(|k| (0..reals.len()).map(move |i| (k, i)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(k, i)| run_quench(&reals[i], &ramps[k].drive, &opts))
        .collect::<Result<Vec<_>, _>>()?;
    let mut violations = Vec::new();
    let rows: Vec<QuenchRow> = jobs
        .iter()
        .zip(&results)
        .map(|(&(k, i), r)| {
            check_invariants(r, &format!("ramp {k} realization {i}"), &mut violations);
            QuenchRow {
                alpha: ramps[k].alpha,
                total_time: ramps[k].total_time,
                v: ramps[k].velocity,
                n_sites: cfg.n_sites,
                realization: i,
                seed: reals[i].seed,
                residual_energy: r.residual_energy,
                kink_density: r.kink_density,
                fidelity: r.fidelity,
                parity_drift: r.parity_drift,
                orthogonality_drift: r.orthogonality_drift,
            }
        })
        .collect();
    out.write_csv("quench.csv", &rows)?;
    if cfg.oracle {
        let oracle: Vec<Vec<OracleRow>> = jobs
            .par_iter()
            .map(|&(k, i)| dynamics_rows(&reals[i], i, &ramps[k], cfg.dt))
            .collect::<Result<_, _>>()?;
        let oracle: Vec<OracleRow> = oracle.into_iter().flatten().collect();
        violations.extend(oracle_violations(&oracle));
        out.write_csv("oracle.csv", &oracle)?;
    }
    Ok(violations)
}

fn landscape_run(cfg: &RunConfig, out: &mut OutputDir) -> Result<Vec<String>, RunError> {
    let mut points = Vec::new();
    for &t in &cfg.times {
        if cfg.include_homogeneous {
            points.push(GridPoint {
                alpha: None,
                total_time: t,
            });
        }
        for &a in &cfg.alphas {
            points.push(GridPoint {
                alpha: Some(a),
                total_time: t,
            });
        }
    }
    let spec = LandscapeSpec {
        n_sites: cfg.n_sites,
        points,
        n_realizations: cfg.n_realizations,
        base_seed: cfg.base_seed,
        kind: cfg.kind(),
        g_i: cfg.g_i,
        g_f: cfg.g_f,
        quench: quench_options(cfg),
        spectral: false,
    };
    let results = landscape(&spec)?;
    let mut violations = Vec::new();
    let mut per = Vec::new();
    for e in &results {
        for r in &e.records {
            let label = format!("T={} alpha={:?} realization {}", e.total_time, e.alpha, r.index);
            if !(r.orthogonality_drift < ORTHOGONALITY_LIMIT) {
                violations.push(format!("{label}: orthogonality drift {:e}", r.orthogonality_drift));
            }
            if !(r.parity_drift < PARITY_LIMIT) {
                violations.push(format!("{label}: parity drift {:e}", r.parity_drift));
            }
            if !(r.residual_energy >= RESIDUAL_FLOOR) {
                violations.push(format!("{label}: negative residual energy {:e}", r.residual_energy));
            }
            per.push(QuenchRow {
                alpha: e.alpha.unwrap_or(0.0),
                total_time: e.total_time,
                v: e.velocity,
                n_sites: e.n_sites,
                realization: r.index as usize,
                seed: r.seed,
                residual_energy: r.residual_energy,
                kink_density: r.kink_density,
                fidelity: r.fidelity,
                parity_drift: r.parity_drift,
                orthogonality_drift: r.orthogonality_drift,
            });
        }
    }
    let rows: Vec<LandscapeRow> = results.iter().map(LandscapeRow::from).collect();
    out.write_csv("landscape.csv", &rows)?;
    out.write_csv("realizations.csv", &per)?;
    Ok(violations)
}

#[derive(Serialize)]
struct KzmRow {
    tau_q: f64,
    #[serde(rename = "T")]
    total_time: f64,
    #[serde(rename = "N")]
    n_sites: usize,
    realization: usize,
    seed: u64,
    kink_density: f64,
    residual_energy: f64,
}

#[derive(Serialize)]
struct FitRow {
    model: &'static str,
    a: f64,
    b: f64,
    r_squared: f64,
    poor: bool,
}

fn kzm(cfg: &RunConfig, out: &mut OutputDir) -> Result<Vec<String>, RunError> {
    let reals = realizations(cfg)?;
    let opts = quench_options(cfg);
    let sweeps = reals
        .iter()
        .map(|r| kzm_sweep(r, &cfg.taus, cfg.g_i, cfg.g_f, &opts))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for (i, s) in sweeps.iter().enumerate() {
        for p in s {
            rows.push(KzmRow {
                tau_q: p.tau_q,
                total_time: p.total_time,
                n_sites: cfg.n_sites,
                realization: i,
                seed: reals[i].seed,
                kink_density: p.kink_density,
                residual_energy: p.residual_energy,
            });
        }
    }
    out.write_csv("kzm.csv", &rows)?;
    let m = sweeps.len() as f64;
    let mean = |f: fn(&tfim_front::stats::KzmPoint) -> f64| -> Vec<f64> {
        (0..cfg.taus.len())
            .map(|k| sweeps.iter().map(|s| f(&s[k])).sum::<f64>() / m)
            .collect()
    };
    let d = mean(|p| p.kink_density);
    let q_density: Vec<f64> = mean(|p| p.residual_energy).iter().map(|q| q / cfg.n_sites as f64).collect();
    let times: Vec<f64> = sweeps[0].iter().map(|p| p.total_time).collect();
    let mut fits = Vec::new();
    if d.iter().all(|&x| x > 0.0) {
        let f = powerlaw_fit(&cfg.taus, &d)?;
        fits.push(FitRow {
            model: "kink_density_powerlaw",
            a: f.exponent,
            b: f.prefactor,
            r_squared: f.r_squared,
            poor: f.r_squared < 0.9,
        });
    }
    if times.iter().all(|&t| t > 1.0) {
        let f = log_inverse_square_fit(&times, &q_density)?;
        fits.push(FitRow {
            model: "residual_density_inverse_log_square",
            a: f.a,
            b: f.b,
            r_squared: f.r_squared,
            poor: f.poor,
        });
    }
    out.write_csv("fit.csv", &fits)?;
    Ok(Vec::new())
}

fn oracle_check(cfg: &RunConfig, out: &mut OutputDir) -> Result<Vec<String>, RunError> {
    let mut jobs = Vec::new();
    for &n in &cfg.oracle_sizes {
        for i in 0..cfg.n_realizations {
            jobs.push((n, i));
        }
    }
    let statics: Vec<Vec<OracleRow>> = jobs
        .par_iter()
        .map(|&(n, i)| -> Result<Vec<OracleRow>, RunError> {
            let r = ensemble_realization(n, cfg.base_seed, i as u64, CouplingKind::Disordered)?;
            let mut rows = Vec::new();
            for &a in &cfg.alphas {
                let p = FrontProfile::new(cfg.g_i, cfg.g_f, a, 1.0)?;
                let hw = p.half_width();
                let m = cfg.oracle_positions;
                for k in 0..m {
                    // Evenly spread over the sweep, excluding the end points.
                    let nf = -hw + (n as f64 + 2.0 * hw) * (k as f64 + 0.5) / m as f64;
                    let c = compare_statics(&r.couplings, &p, nf)?;
                    rows.push(OracleRow::new("gap", &r, i, nf, a, c.gap_free_fermion, c.gap_ed, ORACLE_STATIC_TOL));
                    rows.push(OracleRow::new("omega", &r, i, nf, a, c.omega_free_fermion, c.omega_ed, ORACLE_STATIC_TOL));
                }
            }
            Ok(rows)
        })
        .collect::<Result<_, _>>()?;
    let mut rows: Vec<OracleRow> = statics.into_iter().flatten().collect();
    let reals = realizations(cfg)?;
    let ramps = ramps(cfg)?;
    let dynamic_jobs: Vec<(usize, usize)> = (0..ramps.len()).flat_map(|k| (0..reals.len()).map(move |i| (k, i))).collect();
    let dynamic: Vec<Vec<OracleRow>> = dynamic_jobs
        .par_iter()
        .map(|&(k, i)| dynamics_rows(&reals[i], i, &ramps[k], cfg.dt))
        .collect::<Result<_, _>>()?;
    rows.extend(dynamic.into_iter().flatten());
    let violations = oracle_violations(&rows);
    out.write_csv("oracle.csv", &rows)?;
    Ok(violations)
}

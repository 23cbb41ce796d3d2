//! Ensemble aggregation: quantiles, gap collapse, fits and landscapes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::{realization_seed, sample_couplings, CouplingKind, CouplingRealization};
use crate::error::{Error, Result};
use crate::profile::{velocity_for, Drive, FrontProfile, Schedule};
use crate::quench::{run_quench, QuenchOptions, QuenchResult};
use crate::spectral::{low_modes, scan_trajectory, uniform_field_parity, BulkWindow};

pub const QUANTILE_LEVELS: [f64; 5] = [0.01, 0.05, 0.5, 0.95, 0.99];

/// Nearest-rank quantile: the value of rank `ceil(q * count)` in sorted order.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    let mut sorted = values.to_vec();
    sort_floats(&mut sorted)?;
    quantile_sorted(&sorted, q)
}

fn sort_floats(v: &mut [f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Empty("quantile input"));
    }
    if v.iter().any(|x| x.is_nan()) {
        return Err(Error::Domain("NaN in quantile input".into()));
    }
    v.sort_by(f64::total_cmp);
    Ok(())
}

fn quantile_sorted(sorted: &[f64], q: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Domain(format!("quantile level {q} outside (0, 1]")));
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    Ok(sorted[rank.clamp(1, sorted.len()) - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileTable {
    pub q01: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
    pub q99: f64,
}

impl QuantileTable {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let mut sorted = values.to_vec();
        sort_floats(&mut sorted)?;
        let q = |p| quantile_sorted(&sorted, p);
        Ok(Self {
            q01: q(0.01)?,
            q05: q(0.05)?,
            q50: q(0.5)?,
            q95: q(0.95)?,
            q99: q(0.99)?,
        })
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.q01, self.q05, self.q50, self.q95, self.q99]
    }

    pub fn is_monotone(&self) -> bool {
        self.as_array().windows(2).all(|w| w[0] <= w[1])
    }
}

/// Scaling variable `alpha^(1/3) ln(delta)`.
pub fn theta_delta(delta: f64, alpha: f64) -> f64 {
    alpha.cbrt() * delta.ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseHistogram {
    pub alpha: f64,
    pub samples: Vec<f64>,
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
    /// Gaps that were not strictly positive.
    pub rejected: usize,
    /// Samples outside the outermost edges; they do not enter `density`.
    pub out_of_range: usize,
}

impl CollapseHistogram {
    pub fn integral(&self) -> f64 {
        self.density
            .iter()
            .zip(self.edges.windows(2))
            .map(|(d, w)| d * (w[1] - w[0]))
            .sum()
    }
}

/// `bins` equal-width bins over `[lo, hi]`.
pub fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    (0..=bins).map(|k| lo + (hi - lo) * k as f64 / bins as f64).collect()
}

pub fn collapse_histogram(gaps: &[f64], alpha: f64, edges: &[f64]) -> Result<CollapseHistogram> {
    if edges.len() < 2 || edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("histogram edges must be strictly increasing".into()));
    }
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    let samples: Vec<f64> = gaps
        .iter()
        .filter(|&&d| d > 0.0)
        .map(|&d| theta_delta(d, alpha))
        .collect();
    let rejected = gaps.len() - samples.len();
    let (lo, hi) = (edges[0], edges[edges.len() - 1]);
    let mut counts = vec![0usize; edges.len() - 1];
    let mut inside = 0usize;
    for &x in &samples {
        if x < lo || x > hi {
            continue;
        }
        // Last bin is closed on the right.
        let k = edges.partition_point(|&e| e <= x).clamp(1, counts.len()) - 1;
        counts[k] += 1;
        inside += 1;
    }
    if inside == 0 {
        return Err(Error::Empty("no gap samples inside the histogram range"));
    }
    let density = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, w)| c as f64 / (inside as f64 * (w[1] - w[0])))
        .collect();
    Ok(CollapseHistogram {
        alpha,
        samples,
        edges: edges.to_vec(),
        density,
        rejected,
        out_of_range: gaps.len() - rejected - inside,
    })
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    sort_floats(&mut a)?;
    sort_floats(&mut b)?;
    Ok(ks_sorted(&a, &b))
}

fn ks_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

pub fn distribution_distance(h1: &CollapseHistogram, h2: &CollapseHistogram) -> Result<f64> {
    ks_distance(&h1.samples, &h2.samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
}

struct Line {
    slope: f64,
    intercept: f64,
    r_squared: f64,
}

fn least_squares(x: &[f64], y: &[f64]) -> Result<Line> {
    if x.len() != y.len() {
        return Err(Error::Shape {
            what: "fit data",
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::Empty("need at least two points to fit"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(Line {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Fits `y = prefactor * x^exponent` on logarithmic axes.
pub fn powerlaw_fit(x: &[f64], y: &[f64]) -> Result<PowerLawFit> {
    if x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return Err(Error::Domain("power-law fit needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let line = least_squares(&lx, &ly)?;
    Ok(PowerLawFit {
        exponent: line.slope,
        prefactor: line.intercept.exp(),
        r_squared: line.r_squared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogFit {
    pub a: f64,
    pub b: f64,
    pub residuals: Vec<f64>,
    pub r_squared: f64,
    /// Set when the model explains less than half of the variance or the data are flat.
    pub poor: bool,
}

/// Fits `q = a / ln(T)^2 + b`.
pub fn log_inverse_square_fit(times: &[f64], q_density: &[f64]) -> Result<LogFit> {
    if times.iter().any(|&t| !(t > 1.0)) {
        return Err(Error::Domain("ramp times must exceed 1".into()));
    }
    let x: Vec<f64> = times.iter().map(|t| t.ln().powi(-2)).collect();
    let line = least_squares(&x, q_density)?;
    let residuals: Vec<f64> = x
        .iter()
        .zip(q_density)
        .map(|(xi, yi)| yi - (line.slope * xi + line.intercept))
        .collect();
    let flat = q_density.windows(2).all(|w| w[0] == w[1]);
    Ok(LogFit {
        a: line.slope,
        b: line.intercept,
        residuals,
        r_squared: line.r_squared,
        poor: flat || line.r_squared < 0.5,
    })
}

/// Gap `2(eps1 + eps2)` of a chain held at a uniform field.
pub fn uniform_field_gap(couplings: &[f64], g: f64) -> Result<f64> {
    let n = couplings.len() + 1;
    let fields = vec![g; n];
    Ok(low_modes(couplings, &fields, uniform_field_parity(n, g))?.gap())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrefactorFit {
    pub c: f64,
    pub ks: f64,
}

/// Finds `c` such that `ln(gap) / sqrt(c N)` of uniform critical chains best
/// matches the reference `theta` samples in Kolmogorov-Smirnov distance.
///
/// `critical` holds `(N, gap)` pairs; gaps that are not positive are skipped.
pub fn fit_collapse_prefactor(critical: &[(usize, f64)], reference: &[f64]) -> Result<PrefactorFit> {
    let base: Vec<f64> = critical
        .iter()
        .filter(|(_, d)| *d > 0.0)
        .map(|&(n, d)| d.ln() / (n as f64).sqrt())
        .collect();
    let mut reference = reference.to_vec();
    sort_floats(&mut reference)?;
    let mut scaled = base.clone();
    sort_floats(&mut scaled)?;
    // Scaling by 1/sqrt(c) preserves order, so one sort suffices.
    let ks_at = |ln_c: f64| {
        let s = (-0.5 * ln_c).exp();
        let v: Vec<f64> = scaled.iter().map(|x| x * s).collect();
        ks_sorted(&v, &reference)
    };
    let (mut lo, mut hi) = ((0.01f64).ln(), (10.0f64).ln());
    let mut best = (f64::INFINITY, 0.0);
    for _ in 0..4 {
        let steps = 200;
        for k in 0..=steps {
            let x = lo + (hi - lo) * k as f64 / steps as f64;
            let d = ks_at(x);
            if d < best.0 {
                best = (d, x);
            }
        }
        let w = (hi - lo) / steps as f64 * 4.0;
        lo = best.1 - w;
        hi = best.1 + w;
    }
    Ok(PrefactorFit {
        c: best.1.exp(),
        ks: best.0,
    })
}

/// Bulk gap samples of one realization at one slope.
pub fn bulk_gap_samples(
    realization: &CouplingRealization,
    alpha: f64,
    positions_per_site: f64,
    window: BulkWindow,
) -> Result<Vec<f64>> {
    // The velocity does not enter static quantities.
    let profile = FrontProfile::standard(alpha, 1.0)?;
    let n = realization.n_sites;
    let (lo, hi) = window
        .bounds(n, &profile)
        .ok_or(Error::Empty("bulk window is empty"))?;
    let count = ((hi - lo) * positions_per_site).floor() as usize + 1;
    let positions: Vec<f64> = (0..count).map(|k| lo + k as f64 / positions_per_site).collect();
    let traj = crate::spectral::scan_positions(&realization.couplings, &profile, &positions, window)?;
    Ok(traj.bulk_gaps())
}

/// Per-realization record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealizationRecord {
    pub index: u64,
    pub seed: u64,
    pub residual_energy: f64,
    pub kink_density: f64,
    pub fidelity: Option<f64>,
    pub parity_drift: f64,
    pub orthogonality_drift: f64,
    pub delta_min: Option<f64>,
    pub omega_max: Option<f64>,
    pub v_t_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    /// `None` for the homogeneous schedule.
    pub alpha: Option<f64>,
    pub total_time: f64,
    pub velocity: Option<f64>,
    pub n_sites: usize,
    pub records: Vec<RealizationRecord>,
    /// Quantiles of the residual energy.
    pub quantiles: QuantileTable,
}

impl EnsembleResult {
    pub fn residual_energies(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.residual_energy).collect()
    }
}

/// One point of a landscape grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub alpha: Option<f64>,
    pub total_time: f64,
}

impl GridPoint {
    pub fn drive(&self, n_sites: usize, g_i: f64, g_f: f64) -> Result<Drive> {
        match self.alpha {
            Some(a) => {
                let v = velocity_for(n_sites, a, g_i, g_f, self.total_time)?;
                Ok(Drive::Front(FrontProfile::new(g_i, g_f, a, v)?))
            }
            None => {
                Schedule::homogeneous(g_i, g_f, self.total_time)?;
                Ok(Drive::Homogeneous {
                    g_i,
                    g_f,
                    total_time: self.total_time,
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeSpec {
    pub n_sites: usize,
    pub points: Vec<GridPoint>,
    pub n_realizations: usize,
    pub base_seed: u64,
    pub kind: CouplingKind,
    pub g_i: f64,
    pub g_f: f64,
    pub quench: QuenchOptions,
    /// Also scan the spectrum of each front realization.
    pub spectral: bool,
}

/// Realization `i` of an ensemble.
pub fn ensemble_realization(n_sites: usize, base_seed: u64, index: u64, kind: CouplingKind) -> Result<CouplingRealization> {
    sample_couplings(n_sites, realization_seed(base_seed, index), kind)
}

fn run_one(spec: &LandscapeSpec, point: &GridPoint, index: u64) -> Result<RealizationRecord> {
    let real = ensemble_realization(spec.n_sites, spec.base_seed, index, spec.kind)?;
    let drive = point.drive(spec.n_sites, spec.g_i, spec.g_f)?;
    let q: QuenchResult = run_quench(&real, &drive, &spec.quench)?;
    let mut rec = RealizationRecord {
        index,
        seed: real.seed,
        residual_energy: q.residual_energy,
        kink_density: q.kink_density,
        fidelity: q.fidelity,
        parity_drift: q.parity_drift,
        orthogonality_drift: q.orthogonality_drift,
        delta_min: None,
        omega_max: None,
        v_t_min: None,
    };
    if let (true, Drive::Front(profile)) = (spec.spectral, &drive) {
        let grid = crate::spectral::default_grid_size(spec.n_sites, profile);
        let traj = scan_trajectory(&real.couplings, profile, grid, BulkWindow::default())?;
        if traj.bulk_window.is_some() {
            rec.delta_min = Some(traj.delta_min);
            rec.omega_max = Some(traj.omega_max);
            rec.v_t_min = Some(traj.v_t_min);
        }
    }
    Ok(rec)
}

/// Runs every (grid point, realization) pair in parallel and folds the
/// results by index, so the output does not depend on scheduling.
pub fn landscape(spec: &LandscapeSpec) -> Result<Vec<EnsembleResult>> {
    if spec.n_realizations == 0 {
        return Err(Error::Empty("landscape needs at least one realization"));
    }
    if spec.points.is_empty() {
        return Err(Error::Empty("landscape grid is empty"));
    }
    let r = spec.n_realizations;
    let records: Vec<RealizationRecord> = (0..spec.points.len() * r)
        .into_par_iter()
        .map(|k| run_one(spec, &spec.points[k / r], (k % r) as u64))
        .collect::<Result<_>>()?;
    spec.points
        .iter()
        .zip(records.chunks(r))
        .map(|(p, recs)| {
            let drive = p.drive(spec.n_sites, spec.g_i, spec.g_f)?;
            let q: Vec<f64> = recs.iter().map(|x| x.residual_energy).collect();
            Ok(EnsembleResult {
                alpha: p.alpha,
                total_time: p.total_time,
                velocity: drive.velocity(),
                n_sites: spec.n_sites,
                records: recs.to_vec(),
                quantiles: QuantileTable::from_values(&q)?,
            })
        })
        .collect()
}

/// One row of the landscape table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapeRow {
    pub alpha: f64,
    #[serde(rename = "T")]
    pub total_time: f64,
    pub v: Option<f64>,
    #[serde(rename = "N")]
    pub n_sites: usize,
    pub q01: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
    pub q99: f64,
    pub n_realizations: usize,
}

impl From<&EnsembleResult> for LandscapeRow {
    /// The homogeneous schedule is written as `alpha = 0` with no velocity.
    fn from(e: &EnsembleResult) -> Self {
        Self {
            alpha: e.alpha.unwrap_or(0.0),
            total_time: e.total_time,
            v: e.velocity,
            n_sites: e.n_sites,
            q01: e.quantiles.q01,
            q05: e.quantiles.q05,
            q50: e.quantiles.q50,
            q95: e.quantiles.q95,
            q99: e.quantiles.q99,
            n_realizations: e.records.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KzmPoint {
    pub tau_q: f64,
    pub total_time: f64,
    pub kink_density: f64,
    pub residual_energy: f64,
}

/// Homogeneous ramps `g_i -> g_f` with `T = tau_q * (g_i - g_f)`, i.e. the
/// field changes by one unit per `tau_q`.
pub fn kzm_sweep(
    realization: &CouplingRealization,
    taus: &[f64],
    g_i: f64,
    g_f: f64,
    opts: &QuenchOptions,
) -> Result<Vec<KzmPoint>> {
    taus.par_iter()
        .map(|&tau| {
            let total_time = tau * (g_i - g_f).abs();
            let drive = Drive::Homogeneous { g_i, g_f, total_time };
            let r = run_quench(realization, &drive, opts)?;
            Ok(KzmPoint {
                tau_q: tau,
                total_time,
                kink_density: r.kink_density,
                residual_energy: r.residual_energy,
            })
        })
        .collect()
}

/// Critical-field gaps `(N, gap)` for `count` realizations at each size.
pub fn critical_gap_samples(
    sizes: &[usize],
    count: usize,
    base_seed: u64,
    g_c: f64,
) -> Result<Vec<(usize, f64)>> {
    let jobs: Vec<(usize, u64)> = sizes
        .iter()
        .flat_map(|&n| (0..count as u64).map(move |i| (n, i)))
        .collect();
    jobs.par_iter()
        .map(|&(n, i)| {
            let real = ensemble_realization(n, base_seed, i, CouplingKind::Disordered)?;
            Ok((n, uniform_field_gap(&real.couplings, g_c)?))
        })
        .collect()
}

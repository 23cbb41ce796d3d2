//! Instantaneous gap, mixing element and local threshold velocity along a
//! front trajectory.
//!
//! Only the two lowest quasiparticle modes matter here, so the hot path
//! avoids the full canonical form: the two smallest singular values of the
//! odd-even block come from Sturm bisection on its Golub-Kahan tridiagonal
//! and the singular vectors from inverse iteration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{LogScaled, ZeroDiagTridiagonal};
use crate::majorana::{CanonicalDiag, QuadraticHamiltonian};
use crate::profile::{field_gradients_at, fields_at, FrontProfile};

/// Below this the mixing element counts as zero and the threshold velocity
/// is unbounded.
pub const OMEGA_FLOOR: f64 = 1e-14;
pub const DEFAULT_EDGE_MARGIN: f64 = 4.0;
pub const DEFAULT_POSITIONS_PER_SITE: f64 = 4.0;

/// The two lowest modes of a parity-matched canonical form. `eps1` carries
/// the sign it enters the vacuum with (negative when the mode was flipped to
/// reach the target parity).
#[derive(Debug, Clone, PartialEq)]
pub struct LowModes {
    pub eps1: f64,
    pub eps2: f64,
    pub u1: Vec<f64>,
    pub v1: Vec<f64>,
    pub u2: Vec<f64>,
    pub v2: Vec<f64>,
}

impl LowModes {
    /// Reads the modes off a full (parity-fixed) canonical form.
    pub fn from_diag(diag: &CanonicalDiag) -> Result<Self> {
        if diag.n_sites() < 2 {
            return Err(Error::InvalidSize {
                n_sites: diag.n_sites(),
                reason: "two modes are needed",
            });
        }
        let e = diag.signed_eps();
        let (u1, v1) = diag.mode(0);
        let (u2, v2) = diag.mode(1);
        Ok(Self {
            eps1: e[0],
            eps2: e[1],
            u1,
            v1,
            u2,
            v2,
        })
    }

    /// `Δ = 2(ε_1 + ε_2)`.
    pub fn gap(&self) -> f64 {
        2.0 * (self.eps1 + self.eps2)
    }

    /// `⟨0| σᶻ_n |1⟩` with `|1⟩ = d_1† d_2† |0⟩`, for every site.
    pub fn sigma_z_elements(&self) -> Vec<f64> {
        (0..self.u1.len())
            .map(|n| self.u2[n] * self.v1[n] - self.u1[n] * self.v2[n])
            .collect()
    }

    /// `|Σ_n c_n ⟨0|σᶻ_n|1⟩|`.
    pub fn mixing(&self, coefficients: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (n, c) in coefficients.iter().enumerate() {
            if *c != 0.0 {
                acc += c * (self.u2[n] * self.v1[n] - self.u1[n] * self.v2[n]);
            }
        }
        acc.abs()
    }
}

/// Parity of the ground state when every site carries the field `g`.
pub fn uniform_field_parity(n_sites: usize, g: f64) -> i32 {
    if g < 0.0 && n_sites % 2 == 1 {
        -1
    } else {
        1
    }
}

fn start_vector(len: usize) -> Vec<f64> {
    // Fixed, structureless start so that no singular vector is missed.
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    (0..len)
        .map(|_| {
            state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            z ^= z >> 31;
            0.5 + (z >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect()
}

fn split_unit(x: &[f64]) -> (Vec<f64>, Vec<f64>, f64, f64) {
    let mut u: Vec<f64> = x.iter().step_by(2).copied().collect();
    let mut v: Vec<f64> = x.iter().skip(1).step_by(2).copied().collect();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu > 0.0 {
        u.iter_mut().for_each(|a| *a /= nu);
    }
    if nv > 0.0 {
        v.iter_mut().for_each(|a| *a /= nv);
    }
    (u, v, nu, nv)
}

fn orthogonalize(x: &mut [f64], against: &[f64]) {
    let p: f64 = x.iter().zip(against).map(|(a, b)| a * b).sum();
    x.iter_mut().zip(against).for_each(|(a, b)| *a -= p * b);
    let n = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    x.iter_mut().for_each(|a| *a /= n);
}

/// `uᵀ M v` for the lower-bidiagonal `M` (diagonal `d`, sub-diagonal `l`).
fn bilinear(d: &[f64], l: &[f64], u: &[f64], v: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..d.len() {
        s += u[i] * d[i] * v[i];
        if i + 1 < d.len() {
            s += u[i + 1] * l[i] * v[i];
        }
    }
    s
}

/// Sign of `vᵀ adj(M) u` for lower-bidiagonal `M`. The cofactors are
/// `C_ij = (-1)^{i+j} Π_{k<i} d_k Π_{i≤k<j} l_k Π_{k>j} d_k` for `i ≤ j`;
/// the double sum is folded into one forward recurrence and kept in
/// log-scaled form because the products over hundreds of sites leave the
/// floating-point range.
pub fn adjugate_form_sign(d: &[f64], l: &[f64], u: &[f64], v: &[f64]) -> f64 {
    let n = d.len();
    let mut prefix = Vec::with_capacity(n);
    let mut acc = LogScaled::from_f64(1.0);
    for &dk in d {
        prefix.push(acc);
        acc = acc.mul(dk);
    }
    let mut suffix = vec![LogScaled::ZERO; n];
    let mut acc = LogScaled::from_f64(1.0);
    for j in (0..n).rev() {
        suffix[j] = acc;
        acc = acc.mul(d[j]);
    }
    let alt = |i: usize| if i % 2 == 0 { 1.0 } else { -1.0 };
    let mut f = LogScaled::from_f64(u[0]);
    let mut total = LogScaled::ZERO;
    for j in 0..n {
        if j > 0 {
            f = f.mul(l[j - 1]).add(prefix[j].mul(u[j] * alt(j)));
        }
        total = total.add(f.mul_scaled(suffix[j]).mul(v[j] * alt(j)));
    }
    total.signum()
}

/// Two lowest modes of the chain with couplings `couplings` and fields
/// `fields`, oriented so that the vacuum has parity `target`.
pub fn low_modes(couplings: &[f64], fields: &[f64], target: i32) -> Result<LowModes> {
    let n = fields.len();
    if n < 2 {
        return Err(Error::InvalidSize {
            n_sites: n,
            reason: "two modes are needed",
        });
    }
    if couplings.len() + 1 != n {
        return Err(Error::Shape {
            what: "couplings",
            expected: n - 1,
            got: couplings.len(),
        });
    }
    let d: Vec<f64> = fields.iter().map(|g| -0.5 * g).collect();
    let l: Vec<f64> = couplings.iter().map(|j| 0.5 * j).collect();
    let mut e = Vec::with_capacity(2 * n - 1);
    for i in 0..n {
        e.push(d[i]);
        if i + 1 < n {
            e.push(l[i]);
        }
    }
    let t = ZeroDiagTridiagonal::new(e);
    let floor = 1e-100 * t.norm_bound();
    let s1 = t.eigenvalue(n, floor);
    let s2 = t.eigenvalue(n + 1, floor);
    let start = start_vector(2 * n);

    // For a (near-)zero mode the eigenvalues ±s1 of the tridiagonal merge;
    // shifting slightly away from zero keeps both the odd and the even part
    // of the start vector alive in the iteration.
    let x1 = t.inverse_iteration(s1.max(1e-3 * s2), &start, 5);
    let (u1, mut v1, nu, nv) = split_unit(&x1);
    if !(nu > 1e-6 * nv && nv > 1e-6 * nu) {
        return Err(Error::Diagonalization { residual: nu.min(nv) / nu.max(nv) });
    }
    let x2 = t.inverse_iteration(s2, &start, 4);
    let (mut u2, mut v2, _, _) = split_unit(&x2);
    orthogonalize(&mut u2, &u1);
    orthogonalize(&mut v2, &v1);
    if bilinear(&d, &l, &u2, &v2) < 0.0 {
        v2.iter_mut().for_each(|a| *a = -*a);
    }
    let sign = adjugate_form_sign(&d, &l, &u1, &v1);
    let parity = if n % 2 == 0 { sign } else { -sign };
    if parity != f64::from(target) {
        v1.iter_mut().for_each(|a| *a = -*a);
    }
    // Magnitudes from bisection (accurate to a few ulps), sign from the
    // oriented vectors.
    let signed = bilinear(&d, &l, &u1, &v1);
    let eps1 = if signed < 0.0 { -2.0 * s1 } else { 2.0 * s1 };
    Ok(LowModes {
        eps1,
        eps2: 2.0 * s2,
        u1,
        v1,
        u2,
        v2,
    })
}

/// Low modes from the full canonical form; slower, used as a cross-check.
pub fn low_modes_dense(couplings: &[f64], fields: &[f64], target: i32) -> Result<LowModes> {
    let h: QuadraticHamiltonian = crate::majorana::assemble(couplings, fields)?;
    let diag = crate::majorana::canonical_diagonalize(&h)?.fix_parity(target);
    LowModes::from_diag(&diag)
}

/// Parity of the initial ground state of a front sweep.
pub fn initial_parity(n_sites: usize, profile: &FrontProfile) -> i32 {
    uniform_field_parity(n_sites, profile.g_i)
}

/// Same-parity gap `Δ(n_f)`.
pub fn gap_at(couplings: &[f64], profile: &FrontProfile, front_position: f64) -> Result<f64> {
    let n = couplings.len() + 1;
    let g = fields_at(profile, n, front_position);
    Ok(low_modes(couplings, &g, initial_parity(n, profile))?.gap())
}

/// Mixing element `Ω(n_f) = |⟨0| Σ g'_n σᶻ_n |1⟩|`.
pub fn mixing_at(couplings: &[f64], profile: &FrontProfile, front_position: f64) -> Result<f64> {
    let n = couplings.len() + 1;
    let grad = field_gradients_at(profile, n, front_position);
    if grad.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let g = fields_at(profile, n, front_position);
    Ok(low_modes(couplings, &g, initial_parity(n, profile))?.mixing(&grad))
}

/// `v_t = Δ² / (4Ω)`; unbounded (`+inf`) when `Ω` vanishes.
pub fn local_threshold(delta: f64, omega: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("gap must be positive, got {delta}")));
    }
    if omega < OMEGA_FLOOR {
        return Ok(f64::INFINITY);
    }
    Ok(delta * delta / (4.0 * omega))
}

/// Which front positions count as "bulk" when forming minima and samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BulkWindow {
    /// The whole ramp stays at least `margin` sites away from both ends:
    /// `n_f ∈ [half_width + margin, N - half_width - margin]`.
    Edges { margin: f64 },
    /// Only the part of the ramp with fields in `g_c ± band` has to stay
    /// `margin` sites inside the chain. Useful for shallow fronts whose full
    /// ramp is longer than the chain.
    Critical { margin: f64, band: f64, g_c: f64 },
}

impl Default for BulkWindow {
    fn default() -> Self {
        BulkWindow::Edges {
            margin: DEFAULT_EDGE_MARGIN,
        }
    }
}

impl BulkWindow {
    /// Closed interval of admissible front positions, `None` if empty.
    pub fn bounds(&self, n_sites: usize, profile: &FrontProfile) -> Option<(f64, f64)> {
        let n = n_sites as f64;
        let (lo, hi) = match *self {
            BulkWindow::Edges { margin } => {
                let hw = profile.half_width();
                (hw + margin, n - hw - margin)
            }
            BulkWindow::Critical { margin, band, g_c } => {
                let mid = profile.midpoint_field();
                let g_lo = (g_c - band).max(profile.g_f);
                let g_hi = (g_c + band).min(profile.g_i);
                // Site carrying field g: n = n_f + (g - mid) / alpha.
                let lo = 1.0 + margin - (g_lo - mid) / profile.alpha;
                let hi = n - margin - (g_hi - mid) / profile.alpha;
                (lo, hi)
            }
        };
        (lo <= hi).then_some((lo, hi))
    }
}

/// Number of front positions for the default density over the full sweep.
pub fn default_grid_size(n_sites: usize, profile: &FrontProfile) -> usize {
    let span = n_sites as f64 + 2.0 * profile.half_width();
    (DEFAULT_POSITIONS_PER_SITE * span).ceil() as usize + 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralTrajectory {
    pub front_positions: Vec<f64>,
    #[serde(rename = "Delta")]
    pub delta: Vec<f64>,
    #[serde(rename = "Omega")]
    pub omega: Vec<f64>,
    pub v_t_local: Vec<f64>,
    #[serde(rename = "Delta_min")]
    pub delta_min: f64,
    #[serde(rename = "Omega_max")]
    pub omega_max: f64,
    pub v_t_min: f64,
    pub bulk_window: Option<(f64, f64)>,
}

impl SpectralTrajectory {
    pub fn in_bulk(&self, k: usize) -> bool {
        match self.bulk_window {
            Some((lo, hi)) => self.front_positions[k] >= lo && self.front_positions[k] <= hi,
            None => false,
        }
    }

    /// Smallest finite local threshold over the whole sweep, edges included.
    pub fn sweep_v_t_min(&self) -> f64 {
        self.v_t_local
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(f64::INFINITY, f64::min)
    }

    /// Gaps sampled inside the bulk window.
    pub fn bulk_gaps(&self) -> Vec<f64> {
        (0..self.delta.len())
            .filter(|&k| self.in_bulk(k))
            .map(|k| self.delta[k])
            .collect()
    }
}

/// Front positions spaced evenly over `[-half_width, N + half_width]`.
pub fn sweep_grid(n_sites: usize, profile: &FrontProfile, n_grid: usize) -> Vec<f64> {
    let hw = profile.half_width();
    let (a, b) = (-hw, n_sites as f64 + hw);
    (0..n_grid)
        .map(|k| a + (b - a) * k as f64 / (n_grid - 1) as f64)
        .collect()
}

pub fn scan_trajectory(
    couplings: &[f64],
    profile: &FrontProfile,
    n_grid: usize,
    window: BulkWindow,
) -> Result<SpectralTrajectory> {
    if n_grid < 10 {
        return Err(Error::Domain(format!("need at least 10 front positions, got {n_grid}")));
    }
    scan_positions(couplings, profile, &sweep_grid(couplings.len() + 1, profile, n_grid), window)
}

/// Like [`scan_trajectory`] on an explicit list of front positions.
pub fn scan_positions(
    couplings: &[f64],
    profile: &FrontProfile,
    positions: &[f64],
    window: BulkWindow,
) -> Result<SpectralTrajectory> {
    let n = couplings.len() + 1;
    profile.validate()?;
    let target = initial_parity(n, profile);
    let bulk = window.bounds(n, profile);
    let mut delta = Vec::with_capacity(positions.len());
    let mut omega = Vec::with_capacity(positions.len());
    let mut v_t = Vec::with_capacity(positions.len());
    for &nf in positions {
        let g = fields_at(profile, n, nf);
        let grad = field_gradients_at(profile, n, nf);
        let modes = low_modes(couplings, &g, target)?;
        let d = modes.gap();
        let o = if grad.iter().all(|&x| x == 0.0) { 0.0 } else { modes.mixing(&grad) };
        delta.push(d);
        omega.push(o);
        v_t.push(local_threshold(d, o)?);
    }
    let mut traj = SpectralTrajectory {
        front_positions: positions.to_vec(),
        delta,
        omega,
        v_t_local: v_t,
        delta_min: f64::NAN,
        omega_max: f64::NAN,
        v_t_min: f64::NAN,
        bulk_window: bulk,
    };
    let idx: Vec<usize> = (0..positions.len()).filter(|&k| traj.in_bulk(k)).collect();
    if !idx.is_empty() {
        traj.delta_min = idx.iter().map(|&k| traj.delta[k]).fold(f64::INFINITY, f64::min);
        traj.omega_max = idx.iter().map(|&k| traj.omega[k]).fold(0.0, f64::max);
        traj.v_t_min = idx
            .iter()
            .map(|&k| traj.v_t_local[k])
            .filter(|v| v.is_finite())
            .fold(f64::INFINITY, f64::min);
    }
    Ok(traj)
}

//! The moving transverse-field front and the protocol timing built on it.
//!
//! Sites are labelled `1..=N`. The front centre sits at the real position
//! `n_f = v t`; around it the field interpolates linearly (slope `alpha`)
//! between the paramagnetic plateau `g_i` ahead of the front and the
//! ferromagnetic plateau `g_f` behind it. A full sweep moves the centre from
//! `-half_width` to `N + half_width`, so the chain starts on the `g_i` plateau
//! and ends on the `g_f` plateau.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_G_INITIAL: f64 = 3.0;
pub const DEFAULT_G_FINAL: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontProfile {
    pub g_i: f64,
    pub g_f: f64,
    pub alpha: f64,
    pub velocity: f64,
    /// Width (in sites) over which each kink of the ramp is rounded off.
    /// Zero keeps the piecewise-linear front.
    #[serde(default)]
    pub smoothing: f64,
}

impl FrontProfile {
    pub fn new(g_i: f64, g_f: f64, alpha: f64, velocity: f64) -> Result<Self> {
        let p = Self {
            g_i,
            g_f,
            alpha,
            velocity,
            smoothing: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    /// Default fields `g_i = 3`, `g_f = 0`.
    pub fn standard(alpha: f64, velocity: f64) -> Result<Self> {
        Self::new(DEFAULT_G_INITIAL, DEFAULT_G_FINAL, alpha, velocity)
    }

    pub fn with_smoothing(mut self, width: f64) -> Result<Self> {
        self.smoothing = width;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g_i.is_finite() && self.g_f.is_finite()) || self.g_i <= self.g_f {
            return Err(Error::Domain(format!(
                "front must sweep downwards, got g_i = {} and g_f = {}",
                self.g_i, self.g_f
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Domain(format!("slope alpha must be positive, got {}", self.alpha)));
        }
        if !(self.velocity > 0.0 && self.velocity.is_finite()) {
            return Err(Error::Domain(format!("velocity must be positive, got {}", self.velocity)));
        }
        if !(self.smoothing >= 0.0 && self.smoothing <= self.half_width()) {
            return Err(Error::Domain(format!(
                "smoothing width {} must lie in [0, half_width = {}]",
                self.smoothing,
                self.half_width()
            )));
        }
        Ok(())
    }

    /// Half the ramp length, `(g_i - g_f) / (2 alpha)`.
    pub fn half_width(&self) -> f64 {
        (self.g_i - self.g_f) / (2.0 * self.alpha)
    }

    pub fn midpoint_field(&self) -> f64 {
        0.5 * (self.g_i + self.g_f)
    }

    /// Field at offset `x = n - n_f` from the front centre.
    pub fn field_at_offset(&self, x: f64) -> f64 {
        let y = self.midpoint_field() + self.alpha * x;
        if self.smoothing == 0.0 {
            return y.clamp(self.g_f, self.g_i);
        }
        let delta = 0.5 * self.alpha * self.smoothing;
        if y >= self.g_i + delta {
            self.g_i
        } else if y > self.g_i - delta {
            y - (y - self.g_i + delta).powi(2) / (4.0 * delta)
        } else if y > self.g_f + delta {
            y
        } else if y > self.g_f - delta {
            y + (self.g_f + delta - y).powi(2) / (4.0 * delta)
        } else {
            self.g_f
        }
    }

    /// Derivative of [`field_at_offset`](Self::field_at_offset) with respect to
    /// the front position (i.e. minus the derivative in `x`).
    pub fn gradient_at_offset(&self, x: f64) -> f64 {
        if self.smoothing == 0.0 {
            return if x.abs() <= self.half_width() { -self.alpha } else { 0.0 };
        }
        let y = self.midpoint_field() + self.alpha * x;
        let delta = 0.5 * self.alpha * self.smoothing;
        let dy = if y >= self.g_i + delta || y <= self.g_f - delta {
            0.0
        } else if y > self.g_i - delta {
            1.0 - (y - self.g_i + delta) / (2.0 * delta)
        } else if y > self.g_f + delta {
            1.0
        } else {
            1.0 - (self.g_f + delta - y) / (2.0 * delta)
        };
        -self.alpha * dy
    }

    /// Offsets `x = n - n_f` at which the field stops being smooth.
    fn kink_offsets(&self) -> Vec<f64> {
        let hw = self.half_width();
        if self.smoothing == 0.0 {
            vec![-hw, hw]
        } else {
            let s = 0.5 * self.smoothing;
            vec![-hw - s, -hw + s, hw - s, hw + s]
        }
    }
}

/// Field on `site` (1-based) when the front centre is at `front_position`.
pub fn field_at(profile: &FrontProfile, site: usize, front_position: f64) -> f64 {
    profile.field_at_offset(site as f64 - front_position)
}

/// `d g_site / d n_f`: `-alpha` on the ramp, zero on the plateaus.
pub fn field_gradient_at(profile: &FrontProfile, site: usize, front_position: f64) -> f64 {
    profile.gradient_at_offset(site as f64 - front_position)
}

/// Fields of all `n_sites` sites for a given front position.
pub fn fields_at(profile: &FrontProfile, n_sites: usize, front_position: f64) -> Vec<f64> {
    (1..=n_sites).map(|n| field_at(profile, n, front_position)).collect()
}

pub fn field_gradients_at(profile: &FrontProfile, n_sites: usize, front_position: f64) -> Vec<f64> {
    (1..=n_sites)
        .map(|n| field_gradient_at(profile, n, front_position))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleMode {
    Inhomogeneous,
    Homogeneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub t_start: f64,
    pub t_end: f64,
    pub total_time: f64,
    pub mode: ScheduleMode,
    pub g_i: f64,
    pub g_f: f64,
}

impl Schedule {
    /// Site-independent linear ramp from `g_i` to `g_f` over `[0, total_time]`.
    pub fn homogeneous(g_i: f64, g_f: f64, total_time: f64) -> Result<Self> {
        if !(total_time > 0.0 && total_time.is_finite()) {
            return Err(Error::InvalidTime(total_time));
        }
        Ok(Self {
            t_start: 0.0,
            t_end: total_time,
            total_time,
            mode: ScheduleMode::Homogeneous,
            g_i,
            g_f,
        })
    }
}

/// Timing of a full sweep: the front centre travels from `-half_width` to
/// `N + half_width`, so `T = N / v + (g_i - g_f) / (alpha v)`.
pub fn schedule_for(n_sites: usize, profile: &FrontProfile) -> Result<Schedule> {
    if n_sites < 2 {
        return Err(Error::InvalidSize {
            n_sites,
            reason: "a chain needs at least two sites",
        });
    }
    profile.validate()?;
    let hw = profile.half_width();
    let v = profile.velocity;
    let t_start = -hw / v;
    let t_end = (n_sites as f64 + hw) / v;
    Ok(Schedule {
        t_start,
        t_end,
        total_time: n_sites as f64 / v + (profile.g_i - profile.g_f) / (profile.alpha * v),
        mode: ScheduleMode::Inhomogeneous,
        g_i: profile.g_i,
        g_f: profile.g_f,
    })
}

/// Front velocity that completes the sweep in `total_time`.
pub fn velocity_for(n_sites: usize, alpha: f64, g_i: f64, g_f: f64, total_time: f64) -> Result<f64> {
    if !(total_time > 0.0 && total_time.is_finite()) {
        return Err(Error::InvalidTime(total_time));
    }
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("slope alpha must be positive, got {alpha}")));
    }
    Ok((n_sites as f64 + (g_i - g_f) / alpha) / total_time)
}

/// Homogeneous reference field at time `t`, clamped to the schedule ends.
pub fn homogeneous_field_at(t: f64, schedule: &Schedule) -> f64 {
    let s = ((t - schedule.t_start) / schedule.total_time).clamp(0.0, 1.0);
    schedule.g_i + (schedule.g_f - schedule.g_i) * s
}

/// A complete driving protocol: either the moving front or the homogeneous ramp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Drive {
    Front(FrontProfile),
    Homogeneous { g_i: f64, g_f: f64, total_time: f64 },
}

impl Drive {
    /// Front protocol with `g_i = 3`, `g_f = 0` finishing in `total_time`.
    pub fn front_with_time(n_sites: usize, alpha: f64, total_time: f64) -> Result<Self> {
        let v = velocity_for(n_sites, alpha, DEFAULT_G_INITIAL, DEFAULT_G_FINAL, total_time)?;
        Ok(Drive::Front(FrontProfile::standard(alpha, v)?))
    }

    pub fn homogeneous(total_time: f64) -> Result<Self> {
        Schedule::homogeneous(DEFAULT_G_INITIAL, DEFAULT_G_FINAL, total_time)?;
        Ok(Drive::Homogeneous {
            g_i: DEFAULT_G_INITIAL,
            g_f: DEFAULT_G_FINAL,
            total_time,
        })
    }

    pub fn schedule(&self, n_sites: usize) -> Result<Schedule> {
        match *self {
            Drive::Front(p) => schedule_for(n_sites, &p),
            Drive::Homogeneous { g_i, g_f, total_time } => Schedule::homogeneous(g_i, g_f, total_time),
        }
    }

    pub fn g_initial(&self) -> f64 {
        match *self {
            Drive::Front(p) => p.g_i,
            Drive::Homogeneous { g_i, .. } => g_i,
        }
    }

    pub fn g_final(&self) -> f64 {
        match *self {
            Drive::Front(p) => p.g_f,
            Drive::Homogeneous { g_f, .. } => g_f,
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match *self {
            Drive::Front(p) => Some(p.alpha),
            Drive::Homogeneous { .. } => None,
        }
    }

    pub fn velocity(&self) -> Option<f64> {
        match *self {
            Drive::Front(p) => Some(p.velocity),
            Drive::Homogeneous { .. } => None,
        }
    }

    /// Writes the fields at time `t` into `out` (one entry per site).
    pub fn fields_into(&self, t: f64, schedule: &Schedule, out: &mut [f64]) {
        match *self {
            Drive::Front(p) => {
                let nf = p.velocity * t;
                for (i, g) in out.iter_mut().enumerate() {
                    *g = p.field_at_offset((i + 1) as f64 - nf);
                }
            }
            Drive::Homogeneous { .. } => out.fill(homogeneous_field_at(t, schedule)),
        }
    }

    /// Interior times at which some site field has a kink, sorted, inside
    /// `(t_start, t_end)`.
    pub fn breakpoints(&self, n_sites: usize, schedule: &Schedule) -> Vec<f64> {
        let mut times = match *self {
            Drive::Front(p) => {
                let offsets = p.kink_offsets();
                let mut t = Vec::with_capacity(offsets.len() * n_sites);
                for n in 1..=n_sites {
                    for &x in &offsets {
                        t.push((n as f64 - x) / p.velocity);
                    }
                }
                t
            }
            Drive::Homogeneous { .. } => Vec::new(),
        };
        times.retain(|&t| t > schedule.t_start && t < schedule.t_end);
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
        times
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn half() -> FrontProfile {
        FrontProfile::standard(0.5, 1.0).unwrap()
    }

    #[test]
    fn plateau_and_ramp_values() {
        let p = half();
        assert_eq!(field_at(&p, 20, 10.0), 3.0);
        assert_eq!(field_at(&p, 11, 10.0), 2.0);
        assert_eq!(field_at(&p, 1, 30.0), 0.0);
        for alpha in [1.0 / 64.0, 0.3, 2.0] {
            let p = FrontProfile::standard(alpha, 1.0).unwrap();
            assert_eq!(field_at(&p, 7, 7.0), 1.5);
        }
    }

    #[test]
    fn gradient_values() {
        let p = FrontProfile::standard(1.0 / 32.0, 1.0).unwrap();
        let hw = p.half_width();
        assert_eq!(p.gradient_at_offset(2.0 * hw), 0.0);
        assert_eq!(field_gradient_at(&p, 100, 100.0), -1.0 / 32.0);
        let total: f64 = field_gradients_at(&p, 512, 256.0).iter().sum();
        let ramp_sites = (1..=512).filter(|&n| (n as f64 - 256.0).abs() <= hw).count();
        assert_eq!(total, -p.alpha * ramp_sites as f64);
        assert!((total + 3.0).abs() <= p.alpha + 1e-12);
    }

    #[test]
    fn schedule_arithmetic() {
        let p = FrontProfile::standard(1.0 / 32.0, 1.0).unwrap();
        let s = schedule_for(512, &p).unwrap();
        assert_eq!(s.total_time, 608.0);
        assert!((s.t_end - s.t_start - 608.0).abs() < 1e-12);
        let v = velocity_for(128, 1.0 / 32.0, 3.0, 0.0, 1e4).unwrap();
        assert!((v - 0.0224).abs() < 1e-15);
        assert!(matches!(velocity_for(128, 0.1, 3.0, 0.0, 0.0), Err(Error::InvalidTime(_))));
    }

    #[test]
    fn homogeneous_limit_of_total_time() {
        // alpha -> 0 with alpha v fixed: T -> (g_i - g_f) / (alpha v).
        let tau_q = 10.0;
        let mut last = f64::INFINITY;
        for k in 1..8 {
            let alpha = 10f64.powi(-k);
            let p = FrontProfile::standard(alpha, 1.0 / (alpha * tau_q)).unwrap();
            let t = schedule_for(2, &p).unwrap().total_time;
            let err = (t - 3.0 * tau_q).abs();
            assert!(err < last);
            last = err;
        }
        assert!(last < 1e-5);
    }

    #[test]
    fn schedule_endpoints_cover_chain() {
        let p = FrontProfile::standard(0.25, 0.7).unwrap();
        let s = schedule_for(16, &p).unwrap();
        for n in 1..=16 {
            assert_eq!(field_at(&p, n, p.velocity * s.t_start), 3.0);
            assert_eq!(field_at(&p, n, p.velocity * s.t_end), 0.0);
        }
    }

    #[test]
    fn homogeneous_ramp() {
        let s = Schedule::homogeneous(3.0, 0.0, 60.0).unwrap();
        assert_eq!(homogeneous_field_at(0.0, &s), 3.0);
        assert_eq!(homogeneous_field_at(30.0, &s), 1.5);
        assert_eq!(homogeneous_field_at(60.0, &s), 0.0);
        assert_eq!(homogeneous_field_at(-5.0, &s), 3.0);
        assert_eq!(homogeneous_field_at(99.0, &s), 0.0);
    }

    #[test]
    fn breakpoints_are_kinks() {
        let p = FrontProfile::standard(0.5, 0.5).unwrap();
        let d = Drive::Front(p);
        let s = d.schedule(4).unwrap();
        let b = d.breakpoints(4, &s);
        assert!(b.windows(2).all(|w| w[0] < w[1]));
        for &t in &b {
            let nf = p.velocity * t;
            let on_kink = (1..=4).any(|n| ((n as f64 - nf).abs() - p.half_width()).abs() < 1e-9);
            assert!(on_kink);
        }
    }

    proptest! {
        #[test]
        fn field_is_monotone_and_continuous(alpha in 0.004f64..3.0, x in -400.0f64..400.0, dx in 0.0f64..5.0, smooth in 0.0f64..1.0) {
            let p = FrontProfile::standard(alpha, 1.0).unwrap();
            let p = p.with_smoothing(smooth * p.half_width()).unwrap();
            prop_assert!(p.field_at_offset(x + dx) >= p.field_at_offset(x));
            let h = 1e-9;
            prop_assert!((p.field_at_offset(x + h) - p.field_at_offset(x)).abs() <= alpha * h * 1.000001 + 1e-15);
        }

        #[test]
        fn gradient_matches_finite_difference(alpha in 0.004f64..3.0, x in -400.0f64..400.0, smooth in 0.0f64..1.0) {
            let p = FrontProfile::standard(alpha, 1.0).unwrap();
            let p = p.with_smoothing(smooth * p.half_width()).unwrap();
            let h = 1e-6;
            let hw = p.half_width();
            let s = 0.5 * p.smoothing;
            // Skip the kinks themselves, where the derivative is one-sided.
            prop_assume!(((x.abs() - hw).abs() - s).abs() > 1e-3 && (x.abs() - hw).abs() > 1e-3);
            // n_f-derivative of g(n - n_f) is minus the x-derivative.
            let fd = -(p.field_at_offset(x + h) - p.field_at_offset(x - h)) / (2.0 * h);
            prop_assert!((fd - p.gradient_at_offset(x)).abs() < 1e-8);
        }

        #[test]
        fn velocity_and_schedule_invert(n in 2usize..2000, lg in -8.0f64..1.5, t in 1.0f64..1e5) {
            let alpha = 2f64.powf(lg);
            let v = velocity_for(n, alpha, 3.0, 0.0, t).unwrap();
            let p = FrontProfile::standard(alpha, v).unwrap();
            let back = schedule_for(n, &p).unwrap().total_time;
            prop_assert!(((back - t) / t).abs() < 1e-12);
        }
    }
}

//! Heisenberg-picture propagation of the Majorana frame.
//!
//! With `a(t) = O(t) b` the Bogoliubov equations read `dO/dt = 4 A(t) O`.
//! The field and coupling parts of `A` are sums of commuting 2×2 blocks, so
//! each factor of the Trotter splitting is a set of exact planar rotations
//! acting on pairs of rows of `O`: angle `2 g_n δt` on rows `(2n-1, 2n)` and
//! `2 J_n δt` on rows `(2n, 2n+1)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::majorana::{CanonicalDiag, Covariance};
use crate::profile::{Drive, Schedule};

pub const DEFAULT_DT: f64 = 0.02;

/// Outer weight of the fourth-order triple-jump composition.
pub fn yoshida_w1() -> f64 {
    1.0 / (2.0 - 2f64.powf(1.0 / 3.0))
}

/// Inner (negative) weight, `1 - 2 w1`.
pub fn yoshida_w0() -> f64 {
    1.0 - 2.0 * yoshida_w1()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionState {
    n_sites: usize,
    /// Row-major `2N × 2N` frame.
    o: Vec<f64>,
    pub t: f64,
    pub step_count: u64,
}

impl EvolutionState {
    /// Starts from the (parity-fixed) canonical frame at `t_start`.
    pub fn init(diag: &CanonicalDiag, t_start: f64) -> Self {
        let m = diag.o0();
        let dim = m.nrows();
        let mut o = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                o[i * dim + j] = m[(i, j)];
            }
        }
        Self {
            n_sites: dim / 2,
            o,
            t: t_start,
            step_count: 0,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    fn dim(&self) -> usize {
        2 * self.n_sites
    }

    pub fn frame(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim(), self.dim(), &self.o)
    }

    pub fn covariance(&self) -> Covariance {
        Covariance::from_frame(&self.frame())
    }

    /// `‖OᵀO - I‖_max`, i.e. the deviation of the rows from orthonormality.
    pub fn orthogonality_drift(&self) -> f64 {
        let dim = self.dim();
        let mut worst = 0.0f64;
        for i in 0..dim {
            let ri = &self.o[i * dim..(i + 1) * dim];
            for j in i..dim {
                let rj = &self.o[j * dim..(j + 1) * dim];
                let dot: f64 = ri.iter().zip(rj).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - want).abs());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.o.iter().all(|x| x.is_finite())
    }

    /// Rotates rows `r` and `r + 1`: `x' = c x - s y`, `y' = s x + c y`.
    fn rotate_rows(&mut self, r: usize, theta: f64) {
        if theta == 0.0 {
            return;
        }
        let dim = self.dim();
        let (c, s) = (theta.cos(), theta.sin());
        let (head, tail) = self.o.split_at_mut((r + 1) * dim);
        let x = &mut head[r * dim..];
        let y = &mut tail[..dim];
        for (a, b) in x.iter_mut().zip(y.iter_mut()) {
            let (xa, yb) = (*a, *b);
            *a = c * xa - s * yb;
            *b = s * xa + c * yb;
        }
    }
}

pub fn init_evolution(diag: &CanonicalDiag, t_start: f64) -> EvolutionState {
    EvolutionState::init(diag, t_start)
}

/// `exp(4 δt A_g)`: rotations by `2 g_n δt` on rows `(2n-1, 2n)`.
pub fn substep_field(state: &mut EvolutionState, fields: &[f64], dt: f64) {
    for (n, g) in fields.iter().enumerate() {
        state.rotate_rows(2 * n, 2.0 * g * dt);
    }
}

/// `exp(4 δt A_J)`: rotations by `2 J_n δt` on rows `(2n, 2n+1)`.
pub fn substep_coupling(state: &mut EvolutionState, couplings: &[f64], dt: f64) {
    for (n, j) in couplings.iter().enumerate() {
        state.rotate_rows(2 * n + 1, 2.0 * j * dt);
    }
}

/// Fourth-order propagator for constant couplings and time-dependent
/// fields. Coupling half-steps of adjacent second-order sweeps are merged, so
/// a step costs three field and three coupling passes; the last coupling
/// half-step stays pending until [`flush`](Self::flush).
pub struct Propagator<'a, F> {
    couplings: &'a [f64],
    fields_at: F,
    fields: Vec<f64>,
    pending: f64,
    w1: f64,
    w0: f64,
}

impl<'a, F: Fn(f64, &mut [f64])> Propagator<'a, F> {
    pub fn new(couplings: &'a [f64], fields_at: F) -> Self {
        Self {
            couplings,
            fields_at,
            fields: vec![0.0; couplings.len() + 1],
            pending: 0.0,
            w1: yoshida_w1(),
            w0: yoshida_w0(),
        }
    }

    fn coupling(&mut self, tau: f64) {
        self.pending += tau;
    }

    fn field(&mut self, state: &mut EvolutionState, t_mid: f64, tau: f64) {
        if self.pending != 0.0 {
            substep_coupling(state, self.couplings, self.pending);
            self.pending = 0.0;
        }
        (self.fields_at)(t_mid, &mut self.fields);
        substep_field(state, &self.fields, tau);
    }

    /// Second-order sweep `J(τ/2) G(τ) J(τ/2)` starting at `t0`.
    fn sweep2(&mut self, state: &mut EvolutionState, t0: f64, tau: f64) {
        self.coupling(0.5 * tau);
        self.field(state, t0 + 0.5 * tau, tau);
        self.coupling(0.5 * tau);
    }

    /// One fourth-order step of length `h`.
    pub fn step(&mut self, state: &mut EvolutionState, h: f64) {
        let t0 = state.t;
        let (a, b) = (self.w1 * h, self.w0 * h);
        self.sweep2(state, t0, a);
        self.sweep2(state, t0 + a, b);
        self.sweep2(state, t0 + a + b, a);
        state.t = t0 + h;
        state.step_count += 1;
    }

    /// Applies any pending coupling rotation; the frame is then exactly the
    /// state at `state.t`.
    pub fn flush(&mut self, state: &mut EvolutionState) {
        if self.pending != 0.0 {
            substep_coupling(state, self.couplings, self.pending);
            self.pending = 0.0;
        }
    }
}

/// One self-contained fourth-order step (flushed).
pub fn trotter_step_4<F: Fn(f64, &mut [f64])>(state: &mut EvolutionState, couplings: &[f64], fields_at: F, dt: f64) {
    let mut p = Propagator::new(couplings, fields_at);
    p.step(state, dt);
    p.flush(state);
}

/// One checkpoint of the optional monitoring stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: f64,
    pub energy: f64,
    pub orthogonality_drift: f64,
    pub parity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub dt: f64,
    /// Split steps at the kinks of the front so the piecewise-linear drive
    /// does not degrade the order of the splitting.
    pub align_to_kinks: bool,
    /// Number of evenly spaced checkpoints (0 disables the stream).
    pub checkpoints: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            align_to_kinks: true,
            checkpoints: 0,
        }
    }
}

/// Step boundaries for `[t_start, t_end]`: at most `dt` apart, with every
/// breakpoint included.
pub fn step_grid(t_start: f64, t_end: f64, dt: f64, breakpoints: &[f64]) -> Vec<f64> {
    let mut marks = vec![t_start];
    marks.extend(breakpoints.iter().copied().filter(|&b| b > t_start && b < t_end));
    marks.push(t_end);
    let mut grid = vec![t_start];
    for w in marks.windows(2) {
        let span = w[1] - w[0];
        if span <= 0.0 {
            continue;
        }
        let k = (span / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        for i in 1..k {
            grid.push(w[0] + span * i as f64 / k as f64);
        }
        grid.push(w[1]);
    }
    grid
}

#[derive(Debug, Clone)]
pub struct QuenchEvolution {
    pub state: EvolutionState,
    pub checkpoints: Vec<Checkpoint>,
}

/// Evolves the initial vacuum `diag` through the whole protocol.
pub fn evolve_quench(
    couplings: &[f64],
    drive: &Drive,
    schedule: &Schedule,
    diag: &CanonicalDiag,
    opts: &EvolveOptions,
) -> Result<QuenchEvolution> {
    let n = couplings.len() + 1;
    if diag.n_sites() != n {
        return Err(Error::Shape {
            what: "modes in the initial canonical form",
            expected: n,
            got: diag.n_sites(),
        });
    }
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(Error::InvalidTime(opts.dt));
    }
    let bps = if opts.align_to_kinks { drive.breakpoints(n, schedule) } else { Vec::new() };
    let grid = step_grid(schedule.t_start, schedule.t_end, opts.dt, &bps);
    let mut state = EvolutionState::init(diag, schedule.t_start);
    let sched = *schedule;
    let mut prop = Propagator::new(couplings, |t: f64, out: &mut [f64]| drive.fields_into(t, &sched, out));
    let mut checkpoints = Vec::new();
    let every = if opts.checkpoints > 0 {
        ((grid.len() - 1) / opts.checkpoints).max(1)
    } else {
        usize::MAX
    };
    let mut fields = vec![0.0; n];
    for (i, w) in grid.windows(2).enumerate() {
        state.t = w[0];
        prop.step(&mut state, w[1] - w[0]);
        state.t = w[1];
        let last = i + 2 == grid.len();
        if (i + 1) % every == 0 || (last && opts.checkpoints > 0) {
            prop.flush(&mut state);
            drive.fields_into(state.t, schedule, &mut fields);
            let h = crate::majorana::assemble(couplings, &fields)?;
            let cov = state.covariance();
            checkpoints.push(Checkpoint {
                t: state.t,
                energy: h.energy(&cov),
                orthogonality_drift: state.orthogonality_drift(),
                parity: crate::linalg::pfaffian(cov.matrix()),
            });
        }
        if (i + 1) % 4096 == 0 && !state.is_finite() {
            return Err(Error::NumericalBlowup {
                steps: state.step_count,
                time: state.t,
            });
        }
    }
    prop.flush(&mut state);
    if !state.is_finite() {
        return Err(Error::NumericalBlowup {
            steps: state.step_count,
            time: state.t,
        });
    }
    Ok(QuenchEvolution { state, checkpoints })
}

//! End-to-end quench: prepare the initial vacuum, propagate, measure.

use serde::{Deserialize, Serialize};

use crate::disorder::CouplingRealization;
use crate::dynamics::{evolve_quench, Checkpoint, EvolveOptions, DEFAULT_DT};
use crate::error::Result;
use crate::majorana::{assemble, canonical_diagonalize, Covariance};
use crate::observables::{ground_state_fidelity, kink_density, parity_expectation, residual_energy};
use crate::profile::{Drive, ScheduleMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuenchOptions {
    pub dt: f64,
    pub fidelity: bool,
    pub align_to_kinks: bool,
    pub checkpoints: usize,
}

impl Default for QuenchOptions {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            fidelity: false,
            align_to_kinks: true,
            checkpoints: 0,
        }
    }
}

/// Protocol parameters echoed next to every result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolEcho {
    pub mode: ScheduleMode,
    pub n_sites: usize,
    pub seed: u64,
    pub alpha: Option<f64>,
    pub velocity: Option<f64>,
    pub total_time: f64,
    pub g_i: f64,
    pub g_f: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuenchResult {
    pub residual_energy: f64,
    pub kink_density: f64,
    pub fidelity: Option<f64>,
    pub parity_drift: f64,
    pub orthogonality_drift: f64,
    pub protocol: ProtocolEcho,
}

#[derive(Debug, Clone)]
pub struct QuenchRun {
    pub result: QuenchResult,
    pub covariance: Covariance,
    pub checkpoints: Vec<Checkpoint>,
    pub initial_parity: i32,
}

pub fn run_quench(realization: &CouplingRealization, drive: &Drive, opts: &QuenchOptions) -> Result<QuenchResult> {
    Ok(run_quench_detailed(realization, drive, opts)?.result)
}

pub fn run_quench_detailed(realization: &CouplingRealization, drive: &Drive, opts: &QuenchOptions) -> Result<QuenchRun> {
    let n = realization.n_sites;
    let j = &realization.couplings;
    let schedule = drive.schedule(n)?;
    let mut fields = vec![0.0; n];
    drive.fields_into(schedule.t_start, &schedule, &mut fields);
    let diag0 = canonical_diagonalize(&assemble(j, &fields)?)?;
    let p0 = diag0.vacuum_parity();
    let evo = evolve_quench(
        j,
        drive,
        &schedule,
        &diag0,
        &EvolveOptions {
            dt: opts.dt,
            align_to_kinks: opts.align_to_kinks,
            checkpoints: opts.checkpoints,
        },
    )?;
    let cov = evo.state.covariance();
    drive.fields_into(schedule.t_end, &schedule, &mut fields);
    let h_final = assemble(j, &fields)?;
    let q = residual_energy(&cov, &h_final, p0)?;
    let fidelity = if opts.fidelity {
        let diag_f = canonical_diagonalize(&h_final)?.fix_parity(p0);
        Some(ground_state_fidelity(&cov, &diag_f)?.value)
    } else {
        None
    };
    let result = QuenchResult {
        residual_energy: q,
        kink_density: kink_density(&cov)?,
        fidelity,
        parity_drift: (parity_expectation(&cov) - f64::from(p0)).abs(),
        orthogonality_drift: evo.state.orthogonality_drift(),
        protocol: ProtocolEcho {
            mode: schedule.mode,
            n_sites: n,
            seed: realization.seed,
            alpha: drive.alpha(),
            velocity: drive.velocity(),
            total_time: schedule.total_time,
            g_i: drive.g_initial(),
            g_f: drive.g_final(),
            dt: opts.dt,
        },
    };
    Ok(QuenchRun {
        result,
        covariance: cov,
        checkpoints: evo.checkpoints,
        initial_parity: p0,
    })
}

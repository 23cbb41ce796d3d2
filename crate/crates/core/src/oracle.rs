//! Side-by-side comparisons of the free-fermion results with exact
//! diagonalization in the spin basis, for chains of up to 12 sites.

use serde::{Deserialize, Serialize};

use crate::ed::{self, ed_build, EvolveOptions as EdOptions, C64};
use crate::error::Result;
use crate::majorana::Covariance;
use crate::profile::{field_gradients_at, fields_at, Drive, FrontProfile};
use crate::quench::{run_quench_detailed, QuenchOptions};
use crate::disorder::CouplingRealization;
use crate::spectral::{initial_parity, low_modes};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticsComparison {
    pub front_position: f64,
    pub gap_free_fermion: f64,
    pub gap_ed: f64,
    pub omega_free_fermion: f64,
    pub omega_ed: f64,
}

impl StaticsComparison {
    pub fn max_error(&self) -> f64 {
        (self.gap_free_fermion - self.gap_ed)
            .abs()
            .max((self.omega_free_fermion - self.omega_ed).abs())
    }
}

/// Same-parity gap and mixing element from both routes at one front position.
pub fn compare_statics(couplings: &[f64], profile: &FrontProfile, front_position: f64) -> Result<StaticsComparison> {
    let n = couplings.len() + 1;
    let g = fields_at(profile, n, front_position);
    let grad = field_gradients_at(profile, n, front_position);
    let parity = initial_parity(n, profile);
    let modes = low_modes(couplings, &g, parity)?;
    let sys = ed_build(couplings, &g)?;
    let eig = sys.sector_eigen(parity);
    let (v0, v1) = (&eig.vectors[0], &eig.vectors[1]);
    let omega_ed: f64 = (0..sys.dim())
        .map(|b| {
            let z: f64 = grad
                .iter()
                .enumerate()
                .map(|(i, c)| if b >> i & 1 == 0 { *c } else { -*c })
                .sum();
            v0[b] * v1[b] * z
        })
        .sum::<f64>()
        .abs();
    Ok(StaticsComparison {
        front_position,
        gap_free_fermion: modes.gap(),
        gap_ed: eig.energies[1] - eig.energies[0],
        omega_free_fermion: modes.mixing(&grad),
        omega_ed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsReference {
    pub residual_energy: f64,
    pub fidelity: f64,
    pub kink_density: f64,
}

/// Exact Schrödinger evolution of the same protocol, starting in the ground
/// state of the initial Hamiltonian's parity-matched sector.
pub fn ed_quench(realization: &CouplingRealization, drive: &Drive, opts: EdOptions) -> Result<(DynamicsReference, Vec<C64>)> {
    let n = realization.n_sites;
    let j = &realization.couplings;
    let schedule = drive.schedule(n)?;
    let mut g0 = vec![0.0; n];
    drive.fields_into(schedule.t_start, &schedule, &mut g0);
    let sys0 = ed_build(j, &g0)?;
    let spectrum = sys0.spectrum();
    let parity = spectrum[0].1;
    let (_, psi0) = ed::sector_ground_state(&sys0, parity);
    let bps = drive.breakpoints(n, &schedule);
    let psi = ed::ed_evolve(
        j,
        |t, out| drive.fields_into(t, &schedule, out),
        &psi0,
        schedule.t_start,
        schedule.t_end,
        &bps,
        opts,
    )?;
    let mut gf = vec![0.0; n];
    drive.fields_into(schedule.t_end, &schedule, &mut gf);
    let sys_f = ed_build(j, &gf)?;
    let (e_gs, gs) = ed::sector_ground_state(&sys_f, parity);
    let energy = ed::expectation_energy(j, &gf, &psi);
    let g = ed::majorana_covariance(&psi, n);
    let cov = Covariance::from_matrix(g);
    let kinks = crate::observables::kink_density(&cov)?;
    Ok((
        DynamicsReference {
            residual_energy: energy - e_gs,
            fidelity: ed::ed_overlap(&gs, &psi),
            kink_density: kinks,
        },
        psi,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsComparison {
    pub residual_energy_trotter: f64,
    pub residual_energy_ed: f64,
    pub fidelity_trotter: f64,
    pub fidelity_ed: f64,
    pub kink_density_trotter: f64,
    pub kink_density_ed: f64,
    /// Largest deviation of any Majorana two-point function.
    pub covariance_error: f64,
}

impl DynamicsComparison {
    pub fn max_observable_error(&self) -> f64 {
        (self.residual_energy_trotter - self.residual_energy_ed)
            .abs()
            .max((self.fidelity_trotter - self.fidelity_ed).abs())
            .max((self.kink_density_trotter - self.kink_density_ed).abs())
    }
}

pub fn compare_dynamics(
    realization: &CouplingRealization,
    drive: &Drive,
    dt: f64,
    ed_opts: EdOptions,
) -> Result<DynamicsComparison> {
    let run = run_quench_detailed(
        realization,
        drive,
        &QuenchOptions {
            dt,
            fidelity: true,
            ..QuenchOptions::default()
        },
    )?;
    let (reference, psi) = ed_quench(realization, drive, ed_opts)?;
    let g_ed = ed::majorana_covariance(&psi, realization.n_sites);
    let cov_err = (run.covariance.matrix() - &g_ed).amax();
    Ok(DynamicsComparison {
        residual_energy_trotter: run.result.residual_energy,
        residual_energy_ed: reference.residual_energy,
        fidelity_trotter: run.result.fidelity.unwrap_or(f64::NAN),
        fidelity_ed: reference.fidelity,
        kink_density_trotter: run.result.kink_density,
        kink_density_ed: reference.kink_density,
        covariance_error: cov_err,
    })
}

//! Observables of Gaussian states given by their Majorana covariance.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::pfaffian;
use crate::majorana::{canonical_diagonalize, CanonicalDiag, Covariance, QuadraticHamiltonian};

/// Lowest energy of `h` within the parity sector `parity`. With all fields
/// zero this is `-Σ|J_n|` in both sectors.
pub fn sector_ground_energy(h: &QuadraticHamiltonian, parity: i32) -> Result<f64> {
    if h.fields().iter().all(|&g| g == 0.0) {
        return Ok(-h.couplings().iter().map(|j| j.abs()).sum::<f64>());
    }
    Ok(canonical_diagonalize(h)?.fix_parity(parity).ground_energy())
}

/// `Q = ⟨H⟩ - E_gs`, with `E_gs` the ground energy of the state's parity
/// sector.
pub fn residual_energy(cov: &Covariance, h_final: &QuadraticHamiltonian, parity: i32) -> Result<f64> {
    check_size(cov, h_final.n_sites())?;
    Ok(h_final.energy(cov) - sector_ground_energy(h_final, parity)?)
}

fn check_size(cov: &Covariance, n: usize) -> Result<()> {
    if cov.n_sites() != n {
        return Err(Error::Shape {
            what: "sites in covariance",
            expected: n,
            got: cov.n_sites(),
        });
    }
    Ok(())
}

/// Fraction of broken bonds, `(1/(N-1)) Σ_n (1 - ⟨σˣ_n σˣ_{n+1}⟩)/2`.
pub fn kink_density(cov: &Covariance) -> Result<f64> {
    let n = cov.n_sites();
    if n < 2 {
        return Err(Error::InvalidSize {
            n_sites: n,
            reason: "kinks need at least one bond",
        });
    }
    let s: f64 = (1..n).map(|b| 0.5 * (1.0 - cov.bond_xx(b))).sum();
    Ok(s / (n - 1) as f64)
}

/// `⟨Π σᶻ_n⟩ = Pf(G)`.
pub fn parity_expectation(cov: &Covariance) -> f64 {
    pfaffian(cov.matrix())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fidelity {
    pub value: f64,
    /// Set when the two states are orthogonal (singular overlap matrix).
    pub orthogonal: bool,
}

/// `|⟨φ|ψ⟩|² = |Pf((G_φ + G_ψ)/2)| = √|det((G_φ + G_ψ)/2)|` for pure
/// Gaussian states. Branch and phase ambiguities disappear in the modulus.
pub fn gaussian_overlap(a: &Covariance, b: &Covariance) -> Result<Fidelity> {
    if a.n_sites() != b.n_sites() {
        return Err(Error::Shape {
            what: "sites in covariance",
            expected: a.n_sites(),
            got: b.n_sites(),
        });
    }
    let m: DMatrix<f64> = (a.matrix() + b.matrix()) * 0.5;
    let det = m.lu().determinant();
    let value = det.abs().sqrt().min(1.0);
    Ok(Fidelity {
        value,
        orthogonal: value < 1e-14,
    })
}

/// Overlap of `cov` with the ground state of `final_diag`'s parity-fixed
/// vacuum.
pub fn ground_state_fidelity(cov: &Covariance, final_diag: &CanonicalDiag) -> Result<Fidelity> {
    gaussian_overlap(cov, &final_diag.vacuum_covariance())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::majorana::assemble;

    #[test]
    fn ground_state_has_no_residual_energy_or_kinks() {
        let h = assemble(&[0.8, 1.2, 0.7], &[0.0; 4]).unwrap();
        for parity in [1, -1] {
            let d = canonical_diagonalize(&h).unwrap().fix_parity(parity);
            let cov = d.vacuum_covariance();
            assert!(residual_energy(&cov, &h, parity).unwrap().abs() < 1e-12);
            assert!(kink_density(&cov).unwrap().abs() < 1e-12);
            let f = ground_state_fidelity(&cov, &d).unwrap();
            assert!((f.value - 1.0).abs() < 1e-12);
            assert!((parity_expectation(&cov) - parity as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn opposite_parity_states_are_orthogonal() {
        let h = assemble(&[0.8, 1.2], &[0.5, 1.0, 2.0]).unwrap();
        let d = canonical_diagonalize(&h).unwrap();
        let f = gaussian_overlap(&d.fix_parity(1).vacuum_covariance(), &d.fix_parity(-1).vacuum_covariance()).unwrap();
        assert!(f.orthogonal);
        assert_eq!(f.value.min(1e-7), f.value);
    }

    #[test]
    fn paramagnet_has_half_broken_bonds_at_zero_field() {
        // All spins up has ⟨σˣσˣ⟩ = 0 on every bond.
        let h0 = assemble(&[1.0; 5], &[1e6; 6]).unwrap();
        let cov = canonical_diagonalize(&h0).unwrap().vacuum_covariance();
        let hf = assemble(&[1.0; 5], &[0.0; 6]).unwrap();
        assert!((kink_density(&cov).unwrap() - 0.5).abs() < 1e-6);
        // Q = 0 - (-ΣJ) and bounded by 2ΣJ.
        let q = residual_energy(&cov, &hf, 1).unwrap();
        assert!((q - 5.0).abs() < 1e-5);
        assert!(q <= 10.0);
    }
}

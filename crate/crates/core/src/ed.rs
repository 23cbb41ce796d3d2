//! Brute-force exact diagonalization of small chains in the full spin basis.
//!
//! Basis state `b` has bit `n-1` set when spin `n` points down (σᶻ = -1).
//! The operators and sign conventions match [`crate::majorana`], so Majorana
//! correlators computed here are directly comparable with the free-fermion
//! covariance.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

pub const MAX_ED_SITES: usize = 12;

#[derive(Debug, Clone)]
pub struct DenseSpinSystem {
    n_sites: usize,
    couplings: Vec<f64>,
    fields: Vec<f64>,
    hamiltonian: DMatrix<f64>,
    parity_labels: Vec<i8>,
}

/// Parity `Π σᶻ_n` of a basis state.
pub fn basis_parity(b: usize) -> i8 {
    if b.count_ones() % 2 == 0 {
        1
    } else {
        -1
    }
}

fn check_sizes(couplings: &[f64], fields: &[f64]) -> Result<usize> {
    let n = fields.len();
    if n == 0 || n > MAX_ED_SITES {
        return Err(Error::InvalidSize {
            n_sites: n,
            reason: "exact diagonalization supports 1 to 12 sites",
        });
    }
    if couplings.len() + 1 != n {
        return Err(Error::Shape {
            what: "couplings",
            expected: n - 1,
            got: couplings.len(),
        });
    }
    Ok(n)
}

/// Dense `-Σ J_n σˣ_n σˣ_{n+1} - Σ g_n σᶻ_n`.
pub fn ed_build(couplings: &[f64], fields: &[f64]) -> Result<DenseSpinSystem> {
    let n = check_sizes(couplings, fields)?;
    let dim = 1usize << n;
    let mut h = DMatrix::zeros(dim, dim);
    for b in 0..dim {
        for (i, g) in fields.iter().enumerate() {
            h[(b, b)] -= if b >> i & 1 == 0 { *g } else { -*g };
        }
        for (i, j) in couplings.iter().enumerate() {
            let c = b ^ (0b11 << i);
            h[(c, b)] -= j;
        }
    }
    Ok(DenseSpinSystem {
        n_sites: n,
        couplings: couplings.to_vec(),
        fields: fields.to_vec(),
        hamiltonian: h,
        parity_labels: (0..dim).map(basis_parity).collect(),
    })
}

/// Eigenpairs of one parity sector, ascending, with vectors embedded in the
/// full basis.
#[derive(Debug, Clone)]
pub struct SectorEigen {
    pub parity: i32,
    pub energies: Vec<f64>,
    pub vectors: Vec<DVector<f64>>,
}

impl DenseSpinSystem {
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    pub fn hamiltonian(&self) -> &DMatrix<f64> {
        &self.hamiltonian
    }

    pub fn parity_labels(&self) -> &[i8] {
        &self.parity_labels
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn sector_basis(&self, parity: i32) -> Vec<usize> {
        (0..self.dim())
            .filter(|&b| i32::from(self.parity_labels[b]) == parity)
            .collect()
    }

    pub fn sector_eigen(&self, parity: i32) -> SectorEigen {
        let basis = self.sector_basis(parity);
        let m = basis.len();
        let block = DMatrix::from_fn(m, m, |i, j| self.hamiltonian[(basis[i], basis[j])]);
        let eig = SymmetricEigen::new(block);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let dim = self.dim();
        let vectors = order
            .iter()
            .map(|&k| {
                let mut v = DVector::zeros(dim);
                for (i, &b) in basis.iter().enumerate() {
                    v[b] = eig.eigenvectors[(i, k)];
                }
                v
            })
            .collect();
        SectorEigen {
            parity,
            energies: order.iter().map(|&k| eig.eigenvalues[k]).collect(),
            vectors,
        }
    }

    /// Full spectrum with the parity of each eigenstate, ascending.
    pub fn spectrum(&self) -> Vec<(f64, i32)> {
        let mut out: Vec<(f64, i32)> = [1, -1]
            .iter()
            .flat_map(|&p| self.sector_eigen(p).energies.into_iter().map(move |e| (e, p)))
            .collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    /// Largest matrix element between basis states of opposite parity.
    pub fn cross_sector_leak(&self) -> f64 {
        let dim = self.dim();
        let mut worst = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                if self.parity_labels[i] != self.parity_labels[j] {
                    worst = worst.max(self.hamiltonian[(i, j)].abs());
                }
            }
        }
        worst
    }
}

pub fn ed_sector_spectrum(sys: &DenseSpinSystem, parity: i32) -> Vec<f64> {
    sys.sector_eigen(parity).energies
}

/// `⟨E_bra| Σ c_n σᶻ_n |E_ket⟩` between eigenstates of one parity sector,
/// indexed by energy rank.
pub fn ed_matrix_element(
    sys: &DenseSpinSystem,
    coefficients: &[f64],
    bra: usize,
    ket: usize,
    parity: i32,
) -> Result<f64> {
    if coefficients.len() != sys.n_sites {
        return Err(Error::Shape {
            what: "operator coefficients",
            expected: sys.n_sites,
            got: coefficients.len(),
        });
    }
    let eig = sys.sector_eigen(parity);
    let len = eig.vectors.len();
    if bra >= len || ket >= len {
        return Err(Error::Domain(format!("eigenstate index out of range for sector of size {len}")));
    }
    let (a, b) = (&eig.vectors[bra], &eig.vectors[ket]);
    Ok((0..sys.dim())
        .map(|s| a[s] * b[s] * z_sum(s, coefficients))
        .sum())
}

fn z_sum(b: usize, c: &[f64]) -> f64 {
    c.iter()
        .enumerate()
        .map(|(i, v)| if b >> i & 1 == 0 { *v } else { -*v })
        .sum()
}

pub fn to_complex(v: &DVector<f64>) -> Vec<C64> {
    v.iter().map(|&x| C64::new(x, 0.0)).collect()
}

/// `|⟨v1|v2⟩|²` for normalized vectors.
pub fn ed_overlap(v1: &[C64], v2: &[C64]) -> f64 {
    inner(v1, v2).norm_sqr()
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `out = H ψ` without forming the dense matrix.
pub fn apply_hamiltonian(couplings: &[f64], fields: &[f64], psi: &[C64], out: &mut [C64]) {
    for (b, o) in out.iter_mut().enumerate() {
        let mut acc = psi[b] * -z_sum(b, fields);
        for (i, j) in couplings.iter().enumerate() {
            acc -= psi[b ^ (0b11 << i)] * *j;
        }
        *o = acc;
    }
}

pub fn expectation_energy(couplings: &[f64], fields: &[f64], psi: &[C64]) -> f64 {
    let mut h = vec![C64::new(0.0, 0.0); psi.len()];
    apply_hamiltonian(couplings, fields, psi, &mut h);
    inner(psi, &h).re
}

/// Applies the 1-based Majorana `a_m` to `psi`.
pub fn apply_majorana(m: usize, psi: &[C64]) -> Vec<C64> {
    assert!(m >= 1);
    let site = (m - 1) / 2;
    let odd = m % 2 == 1;
    let mut out = vec![C64::new(0.0, 0.0); psi.len()];
    let below = (1usize << site) - 1;
    for (b, amp) in psi.iter().enumerate() {
        let string = if (b & below).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        let down = b >> site & 1 == 1;
        let target = b ^ (1 << site);
        let factor = if odd {
            C64::new(string, 0.0)
        } else if down {
            // -σʸ|↓⟩ = i|↑⟩
            C64::new(0.0, string)
        } else {
            // -σʸ|↑⟩ = -i|↓⟩
            C64::new(0.0, -string)
        };
        out[target] += factor * amp;
    }
    out
}

/// `G[m, n] = ⟨ψ| i a_m a_n |ψ⟩` (zero diagonal), the same object as
/// [`crate::majorana::Covariance`].
pub fn majorana_covariance(psi: &[C64], n_sites: usize) -> DMatrix<f64> {
    let dim = 2 * n_sites;
    let applied: Vec<Vec<C64>> = (1..=dim).map(|m| apply_majorana(m, psi)).collect();
    DMatrix::from_fn(dim, dim, |m, n| {
        if m == n {
            0.0
        } else {
            // ⟨i a_m a_n⟩ = i ⟨a_m ψ | a_n ψ⟩ since a_m is self-adjoint.
            (C64::new(0.0, 1.0) * inner(&applied[m], &applied[n])).re
        }
    })
}

/// Ground state of the given parity sector, as a complex vector.
pub fn sector_ground_state(sys: &DenseSpinSystem, parity: i32) -> (f64, Vec<C64>) {
    let eig = sys.sector_eigen(parity);
    (eig.energies[0], to_complex(&eig.vectors[0]))
}

#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: f64,
    pub max_steps: u64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-13,
            initial_step: 1e-3,
            max_steps: 50_000_000,
        }
    }
}

// Dormand-Prince 5(4) coefficients.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `i dψ/dt = H(t) ψ` from `t_start` to `t_end` with adaptive
/// Dormand-Prince steps. `fields_at(t, out)` supplies the site fields; the
/// integration restarts at every entry of `breakpoints` so that kinks in the
/// drive do not spoil the error control.
pub fn ed_evolve<F>(
    couplings: &[f64],
    fields_at: F,
    psi0: &[C64],
    t_start: f64,
    t_end: f64,
    breakpoints: &[f64],
    opts: EvolveOptions,
) -> Result<Vec<C64>>
where
    F: Fn(f64, &mut [f64]),
{
    let n = couplings.len() + 1;
    if psi0.len() != 1 << n {
        return Err(Error::Shape {
            what: "state amplitudes",
            expected: 1 << n,
            got: psi0.len(),
        });
    }
    if !(t_end >= t_start) {
        return Err(Error::InvalidTime(t_end - t_start));
    }
    let mut psi = psi0.to_vec();
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&b| b > t_start && b < t_end)
        .collect();
    cuts.push(t_end);
    let dim = psi.len();
    let mut fields = vec![0.0; n];
    let mut k = vec![vec![C64::new(0.0, 0.0); dim]; 7];
    let mut stage = vec![C64::new(0.0, 0.0); dim];
    let mut next = vec![C64::new(0.0, 0.0); dim];
    let mut t = t_start;
    let mut h = opts.initial_step;
    let mut steps = 0u64;
    let deriv = |t: f64, y: &[C64], out: &mut [C64], fields: &mut [f64]| {
        fields_at(t, fields);
        apply_hamiltonian(couplings, fields, y, out);
        for v in out.iter_mut() {
            *v = C64::new(v.im, -v.re);
        }
    };
    for &stop in &cuts {
        let mut fsal = false;
        while t < stop {
            let h_try = h.min(stop - t);
            let last = h_try >= stop - t;
            if !fsal {
                deriv(t, &psi, &mut k[0], &mut fields);
            }
            for s in 1..7 {
                for i in 0..dim {
                    let mut acc = psi[i];
                    for (j, a) in A[s].iter().enumerate().take(s) {
                        if *a != 0.0 {
                            acc += k[j][i] * (h_try * a);
                        }
                    }
                    stage[i] = acc;
                }
                let (done, rest) = k.split_at_mut(s);
                let _ = done;
                deriv(t + C[s] * h_try, &stage, &mut rest[0], &mut fields);
            }
            let mut err = 0.0f64;
            for i in 0..dim {
                let mut y5 = psi[i];
                let mut e = C64::new(0.0, 0.0);
                for s in 0..7 {
                    y5 += k[s][i] * (h_try * B5[s]);
                    e += k[s][i] * (h_try * (B5[s] - B4[s]));
                }
                next[i] = y5;
                let scale = opts.atol + opts.rtol * psi[i].norm().max(y5.norm());
                err = err.max(e.norm() / scale);
            }
            steps += 1;
            if steps > opts.max_steps || !err.is_finite() {
                return Err(Error::NumericalBlowup { steps, time: t });
            }
            if err <= 1.0 {
                t = if last { stop } else { t + h_try };
                std::mem::swap(&mut psi, &mut next);
                let (first, rest) = k.split_at_mut(1);
                first[0].copy_from_slice(&rest[5]);
                fsal = true;
            } else {
                fsal = false;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if !(last && err <= 1.0) {
                h = h_try * factor;
            }
        }
    }
    Ok(psi)
}

/// `exp(-i H t) ψ` for constant `H` by eigendecomposition.
pub fn evolve_constant(sys: &DenseSpinSystem, psi: &[C64], t: f64) -> Vec<C64> {
    let eig = SymmetricEigen::new(sys.hamiltonian.clone());
    let q = &eig.eigenvectors;
    let dim = sys.dim();
    let mut out = vec![C64::new(0.0, 0.0); dim];
    for k in 0..dim {
        let c: C64 = (0..dim).map(|i| psi[i] * q[(i, k)]).sum();
        let phase = C64::from_polar(1.0, -eig.eigenvalues[k] * t);
        for i in 0..dim {
            out[i] += c * phase * q[(i, k)];
        }
    }
    out
}

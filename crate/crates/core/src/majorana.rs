//! Quadratic Majorana form of the open transverse-field Ising chain and its
//! canonical (Bogoliubov) decomposition.
//!
//! Majoranas are ordered `a_1 .. a_{2N}` with `a_{2n-1} = σˣ_n Π_{m<n} σᶻ_m`
//! and `a_{2n} = -σʸ_n Π_{m<n} σᶻ_m`, so that `σᶻ_n = i a_{2n-1} a_{2n}` and
//! `σˣ_n σˣ_{n+1} = i a_{2n} a_{2n+1}`. The Hamiltonian
//! `H = -Σ J_n σˣ_n σˣ_{n+1} - Σ g_n σᶻ_n` then reads `H = a† (iA) a` with a
//! real antisymmetric `A`.
//!
//! `A` only links odd to even Majoranas, so it is fixed by the `N × N`
//! lower-bidiagonal block `M` (`M_nn = -g_n/2`, `M_{n+1,n} = J_n/2`) and the
//! canonical form follows from the singular value decomposition of `M`:
//! `ε_k = 2 s_k`. Working with `M` rather than `-A²` keeps small `ε` at full
//! precision instead of squaring them. Code indices below are 0-based, so Majorana `a_{2n-1}`
//! lives in row `2(n-1)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest chain for which sector spectra are enumerated explicitly.
pub const MAX_ENUMERATED_SITES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticHamiltonian {
    couplings: Vec<f64>,
    fields: Vec<f64>,
}

impl QuadraticHamiltonian {
    pub fn n_sites(&self) -> usize {
        self.fields.len()
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    /// Diagonal (`-g_n/2`) and sub-diagonal (`J_n/2`) of the odd-even block.
    pub fn bidiagonal(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.fields.iter().map(|g| -0.5 * g).collect(),
            self.couplings.iter().map(|j| 0.5 * j).collect(),
        )
    }

    pub fn bidiagonal_matrix(&self) -> DMatrix<f64> {
        let n = self.n_sites();
        let (d, l) = self.bidiagonal();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = d[i];
            if i + 1 < n {
                m[(i + 1, i)] = l[i];
            }
        }
        m
    }

    /// Field part of `A`: `A[2n-1, 2n] = -g_n/2`.
    pub fn field_part(&self) -> DMatrix<f64> {
        let n = self.n_sites();
        let mut a = DMatrix::zeros(2 * n, 2 * n);
        for (i, g) in self.fields.iter().enumerate() {
            a[(2 * i, 2 * i + 1)] = -0.5 * g;
            a[(2 * i + 1, 2 * i)] = 0.5 * g;
        }
        a
    }

    /// Coupling part of `A`: `A[2n, 2n+1] = -J_n/2`.
    pub fn coupling_part(&self) -> DMatrix<f64> {
        let n = self.n_sites();
        let mut a = DMatrix::zeros(2 * n, 2 * n);
        for (i, j) in self.couplings.iter().enumerate() {
            a[(2 * i + 1, 2 * i + 2)] = -0.5 * j;
            a[(2 * i + 2, 2 * i + 1)] = 0.5 * j;
        }
        a
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        self.field_part() + self.coupling_part()
    }

    /// `⟨H⟩` for a state with Majorana covariance `cov`.
    pub fn energy(&self, cov: &Covariance) -> f64 {
        let g = cov.matrix();
        let mut e = 0.0;
        for (i, j) in self.couplings.iter().enumerate() {
            e -= j * g[(2 * i + 1, 2 * i + 2)];
        }
        for (i, h) in self.fields.iter().enumerate() {
            e -= h * g[(2 * i, 2 * i + 1)];
        }
        e
    }
}

/// Builds the Majorana form from `N - 1` couplings and `N` fields.
pub fn assemble(couplings: &[f64], fields: &[f64]) -> Result<QuadraticHamiltonian> {
    if fields.is_empty() {
        return Err(Error::InvalidSize {
            n_sites: 0,
            reason: "a chain needs at least one site",
        });
    }
    if couplings.len() + 1 != fields.len() {
        return Err(Error::Shape {
            what: "couplings",
            expected: fields.len() - 1,
            got: couplings.len(),
        });
    }
    if couplings.iter().chain(fields).any(|x| !x.is_finite()) {
        return Err(Error::Domain("non-finite coupling or field".into()));
    }
    Ok(QuadraticHamiltonian {
        couplings: couplings.to_vec(),
        fields: fields.to_vec(),
    })
}

/// Canonical form `O0ᵀ A O0 = ⊕ [[0, -ε_k/2], [ε_k/2, 0]]`.
///
/// `eps` stays sorted and non-negative. When the vacuum parity has been
/// fixed by exciting the lowest mode, `flipped` is set and the lowest mode
/// enters every energy with the opposite sign.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalDiag {
    o0: DMatrix<f64>,
    eps: Vec<f64>,
    vacuum_parity: i32,
    flipped: bool,
}

impl CanonicalDiag {
    pub fn n_sites(&self) -> usize {
        self.eps.len()
    }

    pub fn o0(&self) -> &DMatrix<f64> {
        &self.o0
    }

    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    pub fn vacuum_parity(&self) -> i32 {
        self.vacuum_parity
    }

    /// True when the lowest mode has been flipped to reach a target parity.
    pub fn parity_fixed(&self) -> bool {
        self.flipped
    }

    /// Quasiparticle energies as they enter the current vacuum.
    pub fn signed_eps(&self) -> Vec<f64> {
        let mut e = self.eps.clone();
        if self.flipped {
            e[0] = -e[0];
        }
        e
    }

    pub fn ground_energy(&self) -> f64 {
        -self.signed_eps().iter().sum::<f64>()
    }

    /// Lowest two-quasiparticle excitation of the current vacuum,
    /// `2(ε_1 + ε_2)` with the signed `ε_1`.
    pub fn same_parity_gap(&self) -> Result<f64> {
        if self.n_sites() < 2 {
            return Err(Error::InvalidSize {
                n_sites: self.n_sites(),
                reason: "the two-quasiparticle gap needs two modes",
            });
        }
        let e = self.signed_eps();
        Ok(2.0 * (e[0] + e[1]))
    }

    /// Mode `k` (0-based) as its odd-site part `u` and even-site part `v`,
    /// with columns `o_{2k} = (u on odd Majoranas)` and
    /// `o_{2k+1} = (-v on even Majoranas)`.
    pub fn mode(&self, k: usize) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_sites();
        let u = (0..n).map(|i| self.o0[(2 * i, 2 * k)]).collect();
        let v = (0..n).map(|i| -self.o0[(2 * i + 1, 2 * k + 1)]).collect();
        (u, v)
    }

    /// Returns the form whose vacuum has parity `target`, exciting the lowest
    /// mode (`b_2 → -b_2`) if necessary.
    pub fn fix_parity(&self, target: i32) -> Self {
        assert!(target == 1 || target == -1, "parity must be ±1");
        let mut out = self.clone();
        if out.vacuum_parity != target {
            out.o0.column_mut(1).neg_mut();
            out.vacuum_parity = target;
            out.flipped = !out.flipped;
        }
        out
    }

    /// Covariance of the current vacuum.
    pub fn vacuum_covariance(&self) -> Covariance {
        Covariance::from_frame(&self.o0)
    }

    /// Every energy of the parity sector `parity`, ascending.
    pub fn sector_spectrum(&self, parity: i32) -> Result<Vec<f64>> {
        let n = self.n_sites();
        if n > MAX_ENUMERATED_SITES {
            return Err(Error::InvalidSize {
                n_sites: n,
                reason: "sector enumeration is limited to small chains",
            });
        }
        let e = self.signed_eps();
        let e0 = self.ground_energy();
        let mut out = Vec::with_capacity(1 << n.saturating_sub(1));
        for mask in 0u32..(1u32 << n) {
            let sign = if mask.count_ones() % 2 == 0 { 1 } else { -1 };
            if self.vacuum_parity * sign != parity {
                continue;
            }
            let extra: f64 = (0..n).filter(|k| mask >> k & 1 == 1).map(|k| 2.0 * e[k]).sum();
            out.push(e0 + extra);
        }
        out.sort_by(f64::total_cmp);
        Ok(out)
    }

    /// `‖O0ᵀ O0 - I‖_max`.
    pub fn orthogonality_error(&self) -> f64 {
        let n = self.o0.nrows();
        (self.o0.transpose() * &self.o0 - DMatrix::<f64>::identity(n, n)).amax()
    }

    /// `O0 · blockdiag(ε) · O0ᵀ`, which reproduces `A`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let n = self.n_sites();
        let e = self.signed_eps();
        let mut b = DMatrix::zeros(2 * n, 2 * n);
        for k in 0..n {
            b[(2 * k, 2 * k + 1)] = -0.5 * e[k];
            b[(2 * k + 1, 2 * k)] = 0.5 * e[k];
        }
        &self.o0 * b * self.o0.transpose()
    }
}

/// Diagonalizes `H` through the singular value decomposition of its
/// odd-even block, read off the symmetric eigenproblem of the Golub-Kahan
/// matrix `[[0, M], [Mᵀ, 0]]` (eigenvalues `±s_k`, eigenvectors
/// `(u_k, ±v_k)/√2`).
pub fn canonical_diagonalize(h: &QuadraticHamiltonian) -> Result<CanonicalDiag> {
    let n = h.n_sites();
    let m = h.bidiagonal_matrix();
    let mut t = DMatrix::zeros(2 * n, 2 * n);
    t.view_mut((0, n), (n, n)).copy_from(&m);
    t.view_mut((n, 0), (n, n)).copy_from(&m.transpose());
    let eig = SymmetricEigen::try_new(t, f64::EPSILON, 0).ok_or(Error::Diagonalization { residual: f64::NAN })?;
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let zero_tol = 1e-12 * scale;

    let mut us: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut vs: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut svals = Vec::with_capacity(n);
    // Eigenvalues near zero come in merged ± pairs whose vectors need not
    // split into odd and even parts; span both halves of the cluster instead.
    let zeros: Vec<usize> = order.iter().copied().filter(|&k| eig.eigenvalues[k].abs() <= zero_tol).collect();
    let nz = zeros.len() / 2;
    if nz > 0 {
        let odd: Vec<DVector<f64>> = zeros.iter().map(|&k| eig.eigenvectors.column(k).rows(0, n).into_owned()).collect();
        let even: Vec<DVector<f64>> = zeros.iter().map(|&k| eig.eigenvectors.column(k).rows(n, n).into_owned()).collect();
        let bu = orthonormal_span(&odd, nz);
        let bv = orthonormal_span(&even, nz);
        for k in 0..nz {
            us.push(bu[k].clone());
            vs.push(bv[k].clone());
            svals.push(0.0);
        }
    }
    for &k in order.iter().filter(|&&k| eig.eigenvalues[k] > zero_tol) {
        let x = eig.eigenvectors.column(k);
        let mut u = x.rows(0, n).into_owned();
        let mut v = x.rows(n, n).into_owned();
        u /= u.norm();
        v /= v.norm();
        svals.push(eig.eigenvalues[k]);
        us.push(u);
        vs.push(v);
    }
    if us.len() != n {
        return Err(Error::Diagonalization { residual: f64::NAN });
    }

    let mut o0 = DMatrix::zeros(2 * n, 2 * n);
    let mut residual = 0.0f64;
    for k in 0..n {
        for i in 0..n {
            o0[(2 * i, 2 * k)] = us[k][i];
            o0[(2 * i + 1, 2 * k + 1)] = -vs[k][i];
        }
        residual = residual.max((&m * &vs[k] - svals[k] * &us[k]).amax());
        residual = residual.max((m.transpose() * &us[k] - svals[k] * &vs[k]).amax());
    }
    let mut eps: Vec<f64> = svals.iter().map(|s| 2.0 * s).collect();
    let ubasis = DMatrix::from_columns(&us);
    let vbasis = DMatrix::from_columns(&vs);
    let id = DMatrix::<f64>::identity(n, n);
    residual = residual
        .max((ubasis.transpose() * &ubasis - &id).amax())
        .max((vbasis.transpose() * &vbasis - &id).amax());
    if !(residual <= 1e-10 * scale.max(1.0)) {
        return Err(Error::Diagonalization { residual });
    }
    let emax = eps.last().copied().unwrap_or(0.0);
    if eps[0] < 1e-12 * emax {
        eps[0] = 0.0;
    }
    let sign = |x: f64| if x < 0.0 { -1 } else { 1 };
    let det_sign = sign(ubasis.determinant()) * sign(vbasis.determinant());
    let vacuum_parity = if n % 2 == 0 { det_sign } else { -det_sign };
    Ok(CanonicalDiag {
        o0,
        eps,
        vacuum_parity,
        flipped: false,
    })
}

/// Orthonormal basis of the span of `vectors`, assumed to have rank `rank`
/// (modified Gram-Schmidt, largest remaining vector first).
fn orthonormal_span(vectors: &[DVector<f64>], rank: usize) -> Vec<DVector<f64>> {
    let mut pool: Vec<DVector<f64>> = vectors.to_vec();
    let mut basis = Vec::with_capacity(rank);
    for _ in 0..rank {
        let (best, _) = pool
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.norm()))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        let mut b = pool.swap_remove(best);
        b /= b.norm();
        for p in pool.iter_mut() {
            let c = b.dot(p);
            *p -= c * &b;
        }
        basis.push(b);
    }
    basis
}

pub fn vacuum_parity(diag: &CanonicalDiag) -> i32 {
    diag.vacuum_parity()
}

pub fn fix_parity(diag: &CanonicalDiag, target: i32) -> CanonicalDiag {
    diag.fix_parity(target)
}

pub fn ground_energy(diag: &CanonicalDiag) -> f64 {
    diag.ground_energy()
}

pub fn vacuum_covariance(diag: &CanonicalDiag) -> Covariance {
    diag.vacuum_covariance()
}

/// Majorana two-point function of a Gaussian state, stored as the real
/// antisymmetric `G` with `G[m, n] = ⟨i a_m a_n⟩` for `m ≠ n`. The full
/// correlation matrix is `Γ = ⟨a_m a_n⟩ = I - i G`.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariance {
    g: DMatrix<f64>,
}

impl Covariance {
    /// Covariance of the vacuum of the frame `O` (`a = O b`), i.e.
    /// `G = O Λ Oᵀ` with `Λ = ⊕ [[0, 1], [-1, 0]]`.
    pub fn from_frame(o: &DMatrix<f64>) -> Self {
        let n2 = o.ncols();
        let odd = o.columns_with_step(0, n2 / 2, 1).into_owned();
        let even = o.columns_with_step(1, n2 / 2, 1).into_owned();
        let x = &odd * even.transpose();
        let g = &x - x.transpose();
        Self { g }
    }

    pub fn from_matrix(g: DMatrix<f64>) -> Self {
        Self { g }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn n_sites(&self) -> usize {
        self.g.nrows() / 2
    }

    /// `Γ[m, n] = ⟨a_m a_n⟩` as `(re, im)`.
    pub fn gamma(&self, m: usize, n: usize) -> (f64, f64) {
        if m == n {
            (1.0, 0.0)
        } else {
            (0.0, -self.g[(m, n)])
        }
    }

    /// `⟨σᶻ_n⟩` for 1-based site `n`.
    pub fn sigma_z(&self, site: usize) -> f64 {
        self.g[(2 * site - 2, 2 * site - 1)]
    }

    /// `⟨σˣ_n σˣ_{n+1}⟩` for 1-based bond `n`.
    pub fn bond_xx(&self, bond: usize) -> f64 {
        self.g[(2 * bond - 1, 2 * bond)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::{sample_couplings, CouplingKind};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(n: usize, seed: u64) -> QuadraticHamiltonian {
        let c = sample_couplings(n, seed, CouplingKind::Disordered).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xf1e1d);
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..3.0)).collect();
        assemble(&c.couplings, &g).unwrap()
    }

    #[test]
    fn single_site_blocks() {
        let h = assemble(&[], &[3.0]).unwrap();
        let a = h.matrix();
        assert_eq!(a[(0, 1)], -1.5);
        assert_eq!(a[(1, 0)], 1.5);
        let d = canonical_diagonalize(&h).unwrap();
        assert_eq!(d.eps(), &[3.0]);
        assert_eq!(d.vacuum_parity(), 1);
        assert_eq!(d.ground_energy(), -3.0);
        let cov = d.vacuum_covariance();
        assert!((cov.sigma_z(1) - 1.0).abs() < 1e-15);
        assert_eq!(cov.gamma(0, 0), (1.0, 0.0));
    }

    #[test]
    fn pure_coupling_pair() {
        let h = assemble(&[1.0], &[0.0, 0.0]).unwrap();
        let a = h.matrix();
        for i in 0..4 {
            for j in 0..4 {
                let want = match (i, j) {
                    (1, 2) => -0.5,
                    (2, 1) => 0.5,
                    _ => 0.0,
                };
                assert_eq!(a[(i, j)], want);
            }
        }
        let d = canonical_diagonalize(&h).unwrap();
        assert!(d.eps()[0].abs() < 1e-15);
        assert!((d.eps()[1] - 1.0).abs() < 1e-14);
        assert!((d.ground_energy() + 1.0).abs() < 1e-14);
        assert!((d.same_parity_gap().unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn deep_paramagnet_pair_is_even() {
        let h = assemble(&[1.0], &[3.0, 3.0]).unwrap();
        let d = canonical_diagonalize(&h).unwrap();
        assert_eq!(d.vacuum_parity(), 1);
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(assemble(&[1.0, 1.0], &[1.0, 1.0]), Err(Error::Shape { .. })));
        assert!(matches!(assemble(&[], &[]), Err(Error::InvalidSize { .. })));
    }

    #[test]
    fn parity_follows_sign_of_field_product() {
        // With every g_n ≠ 0, det M = Π(-g_n/2) so the vacuum parity is the
        // sign of Π g_n.
        for seed in 0..20 {
            let n = 2 + seed as usize % 7;
            let c = sample_couplings(n, seed, CouplingKind::Disordered).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let d = canonical_diagonalize(&assemble(&c.couplings, &g).unwrap()).unwrap();
            let want = if g.iter().product::<f64>() > 0.0 { 1 } else { -1 };
            assert_eq!(d.vacuum_parity(), want);
        }
    }

    #[test]
    fn fix_parity_cases() {
        let d = canonical_diagonalize(&random_instance(4, 3)).unwrap();
        let p = d.vacuum_parity();
        assert_eq!(d.fix_parity(p), d);
        let f = d.fix_parity(-p);
        assert_eq!(f.vacuum_parity(), -p);
        assert!(f.parity_fixed());
        assert!(f.orthogonality_error() < 1e-12);
        assert_eq!(f.fix_parity(-p), f);
        assert!((f.ground_energy() - (d.ground_energy() + 2.0 * d.eps()[0])).abs() < 1e-12);
        let back = f.fix_parity(p);
        assert_eq!(back, d);
    }

    proptest! {
        #[test]
        fn canonical_form_invariants(n in 1usize..12, seed in 0u64..1000) {
            let h = random_instance(n.max(2), seed);
            let d = canonical_diagonalize(&h).unwrap();
            prop_assert!(d.orthogonality_error() < 1e-10);
            prop_assert!(d.eps().windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(d.eps()[0] >= -1e-12);
            let a = h.matrix();
            prop_assert!((d.reconstruct() - &a).amax() < 1e-10);
            let blocks = d.o0().transpose() * &a * d.o0();
            for i in 0..blocks.nrows() {
                for j in 0..blocks.ncols() {
                    let want = if i / 2 == j / 2 && i != j {
                        let e = d.eps()[i / 2];
                        if i < j { -0.5 * e } else { 0.5 * e }
                    } else {
                        0.0
                    };
                    prop_assert!((blocks[(i, j)] - want).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn covariance_is_antisymmetric_with_unit_diagonal(n in 2usize..10, seed in 0u64..1000) {
            let d = canonical_diagonalize(&random_instance(n, seed)).unwrap();
            let g = d.vacuum_covariance();
            let m = g.matrix();
            prop_assert!((m + m.transpose()).amax() < 1e-13);
            for i in 0..2 * n {
                prop_assert_eq!(g.gamma(i, i), (1.0, 0.0));
                prop_assert!(m[(i, i)] == 0.0);
            }
            // Pure Gaussian state: G² = -I.
            let sq = m * m + DMatrix::<f64>::identity(2 * n, 2 * n);
            prop_assert!(sq.amax() < 1e-10);
            prop_assert!((h_energy(&d, n, seed) - d.ground_energy()).abs() < 1e-10);
        }

        #[test]
        fn parity_fix_round_trip(n in 2usize..10, seed in 0u64..1000) {
            let d = canonical_diagonalize(&random_instance(n, seed)).unwrap();
            let r = d.fix_parity(1).fix_parity(-1).fix_parity(1);
            prop_assert!((r.o0().abs() - d.fix_parity(1).o0().abs()).amax() == 0.0);
            prop_assert_eq!(r.vacuum_parity(), 1);
        }
    }

    fn h_energy(d: &CanonicalDiag, n: usize, seed: u64) -> f64 {
        random_instance(n, seed).energy(&d.vacuum_covariance())
    }
}

//! Small dense and tridiagonal kernels that nalgebra does not provide.

use nalgebra::DMatrix;

/// Pfaffian of a real antisymmetric matrix by Parlett-Reid elimination with
/// row/column pivoting. Odd dimension gives zero.
pub fn pfaffian(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "pfaffian needs a square matrix");
    if n % 2 == 1 {
        return 0.0;
    }
    let mut a = a.clone();
    let mut pf = 1.0;
    let mut k = 0;
    while k + 1 < n {
        let mut kp = k + 1;
        let mut best = a[(k + 1, k)].abs();
        for i in k + 2..n {
            let v = a[(i, k)].abs();
            if v > best {
                best = v;
                kp = i;
            }
        }
        if kp != k + 1 {
            a.swap_rows(k + 1, kp);
            a.swap_columns(k + 1, kp);
            pf = -pf;
        }
        let piv = a[(k, k + 1)];
        if piv == 0.0 {
            return 0.0;
        }
        pf *= piv;
        if k + 2 < n {
            let tau: Vec<f64> = (k + 2..n).map(|j| a[(k, j)] / piv).collect();
            let col: Vec<f64> = (k + 2..n).map(|i| a[(i, k + 1)]).collect();
            for (ii, i) in (k + 2..n).enumerate() {
                for (jj, j) in (k + 2..n).enumerate() {
                    a[(i, j)] += tau[ii] * col[jj] - col[ii] * tau[jj];
                }
            }
        }
        k += 2;
    }
    pf
}

/// Real number stored as `m * exp(ln)` so long products neither overflow nor
/// underflow. Only the operations the adjugate sign needs are provided.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogScaled {
    m: f64,
    ln: f64,
}

impl LogScaled {
    pub const ZERO: Self = Self { m: 0.0, ln: 0.0 };

    pub fn from_f64(x: f64) -> Self {
        Self { m: x, ln: 0.0 }.normalized()
    }

    fn normalized(self) -> Self {
        if self.m == 0.0 || !self.m.is_finite() {
            return Self { m: self.m, ln: 0.0 };
        }
        let a = self.m.abs();
        if (1e-100..=1e100).contains(&a) {
            return self;
        }
        let l = a.ln();
        Self {
            m: self.m.signum(),
            ln: self.ln + l,
        }
    }

    pub fn mul(self, x: f64) -> Self {
        if self.m == 0.0 || x == 0.0 {
            return Self::ZERO;
        }
        Self {
            m: self.m * x,
            ln: self.ln,
        }
        .normalized()
    }

    pub fn mul_scaled(self, o: Self) -> Self {
        if self.m == 0.0 || o.m == 0.0 {
            return Self::ZERO;
        }
        Self {
            m: self.m * o.m,
            ln: self.ln + o.ln,
        }
        .normalized()
    }

    pub fn add(self, o: Self) -> Self {
        if o.m == 0.0 {
            return self;
        }
        if self.m == 0.0 {
            return o;
        }
        let (big, small) = if self.ln >= o.ln { (self, o) } else { (o, self) };
        let w = (small.ln - big.ln).exp();
        Self {
            m: big.m + small.m * w,
            ln: big.ln,
        }
        .normalized()
    }

    pub fn neg(self) -> Self {
        Self {
            m: -self.m,
            ln: self.ln,
        }
    }

    pub fn signum(self) -> f64 {
        if self.m == 0.0 {
            0.0
        } else {
            self.m.signum()
        }
    }

    /// Natural log of the magnitude (`-inf` for zero).
    pub fn ln_abs(self) -> f64 {
        if self.m == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.ln + self.m.abs().ln()
        }
    }
}

/// Symmetric tridiagonal matrix with zero diagonal, given by its
/// off-diagonal `e` (length `n - 1`).
#[derive(Debug, Clone)]
pub struct ZeroDiagTridiagonal {
    e: Vec<f64>,
    e2: Vec<f64>,
    norm: f64,
    pivmin: f64,
}

impl ZeroDiagTridiagonal {
    pub fn new(e: Vec<f64>) -> Self {
        let e2: Vec<f64> = e.iter().map(|x| x * x).collect();
        let mut norm = 0.0f64;
        for i in 0..=e.len() {
            let left = if i > 0 { e[i - 1].abs() } else { 0.0 };
            let right = if i < e.len() { e[i].abs() } else { 0.0 };
            norm = norm.max(left + right);
        }
        let emax2 = e2.iter().cloned().fold(0.0, f64::max);
        let pivmin = (f64::MIN_POSITIVE * emax2.max(1.0)).max(f64::MIN_POSITIVE);
        Self { e, e2, norm, pivmin }
    }

    pub fn dim(&self) -> usize {
        self.e.len() + 1
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        self.norm
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let mut q = -x;
        if q.abs() < self.pivmin {
            q = -self.pivmin;
        }
        let mut count = usize::from(q < 0.0);
        for &e2 in &self.e2 {
            q = -x - e2 / q;
            if q.abs() < self.pivmin {
                q = -self.pivmin;
            }
            count += usize::from(q < 0.0);
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection. Zero-diagonal
    /// Sturm sequences resolve small eigenvalues to high relative accuracy;
    /// `abs_floor` stops the descent towards an exact zero.
    pub fn eigenvalue(&self, k: usize, abs_floor: f64) -> f64 {
        let n = self.dim();
        assert!(k < n);
        let mut lo = -self.norm - self.pivmin;
        let mut hi = self.norm + self.pivmin;
        // The spectrum is symmetric: search the upper half directly.
        if 2 * k >= n && self.count_below(0.0) <= k {
            lo = 0.0;
        }
        for _ in 0..4000 {
            let width = hi - lo;
            let scale = lo.abs().max(hi.abs());
            if width <= 2.0 * f64::EPSILON * scale || width <= abs_floor {
                break;
            }
            // Geometric steps keep the relative accuracy cheap for
            // eigenvalues many orders of magnitude below the norm.
            let mid = if lo == 0.0 && hi > 0.0 {
                (1e-3 * hi).max(abs_floor)
            } else if lo > 0.0 && hi > 1e3 * lo {
                (hi * lo).sqrt()
            } else {
                0.5 * (lo + hi)
            };
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Eigenvector for the eigenvalue approximation `lambda` by inverse
    /// iteration, starting from `start`.
    pub fn inverse_iteration(&self, lambda: f64, start: &[f64], iterations: usize) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(start.len(), n);
        let tiny = f64::EPSILON * self.norm.max(f64::MIN_POSITIVE);
        let factor = TridiagLu::factor(&self.e, lambda, tiny);
        let mut x = start.to_vec();
        normalize(&mut x);
        for _ in 0..iterations {
            factor.solve(&mut x);
            if normalize(&mut x) == 0.0 {
                break;
            }
        }
        x
    }
}

fn normalize(x: &mut [f64]) -> f64 {
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return 0.0;
    }
    for v in x.iter_mut() {
        *v /= scale;
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in x.iter_mut() {
        *v /= norm;
    }
    norm * scale
}

/// LU factorization with partial pivoting of `T - lambda I` for a
/// zero-diagonal symmetric tridiagonal `T`; the upper factor has two
/// super-diagonals.
struct TridiagLu {
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    mult: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagLu {
    fn factor(e: &[f64], lambda: f64, tiny: f64) -> Self {
        let n = e.len() + 1;
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut mult = vec![0.0; n];
        let mut swapped = vec![false; n];
        // Working row i holds (diag, super, super2).
        let mut d = -lambda;
        let mut s = if n > 1 { e[0] } else { 0.0 };
        let mut s2 = 0.0;
        for i in 0..n - 1 {
            let sub = e[i];
            let next_d = -lambda;
            let next_s = if i + 1 < n - 1 { e[i + 1] } else { 0.0 };
            if sub.abs() > d.abs() {
                // Swap the working row with row i + 1.
                swapped[i] = true;
                u0[i] = sub;
                u1[i] = next_d;
                u2[i] = next_s;
                let m = d / sub;
                mult[i] = m;
                d = s - m * next_d;
                s = s2 - m * next_s;
                s2 = 0.0;
            } else {
                let piv = if d == 0.0 { tiny } else { d };
                u0[i] = piv;
                u1[i] = s;
                u2[i] = s2;
                let m = sub / piv;
                mult[i] = m;
                d = next_d - m * s;
                s = next_s;
                s2 = 0.0;
            }
        }
        u0[n - 1] = if d.abs() < tiny { tiny.copysign(d) } else { d };
        Self {
            u0,
            u1,
            u2,
            mult,
            swapped,
        }
    }

    fn solve(&self, x: &mut [f64]) {
        let n = x.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                x.swap(i, i + 1);
            }
            x[i + 1] -= self.mult[i] * x[i];
        }
        for i in (0..n).rev() {
            let mut r = x[i];
            if i + 1 < n {
                r -= self.u1[i] * x[i + 1];
            }
            if i + 2 < n {
                r -= self.u2[i] * x[i + 2];
            }
            x[i] = r / self.u0[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_antisym(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let v: f64 = rng.gen_range(-1.0..1.0);
                a[(i, j)] = v;
                a[(j, i)] = -v;
            }
        }
        a
    }

    #[test]
    fn pfaffian_small_cases() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 2.5, -2.5, 0.0]);
        assert_eq!(pfaffian(&a), 2.5);
        // Pf of 4x4 = a12 a34 - a13 a24 + a14 a23
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[0.0, 1.0, 2.0, 3.0, -1.0, 0.0, 4.0, 5.0, -2.0, -4.0, 0.0, 6.0, -3.0, -5.0, -6.0, 0.0],
        );
        assert!((pfaffian(&a) - (6.0 - 10.0 + 12.0)).abs() < 1e-12);
        assert_eq!(pfaffian(&DMatrix::zeros(3, 3)), 0.0);
    }

    #[test]
    fn pfaffian_squares_to_determinant() {
        for seed in 0..10 {
            let n = 2 + 2 * (seed as usize % 5);
            let a = random_antisym(n, seed);
            let pf = pfaffian(&a);
            let det = a.clone().determinant();
            assert!((pf * pf - det).abs() < 1e-9 * det.abs().max(1.0));
        }
    }

    #[test]
    fn log_scaled_survives_long_products() {
        let mut x = LogScaled::from_f64(1.0);
        for _ in 0..2000 {
            x = x.mul(0.25);
        }
        assert_eq!(x.signum(), 1.0);
        assert!((x.ln_abs() - 2000.0 * 0.25f64.ln()).abs() < 1e-9);
        let y = x.neg().add(x.mul(2.0));
        assert!((y.ln_abs() - x.ln_abs()).abs() < 1e-9);
        assert_eq!(x.add(x.neg()).signum(), 0.0);
    }

    fn dense(e: &[f64]) -> DMatrix<f64> {
        let n = e.len() + 1;
        let mut t = DMatrix::zeros(n, n);
        for (i, &v) in e.iter().enumerate() {
            t[(i, i + 1)] = v;
            t[(i + 1, i)] = v;
        }
        t
    }

    proptest! {
        #[test]
        fn bisection_matches_dense_eigensolver(e in prop::collection::vec(-2.0f64..2.0, 1..24)) {
            let t = ZeroDiagTridiagonal::new(e.clone());
            let mut ev: Vec<f64> = SymmetricEigen::new(dense(&e)).eigenvalues.iter().cloned().collect();
            ev.sort_by(f64::total_cmp);
            for (k, &want) in ev.iter().enumerate() {
                let got = t.eigenvalue(k, 0.0);
                prop_assert!((got - want).abs() < 1e-12, "k={} got={} want={}", k, got, want);
            }
        }

        #[test]
        fn inverse_iteration_gives_eigenvectors(e in prop::collection::vec(0.1f64..2.0, 3..30)) {
            let t = ZeroDiagTridiagonal::new(e.clone());
            let n = t.dim();
            let k = n / 2 + n % 2;
            let lambda = t.eigenvalue(k, 0.0);
            let start: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
            let x = t.inverse_iteration(lambda, &start, 3);
            let m = dense(&e);
            let xv = nalgebra::DVector::from_vec(x);
            let r = &m * &xv - lambda * &xv;
            prop_assert!(r.amax() < 1e-10);
        }
    }

    #[test]
    fn tiny_eigenvalue_has_relative_accuracy() {
        // Bidiagonal with diagonal 0.1 and off-diagonal 1: the smallest
        // singular value is about 0.1^21.
        let mut e = Vec::new();
        for i in 0..41 {
            e.push(if i % 2 == 0 { 0.1 } else { 1.0 });
        }
        let t = ZeroDiagTridiagonal::new(e);
        let n = t.dim();
        let s = t.eigenvalue(n / 2, 1e-300);
        assert!(s > 0.0 && s < 1e-18, "{s}");
        let ratio = s / t.eigenvalue(n / 2, 1e-300);
        assert_eq!(ratio, 1.0);
    }
}

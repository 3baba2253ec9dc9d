//! Symmetric banded and tridiagonal eigenproblems.
//!
//! Only the lowest few eigenpairs are ever needed, so the banded matrix is
//! reduced to tridiagonal form with Givens rotations, eigenvalues are isolated
//! by Sturm bisection and eigenvectors recovered by inverse iteration.

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix: `diag[i]` and `off[i] = A[i+1][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(Error::InvalidInput(format!(
                "tridiagonal with {} diagonal and {} off-diagonal entries",
                diag.len(),
                off.len()
            )));
        }
        Ok(Self { diag, off })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let (lo, hi) = self.gershgorin();
        let tiny = f64::MIN_POSITIVE.max(f64::EPSILON * (hi - lo).abs() * 1e-3);
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.len() {
            if q == 0.0 {
                q = tiny;
            }
            q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / q;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The k-th smallest eigenvalue (k = 0 is the lowest), by bisection.
    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        if k >= self.len() {
            return Err(Error::Eigensolve(format!("eigenvalue index {k} out of range")));
        }
        let (mut lo, mut hi) = self.gershgorin();
        let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        lo -= 1e-12 * scale;
        hi += 1e-12 * scale;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi || hi - lo <= 4.0 * f64::EPSILON * scale {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Solves (T − σI)x = b by Gaussian elimination with partial pivoting.
    fn shifted_solve(&self, sigma: f64, b: &mut [f64]) {
        let n = self.len();
        if n == 1 {
            let d = self.diag[0] - sigma;
            b[0] /= if d == 0.0 { f64::EPSILON } else { d };
            return;
        }
        // Upper factor rows: u0 (diag), u1, u2 (two superdiagonals).
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let (lo, hi) = self.gershgorin();
        let eps = f64::EPSILON * (hi - lo).abs().max(f64::MIN_POSITIVE);
        // current row being eliminated: (d, e, 0) plus incoming row
        let mut d = self.diag[0] - sigma;
        let mut e = self.off[0];
        let mut f = 0.0;
        for i in 0..n - 1 {
            let sub = self.off[i];
            let nd = self.diag[i + 1] - sigma;
            let ne = if i + 1 < n - 1 { self.off[i + 1] } else { 0.0 };
            if sub.abs() > d.abs() {
                // swap rows i and i+1
                u0[i] = sub;
                u1[i] = nd;
                u2[i] = ne;
                let m = d / sub;
                d = e - m * nd;
                e = f - m * ne;
                f = 0.0;
                b.swap(i, i + 1);
                b[i + 1] -= m * b[i];
            } else {
                let piv = if d == 0.0 { eps } else { d };
                u0[i] = piv;
                u1[i] = e;
                u2[i] = f;
                let m = sub / piv;
                d = nd - m * e;
                e = ne - m * f;
                f = 0.0;
                b[i + 1] -= m * b[i];
            }
        }
        u0[n - 1] = if d == 0.0 { eps } else { d };
        for i in (0..n).rev() {
            let mut s = b[i];
            if i + 1 < n {
                s -= u1[i] * b[i + 1];
            }
            if i + 2 < n {
                s -= u2[i] * b[i + 2];
            }
            b[i] = s / u0[i];
        }
    }

    /// Unit eigenvector for eigenvalue `lambda`, orthogonalised against
    /// `previous` (needed for close eigenvalues).
    pub fn eigenvector(&self, lambda: f64, previous: &[Vec<f64>]) -> Vec<f64> {
        let n = self.len();
        let (lo, hi) = self.gershgorin();
        let sigma = lambda + 1e-14 * (hi - lo).abs().max(lambda.abs());
        // deterministic start vector with no special symmetry
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7 + 3) % 11) as f64).collect();
        for _ in 0..4 {
            for p in previous {
                let dot: f64 = x.iter().zip(p).map(|(a, b)| a * b).sum();
                for (xi, pi) in x.iter_mut().zip(p) {
                    *xi -= dot * pi;
                }
            }
            let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in &mut x {
                *v /= nrm;
            }
            self.shifted_solve(sigma, &mut x);
        }
        for _ in 0..2 {
            for p in previous {
                let dot: f64 = x.iter().zip(p).map(|(a, b)| a * b).sum();
                for (xi, pi) in x.iter_mut().zip(p) {
                    *xi -= dot * pi;
                }
            }
        }
        let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut x {
            *v /= nrm;
        }
        x
    }

    /// Lowest `count` eigenpairs, ascending.
    pub fn lowest(&self, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        if count > self.len() {
            return Err(Error::Eigensolve(format!(
                "requested {count} eigenpairs of a {}x{} matrix",
                self.len(),
                self.len()
            )));
        }
        let mut vals: Vec<f64> = Vec::with_capacity(count);
        let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(count);
        for k in 0..count {
            let lam = self.eigenvalue(k)?;
            // only orthogonalise against vectors of nearby eigenvalues
            let (lo, hi) = self.gershgorin();
            let gap_tol = 1e-8 * (hi - lo).abs();
            let near: Vec<Vec<f64>> = vals
                .iter()
                .zip(&vecs)
                .filter(|(v, _)| (lam - **v).abs() < gap_tol)
                .map(|(_, x)| x.clone())
                .collect();
            let v = self.eigenvector(lam, &near);
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Eigensolve("non-finite eigenvector".into()));
            }
            vals.push(lam);
            vecs.push(v);
        }
        Ok((vals, vecs))
    }
}

/// Symmetric matrix with half-bandwidth 2, stored as three lower diagonals:
/// `bands[d][i] = A[i+d][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pentadiagonal {
    pub bands: [Vec<f64>; 3],
}

impl Pentadiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            bands: [vec![0.0; n], vec![0.0; n.saturating_sub(1)], vec![0.0; n.saturating_sub(2)]],
        }
    }

    pub fn len(&self) -> usize {
        self.bands[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands[0].is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let d = r - c;
        if d > 2 {
            0.0
        } else {
            self.bands[d][c]
        }
    }

    /// Reduces to tridiagonal form `T = Q A Qᵀ` and returns T with the
    /// rotations composing Q.
    pub fn tridiagonalize(&self) -> (Tridiagonal, Vec<Rotation>) {
        let n = self.len();
        let mut w = Band4::from(self);
        let mut rots = Vec::new();
        if n >= 3 {
            for i in 0..n - 2 {
                // zero A[i+2][i] with rows (i+1, i+2), then chase the bulge
                // that lands at A[p+3][p].
                let mut p = i + 1;
                let mut col = i;
                loop {
                    let target = w.get(p + 1, col);
                    if target != 0.0 {
                        let pivot = w.get(p, col);
                        let r = pivot.hypot(target);
                        let rot = Rotation {
                            p,
                            c: pivot / r,
                            s: target / r,
                        };
                        w.rotate(&rot);
                        w.set(p + 1, col, 0.0);
                        rots.push(rot);
                    }
                    // bulge from this rotation sits at (p+3, p)
                    if p + 3 < n && w.get(p + 3, p) != 0.0 {
                        col = p;
                        p += 2;
                    } else {
                        break;
                    }
                }
            }
        }
        let t = Tridiagonal {
            diag: w.d[0].clone(),
            off: w.d[1].clone(),
        };
        (t, rots)
    }

    /// Lowest `count` eigenpairs, ascending, with unit eigenvectors.
    pub fn lowest(&self, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        if self.is_empty() {
            return Err(Error::Eigensolve("empty matrix".into()));
        }
        let (t, rots) = self.tridiagonalize();
        let (vals, mut vecs) = t.lowest(count)?;
        for v in &mut vecs {
            for r in rots.iter().rev() {
                r.apply_transpose(v);
            }
        }
        Ok((vals, vecs))
    }
}

/// Plane rotation acting on coordinates (p, p+1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    pub p: usize,
    pub c: f64,
    pub s: f64,
}

impl Rotation {
    fn apply_transpose(&self, v: &mut [f64]) {
        let (a, b) = (v[self.p], v[self.p + 1]);
        v[self.p] = self.c * a - self.s * b;
        v[self.p + 1] = self.s * a + self.c * b;
    }
}

/// Working storage with room for one extra diagonal (the bulge).
struct Band4 {
    n: usize,
    d: [Vec<f64>; 4],
}

impl Band4 {
    fn from(a: &Pentadiagonal) -> Self {
        let n = a.len();
        let mut d3 = vec![0.0; n.saturating_sub(3)];
        d3.shrink_to_fit();
        Self {
            n,
            d: [a.bands[0].clone(), a.bands[1].clone(), a.bands[2].clone(), d3],
        }
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if r >= self.n || r - c > 3 {
            0.0
        } else {
            self.d[r - c][c]
        }
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(r - c <= 3, "fill outside working band");
        if r - c <= 3 {
            self.d[r - c][c] = v;
        }
    }

    /// A ← G A Gᵀ with G mixing rows/columns p and p+1.
    fn rotate(&mut self, g: &Rotation) {
        let (p, q) = (g.p, g.p + 1);
        let (c, s) = (g.c, g.s);
        let lo = p.saturating_sub(3);
        let hi = (q + 3).min(self.n - 1);
        for j in lo..=hi {
            if j == p || j == q {
                continue;
            }
            let a = self.get(p, j);
            let b = self.get(q, j);
            if a == 0.0 && b == 0.0 {
                continue;
            }
            self.set(p, j, c * a + s * b);
            self.set(q, j, -s * a + c * b);
        }
        let app = self.get(p, p);
        let aqq = self.get(q, q);
        let apq = self.get(p, q);
        self.set(p, p, c * c * app + 2.0 * c * s * apq + s * s * aqq);
        self.set(q, q, s * s * app - 2.0 * c * s * apq + c * c * aqq);
        self.set(p, q, (c * c - s * s) * apq + c * s * (aqq - app));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, SymmetricEigen};
    use proptest::prelude::*;

    fn dense(a: &Pentadiagonal) -> DMatrix<f64> {
        let n = a.len();
        DMatrix::from_fn(n, n, |i, j| a.get(i, j))
    }

    fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
        let e = SymmetricEigen::new(m);
        let mut idx: Vec<usize> = (0..e.eigenvalues.len()).collect();
        idx.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
        let vals = idx.iter().map(|&i| e.eigenvalues[i]).collect();
        let vecs = DMatrix::from_fn(e.eigenvectors.nrows(), idx.len(), |r, c| e.eigenvectors[(r, idx[c])]);
        (vals, vecs)
    }

    fn pseudo_random(n: usize, seed: u64) -> Pentadiagonal {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut a = Pentadiagonal::zeros(n);
        for d in 0..3 {
            for v in a.bands[d].iter_mut() {
                *v = next() * if d == 0 { 4.0 } else { 1.0 };
            }
        }
        a
    }

    #[test]
    fn tridiagonal_matches_dense() {
        let t = Tridiagonal::new(vec![2.0, -1.0, 0.5, 3.0, 1.0], vec![0.3, -0.7, 1.1, 0.2]).unwrap();
        let m = DMatrix::from_fn(5, 5, |i, j| {
            if i == j {
                t.diag[i]
            } else if i == j + 1 {
                t.off[j]
            } else if j == i + 1 {
                t.off[i]
            } else {
                0.0
            }
        });
        let (expect, _) = sorted_eigen(m.clone());
        let (vals, vecs) = t.lowest(5).unwrap();
        for k in 0..5 {
            assert!((vals[k] - expect[k]).abs() < 1e-13);
            let v = nalgebra::DVector::from_vec(vecs[k].clone());
            let r = &m * &v - &v * vals[k];
            assert!(r.norm() < 1e-11);
        }
    }

    #[test]
    fn pentadiagonal_matches_dense() {
        for (n, seed) in [(1, 1), (2, 2), (3, 3), (7, 4), (40, 5), (201, 6)] {
            let a = pseudo_random(n, seed);
            let m = dense(&a);
            let (expect, evecs) = sorted_eigen(m.clone());
            let k = n.min(6);
            let (vals, vecs) = a.lowest(k).unwrap();
            for i in 0..k {
                assert!((vals[i] - expect[i]).abs() < 1e-11, "n={n} i={i}");
                let v = nalgebra::DVector::from_vec(vecs[i].clone());
                assert!((v.norm() - 1.0).abs() < 1e-12);
                assert!((&m * &v - &v * vals[i]).norm() < 1e-9, "n={n} i={i}");
                let overlap = v.dot(&evecs.column(i)).abs();
                assert!((overlap - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn tridiagonal_form_is_similar() {
        let a = pseudo_random(30, 9);
        let (t, rots) = a.tridiagonalize();
        // Reassemble A = Qᵀ T Q column by column and compare.
        let n = a.len();
        let m = dense(&a);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            // x = Q e_j
            for r in &rots {
                let (x, y) = (e[r.p], e[r.p + 1]);
                e[r.p] = r.c * x + r.s * y;
                e[r.p + 1] = -r.s * x + r.c * y;
            }
            let mut te = vec![0.0; n];
            for i in 0..n {
                te[i] = t.diag[i] * e[i];
                if i > 0 {
                    te[i] += t.off[i - 1] * e[i - 1];
                }
                if i + 1 < n {
                    te[i] += t.off[i] * e[i + 1];
                }
            }
            for r in rots.iter().rev() {
                r.apply_transpose(&mut te);
            }
            for i in 0..n {
                assert!((te[i] - m[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_diagonal() {
        let mut a = Pentadiagonal::zeros(6);
        a.bands[0].copy_from_slice(&[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let (vals, vecs) = a.lowest(4).unwrap();
        assert_eq!(vals.len(), 4);
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
        let dot: f64 = vecs[0].iter().zip(&vecs[1]).map(|(x, y)| x * y).sum();
        assert!(dot.abs() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn lowest_eigenvalues_agree(seed in 0u64..10_000, n in 3usize..60) {
            let a = pseudo_random(n, seed);
            let (expect, _) = sorted_eigen(dense(&a));
            let (vals, _) = a.lowest(3).unwrap();
            for i in 0..3 {
                prop_assert!((vals[i] - expect[i]).abs() < 1e-11);
            }
        }
    }
}

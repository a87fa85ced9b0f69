//! Banded LU factorization with partial pivoting, and finite-difference
//! weights on arbitrary stencils.

use crate::error::{Error, Result};

/// LU factors of an `n × n` matrix with `kl` sub- and `ku` super-diagonals.
///
/// Row `i` stores columns `i − kl ..= i + kl + ku`; the extra `kl` upper
/// diagonals absorb fill-in from row interchanges.
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    a: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    /// Factors the matrix whose entries are given by `entry(i, j)`; only
    /// entries with `−kl ≤ j − i ≤ ku` are queried.
    pub fn factor(n: usize, kl: usize, ku: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let width = 2 * kl + ku + 1;
        let mut lu = BandedLu {
            n,
            kl,
            ku,
            width,
            a: vec![0.0; n * width],
            pivots: vec![0; n],
        };
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n.saturating_sub(1)) {
                let k = lu.slot(i, j);
                lu.a[k] = entry(i, j);
            }
        }
        lu.eliminate()?;
        Ok(lu)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width + (j + self.kl - i)
    }

    fn eliminate(&mut self) -> Result<()> {
        let n = self.n;
        let upper = self.kl + self.ku;
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.a[self.slot(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.a[self.slot(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular(k));
            }
            self.pivots[k] = p;
            let last_col = (k + upper).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let (s, t) = (self.slot(k, j), self.slot(p, j));
                    self.a.swap(s, t);
                }
            }
            let pivot = self.a[self.slot(k, k)];
            for i in k + 1..=last_row {
                let sik = self.slot(i, k);
                let l = self.a[sik] / pivot;
                self.a[sik] = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let (sij, skj) = (self.slot(i, j), self.slot(k, j));
                        self.a[sij] -= l * self.a[skj];
                    }
                }
            }
        }
        Ok(())
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n, "right-hand side length");
        let n = self.n;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + self.kl).min(n - 1) {
                    b[i] -= self.a[self.slot(i, k)] * bk;
                }
            }
        }
        let upper = self.kl + self.ku;
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + upper).min(n - 1) {
                s -= self.a[self.slot(i, j)] * b[j];
            }
            b[i] = s / self.a[self.slot(i, i)];
        }
    }
}

/// Weights `w` with `Σ w_j f(x₀ + offsets_j h) ≈ h^m f⁽ᵐ⁾(x₀)` (Fornberg's recursion).
pub fn fd_weights(offsets: &[f64], m: usize) -> Vec<f64> {
    let n = offsets.len();
    assert!(m < n, "need more stencil points than the derivative order");
    // c[j][k]: weight of node j for derivative k.
    let mut c = vec![vec![0.0; m + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    for i in 1..n {
        let mut c2 = 1.0;
        for j in 0..i {
            let c3 = offsets[i] - offsets[j];
            c2 *= c3;
            for k in (0..=m.min(i)).rev() {
                let prev_i = if k > 0 { c[i - 1][k - 1] } else { 0.0 };
                let prev_j = if k > 0 { c[j][k - 1] } else { 0.0 };
                if j == i - 1 {
                    c[i][k] = c1 * (k as f64 * prev_i - offsets[i - 1] * c[i - 1][k]) / c2;
                }
                c[j][k] = (offsets[i] * c[j][k] - k as f64 * prev_j) / c3;
            }
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_weights() {
        let w = fd_weights(&[-1.0, 0.0, 1.0], 2);
        assert_eq!(w, vec![1.0, -2.0, 1.0]);
        let w = fd_weights(&[-2.0, -1.0, 0.0, 1.0, 2.0], 3);
        let expected = [-0.5, 1.0, 0.0, -1.0, 0.5];
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14, "{w:?}");
        }
    }

    #[test]
    fn one_sided_third_derivative_is_exact_on_quartics() {
        let offsets = [-1.0, 0.0, 1.0, 2.0, 3.0];
        let w = fd_weights(&offsets, 3);
        let h = 0.1;
        let x0 = 0.4;
        // f = x⁴ − x³, f''' = 24x − 6
        let f = |x: f64| x.powi(4) - x.powi(3);
        let approx: f64 = offsets
            .iter()
            .zip(&w)
            .map(|(o, w)| w * f(x0 + o * h))
            .sum::<f64>()
            / h.powi(3);
        assert!((approx - (24.0 * x0 - 6.0)).abs() < 1e-9, "{approx}");
    }

    #[test]
    fn banded_solve_matches_dense_with_pivoting() {
        let n = 9;
        // Small diagonal forces row interchanges.
        let entry = |i: usize, j: usize| -> f64 {
            let d = j as isize - i as isize;
            match d {
                0 => 1e-3 + i as f64 * 0.01,
                -2..=3 => (1 + i + 2 * j) as f64 * if d % 2 == 0 { 1.0 } else { -0.7 },
                _ => 0.0,
            }
        };
        let lu = BandedLu::factor(n, 2, 3, entry).unwrap();
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| entry(i, j) * x[j]).sum())
            .collect();
        lu.solve(&mut b);
        for (a, e) in b.iter().zip(&x) {
            assert!((a - e).abs() < 1e-10, "{a} vs {e}");
        }
    }

    #[test]
    fn singular_is_reported() {
        let r = BandedLu::factor(3, 1, 1, |i, j| if i == 1 || j == 1 { 0.0 } else { 1.0 });
        assert!(matches!(r, Err(Error::Singular(_))));
    }
}

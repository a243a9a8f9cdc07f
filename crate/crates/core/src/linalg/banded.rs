#![allow(clippy::needless_range_loop)]

use super::DenseLu;
use crate::error::{Error, Result};

/// LU with partial pivoting of a (non-periodic) band matrix with `p`
/// sub- and super-diagonals. Pivoting widens the upper band of U to `2p`.
#[derive(Debug, Clone)]
pub struct BandLu {
    m: usize,
    p: usize,
    // row i holds columns i-p ..= i+2p
    ab: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    fn width(p: usize) -> usize {
        3 * p + 1
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.p >= i && j <= i + 2 * self.p);
        i * Self::width(self.p) + (j + self.p - i)
    }

    /// Factors the `m x m` band matrix whose entries are given by `entry(i, j)`
    /// for `|i - j| <= p`.
    pub fn factor(m: usize, p: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut lu = Self {
            m,
            p,
            ab: vec![0.0; m * Self::width(p)],
            piv: vec![0; m],
        };
        let mut scale = f64::MIN_POSITIVE;
        for i in 0..m {
            for j in i.saturating_sub(p)..(i + p + 1).min(m) {
                let v = entry(i, j);
                scale = scale.max(v.abs());
                let k = lu.idx(i, j);
                lu.ab[k] = v;
            }
        }
        for k in 0..m {
            let last_row = (k + p).min(m - 1);
            let mut piv = k;
            let mut best = -1.0;
            for i in k..=last_row {
                let v = lu.ab[lu.idx(i, k)].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if !(best > scale * 1e-15) {
                return Err(Error::SingularJacobian { row: k, pivot: best });
            }
            lu.piv[k] = piv;
            let last_col = (k + 2 * p).min(m - 1);
            if piv != k {
                for j in k..=last_col {
                    let (a, b) = (lu.idx(k, j), lu.idx(piv, j));
                    lu.ab.swap(a, b);
                }
            }
            let pivot = lu.ab[lu.idx(k, k)];
            for i in k + 1..=last_row {
                let ik = lu.idx(i, k);
                let l = lu.ab[ik] / pivot;
                lu.ab[ik] = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let kj = lu.ab[lu.idx(k, j)];
                        let ij = lu.idx(i, j);
                        lu.ab[ij] -= l * kj;
                    }
                }
            }
        }
        Ok(lu)
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (m, p) = (self.m, self.p);
        assert_eq!(b.len(), m);
        for k in 0..m {
            b.swap(k, self.piv[k]);
            let bk = b[k];
            for i in k + 1..=(k + p).min(m - 1) {
                b[i] -= self.ab[self.idx(i, k)] * bk;
            }
        }
        for i in (0..m).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + 2 * p).min(m - 1) {
                s -= self.ab[self.idx(i, j)] * b[j];
            }
            b[i] = s / self.ab[self.idx(i, i)];
        }
    }
}

/// Periodic band matrix solver: entries with cyclic distance
/// `min(|i-j|, n-|i-j|) <= p` may be nonzero.
///
/// The last `p` unknowns border the system. The leading block is a plain
/// band matrix; the corners are folded into a `p x p` Schur complement.
#[derive(Debug, Clone)]
pub struct CyclicBandedLu {
    n: usize,
    p: usize,
    inner: BandLu,
    // A11^{-1} A12, column-major m x p
    z: Vec<f64>,
    // A21, row-major p x m
    a21: Vec<f64>,
    schur: DenseLu,
}

impl CyclicBandedLu {
    pub fn factor(n: usize, p: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Self> {
        if p == 0 || n < 2 * p + 2 {
            return Err(Error::InvalidConfig(format!(
                "cyclic band solver needs n >= 2p + 2 (n = {n}, p = {p})"
            )));
        }
        let m = n - p;
        let inner = BandLu::factor(m, p, &entry)?;
        let mut z = vec![0.0; m * p];
        for c in 0..p {
            let col = &mut z[c * m..(c + 1) * m];
            for (i, v) in col.iter_mut().enumerate() {
                *v = entry(i, m + c);
            }
            inner.solve_in_place(col);
        }
        let mut a21 = vec![0.0; p * m];
        for r in 0..p {
            for j in 0..m {
                a21[r * m + j] = entry(m + r, j);
            }
        }
        let mut s = vec![0.0; p * p];
        for r in 0..p {
            for c in 0..p {
                let dot: f64 = a21[r * m..(r + 1) * m]
                    .iter()
                    .zip(&z[c * m..(c + 1) * m])
                    .map(|(a, b)| a * b)
                    .sum();
                s[r * p + c] = entry(m + r, m + c) - dot;
            }
        }
        let schur = DenseLu::factor(p, s)?;
        Ok(Self {
            n,
            p,
            inner,
            z,
            a21,
            schur,
        })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, p) = (self.n, self.p);
        let m = n - p;
        assert_eq!(b.len(), n);
        let (b1, b2) = b.split_at_mut(m);
        self.inner.solve_in_place(b1);
        for r in 0..p {
            let dot: f64 = self.a21[r * m..(r + 1) * m]
                .iter()
                .zip(b1.iter())
                .map(|(a, y)| a * y)
                .sum();
            b2[r] -= dot;
        }
        self.schur.solve_in_place(b2);
        for c in 0..p {
            let xc = b2[c];
            for (v, zc) in b1.iter_mut().zip(&self.z[c * m..(c + 1) * m]) {
                *v -= zc * xc;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cyclic_test_matrix(n: usize, p: usize) -> Vec<f64> {
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for d in 0..=2 * p {
                let j = (i + n + d - p) % n;
                // nonsymmetric, not diagonally dominant in every row
                let v = if d == p {
                    1.0 + 0.1 * i as f64
                } else {
                    ((i * 7 + d * 3) % 5) as f64 * 0.3 - 0.5
                };
                a[i * n + j] += v;
            }
        }
        a
    }

    #[test]
    fn band_lu_matches_dense() {
        let (m, p) = (12, 2);
        let full = cyclic_test_matrix(m, p);
        let entry = |i: usize, j: usize| if i.abs_diff(j) <= p { full[i * m + j] } else { 0.0 };
        let banded = BandLu::factor(m, p, entry).unwrap();
        let dense: Vec<f64> = (0..m * m).map(|k| entry(k / m, k % m)).collect();
        let dense = DenseLu::factor(m, dense).unwrap();
        let b: Vec<f64> = (0..m).map(|i| (i as f64).sin()).collect();
        let mut x = b.clone();
        banded.solve_in_place(&mut x);
        let y = dense.solve(&b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-10, "{u} vs {v}");
        }
    }

    #[test]
    fn cyclic_matches_dense() {
        for (n, p) in [(16, 2), (20, 4), (8, 1)] {
            let a = cyclic_test_matrix(n, p);
            let cyc = CyclicBandedLu::factor(n, p, |i, j| a[i * n + j]).unwrap();
            let dense = DenseLu::factor(n, a.clone()).unwrap();
            let b: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.7).cos()).collect();
            let mut x = b.clone();
            cyc.solve_in_place(&mut x);
            let y = dense.solve(&b);
            for (u, v) in x.iter().zip(&y) {
                assert!((u - v).abs() < 1e-9, "n={n} p={p}: {u} vs {v}");
            }
        }
    }

    #[test]
    fn rejects_tiny_systems() {
        assert!(CyclicBandedLu::factor(5, 2, |_, _| 1.0).is_err());
    }
}

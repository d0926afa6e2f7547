//! Banded matrices with an LU factorization using partial pivoting.
//!
//! Rows are stored as windows over absolute columns `i − kl ..= i + kl + ku`,
//! leaving room for the fill-in produced by row interchanges. Rows are
//! equilibrated by their largest entry before factoring, which matters for
//! the neck operators whose rows differ in scale by many orders of magnitude.

use crate::error::{Error, Result};

/// Square banded matrix with `kl` sub-diagonals and `ku` super-diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    /// Zero matrix of order `n`.
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    /// `(kl, ku)`.
    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.kl < i || j > i + self.kl + self.ku || j >= self.n {
            None
        } else {
            Some(i * self.width + j + self.kl - i)
        }
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds `v` to entry `(i, j)`.
    ///
    /// # Panics
    /// If `(i, j)` lies outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside band"
        );
        let s = self.slot(i, j).expect("in band");
        self.data[s] += v;
    }

    /// Replaces row `i` by the identity row.
    pub fn set_identity_row(&mut self, i: usize) {
        let base = i * self.width;
        self.data[base..base + self.width]
            .iter_mut()
            .for_each(|x| *x = 0.0);
        self.add(i, i, 1.0);
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// LU factorization with row equilibration and partial pivoting.
    pub fn factor(&self) -> Result<BandedLu> {
        let mut a = self.clone();
        let n = a.n;
        let reach = a.kl + a.ku;
        let mut scale = vec![1.0; n];
        for (i, s) in scale.iter_mut().enumerate() {
            let row = &a.data[i * a.width..(i + 1) * a.width];
            let m = row.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            if m == 0.0 {
                return Err(Error::Singular {
                    pivot: i,
                    magnitude: 0.0,
                });
            }
            *s = 1.0 / m;
            a.data[i * a.width..(i + 1) * a.width]
                .iter_mut()
                .for_each(|x| *x /= m);
        }
        let mut perm = vec![0usize; n];
        for c in 0..n {
            let last = (c + a.kl).min(n - 1);
            let mut p = c;
            let mut best = a.get(c, c).abs();
            for r in c + 1..=last {
                let v = a.get(r, c).abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > 1e-300) {
                return Err(Error::Singular {
                    pivot: c,
                    magnitude: best,
                });
            }
            perm[c] = p;
            let jmax = (c + reach).min(n - 1);
            if p != c {
                for j in c..=jmax {
                    let (sc, sp) = (a.slot(c, j).unwrap(), a.slot(p, j));
                    let vp = sp.map_or(0.0, |s| a.data[s]);
                    let vc = a.data[sc];
                    a.data[sc] = vp;
                    if let Some(s) = sp {
                        a.data[s] = vc;
                    } else {
                        debug_assert!(vc == 0.0);
                    }
                }
            }
            let piv = a.get(c, c);
            for r in c + 1..=last {
                let sr = a.slot(r, c).unwrap();
                let l = a.data[sr] / piv;
                if l == 0.0 {
                    continue;
                }
                a.data[sr] = l;
                for j in c + 1..=jmax {
                    let u = a.data[a.slot(c, j).unwrap()];
                    if u != 0.0 {
                        let s = a.slot(r, j).unwrap();
                        a.data[s] -= l * u;
                    }
                }
            }
        }
        Ok(BandedLu { lu: a, perm, scale })
    }

    /// Factors and solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.factor()?.solve(b)
    }
}

/// Factorization produced by [`BandedMatrix::factor`].
#[derive(Debug, Clone)]
pub struct BandedLu {
    lu: BandedMatrix,
    perm: Vec<usize>,
    scale: Vec<f64>,
}

impl BandedLu {
    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.lu.n;
        if b.len() != n {
            return Err(Error::GridMismatch(format!(
                "rhs length {} != {n}",
                b.len()
            )));
        }
        let reach = self.lu.kl + self.lu.ku;
        let mut x: Vec<f64> = b.iter().zip(&self.scale).map(|(v, s)| v * s).collect();
        for c in 0..n {
            let p = self.perm[c];
            if p != c {
                x.swap(c, p);
            }
            let xc = x[c];
            if xc != 0.0 {
                for r in c + 1..=(c + self.lu.kl).min(n - 1) {
                    x[r] -= self.lu.get(r, c) * xc;
                }
            }
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..=(i + reach).min(n - 1) {
                acc -= self.lu.get(i, j) * x[j];
            }
            x[i] = acc / self.lu.get(i, i);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular {
                pivot: n,
                magnitude: f64::NAN,
            });
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_solve() {
        let n = 50;
        let mut a = BandedMatrix::zeros(n, 1, 1);
        for i in 0..n {
            a.add(i, i, 2.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                a.add(i, i + 1, -1.0);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.matvec(&x);
        let y = a.solve(&b).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        // [[0, 1], [1, 0]] needs a row swap.
        let mut a = BandedMatrix::zeros(2, 1, 1);
        a.add(0, 1, 1.0);
        a.add(1, 0, 1.0);
        let x = a.solve(&[3.0, 4.0]).unwrap();
        assert_eq!(x, vec![4.0, 3.0]);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut a = BandedMatrix::zeros(3, 1, 1);
        a.add(0, 0, 1.0);
        a.add(1, 0, 1.0);
        a.add(2, 2, 1.0);
        assert!(matches!(
            a.solve(&[1.0, 1.0, 1.0]),
            Err(Error::Singular { .. })
        ));
    }
}

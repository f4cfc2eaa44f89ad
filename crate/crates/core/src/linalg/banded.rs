//! Symmetric banded storage with Cholesky solves and LDLᵀ inertia counts.

use crate::error::{Error, Result};

/// Lower band of a symmetric matrix. Row `i` stores columns `i - bw ..= i`
/// contiguously; entries left of column 0 are zero padding.
#[derive(Debug, Clone)]
pub struct BandedSym {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.bw + 1) + (j + self.bw - i)
    }

    /// Adds `v` at `(i, j)`; the mirrored entry is implied. Panics outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.bw, "entry ({i},{j}) outside band {}", self.bw);
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub fn shift_diagonal(&mut self, sigma: f64) {
        for i in 0..self.n {
            let k = self.idx(i, i);
            self.data[k] -= sigma;
        }
    }

    /// Cholesky factor of `self`, or `None` if a non-positive pivot appears.
    pub fn cholesky(&self) -> Option<BandedCholesky> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let mut l = self.data.clone();
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let ri = i * w + bw - i;
                let rj = j * w + bw - j;
                let mut s = l[ri + j];
                let a = &l[ri + k0..ri + j];
                let b = &l[rj + k0..rj + j];
                s -= dot(a, b);
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return None;
                    }
                    l[ri + j] = s.sqrt();
                } else {
                    l[ri + j] = s / l[rj + j];
                }
            }
        }
        Some(BandedCholesky { n, bw, l })
    }

    /// Number of negative eigenvalues of `self - sigma`, from the signs of the
    /// pivots of an unpivoted LDLᵀ factorization.
    pub fn count_below(&self, sigma: f64) -> Result<usize> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let scale = (0..n)
            .map(|i| self.data[self.idx(i, i)].abs())
            .fold(1.0_f64, f64::max);
        let pivmin = f64::EPSILON * f64::EPSILON * scale;
        let mut l = self.data.clone();
        let mut d = vec![0.0; n];
        let mut t = vec![0.0; bw + 1];
        let mut negative = 0;
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let ri = i * w + bw - i;
            for j in j0..i {
                let k0 = j0.max(j.saturating_sub(bw));
                let rj = j * w + bw - j;
                let mut s = l[ri + j];
                for k in k0..j {
                    s -= t[k - j0] * l[rj + k];
                }
                t[j - j0] = s;
                l[ri + j] = s / d[j];
            }
            let mut s = l[ri + i] - sigma;
            for k in j0..i {
                s -= t[k - j0] * l[ri + k];
            }
            if !s.is_finite() {
                return Err(Error::Internal("LDLt inertia count overflowed".into()));
            }
            if s.abs() < pivmin {
                s = -pivmin;
            }
            if s < 0.0 {
                negative += 1;
            }
            d[i] = s;
        }
        Ok(negative)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = acc[0] + acc[1] + acc[2] + acc[3];
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let ri = i * w + bw - i;
            let s = x[i] - dot(&self.l[ri + j0..ri + i], &x[j0..i]);
            x[i] = s / self.l[ri + i];
        }
        for i in (0..n).rev() {
            let ri = i * w + bw - i;
            x[i] /= self.l[ri + i];
            let xi = x[i];
            let j0 = i.saturating_sub(bw);
            for j in j0..i {
                x[j] -= self.l[ri + j] * xi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn random_banded(n: usize, bw: usize, vals: &[f64], shift: f64) -> (BandedSym, DMatrix<f64>) {
        let mut b = BandedSym::zeros(n, bw);
        let mut m = DMatrix::zeros(n, n);
        let mut it = vals.iter().cycle();
        for i in 0..n {
            for j in i.saturating_sub(bw)..=i {
                let v = *it.next().unwrap() + if i == j { shift } else { 0.0 };
                b.add(i, j, v);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        (b, m)
    }

    proptest! {
        #[test]
        fn cholesky_solves(
            n in 2usize..40,
            bw in 1usize..6,
            vals in prop::collection::vec(-1.0f64..1.0, 50),
        ) {
            let (b, m) = random_banded(n, bw, &vals, 2.0 * bw as f64 + 2.0);
            let chol = b.cholesky().expect("diagonally dominant");
            let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
            let mut x = rhs.clone();
            chol.solve_in_place(&mut x);
            let ax = &m * nalgebra::DVector::from_vec(x);
            for i in 0..n {
                prop_assert!((ax[i] - rhs[i]).abs() < 1e-10);
            }
        }

        #[test]
        fn inertia_matches_dense(
            n in 2usize..30,
            bw in 1usize..5,
            vals in prop::collection::vec(-1.0f64..1.0, 40),
            sigma in -2.0f64..2.0,
        ) {
            let (b, m) = random_banded(n, bw, &vals, 0.0);
            let ev = m.symmetric_eigenvalues();
            // Skip shifts that land on an eigenvalue to within roundoff.
            prop_assume!(ev.iter().all(|e| (e - sigma).abs() > 1e-8));
            let want = ev.iter().filter(|&&e| e < sigma).count();
            prop_assert_eq!(b.count_below(sigma).unwrap(), want);
        }
    }

    #[test]
    fn indefinite_matrix_has_no_cholesky() {
        let mut b = BandedSym::zeros(3, 1);
        b.add(0, 0, 1.0);
        b.add(1, 1, -1.0);
        b.add(2, 2, 1.0);
        assert!(b.cholesky().is_none());
    }
}

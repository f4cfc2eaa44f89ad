//! Symmetric tridiagonal matrices, optionally closed cyclically by a corner
//! coupling between the first and last unknowns.
//!
//! Eigenvalues are located by Sturm-count bisection. The count for the cyclic
//! case comes from an LDLᵀ factorization of the "arrow" shaped matrix obtained
//! by treating the last unknown as a border.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    /// `off[i]` couples unknowns `i` and `i + 1`.
    pub off: Vec<f64>,
    /// Coupling between unknowns `0` and `n - 1`; zero for a plain tridiagonal.
    pub corner: f64,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>, corner: f64) -> Result<Self> {
        let n = diag.len();
        if n == 0 || off.len() + 1 != n {
            return Err(Error::InvalidInput(format!(
                "tridiagonal shape mismatch: {} diagonal, {} off-diagonal entries",
                n,
                off.len()
            )));
        }
        if corner != 0.0 && n < 3 {
            return Err(Error::InvalidInput(
                "cyclic closure needs at least 3 unknowns".into(),
            ));
        }
        Ok(Self { diag, off, corner })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn is_cyclic(&self) -> bool {
        self.corner != 0.0
    }

    /// Gershgorin interval containing the whole spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            if n > 1 && (i == 0 || i == n - 1) {
                r += self.corner.abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    fn norm_bound(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE)
    }

    fn pivmin(&self) -> f64 {
        let emax = self
            .off
            .iter()
            .chain(std::iter::once(&self.corner))
            .fold(1.0_f64, |m, e| m.max(e * e));
        f64::MIN_POSITIVE * emax
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let pivmin = self.pivmin();
        let guard = |d: f64| if d.abs() < pivmin { -pivmin } else { d };
        let n = self.len();
        if !self.is_cyclic() {
            let mut count = 0;
            let mut d = guard(self.diag[0] - x);
            if d < 0.0 {
                count += 1;
            }
            for i in 1..n {
                let e = self.off[i - 1];
                d = guard(self.diag[i] - x - e * e / d);
                if d < 0.0 {
                    count += 1;
                }
            }
            return count;
        }
        // Leading block 0..n-1 is tridiagonal; column n-1 is the border with
        // entries corner at row 0 and off[n-2] at row n-2.
        let m = n - 1;
        let mut count = 0;
        let d = guard(self.diag[0] - x);
        let mut r = 1.0 / d;
        let mut w = self.corner;
        let mut schur = self.diag[m] - x - w * w * r;
        if d < 0.0 {
            count += 1;
        }
        for i in 1..m {
            let e = self.off[i - 1];
            let l = e * r;
            let d = guard(self.diag[i] - x - e * l);
            let border = if i == m - 1 { self.off[m - 1] } else { 0.0 };
            w = border - l * w;
            r = 1.0 / d;
            schur -= w * w * r;
            if d < 0.0 {
                count += 1;
            }
        }
        if guard(schur) < 0.0 {
            count += 1;
        }
        count
    }

    /// The `n` smallest eigenvalues in ascending order, with multiplicity.
    pub fn lowest(&self, n: usize) -> Result<Vec<f64>> {
        self.index_range(0, n)
    }

    /// Eigenvalues with (zero-based) indices `lo..hi` in ascending order.
    pub fn index_range(&self, lo_index: usize, hi_index: usize) -> Result<Vec<f64>> {
        let dim = self.len();
        if hi_index > dim || lo_index > hi_index {
            return Err(Error::InvalidInput(format!(
                "requested eigenvalues {lo_index}..{hi_index} of a {dim}x{dim} matrix"
            )));
        }
        let n = hi_index - lo_index;
        if n == 0 {
            return Ok(Vec::new());
        }
        let (glo, ghi) = self.gershgorin();
        let norm = self.norm_bound();
        let pad = 2.0 * f64::EPSILON * norm + 2.0 * self.pivmin();
        let glo = glo - pad;
        let ghi = ghi + pad;
        let mut lower = vec![glo; n];
        let mut upper = vec![ghi; n];
        let abs_tol = 2.0 * f64::EPSILON * norm;
        for k in 0..n {
            let mut iterations = 0;
            loop {
                let (lo, hi) = (lower[k], upper[k]);
                let width = hi - lo;
                let tol = abs_tol.max(4.0 * f64::EPSILON * lo.abs().max(hi.abs()));
                if width <= tol {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let c = self.count_below(mid);
                for j in k..n {
                    if lo_index + j < c {
                        if mid < upper[j] {
                            upper[j] = mid;
                        }
                    } else if mid > lower[j] {
                        lower[j] = mid;
                    }
                }
                iterations += 1;
                if iterations > 400 {
                    return Err(Error::Convergence {
                        what: format!("Sturm bisection for eigenvalue {}", lo_index + k + 1),
                        tol,
                        iterations,
                        residual: width,
                    });
                }
            }
            if k + 1 < n && lower[k + 1] < lower[k] {
                lower[k + 1] = lower[k];
            }
        }
        let mut values: Vec<f64> = (0..n).map(|k| 0.5 * (lower[k] + upper[k])).collect();
        if self.is_cyclic() {
            self.refine_clusters(&mut values, norm)?;
        }
        Ok(values)
    }

    /// Near an exactly degenerate eigenvalue the cyclic Sturm count suffers
    /// cancellation, so bisection alone only resolves it to about
    /// `sqrt(eps)` relative accuracy. Each cluster of bisection values is
    /// refined by block inverse iteration and a Rayleigh–Ritz projection.
    fn refine_clusters(&self, values: &mut [f64], norm: f64) -> Result<()> {
        let n = self.len();
        let gap = 1e-7 * norm;
        let mut start = 0;
        while start < values.len() {
            let mut end = start + 1;
            while end < values.len() && values[end] - values[end - 1] <= gap {
                end += 1;
            }
            let c = end - start;
            let sigma = values[start..end].iter().sum::<f64>() / c as f64 - 1e-9 * norm;
            let mut basis: Vec<Vec<f64>> = (0..c)
                .map(|k| {
                    (0..n)
                        .map(|i| {
                            let t = (i as f64 + 0.5) * (k as f64 + 1.0) * 0.754_877_666;
                            (t.fract() - 0.5) + 0.3 * ((i * (k + 3)) as f64).sin()
                        })
                        .collect()
                })
                .collect();
            orthonormalize(&mut basis)?;
            for _ in 0..8 {
                for v in basis.iter_mut() {
                    *v = self.solve_cyclic_shifted(sigma, v)?;
                }
                orthonormalize(&mut basis)?;
            }
            let images: Vec<Vec<f64>> = basis
                .iter()
                .map(|v| {
                    let mut y = vec![0.0; n];
                    self.apply(v, &mut y);
                    y
                })
                .collect();
            let g = nalgebra::DMatrix::from_fn(c, c, |i, j| {
                let a: f64 = basis[i].iter().zip(&images[j]).map(|(x, y)| x * y).sum();
                let b: f64 = basis[j].iter().zip(&images[i]).map(|(x, y)| x * y).sum();
                0.5 * (a + b)
            });
            let mut ritz: Vec<f64> = g.symmetric_eigenvalues().iter().copied().collect();
            ritz.sort_by(f64::total_cmp);
            values[start..end].copy_from_slice(&ritz);
            start = end;
        }
        Ok(())
    }

    /// Solves `(A − σ) y = b` for the cyclic matrix by a Sherman–Morrison
    /// correction of a pivoted tridiagonal solve.
    fn solve_cyclic_shifted(&self, sigma: f64, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        let d0 = self.diag[0] - sigma;
        let g = if d0 != 0.0 { -d0.abs() } else { -1.0 };
        let c = self.corner;
        let mut diag = self.diag.clone();
        diag[0] -= g;
        diag[n - 1] -= c * c / g;
        let z = solve_shifted(&diag, &self.off, sigma, b)?;
        let mut u = vec![0.0; n];
        u[0] = g;
        u[n - 1] = c;
        let q = solve_shifted(&diag, &self.off, sigma, &u)?;
        let uz = (g * z[0] + c * z[n - 1]) / g;
        let uq = 1.0 + (g * q[0] + c * q[n - 1]) / g;
        let f = uz / uq;
        let y: Vec<f64> = z.iter().zip(&q).map(|(zi, qi)| zi - f * qi).collect();
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Internal("cyclic shifted solve overflowed".into()));
        }
        Ok(y)
    }

    /// Matrix-vector product.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut v = self.diag[i] * x[i];
            if i > 0 {
                v += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                v += self.off[i] * x[i + 1];
            }
            y[i] = v;
        }
        if self.is_cyclic() {
            y[0] += self.corner * x[n - 1];
            y[n - 1] += self.corner * x[0];
        }
    }

    /// Unit eigenvector for an isolated eigenvalue `lambda` of a
    /// non-cyclic matrix, by inverse iteration with a slightly perturbed shift.
    pub fn eigenvector(&self, lambda: f64) -> Result<Vec<f64>> {
        if self.is_cyclic() {
            return Err(Error::InvalidInput(
                "inverse iteration is only provided for non-cyclic matrices".into(),
            ));
        }
        let n = self.len();
        let norm = self.norm_bound();
        let shift = lambda - 1e3 * f64::EPSILON * norm.max(lambda.abs());
        let mut x: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.1 * ((i as f64) * 0.618_033_988_75).fract())
            .collect();
        normalize(&mut x);
        let mut ax = vec![0.0; n];
        let tol = 1e-11 * norm;
        let mut residual = f64::INFINITY;
        for _ in 0..8 {
            x = solve_shifted(&self.diag, &self.off, shift, &x)?;
            normalize(&mut x);
            self.apply(&x, &mut ax);
            residual = ax
                .iter()
                .zip(&x)
                .map(|(a, v)| (a - lambda * v).powi(2))
                .sum::<f64>()
                .sqrt();
            if residual <= tol {
                return Ok(x);
            }
        }
        Err(Error::Convergence {
            what: "inverse iteration".into(),
            tol,
            iterations: 8,
            residual,
        })
    }
}

fn orthonormalize(vs: &mut [Vec<f64>]) -> Result<()> {
    for k in 0..vs.len() {
        for _pass in 0..2 {
            for j in 0..k {
                let (head, tail) = vs.split_at_mut(k);
                let c: f64 = head[j].iter().zip(tail[0].iter()).map(|(a, b)| a * b).sum();
                tail[0]
                    .iter_mut()
                    .zip(&head[j])
                    .for_each(|(x, q)| *x -= c * q);
            }
        }
        let nrm = vs[k].iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(nrm > 0.0) || !nrm.is_finite() {
            return Err(Error::Internal("inverse iteration basis collapsed".into()));
        }
        vs[k].iter_mut().for_each(|x| *x /= nrm);
    }
    Ok(())
}

fn normalize(x: &mut [f64]) {
    let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nrm > 0.0 {
        x.iter_mut().for_each(|v| *v /= nrm);
    }
}

/// Solves (T − σ)y = b with partial pivoting (LAPACK-style tridiagonal LU).
fn solve_shifted(diag: &[f64], off: &[f64], sigma: f64, b: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 1 {
        let d = diag[0] - sigma;
        let d = if d == 0.0 { f64::EPSILON } else { d };
        return Ok(vec![b[0] / d]);
    }
    // Row i of U holds u0 (diagonal), u1, u2 (super-diagonals).
    let mut u0: Vec<f64> = diag.iter().map(|d| d - sigma).collect();
    let mut u1: Vec<f64> = off.to_vec();
    u1.push(0.0);
    let mut u2 = vec![0.0; n];
    let mut lower: Vec<f64> = off.to_vec();
    let mut y = b.to_vec();
    let tiny = f64::EPSILON * diag.iter().fold(1.0_f64, |m, d| m.max(d.abs()));
    for i in 0..n - 1 {
        let sub = lower[i];
        if u0[i].abs() >= sub.abs() {
            if u0[i] == 0.0 {
                u0[i] = tiny;
            }
            let l = sub / u0[i];
            u0[i + 1] -= l * u1[i];
            y[i + 1] -= l * y[i];
        } else {
            let l = u0[i] / sub;
            u0[i] = sub;
            let t = u1[i];
            u1[i] = u0[i + 1];
            u0[i + 1] = t - l * u0[i + 1];
            if i + 1 < n - 1 {
                u2[i] = u1[i + 1];
                u1[i + 1] *= -l;
            }
            y.swap(i, i + 1);
            y[i + 1] -= l * y[i];
        }
        lower[i] = 0.0;
    }
    if u0[n - 1] == 0.0 {
        u0[n - 1] = tiny;
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut v = y[i];
        if i + 1 < n {
            v -= u1[i] * x[i + 1];
        }
        if i + 2 < n {
            v -= u2[i] * x[i + 2];
        }
        x[i] = v / u0[i];
        if !x[i].is_finite() {
            return Err(Error::Internal("tridiagonal solve overflowed".into()));
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn dense(t: &SymTridiag) -> DMatrix<f64> {
        let n = t.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = t.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = t.off[i];
                m[(i + 1, i)] = t.off[i];
            }
        }
        m[(0, n - 1)] += t.corner;
        m[(n - 1, 0)] += t.corner;
        m
    }

    fn dense_eigs(t: &SymTridiag) -> Vec<f64> {
        let mut v: Vec<f64> = dense(t).symmetric_eigenvalues().iter().copied().collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn free_periodic_laplacian_has_double_eigenvalues() {
        let n = 16;
        let t = SymTridiag::new(vec![2.0; n], vec![-1.0; n - 1], -1.0).unwrap();
        let ev = t.lowest(5).unwrap();
        let exact = |m: f64| 2.0 - 2.0 * (2.0 * std::f64::consts::PI * m / n as f64).cos();
        let want = [0.0, exact(1.0), exact(1.0), exact(2.0), exact(2.0)];
        for (a, b) in ev.iter().zip(want) {
            assert!((a - b).abs() < 1e-13, "{a} vs {b}");
        }
    }

    #[test]
    fn eigenvector_of_dirichlet_laplacian() {
        let n = 50;
        let t = SymTridiag::new(vec![2.0; n], vec![-1.0; n - 1], 0.0).unwrap();
        let lam = t.lowest(1).unwrap()[0];
        let v = t.eigenvector(lam).unwrap();
        let h = std::f64::consts::PI / (n as f64 + 1.0);
        let w: Vec<f64> = (1..=n).map(|i| (i as f64 * h).sin()).collect();
        let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let dot: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / nw;
        assert!((dot.abs() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn bisection_matches_dense(
            diag in prop::collection::vec(-5.0f64..5.0, 3..30),
            seed in prop::collection::vec(-2.0f64..2.0, 30),
            corner in -2.0f64..2.0,
            cyclic in any::<bool>(),
        ) {
            let n = diag.len();
            let off = seed[..n - 1].to_vec();
            let t = SymTridiag::new(diag, off, if cyclic { corner } else { 0.0 }).unwrap();
            let want = dense_eigs(&t);
            let got = t.lowest(n).unwrap();
            for (a, b) in got.iter().zip(&want) {
                prop_assert!((a - b).abs() < 1e-10, "{} vs {}", a, b);
            }
        }

        #[test]
        fn index_range_matches_dense(
            diag in prop::collection::vec(-5.0f64..5.0, 6..30),
            corner in -2.0f64..2.0,
            lo in 0usize..3,
            len in 1usize..4,
        ) {
            let n = diag.len();
            let t = SymTridiag::new(diag, vec![-1.0; n - 1], corner).unwrap();
            let want = dense_eigs(&t);
            let got = t.index_range(lo, lo + len).unwrap();
            for (a, b) in got.iter().zip(&want[lo..lo + len]) {
                prop_assert!((a - b).abs() < 1e-10, "{} vs {}", a, b);
            }
        }

        #[test]
        fn count_is_monotone(
            diag in prop::collection::vec(-3.0f64..3.0, 4..20),
            corner in -1.0f64..1.0,
            x in -6.0f64..6.0,
        ) {
            let n = diag.len();
            let t = SymTridiag::new(diag, vec![-1.0; n - 1], corner).unwrap();
            prop_assert!(t.count_below(x) <= t.count_below(x + 0.1));
        }
    }
}

//! Lowest eigenpairs of a large sparse symmetric matrix by shift-invert block
//! subspace iteration with Rayleigh–Ritz projection.
//!
//! The shift is kept strictly below the spectrum so that the shifted matrix
//! has a banded Cholesky factor; a failed factorization moves the shift down.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::banded::{BandedCholesky, BandedSym};
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct SubspaceOptions {
    /// Extra block vectors beyond the requested count.
    pub guard_vectors: usize,
    /// Residual tolerance relative to `1 + |θ|`.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SubspaceOptions {
    fn default() -> Self {
        Self {
            guard_vectors: 6,
            tol: 1e-9,
            max_iter: 500,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub shift: f64,
}

/// Banded copy of `a` in the ordering `perm` (`perm[old] = new`).
pub fn to_banded(a: &CsrMatrix, perm: &[usize]) -> BandedSym {
    let bw = a.bandwidth_under(perm);
    let mut b = BandedSym::zeros(a.n, bw);
    for (i, j, v) in a.triplets() {
        let (pi, pj) = (perm[i], perm[j]);
        if pi >= pj {
            b.add(pi, pj, v);
        }
    }
    b
}

/// Factors `B − σ` at the first σ in `sigma0, sigma0 − δ, sigma0 − 3δ, …`
/// for which the shifted matrix is positive definite.
fn factor_below(b: &BandedSym, sigma0: f64) -> Result<(f64, BandedCholesky)> {
    let mut step = 1e-3 * sigma0.abs().max(1.0);
    let mut sigma = sigma0;
    for _ in 0..60 {
        let mut shifted = b.clone();
        shifted.shift_diagonal(sigma);
        if let Some(c) = shifted.cholesky() {
            return Ok((sigma, c));
        }
        sigma -= step;
        step *= 2.0;
    }
    Err(Error::Convergence {
        what: "search for a shift below the spectrum".into(),
        tol: 0.0,
        iterations: 60,
        residual: sigma,
    })
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
            return Err(Error::Internal(
                "subspace basis became rank deficient".into(),
            ));
        }
        vs[k].iter_mut().for_each(|x| *x /= nrm);
    }
    Ok(())
}

/// The `m` smallest eigenpairs of the symmetric matrix `a`.
///
/// `perm` is a bandwidth-reducing ordering used only for the factorization;
/// `sigma0` should be a lower estimate of the smallest eigenvalue.
pub fn lowest_eigenpairs(
    a: &CsrMatrix,
    perm: &[usize],
    m: usize,
    sigma0: f64,
    opts: SubspaceOptions,
) -> Result<EigenPairs> {
    let n = a.n;
    let p = (m + opts.guard_vectors).min(n);
    if m == 0 || m > n {
        return Err(Error::InvalidInput(format!(
            "cannot compute {m} eigenpairs of an {n}x{n} matrix"
        )));
    }
    let banded = to_banded(a, perm);
    let (shift, chol) = factor_below(&banded, sigma0)?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| rng.random::<f64>() - 0.5).collect())
        .collect();
    orthonormalize(&mut x)?;

    let mut worst = f64::INFINITY;
    for iteration in 1..=opts.max_iter {
        let mut y: Vec<Vec<f64>> = x
            .par_iter()
            .map(|col| {
                let mut buf = vec![0.0; n];
                for i in 0..n {
                    buf[perm[i]] = col[i];
                }
                chol.solve_in_place(&mut buf);
                (0..n).map(|i| buf[perm[i]]).collect()
            })
            .collect();
        orthonormalize(&mut y)?;
        let ay: Vec<Vec<f64>> = y
            .par_iter()
            .map(|col| {
                let mut out = vec![0.0; n];
                a.matvec(col, &mut out);
                out
            })
            .collect();
        let g = DMatrix::from_fn(p, p, |i, j| {
            let v: f64 = y[i].iter().zip(&ay[j]).map(|(u, w)| u * w).sum();
            let vt: f64 = y[j].iter().zip(&ay[i]).map(|(u, w)| u * w).sum();
            0.5 * (v + vt)
        });
        let eig = g.symmetric_eigen();
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let theta: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let combine = |basis: &[Vec<f64>], k: usize| -> Vec<f64> {
            let mut out = vec![0.0; n];
            for (r, b) in basis.iter().enumerate() {
                let c = eig.eigenvectors[(r, k)];
                out.iter_mut().zip(b).for_each(|(o, v)| *o += c * v);
            }
            out
        };
        let (xs, axs): (Vec<Vec<f64>>, Vec<Vec<f64>>) = order
            .par_iter()
            .map(|&k| (combine(&y, k), combine(&ay, k)))
            .unzip();
        let residuals: Vec<f64> = (0..p)
            .map(|k| {
                xs[k]
                    .iter()
                    .zip(&axs[k])
                    .map(|(v, av)| (av - theta[k] * v).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        worst = (0..m)
            .map(|k| residuals[k] / (1.0 + theta[k].abs()))
            .fold(0.0, f64::max);
        x = xs;
        if worst <= opts.tol {
            let mut vectors = x;
            vectors.truncate(m);
            // Fix the sign so that the largest-magnitude entry is positive.
            for v in vectors.iter_mut() {
                let imax = v
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                if v[imax] < 0.0 {
                    v.iter_mut().for_each(|t| *t = -*t);
                }
            }
            return Ok(EigenPairs {
                values: theta[..m].to_vec(),
                vectors,
                residuals: residuals[..m].to_vec(),
                iterations: iteration,
                shift,
            });
        }
    }
    Err(Error::Convergence {
        what: format!("shift-invert subspace iteration for {m} eigenpairs"),
        tol: opts.tol,
        iterations: opts.max_iter,
        residual: worst,
    })
}

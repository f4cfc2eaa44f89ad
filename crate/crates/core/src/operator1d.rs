//! One-dimensional operators along the curve: the comparison operator
//! `S = −d²/ds² − γ²/4` and the separated-variable bounds
//! `U±_a = −(1∓aγ₊)⁻² d²/ds² + V±(s)`.
//!
//! Discretization is by second-order central differences on a uniform grid.
//! Eigenvalues are reported after two-grid Richardson extrapolation
//! (`N` and `N/2`), together with the extrapolation error estimate.

use std::io::Write;

use crate::curve::ArcCurve;
use crate::error::{Error, Result};
use crate::linalg::{richardson2, SymTridiag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    Periodic,
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn as_str(self) -> &'static str {
        match self {
            Sign::Plus => "plus",
            Sign::Minus => "minus",
        }
    }
}

/// Uniform grid on `[0, L]` with `N` intervals, `h = L/N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub n: usize,
    pub length: f64,
    pub boundary: Boundary,
}

impl Grid1D {
    pub fn new(n: usize, length: f64, boundary: Boundary) -> Result<Self> {
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "1D grid needs an even N >= 8, got {n}"
            )));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidInput(format!(
                "grid length must be positive, got {length}"
            )));
        }
        Ok(Self {
            n,
            length,
            boundary,
        })
    }

    pub fn h(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Number of unknowns of the discrete operator.
    pub fn unknowns(&self) -> usize {
        match self.boundary {
            Boundary::Periodic => self.n,
            Boundary::Dirichlet => self.n - 1,
            Boundary::Neumann => self.n + 1,
        }
    }
}

/// `−c d²/ds² + q(s)` sampled at the grid nodes `s_i = i h`, `i = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator1D {
    pub kinetic: f64,
    pub potential: Vec<f64>,
    pub grid: Grid1D,
}

impl Operator1D {
    pub fn new(kinetic: f64, potential: Vec<f64>, grid: Grid1D) -> Result<Self> {
        if !(kinetic > 0.0) || !kinetic.is_finite() {
            return Err(Error::InvalidInput(format!(
                "kinetic coefficient must be positive, got {kinetic}"
            )));
        }
        if potential.len() != grid.n + 1 {
            return Err(Error::InvalidInput(format!(
                "potential has {} samples, grid needs {}",
                potential.len(),
                grid.n + 1
            )));
        }
        Ok(Self {
            kinetic,
            potential,
            grid,
        })
    }

    /// Same operator on the grid that keeps every `stride`-th node.
    fn matrix_with_stride(&self, stride: usize) -> Result<SymTridiag> {
        let n = self.grid.n / stride;
        let h = self.grid.h() * stride as f64;
        let k = self.kinetic / (h * h);
        let q = |i: usize| self.potential[i * stride];
        let (diag, off, corner) = match self.grid.boundary {
            Boundary::Periodic => (
                (0..n).map(|i| 2.0 * k + q(i)).collect(),
                vec![-k; n - 1],
                -k,
            ),
            Boundary::Dirichlet => (
                (1..n).map(|i| 2.0 * k + q(i)).collect(),
                vec![-k; n - 2],
                0.0,
            ),
            Boundary::Neumann => {
                // Ghost-point reflection, symmetrized by half weights at the ends.
                let mut off = vec![-k; n];
                off[0] = -std::f64::consts::SQRT_2 * k;
                off[n - 1] = -std::f64::consts::SQRT_2 * k;
                ((0..=n).map(|i| 2.0 * k + q(i)).collect(), off, 0.0)
            }
        };
        SymTridiag::new(diag, off, corner)
    }

    pub fn matrix(&self) -> Result<SymTridiag> {
        self.matrix_with_stride(1)
    }
}

/// Ordered eigenvalues with per-eigenvalue error estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum1D {
    /// Richardson-extrapolated eigenvalues (ascending, with multiplicity).
    pub values: Vec<f64>,
    /// Eigenvalues of the fine-grid matrix.
    pub raw: Vec<f64>,
    /// Estimated discretization error of `values` (positive).
    pub err_est: Vec<f64>,
    /// Number of grid intervals of the fine grid.
    pub n_grid: usize,
}

impl Spectrum1D {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Groups eigenvalues closer than `1e-9·max(1,|μ|)` into multiplets;
    /// returns `(first value, multiplicity)`.
    pub fn multiplets(&self) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for &v in &self.values {
            match out.last_mut() {
                Some((w, m)) if (v - *w).abs() <= 1e-9 * w.abs().max(1.0) => *m += 1,
                _ => out.push((v, 1)),
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["j", "mu", "err_est"])?;
        for (j, (mu, e)) in self.values.iter().zip(&self.err_est).enumerate() {
            w.write_record(&[
                (j + 1).to_string(),
                format!("{mu:.15e}"),
                format!("{e:.3e}"),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Curvature potential of the strip form,
/// `V = ½(1+uγ)⁻³uγ″ − (5/4)(1+uγ)⁻⁴u²γ′² − ¼(1+uγ)⁻²γ²`.
pub fn potential_v(curve: &ArcCurve, s: f64, u: f64) -> Result<f64> {
    let (g, dg, ddg) = curve.curvature_derivs(s);
    let w = 1.0 + u * g;
    if !(w > 0.0) {
        return Err(Error::domain(format!(
            "1 + u*gamma = {w} <= 0 at s={s}, u={u}"
        )));
    }
    Ok(v_from_parts(g, dg, ddg, u))
}

pub(crate) fn v_from_parts(g: f64, dg: f64, ddg: f64, u: f64) -> f64 {
    let w = 1.0 + u * g;
    0.5 * u * ddg / w.powi(3) - 1.25 * u * u * dg * dg / w.powi(4) - 0.25 * g * g / (w * w)
}

fn check_half_width(curve: &ArcCurve, a: f64) -> Result<()> {
    if !(a >= 0.0) || !(a * curve.gamma_plus < 0.5) {
        return Err(Error::domain(format!(
            "half-width a = {a} needs 0 <= a*gamma_plus < 1/2 (gamma_plus = {})",
            curve.gamma_plus
        )));
    }
    Ok(())
}

/// `(V₋(s), V₊(s))` with `V₋ ≤ V(s,u) ≤ V₊` for `|u| < a`:
///
/// `V₊ = ½(1−aγ₊)⁻³aγ″₊ − (5/4)(1+aγ₊)⁻⁴a²γ′₊² − ¼(1+aγ₊)⁻²γ(s)²`,
/// `V₋ = −½(1−aγ₊)⁻³aγ″₊ − (5/4)(1−aγ₊)⁻⁴a²γ′₊² − ¼(1−aγ₊)⁻²γ(s)²`.
pub fn potential_bounds_vpm(curve: &ArcCurve, a: f64, s: f64) -> Result<(f64, f64)> {
    check_half_width(curve, a)?;
    let g = curve.curvature(s);
    Ok(vpm_from_parts(curve, a, g))
}

pub(crate) fn vpm_from_parts(curve: &ArcCurve, a: f64, g: f64) -> (f64, f64) {
    let gp = curve.gamma_plus;
    let (lo, hi) = (1.0 - a * gp, 1.0 + a * gp);
    let curv = 0.5 * a * curve.ddgamma_plus / lo.powi(3);
    let grad = 1.25 * a * a * curve.dgamma_plus.powi(2);
    let vm = -curv - grad / lo.powi(4) - 0.25 * g * g / (lo * lo);
    let vp = curv - grad / hi.powi(4) - 0.25 * g * g / (hi * hi);
    (vm, vp)
}

fn nodes(grid: &Grid1D) -> impl Iterator<Item = f64> + '_ {
    let h = grid.h();
    (0..=grid.n).map(move |i| i as f64 * h)
}

/// `S = −d²/ds² − γ²/4` with periodic closure.
pub fn build_s(curve: &ArcCurve, grid: Grid1D) -> Result<Operator1D> {
    if grid.boundary != Boundary::Periodic {
        return Err(Error::InvalidInput(
            "S is defined with periodic boundary conditions".into(),
        ));
    }
    check_grid_length(curve, &grid)?;
    let q = nodes(&grid)
        .map(|s| {
            let g = curve.curvature(s);
            -0.25 * g * g
        })
        .collect();
    Operator1D::new(1.0, q, grid)
}

fn check_grid_length(curve: &ArcCurve, grid: &Grid1D) -> Result<()> {
    if (grid.length - curve.length).abs() > 1e-12 * curve.length {
        return Err(Error::InvalidInput(format!(
            "grid length {} differs from curve length {}",
            grid.length, curve.length
        )));
    }
    Ok(())
}

/// `U±_a = −(1∓aγ₊)⁻² d²/ds² + V±(s)`. Open-arc variants pair Dirichlet
/// ends with `+` and Neumann ends with `−`.
pub fn build_u(curve: &ArcCurve, a: f64, sign: Sign, grid: Grid1D) -> Result<Operator1D> {
    check_half_width(curve, a)?;
    check_grid_length(curve, &grid)?;
    match (sign, grid.boundary) {
        (Sign::Minus, Boundary::Dirichlet) | (Sign::Plus, Boundary::Neumann) => {
            return Err(Error::InvalidInput(format!(
                "boundary {:?} is not a bound for sign {}; use dirichlet with plus, neumann with minus",
                grid.boundary,
                sign.as_str()
            )))
        }
        _ => {}
    }
    let gp = curve.gamma_plus;
    let kinetic = match sign {
        Sign::Plus => (1.0 - a * gp).powi(-2),
        Sign::Minus => (1.0 + a * gp).powi(-2),
    };
    let q = nodes(&grid)
        .map(|s| {
            let (vm, vp) = vpm_from_parts(curve, a, curve.curvature(s));
            match sign {
                Sign::Plus => vp,
                Sign::Minus => vm,
            }
        })
        .collect();
    Operator1D::new(kinetic, q, grid)
}

fn check_count(op: &Operator1D, n: usize) -> Result<()> {
    if n > op.grid.n / 4 {
        return Err(Error::InvalidInput(format!(
            "requested {n} eigenvalues on a grid with N = {}; at most N/4 are resolved",
            op.grid.n
        )));
    }
    Ok(())
}

/// The `n` lowest eigenvalues of the fine-grid matrix.
pub fn eigenvalues_raw(op: &Operator1D, n: usize) -> Result<Vec<f64>> {
    check_count(op, n)?;
    op.matrix()?.lowest(n)
}

/// The `n` lowest eigenvalues, Richardson-extrapolated from grids `N` and `N/2`.
pub fn eigenvalues_1d(op: &Operator1D, n: usize) -> Result<Spectrum1D> {
    check_count(op, n)?;
    let fine = op.matrix()?.lowest(n)?;
    let coarse = op.matrix_with_stride(2)?.lowest(n)?;
    let (values, err_est) = fine
        .iter()
        .zip(&coarse)
        .map(|(&f, &c)| {
            let (v, e) = richardson2(f, c);
            (v, e.max(1e-15 * v.abs().max(1.0)))
        })
        .unzip();
    Ok(Spectrum1D {
        values,
        raw: fine,
        err_est,
        n_grid: op.grid.n,
    })
}

/// Number of Richardson-extrapolated eigenvalues strictly below `t`.
///
/// Only the eigenvalues in an index window around `t` are computed: indices
/// whose fine-grid eigenvalue lies below `t − Δ` are counted directly, where
/// `Δ` is doubled until it exceeds twice the largest extrapolation
/// correction in the window.
pub fn count_extrapolated_below(op: &Operator1D, t: f64) -> Result<usize> {
    let fine = op.matrix()?;
    let coarse = op.matrix_with_stride(2)?;
    let cap = op.grid.n / 4;
    let mut delta = 1e-6 * t.abs().max(1.0);
    loop {
        let lo = fine.count_below(t - delta);
        let hi = fine.count_below(t + delta) + 1;
        if hi > cap {
            return Err(Error::InvalidInput(format!(
                "counting below {t} needs eigenvalue {hi} on a grid with N = {}; at most N/4 are resolved",
                op.grid.n
            )));
        }
        let f = fine.index_range(lo, hi)?;
        let c = coarse.index_range(lo, hi)?;
        let mut max_corr = 0.0_f64;
        let mut below = 0;
        for (&fv, &cv) in f.iter().zip(&c) {
            let (v, e) = richardson2(fv, cv);
            max_corr = max_corr.max(e);
            if v < t {
                below += 1;
            }
        }
        if 2.0 * max_corr < delta {
            return Ok(lo + below);
        }
        delta *= 2.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{build_curve, CurveSpec};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{PI, TAU};

    fn circle() -> ArcCurve {
        build_curve(&CurveSpec::circle(1.0)).unwrap()
    }

    fn ellipse() -> ArcCurve {
        build_curve(&CurveSpec::ellipse(2.0, 1.0)).unwrap()
    }

    #[test]
    fn potential_values() {
        let c = circle();
        assert_eq!(potential_v(&c, 0.3, 0.0).unwrap(), -0.25);
        assert_relative_eq!(
            potential_v(&c, 0.3, 0.2).unwrap(),
            -0.25 / 1.44,
            epsilon = 1e-15
        );
        assert!(potential_v(&c, 0.0, -1.0).is_err());
        let (vm, vp) = potential_bounds_vpm(&c, 0.1, 2.0).unwrap();
        assert_relative_eq!(vp, -0.25 / 1.21, epsilon = 1e-15);
        assert_relative_eq!(vm, -0.25 / 0.81, epsilon = 1e-15);
        assert!(potential_bounds_vpm(&c, 0.5, 0.0).is_err());
    }

    #[test]
    fn potential_at_ellipse_vertex_matches_direct_formula() {
        let e = ellipse();
        // At the major vertex γ = 2, γ′ = 0 and, from the closed form
        // κ(t) = AB/(A²sin²t + B²cos²t)^{3/2} with ds/dt = B there,
        // γ″ = κ_tt / B² = −3A(A² − B²)/B⁶ = −18.
        let (g, dg, ddg) = e.curvature_derivs(0.0);
        assert_relative_eq!(g, 2.0, epsilon = 1e-10);
        assert!(dg.abs() < 1e-9);
        assert_relative_eq!(ddg, -18.0, epsilon = 1e-7);
        let u = 0.1;
        let want = 0.5 * u * -18.0 / 1.2f64.powi(3) - 0.25 * 4.0 / 1.44;
        assert_relative_eq!(potential_v(&e, 0.0, u).unwrap(), want, epsilon = 1e-8);
    }

    #[test]
    fn bounds_sandwich_v() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // A non-convex loop exercises negative curvature and large γ′.
        let bean = build_curve(&CurveSpec::fourier_loop(
            vec![0.0, 1.0, 0.0, 0.0, 0.0],
            vec![],
            vec![0.0],
            vec![-1.0, 0.0, 0.0, 0.0],
        ))
        .unwrap();
        let wavy = {
            // r(t) = 1 + 0.2 cos 4t in polar form.
            let spec = CurveSpec::fourier_loop(
                vec![0.0, 1.0, 0.0, 0.1, 0.0, 0.1],
                vec![],
                vec![0.0],
                vec![-1.0, 0.0, 0.1, 0.0, -0.1],
            );
            build_curve(&spec).unwrap()
        };
        assert!((0..400).any(|i| wavy.curvature(wavy.length * i as f64 / 400.0) < 0.0));
        for curve in [circle(), ellipse(), bean, wavy] {
            for frac in [0.2, 0.6, 0.98] {
                let a = frac * curve.offset_limit();
                for _ in 0..1000 {
                    let s = rng.random::<f64>() * curve.length;
                    let u = (2.0 * rng.random::<f64>() - 1.0) * a;
                    let v = potential_v(&curve, s, u).unwrap();
                    let (vm, vp) = potential_bounds_vpm(&curve, a, s).unwrap();
                    assert!(vm <= v + 1e-12 && v <= vp + 1e-12, "{vm} {v} {vp}");
                }
            }
        }
    }

    #[test]
    fn circle_closed_form_spectrum() {
        let c = circle();
        let grid = Grid1D::new(512, TAU, Boundary::Periodic).unwrap();
        let sp = eigenvalues_1d(&build_s(&c, grid).unwrap(), 5).unwrap();
        let want = [-0.25, 0.75, 0.75, 3.75, 3.75];
        for (g, w) in sp.values.iter().zip(want) {
            // Remaining error after extrapolation is O(h⁴).
            assert!((g - w).abs() < 1e-7, "{g} vs {w}");
        }
        let m = sp.multiplets();
        assert_eq!(m.iter().map(|x| x.1).collect::<Vec<_>>(), vec![1, 2, 2]);
        assert!(sp.err_est.iter().all(|&e| e > 0.0));
    }

    #[test]
    fn windowed_count_matches_full_spectrum() {
        let c = circle();
        let grid = Grid1D::new(512, TAU, Boundary::Periodic).unwrap();
        let s = build_s(&c, grid).unwrap();
        // m² − 1/4 < 10 for m = 0..3.
        assert_eq!(count_extrapolated_below(&s, 10.0).unwrap(), 7);
        let e = build_curve(&CurveSpec::ellipse(2.0, 1.0)).unwrap();
        let grid = Grid1D::new(1024, e.length, Boundary::Periodic).unwrap();
        let u = build_u(&e, 0.1, Sign::Minus, grid).unwrap();
        let all = eigenvalues_1d(&u, 256).unwrap();
        for t in [-3.0, 0.5, 40.0, 700.0, 3000.0] {
            let want = all.values.iter().filter(|&&v| v < t).count();
            assert_eq!(count_extrapolated_below(&u, t).unwrap(), want, "t = {t}");
        }
        assert!(count_extrapolated_below(&u, 1e6).is_err());
    }

    #[test]
    fn free_periodic_pattern() {
        let l = 3.0;
        let grid = Grid1D::new(1024, l, Boundary::Periodic).unwrap();
        let op = Operator1D::new(1.0, vec![0.0; 1025], grid).unwrap();
        let sp = eigenvalues_1d(&op, 9).unwrap();
        for (j, v) in sp.values.iter().enumerate() {
            let m = j.div_ceil(2) as f64;
            assert!(
                (v - 4.0 * m * m * (PI / l).powi(2)).abs() < 1e-6,
                "j={j}: {v}"
            );
        }
    }

    #[test]
    fn open_arc_variants() {
        let c = circle();
        let a = 0.1;
        let gd = Grid1D::new(512, TAU, Boundary::Dirichlet).unwrap();
        let gn = Grid1D::new(512, TAU, Boundary::Neumann).unwrap();
        let up = eigenvalues_1d(&build_u(&c, a, Sign::Plus, gd).unwrap(), 3).unwrap();
        let um = eigenvalues_1d(&build_u(&c, a, Sign::Minus, gn).unwrap(), 3).unwrap();
        // Constant coefficients: Dirichlet modes (πk/L)², Neumann modes (π(k−1)/L)².
        let (cp, cm) = (0.9f64.powi(-2), 1.1f64.powi(-2));
        let (vp, vm) = (-0.25 / 1.21, -0.25 / 0.81);
        for k in 1..=3 {
            let kk = k as f64;
            assert!((up.values[k - 1] - (cp * (kk / 2.0).powi(2) + vp)).abs() < 1e-7);
            assert!((um.values[k - 1] - (cm * ((kk - 1.0) / 2.0).powi(2) + vm)).abs() < 1e-7);
        }
        assert!(build_u(&c, a, Sign::Minus, gd).is_err());
        assert!(build_u(&c, a, Sign::Plus, gn).is_err());
    }

    #[test]
    fn kinetic_coefficients_and_a_zero() {
        let c = circle();
        let grid = Grid1D::new(64, TAU, Boundary::Periodic).unwrap();
        assert_relative_eq!(
            build_u(&c, 0.1, Sign::Plus, grid).unwrap().kinetic,
            1.234_567_901_234_567_8,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            build_u(&c, 0.1, Sign::Minus, grid).unwrap().kinetic,
            0.826_446_280_991_735_5,
            epsilon = 1e-15
        );
        let e = ellipse();
        let ge = Grid1D::new(64, e.length, Boundary::Periodic).unwrap();
        let s = build_s(&e, ge).unwrap();
        for sign in [Sign::Plus, Sign::Minus] {
            assert_eq!(build_u(&e, 0.0, sign, ge).unwrap(), s);
        }
    }

    #[test]
    fn resolution_guard() {
        let c = circle();
        let grid = Grid1D::new(64, TAU, Boundary::Periodic).unwrap();
        assert!(eigenvalues_1d(&build_s(&c, grid).unwrap(), 17).is_err());
        assert!(Grid1D::new(6, 1.0, Boundary::Periodic).is_err());
    }

    #[test]
    fn second_order_convergence_of_raw_eigenvalues() {
        let e = ellipse();
        let reference = eigenvalues_1d(
            &build_s(&e, Grid1D::new(4096, e.length, Boundary::Periodic).unwrap()).unwrap(),
            3,
        )
        .unwrap();
        let errs: Vec<f64> = [128, 256, 512, 1024]
            .iter()
            .map(|&n| {
                let op =
                    build_s(&e, Grid1D::new(n, e.length, Boundary::Periodic).unwrap()).unwrap();
                (eigenvalues_raw(&op, 3).unwrap()[2] - reference.values[2]).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() < 0.2, "{errs:?}");
        }
    }
}

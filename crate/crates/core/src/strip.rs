//! Two-dimensional oracle: the strip operators `B±_{a,β}` on
//! `(0, L) × (−a, a)`, periodic in `s`, with Dirichlet ends (plus) or the
//! curvature Robin terms (minus) at `u = ±a`.
//!
//! Discretization is by lumped-mass finite differences of the quadratic form
//! on a tensor grid: uniform in `s`, graded in `u` towards the δ line by
//! `u = a·sinh(cξ)/sinh(c)` on a uniform `ξ` grid. The form matrix `K` and
//! the diagonal mass `M` are combined into the symmetric `M^{-1/2} K M^{-1/2}`.
//! The δ line contributes `−β·h_s` to the form on each `u = 0` node.

use std::io::Write;

use crate::curve::{tubular_point, ArcCurve, TubularRadius};
use crate::error::{Error, Result};
use crate::linalg::{
    lowest_eigenpairs, richardson2, subspace::to_banded, CsrMatrix, SubspaceOptions,
};
use crate::operator1d::{v_from_parts, vpm_from_parts};
use crate::transverse::Variant;

/// The curve carrying the δ interaction, or a flat periodic line.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum StripGeometry {
    Curve {
        curve: ArcCurve,
        /// Largest half-width with a certified injective tubular map.
        a_cap: f64,
    },
    /// `γ ≡ 0` on a segment of the given length, periodic in `s`.
    Flat { length: f64 },
}

impl StripGeometry {
    /// Uses `max(a₁, a_scan)` of the certificate as the admissible half-width.
    pub fn from_curve(curve: &ArcCurve, radius: &TubularRadius) -> Self {
        StripGeometry::Curve {
            curve: curve.clone(),
            a_cap: radius.a1.max(radius.a_scan),
        }
    }

    pub fn length(&self) -> f64 {
        match self {
            StripGeometry::Curve { curve, .. } => curve.length,
            StripGeometry::Flat { length } => *length,
        }
    }

    fn gamma_plus(&self) -> f64 {
        match self {
            StripGeometry::Curve { curve, .. } => curve.gamma_plus,
            StripGeometry::Flat { .. } => 0.0,
        }
    }

    fn a_cap(&self) -> f64 {
        match self {
            StripGeometry::Curve { a_cap, .. } => *a_cap,
            StripGeometry::Flat { .. } => f64::INFINITY,
        }
    }

    fn curvature_derivs(&self, s: f64) -> (f64, f64, f64) {
        match self {
            StripGeometry::Curve { curve, .. } => curve.curvature_derivs(s),
            StripGeometry::Flat { .. } => (0.0, 0.0, 0.0),
        }
    }

    /// `(V₋(s), V₊(s))`.
    fn vpm(&self, a: f64, g: f64) -> (f64, f64) {
        match self {
            StripGeometry::Curve { curve, .. } => vpm_from_parts(curve, a, g),
            StripGeometry::Flat { .. } => (0.0, 0.0),
        }
    }

    /// `Φ(s, u)` in the plane.
    pub fn point(&self, s: f64, u: f64) -> [f64; 2] {
        match self {
            StripGeometry::Curve { curve, .. } => tubular_point(curve, s, u),
            StripGeometry::Flat { .. } => [s, u],
        }
    }
}

/// Tensor grid with `ns` points in `s` and `nu` intervals in `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripGrid {
    pub ns: usize,
    pub nu: usize,
    pub a: f64,
    pub length: f64,
    /// Grading parameter `c`; 0 gives a uniform grid.
    pub grading: f64,
}

impl StripGrid {
    pub const DEFAULT_GRADING: f64 = 4.0;

    pub fn new(ns: usize, nu: usize, a: f64, length: f64) -> Result<Self> {
        if ns < 64 {
            return Err(Error::InvalidInput(format!(
                "strip grid needs ns >= 64, got {ns}"
            )));
        }
        if nu < 32 || !nu.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "strip grid needs an even nu >= 32, got {nu}"
            )));
        }
        Self::unchecked(ns, nu, a, length, Self::DEFAULT_GRADING)
    }

    pub fn with_grading(mut self, grading: f64) -> Result<Self> {
        if !(grading >= 0.0 && grading.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "grading must be >= 0, got {grading}"
            )));
        }
        self.grading = grading;
        Ok(self)
    }

    fn unchecked(ns: usize, nu: usize, a: f64, length: f64, grading: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::domain(format!(
                "half-width must be positive, got {a}"
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::domain(format!(
                "length must be positive, got {length}"
            )));
        }
        Ok(Self {
            ns,
            nu,
            a,
            length,
            grading,
        })
    }

    /// Every other node in both directions.
    pub fn coarsened(&self) -> Result<Self> {
        if !self.ns.is_multiple_of(2) || !self.nu.is_multiple_of(4) {
            return Err(Error::InvalidInput(format!(
                "grid {}x{} has no coarse subgrid with u = 0 as a node",
                self.ns, self.nu
            )));
        }
        Self::unchecked(self.ns / 2, self.nu / 2, self.a, self.length, self.grading)
    }

    pub fn hs(&self) -> f64 {
        self.length / self.ns as f64
    }

    /// The `u` nodes, `nu + 1` of them, with `u = 0` at index `nu/2`.
    pub fn u_nodes(&self) -> Vec<f64> {
        let c = self.grading;
        (0..=self.nu)
            .map(|j| {
                let xi = 2.0 * j as f64 / self.nu as f64 - 1.0;
                if j == self.nu / 2 {
                    0.0
                } else if c > 0.0 {
                    self.a * (c * xi).sinh() / c.sinh()
                } else {
                    self.a * xi
                }
            })
            .collect()
    }
}

/// Exact curvilinear form, or the separated comparison form with
/// coefficients `(1∓aγ₊)⁻²`, `V±(s)` and Robin coefficient `−γ₊`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StripForm {
    Exact,
    Separated,
}

#[derive(Debug, Clone)]
pub struct StripOperator {
    /// `M^{-1/2} K M^{-1/2}`.
    pub matrix: CsrMatrix,
    /// The form matrix `K`.
    pub form: CsrMatrix,
    /// Lumped mass per unknown.
    pub mass: Vec<f64>,
    /// `(i, j)` grid indices of each unknown.
    pub nodes: Vec<(usize, usize)>,
    /// Bandwidth-reducing ordering, `perm[unknown] = position`.
    pub perm: Vec<usize>,
    pub variant: Variant,
    pub kind: StripForm,
    pub beta: f64,
    pub grid: StripGrid,
    geometry: StripGeometry,
}

/// Assembles the discretized `b±_{a,β}` (or its separated comparison form).
pub fn assemble_strip(
    geometry: &StripGeometry,
    beta: f64,
    grid: &StripGrid,
    variant: Variant,
    kind: StripForm,
) -> Result<StripOperator> {
    let a = grid.a;
    let gp = geometry.gamma_plus();
    if !(a * gp < 0.5) {
        return Err(Error::domain(format!(
            "a*gamma_plus = {} must be below 1/2",
            a * gp
        )));
    }
    if a > geometry.a_cap() {
        return Err(Error::domain(format!(
            "half-width {a} exceeds the certified tubular radius {}",
            geometry.a_cap()
        )));
    }
    if (grid.length - geometry.length()).abs() > 1e-12 * grid.length {
        return Err(Error::InvalidInput(format!(
            "grid length {} differs from curve length {}",
            grid.length,
            geometry.length()
        )));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::domain(format!(
            "beta must be non-negative, got {beta}"
        )));
    }
    let (ns, nu) = (grid.ns, grid.nu);
    let hs = grid.hs();
    let u = grid.u_nodes();
    let hu: Vec<f64> = u.windows(2).map(|w| w[1] - w[0]).collect();
    let mut wu = vec![0.0; nu + 1];
    for (j, h) in hu.iter().enumerate() {
        wu[j] += 0.5 * h;
        wu[j + 1] += 0.5 * h;
    }
    let (j_first, j_last) = match variant {
        Variant::Plus => (1, nu - 1),
        Variant::Minus => (0, nu),
    };
    let per_s = j_last - j_first + 1;
    let index = |i: usize, j: usize| -> Option<usize> {
        (j >= j_first && j <= j_last).then(|| i * per_s + j - j_first)
    };
    let n = ns * per_s;
    let nodes: Vec<(usize, usize)> = (0..ns)
        .flat_map(|i| (j_first..=j_last).map(move |j| (i, j)))
        .collect();
    let mass: Vec<f64> = nodes.iter().map(|&(_, j)| hs * wu[j]).collect();

    let derivs: Vec<(f64, f64, f64)> = (0..ns)
        .map(|i| geometry.curvature_derivs(i as f64 * hs))
        .collect();
    let mid_gamma: Vec<f64> = (0..ns)
        .map(|i| geometry.curvature_derivs((i as f64 + 0.5) * hs).0)
        .collect();
    let kin_sep = match variant {
        Variant::Plus => (1.0 - a * gp).powi(-2),
        Variant::Minus => (1.0 + a * gp).powi(-2),
    };

    let mut t: Vec<(usize, usize, f64)> = Vec::with_capacity(7 * n);
    let edge = |t: &mut Vec<(usize, usize, f64)>, p: Option<usize>, q: Option<usize>, c: f64| {
        if let Some(p) = p {
            t.push((p, p, c));
        }
        if let Some(q) = q {
            t.push((q, q, c));
        }
        if let (Some(p), Some(q)) = (p, q) {
            t.push((p, q, -c));
            t.push((q, p, -c));
        }
    };
    for i in 0..ns {
        let inext = (i + 1) % ns;
        let (g, dg, ddg) = derivs[i];
        let (vm, vp) = geometry.vpm(a, g);
        for j in j_first..=j_last {
            let metric = match kind {
                StripForm::Exact => (1.0 + u[j] * mid_gamma[i]).powi(-2),
                StripForm::Separated => kin_sep,
            };
            edge(&mut t, index(i, j), index(inext, j), wu[j] * metric / hs);
            let v = match (kind, variant) {
                (StripForm::Exact, _) => v_from_parts(g, dg, ddg, u[j]),
                (StripForm::Separated, Variant::Plus) => vp,
                (StripForm::Separated, Variant::Minus) => vm,
            };
            let p = index(i, j).expect("unknown node");
            t.push((p, p, hs * wu[j] * v));
        }
        for j in 0..nu {
            edge(&mut t, index(i, j), index(i, j + 1), hs / hu[j]);
        }
        let mid = index(i, nu / 2).expect("u = 0 is an unknown");
        t.push((mid, mid, -beta * hs));
        if variant == Variant::Minus {
            let (top, bottom) = match kind {
                StripForm::Exact => (-0.5 * g / (1.0 + a * g), 0.5 * g / (1.0 - a * g)),
                StripForm::Separated => (-gp, -gp),
            };
            let p = index(i, nu).expect("boundary node");
            t.push((p, p, hs * top));
            let p = index(i, 0).expect("boundary node");
            t.push((p, p, hs * bottom));
        }
    }
    let form = CsrMatrix::from_triplets(n, &t);
    let scaled: Vec<(usize, usize, f64)> = form
        .triplets()
        .map(|(p, q, v)| (p, q, v / (mass[p] * mass[q]).sqrt()))
        .collect();
    let matrix = CsrMatrix::from_triplets(n, &scaled);

    // Fold the periodic s index so that s-neighbours stay within two slabs.
    let fold = |i: usize| {
        if i < ns / 2 {
            2 * i
        } else {
            2 * (ns - 1 - i) + 1
        }
    };
    let perm = nodes
        .iter()
        .map(|&(i, j)| fold(i) * per_s + j - j_first)
        .collect();
    Ok(StripOperator {
        matrix,
        form,
        mass,
        nodes,
        perm,
        variant,
        kind,
        beta,
        grid: *grid,
        geometry: geometry.clone(),
    })
}

impl StripOperator {
    pub fn geometry(&self) -> &StripGeometry {
        &self.geometry
    }

    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    /// Number of eigenvalues strictly below `x`, by `LDLᵀ` inertia.
    pub fn count_below(&self, x: f64) -> Result<usize> {
        to_banded(&self.matrix, &self.perm).count_below(x)
    }

    /// Shift for the eigensolver: below `−β²/4` by a margin covering the
    /// most negative potential and boundary terms.
    fn default_shift(&self) -> f64 {
        let diag_min = (0..self.dim())
            .map(|p| self.form.get(p, p) / self.mass[p])
            .fold(f64::INFINITY, f64::min);
        let b2 = 0.25 * self.beta * self.beta;
        -b2 - 0.02 * b2 - 1.0 - diag_min.min(0.0).abs().min(b2)
    }

    /// Writes `row col value` triplets of the symmetric matrix.
    pub fn write_triplets<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "row col value")?;
        for (p, q, v) in self.matrix.triplets() {
            writeln!(out, "{p} {q} {v:.17e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StripSpectrum {
    /// Richardson-extrapolated eigenvalues.
    pub values: Vec<f64>,
    /// Fine-grid eigenvalues.
    pub raw: Vec<f64>,
    /// `|κ_h − κ_{2h}|/3`.
    pub err_est: Vec<f64>,
    /// Eigensolver residuals on the fine grid.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    /// Fine-grid eigenvectors in the basis of [`StripOperator::matrix`].
    pub vectors: Vec<Vec<f64>>,
}

/// The `m` lowest eigenvalues on the fine grid and on the coarsened grid,
/// combined by Richardson extrapolation.
pub fn lowest_eigenvalues(op: &StripOperator, m: usize) -> Result<StripSpectrum> {
    let fine = lowest_raw(op, m)?;
    let coarse_op = assemble_strip(
        &op.geometry,
        op.beta,
        &op.grid.coarsened()?,
        op.variant,
        op.kind,
    )?;
    let coarse = lowest_raw(&coarse_op, m)?;
    let (values, err_est) = fine
        .values
        .iter()
        .zip(&coarse.values)
        .map(|(&f, &c)| richardson2(f, c))
        .unzip();
    Ok(StripSpectrum {
        values,
        raw: fine.values,
        err_est,
        residuals: fine.residuals,
        iterations: fine.iterations,
        vectors: fine.vectors,
    })
}

/// The `m` lowest eigenpairs of the fine-grid matrix.
pub fn lowest_raw(op: &StripOperator, m: usize) -> Result<crate::linalg::EigenPairs> {
    let opts = SubspaceOptions {
        guard_vectors: 4 + m / 2,
        tol: 1e-9,
        ..SubspaceOptions::default()
    };
    lowest_eigenpairs(&op.matrix, &op.perm, m, op.default_shift(), opts)
}

/// Samples `(x, y, ψ)` of the plane function `ψ = (1+uγ)^{-1/2} φ∘Φ⁻¹`,
/// where `φ` are the nodal values of `vector` (given in the basis of the
/// symmetric matrix).
pub fn pushforward_eigenfunction(op: &StripOperator, vector: &[f64]) -> Result<Vec<[f64; 3]>> {
    if vector.len() != op.dim() {
        return Err(Error::InvalidInput(format!(
            "vector has {} entries, operator has {} unknowns",
            vector.len(),
            op.dim()
        )));
    }
    if vector.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("vector has non-finite entries".into()));
    }
    let u = op.grid.u_nodes();
    let hs = op.grid.hs();
    Ok(op
        .nodes
        .iter()
        .zip(vector)
        .zip(&op.mass)
        .map(|((&(i, j), &v), &m)| {
            let s = i as f64 * hs;
            let g = op.geometry.curvature_derivs(s).0;
            let phi = v / m.sqrt();
            let [x, y] = op.geometry.point(s, u[j]);
            [x, y, phi / (1.0 + u[j] * g).sqrt()]
        })
        .collect())
}

/// Writes `x,y,psi`.
pub fn write_eigenfunction_csv<W: Write>(out: W, points: &[[f64; 3]]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "psi"])?;
    for p in points {
        w.write_record(&[
            format!("{:.10e}", p[0]),
            format!("{:.10e}", p[1]),
            format!("{:.10e}", p[2]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{build_curve, certify_tubular_radius, CurveSpec};
    use crate::transverse::TransverseProblem;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{PI, TAU};

    fn circle_geometry() -> StripGeometry {
        let c = build_curve(&CurveSpec::circle(1.0)).unwrap();
        let r = certify_tubular_radius(&c, 1000).unwrap();
        StripGeometry::from_curve(&c, &r)
    }

    #[test]
    fn grid_nodes() {
        let g = StripGrid::new(64, 32, 0.3, 1.0).unwrap();
        let u = g.u_nodes();
        assert_eq!(u.len(), 33);
        assert_eq!(u[16], 0.0);
        assert!((u[0] + 0.3).abs() < 1e-15 && (u[32] - 0.3).abs() < 1e-15);
        assert!(u.windows(2).all(|w| w[1] > w[0]));
        assert!(u[17] - u[16] < u[32] - u[31]);
        let c = g.coarsened().unwrap();
        let uc = c.u_nodes();
        for (k, v) in uc.iter().enumerate() {
            assert!((v - u[2 * k]).abs() < 1e-15);
        }
        assert!(StripGrid::new(32, 32, 0.3, 1.0).is_err());
        assert!(StripGrid::new(64, 30, 0.3, 1.0).is_err());
        assert!(StripGrid::new(64, 33, 0.3, 1.0).is_err());
    }

    #[test]
    fn symmetric_and_refuses_bad_widths() {
        let geo = circle_geometry();
        let grid = StripGrid::new(64, 32, 0.3, TAU).unwrap();
        for v in [Variant::Plus, Variant::Minus] {
            let op = assemble_strip(&geo, 20.0, &grid, v, StripForm::Exact).unwrap();
            assert!(op.matrix.is_symmetric());
            assert!(op.form.is_symmetric());
        }
        let wide = StripGrid::new(64, 32, 0.49, TAU).unwrap();
        assert!(matches!(
            assemble_strip(&geo, 20.0, &wide, Variant::Plus, StripForm::Exact),
            Err(Error::Domain(_))
        ));
        let e = build_curve(&CurveSpec::ellipse(2.0, 1.0)).unwrap();
        let r = certify_tubular_radius(&e, 1000).unwrap();
        let geo = StripGeometry::from_curve(&e, &r);
        let a = r.a1.max(r.a_scan) * 1.01;
        if a * e.gamma_plus < 0.5 {
            let g = StripGrid::new(64, 32, a, e.length).unwrap();
            assert!(assemble_strip(&geo, 20.0, &g, Variant::Plus, StripForm::Exact).is_err());
        }
    }

    #[test]
    fn flat_dirichlet_strip() {
        let geo = StripGeometry::Flat { length: 1.0 };
        let grid = StripGrid::new(64, 64, 0.5, 1.0)
            .unwrap()
            .with_grading(0.0)
            .unwrap();
        let op = assemble_strip(&geo, 0.0, &grid, Variant::Plus, StripForm::Exact).unwrap();
        let sp = lowest_eigenvalues(&op, 1).unwrap();
        assert!((sp.values[0] - PI * PI).abs() < 1e-4, "{}", sp.values[0]);
        // Interior rows are the plain five-point stencil.
        let h = 1.0 / 64.0;
        let p = op.nodes.iter().position(|&n| n == (5, 20)).unwrap();
        assert!((op.matrix.get(p, p) - 4.0 / (h * h)).abs() < 1e-8);
    }

    #[test]
    fn flat_delta_line_matches_transverse() {
        let geo = StripGeometry::Flat { length: 2.0 };
        let grid = StripGrid::new(64, 64, 1.0, 2.0).unwrap();
        for v in [Variant::Plus, Variant::Minus] {
            let op = assemble_strip(&geo, 10.0, &grid, v, StripForm::Exact).unwrap();
            let sp = lowest_eigenvalues(&op, 1).unwrap();
            let exact = TransverseProblem {
                a: 1.0,
                beta: 10.0,
                gamma_plus: 0.0,
                variant: v,
            }
            .solve()
            .unwrap();
            assert!(
                (sp.values[0] - exact.zeta).abs() < 2.0 * sp.err_est[0] + 1e-3,
                "{v:?}: {} vs {}",
                sp.values[0],
                exact.zeta
            );
            assert!((exact.zeta + 25.0).abs() < 0.01);
        }
    }

    #[test]
    fn delta_row_is_independent_of_hu() {
        let geo = StripGeometry::Flat { length: 1.0 };
        let mut contributions = Vec::new();
        for nu in [32, 64] {
            let grid = StripGrid::new(64, nu, 0.5, 1.0).unwrap();
            let with = assemble_strip(&geo, 7.0, &grid, Variant::Plus, StripForm::Exact).unwrap();
            let without =
                assemble_strip(&geo, 0.0, &grid, Variant::Plus, StripForm::Exact).unwrap();
            let x: Vec<f64> = with
                .nodes
                .iter()
                .map(|&(i, j)| 1.0 + (i + j) as f64 * 0.01)
                .collect();
            let d = with.form.quadratic_form(&x) - without.form.quadratic_form(&x);
            let line: f64 = with
                .nodes
                .iter()
                .zip(&x)
                .filter(|((_, j), _)| *j == nu / 2)
                .map(|(_, v)| v * v / 64.0)
                .sum();
            assert!((d + 7.0 * line).abs() < 1e-10);
            contributions.push(d / line);
        }
        assert!((contributions[0] - contributions[1]).abs() < 1e-12);
    }

    #[test]
    fn circle_fourier_block_oracle() {
        // Constant curvature: each s-mode gives a 1D u-problem with the
        // discrete s-eigenvalue 4/h² sin²(πm/N_s).
        let geo = circle_geometry();
        let (ns, nu, a, beta) = (64usize, 32usize, 0.3, 20.0);
        let grid = StripGrid::new(ns, nu, a, TAU).unwrap();
        for v in [Variant::Plus, Variant::Minus] {
            let op = assemble_strip(&geo, beta, &grid, v, StripForm::Exact).unwrap();
            let got = lowest_raw(&op, 5).unwrap().values;
            let u = grid.u_nodes();
            let hu: Vec<f64> = u.windows(2).map(|w| w[1] - w[0]).collect();
            let mut w = vec![0.0; nu + 1];
            for (j, h) in hu.iter().enumerate() {
                w[j] += 0.5 * h;
                w[j + 1] += 0.5 * h;
            }
            let hs = TAU / ns as f64;
            let range: Vec<usize> = match v {
                Variant::Plus => (1..nu).collect(),
                Variant::Minus => (0..=nu).collect(),
            };
            let mut want = Vec::new();
            for m in 0..4 {
                let ls = 4.0 / (hs * hs) * (PI * m as f64 / ns as f64).sin().powi(2);
                let k = range.len();
                let mut kk = DMatrix::<f64>::zeros(k, k);
                for (r, &j) in range.iter().enumerate() {
                    let g = 1.0 + u[j];
                    kk[(r, r)] += w[j] * (ls / (g * g) - 0.25 / (g * g));
                }
                for j in 0..nu {
                    let c = 1.0 / hu[j];
                    let p = range.iter().position(|&x| x == j);
                    let q = range.iter().position(|&x| x == j + 1);
                    if let Some(p) = p {
                        kk[(p, p)] += c;
                    }
                    if let Some(q) = q {
                        kk[(q, q)] += c;
                    }
                    if let (Some(p), Some(q)) = (p, q) {
                        kk[(p, q)] -= c;
                        kk[(q, p)] -= c;
                    }
                }
                let mid = range.iter().position(|&x| x == nu / 2).unwrap();
                kk[(mid, mid)] -= beta;
                if v == Variant::Minus {
                    kk[(k - 1, k - 1)] -= 0.5 / (1.0 + a);
                    kk[(0, 0)] += 0.5 / (1.0 - a);
                }
                let s =
                    DMatrix::from_fn(k, k, |p, q| kk[(p, q)] / (w[range[p]] * w[range[q]]).sqrt());
                let lowest = s
                    .symmetric_eigenvalues()
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min);
                want.push(lowest);
                if m > 0 {
                    want.push(lowest);
                }
            }
            want.sort_by(f64::total_cmp);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-8 * w.abs().max(1.0), "{v:?}: {g} vs {w}");
            }
        }
    }

    #[test]
    fn exact_form_below_separated_plus_above_separated_minus() {
        let e = build_curve(&CurveSpec::ellipse(2.0, 1.0)).unwrap();
        let r = certify_tubular_radius(&e, 1000).unwrap();
        let geo = StripGeometry::from_curve(&e, &r);
        let a = 0.1;
        let grid = StripGrid::new(64, 32, a, e.length).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for v in [Variant::Plus, Variant::Minus] {
            let ex = assemble_strip(&geo, 15.0, &grid, v, StripForm::Exact).unwrap();
            let sep = assemble_strip(&geo, 15.0, &grid, v, StripForm::Separated).unwrap();
            for _ in 0..100 {
                let x: Vec<f64> = (0..ex.dim()).map(|_| rng.random::<f64>() - 0.5).collect();
                let (qe, qs) = (ex.form.quadratic_form(&x), sep.form.quadratic_form(&x));
                let tol = 1e-12 * qe.abs().max(qs.abs());
                match v {
                    Variant::Plus => assert!(qe <= qs + tol),
                    Variant::Minus => assert!(qe >= qs - tol),
                }
            }
        }
    }

    #[test]
    fn robin_coefficients_for_constant_curvature() {
        let geo = circle_geometry();
        let (a, nu) = (0.2, 32);
        let grid = StripGrid::new(64, nu, a, TAU).unwrap();
        let with = assemble_strip(&geo, 5.0, &grid, Variant::Minus, StripForm::Exact).unwrap();
        let hs = TAU / 64.0;
        let top = with.nodes.iter().position(|&n| n == (3, nu)).unwrap();
        let bottom = with.nodes.iter().position(|&n| n == (3, 0)).unwrap();
        let u = grid.u_nodes();
        let wtop = 0.5 * (u[nu] - u[nu - 1]);
        let vtop = v_from_parts(1.0, 0.0, 0.0, a);
        let diag_top = with.form.get(top, top);
        let expected_top = {
            let s_edges = 2.0 * wtop * (1.0 + a).powi(-2) / hs;
            let u_edge = hs / (u[nu] - u[nu - 1]);
            s_edges + u_edge + hs * wtop * vtop - hs * 0.5 / (1.0 + a)
        };
        assert!((diag_top - expected_top).abs() < 1e-12 * expected_top.abs());
        let wb = 0.5 * (u[1] - u[0]);
        let vb = v_from_parts(1.0, 0.0, 0.0, -a);
        let expected_bottom = 2.0 * wb * (1.0 - a).powi(-2) / hs
            + hs / (u[1] - u[0])
            + hs * wb * vb
            + hs * 0.5 / (1.0 - a);
        let diag_bottom = with.form.get(bottom, bottom);
        assert!((diag_bottom - expected_bottom).abs() < 1e-12 * expected_bottom.abs());
    }

    #[test]
    fn circle_pairs_and_pushforward() {
        let geo = circle_geometry();
        let beta = 40.0;
        let grid = StripGrid::new(128, 64, 0.3, TAU).unwrap();
        let op = assemble_strip(&geo, beta, &grid, Variant::Plus, StripForm::Exact).unwrap();
        let ep = lowest_raw(&op, 5).unwrap();
        let v = &ep.values;
        assert!(v[0] < v[1]);
        assert!((v[1] - v[2]).abs() < 1e-6 * v[1].abs());
        assert!((v[3] - v[4]).abs() < 1e-6 * v[3].abs());
        assert_eq!(op.count_below(v[0] + 1e-9 * v[0].abs()).unwrap(), 1);

        let pts = pushforward_eigenfunction(&op, &ep.vectors[0]).unwrap();
        let u = grid.u_nodes();
        let mut total = 0.0;
        let mut near = 0.0;
        for ((p, &(_, j)), &m) in pts.iter().zip(&op.nodes).zip(&op.mass) {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!((r - (1.0 + u[j])).abs() < 1e-12);
            let mass = p[2] * p[2] * (1.0 + u[j]) * m;
            total += mass;
            if u[j].abs() <= 4.0 / beta {
                near += mass;
            }
        }
        assert!((total - 1.0).abs() < 1e-6);
        assert!(near / total > 0.95, "{}", near / total);
    }

    #[test]
    fn flat_constant_pushforward() {
        let geo = StripGeometry::Flat { length: 1.0 };
        let grid = StripGrid::new(64, 32, 0.5, 1.0).unwrap();
        let op = assemble_strip(&geo, 0.0, &grid, Variant::Minus, StripForm::Exact).unwrap();
        let x: Vec<f64> = op.mass.iter().map(|m| 2.0 * m.sqrt()).collect();
        let pts = pushforward_eigenfunction(&op, &x).unwrap();
        assert!(pts.iter().all(|p| (p[2] - 2.0).abs() < 1e-14));
    }

    #[test]
    fn exports() {
        let geo = StripGeometry::Flat { length: 1.0 };
        let grid = StripGrid::new(64, 32, 0.5, 1.0).unwrap();
        let op = assemble_strip(&geo, 1.0, &grid, Variant::Plus, StripForm::Exact).unwrap();
        let mut buf = Vec::new();
        op.write_triplets(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("row col value\n"));
        assert_eq!(s.lines().count(), op.matrix.nnz() + 1);
        let mut buf = Vec::new();
        write_eigenfunction_csv(&mut buf, &[[0.0, 1.0, 2.0]]).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("x,y,psi\n"));
    }
}

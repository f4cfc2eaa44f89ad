//! Transverse operators `T±` on `(−a, a)`: an attractive δ of strength `β`
//! at `u = 0`, Dirichlet ends for `T⁺` and Robin ends `f′(±a) = ±γ₊f(±a)` for
//! `T⁻`.
//!
//! The negative eigenvalue `ζ = −k²` sits exponentially close to `−β²/4`, so
//! both secular equations are solved in the variable `ℓ = ln s` with
//! `k = β/2 ∓ s`. The quantity `ζ + β²/4` is carried separately as
//! [`TransverseResult::excess`]; the bound checks use it directly.

use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg::SymTridiag;
use crate::operator1d::Spectrum1D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Dirichlet ends.
    Plus,
    /// Robin ends with coefficient `−γ₊`.
    Minus,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Plus => "plus",
            Variant::Minus => "minus",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransverseProblem {
    pub a: f64,
    pub beta: f64,
    /// Only used by [`Variant::Minus`].
    pub gamma_plus: f64,
    pub variant: Variant,
}

impl TransverseProblem {
    pub fn plus(a: f64, beta: f64) -> Self {
        Self {
            a,
            beta,
            gamma_plus: 0.0,
            variant: Variant::Plus,
        }
    }

    pub fn minus(a: f64, beta: f64, gamma_plus: f64) -> Self {
        Self {
            a,
            beta,
            gamma_plus,
            variant: Variant::Minus,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite();
        if !(ok(self.a) && self.a > 0.0) {
            return Err(Error::domain(format!(
                "half-width a must be positive, got {}",
                self.a
            )));
        }
        if !(ok(self.beta) && self.beta > 0.0) {
            return Err(Error::domain(format!(
                "coupling beta must be positive, got {}",
                self.beta
            )));
        }
        if !(ok(self.gamma_plus) && self.gamma_plus >= 0.0) {
            return Err(Error::domain(format!(
                "gamma_plus must be non-negative, got {}",
                self.gamma_plus
            )));
        }
        Ok(())
    }

    /// First violated hypothesis of the uniqueness-and-bounds statement for
    /// this variant, if any.
    pub fn violated_hypothesis(&self) -> Option<&'static str> {
        let ab = self.a * self.beta;
        match self.variant {
            Variant::Plus if ab <= 8.0 / 3.0 => Some("beta*a <= 8/3"),
            Variant::Plus => None,
            Variant::Minus if ab <= 8.0 => Some("beta*a <= 8"),
            Variant::Minus if self.beta <= 8.0 / 3.0 * self.gamma_plus => {
                Some("beta <= 8/3*gamma_plus")
            }
            Variant::Minus => None,
        }
    }

    /// The analytic enclosure `(lower, upper)` of `ζ`.
    pub fn bounds(&self) -> (f64, f64) {
        let (lo, hi) = self.excess_bounds();
        let q = 0.25 * self.beta * self.beta;
        (lo - q, hi - q)
    }

    /// The enclosure of `ζ + β²/4`.
    fn excess_bounds(&self) -> (f64, f64) {
        let b2 = self.beta * self.beta;
        let e = (-0.5 * self.beta * self.a).exp();
        match self.variant {
            Variant::Plus => (0.0, 2.0 * b2 * e),
            Variant::Minus => (-2205.0 / 16.0 * b2 * e, 0.0),
        }
    }

    /// Solves the secular equation regardless of the hypotheses. The result
    /// is certified only if the hypotheses hold and `ζ` lies strictly inside
    /// the enclosure.
    pub fn solve(&self) -> Result<TransverseResult> {
        self.validate()?;
        let mut r = match self.variant {
            Variant::Plus => root_plus(self.a, self.beta)?,
            Variant::Minus => root_minus(self.a, self.beta, self.gamma_plus)?,
        };
        let (lo, hi) = self.excess_bounds();
        let inside = r.excess > lo && r.excess < hi;
        let (lower, upper) = self.bounds();
        r.problem = *self;
        r.lower_bound = lower;
        r.upper_bound = upper;
        r.hypothesis = self.violated_hypothesis();
        r.certified = r.hypothesis.is_none() && inside;
        Ok(r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransverseResult {
    pub problem: TransverseProblem,
    /// The negative eigenvalue `ζ = −k²`.
    pub zeta: f64,
    pub k: f64,
    /// Deviation `s = |k − β/2|`.
    pub s: f64,
    /// `ζ + β²/4`, computed without cancellation.
    pub excess: f64,
    /// Final bisection bracket in `ℓ = ln s`.
    pub bracket: (f64, f64),
    /// Secular residual; for the minus variant the log of the ratio of the
    /// two sides, i.e. a relative residual.
    pub residual: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub certified: bool,
    /// First violated hypothesis, if any.
    pub hypothesis: Option<&'static str>,
    /// Positive-spectrum floor of `T⁻`, when requested.
    pub floor: Option<f64>,
}

impl TransverseResult {
    /// The violated hypothesis, or `"zeta outside bounds"` when the
    /// hypotheses hold but the enclosure does not.
    pub fn violation(&self) -> Option<&'static str> {
        match (self.certified, self.hypothesis) {
            (true, _) => None,
            (false, Some(h)) => Some(h),
            (false, None) => Some("zeta outside bounds"),
        }
    }
}

/// `g(k) = log(β−2k) − log(β+2k) + 2ka` for `0 < k < β/2`.
pub fn secular_g_plus(a: f64, beta: f64, k: f64) -> Result<f64> {
    if !(k > 0.0 && k < 0.5 * beta) {
        return Err(Error::domain(format!(
            "secular_g_plus needs 0 < k < beta/2, got k = {k}, beta = {beta}"
        )));
    }
    Ok((beta - 2.0 * k).ln() - (beta + 2.0 * k).ln() + 2.0 * k * a)
}

/// `ζ⁺` for `βa > 8/3`.
pub fn solve_zeta_plus(a: f64, beta: f64) -> Result<TransverseResult> {
    let p = TransverseProblem::plus(a, beta);
    p.validate()?;
    if let Some(h) = p.violated_hypothesis() {
        return Err(Error::precondition(h));
    }
    checked(p.solve()?)
}

/// `ζ⁻` for `aβ > 8`, `β > 8γ₊/3`.
pub fn solve_zeta_minus(a: f64, beta: f64, gamma_plus: f64) -> Result<TransverseResult> {
    let p = TransverseProblem::minus(a, beta, gamma_plus);
    p.validate()?;
    if let Some(h) = p.violated_hypothesis() {
        return Err(Error::precondition(h));
    }
    checked(p.solve()?)
}

fn checked(r: TransverseResult) -> Result<TransverseResult> {
    if !r.certified {
        return Err(Error::Internal(format!(
            "zeta = {} (excess {:e}) outside ({}, {}) for {:?}",
            r.zeta, r.excess, r.lower_bound, r.upper_bound, r.problem
        )));
    }
    Ok(r)
}

/// Bisection on an increasing function of `ℓ`, then one Newton step that is
/// kept only if it stays inside the bracket.
fn bisect_increasing(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
) -> (f64, (f64, f64)) {
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = if f(lo).abs() <= f(hi).abs() { lo } else { hi };
    let d = df(x);
    if d.is_finite() && d != 0.0 {
        let y = x - f(x) / d;
        if y >= lo && y <= hi && f(y).abs() <= f(x).abs() {
            x = y;
        }
    }
    (x, (lo, hi))
}

/// Walks `ℓ` down from `hi` until `f` is negative.
fn lower_end(f: &impl Fn(f64) -> f64, hi: f64) -> Result<f64> {
    let mut step = 1.0;
    let mut lo = hi - step;
    while f(lo) >= 0.0 {
        step *= 2.0;
        lo = hi - step;
        if lo < -700.0 {
            return Err(Error::Internal(
                "secular root is below the double-precision range of k - beta/2".into(),
            ));
        }
    }
    Ok(lo)
}

fn root_plus(a: f64, beta: f64) -> Result<TransverseResult> {
    if a * beta <= 2.0 {
        return Err(Error::domain(format!(
            "T+ has no negative eigenvalue for beta*a = {} <= 2",
            a * beta
        )));
    }
    let k_max = 0.5 * (beta * beta - 2.0 * beta / a).sqrt();
    let g_max = secular_g_plus(a, beta, k_max)?;
    if g_max <= 0.0 {
        return Err(Error::Internal(format!(
            "g(k_max) = {g_max:e} <= 0 at a = {a}, beta = {beta}"
        )));
    }
    // k = β/2 − s: g = ln 2s − ln(2β − 2s) + a(β − 2s).
    let g = |l: f64| {
        let s = l.exp();
        (2.0 * s).ln() - (2.0 * (beta - s)).ln() + a * (beta - 2.0 * s)
    };
    let dg = |l: f64| {
        let s = l.exp();
        1.0 + s / (beta - s) - 2.0 * a * s
    };
    let hi = (0.5 * beta - k_max).ln();
    let lo = lower_end(&g, hi)?;
    let (l, bracket) = bisect_increasing(g, dg, lo, hi);
    let s = l.exp();
    let k = 0.5 * beta - s;
    Ok(TransverseResult {
        problem: TransverseProblem::plus(a, beta),
        zeta: -k * k,
        k,
        s,
        excess: s * (beta - s),
        bracket,
        residual: g(l).abs(),
        lower_bound: f64::NAN,
        upper_bound: f64::NAN,
        certified: false,
        hypothesis: None,
        floor: None,
    })
}

/// Even-state secular function for `T⁻` with `k = β/2 + s`:
/// `2ka + ln(k−γ) − ln(k+γ) − ln(2k+β) + ln 2s`, the log of
/// `(k−γ)e^{2ka}/(k+γ) · (2k−β)/(2k+β)`.
fn minus_log_ratio(a: f64, beta: f64, gamma: f64, s: f64) -> f64 {
    let k = 0.5 * beta + s;
    2.0 * k * a + (k - gamma).ln() - (k + gamma).ln() - (2.0 * k + beta).ln() + (2.0 * s).ln()
}

fn root_minus(a: f64, beta: f64, gamma: f64) -> Result<TransverseResult> {
    if 0.5 * beta <= gamma {
        return Err(Error::domain(format!(
            "T- secular equation needs beta/2 > gamma_plus, got beta = {beta}, gamma_plus = {gamma}"
        )));
    }
    let f = |l: f64| minus_log_ratio(a, beta, gamma, l.exp());
    let df = |l: f64| {
        let s = l.exp();
        let k = 0.5 * beta + s;
        s * (2.0 * a + 1.0 / (k - gamma) - 1.0 / (k + gamma) - 2.0 / (2.0 * k + beta)) + 1.0
    };
    // Upper end k = 3β/4, widened if the hypotheses do not hold.
    let mut hi = (0.25 * beta).ln();
    while f(hi) <= 0.0 {
        hi += 1.0;
        if hi > 700.0 {
            return Err(Error::Internal(format!(
                "no sign change of the T- secular equation at a = {a}, beta = {beta}, gamma_plus = {gamma}"
            )));
        }
    }
    let lo = lower_end(&f, hi)?;
    let (l, bracket) = bisect_increasing(f, df, lo, hi);
    let s = l.exp();
    let k = 0.5 * beta + s;
    Ok(TransverseResult {
        problem: TransverseProblem::minus(a, beta, gamma),
        zeta: -k * k,
        k,
        s,
        excess: -s * (beta + s),
        bracket,
        residual: f(l).abs(),
        lower_bound: f64::NAN,
        upper_bound: f64::NAN,
        certified: false,
        hypothesis: None,
        floor: None,
    })
}

/// Result of [`positive_floor_minus`].
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    /// `min{π²/(16a²), βγ₊/2, β²}`.
    pub floor: f64,
    /// Roots of the odd and even positive-energy secular equations found in
    /// `(0, √floor)`; empty when the gap is confirmed.
    pub roots: Vec<f64>,
}

impl GapReport {
    pub fn confirmed(&self) -> bool {
        self.roots.is_empty()
    }
}

/// Odd states `f = sin ku`: `γ sin ka − k cos ka = 0`.
fn odd_positive(a: f64, gamma: f64, k: f64) -> f64 {
    let (sn, cs) = (k * a).sin_cos();
    gamma * sn - k * cs
}

/// Even states `f = cos k|u| − (β/2k) sin k|u|`:
/// `(βγ − 2k²) sin ka − k(β + 2γ) cos ka = 0`.
fn even_positive(a: f64, beta: f64, gamma: f64, k: f64) -> f64 {
    let (sn, cs) = (k * a).sin_cos();
    (beta * gamma - 2.0 * k * k) * sn - k * (beta + 2.0 * gamma) * cs
}

const GAP_SCAN_POINTS: usize = 20_000;

/// Floor of the positive spectrum of `T⁻` for `a < 1/(√2γ₊)`, with a sign
/// scan of the positive-energy secular equations below it.
pub fn positive_floor_minus(a: f64, beta: f64, gamma_plus: f64) -> Result<GapReport> {
    let p = TransverseProblem::minus(a, beta, gamma_plus);
    p.validate()?;
    if std::f64::consts::SQRT_2 * a * gamma_plus >= 1.0 {
        return Err(Error::precondition("a >= 1/(sqrt2*gamma_plus)"));
    }
    let floor = (std::f64::consts::PI.powi(2) / (16.0 * a * a))
        .min(0.5 * beta * gamma_plus)
        .min(beta * beta);
    let k_top = floor.sqrt();
    let mut roots = Vec::new();
    // Both functions vanish at k = 0; the scan starts one step in.
    let h = k_top / GAP_SCAN_POINTS as f64;
    let mut prev = (
        odd_positive(a, gamma_plus, h),
        even_positive(a, beta, gamma_plus, h),
    );
    for i in 2..=GAP_SCAN_POINTS {
        let k = i as f64 * h;
        let cur = (
            odd_positive(a, gamma_plus, k),
            even_positive(a, beta, gamma_plus, k),
        );
        if prev.0 * cur.0 <= 0.0 || prev.1 * cur.1 <= 0.0 {
            roots.push(k);
        }
        prev = cur;
    }
    Ok(GapReport { floor, roots })
}

/// Counts eigenvalues of the finite-difference oracle below
/// `−64·ε·‖A‖` and checks that there is exactly one. For the minus variant
/// the hypothesis `aγ₊ ≤ 1` is also required: beyond it the odd state
/// `tan ka = k/γ₊` turns negative.
pub fn verify_single_negative(problem: &TransverseProblem) -> Result<bool> {
    problem.validate()?;
    if let Some(h) = problem.violated_hypothesis() {
        return Err(Error::precondition(h));
    }
    if problem.variant == Variant::Minus && problem.a * problem.gamma_plus > 1.0 {
        return Err(Error::precondition("a*gamma_plus > 1"));
    }
    let n = single_negative_grid(problem);
    let m = fd_matrix(problem, n)?.0;
    let (lo, hi) = m.gershgorin();
    let tol = 64.0 * f64::EPSILON * lo.abs().max(hi.abs());
    Ok(m.count_below(-tol) == 1)
}

/// A grid resolving the δ well: `h·β ≤ 1/20`, at least 2000 intervals.
fn single_negative_grid(p: &TransverseProblem) -> usize {
    let n = (40.0 * p.a * p.beta).ceil() as usize;
    let n = n.max(2000);
    n + n % 4
}

/// The finite-difference matrix (symmetrized by the lumped mass) and the
/// mass weights, on the nodes `u_i = −a + i·h`, `h = 2a/N`.
fn fd_matrix(p: &TransverseProblem, n: usize) -> Result<(SymTridiag, Vec<f64>)> {
    if n < 8 || !n.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "transverse grid needs an even N >= 8, got {n}"
        )));
    }
    let h = 2.0 * p.a / n as f64;
    let mid = n / 2;
    match p.variant {
        Variant::Plus => {
            // Interior nodes 1..N−1.
            let mut diag = vec![2.0 / (h * h); n - 1];
            diag[mid - 1] -= p.beta / h;
            let off = vec![-1.0 / (h * h); n - 2];
            Ok((SymTridiag::new(diag, off, 0.0)?, vec![h; n - 1]))
        }
        Variant::Minus => {
            let mut mass = vec![h; n + 1];
            mass[0] = 0.5 * h;
            mass[n] = 0.5 * h;
            let mut stiff = vec![2.0 / h; n + 1];
            stiff[0] = 1.0 / h - p.gamma_plus;
            stiff[n] = 1.0 / h - p.gamma_plus;
            stiff[mid] -= p.beta;
            let diag = stiff.iter().zip(&mass).map(|(k, m)| k / m).collect();
            let off = (0..n)
                .map(|i| -1.0 / h / (mass[i] * mass[i + 1]).sqrt())
                .collect();
            Ok((SymTridiag::new(diag, off, 0.0)?, mass))
        }
    }
}

/// Lowest `n_eigs` eigenvalues of the finite-difference discretization on
/// `N` intervals. `values` and `raw` are the `N`-grid eigenvalues;
/// `err_est` is `(4/3)|λ_N − λ_{N/2}|`, the Richardson estimate of their
/// error. `N` must be a multiple of 4.
pub fn fd_transverse_oracle(
    problem: &TransverseProblem,
    n: usize,
    n_eigs: usize,
) -> Result<Spectrum1D> {
    problem.validate()?;
    if !n.is_multiple_of(4) {
        return Err(Error::InvalidInput(format!(
            "transverse oracle needs N divisible by 4, got {n}"
        )));
    }
    let fine = fd_matrix(problem, n)?.0.lowest(n_eigs)?;
    let coarse = fd_matrix(problem, n / 2)?.0.lowest(n_eigs)?;
    let err_est = fine
        .iter()
        .zip(&coarse)
        .map(|(f, c)| 4.0 / 3.0 * (f - c).abs())
        .collect();
    Ok(Spectrum1D {
        values: fine.clone(),
        raw: fine,
        err_est,
        n_grid: n,
    })
}

/// Ground state of the finite-difference discretization as `(u, ψ)` on the
/// unknown nodes, normalized in the discrete `L²` norm and positive at 0.
pub fn fd_ground_state(problem: &TransverseProblem, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    problem.validate()?;
    let (m, mass) = fd_matrix(problem, n)?;
    let lambda = m.lowest(1)?[0];
    let v = m.eigenvector(lambda)?;
    let h = 2.0 * problem.a / n as f64;
    let first = match problem.variant {
        Variant::Plus => 1,
        Variant::Minus => 0,
    };
    let u = (0..v.len())
        .map(|i| -problem.a + (first + i) as f64 * h)
        .collect();
    let mut psi: Vec<f64> = v.iter().zip(&mass).map(|(x, w)| x / w.sqrt()).collect();
    if psi[n / 2 - first] < 0.0 {
        psi.iter_mut().for_each(|x| *x = -*x);
    }
    Ok((u, psi))
}

/// Writes `a,beta,gamma_plus,variant,zeta,k,residual,lower_bound,upper_bound,certified,violation`.
pub fn write_transverse_csv<W: Write>(out: W, rows: &[TransverseResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "a",
        "beta",
        "gamma_plus",
        "variant",
        "zeta",
        "k",
        "residual",
        "lower_bound",
        "upper_bound",
        "certified",
        "violation",
    ])?;
    for r in rows {
        let p = &r.problem;
        w.write_record(&[
            format!("{}", p.a),
            format!("{}", p.beta),
            format!("{}", p.gamma_plus),
            p.variant.as_str().to_string(),
            format!("{:.15e}", r.zeta),
            format!("{:.15e}", r.k),
            format!("{:.3e}", r.residual),
            format!("{:.15e}", r.lower_bound),
            format!("{:.15e}", r.upper_bound),
            r.certified.to_string(),
            r.violation().unwrap_or("").to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

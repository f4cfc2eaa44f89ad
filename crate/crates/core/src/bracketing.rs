//! Two-sided bounds on the eigenvalues of `H_β` from the separated
//! operators `U±_a ⊗ 1 + 1 ⊗ T±_{a,β}`: `τ±_{β,j} = ζ±_{a,β} + μ±_j(a)` with
//! `a = a(β)`, the counting sets `K±_β = {j : τ±_{β,j} < 0}`, and sweeps in
//! `β` for the eigenvalue and counting asymptotics.
//!
//! All `τ` are also stored shifted by `β²/4` (`*_shifted`), computed from
//! [`TransverseResult::excess`] so that no digits are lost at large `β`.

use std::io::Write;

use rayon::prelude::*;

use crate::curve::{certify_tubular_radius, ArcCurve, TubularRadius};
use crate::error::{Error, Result};
use crate::operator1d::{
    build_s, build_u, count_extrapolated_below, eigenvalues_1d, Boundary, Grid1D, Sign,
};
use crate::transverse::{
    fd_transverse_oracle, positive_floor_minus, verify_single_negative, TransverseProblem,
    TransverseResult,
};

/// Parameters of `a(β) = min{c·β⁻¹log β, f_r·max(a₁, a_scan), f_γ/γ₊}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ARule {
    pub coefficient: f64,
    pub radius_fraction: f64,
    pub curvature_fraction: f64,
}

impl Default for ARule {
    fn default() -> Self {
        Self {
            coefficient: 6.0,
            radius_fraction: 0.9,
            curvature_fraction: 0.45,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AClamp {
    /// The asymptotic rule `c·β⁻¹log β` is the minimum.
    Rule,
    /// Clamped by the certified tubular radius.
    Tubular,
    /// Clamped by `aγ₊ < ½`.
    Curvature,
}

impl AClamp {
    pub fn as_str(self) -> &'static str {
        match self {
            AClamp::Rule => "rule",
            AClamp::Tubular => "tubular",
            AClamp::Curvature => "curvature",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChosenA {
    pub a: f64,
    /// Unclamped `c·β⁻¹log β`.
    pub rule_value: f64,
    pub clamp: AClamp,
}

/// `a(β)` with the default rule.
pub fn choose_a(beta: f64, curve: &ArcCurve, radius: &TubularRadius) -> Result<ChosenA> {
    choose_a_with(&ARule::default(), beta, curve, radius)
}

pub fn choose_a_with(
    rule: &ARule,
    beta: f64,
    curve: &ArcCurve,
    radius: &TubularRadius,
) -> Result<ChosenA> {
    if !(beta > 1.0 && beta.is_finite()) {
        return Err(Error::domain(format!("a(beta) needs beta > 1, got {beta}")));
    }
    let rule_value = rule.coefficient * beta.ln() / beta;
    let tubular = rule.radius_fraction * radius.a1.max(radius.a_scan);
    let curvature = if curve.gamma_plus > 0.0 {
        rule.curvature_fraction / curve.gamma_plus
    } else {
        f64::INFINITY
    };
    let (a, clamp) = if rule_value <= tubular && rule_value <= curvature {
        (rule_value, AClamp::Rule)
    } else if tubular <= curvature {
        (tubular, AClamp::Tubular)
    } else {
        (curvature, AClamp::Curvature)
    };
    if !(a > 0.0) {
        return Err(Error::domain(format!("a(beta) = {a} is not positive")));
    }
    Ok(ChosenA {
        a,
        rule_value,
        clamp,
    })
}

#[derive(Debug, Clone)]
pub struct BracketConfig {
    pub curve: ArcCurve,
    pub radius: TubularRadius,
    pub rule: ARule,
    pub betas: Vec<f64>,
    /// Eigenvalue indices `1..=n` are tabulated.
    pub n: usize,
    /// Minimum number of intervals of the 1D grids.
    pub n1d: usize,
    /// Intervals of the transverse finite-difference checks.
    pub transverse_grid: usize,
}

impl BracketConfig {
    pub const DEFAULT_N1D: usize = 1024;
    pub const DEFAULT_TRANSVERSE_GRID: usize = 2000;

    /// Certifies the tubular radius of `curve` and uses default grids.
    pub fn new(curve: ArcCurve, betas: Vec<f64>, n: usize) -> Result<Self> {
        let radius = certify_tubular_radius(&curve, 2000)?;
        Ok(Self {
            curve,
            radius,
            rule: ARule::default(),
            betas,
            n,
            n1d: Self::DEFAULT_N1D,
            transverse_grid: Self::DEFAULT_TRANSVERSE_GRID,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInput(
                "index range n must be at least 1".into(),
            ));
        }
        if let Some(b) = self.betas.iter().find(|b| !(b.is_finite() && **b > 1.0)) {
            return Err(Error::InvalidInput(format!(
                "beta values must exceed 1, got {b}"
            )));
        }
        Ok(())
    }
}

/// A hypothesis of the bracketing argument and whether it holds.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub name: &'static str,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BracketRow {
    pub j: usize,
    pub tau_minus: f64,
    pub tau_plus: f64,
    pub tau_minus_shifted: f64,
    pub tau_plus_shifted: f64,
    /// Discretization error budget (sum of the two 1D error estimates).
    pub err_budget: f64,
    /// `τ±_j` lies below the first excited transverse threshold `ξ±₂ + μ±₁`.
    pub ordered: bool,
    pub certified: bool,
}

impl BracketRow {
    pub fn width(&self) -> f64 {
        self.tau_plus_shifted - self.tau_minus_shifted
    }

    /// Midpoint shifted by `β²/4`.
    /// The first failed hypothesis of the table, else the band ordering.
    pub fn violation(&self, table: &BracketTable) -> Option<&'static str> {
        if self.certified {
            return None;
        }
        table
            .first_violation()
            .or((!self.ordered).then_some("tau below second transverse band"))
    }

    pub fn mid_shifted(&self) -> f64 {
        0.5 * (self.tau_plus_shifted + self.tau_minus_shifted)
    }
}

#[derive(Debug, Clone)]
pub struct BracketTable {
    pub beta: f64,
    pub a: ChosenA,
    pub zeta_plus: TransverseResult,
    pub zeta_minus: TransverseResult,
    /// Lower bounds on the second transverse eigenvalues `ξ±₂`.
    pub xi2_plus: f64,
    pub xi2_minus: f64,
    /// Positive-spectrum floor of `T⁻`; `xi2_minus` is the oracle value.
    pub floor_minus: f64,
    pub hypotheses: Vec<Hypothesis>,
    pub rows: Vec<BracketRow>,
    pub count_plus: usize,
    pub count_minus: usize,
    /// How the transverse gap behind the counts was established; `None`
    /// when it was not.
    pub count_route: Option<GapRoute>,
    pub grid_1d: usize,
}

impl BracketTable {
    pub fn first_violation(&self) -> Option<&'static str> {
        self.hypotheses.iter().find(|h| !h.holds).map(|h| h.name)
    }

    pub fn certified(&self) -> bool {
        self.first_violation().is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapRoute {
    /// `min{π²/16a², βγ₊/2, β²} + μ⁻₁ ≥ 0`.
    Floor,
    /// Finite-difference `ξ⁻₂` (minus its error estimate) `+ μ⁻₁ ≥ 0`.
    Oracle,
}

fn hypothesis(name: &'static str, holds: bool) -> Hypothesis {
    Hypothesis { name, holds }
}

/// Lower bound on `ξ₂` from the finite-difference oracle.
fn second_transverse(p: &TransverseProblem, n: usize) -> Result<f64> {
    let n = n.div_ceil(4) * 4;
    let fd = fd_transverse_oracle(p, n, 2)?;
    Ok(fd.values[1] - fd.err_est[1])
}

fn grid_size(config: &BracketConfig, n_est: usize) -> usize {
    (16 * n_est).next_power_of_two().max(config.n1d).max(64)
}

/// Tabulates `τ±_{β,j}` for `j ≤ n` and the counts `♯K±_β`.
pub fn bracket_eigenvalues(config: &BracketConfig, beta: f64) -> Result<BracketTable> {
    config.validate()?;
    if !(beta.is_finite() && beta > 1.0) {
        return Err(Error::domain(format!("beta must exceed 1, got {beta}")));
    }
    let curve = &config.curve;
    let chosen = choose_a_with(&config.rule, beta, curve, &config.radius)?;
    let a = chosen.a;
    let gp = curve.gamma_plus;
    let pp = TransverseProblem::plus(a, beta);
    let pm = TransverseProblem::minus(a, beta, gp);
    let zp = pp.solve()?;
    let zm = pm.solve()?;

    let mut hyps = vec![
        hypothesis("beta*a > 8/3", pp.violated_hypothesis().is_none()),
        hypothesis("beta*a > 8", a * beta > 8.0),
        hypothesis("beta > 8/3*gamma_plus", beta > 8.0 / 3.0 * gp),
        hypothesis("a*gamma_plus < 1/2", a * gp < 0.5),
        hypothesis("zeta+ inside bounds", zp.certified),
        hypothesis("zeta- inside bounds", zm.certified),
    ];
    let single = |p: &TransverseProblem| verify_single_negative(p).unwrap_or(false);
    hyps.push(hypothesis("single negative T+", single(&pp)));
    hyps.push(hypothesis("single negative T-", single(&pm)));
    let gap = positive_floor_minus(a, beta, gp)?;
    hyps.push(hypothesis("T- gap scan clean", gap.confirmed()));

    let tg = config
        .transverse_grid
        .max((40.0 * a * beta).ceil() as usize);
    let xi2_plus = second_transverse(&pp, tg)?;
    let xi2_minus = second_transverse(&pm, tg)?;
    hyps.push(hypothesis("xi2+ >= 0", xi2_plus >= 0.0));
    hyps.push(hypothesis("xi2- >= 0", xi2_minus >= 0.0));

    // K±_β has about Lβ/2π + O(log β) elements; the grid resolves that many.
    let q = 0.25 * beta * beta;
    let n_est = (curve.length * beta / std::f64::consts::TAU).ceil() as usize
        + 10 * beta.ln().ceil() as usize;
    let mut grid_1d = grid_size(config, n_est.max(config.n));
    let (u_plus, u_minus, count_plus, count_minus) = loop {
        let grid = Grid1D::new(grid_1d, curve.length, Boundary::Periodic)?;
        let up = build_u(curve, a, Sign::Plus, grid)?;
        let um = build_u(curve, a, Sign::Minus, grid)?;
        let counts = count_extrapolated_below(&up, q - zp.excess)
            .and_then(|p| Ok((p, count_extrapolated_below(&um, q - zm.excess)?)));
        match counts {
            Ok((p, m)) => break (up, um, p, m),
            Err(Error::InvalidInput(_)) if grid_1d < 1 << 22 => grid_1d *= 2,
            Err(e) => return Err(e),
        }
    };
    let (mu_plus, mu_minus) = rayon::join(
        || eigenvalues_1d(&u_plus, config.n),
        || eigenvalues_1d(&u_minus, config.n),
    );
    let (mu_plus, mu_minus) = (mu_plus?, mu_minus?);

    let hyps_ok = hyps.iter().all(|h| h.holds);
    let rows = (0..config.n)
        .map(|i| {
            let tp_s = zp.excess + mu_plus.values[i];
            let tm_s = zm.excess + mu_minus.values[i];
            let ordered = tp_s - q < xi2_plus + mu_plus.values[0]
                && tm_s - q < xi2_minus + mu_minus.values[0];
            BracketRow {
                j: i + 1,
                tau_minus: tm_s - q,
                tau_plus: tp_s - q,
                tau_minus_shifted: tm_s,
                tau_plus_shifted: tp_s,
                err_budget: mu_plus.err_est[i] + mu_minus.err_est[i],
                ordered,
                certified: hyps_ok && ordered,
            }
        })
        .collect();

    // Both separated operators have exactly ♯K± negative eigenvalues once
    // the excited transverse levels ξ±₂ + μ±₁ are non-negative. For T⁻ the
    // floor of the positive spectrum is tried first, then the oracle value.
    let plus_ok = xi2_plus + mu_plus.values[0] >= 0.0;
    let count_route = if !(hyps_ok && plus_ok) {
        None
    } else if gap.floor + mu_minus.values[0] >= 0.0 {
        Some(GapRoute::Floor)
    } else if xi2_minus + mu_minus.values[0] >= 0.0 {
        Some(GapRoute::Oracle)
    } else {
        None
    };
    Ok(BracketTable {
        beta,
        a: chosen,
        zeta_plus: zp,
        zeta_minus: zm,
        xi2_plus,
        xi2_minus,
        floor_minus: gap.floor,
        hypotheses: hyps,
        rows,
        count_plus,
        count_minus,
        count_route,
        grid_1d,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountBounds {
    pub beta: f64,
    pub a: f64,
    pub lower: usize,
    pub upper: usize,
    /// `Lβ/2π`.
    pub leading: f64,
    pub certified: bool,
}

impl CountBounds {
    /// Distance from `Lβ/2π` to `[lower, upper]`.
    pub fn distance(&self) -> f64 {
        let (lo, hi) = (self.lower as f64, self.upper as f64);
        (lo - self.leading).max(self.leading - hi).max(0.0)
    }
}

/// `(♯K⁺_β, ♯K⁻_β)`, lower and upper bounds on the number of discrete
/// eigenvalues of `H_β`.
pub fn count_discrete_spectrum(config: &BracketConfig, beta: f64) -> Result<CountBounds> {
    let t = bracket_eigenvalues(config, beta)?;
    Ok(counts_of(&t, config.curve.length))
}

/// The counts of a table for a curve of length `length`.
pub fn counts_of(t: &BracketTable, length: f64) -> CountBounds {
    CountBounds {
        beta: t.beta,
        a: t.a.a,
        lower: t.count_plus,
        upper: t.count_minus,
        leading: length * t.beta / std::f64::consts::TAU,
        certified: t.count_route.is_some(),
    }
}

/// All `β` of the configuration, in parallel, sorted by `β`.
pub fn bracket_sweep(config: &BracketConfig) -> Result<Vec<BracketTable>> {
    config.validate()?;
    let mut tables = config
        .betas
        .par_iter()
        .map(|&b| bracket_eigenvalues(config, b))
        .collect::<Result<Vec<_>>>()?;
    tables.sort_by(|x, y| x.beta.total_cmp(&y.beta));
    Ok(tables)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Asymptotics {
    /// `λ_n(β) = −β²/4 + μ_n + O(β⁻¹log β)`.
    Eigenvalues,
    /// `♯σ_d(H_β) = Lβ/2π + O(log β)`.
    Counting,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticsPoint {
    pub beta: f64,
    /// Eigenvalue index; 0 for counting points.
    pub n: usize,
    /// `r_n(β) = τ_mid + β²/4 − μ_n`, or the distance from `Lβ/2π` to
    /// `[♯K⁺, ♯K⁻]`.
    pub remainder: f64,
    /// `τ⁺ − τ⁻`, or `♯K⁻ − ♯K⁺`.
    pub width: f64,
    /// `β⁻¹log β` or `log β`.
    pub scale: f64,
    pub certified: bool,
}

impl AsymptoticsPoint {
    pub fn remainder_ratio(&self) -> f64 {
        self.remainder.abs() / self.scale
    }

    pub fn width_ratio(&self) -> f64 {
        self.width / self.scale
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticsReport {
    pub kind: Asymptotics,
    pub points: Vec<AsymptoticsPoint>,
    /// Reference values `μ_n` of `S` (eigenvalue sweeps only).
    pub mu: Vec<f64>,
    pub counts: Vec<CountBounds>,
    /// Smallest `C` with `|r| ≤ C·scale` at every certified point.
    pub fitted_c: f64,
    /// Smallest `C′` with `width ≤ C′·scale` at every certified point.
    pub fitted_width_c: f64,
    /// Per certified `β`: max of the remainder and width ratios over `n`.
    pub ratio_by_beta: Vec<(f64, f64)>,
    /// Relative increase of the fitted constant across the sweep; see
    /// [`sweep_theorem1`] and [`sweep_theorem2`].
    pub drift: f64,
    /// Log-log slope of the width against `β`, per `n` (eigenvalues) or for
    /// the count gap.
    pub width_slopes: Vec<f64>,
    /// Trends that the asymptotic statements do not assert.
    pub observations: Vec<String>,
    /// Per `β`, the first violated hypothesis of its table.
    pub violations: Vec<(f64, Option<&'static str>)>,
}

const MIN_CERTIFIED: usize = 4;

fn certified_betas(tables: &[BracketTable]) -> Result<Vec<&BracketTable>> {
    let ok: Vec<&BracketTable> = tables.iter().filter(|t| t.certified()).collect();
    if ok.len() < MIN_CERTIFIED {
        let why: Vec<String> = tables
            .iter()
            .filter_map(|t| t.first_violation().map(|v| format!("beta={}: {v}", t.beta)))
            .collect();
        return Err(Error::InvalidInput(format!(
            "{} certified beta points, at least {MIN_CERTIFIED} are needed ({})",
            ok.len(),
            why.join("; ")
        )));
    }
    Ok(ok)
}

fn violations_of(tables: &[BracketTable]) -> Vec<(f64, Option<&'static str>)> {
    tables
        .iter()
        .map(|t| (t.beta, t.first_violation()))
        .collect()
}

fn loglog_slope(xy: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = xy
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn max_by_beta(points: &[AsymptoticsPoint]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for p in points.iter().filter(|p| p.certified) {
        let r = p.remainder_ratio().max(p.width_ratio());
        match out.last_mut() {
            Some((b, m)) if *b == p.beta => *m = m.max(r),
            _ => out.push((p.beta, r)),
        }
    }
    out
}

fn fit(points: &[AsymptoticsPoint], f: impl Fn(&AsymptoticsPoint) -> f64) -> f64 {
    points
        .iter()
        .filter(|p| p.certified)
        .map(f)
        .fold(0.0, f64::max)
}

/// Eigenvalue asymptotics. `drift` is the relative change of the per-`β`
/// maximal ratio from the smallest to the largest certified `β`.
pub fn sweep_theorem1(config: &BracketConfig) -> Result<AsymptoticsReport> {
    let tables = bracket_sweep(config)?;
    let ok = certified_betas(&tables)?;
    let n_grid = ok.iter().map(|t| t.grid_1d).max().unwrap_or(config.n1d);
    let grid = Grid1D::new(n_grid, config.curve.length, Boundary::Periodic)?;
    let mu = eigenvalues_1d(&build_s(&config.curve, grid)?, config.n)?.values;

    let mut points = Vec::new();
    for t in &tables {
        let scale = t.beta.ln() / t.beta;
        for row in &t.rows {
            points.push(AsymptoticsPoint {
                beta: t.beta,
                n: row.j,
                remainder: row.mid_shifted() - mu[row.j - 1],
                width: row.width(),
                scale,
                certified: row.certified,
            });
        }
    }
    let ratio_by_beta = max_by_beta(&points);
    let drift = match (ratio_by_beta.first(), ratio_by_beta.last()) {
        (Some(f), Some(l)) if f.1 > 0.0 => l.1 / f.1 - 1.0,
        _ => f64::NAN,
    };
    let width_slopes = (1..=config.n)
        .map(|n| {
            let xy: Vec<(f64, f64)> = points
                .iter()
                .filter(|p| p.certified && p.n == n)
                .map(|p| (p.beta, p.width))
                .collect();
            loglog_slope(&xy)
        })
        .collect();
    let mut observations = Vec::new();
    for n in 1..=config.n {
        let w: Vec<&AsymptoticsPoint> = points.iter().filter(|p| p.certified && p.n == n).collect();
        if w.windows(2).any(|p| p[1].width > p[0].width) {
            observations.push(format!("bracket width for n={n} is not monotone in beta"));
        }
    }
    Ok(AsymptoticsReport {
        kind: Asymptotics::Eigenvalues,
        fitted_c: fit(&points, AsymptoticsPoint::remainder_ratio),
        fitted_width_c: fit(&points, AsymptoticsPoint::width_ratio),
        points,
        mu,
        counts: tables
            .iter()
            .map(|t| counts_of(t, config.curve.length))
            .collect(),
        ratio_by_beta,
        drift,
        width_slopes,
        observations,
        violations: violations_of(&tables),
    })
}

/// Counting asymptotics. `remainder` is the distance from `Lβ/2π` to
/// `[♯K⁺, ♯K⁻]`, and `drift` the relative increase of the fitted constant
/// when the largest `β` is added to the sweep.
pub fn sweep_theorem2(config: &BracketConfig) -> Result<AsymptoticsReport> {
    let tables = bracket_sweep(config)?;
    certified_betas(&tables)?;
    let counts: Vec<CountBounds> = tables
        .iter()
        .map(|t| counts_of(t, config.curve.length))
        .collect();
    let points: Vec<AsymptoticsPoint> = counts
        .iter()
        .zip(&tables)
        .map(|(c, t)| AsymptoticsPoint {
            beta: c.beta,
            n: 0,
            remainder: c.distance(),
            width: c.upper as f64 - c.lower as f64,
            scale: c.beta.ln(),
            certified: c.certified && t.certified(),
        })
        .collect();
    let fitted_c = fit(&points, AsymptoticsPoint::remainder_ratio);
    let certified: Vec<&AsymptoticsPoint> = points.iter().filter(|p| p.certified).collect();
    let prefix = &certified[..certified.len() - 1];
    let c_prefix = prefix
        .iter()
        .map(|p| p.remainder_ratio())
        .fold(0.0, f64::max);
    let drift = if fitted_c == c_prefix {
        0.0
    } else if c_prefix > 0.0 {
        fitted_c / c_prefix - 1.0
    } else {
        f64::INFINITY
    };
    let xy: Vec<(f64, f64)> = certified.iter().map(|p| (p.beta, p.width)).collect();
    let mut observations = Vec::new();
    for w in counts.windows(2) {
        if w[1].lower < w[0].lower || w[1].upper < w[0].upper {
            observations.push(format!(
                "counts decrease from beta={} to beta={}",
                w[0].beta, w[1].beta
            ));
        }
    }
    Ok(AsymptoticsReport {
        kind: Asymptotics::Counting,
        fitted_c,
        fitted_width_c: fit(&points, AsymptoticsPoint::width_ratio),
        ratio_by_beta: max_by_beta(&points),
        points,
        mu: Vec::new(),
        counts,
        drift,
        width_slopes: vec![loglog_slope(&xy)],
        observations,
        violations: violations_of(&tables),
    })
}

/// Writes `beta,a,j,tau_minus,tau_plus,width,certified,violation`, where
/// `violation` names the first failed hypothesis of an uncertified row.
pub fn write_bracket_csv<W: Write>(out: W, tables: &[BracketTable]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "beta",
        "a",
        "j",
        "tau_minus",
        "tau_plus",
        "width",
        "certified",
        "violation",
    ])?;
    for t in tables {
        for r in &t.rows {
            w.write_record(&[
                format!("{}", t.beta),
                format!("{:.15e}", t.a.a),
                r.j.to_string(),
                format!("{:.15e}", r.tau_minus),
                format!("{:.15e}", r.tau_plus),
                format!("{:.15e}", r.width()),
                r.certified.to_string(),
                r.violation(t).unwrap_or("").to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `beta,count_lower,count_upper,L_beta_over_2pi`.
pub fn write_count_csv<W: Write>(out: W, counts: &[CountBounds]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["beta", "count_lower", "count_upper", "L_beta_over_2pi"])?;
    for c in counts {
        w.write_record(&[
            format!("{}", c.beta),
            c.lower.to_string(),
            c.upper.to_string(),
            format!("{:.15e}", c.leading),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `beta,n,remainder,width,scale,remainder_ratio,width_ratio,certified`.
pub fn write_asymptotics_csv<W: Write>(out: W, report: &AsymptoticsReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "beta",
        "n",
        "remainder",
        "width",
        "scale",
        "remainder_ratio",
        "width_ratio",
        "certified",
    ])?;
    for p in &report.points {
        w.write_record(&[
            format!("{}", p.beta),
            p.n.to_string(),
            format!("{:.15e}", p.remainder),
            format!("{:.15e}", p.width),
            format!("{:.15e}", p.scale),
            format!("{:.6e}", p.remainder_ratio()),
            format!("{:.6e}", p.width_ratio()),
            p.certified.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Plain-text fit summary.
pub fn write_fit_summary<W: Write>(mut out: W, report: &AsymptoticsReport) -> Result<()> {
    let (what, scale) = match report.kind {
        Asymptotics::Eigenvalues => ("eigenvalue remainders", "log(beta)/beta"),
        Asymptotics::Counting => ("counting distance", "log(beta)"),
    };
    writeln!(out, "fit of {what} against {scale}")?;
    writeln!(out, "fitted C (remainder): {:.6e}", report.fitted_c)?;
    writeln!(out, "fitted C (width): {:.6e}", report.fitted_width_c)?;
    writeln!(out, "drift: {:.4}", report.drift)?;
    for (b, r) in &report.ratio_by_beta {
        writeln!(out, "beta {b}: max ratio {r:.6e}")?;
    }
    for (i, s) in report.width_slopes.iter().enumerate() {
        writeln!(out, "width log-log slope [{i}]: {s:.4}")?;
    }
    for o in &report.observations {
        writeln!(out, "observation: {o}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{build_curve, CurveSpec};

    fn circle_config(betas: Vec<f64>, n: usize) -> BracketConfig {
        let c = build_curve(&CurveSpec::circle(1.0)).unwrap();
        BracketConfig::new(c, betas, n).unwrap()
    }

    #[test]
    fn a_rule_and_clamps() {
        let cfg = circle_config(vec![], 1);
        let ca = choose_a(100.0, &cfg.curve, &cfg.radius).unwrap();
        assert!((ca.rule_value - 6.0 * 100f64.ln() / 100.0).abs() < 1e-15);
        assert!((ca.a - 0.27631021115928553).abs() < 1e-12);
        assert_eq!(ca.clamp, AClamp::Rule);
        let ca = choose_a(std::f64::consts::E, &cfg.curve, &cfg.radius).unwrap();
        assert!((ca.rule_value - 6.0 / std::f64::consts::E).abs() < 1e-12);
        assert_ne!(ca.clamp, AClamp::Rule);
        assert!(ca.a <= 0.45);
        assert!(choose_a(1.0, &cfg.curve, &cfg.radius).is_err());
    }

    #[test]
    fn circle_beta_100() {
        let cfg = circle_config(vec![], 3);
        let t = bracket_eigenvalues(&cfg, 100.0).unwrap();
        assert!(t.certified(), "{:?}", t.first_violation());
        let r = &t.rows[0];
        assert!(r.tau_minus <= r.tau_plus);
        assert!((r.tau_plus - (-2500.25)).abs() < 1.0, "{}", r.tau_plus);
        assert!((r.tau_minus - (-2500.25)).abs() < 1.0, "{}", r.tau_minus);
        assert!(t.count_plus <= t.count_minus);
        let ln = 100f64.ln();
        assert!((t.count_plus as f64 - 100.0).abs() < 10.0 * ln);
        assert!((t.count_minus as f64 - 100.0).abs() < 10.0 * ln);
        assert!(t.count_plus as f64 <= 100.0 && t.count_minus as f64 >= 100.0);
    }

    #[test]
    fn low_beta_is_flagged() {
        let cfg = circle_config(vec![], 1);
        let t = bracket_eigenvalues(&cfg, 5.0).unwrap();
        assert!(!t.certified());
        assert_eq!(t.first_violation(), Some("beta*a > 8/3"));
        let c = count_discrete_spectrum(&cfg, 5.0).unwrap();
        assert!(!c.certified);
    }

    #[test]
    fn sweep_needs_four_certified_points() {
        let cfg = circle_config(vec![5.0, 40.0, 80.0], 1);
        assert!(sweep_theorem1(&cfg).is_err());
    }

    #[test]
    fn count_distance() {
        let c = CountBounds {
            beta: 10.0,
            a: 0.1,
            lower: 5,
            upper: 8,
            leading: 9.5,
            certified: true,
        };
        assert_eq!(c.distance(), 1.5);
        let c = CountBounds { leading: 6.0, ..c };
        assert_eq!(c.distance(), 0.0);
    }

    #[test]
    fn csv_headers() {
        let cfg = circle_config(vec![], 2);
        let t = bracket_eigenvalues(&cfg, 50.0).unwrap();
        let mut buf = Vec::new();
        write_bracket_csv(&mut buf, std::slice::from_ref(&t)).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("beta,a,j,tau_minus,tau_plus,width,certified,violation\n"));
        assert_eq!(s.lines().count(), 3);
        let mut buf = Vec::new();
        write_count_csv(&mut buf, &[counts_of(&t, cfg.curve.length)]).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("beta,count_lower,count_upper,L_beta_over_2pi\n"));
    }

    #[test]
    fn loglog_slope_of_power() {
        let xy: Vec<(f64, f64)> = [1.0, 2.0, 4.0]
            .iter()
            .map(|&x: &f64| (x, 3.0 * x.powf(-1.5)))
            .collect();
        assert!((loglog_slope(&xy) + 1.5).abs() < 1e-12);
    }
}

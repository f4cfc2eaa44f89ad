//! Closed planar curves in arc-length parametrization.
//!
//! Sign conventions: the tubular map is `Φ(s,u) = Γ(s) + u·(−Γ₂′(s), Γ₁′(s))`
//! and the signed curvature is `γ = Γ₁″Γ₂′ − Γ₂″Γ₁′`, so that
//! `det JΦ = 1 + uγ`. Curves are oriented so that `∫γ ds = +2π`, which with
//! this curvature formula means clockwise traversal; `u > 0` then points away
//! from the enclosed region.

mod trig;
mod tubular;

use std::f64::consts::TAU;
use std::io::Write;

use serde::{Deserialize, Serialize};

pub use trig::TrigSeries;
pub use tubular::{
    certify_tubular_radius, chord_gap, collision_scan, CollisionReport, TubularRadius,
};

use crate::error::{Error, Result};

/// Shape of a closed curve in its raw parametrization `t ∈ [0, 2π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CurveShape {
    Circle {
        radius: f64,
    },
    /// Semi-axes `a ≥ b > 0`.
    Ellipse {
        a: f64,
        b: f64,
    },
    /// `x(t) = Σ_{k≥0} x_cos[k] cos kt + Σ_{k≥1} x_sin[k−1] sin kt`, same for `y`.
    FourierLoop {
        x_cos: Vec<f64>,
        x_sin: Vec<f64>,
        y_cos: Vec<f64>,
        y_sin: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSpec {
    pub shape: CurveShape,
    /// Number of raw samples used for the arc-length reparametrization.
    pub samples: usize,
}

impl CurveSpec {
    pub const DEFAULT_SAMPLES: usize = 4096;

    pub fn circle(radius: f64) -> Self {
        Self {
            shape: CurveShape::Circle { radius },
            samples: Self::DEFAULT_SAMPLES,
        }
    }

    pub fn ellipse(a: f64, b: f64) -> Self {
        Self {
            shape: CurveShape::Ellipse { a, b },
            samples: Self::DEFAULT_SAMPLES,
        }
    }

    pub fn fourier_loop(
        x_cos: Vec<f64>,
        x_sin: Vec<f64>,
        y_cos: Vec<f64>,
        y_sin: Vec<f64>,
    ) -> Self {
        Self {
            shape: CurveShape::FourierLoop {
                x_cos,
                x_sin,
                y_cos,
                y_sin,
            },
            samples: Self::DEFAULT_SAMPLES,
        }
    }
}

/// Raw parametrization with its first two derivatives.
#[derive(Debug, Clone)]
struct RawCurve {
    x_cos: Vec<f64>,
    x_sin: Vec<f64>,
    y_cos: Vec<f64>,
    y_sin: Vec<f64>,
}

impl RawCurve {
    fn eval(&self, t: f64) -> [[f64; 3]; 2] {
        let series = |c: &[f64], s: &[f64]| {
            let mut out = [0.0; 3];
            if let Some(c0) = c.first() {
                out[0] += c0;
            }
            let kmax = c.len().max(s.len() + 1);
            for k in 1..kmax {
                let (sk, ck) = (k as f64 * t).sin_cos();
                let a = c.get(k).copied().unwrap_or(0.0);
                let b = s.get(k - 1).copied().unwrap_or(0.0);
                let kf = k as f64;
                out[0] += a * ck + b * sk;
                out[1] += kf * (-a * sk + b * ck);
                out[2] += -kf * kf * (a * ck + b * sk);
            }
            out
        };
        [
            series(&self.x_cos, &self.x_sin),
            series(&self.y_cos, &self.y_sin),
        ]
    }

    fn speed(&self, t: f64) -> f64 {
        let [x, y] = self.eval(t);
        x[1].hypot(y[1])
    }

    /// `γ` in the crate's sign convention from raw derivatives.
    fn curvature(&self, t: f64) -> f64 {
        let [x, y] = self.eval(t);
        (x[2] * y[1] - y[2] * x[1]) / x[1].hypot(y[1]).powi(3)
    }

    fn reversed(&self) -> Self {
        let neg = |v: &[f64]| v.iter().map(|c| -c).collect();
        Self {
            x_cos: self.x_cos.clone(),
            x_sin: neg(&self.x_sin),
            y_cos: self.y_cos.clone(),
            y_sin: neg(&self.y_sin),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Circle,
    Ellipse,
    FourierLoop,
}

/// A closed curve parametrized by arc length `s ∈ [0, L)`.
#[derive(Debug, Clone)]
pub struct ArcCurve {
    pub kind: CurveKind,
    pub length: f64,
    x: TrigSeries,
    y: TrigSeries,
    gamma: TrigSeries,
    /// `max |γ|`.
    pub gamma_plus: f64,
    /// `max |γ′|`.
    pub dgamma_plus: f64,
    /// `max |γ″|`.
    pub ddgamma_plus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvaturePoint {
    pub s: f64,
    pub gamma: f64,
    pub dgamma: f64,
    pub ddgamma: f64,
}

impl ArcCurve {
    pub fn position(&self, s: f64) -> [f64; 2] {
        [self.x.eval(s), self.y.eval(s)]
    }

    pub fn tangent(&self, s: f64) -> [f64; 2] {
        [self.x.eval_derivs::<2>(s)[1], self.y.eval_derivs::<2>(s)[1]]
    }

    /// Position and unit tangent in one pass.
    pub fn frame(&self, s: f64) -> ([f64; 2], [f64; 2]) {
        let x = self.x.eval_derivs::<2>(s);
        let y = self.y.eval_derivs::<2>(s);
        ([x[0], y[0]], [x[1], y[1]])
    }

    pub fn curvature(&self, s: f64) -> f64 {
        self.gamma.eval(s)
    }

    /// `(γ, γ′, γ″)` at `s`.
    pub fn curvature_derivs(&self, s: f64) -> (f64, f64, f64) {
        let d = self.gamma.eval_derivs::<3>(s);
        (d[0], d[1], d[2])
    }

    /// Largest admissible normal offset for the tubular map, `1/(2γ₊)`.
    pub fn offset_limit(&self) -> f64 {
        0.5 / self.gamma_plus
    }

    /// `∫₀ᴸ γ ds`.
    pub fn total_turning(&self) -> f64 {
        self.gamma.a0 * self.length
    }
}

pub fn build_curve(spec: &CurveSpec) -> Result<ArcCurve> {
    match &spec.shape {
        CurveShape::Circle { radius } => {
            let r = *radius;
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::Geometry(format!(
                    "circle radius must be positive, got {r}"
                )));
            }
            let length = TAU * r;
            let x = TrigSeries {
                period: length,
                a0: 0.0,
                cos: vec![r],
                sin: vec![0.0],
            };
            let y = TrigSeries {
                period: length,
                a0: 0.0,
                cos: vec![0.0],
                sin: vec![-r],
            };
            Ok(ArcCurve {
                kind: CurveKind::Circle,
                length,
                x,
                y,
                gamma: TrigSeries::constant(length, 1.0 / r),
                gamma_plus: 1.0 / r,
                dgamma_plus: 0.0,
                ddgamma_plus: 0.0,
            })
        }
        CurveShape::Ellipse { a, b } => {
            let (a, b) = (*a, *b);
            if !(b > 0.0) || !(a >= b) || !a.is_finite() {
                return Err(Error::Geometry(format!(
                    "ellipse needs semi-axes a >= b > 0, got a={a}, b={b}"
                )));
            }
            let raw = RawCurve {
                x_cos: vec![0.0, a],
                x_sin: vec![0.0],
                y_cos: vec![0.0],
                y_sin: vec![-b],
            };
            reparametrize(CurveKind::Ellipse, raw, spec.samples)
        }
        CurveShape::FourierLoop {
            x_cos,
            x_sin,
            y_cos,
            y_sin,
        } => {
            let all = x_cos.iter().chain(x_sin).chain(y_cos).chain(y_sin);
            if all.clone().any(|c| !c.is_finite()) {
                return Err(Error::Geometry("non-finite Fourier coefficient".into()));
            }
            let raw = RawCurve {
                x_cos: x_cos.clone(),
                x_sin: x_sin.clone(),
                y_cos: y_cos.clone(),
                y_sin: y_sin.clone(),
            };
            reparametrize(CurveKind::FourierLoop, raw, spec.samples)
        }
    }
}

/// Tolerance on the high-mode tail of the curvature series.
const TAIL_TOL: f64 = 1e-10;
/// Relative amplitude below which Fourier modes are round-off noise.
const NOISE_FLOOR: f64 = 1e-15;
/// Tolerance on `||Γ′| − 1|`.
const SPEED_TOL: f64 = 1e-8;
/// Tolerance on `|∫γ ds − 2π|`.
const TURNING_TOL: f64 = 1e-6;

fn reparametrize(kind: CurveKind, raw: RawCurve, samples: usize) -> Result<ArcCurve> {
    let m = samples.max(256);
    let m = m + (m % 2);
    let ts: Vec<f64> = (0..m).map(|j| TAU * j as f64 / m as f64).collect();

    let speeds: Vec<f64> = ts.iter().map(|&t| raw.speed(t)).collect();
    let mean_speed = speeds.iter().sum::<f64>() / m as f64;
    let min_speed = speeds.iter().copied().fold(f64::INFINITY, f64::min);
    if !(mean_speed > 0.0) || min_speed <= 1e-8 * mean_speed {
        let j = speeds
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(j, _)| j)
            .unwrap_or(0);
        return Err(Error::Geometry(format!(
            "cusp: raw speed {min_speed:e} at t={:.6}",
            ts[j]
        )));
    }
    check_simple_polyline(&raw, m.min(2048))?;

    // Orientation from the raw turning integral (trapezoid rule is spectral here).
    let turning_raw: f64 = ts
        .iter()
        .zip(&speeds)
        .map(|(&t, &v)| raw.curvature(t) * v)
        .sum::<f64>()
        * TAU
        / m as f64;
    let raw = if turning_raw < 0.0 {
        raw.reversed()
    } else {
        raw
    };

    // s(t) = c₀t + periodic part, from the Fourier series of the speed.
    let speed_series = TrigSeries::from_samples(TAU, &speeds).truncated(NOISE_FLOOR);
    let length = TAU * speed_series.a0;
    let periodic = speed_series.antiderivative();
    let arc = |t: f64| speed_series.a0 * t + periodic.eval(t);

    let mut xs = Vec::with_capacity(m);
    let mut ys = Vec::with_capacity(m);
    let mut gs = Vec::with_capacity(m);
    let mut worst_newton: f64 = 0.0;
    for j in 0..m {
        let target = length * j as f64 / m as f64;
        let mut t = TAU * j as f64 / m as f64;
        let mut resid = f64::INFINITY;
        for _ in 0..50 {
            resid = arc(t) - target;
            let step = resid / raw.speed(t);
            t -= step;
            if step.abs() <= 1e-15 * TAU {
                resid = arc(t) - target;
                break;
            }
        }
        worst_newton = worst_newton.max(resid.abs());
        let [x, y] = raw.eval(t);
        xs.push(x[0]);
        ys.push(y[0]);
        gs.push(raw.curvature(t));
    }
    if worst_newton > 1e-11 * length {
        return Err(Error::Convergence {
            what: "arc-length inversion".into(),
            tol: 1e-11 * length,
            iterations: 50,
            residual: worst_newton,
        });
    }

    let x = TrigSeries::from_samples(length, &xs);
    let y = TrigSeries::from_samples(length, &ys);
    let gamma = TrigSeries::from_samples(length, &gs);
    let tail = gamma
        .tail_ratio(0.1)
        .max(x.tail_ratio(0.1))
        .max(y.tail_ratio(0.1));
    if tail > TAIL_TOL {
        return Err(Error::Convergence {
            what: format!("arc-length reparametrization with {m} samples (Fourier tail)"),
            tol: TAIL_TOL,
            iterations: m,
            residual: tail,
        });
    }
    let x = x.truncated(NOISE_FLOOR);
    let y = y.truncated(NOISE_FLOOR);
    let gamma = gamma.truncated(NOISE_FLOOR);

    let mut curve = ArcCurve {
        kind,
        length,
        x,
        y,
        gamma,
        gamma_plus: 0.0,
        dgamma_plus: 0.0,
        ddgamma_plus: 0.0,
    };
    let dg = curve.gamma.derivative();
    let ddg = dg.derivative();
    curve.gamma_plus = sup_abs(&curve.gamma, length);
    curve.dgamma_plus = sup_abs(&dg, length);
    curve.ddgamma_plus = sup_abs(&ddg, length);

    let speed_err = (0..10_000)
        .map(|i| {
            let t = curve.tangent(length * i as f64 / 10_000.0);
            (t[0].hypot(t[1]) - 1.0).abs()
        })
        .fold(0.0, f64::max);
    if speed_err > SPEED_TOL {
        return Err(Error::Convergence {
            what: "arc-length property |Γ′| = 1".into(),
            tol: SPEED_TOL,
            iterations: m,
            residual: speed_err,
        });
    }
    let turning = curve.total_turning();
    if (turning - TAU).abs() > TURNING_TOL {
        return Err(Error::Geometry(format!(
            "total turning {turning:.9} differs from 2π; the curve is not a simple loop"
        )));
    }
    Ok(curve)
}

/// `max |f|` over a period: dense sampling plus golden-section refinement.
fn sup_abs(f: &TrigSeries, length: f64) -> f64 {
    let n = (32 * f.degree()).clamp(4096, 1 << 16);
    let h = length / n as f64;
    let (mut best_s, mut best) = (0.0, f.eval(0.0).abs());
    for i in 1..n {
        let s = i as f64 * h;
        let v = f.eval(s).abs();
        if v > best {
            best = v;
            best_s = s;
        }
    }
    let g = |s: f64| -f.eval(s).abs();
    let (_, v) = golden_min(g, best_s - h, best_s + h, 1e-13 * length);
    best.max(-v)
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
/// Returns `(argmin, min)`; ties favour the left end.
pub(crate) fn golden_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let candidates = [(lo, f(lo)), (c, fc), (d, fd), (hi, f(hi))];
    candidates.into_iter().fold(
        (lo, f64::INFINITY),
        |acc, p| if p.1 < acc.1 { p } else { acc },
    )
}

/// Rejects raw curves whose sampled polyline crosses itself.
fn check_simple_polyline(raw: &RawCurve, n: usize) -> Result<()> {
    let pts: Vec<[f64; 2]> = (0..n)
        .map(|j| {
            let [x, y] = raw.eval(TAU * j as f64 / n as f64);
            [x[0], y[0]]
        })
        .collect();
    let seg = |i: usize| (pts[i], pts[(i + 1) % n]);
    let bbox = |i: usize| {
        let (p, q) = seg(i);
        [
            p[0].min(q[0]),
            p[0].max(q[0]),
            p[1].min(q[1]),
            p[1].max(q[1]),
        ]
    };
    let boxes: Vec<[f64; 4]> = (0..n).map(bbox).collect();
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (bi, bj) = (boxes[i], boxes[j]);
            if bi[1] < bj[0] || bj[1] < bi[0] || bi[3] < bj[2] || bj[3] < bi[2] {
                continue;
            }
            let (p, q) = seg(i);
            let (r, s) = seg(j);
            if segments_cross(p, q, r, s) {
                return Err(Error::Geometry(format!(
                    "self-intersection between raw segments near t={:.6} and t={:.6}",
                    TAU * i as f64 / n as f64,
                    TAU * j as f64 / n as f64
                )));
            }
        }
    }
    Ok(())
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_cross(p: [f64; 2], q: [f64; 2], r: [f64; 2], s: [f64; 2]) -> bool {
    let d1 = orient(p, q, r);
    let d2 = orient(p, q, s);
    let d3 = orient(r, s, p);
    let d4 = orient(r, s, q);
    d1 * d2 <= 0.0 && d3 * d4 <= 0.0 && (d1 != 0.0 || d2 != 0.0)
}

/// Uniform samples `(s, γ, γ′, γ″)` on `[0, L)`.
pub fn curvature_profile(curve: &ArcCurve, n: usize) -> Result<Vec<CurvaturePoint>> {
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "curvature profile needs n >= 2, got {n}"
        )));
    }
    Ok((0..n)
        .map(|i| {
            let s = curve.length * i as f64 / n as f64;
            let (gamma, dgamma, ddgamma) = curve.curvature_derivs(s);
            CurvaturePoint {
                s,
                gamma,
                dgamma,
                ddgamma,
            }
        })
        .collect())
}

pub fn write_curvature_csv<W: Write>(out: W, profile: &[CurvaturePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["s", "gamma", "dgamma", "ddgamma"])?;
    for p in profile {
        w.write_record(&[
            format!("{:.17e}", p.s),
            format!("{:.17e}", p.gamma),
            format!("{:.17e}", p.dgamma),
            format!("{:.17e}", p.ddgamma),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `Φ(s,u) = (Γ₁ − uΓ₂′, Γ₂ + uΓ₁′)`.
pub fn tubular_map(curve: &ArcCurve, s: f64, u: f64) -> Result<[f64; 2]> {
    if !(u.abs() < curve.offset_limit()) {
        return Err(Error::domain(format!(
            "|u| = {} must be below 1/(2 gamma_plus) = {}",
            u.abs(),
            curve.offset_limit()
        )));
    }
    Ok(tubular_point(curve, s, u))
}

pub(crate) fn tubular_point(curve: &ArcCurve, s: f64, u: f64) -> [f64; 2] {
    let (p, t) = curve.frame(s);
    [p[0] - u * t[1], p[1] + u * t[0]]
}

/// `det JΦ(s,u) = 1 + uγ(s)`.
pub fn jacobian_det(curve: &ArcCurve, s: f64, u: f64) -> f64 {
    1.0 + u * curve.curvature(s)
}

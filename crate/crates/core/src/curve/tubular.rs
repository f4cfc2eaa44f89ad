//! Certified half-width of the tubular neighbourhood.

use std::collections::HashMap;

use super::{golden_min, tubular_point, ArcCurve};
use crate::error::{Error, Result};

/// Geometric ratio of the candidate half-widths `a_max · 0.95^k`.
const SHRINK: f64 = 0.95;
const MAX_CANDIDATES: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct TubularRadius {
    /// Largest candidate half-width with local injectivity.
    pub a0: f64,
    /// `min_{p ∈ [a₀, L/2]} min_t |Γ(t) − Γ(t+p)|`.
    pub tau: f64,
    /// Minimizer `(t, p)` of the chord gap.
    pub tau_at: (f64, f64),
    /// `min{a₀, τ/4}`.
    pub a1: f64,
    /// Largest candidate half-width that passes the brute-force collision scan.
    pub a_scan: f64,
    /// Collision scan at `a₁`.
    pub certificate: CollisionReport,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionReport {
    pub half_width: f64,
    pub ns: usize,
    pub nu: usize,
    /// Pairs of non-adjacent cells with overlapping images.
    pub overlaps: usize,
    /// First offending pair as `((i, j), (i′, j′))` cell indices.
    pub first: Option<((usize, usize), (usize, usize))>,
}

impl CollisionReport {
    pub fn is_clean(&self) -> bool {
        self.overlaps == 0
    }
}

struct Samples {
    h: f64,
    pos: Vec<[f64; 2]>,
    tan: Vec<[f64; 2]>,
}

impl Samples {
    fn new(curve: &ArcCurve, n: usize) -> Self {
        let h = curve.length / n as f64;
        let (pos, tan) = (0..n).map(|i| curve.frame(i as f64 * h)).unzip();
        Self { h, pos, tan }
    }

    fn len(&self) -> usize {
        self.pos.len()
    }
}

fn sub(p: [f64; 2], q: [f64; 2]) -> [f64; 2] {
    [p[0] - q[0], p[1] - q[1]]
}

fn dot(p: [f64; 2], q: [f64; 2]) -> f64 {
    p[0] * q[0] + p[1] * q[1]
}

fn cross(p: [f64; 2], q: [f64; 2]) -> f64 {
    p[0] * q[1] - p[1] * q[0]
}

/// Injectivity of the sampled map on windows of arc length `2a`: chords grow
/// with arc separation, and normal segments of length `2a` do not cross.
fn locally_injective(samples: &Samples, a: f64) -> bool {
    let n = samples.len();
    let reach = ((2.0 * a / samples.h).ceil() as usize).min(n / 2);
    for i in 0..n {
        let (pi, ti) = (samples.pos[i], samples.tan[i]);
        let ni = [-ti[1], ti[0]];
        for d in 1..=reach {
            let j = (i + d) % n;
            let (pj, tj) = (samples.pos[j], samples.tan[j]);
            let chord = sub(pj, pi);
            if dot(tj, chord) <= 0.0 {
                return false;
            }
            let nj = [-tj[1], tj[0]];
            // pi + u ni = pj + v nj
            let det = cross(ni, [-nj[0], -nj[1]]);
            if det.abs() <= 1e-14 {
                continue;
            }
            let u = cross(chord, [-nj[0], -nj[1]]) / det;
            let v = cross(ni, chord) / det;
            if u.abs() <= a && v.abs() <= a {
                return false;
            }
        }
    }
    true
}

/// `min_{p ∈ [p_min, L/2]} min_t |Γ(t) − Γ(t+p)|` by a grid scan with
/// golden-section refinement; returns `(τ, t, p)`. Ties go to the smaller `p`.
pub fn chord_gap(curve: &ArcCurve, p_min: f64, samples: usize) -> Result<(f64, f64, f64)> {
    let half = 0.5 * curve.length;
    if !(p_min > 0.0 && p_min <= half) {
        return Err(Error::domain(format!(
            "chord gap needs 0 < p_min <= L/2, got {p_min}"
        )));
    }
    let sm = Samples::new(curve, samples.max(64));
    let n = sm.len();
    let h = sm.h;
    let dist = |t: f64, p: f64| {
        let a = curve.position(t);
        let b = curve.position(t + p);
        (a[0] - b[0]).hypot(a[1] - b[1])
    };

    let mut best = (f64::INFINITY, 0.0, p_min);
    for i in 0..n {
        let v = dist(i as f64 * h, p_min);
        if v < best.0 {
            best = (v, i as f64 * h, p_min);
        }
    }
    let d0 = (p_min / h).floor() as usize + 1;
    let d1 = ((half / h).floor() as usize).min(n / 2);
    for d in d0..=d1 {
        let p = d as f64 * h;
        if p > half {
            break;
        }
        for i in 0..n {
            let q = sm.pos[(i + d) % n];
            let v = (sm.pos[i][0] - q[0]).hypot(sm.pos[i][1] - q[1]);
            if v < best.0 {
                best = (v, i as f64 * h, p);
            }
        }
    }

    let (mut t, mut p) = (best.1, best.2);
    let mut val = best.0;
    let tol = 1e-12 * curve.length;
    for _ in 0..6 {
        let (tt, vt) = golden_min(|x| dist(x, p), t - h, t + h, tol);
        if vt < val {
            t = tt;
            val = vt;
        }
        let lo = (p - h).max(p_min);
        let hi = (p + h).min(half);
        let (pp, vp) = golden_min(|y| dist(t, y), lo, hi, tol);
        if vp < val {
            p = pp;
            val = vp;
        }
    }
    Ok((val, t.rem_euclid(curve.length), p))
}

fn candidates(curve: &ArcCurve) -> impl Iterator<Item = f64> {
    let a_max = curve.offset_limit();
    (1..=MAX_CANDIDATES).map(move |k| a_max * SHRINK.powi(k as i32))
}

/// Brute-force overlap test of the images of the `ns × nu` cells of
/// `[0, L) × (−a, a)` under the tubular map. Cells sharing a vertex are
/// exempt.
pub fn collision_scan(curve: &ArcCurve, a: f64, ns: usize, nu: usize) -> CollisionReport {
    let hs = curve.length / ns as f64;
    let hu = 2.0 * a / nu as f64;
    let pts: Vec<Vec<[f64; 2]>> = (0..ns)
        .map(|i| {
            (0..=nu)
                .map(|j| tubular_point(curve, i as f64 * hs, -a + j as f64 * hu))
                .collect()
        })
        .collect();
    let quad = |i: usize, j: usize| -> [[f64; 2]; 4] {
        let i1 = (i + 1) % ns;
        [pts[i][j], pts[i1][j], pts[i1][j + 1], pts[i][j + 1]]
    };
    let ncell = ns * nu;
    let mut boxes = Vec::with_capacity(ncell);
    let mut extent: f64 = 0.0;
    for i in 0..ns {
        for j in 0..nu {
            let q = quad(i, j);
            let mut b = [
                f64::INFINITY,
                f64::NEG_INFINITY,
                f64::INFINITY,
                f64::NEG_INFINITY,
            ];
            for p in q {
                b[0] = b[0].min(p[0]);
                b[1] = b[1].max(p[0]);
                b[2] = b[2].min(p[1]);
                b[3] = b[3].max(p[1]);
            }
            extent = extent.max(b[1] - b[0]).max(b[3] - b[2]);
            boxes.push(b);
        }
    }
    let size = extent.max(f64::MIN_POSITIVE);
    let key = |x: f64| (x / size).floor() as i64;
    let mut grid: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
    for (c, b) in boxes.iter().enumerate() {
        for kx in key(b[0])..=key(b[1]) {
            for ky in key(b[2])..=key(b[3]) {
                grid.entry((kx, ky)).or_default().push(c as u32);
            }
        }
    }
    let mut keys: Vec<&(i64, i64)> = grid.keys().collect();
    keys.sort();
    let scale = extent;
    let mut overlaps = 0;
    let mut first = None;
    for k in keys {
        let cells = &grid[k];
        for (x, &ca) in cells.iter().enumerate() {
            for &cb in &cells[x + 1..] {
                let (ca, cb) = (ca as usize, cb as usize);
                let (ba, bb) = (boxes[ca], boxes[cb]);
                // Visit each pair once: in the bucket holding the corner of
                // the boxes' intersection.
                if (key(ba[0].max(bb[0])), key(ba[2].max(bb[2]))) != *k {
                    continue;
                }
                if ba[1] < bb[0] || bb[1] < ba[0] || ba[3] < bb[2] || bb[3] < ba[2] {
                    continue;
                }
                let (ia, ja) = (ca / nu, ca % nu);
                let (ib, jb) = (cb / nu, cb % nu);
                let di = ia.abs_diff(ib).min(ns - ia.abs_diff(ib));
                if di <= 1 && ja.abs_diff(jb) <= 1 {
                    continue;
                }
                if convex_overlap(&quad(ia, ja), &quad(ib, jb), 1e-12 * scale) {
                    overlaps += 1;
                    if first.is_none() {
                        first = Some(((ia, ja), (ib, jb)));
                    }
                }
            }
        }
    }
    CollisionReport {
        half_width: a,
        ns,
        nu,
        overlaps,
        first,
    }
}

/// Separating-axis test for two convex quadrilaterals; overlaps thinner than
/// `slack` are ignored.
fn convex_overlap(p: &[[f64; 2]; 4], q: &[[f64; 2]; 4], slack: f64) -> bool {
    for poly in [p, q] {
        for e in 0..4 {
            let a = poly[e];
            let b = poly[(e + 1) % 4];
            let axis = [-(b[1] - a[1]), b[0] - a[0]];
            let norm = axis[0].hypot(axis[1]);
            if norm == 0.0 {
                continue;
            }
            let axis = [axis[0] / norm, axis[1] / norm];
            let proj = |poly: &[[f64; 2]; 4]| {
                poly.iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                        let d = dot(*v, axis);
                        (lo.min(d), hi.max(d))
                    })
            };
            let (plo, phi) = proj(p);
            let (qlo, qhi) = proj(q);
            if phi <= qlo + slack || qhi <= plo + slack {
                return false;
            }
        }
    }
    true
}

/// Certifies `(a₀, τ, a₁)` for `curve` using `samples` points along it.
pub fn certify_tubular_radius(curve: &ArcCurve, samples: usize) -> Result<TubularRadius> {
    let samples = samples.max(64);
    let sm = Samples::new(curve, samples);
    let a0 = candidates(curve)
        .find(|&a| locally_injective(&sm, a))
        .ok_or_else(|| {
            Error::Geometry("no half-width passes the local injectivity check".into())
        })?;
    let p_min = a0.min(0.5 * curve.length);
    let (tau, t_at, p_at) = chord_gap(curve, p_min, samples)?;
    if tau <= 1e-12 * curve.length {
        return Err(Error::Geometry(format!(
            "chord gap {tau:e} at t={t_at:.6}, p={p_at:.6}: the curve touches itself"
        )));
    }
    let a1 = a0.min(0.25 * tau);
    let nu = 50;
    let a_scan = candidates(curve)
        .find(|&a| collision_scan(curve, a, samples, nu).is_clean())
        .unwrap_or(a1);
    let certificate = collision_scan(curve, a1, samples, nu);
    if !certificate.is_clean() {
        return Err(Error::Internal(format!(
            "collision scan at a1 = {a1} found {} overlapping cell pairs, first {:?}",
            certificate.overlaps, certificate.first
        )));
    }
    Ok(TubularRadius {
        a0,
        tau,
        tau_at: (t_at, p_at),
        a1,
        a_scan: a_scan.max(a1),
        certificate,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{build_curve, CurveSpec};

    #[test]
    fn circle_chord_gap_at_given_a0() {
        let c = build_curve(&CurveSpec::circle(1.0)).unwrap();
        let (tau, _, p) = chord_gap(&c, 0.4, 2000).unwrap();
        assert!((tau - 2.0 * 0.2f64.sin()).abs() < 1e-12, "{tau}");
        assert!((p - 0.4).abs() < 1e-12);
    }

    #[test]
    fn circle_radius_is_consistent() {
        let c = build_curve(&CurveSpec::circle(1.0)).unwrap();
        let r = certify_tubular_radius(&c, 2000).unwrap();
        assert!(r.a0 < 0.5 && r.a1 <= r.a0 && r.a1 <= r.tau / 4.0);
        assert!((r.tau - 2.0 * (r.a0 / 2.0).sin()).abs() < 1e-12);
        assert!(r.certificate.is_clean());
        assert!((r.a_scan - 0.475).abs() < 1e-12);
    }

    #[test]
    fn ellipse_chord_gap_matches_pairwise_oracle() {
        let e = build_curve(&CurveSpec::ellipse(2.0, 1.0)).unwrap();
        let r = certify_tubular_radius(&e, 2000).unwrap();
        // Pairwise minimum over 10⁴ points with arc separation in [a₀, L/2],
        // including the pairs at separation exactly a₀.
        let n = 10_000;
        let h = e.length / n as f64;
        let pts: Vec<[f64; 2]> = (0..n).map(|i| e.position(i as f64 * h)).collect();
        let dmin = (r.a0 / h).ceil() as usize;
        let mut oracle = f64::INFINITY;
        for i in 0..n {
            let t = i as f64 * h;
            let (p, q) = (e.position(t), e.position(t + r.a0));
            oracle = oracle.min((p[0] - q[0]).hypot(p[1] - q[1]));
        }
        for i in 0..n {
            for d in dmin..=n / 2 {
                let q = pts[(i + d) % n];
                oracle = oracle.min((pts[i][0] - q[0]).hypot(pts[i][1] - q[1]));
            }
        }
        assert!((r.tau - oracle).abs() < 1e-4, "{} vs {}", r.tau, oracle);
        assert!(r.tau <= oracle + 1e-12);
    }

    #[test]
    fn detects_overlap_beyond_focal_distance() {
        // Beyond the radius of curvature inner normals cross.
        let c = build_curve(&CurveSpec::circle(1.0)).unwrap();
        let rep = collision_scan(&c, 1.2, 400, 20);
        assert!(!rep.is_clean());
        let ok = collision_scan(&c, 0.45, 400, 20);
        assert!(ok.is_clean());
    }

    #[test]
    fn refinement_does_not_grow_a1() {
        let e = build_curve(&CurveSpec::ellipse(2.0, 1.0)).unwrap();
        let coarse = certify_tubular_radius(&e, 1000).unwrap();
        let fine = certify_tubular_radius(&e, 2000).unwrap();
        assert!(fine.a1 <= coarse.a1 + 1e-6);
    }
}

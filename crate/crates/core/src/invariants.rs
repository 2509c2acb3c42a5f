//! Linking numbers, self-linking, the Hopf invariant and the 3-dimensional
//! obstruction class of a pair of fields.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::{extract_with, frame_by_jacobian, frame_by_pushoff_with, ExtractOptions, FramedCurve, PontryaginSet};
use crate::fields::{BoxDomain, RegularValue, SampledField};
use crate::geom::{segment_distance, Vec3};

/// Largest distance from an integer accepted before rounding a Gauss integral.
pub const INTEGER_RESIDUAL_TOL: f64 = 0.1;

/// Ambient orientation used to sign linking numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Handedness {
    #[default]
    Right,
    Left,
}

impl Handedness {
    fn sign(self) -> f64 {
        match self {
            Handedness::Right => 1.0,
            Handedness::Left => -1.0,
        }
    }
}

/// Signed solid angle swept by segment pairs, via the closed form for two
/// straight segments.
fn segment_pair_solid_angle(p1: Vec3, p2: Vec3, p3: Vec3, p4: Vec3) -> f64 {
    let r13 = p3 - p1;
    let r14 = p4 - p1;
    let r23 = p3 - p2;
    let r24 = p4 - p2;
    let r12 = p2 - p1;
    let r34 = p4 - p3;
    let n = [r13.cross(r14), r14.cross(r24), r24.cross(r23), r23.cross(r13)];
    let mut unit = [Vec3::ZERO; 4];
    for (u, v) in unit.iter_mut().zip(n) {
        match v.try_normalize() {
            Some(w) => *u = w,
            None => return 0.0,
        }
    }
    let s = |a: Vec3, b: Vec3| a.dot(b).clamp(-1.0, 1.0).asin();
    let omega = s(unit[0], unit[1]) + s(unit[1], unit[2]) + s(unit[2], unit[3]) + s(unit[3], unit[0]);
    let orient = r34.cross(r12).dot(r13);
    if orient > 0.0 {
        omega
    } else if orient < 0.0 {
        -omega
    } else {
        0.0
    }
}

/// The Gauss linking integral of two closed polylines, unrounded.
pub fn gauss_integral(c1: &FramedCurve, c2: &FramedCurve) -> f64 {
    let rows: Vec<f64> = (0..c1.segment_count())
        .into_par_iter()
        .map(|i| {
            let (a, b) = c1.segment(i);
            c2.segments().map(|(c, d)| segment_pair_solid_angle(a, b, c, d)).sum::<f64>()
        })
        .collect();
    rows.iter().sum::<f64>() / (4.0 * PI)
}

fn scale_of(c1: &FramedCurve, c2: &FramedCurve) -> f64 {
    let (lo1, hi1) = c1.bounding_box();
    let (lo2, hi2) = c2.bounding_box();
    (hi1 - lo1).norm().max((hi2 - lo2).norm()).max(1e-300)
}

fn check_pair(c1: &FramedCurve, c2: &FramedCurve) -> Result<()> {
    if !c1.closed || !c2.closed {
        return Err(Error::OpenCurve);
    }
    let d = c1.min_distance_to(c2);
    if d <= 1e-9 * scale_of(c1, c2) {
        return Err(Error::CurvesTooClose { distance: d });
    }
    Ok(())
}

fn round_checked(value: f64) -> Result<i64> {
    let r = value.round();
    let residual = (value - r).abs();
    if !(residual < INTEGER_RESIDUAL_TOL) {
        return Err(Error::NotNearInteger { value, residual });
    }
    Ok(r as i64)
}

/// Linking number by the Gauss double integral.
pub fn linking_gauss(c1: &FramedCurve, c2: &FramedCurve) -> Result<i64> {
    linking_gauss_oriented(c1, c2, Handedness::Right)
}

pub fn linking_gauss_oriented(c1: &FramedCurve, c2: &FramedCurve, handedness: Handedness) -> Result<i64> {
    check_pair(c1, c2)?;
    round_checked(handedness.sign() * gauss_integral(c1, c2))
}

/// Linking number as half the signed crossing count of the projection
/// along `direction`.
pub fn linking_crossings(c1: &FramedCurve, c2: &FramedCurve, direction: Vec3) -> Result<i64> {
    check_pair(c1, c2)?;
    let d0 = direction
        .try_normalize()
        .ok_or_else(|| Error::InvalidParams("projection direction is zero".into()))?;
    const BUDGET: usize = 16;
    let axis = Vec3::new(0.3, -0.7, 0.2).reject(d0).try_normalize().unwrap_or(Vec3::Z.reject(d0).normalize());
    for step in 0..BUDGET {
        let d = if step == 0 { d0 } else { d0.rotate_about(axis, 1e-6 * step as f64).normalize() };
        if let Some(twice) = crossing_sum(c1, c2, d) {
            if twice % 2 != 0 {
                return Err(Error::NotNearInteger { value: twice as f64 / 2.0, residual: 0.5 });
            }
            return Ok(twice / 2);
        }
    }
    Err(Error::JitterExhausted { attempts: BUDGET })
}

/// Signed crossing sum, or `None` when the projection is not generic.
fn crossing_sum(c1: &FramedCurve, c2: &FramedCurve, d: Vec3) -> Option<i64> {
    let e1 = if d.x.abs() < 0.9 { Vec3::X } else { Vec3::Y }.reject(d).normalize();
    let e2 = d.cross(e1);
    let proj = |v: Vec3| (v.dot(e1), v.dot(e2), v.dot(d));
    let eps = 1e-12;
    let mut total = 0i64;
    for (a0, a1) in c1.segments() {
        let (ax, ay, ah) = proj(a0);
        let (bx, by, bh) = proj(a1);
        for (q0, q1) in c2.segments() {
            let (cx, cy, ch) = proj(q0);
            let (dx, dy, dh) = proj(q1);
            let (rx, ry) = (bx - ax, by - ay);
            let (sx, sy) = (dx - cx, dy - cy);
            let denom = rx * sy - ry * sx;
            let scale = (rx.abs() + ry.abs()) * (sx.abs() + sy.abs());
            let (wx, wy) = (cx - ax, cy - ay);
            let t = (wx * sy - wy * sx) / denom;
            let u = (wx * ry - wy * rx) / denom;
            if denom.abs() <= eps * scale {
                // Parallel in projection: degenerate only if collinear and overlapping.
                let cross = wx * ry - wy * rx;
                if cross.abs() <= eps * scale.sqrt().max(1e-300) * (wx.abs() + wy.abs()).max(1e-300) {
                    return None;
                }
                continue;
            }
            let near = |x: f64| x.abs() <= 1e-10 || (x - 1.0).abs() <= 1e-10;
            if (-1e-10..=1.0 + 1e-10).contains(&t) && (-1e-10..=1.0 + 1e-10).contains(&u) {
                if near(t) || near(u) {
                    return None;
                }
                let h1 = ah + (bh - ah) * t;
                let h2 = ch + (dh - ch) * u;
                if (h1 - h2).abs() <= 1e-12 {
                    return None;
                }
                let over_first = h1 > h2;
                let s = if denom > 0.0 { 1 } else { -1 };
                total += if over_first { s } else { -s };
            }
        }
    }
    Some(total)
}

/// Number of self-crossings of the projection of `c` along `d`, or `None`
/// when the projection is not generic.
pub fn projection_self_crossings(c: &FramedCurve, d: Vec3) -> Option<usize> {
    let d = d.try_normalize()?;
    let e1 = if d.x.abs() < 0.9 { Vec3::X } else { Vec3::Y }.reject(d).normalize();
    let e2 = d.cross(e1);
    let pts: Vec<(f64, f64)> = c.vertices.iter().map(|v| (v.dot(e1), v.dot(e2))).collect();
    let m = c.segment_count();
    let n = pts.len();
    let seg = |i: usize| (pts[i], pts[(i + 1) % n]);
    let mut count = 0;
    for a in 0..m {
        for b in a + 2..m {
            if c.closed && a == 0 && b == m - 1 {
                continue;
            }
            let ((ax, ay), (bx, by)) = seg(a);
            let ((cx, cy), (dx, dy)) = seg(b);
            let (rx, ry, sx, sy) = (bx - ax, by - ay, dx - cx, dy - cy);
            let denom = rx * sy - ry * sx;
            let (wx, wy) = (cx - ax, cy - ay);
            if denom.abs() <= 1e-14 * (rx.abs() + ry.abs()) * (sx.abs() + sy.abs()) {
                if (wx * ry - wy * rx).abs() <= 1e-14 {
                    return None;
                }
                continue;
            }
            let t = (wx * sy - wy * sx) / denom;
            let u = (wx * ry - wy * rx) / denom;
            if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
                count += 1;
            }
        }
    }
    Some(count)
}

/// A projection direction in which the closed curve `c` has no crossings,
/// which certifies that it is unknotted. Tries the coordinate axes and the
/// normal of the curve's vector area.
pub fn unknot_certificate(c: &FramedCurve) -> Option<Vec3> {
    if !c.closed {
        return None;
    }
    let centre = c.centroid();
    let area = c.segments().fold(Vec3::ZERO, |acc, (a, b)| acc + (a - centre).cross(b - centre));
    let mut candidates = vec![Vec3::X, Vec3::Y, Vec3::Z];
    if let Some(nrm) = area.try_normalize() {
        candidates.insert(0, nrm);
    }
    candidates.into_iter().find(|&d| projection_self_crossings(c, d) == Some(0))
}

/// Smallest scale on which a closed polyline looks embedded: curvature
/// radius at vertices and distance between non-adjacent segments.
pub fn feature_size(c: &FramedCurve) -> f64 {
    let n = c.vertices.len();
    let m = c.segment_count();
    let mut best = f64::INFINITY;
    for v in 0..n {
        if !c.closed && (v == 0 || v + 1 == n) {
            continue;
        }
        let prev = c.vertices[(v + n - 1) % n];
        let next = c.vertices[(v + 1) % n];
        let (d1, d2) = (c.vertices[v] - prev, next - c.vertices[v]);
        let turn = d1.angle_to(d2);
        let l = d1.norm().min(d2.norm());
        if turn > 1e-12 {
            best = best.min(l / turn);
        }
        best = best.min(l);
    }
    let rows: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|a| {
            let mut local = f64::INFINITY;
            for b in a + 2..m {
                if c.closed && a == 0 && b == m - 1 {
                    continue;
                }
                let (p0, p1) = c.segment(a);
                let (q0, q1) = c.segment(b);
                local = local.min(segment_distance(p0, p1, q0, q1));
            }
            local
        })
        .collect();
    rows.into_iter().fold(best, f64::min)
}

/// lk(L, L̃) for the pushoff L̃ along the framing.
pub fn self_linking(c: &FramedCurve) -> Result<i64> {
    self_linking_oriented(c, Handedness::Right)
}

pub fn self_linking_oriented(c: &FramedCurve, handedness: Handedness) -> Result<i64> {
    if !c.closed {
        return Err(Error::OpenCurve);
    }
    let eps = 0.25 * feature_size(c);
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::CurvesTooClose { distance: eps });
    }
    let pushed = c.pushed_off(eps);
    linking_gauss_oriented(c, &pushed, handedness)
}

/// Σ self-linking + 2 Σ pairwise linking of a closed framed link.
pub fn framed_link_invariant(components: &[FramedCurve]) -> Result<i64> {
    let mut total = 0;
    for (i, c) in components.iter().enumerate() {
        total += self_linking(c)?;
        for d in &components[i + 1..] {
            total += 2 * linking_gauss(c, d)?;
        }
    }
    Ok(total)
}

/// Total linking of two closed links.
pub fn cross_linking(a: &[FramedCurve], b: &[FramedCurve]) -> Result<i64> {
    let mut total = 0;
    for c in a {
        for d in b {
            total += linking_gauss(c, d)?;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopfReport {
    pub value: i64,
    /// Self-linking of the framed Pontryagin link (Jacobian framing).
    pub by_framing: i64,
    /// Linking of the preimages of p and of its pushoff companion.
    pub by_two_values: i64,
    pub components: usize,
    pub regular_value: RegularValue,
}

pub fn hopf_invariant(field: &SampledField, rv: &RegularValue) -> Result<HopfReport> {
    hopf_invariant_with(field, rv, &ExtractOptions::default())
}

pub fn hopf_invariant_with(field: &SampledField, rv: &RegularValue, opts: &ExtractOptions) -> Result<HopfReport> {
    let (pushed_set, partners) = frame_by_pushoff_with(field, rv, opts)?;
    if pushed_set.arc_count() > 0 {
        return Err(Error::NotClosed(format!("{} open arcs in the preimage", pushed_set.arc_count())));
    }
    let framed = frame_by_jacobian(&pushed_set, field)?;
    let by_framing = framed_link_invariant(&framed.components)?;
    let by_two_values = cross_linking(&pushed_set.components, &partners)?;
    if by_framing != by_two_values {
        return Err(Error::MethodDisagreement(format!(
            "framed self-linking gives {by_framing}, two-value linking gives {by_two_values}"
        )));
    }
    Ok(HopfReport {
        value: by_framing,
        by_framing,
        by_two_values,
        components: framed.components.len(),
        regular_value: framed.regular_value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum O3Method {
    DoubledField,
    CompensatingLoop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstructionReport {
    pub o3: i64,
    /// Divisibility of the Euler class; 0 means o3 is a plain integer.
    pub d: u64,
    pub method: O3Method,
    pub diagnostics: ObstructionDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstructionDiagnostics {
    pub doubled_field: i64,
    pub compensating_loop: Option<i64>,
    pub doubled_components: usize,
    pub outside_deviation: f64,
    pub regular_value: RegularValue,
}

pub const OUTSIDE_BALL_TOL: f64 = 1e-6;

/// Framed-class difference of `f2` relative to `f1` inside `ball`.
///
/// The doubled field is `f2` on the ball with `f1` reflected across the
/// ball's top face stacked above it.
pub fn obstruction_o3(f1: &SampledField, f2: &SampledField, ball: &BoxDomain, rv: &RegularValue, d: u64) -> Result<ObstructionReport> {
    obstruction_o3_with(f1, f2, ball, rv, d, &ExtractOptions::default())
}

pub fn obstruction_o3_with(
    f1: &SampledField,
    f2: &SampledField,
    ball: &BoxDomain,
    rv: &RegularValue,
    d: u64,
    opts: &ExtractOptions,
) -> Result<ObstructionReport> {
    let dom = f1.domain();
    if dom != f2.domain() {
        return Err(Error::LatticeMismatch);
    }
    let range = dom
        .aligned_range(ball)
        .ok_or_else(|| Error::InvalidDomain("ball is not aligned with the lattice".into()))?;
    let mut outside = 0.0f64;
    for (idx, (a, b)) in f1.values().iter().zip(f2.values()).enumerate() {
        let ijk = dom.unindex(idx);
        let interior = (0..3).all(|ax| ijk[ax] > range[ax].0 && ijk[ax] < range[ax].1);
        if !interior {
            outside = outside.max((*a - *b).norm());
        }
    }
    if outside > OUTSIDE_BALL_TOL {
        return Err(Error::FieldsDifferOutsideBall { deviation: outside });
    }
    let g1 = f1.restrict_range(range);
    let g2 = f2.restrict_range(range);

    let height = g1.domain().max.z - g1.domain().min.z;
    let doubled = g2.stack(&g1.mirrored_z().translated(Vec3::new(0.0, 0.0, height)), OUTSIDE_BALL_TOL)?;
    let dset = extract_with(&doubled, rv, opts)?;
    if let Some(arc) = dset.arcs().next() {
        let faces = arc.endpoint_faces.clone().unwrap_or_default();
        return Err(Error::NotClosed(format!(
            "doubled preimage has an arc ending on {:?} and {:?}; only the top face of the ball is glued",
            faces[0], faces[1]
        )));
    }
    let dset = frame_by_jacobian(&dset, &doubled)?;
    let by_double = framed_link_invariant(&dset.components)?;

    let compensating = compensating_loop(&g1, &g2, rv, opts)?;
    if let Some(c) = compensating {
        if c != by_double {
            return Err(Error::MethodDisagreement(format!("doubled field gives {by_double}, compensating loop gives {c}")));
        }
    }
    let o3 = if d > 0 { by_double.rem_euclid(d as i64) } else { by_double };
    Ok(ObstructionReport {
        o3,
        d,
        method: O3Method::DoubledField,
        diagnostics: ObstructionDiagnostics {
            doubled_field: by_double,
            compensating_loop: compensating,
            doubled_components: dset.components.len(),
            outside_deviation: outside,
            regular_value: dset.regular_value,
        },
    })
}

/// Difference of closed-component invariants, when the open arcs of both
/// preimages coincide and no closed component coexists with an arc.
fn compensating_loop(g1: &SampledField, g2: &SampledField, rv: &RegularValue, opts: &ExtractOptions) -> Result<Option<i64>> {
    let s1 = frame_by_jacobian(&extract_with(g1, rv, opts)?, g1)?;
    let s2 = frame_by_jacobian(&extract_with(g2, rv, opts)?, g2)?;
    let arcs1: Vec<&FramedCurve> = s1.arcs().collect();
    let arcs2: Vec<&FramedCurve> = s2.arcs().collect();
    if arcs1.len() != arcs2.len() {
        return Ok(None);
    }
    let tol = g1.domain().cell_diameter();
    for a in &arcs1 {
        if !arcs2.iter().any(|b| hausdorff(a, b) < tol) {
            return Ok(None);
        }
    }
    if !arcs1.is_empty() && (s1.closed_count() > 0 || s2.closed_count() > 0) {
        return Ok(None);
    }
    let closed = |s: &PontryaginSet| s.closed_components().cloned().collect::<Vec<_>>();
    Ok(Some(framed_link_invariant(&closed(&s2))? - framed_link_invariant(&closed(&s1))?))
}

fn hausdorff(a: &FramedCurve, b: &FramedCurve) -> f64 {
    let ab = a.vertices.iter().map(|v| b.distance_to(*v)).fold(0.0, f64::max);
    let ba = b.vertices.iter().map(|v| a.distance_to(*v)).fold(0.0, f64::max);
    ab.max(ba)
}

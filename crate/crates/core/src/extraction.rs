//! Framed preimages of regular values (Pontryagin submanifolds) and the
//! inverse collapse construction.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{
    certify_regular_value_gated, BoxDomain, BoxFace, RegularValue, SampledField, DEFAULT_GATE_COS,
    DEFAULT_REGULARITY_TOL,
};
use crate::geom::{closest_on_segment, inverse_stereographic, segment_distance, Vec3};

/// An oriented polyline with a normal vector field.
///
/// Closed curves do not repeat their first vertex; the closing segment is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramedCurve {
    pub vertices: Vec<Vec3>,
    pub closed: bool,
    pub framing: Vec<Vec3>,
    /// Boundary faces holding the start and end vertex of an open arc.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint_faces: Option<[Vec<BoxFace>; 2]>,
}

impl FramedCurve {
    pub fn closed(vertices: Vec<Vec3>, framing: Vec<Vec3>) -> Self {
        FramedCurve { vertices, closed: true, framing, endpoint_faces: None }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn segment_count(&self) -> usize {
        match (self.closed, self.vertices.len()) {
            (_, 0 | 1) => 0,
            (true, n) => n,
            (false, n) => n - 1,
        }
    }

    pub fn segment(&self, i: usize) -> (Vec3, Vec3) {
        let n = self.vertices.len();
        (self.vertices[i], self.vertices[(i + 1) % n])
    }

    pub fn segments(&self) -> impl Iterator<Item = (Vec3, Vec3)> + '_ {
        (0..self.segment_count()).map(move |i| self.segment(i))
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| a.distance(b)).sum()
    }

    /// Unit tangent at a vertex by central differences.
    pub fn tangent(&self, i: usize) -> Vec3 {
        let n = self.vertices.len();
        if n < 2 {
            return Vec3::ZERO;
        }
        let (prev, next) = if self.closed {
            ((i + n - 1) % n, (i + 1) % n)
        } else {
            (i.saturating_sub(1), (i + 1).min(n - 1))
        };
        (self.vertices[next] - self.vertices[prev]).normalize()
    }

    /// Largest |framing · tangent| over all vertices.
    pub fn framing_orthogonality_error(&self) -> f64 {
        (0..self.vertices.len())
            .map(|i| self.framing[i].dot(self.tangent(i)).abs())
            .fold(0.0, f64::max)
    }

    pub fn reversed(&self) -> FramedCurve {
        let mut c = self.clone();
        c.vertices.reverse();
        c.framing.reverse();
        if let Some([a, b]) = c.endpoint_faces.take() {
            c.endpoint_faces = Some([b, a]);
        }
        c
    }

    pub fn with_framing(&self, framing: Vec<Vec3>) -> FramedCurve {
        FramedCurve { framing, ..self.clone() }
    }

    pub fn negated_framing(&self) -> FramedCurve {
        self.with_framing(self.framing.iter().map(|w| -*w).collect())
    }

    pub fn translated(&self, offset: Vec3) -> FramedCurve {
        let mut c = self.clone();
        for v in &mut c.vertices {
            *v += offset;
        }
        c
    }

    /// Reflection through the plane orthogonal to `axis`.
    pub fn mirrored(&self, axis: usize) -> FramedCurve {
        let flip = |v: Vec3| v.with_component(axis, -v.component(axis));
        FramedCurve {
            vertices: self.vertices.iter().map(|v| flip(*v)).collect(),
            framing: self.framing.iter().map(|v| flip(*v)).collect(),
            ..self.clone()
        }
    }

    /// Pushoff along the framing.
    pub fn pushed_off(&self, distance: f64) -> FramedCurve {
        FramedCurve {
            vertices: self.vertices.iter().zip(&self.framing).map(|(v, w)| *v + *w * distance).collect(),
            ..self.clone()
        }
    }

    /// Distance from `x` to the polyline.
    pub fn distance_to(&self, x: Vec3) -> f64 {
        if self.vertices.len() == 1 {
            return x.distance(self.vertices[0]);
        }
        self.segments().map(|(a, b)| x.distance(closest_on_segment(x, a, b).1)).fold(f64::INFINITY, f64::min)
    }

    pub fn min_distance_to(&self, other: &FramedCurve) -> f64 {
        let mut best = f64::INFINITY;
        for (a0, a1) in self.segments() {
            for (b0, b1) in other.segments() {
                best = best.min(segment_distance(a0, a1, b0, b1));
            }
        }
        best
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = -lo;
        for v in &self.vertices {
            lo = Vec3::new(lo.x.min(v.x), lo.y.min(v.y), lo.z.min(v.z));
            hi = Vec3::new(hi.x.max(v.x), hi.y.max(v.y), hi.z.max(v.z));
        }
        (lo, hi)
    }

    pub fn centroid(&self) -> Vec3 {
        let n = self.vertices.len().max(1) as f64;
        self.vertices.iter().fold(Vec3::ZERO, |a, v| a + *v) / n
    }

    /// Circle of radius `r` about `center` in the plane spanned by `e1`, `e2`,
    /// oriented from `e1` towards `e2`, with radial framing.
    pub fn circle(center: Vec3, e1: Vec3, e2: Vec3, r: f64, n: usize) -> FramedCurve {
        let mut vertices = Vec::with_capacity(n);
        let mut framing = Vec::with_capacity(n);
        for i in 0..n {
            let th = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            let radial = e1 * th.cos() + e2 * th.sin();
            vertices.push(center + radial * r);
            framing.push(radial);
        }
        FramedCurve::closed(vertices, framing)
    }
}

/// The framed preimage of a regular value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PontryaginSet {
    pub components: Vec<FramedCurve>,
    /// The value actually used (after any jitter).
    pub regular_value: RegularValue,
    pub field_digest: String,
    #[serde(default)]
    pub jitter_steps: usize,
}

impl PontryaginSet {
    pub fn closed_components(&self) -> impl Iterator<Item = &FramedCurve> {
        self.components.iter().filter(|c| c.closed)
    }

    pub fn arcs(&self) -> impl Iterator<Item = &FramedCurve> {
        self.components.iter().filter(|c| !c.closed)
    }

    pub fn closed_count(&self) -> usize {
        self.closed_components().count()
    }

    pub fn arc_count(&self) -> usize {
        self.arcs().count()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub const FORMAT_VERSION: u32 = 1;

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Record<'a> {
            version: u32,
            #[serde(flatten)]
            set: &'a PontryaginSet,
        }
        Ok(serde_json::to_string_pretty(&Record { version: Self::FORMAT_VERSION, set: self })?)
    }

    pub fn from_json(s: &str) -> Result<PontryaginSet> {
        #[derive(Deserialize)]
        struct Record {
            version: u32,
            #[serde(flatten)]
            set: PontryaginSet,
        }
        let r: Record = serde_json::from_str(s)?;
        if r.version != Self::FORMAT_VERSION {
            return Err(Error::Parse(format!("unsupported curve format version {}", r.version)));
        }
        Ok(r.set)
    }

    /// Wavefront OBJ line geometry, one object per component.
    pub fn to_obj(&self) -> String {
        let mut out = String::from("# pontryagin curves\n");
        let mut base = 1;
        for (ci, c) in self.components.iter().enumerate() {
            let _ = writeln!(out, "o component_{ci}");
            for v in &c.vertices {
                let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
            }
            let mut idx: Vec<usize> = (base..base + c.vertices.len()).collect();
            if c.closed && !idx.is_empty() {
                idx.push(base);
            }
            if idx.len() >= 2 {
                let joined: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
                let _ = writeln!(out, "l {}", joined.join(" "));
            }
            base += c.vertices.len();
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("component,index,closed,x,y,z,fx,fy,fz\n");
        for (ci, c) in self.components.iter().enumerate() {
            for (i, (v, w)) in c.vertices.iter().zip(&c.framing).enumerate() {
                let _ = writeln!(out, "{ci},{i},{},{},{},{},{},{},{}", c.closed, v.x, v.y, v.z, w.x, w.y, w.z);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractOptions {
    /// Skip the regularity certificate (the caller has already run it).
    pub certify: bool,
    pub regularity_tol: f64,
    pub gate_cos: f64,
    pub max_jitter: usize,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            certify: true,
            regularity_tol: DEFAULT_REGULARITY_TOL,
            gate_cos: DEFAULT_GATE_COS,
            max_jitter: 8,
        }
    }
}

pub const JITTER_ANGLE: f64 = 1e-7;

pub fn jitter_axis() -> Vec3 {
    Vec3::new(1.0, 2.0, 3.0).normalize()
}

/// Pontryagin set of `rv` with the framing induced by the linear interpolant.
pub fn extract(field: &SampledField, rv: &RegularValue) -> Result<PontryaginSet> {
    extract_with(field, rv, &ExtractOptions::default())
}

pub fn extract_with(field: &SampledField, rv: &RegularValue, opts: &ExtractOptions) -> Result<PontryaginSet> {
    if opts.certify {
        let report = certify_regular_value_gated(field, rv, opts.regularity_tol, opts.gate_cos);
        if !report.certified {
            return Err(Error::NotRegular {
                worst: report.worst_singular,
                cell: report.worst_cell.unwrap_or_default(),
            });
        }
    }
    let digest = field.digest();
    for step in 0..=opts.max_jitter {
        let value = if step == 0 { *rv } else { rv.rotated(jitter_axis(), JITTER_ANGLE * step as f64) };
        match trace(field, &value) {
            Ok(components) => {
                return Ok(PontryaginSet { components, regular_value: value, field_digest: digest, jitter_steps: step })
            }
            Err(Trace::Degenerate) => continue,
            Err(Trace::Fatal(e)) => return Err(e),
        }
    }
    Err(Error::JitterExhausted { attempts: opts.max_jitter + 1 })
}

enum Trace {
    Degenerate,
    Fatal(Error),
}

impl From<Error> for Trace {
    fn from(e: Error) -> Self {
        Trace::Fatal(e)
    }
}

/// Freudenthal split of the unit cube along the (+1,+1,+1) diagonal.
/// Corner bits: x = 1, y = 2, z = 4.
const TETS: [[usize; 4]; 6] = [[0, 1, 3, 7], [0, 3, 2, 7], [0, 2, 6, 7], [0, 6, 4, 7], [0, 4, 5, 7], [0, 5, 1, 7]];

#[derive(Debug, Clone, Copy)]
struct FaceHit {
    key: [usize; 3],
    point: Vec3,
    c: f64,
    /// Σλ, equal to (∇a × ∇b)·n for the face normal n of the sorted vertex order.
    flux: f64,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    from: FaceHit,
    to: FaceHit,
    framing: Vec3,
    cell: [usize; 3],
}

fn sort3(mut k: [(usize, usize); 3]) -> [(usize, usize); 3] {
    k.sort_unstable_by_key(|e| e.0);
    k
}

/// Intersection of {a = b = 0} with a triangle, computed from the globally
/// sorted vertex order so both neighbouring tetrahedra get identical bits.
fn face_hit(
    verts: [(usize, usize); 3],
    a: &[f64],
    b: &[f64],
    c: &[f64],
    pos: &dyn Fn(usize) -> Vec3,
) -> std::result::Result<Option<FaceHit>, Trace> {
    let s = sort3(verts);
    let g = [s[0].0, s[1].0, s[2].0];
    let l0 = a[g[1]] * b[g[2]] - a[g[2]] * b[g[1]];
    let l1 = a[g[2]] * b[g[0]] - a[g[0]] * b[g[2]];
    let l2 = a[g[0]] * b[g[1]] - a[g[1]] * b[g[0]];
    if l0 == 0.0 || l1 == 0.0 || l2 == 0.0 {
        let zeros = [l0, l1, l2].iter().filter(|l| **l == 0.0).count();
        if zeros == 3 {
            // Values parallel in the (a, b) plane: a crossing needs opposite directions or a zero.
            let vals = g.map(|v| (a[v], b[v]));
            let Some(&r) = vals.iter().find(|v| v.0 != 0.0 || v.1 != 0.0) else {
                return Err(Trace::Degenerate);
            };
            if vals.iter().all(|v| v.0 * r.0 + v.1 * r.1 > 0.0) {
                return Ok(None);
            }
            return Err(Trace::Degenerate);
        }
        let others: Vec<f64> = [l0, l1, l2].into_iter().filter(|l| *l != 0.0).collect();
        if others.len() == 2 && (others[0] > 0.0) != (others[1] > 0.0) {
            return Ok(None);
        }
        return Err(Trace::Degenerate);
    }
    let pos_all = l0 > 0.0 && l1 > 0.0 && l2 > 0.0;
    let neg_all = l0 < 0.0 && l1 < 0.0 && l2 < 0.0;
    if !(pos_all || neg_all) {
        return Ok(None);
    }
    let sum = l0 + l1 + l2;
    let (w0, w1, w2) = (l0 / sum, l1 / sum, l2 / sum);
    let point = pos(g[0]) * w0 + pos(g[1]) * w1 + pos(g[2]) * w2;
    let cv = c[g[0]] * w0 + c[g[1]] * w1 + c[g[2]] * w2;
    Ok(Some(FaceHit { key: g, point, c: cv, flux: sum }))
}

fn affine_gradient(x: [Vec3; 4], f: [f64; 4]) -> Vec3 {
    let (e1, e2, e3) = (x[1] - x[0], x[2] - x[0], x[3] - x[0]);
    let det = e1.dot(e2.cross(e3));
    let (d1, d2, d3) = (f[1] - f[0], f[2] - f[0], f[3] - f[0]);
    (e2.cross(e3) * d1 + e3.cross(e1) * d2 + e1.cross(e2) * d3) / det
}

fn trace(field: &SampledField, rv: &RegularValue) -> std::result::Result<Vec<FramedCurve>, Trace> {
    let dom = *field.domain();
    let res = dom.resolution;
    let n = dom.vertex_count();
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut c = vec![0.0; n];
    for (idx, f) in field.values().iter().enumerate() {
        a[idx] = f.dot(rv.u);
        b[idx] = f.dot(rv.v);
        c[idx] = f.dot(rv.p);
    }
    let pos = |idx: usize| {
        let [i, j, k] = dom.unindex(idx);
        dom.vertex(i, j, k)
    };

    let layers: Vec<std::result::Result<Vec<Segment>, Trace>> = (0..res[2])
        .into_par_iter()
        .map(|k| {
            let mut segs = Vec::new();
            for j in 0..res[1] {
                for i in 0..res[0] {
                    let corner = |bits: usize| dom.index(i + (bits & 1), j + ((bits >> 1) & 1), k + ((bits >> 2) & 1));
                    let ids: [usize; 8] = std::array::from_fn(corner);
                    if ids.iter().all(|&g| c[g] <= 0.0) {
                        continue;
                    }
                    for tet in TETS {
                        let g: [usize; 4] = tet.map(|t| ids[t]);
                        if g.iter().all(|&v| c[v] <= 0.0) {
                            continue;
                        }
                        let mut hits = Vec::with_capacity(2);
                        for skip in 0..4 {
                            let mut f = [(0, 0); 3];
                            let mut m = 0;
                            for (li, &gi) in g.iter().enumerate() {
                                if li != skip {
                                    f[m] = (gi, li);
                                    m += 1;
                                }
                            }
                            if let Some(h) = face_hit(f, &a, &b, &c, &pos)? {
                                let [p0, p1, p2] = h.key.map(pos);
                                let normal = (p1 - p0).cross(p2 - p0);
                                let inward = (pos(g[skip]) - p0).dot(normal) > 0.0;
                                // Leaving the tetrahedron iff the flux points out of it.
                                let exits = (h.flux > 0.0) != inward;
                                hits.push((h, exits));
                            }
                        }
                        match hits.len() {
                            0 => continue,
                            2 if hits[0].1 != hits[1].1 => {}
                            _ => return Err(Trace::Degenerate),
                        }
                        if hits[0].0.c + hits[1].0.c <= 0.0 {
                            continue;
                        }
                        let (from, to) = if hits[1].1 { (hits[0].0, hits[1].0) } else { (hits[1].0, hits[0].0) };
                        let xs = g.map(pos);
                        let ga = affine_gradient(xs, g.map(|v| a[v]));
                        let gb = affine_gradient(xs, g.map(|v| b[v]));
                        let tn = ga.cross(gb).normalize();
                        let framing = gb.cross(tn).normalize();
                        segs.push(Segment { from, to, framing, cell: [i, j, k] });
                    }
                }
            }
            Ok(segs)
        })
        .collect();
    let mut segments = Vec::new();
    for l in layers {
        segments.extend(l?);
    }
    chain(&dom, segments)
}

fn on_boundary(dom: &BoxDomain, key: [usize; 3]) -> Vec<BoxFace> {
    let ijk = key.map(|g| dom.unindex(g));
    let mut faces = Vec::new();
    for axis in 0..3 {
        if ijk.iter().all(|v| v[axis] == 0) {
            faces.push(BoxFace { axis, upper: false });
        }
        if ijk.iter().all(|v| v[axis] == dom.resolution[axis]) {
            faces.push(BoxFace { axis, upper: true });
        }
    }
    faces
}

fn chain(dom: &BoxDomain, segs: Vec<Segment>) -> std::result::Result<Vec<FramedCurve>, Trace> {
    // Node = face crossing; each has at most one outgoing and one incoming segment.
    let mut out_of: HashMap<[usize; 3], usize> = HashMap::new();
    let mut into: HashMap<[usize; 3], usize> = HashMap::new();
    for (si, s) in segs.iter().enumerate() {
        if out_of.insert(s.from.key, si).is_some() || into.insert(s.to.key, si).is_some() {
            return Err(Trace::Fatal(Error::Chaining { cell: s.cell }));
        }
    }
    // Every interior node needs both neighbours.
    for s in &segs {
        if !into.contains_key(&s.from.key) && on_boundary(dom, s.from.key).is_empty() {
            return Err(Trace::Fatal(Error::Chaining { cell: s.cell }));
        }
        if !out_of.contains_key(&s.to.key) && on_boundary(dom, s.to.key).is_empty() {
            return Err(Trace::Fatal(Error::Chaining { cell: s.cell }));
        }
    }

    let mut used = vec![false; segs.len()];
    let mut curves = Vec::new();
    let merge_tol = 1e-3 * dom.min_spacing();

    // Arcs start at boundary nodes with no incoming segment.
    for start in 0..segs.len() {
        if used[start] || into.contains_key(&segs[start].from.key) {
            continue;
        }
        let mut run = vec![start];
        used[start] = true;
        let mut cur = start;
        while let Some(&next) = out_of.get(&segs[cur].to.key) {
            if used[next] {
                return Err(Trace::Fatal(Error::Chaining { cell: segs[next].cell }));
            }
            used[next] = true;
            run.push(next);
            cur = next;
        }
        let first = segs[run[0]].from;
        let last = segs[cur].to;
        let mut c = assemble(&segs, &run, false, merge_tol);
        c.endpoint_faces = Some([on_boundary(dom, first.key), on_boundary(dom, last.key)]);
        curves.push(c);
    }
    for start in 0..segs.len() {
        if used[start] {
            continue;
        }
        let mut run = vec![start];
        used[start] = true;
        let mut cur = start;
        loop {
            let next = *out_of
                .get(&segs[cur].to.key)
                .ok_or(Trace::Fatal(Error::Chaining { cell: segs[cur].cell }))?;
            if next == start {
                break;
            }
            if used[next] {
                return Err(Trace::Fatal(Error::Chaining { cell: segs[next].cell }));
            }
            used[next] = true;
            run.push(next);
            cur = next;
        }
        curves.push(assemble(&segs, &run, true, merge_tol));
    }
    Ok(curves)
}

/// Turns a chain of segments into a polyline; framing at a face crossing is
/// the average of the two adjacent per-tetrahedron framings.
fn assemble(segs: &[Segment], run: &[usize], closed: bool, merge_tol: f64) -> FramedCurve {
    let m = run.len();
    let mut pts = Vec::with_capacity(m + 1);
    let mut frs = Vec::with_capacity(m + 1);
    for (r, &si) in run.iter().enumerate() {
        let prev = if r > 0 {
            Some(run[r - 1])
        } else if closed {
            Some(run[m - 1])
        } else {
            None
        };
        let w = match prev {
            Some(p) => segs[p].framing + segs[si].framing,
            None => segs[si].framing,
        };
        pts.push(segs[si].from.point);
        frs.push(w);
    }
    if !closed {
        let last = run[m - 1];
        pts.push(segs[last].to.point);
        frs.push(segs[last].framing);
    }
    // Merge near-coincident vertices (crossings near lattice edges).
    let mut vertices: Vec<Vec3> = Vec::with_capacity(pts.len());
    let mut framing: Vec<Vec3> = Vec::with_capacity(pts.len());
    for (p, w) in pts.into_iter().zip(frs) {
        if let Some(last) = vertices.last() {
            if last.distance(p) < merge_tol {
                let lw = framing.last_mut().unwrap();
                *lw += w;
                continue;
            }
        }
        vertices.push(p);
        framing.push(w);
    }
    if closed && vertices.len() > 1 && vertices[0].distance(*vertices.last().unwrap()) < merge_tol {
        let w = framing.pop().unwrap();
        vertices.pop();
        framing[0] += w;
    }
    let mut c = FramedCurve { vertices, closed, framing, endpoint_faces: None };
    orthonormalize_framing(&mut c);
    c
}

/// Projects each framing vector orthogonal to the tangent and normalizes.
pub fn orthonormalize_framing(c: &mut FramedCurve) {
    for i in 0..c.vertices.len() {
        let t = c.tangent(i);
        let w = c.framing[i].reject(t);
        c.framing[i] = w.try_normalize().unwrap_or_else(|| any_normal(t));
    }
}

fn any_normal(t: Vec3) -> Vec3 {
    let seed = if t.x.abs() < 0.9 { Vec3::X } else { Vec3::Y };
    seed.reject(t).normalize()
}

fn gradient_fd(field: &SampledField, x: Vec3, dir: Vec3) -> Vec3 {
    let dom = field.domain();
    let h = dom.spacing() * 0.5;
    let mut g = Vec3::ZERO;
    for axis in 0..3 {
        let step = h.component(axis);
        let lo_ok = x.component(axis) - step >= dom.min.component(axis);
        let hi_ok = x.component(axis) + step <= dom.max.component(axis);
        let e = Vec3::ZERO.with_component(axis, step);
        let (x0, x1) = match (lo_ok, hi_ok) {
            (true, true) => (x - e, x + e),
            (false, _) => (x, x + e),
            (true, false) => (x - e, x),
        };
        let (f0, f1) = (field.interpolate(x0), field.interpolate(x1));
        let dist = x1.component(axis) - x0.component(axis);
        g = g.with_component(axis, (f1 - f0).dot(dir) / dist);
    }
    g
}

/// Replaces the framing of every component by the pullback of `u` under
/// finite-difference derivatives of the interpolated field.
pub fn frame_by_jacobian(set: &PontryaginSet, field: &SampledField) -> Result<PontryaginSet> {
    let rv = set.regular_value;
    let mut out = set.clone();
    for c in &mut out.components {
        let mut framing = Vec::with_capacity(c.vertices.len());
        for i in 0..c.vertices.len() {
            let x = c.vertices[i];
            let ga = gradient_fd(field, x, rv.u);
            let gb = gradient_fd(field, x, rv.v);
            let normal = ga.cross(gb);
            if normal.norm() <= 1e-12 * (ga.norm2() + gb.norm2()) || normal.norm() == 0.0 {
                return Err(Error::SingularJacobian { location: x });
            }
            let t = c.tangent(i);
            let w = gb.cross(normal.normalize()).reject(t);
            framing.push(w.try_normalize().ok_or(Error::SingularJacobian { location: x })?);
        }
        c.framing = framing;
    }
    Ok(out)
}

/// Extracts the preimages of `rv` and of its pushoff companion, pairs them,
/// and frames each component by the direction to its partner. Returns the
/// framed set and the partner curves in component order.
pub fn frame_by_pushoff(field: &SampledField, rv: &RegularValue) -> Result<(PontryaginSet, Vec<FramedCurve>)> {
    frame_by_pushoff_with(field, rv, &ExtractOptions::default())
}

pub fn frame_by_pushoff_with(
    field: &SampledField,
    rv: &RegularValue,
    opts: &ExtractOptions,
) -> Result<(PontryaginSet, Vec<FramedCurve>)> {
    let base = extract_with(field, rv, opts)?;
    let shifted = extract_with(field, &base.regular_value.pushoff_value(), opts)?;
    let n = base.components.len();
    let mut partner: Vec<Option<usize>> = vec![None; n];
    for (qi, q) in shifted.components.iter().enumerate() {
        let mut dists: Vec<(f64, usize)> = base
            .components
            .iter()
            .enumerate()
            .map(|(pi, p)| {
                let d = q.vertices.iter().map(|v| p.distance_to(*v)).sum::<f64>() / q.vertices.len().max(1) as f64;
                (d, pi)
            })
            .collect();
        dists.sort_by(|x, y| x.0.total_cmp(&y.0));
        let Some(&(best, pi)) = dists.first() else {
            return Err(Error::UnpairedComponent { component: qi });
        };
        if let Some(&(second, _)) = dists.get(1) {
            if second <= best * 1.1 {
                return Err(Error::AmbiguousPairing { component: qi });
            }
        }
        if partner[pi].replace(qi).is_some() {
            return Err(Error::AmbiguousPairing { component: pi });
        }
    }
    let mut framed = base.clone();
    let mut copies = Vec::with_capacity(n);
    for (pi, c) in framed.components.iter_mut().enumerate() {
        let qi = partner[pi].ok_or(Error::UnpairedComponent { component: pi })?;
        let q = &shifted.components[qi];
        if q.closed != c.closed {
            return Err(Error::UnpairedComponent { component: pi });
        }
        for i in 0..c.vertices.len() {
            let x = c.vertices[i];
            let nearest = q
                .segments()
                .map(|(a, b)| closest_on_segment(x, a, b).1)
                .min_by(|u, v| x.distance(*u).total_cmp(&x.distance(*v)))
                .unwrap_or(q.vertices[0]);
            c.framing[i] = nearest - x;
        }
        orthonormalize_framing(c);
        copies.push(q.clone());
    }
    Ok((framed, copies))
}

/// Field whose Pontryagin set at `rv.p` is the given framed link.
///
/// Outside the tubes the field is the base point −p. Inside, with normal
/// coordinates ξ ∈ D² scaled to the unit disk, it is the inverse
/// stereographic image of ξ/λ(|ξ|²) with λ(t) = (1 − t)² for t < 1.
pub fn realize(link: &[FramedCurve], domain: &BoxDomain, tube_radius: f64, rv: &RegularValue) -> Result<SampledField> {
    domain.validate()?;
    let r = tube_radius;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParams("tube radius must be positive".into()));
    }
    check_tubes(link, r)?;
    let boxes: Vec<(Vec3, Vec3)> = link.iter().map(|c| c.bounding_box()).collect();
    let dims = domain.dims();
    let base = -rv.p;
    let layers: Vec<Vec<Vec3>> = (0..dims[2])
        .into_par_iter()
        .map(|k| {
            let mut out = Vec::with_capacity(dims[0] * dims[1]);
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let x = domain.vertex(i, j, k);
                    out.push(collapse_value(link, &boxes, x, r, rv).unwrap_or(base));
                }
            }
            out
        })
        .collect();
    SampledField::from_values(*domain, layers.concat())
}

fn collapse_value(link: &[FramedCurve], boxes: &[(Vec3, Vec3)], x: Vec3, r: f64, rv: &RegularValue) -> Option<Vec3> {
    let mut best: Option<(f64, usize, usize, f64, Vec3)> = None;
    for (ci, c) in link.iter().enumerate() {
        let (lo, hi) = boxes[ci];
        if x.x < lo.x - r || x.y < lo.y - r || x.z < lo.z - r || x.x > hi.x + r || x.y > hi.y + r || x.z > hi.z + r {
            continue;
        }
        for si in 0..c.segment_count() {
            let (a, b) = c.segment(si);
            let (t, p) = closest_on_segment(x, a, b);
            let d = x.distance(p);
            if d < r && best.map_or(true, |bb| d < bb.0) {
                best = Some((d, ci, si, t, p));
            }
        }
    }
    let (_, ci, si, t, p) = best?;
    let c = &link[ci];
    let n = c.vertices.len();
    let (a, b) = c.segment(si);
    let tangent = (b - a).normalize();
    let w = c.framing[si].lerp(c.framing[(si + 1) % n], t).reject(tangent);
    let n1 = w.try_normalize()?;
    let n2 = tangent.cross(n1);
    let off = x - p;
    let (s1, s2) = (off.dot(n1) / r, off.dot(n2) / r);
    let rho2 = s1 * s1 + s2 * s2;
    if rho2 >= 1.0 {
        return None;
    }
    let lam = (1.0 - rho2) * (1.0 - rho2);
    Some(inverse_stereographic(s1 / lam, s2 / lam, rv.p, rv.u, rv.v))
}

fn arclengths(c: &FramedCurve) -> Vec<f64> {
    let mut s = Vec::with_capacity(c.segment_count() + 1);
    let mut acc = 0.0;
    s.push(0.0);
    for (a, b) in c.segments() {
        acc += a.distance(b);
        s.push(acc);
    }
    s
}

/// Rejects links whose radius-`r` tubes overlap or self-intersect.
pub fn check_tubes(link: &[FramedCurve], r: f64) -> Result<()> {
    for (i, c) in link.iter().enumerate() {
        if c.framing.len() != c.vertices.len() {
            return Err(Error::InvalidParams(format!("component {i}: framing length mismatch")));
        }
        for j in i + 1..link.len() {
            let d = c.min_distance_to(&link[j]);
            if d <= 2.0 * r {
                return Err(Error::TubeOverlap(format!("components {i} and {j} are {d:.3e} apart")));
            }
        }
        let s = arclengths(c);
        let total = *s.last().unwrap_or(&0.0);
        let m = c.segment_count();
        for a in 0..m {
            for b in a + 1..m {
                let mut gap = s[b] - s[a + 1];
                if c.closed {
                    gap = gap.min(total - (s[b + 1] - s[a]));
                }
                if gap < std::f64::consts::PI * r {
                    continue;
                }
                let (p0, p1) = c.segment(a);
                let (q0, q1) = c.segment(b);
                let d = segment_distance(p0, p1, q0, q1);
                if d <= 2.0 * r {
                    return Err(Error::TubeOverlap(format!("component {i} comes within {d:.3e} of itself")));
                }
            }
        }
        let n = c.vertices.len();
        let inner = if c.closed { 0..n } else { 1..n.saturating_sub(1) };
        for v in inner {
            let prev = c.vertices[(v + n - 1) % n];
            let next = c.vertices[(v + 1) % n];
            let (d1, d2) = (c.vertices[v] - prev, next - c.vertices[v]);
            let turn = d1.angle_to(d2);
            if turn > 1e-12 && d1.norm().min(d2.norm()) / turn <= r {
                return Err(Error::TubeOverlap(format!("component {i} bends too sharply at vertex {v}")));
            }
        }
    }
    Ok(())
}

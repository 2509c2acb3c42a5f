//! Plane fields represented by their Gauss maps.
//!
//! Under the standard trivialization of the tangent bundle of a box in ℝ³,
//! a co-oriented 2-plane field is the same thing as a unit vector field: the
//! positively co-orienting normal. Analytic fields are closures; sampled
//! fields store unit vectors at the vertices of a regular lattice and are
//! interpolated multilinearly (then renormalized) inside cells.

use std::fmt;
use std::io::{BufRead, Read, Write};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geom::{UnitVec3, Vec3};

/// Gauss map of ker(cos(2πx)dy − sin(2πx)dz).
pub fn standard_gauss(x: Vec3) -> UnitVec3 {
    let (s, c) = (2.0 * std::f64::consts::PI * x.x).sin_cos();
    UnitVec3::new_unchecked(Vec3::new(0.0, c, -s))
}

/// The 1-form cos(2πx)dy − sin(2πx)dz written as a covector field.
pub fn standard_one_form(x: Vec3) -> Vec3 {
    let (s, c) = (2.0 * std::f64::consts::PI * x.x).sin_cos();
    Vec3::new(0.0, c, -s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub min: Vec3,
    pub max: Vec3,
    /// Cells per axis.
    pub resolution: [usize; 3],
}

impl BoxDomain {
    pub fn new(min: Vec3, max: Vec3, resolution: [usize; 3]) -> Result<Self> {
        let d = BoxDomain { min, max, resolution };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        for axis in 0..3 {
            let (lo, hi) = (self.min.component(axis), self.max.component(axis));
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::InvalidDomain(format!("axis {axis}: max must exceed min")));
            }
            if self.resolution[axis] < 2 {
                return Err(Error::InvalidDomain(format!("axis {axis}: resolution must be at least 2")));
            }
        }
        Ok(())
    }

    /// V = [−3/4,3/4]×[−1,1]×[0,1].
    pub fn unit_slab(resolution: [usize; 3]) -> Self {
        BoxDomain {
            min: Vec3::new(-0.75, -1.0, 0.0),
            max: Vec3::new(0.75, 1.0, 1.0),
            resolution,
        }
    }

    /// Vertices per axis.
    pub fn dims(&self) -> [usize; 3] {
        [self.resolution[0] + 1, self.resolution[1] + 1, self.resolution[2] + 1]
    }

    pub fn vertex_count(&self) -> usize {
        let d = self.dims();
        d[0] * d[1] * d[2]
    }

    pub fn spacing(&self) -> Vec3 {
        let e = self.max - self.min;
        Vec3::new(
            e.x / self.resolution[0] as f64,
            e.y / self.resolution[1] as f64,
            e.z / self.resolution[2] as f64,
        )
    }

    pub fn cell_diameter(&self) -> f64 {
        self.spacing().norm()
    }

    pub fn min_spacing(&self) -> f64 {
        let h = self.spacing();
        h.x.min(h.y).min(h.z)
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let d = self.dims();
        i + d[0] * (j + d[1] * k)
    }

    pub fn unindex(&self, idx: usize) -> [usize; 3] {
        let d = self.dims();
        [idx % d[0], (idx / d[0]) % d[1], idx / (d[0] * d[1])]
    }

    pub fn vertex(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let h = self.spacing();
        // Exact endpoints so that shared faces of adjacent boxes coincide.
        let coord = |axis: usize, n: usize, step: f64| {
            if n == self.resolution[axis] {
                self.max.component(axis)
            } else {
                self.min.component(axis) + n as f64 * step
            }
        };
        Vec3::new(coord(0, i, h.x), coord(1, j, h.y), coord(2, k, h.z))
    }

    pub fn contains(&self, x: Vec3, tol: f64) -> bool {
        (0..3).all(|a| {
            x.component(a) >= self.min.component(a) - tol && x.component(a) <= self.max.component(a) + tol
        })
    }

    /// Which boundary faces `x` lies on (within `tol`).
    pub fn faces_of(&self, x: Vec3, tol: f64) -> Vec<BoxFace> {
        let mut out = Vec::new();
        for axis in 0..3 {
            if (x.component(axis) - self.min.component(axis)).abs() <= tol {
                out.push(BoxFace { axis, upper: false });
            }
            if (x.component(axis) - self.max.component(axis)).abs() <= tol {
                out.push(BoxFace { axis, upper: true });
            }
        }
        out
    }

    /// Lattice index range of an aligned sub-box, if its corners sit on lattice points.
    pub fn aligned_range(&self, sub: &BoxDomain) -> Option<[(usize, usize); 3]> {
        let h = self.spacing();
        let mut out = [(0, 0); 3];
        for axis in 0..3 {
            let step = h.component(axis);
            let lo = (sub.min.component(axis) - self.min.component(axis)) / step;
            let hi = (sub.max.component(axis) - self.min.component(axis)) / step;
            let (lo_r, hi_r) = (lo.round(), hi.round());
            if (lo - lo_r).abs() > 1e-6 || (hi - hi_r).abs() > 1e-6 {
                return None;
            }
            if lo_r < 0.0 || hi_r > self.resolution[axis] as f64 || hi_r - lo_r < 2.0 {
                return None;
            }
            out[axis] = (lo_r as usize, hi_r as usize);
        }
        Some(out)
    }

    /// Sub-box spanned by lattice index ranges (inclusive vertex indices).
    pub fn sub_box(&self, range: [(usize, usize); 3]) -> BoxDomain {
        let min = self.vertex(range[0].0, range[1].0, range[2].0);
        let max = self.vertex(range[0].1, range[1].1, range[2].1);
        BoxDomain {
            min,
            max,
            resolution: [range[0].1 - range[0].0, range[1].1 - range[1].0, range[2].1 - range[2].0],
        }
    }

    pub fn with_resolution(&self, resolution: [usize; 3]) -> BoxDomain {
        BoxDomain { resolution, ..*self }
    }
}

/// One of the six faces of a box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoxFace {
    pub axis: usize,
    pub upper: bool,
}

impl BoxFace {
    pub const TOP: BoxFace = BoxFace { axis: 2, upper: true };
    pub const BOTTOM: BoxFace = BoxFace { axis: 2, upper: false };
}

impl fmt::Display for BoxFace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let axis = ["x", "y", "z"][self.axis.min(2)];
        write!(f, "{}{}", if self.upper { "+" } else { "-" }, axis)
    }
}

type VecFn = Arc<dyn Fn(Vec3) -> Vec3 + Send + Sync>;

/// A closed-form unit vector field, optionally with the 1-form it is the
/// normalized dual of.
#[derive(Clone)]
pub struct AnalyticField {
    name: String,
    eval: VecFn,
    one_form: Option<VecFn>,
}

impl fmt::Debug for AnalyticField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticField")
            .field("name", &self.name)
            .field("one_form", &self.one_form.is_some())
            .finish()
    }
}

impl AnalyticField {
    pub fn new(name: impl Into<String>, eval: impl Fn(Vec3) -> Vec3 + Send + Sync + 'static) -> Self {
        AnalyticField { name: name.into(), eval: Arc::new(eval), one_form: None }
    }

    /// Field defined as the normalized covector of a nowhere-vanishing 1-form.
    pub fn from_one_form(name: impl Into<String>, form: impl Fn(Vec3) -> Vec3 + Send + Sync + 'static) -> Self {
        let form: VecFn = Arc::new(form);
        let f = form.clone();
        AnalyticField { name: name.into(), eval: Arc::new(move |x| f(x).normalize()), one_form: Some(form) }
    }

    pub fn standard() -> Self {
        Self::from_one_form("standard", standard_one_form)
    }

    pub fn constant(v: UnitVec3) -> Self {
        let v = v.get();
        AnalyticField::new("constant", move |_| v)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Raw evaluation; callers normalize.
    pub fn eval(&self, x: Vec3) -> Vec3 {
        (self.eval)(x)
    }

    pub fn one_form(&self) -> Option<&VecFn> {
        self.one_form.as_ref()
    }
}

/// Unit vectors at lattice vertices, x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    domain: BoxDomain,
    values: Vec<Vec3>,
}

impl SampledField {
    pub fn from_values(domain: BoxDomain, values: Vec<Vec3>) -> Result<Self> {
        domain.validate()?;
        if values.len() != domain.vertex_count() {
            return Err(Error::InvalidDomain(format!(
                "expected {} values, got {}",
                domain.vertex_count(),
                values.len()
            )));
        }
        let mut values = values;
        for (idx, v) in values.iter_mut().enumerate() {
            let [i, j, k] = domain.unindex(idx);
            *v = v.try_normalize().ok_or(Error::NonFiniteValue { location: domain.vertex(i, j, k) })?;
        }
        Ok(SampledField { domain, values })
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn values(&self) -> &[Vec3] {
        &self.values
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.values[self.domain.index(i, j, k)]
    }

    /// Multilinear interpolation followed by renormalization. Points outside
    /// the box are clamped to it.
    pub fn interpolate(&self, x: Vec3) -> Vec3 {
        let d = &self.domain;
        let h = d.spacing();
        let mut idx = [0usize; 3];
        let mut t = [0.0; 3];
        for axis in 0..3 {
            let s = ((x.component(axis) - d.min.component(axis)) / h.component(axis))
                .clamp(0.0, d.resolution[axis] as f64);
            let i = (s.floor() as usize).min(d.resolution[axis] - 1);
            idx[axis] = i;
            t[axis] = s - i as f64;
        }
        let mut acc = Vec3::ZERO;
        for corner in 0..8 {
            let (ox, oy, oz) = (corner & 1, (corner >> 1) & 1, (corner >> 2) & 1);
            let w = (if ox == 1 { t[0] } else { 1.0 - t[0] })
                * (if oy == 1 { t[1] } else { 1.0 - t[1] })
                * (if oz == 1 { t[2] } else { 1.0 - t[2] });
            if w != 0.0 {
                acc += self.at(idx[0] + ox, idx[1] + oy, idx[2] + oz) * w;
            }
        }
        acc.normalize()
    }

    /// Restriction to an aligned sub-box.
    pub fn restrict(&self, sub: &BoxDomain) -> Result<SampledField> {
        let range = self
            .domain
            .aligned_range(sub)
            .ok_or_else(|| Error::InvalidDomain("sub-box is not aligned with the lattice".into()))?;
        Ok(self.restrict_range(range))
    }

    pub fn restrict_range(&self, range: [(usize, usize); 3]) -> SampledField {
        let domain = self.domain.sub_box(range);
        let mut values = Vec::with_capacity(domain.vertex_count());
        for k in range[2].0..=range[2].1 {
            for j in range[1].0..=range[1].1 {
                for i in range[0].0..=range[0].1 {
                    values.push(self.at(i, j, k));
                }
            }
        }
        SampledField { domain, values }
    }

    /// The horizontal slice at vertex layer `k`.
    pub fn slice_z(&self, k: usize) -> Slice2D {
        let d = self.domain.dims();
        let start = self.domain.index(0, 0, k);
        Slice2D {
            min: (self.domain.min.x, self.domain.min.y),
            max: (self.domain.max.x, self.domain.max.y),
            resolution: [self.domain.resolution[0], self.domain.resolution[1]],
            values: self.values[start..start + d[0] * d[1]].to_vec(),
        }
    }

    pub fn top_trace(&self) -> Slice2D {
        self.slice_z(self.domain.resolution[2])
    }

    pub fn bottom_trace(&self) -> Slice2D {
        self.slice_z(0)
    }

    /// Stacks `upper` on top of `self`; the shared face must agree within `tol`.
    pub fn stack(&self, upper: &SampledField, tol: f64) -> Result<SampledField> {
        let (a, b) = (&self.domain, &upper.domain);
        if a.resolution[0] != b.resolution[0]
            || a.resolution[1] != b.resolution[1]
            || (a.min.x - b.min.x).abs() > 1e-12
            || (a.max.x - b.max.x).abs() > 1e-12
            || (a.min.y - b.min.y).abs() > 1e-12
            || (a.max.y - b.max.y).abs() > 1e-12
            || (a.max.z - b.min.z).abs() > 1e-9
        {
            return Err(Error::LatticeMismatch);
        }
        let dev = self.top_trace().max_deviation(&upper.bottom_trace());
        if dev > tol {
            return Err(Error::InvalidDomain(format!("stacked faces differ by {dev:.3e}")));
        }
        let layer = (a.resolution[0] + 1) * (a.resolution[1] + 1);
        let mut values = self.values.clone();
        values.extend_from_slice(&upper.values[layer..]);
        let domain = BoxDomain {
            min: a.min,
            max: Vec3::new(a.max.x, a.max.y, b.max.z),
            resolution: [a.resolution[0], a.resolution[1], a.resolution[2] + b.resolution[2]],
        };
        Ok(SampledField { domain, values })
    }

    /// Reflection z ↦ (zmin + zmax) − z of the domain; values are kept as they are.
    pub fn mirrored_z(&self) -> SampledField {
        let d = self.domain;
        let mut values = Vec::with_capacity(self.values.len());
        for k in (0..=d.resolution[2]).rev() {
            let start = d.index(0, 0, k);
            let len = d.dims()[0] * d.dims()[1];
            values.extend_from_slice(&self.values[start..start + len]);
        }
        SampledField { domain: d, values }
    }

    /// Same values, domain shifted by `offset`.
    pub fn translated(&self, offset: Vec3) -> SampledField {
        let mut d = self.domain;
        d.min += offset;
        d.max += offset;
        SampledField { domain: d, values: self.values.clone() }
    }

    pub fn max_deviation(&self, other: &SampledField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (*a - *b).norm()).fold(0.0, f64::max)
    }

    pub fn max_unit_error(&self) -> f64 {
        self.values.iter().map(|v| (v.norm() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// SHA-256 over lattice description and payload.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for r in self.domain.resolution {
            h.update((r as u64).to_le_bytes());
        }
        for v in [self.domain.min, self.domain.max] {
            for c in v.to_array() {
                h.update(c.to_le_bytes());
            }
        }
        for v in &self.values {
            for c in v.to_array() {
                h.update(c.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    pub const FORMAT_VERSION: u32 = 1;
    const MAGIC: &'static str = "pontryagin-field";

    pub fn header(&self) -> String {
        let d = &self.domain;
        format!(
            "{} {}\nmin {} {} {}\nmax {} {} {}\nresolution {} {} {}\ndata\n",
            Self::MAGIC,
            Self::FORMAT_VERSION,
            d.min.x,
            d.min.y,
            d.min.z,
            d.max.x,
            d.max.y,
            d.max.z,
            d.resolution[0],
            d.resolution[1],
            d.resolution[2]
        )
    }

    /// Text header followed by little-endian f64 triples, x-fastest.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(self.header().as_bytes())?;
        let mut buf = Vec::with_capacity(self.values.len() * 24);
        for v in &self.values {
            for c in v.to_array() {
                buf.extend_from_slice(&c.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(r: impl Read) -> Result<SampledField> {
        let mut r = std::io::BufReader::new(r);
        let mut line = String::new();
        let mut next_line = |r: &mut std::io::BufReader<_>| -> Result<String> {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(Error::Parse("unexpected end of header".into()));
            }
            Ok(line.trim().to_string())
        };
        let magic = next_line(&mut r)?;
        let mut parts = magic.split_whitespace();
        if parts.next() != Some(Self::MAGIC) {
            return Err(Error::Parse("not a field file".into()));
        }
        let version: u32 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Parse("missing version".into()))?;
        if version != Self::FORMAT_VERSION {
            return Err(Error::Parse(format!("unsupported field format version {version}")));
        }
        let (mut min, mut max, mut res) = (None, None, None);
        loop {
            let l = next_line(&mut r)?;
            if l == "data" {
                break;
            }
            let mut it = l.split_whitespace();
            let key = it.next().unwrap_or_default().to_string();
            let nums: Vec<&str> = it.collect();
            let floats = || -> Result<Vec3> {
                let v: std::result::Result<Vec<f64>, _> = nums.iter().map(|s| s.parse::<f64>()).collect();
                let v = v.map_err(|e| Error::Parse(e.to_string()))?;
                if v.len() != 3 {
                    return Err(Error::Parse(format!("{key} needs 3 numbers")));
                }
                Ok(Vec3::new(v[0], v[1], v[2]))
            };
            match key.as_str() {
                "min" => min = Some(floats()?),
                "max" => max = Some(floats()?),
                "resolution" => {
                    let v: std::result::Result<Vec<usize>, _> = nums.iter().map(|s| s.parse::<usize>()).collect();
                    let v = v.map_err(|e| Error::Parse(e.to_string()))?;
                    if v.len() != 3 {
                        return Err(Error::Parse("resolution needs 3 integers".into()));
                    }
                    res = Some([v[0], v[1], v[2]]);
                }
                other => return Err(Error::Parse(format!("unknown header key {other:?}"))),
            }
        }
        let domain = BoxDomain::new(
            min.ok_or_else(|| Error::Parse("missing min".into()))?,
            max.ok_or_else(|| Error::Parse("missing max".into()))?,
            res.ok_or_else(|| Error::Parse("missing resolution".into()))?,
        )?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != domain.vertex_count() * 24 {
            return Err(Error::Parse(format!(
                "payload has {} bytes, expected {}",
                bytes.len(),
                domain.vertex_count() * 24
            )));
        }
        let values = bytes
            .chunks_exact(24)
            .map(|c| {
                let f = |o: usize| f64::from_le_bytes(c[o..o + 8].try_into().unwrap());
                Vec3::new(f(0), f(8), f(16))
            })
            .collect();
        SampledField::from_values(domain, values)
    }
}

/// Vertex-wise evaluation of an analytic field over a lattice.
pub fn sample(field: &AnalyticField, domain: &BoxDomain) -> Result<SampledField> {
    domain.validate()?;
    let dims = domain.dims();
    let layer = dims[0] * dims[1];
    let layers: Vec<Result<Vec<Vec3>>> = (0..dims[2])
        .into_par_iter()
        .map(|k| {
            let mut out = Vec::with_capacity(layer);
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let x = domain.vertex(i, j, k);
                    let v = field.eval(x);
                    let v = v.try_normalize().ok_or(Error::NonFiniteValue { location: x })?;
                    out.push(v);
                }
            }
            Ok(out)
        })
        .collect();
    let mut values = Vec::with_capacity(domain.vertex_count());
    for l in layers {
        values.extend(l?);
    }
    Ok(SampledField { domain: *domain, values })
}

/// A horizontal slice of a sampled field.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice2D {
    pub min: (f64, f64),
    pub max: (f64, f64),
    pub resolution: [usize; 2],
    pub values: Vec<Vec3>,
}

impl Slice2D {
    pub fn at(&self, i: usize, j: usize) -> Vec3 {
        self.values[i + (self.resolution[0] + 1) * j]
    }

    pub fn max_deviation(&self, other: &Slice2D) -> f64 {
        if self.values.len() != other.values.len() {
            return f64::INFINITY;
        }
        self.values.iter().zip(&other.values).map(|(a, b)| (*a - *b).norm()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactReport {
    /// Minimum of λ∧dλ / (dx∧dy∧dz) over the sample.
    pub min: f64,
    pub argmin: Vec3,
    pub samples: usize,
}

/// Samples λ∧dλ = λ·curl λ on an `n`-per-axis lattice using central differences.
pub fn check_contact_condition(field: &AnalyticField, domain: &BoxDomain, n_samples: usize) -> Result<ContactReport> {
    let form = field.one_form().ok_or(Error::NoOneForm)?;
    let n = n_samples.max(2);
    let probe = domain.with_resolution([n - 1, n - 1, n - 1]);
    let h = 1e-5;
    let mut best = ContactReport { min: f64::INFINITY, argmin: Vec3::ZERO, samples: 0 };
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let x = probe.vertex(i, j, k);
                let d = |axis: usize| {
                    let e = Vec3::ZERO.with_component(axis, h);
                    (form(x + e) - form(x - e)) / (2.0 * h)
                };
                let (dx, dy, dz) = (d(0), d(1), d(2));
                let curl = Vec3::new(dy.z - dz.y, dz.x - dx.z, dx.y - dy.x);
                let val = form(x).dot(curl);
                best.samples += 1;
                if val < best.min {
                    best.min = val;
                    best.argmin = x;
                }
            }
        }
    }
    Ok(best)
}

/// A regular value together with a positively oriented frame of its tangent plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularValue {
    pub p: Vec3,
    pub u: Vec3,
    pub v: Vec3,
    /// Pushoff parameter: the companion value sits at angle arccos(1 − delta) from `p`.
    pub delta: f64,
}

impl RegularValue {
    pub const DEFAULT_DELTA: f64 = 0.02;

    /// Canonical frame: `u` is the projection of +y (or +z when `p` is close to ±y).
    pub fn new(p: Vec3) -> Result<Self> {
        let p = p.try_normalize().ok_or_else(|| Error::InvalidParams("zero regular value".into()))?;
        let seed = if p.y.abs() < 0.9 { Vec3::Y } else { Vec3::Z };
        Self::with_frame(p, seed)
    }

    pub fn with_frame(p: Vec3, u_hint: Vec3) -> Result<Self> {
        let p = p.try_normalize().ok_or_else(|| Error::InvalidParams("zero regular value".into()))?;
        let u = u_hint
            .reject(p)
            .try_normalize()
            .ok_or_else(|| Error::InvalidParams("frame hint parallel to p".into()))?;
        let v = p.cross(u);
        Ok(RegularValue { p, u, v, delta: Self::DEFAULT_DELTA })
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    /// p′ = (1 − δ)p + √(2δ − δ²)u.
    pub fn pushoff(&self) -> Vec3 {
        let d = self.delta;
        (self.p * (1.0 - d) + self.u * (2.0 * d - d * d).sqrt()).normalize()
    }

    /// The companion value as a regular value with a parallel-transported frame.
    pub fn pushoff_value(&self) -> RegularValue {
        let p2 = self.pushoff();
        let axis = self.v;
        let angle = self.p.angle_to(p2);
        RegularValue {
            p: p2,
            u: self.u.rotate_about(axis, angle),
            v: self.v,
            delta: self.delta,
        }
    }

    /// Rigid rotation of the whole frame (used for deterministic jitter).
    pub fn rotated(&self, axis: Vec3, angle: f64) -> RegularValue {
        let axis = axis.normalize();
        RegularValue {
            p: self.p.rotate_about(axis, angle).normalize(),
            u: self.u.rotate_about(axis, angle).normalize(),
            v: self.v.rotate_about(axis, angle).normalize(),
            delta: self.delta,
        }
    }

    /// The frame (v, −u): same orientation, rotated by a quarter turn.
    pub fn quarter_turn(&self) -> RegularValue {
        RegularValue { u: self.v, v: -self.u, ..*self }
    }

    pub fn frame_error(&self) -> f64 {
        let e = [
            self.u.dot(self.v).abs(),
            self.u.dot(self.p).abs(),
            self.v.dot(self.p).abs(),
            (self.u.cross(self.v) - self.p).norm(),
        ];
        e.into_iter().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub certified: bool,
    /// Smallest singular value found among gated cells (∞ when none were gated).
    pub worst_singular: f64,
    pub worst_cell: Option<[usize; 3]>,
    pub cells_tested: usize,
}

/// cos θ_gate: cells with a vertex value this close to p are tested.
pub const DEFAULT_GATE_COS: f64 = 0.9;
pub const DEFAULT_REGULARITY_TOL: f64 = 1e-3;

/// Finite-difference Jacobian test of (F·u, F·v) in every cell that comes
/// within the gate angle of `p`.
pub fn certify_regular_value(field: &SampledField, rv: &RegularValue, tol: f64) -> RegularityReport {
    certify_regular_value_gated(field, rv, tol, DEFAULT_GATE_COS)
}

pub fn certify_regular_value_gated(field: &SampledField, rv: &RegularValue, tol: f64, gate_cos: f64) -> RegularityReport {
    let d = *field.domain();
    let h = d.spacing();
    let res = d.resolution;
    let per_layer: Vec<(f64, Option<[usize; 3]>, usize)> = (0..res[2])
        .into_par_iter()
        .map(|k| {
            let mut worst = f64::INFINITY;
            let mut cell = None;
            let mut tested = 0;
            for j in 0..res[1] {
                for i in 0..res[0] {
                    let mut a = [0.0; 8];
                    let mut b = [0.0; 8];
                    let mut near = false;
                    for c in 0..8 {
                        let f = field.at(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                        a[c] = f.dot(rv.u);
                        b[c] = f.dot(rv.v);
                        near |= f.dot(rv.p) >= gate_cos;
                    }
                    if !near {
                        continue;
                    }
                    tested += 1;
                    let grad = |s: &[f64; 8]| {
                        let gx = ((s[1] - s[0]) + (s[3] - s[2]) + (s[5] - s[4]) + (s[7] - s[6])) / (4.0 * h.x);
                        let gy = ((s[2] - s[0]) + (s[3] - s[1]) + (s[6] - s[4]) + (s[7] - s[5])) / (4.0 * h.y);
                        let gz = ((s[4] - s[0]) + (s[5] - s[1]) + (s[6] - s[2]) + (s[7] - s[3])) / (4.0 * h.z);
                        Vec3::new(gx, gy, gz)
                    };
                    let sv = smallest_singular_2x3(grad(&a), grad(&b));
                    if sv < worst {
                        worst = sv;
                        cell = Some([i, j, k]);
                    }
                }
            }
            (worst, cell, tested)
        })
        .collect();
    let mut report = RegularityReport { certified: true, worst_singular: f64::INFINITY, worst_cell: None, cells_tested: 0 };
    for (w, c, t) in per_layer {
        report.cells_tested += t;
        if w < report.worst_singular {
            report.worst_singular = w;
            report.worst_cell = c;
        }
    }
    report.certified = report.worst_singular >= tol;
    report
}

/// Smallest singular value of the 2×3 matrix with rows `r1`, `r2`.
pub fn smallest_singular_2x3(r1: Vec3, r2: Vec3) -> f64 {
    let (aa, ab, bb) = (r1.dot(r1), r1.dot(r2), r2.dot(r2));
    let tr = aa + bb;
    let det = (aa * bb - ab * ab).max(0.0);
    let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
    let lmin = (tr - disc) / 2.0;
    // Use det / lmax when lmin suffers cancellation.
    let lmax = (tr + disc) / 2.0;
    let lmin = if lmax > 0.0 { lmin.max(det / lmax) } else { 0.0 };
    lmin.max(0.0).sqrt()
}

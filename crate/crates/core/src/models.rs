//! Explicit model fields: the standard slab, bypass and bypass-triangle
//! slabs, stacks of triangles, and the Hopf map.
//!
//! The bypass models are written in the stereographic chart centred at
//! p = (1,0,0) with frame (e_y, e_z), where the standard field is
//! Z = exp(−2πix). A model field is
//!
//! ```text
//! Z = exp(−2πix) · (χN + 1 − χ) / (χD + 1 − χ)
//! ```
//!
//! with N vanishing on an ellipse K_p through the endpoints of the attaching
//! arc (the boundary of the thickened bypass half-disk, closed up in the
//! slab above), D vanishing on a small circle K_q linking it, and χ a
//! cutoff equal to 1 on both spanning disks. Below the top face of the first
//! slab only the lower half of K_p is present, which is the bypass arc.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{sample, standard_gauss, AnalyticField, BoxDomain, RegularValue, SampledField, Slice2D};
use crate::geom::{smoothstep, Vec3};

/// Tolerance for traces to agree across a shared face.
pub const FACE_TOL: f64 = 1e-9;

pub const DEFAULT_RESOLUTION: [usize; 3] = [96, 128, 64];

/// V = [−3/4,3/4]×[−1,1]×[z0, z0+1].
pub fn slab_domain(z0: f64, resolution: [usize; 3]) -> BoxDomain {
    BoxDomain {
        min: Vec3::new(-0.75, -1.0, z0),
        max: Vec3::new(0.75, 1.0, z0 + 1.0),
        resolution,
    }
}

pub fn standard_slab(domain: &BoxDomain) -> Result<SampledField> {
    sample(&AnalyticField::standard(), domain)
}

/// The z-invariant extension of a horizontal trace over `[z0, z0 + height]`.
pub fn invariant_extension(trace: &Slice2D, z0: f64, height: f64, nz: usize) -> Result<SampledField> {
    let domain = BoxDomain::new(
        Vec3::new(trace.min.0, trace.min.1, z0),
        Vec3::new(trace.max.0, trace.max.1, z0 + height),
        [trace.resolution[0], trace.resolution[1], nz],
    )?;
    let mut values = Vec::with_capacity(domain.vertex_count());
    for _ in 0..=nz {
        values.extend_from_slice(&trace.values);
    }
    SampledField::from_values(domain, values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BypassModelParams {
    /// Endpoints of the attaching arc, on the top face of the first slab.
    pub alpha: [Vec3; 2],
    pub half_disk_radius: f64,
    /// Width of the invariant neighbourhood of the half-disk.
    pub thickening: f64,
    /// Relative width of the cutoff blend.
    pub blend_width: f64,
    /// Cells per axis of each unit slab.
    pub resolution: [usize; 3],
    /// Chirality of the linking circle; −1 gives framing −1 on the triangle's loop.
    pub chirality: i8,
}

impl Default for BypassModelParams {
    fn default() -> Self {
        BypassModelParams {
            alpha: [Vec3::new(-0.5, 0.0, 1.0), Vec3::new(0.5, 0.0, 1.0)],
            half_disk_radius: 0.25,
            thickening: 0.25,
            blend_width: 0.3,
            resolution: DEFAULT_RESOLUTION,
            chirality: -1,
        }
    }
}

impl BypassModelParams {
    pub fn with_resolution(mut self, resolution: [usize; 3]) -> Self {
        self.resolution = resolution;
        self
    }

    /// Number of standard dividing traces x ∈ ½ℤ met by the closed arc.
    pub fn dividing_crossings(&self) -> usize {
        let (x0, x1) = (self.alpha[0].x.min(self.alpha[1].x), self.alpha[0].x.max(self.alpha[1].x));
        let lo = (2.0 * x0 - 1e-9).ceil() as i64;
        let hi = (2.0 * x1 + 1e-9).floor() as i64;
        (hi - lo + 1).max(0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let [a, b] = self.alpha;
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidParams("non-finite attaching arc".into()));
        }
        if (a.z - 1.0).abs() > 1e-12 || (b.z - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParams("attaching arc must lie on the top face z = 1".into()));
        }
        if (a.y - b.y).abs() > 1e-12 || (a.x - b.x).abs() < 1e-9 {
            return Err(Error::InvalidParams("attaching arc must be a segment parallel to the x-axis".into()));
        }
        let n = self.dividing_crossings();
        if n != 3 {
            return Err(Error::InvalidParams(format!("attaching arc meets the dividing set in {n} points, expected 3")));
        }
        let g = self.geometry();
        if !(self.half_disk_radius > 0.0 && self.half_disk_radius < 0.45) {
            return Err(Error::InvalidParams("half-disk radius must lie in (0, 0.45)".into()));
        }
        if !(self.thickening > 0.0 && self.blend_width > 0.0) {
            return Err(Error::InvalidParams("thickening and blend width must be positive".into()));
        }
        let reach = g.cut[0] * (1.0 + self.blend_width);
        if g.center.x.abs() + reach >= 0.75 || g.center.y.abs() + g.cut[1] * (1.0 + self.blend_width) >= 1.0 {
            return Err(Error::InvalidParams("bypass neighbourhood does not fit inside the slab".into()));
        }
        let zc = g.cut_center_z;
        if zc - g.cut[2] * (1.0 + self.blend_width) <= 0.0 || zc + g.cut[2] * (1.0 + self.blend_width) >= 2.0 {
            return Err(Error::InvalidParams("bypass neighbourhood leaves the two-slab support".into()));
        }
        if self.chirality != 1 && self.chirality != -1 {
            return Err(Error::InvalidParams("chirality must be ±1".into()));
        }
        for r in self.resolution {
            if r < 2 {
                return Err(Error::InvalidParams("resolution must be at least 2".into()));
            }
        }
        Ok(())
    }

    fn geometry(&self) -> Geometry {
        let [a, b] = self.alpha;
        let center = (a + b) * 0.5;
        let hx = (b.x - a.x).abs() * 0.5;
        let d = self.half_disk_radius;
        let rq = d * 0.5;
        // Ellipsoidal cutoff covering the disk of K_p (z ∈ [1−d, 1+d]) and of K_q (up to 1+d+rq).
        let lo = 1.0 - d;
        let hi = 1.0 + d + rq;
        let cut_center_z = 0.5 * (lo + hi);
        let cz = 0.5 * (hi - lo) * 1.15;
        Geometry {
            center,
            hx,
            d,
            rq,
            cut: [hx * 1.1, (rq * 2.4).max(0.6 * d), cz],
            cut_center_z,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    center: Vec3,
    hx: f64,
    d: f64,
    rq: f64,
    cut: [f64; 3],
    cut_center_z: f64,
}

/// Analytic Gauss map of the bypass-triangle model on ℝ² × [0, 2]; standard
/// outside the cutoff region.
pub fn triangle_gauss(params: &BypassModelParams, x: Vec3) -> Vec3 {
    let g = params.geometry();
    let e = [
        (x.x - g.center.x) / g.cut[0],
        (x.y - g.center.y) / g.cut[1],
        (x.z - g.cut_center_z) / g.cut[2],
    ];
    let rho = (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt();
    let chi = 1.0 - smoothstep((rho - 1.0) / params.blend_width);
    if chi <= 0.0 {
        return standard_gauss(x).get();
    }
    let (dx, dy) = (x.x - g.center.x, x.y - g.center.y);
    let n = Complex64::new(
        0.5 * ((dx / g.hx).powi(2) + ((x.z - 1.0) / g.d).powi(2) - 1.0),
        dy / params.thickening,
    );
    let qz = x.z - 1.0 - g.d;
    let dq = Complex64::new(
        0.5 * ((dy * dy + qz * qz) / (g.rq * g.rq) - 1.0),
        params.chirality as f64 * dx / (0.5 * params.thickening),
    );
    // D only acts above the top face of the first slab, where K_q lives;
    // below it Re D > 0, so the face keeps the dividing set of N alone.
    let chi_q = chi * smoothstep((x.z - 1.0 - 0.1 * g.d) / (0.3 * g.d));
    let phase = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * x.x);
    let num = phase * (n * chi + Complex64::new(1.0 - chi, 0.0));
    let den = dq * chi_q + Complex64::new(1.0 - chi_q, 0.0);
    chart_to_sphere(num, den)
}

/// Inverse stereographic image of num/den in the chart at p = e_x with frame (e_y, e_z).
fn chart_to_sphere(num: Complex64, den: Complex64) -> Vec3 {
    let (a2, b2) = (num.norm_sqr(), den.norm_sqr());
    let cross = num * den.conj();
    Vec3::new(b2 - a2, 2.0 * cross.re, 2.0 * cross.im) / (a2 + b2)
}

fn model_field(params: &BypassModelParams, z_shift: f64) -> AnalyticField {
    let p = params.clone();
    AnalyticField::new("bypass-triangle", move |x| triangle_gauss(&p, x - Vec3::new(0.0, 0.0, z_shift)))
}

/// Field on V realizing a single bypass attachment along α.
pub fn bypass_slab(params: &BypassModelParams) -> Result<SampledField> {
    params.validate()?;
    sample(&model_field(params, 0.0), &slab_domain(0.0, params.resolution))
}

/// Slabs glued along horizontal faces.
#[derive(Debug, Clone, PartialEq)]
pub struct SlabStack {
    slabs: Vec<SampledField>,
}

impl SlabStack {
    pub fn new(slabs: Vec<SampledField>) -> Result<Self> {
        if slabs.is_empty() {
            return Err(Error::InvalidParams("empty slab stack".into()));
        }
        for w in slabs.windows(2) {
            let dev = w[0].top_trace().max_deviation(&w[1].bottom_trace());
            if dev > FACE_TOL {
                return Err(Error::InvalidDomain(format!("adjacent slabs differ by {dev:.3e} on the shared face")));
            }
        }
        Ok(SlabStack { slabs })
    }

    pub fn slabs(&self) -> &[SampledField] {
        &self.slabs
    }

    pub fn len(&self) -> usize {
        self.slabs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slabs.is_empty()
    }

    /// One field over the union of the slabs.
    pub fn merged(&self) -> Result<SampledField> {
        let mut acc = self.slabs[0].clone();
        for s in &self.slabs[1..] {
            acc = acc.stack(s, FACE_TOL)?;
        }
        Ok(acc)
    }

    pub fn domain(&self) -> BoxDomain {
        let first = self.slabs[0].domain();
        let last = self.slabs[self.slabs.len() - 1].domain();
        let nz = self.slabs.iter().map(|s| s.domain().resolution[2]).sum();
        BoxDomain {
            min: first.min,
            max: last.max,
            resolution: [first.resolution[0], first.resolution[1], nz],
        }
    }
}

fn triangle_slabs(params: &BypassModelParams, z0: f64) -> Result<Vec<SampledField>> {
    let f = model_field(params, z0);
    (0..3)
        .into_par_iter()
        .map(|i| sample(&f, &slab_domain(z0 + i as f64, params.resolution)))
        .collect()
}

/// T = V ∪ U ∪ W: the bypass slab, the slab carrying the remaining two
/// attachments of the triangle, and a standard slab.
pub fn triangle_slab(params: &BypassModelParams) -> Result<SlabStack> {
    params.validate()?;
    SlabStack::new(triangle_slabs(params, 0.0)?)
}

/// `n` triangle stacks on top of each other, occupying z ∈ [0, 3n].
pub fn stack_triangles(n: usize, params: &BypassModelParams) -> Result<SlabStack> {
    if n == 0 {
        return Err(Error::InvalidParams("need at least one triangle".into()));
    }
    params.validate()?;
    let mut slabs = Vec::with_capacity(3 * n);
    for k in 0..n {
        slabs.extend(triangle_slabs(params, 3.0 * k as f64)?);
    }
    SlabStack::new(slabs)
}

/// The standard field over the same slabs as `stack`.
pub fn standard_stack(stack: &SlabStack) -> Result<SlabStack> {
    SlabStack::new(stack.slabs().iter().map(|s| standard_slab(s.domain())).collect::<Result<_>>()?)
}

/// Hopf map of S³ pulled back to ℝ³ by stereographic projection.
pub fn hopf_gauss(x: Vec3) -> Vec3 {
    let r2 = x.norm2();
    let s = 1.0 / (1.0 + r2);
    let (x1, x2, x3, x4) = (2.0 * x.x * s, 2.0 * x.y * s, 2.0 * x.z * s, (r2 - 1.0) * s);
    let z1 = Complex64::new(x1, x2);
    let z2 = Complex64::new(x3, x4);
    let w = z1 * z2.conj();
    Vec3::new(2.0 * w.re, 2.0 * w.im, z1.norm_sqr() - z2.norm_sqr())
}

/// Image of the point at infinity under [`hopf_gauss`].
pub const HOPF_FAR_VALUE: Vec3 = Vec3::new(0.0, 0.0, -1.0);

#[derive(Debug, Clone)]
pub struct HopfModel {
    pub field: SampledField,
    /// Regular values must stay this far (radians) from the far value.
    pub exclusion: f64,
}

impl HopfModel {
    /// A regular value with the canonical frame, if it clears the exclusion cone.
    pub fn regular_value(&self, p: Vec3) -> Result<RegularValue> {
        let p = p.try_normalize().ok_or_else(|| Error::InvalidParams("zero regular value".into()))?;
        if p.angle_to(HOPF_FAR_VALUE) <= self.exclusion {
            return Err(Error::ExcludedValue { value: p });
        }
        RegularValue::new(p)
    }

    pub fn default_value(&self) -> RegularValue {
        self.regular_value(Vec3::new(0.3, -0.2, 1.0)).expect("default value clears the exclusion cone")
    }
}

/// Box [−3,3]³.
pub fn hopf_domain(n: usize) -> BoxDomain {
    BoxDomain {
        min: Vec3::new(-3.0, -3.0, -3.0),
        max: Vec3::new(3.0, 3.0, 3.0),
        resolution: [n, n, n],
    }
}

pub fn hopf_field(domain: &BoxDomain, exclusion_degrees: f64) -> Result<HopfModel> {
    let field = sample(&AnalyticField::new("hopf", hopf_gauss), domain)?;
    Ok(HopfModel { field, exclusion: exclusion_degrees.to_radians() })
}

pub const DEFAULT_HOPF_EXCLUSION_DEGREES: f64 = 90.0;

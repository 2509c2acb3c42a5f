//! Reproducible verification pipelines. Each returns a [`Report`] holding
//! its configuration, field digests and every check with expected and
//! observed values.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dividing::{all_diagrams, isotopy_equal, valid_arcs, AttachingArc, DividingSet, GradedDividingSet};
use crate::error::{Error, Result};
use crate::extraction::{extract, frame_by_jacobian, frame_by_pushoff, realize, FramedCurve, PontryaginSet};
use crate::fields::{certify_regular_value, BoxDomain, RegularValue, SampledField, DEFAULT_REGULARITY_TOL};
use crate::geom::Vec3;
use crate::invariants::{
    hopf_invariant, linking_gauss, obstruction_o3, self_linking, unknot_certificate, O3Method,
};
use crate::models::{
    bypass_slab, hopf_domain, hopf_field, stack_triangles, standard_stack, triangle_slab,
    BypassModelParams, DEFAULT_HOPF_EXCLUSION_DEGREES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pipeline {
    Thm1,
    Thm2,
    Hopf,
    Roundtrip,
    Dividing,
}

impl Pipeline {
    pub const ALL: [Pipeline; 5] = [Pipeline::Thm1, Pipeline::Thm2, Pipeline::Hopf, Pipeline::Roundtrip, Pipeline::Dividing];

    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Thm1 => "thm1",
            Pipeline::Thm2 => "thm2",
            Pipeline::Hopf => "hopf",
            Pipeline::Roundtrip => "roundtrip",
            Pipeline::Dividing => "dividing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Json,
    Obj,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub command: String,
    pub model: BypassModelParams,
    /// Second, coarser resolution for stability checks.
    pub coarse_resolution: [usize; 3],
    pub hopf_resolution: usize,
    pub hopf_exclusion_degrees: f64,
    pub seed: u64,
    /// Number of sampled regular values in independence checks.
    pub samples: usize,
    pub delta: f64,
    pub out: Option<String>,
    pub formats: Vec<ExportFormat>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            command: String::new(),
            model: BypassModelParams::default(),
            coarse_resolution: [48, 64, 32],
            hopf_resolution: 64,
            hopf_exclusion_degrees: DEFAULT_HOPF_EXCLUSION_DEGREES,
            seed: 0,
            samples: 10,
            delta: RegularValue::DEFAULT_DELTA,
            out: None,
            formats: vec![ExportFormat::Json],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub expected: Value,
    pub observed: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub pipeline: String,
    pub version: String,
    pub config: PipelineConfig,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub digests: BTreeMap<String, String>,
    pub elapsed_seconds: f64,
    /// Extracted sets for export, keyed by name.
    #[serde(skip)]
    pub sets: Vec<(String, PontryaginSet)>,
}

impl Report {
    fn new(pipeline: Pipeline, config: &PipelineConfig) -> Self {
        Report {
            pipeline: pipeline.name().into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
            passed: true,
            checks: Vec::new(),
            digests: BTreeMap::new(),
            elapsed_seconds: 0.0,
            sets: Vec::new(),
        }
    }

    fn check(&mut self, name: &str, passed: bool, expected: Value, observed: Value) -> bool {
        self.passed &= passed;
        self.checks.push(Check { name: name.into(), passed, expected, observed, tolerance: None });
        passed
    }

    fn check_tol(&mut self, name: &str, passed: bool, expected: Value, observed: Value, tol: f64) {
        self.check(name, passed, expected, observed);
        self.checks.last_mut().unwrap().tolerance = Some(tol);
    }

    fn check_eq<T: Serialize + PartialEq>(&mut self, name: &str, expected: T, observed: Result<T>) -> bool {
        match observed {
            Ok(v) => {
                let ok = v == expected;
                self.check(name, ok, json!(expected), json!(v))
            }
            Err(e) => self.check(name, false, json!(expected), json!({ "error": e.to_string() })),
        }
    }

    fn fail(&mut self, name: &str, err: &Error) {
        self.check(name, false, Value::Null, json!({ "error": err.to_string() }));
    }

    fn digest(&mut self, name: &str, field: &SampledField) {
        self.digests.insert(name.into(), field.digest());
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let clip = |v: &Value| {
            let t = v.to_string();
            if t.chars().count() > 120 {
                format!("{}…", t.chars().take(120).collect::<String>())
            } else {
                t
            }
        };
        for c in &self.checks {
            let mark = if c.passed { "ok  " } else { "FAIL" };
            s += &format!("{mark} {}: expected {}, observed {}\n", c.name, clip(&c.expected), clip(&c.observed));
        }
        s += &format!("{} {} in {:.1}s\n", self.pipeline, if self.passed { "passed" } else { "FAILED" }, self.elapsed_seconds);
        s
    }
}

pub fn run(pipeline: Pipeline, config: &PipelineConfig) -> Report {
    let start = Instant::now();
    let mut report = Report::new(pipeline, config);
    match pipeline {
        Pipeline::Thm1 => thm1(config, &mut report),
        Pipeline::Thm2 => thm2(config, &mut report),
        Pipeline::Hopf => hopf(config, &mut report),
        Pipeline::Roundtrip => roundtrip(config, &mut report),
        Pipeline::Dividing => dividing(config, &mut report),
    }
    report.elapsed_seconds = start.elapsed().as_secs_f64();
    report
}

/// `count` certified regular values within `max_angle` of `center`, drawn
/// from a generator seeded with `seed`.
pub fn sample_regular_values(
    field: &SampledField,
    center: Vec3,
    max_angle: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<RegularValue>> {
    let c = center.try_normalize().ok_or_else(|| Error::InvalidParams("zero center".into()))?;
    let e1 = if c.x.abs() < 0.9 { Vec3::X } else { Vec3::Y }.reject(c).normalize();
    let e2 = c.cross(e1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 20 * count.max(1) {
            return Err(Error::JitterExhausted { attempts });
        }
        let cos_t = rng.gen_range(max_angle.cos()..1.0);
        let sin_t = (1.0 - cos_t * cos_t).sqrt();
        let phi = rng.gen_range(0.0..2.0 * PI);
        let v = c * cos_t + (e1 * phi.cos() + e2 * phi.sin()) * sin_t;
        let rv = RegularValue::new(v)?;
        if certify_regular_value(field, &rv, DEFAULT_REGULARITY_TOL).certified {
            out.push(rv);
        }
    }
    Ok(out)
}

fn p_value(config: &PipelineConfig) -> RegularValue {
    RegularValue::new(Vec3::X).expect("unit vector").with_delta(config.delta)
}

fn independence(report: &mut Report, field: &SampledField, center: Vec3, max_angle: f64, expected: i64, config: &PipelineConfig) {
    let name = "regular_value_independence";
    let values = match sample_regular_values(field, center, max_angle, config.samples, config.seed) {
        Ok(v) => v,
        Err(e) => return report.fail(name, &e),
    };
    let results: Vec<Value> = values
        .iter()
        .map(|rv| match hopf_invariant(field, rv) {
            Ok(h) => json!(h.value),
            Err(e) => json!({ "error": e.to_string() }),
        })
        .collect();
    let ok = results.iter().all(|v| *v == json!(expected));
    let points: Vec<[f64; 3]> = values.iter().map(|rv| [rv.p.x, rv.p.y, rv.p.z]).collect();
    report.check(
        name,
        ok,
        json!({ "value": expected, "samples": config.samples, "seed": config.seed }),
        json!({ "values": results, "regular_values": points }),
    );
}

fn hopf(config: &PipelineConfig, report: &mut Report) {
    let model = match hopf_field(&hopf_domain(config.hopf_resolution), config.hopf_exclusion_degrees) {
        Ok(m) => m,
        Err(e) => return report.fail("hopf_field", &e),
    };
    report.digest("hopf", &model.field);
    let rv = model.default_value().with_delta(config.delta);
    let start = Instant::now();
    let h = hopf_invariant(&model.field, &rv);
    let secs = start.elapsed().as_secs_f64();
    match h {
        Ok(h) => {
            report.check("components", h.components == 1, json!(1), json!(h.components));
            report.check("by_framing", h.by_framing == 1, json!(1), json!(h.by_framing));
            report.check("by_two_values", h.by_two_values == 1, json!(1), json!(h.by_two_values));
        }
        Err(e) => report.fail("hopf_invariant", &e),
    }
    report.check_tol("seconds", secs < 60.0, json!("< 60"), json!(secs), 60.0);
    if let Ok(set) = extract(&model.field, &rv) {
        report.sets.push(("hopf".into(), set));
    }
    independence(report, &model.field, Vec3::Z, 60f64.to_radians(), 1, config);
}

fn all_endpoints_on_top(set: &PontryaginSet) -> bool {
    set.arcs().all(|c| {
        c.endpoint_faces
            .as_ref()
            .is_some_and(|ends| ends.iter().all(|f| f.len() == 1 && f[0].axis == 2 && f[0].upper))
    })
}

/// Largest angle between the framings of two framings of the same set.
fn framing_discrepancy(a: &PontryaginSet, b: &PontryaginSet) -> Option<f64> {
    if a.components.len() != b.components.len() {
        return None;
    }
    let mut worst = 0.0f64;
    for (x, y) in a.components.iter().zip(&b.components) {
        if x.vertices.len() != y.vertices.len() {
            return None;
        }
        for (u, v) in x.framing.iter().zip(&y.framing) {
            worst = worst.max(u.angle_to(*v));
        }
    }
    Some(worst)
}

fn thm1(config: &PipelineConfig, report: &mut Report) {
    let field = match bypass_slab(&config.model) {
        Ok(f) => f,
        Err(e) => return report.fail("bypass_slab", &e),
    };
    report.digest("bypass", &field);
    let p = p_value(config);
    let cert = certify_regular_value(&field, &p, DEFAULT_REGULARITY_TOL);
    report.check_tol("p_certified", cert.certified, json!(true), json!(cert.worst_singular), DEFAULT_REGULARITY_TOL);
    match extract(&field, &p) {
        Ok(set) => {
            report.check("p_arcs", set.arc_count() == 1, json!(1), json!(set.arc_count()));
            report.check("p_closed", set.closed_count() == 0, json!(0), json!(set.closed_count()));
            report.check("p_endpoints_on_top_face", all_endpoints_on_top(&set), json!(true), json!(all_endpoints_on_top(&set)));
            let jac = frame_by_jacobian(&set, &field);
            let push = frame_by_pushoff(&field, &p);
            match (jac, push) {
                (Ok(j), Ok((q, _))) => {
                    let worst = framing_discrepancy(&j, &q);
                    let ok = worst.is_some_and(|w| w < PI / 4.0);
                    report.check_tol("framings_agree", ok, json!("max angle < π/4"), json!(worst), PI / 4.0);
                }
                (Err(e), _) | (_, Err(e)) => report.fail("framings_agree", &e),
            }
            report.sets.push(("bypass_p".into(), set));
        }
        Err(e) => report.fail("extract_p", &e),
    }
    let q = RegularValue::new(-Vec3::X).expect("unit vector");
    report.check_eq("q_components", 0, extract(&field, &q).map(|s| s.components.len()));
    let expected = DividingSet::standard().attach_bypass(AttachingArc::new(0, 3)).map(|d| d.normal_form().chords);
    let observed = DividingSet::from_trace(&field.top_trace()).map(|d| d.normal_form().chords);
    match expected {
        Ok(exp) => {
            report.check_eq("top_face_dividing_set", exp, observed);
        }
        Err(e) => report.fail("top_face_dividing_set", &e),
    }
}

fn triangle_at(params: &BypassModelParams, report: &mut Report, label: &str, p: &RegularValue) -> Option<(i64, i64)> {
    let stack = match triangle_slab(params) {
        Ok(s) => s,
        Err(e) => {
            report.fail(&format!("{label}/triangle_slab"), &e);
            return None;
        }
    };
    let field = match stack.merged() {
        Ok(f) => f,
        Err(e) => {
            report.fail(&format!("{label}/triangle_slab"), &e);
            return None;
        }
    };
    report.digest(&format!("triangle_{label}"), &field);
    let set = match extract(&field, p).and_then(|s| frame_by_jacobian(&s, &field)) {
        Ok(s) => s,
        Err(e) => {
            report.fail(&format!("{label}/extract"), &e);
            return None;
        }
    };
    report.check(&format!("{label}/closed"), set.closed_count() == 1, json!(1), json!(set.closed_count()));
    report.check(&format!("{label}/arcs"), set.arc_count() == 0, json!(0), json!(set.arc_count()));
    let comp = set.components.first()?.clone();
    let cert = unknot_certificate(&comp);
    report.check(
        &format!("{label}/unknotted"),
        cert.is_some(),
        json!("crossing-free projection"),
        json!(cert.map(|d| [d.x, d.y, d.z])),
    );
    let sl = self_linking(&comp).ok();
    report.check(&format!("{label}/self_linking"), sl == Some(-1), json!(-1), json!(sl));
    let standard = standard_stack(&stack).and_then(|s| s.merged());
    let o3 = standard.and_then(|s| obstruction_o3(&s, &field, field.domain(), p, 0));
    let o3_value = match &o3 {
        Ok(r) => {
            report.check(&format!("{label}/o3_method"), r.method == O3Method::DoubledField, json!("doubled-field"), json!(r.method));
            report.check(
                &format!("{label}/o3_compensating_loop"),
                r.diagnostics.compensating_loop.map_or(true, |c| c == r.o3),
                json!(r.o3),
                json!(r.diagnostics.compensating_loop),
            );
            Some(r.o3)
        }
        Err(_) => None,
    };
    report.check_eq(&format!("{label}/o3"), -1, o3.map(|r| r.o3));
    report.sets.push((format!("triangle_{label}"), set));
    Some((sl?, o3_value?))
}

/// Planar unit circle whose framing turns `k` times against the radial direction.
pub fn framed_unknot(k: i64, n: usize) -> FramedCurve {
    let mut c = FramedCurve::circle(Vec3::ZERO, Vec3::X, Vec3::Y, 1.0, n);
    for (i, w) in c.framing.iter_mut().enumerate() {
        let kt = k as f64 * 2.0 * PI * i as f64 / n as f64;
        *w = *w * kt.cos() - Vec3::Z * kt.sin();
    }
    c
}

fn unknot_domain() -> BoxDomain {
    BoxDomain::new(Vec3::new(-2.0, -2.0, -1.0), Vec3::new(2.0, 2.0, 1.0), [64, 64, 32]).expect("valid box")
}

fn thm2(config: &PipelineConfig, report: &mut Report) {
    let p = p_value(config);
    let coarse = config.model.clone().with_resolution(config.coarse_resolution);
    let a = triangle_at(&coarse, report, "coarse", &p);
    let b = triangle_at(&config.model, report, "default", &p);
    report.check("resolution_stable", a.is_some() && a == b, json!(a), json!(b));

    // The realized unknot with the same framing must give back the same invariants.
    if let Some((sl, _)) = a {
        let rt = realize(&[framed_unknot(sl, 160)], &unknot_domain(), 0.4, &p)
            .and_then(|f| {
                let s = extract(&f, &p)?;
                frame_by_jacobian(&s, &f)
            })
            .and_then(|s| {
                if s.components.len() != 1 {
                    return Err(Error::MethodDisagreement(format!("{} components", s.components.len())));
                }
                self_linking(&s.components[0])
            });
        report.check_eq("realized_unknot_self_linking", sl, rt);
    }

    for n in [2usize, 3] {
        let o3 = stack_triangles(n, &coarse).and_then(|st| {
            let f = st.merged()?;
            let s = standard_stack(&st)?.merged()?;
            obstruction_o3(&s, &f, f.domain(), &p, 0).map(|r| r.o3)
        });
        report.check_eq(&format!("stack_{n}/o3"), -(n as i64), o3);
    }

    match triangle_slab(&coarse).and_then(|s| s.merged()) {
        Ok(f) => independence(report, &f, Vec3::X, 8f64.to_radians(), -1, config),
        Err(e) => report.fail("regular_value_independence", &e),
    }
}

/// Input corpus for the round trip: framed unknots and a zero-framed Hopf link.
pub fn roundtrip_corpus() -> Vec<(String, Vec<FramedCurve>, BoxDomain, f64)> {
    let mut out: Vec<_> = (-2..=2)
        .map(|k| (format!("unknot_{k}"), vec![framed_unknot(k, 160)], unknot_domain(), 0.4))
        .collect();
    let a = FramedCurve::circle(Vec3::ZERO, Vec3::X, Vec3::Y, 1.0, 160);
    let b = FramedCurve::circle(Vec3::X, Vec3::X, Vec3::Z, 1.0, 160);
    let dom = BoxDomain::new(Vec3::new(-1.75, -1.75, -1.75), Vec3::new(2.75, 1.75, 1.75), [72, 56, 56]).expect("valid box");
    out.push(("hopf_link".into(), vec![a, b], dom, 0.22));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct LinkData {
    components: usize,
    self_linking: Vec<i64>,
    linking: Vec<Vec<i64>>,
}

fn link_data(curves: &[FramedCurve]) -> Result<LinkData> {
    let mut sl = curves.iter().map(self_linking).collect::<Result<Vec<_>>>()?;
    sl.sort();
    let n = curves.len();
    let mut linking = vec![vec![0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let lk = linking_gauss(&curves[i], &curves[j])?;
            linking[i][j] = lk;
            linking[j][i] = lk;
        }
    }
    Ok(LinkData { components: n, self_linking: sl, linking })
}

/// Reorders `found` so that component i is the one nearest input curve i.
fn match_components(input: &[FramedCurve], found: &[FramedCurve]) -> Vec<FramedCurve> {
    let mut remaining: Vec<FramedCurve> = found.to_vec();
    let mut out = Vec::new();
    for c in input {
        if remaining.is_empty() {
            break;
        }
        let (idx, _) = remaining
            .iter()
            .enumerate()
            .map(|(i, f)| (i, f.vertices.iter().map(|v| c.distance_to(*v)).sum::<f64>() / f.len().max(1) as f64))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        out.push(remaining.swap_remove(idx));
    }
    out.extend(remaining);
    out
}

fn roundtrip(config: &PipelineConfig, report: &mut Report) {
    let p = p_value(config);
    for (name, link, domain, tube) in roundtrip_corpus() {
        let expected = match link_data(&link) {
            Ok(d) => d,
            Err(e) => {
                report.fail(&name, &e);
                continue;
            }
        };
        let observed = realize(&link, &domain, tube, &p).and_then(|f| {
            report.digest(&name, &f);
            let set = frame_by_jacobian(&extract(&f, &p)?, &f)?;
            let matched = match_components(&link, &set.components);
            report.sets.push((name.clone(), set));
            link_data(&matched)
        });
        report.check_eq(&name, expected, observed);
    }
}

fn dividing(_config: &PipelineConfig, report: &mut Report) {
    let ds = DividingSet::standard();
    let arc = AttachingArc::new(0, 3);
    let expected = vec![(0, 1), (2, 5), (3, 4)];
    report.check_eq("standard_bypass", expected, ds.attach_bypass(arc).map(|d| d.normal_form().chords));
    report.check_eq("standard_triangle_trivial", true, ds.attach_triangle(arc).map(|(d, _)| isotopy_equal(&d, &ds)));
    let mut graded = GradedDividingSet::new(ds.clone());
    let mut ledger = Vec::new();
    for _ in 0..5 {
        match graded.attach_triangle(arc) {
            Ok(g) => graded = g,
            Err(e) => return report.fail("grading", &e),
        }
        ledger.push(graded.grading);
    }
    report.check("grading", ledger == vec![-1, -2, -3, -4, -5], json!([-1, -2, -3, -4, -5]), json!(ledger));

    let (mut total, mut trivial, mut changed) = (0usize, 0usize, 0usize);
    for chords in 3..=6 {
        let n = 2 * chords;
        for bottom in 0..=n {
            for d in all_diagrams(bottom, n - bottom) {
                for a in valid_arcs(&d) {
                    total += 1;
                    if d.attach_bypass(a).is_ok_and(|o| !isotopy_equal(&o, &d)) {
                        changed += 1;
                    }
                    if d.attach_triangle(a).is_ok_and(|(o, g)| g == -1 && isotopy_equal(&o, &d)) {
                        trivial += 1;
                    }
                }
            }
        }
    }
    report.check("corpus_triangles_trivial", trivial == total && total > 0, json!(total), json!(trivial));
    report.check("corpus_bypasses_nontrivial", changed == total, json!(total), json!(changed));
}

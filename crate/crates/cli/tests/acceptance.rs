//! Acceptance suite: runs each numbered criterion, prints one PASS/FAIL
//! line per criterion, and fails if any criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;

use pontryagin::dividing::{all_diagrams, isotopy_equal, valid_arcs, AttachingArc, DividingSet, Endpoint, GradedDividingSet};
use pontryagin::extraction::{extract, frame_by_jacobian, realize, FramedCurve};
use pontryagin::fields::{BoxDomain, RegularValue};
use pontryagin::invariants::{gauss_integral, hopf_invariant, linking_crossings, linking_gauss, self_linking};
use pontryagin::models::{bypass_slab, hopf_domain, hopf_field, triangle_slab, BypassModelParams};
use pontryagin::verify::{framed_unknot, Report};
use pontryagin::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Outcome = Result<String, String>;

fn verify(pipeline: &str, extra: &[&str], dir: &Path) -> Result<Report, String> {
    let out = dir.join(pipeline);
    let status = Command::new(env!("CARGO_BIN_EXE_pontryagin"))
        .arg("verify")
        .arg(pipeline)
        .args(extra)
        .arg("--out")
        .arg(&out)
        .output()
        .map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(out.join(format!("{pipeline}_report.json"))).map_err(|e| e.to_string())?;
    let report: Report = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    if status.status.success() != report.passed {
        return Err(format!("exit status {} disagrees with report", status.status));
    }
    Ok(report)
}

fn observed(report: &Report, name: &str) -> Result<Value, String> {
    let c = report.checks.iter().find(|c| c.name == name).ok_or_else(|| format!("no check {name}"))?;
    if !c.passed {
        return Err(format!("{name}: expected {}, observed {}", c.expected, c.observed));
    }
    Ok(c.observed.clone())
}

fn require(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn failed_checks(report: &Report) -> String {
    let names: Vec<_> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    format!("failed checks: {}", names.join(", "))
}

fn hopf_calibration(hopf: &Report) -> Outcome {
    require(hopf.config.hopf_resolution >= 64, "resolution below 64³")?;
    let a = observed(hopf, "by_framing")?;
    let b = observed(hopf, "by_two_values")?;
    let secs = observed(hopf, "seconds")?;
    require(a == json!(1) && b == json!(1), format!("by_framing {a}, by_two_values {b}"))?;
    require(hopf.passed, failed_checks(hopf))?;
    Ok(format!("H = +1 by both methods at {}³ in {:.2}s", hopf.config.hopf_resolution, secs.as_f64().unwrap_or(f64::NAN)))
}

fn bypass_slab_report(dir: &Path) -> Outcome {
    let r = verify("thm1", &[], dir)?;
    require(r.config.model.resolution == [96, 128, 64], "not the default resolution")?;
    for (name, want) in [("p_arcs", json!(1)), ("p_closed", json!(0)), ("p_endpoints_on_top_face", json!(true)), ("q_components", json!(0))] {
        require(observed(&r, name)? == want, format!("{name} mismatch"))?;
    }
    observed(&r, "framings_agree")?;
    require(r.passed, failed_checks(&r))?;
    Ok("one arc ending on the top face at p, empty at q, framings agree".into())
}

fn triangle_report(thm2: &Report) -> Outcome {
    for label in ["coarse", "default"] {
        for (name, want) in [("closed", json!(1)), ("arcs", json!(0)), ("self_linking", json!(-1)), ("o3", json!(-1))] {
            let key = format!("{label}/{name}");
            require(observed(thm2, &key)? == want, format!("{key} mismatch"))?;
        }
        observed(thm2, &format!("{label}/unknotted"))?;
        require(observed(thm2, &format!("{label}/o3_method"))? == json!("doubled-field"), "o3 method")?;
    }
    observed(thm2, "resolution_stable")?;
    observed(thm2, "realized_unknot_self_linking")?;
    Ok(format!(
        "unknot with self-linking −1 and o3 = −1 at {:?} and {:?}",
        thm2.config.coarse_resolution, thm2.config.model.resolution
    ))
}

fn composition(thm2: &Report) -> Outcome {
    for n in [2, 3] {
        let v = observed(thm2, &format!("stack_{n}/o3"))?;
        require(v == json!(-n), format!("n = {n}: o3 = {v}"))?;
    }
    Ok("o3 = −2, −3 for two and three stacked triangles".into())
}

fn round_trip(dir: &Path) -> Outcome {
    let r = verify("roundtrip", &[], dir)?;
    for k in -2..=2 {
        observed(&r, &format!("unknot_{k}"))?;
    }
    observed(&r, "hopf_link")?;
    require(r.passed, failed_checks(&r))?;
    Ok("unknots k = −2…2 and the Hopf link reproduced exactly".into())
}

fn random_curve(rng: &mut ChaCha8Rng, center: Vec3, n: usize) -> FramedCurve {
    let coef: Vec<f64> = (0..18).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let vertices: Vec<Vec3> = (0..n)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            let f = |r: &[f64]| {
                r[0] * t.cos() + r[1] * t.sin() + 0.5 * (r[2] * (2.0 * t).cos() + r[3] * (2.0 * t).sin())
                    + 0.3 * (r[4] * (3.0 * t).cos() + r[5] * (3.0 * t).sin())
            };
            center + Vec3::new(f(&coef[0..6]), f(&coef[6..12]), f(&coef[12..18]))
        })
        .collect();
    FramedCurve::closed(vertices, vec![Vec3::Z; n])
}

fn linking_engine() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut tested, mut linked, mut worst) = (0, 0, 0.0f64);
    while tested < 100 {
        let a = random_curve(&mut rng, Vec3::ZERO, 120);
        let off = Vec3::new(rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8));
        let b = random_curve(&mut rng, off, 120);
        if a.min_distance_to(&b) < 0.02 {
            continue;
        }
        let raw = gauss_integral(&a, &b);
        worst = worst.max((raw - raw.round()).abs());
        let g = linking_gauss(&a, &b).map_err(|e| e.to_string())?;
        let x = linking_crossings(&a, &b, Vec3::new(0.2, -0.4, 1.0)).map_err(|e| e.to_string())?;
        require(g == x, format!("pair {tested}: gauss {g}, crossings {x}"))?;
        linked += (g != 0) as usize;
        tested += 1;
    }
    require(worst < 0.1, format!("residual {worst}"))?;
    Ok(format!("100 pairs agree ({linked} linked), worst residual {worst:.2e}"))
}

fn independence(hopf: &Report, thm2: &Report) -> Outcome {
    let mut summary = Vec::new();
    for (name, r, want) in [("hopf", hopf, 1), ("triangle", thm2, -1)] {
        let v = observed(r, "regular_value_independence")?;
        let values = v["values"].as_array().ok_or("no values")?;
        require(values.len() == 10, format!("{name}: {} samples", values.len()))?;
        require(values.iter().all(|x| *x == json!(want)), format!("{name}: {values:?}"))?;
        summary.push(format!("{name} {want:+}"));
    }
    Ok(format!("10 certified values each: {}", summary.join(", ")))
}

fn dividing_sets(dir: &Path) -> Outcome {
    let r = verify("dividing", &[], dir)?;
    require(r.passed, failed_checks(&r))?;
    use Endpoint::{Bottom as B, Top as T};
    let ds = DividingSet::standard();
    let arc = AttachingArc::new(0, 3);
    let once = ds.attach_bypass(arc).map_err(|e| e.to_string())?;
    let figure = DividingSet::new(3, 3, &[(T(0), B(2)), (T(1), T(2)), (B(0), B(1))]).map_err(|e| e.to_string())?;
    require(isotopy_equal(&once, &figure), format!("bypass gave {once}"))?;
    let mut g = GradedDividingSet::new(ds.clone());
    for n in 1..=4 {
        g = g.attach_triangle(arc).map_err(|e| e.to_string())?;
        require(g.grading == -n && isotopy_equal(&g.set, &ds), format!("after {n} triangles"))?;
    }
    let mut count = 0;
    for chords in 3..=6 {
        for bottom in 0..=2 * chords {
            for d in all_diagrams(bottom, 2 * chords - bottom) {
                for a in valid_arcs(&d) {
                    let (back, delta) = d.attach_triangle(a).map_err(|e| e.to_string())?;
                    require(delta == -1 && isotopy_equal(&back, &d), format!("{d} along {a:?}"))?;
                    count += 1;
                }
            }
        }
    }
    Ok(format!("bypass normal form matches; {count} corpus triangles are isotopy-trivial; grading −n"))
}

fn p() -> RegularValue {
    RegularValue::new(Vec3::X).unwrap()
}

fn hopf_of(link: &[FramedCurve], domain: &BoxDomain, tube: f64) -> Result<i64, String> {
    let f = realize(link, domain, tube, &p()).map_err(|e| e.to_string())?;
    hopf_invariant(&f, &p()).map(|h| h.value).map_err(|e| e.to_string())
}

fn property_suite() -> Outcome {
    let coarse = BypassModelParams::default().with_resolution([48, 64, 32]);
    // Unit norm of model fields and orthonormal framings of extracted curves.
    let bypass = bypass_slab(&coarse).map_err(|e| e.to_string())?;
    let triangle = triangle_slab(&coarse).and_then(|s| s.merged()).map_err(|e| e.to_string())?;
    let hopf = hopf_field(&hopf_domain(48), 90.0).map_err(|e| e.to_string())?;
    for f in [&bypass, &triangle, &hopf.field] {
        require(f.max_unit_error() < 1e-12, format!("unit error {}", f.max_unit_error()))?;
    }
    for f in [&bypass, &triangle] {
        let set = extract(f, &p()).map_err(|e| e.to_string())?;
        let jac = frame_by_jacobian(&set, f).map_err(|e| e.to_string())?;
        for c in set.components.iter().chain(&jac.components) {
            require(c.framing_orthogonality_error() < 1e-9, format!("framing error {}", c.framing_orthogonality_error()))?;
        }
    }

    // Symmetry and antisymmetry of linking.
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..20 {
        let a = random_curve(&mut rng, Vec3::ZERO, 80);
        let b = random_curve(&mut rng, Vec3::new(0.3, 0.0, 0.2), 80);
        if a.min_distance_to(&b) < 0.05 {
            continue;
        }
        let lk = linking_gauss(&a, &b).map_err(|e| e.to_string())?;
        require(linking_gauss(&b, &a).ok() == Some(lk), "lk not symmetric")?;
        require(linking_gauss(&a.reversed(), &b).ok() == Some(-lk), "lk not odd under reversal")?;
    }

    // Additivity over disjoint components and negation under reflection.
    let dom = BoxDomain::new(Vec3::new(-2.0, -2.0, -1.0), Vec3::new(5.0, 2.0, 1.0), [84, 48, 24]).map_err(|e| e.to_string())?;
    let u1 = framed_unknot(1, 160);
    let u2 = framed_unknot(-2, 160).translated(Vec3::new(3.0, 0.0, 0.0));
    let (h1, h2) = (hopf_of(&[u1.clone()], &dom, 0.4)?, hopf_of(&[u2.clone()], &dom, 0.4)?);
    let h12 = hopf_of(&[u1.clone(), u2], &dom, 0.4)?;
    require((h1, h2, h12) == (1, -2, -1), format!("additivity: {h1} + {h2} vs {h12}"))?;
    let f = realize(&[u1.clone()], &dom, 0.4, &p()).map_err(|e| e.to_string())?;
    let mirrored = hopf_invariant(&f.mirrored_z(), &p()).map(|h| h.value).map_err(|e| e.to_string())?;
    require(mirrored == -h1, format!("reflection gives {mirrored}"))?;
    require(self_linking(&u1.mirrored(2)).ok() == Some(-1), "reflected framing")?;

    // Resolution doubling.
    for scale in [1, 2] {
        let d = BoxDomain::new(Vec3::new(-2.0, -2.0, -1.0), Vec3::new(2.0, 2.0, 1.0), [32 * scale, 32 * scale, 16 * scale])
            .map_err(|e| e.to_string())?;
        require(hopf_of(&[framed_unknot(-1, 160)], &d, 0.45)? == -1, format!("scale {scale}"))?;
    }
    let fine = hopf_field(&hopf_domain(96), 90.0).map_err(|e| e.to_string())?;
    for h in [&hopf, &fine] {
        require(hopf_invariant(&h.field, &h.default_value()).map(|r| r.value).ok() == Some(1), "hopf under refinement")?;
    }
    Ok("unit norms, framings, lk symmetry, additivity, reflection, refinement".into())
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let hopf = verify("hopf", &["--resolution", "64"], d);
    let thm2 = verify("thm2", &[], d);
    let with = |r: &Result<Report, String>, f: &dyn Fn(&Report) -> Outcome| match r {
        Ok(r) => f(r),
        Err(e) => Err(e.clone()),
    };
    let results: Vec<(&str, Outcome)> = vec![
        ("hopf calibration", with(&hopf, &hopf_calibration)),
        ("bypass slab", bypass_slab_report(d)),
        ("bypass triangle", with(&thm2, &triangle_report)),
        ("composition", with(&thm2, &composition)),
        ("round trip", round_trip(d)),
        ("linking engine", linking_engine()),
        ("regular-value independence", match (&hopf, &thm2) {
            (Ok(h), Ok(t)) => independence(h, t),
            (Err(e), _) | (_, Err(e)) => Err(e.clone()),
        }),
        ("dividing sets", dividing_sets(d)),
        ("property suite", property_suite()),
    ];
    let mut failures = 0;
    for (i, (name, r)) in results.iter().enumerate() {
        match r {
            Ok(msg) => println!("PASS [{}] {name}: {msg}", i + 1),
            Err(msg) => {
                failures += 1;
                println!("FAIL [{}] {name}: {msg}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", results.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}

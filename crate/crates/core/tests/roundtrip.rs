use std::f64::consts::PI;

use pontryagin::extraction::{extract, frame_by_jacobian, frame_by_pushoff, realize, FramedCurve, PontryaginSet};
use pontryagin::fields::{sample, AnalyticField, BoxDomain, RegularValue, SampledField};
use pontryagin::geom::Vec3;
use pontryagin::invariants::{hopf_invariant, linking_gauss, self_linking};
use pontryagin::error::Error;

fn twisted_unknot(k: i32, n: usize) -> FramedCurve {
    let mut c = FramedCurve::circle(Vec3::ZERO, Vec3::X, Vec3::Y, 1.0, n);
    for (i, w) in c.framing.iter_mut().enumerate() {
        let kt = k as f64 * 2.0 * PI * i as f64 / n as f64;
        *w = *w * kt.cos() - Vec3::Z * kt.sin();
    }
    c
}

fn p_value() -> RegularValue {
    RegularValue::new(Vec3::X).unwrap()
}

fn unknot_domain(scale: usize) -> BoxDomain {
    BoxDomain::new(Vec3::new(-2.0, -2.0, -1.0), Vec3::new(2.0, 2.0, 1.0), [32 * scale, 32 * scale, 16 * scale]).unwrap()
}

fn sorted_self_linkings(set: &PontryaginSet) -> Vec<i64> {
    let mut v: Vec<i64> = set.components.iter().map(|c| self_linking(c).unwrap()).collect();
    v.sort();
    v
}

#[test]
fn unknot_round_trip_preserves_framing() {
    for k in -2..=2 {
        let link = [twisted_unknot(k, 160)];
        let field = realize(&link, &unknot_domain(2), 0.4, &p_value()).unwrap();
        let set = extract(&field, &p_value()).unwrap();
        assert_eq!(set.closed_count(), 1, "k = {k}");
        assert_eq!(set.arc_count(), 0);
        let by_tet = self_linking(&set.components[0]).unwrap();
        let by_jac = self_linking(&frame_by_jacobian(&set, &field).unwrap().components[0]).unwrap();
        let (pushed, copies) = frame_by_pushoff(&field, &p_value()).unwrap();
        let by_push = self_linking(&pushed.components[0]).unwrap();
        let two_value = linking_gauss(&pushed.components[0], &copies[0]).unwrap();
        assert_eq!([by_tet, by_jac, by_push, two_value], [k as i64; 4], "k = {k}");
        assert_eq!(hopf_invariant(&field, &p_value()).unwrap().value, k as i64);
    }
}

#[test]
fn extracted_curve_follows_input_orientation() {
    let link = [twisted_unknot(1, 160)];
    let field = realize(&link, &unknot_domain(2), 0.4, &p_value()).unwrap();
    let c = &extract(&field, &p_value()).unwrap().components[0];
    // Input runs counterclockwise about +z.
    let mut area = 0.0;
    for (a, b) in c.segments() {
        area += a.x * b.y - a.y * b.x;
    }
    assert!(area > 0.0);
    let max_r = c.vertices.iter().map(|v| (v.x.hypot(v.y) - 1.0).abs().max(v.z.abs())).fold(0.0, f64::max);
    assert!(max_r < 0.1, "extracted curve strays {max_r} from the input");
}

#[test]
fn hopf_link_round_trip() {
    let a = FramedCurve::circle(Vec3::ZERO, Vec3::X, Vec3::Y, 1.0, 160);
    let b = FramedCurve::circle(Vec3::X, Vec3::X, Vec3::Z, 1.0, 160);
    let input_lk = linking_gauss(&a, &b).unwrap();
    let dom = BoxDomain::new(Vec3::new(-1.75, -1.75, -1.75), Vec3::new(2.75, 1.75, 1.75), [72, 56, 56]).unwrap();
    let field = realize(&[a.clone(), b.clone()], &dom, 0.22, &p_value()).unwrap();
    let set = frame_by_jacobian(&extract(&field, &p_value()).unwrap(), &field).unwrap();
    assert_eq!(set.closed_count(), 2);
    assert_eq!(sorted_self_linkings(&set), vec![0, 0]);
    assert_eq!(linking_gauss(&set.components[0], &set.components[1]).unwrap(), input_lk);
    assert_eq!(hopf_invariant(&field, &p_value()).unwrap().value, 2 * input_lk);
}

#[test]
fn empty_link_gives_constant_field() {
    let field = realize(&[], &unknot_domain(1), 0.4, &p_value()).unwrap();
    assert!(field.values().iter().all(|v| *v == -Vec3::X));
    assert!(extract(&field, &p_value()).unwrap().is_empty());
}

#[test]
fn overlapping_tubes_are_rejected() {
    let a = FramedCurve::circle(Vec3::ZERO, Vec3::X, Vec3::Y, 1.0, 64);
    let b = FramedCurve::circle(Vec3::new(0.0, 0.0, 0.3), Vec3::X, Vec3::Y, 1.0, 64);
    assert!(matches!(realize(&[a.clone(), b], &unknot_domain(1), 0.2, &p_value()), Err(Error::TubeOverlap(_))));
    assert!(matches!(realize(&[a], &unknot_domain(1), 1.2, &p_value()), Err(Error::TubeOverlap(_))));
}

#[test]
fn resolution_doubling_keeps_invariants() {
    let link = [twisted_unknot(-1, 160)];
    for scale in [1, 2] {
        let field = realize(&link, &unknot_domain(scale), 0.45, &p_value()).unwrap();
        let set = extract(&field, &p_value()).unwrap();
        assert_eq!(sorted_self_linkings(&set), vec![-1], "scale {scale}");
    }
}

/// a = 0.4y, b = 0.4(z + y/2): the preimage of p is the x-axis and the
/// framing solves db(w) = 0, da(w) > 0, w ⊥ x, giving (0, 2, −1)/√5.
#[test]
fn framing_matches_linear_model() {
    let f = AnalyticField::new("shear", |x: Vec3| {
        let (a, b) = (0.4 * x.y, 0.4 * (x.z + 0.5 * x.y));
        Vec3::new((1.0 - a * a - b * b).sqrt(), a, b)
    });
    let dom = BoxDomain::new(Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 1.0, 1.0), [16, 17, 19]).unwrap();
    let field: SampledField = sample(&f, &dom).unwrap();
    let set = extract(&field, &p_value()).unwrap();
    assert_eq!(set.arc_count(), 1);
    let expected = Vec3::new(0.0, 2.0, -1.0).normalize();
    let arc = &set.components[0];
    assert!(arc.vertices.iter().all(|v| v.y.abs() < 1e-9 && v.z.abs() < 1e-9));
    assert!((arc.vertices.last().unwrap().x - arc.vertices[0].x) > 1.9);
    for w in &arc.framing {
        assert!((*w - expected).norm() < 1e-3, "{w:?}");
    }
    let jac = frame_by_jacobian(&set, &field).unwrap();
    for w in &jac.components[0].framing {
        assert!((*w - expected).norm() < 1e-3, "{w:?}");
    }
    let faces = arc.endpoint_faces.clone().unwrap();
    assert_eq!(faces[0][0].axis, 0);
    assert!(!faces[0][0].upper && faces[1][0].upper);
}

#[test]
fn quarter_turned_frame_keeps_self_linking() {
    let link = [twisted_unknot(2, 160)];
    let field = realize(&link, &unknot_domain(2), 0.4, &p_value()).unwrap();
    let rv = p_value().quarter_turn();
    let set = frame_by_jacobian(&extract(&field, &rv).unwrap(), &field).unwrap();
    assert_eq!(self_linking(&set.components[0]).unwrap(), 2);
}

#[test]
fn halving_delta_keeps_pushoff_self_linking() {
    let link = [twisted_unknot(-2, 160)];
    let field = realize(&link, &unknot_domain(2), 0.4, &p_value()).unwrap();
    for delta in [0.02, 0.01] {
        let (set, _) = frame_by_pushoff(&field, &p_value().with_delta(delta)).unwrap();
        assert_eq!(self_linking(&set.components[0]).unwrap(), -2);
    }
}

#[test]
fn curve_exports() {
    let link = [twisted_unknot(0, 64)];
    let field = realize(&link, &unknot_domain(1), 0.4, &p_value()).unwrap();
    let set = extract(&field, &p_value()).unwrap();
    let json = set.to_json().unwrap();
    assert!(json.contains("\"version\": 1"));
    assert_eq!(PontryaginSet::from_json(&json).unwrap(), set);
    let obj = set.to_obj();
    assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), set.components[0].len());
    assert_eq!(set.to_csv().lines().count(), 1 + set.components[0].len());
}

#[test]
fn hopf_invariant_adds_over_distant_components() {
    let dom = BoxDomain::new(Vec3::new(-2.0, -2.0, -1.0), Vec3::new(5.0, 2.0, 1.0), [84, 48, 24]).unwrap();
    let a = twisted_unknot(1, 160);
    let b = twisted_unknot(-2, 160).translated(Vec3::new(3.0, 0.0, 0.0));
    let h = |link: &[FramedCurve]| {
        let f = realize(link, &dom, 0.4, &p_value()).unwrap();
        hopf_invariant(&f, &p_value()).unwrap().value
    };
    assert_eq!(h(&[a.clone()]), 1);
    assert_eq!(h(&[b.clone()]), -2);
    assert_eq!(h(&[a, b]), -1);
}

#[test]
fn reflecting_the_domain_negates_the_hopf_invariant() {
    for k in [-1, 2] {
        let f = realize(&[twisted_unknot(k, 160)], &unknot_domain(1), 0.45, &p_value()).unwrap();
        let h = hopf_invariant(&f, &p_value()).unwrap().value;
        assert_eq!(h, k as i64);
        assert_eq!(hopf_invariant(&f.mirrored_z(), &p_value()).unwrap().value, -h);
    }
}

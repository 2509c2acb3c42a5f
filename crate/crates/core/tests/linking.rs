use std::f64::consts::PI;

use pontryagin::extraction::FramedCurve;
use pontryagin::geom::Vec3;
use pontryagin::invariants::{
    gauss_integral, linking_crossings, linking_gauss, linking_gauss_oriented, projection_self_crossings, self_linking,
    self_linking_oriented, unknot_certificate,
    Handedness,
};
use pontryagin::error::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Midpoint-rule Gauss integral (1/4π)∮∮ (r1 − r2)·(dr1 × dr2)/|r1 − r2|³.
fn midpoint_gauss(c1: &FramedCurve, c2: &FramedCurve) -> f64 {
    let mut acc = 0.0;
    for (a0, a1) in c1.segments() {
        for (b0, b1) in c2.segments() {
            let r = (a0 + a1) * 0.5 - (b0 + b1) * 0.5;
            acc += r.dot((a1 - a0).cross(b1 - b0)) / r.norm().powi(3);
        }
    }
    acc / (4.0 * PI)
}

fn hopf_pair() -> (FramedCurve, FramedCurve) {
    let a = FramedCurve::circle(Vec3::ZERO, Vec3::X, Vec3::Y, 1.0, 200);
    let b = FramedCurve::circle(Vec3::X, Vec3::X, Vec3::Z, 1.0, 200);
    (a, b)
}

/// Planar unit circle whose framing turns against the Frenet normal `k` times.
/// Its twist is (1/2π)∮ (w × w′)·t = k, and the writhe of a planar curve vanishes.
fn twisted_unknot(k: i32, n: usize) -> FramedCurve {
    let mut c = FramedCurve::circle(Vec3::ZERO, Vec3::X, Vec3::Y, 1.0, n);
    for (i, w) in c.framing.iter_mut().enumerate() {
        let th = 2.0 * PI * i as f64 / n as f64;
        let kt = k as f64 * th;
        *w = *w * kt.cos() - Vec3::Z * kt.sin();
    }
    c
}

#[test]
fn gauss_matches_midpoint_oracle_on_hopf_link() {
    let (a, b) = hopf_pair();
    let exact = gauss_integral(&a, &b);
    let oracle = midpoint_gauss(&a, &b);
    assert!((exact - oracle).abs() < 0.02, "{exact} vs {oracle}");
    assert_eq!(linking_gauss(&a, &b).unwrap(), oracle.round() as i64);
    assert_eq!(linking_gauss(&a, &b).unwrap().abs(), 1);
}

#[test]
fn hopf_link_sign_follows_orientation() {
    let (a, b) = hopf_pair();
    let lk = linking_gauss(&a, &b).unwrap();
    assert_eq!(linking_gauss(&a.reversed(), &b).unwrap(), -lk);
    assert_eq!(linking_gauss(&a, &b.reversed()).unwrap(), -lk);
    assert_eq!(linking_gauss(&b, &a).unwrap(), lk);
    assert_eq!(linking_crossings(&a, &b, Vec3::new(0.1, 0.2, 1.0)).unwrap(), lk);
}

#[test]
fn separated_unknots_do_not_link() {
    let a = FramedCurve::circle(Vec3::ZERO, Vec3::X, Vec3::Y, 1.0, 64);
    let b = FramedCurve::circle(Vec3::new(5.0, 0.0, 0.0), Vec3::Y, Vec3::Z, 1.0, 64);
    assert_eq!(linking_gauss(&a, &b).unwrap(), 0);
    assert_eq!(linking_crossings(&a, &b, Vec3::Z).unwrap(), 0);
}

#[test]
fn mirror_negates_linking() {
    let (a, b) = hopf_pair();
    let lk = linking_gauss(&a, &b).unwrap();
    let (ma, mb) = (a.mirrored(2), b.mirrored(2));
    assert_eq!(linking_gauss(&ma, &mb).unwrap(), -lk);
    assert_eq!(linking_crossings(&ma, &mb, Vec3::new(0.3, 0.1, 1.0)).unwrap(), -lk);
}

#[test]
fn crossings_invariant_under_projection_direction() {
    let (a, b) = hopf_pair();
    let lk = linking_gauss(&a, &b).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let d = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        assert_eq!(linking_crossings(&a, &b, d).unwrap(), lk);
    }
}

#[test]
fn open_and_touching_curves_are_rejected() {
    let (a, _) = hopf_pair();
    let mut open = a.clone();
    open.closed = false;
    assert!(matches!(linking_gauss(&open, &a), Err(Error::OpenCurve)));
    let b = FramedCurve::circle(Vec3::new(2.0, 0.0, 0.0), Vec3::X, Vec3::Y, 1.0, 64);
    assert!(matches!(linking_gauss(&a, &b), Err(Error::CurvesTooClose { .. })));
}

#[test]
fn planar_circle_with_vertical_framing_has_zero_self_linking() {
    let mut c = FramedCurve::circle(Vec3::ZERO, Vec3::X, Vec3::Y, 1.0, 128);
    c.framing = vec![Vec3::Z; c.vertices.len()];
    assert_eq!(self_linking(&c).unwrap(), 0);
}

#[test]
fn twisted_unknots_have_self_linking_equal_to_twist() {
    for k in -3..=3 {
        let c = twisted_unknot(k, 256);
        assert_eq!(self_linking(&c).unwrap(), k as i64, "k = {k}");
        assert_eq!(self_linking(&c.negated_framing()).unwrap(), k as i64);
        assert_eq!(self_linking(&c.reversed()).unwrap(), k as i64);
        assert_eq!(self_linking_oriented(&c, Handedness::Left).unwrap(), -(k as i64));
    }
}

#[test]
fn left_handed_convention_negates_linking() {
    let (a, b) = hopf_pair();
    assert_eq!(linking_gauss_oriented(&a, &b, Handedness::Left).unwrap(), -linking_gauss(&a, &b).unwrap());
}

/// Random smooth closed curve: a trigonometric polynomial around `center`.
fn random_curve(rng: &mut ChaCha8Rng, center: Vec3, n: usize) -> FramedCurve {
    let mut coef = [[0.0f64; 6]; 3];
    for row in coef.iter_mut() {
        for c in row.iter_mut() {
            *c = rng.gen_range(-1.0..1.0);
        }
    }
    let vertices: Vec<Vec3> = (0..n)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            let f = |r: &[f64; 6]| {
                r[0] * t.cos() + r[1] * t.sin() + 0.5 * (r[2] * (2.0 * t).cos() + r[3] * (2.0 * t).sin())
                    + 0.3 * (r[4] * (3.0 * t).cos() + r[5] * (3.0 * t).sin())
            };
            center + Vec3::new(f(&coef[0]), f(&coef[1]), f(&coef[2]))
        })
        .collect();
    let framing = vec![Vec3::Z; n];
    FramedCurve::closed(vertices, framing)
}

#[test]
fn gauss_and_crossings_agree_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut tested = 0;
    let mut nonzero = 0;
    while tested < 100 {
        let a = random_curve(&mut rng, Vec3::ZERO, 120);
        let offset = Vec3::new(rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8));
        let b = random_curve(&mut rng, offset, 120);
        if a.min_distance_to(&b) < 0.02 {
            continue;
        }
        let raw = gauss_integral(&a, &b);
        assert!((raw - raw.round()).abs() < 0.1, "residual too large: {raw}");
        let g = linking_gauss(&a, &b).unwrap();
        let x = linking_crossings(&a, &b, Vec3::new(0.2, -0.4, 1.0)).unwrap();
        assert_eq!(g, x);
        nonzero += (g != 0) as usize;
        tested += 1;
    }
    assert!(nonzero > 5, "corpus should contain linked pairs, got {nonzero}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn linking_is_symmetric_and_odd_under_reversal(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_curve(&mut rng, Vec3::ZERO, 60);
        let b = random_curve(&mut rng, Vec3::new(0.3, 0.0, 0.2), 60);
        prop_assume!(a.min_distance_to(&b) > 0.05);
        let lk = linking_gauss(&a, &b).unwrap();
        prop_assert_eq!(linking_gauss(&b, &a).unwrap(), lk);
        prop_assert_eq!(linking_gauss(&a.reversed(), &b).unwrap(), -lk);
        prop_assert_eq!(linking_gauss(&a, &b.reversed()).unwrap(), -lk);
    }
}

fn trefoil(n: usize) -> FramedCurve {
    let v: Vec<Vec3> = (0..n)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            Vec3::new(t.sin() + 2.0 * (2.0 * t).sin(), t.cos() - 2.0 * (2.0 * t).cos(), -(3.0 * t).sin())
        })
        .collect();
    FramedCurve::closed(v, vec![Vec3::Z; n])
}

#[test]
fn unknot_certificate_finds_crossing_free_projections() {
    let c = FramedCurve::circle(Vec3::ZERO, Vec3::X, Vec3::Y, 1.0, 64);
    let d = unknot_certificate(&c).unwrap();
    assert_eq!(projection_self_crossings(&c, d), Some(0));
    assert_eq!(projection_self_crossings(&c, Vec3::Z), Some(0));
    let t = trefoil(240);
    assert_eq!(projection_self_crossings(&t, Vec3::Z), Some(3));
    assert!(unknot_certificate(&t).is_none());
}

use std::f64::consts::{PI, TAU};

use gaplab::cocycle::{CocycleMap, Mat2, Mat2H};
use gaplab::dynamics::{BaseDynamics, Frequency, TorusPoint, TrigPoly};
use gaplab::operators::{jacobi_cocycle_map, szego_cocycle_map, CmvFamily, JacobiFamily};
use gaplab::projection::*;
use num_complex::Complex64;

fn lcg(seed: u64) -> impl FnMut() -> f64 {
    let mut s = seed;
    move || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (s >> 11) as f64 / (1u64 << 53) as f64
    }
}

fn golden() -> BaseDynamics {
    BaseDynamics::TorusRotation(Frequency::golden())
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

#[test]
fn cmv_product_closed_form_matches_multiplication() {
    let c = SzegoClassElem::new(0.4, 1.1, 0.3).unwrap();
    let fixed = CmvTripleParams { phi1: 1.1, v2: 0.3, phi3: 1.1 };
    let s = c.matrix();
    assert!(cmv_triple_product(&fixed, &c).unwrap().max_abs_diff(&(s * s * s)) < 1e-12);
    let flat = SzegoClassElem::new(0.4, 1.1, 0.0).unwrap();
    let p = CmvTripleParams { phi1: 0.2, v2: 0.6, phi3: -2.0 };
    let d = cmv_triple_product(&p, &flat).unwrap();
    assert!(d.max_abs_diff(&cmv_triple_closed_form(&p, &flat).unwrap()) < 1e-12);
    let mut rnd = lcg(1);
    for _ in 0..10_000 {
        let c = SzegoClassElem::new(TAU * rnd(), TAU * rnd(), 0.95 * rnd()).unwrap();
        let p = CmvTripleParams { phi1: TAU * rnd(), v2: 0.95 * rnd(), phi3: TAU * rnd() };
        let d = cmv_triple_product(&p, &c).unwrap();
        let f = cmv_triple_closed_form(&p, &c).unwrap();
        assert!(d.max_abs_diff(&f) < 1e-10 * (1.0 + d.norm()));
    }
    assert!(cmv_triple_product(&CmvTripleParams { phi1: 0.0, v2: 1.0, phi3: 0.0 }, &c).is_err());
}

#[test]
fn cmv_triple_inverse_round_trip() {
    let c = SzegoClassElem::new(0.7, 0.3, 0.5).unwrap();
    let s = c.matrix();
    let p = cmv_triple_inverse(&(s * s * s), &c).unwrap();
    let fixed = CmvTripleParams { phi1: 0.3, v2: 0.5, phi3: 0.3 };
    assert!(cmv_triple_condition(&fixed, &c).unwrap() < 100.0);
    assert!(cmv_triple_condition(&fixed, &SzegoClassElem { theta: PI / 2.0, ..c }).unwrap() > 1e8);
    assert!((p.phi1 - 0.3).abs() < 1e-12 && (p.v2 - 0.5).abs() < 1e-12 && (p.phi3 - 0.3).abs() < 1e-12);
    let mut rnd = lcg(2);
    let mut done = 0;
    while done < 10_000 {
        let c = SzegoClassElem::new(TAU * rnd(), TAU * rnd(), 0.2 + 0.6 * rnd()).unwrap();
        let e = 0.01;
        let q = CmvTripleParams {
            phi1: c.phi + e * (2.0 * rnd() - 1.0),
            v2: c.v + e * (2.0 * rnd() - 1.0),
            phi3: c.phi + e * (2.0 * rnd() - 1.0),
        };
        let b = cmv_triple_product(&q, &c).unwrap();
        let s = c.matrix();
        if b.max_abs_diff(&(s * s * s)) > CMV_NEIGHBOURHOOD {
            continue;
        }
        let p = cmv_triple_inverse(&b, &c).unwrap_or_else(|e| panic!("{e} {c:?} {q:?}"));
        assert!(cmv_triple_product(&p, &c).unwrap().max_abs_diff(&b) < 1e-9);
        // near the fold only B is recovered, not the parameters
        if cmv_triple_condition(&CmvTripleParams { phi1: c.phi, v2: c.v, phi3: c.phi }, &c).unwrap() < 100.0 {
            assert!(angle_gap(p.phi1, q.phi1) < 1e-8 && (p.v2 - q.v2).abs() < 1e-8 && angle_gap(p.phi3, q.phi3) < 1e-8, "{c:?} {q:?} {p:?}");
        }
        done += 1;
    }
}

#[test]
fn cmv_triple_inverse_rejects_far_targets() {
    let c = SzegoClassElem::new(0.7, 0.3, 0.5).unwrap();
    let s = c.matrix();
    let cube = s * s * s;
    let far = Mat2H::raw(cube.a * 2.0, cube.b);
    let err = cmv_triple_inverse(&far, &c).unwrap_err();
    assert!(matches!(err, gaplab::Error::OutOfRange(_)), "{err}");
}

#[test]
fn jacobi_triple_inverse_examples() {
    let t = jacobi_triple_inverse(&Mat2::diag(-1.0, -1.0), [1.0; 3]).unwrap();
    assert_eq!((t.t1, t.t2, t.t3), (1.0, 1.0, 1.0));
    let back = jacobi_triple_product(&t, [1.0; 3]).unwrap();
    assert!(back.sub(&Mat2::diag(-1.0, -1.0)).max_abs() < 1e-15);
    let err = jacobi_triple_inverse(&Mat2::raw(0.0, 1.0, -1.0, 0.0), [1.0; 3]).unwrap_err();
    assert!(matches!(err, gaplab::Error::Singular(_)));
    assert!(jacobi_triple_inverse(&Mat2::diag(2.0, 2.0), [1.0; 3]).is_err());
}

#[test]
fn jacobi_triple_inverse_round_trip() {
    let mut rnd = lcg(3);
    let mut done = 0;
    while done < 10_000 {
        let a = [0.2 + 2.0 * rnd(), 0.2 + 2.0 * rnd(), 0.2 + 2.0 * rnd()];
        let t = JacobiTripleParams { t1: 6.0 * rnd() - 3.0, t2: 6.0 * rnd() - 3.0, t3: 6.0 * rnd() - 3.0 };
        let b = jacobi_triple_product(&t, a).unwrap();
        if b.m22.abs() <= 0.1 {
            continue;
        }
        let u = jacobi_triple_inverse(&b, a).unwrap();
        let back = jacobi_triple_product(&u, a).unwrap();
        assert!(back.sub(&b).max_abs() < 1e-10 * (1.0 + b.max_abs()));
        done += 1;
    }
}

#[test]
fn quad_factorization() {
    let q = jacobi_quad_factorize(&Mat2::IDENTITY, [1.0; 4]).unwrap();
    assert_eq!(q.e, [0.0; 4]);
    let mut rnd = lcg(4);
    let mut done = 0;
    while done < 10_000 {
        let e = [0.0; 4].map(|_: f64| 0.004 * (2.0 * rnd() - 1.0));
        let b = jacobi_quad_product(e, [1.0; 4]).unwrap();
        if b.sub(&Mat2::IDENTITY).norm() >= 0.01 {
            continue;
        }
        let f = jacobi_quad_factorize(&b, [1.0; 4]).unwrap();
        for phi in &f.phi_roots {
            assert!(phi.abs() <= 1.0);
        }
        assert!(jacobi_quad_product(f.e, [1.0; 4]).unwrap().sub(&b).max_abs() < 1e-8);
        done += 1;
    }
    // a₁a₃ = a₂a₄ keeps the trace-zero quadruple at the identity
    let a = [0.8, 1.25, 1.5, 0.96];
    let b = jacobi_quad_product([0.001, -0.002, 0.0015, 0.0005], a).unwrap();
    let f = jacobi_quad_factorize(&b, a).unwrap();
    assert!(jacobi_quad_product(f.e, a).unwrap().sub(&b).max_abs() < 1e-8);
    let far = Mat2::diag(1.5, 1.0 / 1.5);
    assert!(matches!(jacobi_quad_factorize(&far, [1.0; 4]), Err(gaplab::Error::Precondition(_))));
}

#[test]
fn radius_facts() {
    assert!((radius(0.5, 0.0) - 1.5).abs() < 1e-15);
    assert!((radius(0.5, PI) - 0.5).abs() < 1e-15);
    assert!((radius(0.5, PI / 2.0) - 1.25f64.sqrt()).abs() < 1e-15);
    let c = radius_check(0.5, 10_000);
    assert!(c.min_excess >= -1e-15);
    assert!(c.identity_error < 1e-12);
    for f in &c.equality_angles {
        assert!(f.abs() < 1e-5 || (f - PI).abs() < 1e-5, "{f}");
    }
    assert_eq!(c.equality_angles.len(), 2);
}

#[test]
fn range_region_holes() {
    let c = SzegoClassElem::new(0.3, 0.9, 0.4).unwrap();
    for v2 in [0.4, 0.6, 0.9] {
        let p = g_range_probe(&c, v2, 512).unwrap();
        assert!(!p.holes.hole, "v2 = {v2}: {:?}", p.holes);
    }
    let p = g_range_probe(&c, 0.2, 512).unwrap();
    assert!(p.lambda > 1.0 && p.holes.hole);
    // the cloud lies in the rescaled image of the model range
    let r = c.v * 0.2 * (2.0 + p.lambda);
    assert!(p.cloud.iter().all(|z| z[0].hypot(z[1]) <= r + 1e-12));
    assert!(g_range_probe(&c, 0.5, 100).is_err());
    let fixed = cmv_triple_closed_form(&CmvTripleParams { phi1: c.phi, v2: c.v, phi3: c.phi }, &c).unwrap();
    let g = g_value(&c, c.v, c.phi, c.phi);
    assert!((fixed.a * (1.0 - c.v * c.v) * (1.0 - c.v * c.v).sqrt() - Complex64::cis(3.0 * c.theta) - g).norm() < 1e-12);
}

#[test]
fn default_arc_is_disjoint_from_its_images() {
    for alpha in [Frequency::golden().value(), 0.49, 0.01, 0.3] {
        let k = Arc::default_for(alpha);
        k.check_disjoint(alpha).unwrap();
    }
    assert!(Arc::new(0.0, 0.5).unwrap().check_disjoint(0.3).is_err());
}

#[test]
fn unperturbed_cocycle_is_fixed() {
    let base = golden();
    let arc = Arc::default_for(Frequency::golden().value());
    let f = JacobiFamily::almost_mathieu(0.5, base);
    let a = jacobi_cocycle_map(&f, 3.0).unwrap();
    let lc = build_local_conjugacy(&JacobiClass, &a, &a, arc, 512).unwrap();
    for (j, x) in lc.grid.iter().enumerate() {
        let w = TorusPoint::one(*x);
        assert!(lc.phi[j].sub(&a.value(&w)).max_abs() < 1e-12);
        assert!(lc.psi[j].sub(&Mat2::IDENTITY).max_abs() < 1e-12);
    }
}

#[test]
fn local_conjugacy_jacobi() {
    let base = golden();
    let arc = Arc::default_for(Frequency::golden().value());
    let f = JacobiFamily::almost_mathieu(0.5, base);
    let a = jacobi_cocycle_map(&f, 3.0).unwrap();
    let mut rnd = lcg(5);
    for _ in 0..3 {
        let g = [rnd() - 0.5, rnd() - 0.5, rnd() - 0.5];
        let b = bump_perturbation(JacobiClass, &a, arc, 1e-3, g);
        let sup = (0..4096)
            .map(|j| TorusPoint::one(j as f64 / 4096.0))
            .map(|w| b.value(&w).sub(&a.value(&w)).max_abs())
            .fold(0.0, f64::max);
        assert!(sup > 1e-4 && sup < 1e-2);
        let lc = build_local_conjugacy(&JacobiClass, &a, &b, arc, 4096).unwrap();
        assert!(lc.max_residual < 1e-8, "{}", lc.max_residual);
        assert!(lc.max_class_defect < 1e-10);
        // Ψ is the identity away from K ∪ T(K)
        let alpha = Frequency::golden().value();
        for (j, x) in lc.grid.iter().enumerate() {
            if !arc.contains(*x) && !arc.contains(x - alpha) {
                assert_eq!(lc.psi[j], Mat2::IDENTITY);
            }
        }
    }
}

#[test]
fn local_conjugacy_cmv() {
    let base = golden();
    let arc = Arc::default_for(Frequency::golden().value());
    let f = CmvFamily::polar(0.5, TrigPoly::cos(1, 1.0), base).unwrap();
    let a = szego_cocycle_map(&f, Complex64::cis(1.0)).unwrap();
    let class = SzegoClass { theta: 0.5 };
    let b = bump_perturbation(class, &a, arc, 1e-3, [0.2, -0.5, 0.7]);
    let lc = build_local_conjugacy(&class, &a, &b, arc, 4096).unwrap();
    assert!(lc.max_residual < 1e-8, "{}", lc.max_residual);
    assert!(lc.max_class_defect < 1e-10);
    assert!(lc.interpolation_error < 1e-4);
    let same = build_local_conjugacy(&class, &a, &a, arc, 256).unwrap();
    assert!(same.psi.iter().all(|m| m.max_abs_diff(&Mat2H::IDENTITY) < 1e-12));
}

#[test]
fn bump_outside_the_arc_is_rejected() {
    let base = golden();
    let arc = Arc::default_for(Frequency::golden().value());
    let a = jacobi_cocycle_map(&JacobiFamily::almost_mathieu(0.5, base), 3.0).unwrap();
    let shifted = Arc::new(arc.start + 0.5 * arc.length, arc.length).unwrap();
    let b = bump_perturbation(JacobiClass, &a, shifted, 1e-3, [1.0, 0.0, 0.0]);
    let err = build_local_conjugacy(&JacobiClass, &a, &b, arc, 1024).unwrap_err();
    assert!(matches!(err, gaplab::Error::InvalidInput(_)), "{err}");
}

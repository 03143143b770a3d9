use gaplab::dynamics::{dist_to_int, frac, BaseDynamics, Frequency, TrigPoly};
use gaplab::gaps::*;
use gaplab::operators::*;

fn golden() -> BaseDynamics {
    BaseDynamics::TorusRotation(Frequency::golden())
}

fn amo(n: usize) -> (SpectrumApprox, GapReport) {
    let f = OperatorFamily::Jacobi(JacobiFamily::almost_mathieu(0.5, golden()));
    family_gap_report(&f, &GapSettings { n, ..Default::default() }).unwrap()
}

#[test]
fn label_set_closure() {
    let ls = LabelSet::new(Frequency::golden(), 50);
    assert_eq!(ls.labels.len(), 100);
    for w in ls.labels.windows(2) {
        assert!(w[1].1 - w[0].1 > 1e-12);
    }
    let a = Frequency::golden().value();
    for k in 1..=50i64 {
        assert!((frac(k as f64 * a) + frac(-k as f64 * a) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn best_label_matches_brute_force() {
    let ls = LabelSet::new(Frequency::golden(), 20);
    let a = Frequency::golden().value();
    let (k, r) = ls.best(frac(a));
    assert_eq!(k, 1);
    assert!(r < 1e-12);
    let (k, r) = ls.best(0.5);
    let brute = (-20i64..=20).map(|k| (k, dist_to_int(0.5 - k as f64 * a))).min_by(|x, y| x.1.total_cmp(&y.1)).unwrap();
    // 0.5 ± kα tie, so compare |k|
    assert_eq!(k.abs(), brute.0.abs());
    assert!((r - brute.1).abs() < 1e-15);
    assert!(r > 5e-3, "{r}");
}

#[test]
fn synthetic_two_clusters() {
    let mut vals = vec![-1.0; 100];
    vals.extend(vec![1.0; 100]);
    let spec = synthetic_spectrum(SpectrumKind::Jacobi, vals, 4);
    let gaps = detect_gaps(&spec, 0.02, default_density_threshold(&spec));
    assert_eq!(gaps.len(), 1);
    assert_eq!((gaps[0].left, gaps[0].right), (-1.0, 1.0));
}

#[test]
fn synthetic_half_label_fails_verification() {
    let mut vals: Vec<f64> = (0..500).map(|j| -2.0 + 1.5 * j as f64 / 499.0).collect();
    vals.extend((0..500).map(|j| 0.5 + 1.5 * j as f64 / 499.0));
    let spec = synthetic_spectrum(SpectrumKind::Jacobi, vals, 4);
    let report = gap_report(&spec, &LabelSet::new(Frequency::golden(), 20), 0.02, 0.0, 5e-3);
    assert_eq!(report.gaps.len(), 1);
    assert!((report.gaps[0].label_value - 0.5).abs() < 1e-12);
    let (ok, rows) = verify_gap_labelling(&report, 5e-3);
    assert!(!ok);
    assert_eq!(rows.len(), 1);
    let empty = GapReport { gaps: vec![], ..report };
    assert!(verify_gap_labelling(&empty, 5e-3).0);
}

#[test]
fn free_jacobi_has_no_gaps() {
    let f = OperatorFamily::Jacobi(JacobiFamily::free(golden()));
    let (_, r) = family_gap_report(&f, &GapSettings { n: 2000, min_width: 0.05, ..Default::default() }).unwrap();
    assert!(r.gaps.is_empty());
    let c = OperatorFamily::Cmv(CmvFamily::free(golden()));
    let (_, r) = family_gap_report(&c, &GapSettings { n: 512, min_width: 0.05, ..Default::default() }).unwrap();
    assert!(r.gaps.is_empty());
}

#[test]
fn almost_mathieu_gaps_are_labelled_and_stable() {
    let (spec, big) = amo(2000);
    let (_, small) = amo(1000);
    assert!(big.all_labelled);
    assert!(verify_gap_labelling(&big, 5e-3).0);
    for k in [1, -1] {
        let g = big.gaps.iter().find(|g| g.label_index == Some(k)).expect("principal gap");
        assert!(g.label_residual.unwrap() < 5e-3);
        // both truncations see the same gap
        let h = small.gaps.iter().find(|h| h.label_index == Some(k)).unwrap();
        assert!((g.left - h.left).abs() < 1e-2 && (g.right - h.right).abs() < 1e-2);
        // no pooled eigenvalues well inside
        let inside = spec.eigenvalues.iter().filter(|&&e| e > g.left + 1e-2 && e < g.right - 1e-2).count();
        assert!(inside as f64 <= big.density_threshold * spec.eigenvalues.len() as f64);
    }
    for g in &big.gaps {
        let jump = ids(&spec, g.right - 1e-12) - ids(&spec, g.left);
        assert!(jump < 2.0 * big.density_threshold, "{g:?}");
    }
    let a = serde_json::to_string(&big).unwrap();
    let b = serde_json::to_string(&amo(2000).1).unwrap();
    assert_eq!(a, b);
}

#[test]
fn skew_shift_gaps_are_reported() {
    let f = OperatorFamily::Jacobi(JacobiFamily::almost_mathieu(0.5, BaseDynamics::skew_shift(Frequency::golden().value()).unwrap()));
    let (_, r) = family_gap_report(&f, &GapSettings::default()).unwrap();
    assert!(r.gaps.iter().any(|g| g.label_index == Some(1)));
    assert!(r.gaps.iter().all(|g| g.label_residual.is_some()));
}

#[test]
fn cmv_gap_around_zero_wraps() {
    let f = OperatorFamily::Cmv(CmvFamily::polar(0.5, TrigPoly::cos(1, 1.0), golden()).unwrap());
    let (_, r) = family_gap_report(&f, &GapSettings::default()).unwrap();
    assert!(r.all_labelled);
    let wrap = r.gaps.iter().find(|g| g.right > std::f64::consts::TAU).expect("arc across θ = 0");
    assert_eq!(wrap.label_index, Some(0));
    assert!(r.gaps.iter().any(|g| g.label_index == Some(1)));
}

#[test]
fn gap_opens_under_cosine_perturbation() {
    let f = OperatorFamily::Jacobi(JacobiFamily::free(golden()));
    let rows = gap_opening_experiment(&f, &TrigPoly::cos(1, 1.0), 1, &[0.0, 0.1, 0.3], &GapSettings::default()).unwrap();
    assert_eq!(rows[0].width, 0.0);
    assert!(rows[1].width > 0.0 && rows[2].width > rows[1].width, "{rows:?}");
    for r in &rows[1..] {
        assert!(r.residual.unwrap() < 5e-3);
        assert_eq!(r.label_index, Some(1));
    }
    assert!(gap_opening_experiment(&f, &TrigPoly::cos(1, 1.0), 1, &[0.1], &GapSettings::default()).is_err());
}

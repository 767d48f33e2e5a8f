use robustsum::audit::closeness::{norm_view_marginals, real_norm_view, simulated_norm_view};
use robustsum::audit::ks::{one_sample_critical_value, one_sample_statistic};
use robustsum::audit::report::{audit_csv, AUDIT_SCHEMA};
use robustsum::audit::{
    chi2_tail_frequencies, conditioned_projection_privacy, privacy_loss_mc, run_suite, two_sample_closeness,
    SuiteConfig, Verdict,
};
use robustsum::math::stats::chi2_cdf;
use robustsum::math::{c_delta, calibrate, gaussian_sigma, sample_projection, CalibrationRequest};
use robustsum::rng::{gaussian_vec, standard_normal};
use robustsum::{Error, RealVector, Seed};
use std::collections::BTreeSet;

#[test]
fn calibrated_gaussian_mechanism_stays_within_delta() {
    let sigma = gaussian_sigma(1.0, 1e-2, 1.0).unwrap();
    let e = privacy_loss_mc(1.0, sigma, 3, 1.0, 100_000, &Seed::from_u64(1)).unwrap();
    assert!(e.empirical_exceed_rate <= 1e-2 + 3.0 * e.standard_error, "{e:?}");
    assert!(privacy_loss_mc(1.0, sigma, 3, 1.0, 999, &Seed::from_u64(1)).is_err());
}

#[test]
fn doubling_sigma_lowers_the_exceed_rate() {
    let seed = Seed::from_u64(2);
    let a = privacy_loss_mc(1.0, 0.8, 2, 0.5, 50_000, &seed).unwrap();
    let b = privacy_loss_mc(1.0, 1.6, 2, 0.5, 50_000, &seed).unwrap();
    assert!(b.empirical_exceed_rate < a.empirical_exceed_rate);
}

#[test]
fn projection_privacy_at_k64() {
    let p = calibrate(&CalibrationRequest::new(1.0, 1e-2, 0.05, 2, 64, 16)).unwrap().params;
    let x = RealVector::random_with_norm(&mut Seed::from_u64(3).rng(), 16, 1.0);
    let e = conditioned_projection_privacy(&p, &x, 100_000, &Seed::from_u64(4)).unwrap();
    assert!(e.within_target(), "{e:?}");
    let se_bad = (e.bad_event_rate * (1.0 - e.bad_event_rate) / e.samples as f64).sqrt();
    assert!(e.bad_event_rate <= 1e-2 + 3.0 * se_bad);
    let zero = conditioned_projection_privacy(&p, &RealVector::zeros(16), 2000, &Seed::from_u64(5)).unwrap();
    assert_eq!((zero.bad_event_rate, zero.empirical_exceed_rate), (0.0, 0.0));
}

#[test]
fn jl_concentration_over_fresh_matrices() {
    let (k, d) = (64, 512);
    let x = RealVector::random_with_norm(&mut Seed::from_u64(6).rng(), d, 1.0);
    let c2 = c_delta(k, 1e-2).unwrap().powi(2);
    let n = 10_000;
    let mut over = 0u64;
    let mut scaled = Vec::with_capacity(n);
    for t in 0..n {
        let w = sample_projection(k, d, Seed::from_u64(7).derive_indexed("w", t as u64)).unwrap();
        let q = w.apply(&x).unwrap().norm_squared();
        over += u64::from(q > c2);
        scaled.push(k as f64 * q);
    }
    let r = robustsum::audit::RateEstimate::new(over, n as u64);
    assert!(r.at_most(1e-2), "rate {}", r.rate);
    // k·‖Wx‖² ~ χ²_k for unit x
    let ks = one_sample_statistic(&scaled, |q| chi2_cdf(k, q)).unwrap();
    assert!(ks < one_sample_critical_value(n, 1e-3), "KS {ks}");
}

#[test]
fn projection_is_deterministic_and_linear() {
    let a = sample_projection(8, 20, Seed::from_u64(8)).unwrap();
    let b = sample_projection(8, 20, Seed::from_u64(8)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.apply(&RealVector::zeros(20)).unwrap().norm(), 0.0);
}

#[test]
fn chi2_lower_tail_at_k100() {
    let t = chi2_tail_frequencies(100, 3.0, 1_000_000, &Seed::from_u64(9)).unwrap();
    assert!(t.lower.rate <= (-3f64).exp());
    assert!(t.holds());
}

#[test]
fn closeness_detects_a_mean_shift() {
    let normal = |shift: f64| move |s: Seed| Ok(vec![standard_normal(&mut s.rng()) + shift]);
    let same = two_sample_closeness(("p", normal(0.0)), ("q", normal(0.0)), 1, 10_000, &Seed::from_u64(10)).unwrap();
    assert_eq!(same.verdict, Verdict::Consistent);
    assert_eq!(same.max_statistic(), 0.0);
    let shifted = two_sample_closeness(("p", normal(0.0)), ("q", normal(0.5)), 1, 10_000, &Seed::from_u64(10)).unwrap();
    assert_eq!(shifted.verdict, Verdict::Rejected);
}

#[test]
fn closeness_rejects_shape_mismatch() {
    let two = |s: Seed| Ok(gaussian_vec(&mut s.rng(), 2, 1.0));
    let three = |s: Seed| Ok(gaussian_vec(&mut s.rng(), 3, 1.0));
    let r = two_sample_closeness(("p", two), ("q", three), 2, 100, &Seed::from_u64(11));
    assert!(matches!(r, Err(Error::ShapeMismatch(_))));
}

#[test]
fn norm_view_simulation_for_two_of_three() {
    let p = calibrate(&CalibrationRequest::new(1.0, 1e-2, 0.05, 3, 16, 4)).unwrap().params;
    let x = RealVector::new(vec![0.5; 4]).unwrap();
    let t = BTreeSet::from([1, 2]);
    let r = two_sample_closeness(
        ("real", |s| real_norm_view(&x, &t, &p, s)),
        ("simulated", |s| simulated_norm_view(&t, &p, s)),
        norm_view_marginals(&p, 2),
        4000,
        &Seed::from_u64(12),
    )
    .unwrap();
    assert_eq!(r.verdict, Verdict::Consistent, "max KS {} vs {}", r.max_statistic(), r.threshold);
}

#[test]
fn quick_suite_passes_and_exports() {
    let rows = run_suite(&SuiteConfig::quick()).unwrap();
    let failed: Vec<_> = rows.iter().filter(|r| !r.passed()).collect();
    assert!(failed.is_empty(), "{failed:?}");
    let csv = audit_csv(&rows).unwrap();
    assert!(csv.starts_with(&format!("# {AUDIT_SCHEMA}\n")));
    assert_eq!(csv.lines().count(), rows.len() + 2);
}

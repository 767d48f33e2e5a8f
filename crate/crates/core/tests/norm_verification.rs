use std::collections::BTreeSet;

use robustsum::audit::ks::{one_sample_critical_value, one_sample_statistic};
use robustsum::audit::rate::count_parallel;
use robustsum::math::stats::chi2_cdf;
use robustsum::math::{calibrate, sample_projection, CalibrationRequest, ProtocolParams};
use robustsum::norm::{
    project_reply, run_norm_verification, simulate_composed_view, simulate_norm_verification, verifier0_decide,
    WMode,
};
use robustsum::rng::gaussian_vec;
use robustsum::sharing::{share_vector, ShareBundle};
use robustsum::sim::{view_of, MessageKind, PartyId};
use robustsum::{ClientId, Error, RealVector, Seed};

fn params(s: usize, k: usize, d: usize, beta: f64) -> ProtocolParams {
    calibrate(&CalibrationRequest::new(1.0, 1e-2, beta, s, k, d)).unwrap().params
}

fn unit(d: usize, seed: u64) -> RealVector {
    RealVector::random_with_norm(&mut Seed::from_u64(seed).rng(), d, 1.0)
}

fn id() -> ClientId {
    ClientId::new("p")
}

#[test]
fn zero_share_reply_is_pure_noise() {
    let (k, d, sigma) = (4, 8, 3.0);
    let w = sample_projection(k, d, Seed::from_u64(1)).unwrap();
    let z = RealVector::zeros(d);
    let master = Seed::from_u64(2);
    let n = 100_000;
    let mut sum = 0.0;
    let mut sq = 0.0;
    for t in 0..n {
        let r = project_reply(id(), 1, &z, &w, sigma, master.derive_indexed("t", t)).unwrap();
        assert_eq!(r.y.dim(), k);
        sum += r.y.as_slice().iter().sum::<f64>();
        sq += r.y.norm_squared();
    }
    let m = (n * k as u64) as f64;
    let mean = sum / m;
    let var = sq / m - mean * mean;
    assert!(mean.abs() < 4.0 * sigma / m.sqrt());
    assert!((var / (sigma * sigma) - 1.0).abs() < 0.02, "variance {var}");
}

#[test]
fn reply_noise_cancels_under_a_shared_seed() {
    let w = sample_projection(16, 40, Seed::from_u64(3)).unwrap();
    let z = unit(40, 4).scale(5.0);
    let seed = Seed::from_u64(5);
    let y = project_reply(id(), 1, &z, &w, 2.0, seed.clone()).unwrap();
    let y0 = project_reply(id(), 1, &RealVector::zeros(40), &w, 2.0, seed).unwrap();
    let wz = w.apply(&z).unwrap();
    let diff = y.y.sub(&y0.y).unwrap();
    for c in 0..16 {
        assert!((diff[c] - wz[c]).abs() <= 1e-12 * (1.0 + y.y[c].abs()));
    }
}

#[test]
fn reply_rejects_wrong_dimension() {
    let w = sample_projection(4, 8, Seed::from_u64(6)).unwrap();
    let r = project_reply(id(), 1, &RealVector::zeros(7), &w, 1.0, Seed::from_u64(0));
    assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
}

#[test]
fn verifier0_requires_every_reply() {
    let w = sample_projection(4, 8, Seed::from_u64(6)).unwrap();
    let z = RealVector::zeros(8);
    let r1 = project_reply(id(), 1, &z, &w, 1.0, Seed::from_u64(1)).unwrap();
    let got = verifier0_decide(id(), &z, std::slice::from_ref(&r1), &w, 3, 1.0, 10.0, Seed::from_u64(2));
    assert!(matches!(got, Err(Error::MissingReply(2))));
    let dup = verifier0_decide(id(), &z, &[r1.clone(), r1], &w, 3, 1.0, 10.0, Seed::from_u64(2));
    assert!(dup.is_err());
}

#[test]
fn squared_norm_follows_scaled_chi_square() {
    let p = params(2, 64, 128, 0.01);
    let x = unit(128, 7);
    let k = p.proj_dim as f64;
    let scale = x.norm_squared() + k * p.verifiers as f64 * p.sigma_v * p.sigma_v;
    let n = 10_000;
    let master = Seed::from_u64(8);
    let stats: Vec<f64> = (0..n)
        .map(|t| {
            let s = master.derive_indexed("t", t);
            let b = share_vector(id(), &x, 2, p.sigma_ss, s.derive("shares")).unwrap();
            let (o, _) = run_norm_verification(&b, &p, s.derive("session"), WMode::Shared).unwrap();
            k * o.v_norm * o.v_norm / scale
        })
        .collect();
    let ks = one_sample_statistic(&stats, |q| chi2_cdf(64, q)).unwrap();
    assert!(ks < one_sample_critical_value(n as usize, 1e-3), "KS {ks}");
}

#[test]
fn decision_depends_only_on_the_share_sum() {
    let p = params(3, 16, 8, 0.05);
    let x = unit(8, 9).scale(4.0);
    let a = share_vector(id(), &x, 3, p.sigma_ss, Seed::from_u64(10)).unwrap();
    // move mass between shares without changing the sum
    let shift = unit(8, 11).scale(30.0);
    let s = a.shares();
    let b = ShareBundle::new(
        id(),
        vec![s[0].add(&shift).unwrap(), s[1].sub(&shift).unwrap(), s[2].clone()],
    )
    .unwrap();
    let session = Seed::from_u64(12);
    let (oa, _) = run_norm_verification(&a, &p, session.clone(), WMode::Shared).unwrap();
    let (ob, _) = run_norm_verification(&b, &p, session, WMode::Shared).unwrap();
    assert_eq!(oa.accept, ob.accept);
    assert!((oa.v_norm - ob.v_norm).abs() <= 1e-9 * oa.v_norm, "{} vs {}", oa.v_norm, ob.v_norm);
}

#[test]
fn message_schedule_and_determinism() {
    for s in [2, 3, 5] {
        let p = params(s, 16, 8, 0.05);
        let b = share_vector(id(), &unit(8, 13), s, p.sigma_ss, Seed::from_u64(14)).unwrap();
        let (o1, t1) = run_norm_verification(&b, &p, Seed::from_u64(15), WMode::Verifier0).unwrap();
        let (o2, t2) = run_norm_verification(&b, &p, Seed::from_u64(15), WMode::Verifier0).unwrap();
        assert_eq!(t1.len(), s + 3 * (s - 1));
        assert_eq!(t1.count(|m| m.kind == MessageKind::Share), s);
        for kind in [MessageKind::Matrix, MessageKind::Reply, MessageKind::AcceptBit] {
            assert_eq!(t1.count(|m| m.kind == kind), s - 1);
        }
        assert_eq!(o1, o2);
        assert_eq!(t1.to_ndjson(true), t2.to_ndjson(true));
    }
}

#[test]
fn outside_view_has_share_matrix_and_bit() {
    let p = params(2, 16, 8, 0.05);
    let b = share_vector(id(), &unit(8, 16), 2, p.sigma_ss, Seed::from_u64(17)).unwrap();
    let (_, t) = run_norm_verification(&b, &p, Seed::from_u64(18), WMode::Shared).unwrap();
    let view = view_of(&t, &BTreeSet::from([PartyId::Verifier(1)])).unwrap();
    let kinds: Vec<_> = view.iter().map(|m| m.kind).collect();
    assert_eq!(kinds, [MessageKind::Share, MessageKind::Matrix, MessageKind::AcceptBit]);
}

#[test]
fn honest_inputs_accepted_at_calibrated_rate() {
    let p = params(2, 64, 32, 0.01);
    let r = count_parallel(2000, &Seed::from_u64(19), |s| {
        let b = share_vector(id(), &unit(32, 20), 2, p.sigma_ss, s.derive("shares"))?;
        Ok(run_norm_verification(&b, &p, s.derive("session"), WMode::Shared)?.0.accept)
    })
    .unwrap();
    assert!(r.at_least(0.99), "accept rate {}", r.rate);
}

#[test]
fn rho_norm_inputs_rejected_at_calibrated_rate() {
    let p = params(2, 64, 32, 0.01);
    let r = count_parallel(2000, &Seed::from_u64(21), |s| {
        let b = share_vector(id(), &unit(32, 22).scale(p.rho), 2, p.sigma_ss, s.derive("shares"))?;
        Ok(run_norm_verification(&b, &p, s.derive("session"), WMode::Shared)?.0.accept)
    })
    .unwrap();
    assert!(r.at_most(0.01), "accept rate {}", r.rate);
}

fn honest_replier(
    sigma_v: f64,
    seed: Seed,
) -> impl FnMut(usize, &RealVector, &robustsum::math::ProjectionMatrix) -> RealVector {
    let mut rng = seed.rng();
    move |_, g, w| {
        let e = RealVector::new(gaussian_vec(&mut rng, w.rows(), sigma_v)).unwrap();
        w.apply(g).unwrap().add(&e).unwrap()
    }
}

#[test]
fn simulated_v_has_one_noise_term_left() {
    let req = CalibrationRequest::new(1.0, 1e-2, 0.05, 2, 4, 4);
    let p = req.calibrate_completeness_only().unwrap();
    let t = BTreeSet::from([1]);
    let master = Seed::from_u64(23);
    let n = 100_000;
    let mut sq = 0.0;
    for i in 0..n {
        let s = master.derive_indexed("t", i);
        let mut last = None;
        let mut inner = honest_replier(p.sigma_v, s.derive("replies"));
        let replier = |j: usize, g: &RealVector, w: &robustsum::math::ProjectionMatrix| {
            let y = inner(j, g, w);
            last = Some(y.sub(&w.apply(g).unwrap()).unwrap());
            y
        };
        let sim = simulate_norm_verification(id(), &t, &p, replier, s).unwrap();
        let residual = sim.v_sim.sub(&last.unwrap()).unwrap();
        sq += residual.norm_squared();
    }
    let var = sq / (n as f64 * 4.0);
    assert!((var / (p.sigma_v * p.sigma_v) - 1.0).abs() < 0.02, "variance {var}");
}

#[test]
fn simulator_subset_rules() {
    let p = params(3, 16, 4, 0.05);
    let with_zero = BTreeSet::from([0]);
    let r = simulate_norm_verification(id(), &with_zero, &p, honest_replier(1.0, Seed::from_u64(0)), Seed::from_u64(1));
    assert!(matches!(r, Err(Error::InvalidSubset(_))));
    let full = BTreeSet::from([1, 2, 0]);
    assert!(simulate_composed_view(&full, &p, Seed::from_u64(1)).is_err());
    assert!(simulate_composed_view(&BTreeSet::from([1]), &p, Seed::from_u64(1)).is_err());
    let v = simulate_composed_view(&BTreeSet::from([0, 2]), &p, Seed::from_u64(1)).unwrap();
    assert_eq!(v.shares.len(), 2);
    assert_eq!(v.outside_replies.len(), 1);
}

#[test]
fn accept_bit_rates_are_close_between_real_and_simulated_runs() {
    // (ε, δ)-closeness of the accept bit, checked at an inflated δ
    let (eps, delta) = (1.0f64, 0.1);
    let p = params(2, 16, 8, 0.05);
    let x = unit(8, 24);
    let t = BTreeSet::from([1]);
    let n = 10_000;
    let real = count_parallel(n, &Seed::from_u64(25), |s| {
        let b = share_vector(id(), &x, 2, p.sigma_ss, s.derive("shares"))?;
        Ok(run_norm_verification(&b, &p, s.derive("session"), WMode::Shared)?.0.accept)
    })
    .unwrap();
    let sim = count_parallel(n, &Seed::from_u64(26), |s| {
        Ok(simulate_norm_verification(id(), &t, &p, honest_replier(p.sigma_v, s.derive("replies")), s)?.accept)
    })
    .unwrap();
    let slack = 3.0 * (real.standard_error + sim.standard_error);
    for (a, b) in [(real.rate, sim.rate), (1.0 - real.rate, 1.0 - sim.rate)] {
        assert!(a <= eps.exp() * b + delta + slack);
        assert!(b <= eps.exp() * a + delta + slack);
    }
}

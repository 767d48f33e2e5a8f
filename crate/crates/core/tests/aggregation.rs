use robustsum::aggregate::{
    robustness_delta, run_aggregation, validity_check, AggregateResult, AggregationOptions, ClientSubmission,
    MassPattern,
};
use robustsum::audit::rate::{count_parallel, rate_estimate};
use robustsum::math::{calibrate, CalibrationRequest, ProtocolParams};
use robustsum::sim::{run_scenario, ClientGroup, Scenario};
use robustsum::{ClientId, Error, RealVector, Seed};

fn params(n: usize, s: usize, k: usize, d: usize, beta: f64) -> ProtocolParams {
    calibrate(&CalibrationRequest::new(1.0, 1e-2, beta, s, k, d).with_provers(n)).unwrap().params
}

fn inputs(n: usize, d: usize, seed: u64) -> Vec<RealVector> {
    let mut rng = Seed::from_u64(seed).rng();
    (0..n).map(|_| RealVector::random_with_norm(&mut rng, d, 1.0)).collect()
}

fn honest(xs: &[RealVector], p: &ProtocolParams, seed: &Seed) -> Vec<ClientSubmission> {
    xs.iter()
        .enumerate()
        .map(|(j, x)| {
            let id = ClientId::new(format!("h{j}"));
            ClientSubmission::honest(id, x, p, seed.derive_indexed("client", j as u64)).unwrap()
        })
        .collect()
}

fn total(xs: &[RealVector]) -> RealVector {
    xs.iter().fold(RealVector::zeros(xs[0].dim()), |acc, x| acc.add(x).unwrap())
}

#[test]
fn fifty_honest_clients_sum_exactly() {
    let (n, d) = (50, 256);
    let p = params(n, 2, 64, d, 0.01);
    let xs = inputs(n, d, 1);
    let want = total(&xs);
    let full = count_parallel(100, &Seed::from_u64(2), |s| {
        let subs = honest(&xs, &p, &s);
        let (r, _) = run_aggregation(&subs, &p, &AggregationOptions::default(), s)?;
        if r.accepted.len() == n {
            let err = r.sum.as_ref().unwrap().distance(&want)?;
            assert!(err <= 1e-6, "sum error {err}");
        }
        Ok(r.accepted.len() == n)
    })
    .unwrap();
    assert!(full.at_least(1.0 - n as f64 * 0.01), "full acceptance rate {}", full.rate);
}

#[test]
fn partial_send_and_malformed_clients_are_dropped() {
    let (n, d) = (4, 16);
    let p = params(n + 2, 3, 16, d, 0.05);
    let xs = inputs(n, d, 3);
    let seed = Seed::from_u64(4);
    let mut subs = honest(&xs, &p, &seed);
    let y = RealVector::random_with_norm(&mut seed.rng(), d, 1.0);
    for omit in 0..3 {
        let partial = ClientSubmission::partial_send(ClientId::new(format!("ps{omit}")), &y, &p, omit, seed.clone()).unwrap();
        let bad = ClientSubmission::inconsistent_shares(ClientId::new(format!("ic{omit}")), &y, &p, omit, seed.clone()).unwrap();
        let mut all = subs.clone();
        all.push(partial);
        all.push(bad);
        let (r, _) = run_aggregation(&all, &p, &AggregationOptions::default(), seed.clone()).unwrap();
        assert_eq!(r.eligible.len(), n);
        assert!(r.eligible.iter().all(|c| c.as_str().starts_with('h')));
    }
    subs.push(subs[0].clone());
    let dup = run_aggregation(&subs, &p, &AggregationOptions::default(), seed);
    assert!(matches!(dup, Err(Error::DuplicateClientId(_))));
}

fn with_and_without(s: &Scenario, p: &ProtocolParams, seed: Seed) -> (AggregateResult, AggregateResult, f64) {
    let (with, _) = run_scenario(s, p, seed.clone()).unwrap();
    let (without, _) = run_scenario(&s.without_group("adv"), p, seed.clone()).unwrap();
    let adv = s.build_submissions(p, &seed).unwrap().pop().unwrap();
    let nu = RealVector::new(adv.share_sum().unwrap()).unwrap().norm();
    (with, without, nu)
}

#[test]
fn excluded_adversary_leaves_the_sum_unchanged() {
    let s = Scenario::new(2, 32, 64, 1.0, 1e-2, 0.01)
        .with_group(ClientGroup::honest("h", 20))
        .with_group(ClientGroup::norm_inflating("adv", 1, 3.0, MassPattern::Random));
    let p = s.calibrate().unwrap().params;
    let trials = 1000;
    let master = Seed::from_u64(5);
    let mut accepted = 0u64;
    for t in 0..trials {
        let (with, without, _) = with_and_without(&s, &p, master.derive_indexed("t", t));
        let adv = ClientId::new("adv-0");
        if with.is_accepted(&adv) {
            accepted += 1;
        } else {
            assert_eq!(robustness_delta(&with, &without).unwrap(), 0.0);
            assert_eq!(with.sum, without.sum);
        }
    }
    let r = robustsum::audit::RateEstimate::new(accepted, trials);
    assert!(r.at_most(0.01), "adversary acceptance {}", r.rate);
}

#[test]
fn accepted_adversary_shifts_sum_by_its_share_sum() {
    let s = Scenario::new(2, 16, 64, 1.0, 1e-2, 0.05)
        .with_group(ClientGroup::honest("h", 5))
        .with_group(ClientGroup::norm_inflating("adv", 1, 0.2, MassPattern::Spread));
    let p = s.calibrate().unwrap().params;
    let seed = (0..50)
        .map(|t| Seed::from_u64(6).derive_indexed("t", t))
        .find(|sd| run_scenario(&s, &p, sd.clone()).unwrap().0.is_accepted(&ClientId::new("adv-0")))
        .expect("a small adversary is usually accepted");
    let (with, without, nu) = with_and_without(&s, &p, seed);
    let delta = robustness_delta(&with, &without).unwrap();
    assert!((delta - nu).abs() <= 1e-9 * (1.0 + nu), "{delta} vs {nu}");
    assert!(nu <= p.rho);
    assert_eq!(robustness_delta(&with, &with).unwrap(), 0.0);
}

#[test]
fn robustness_delta_rejects_aborted_results() {
    let mut r = AggregateResult {
        sum: None,
        accepted: vec![],
        eligible: vec![],
        aborted: true,
        per_client_outcomes: Default::default(),
    };
    assert!(matches!(robustness_delta(&r, &r), Err(Error::AbortedInput)));
    r.sum = Some(RealVector::zeros(2));
    r.aborted = false;
    let mut other = r.clone();
    other.sum = Some(RealVector::zeros(3));
    assert!(robustness_delta(&r, &other).is_err());
}

#[test]
fn accepted_sums_are_unbiased_after_rescaling() {
    // β large enough that honest clients are rejected with visible frequency
    let (n, d) = (5, 2);
    let p = params(n, 2, 8, d, 0.3);
    let xs = inputs(n, d, 7);
    let want = total(&xs);
    let trials = 10_000;
    let master = Seed::from_u64(8);
    let mut sums = vec![Vec::with_capacity(trials); d];
    let mut accepts = 0usize;
    for t in 0..trials {
        let s = master.derive_indexed("t", t as u64);
        let (r, _) = run_aggregation(&honest(&xs, &p, &s), &p, &AggregationOptions::default(), s).unwrap();
        accepts += r.accepted.len();
        for (c, col) in sums.iter_mut().enumerate() {
            col.push(r.sum.as_ref().unwrap()[c]);
        }
    }
    let rate = accepts as f64 / (n * trials) as f64;
    assert!(rate < 0.999, "acceptance {rate} leaves nothing to rescale");
    for (c, col) in sums.iter().enumerate() {
        let mean = col.iter().sum::<f64>() / trials as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let se = (var / trials as f64).sqrt();
        assert!((mean - rate * want[c]).abs() <= 3.0 * se, "coordinate {c}: {mean} vs {}", rate * want[c]);
    }
}

#[test]
fn validity_check_examples() {
    assert!(validity_check(10, 10, 1.0));
    assert!(validity_check(10, 10, 0.5));
    assert!(!validity_check(4, 10, 0.5));
    assert!(validity_check(5, 10, 0.5));
}

#[test]
fn aggregation_without_threshold_never_aborts() {
    let s = Scenario::new(2, 8, 64, 1.0, 1e-2, 0.05)
        .with_group(ClientGroup::honest("h", 2))
        .with_group(ClientGroup::norm_inflating("adv", 8, 10.0, MassPattern::Spread));
    let p = s.calibrate().unwrap().params;
    let (r, _) = run_scenario(&s, &p, Seed::from_u64(9)).unwrap();
    assert!(!r.aborted && r.sum.is_some());
}

#[test]
fn majority_of_malicious_clients_forces_abort() {
    let mut s = Scenario::new(3, 8, 64, 1.0, 1e-2, 0.05)
        .with_group(ClientGroup::honest("h", 4))
        .with_group(ClientGroup::norm_inflating("adv", 6, 10.0, MassPattern::Spread));
    s.validity_threshold = Some(0.5);
    let p = s.calibrate().unwrap().params;
    let (r, _) = run_scenario(&s, &p, Seed::from_u64(10)).unwrap();
    assert!(r.aborted && r.sum.is_none());
}

#[test]
fn a_few_malicious_clients_rarely_abort() {
    let (n, beta) = (20, 0.01);
    let mut s = Scenario::new(2, 16, 64, 1.0, 1e-2, beta)
        .with_group(ClientGroup::honest("h", 15))
        .with_group(ClientGroup::norm_inflating("adv", 5, 10.0, MassPattern::Random));
    s.validity_threshold = Some(0.5);
    let p = s.calibrate().unwrap().params;
    let r = rate_estimate(&s, &p, |r| r.aborted, 500, &Seed::from_u64(11)).unwrap();
    assert!(r.at_most(beta * n as f64), "abort rate {}", r.rate);
}

#[test]
fn output_noise_only_perturbs_the_sum() {
    let mut s = Scenario::new(2, 8, 64, 1.0, 1e-2, 0.05).with_group(ClientGroup::honest("h", 3));
    let p = s.calibrate().unwrap().params;
    let (plain, _) = run_scenario(&s, &p, Seed::from_u64(12)).unwrap();
    s.output_noise = Some(0.5);
    let (noisy, _) = run_scenario(&s, &p, Seed::from_u64(12)).unwrap();
    assert_eq!(plain.accepted, noisy.accepted);
    assert_ne!(plain.sum, noisy.sum);
}

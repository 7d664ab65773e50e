mod support;

use std::sync::{Arc, OnceLock};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqlab::oracle::*;
use sqlab::pconcept::{FiniteDistribution, Label, Measurement, MeasurementDistribution, QuantumState};
use sqlab::stabilizer::enumerate_stabilizer_groups;
use sqlab::{PauliOperator, StabilizerGroup};

fn random_group(n: usize, r: &mut ChaCha8Rng) -> StabilizerGroup {
    static CACHE: [OnceLock<Vec<StabilizerGroup>>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let all = CACHE[n - 1].get_or_init(|| enumerate_stabilizer_groups(n).unwrap());
    all[r.gen_range(0..all.len())].clone()
}

/// A bounded query `cos(a·h(E) + b·Y)` with `h` a hash of the measurement.
fn wiggly(seed: u64) -> Arc<FnQuery> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let (a, b, c): (f64, f64, f64) = (r.gen_range(0.1..3.0), r.gen_range(-2.0..2.0), r.gen_range(0.0..1.0));
    Arc::new(FnQuery::new("wiggly", move |e, y| {
        let h = sqlab::rng::label_hash(&format!("{e:?}")) as f64 / u64::MAX as f64;
        c * (a * 7.0 * h + b * y.value()).cos()
    }))
}

/// Noisy expectation from dense density matrices and explicit label
/// probabilities, enumerating a finite distribution.
fn brute_noisy(rho: &QuantumState, d: &MeasurementDistribution, noise: &NoiseModel, q: &dyn Query) -> f64 {
    let dense = support::state(rho);
    let mut total = 0.0;
    let mut clean = 0.0;
    for (e, w) in d.support().unwrap() {
        let w = sqlab::exact::to_f64(&w);
        let Measurement::Pauli { pauli } = &e else { panic!() };
        let p = support::pauli_acceptance(pauli, &dense);
        let phi = |p: f64| p * q.eval(&e, Label::Plus) + (1.0 - p) * q.eval(&e, Label::Minus);
        clean += w * phi(p);
        total += w * match noise {
            NoiseModel::None | NoiseModel::Malicious { .. } => phi(p),
            NoiseModel::Classification { eta } => phi(p * (1.0 - eta) + (1.0 - p) * eta),
            NoiseModel::Depolarizing { eta }
            | NoiseModel::BoundedChannel { channel: Channel::Depolarizing { rate: eta }, .. } => {
                phi(support::pauli_acceptance(pauli, &support::depolarize(&dense, *eta)))
            }
        };
    }
    match noise {
        NoiseModel::Malicious { eta, corruption } => {
            let q_mean = match corruption {
                Corruption::UniformLabels => {
                    let mut s = 0.0;
                    for (e, w) in d.support().unwrap() {
                        s += sqlab::exact::to_f64(&w) * (q.eval(&e, Label::Plus) + q.eval(&e, Label::Minus)) / 2.0;
                    }
                    s
                }
                Corruption::Finite { items } => items.iter().map(|(e, y, w)| w * q.eval(e, *y)).sum(),
            };
            (1.0 - eta) * clean + eta * q_mean
        }
        _ => total,
    }
}

fn noise_models(n: usize) -> Vec<NoiseModel> {
    let q_item = Measurement::pauli(PauliOperator::single(n, 0, 'X').unwrap());
    vec![
        NoiseModel::None,
        NoiseModel::Classification { eta: 0.3 },
        NoiseModel::Depolarizing { eta: 0.6 },
        NoiseModel::BoundedChannel { eta: 0.1, channel: Channel::Depolarizing { rate: 0.05 } },
        NoiseModel::Malicious { eta: 0.2, corruption: Corruption::UniformLabels },
        NoiseModel::Malicious {
            eta: 0.2,
            corruption: Corruption::Finite { items: vec![(q_item.clone(), Label::Minus, 0.7), (q_item, Label::Plus, 0.3)] },
        },
    ]
}

fn finite_distribution(n: usize, r: &mut ChaCha8Rng) -> MeasurementDistribution {
    let items: Vec<(Measurement, f64)> = (0..6)
        .map(|_| (Measurement::pauli(PauliOperator::from_index(n, r.gen_range(0..1 << (2 * n)), r.gen())), 1.0 / 6.0))
        .collect();
    MeasurementDistribution::Finite(FiniteDistribution::from_weights(items).unwrap())
}

fn policies(seed: u64) -> Vec<ResponsePolicy> {
    vec![
        ResponsePolicy::Exact,
        ResponsePolicy::RandomWithinTau { seed },
        ResponsePolicy::adversarial(),
        ResponsePolicy::EmpiricalFromSamples { samples: None, delta: 1e-7, seed },
    ]
}

#[test]
fn soundness_across_policies_and_noise() {
    let mut r = ChaCha8Rng::seed_from_u64(11);
    for n in 1..=3usize {
        let rho = QuantumState::stabilizer(random_group(n, &mut r));
        let dists = if n <= 2 {
            vec![MeasurementDistribution::UniformPauli { n }, finite_distribution(n, &mut r)]
        } else {
            vec![finite_distribution(n, &mut r)]
        };
        for d in &dists {
            for noise in noise_models(n) {
                for (k, policy) in policies(r.gen()).into_iter().enumerate() {
                    let exact = matches!(policy, ResponsePolicy::Exact);
                    let mut o = SqOracle::new(rho.clone(), d.clone(), OracleConfig::new(policy, noise.clone())).unwrap();
                    for s in 0..3u64 {
                        let q = wiggly(r.gen::<u64>() ^ s);
                        let truth = brute_noisy(&rho, d, &noise, q.as_ref());
                        let tau = 0.15;
                        let y = o.query(&SqQuery::new(q, tau).unwrap()).unwrap();
                        if exact {
                            assert!((y - truth).abs() < 1e-12, "{noise:?}: {y} vs {truth}");
                        } else {
                            assert!((y - truth).abs() <= tau * (1.0 + 1e-12), "policy {k}, {noise:?}: {y} vs {truth}");
                        }
                    }
                    assert_eq!(o.queries(), 3);
                }
            }
        }
    }
}

#[test]
fn counter_is_exact_and_monotone() {
    let n = 1;
    let rho = QuantumState::basis(&sqlab::BitString::zeros(n));
    let mut o = SqOracle::new(rho, MeasurementDistribution::UniformPauli { n }, OracleConfig::exact()).unwrap();
    let mut last = o.queries();
    for k in 0..10 {
        o.query(&SqQuery::new(wiggly(k), 0.1).unwrap()).unwrap();
        assert_eq!(o.queries(), last + 1);
        last = o.queries();
    }
    assert_eq!(o.transcript().iter().map(|t| t.index).collect::<Vec<_>>(), (0..10).collect::<Vec<_>>());
}

fn clean_oracle(rho: &QuantumState, d: &MeasurementDistribution) -> SqOracle {
    SqOracle::new(rho.clone(), d.clone(), OracleConfig::exact()).unwrap()
}

#[test]
fn classification_round_trip() {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    for eta in [0.1, 0.25, 0.4] {
        for n in 1..=2 {
            let rho = QuantumState::stabilizer(random_group(n, &mut r));
            let d = MeasurementDistribution::UniformPauli { n };
            let clean = clean_oracle(&rho, &d);
            for policy in [ResponsePolicy::RandomWithinTau { seed: r.gen() }, ResponsePolicy::adversarial()] {
                let inner = SqOracle::new(rho.clone(), d.clone(), OracleConfig::new(policy, NoiseModel::Classification { eta })).unwrap();
                let mut w = ClassificationCorrecting::new(inner, eta).unwrap();
                for s in 0..5 {
                    let q = wiggly(r.gen::<u64>() + s);
                    let truth = clean.clean_expectation(q.as_ref()).unwrap();
                    let tau = 0.05;
                    let y = w.query(&SqQuery::new(q, tau).unwrap()).unwrap();
                    assert!((y - truth).abs() <= tau, "η = {eta}: {y} vs {truth}");
                }
                assert_eq!(w.queries(), 5);
                assert_eq!(w.inner.queries(), 10);
            }
        }
    }
}

#[test]
fn label_free_queries_ignore_classification_noise() {
    let rho = QuantumState::basis(&sqlab::BitString::zeros(2));
    let d = MeasurementDistribution::UniformPauli { n: 2 };
    let q: Arc<dyn Query> = Arc::new(LabelFree(wiggly(3)));
    let base = clean_oracle(&rho, &d).clean_expectation(q.as_ref()).unwrap();
    let mut o = SqOracle::new(rho, d, OracleConfig::new(ResponsePolicy::Exact, NoiseModel::Classification { eta: 0.45 })).unwrap();
    assert!((o.query(&SqQuery::new(q, 0.1).unwrap()).unwrap() - base).abs() < 1e-15);
}

#[test]
fn depolarizing_round_trip() {
    let mut r = ChaCha8Rng::seed_from_u64(6);
    for eta in [0.1, 0.5, 0.9] {
        for n in 1..=2 {
            let rho = QuantumState::stabilizer(random_group(n, &mut r));
            let d = MeasurementDistribution::UniformPauli { n };
            let clean = clean_oracle(&rho, &d);
            let baselines = [
                MixedBaseline::Exact,
                MixedBaseline::Sampled { samples: None, delta: 1e-5, seed: r.gen() },
            ];
            for baseline in baselines {
                let inner = SqOracle::new(
                    rho.clone(),
                    d.clone(),
                    OracleConfig::new(ResponsePolicy::adversarial(), NoiseModel::Depolarizing { eta }),
                )
                .unwrap();
                let mut w = DepolarizingCorrecting::new(inner, eta, baseline).unwrap();
                for s in 0..4 {
                    let q = wiggly(r.gen::<u64>() + s);
                    let truth = clean.clean_expectation(q.as_ref()).unwrap();
                    let tau = 0.2;
                    let y = w.query(&SqQuery::new(q, tau).unwrap()).unwrap();
                    assert!((y - truth).abs() <= tau * (1.0 + 1e-9), "η = {eta}, {baseline:?}: {y} vs {truth}");
                }
            }
        }
    }
}

#[test]
fn maximally_mixed_is_a_fixed_point() {
    let n = 2;
    let rho = QuantumState::maximally_mixed(n);
    let d = MeasurementDistribution::UniformPauli { n };
    let clean = clean_oracle(&rho, &d);
    let noisy = SqOracle::new(rho, d, OracleConfig::new(ResponsePolicy::Exact, NoiseModel::Depolarizing { eta: 0.7 })).unwrap();
    for s in 0..10 {
        let q = wiggly(s);
        let a = clean.clean_expectation(q.as_ref()).unwrap();
        let b = noisy.noisy_expectation(q.as_ref()).unwrap();
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn malicious_shift_is_bounded() {
    let mut r = ChaCha8Rng::seed_from_u64(7);
    for n in 1..=2 {
        let rho = QuantumState::stabilizer(random_group(n, &mut r));
        let d = MeasurementDistribution::UniformPauli { n };
        for noise in noise_models(n).into_iter().filter(|m| matches!(m, NoiseModel::Malicious { .. })) {
            let eta = noise.eta();
            let o = SqOracle::new(rho.clone(), d.clone(), OracleConfig::new(ResponsePolicy::Exact, noise.clone())).unwrap();
            for s in 0..20 {
                let q = wiggly(r.gen::<u64>() + s);
                let shift = (o.noisy_expectation(q.as_ref()).unwrap() - o.clean_expectation(q.as_ref()).unwrap()).abs();
                assert!(shift <= 2.0 * eta + 1e-15);
                if matches!(noise, NoiseModel::Malicious { corruption: Corruption::UniformLabels, .. }) {
                    assert!(shift <= eta + 1e-15);
                }
            }
        }
    }
}

#[test]
fn malicious_wrapper_tightens_tolerance() {
    let n = 2;
    let rho = QuantumState::basis(&sqlab::BitString::zeros(n));
    let d = MeasurementDistribution::UniformPauli { n };
    let clean = clean_oracle(&rho, &d);
    let eta = 0.03;
    let inner = SqOracle::new(
        rho.clone(),
        d.clone(),
        OracleConfig::new(ResponsePolicy::adversarial(), NoiseModel::Malicious { eta, corruption: Corruption::UniformLabels }),
    )
    .unwrap();
    let mut w = MaliciousAbsorbing::new(inner, eta);
    for s in 0..10 {
        let q = wiggly(s);
        let truth = clean.clean_expectation(q.as_ref()).unwrap();
        let y = w.query(&SqQuery::new(q, 0.1).unwrap()).unwrap();
        assert!((y - truth).abs() <= 0.1 + 1e-12);
    }
    assert!(w.query(&SqQuery::new(wiggly(0), 0.02).unwrap()).is_err());
}

#[test]
fn bounded_channel_wrapper() {
    let n = 2;
    let mut r = ChaCha8Rng::seed_from_u64(8);
    let rho = QuantumState::stabilizer(random_group(n, &mut r));
    let d = MeasurementDistribution::UniformPauli { n };
    let clean = clean_oracle(&rho, &d);
    let rate = 0.01;
    let eta_diamond = 2.0 * rate;
    let inner = SqOracle::new(
        rho,
        d,
        OracleConfig::new(
            ResponsePolicy::adversarial(),
            NoiseModel::BoundedChannel { eta: eta_diamond, channel: Channel::Depolarizing { rate } },
        ),
    )
    .unwrap();
    let mut w = BoundedChannelAbsorbing::new(inner, eta_diamond);
    for s in 0..10 {
        let q = wiggly(s);
        let truth = clean.clean_expectation(q.as_ref()).unwrap();
        let y = w.query(&SqQuery::new(q, 0.1).unwrap()).unwrap();
        assert!((y - truth).abs() <= 0.1 + 1e-12);
    }
    assert!(w.inner.transcript().iter().all(|t| (t.tau - 0.06).abs() < 1e-15));
}

#[test]
fn adjoint_identity_against_dense() {
    let mut r = ChaCha8Rng::seed_from_u64(9);
    for n in 1..=2 {
        for _ in 0..10 {
            let rho = QuantumState::stabilizer(random_group(n, &mut r));
            let dense = support::state(&rho);
            let eta: f64 = r.gen();
            let noisy = support::depolarize(&dense, eta);
            for p in sqlab::pauli::all_signed_paulis(n) {
                let e = Measurement::pauli(p.clone());
                let lhs = adjoint_measurement(&e, &Channel::Depolarizing { rate: eta }).unwrap().acceptance(&rho).unwrap();
                let rhs = support::pauli_acceptance(&p, &noisy);
                assert!((lhs - rhs).abs() < 1e-12);
                let weights: f64 = adjoint_measurement(&e, &Channel::Depolarizing { rate: eta })
                    .unwrap()
                    .components
                    .iter()
                    .map(|c| c.1)
                    .sum();
                assert!((weights - 1.0).abs() < 1e-15);
            }
        }
    }
}

proptest! {
    #[test]
    fn correction_inverts_noise(clean in -1.0f64..1.0, a in -1.0f64..1.0, eta in 0.0f64..0.49) {
        let noisy = a + (1.0 - 2.0 * eta) * (clean - a);
        prop_assert!((correct_classification(noisy, a, eta).unwrap() - clean).abs() < 1e-9);
    }

    #[test]
    fn depolarizing_inverts_noise(clean in -1.0f64..1.0, mixed in -1.0f64..1.0, eta in 0.0f64..0.99) {
        let noisy = (1.0 - eta) * clean + eta * mixed;
        prop_assert!((correct_depolarizing(noisy, mixed, eta).unwrap() - clean).abs() < 1e-9);
    }
}

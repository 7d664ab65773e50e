//! A simulated statistical-query oracle for an unknown state.
//!
//! A query is a bounded function `φ(E, Y)` of a measurement and its `±1`
//! outcome. Every query splits as `φ(E, Y) = a(E) + Y·b(E)` with
//! `a = (φ(E,+1) + φ(E,-1))/2` and `b = (φ(E,+1) - φ(E,-1))/2`, so the
//! expectation against a state `σ` is `E_D[a] + E_D[b·f_σ]`. The noise models
//! only change which state (or label mean) is paired with `b`, and the oracle
//! evaluates them from these three moments.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::exact;
use crate::pconcept::{
    f_value_f64, label_with_mean, Axis, Label, Measurement, MeasurementDistribution, QuantumState,
};
use crate::rng::{self, Rng};

/// Number of random points probed to check `|φ| ≤ 1` before a query runs.
pub const PROBES: usize = 64;

const BOUND_SLACK: f64 = 1e-12;

/// Expectations of the label split of a query against a distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    /// `E_D[a(E)]`
    pub label_free: f64,
    /// `E_D[b(E)]`
    pub label_mean: f64,
    /// `E_D[b(E)·f_σ(E)]`
    pub label_coupled: f64,
}

pub trait Query: Send + Sync {
    fn eval(&self, e: &Measurement, y: Label) -> f64;

    /// Closed-form moments against `σ`, for distributions the oracle cannot
    /// enumerate.
    fn moments(&self, _d: &MeasurementDistribution, _sigma: &QuantumState) -> Option<Result<Moments>> {
        None
    }

    fn describe(&self) -> String {
        "query".into()
    }

    /// True when `|φ| ≤ 1` holds by construction, so probing can be skipped.
    fn bounded_by_construction(&self) -> bool {
        false
    }
}

/// A query backed by a closure.
type QueryFn = dyn Fn(&Measurement, Label) -> f64 + Send + Sync;

#[derive(Clone)]
pub struct FnQuery {
    name: String,
    f: Arc<QueryFn>,
}

impl FnQuery {
    pub fn new(name: impl Into<String>, f: impl Fn(&Measurement, Label) -> f64 + Send + Sync + 'static) -> Self {
        FnQuery {
            name: name.into(),
            f: Arc::new(f),
        }
    }
}

impl Query for FnQuery {
    fn eval(&self, e: &Measurement, y: Label) -> f64 {
        (self.f)(e, y)
    }

    fn describe(&self) -> String {
        self.name.clone()
    }
}

/// `φ(E, Y) = Y`, the bias of the outcome.
pub struct LabelQuery;

impl Query for LabelQuery {
    fn eval(&self, _e: &Measurement, y: Label) -> f64 {
        y.value()
    }

    fn describe(&self) -> String {
        "Y".into()
    }

    fn bounded_by_construction(&self) -> bool {
        true
    }
}

/// The label-free part `a(E) = (φ(E,+1) + φ(E,-1))/2` of another query.
pub struct LabelFree(pub Arc<dyn Query>);

impl Query for LabelFree {
    fn eval(&self, e: &Measurement, _y: Label) -> f64 {
        (self.0.eval(e, Label::Plus) + self.0.eval(e, Label::Minus)) / 2.0
    }

    fn moments(&self, d: &MeasurementDistribution, sigma: &QuantumState) -> Option<Result<Moments>> {
        self.0.moments(d, sigma).map(|m| {
            m.map(|m| Moments {
                label_free: m.label_free,
                label_mean: 0.0,
                label_coupled: 0.0,
            })
        })
    }

    fn describe(&self) -> String {
        format!("labelfree({})", self.0.describe())
    }

    fn bounded_by_construction(&self) -> bool {
        self.0.bounded_by_construction()
    }
}

/// `φ_{i,j}(E, Y) = sgn(2^{1-n} tr(E·(I ⊗ (I+P_j)/2 ⊗ I)) - 1/2)·Y` with `P_j`
/// acting on qubit `i`.
///
/// On a projector `(I + u·σ)/2` on qubit `i` this is `sgn(u_j)·Y`; on a
/// projector on any other qubit the trace term is exactly `1/2` and the
/// query vanishes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlochAxisQuery {
    pub n: usize,
    pub qubit: usize,
    pub axis: Axis,
}

impl BlochAxisQuery {
    fn sign(&self, e: &Measurement) -> f64 {
        match e {
            Measurement::Projector {
                qubit, direction, ..
            } => {
                if *qubit == self.qubit {
                    sgn(direction.component(self.axis))
                } else {
                    0.0
                }
            }
            Measurement::Pauli { pauli } => {
                // 2^{1-n} tr((I+P)/2 · (I+Q)/2) - 1/2 = (t(P) + t(PQ))/2
                // where t is the normalized trace and Q = P_j on the qubit.
                let mut t = pauli.normalized_trace() as f64;
                let single = pauli.weight() == 1 && pauli.letter(self.qubit) == self.axis.letter();
                if single {
                    t += pauli.sign() as f64;
                }
                sgn(t)
            }
        }
    }
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl Query for BlochAxisQuery {
    fn eval(&self, e: &Measurement, y: Label) -> f64 {
        self.sign(e) * y.value()
    }

    fn moments(&self, d: &MeasurementDistribution, sigma: &QuantumState) -> Option<Result<Moments>> {
        match d {
            // E_u[sgn(u_j)·u·s] = s_j·E|u_j| = s_j/2 for u uniform on the
            // sphere, and the qubit is hit with probability 1/n.
            MeasurementDistribution::HaarSingleQubitProduct { n } => Some((|| {
                check_dims(*n, self.n)?;
                let s = sigma.marginal_bloch(self.qubit)?;
                Ok(Moments {
                    label_free: 0.0,
                    label_mean: 0.0,
                    label_coupled: s.component(self.axis) / (2.0 * *n as f64),
                })
            })()),
            _ => None,
        }
    }

    fn describe(&self) -> String {
        format!("bloch[{}].{}", self.qubit, self.axis.letter())
    }

    fn bounded_by_construction(&self) -> bool {
        true
    }
}

/// A query with its tolerance.
#[derive(Clone)]
pub struct SqQuery {
    pub query: Arc<dyn Query>,
    pub tau: f64,
}

impl SqQuery {
    pub fn new(query: Arc<dyn Query>, tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidQuery(format!("tolerance must be positive, got {tau}")));
        }
        Ok(SqQuery { query, tau })
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        SqQuery::new(self.query.clone(), tau)
    }
}

impl fmt::Debug for SqQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SqQuery({}, tau={})", self.query.describe(), self.tau)
    }
}

/// Corruption distribution `Q` for malicious noise.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Corruption {
    /// `E ~ D` with a uniformly random label.
    #[default]
    UniformLabels,
    Finite { items: Vec<(Measurement, Label, f64)> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Channel {
    Depolarizing { rate: f64 },
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    #[default]
    None,
    Classification { eta: f64 },
    Malicious {
        eta: f64,
        #[serde(default)]
        corruption: Corruption,
    },
    Depolarizing { eta: f64 },
    /// A channel declared to lie within diamond distance `eta` of the identity.
    BoundedChannel { eta: f64, channel: Channel },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidNoise(m));
        match self {
            NoiseModel::None => Ok(()),
            NoiseModel::Classification { eta } if !(0.0..0.5).contains(eta) => {
                bad(format!("classification rate {eta} not in [0, 1/2)"))
            }
            NoiseModel::Depolarizing { eta } if !(0.0..1.0).contains(eta) => {
                bad(format!("depolarizing rate {eta} not in [0, 1)"))
            }
            NoiseModel::Malicious { eta, corruption } => {
                if !(0.0..1.0).contains(eta) {
                    return bad(format!("malicious rate {eta} not in [0, 1)"));
                }
                if let Corruption::Finite { items } = corruption {
                    let total: f64 = items.iter().map(|i| i.2).sum();
                    if items.is_empty() || items.iter().any(|i| i.2 < 0.0) || (total - 1.0).abs() > 1e-9 {
                        return bad("corruption weights must be non-negative and sum to 1".into());
                    }
                }
                Ok(())
            }
            NoiseModel::BoundedChannel { eta, channel } => {
                let Channel::Depolarizing { rate } = channel;
                if !(0.0..1.0).contains(rate) {
                    return bad(format!("depolarizing rate {rate} not in [0, 1)"));
                }
                // ‖Λ_p - 1‖_◇ ≤ 2p, declared conservatively.
                if eta.is_nan() || *eta < 2.0 * rate {
                    return bad(format!("declared diamond bound {eta} is below 2·rate = {}", 2.0 * rate));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eta(&self) -> f64 {
        match self {
            NoiseModel::None => 0.0,
            NoiseModel::Classification { eta }
            | NoiseModel::Malicious { eta, .. }
            | NoiseModel::Depolarizing { eta }
            | NoiseModel::BoundedChannel { eta, .. } => *eta,
        }
    }

    /// Depolarizing rate applied to the state, if any.
    fn state_rate(&self) -> f64 {
        match self {
            NoiseModel::Depolarizing { eta } => *eta,
            NoiseModel::BoundedChannel {
                channel: Channel::Depolarizing { rate },
                ..
            } => *rate,
            _ => 0.0,
        }
    }
}

/// Chooses an answer inside `[truth - tau, truth + tau]`.
pub trait Adversary: Send {
    fn respond(&mut self, truth: f64, tau: f64) -> f64;
}

/// Pushes each answer to the edge of the band, on the side opposite to the
/// previous deviation.
#[derive(Clone, Debug, Default)]
pub struct OpposingAdversary {
    last_positive: bool,
}

impl Adversary for OpposingAdversary {
    fn respond(&mut self, truth: f64, tau: f64) -> f64 {
        self.last_positive = !self.last_positive;
        if self.last_positive {
            truth + tau
        } else {
            truth - tau
        }
    }
}

/// Replays a fixed list of offsets, in units of `tau`, cycling when exhausted.
#[derive(Clone, Debug)]
pub struct ScriptedAdversary {
    offsets: Vec<f64>,
    next: usize,
}

impl ScriptedAdversary {
    pub fn new(offsets: Vec<f64>) -> Self {
        assert!(!offsets.is_empty(), "scripted adversary needs at least one offset");
        ScriptedAdversary { offsets, next: 0 }
    }
}

impl Adversary for ScriptedAdversary {
    fn respond(&mut self, truth: f64, tau: f64) -> f64 {
        let o = self.offsets[self.next % self.offsets.len()];
        self.next += 1;
        truth + o * tau
    }
}

pub enum ResponsePolicy {
    /// The noisy expectation itself.
    Exact,
    /// The noisy expectation plus uniform noise in `[-τ, τ]`.
    RandomWithinTau { seed: u64 },
    /// Answers chosen by an adversary; out-of-band answers are rejected.
    Adversarial(Box<dyn Adversary>),
    /// The empirical mean of `φ` over freshly drawn noisy examples. With
    /// `samples = None` the count is `ceil(2 ln(2/δ)/τ²)`.
    EmpiricalFromSamples {
        samples: Option<usize>,
        delta: f64,
        seed: u64,
    },
}

impl ResponsePolicy {
    pub fn adversarial() -> Self {
        ResponsePolicy::Adversarial(Box::new(OpposingAdversary::default()))
    }
}

impl fmt::Debug for ResponsePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResponsePolicy::Exact => write!(f, "Exact"),
            ResponsePolicy::RandomWithinTau { seed } => write!(f, "RandomWithinTau({seed})"),
            ResponsePolicy::Adversarial(_) => write!(f, "Adversarial"),
            ResponsePolicy::EmpiricalFromSamples {
                samples,
                delta,
                seed,
            } => write!(f, "EmpiricalFromSamples({samples:?}, {delta}, {seed})"),
        }
    }
}

/// Hoeffding sample size for a `[-1, 1]`-valued query at tolerance `tau`
/// with failure probability `delta`.
pub fn hoeffding_samples(tau: f64, delta: f64) -> usize {
    (2.0 * (2.0 / delta).ln() / (tau * tau)).ceil() as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonteCarloFallback {
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug)]
pub struct OracleConfig {
    pub policy: ResponsePolicy,
    pub noise: NoiseModel,
    /// Lets the exact policy estimate moments by sampling when they have no
    /// closed form. Off by default.
    pub monte_carlo_fallback: Option<MonteCarloFallback>,
}

impl OracleConfig {
    pub fn new(policy: ResponsePolicy, noise: NoiseModel) -> Self {
        OracleConfig {
            policy,
            noise,
            monte_carlo_fallback: None,
        }
    }

    pub fn exact() -> Self {
        Self::new(ResponsePolicy::Exact, NoiseModel::None)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub index: u64,
    pub tau: f64,
    pub answer: f64,
}

/// Anything that answers statistical queries.
pub trait StatOracle {
    fn query(&mut self, q: &SqQuery) -> Result<f64>;
    /// Number of queries answered so far.
    fn queries(&self) -> u64;
    fn distribution(&self) -> &MeasurementDistribution;
    fn transcript(&self) -> &[TranscriptEntry];

    fn n(&self) -> usize {
        self.distribution().n()
    }
}

pub fn write_transcript_jsonl<W: Write>(entries: &[TranscriptEntry], mut w: W) -> std::io::Result<()> {
    for e in entries {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// The oracle for a fixed state, distribution and configuration. Queries are
/// answered one at a time.
pub struct SqOracle {
    rho: QuantumState,
    dist: MeasurementDistribution,
    config: OracleConfig,
    mixed: QuantumState,
    count: u64,
    transcript: Vec<TranscriptEntry>,
    rng: Option<Rng>,
}

impl fmt::Debug for SqOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SqOracle")
            .field("n", &self.rho.n())
            .field("config", &self.config)
            .field("count", &self.count)
            .finish()
    }
}

impl SqOracle {
    pub fn new(rho: QuantumState, dist: MeasurementDistribution, config: OracleConfig) -> Result<Self> {
        check_dims(rho.n(), dist.n())?;
        config.noise.validate()?;
        let rng = match &config.policy {
            ResponsePolicy::RandomWithinTau { seed } | ResponsePolicy::EmpiricalFromSamples { seed, .. } => {
                Some(rng::substream(*seed, 0))
            }
            _ => None,
        };
        if let ResponsePolicy::EmpiricalFromSamples { delta, .. } = &config.policy {
            if !(*delta > 0.0 && *delta < 1.0) {
                return Err(Error::InvalidParameter(format!("confidence δ = {delta} not in (0, 1)")));
            }
        }
        let n = rho.n();
        Ok(SqOracle {
            rho,
            dist,
            config,
            mixed: QuantumState::maximally_mixed(n),
            count: 0,
            transcript: Vec::new(),
            rng,
        })
    }

    pub fn state(&self) -> &QuantumState {
        &self.rho
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.config.noise
    }

    fn probe(&self, q: &dyn Query) -> Result<()> {
        if q.bounded_by_construction() {
            return Ok(());
        }
        let mut r = rng::substream(rng::derive_seed(0, "probe", self.count), 0);
        for _ in 0..PROBES {
            let e = self.dist.sample(&mut r);
            for y in [Label::Plus, Label::Minus] {
                let v = q.eval(&e, y);
                if v.is_nan() || v.abs() > 1.0 + BOUND_SLACK {
                    return Err(Error::UnboundedQuery { value: v });
                }
            }
        }
        Ok(())
    }

    /// `(E[a], E[b f_ρ], E[b f_mix])`.
    fn split(&self, q: &dyn Query) -> Result<(f64, f64, f64)> {
        if let (Some(r), Some(m)) = (q.moments(&self.dist, &self.rho), q.moments(&self.dist, &self.mixed)) {
            let (r, m) = (r?, m?);
            return Ok((r.label_free, r.label_coupled, m.label_coupled));
        }
        match self.dist.support() {
            Ok(support) => {
                let (mut a, mut br, mut bm) = (0.0, 0.0, 0.0);
                for (e, w) in &support {
                    let w = exact::to_f64(w);
                    let (p, m) = (q.eval(e, Label::Plus), q.eval(e, Label::Minus));
                    check_bound(p)?;
                    check_bound(m)?;
                    let (av, bv) = ((p + m) / 2.0, (p - m) / 2.0);
                    a += w * av;
                    br += w * bv * f_value_f64(&self.rho, e)?;
                    bm += w * bv * f_value_f64(&self.mixed, e)?;
                }
                Ok((a, br, bm))
            }
            Err(err) => {
                let Some(mc) = self.config.monte_carlo_fallback else {
                    return Err(Error::ExactUnavailable(format!(
                        "{} has no closed form under this distribution ({err}); enable the Monte Carlo fallback",
                        q.describe()
                    )));
                };
                let mut r = rng::substream(mc.seed, self.count);
                let (mut a, mut br, mut bm) = (0.0, 0.0, 0.0);
                for _ in 0..mc.samples {
                    let e = self.dist.sample(&mut r);
                    let (p, m) = (q.eval(&e, Label::Plus), q.eval(&e, Label::Minus));
                    check_bound(p)?;
                    check_bound(m)?;
                    let bv = (p - m) / 2.0;
                    a += (p + m) / 2.0;
                    br += bv * f_value_f64(&self.rho, &e)?;
                    bm += bv * f_value_f64(&self.mixed, &e)?;
                }
                let s = mc.samples.max(1) as f64;
                Ok((a / s, br / s, bm / s))
            }
        }
    }

    /// `E[φ]` under `Q` for malicious noise.
    fn corruption_mean(&self, q: &dyn Query, label_free: f64) -> f64 {
        match &self.config.noise {
            NoiseModel::Malicious {
                corruption: Corruption::Finite { items },
                ..
            } => items.iter().map(|(e, y, w)| w * q.eval(e, *y)).sum(),
            _ => label_free,
        }
    }

    /// The expectation of `φ` over noisy examples.
    pub fn noisy_expectation(&self, q: &dyn Query) -> Result<f64> {
        let (a, br, bm) = self.split(q)?;
        Ok(match &self.config.noise {
            NoiseModel::None => a + br,
            NoiseModel::Classification { eta } => a + (1.0 - 2.0 * eta) * br,
            NoiseModel::Depolarizing { .. } | NoiseModel::BoundedChannel { .. } => {
                let p = self.config.noise.state_rate();
                a + (1.0 - p) * br + p * bm
            }
            NoiseModel::Malicious { eta, .. } => (1.0 - eta) * (a + br) + eta * self.corruption_mean(q, a),
        })
    }

    /// The expectation of `φ` with no noise.
    pub fn clean_expectation(&self, q: &dyn Query) -> Result<f64> {
        let (a, br, _) = self.split(q)?;
        Ok(a + br)
    }

    /// One noisy example `(E, Y)`.
    pub fn sample_example(&self, r: &mut Rng) -> Result<(Measurement, Label)> {
        let noise = &self.config.noise;
        if let NoiseModel::Malicious { eta, corruption } = noise {
            if r.gen::<f64>() < *eta {
                return Ok(match corruption {
                    Corruption::UniformLabels => (self.dist.sample(r), Label::from_sign(r.gen())),
                    Corruption::Finite { items } => {
                        let u: f64 = r.gen();
                        let mut acc = 0.0;
                        let mut pick = &items[items.len() - 1];
                        for it in items {
                            acc += it.2;
                            if u < acc {
                                pick = it;
                                break;
                            }
                        }
                        (pick.0.clone(), pick.1)
                    }
                });
            }
        }
        let e = self.dist.sample(r);
        let f = f_value_f64(&self.rho, &e)?;
        let mean = match noise {
            NoiseModel::Classification { eta } => (1.0 - 2.0 * eta) * f,
            NoiseModel::Depolarizing { .. } | NoiseModel::BoundedChannel { .. } => {
                let p = noise.state_rate();
                (1.0 - p) * f + p * f_value_f64(&self.mixed, &e)?
            }
            _ => f,
        };
        Ok((e.clone(), label_with_mean(mean, r)))
    }

    /// `m` noisy examples drawn from a seed independent of the oracle's own
    /// randomness.
    pub fn examples(&self, m: usize, seed: u64) -> Result<Vec<(Measurement, Label)>> {
        let mut r = rng::substream(seed, 0);
        (0..m).map(|_| self.sample_example(&mut r)).collect()
    }
}

fn check_bound(v: f64) -> Result<()> {
    if v.abs() <= 1.0 + BOUND_SLACK {
        Ok(())
    } else {
        Err(Error::UnboundedQuery { value: v })
    }
}

impl StatOracle for SqOracle {
    fn query(&mut self, q: &SqQuery) -> Result<f64> {
        SqQuery::new(q.query.clone(), q.tau)?;
        self.probe(q.query.as_ref())?;
        let tau = q.tau;
        let answer = match &mut self.config.policy {
            ResponsePolicy::Exact => self.noisy_expectation(q.query.as_ref())?,
            ResponsePolicy::RandomWithinTau { .. } => {
                let truth = self.noisy_expectation(q.query.as_ref())?;
                let u: f64 = self.rng.as_mut().expect("seeded").gen_range(-1.0..=1.0);
                truth + u * tau
            }
            ResponsePolicy::Adversarial(_) => {
                let truth = self.noisy_expectation(q.query.as_ref())?;
                let ResponsePolicy::Adversarial(adv) = &mut self.config.policy else {
                    unreachable!()
                };
                let answer = adv.respond(truth, tau);
                if answer.is_nan() || (answer - truth).abs() > tau * (1.0 + 1e-12) {
                    return Err(Error::AdversaryOutOfBand { truth, answer, tau });
                }
                answer
            }
            ResponsePolicy::EmpiricalFromSamples { samples, delta, .. } => {
                let m = samples.unwrap_or_else(|| hoeffding_samples(tau, *delta));
                let mut r = self.rng.take().expect("seeded");
                let mut total = 0.0;
                let mut result = Ok(());
                for _ in 0..m {
                    match self.sample_example(&mut r) {
                        Ok((e, y)) => total += q.query.eval(&e, y),
                        Err(err) => {
                            result = Err(err);
                            break;
                        }
                    }
                }
                self.rng = Some(r);
                result?;
                total / m.max(1) as f64
            }
        };
        self.transcript.push(TranscriptEntry {
            index: self.count,
            tau,
            answer,
        });
        self.count += 1;
        Ok(answer)
    }

    fn queries(&self) -> u64 {
        self.count
    }

    fn distribution(&self) -> &MeasurementDistribution {
        &self.dist
    }

    fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }
}

/// Inverts classification noise on the label-coupled part of a query:
/// `a + (y - a)/(1 - 2η)`, where `a` is the answer to the label-free part.
pub fn correct_classification(noisy_answer: f64, label_free: f64, eta: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&eta) {
        return Err(Error::InvalidNoise(format!("classification rate {eta} not in [0, 1/2)")));
    }
    Ok(label_free + (noisy_answer - label_free) / (1.0 - 2.0 * eta))
}

/// `(y - η·φ[I/2^n]) / (1 - η)`.
pub fn correct_depolarizing(noisy_answer: f64, phi_on_mixed: f64, eta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::InvalidNoise(format!("depolarizing rate {eta} not in [0, 1)")));
    }
    Ok((noisy_answer - eta * phi_on_mixed) / (1.0 - eta))
}

/// Tolerance left after absorbing a channel within diamond distance `eta`.
pub fn absorb_bounded_channel(tau_requested: f64, eta: f64) -> Result<f64> {
    if eta.is_nan() || eta < 0.0 {
        return Err(Error::InvalidNoise(format!("diamond bound {eta} is negative")));
    }
    if tau_requested <= 2.0 * eta {
        return Err(Error::ToleranceExhausted {
            tau: tau_requested,
            eta,
        });
    }
    Ok(tau_requested - 2.0 * eta)
}

/// Answers clean-designed queries from a classification-noise oracle.
/// Each query costs two sub-queries at tolerance `τ(1 - 2η)/2`.
pub struct ClassificationCorrecting<O> {
    pub inner: O,
    eta: f64,
    count: u64,
}

impl<O: StatOracle> ClassificationCorrecting<O> {
    pub fn new(inner: O, eta: f64) -> Result<Self> {
        NoiseModel::Classification { eta }.validate()?;
        Ok(ClassificationCorrecting { inner, eta, count: 0 })
    }
}

impl<O: StatOracle> StatOracle for ClassificationCorrecting<O> {
    fn query(&mut self, q: &SqQuery) -> Result<f64> {
        let t = q.tau * (1.0 - 2.0 * self.eta) / 2.0;
        let a = self
            .inner
            .query(&SqQuery::new(Arc::new(LabelFree(q.query.clone())), t)?)?;
        let y = self.inner.query(&q.with_tau(t)?)?;
        self.count += 1;
        correct_classification(y, a, self.eta)
    }

    fn queries(&self) -> u64 {
        self.count
    }

    fn distribution(&self) -> &MeasurementDistribution {
        self.inner.distribution()
    }

    fn transcript(&self) -> &[TranscriptEntry] {
        self.inner.transcript()
    }
}

/// How the depolarizing wrapper obtains `φ[I/2^n]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MixedBaseline {
    /// From the distribution in closed form or by enumeration.
    Exact,
    /// From unlabeled samples of `D`, with labels drawn for the maximally
    /// mixed state.
    Sampled { samples: Option<usize>, delta: f64, seed: u64 },
}

/// Answers clean-designed queries from a depolarizing-noise oracle at an
/// assumed rate `eta`.
pub struct DepolarizingCorrecting<O> {
    pub inner: O,
    eta: f64,
    baseline: MixedBaseline,
    count: u64,
}

impl<O: StatOracle> DepolarizingCorrecting<O> {
    pub fn new(inner: O, eta: f64, baseline: MixedBaseline) -> Result<Self> {
        NoiseModel::Depolarizing { eta }.validate()?;
        Ok(DepolarizingCorrecting {
            inner,
            eta,
            baseline,
            count: 0,
        })
    }

    fn mixed_value(&self, q: &SqQuery, t: f64) -> Result<f64> {
        let d = self.inner.distribution();
        let mixed = QuantumState::maximally_mixed(d.n());
        match self.baseline {
            MixedBaseline::Exact => {
                if let Some(m) = q.query.moments(d, &mixed) {
                    let m = m?;
                    return Ok(m.label_free + m.label_coupled);
                }
                let mut total = 0.0;
                for (e, w) in d.support()? {
                    let f = f_value_f64(&mixed, &e)?;
                    let (p, m) = (q.query.eval(&e, Label::Plus), q.query.eval(&e, Label::Minus));
                    total += exact::to_f64(&w) * ((p + m) / 2.0 + f * (p - m) / 2.0);
                }
                Ok(total)
            }
            MixedBaseline::Sampled {
                samples,
                delta,
                seed,
            } => {
                let m = samples.unwrap_or_else(|| hoeffding_samples(t, delta));
                let mut r = rng::substream(seed, self.count);
                let mut total = 0.0;
                for _ in 0..m {
                    let e = d.sample(&mut r);
                    let y = label_with_mean(f_value_f64(&mixed, &e)?, &mut r);
                    total += q.query.eval(&e, y);
                }
                Ok(total / m.max(1) as f64)
            }
        }
    }
}

impl<O: StatOracle> StatOracle for DepolarizingCorrecting<O> {
    fn query(&mut self, q: &SqQuery) -> Result<f64> {
        let t = match self.baseline {
            MixedBaseline::Exact => q.tau * (1.0 - self.eta),
            MixedBaseline::Sampled { .. } => q.tau * (1.0 - self.eta) / 2.0,
        };
        let mixed = self.mixed_value(q, t)?;
        let y = self.inner.query(&q.with_tau(t)?)?;
        self.count += 1;
        correct_depolarizing(y, mixed, self.eta)
    }

    fn queries(&self) -> u64 {
        self.count
    }

    fn distribution(&self) -> &MeasurementDistribution {
        self.inner.distribution()
    }

    fn transcript(&self) -> &[TranscriptEntry] {
        self.inner.transcript()
    }
}

/// Issues each query at `τ - 2η_◇` and passes the answer through.
pub struct BoundedChannelAbsorbing<O> {
    pub inner: O,
    eta: f64,
}

impl<O: StatOracle> BoundedChannelAbsorbing<O> {
    pub fn new(inner: O, eta: f64) -> Self {
        BoundedChannelAbsorbing { inner, eta }
    }
}

impl<O: StatOracle> StatOracle for BoundedChannelAbsorbing<O> {
    fn query(&mut self, q: &SqQuery) -> Result<f64> {
        let t = absorb_bounded_channel(q.tau, self.eta)?;
        self.inner.query(&q.with_tau(t)?)
    }

    fn queries(&self) -> u64 {
        self.inner.queries()
    }

    fn distribution(&self) -> &MeasurementDistribution {
        self.inner.distribution()
    }

    fn transcript(&self) -> &[TranscriptEntry] {
        self.inner.transcript()
    }
}

/// Issues each query at `τ - η` against a malicious-noise oracle.
pub struct MaliciousAbsorbing<O> {
    pub inner: O,
    eta: f64,
}

impl<O: StatOracle> MaliciousAbsorbing<O> {
    pub fn new(inner: O, eta: f64) -> Self {
        MaliciousAbsorbing { inner, eta }
    }
}

impl<O: StatOracle> StatOracle for MaliciousAbsorbing<O> {
    fn query(&mut self, q: &SqQuery) -> Result<f64> {
        if q.tau <= self.eta {
            return Err(Error::ToleranceExhausted {
                tau: q.tau,
                eta: self.eta,
            });
        }
        self.inner.query(&q.with_tau(q.tau - self.eta)?)
    }

    fn queries(&self) -> u64 {
        self.inner.queries()
    }

    fn distribution(&self) -> &MeasurementDistribution {
        self.inner.distribution()
    }

    fn transcript(&self) -> &[TranscriptEntry] {
        self.inner.transcript()
    }
}

impl<O: StatOracle + ?Sized> StatOracle for &mut O {
    fn query(&mut self, q: &SqQuery) -> Result<f64> {
        (**self).query(q)
    }

    fn queries(&self) -> u64 {
        (**self).queries()
    }

    fn distribution(&self) -> &MeasurementDistribution {
        (**self).distribution()
    }

    fn transcript(&self) -> &[TranscriptEntry] {
        (**self).transcript()
    }
}

/// `Λ†(E)` as a convex mixture of measurements, `Σ_k w_k E_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjointEffect {
    pub components: Vec<(Measurement, f64)>,
}

impl AdjointEffect {
    /// `tr(Λ†(E) ρ)`.
    pub fn acceptance(&self, rho: &QuantumState) -> Result<f64> {
        let mut total = 0.0;
        for (e, w) in &self.components {
            total += w * (1.0 + f_value_f64(rho, e)?) / 2.0;
        }
        Ok(total)
    }
}

/// `Λ†(E) = (1 - η)E + η·(tr(E)/2^n)·I` for depolarizing `Λ`. For a Pauli
/// measurement with `P ≠ ±I` this is `(I + (1 - η)P)/2`, returned as the
/// mixture of `(I+P)/2` with weight `1 - η` and `I/2` with weight `η`, where
/// `I/2` is in turn the even mixture of the measurements `I` and `0`.
pub fn adjoint_measurement(e: &Measurement, channel: &Channel) -> Result<AdjointEffect> {
    let Channel::Depolarizing { rate } = channel;
    let eta = *rate;
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidNoise(format!("depolarizing rate {eta} not in [0, 1]")));
    }
    if let Measurement::Pauli { pauli } = e {
        if pauli.is_identity_up_to_sign() {
            return Ok(AdjointEffect {
                components: vec![(e.clone(), 1.0)],
            });
        }
    }
    let n = e.n();
    let id = crate::pauli::PauliOperator::identity(n);
    // tr(E)/2^n = 1/2 for every remaining measurement
    let half = exact::to_f64(&e.normalized_trace());
    let mut components = vec![(e.clone(), 1.0 - eta)];
    if eta > 0.0 {
        components.push((Measurement::pauli(id.clone()), eta * half));
        components.push((Measurement::pauli(id.negated()), eta * (1.0 - half)));
    }
    Ok(AdjointEffect { components })
}

/// `tr(E Λ(ρ))` for depolarizing `Λ`, evaluated on the state side.
pub fn depolarized_acceptance(e: &Measurement, rho: &QuantumState, eta: f64) -> Result<f64> {
    let mixed = QuantumState::maximally_mixed(rho.n());
    let f = (1.0 - eta) * f_value_f64(rho, e)? + eta * f_value_f64(&mixed, e)?;
    Ok((1.0 + f) / 2.0)
}

/// The outcome of [`eta_grid_search`].
#[derive(Clone, Debug)]
pub struct GridSearch<H> {
    pub best_eta: f64,
    pub hypothesis: H,
    /// `(guess, validation score)` for every grid point.
    pub scores: Vec<(f64, f64)>,
}

/// `{0, δ, 2δ, …}` up to `eta_upper`, with `eta_upper` itself appended when
/// it is not a grid multiple.
pub fn eta_grid(eta_upper: f64, delta: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&eta_upper) {
        return Err(Error::InvalidParameter(format!("eta_upper = {eta_upper} not in [0, 1)")));
    }
    if eta_upper == 0.0 {
        return Ok(vec![0.0]);
    }
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::InvalidParameter("empty grid: δ must be positive".into()));
    }
    let steps = (eta_upper / delta + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=steps).map(|k| k as f64 * delta).collect();
    if eta_upper - grid[steps] > 1e-12 {
        grid.push(eta_upper);
    }
    Ok(grid)
}

/// Validation examples with per-qubit sufficient statistics when every
/// measurement is a single-qubit projector, so that scoring a product
/// hypothesis costs `O(n)`.
/// `(Σ u uᵀ, Σ Y u)` over the projectors on one qubit.
type QubitStats = ([[f64; 3]; 3], [f64; 3]);

pub struct Validation {
    examples: Vec<(Measurement, Label)>,
    projector_stats: Option<Vec<QubitStats>>,
}

impl Validation {
    pub fn new(n: usize, examples: Vec<(Measurement, Label)>) -> Result<Self> {
        if examples.is_empty() {
            return Err(Error::InvalidParameter("empty validation set".into()));
        }
        let mut stats = vec![([[0.0; 3]; 3], [0.0; 3]); n];
        let mut all_projectors = true;
        for (e, y) in &examples {
            check_dims(n, e.n())?;
            match e {
                Measurement::Projector {
                    qubit, direction, ..
                } => {
                    let u: [f64; 3] = (*direction).into();
                    let (uu, yu) = &mut stats[*qubit];
                    for a in 0..3 {
                        yu[a] += y.value() * u[a];
                        for b in 0..3 {
                            uu[a][b] += u[a] * u[b];
                        }
                    }
                }
                _ => all_projectors = false,
            }
        }
        Ok(Validation {
            examples,
            projector_stats: all_projectors.then_some(stats),
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Mean of `(Y - f_{Λ_g(σ)}(E))²` for depolarizing `Λ_g`.
    pub fn score(&self, sigma: &QuantumState, g: f64) -> Result<f64> {
        let m = self.examples.len() as f64;
        if let (Some(stats), QuantumState::Product { qubits }) = (&self.projector_stats, sigma) {
            // f_mix vanishes on projectors, so f_{Λ_g(σ)}(E) = (1-g) u·s_q.
            let mut total = m;
            for (s, (uu, yu)) in qubits.iter().zip(stats) {
                let h: [f64; 3] = s.scale(1.0 - g).into();
                for a in 0..3 {
                    total -= 2.0 * h[a] * yu[a];
                    for b in 0..3 {
                        total += h[a] * uu[a][b] * h[b];
                    }
                }
            }
            return Ok(total / m);
        }
        let mixed = QuantumState::maximally_mixed(sigma.n());
        let mut total = 0.0;
        for (e, y) in &self.examples {
            let f = (1.0 - g) * f_value_f64(sigma, e)? + g * f_value_f64(&mixed, e)?;
            total += (y.value() - f).powi(2);
        }
        Ok(total / m)
    }
}

/// Default tie width for [`eta_grid_search`] scores.
pub const SCORE_TIE: f64 = 1e-12;

/// Runs `learner` for every rate guess on the grid and keeps the hypothesis
/// whose depolarized prediction fits the noisy validation labels best.
///
/// Guesses below the true rate all predict the same noisy labels once pushed
/// back through the channel, so their scores tie. The largest guess scoring
/// within `tie` of the minimum is returned.
pub fn eta_grid_search<F>(
    mut learner: F,
    eta_upper: f64,
    delta_grid: f64,
    validation: &Validation,
    tie: f64,
) -> Result<GridSearch<QuantumState>>
where
    F: FnMut(f64) -> Result<QuantumState>,
{
    let grid = eta_grid(eta_upper, delta_grid)?;
    let mut runs = Vec::with_capacity(grid.len());
    let mut scores = Vec::with_capacity(grid.len());
    for g in grid {
        let h = learner(g)?;
        let s = validation.score(&h, g)?;
        scores.push((g, s));
        runs.push(h);
    }
    let min = scores.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let k = scores
        .iter()
        .rposition(|s| s.1 <= min + tie)
        .expect("grid is non-empty");
    Ok(GridSearch {
        best_eta: scores[k].0,
        hypothesis: runs.swap_remove(k),
        scores,
    })
}

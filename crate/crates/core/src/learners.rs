//! SQ learners for product and computational-basis states, and the parity
//! (LPN) side of the embedding.

use std::sync::Arc;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{check_dims, Error, Result};
use crate::oracle::{BlochAxisQuery, SqQuery, StatOracle, TranscriptEntry};
use crate::pconcept::{
    f_value_f64, monte_carlo, Axis, BlochVector, Estimate, Label, Measurement, MeasurementDistribution,
    QuantumState,
};
use crate::rng;

/// Largest `n` accepted by [`exhaustive_lpn_solver`].
pub const MAX_EXHAUSTIVE_QUBITS: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct LearnedHypothesis {
    pub state: QuantumState,
    pub queries_used: u64,
    pub transcript: Vec<TranscriptEntry>,
}

/// Relative margin taken off every learner tolerance. An oracle answering at
/// the edge of its band puts the loss exactly on `ε`, and rounding would
/// otherwise tip it over.
pub const TOLERANCE_MARGIN: f64 = 1e-9;

/// Per-query tolerance used by [`learn_product_state`]: `√ε/(2n)`, so that
/// each Bloch coordinate `2n·answer` is off by at most `√ε`.
pub fn product_tolerance(n: usize, epsilon: f64) -> f64 {
    epsilon.sqrt() / (2.0 * n as f64) * (1.0 - TOLERANCE_MARGIN)
}

/// Width of the validation-score band that [`learn_product_state`] runs at
/// different rate guesses can spread over when the oracle answers anywhere in
/// its band, for use as the `tie` of `eta_grid_search`.
///
/// Each hypothesis coordinate is off by at most `2nτ`, so a depolarized
/// prediction on a projector moves by at most `Δ = 2nτ√3`, and a mean of
/// `(Y - p)²` with `|Y - p| ≤ 2` moves by at most `4Δ + Δ²`.
pub fn product_score_tie(n: usize, epsilon: f64) -> f64 {
    let d = 2.0 * n as f64 * product_tolerance(n, epsilon) * 3f64.sqrt();
    4.0 * d + d * d
}

fn require_haar<O: StatOracle + ?Sized>(oracle: &O) -> Result<usize> {
    match oracle.distribution() {
        MeasurementDistribution::HaarSingleQubitProduct { n } => Ok(*n),
        other => Err(Error::DistributionMismatch(format!(
            "the learner needs the Haar single-qubit product distribution, got {other:?}"
        ))),
    }
}

fn finish<O: StatOracle + ?Sized>(oracle: &O, state: QuantumState, start: u64, log_start: usize) -> LearnedHypothesis {
    LearnedHypothesis {
        state,
        queries_used: oracle.queries() - start,
        transcript: oracle.transcript()[log_start..].to_vec(),
    }
}

/// Learns an unknown product state to squared loss `epsilon` with `3n`
/// queries, one per Bloch coordinate.
pub fn learn_product_state<O: StatOracle + ?Sized>(oracle: &mut O, epsilon: f64) -> Result<LearnedHypothesis> {
    let n = require_haar(oracle)?;
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidParameter(format!("ε = {epsilon} not in (0, 1]")));
    }
    let tau = product_tolerance(n, epsilon);
    let (start, log_start) = (oracle.queries(), oracle.transcript().len());
    let mut qubits = Vec::with_capacity(n);
    for qubit in 0..n {
        let mut r = [0.0; 3];
        for (k, axis) in Axis::ALL.into_iter().enumerate() {
            let q = SqQuery::new(Arc::new(BlochAxisQuery { n, qubit, axis }), tau)?;
            r[k] = 2.0 * n as f64 * oracle.query(&q)?;
        }
        qubits.push(BlochVector::from(r).project_to_ball());
    }
    Ok(finish(oracle, QuantumState::Product { qubits }, start, log_start))
}

/// Learns a computational basis state exactly with `n` queries at tolerance
/// `1/(4n)`. Answers inside the dead zone `(-1/(4n), 1/(4n))` mean the state
/// is not a basis state and are reported instead of rounded.
pub fn learn_basis_state<O: StatOracle + ?Sized>(oracle: &mut O) -> Result<LearnedHypothesis> {
    let n = require_haar(oracle)?;
    let margin = 1.0 / (4.0 * n as f64);
    let (start, log_start) = (oracle.queries(), oracle.transcript().len());
    let mut bits = BitString::zeros(n);
    for qubit in 0..n {
        let q = SqQuery::new(
            Arc::new(BlochAxisQuery {
                n,
                qubit,
                axis: Axis::Z,
            }),
            margin,
        )?;
        let answer = oracle.query(&q)?;
        if answer.abs() < margin - 1e-12 {
            return Err(Error::PromiseViolated { qubit, answer });
        }
        bits.set(qubit, answer < 0.0);
    }
    Ok(finish(oracle, QuantumState::basis(&bits), start, log_start))
}

/// Monte Carlo estimate of `E_E[sgn(tr(Eψ) - 1/2)·(tr(Eρ) - 1/2)]` over Haar
/// single-qubit projectors `E`, for a pure `ψ` and any `ρ` given by Bloch
/// vectors. The closed form is `tr(Pρ)/4` where `ψ` is the `+1` eigenstate
/// of `P`.
pub fn haar_lemma_estimate(psi: BlochVector, rho: BlochVector, samples: usize, seed: u64) -> Result<Estimate> {
    if (psi.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter("ψ must be pure".into()));
    }
    let psi_state = QuantumState::product(vec![psi])?;
    let rho_state = QuantumState::product(vec![rho])?;
    let d = MeasurementDistribution::HaarSingleQubitProduct { n: 1 };
    monte_carlo(&d, samples, seed, |e| {
        let a = f_value_f64(&psi_state, e)? / 2.0;
        let b = f_value_f64(&rho_state, e)? / 2.0;
        Ok(a.signum() * b * (a != 0.0) as u8 as f64)
    })
}

/// A planted or loaded LPN instance: labels are `x·secret mod 2`, each
/// flipped with probability `eta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LpnInstance {
    pub n: usize,
    pub eta: f64,
    #[serde(with = "example_list")]
    pub examples: Vec<(BitString, bool)>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_bits")]
    pub secret: Option<BitString>,
}

mod example_list {
    use super::*;
    use serde::de::Error as _;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[(BitString, bool)], s: S) -> Result<S::Ok, S::Error> {
        let raw: Vec<(String, u8)> = v.iter().map(|(x, b)| (x.to_binary(), *b as u8)).collect();
        raw.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(BitString, bool)>, D::Error> {
        let raw: Vec<(String, u8)> = Vec::deserialize(d)?;
        raw.into_iter()
            .map(|(x, b)| {
                let x = BitString::parse_binary(&x).ok_or_else(|| D::Error::custom(format!("bad bit string {x:?}")))?;
                match b {
                    0 | 1 => Ok((x, b == 1)),
                    _ => Err(D::Error::custom(format!("label {b} is not a bit"))),
                }
            })
            .collect()
    }
}

mod opt_bits {
    use super::*;
    use serde::de::Error as _;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<BitString>, s: S) -> Result<S::Ok, S::Error> {
        v.as_ref().map(|b| b.to_binary()).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BitString>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| BitString::parse_binary(&s).ok_or_else(|| D::Error::custom(format!("bad bit string {s:?}"))))
            .transpose()
    }
}

impl LpnInstance {
    /// `m` uniformly random examples for a uniformly random secret.
    pub fn planted(n: usize, m: usize, eta: f64, seed: u64) -> Result<Self> {
        if !(0.0..0.5).contains(&eta) {
            return Err(Error::InvalidNoise(format!("LPN rate {eta} not in [0, 1/2)")));
        }
        let mut r = rng::substream(seed, 0);
        let random_bits = |r: &mut rng::Rng| BitString::from_bools(&(0..n).map(|_| r.gen()).collect::<Vec<bool>>());
        let secret = random_bits(&mut r);
        let examples = (0..m)
            .map(|_| {
                let x = random_bits(&mut r);
                let flip = r.gen::<f64>() < eta;
                let b = x.dot(&secret) ^ flip;
                (x, b)
            })
            .collect();
        Ok(LpnInstance {
            n,
            eta,
            examples,
            secret: Some(secret),
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (x, _) in &self.examples {
            check_dims(self.n, x.len())?;
        }
        if let Some(s) = &self.secret {
            check_dims(self.n, s.len())?;
        }
        Ok(())
    }
}

/// Maps each example `(x, b)` to the parity measurement `E_x` with label
/// `(-1)^b`. With `P_x = Z^x`, measuring `|y⟩` accepts exactly when
/// `x·y = 0 mod 2`, so the label is `+1` for even parity.
pub fn make_lpn_as_state_learning(instance: &LpnInstance) -> Vec<(Measurement, Label)> {
    instance
        .examples
        .iter()
        .map(|(x, b)| (Measurement::parity(x), Label::from_sign(!*b)))
        .collect()
}

/// Inverse of [`make_lpn_as_state_learning`].
pub fn decode_lpn_dataset(dataset: &[(Measurement, Label)]) -> Result<Vec<(BitString, bool)>> {
    dataset
        .iter()
        .map(|(e, y)| match e {
            Measurement::Pauli { pauli } if pauli.x_bits().is_zero() && !pauli.is_negative() => {
                Ok((pauli.z_bits().clone(), *y == Label::Minus))
            }
            other => Err(Error::InvalidParameter(format!("{other:?} is not a parity measurement"))),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParitySolution {
    Unique(BitString),
    /// Every solution is `particular ⊕ span(nullspace)`.
    Underdetermined {
        particular: BitString,
        nullspace: Vec<BitString>,
    },
}

impl ParitySolution {
    pub fn unique(&self) -> Option<&BitString> {
        match self {
            ParitySolution::Unique(s) => Some(s),
            _ => None,
        }
    }
}

/// Solves `x·y = b` over GF(2) for all examples.
pub fn gaussian_elimination_parity(dataset: &[(BitString, bool)], n: usize) -> Result<ParitySolution> {
    // Each row is x with the label appended as bit n.
    let mut rows: Vec<BitString> = Vec::with_capacity(dataset.len());
    for (x, b) in dataset {
        check_dims(n, x.len())?;
        let mut row = BitString::zeros(n + 1);
        for i in x.ones() {
            row.set(i, true);
        }
        row.set(n, *b);
        rows.push(row);
    }
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..n {
        let Some(p) = (r..rows.len()).find(|&i| rows[i].get(col)) else {
            continue;
        };
        rows.swap(r, p);
        let pivot = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && row.get(col) {
                row.xor_assign(&pivot);
            }
        }
        pivots.push(col);
        r += 1;
    }
    if rows[r..].iter().any(|row| row.get(n)) {
        return Err(Error::Inconsistent);
    }
    let mut particular = BitString::zeros(n);
    for (i, &col) in pivots.iter().enumerate() {
        particular.set(col, rows[i].get(n));
    }
    if pivots.len() == n {
        return Ok(ParitySolution::Unique(particular));
    }
    let nullspace = (0..n)
        .filter(|c| !pivots.contains(c))
        .map(|free| {
            let mut v = BitString::unit(n, free);
            for (i, &col) in pivots.iter().enumerate() {
                if rows[i].get(free) {
                    v.set(col, true);
                }
            }
            v
        })
        .collect();
    Ok(ParitySolution::Underdetermined { particular, nullspace })
}

/// Maximum-likelihood secrets of an LPN instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MlSolution {
    /// All candidates attaining the minimum, in increasing integer order.
    pub best: Vec<BitString>,
    pub disagreements: usize,
}

impl MlSolution {
    pub fn unique(&self) -> Option<&BitString> {
        (self.best.len() == 1).then(|| &self.best[0])
    }
}

/// Sweeps all `2^n` candidate secrets and keeps those with the fewest label
/// disagreements.
pub fn exhaustive_lpn_solver(instance: &LpnInstance) -> Result<MlSolution> {
    let n = instance.n;
    if n > MAX_EXHAUSTIVE_QUBITS {
        return Err(Error::BudgetExceeded(format!(
            "exhaustive sweep over 2^{n} secrets (limit 2^{MAX_EXHAUSTIVE_QUBITS})"
        )));
    }
    instance.validate()?;
    let packed: Vec<(u64, u32)> = instance
        .examples
        .iter()
        .map(|(x, b)| (x.to_u64(), *b as u32))
        .collect();
    let counts: Vec<usize> = (0..1u64 << n)
        .into_par_iter()
        .map(|s| {
            packed
                .iter()
                .filter(|(x, b)| ((x & s).count_ones() & 1) != *b)
                .count()
        })
        .collect();
    let min = *counts.iter().min().expect("at least one candidate");
    let best = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == min)
        .map(|(s, _)| BitString::from_u64(n, s as u64))
        .collect();
    Ok(MlSolution {
        best,
        disagreements: min,
    })
}

/// Solves a labeled parity-measurement dataset as a basis-state learning
/// problem: each `|y⟩` is scored by how many labels disagree with the sign
/// of `f_{|y⟩}(E)`, which is `±1` on parity measurements.
pub fn ml_basis_state(dataset: &[(Measurement, Label)], n: usize) -> Result<MlSolution> {
    if n > MAX_EXHAUSTIVE_QUBITS {
        return Err(Error::BudgetExceeded(format!("sweep over 2^{n} basis states")));
    }
    let counts: Vec<usize> = (0..1u64 << n)
        .into_par_iter()
        .map(|y| {
            let state = QuantumState::basis(&BitString::from_u64(n, y));
            let mut c = 0;
            for (e, label) in dataset {
                if f_value_f64(&state, e)? * label.value() < 0.0 {
                    c += 1;
                }
            }
            Ok(c)
        })
        .collect::<Result<_>>()?;
    let min = *counts.iter().min().expect("at least one candidate");
    Ok(MlSolution {
        best: counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == min)
            .map(|(y, _)| BitString::from_u64(n, y as u64))
            .collect(),
        disagreements: min,
    })
}

//! Average correlation and statistical dimension on average (SDA) of finite
//! concept classes of states.

use std::cmp::Ordering;
use std::ops::Add;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dims, Error, Result};
use crate::exact::{self, JsonRational, Number};
use crate::pconcept::{inner_product, EvalMode, MeasurementDistribution, QuantumState};
use crate::stabilizer::enumerate_stabilizer_groups;

/// Default largest class swept exhaustively by [`sda_exact`].
pub const DEFAULT_SUBSET_BUDGET: usize = 24;

/// A finite class of states with a precomputed correlation matrix.
#[derive(Clone, Debug)]
pub struct ConceptClass {
    concepts: Vec<QuantumState>,
    dist: MeasurementDistribution,
    gram: Vec<Vec<Number>>,
}

impl ConceptClass {
    pub fn new(concepts: Vec<QuantumState>, dist: MeasurementDistribution, mode: EvalMode) -> Result<Self> {
        if concepts.is_empty() {
            return Err(Error::InvalidParameter("empty concept class".into()));
        }
        for c in &concepts {
            check_dims(dist.n(), c.n())?;
        }
        let m = concepts.len();
        let upper: Vec<Vec<Number>> = (0..m)
            .into_par_iter()
            .map(|i| {
                (i..m)
                    .map(|j| Ok(inner_product(&concepts[i], &concepts[j], &dist, mode)?.value))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let mut gram = vec![vec![Number::zero(); m]; m];
        for (i, row) in upper.into_iter().enumerate() {
            for (k, v) in row.into_iter().enumerate() {
                gram[i + k][i] = v.clone();
                gram[i][i + k] = v;
            }
        }
        Ok(ConceptClass { concepts, dist, gram })
    }

    /// All stabilizer states on `n` qubits under `UniformPauli`, exactly.
    pub fn stabilizers(n: usize) -> Result<Self> {
        let states = enumerate_stabilizer_groups(n)?
            .into_iter()
            .map(QuantumState::stabilizer)
            .collect();
        Self::new(states, MeasurementDistribution::UniformPauli { n }, EvalMode::Exact)
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn concepts(&self) -> &[QuantumState] {
        &self.concepts
    }

    pub fn distribution(&self) -> &MeasurementDistribution {
        &self.dist
    }

    /// `⟨f_i, f_j⟩_D`.
    pub fn gram(&self) -> &[Vec<Number>] {
        &self.gram
    }

    pub fn is_exact(&self) -> bool {
        self.gram.iter().flatten().all(Number::is_exact)
    }

    /// `(min ‖c‖², max ‖c‖², max_{c≠c'} |⟨c, c'⟩|)`.
    pub fn statistics(&self) -> (Number, Number, Number) {
        let diag: Vec<&Number> = (0..self.len()).map(|i| &self.gram[i][i]).collect();
        let min = diag.iter().copied().min_by(|a, b| cmp_num(a, b)).expect("non-empty").clone();
        let max = diag.iter().copied().max_by(|a, b| cmp_num(a, b)).expect("non-empty").clone();
        let mut pair = Number::zero();
        for i in 0..self.len() {
            for j in 0..i {
                let v = self.gram[i][j].abs();
                if cmp_num(&v, &pair) == Ordering::Greater {
                    pair = v;
                }
            }
        }
        (min, max, pair)
    }
}

fn cmp_num(a: &Number, b: &Number) -> Ordering {
    match (a, b) {
        (Number::Exact(x), Number::Exact(y)) => x.cmp(y),
        _ => a.to_f64().total_cmp(&b.to_f64()),
    }
}

fn num_le(a: &Number, b: &BigRational) -> bool {
    match a {
        Number::Exact(x) => x <= b,
        Number::Approx(x) => *x <= exact::to_f64(b),
    }
}

/// `ρ_D(C) = (1/|C|²) Σ_{c, c'} |⟨c, c'⟩_D|`, diagonal included.
pub fn average_correlation(class: &ConceptClass) -> Number {
    subset_correlation(class, &(0..class.len()).collect::<Vec<_>>())
}

/// Average correlation of the sub-class with the given indices.
pub fn subset_correlation(class: &ConceptClass, subset: &[usize]) -> Number {
    let mut total = Number::zero();
    for &i in subset {
        for &j in subset {
            total = total.add(&class.gram[i][j].abs());
        }
    }
    let k = subset.len() as i64;
    total.mul(&Number::Exact(exact::ratio(1, (k * k).max(1))))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum SdaValue {
    /// The largest integer `d` with the defining property.
    Exact(u64),
    /// No sub-class exceeds the threshold, so every `d` qualifies.
    Unbounded,
    /// `sda ≥ value`; since `sda` is an integer this certifies `⌊value⌋`.
    LowerBound(JsonRational),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SdaReport {
    pub class_size: usize,
    /// Threshold the value refers to.
    pub gamma: JsonRational,
    pub sda_value: SdaValue,
    pub kappa: Number,
    pub min_norm_sq: Number,
    pub gamma_pair: Number,
    /// A largest sub-class whose average correlation exceeds `gamma`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<usize>>,
}

/// Exact SDA by sweeping sub-classes from the largest size down. The value
/// is the largest integer `d` such that every sub-class of size at least
/// `|C|/d` has average correlation at most `gamma`, i.e. `⌈|C|/k⌉ - 1` where
/// `k` is the largest violating size. Classes above `budget` fall back to
/// [`sda_bound`] with `γ' = gamma - γ_pair`.
pub fn sda_exact(class: &ConceptClass, gamma: &BigRational, budget: usize) -> Result<SdaReport> {
    let (min_norm_sq, kappa, gamma_pair) = class.statistics();
    let m = class.len();
    if m > budget.min(31) {
        let gp = match &gamma_pair {
            Number::Exact(r) => r.clone(),
            Number::Approx(x) => exact::from_f64(*x).ok_or_else(|| Error::InvalidParameter("non-finite".into()))?,
        };
        let kp = match &kappa {
            Number::Exact(r) => r.clone(),
            Number::Approx(x) => exact::from_f64(*x).ok_or_else(|| Error::InvalidParameter("non-finite".into()))?,
        };
        let gprime = gamma - &gp;
        if gprime <= BigRational::zero() || kp <= gp {
            return Ok(SdaReport {
                class_size: m,
                gamma: JsonRational(gamma.clone()),
                sda_value: SdaValue::LowerBound(JsonRational(BigRational::zero())),
                kappa,
                min_norm_sq,
                gamma_pair,
                witness: None,
            });
        }
        return sda_bound(class, &gp, &kp, &gprime);
    }
    let witness = if class.is_exact() {
        let (a, scale) = integer_gram(class)?;
        sweep(&a, |k| {
            let t = gamma * BigRational::from_integer(BigInt::from(k * k) * &scale);
            t.floor().to_integer().to_i128().unwrap_or(i128::MAX)
        })
    } else {
        let a: Vec<Vec<f64>> = class
            .gram
            .iter()
            .map(|r| r.iter().map(|v| v.to_f64().abs()).collect())
            .collect();
        let g = exact::to_f64(gamma);
        sweep(&a, |k| g * (k * k) as f64)
    };
    let sda_value = match &witness {
        Some(w) => SdaValue::Exact((m.div_ceil(w.len()) - 1) as u64),
        None => SdaValue::Unbounded,
    };
    Ok(SdaReport {
        class_size: m,
        gamma: JsonRational(gamma.clone()),
        sda_value,
        kappa,
        min_norm_sq,
        gamma_pair,
        witness,
    })
}

/// `|G_ij|·L` as integers for the least common denominator `L`.
fn integer_gram(class: &ConceptClass) -> Result<(Vec<Vec<i128>>, BigInt)> {
    let mut scale = BigInt::one();
    for v in class.gram.iter().flatten() {
        scale = scale.lcm(v.as_exact().expect("exact").denom());
    }
    let m = class.len();
    let mut a = vec![vec![0i128; m]; m];
    for (row, gram_row) in a.iter_mut().zip(&class.gram) {
        for (cell, g) in row.iter_mut().zip(gram_row) {
            let r = g.as_exact().expect("exact").abs();
            let scaled = (r * BigRational::from_integer(scale.clone())).to_integer();
            // room for summing m² entries
            *cell = scaled
                .to_i128()
                .filter(|v| v.checked_mul((m * m) as i128).is_some())
                .ok_or_else(|| Error::BudgetExceeded("correlation denominators too large for the exact sweep".into()))?;
        }
    }
    Ok((a, scale))
}

/// The lexicographically first sub-class of the largest violating size.
fn sweep<T>(a: &[Vec<T>], threshold: impl Fn(usize) -> T + Sync) -> Option<Vec<usize>>
where
    T: Copy + Add<Output = T> + PartialOrd + Default + Send + Sync,
{
    let m = a.len();
    for k in (1..=m).rev() {
        let t = threshold(k);
        let found = (0..=m - k).into_par_iter().find_map_first(|first| {
            let mut current = vec![first];
            dfs(a, k, t, first + 1, &mut current, a[first][first]).then_some(current)
        });
        if found.is_some() {
            return found;
        }
    }
    None
}

fn dfs<T>(a: &[Vec<T>], k: usize, t: T, start: usize, current: &mut Vec<usize>, sum: T) -> bool
where
    T: Copy + Add<Output = T> + PartialOrd + Default,
{
    if current.len() == k {
        return sum > t;
    }
    let need = k - current.len();
    for j in start..=a.len() - need {
        let mut s = sum + a[j][j];
        for &i in current.iter() {
            s = s + a[i][j] + a[i][j];
        }
        current.push(j);
        if dfs(a, k, t, j + 1, current, s) {
            return true;
        }
        current.pop();
    }
    false
}

/// Lower bound `sda(C, γ + γ') ≥ |C|γ'/(κ - γ)` after checking that every
/// off-diagonal correlation is at most `gamma_pair` and every squared norm
/// at most `kappa`.
pub fn sda_bound(
    class: &ConceptClass,
    gamma_pair: &BigRational,
    kappa: &BigRational,
    gamma_prime: &BigRational,
) -> Result<SdaReport> {
    if kappa <= gamma_pair {
        return Err(Error::InvalidParameter(format!("κ = {kappa} must exceed γ = {gamma_pair}")));
    }
    if gamma_prime.is_negative() {
        return Err(Error::InvalidParameter(format!("γ' = {gamma_prime} is negative")));
    }
    let m = class.len();
    for i in 0..m {
        if !num_le(&class.gram[i][i], kappa) {
            return Err(Error::HypothesisFailed(format!(
                "concept {i} has squared norm {} > κ = {kappa}",
                class.gram[i][i]
            )));
        }
        for j in 0..i {
            if !num_le(&class.gram[i][j].abs(), gamma_pair) {
                return Err(Error::HypothesisFailed(format!(
                    "concepts {j}, {i} have correlation {} > γ = {gamma_pair}",
                    class.gram[i][j]
                )));
            }
        }
    }
    let (min_norm_sq, kappa_seen, gamma_seen) = class.statistics();
    let bound = BigRational::from_integer(m.into()) * gamma_prime / (kappa - gamma_pair);
    Ok(SdaReport {
        class_size: m,
        gamma: JsonRational(gamma_pair + gamma_prime),
        sda_value: SdaValue::LowerBound(JsonRational(bound)),
        kappa: kappa_seen,
        min_norm_sq,
        gamma_pair: gamma_seen,
        witness: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub held: bool,
    pub detail: String,
}

/// Bookkeeping for the SQ lower bound "learning `C` to squared loss `ε` with
/// tolerance `τ` needs at least `sda(C, τ²)` queries".
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub holds: bool,
    pub checks: Vec<Check>,
    pub epsilon: f64,
    pub beta: f64,
    pub tau: f64,
    /// `sda(C, τ²) ≥ |C|(τ² - γ_pair)/(κ - γ_pair)`, when `τ² > γ_pair`.
    pub query_lower_bound: Option<f64>,
    pub statement: String,
}

const SLACK: f64 = 1e-12;

pub fn verify_query_lower_bound(report: &SdaReport, epsilon: f64, beta: f64, tau: f64) -> Verdict {
    let le = |a: f64, b: f64| a <= b * (1.0 + SLACK) + f64::MIN_POSITIVE;
    let min_norm = report.min_norm_sq.to_f64().sqrt();
    let mut checks = vec![
        Check {
            name: "norms_at_least_beta".into(),
            held: le(beta, min_norm),
            detail: format!("min ‖c‖ = {min_norm}, β = {beta}"),
        },
        Check {
            name: "tau_at_most_epsilon".into(),
            held: tau > 0.0 && le(tau, epsilon),
            detail: format!("τ = {tau}, ε = {epsilon}"),
        },
        Check {
            name: "epsilon_squared_at_most_beta_over_3".into(),
            held: le(epsilon * epsilon, beta / 3.0),
            detail: format!("ε² = {}, β/3 = {}", epsilon * epsilon, beta / 3.0),
        },
    ];
    let holds = checks.iter().all(|c| c.held);
    let tau_sq = tau * tau;
    let gp = report.gamma_pair.to_f64();
    let kappa = report.kappa.to_f64();
    let window = tau_sq > gp && kappa > gp;
    checks.push(Check {
        name: "threshold_above_pair_correlation".into(),
        held: window,
        detail: format!("τ² = {tau_sq}, γ_pair = {gp}, κ = {kappa}"),
    });
    let query_lower_bound = window.then(|| report.class_size as f64 * (tau_sq - gp) / (kappa - gp));
    let statement = match (holds, query_lower_bound) {
        (true, Some(b)) => format!(
            "any SQ learner reaching squared loss {epsilon} with tolerance {tau} needs at least sda(C, {tau_sq}) ≥ {b} queries"
        ),
        (true, None) => format!(
            "hypotheses hold, but τ² = {tau_sq} does not exceed the pair correlation {gp}, so the bound is vacuous"
        ),
        (false, _) => {
            let failed: Vec<&str> = checks[..3].iter().filter(|c| !c.held).map(|c| c.name.as_str()).collect();
            format!("not implied: failed {}", failed.join(", "))
        }
    };
    Verdict {
        holds,
        checks,
        epsilon,
        beta,
        tau,
        query_lower_bound,
        statement,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{inv_pow2, ratio};
    use crate::pauli::PauliOperator;
    use crate::stabilizer::StabilizerGroup;

    fn bound_value(r: &SdaReport) -> BigRational {
        match &r.sda_value {
            SdaValue::LowerBound(b) => b.0.clone(),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn singleton_class() {
        for n in 1..=3 {
            let c = ConceptClass::new(
                vec![QuantumState::basis(&crate::BitString::zeros(n))],
                MeasurementDistribution::UniformPauli { n },
                EvalMode::Exact,
            )
            .unwrap();
            assert_eq!(average_correlation(&c), Number::Exact(inv_pow2(n)));
        }
    }

    #[test]
    fn tight_pair_average() {
        let n = 2;
        let zeros = QuantumState::basis(&crate::BitString::zeros(n));
        let plus = QuantumState::stabilizer(
            StabilizerGroup::new(vec![
                PauliOperator::single(n, 0, 'Z').unwrap(),
                PauliOperator::single(n, 1, 'X').unwrap(),
            ])
            .unwrap(),
        );
        let c = ConceptClass::new(vec![zeros, plus], MeasurementDistribution::UniformPauli { n }, EvalMode::Exact)
            .unwrap();
        let expected = ratio(1, 4) * (inv_pow2(n) * ratio(2, 1) + inv_pow2(n + 1) * ratio(2, 1));
        assert_eq!(average_correlation(&c), Number::Exact(expected));
    }

    #[test]
    fn single_qubit_class() {
        let c = ConceptClass::stabilizers(1).unwrap();
        assert_eq!(average_correlation(&c), Number::Exact(ratio(1, 4)));
        let r = sda_exact(&c, &ratio(1, 2), DEFAULT_SUBSET_BUDGET).unwrap();
        assert_eq!(r.sda_value, SdaValue::Unbounded);
        // singletons exceed 3/8, pairs do not
        let r = sda_exact(&c, &ratio(3, 8), DEFAULT_SUBSET_BUDGET).unwrap();
        assert_eq!(r.sda_value, SdaValue::Exact(5));
        assert_eq!(r.witness.as_ref().unwrap().len(), 1);
        let b = sda_bound(&c, &ratio(1, 4), &ratio(1, 2), &ratio(1, 8)).unwrap();
        assert_eq!(bound_value(&b), ratio(3, 1));
    }

    #[test]
    fn bound_hypotheses_are_checked() {
        let c = ConceptClass::stabilizers(1).unwrap();
        assert!(matches!(
            sda_bound(&c, &ratio(1, 8), &ratio(1, 2), &ratio(1, 8)),
            Err(Error::HypothesisFailed(_))
        ));
        assert!(matches!(
            sda_bound(&c, &ratio(1, 4), &ratio(1, 4), &ratio(1, 8)),
            Err(Error::InvalidParameter(_))
        ));
        assert_eq!(bound_value(&sda_bound(&c, &ratio(1, 4), &ratio(1, 2), &ratio(0, 1)).unwrap()), ratio(0, 1));
    }

    #[test]
    fn budget_fallback() {
        let c = ConceptClass::stabilizers(1).unwrap();
        let r = sda_exact(&c, &ratio(3, 8), 4).unwrap();
        assert_eq!(bound_value(&r), ratio(3, 1));
    }

    #[test]
    fn verdict_side_conditions() {
        let c = ConceptClass::stabilizers(1).unwrap();
        let r = sda_exact(&c, &ratio(1, 2), DEFAULT_SUBSET_BUDGET).unwrap();
        let beta = 0.5f64.sqrt();
        let v = verify_query_lower_bound(&r, 0.4, beta, 0.45);
        assert!(!v.holds);
        assert!(!v.checks[1].held);
        let v = verify_query_lower_bound(&r, 0.6, beta, 0.4);
        assert!(!v.checks[2].held);
        let v = verify_query_lower_bound(&r, 0.45, beta, 0.45);
        assert!(v.holds);
        assert!(v.query_lower_bound.is_none());
    }

    #[test]
    fn report_json_uses_exact_rationals() {
        let c = ConceptClass::stabilizers(1).unwrap();
        let r = sda_exact(&c, &ratio(3, 8), DEFAULT_SUBSET_BUDGET).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["gamma"], serde_json::json!({"num": 3, "den": 8}));
        assert_eq!(v["sda_value"], serde_json::json!({"kind": "exact", "value": 5}));
    }
}

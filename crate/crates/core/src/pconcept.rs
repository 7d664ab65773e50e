//! States as p-concepts over distributions of two-outcome measurements.
//!
//! Measuring `ρ` with `E` yields `Y = +1` with probability `tr(Eρ)` and `-1`
//! otherwise, so the conditional mean is `f_ρ(E) = 2tr(Eρ) - 1`. Inner
//! products and squared losses are taken in `L²(D)` for a measurement
//! distribution `D`.

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{check_dims, Error, Result};
use crate::exact::{self, Number};
use crate::pauli::{PauliMeasurement, PauliOperator};
use crate::rng;
use crate::stabilizer::StabilizerGroup;

/// Numerical slack on Bloch-vector norms.
pub const NORM_SLACK: f64 = 1e-12;

/// Largest `n` for which `UniformPauli` is enumerated (`2·4^n` measurements).
pub const MAX_PAULI_SUPPORT_QUBITS: usize = 8;

/// Largest `n` for which `UniformParity` is enumerated (`2^n` measurements).
pub const MAX_PARITY_SUPPORT_QUBITS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn letter(self) -> char {
        match self {
            Axis::X => 'X',
            Axis::Y => 'Y',
            Axis::Z => 'Z',
        }
    }
}

/// Single-qubit state `(I + xX + yY + zZ)/2`.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 3]> for BlochVector {
    fn from(a: [f64; 3]) -> Self {
        BlochVector {
            x: a[0],
            y: a[1],
            z: a[2],
        }
    }
}

impl From<BlochVector> for [f64; 3] {
    fn from(b: BlochVector) -> Self {
        [b.x, b.y, b.z]
    }
}

impl BlochVector {
    /// Checked constructor: the norm may exceed 1 by at most [`NORM_SLACK`].
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let b = BlochVector { x, y, z };
        if !(x.is_finite() && y.is_finite() && z.is_finite()) || b.norm() > 1.0 + NORM_SLACK {
            return Err(Error::InvalidParameter(format!(
                "Bloch vector ({x}, {y}, {z}) lies outside the unit ball"
            )));
        }
        Ok(b)
    }

    pub const fn zero() -> Self {
        BlochVector {
            x: 0.0,
            y: 0.0,
            z: 0.0,
        }
    }

    pub fn component(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
            Axis::Z => self.z,
        }
    }

    pub fn dot(&self, o: &BlochVector) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn sub(&self, o: &BlochVector) -> BlochVector {
        BlochVector {
            x: self.x - o.x,
            y: self.y - o.y,
            z: self.z - o.z,
        }
    }

    pub fn scale(&self, s: f64) -> BlochVector {
        BlochVector {
            x: self.x * s,
            y: self.y * s,
            z: self.z * s,
        }
    }

    /// Radial projection onto the closed unit ball.
    pub fn project_to_ball(&self) -> BlochVector {
        let r = self.norm();
        if r > 1.0 {
            self.scale(1.0 / r)
        } else {
            *self
        }
    }

    /// Trace distance between the two single-qubit states: half the
    /// Euclidean distance between Bloch vectors.
    pub fn trace_distance(&self, o: &BlochVector) -> f64 {
        self.sub(o).norm() / 2.0
    }
}

/// Uniform point on the unit sphere: `φ ~ U[0, 2π)`, `cos θ ~ U[-1, 1]`.
pub fn haar_direction<R: Rng + ?Sized>(rng: &mut R) -> BlochVector {
    let phi = rng.gen::<f64>() * 2.0 * PI;
    let cos_theta = 2.0 * rng.gen::<f64>() - 1.0;
    let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
    BlochVector {
        x: phi.cos() * sin_theta,
        y: phi.sin() * sin_theta,
        z: cos_theta,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuantumState {
    Stabilizer { group: StabilizerGroup },
    Product { qubits: Vec<BlochVector> },
    MaximallyMixed { n: usize },
}

impl QuantumState {
    pub fn stabilizer(group: StabilizerGroup) -> Self {
        QuantumState::Stabilizer { group }
    }

    pub fn product(qubits: Vec<BlochVector>) -> Result<Self> {
        if qubits.is_empty() {
            return Err(Error::InvalidParameter("product state with no qubits".into()));
        }
        for b in &qubits {
            BlochVector::new(b.x, b.y, b.z)?;
        }
        Ok(QuantumState::Product { qubits })
    }

    pub fn maximally_mixed(n: usize) -> Self {
        QuantumState::MaximallyMixed { n }
    }

    /// `|bits⟩` as a stabilizer state.
    pub fn basis(bits: &BitString) -> Self {
        QuantumState::Stabilizer {
            group: StabilizerGroup::computational_basis(bits),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            QuantumState::Stabilizer { group } => group.n(),
            QuantumState::Product { qubits } => qubits.len(),
            QuantumState::MaximallyMixed { n } => *n,
        }
    }

    /// Bloch vector of the reduced state on `qubit`.
    pub fn marginal_bloch(&self, qubit: usize) -> Result<BlochVector> {
        let n = self.n();
        if qubit >= n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: qubit + 1,
            });
        }
        Ok(match self {
            QuantumState::Stabilizer { group } => {
                let t = |c| -> Result<f64> {
                    Ok(group.trace_pauli(&PauliOperator::single(n, qubit, c)?)? as f64)
                };
                BlochVector {
                    x: t('X')?,
                    y: t('Y')?,
                    z: t('Z')?,
                }
            }
            QuantumState::Product { qubits } => qubits[qubit],
            QuantumState::MaximallyMixed { .. } => BlochVector::zero(),
        })
    }

    pub fn marginals(&self) -> Result<Vec<BlochVector>> {
        (0..self.n()).map(|q| self.marginal_bloch(q)).collect()
    }

    /// `tr(Pρ)`.
    pub fn pauli_expectation(&self, p: &PauliOperator) -> Result<Number> {
        check_dims(self.n(), p.n())?;
        Ok(match self {
            QuantumState::Stabilizer { group } => {
                Number::Exact(BigRational::from_integer(group.trace_pauli(p)?.into()))
            }
            QuantumState::MaximallyMixed { .. } => {
                Number::Exact(BigRational::from_integer(p.normalized_trace().into()))
            }
            QuantumState::Product { qubits } => {
                let mut v = p.sign() as f64;
                for (q, b) in qubits.iter().enumerate() {
                    v *= match p.letter(q) {
                        'X' => b.x,
                        'Y' => b.y,
                        'Z' => b.z,
                        _ => 1.0,
                    };
                }
                Number::Approx(v)
            }
        })
    }
}

/// A two-outcome measurement `{E, I - E}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Measurement {
    /// `E = (I + P)/2`.
    Pauli { pauli: PauliOperator },
    /// `I^{⊗q} ⊗ (I + u·σ)/2 ⊗ I^{⊗(n-q-1)}` for a unit vector `u`.
    Projector {
        n: usize,
        qubit: usize,
        direction: BlochVector,
    },
}

impl Measurement {
    pub fn pauli(p: PauliOperator) -> Self {
        Measurement::Pauli { pauli: p }
    }

    pub fn from_pauli_measurement(e: PauliMeasurement) -> Self {
        Measurement::Pauli { pauli: e.pauli }
    }

    pub fn projector(n: usize, qubit: usize, direction: BlochVector) -> Result<Self> {
        if qubit >= n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: qubit + 1,
            });
        }
        if (direction.norm() - 1.0).abs() > NORM_SLACK {
            return Err(Error::InvalidParameter(format!(
                "projector direction must be a unit vector, got norm {}",
                direction.norm()
            )));
        }
        Ok(Measurement::Projector {
            n,
            qubit,
            direction,
        })
    }

    /// Parity measurement `E_x = (I + Z^x)/2`.
    pub fn parity(x: &BitString) -> Self {
        Measurement::Pauli {
            pauli: PauliOperator::z_string(x),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Measurement::Pauli { pauli } => pauli.n(),
            Measurement::Projector { n, .. } => *n,
        }
    }

    /// `tr(E) / 2^n`.
    pub fn normalized_trace(&self) -> BigRational {
        match self {
            Measurement::Pauli { pauli } => {
                BigRational::new(BigInt::from(1 + pauli.normalized_trace() as i64), 2.into())
            }
            Measurement::Projector { .. } => exact::ratio(1, 2),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Plus,
    Minus,
}

impl Label {
    pub fn value(self) -> f64 {
        match self {
            Label::Plus => 1.0,
            Label::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Plus => Label::Minus,
            Label::Minus => Label::Plus,
        }
    }

    pub fn from_sign(positive: bool) -> Label {
        if positive {
            Label::Plus
        } else {
            Label::Minus
        }
    }
}

/// `f_ρ(E) = 2tr(Eρ) - 1`. Exact for stabilizer and maximally mixed states
/// under Pauli measurements.
pub fn f_value(rho: &QuantumState, e: &Measurement) -> Result<Number> {
    check_dims(rho.n(), e.n())?;
    match e {
        // f_ρ((I+P)/2) = tr(Pρ)
        Measurement::Pauli { pauli } => rho.pauli_expectation(pauli),
        Measurement::Projector {
            qubit, direction, ..
        } => Ok(Number::Approx(direction.dot(&rho.marginal_bloch(*qubit)?))),
    }
}

/// `f_ρ(E)` as a float.
pub fn f_value_f64(rho: &QuantumState, e: &Measurement) -> Result<f64> {
    f_value(rho, e).map(|v| v.to_f64())
}

/// Draws `Y ∈ {±1}` with mean `f_ρ(E)`.
pub fn sample_outcome<R: Rng + ?Sized>(rho: &QuantumState, e: &Measurement, rng: &mut R) -> Result<Label> {
    let f = f_value_f64(rho, e)?;
    Ok(label_with_mean(f, rng))
}

pub(crate) fn label_with_mean<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Label {
    let accept = (1.0 + mean) / 2.0;
    Label::from_sign(rng.gen::<f64>() < accept)
}

/// A finite distribution with exact weights summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteDistribution {
    n: usize,
    items: Vec<(Measurement, BigRational)>,
}

impl FiniteDistribution {
    pub fn new_exact(items: Vec<(Measurement, BigRational)>) -> Result<Self> {
        let n = items
            .first()
            .map(|(m, _)| m.n())
            .ok_or_else(|| Error::InvalidDistribution("empty distribution".into()))?;
        let mut total = BigRational::zero();
        for (m, w) in &items {
            check_dims(n, m.n())?;
            if *w < BigRational::zero() {
                return Err(Error::InvalidDistribution("negative weight".into()));
            }
            total += w;
        }
        if !total.is_one() {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}, not 1")));
        }
        Ok(FiniteDistribution { n, items })
    }

    /// Float weights summing to one within `1e-9`; stored exactly after
    /// renormalization.
    pub fn from_weights(items: Vec<(Measurement, f64)>) -> Result<Self> {
        let sum: f64 = items.iter().map(|(_, w)| *w).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!("weights sum to {sum}, not 1")));
        }
        let exact: Option<Vec<(Measurement, BigRational)>> = items
            .into_iter()
            .map(|(m, w)| exact::from_f64(w).map(|r| (m, r)))
            .collect();
        let exact = exact.ok_or_else(|| Error::InvalidDistribution("non-finite weight".into()))?;
        let total: BigRational = exact.iter().map(|(_, w)| w.clone()).sum();
        if total.is_zero() {
            return Err(Error::InvalidDistribution("zero total weight".into()));
        }
        Self::new_exact(exact.into_iter().map(|(m, w)| (m, w / &total)).collect())
    }

    pub fn point(m: Measurement) -> Self {
        FiniteDistribution {
            n: m.n(),
            items: vec![(m, BigRational::one())],
        }
    }

    pub fn items(&self) -> &[(Measurement, BigRational)] {
        &self.items
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionDescriptor", into = "DistributionDescriptor")]
pub enum MeasurementDistribution {
    /// Uniform over all `2·4^n` Pauli measurements, including `E = I` and `E = 0`.
    UniformPauli { n: usize },
    /// Uniform over the `2^n` parity measurements `E_x`, including `x = 0`.
    UniformParity { n: usize },
    /// Pick a qubit uniformly, then a Haar-random single-qubit projector on it.
    HaarSingleQubitProduct { n: usize },
    Finite(FiniteDistribution),
}

/// JSON descriptor: `{"kind": "uniform_pauli" | "uniform_parity" |
/// "haar_product", "n": int}` or `{"kind": "finite", "items": [[m, w], ...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionDescriptor {
    UniformPauli { n: usize },
    UniformParity { n: usize },
    HaarProduct { n: usize },
    Finite { items: Vec<(Measurement, f64)> },
}

impl TryFrom<DistributionDescriptor> for MeasurementDistribution {
    type Error = Error;
    fn try_from(d: DistributionDescriptor) -> Result<Self> {
        let positive = |n: usize| {
            if n == 0 {
                Err(Error::InvalidDistribution("n must be positive".into()))
            } else {
                Ok(n)
            }
        };
        Ok(match d {
            DistributionDescriptor::UniformPauli { n } => Self::UniformPauli { n: positive(n)? },
            DistributionDescriptor::UniformParity { n } => Self::UniformParity { n: positive(n)? },
            DistributionDescriptor::HaarProduct { n } => {
                Self::HaarSingleQubitProduct { n: positive(n)? }
            }
            DistributionDescriptor::Finite { items } => {
                Self::Finite(FiniteDistribution::from_weights(items)?)
            }
        })
    }
}

impl From<MeasurementDistribution> for DistributionDescriptor {
    fn from(d: MeasurementDistribution) -> Self {
        match d {
            MeasurementDistribution::UniformPauli { n } => Self::UniformPauli { n },
            MeasurementDistribution::UniformParity { n } => Self::UniformParity { n },
            MeasurementDistribution::HaarSingleQubitProduct { n } => Self::HaarProduct { n },
            MeasurementDistribution::Finite(f) => Self::Finite {
                items: f
                    .items
                    .into_iter()
                    .map(|(m, w)| (m, exact::to_f64(&w)))
                    .collect(),
            },
        }
    }
}

impl MeasurementDistribution {
    pub fn n(&self) -> usize {
        match self {
            Self::UniformPauli { n } | Self::UniformParity { n } | Self::HaarSingleQubitProduct { n } => *n,
            Self::Finite(f) => f.n,
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, Self::HaarSingleQubitProduct { .. })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Measurement {
        match self {
            Self::UniformPauli { n } => {
                let mut p = PauliOperator::identity(*n);
                for q in 0..*n {
                    let letter = ['I', 'X', 'Y', 'Z'][rng.gen_range(0..4)];
                    let single = PauliOperator::single(*n, q, letter).expect("qubit in range");
                    p = p.product(&single).expect("same n").to_signed().expect("disjoint support");
                }
                Measurement::pauli(p.with_sign(rng.gen()))
            }
            Self::UniformParity { n } => {
                let bits: Vec<bool> = (0..*n).map(|_| rng.gen()).collect();
                Measurement::parity(&BitString::from_bools(&bits))
            }
            Self::HaarSingleQubitProduct { n } => Measurement::Projector {
                n: *n,
                qubit: rng.gen_range(0..*n),
                direction: haar_direction(rng),
            },
            Self::Finite(f) => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (m, w) in &f.items {
                    acc += exact::to_f64(w);
                    if u < acc {
                        return m.clone();
                    }
                }
                f.items.last().expect("non-empty").0.clone()
            }
        }
    }

    /// The full support with exact weights, when finite and small enough.
    pub fn support(&self) -> Result<Vec<(Measurement, BigRational)>> {
        match self {
            Self::UniformPauli { n } => {
                if *n > MAX_PAULI_SUPPORT_QUBITS {
                    return Err(Error::EnumerationBudget {
                        n: *n,
                        max: MAX_PAULI_SUPPORT_QUBITS,
                    });
                }
                let w = BigRational::new(1.into(), BigInt::from(2) << (2 * n));
                Ok(crate::pauli::all_signed_paulis(*n)
                    .map(|p| (Measurement::pauli(p), w.clone()))
                    .collect())
            }
            Self::UniformParity { n } => {
                if *n > MAX_PARITY_SUPPORT_QUBITS {
                    return Err(Error::EnumerationBudget {
                        n: *n,
                        max: MAX_PARITY_SUPPORT_QUBITS,
                    });
                }
                let w = exact::inv_pow2(*n);
                Ok((0..1u64 << n)
                    .map(|x| (Measurement::parity(&BitString::from_u64(*n, x)), w.clone()))
                    .collect())
            }
            Self::HaarSingleQubitProduct { .. } => Err(Error::ExactUnavailable(
                "the Haar single-qubit distribution is continuous".into(),
            )),
            Self::Finite(f) => Ok(f.items.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

/// A value with its Monte Carlo standard error (`None` when exact).
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub value: Number,
    pub std_error: Option<f64>,
}

impl Estimate {
    fn exact(value: Number) -> Self {
        Estimate {
            value,
            std_error: None,
        }
    }
}

/// `⟨f_ρ, f_σ⟩_D = E_{E~D}[f_ρ(E) f_σ(E)]`.
pub fn inner_product(
    rho: &QuantumState,
    sigma: &QuantumState,
    d: &MeasurementDistribution,
    mode: EvalMode,
) -> Result<Estimate> {
    check_dims(rho.n(), sigma.n())?;
    check_dims(rho.n(), d.n())?;
    match mode {
        EvalMode::Exact => exact_inner_product(rho, sigma, d).map(Estimate::exact),
        EvalMode::MonteCarlo { samples, seed } => monte_carlo(d, samples, seed, |e| {
            Ok(f_value_f64(rho, e)? * f_value_f64(sigma, e)?)
        }),
    }
}

/// `‖f_ρ‖²_D`.
pub fn norm_squared(rho: &QuantumState, d: &MeasurementDistribution, mode: EvalMode) -> Result<Estimate> {
    inner_product(rho, rho, d, mode)
}

/// `‖f_ρ - f_σ‖²_D`.
pub fn squared_loss(
    rho: &QuantumState,
    sigma: &QuantumState,
    d: &MeasurementDistribution,
    mode: EvalMode,
) -> Result<Estimate> {
    check_dims(rho.n(), sigma.n())?;
    check_dims(rho.n(), d.n())?;
    match mode {
        EvalMode::Exact => {
            if let MeasurementDistribution::HaarSingleQubitProduct { n } = d {
                return haar_squared_loss(rho, sigma, *n).map(|v| Estimate::exact(Number::Approx(v)));
            }
            if matches!(d, MeasurementDistribution::Finite(_) | MeasurementDistribution::UniformParity { .. }) {
                return enumerate(d, |e| {
                    let diff = f_value(rho, e)?.sub(&f_value(sigma, e)?);
                    Ok(diff.mul(&diff))
                })
                .map(Estimate::exact);
            }
            let rr = exact_inner_product(rho, rho, d)?;
            let ss = exact_inner_product(sigma, sigma, d)?;
            let rs = exact_inner_product(rho, sigma, d)?;
            Ok(Estimate::exact(rr.add(&ss).sub(&rs.add(&rs))))
        }
        EvalMode::MonteCarlo { samples, seed } => monte_carlo(d, samples, seed, |e| {
            let diff = f_value_f64(rho, e)? - f_value_f64(sigma, e)?;
            Ok(diff * diff)
        }),
    }
}

/// `(4/3n) Σ_i ‖ρ_i - σ_i‖²_tr` over single-qubit marginals.
pub fn haar_squared_loss(rho: &QuantumState, sigma: &QuantumState, n: usize) -> Result<f64> {
    let mut total = 0.0;
    for q in 0..n {
        let t = rho.marginal_bloch(q)?.trace_distance(&sigma.marginal_bloch(q)?);
        total += t * t;
    }
    Ok(4.0 * total / (3.0 * n as f64))
}

fn exact_inner_product(rho: &QuantumState, sigma: &QuantumState, d: &MeasurementDistribution) -> Result<Number> {
    use QuantumState as S;
    match d {
        MeasurementDistribution::UniformPauli { n } => {
            // (1/(2·4^n)) Σ_{P ∈ 𝒫_n} tr(Pρ)tr(Pσ) = (1/4^n) Σ_{bodies} tr(Pρ)tr(Pσ)
            let scale = Number::Exact(exact::inv_pow2(2 * n));
            let sum = match (rho, sigma) {
                (S::MaximallyMixed { .. }, _) | (_, S::MaximallyMixed { .. }) => Number::Exact(BigRational::one()),
                (S::Stabilizer { group: s }, S::Stabilizer { group: t }) => {
                    let (plus, minus) = crate::stabilizer::signed_intersection_counts(s, t)?;
                    Number::Exact(BigRational::from_integer(BigInt::from(plus) - BigInt::from(minus)))
                }
                (S::Stabilizer { group }, other) | (other, S::Stabilizer { group }) => {
                    let mut acc = Number::zero();
                    for p in group.elements()? {
                        acc = acc.add(&other.pauli_expectation(&p)?);
                    }
                    acc
                }
                (S::Product { qubits: a }, S::Product { qubits: b }) => {
                    Number::Approx(a.iter().zip(b).map(|(x, y)| 1.0 + x.dot(y)).product())
                }
            };
            Ok(scale.mul(&sum))
        }
        MeasurementDistribution::HaarSingleQubitProduct { n } => {
            // E_u[(u·r)(u·s)] = r·s/3 for u uniform on the sphere.
            let mut total = 0.0;
            for q in 0..*n {
                total += rho.marginal_bloch(q)?.dot(&sigma.marginal_bloch(q)?);
            }
            Ok(Number::Approx(total / (3.0 * *n as f64)))
        }
        _ => enumerate(d, |e| Ok(f_value(rho, e)?.mul(&f_value(sigma, e)?))),
    }
}

/// `Σ_E w(E) g(E)` over a finite support.
fn enumerate(d: &MeasurementDistribution, g: impl Fn(&Measurement) -> Result<Number>) -> Result<Number> {
    let mut acc = Number::zero();
    for (m, w) in d.support()? {
        acc = acc.add(&Number::Exact(w).mul(&g(&m)?));
    }
    Ok(acc)
}

/// Mean and standard error of `g(E)` for `E ~ D`, chunked over
/// seed substreams so the result does not depend on the thread count.
pub fn monte_carlo(
    d: &MeasurementDistribution,
    samples: usize,
    seed: u64,
    g: impl Fn(&Measurement) -> Result<f64> + Sync,
) -> Result<Estimate> {
    if samples < 2 {
        return Err(Error::InvalidParameter("Monte Carlo needs at least 2 samples".into()));
    }
    let chunks: Vec<(u64, usize)> = rng::chunks(samples).collect();
    let partial: Vec<(f64, f64)> = chunks
        .par_iter()
        .map(|&(k, m)| {
            let mut r = rng::substream(seed, k);
            let mut s = 0.0;
            let mut s2 = 0.0;
            for _ in 0..m {
                let v = g(&d.sample(&mut r))?;
                s += v;
                s2 += v * v;
            }
            Ok((s, s2))
        })
        .collect::<Result<_>>()?;
    let (s, s2) = partial.iter().fold((0.0, 0.0), |(a, b), (c, e)| (a + c, b + e));
    let m = samples as f64;
    let mean = s / m;
    let var = ((s2 / m) - mean * mean).max(0.0) * m / (m - 1.0);
    Ok(Estimate {
        value: Number::Approx(mean),
        std_error: Some((var / m).sqrt()),
    })
}

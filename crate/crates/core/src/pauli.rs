//! Signed n-qubit Pauli operators in symplectic form.
//!
//! A [`PauliOperator`] is `±1` times a tensor product of single-qubit Paulis,
//! stored as a sign bit plus X and Z bit strings. Qubit `i` carries
//! I/X/Y/Z according to `(x_i, z_i) = (0,0)/(1,0)/(1,1)/(0,1)`, where the
//! `(1,1)` case is the Hermitian `Y` itself (not `XZ`).
//!
//! Products of real-signed Paulis can pick up a factor of `±i`, so
//! [`pauli_product`] returns a [`PhasedPauli`] that carries the full phase.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bits::BitString;
use crate::error::{check_dims, Error, Result};

/// Powers of `i`: `{+1, +i, -1, -i}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    One,
    I,
    MinusOne,
    MinusI,
}

impl Phase {
    pub fn from_exponent(k: i64) -> Phase {
        match k.rem_euclid(4) {
            0 => Phase::One,
            1 => Phase::I,
            2 => Phase::MinusOne,
            _ => Phase::MinusI,
        }
    }

    /// `k` such that the phase is `i^k`, `k` in `0..4`.
    pub fn exponent(self) -> i64 {
        match self {
            Phase::One => 0,
            Phase::I => 1,
            Phase::MinusOne => 2,
            Phase::MinusI => 3,
        }
    }

    pub fn is_real(self) -> bool {
        matches!(self, Phase::One | Phase::MinusOne)
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;
    // phases i^a · i^b = i^(a+b)
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: Phase) -> Phase {
        Phase::from_exponent(self.exponent() + rhs.exponent())
    }
}

/// An element of `{±1}·{I,X,Y,Z}^⊗n`.
///
/// Field order matters: the derived `Ord` sorts by X bits, then Z bits, then
/// sign, which is the order canonical tableaux are compared in.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliOperator {
    x: BitString,
    z: BitString,
    negative: bool,
}

impl PauliOperator {
    pub fn identity(n: usize) -> Self {
        PauliOperator {
            x: BitString::zeros(n),
            z: BitString::zeros(n),
            negative: false,
        }
    }

    pub fn new(negative: bool, x: BitString, z: BitString) -> Result<Self> {
        check_dims(x.len(), z.len())?;
        Ok(PauliOperator { x, z, negative })
    }

    /// `letter` on qubit `qubit`, identity elsewhere.
    pub fn single(n: usize, qubit: usize, letter: char) -> Result<Self> {
        if qubit >= n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: qubit + 1,
            });
        }
        let mut p = Self::identity(n);
        let (x, z) = letter_bits(letter).ok_or_else(|| Error::ParsePauli(letter.to_string()))?;
        p.x.set(qubit, x);
        p.z.set(qubit, z);
        Ok(p)
    }

    /// `Z` on every qubit where `mask` is set. These are the parity operators
    /// `P_x = Σ_y (-1)^{x·y} |y⟩⟨y|`.
    pub fn z_string(mask: &BitString) -> Self {
        PauliOperator {
            x: BitString::zeros(mask.len()),
            z: mask.clone(),
            negative: false,
        }
    }

    /// Decodes the `index`-th unsigned Pauli string: qubit `i` takes letter
    /// `(index >> 2i) & 3` in the order I, X, Y, Z.
    pub fn from_index(n: usize, index: u64, negative: bool) -> Self {
        assert!(n <= 31, "index decoding supports n <= 31");
        let mut p = Self::identity(n);
        for q in 0..n {
            let (x, z) = match (index >> (2 * q)) & 3 {
                0 => (false, false),
                1 => (true, false),
                2 => (true, true),
                _ => (false, true),
            };
            p.x.set(q, x);
            p.z.set(q, z);
        }
        p.negative = negative;
        p
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.x.len()
    }

    #[inline]
    pub fn is_negative(&self) -> bool {
        self.negative
    }

    /// `+1` or `-1`.
    pub fn sign(&self) -> i8 {
        if self.negative {
            -1
        } else {
            1
        }
    }

    pub fn x_bits(&self) -> &BitString {
        &self.x
    }

    pub fn z_bits(&self) -> &BitString {
        &self.z
    }

    pub fn letter(&self, qubit: usize) -> char {
        match (self.x.get(qubit), self.z.get(qubit)) {
            (false, false) => 'I',
            (true, false) => 'X',
            (true, true) => 'Y',
            (false, true) => 'Z',
        }
    }

    /// True for `±I^⊗n`.
    pub fn is_identity_up_to_sign(&self) -> bool {
        self.x.is_zero() && self.z.is_zero()
    }

    pub fn weight(&self) -> usize {
        (0..self.n())
            .filter(|&q| self.x.get(q) || self.z.get(q))
            .count()
    }

    pub fn negated(&self) -> Self {
        let mut p = self.clone();
        p.negative = !p.negative;
        p
    }

    pub fn with_sign(&self, negative: bool) -> Self {
        let mut p = self.clone();
        p.negative = negative;
        p
    }

    /// Exact matrix product `self · other`.
    pub fn product(&self, other: &PauliOperator) -> Result<PhasedPauli> {
        pauli_product(self, other)
    }

    pub fn commutes_with(&self, other: &PauliOperator) -> Result<bool> {
        commutes(self, other)
    }

    /// `tr(P) / 2^n`: `±1` for `±I^⊗n`, otherwise 0.
    pub fn normalized_trace(&self) -> i8 {
        if self.is_identity_up_to_sign() {
            self.sign()
        } else {
            0
        }
    }
}

fn letter_bits(c: char) -> Option<(bool, bool)> {
    match c {
        'I' => Some((false, false)),
        'X' => Some((true, false)),
        'Y' => Some((true, true)),
        'Z' => Some((false, true)),
        _ => None,
    }
}

/// `phase · body`, where `body` always has a positive sign.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PhasedPauli {
    pub phase: Phase,
    pub body: PauliOperator,
}

impl PhasedPauli {
    pub fn identity(n: usize) -> Self {
        PhasedPauli {
            phase: Phase::One,
            body: PauliOperator::identity(n),
        }
    }

    pub fn from_signed(p: &PauliOperator) -> Self {
        PhasedPauli {
            phase: if p.negative { Phase::MinusOne } else { Phase::One },
            body: p.with_sign(false),
        }
    }

    /// Membership in `𝒫_n = {±1}·{I,X,Y,Z}^⊗n`.
    pub fn is_real_signed(&self) -> bool {
        self.phase.is_real()
    }

    pub fn to_signed(&self) -> Option<PauliOperator> {
        match self.phase {
            Phase::One => Some(self.body.clone()),
            Phase::MinusOne => Some(self.body.with_sign(true)),
            _ => None,
        }
    }

    /// Right-multiplies in place: `self ← self · p`.
    pub fn mul_assign(&mut self, p: &PauliOperator) -> Result<()> {
        check_dims(self.body.n(), p.n())?;
        let k = letter_phase_exponent(&self.body, p);
        let sign = if p.negative { 2 } else { 0 };
        self.phase = Phase::from_exponent(self.phase.exponent() + k + sign);
        self.body.x.xor_assign(&p.x);
        self.body.z.xor_assign(&p.z);
        Ok(())
    }

    pub fn mul(&self, other: &PhasedPauli) -> Result<PhasedPauli> {
        let mut out = self.clone();
        out.mul_assign(&other.body)?;
        out.phase = out.phase * other.phase;
        Ok(out)
    }
}

impl fmt::Display for PhasedPauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.phase {
            Phase::One => "+",
            Phase::I => "+i",
            Phase::MinusOne => "-",
            Phase::MinusI => "-i",
        };
        write!(f, "{prefix}{}", letters(&self.body))
    }
}

/// Exponent `k` (mod 4) with `σ(a)·σ(b) = i^k σ(a ⊕ b)`, ignoring signs.
///
/// Single-qubit products picking up `+i`: XY, YZ, ZX. Picking up `-i`: YX,
/// ZY, XZ. Evaluated word-parallel.
fn letter_phase_exponent(a: &PauliOperator, b: &PauliOperator) -> i64 {
    let mut plus: i64 = 0;
    let mut minus: i64 = 0;
    let words = a.x.words().len();
    for w in 0..words {
        let (x1, z1) = (a.x.words()[w], a.z.words()[w]);
        let (x2, z2) = (b.x.words()[w], b.z.words()[w]);
        let xy = x1 & !z1 & x2 & z2;
        let yz = x1 & z1 & !x2 & z2;
        let zx = !x1 & z1 & x2 & !z2;
        let yx = x1 & z1 & x2 & !z2;
        let zy = !x1 & z1 & x2 & z2;
        let xz = x1 & !z1 & !x2 & z2;
        plus += (xy | yz | zx).count_ones() as i64;
        minus += (yx | zy | xz).count_ones() as i64;
    }
    plus - minus
}

/// Matrix product of two signed Paulis with exact phase.
pub fn pauli_product(a: &PauliOperator, b: &PauliOperator) -> Result<PhasedPauli> {
    check_dims(a.n(), b.n())?;
    let mut out = PhasedPauli::from_signed(a);
    out.mul_assign(b)?;
    Ok(out)
}

/// Symplectic commutation test `⟨a.x, b.z⟩ + ⟨a.z, b.x⟩ = 0` over GF(2).
pub fn commutes(a: &PauliOperator, b: &PauliOperator) -> Result<bool> {
    check_dims(a.n(), b.n())?;
    Ok(a.x.dot(&b.z) == a.z.dot(&b.x))
}

/// `tr(P)`: `±2^n` for `±I^⊗n`, else 0.
pub fn pauli_trace_sign(p: &PauliOperator) -> BigInt {
    match p.normalized_trace() {
        0 => BigInt::from(0),
        s => BigInt::from(s) << p.n(),
    }
}

/// All `2·4^n` elements of `𝒫_n`, positive signs first for each body.
pub fn all_signed_paulis(n: usize) -> impl Iterator<Item = PauliOperator> {
    assert!(n <= 15, "enumerating 𝒫_n is limited to n <= 15");
    (0..1u64 << (2 * n)).flat_map(move |k| {
        [false, true]
            .into_iter()
            .map(move |neg| PauliOperator::from_index(n, k, neg))
    })
}

fn letters(p: &PauliOperator) -> String {
    (0..p.n()).map(|q| p.letter(q)).collect()
}

impl fmt::Display for PauliOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", if self.negative { '-' } else { '+' }, letters(self))
    }
}

impl fmt::Debug for PauliOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pauli({self})")
    }
}

impl FromStr for PauliOperator {
    type Err = Error;

    /// Optional leading `+`, `-` or `−` (U+2212), then letters from `IXYZ`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::ParsePauli(s.to_string());
        let (negative, body) = if let Some(rest) = s.strip_prefix('+') {
            (false, rest)
        } else if let Some(rest) = s.strip_prefix('-') {
            (true, rest)
        } else if let Some(rest) = s.strip_prefix('\u{2212}') {
            (true, rest)
        } else {
            (false, s)
        };
        if body.is_empty() {
            return Err(bad());
        }
        let n = body.chars().count();
        let mut p = PauliOperator::identity(n);
        for (q, c) in body.chars().enumerate() {
            let (x, z) = letter_bits(c).ok_or_else(bad)?;
            p.x.set(q, x);
            p.z.set(q, z);
        }
        p.negative = negative;
        Ok(p)
    }
}

impl Serialize for PauliOperator {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliOperator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The two-outcome measurement `E = (I + P)/2`.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct PauliMeasurement {
    pub pauli: PauliOperator,
}

impl PauliMeasurement {
    pub fn new(pauli: PauliOperator) -> Self {
        PauliMeasurement { pauli }
    }

    pub fn n(&self) -> usize {
        self.pauli.n()
    }

    /// `E = I`, from `P = +I^⊗n`.
    pub fn accepts_always(&self) -> bool {
        self.pauli.is_identity_up_to_sign() && !self.pauli.is_negative()
    }

    /// `E = 0`, from `P = -I^⊗n`.
    pub fn rejects_always(&self) -> bool {
        self.pauli.is_identity_up_to_sign() && self.pauli.is_negative()
    }
}

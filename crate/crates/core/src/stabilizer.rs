//! Stabilizer groups as canonical GF(2) tableaux.
//!
//! A [`StabilizerGroup`] holds `n` commuting, independent, real-signed
//! generators in reduced row echelon form over the `2n` symplectic columns
//! (X block first, then Z block). Signs ride along with the row operations,
//! so equal groups always produce bit-identical generator lists.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{check_dims, Error, Result};
use crate::pauli::{all_signed_paulis, commutes, PauliMeasurement, PauliOperator, PhasedPauli};

/// Largest `n` accepted by [`enumerate_stabilizer_groups`].
pub const MAX_ENUMERATION_QUBITS: usize = 3;

/// Largest `n` for which group elements are materialized.
pub const MAX_ELEMENT_QUBITS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Membership {
    /// `P ∈ S`.
    Plus,
    /// `-P ∈ S`.
    Minus,
    Absent,
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<PauliOperator>", into = "Vec<PauliOperator>")]
pub struct StabilizerGroup {
    generators: Vec<PauliOperator>,
}

impl StabilizerGroup {
    /// Validates the generators and stores their canonical form.
    pub fn new(generators: Vec<PauliOperator>) -> Result<Self> {
        let n = generators
            .first()
            .map(PauliOperator::n)
            .ok_or_else(|| Error::InvalidStabilizer("no generators".into()))?;
        if generators.len() != n {
            return Err(Error::InvalidStabilizer(format!(
                "{} generators for {n} qubits",
                generators.len()
            )));
        }
        for g in &generators {
            check_dims(n, g.n())?;
        }
        for (i, a) in generators.iter().enumerate() {
            for b in &generators[i + 1..] {
                if !commutes(a, b)? {
                    return Err(Error::InvalidStabilizer(format!("{a} and {b} anticommute")));
                }
            }
        }
        let generators = canonicalize(generators)?;
        Ok(StabilizerGroup { generators })
    }

    /// The group of `|bits⟩`: generators `(-1)^{b_i} Z_i`.
    pub fn computational_basis(bits: &BitString) -> Self {
        let n = bits.len();
        let generators = (0..n)
            .map(|q| {
                PauliOperator::single(n, q, 'Z')
                    .expect("qubit in range")
                    .with_sign(bits.get(q))
            })
            .collect();
        // Already in reduced echelon form.
        StabilizerGroup { generators }
    }

    pub fn n(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[PauliOperator] {
        &self.generators
    }

    /// Decides `P ∈ S`, `-P ∈ S`, or neither.
    pub fn contains(&self, p: &PauliOperator) -> Result<Membership> {
        check_dims(self.n(), p.n())?;
        let mut acc = PhasedPauli::identity(self.n());
        for row in &self.generators {
            let col = pivot_column(row).expect("generators are never the identity");
            if column_bit(p, col) {
                acc.mul_assign(row)?;
            }
        }
        if acc.body.x_bits() != p.x_bits() || acc.body.z_bits() != p.z_bits() {
            return Ok(Membership::Absent);
        }
        let element = acc
            .to_signed()
            .expect("products of commuting real-signed Paulis are real-signed");
        Ok(if element.is_negative() == p.is_negative() {
            Membership::Plus
        } else {
            Membership::Minus
        })
    }

    /// `tr(Pρ)` for the stabilized pure state: `+1`, `-1` or `0`.
    pub fn trace_pauli(&self, p: &PauliOperator) -> Result<i8> {
        Ok(match self.contains(p)? {
            Membership::Plus => 1,
            Membership::Minus => -1,
            Membership::Absent => 0,
        })
    }

    /// `tr(Eρ) = (1 + tr(Pρ))/2`, one of `0`, `1/2`, `1`.
    pub fn trace_measurement(&self, e: &PauliMeasurement) -> Result<BigRational> {
        let t = self.trace_pauli(&e.pauli)?;
        Ok(BigRational::new(BigInt::from(1 + t), BigInt::from(2)))
    }

    /// All `2^n` group elements in Gray-code order starting from `+I`.
    pub fn elements(&self) -> Result<Vec<PauliOperator>> {
        let n = self.n();
        if n > MAX_ELEMENT_QUBITS {
            return Err(Error::EnumerationBudget {
                n,
                max: MAX_ELEMENT_QUBITS,
            });
        }
        let mut out = Vec::with_capacity(1 << n);
        let mut acc = PhasedPauli::identity(n);
        out.push(acc.body.clone());
        for step in 1u64..(1u64 << n) {
            let flip = step.trailing_zeros() as usize;
            acc.mul_assign(&self.generators[flip])?;
            out.push(acc.to_signed().expect("real-signed group element"));
        }
        Ok(out)
    }

    /// One signed Pauli string per line.
    pub fn to_tableau_text(&self) -> String {
        let mut s = String::new();
        for g in &self.generators {
            s.push_str(&g.to_string());
            s.push('\n');
        }
        s
    }

    pub fn from_tableau_text(text: &str) -> Result<Self> {
        let gens = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<PauliOperator>>>()?;
        Self::new(gens)
    }
}

impl TryFrom<Vec<PauliOperator>> for StabilizerGroup {
    type Error = Error;
    fn try_from(v: Vec<PauliOperator>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<StabilizerGroup> for Vec<PauliOperator> {
    fn from(s: StabilizerGroup) -> Self {
        s.generators
    }
}

impl fmt::Display for StabilizerGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let gens: Vec<String> = self.generators.iter().map(|g| g.to_string()).collect();
        write!(f, "<{}>", gens.join(", "))
    }
}

impl fmt::Debug for StabilizerGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StabilizerGroup{self}")
    }
}

/// Column `c < n` is the X bit of qubit `c`; column `n + q` is the Z bit of `q`.
fn column_bit(p: &PauliOperator, c: usize) -> bool {
    let n = p.n();
    if c < n {
        p.x_bits().get(c)
    } else {
        p.z_bits().get(c - n)
    }
}

fn pivot_column(p: &PauliOperator) -> Option<usize> {
    (0..2 * p.n()).find(|&c| column_bit(p, c))
}

/// Reduced row echelon form of a commuting set of real-signed generators.
///
/// Errors if the generators are linearly dependent, which covers both
/// redundant generators and sets whose span would contain `-I`.
pub fn canonicalize(mut rows: Vec<PauliOperator>) -> Result<Vec<PauliOperator>> {
    let Some(n) = rows.first().map(PauliOperator::n) else {
        return Ok(rows);
    };
    let mut rank = 0;
    for col in 0..2 * n {
        let Some(pivot) = (rank..rows.len()).find(|&r| column_bit(&rows[r], col)) else {
            continue;
        };
        rows.swap(rank, pivot);
        let pivot_row = rows[rank].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && column_bit(row, col) {
                *row = row
                    .product(&pivot_row)?
                    .to_signed()
                    .ok_or_else(|| Error::InvalidStabilizer("anticommuting generators".into()))?;
            }
        }
        rank += 1;
    }
    if rank < rows.len() {
        return Err(Error::InvalidStabilizer(
            "generators are not independent (redundant generator or -I in the group)".into(),
        ));
    }
    Ok(rows)
}

/// `(|S ∩ T|, |S ∩ (-T)|)` by walking the elements of `S`.
pub fn signed_intersection_counts(s: &StabilizerGroup, t: &StabilizerGroup) -> Result<(u64, u64)> {
    check_dims(s.n(), t.n())?;
    let mut plus = 0;
    let mut minus = 0;
    for p in s.elements()? {
        match t.contains(&p)? {
            Membership::Plus => plus += 1,
            Membership::Minus => minus += 1,
            Membership::Absent => {}
        }
    }
    Ok((plus, minus))
}

/// Every n-qubit stabilizer group, sorted by canonical tableau.
pub fn enumerate_stabilizer_groups(n: usize) -> Result<Vec<StabilizerGroup>> {
    if n == 0 || n > MAX_ENUMERATION_QUBITS {
        return Err(Error::EnumerationBudget {
            n,
            max: MAX_ENUMERATION_QUBITS,
        });
    }
    let candidates: Vec<PauliOperator> = all_signed_paulis(n)
        .filter(|p| !p.is_identity_up_to_sign())
        .collect();
    let found: BTreeSet<StabilizerGroup> = (0..candidates.len())
        .into_par_iter()
        .map(|first| {
            let mut out = BTreeSet::new();
            let mut chosen = vec![candidates[first].clone()];
            extend(&candidates, first + 1, &mut chosen, n, &mut out);
            out
        })
        .reduce(BTreeSet::new, |mut a, b| {
            a.extend(b);
            a
        });
    Ok(found.into_iter().collect())
}

fn extend(
    candidates: &[PauliOperator],
    start: usize,
    chosen: &mut Vec<PauliOperator>,
    n: usize,
    out: &mut BTreeSet<StabilizerGroup>,
) {
    if chosen.len() == n {
        let group = StabilizerGroup::new(chosen.clone()).expect("valid by construction");
        out.insert(group);
        return;
    }
    let span = span_of(chosen);
    for (idx, c) in candidates.iter().enumerate().skip(start) {
        if !chosen.iter().all(|g| commutes(g, c).expect("same n")) {
            continue;
        }
        // If the body is already spanned, then either c or -c is in the group:
        // the first is redundant, the second would put -I in the group.
        if span.contains(&(c.x_bits().clone(), c.z_bits().clone())) {
            continue;
        }
        chosen.push(c.clone());
        extend(candidates, idx + 1, chosen, n, out);
        chosen.pop();
    }
}

fn span_of(gens: &[PauliOperator]) -> HashSet<(BitString, BitString)> {
    let n = gens[0].n();
    let mut span = HashSet::new();
    span.insert((BitString::zeros(n), BitString::zeros(n)));
    for g in gens {
        let shifted: Vec<_> = span
            .iter()
            .map(|(x, z)| (x.xor(g.x_bits()), z.xor(g.z_bits())))
            .collect();
        span.extend(shifted);
    }
    span
}

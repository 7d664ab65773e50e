//! Dense-matrix reference implementations, used only as test oracles.
#![allow(dead_code)]

use num_complex::Complex64 as C;
use sqlab::pconcept::{BlochVector, QuantumState};
use sqlab::PauliOperator;

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub dim: usize,
    pub a: Vec<C>,
}

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);
const I: C = C::new(0.0, 1.0);

impl Dense {
    pub fn zeros(dim: usize) -> Self {
        Dense { dim, a: vec![ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.a[i * dim + i] = ONE;
        }
        m
    }

    pub fn from_rows(rows: [[C; 2]; 2]) -> Self {
        Dense { dim: 2, a: vec![rows[0][0], rows[0][1], rows[1][0], rows[1][1]] }
    }

    pub fn at(&self, i: usize, j: usize) -> C {
        self.a[i * self.dim + j]
    }

    pub fn mul(&self, o: &Dense) -> Dense {
        let d = self.dim;
        let mut out = Dense::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let x = self.at(i, k);
                if x == ZERO {
                    continue;
                }
                for j in 0..d {
                    out.a[i * d + j] += x * o.at(k, j);
                }
            }
        }
        out
    }

    pub fn kron(&self, o: &Dense) -> Dense {
        let (p, q) = (self.dim, o.dim);
        let mut out = Dense::zeros(p * q);
        for i in 0..p {
            for j in 0..p {
                for k in 0..q {
                    for l in 0..q {
                        out.a[(i * q + k) * p * q + j * q + l] = self.at(i, j) * o.at(k, l);
                    }
                }
            }
        }
        out
    }

    pub fn add(&self, o: &Dense) -> Dense {
        Dense { dim: self.dim, a: self.a.iter().zip(&o.a).map(|(x, y)| x + y).collect() }
    }

    pub fn scale(&self, s: C) -> Dense {
        Dense { dim: self.dim, a: self.a.iter().map(|x| x * s).collect() }
    }

    pub fn trace(&self) -> C {
        (0..self.dim).map(|i| self.at(i, i)).sum()
    }

    pub fn close(&self, o: &Dense, tol: f64) -> bool {
        self.a.iter().zip(&o.a).all(|(x, y)| (x - y).norm() <= tol)
    }
}

pub fn letter(c: char) -> Dense {
    match c {
        'I' => Dense::identity(2),
        'X' => Dense::from_rows([[ZERO, ONE], [ONE, ZERO]]),
        'Y' => Dense::from_rows([[ZERO, -I], [I, ZERO]]),
        'Z' => Dense::from_rows([[ONE, ZERO], [ZERO, -ONE]]),
        _ => panic!("bad letter {c}"),
    }
}

/// Qubit 0 is the leftmost tensor factor.
pub fn pauli(p: &PauliOperator) -> Dense {
    let mut m = Dense::identity(1);
    for q in 0..p.n() {
        m = m.kron(&letter(p.letter(q)));
    }
    m.scale(C::new(p.sign() as f64, 0.0))
}

pub fn bloch(b: &BlochVector) -> Dense {
    let (x, y, z) = (letter('X'), letter('Y'), letter('Z'));
    Dense::identity(2)
        .add(&x.scale(C::new(b.x, 0.0)))
        .add(&y.scale(C::new(b.y, 0.0)))
        .add(&z.scale(C::new(b.z, 0.0)))
        .scale(C::new(0.5, 0.0))
}

/// Projector `Π (I + g)/2` over the generators.
pub fn stabilizer_rho(gens: &[PauliOperator]) -> Dense {
    let n = gens[0].n();
    let d = 1 << n;
    let mut rho = Dense::identity(d);
    for g in gens {
        rho = rho.mul(&Dense::identity(d).add(&pauli(g)).scale(C::new(0.5, 0.0)));
    }
    rho
}

pub fn state(s: &QuantumState) -> Dense {
    match s {
        QuantumState::Stabilizer { group } => stabilizer_rho(group.generators()),
        QuantumState::Product { qubits } => {
            qubits.iter().fold(Dense::identity(1), |m, b| m.kron(&bloch(b)))
        }
        QuantumState::MaximallyMixed { n } => {
            let d = 1 << n;
            Dense::identity(d).scale(C::new(1.0 / d as f64, 0.0))
        }
    }
}

pub fn depolarize(rho: &Dense, eta: f64) -> Dense {
    let d = rho.dim;
    rho.scale(C::new(1.0 - eta, 0.0)).add(&Dense::identity(d).scale(C::new(eta / d as f64, 0.0)))
}

/// `tr(Eρ)` for `E = (I + P)/2`.
pub fn pauli_acceptance(p: &PauliOperator, rho: &Dense) -> f64 {
    let d = rho.dim;
    let e = Dense::identity(d).add(&pauli(p)).scale(C::new(0.5, 0.0));
    e.mul(rho).trace().re
}

/// Counts pure stabilizer states by brute force over generator tuples,
/// deduplicating the density matrices.
pub fn count_stabilizer_states(n: usize) -> usize {
    let d = 1 << n;
    let all: Vec<Dense> = sqlab::pauli::all_signed_paulis(n)
        .filter(|p| !p.is_identity_up_to_sign())
        .map(|p| pauli(&p))
        .collect();
    let mut seen: Vec<Dense> = Vec::new();
    let mut tuple = vec![0usize; n];
    loop {
        let mut rho = Dense::identity(d);
        for &i in &tuple {
            rho = rho.mul(&Dense::identity(d).add(&all[i]).scale(C::new(0.5, 0.0)));
        }
        let commuting = tuple.iter().all(|&i| {
            tuple.iter().all(|&j| all[i].mul(&all[j]).close(&all[j].mul(&all[i]), 1e-12))
        });
        if commuting
            && (rho.trace().re - 1.0).abs() < 1e-9
            && rho.mul(&rho).close(&rho, 1e-9)
            && !seen.iter().any(|s| s.close(&rho, 1e-9))
        {
            seen.push(rho);
        }
        let mut k = 0;
        loop {
            if k == n {
                return seen.len();
            }
            tuple[k] += 1;
            if tuple[k] < all.len() {
                break;
            }
            tuple[k] = 0;
            k += 1;
        }
    }
}

//! Dense reference matrices built from Pauli Kronecker products and a
//! Taylor-series exponential, independent of the simulator's gate kernels.
#![allow(dead_code)]

use hamforge::sim::UnitaryMatrix;
use num_complex::Complex64 as C;

pub type M = Vec<Vec<C>>;

pub fn zeros(d: usize) -> M {
    vec![vec![C::new(0.0, 0.0); d]; d]
}

pub fn eye(d: usize) -> M {
    let mut m = zeros(d);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = C::new(1.0, 0.0);
    }
    m
}

pub fn mul(a: &M, b: &M) -> M {
    let d = a.len();
    let mut out = zeros(d);
    for i in 0..d {
        for k in 0..d {
            let x = a[i][k];
            if x == C::new(0.0, 0.0) {
                continue;
            }
            for j in 0..d {
                out[i][j] += x * b[k][j];
            }
        }
    }
    out
}

pub fn add(a: &M, b: &M) -> M {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect())
        .collect()
}

pub fn scale(a: &M, z: C) -> M {
    a.iter().map(|r| r.iter().map(|x| x * z).collect()).collect()
}

pub fn pauli(c: char) -> M {
    let (o, z, i) = (C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 1.0));
    match c {
        'I' => vec![vec![o, z], vec![z, o]],
        'X' => vec![vec![z, o], vec![o, z]],
        'Y' => vec![vec![z, -i], vec![i, z]],
        'Z' => vec![vec![o, z], vec![z, -o]],
        _ => panic!("unknown Pauli {c}"),
    }
}

/// `A ⊗ B` with `B` on the low-order bits.
pub fn kron(a: &M, b: &M) -> M {
    let (da, db) = (a.len(), b.len());
    let mut out = zeros(da * db);
    for i in 0..da {
        for j in 0..da {
            for k in 0..db {
                for l in 0..db {
                    out[i * db + k][j * db + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

/// Pauli string on `n` qubits; `ops` lists `(qubit, letter)`. Qubit `q` is
/// bit `q` of the basis index.
pub fn pauli_string(n: usize, ops: &[(usize, char)]) -> M {
    let mut m = vec![vec![C::new(1.0, 0.0)]];
    for q in (0..n).rev() {
        let c = ops.iter().find(|(p, _)| *p == q).map(|(_, c)| *c).unwrap_or('I');
        m = kron(&m, &pauli(c));
    }
    m
}

/// `exp(A)` by scaling and squaring with a 30-term Taylor series.
pub fn expm(a: &M) -> M {
    let norm: f64 = a.iter().map(|r| r.iter().map(|x| x.norm()).sum::<f64>()).fold(0.0, f64::max);
    let mut s = 0;
    while norm / f64::powi(2.0, s) > 0.5 {
        s += 1;
    }
    let a = scale(a, C::new(f64::powi(2.0, -s), 0.0));
    let d = a.len();
    let mut term = eye(d);
    let mut sum = eye(d);
    for k in 1..30 {
        term = scale(&mul(&term, &a), C::new(1.0 / k as f64, 0.0));
        sum = add(&sum, &term);
    }
    for _ in 0..s {
        sum = mul(&sum, &sum);
    }
    sum
}

/// `XX + YY + ZZ` on qubits `(a, b)` of an `n`-qubit register.
pub fn heis_generator(n: usize, a: usize, b: usize) -> M {
    let mut h = zeros(1 << n);
    for c in ['X', 'Y', 'Z'] {
        h = add(&h, &pauli_string(n, &[(a, c), (b, c)]));
    }
    h
}

/// `exp(-i·angle·(XX+YY+ZZ))` on two qubits.
pub fn heis_oracle(angle: f64) -> M {
    expm(&scale(&heis_generator(2, 0, 1), C::new(0.0, -angle)))
}

pub fn diag(entries: &[C]) -> M {
    let mut m = zeros(entries.len());
    for (i, e) in entries.iter().enumerate() {
        m[i][i] = *e;
    }
    m
}

pub fn to_unitary(m: &M) -> UnitaryMatrix {
    UnitaryMatrix::from_rows(m).unwrap()
}

pub fn distance(u: &UnitaryMatrix, m: &M, phase_invariant: bool) -> f64 {
    hamforge::sim::spectral_distance(u, &to_unitary(m), phase_invariant).unwrap()
}

/// Full Hamiltonian of the disordered Heisenberg model.
pub fn hamiltonian(n: usize, edges: &[(usize, usize)], d: &[f64]) -> M {
    let mut h = zeros(1 << n);
    for &(a, b) in edges {
        h = add(&h, &heis_generator(n, a, b));
    }
    for (q, &di) in d.iter().enumerate() {
        h = add(&h, &scale(&pauli_string(n, &[(q, 'Z')]), C::new(di, 0.0)));
    }
    h
}

//! Dense simulation at desk scale: circuit unitaries (with measurement
//! branches), exact evolution, spectral distances and the minimal-`r` search.
//!
//! Basis index bit `i` holds qubit `i`.

use std::collections::HashMap;

use faer::{Mat, Side};
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::circuit::{Circuit, Gate};
use crate::synth::{self, DisorderedHeisenberg, Lowering, Mode, SynthError};

/// Largest register `unitary_of` and `exact_evolution` accept.
pub const MAX_QUBITS: usize = 12;
/// Branches must agree on the data operator to this tolerance.
pub const BRANCH_TOLERANCE: f64 = 1e-10;
/// r-search gives up past this repetition count.
pub const MAX_R: u64 = 1 << 24;

const MAX_BRANCHES: usize = 1 << 12;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{qubits} qubits exceeds the simulator capacity of {max}")]
    Capacity { qubits: usize, max: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("measurement branches disagree on the data operator (distance {0:.3e})")]
    Nondeterministic(f64),
    #[error("ancilla qubits do not return to |0⟩ (residual {0:.3e})")]
    AncillaNotReset(f64),
    #[error("too many live measurement branches")]
    TooManyBranches,
    #[error("Hamiltonian is not Hermitian (residual {0:.3e})")]
    NotHermitian(f64),
    #[error("no r ≤ {max} reaches the error budget {budget:e}")]
    SearchFailed { budget: f64, max: u64 },
    #[error("error budget must be positive, got {0}")]
    BadBudget(f64),
    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

/// A square complex matrix acting on `num_qubits` qubits.
#[derive(Clone, Debug)]
pub struct UnitaryMatrix {
    num_qubits: usize,
    mat: Mat<C64>,
}

impl UnitaryMatrix {
    pub fn identity(num_qubits: usize) -> Self {
        let d = 1usize << num_qubits;
        UnitaryMatrix {
            num_qubits,
            mat: Mat::identity(d, d),
        }
    }

    /// Wraps a `2^q × 2^q` matrix.
    pub fn from_mat(mat: Mat<C64>) -> Result<Self, SimError> {
        let d = mat.nrows();
        if mat.ncols() != d || !d.is_power_of_two() {
            return Err(SimError::DimensionMismatch(mat.nrows(), mat.ncols()));
        }
        Ok(UnitaryMatrix {
            num_qubits: d.trailing_zeros() as usize,
            mat,
        })
    }

    /// Builds from row-major entries.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self, SimError> {
        let d = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(SimError::DimensionMismatch(d, bad.len()));
        }
        Self::from_mat(Mat::from_fn(d, d, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.mat[(row, col)]
    }

    pub fn as_mat(&self) -> &Mat<C64> {
        &self.mat
    }

    pub fn into_mat(self) -> Mat<C64> {
        self.mat
    }

    /// `self · other`
    pub fn mul(&self, other: &UnitaryMatrix) -> Result<UnitaryMatrix, SimError> {
        if self.dim() != other.dim() {
            return Err(SimError::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(UnitaryMatrix {
            num_qubits: self.num_qubits,
            mat: &self.mat * &other.mat,
        })
    }

    pub fn adjoint(&self) -> UnitaryMatrix {
        UnitaryMatrix {
            num_qubits: self.num_qubits,
            mat: self.mat.adjoint().to_owned(),
        }
    }

    /// `‖U†U − I‖_max`
    pub fn unitarity_residual(&self) -> f64 {
        let p = self.mat.adjoint() * &self.mat;
        max_abs_diff_identity(&p)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_residual() <= tol
    }

    pub fn scale(&self, z: C64) -> UnitaryMatrix {
        UnitaryMatrix {
            num_qubits: self.num_qubits,
            mat: Mat::from_fn(self.dim(), self.dim(), |i, j| self.mat[(i, j)] * z),
        }
    }
}

fn max_abs_diff_identity(m: &Mat<C64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let e = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            worst = worst.max((m[(i, j)] - e).norm());
        }
    }
    worst
}

/// Largest singular value.
pub fn spectral_norm(m: &Mat<C64>) -> Result<f64, SimError> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let gram = m.adjoint() * m;
    let ev = gram
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| SimError::LinearAlgebra(format!("{e:?}")))?;
    let top = ev.iter().copied().fold(0.0f64, f64::max);
    Ok(top.max(0.0).sqrt())
}

/// `‖u − v‖₂`, or `‖u − e^{iφ}v‖₂` with `φ = arg tr(v†u)` when
/// `phase_invariant` is set.
pub fn spectral_distance(
    u: &UnitaryMatrix,
    v: &UnitaryMatrix,
    phase_invariant: bool,
) -> Result<f64, SimError> {
    if u.dim() != v.dim() {
        return Err(SimError::DimensionMismatch(u.dim(), v.dim()));
    }
    matrix_distance(&u.mat, &v.mat, phase_invariant)
}

fn matrix_distance(u: &Mat<C64>, v: &Mat<C64>, phase_invariant: bool) -> Result<f64, SimError> {
    let phase = if phase_invariant {
        let mut tr = C64::new(0.0, 0.0);
        for j in 0..u.ncols() {
            for i in 0..u.nrows() {
                tr += v[(i, j)].conj() * u[(i, j)];
            }
        }
        if tr.norm() > 0.0 {
            tr / tr.norm()
        } else {
            C64::new(1.0, 0.0)
        }
    } else {
        C64::new(1.0, 0.0)
    };
    let d = Mat::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)] - phase * v[(i, j)]);
    spectral_norm(&d)
}

/// Row-major `rows × cols` block: rows index the full register, columns the
/// data-qubit inputs.
#[derive(Clone)]
struct Branch {
    rows: usize,
    cols: usize,
    amp: Vec<C64>,
    clbits: Vec<bool>,
}

impl Branch {
    fn row_pair_mut(&mut self, r0: usize, r1: usize) -> (&mut [C64], &mut [C64]) {
        debug_assert!(r0 < r1);
        let c = self.cols;
        let (lo, hi) = self.amp.split_at_mut(r1 * c);
        (&mut lo[r0 * c..r0 * c + c], &mut hi[..c])
    }

    fn apply_1q(&mut self, q: usize, m: [[C64; 2]; 2]) {
        let bit = 1 << q;
        for r0 in 0..self.rows {
            if r0 & bit != 0 {
                continue;
            }
            let (a, b) = self.row_pair_mut(r0, r0 | bit);
            for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                let (x0, y0) = (*x, *y);
                *x = m[0][0] * x0 + m[0][1] * y0;
                *y = m[1][0] * x0 + m[1][1] * y0;
            }
        }
    }

    fn scale_rows(&mut self, f: impl Fn(usize) -> Option<C64>) {
        let c = self.cols;
        for r in 0..self.rows {
            if let Some(z) = f(r) {
                for x in &mut self.amp[r * c..r * c + c] {
                    *x *= z;
                }
            }
        }
    }

    fn swap_rows(&mut self, r0: usize, r1: usize) {
        let (lo, hi) = if r0 < r1 { (r0, r1) } else { (r1, r0) };
        let (a, b) = self.row_pair_mut(lo, hi);
        a.swap_with_slice(b);
    }

    /// Permutes rows by an involution `f`.
    fn permute_rows(&mut self, f: impl Fn(usize) -> usize) {
        for r in 0..self.rows {
            let s = f(r);
            if s > r {
                self.swap_rows(r, s);
            }
        }
    }

    fn norm_sqr(&self) -> f64 {
        self.amp.iter().map(|z| z.norm_sqr()).sum()
    }
}

fn cis(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

fn one_qubit_matrix(g: &Gate) -> Option<(usize, [[C64; 2]; 2])> {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let rot = |t: f64| (C64::new((t / 2.0).cos(), 0.0), (t / 2.0).sin());
    Some(match *g {
        Gate::H(q) => (q, [[h, h], [h, -h]]),
        Gate::X(q) => (q, [[z, o], [o, z]]),
        Gate::Z(q) => (q, [[o, z], [z, -o]]),
        Gate::S(q) => (q, [[o, z], [z, C64::i()]]),
        Gate::Sdg(q) => (q, [[o, z], [z, -C64::i()]]),
        Gate::T(q) => (q, [[o, z], [z, cis(std::f64::consts::FRAC_PI_4)]]),
        Gate::Tdg(q) => (q, [[o, z], [z, cis(-std::f64::consts::FRAC_PI_4)]]),
        Gate::Rx(t, q) => {
            let (c, s) = rot(t);
            let ms = C64::new(0.0, -s);
            (q, [[c, ms], [ms, c]])
        }
        Gate::Ry(t, q) => {
            let (c, s) = rot(t);
            (q, [[c, C64::new(-s, 0.0)], [C64::new(s, 0.0), c]])
        }
        Gate::Rz(t, q) => (q, [[cis(-t / 2.0), z], [z, cis(t / 2.0)]]),
        _ => return None,
    })
}

fn apply_unitary_gate(b: &mut Branch, g: &Gate) {
    if let Some((q, m)) = one_qubit_matrix(g) {
        b.apply_1q(q, m);
        return;
    }
    match *g {
        Gate::Cnot(c, t) => {
            let (cb, tb) = (1 << c, 1 << t);
            b.permute_rows(|r| if r & cb != 0 { r ^ tb } else { r });
        }
        Gate::Swap(x, y) => {
            let (xb, yb) = (1 << x, 1 << y);
            b.permute_rows(|r| {
                if ((r & xb != 0) as u8) ^ ((r & yb != 0) as u8) == 1 {
                    r ^ xb ^ yb
                } else {
                    r
                }
            });
        }
        Gate::Cz(x, y) => {
            let m = (1 << x) | (1 << y);
            b.scale_rows(|r| (r & m == m).then_some(C64::new(-1.0, 0.0)));
        }
        Gate::CzPow(a, x, y) => {
            let m = (1 << x) | (1 << y);
            let p = cis(std::f64::consts::PI * a);
            b.scale_rows(|r| (r & m == m).then_some(p));
        }
        Gate::Heis(a, x, y) => apply_heis(b, a, x, y),
        _ => unreachable!("non-unitary gate {g:?}"),
    }
}

/// `exp(-ia(XX+YY+ZZ))`: phase `e^{-ia}` on equal bits; on `{01,10}` it is
/// `e^{ia}(cos 2a − i sin 2a σx)`.
fn apply_heis(b: &mut Branch, a: f64, x: usize, y: usize) {
    let (xb, yb) = (1 << x, 1 << y);
    let same = cis(-a);
    let c = cis(a) * (2.0 * a).cos();
    let s = cis(a) * C64::new(0.0, -(2.0 * a).sin());
    let cols = b.cols;
    for r in 0..b.rows {
        let bx = r & xb != 0;
        let by = r & yb != 0;
        if bx == by {
            for v in &mut b.amp[r * cols..r * cols + cols] {
                *v *= same;
            }
        } else if bx {
            let r1 = r ^ xb ^ yb;
            let (lo, hi) = if r < r1 { (r, r1) } else { (r1, r) };
            let (p, q) = b.row_pair_mut(lo, hi);
            for (u, v) in p.iter_mut().zip(q.iter_mut()) {
                let (u0, v0) = (*u, *v);
                *u = c * u0 + s * v0;
                *v = s * u0 + c * v0;
            }
        }
    }
}

fn measure(branch: Branch, q: usize, clbit: usize, x_basis: bool) -> Vec<Branch> {
    let mut base = branch;
    if x_basis {
        let (_, h) = one_qubit_matrix(&Gate::H(q)).expect("H is a single-qubit gate");
        base.apply_1q(q, h);
    }
    let bit = 1 << q;
    let mut out = Vec::with_capacity(2);
    for outcome in [false, true] {
        let mut b = base.clone();
        let c = b.cols;
        for r in 0..b.rows {
            if (r & bit != 0) != outcome {
                b.amp[r * c..r * c + c].fill(C64::new(0.0, 0.0));
            }
        }
        if outcome {
            // Reset: move the |1⟩ rows down to |0⟩.
            b.permute_rows(|r| r ^ bit);
        }
        b.clbits[clbit] = outcome;
        if b.norm_sqr() > 1e-24 * b.cols as f64 {
            out.push(b);
        }
    }
    out
}

/// Clbits whose current value is read at or after `from` before being
/// overwritten.
fn live_clbits(ops: &[Gate], from: usize, num_clbits: usize) -> Vec<usize> {
    let mut seen = vec![false; num_clbits];
    let mut live = Vec::new();
    for g in &ops[from..] {
        if let Some(k) = g.clbit() {
            if !seen[k] {
                seen[k] = true;
                if g.is_classically_controlled() {
                    live.push(k);
                }
            }
        }
    }
    live
}

/// Merges branches that agree on every live clbit and carry the same
/// normalized amplitudes; their probabilities add.
fn merge_branches(branches: Vec<Branch>, live: &[usize]) -> Vec<Branch> {
    let mut out: Vec<(Branch, f64)> = Vec::new();
    for b in branches {
        let p = b.norm_sqr();
        let found = out.iter_mut().find(|(o, q)| {
            live.iter().all(|&k| o.clbits[k] == b.clbits[k]) && {
                let (so, sb) = ((o.cols as f64 / q).sqrt(), (b.cols as f64 / p).sqrt());
                o.amp
                    .iter()
                    .zip(&b.amp)
                    .all(|(x, y)| (*x * so - *y * sb).norm() <= BRANCH_TOLERANCE)
            }
        });
        match found {
            Some((_, q)) => *q += p,
            None => out.push((b, p)),
        }
    }
    out.into_iter()
        .map(|(mut b, q)| {
            let f = (q / b.norm_sqr()).sqrt();
            for z in &mut b.amp {
                *z *= f;
            }
            b
        })
        .collect()
}

/// Data-qubit operator of `c`.
///
/// Ancillas start in `|0⟩`. Measurements split the simulation into branches
/// with classical feedforward applied per branch; every branch must return
/// the ancillas to `|0⟩` and induce the same data operator.
pub fn unitary_of(c: &Circuit) -> Result<UnitaryMatrix, SimError> {
    let total = c.num_qubits();
    if total > MAX_QUBITS {
        return Err(SimError::Capacity {
            qubits: total,
            max: MAX_QUBITS,
        });
    }
    let data = c.num_data_qubits();
    let (rows, cols) = (1usize << total, 1usize << data);
    let mut amp = vec![C64::new(0.0, 0.0); rows * cols];
    for j in 0..cols {
        amp[j * cols + j] = C64::new(1.0, 0.0);
    }
    let mut branches = vec![Branch {
        rows,
        cols,
        amp,
        clbits: vec![false; c.num_clbits()],
    }];
    let mut measured = false;
    let ops = c.ops();
    for (i, g) in ops.iter().enumerate() {
        match *g {
            Gate::MeasZ(q, k) | Gate::MeasX(q, k) => {
                measured = true;
                if branches.len() > 1 {
                    branches = merge_branches(branches, &live_clbits(ops, i, c.num_clbits()));
                }
                let x = matches!(g, Gate::MeasX(..));
                branches = branches
                    .into_iter()
                    .flat_map(|b| measure(b, q, k, x))
                    .collect();
                if branches.len() > MAX_BRANCHES {
                    return Err(SimError::TooManyBranches);
                }
            }
            Gate::XIfc(k, q) => {
                for b in branches.iter_mut().filter(|b| b.clbits[k]) {
                    apply_unitary_gate(b, &Gate::X(q));
                }
            }
            Gate::ZIfc(k, q) => {
                for b in branches.iter_mut().filter(|b| b.clbits[k]) {
                    apply_unitary_gate(b, &Gate::Z(q));
                }
            }
            Gate::CzIfc(k, x, y) => {
                for b in branches.iter_mut().filter(|b| b.clbits[k]) {
                    apply_unitary_gate(b, &Gate::Cz(x, y));
                }
            }
            _ => {
                for b in &mut branches {
                    apply_unitary_gate(b, g);
                }
            }
        }
    }

    let phase = cis(c.global_phase());
    let mut result: Option<Mat<C64>> = None;
    for b in &branches {
        let p = b.norm_sqr() / cols as f64;
        let norm = p.sqrt();
        let residual = b.amp[cols * cols..]
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max)
            / norm;
        if residual > BRANCH_TOLERANCE {
            return Err(SimError::AncillaNotReset(residual));
        }
        let m = Mat::from_fn(cols, cols, |i, j| b.amp[i * cols + j] * phase / norm);
        match &result {
            None => result = Some(m),
            Some(first) => {
                let mut worst = 0.0f64;
                for j in 0..cols {
                    for i in 0..cols {
                        worst = worst.max((first[(i, j)] - m[(i, j)]).norm());
                    }
                }
                if worst > BRANCH_TOLERANCE {
                    return Err(SimError::Nondeterministic(worst));
                }
            }
        }
    }
    let u = UnitaryMatrix::from_mat(result.expect("at least one branch survives"))?;
    if measured {
        let res = u.unitarity_residual();
        if res > 1e-9 {
            return Err(SimError::Nondeterministic(res));
        }
    }
    Ok(u)
}

/// States of `n` qubits grouped by popcount. Both the Hamiltonian and the
/// product-formula blocks conserve total magnetization.
#[derive(Clone, Debug)]
pub struct Sectors {
    n: usize,
    states: Vec<Vec<usize>>,
    index: Vec<usize>,
}

impl Sectors {
    pub fn new(n: usize) -> Self {
        let mut states = vec![Vec::new(); n + 1];
        let mut index = vec![0; 1 << n];
        for (x, slot) in index.iter_mut().enumerate() {
            let w = x.count_ones() as usize;
            *slot = states[w].len();
            states[w].push(x);
        }
        Sectors { n, states, index }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn states(&self, w: usize) -> &[usize] {
        &self.states[w]
    }

    pub fn position(&self, x: usize) -> usize {
        self.index[x]
    }
}

/// Real symmetric sector block of `H = Σ_E (XX+YY+ZZ) + Σ d_i Z_i`.
fn sector_hamiltonian(h: &DisorderedHeisenberg, sectors: &Sectors, w: usize) -> Mat<f64> {
    let states = sectors.states(w);
    let dim = states.len();
    let mut m = Mat::<f64>::zeros(dim, dim);
    for (i, &x) in states.iter().enumerate() {
        let mut diag = 0.0;
        for (q, d) in h.disorders().iter().enumerate() {
            diag += if x >> q & 1 == 0 { *d } else { -*d };
        }
        for &(u, v) in h.graph().edges() {
            if (x >> u & 1) == (x >> v & 1) {
                diag += 1.0;
            } else {
                diag -= 1.0;
                let y = x ^ (1 << u) ^ (1 << v);
                m[(sectors.position(y), i)] += 2.0;
            }
        }
        m[(i, i)] += diag;
    }
    m
}

fn check_capacity(n: usize) -> Result<(), SimError> {
    if n > MAX_QUBITS {
        Err(SimError::Capacity {
            qubits: n,
            max: MAX_QUBITS,
        })
    } else {
        Ok(())
    }
}

fn hermiticity_residual(m: &Mat<f64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..j {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// `exp(-itH)` restricted to each magnetization sector, from the symmetric
/// eigendecomposition of the sector block.
fn exact_sectors(h: &DisorderedHeisenberg, sectors: &Sectors) -> Result<Vec<Mat<C64>>, SimError> {
    let t = h.time();
    (0..=sectors.n())
        .map(|w| {
            let hw = sector_hamiltonian(h, sectors, w);
            let res = hermiticity_residual(&hw);
            if res > 1e-12 {
                return Err(SimError::NotHermitian(res));
            }
            let eig = hw
                .self_adjoint_eigen(Side::Lower)
                .map_err(|e| SimError::LinearAlgebra(format!("{e:?}")))?;
            let (v, s) = (eig.U(), eig.S());
            let dim = hw.nrows();
            let vc = Mat::from_fn(dim, dim, |i, j| C64::new(v[(i, j)], 0.0));
            let scaled = Mat::from_fn(dim, dim, |i, j| vc[(i, j)] * cis(-t * s[j]));
            Ok(&scaled * vc.transpose())
        })
        .collect()
}

/// `exp(-itH)` as a full `2^n × 2^n` matrix.
pub fn exact_evolution(h: &DisorderedHeisenberg) -> Result<UnitaryMatrix, SimError> {
    check_capacity(h.n())?;
    let sectors = Sectors::new(h.n());
    let blocks = exact_sectors(h, &sectors)?;
    let d = 1usize << h.n();
    let mut full = Mat::<C64>::zeros(d, d);
    for (w, b) in blocks.iter().enumerate() {
        let st = sectors.states(w);
        for (j, &y) in st.iter().enumerate() {
            for (i, &x) in st.iter().enumerate() {
                full[(x, y)] = b[(i, j)];
            }
        }
    }
    UnitaryMatrix::from_mat(full)
}

/// Unitary of a magnetization-conserving circuit (`Heis`, `Rz`, `Z`, `S`,
/// `T`, `CzPow`, `Cz` only) on one sector.
fn sector_unitary(c: &Circuit, sectors: &Sectors, w: usize) -> Mat<C64> {
    let states = sectors.states(w);
    let dim = states.len();
    let mut b = Branch {
        rows: dim,
        cols: dim,
        amp: vec![C64::new(0.0, 0.0); dim * dim],
        clbits: Vec::new(),
    };
    for i in 0..dim {
        b.amp[i * dim + i] = C64::new(1.0, 0.0);
    }
    // Consecutive diagonal gates are folded into one row scaling.
    let mut diag: Vec<f64> = vec![0.0; dim];
    let mut pending = false;
    let flush = |b: &mut Branch, diag: &mut Vec<f64>, pending: &mut bool| {
        if *pending {
            b.scale_rows(|r| Some(cis(diag[r])));
            diag.iter_mut().for_each(|x| *x = 0.0);
            *pending = false;
        }
    };
    for g in c.ops() {
        let phase_of = |x: usize| -> Option<f64> {
            let bit = |q: usize| x >> q & 1 == 1;
            use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
            Some(match *g {
                Gate::Rz(t, q) => {
                    if bit(q) {
                        t / 2.0
                    } else {
                        -t / 2.0
                    }
                }
                Gate::Z(q) => PI * bit(q) as u8 as f64,
                Gate::S(q) => FRAC_PI_2 * bit(q) as u8 as f64,
                Gate::Sdg(q) => -FRAC_PI_2 * bit(q) as u8 as f64,
                Gate::T(q) => FRAC_PI_4 * bit(q) as u8 as f64,
                Gate::Tdg(q) => -FRAC_PI_4 * bit(q) as u8 as f64,
                Gate::Cz(x0, y0) => PI * (bit(x0) && bit(y0)) as u8 as f64,
                Gate::CzPow(a, x0, y0) => PI * a * (bit(x0) && bit(y0)) as u8 as f64,
                _ => return None,
            })
        };
        if phase_of(0).is_some() {
            for (r, &x) in states.iter().enumerate() {
                diag[r] += phase_of(x).expect("diagonal gate");
            }
            pending = true;
            continue;
        }
        flush(&mut b, &mut diag, &mut pending);
        match *g {
            Gate::Heis(a, x, y) => {
                let (xb, yb) = (1 << x, 1 << y);
                let same = cis(-a);
                let cc = cis(a) * (2.0 * a).cos();
                let ss = cis(a) * C64::new(0.0, -(2.0 * a).sin());
                for (r, &s) in states.iter().enumerate() {
                    let bx = s & xb != 0;
                    let by = s & yb != 0;
                    if bx == by {
                        for v in &mut b.amp[r * dim..r * dim + dim] {
                            *v *= same;
                        }
                    } else if bx {
                        let r1 = sectors.position(s ^ xb ^ yb);
                        let (lo, hi) = if r < r1 { (r, r1) } else { (r1, r) };
                        let (p, q) = b.row_pair_mut(lo, hi);
                        for (u, v) in p.iter_mut().zip(q.iter_mut()) {
                            let (u0, v0) = (*u, *v);
                            *u = cc * u0 + ss * v0;
                            *v = ss * u0 + cc * v0;
                        }
                    }
                }
            }
            other => panic!("gate {other:?} does not conserve magnetization"),
        }
    }
    flush(&mut b, &mut diag, &mut pending);
    let phase = cis(c.global_phase());
    Mat::from_fn(dim, dim, |i, j| b.amp[i * dim + j] * phase)
}

fn matrix_power(m: &Mat<C64>, mut e: u64) -> Mat<C64> {
    let d = m.nrows();
    let mut result: Mat<C64> = Mat::identity(d, d);
    let mut base = m.clone();
    let mut first = true;
    while e > 0 {
        if e & 1 == 1 {
            result = if first { base.clone() } else { &result * &base };
            first = false;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    result
}

/// A Hamiltonian with its exact evolution precomputed per sector, ready for
/// repeated Trotter-error queries.
pub struct TrotterProblem {
    h: DisorderedHeisenberg,
    sectors: Sectors,
    exact: Vec<Mat<C64>>,
    layout: crate::graphs::ColoredLayout,
}

impl TrotterProblem {
    pub fn new(h: &DisorderedHeisenberg) -> Result<Self, SimError> {
        check_capacity(h.n())?;
        let sectors = Sectors::new(h.n());
        let exact = exact_sectors(h, &sectors)?;
        Ok(TrotterProblem {
            h: h.clone(),
            layout: synth::default_layout(h.graph()),
            sectors,
            exact,
        })
    }

    pub fn hamiltonian(&self) -> &DisorderedHeisenberg {
        &self.h
    }

    /// `‖exp(-itH) − [S_{2k}(t/r)]^r‖₂`.
    ///
    /// Both gate lowerings realize `Heis` exactly, so the error is evaluated
    /// on the macro-gate block; `mode` does not change the value.
    pub fn error(&self, order: u32, r: u64, _mode: Mode) -> Result<f64, SimError> {
        let plan = synth::suzuki_stages(order, self.h.time(), r)?;
        let block = synth::build_pf_blocks(&self.h, &self.layout, &plan, 1, Lowering::Macro)?;
        let mut worst = 0.0f64;
        for w in 0..=self.sectors.n() {
            let bw = sector_unitary(&block, &self.sectors, w);
            let approx = matrix_power(&bw, r);
            worst = worst.max(matrix_distance(&self.exact[w], &approx, false)?);
        }
        Ok(worst)
    }

    /// See [`find_min_r`].
    pub fn find_min_r(&self, order: u32, budget: f64, mode: Mode) -> Result<RSearchResult, SimError> {
        if !(budget > 0.0 && budget.is_finite()) {
            return Err(SimError::BadBudget(budget));
        }
        let mut cache: HashMap<u64, f64> = HashMap::new();
        let mut eval = |r: u64| -> Result<f64, SimError> {
            if let Some(&e) = cache.get(&r) {
                return Ok(e);
            }
            let e = self.error(order, r, mode)?;
            cache.insert(r, e);
            Ok(e)
        };
        let mut hi = 1u64;
        while eval(hi)? > budget {
            if hi >= MAX_R {
                return Err(SimError::SearchFailed { budget, max: MAX_R });
            }
            hi *= 2;
        }
        let mut lo = hi / 2; // fails, or 0 when r = 1 already passes
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if eval(mid)? <= budget {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let mut r_min = hi;
        // The error need not be monotone in r: walk down while r − 1 passes.
        while r_min > 1 && eval(r_min - 1)? <= budget {
            r_min -= 1;
        }
        let achieved_error = eval(r_min)?;
        Ok(RSearchResult {
            r_min,
            achieved_error,
            evaluations: cache.len(),
        })
    }
}

/// Outcome of the minimal-`r` search.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct RSearchResult {
    pub r_min: u64,
    pub achieved_error: f64,
    pub evaluations: usize,
}

/// `‖exp(-itH) − U([S_{2k}(t/r)]^r)‖₂` without phase minimization.
pub fn trotter_error(
    h: &DisorderedHeisenberg,
    order: u32,
    r: u64,
    mode: Mode,
) -> Result<f64, SimError> {
    TrotterProblem::new(h)?.error(order, r, mode)
}

/// Smallest `r` whose Trotter error is at most `budget`: doubling from
/// `r = 1`, bisection of the bracket, then a check of `r_min − 1`.
///
/// The caller picks the budget; fault-tolerant estimates pass `ε/2`
/// ([`search_budget`]).
pub fn find_min_r(
    h: &DisorderedHeisenberg,
    order: u32,
    budget: f64,
    mode: Mode,
) -> Result<RSearchResult, SimError> {
    TrotterProblem::new(h)?.find_min_r(order, budget, mode)
}

/// Algorithmic share of the total error budget: all of it pre-FT, half of it
/// in the fault-tolerant regime.
pub fn search_budget(mode: Mode, eps: f64) -> f64 {
    match mode {
        Mode::PreFt => eps,
        Mode::Ft => eps / 2.0,
    }
}

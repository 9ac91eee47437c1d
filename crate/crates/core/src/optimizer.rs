//! Peephole optimizer: inverse-pair cancellation, rotation / `CzPow` /
//! `Heis` merging through commuting gates, and zero-angle deletion.
//!
//! Three-CNOT Heisenberg templates are first raised to `Heis` macros so that
//! consecutive interactions on the same pair can merge, then lowered again.
//! Every rewrite is exact; dropped gates that equal a scalar add that scalar
//! to the circuit's global phase.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::Serialize;
use thiserror::Error;

use crate::circuit::{count_resources, Circuit, Gate};
use crate::sim::{self, SimError};
use crate::synth::{self, Lowering};

/// Rotations within this distance of a multiple of `2π` are dropped.
pub const ZERO_TOLERANCE: f64 = 1e-12;
/// Sweeps per fixpoint phase.
pub const MAX_SWEEPS: usize = 20;
/// Largest register [`verify_equivalence`] accepts.
pub const VERIFY_MAX_QUBITS: usize = 10;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RewriteStats {
    pub cnot_removed: u64,
    pub rz_removed: u64,
    pub t_removed: u64,
    pub heis_merged: u64,
    pub czpow_merged: u64,
    pub gates_before: u64,
    pub gates_after: u64,
    pub passes_run: u64,
}

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("equivalence check supports at most {max} qubits, circuit has {qubits}")]
    Capacity { qubits: usize, max: usize },
    #[error("qubit counts differ: {0} vs {1}")]
    WidthMismatch(usize, usize),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Clone, Copy, Debug)]
struct Node {
    gate: Gate,
    /// `Heis` raised from a three-CNOT template; lowered again at the end.
    raised: bool,
}

enum Merge {
    Cancel,
    Replace(Gate),
}

fn same_pair(a: (usize, usize), b: (usize, usize)) -> bool {
    a == b || (a.0 == b.1 && a.1 == b.0)
}

fn merge(g: &Gate, h: &Gate, stats: &mut RewriteStats) -> Option<Merge> {
    use Gate::*;
    Some(match (*g, *h) {
        (H(a), H(b)) | (X(a), X(b)) | (Z(a), Z(b)) if a == b => Merge::Cancel,
        (S(a), Sdg(b)) | (Sdg(a), S(b)) | (T(a), Tdg(b)) | (Tdg(a), T(b)) if a == b => Merge::Cancel,
        (S(a), S(b)) | (Sdg(a), Sdg(b)) if a == b => Merge::Replace(Z(a)),
        (T(a), T(b)) if a == b => Merge::Replace(S(a)),
        (Tdg(a), Tdg(b)) if a == b => Merge::Replace(Sdg(a)),
        (Rz(x, a), Rz(y, b)) if a == b => Merge::Replace(Rz(x + y, a)),
        (Rx(x, a), Rx(y, b)) if a == b => Merge::Replace(Rx(x + y, a)),
        (Ry(x, a), Ry(y, b)) if a == b => Merge::Replace(Ry(x + y, a)),
        (Cnot(c1, t1), Cnot(c2, t2)) if c1 == c2 && t1 == t2 => Merge::Cancel,
        (Cz(a1, b1), Cz(a2, b2)) | (Swap(a1, b1), Swap(a2, b2)) if same_pair((a1, b1), (a2, b2)) => {
            Merge::Cancel
        }
        (CzPow(x, a1, b1), CzPow(y, a2, b2)) if same_pair((a1, b1), (a2, b2)) => {
            stats.czpow_merged += 1;
            Merge::Replace(CzPow(x + y, a2, b2))
        }
        (Cz(a1, b1), CzPow(y, a2, b2)) if same_pair((a1, b1), (a2, b2)) => {
            stats.czpow_merged += 1;
            Merge::Replace(CzPow(1.0 + y, a2, b2))
        }
        (CzPow(x, a1, b1), Cz(a2, b2)) if same_pair((a1, b1), (a2, b2)) => {
            stats.czpow_merged += 1;
            Merge::Replace(CzPow(x + 1.0, a2, b2))
        }
        (Heis(x, a1, b1), Heis(y, a2, b2)) if same_pair((a1, b1), (a2, b2)) => {
            stats.heis_merged += 1;
            Merge::Replace(Heis(x + y, a2, b2))
        }
        (ZIfc(c1, a), ZIfc(c2, b)) if c1 == c2 && a == b => Merge::Cancel,
        (CzIfc(c1, a1, b1), CzIfc(c2, a2, b2)) if c1 == c2 && same_pair((a1, b1), (a2, b2)) => {
            Merge::Cancel
        }
        _ => return None,
    })
}

fn is_x_like(g: &Gate) -> bool {
    matches!(g, Gate::X(_) | Gate::Rx(..))
}

/// Whether `g` and `h` (sharing at least one qubit) commute by one of the
/// structural rules.
fn commutes(g: &Gate, h: &Gate) -> bool {
    if g.is_measurement() || h.is_measurement() {
        return false;
    }
    if g.is_classically_controlled() || h.is_classically_controlled() {
        return false;
    }
    if g.is_diagonal() && h.is_diagonal() {
        return true;
    }
    if is_x_like(g) && is_x_like(h) {
        return true;
    }
    let through_cnot = |d: &Gate, c: usize, t: usize| {
        (d.is_diagonal() && !d.acts_on(t)) || (is_x_like(d) && !d.acts_on(c))
    };
    match (*g, *h) {
        (Gate::Cnot(c1, t1), Gate::Cnot(c2, t2)) => c1 != t2 && t1 != c2,
        (Gate::Cnot(c, t), d) | (d, Gate::Cnot(c, t)) => through_cnot(&d, c, t),
        (Gate::Heis(_, a1, b1), Gate::Heis(_, a2, b2)) => same_pair((a1, b1), (a2, b2)),
        _ => false,
    }
}

/// Drops gates that are a scalar multiple of the identity and rewrites
/// `CzPow(odd)` as `Cz`. Returns the replacement (if any) and the phase
/// to add.
fn normalize(g: &Gate) -> Option<(Option<Gate>, f64)> {
    let near = |x: f64, y: f64| (x - y).abs() <= ZERO_TOLERANCE;
    match *g {
        Gate::Rz(t, _) | Gate::Rx(t, _) | Gate::Ry(t, _) => {
            let r = t.rem_euclid(4.0 * PI);
            if near(r, 0.0) || near(r, 4.0 * PI) {
                Some((None, 0.0))
            } else if near(r, 2.0 * PI) {
                Some((None, PI))
            } else {
                None
            }
        }
        Gate::CzPow(a, x, y) => {
            let r = a.rem_euclid(2.0);
            if near(r, 0.0) || near(r, 2.0) {
                Some((None, 0.0))
            } else if near(r, 1.0) {
                Some((Some(Gate::Cz(x, y)), 0.0))
            } else {
                None
            }
        }
        Gate::Heis(a, _, _) => {
            let k = (a / PI).round();
            if near(a, k * PI) {
                Some((None, k * PI))
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Working copy with per-qubit timelines for commutation-aware scans.
struct Work {
    nodes: Vec<Option<Node>>,
    timeline: Vec<Vec<usize>>,
    /// Position of each op in the timeline of its first and second qubit.
    pos: Vec<(usize, usize)>,
    /// Op indices of measurements writing each classical bit.
    writes: Vec<Vec<usize>>,
    phase: f64,
}

impl Work {
    fn new(nodes: Vec<Node>, num_qubits: usize, num_clbits: usize, phase: f64) -> Self {
        let mut timeline = vec![Vec::new(); num_qubits];
        let mut writes = vec![Vec::new(); num_clbits];
        let mut pos = Vec::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            let (a, b) = n.gate.qubits();
            let pa = timeline[a].len();
            timeline[a].push(i);
            let pb = match b {
                Some(b) => {
                    let p = timeline[b].len();
                    timeline[b].push(i);
                    p
                }
                None => usize::MAX,
            };
            pos.push((pa, pb));
            if n.gate.is_measurement() {
                writes[n.gate.clbit().expect("measurements write a clbit")].push(i);
            }
        }
        Work {
            nodes: nodes.into_iter().map(Some).collect(),
            timeline,
            pos,
            writes,
            phase,
        }
    }

    fn into_nodes(self) -> (Vec<Node>, f64) {
        (self.nodes.into_iter().flatten().collect(), self.phase)
    }

    fn written_between(&self, clbit: usize, i: usize, j: usize) -> bool {
        let w = &self.writes[clbit];
        let k = w.partition_point(|&x| x <= i);
        k < w.len() && w[k] < j
    }

    fn next_alive(&self, q: usize, mut p: usize) -> Option<(usize, usize)> {
        let tl = &self.timeline[q];
        while p < tl.len() {
            if self.nodes[tl[p]].is_some() {
                return Some((tl[p], p));
            }
            p += 1;
        }
        None
    }

    /// First gate after `i` that merges with it, reached only through gates
    /// that commute with it.
    fn find_partner(&self, i: usize, stats: &mut RewriteStats) -> Option<(usize, Merge)> {
        let g = self.nodes[i]?;
        let (a, b) = g.gate.qubits();
        let mut pa = self.pos[i].0 + 1;
        let mut pb = b.map(|_| self.pos[i].1 + 1);
        loop {
            let na = self.next_alive(a, pa);
            let nb = match (b, pb) {
                (Some(b), Some(p)) => self.next_alive(b, p),
                _ => None,
            };
            let (j, on_a, on_b) = match (na, nb) {
                (None, None) => return None,
                (Some((j, _)), None) => (j, true, false),
                (None, Some((j, _))) => (j, false, true),
                (Some((ja, _)), Some((jb, _))) => (ja.min(jb), ja <= jb, jb <= ja),
            };
            let h = self.nodes[j].expect("alive");
            if h.raised == g.raised {
                let mut trial = RewriteStats::default();
                if let Some(m) = merge(&g.gate, &h.gate, &mut trial) {
                    let clbit_ok = match g.gate.clbit() {
                        Some(c) if g.gate.is_classically_controlled() => !self.written_between(c, i, j),
                        _ => true,
                    };
                    if clbit_ok {
                        stats.heis_merged += trial.heis_merged;
                        stats.czpow_merged += trial.czpow_merged;
                        return Some((j, m));
                    }
                }
            }
            if !commutes(&g.gate, &h.gate) {
                return None;
            }
            if on_a {
                pa = na.expect("on a").1 + 1;
            }
            if on_b {
                pb = Some(nb.expect("on b").1 + 1);
            }
        }
    }

    fn apply_normalize(&mut self, i: usize) -> bool {
        let Some(n) = self.nodes[i] else { return false };
        match normalize(&n.gate) {
            None => false,
            Some((g, phase)) => {
                self.phase += phase;
                self.nodes[i] = g.map(|gate| Node { gate, raised: n.raised });
                true
            }
        }
    }

    /// One left-to-right sweep; returns whether anything changed.
    fn sweep(&mut self, stats: &mut RewriteStats) -> bool {
        let mut changed = false;
        for i in 0..self.nodes.len() {
            changed |= self.apply_normalize(i);
            if self.nodes[i].is_none() {
                continue;
            }
            if let Some((j, m)) = self.find_partner(i, stats) {
                let raised = self.nodes[j].expect("alive").raised;
                self.nodes[i] = None;
                self.nodes[j] = match m {
                    Merge::Cancel => None,
                    Merge::Replace(gate) => Some(Node { gate, raised }),
                };
                self.apply_normalize(j);
                changed = true;
            }
        }
        changed
    }
}

fn run_fixpoint(
    nodes: Vec<Node>,
    num_qubits: usize,
    num_clbits: usize,
    phase: f64,
    stats: &mut RewriteStats,
) -> (Vec<Node>, f64) {
    let mut w = Work::new(nodes, num_qubits, num_clbits, phase);
    for _ in 0..MAX_SWEEPS {
        stats.passes_run += 1;
        if !w.sweep(stats) {
            break;
        }
    }
    w.into_nodes()
}

/// Recognizes `synth::preft_template(s, a, b)` at `ops[i..i + 8]`.
fn match_template(ops: &[Gate]) -> Option<(f64, usize, usize)> {
    use Gate::*;
    let [Rz(r0, b), Cnot(c1, t1), Rz(alpha, a), Ry(beta, b2), Cnot(c2, t2), Ry(gamma, b3), Cnot(c3, t3), Rz(r7, a2)] =
        *ops
    else {
        return None;
    };
    let shape = c1 == b && t1 == a && c2 == a && t2 == b && b2 == b && b3 == b && c3 == b && t3 == a && a2 == a;
    let angles = r0 == -FRAC_PI_2 && r7 == FRAC_PI_2 && beta == -alpha && gamma == alpha;
    (shape && angles).then_some(((alpha + FRAC_PI_2) / 2.0, a, b))
}

fn raise_templates(ops: &[Gate]) -> (Vec<Node>, f64) {
    let mut out = Vec::with_capacity(ops.len());
    let mut phase = 0.0;
    let mut i = 0;
    while i < ops.len() {
        if i + 8 <= ops.len() {
            if let Some((s, a, b)) = match_template(&ops[i..i + 8]) {
                out.push(Node {
                    gate: Gate::Heis(s, a, b),
                    raised: true,
                });
                phase += synth::PREFT_TEMPLATE_PHASE;
                i += 8;
                continue;
            }
        }
        out.push(Node {
            gate: ops[i],
            raised: false,
        });
        i += 1;
    }
    (out, phase)
}

fn lower_raised(nodes: Vec<Node>, phase: f64) -> (Vec<Node>, f64) {
    let mut out = Vec::with_capacity(nodes.len());
    let mut phase = phase;
    for n in nodes {
        match n.gate {
            Gate::Heis(s, a, b) if n.raised => {
                out.extend(
                    synth::preft_template(s, a, b)
                        .into_iter()
                        .map(|gate| Node { gate, raised: false }),
                );
                phase -= synth::PREFT_TEMPLATE_PHASE;
            }
            _ => out.push(Node { raised: false, ..n }),
        }
    }
    (out, phase)
}

/// Rewrites `c` to an equivalent circuit with no more CNOT, rotation or T
/// gates, iterating every rule to a fixpoint (at most [`MAX_SWEEPS`] sweeps
/// per phase).
pub fn optimize(c: &Circuit) -> (Circuit, RewriteStats) {
    let before = count_resources(c);
    let mut stats = RewriteStats::default();
    let (nodes, raise_phase) = raise_templates(c.ops());
    let (nodes, phase) = run_fixpoint(
        nodes,
        c.num_qubits(),
        c.num_clbits(),
        c.global_phase() + raise_phase,
        &mut stats,
    );
    let (nodes, phase) = lower_raised(nodes, phase);
    let (nodes, phase) = run_fixpoint(nodes, c.num_qubits(), c.num_clbits(), phase, &mut stats);

    let mut out = c.clone();
    out.replace_ops(nodes.into_iter().map(|n| n.gate).collect());
    out.set_phase(wrap_phase(phase));
    let after = count_resources(&out);
    stats.cnot_removed = before.cnot_count.saturating_sub(after.cnot_count);
    stats.rz_removed = before.rz_count.saturating_sub(after.rz_count);
    stats.t_removed = before.t_count.saturating_sub(after.t_count);
    stats.gates_before = c.len() as u64;
    stats.gates_after = out.len() as u64;
    (out, stats)
}

fn wrap_phase(p: f64) -> f64 {
    let r = p.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Whether the two circuits agree up to a global phase, by spectral distance.
pub fn verify_equivalence(before: &Circuit, after: &Circuit, tol: f64) -> Result<bool, OptimizeError> {
    if before.num_qubits() != after.num_qubits() {
        return Err(OptimizeError::WidthMismatch(before.num_qubits(), after.num_qubits()));
    }
    let q = before.num_qubits();
    if q > VERIFY_MAX_QUBITS {
        return Err(OptimizeError::Capacity {
            qubits: q,
            max: VERIFY_MAX_QUBITS,
        });
    }
    let u = sim::unitary_of(before)?;
    let v = sim::unitary_of(after)?;
    Ok(sim::spectral_distance(&u, &v, true)? <= tol)
}

/// `Heis` lowering used when optimizing for a mode.
pub fn lowering_for(mode: synth::Mode) -> Lowering {
    mode.into()
}

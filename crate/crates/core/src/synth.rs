//! Product-formula circuit synthesis for the disordered Heisenberg model
//!
//! `H = Σ_{(i,j)∈E} (X_iX_j + Y_iY_j + Z_iZ_j) + Σ_i d_i Z_i`
//!
//! One product-formula stage applies `Heis(s)` to every edge, color class by
//! color class, plus the disorder layer `Rz(2·d_i·s)`. Stages alternate
//! between forward and reverse term order.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, Gate, Qubit};
use crate::graphs::{self, ColoredLayout, Graph, GraphError};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid parameters: {0}")]
    Parameter(String),
    #[error("unsupported product-formula order {0} (expected 2, 4 or 6)")]
    UnsupportedOrder(u32),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Cost regime a circuit is built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Physical level: CNOT count and two-qubit depth dominate.
    #[serde(rename = "preft")]
    PreFt,
    /// Fault tolerant: T count dominates.
    Ft,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "preft" | "pre-ft" | "pft" => Ok(Mode::PreFt),
            "ft" => Ok(Mode::Ft),
            other => Err(format!("unknown mode `{other}` (expected preft or ft)")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::PreFt => "preft",
            Mode::Ft => "ft",
        })
    }
}

/// How `Heis` terms are emitted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lowering {
    /// Keep `Heis(a)` as a single macro gate.
    Macro,
    /// Three-CNOT template ([`heis_gate_preft`]).
    PreFt,
    /// Bell-basis conjugated `CzPow` ([`heis_gate_ft`]).
    Ft,
}

impl From<Mode> for Lowering {
    fn from(m: Mode) -> Self {
        match m {
            Mode::PreFt => Lowering::PreFt,
            Mode::Ft => Lowering::Ft,
        }
    }
}

/// The model Hamiltonian together with its simulation targets.
#[derive(Clone, Debug)]
pub struct DisorderedHeisenberg {
    graph: Graph,
    disorders: Vec<f64>,
    time: f64,
    target_error: f64,
}

pub const DEFAULT_TARGET_ERROR: f64 = 1e-3;

impl DisorderedHeisenberg {
    pub fn new(
        graph: Graph,
        disorders: Vec<f64>,
        time: f64,
        target_error: f64,
    ) -> Result<Self, SynthError> {
        if disorders.len() != graph.n() {
            return Err(SynthError::Parameter(format!(
                "{} disorder values for {} qubits",
                disorders.len(),
                graph.n()
            )));
        }
        if let Some(d) = disorders.iter().find(|d| !(-1.0..=1.0).contains(*d)) {
            return Err(SynthError::Parameter(format!("disorder {d} outside [-1, 1]")));
        }
        if !(time > 0.0 && time.is_finite()) {
            return Err(SynthError::Parameter(format!("evolution time must be positive, got {time}")));
        }
        if !(target_error > 0.0 && target_error.is_finite()) {
            return Err(SynthError::Parameter(format!(
                "target error must be positive, got {target_error}"
            )));
        }
        Ok(DisorderedHeisenberg {
            graph,
            disorders,
            time,
            target_error,
        })
    }

    /// Evolution time `2·diameter` and target error `1e-3`.
    pub fn with_defaults(graph: Graph, disorders: Vec<f64>) -> Result<Self, SynthError> {
        let d = graphs::diameter(&graph)?;
        if d == 0 {
            return Err(SynthError::Parameter("single-node graph has zero diameter".into()));
        }
        Self::new(graph, disorders, 2.0 * d as f64, DEFAULT_TARGET_ERROR)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn disorders(&self) -> &[f64] {
        &self.disorders
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn target_error(&self) -> f64 {
        self.target_error
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn with_time(mut self, time: f64) -> Result<Self, SynthError> {
        if !(time > 0.0 && time.is_finite()) {
            return Err(SynthError::Parameter(format!("evolution time must be positive, got {time}")));
        }
        self.time = time;
        Ok(self)
    }
}

/// `n` disorder strengths drawn uniformly from `[-1, 1]`.
pub fn random_disorders(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Reverse,
}

/// One stage: every term `H_j` is applied as `exp(-i·scalar·α_j·H_j)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Stage {
    pub scalar: f64,
    pub direction: Direction,
}

/// Flattened stages of one `S_{2k}(t/r)` block.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProductFormulaPlan {
    pub order: u32,
    pub r: u64,
    pub time: f64,
    pub stages: Vec<Stage>,
}

impl ProductFormulaPlan {
    pub fn stages_per_block(&self) -> usize {
        self.stages.len()
    }
}

/// Suzuki's `p_k = 1 / (4 − 4^{1/(2k−1)})`.
pub fn suzuki_p(k: u32) -> f64 {
    1.0 / (4.0 - 4f64.powf(1.0 / (2.0 * k as f64 - 1.0)))
}

/// Multipliers of the `S_2` factors in `S_{2k}`, in application order.
fn s2_coefficients(k: u32) -> Vec<f64> {
    if k == 1 {
        return vec![1.0];
    }
    let p = suzuki_p(k);
    let inner = s2_coefficients(k - 1);
    [p, p, 1.0 - 4.0 * p, p, p]
        .iter()
        .flat_map(|&w| inner.iter().map(move |&c| w * c))
        .collect()
}

/// Flattens `S_{2k}(t/r)`; each `S_2(μ)` becomes a forward and a reverse
/// stage with scalar `μ/2`.
pub fn suzuki_stages(order: u32, time: f64, r: u64) -> Result<ProductFormulaPlan, SynthError> {
    if !matches!(order, 2 | 4 | 6) {
        return Err(SynthError::UnsupportedOrder(order));
    }
    if r == 0 {
        return Err(SynthError::Parameter("r must be at least 1".into()));
    }
    if !(time > 0.0 && time.is_finite()) {
        return Err(SynthError::Parameter(format!("evolution time must be positive, got {time}")));
    }
    let tau = time / r as f64;
    let stages = s2_coefficients(order / 2)
        .into_iter()
        .flat_map(|c| {
            let s = c * tau / 2.0;
            [
                Stage { scalar: s, direction: Direction::Forward },
                Stage { scalar: s, direction: Direction::Reverse },
            ]
        })
        .collect();
    Ok(ProductFormulaPlan { order, r, time, stages })
}

/// Global phase of the three-CNOT template relative to `Heis(a)`.
pub const PREFT_TEMPLATE_PHASE: f64 = FRAC_PI_4;

/// Gates of the three-CNOT Heisenberg template on `(a, b)`; their product is
/// `e^{iπ/4}·Heis(angle)`.
pub fn preft_template(angle: f64, a: Qubit, b: Qubit) -> [Gate; 8] {
    let alpha = 2.0 * angle - FRAC_PI_2;
    [
        Gate::Rz(-FRAC_PI_2, b),
        Gate::Cnot(b, a),
        Gate::Rz(alpha, a),
        Gate::Ry(-alpha, b),
        Gate::Cnot(a, b),
        Gate::Ry(alpha, b),
        Gate::Cnot(b, a),
        Gate::Rz(FRAC_PI_2, a),
    ]
}

/// Gates of the Bell-basis form `C·CzPow(4a/π)·C†`, `C = CNOT(a→b)·(H on a)`;
/// their product is `e^{ia}·Heis(angle)`.
pub fn ft_template(angle: f64, a: Qubit, b: Qubit) -> [Gate; 5] {
    [
        Gate::Cnot(a, b),
        Gate::H(a),
        Gate::CzPow(4.0 * angle / PI, a, b),
        Gate::H(a),
        Gate::Cnot(a, b),
    ]
}

/// Appends an exact realization of `Heis(angle)` on `(a, b)`.
pub fn push_heis(c: &mut Circuit, angle: f64, a: Qubit, b: Qubit, lowering: Lowering) {
    match lowering {
        Lowering::Macro => c.push(Gate::Heis(angle, a, b)),
        Lowering::PreFt => {
            c.extend(preft_template(angle, a, b));
            c.add_phase(-PREFT_TEMPLATE_PHASE);
        }
        Lowering::Ft => {
            c.extend(ft_template(angle, a, b));
            c.add_phase(-angle);
        }
    }
}

/// Three-CNOT circuit equal to `Heis(a)` (its global phase is recorded on the
/// circuit).
pub fn heis_gate_preft(a: f64) -> Circuit {
    let mut c = Circuit::new(2);
    push_heis(&mut c, a, 0, 1, Lowering::PreFt);
    c
}

/// Circuit with a single continuous-parameter gate (`CzPow(4a/π)`) equal to
/// `Heis(a)`.
pub fn heis_gate_ft(a: f64) -> Circuit {
    let mut c = Circuit::new(2);
    push_heis(&mut c, a, 0, 1, Lowering::Ft);
    c
}

/// Temporary logical AND of `x` and `y` into a fresh `|0⟩` ancilla, using
/// four T/T† gates.
pub fn push_temporary_and(c: &mut Circuit, x: Qubit, y: Qubit, anc: Qubit) {
    c.extend([
        Gate::H(anc),
        Gate::T(anc),
        Gate::Cnot(x, anc),
        Gate::Cnot(y, anc),
        Gate::Cnot(anc, x),
        Gate::Cnot(anc, y),
        Gate::Tdg(x),
        Gate::Tdg(y),
        Gate::T(anc),
        Gate::Cnot(anc, x),
        Gate::Cnot(anc, y),
        Gate::H(anc),
        Gate::S(anc),
    ]);
}

/// Uncomputes a temporary AND by X-basis measurement and a classically
/// controlled CZ. No T gates.
pub fn push_and_uncompute(c: &mut Circuit, x: Qubit, y: Qubit, anc: Qubit, clbit: usize) {
    c.push(Gate::MeasX(anc, clbit));
    c.push(Gate::CzIfc(clbit, x, y));
}

/// Appends the measurement-based `CzPow(a)` gadget on `(x, y)` using ancilla
/// `anc` and classical bit `clbit`. The gadget's data operator is exactly
/// `CzPow(a)` on both measurement branches.
pub fn push_cz_gadget(c: &mut Circuit, a: f64, x: Qubit, y: Qubit, anc: Qubit, clbit: usize) {
    push_temporary_and(c, x, y, anc);
    c.push(Gate::Rz(PI * a, anc));
    // Rz(πa) on the AND bit gives e^{-iπa/2}·CzPow(a).
    c.add_phase(PI * a / 2.0);
    push_and_uncompute(c, x, y, anc, clbit);
}

/// Fault-tolerant `CzPow(a)`: qubits 0 and 1 are data, qubit 2 is the ancilla.
pub fn cz_gadget(a: f64) -> Circuit {
    let mut c = Circuit::new(3);
    c.set_ancillas(1);
    c.set_clbits(1);
    push_cz_gadget(&mut c, a, 0, 1, 2, 0);
    c
}

/// Replaces every `CzPow` by [`push_cz_gadget`], sharing one extra ancilla
/// (measurement resets it).
pub fn lower_czpow_gadgets(c: &Circuit) -> Circuit {
    let data = c.num_qubits();
    let mut out = Circuit::new(data + 1);
    out.set_clbits(c.num_clbits());
    out.set_ancillas(c.num_ancillas() + 1);
    out.set_phase(c.global_phase());
    let anc = data;
    for g in c.ops() {
        if let Gate::CzPow(a, x, y) = *g {
            let clbit = out.num_clbits();
            out.set_clbits(clbit + 1);
            push_cz_gadget(&mut out, a, x, y, anc, clbit);
        } else {
            out.push(*g);
        }
    }
    out
}

/// Re-emits every `Heis` macro with the given lowering.
pub fn lower_heis(c: &Circuit, lowering: Lowering) -> Circuit {
    let mut out = Circuit::new(c.num_qubits());
    out.set_clbits(c.num_clbits());
    out.set_ancillas(c.num_ancillas());
    out.set_phase(c.global_phase());
    for g in c.ops() {
        match *g {
            Gate::Heis(a, x, y) => push_heis(&mut out, a, x, y, lowering),
            other => out.push(other),
        }
    }
    out
}

/// One product-formula stage.
///
/// Forward stages emit the color classes in order followed by the disorder
/// layer; reverse stages emit the disorder layer first and then the classes
/// (and the edges inside each class) in reverse.
pub fn build_stage(
    h: &DisorderedHeisenberg,
    layout: &ColoredLayout,
    scalar: f64,
    direction: Direction,
    lowering: Lowering,
) -> Result<Circuit, SynthError> {
    layout.check(h.graph())?;
    let mut c = Circuit::new(h.n());
    append_stage(&mut c, h, layout, scalar, direction, lowering);
    Ok(c)
}

fn append_stage(
    c: &mut Circuit,
    h: &DisorderedHeisenberg,
    layout: &ColoredLayout,
    scalar: f64,
    direction: Direction,
    lowering: Lowering,
) {
    let disorder = |c: &mut Circuit| {
        for (q, &d) in h.disorders().iter().enumerate() {
            if d != 0.0 {
                c.push(Gate::Rz(2.0 * d * scalar, q));
            }
        }
    };
    match direction {
        Direction::Forward => {
            for class in layout.classes() {
                for &(u, v) in class {
                    push_heis(c, scalar, u, v, lowering);
                }
            }
            disorder(c);
        }
        Direction::Reverse => {
            disorder(c);
            for class in layout.classes().iter().rev() {
                for &(u, v) in class.iter().rev() {
                    push_heis(c, scalar, u, v, lowering);
                }
            }
        }
    }
}

/// The default layout: [`graphs::vizing_color`] with seed 0 and the default
/// attempt budget.
pub fn default_layout(g: &Graph) -> ColoredLayout {
    graphs::vizing_color(g, 0, graphs::DEFAULT_COLOR_ATTEMPTS)
}

/// `blocks` consecutive `S_{2k}(t/r)` blocks on an explicit layout.
pub fn build_pf_blocks(
    h: &DisorderedHeisenberg,
    layout: &ColoredLayout,
    plan: &ProductFormulaPlan,
    blocks: u64,
    lowering: Lowering,
) -> Result<Circuit, SynthError> {
    layout.check(h.graph())?;
    let mut block = Circuit::new(h.n());
    for st in &plan.stages {
        append_stage(&mut block, h, layout, st.scalar, st.direction, lowering);
    }
    let mut c = Circuit::new(h.n());
    for _ in 0..blocks {
        c.append(&block).expect("blocks share the register width");
    }
    Ok(c)
}

/// `[S_{2k}(t/r)]^r` as a flat circuit, laid out with the default coloring.
pub fn build_pf_circuit(
    h: &DisorderedHeisenberg,
    order: u32,
    r: u64,
    mode: Mode,
) -> Result<Circuit, SynthError> {
    let plan = suzuki_stages(order, h.time(), r)?;
    build_pf_blocks(h, &default_layout(h.graph()), &plan, r, mode.into())
}

/// CNOT built from two `Heis(π/8)` interactions and single-qubit rotations;
/// qubit 0 is the control. The recorded global phase makes it exactly CNOT.
pub fn cnot_from_heisenberg() -> Circuit {
    let mut c = Circuit::new(2);
    c.extend([
        Gate::Ry(-FRAC_PI_2, 1),
        Gate::Rz(FRAC_PI_2, 0),
        Gate::Rz(-FRAC_PI_2, 1),
        Gate::Heis(FRAC_PI_8, 0, 1),
        Gate::Rz(PI, 0),
        Gate::Heis(FRAC_PI_8, 0, 1),
        Gate::Ry(FRAC_PI_2, 1),
    ]);
    c.add_phase(3.0 * FRAC_PI_4);
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::count_resources;

    fn k4() -> Graph {
        Graph::new(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap()
    }

    #[test]
    fn p2_value() {
        let p = suzuki_p(2);
        assert!((p - 1.0 / (4.0 - 4f64.cbrt())).abs() < 1e-15);
        assert!((p - 0.414_490_771_794_375_7).abs() < 1e-12);
    }

    #[test]
    fn stage_counts_and_sums() {
        for (order, count) in [(2, 2), (4, 10), (6, 50)] {
            for r in [1, 3, 7] {
                let plan = suzuki_stages(order, 2.5, r).unwrap();
                assert_eq!(plan.stages.len(), count);
                let sum: f64 = plan.stages.iter().map(|s| s.scalar).sum();
                assert!((sum - 2.5 / r as f64).abs() < 1e-13);
                for w in plan.stages.windows(2) {
                    assert_ne!(w[0].direction, w[1].direction);
                }
            }
        }
        assert!(matches!(suzuki_stages(3, 1.0, 1), Err(SynthError::UnsupportedOrder(3))));
        assert!(suzuki_stages(4, 1.0, 0).is_err());
        assert!(suzuki_stages(4, -1.0, 1).is_err());
    }

    #[test]
    fn fourth_order_scalars() {
        let p = suzuki_p(2);
        let plan = suzuki_stages(4, 1.0, 1).unwrap();
        let expect = [p, p, 1.0 - 4.0 * p, p, p];
        for (i, e) in expect.iter().enumerate() {
            assert!((plan.stages[2 * i].scalar - e / 2.0).abs() < 1e-15);
            assert!((plan.stages[2 * i + 1].scalar - e / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn hamiltonian_validation() {
        let g = k4();
        assert!(DisorderedHeisenberg::new(g.clone(), vec![0.0; 3], 1.0, 1e-3).is_err());
        assert!(DisorderedHeisenberg::new(g.clone(), vec![0.0, 0.0, 0.0, 1.5], 1.0, 1e-3).is_err());
        assert!(DisorderedHeisenberg::new(g.clone(), vec![0.0; 4], 0.0, 1e-3).is_err());
        assert!(DisorderedHeisenberg::new(g.clone(), vec![0.0; 4], 1.0, 0.0).is_err());
        let h = DisorderedHeisenberg::with_defaults(g, vec![0.5; 4]).unwrap();
        assert_eq!(h.time(), 2.0);
        assert_eq!(h.target_error(), 1e-3);
    }

    #[test]
    fn disorders_in_range_and_seeded() {
        let d = random_disorders(100, 4);
        assert!(d.iter().all(|x| (-1.0..=1.0).contains(x)));
        assert_eq!(d, random_disorders(100, 4));
        assert_ne!(d, random_disorders(100, 5));
    }

    #[test]
    fn k4_stage_costs() {
        let h = DisorderedHeisenberg::new(k4(), random_disorders(4, 1), 2.0, 1e-3).unwrap();
        let layout = default_layout(h.graph());
        let stage = build_stage(&h, &layout, 0.1, Direction::Forward, Lowering::PreFt).unwrap();
        let r = count_resources(&stage);
        assert_eq!(r.cnot_count, 18);
        assert_eq!(r.two_qubit_depth, 9);
        assert_eq!(r.rz_count, 6 * 5 + 4);
    }

    #[test]
    fn zero_disorder_emits_no_layer() {
        let h = DisorderedHeisenberg::new(k4(), vec![0.0; 4], 2.0, 1e-3).unwrap();
        let layout = default_layout(h.graph());
        let stage = build_stage(&h, &layout, 0.1, Direction::Reverse, Lowering::Macro).unwrap();
        assert!(stage.ops().iter().all(|g| matches!(g, Gate::Heis(..))));
    }

    #[test]
    fn stage_rejects_foreign_layout() {
        let h = DisorderedHeisenberg::new(k4(), vec![0.0; 4], 2.0, 1e-3).unwrap();
        let layout = ColoredLayout::from_classes(vec![vec![(0, 1)]]);
        assert!(build_stage(&h, &layout, 0.1, Direction::Forward, Lowering::Macro).is_err());
    }

    #[test]
    fn k4_order4_block_cnots() {
        let h = DisorderedHeisenberg::new(k4(), random_disorders(4, 2), 2.0, 1e-3).unwrap();
        let c = build_pf_circuit(&h, 4, 1, Mode::PreFt).unwrap();
        assert_eq!(count_resources(&c).cnot_count, 180);
        let two = build_pf_circuit(&h, 4, 2, Mode::PreFt).unwrap();
        let half = two.ops().len() / 2;
        assert_eq!(two.ops()[..half], two.ops()[half..]);
    }

    #[test]
    fn gadget_census() {
        let r = count_resources(&cz_gadget(0.37));
        assert_eq!(r.t_count, 4);
        assert_eq!(r.rz_count, 1);
        assert_eq!(r.measurement_count, 1);
        assert_eq!(r.ancilla_count, 1);
    }

    #[test]
    fn ft_stage_census() {
        let h = DisorderedHeisenberg::new(k4(), vec![0.0; 4], 2.0, 1e-3).unwrap();
        let layout = default_layout(h.graph());
        let stage = build_stage(&h, &layout, 0.2, Direction::Forward, Lowering::Ft).unwrap();
        let lowered = lower_czpow_gadgets(&stage);
        let r = count_resources(&lowered);
        assert_eq!(r.t_count, 4 * 6);
        assert_eq!(r.rz_count, 6);
    }

    #[test]
    fn hardness_circuit_shape() {
        let c = cnot_from_heisenberg();
        assert_eq!(c.ops().iter().filter(|g| matches!(g, Gate::Heis(..))).count(), 2);
    }
}

//! Gate-level intermediate representation.
//!
//! A [`Circuit`] is an ordered list of [`Gate`]s over `num_qubits` qubits and
//! `num_clbits` classical bits. Gate semantics are fixed matrices including
//! their global phase:
//!
//! * `Rz(θ) = exp(-iθZ/2)`, likewise `Rx`, `Ry`
//! * `CzPow(a) = diag(1, 1, 1, e^{iπa})`
//! * `Heis(a) = exp(-i a (XX + YY + ZZ))`
//!
//! The circuit additionally carries a global phase (radians) so that lowered
//! gadgets can be made exactly equal to the macro gates they replace, and a
//! count of ancilla qubits. Ancillas are always the highest-indexed qubits and
//! start in `|0⟩`.
//!
//! Measurements are destructive: after `MeasZ`/`MeasX` the qubit is reset to
//! `|0⟩` and the outcome is written to the named classical bit.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub type Qubit = usize;
pub type Clbit = usize;

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("gate {index}: qubit {qubit} out of range (circuit has {num_qubits} qubits)")]
    QubitOutOfRange {
        index: usize,
        qubit: Qubit,
        num_qubits: usize,
    },
    #[error("gate {index}: clbit {clbit} out of range (circuit has {num_clbits} clbits)")]
    ClbitOutOfRange {
        index: usize,
        clbit: Clbit,
        num_clbits: usize,
    },
    #[error("gate {index}: two-qubit gate acts twice on qubit {qubit}")]
    RepeatedQubit { index: usize, qubit: Qubit },
    #[error("gate {index}: non-finite angle {angle}")]
    NonFiniteAngle { index: usize, angle: f64 },
    #[error("gate {index}: clbit {clbit} is read before any measurement writes it")]
    UnwrittenClbit { index: usize, clbit: Clbit },
    #[error("{num_ancillas} ancillas declared but the circuit has only {num_qubits} qubits")]
    TooManyAncillas {
        num_ancillas: usize,
        num_qubits: usize,
    },
    #[error("qubit count mismatch: {left} vs {right}")]
    WidthMismatch { left: usize, right: usize },
}

/// A single operation. Angles are radians for rotations; `CzPow` and `Heis`
/// carry a dimensionless exponent / interaction angle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    H(Qubit),
    X(Qubit),
    Z(Qubit),
    S(Qubit),
    Sdg(Qubit),
    T(Qubit),
    Tdg(Qubit),
    Rx(f64, Qubit),
    Ry(f64, Qubit),
    Rz(f64, Qubit),
    /// `Cnot(control, target)`
    Cnot(Qubit, Qubit),
    Cz(Qubit, Qubit),
    CzPow(f64, Qubit, Qubit),
    Swap(Qubit, Qubit),
    Heis(f64, Qubit, Qubit),
    MeasZ(Qubit, Clbit),
    MeasX(Qubit, Clbit),
    /// X on the qubit if the classical bit is 1.
    XIfc(Clbit, Qubit),
    ZIfc(Clbit, Qubit),
    CzIfc(Clbit, Qubit, Qubit),
}

impl Gate {
    /// The qubits this gate acts on: the first, and the second for two-qubit gates.
    pub fn qubits(&self) -> (Qubit, Option<Qubit>) {
        use Gate::*;
        match *self {
            H(q) | X(q) | Z(q) | S(q) | Sdg(q) | T(q) | Tdg(q) => (q, None),
            Rx(_, q) | Ry(_, q) | Rz(_, q) => (q, None),
            MeasZ(q, _) | MeasX(q, _) | XIfc(_, q) | ZIfc(_, q) => (q, None),
            Cnot(a, b) | Cz(a, b) | CzPow(_, a, b) | Swap(a, b) | Heis(_, a, b) => (a, Some(b)),
            CzIfc(_, a, b) => (a, Some(b)),
        }
    }

    pub fn acts_on(&self, q: Qubit) -> bool {
        let (a, b) = self.qubits();
        a == q || b == Some(q)
    }

    pub fn is_two_qubit(&self) -> bool {
        self.qubits().1.is_some()
    }

    pub fn is_measurement(&self) -> bool {
        matches!(self, Gate::MeasZ(..) | Gate::MeasX(..))
    }

    pub fn is_classically_controlled(&self) -> bool {
        matches!(self, Gate::XIfc(..) | Gate::ZIfc(..) | Gate::CzIfc(..))
    }

    /// Classical bit written (measurements) or read (`_ifc` gates).
    pub fn clbit(&self) -> Option<Clbit> {
        match *self {
            Gate::MeasZ(_, c) | Gate::MeasX(_, c) => Some(c),
            Gate::XIfc(c, _) | Gate::ZIfc(c, _) | Gate::CzIfc(c, _, _) => Some(c),
            _ => None,
        }
    }

    /// Continuous parameter, if any.
    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Rx(a, _) | Gate::Ry(a, _) | Gate::Rz(a, _) => Some(a),
            Gate::CzPow(a, _, _) | Gate::Heis(a, _, _) => Some(a),
            _ => None,
        }
    }

    /// True for gates whose matrix is diagonal in the computational basis.
    pub fn is_diagonal(&self) -> bool {
        use Gate::*;
        matches!(
            self,
            Z(_) | S(_) | Sdg(_) | T(_) | Tdg(_) | Rz(..) | Cz(..) | CzPow(..)
        )
    }

    /// Same gate with qubit indices passed through `f`.
    pub fn map_qubits(&self, f: impl Fn(Qubit) -> Qubit) -> Gate {
        use Gate::*;
        match *self {
            H(q) => H(f(q)),
            X(q) => X(f(q)),
            Z(q) => Z(f(q)),
            S(q) => S(f(q)),
            Sdg(q) => Sdg(f(q)),
            T(q) => T(f(q)),
            Tdg(q) => Tdg(f(q)),
            Rx(a, q) => Rx(a, f(q)),
            Ry(a, q) => Ry(a, f(q)),
            Rz(a, q) => Rz(a, f(q)),
            Cnot(a, b) => Cnot(f(a), f(b)),
            Cz(a, b) => Cz(f(a), f(b)),
            CzPow(x, a, b) => CzPow(x, f(a), f(b)),
            Swap(a, b) => Swap(f(a), f(b)),
            Heis(x, a, b) => Heis(x, f(a), f(b)),
            MeasZ(q, c) => MeasZ(f(q), c),
            MeasX(q, c) => MeasX(f(q), c),
            XIfc(c, q) => XIfc(c, f(q)),
            ZIfc(c, q) => ZIfc(c, f(q)),
            CzIfc(c, a, b) => CzIfc(c, f(a), f(b)),
        }
    }

    pub fn map_clbit(&self, f: impl Fn(Clbit) -> Clbit) -> Gate {
        use Gate::*;
        match *self {
            MeasZ(q, c) => MeasZ(q, f(c)),
            MeasX(q, c) => MeasX(q, f(c)),
            XIfc(c, q) => XIfc(f(c), q),
            ZIfc(c, q) => ZIfc(f(c), q),
            CzIfc(c, a, b) => CzIfc(f(c), a, b),
            g => g,
        }
    }

    pub fn mnemonic(&self) -> &'static str {
        use Gate::*;
        match self {
            H(_) => "h",
            X(_) => "x",
            Z(_) => "z",
            S(_) => "s",
            Sdg(_) => "sdg",
            T(_) => "t",
            Tdg(_) => "tdg",
            Rx(..) => "rx",
            Ry(..) => "ry",
            Rz(..) => "rz",
            Cnot(..) => "cnot",
            Cz(..) => "cz",
            CzPow(..) => "czpow",
            Swap(..) => "swap",
            Heis(..) => "heis",
            MeasZ(..) => "measz",
            MeasX(..) => "measx",
            XIfc(..) => "x_ifc",
            ZIfc(..) => "z_ifc",
            CzIfc(..) => "cz_ifc",
        }
    }
}

/// Angles are written with 17 significant digits, enough to round-trip any f64.
fn fmt_angle(a: f64) -> String {
    format!("{a:.16e}")
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Gate::*;
        let m = self.mnemonic();
        match *self {
            H(q) | X(q) | Z(q) | S(q) | Sdg(q) | T(q) | Tdg(q) => write!(f, "{m} {q}"),
            Rx(a, q) | Ry(a, q) | Rz(a, q) => write!(f, "{m} {} {q}", fmt_angle(a)),
            Cnot(a, b) | Cz(a, b) | Swap(a, b) => write!(f, "{m} {a} {b}"),
            CzPow(x, a, b) | Heis(x, a, b) => write!(f, "{m} {} {a} {b}", fmt_angle(x)),
            MeasZ(q, c) | MeasX(q, c) => write!(f, "{m} {q} -> {c}"),
            XIfc(c, q) | ZIfc(c, q) => write!(f, "{m} {c} ? {q}"),
            CzIfc(c, a, b) => write!(f, "{m} {c} ? {a} {b}"),
        }
    }
}

/// An ordered gate list with its register sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    num_qubits: usize,
    num_clbits: usize,
    num_ancillas: usize,
    global_phase: f64,
    ops: Vec<Gate>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Self {
        Circuit {
            num_qubits,
            num_clbits: 0,
            num_ancillas: 0,
            global_phase: 0.0,
            ops: Vec::new(),
        }
    }

    /// Builds and validates a circuit from raw parts.
    pub fn from_parts(
        num_qubits: usize,
        num_clbits: usize,
        num_ancillas: usize,
        global_phase: f64,
        ops: Vec<Gate>,
    ) -> Result<Self, CircuitError> {
        let c = Circuit {
            num_qubits,
            num_clbits,
            num_ancillas,
            global_phase,
            ops,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn num_clbits(&self) -> usize {
        self.num_clbits
    }

    pub fn num_ancillas(&self) -> usize {
        self.num_ancillas
    }

    /// Qubits that carry the circuit's input/output (all non-ancilla qubits).
    pub fn num_data_qubits(&self) -> usize {
        self.num_qubits - self.num_ancillas
    }

    pub fn global_phase(&self) -> f64 {
        self.global_phase
    }

    pub fn ops(&self) -> &[Gate] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn into_ops(self) -> Vec<Gate> {
        self.ops
    }

    pub fn set_clbits(&mut self, n: usize) {
        self.num_clbits = n;
    }

    /// Marks the top `n` qubits as ancillas initialised to `|0⟩`.
    pub fn set_ancillas(&mut self, n: usize) {
        assert!(n <= self.num_qubits, "more ancillas than qubits");
        self.num_ancillas = n;
    }

    pub fn add_phase(&mut self, phase: f64) {
        self.global_phase += phase;
    }

    pub fn set_phase(&mut self, phase: f64) {
        self.global_phase = phase;
    }

    /// Appends a gate. Panics on out-of-range indices, which are builder bugs.
    pub fn push(&mut self, gate: Gate) {
        let (a, b) = gate.qubits();
        assert!(a < self.num_qubits, "qubit {a} out of range in {gate}");
        if let Some(b) = b {
            assert!(b < self.num_qubits, "qubit {b} out of range in {gate}");
            assert!(a != b, "repeated qubit in {gate}");
        }
        if let Some(c) = gate.clbit() {
            assert!(c < self.num_clbits, "clbit {c} out of range in {gate}");
        }
        self.ops.push(gate);
    }

    pub fn extend<I: IntoIterator<Item = Gate>>(&mut self, gates: I) {
        for g in gates {
            self.push(g);
        }
    }

    /// Appends `other` (same width), accumulating its global phase. Classical
    /// bits of `other` are shifted past this circuit's.
    pub fn append(&mut self, other: &Circuit) -> Result<(), CircuitError> {
        if other.num_qubits != self.num_qubits {
            return Err(CircuitError::WidthMismatch {
                left: self.num_qubits,
                right: other.num_qubits,
            });
        }
        let shift = self.num_clbits;
        self.num_clbits += other.num_clbits;
        self.num_ancillas = self.num_ancillas.max(other.num_ancillas);
        self.global_phase += other.global_phase;
        self.ops
            .extend(other.ops.iter().map(|g| g.map_clbit(|c| c + shift)));
        Ok(())
    }

    /// Appends `other` with its qubit `i` placed on `map[i]`.
    pub fn append_mapped(&mut self, other: &Circuit, map: &[Qubit]) {
        assert_eq!(map.len(), other.num_qubits);
        let shift = self.num_clbits;
        self.num_clbits += other.num_clbits;
        self.global_phase += other.global_phase;
        for g in &other.ops {
            self.push(g.map_qubits(|q| map[q]).map_clbit(|c| c + shift));
        }
    }

    pub(crate) fn replace_ops(&mut self, ops: Vec<Gate>) {
        self.ops = ops;
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        if self.num_ancillas > self.num_qubits {
            return Err(CircuitError::TooManyAncillas {
                num_ancillas: self.num_ancillas,
                num_qubits: self.num_qubits,
            });
        }
        let mut written = vec![false; self.num_clbits];
        for (index, g) in self.ops.iter().enumerate() {
            let (a, b) = g.qubits();
            for q in std::iter::once(a).chain(b) {
                if q >= self.num_qubits {
                    return Err(CircuitError::QubitOutOfRange {
                        index,
                        qubit: q,
                        num_qubits: self.num_qubits,
                    });
                }
            }
            if b == Some(a) {
                return Err(CircuitError::RepeatedQubit { index, qubit: a });
            }
            if let Some(angle) = g.angle() {
                if !angle.is_finite() {
                    return Err(CircuitError::NonFiniteAngle { index, angle });
                }
            }
            if let Some(clbit) = g.clbit() {
                if clbit >= self.num_clbits {
                    return Err(CircuitError::ClbitOutOfRange {
                        index,
                        clbit,
                        num_clbits: self.num_clbits,
                    });
                }
                if g.is_measurement() {
                    written[clbit] = true;
                } else if !written[clbit] {
                    return Err(CircuitError::UnwrittenClbit { index, clbit });
                }
            }
        }
        Ok(())
    }

    /// Text serialization; see [`parse`].
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("qubits {}\n", self.num_qubits));
        if self.num_clbits > 0 {
            out.push_str(&format!("clbits {}\n", self.num_clbits));
        }
        if self.num_ancillas > 0 {
            out.push_str(&format!("ancillas {}\n", self.num_ancillas));
        }
        if self.global_phase != 0.0 {
            out.push_str(&format!("phase {}\n", fmt_angle(self.global_phase)));
        }
        for g in &self.ops {
            out.push_str(&g.to_string());
            out.push('\n');
        }
        out
    }
}

struct Tokens<'a> {
    line: usize,
    items: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(line: usize, text: &'a str) -> Self {
        let mut items = Vec::new();
        let mut start = None;
        for (i, ch) in text.char_indices() {
            if ch.is_whitespace() {
                if let Some(s) = start.take() {
                    items.push((s, &text[s..i]));
                }
            } else if start.is_none() {
                start = Some(i);
            }
        }
        if let Some(s) = start {
            items.push((s, &text[s..]));
        }
        Tokens {
            line,
            items,
            pos: 0,
        }
    }

    fn err(&self, column: usize, message: impl Into<String>) -> CircuitError {
        CircuitError::Parse {
            line: self.line,
            column: column + 1,
            message: message.into(),
        }
    }

    fn end_column(&self) -> usize {
        self.items.last().map(|(c, s)| c + s.len()).unwrap_or(0)
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str), CircuitError> {
        let item = self
            .items
            .get(self.pos)
            .copied()
            .ok_or_else(|| self.err(self.end_column(), format!("expected {what}")))?;
        self.pos += 1;
        Ok(item)
    }

    fn index(&mut self, what: &str) -> Result<usize, CircuitError> {
        let (col, s) = self.next(what)?;
        s.parse::<usize>()
            .map_err(|_| self.err(col, format!("expected {what}, found `{s}`")))
    }

    fn angle(&mut self) -> Result<f64, CircuitError> {
        let (col, s) = self.next("angle")?;
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.err(col, format!("expected finite angle, found `{s}`"))),
        }
    }

    fn literal(&mut self, lit: &str) -> Result<(), CircuitError> {
        let (col, s) = self.next(&format!("`{lit}`"))?;
        if s == lit {
            Ok(())
        } else {
            Err(self.err(col, format!("expected `{lit}`, found `{s}`")))
        }
    }

    fn finish(&self) -> Result<(), CircuitError> {
        match self.items.get(self.pos) {
            None => Ok(()),
            Some((col, s)) => Err(self.err(*col, format!("unexpected trailing token `{s}`"))),
        }
    }
}

/// Parses the line-oriented circuit text format:
///
/// ```text
/// qubits <n>
/// clbits <m>          (optional)
/// ancillas <a>        (optional)
/// phase <radians>     (optional)
/// <gate lines>
/// ```
///
/// Gate lines are `h q`, `rz <angle> q`, `cnot qc qt`, `czpow <a> q1 q2`,
/// `heis <a> q1 q2`, `measx q -> c`, `cz_ifc c ? q1 q2` and so on.
/// `#` starts a comment.
pub fn parse(text: &str) -> Result<Circuit, CircuitError> {
    let mut header_done = false;
    let mut circuit: Option<Circuit> = None;
    let mut ops = Vec::new();
    for (lineno, raw) in text.split('\n').enumerate() {
        let line = lineno + 1;
        let body = raw.split('#').next().unwrap_or("");
        let mut tk = Tokens::new(line, body);
        if tk.items.is_empty() {
            continue;
        }
        let (col, word) = tk.next("keyword")?;
        let Some(c) = circuit.as_mut() else {
            if word != "qubits" {
                return Err(tk.err(col, "first statement must be `qubits <n>`"));
            }
            let n = tk.index("qubit count")?;
            tk.finish()?;
            circuit = Some(Circuit::new(n));
            continue;
        };
        match word {
            "clbits" | "ancillas" | "phase" if !header_done => {
                match word {
                    "clbits" => c.num_clbits = tk.index("clbit count")?,
                    "ancillas" => c.num_ancillas = tk.index("ancilla count")?,
                    _ => c.global_phase = tk.angle()?,
                }
                tk.finish()?;
                continue;
            }
            _ => header_done = true,
        }
        let gate = match word {
            "h" => Gate::H(tk.index("qubit")?),
            "x" => Gate::X(tk.index("qubit")?),
            "z" => Gate::Z(tk.index("qubit")?),
            "s" => Gate::S(tk.index("qubit")?),
            "sdg" => Gate::Sdg(tk.index("qubit")?),
            "t" => Gate::T(tk.index("qubit")?),
            "tdg" => Gate::Tdg(tk.index("qubit")?),
            "rx" => Gate::Rx(tk.angle()?, tk.index("qubit")?),
            "ry" => Gate::Ry(tk.angle()?, tk.index("qubit")?),
            "rz" => Gate::Rz(tk.angle()?, tk.index("qubit")?),
            "cnot" => Gate::Cnot(tk.index("control qubit")?, tk.index("target qubit")?),
            "cz" => Gate::Cz(tk.index("qubit")?, tk.index("qubit")?),
            "swap" => Gate::Swap(tk.index("qubit")?, tk.index("qubit")?),
            "czpow" => Gate::CzPow(tk.angle()?, tk.index("qubit")?, tk.index("qubit")?),
            "heis" => Gate::Heis(tk.angle()?, tk.index("qubit")?, tk.index("qubit")?),
            "measz" | "measx" => {
                let q = tk.index("qubit")?;
                tk.literal("->")?;
                let cb = tk.index("clbit")?;
                if word == "measz" {
                    Gate::MeasZ(q, cb)
                } else {
                    Gate::MeasX(q, cb)
                }
            }
            "x_ifc" | "z_ifc" => {
                let cb = tk.index("clbit")?;
                tk.literal("?")?;
                let q = tk.index("qubit")?;
                if word == "x_ifc" {
                    Gate::XIfc(cb, q)
                } else {
                    Gate::ZIfc(cb, q)
                }
            }
            "cz_ifc" => {
                let cb = tk.index("clbit")?;
                tk.literal("?")?;
                Gate::CzIfc(cb, tk.index("qubit")?, tk.index("qubit")?)
            }
            "qubits" | "clbits" | "ancillas" | "phase" => {
                return Err(tk.err(col, format!("`{word}` must precede all gates")))
            }
            other => return Err(tk.err(col, format!("unknown gate `{other}`"))),
        };
        tk.finish()?;
        ops.push(gate);
    }
    let mut c = circuit.ok_or(CircuitError::Parse {
        line: 1,
        column: 1,
        message: "missing `qubits <n>` header".into(),
    })?;
    c.ops = ops;
    c.validate()?;
    Ok(c)
}

/// Gate census of a circuit.
///
/// `cnot_count`, `t_count` and `rz_count` cover lowered gates only; unexpanded
/// `Heis`/`CzPow` gates are tallied in `macro_heis`/`macro_czpow`.
/// `rz_count` counts every arbitrary-angle rotation (`Rx`, `Ry`, `Rz`).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ResourceReport {
    pub cnot_count: u64,
    pub t_count: u64,
    pub rz_count: u64,
    pub single_qubit_clifford_count: u64,
    pub measurement_count: u64,
    pub classically_controlled_count: u64,
    pub ancilla_count: u64,
    pub two_qubit_count: u64,
    pub two_qubit_depth: u64,
    pub cz_count: u64,
    pub swap_count: u64,
    pub macro_heis: u64,
    pub macro_czpow: u64,
}

pub fn count_resources(c: &Circuit) -> ResourceReport {
    let mut r = ResourceReport {
        ancilla_count: c.num_ancillas as u64,
        two_qubit_depth: two_qubit_depth(c),
        ..ResourceReport::default()
    };
    for g in &c.ops {
        use Gate::*;
        if g.is_two_qubit() {
            r.two_qubit_count += 1;
        }
        match g {
            H(_) | X(_) | Z(_) | S(_) | Sdg(_) => r.single_qubit_clifford_count += 1,
            T(_) | Tdg(_) => r.t_count += 1,
            Rx(..) | Ry(..) | Rz(..) => r.rz_count += 1,
            Cnot(..) => r.cnot_count += 1,
            Cz(..) => r.cz_count += 1,
            Swap(..) => r.swap_count += 1,
            CzPow(..) => r.macro_czpow += 1,
            Heis(..) => r.macro_heis += 1,
            MeasZ(..) | MeasX(..) => r.measurement_count += 1,
            XIfc(..) | ZIfc(..) | CzIfc(..) => r.classically_controlled_count += 1,
        }
    }
    r
}

/// Longest chain of two-qubit gates, ordered by shared qubits. Single-qubit
/// gates, measurements and classical dependencies do not contribute.
pub fn two_qubit_depth(c: &Circuit) -> u64 {
    let mut depth = vec![0u64; c.num_qubits];
    let mut best = 0;
    for g in &c.ops {
        if let (a, Some(b)) = g.qubits() {
            let d = depth[a].max(depth[b]) + 1;
            depth[a] = d;
            depth[b] = d;
            best = best.max(d);
        }
    }
    best
}

//! Fault-tolerant resource accounting and end-to-end estimates.
//!
//! Single-qubit rotation synthesis is modelled by
//! `T(ε) = ⌈A·log2(1/ε) + B⌉`, optionally divided by the repeat-until-success
//! factor. Equal-angle `CzPow` gates that share a layer are batched with the
//! Hamming-weight trick: `m` rotations become `4(m − Weight(m))` T gates of
//! adders plus `⌊log2 m⌋ + 1` rotations on the weight register.

use std::collections::HashMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{count_resources, Circuit, Gate};
use crate::graphs::{ColoredLayout, Graph};
use crate::optimizer;
use crate::synth::{self, DisorderedHeisenberg, Lowering, Mode, SynthError};

#[derive(Debug, Error)]
pub enum FtError {
    #[error("invalid argument: {0}")]
    Domain(String),
    #[error("no fit formula for k = {k}, order {order}, {mode}")]
    MissingFit { k: usize, order: u32, mode: Mode },
    #[error("weight-trick circuits are emitted for m ≤ {max}, got {m}")]
    Capacity { m: usize, max: usize },
    #[error("cost model line {line}: {message}")]
    Override { line: usize, message: String },
    #[error(transparent)]
    Synth(#[from] SynthError),
}

/// Rotation-synthesis and batching knobs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModel {
    #[serde(rename = "grid_A")]
    pub grid_a: f64,
    #[serde(rename = "grid_B")]
    pub grid_b: f64,
    pub p_direct: f64,
    pub p_mixing: f64,
    pub mixing_enabled: bool,
    pub rus_enabled: bool,
    pub rus_factor: f64,
    pub weight_trick_enabled: bool,
    /// Depth of one rotation approximation, for the symbolic FT depth.
    pub approx_depth: Option<f64>,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            grid_a: 3.0,
            grid_b: 2.0,
            p_direct: 0.875,
            p_mixing: 0.665,
            mixing_enabled: true,
            rus_enabled: true,
            rus_factor: 2.5,
            weight_trick_enabled: true,
            approx_depth: None,
        }
    }
}

impl CostModel {
    /// Direct synthesis with no RUS, mixing or batching.
    pub fn plain() -> Self {
        CostModel {
            mixing_enabled: false,
            rus_enabled: false,
            weight_trick_enabled: false,
            ..CostModel::default()
        }
    }

    /// Budget exponent in force.
    pub fn p(&self) -> f64 {
        if self.mixing_enabled {
            self.p_mixing
        } else {
            self.p_direct
        }
    }

    pub fn validate(&self) -> Result<(), FtError> {
        let bad = |m: String| Err(FtError::Domain(m));
        if !(self.grid_a > 0.0 && self.grid_a.is_finite()) {
            return bad(format!("grid_A must be positive, got {}", self.grid_a));
        }
        if !self.grid_b.is_finite() {
            return bad(format!("grid_B must be finite, got {}", self.grid_b));
        }
        for (name, p) in [("p_direct", self.p_direct), ("p_mixing", self.p_mixing)] {
            if !(p > 0.0 && p <= 1.0) {
                return bad(format!("{name} must lie in (0, 1], got {p}"));
            }
        }
        if !(self.rus_factor >= 1.0 && self.rus_factor.is_finite()) {
            return bad(format!("rus_factor must be at least 1, got {}", self.rus_factor));
        }
        if let Some(a) = self.approx_depth {
            if !(a >= 0.0 && a.is_finite()) {
                return bad(format!("approx_depth must be non-negative, got {a}"));
            }
        }
        Ok(())
    }

    /// Applies `key=value` lines (`#` comments allowed). Keys: `grid_A`,
    /// `grid_B`, `p_direct`, `p_mixing`, `rus_factor`, `approx_depth`,
    /// `mixing`, `rus`, `weight_trick`.
    pub fn apply_overrides(&mut self, text: &str) -> Result<(), FtError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| FtError::Override { line: i + 1, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, found `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let num = || {
                f64::from_str(value).map_err(|_| err(format!("`{value}` is not a number")))
            };
            let flag = || match value {
                "true" | "1" | "on" => Ok(true),
                "false" | "0" | "off" => Ok(false),
                _ => Err(err(format!("`{value}` is not a boolean"))),
            };
            match key {
                "grid_A" => self.grid_a = num()?,
                "grid_B" => self.grid_b = num()?,
                "p_direct" => self.p_direct = num()?,
                "p_mixing" => self.p_mixing = num()?,
                "rus_factor" => self.rus_factor = num()?,
                "approx_depth" => self.approx_depth = Some(num()?),
                "mixing" => self.mixing_enabled = flag()?,
                "rus" => self.rus_enabled = flag()?,
                "weight_trick" => self.weight_trick_enabled = flag()?,
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        self.validate()
    }
}

/// `(ε_approx / n_rz)^p`
pub fn per_gate_budget(eps_approx: f64, n_rz: u64, p: f64) -> Result<f64, FtError> {
    if !(eps_approx > 0.0 && eps_approx < 1.0) {
        return Err(FtError::Domain(format!("ε_approx must lie in (0, 1), got {eps_approx}")));
    }
    if n_rz == 0 {
        return Err(FtError::Domain("rotation count must be at least 1".into()));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(FtError::Domain(format!("p must lie in (0, 1], got {p}")));
    }
    Ok((eps_approx / n_rz as f64).powf(p))
}

/// Cost of one synthesized rotation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RzCost {
    /// Expected T count.
    pub t_count: u64,
    /// T count of the direct approximation sequence.
    pub direct_t_count: u64,
    /// Extra CNOTs (RUS only).
    pub cnot_overhead: u64,
    /// Extra ancillas (RUS only).
    pub ancillas: u64,
}

pub fn rz_cost(eps_gate: f64, model: &CostModel) -> Result<RzCost, FtError> {
    if !(eps_gate > 0.0 && eps_gate < 1.0) {
        return Err(FtError::Domain(format!("per-gate error must lie in (0, 1), got {eps_gate}")));
    }
    model.validate()?;
    let direct = (model.grid_a * (1.0 / eps_gate).log2() + model.grid_b).ceil().max(0.0) as u64;
    Ok(rus_transform(direct, model))
}

fn rus_transform(direct: u64, model: &CostModel) -> RzCost {
    if model.rus_enabled {
        RzCost {
            t_count: (direct as f64 / model.rus_factor).ceil() as u64,
            direct_t_count: direct,
            cnot_overhead: direct + 1,
            ancillas: 1,
        }
    } else {
        RzCost {
            t_count: direct,
            direct_t_count: direct,
            cnot_overhead: 0,
            ancillas: 0,
        }
    }
}

/// Popcount.
pub fn weight(m: u64) -> u64 {
    m.count_ones() as u64
}

/// `⌊log2 m⌋ + 1`
pub fn bit_length(m: u64) -> u64 {
    64 - m.leading_zeros() as u64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct WeightTrickPlan {
    pub m: u64,
    pub adders: u64,
    pub t_cost: u64,
    pub rz_applications: u64,
    /// Register bits plus adder workspace.
    pub ancillas: u64,
}

pub fn weight_trick_plan(m: u64) -> Result<WeightTrickPlan, FtError> {
    if m < 1 {
        return Err(FtError::Domain("weight trick needs m ≥ 1".into()));
    }
    let adders = m - weight(m);
    Ok(WeightTrickPlan {
        m,
        adders,
        t_cost: 4 * adders,
        rz_applications: bit_length(m),
        ancillas: if m == 1 { 0 } else { bit_length(m) + adders },
    })
}

/// Largest `m` for which [`weight_trick_circuit`] emits a circuit.
pub const WEIGHT_TRICK_MAX_M: usize = 7;

enum Adder {
    Half { a: usize, b: usize, anc: usize, clbit: usize },
    Full { a: usize, b: usize, c: usize, anc: usize, clbit: usize },
}

/// `Rz(θ)` on each of `m` data qubits, realized by computing their Hamming
/// weight with temporary-AND adders, rotating each weight bit `j` by
/// `Rz(2^j θ)`, and uncomputing with measurements.
///
/// Qubits `0..m` are data; the adders' carries live on ancillas `m..`.
pub fn weight_trick_circuit(m: usize, theta: f64) -> Result<Circuit, FtError> {
    if m == 0 {
        return Err(FtError::Domain("weight trick needs m ≥ 1".into()));
    }
    if m > WEIGHT_TRICK_MAX_M {
        return Err(FtError::Capacity { m, max: WEIGHT_TRICK_MAX_M });
    }
    let plan = weight_trick_plan(m as u64)?;
    let anc_count = plan.adders as usize;
    let mut c = Circuit::new(m + anc_count);
    c.set_ancillas(anc_count);
    c.set_clbits(anc_count);

    // levels[j] holds qubits whose bit carries weight 2^j.
    let mut levels: Vec<Vec<usize>> = vec![(0..m).collect()];
    let mut adders = Vec::new();
    let mut next_anc = m;
    let mut j = 0;
    while j < levels.len() {
        while levels[j].len() >= 2 {
            let anc = next_anc;
            next_anc += 1;
            let clbit = adders.len();
            if levels.len() == j + 1 {
                levels.push(Vec::new());
            }
            if levels[j].len() >= 3 {
                let a = levels[j].remove(0);
                let b = levels[j].remove(0);
                let cq = levels[j].remove(0);
                adders.push(Adder::Full { a, b, c: cq, anc, clbit });
                levels[j].push(b);
            } else {
                let a = levels[j].remove(0);
                let b = levels[j].remove(0);
                adders.push(Adder::Half { a, b, anc, clbit });
                levels[j].push(b);
            }
            levels[j + 1].push(anc);
        }
        j += 1;
    }
    debug_assert_eq!(adders.len(), anc_count);

    for ad in &adders {
        match *ad {
            Adder::Half { a, b, anc, .. } => {
                synth::push_temporary_and(&mut c, a, b, anc);
                c.push(Gate::Cnot(a, b));
            }
            Adder::Full { a, b, c: cq, anc, .. } => {
                c.push(Gate::Cnot(a, b));
                c.push(Gate::Cnot(a, cq));
                synth::push_temporary_and(&mut c, b, cq, anc);
                c.push(Gate::Cnot(a, anc));
                c.push(Gate::Cnot(cq, b));
                c.push(Gate::Cnot(a, b));
            }
        }
    }
    let mut register_weight = 0.0;
    for (j, level) in levels.iter().enumerate() {
        if let Some(&q) = level.first() {
            let w = (1u64 << j) as f64;
            c.push(Gate::Rz(w * theta, q));
            register_weight += w;
        }
    }
    // Σ_j Rz(2^j θ) on the register is e^{iθ(W − m)/2}·⊗Rz(θ), W = Σ 2^j.
    c.add_phase((register_weight - m as f64) * theta / 2.0);
    for ad in adders.iter().rev() {
        match *ad {
            Adder::Half { a, b, anc, clbit } => {
                c.push(Gate::Cnot(a, b));
                synth::push_and_uncompute(&mut c, a, b, anc, clbit);
            }
            Adder::Full { a, b, c: cq, anc, clbit } => {
                c.push(Gate::Cnot(a, b));
                c.push(Gate::Cnot(cq, b));
                c.push(Gate::Cnot(a, anc));
                synth::push_and_uncompute(&mut c, b, cq, anc, clbit);
                c.push(Gate::Cnot(a, cq));
                c.push(Gate::Cnot(a, b));
            }
        }
    }
    Ok(c)
}

/// `(c, α)` of `r = ⌈c·n^α⌉`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub c: f64,
    pub alpha: f64,
}

impl PowerLaw {
    pub fn r_at(&self, n: usize) -> u64 {
        (self.c * (n as f64).powf(self.alpha)).ceil().max(1.0) as u64
    }
}

/// Published fits of the minimal repetition count.
pub fn fit_table(mode: Mode, order: u32, k: usize) -> Option<PowerLaw> {
    let (c, alpha) = match (mode, order, k) {
        (Mode::PreFt, 4, 3) => (116.3, 0.169),
        (Mode::PreFt, 4, 4) => (66.4, 0.331),
        (Mode::PreFt, 4, 5) => (30.1, 0.602),
        (Mode::PreFt, 6, 3) => (12.5, 0.564),
        (Mode::PreFt, 6, 4) => (7.05, 0.759),
        (Mode::PreFt, 6, 5) => (4.24, 0.883),
        (Mode::PreFt, 6, 7) => (7.11, 0.476),
        (Mode::Ft, 4, 3) => (126.0, 0.215),
        (Mode::Ft, 4, 4) => (80.5, 0.328),
        (Mode::Ft, 4, 5) => (34.6, 0.620),
        (Mode::Ft, 6, 3) => (15.9, 0.493),
        (Mode::Ft, 6, 4) => (7.82, 0.751),
        (Mode::Ft, 6, 5) => (5.26, 0.826),
        (Mode::Ft, 6, 7) => (7.61, 0.490),
        _ => return None,
    };
    Some(PowerLaw { c, alpha })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub c: f64,
    pub alpha: f64,
    /// RMS residual in log space.
    pub residual: f64,
}

/// Least-squares line through `(ln n, ln r)`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<FitResult, FtError> {
    if points.len() < 3 {
        return Err(FtError::Domain(format!("need at least 3 points, got {}", points.len())));
    }
    if let Some(p) = points.iter().find(|(n, r)| !(*n > 0.0 && *r > 0.0) || !n.is_finite() || !r.is_finite()) {
        return Err(FtError::Domain(format!("points must be positive, got {p:?}")));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let len = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / len;
    let my = ys.iter().sum::<f64>() / len;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(FtError::Domain("all points share the same n".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let alpha = sxy / sxx;
    let intercept = my - alpha * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - alpha * x).powi(2)).sum();
    Ok(FitResult {
        c: intercept.exp(),
        alpha,
        residual: (sse / len).sqrt(),
    })
}

/// Where the repetition count of an estimate comes from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RSource {
    Explicit(u64),
    /// The built-in fit for `(mode, order, k)`.
    FromFit,
    Custom(PowerLaw),
}

#[derive(Clone, Debug)]
pub struct EstimateRequest {
    pub graph: Graph,
    pub disorders: Vec<f64>,
    pub order: u32,
    pub mode: Mode,
    pub r: RSource,
    pub eps: f64,
    pub time: Option<f64>,
    pub model: CostModel,
    /// Apply the optimizer to the block prefixes.
    pub optimize: bool,
}

/// End-to-end resource estimate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateReport {
    pub mode: Mode,
    pub n: usize,
    pub edges: usize,
    pub k: Option<usize>,
    pub order: u32,
    pub r: u64,
    pub stages: u64,
    pub colors_used: usize,
    pub optimized: bool,
    pub cnot: u64,
    pub depth2q: u64,
    pub rz_count: u64,
    pub t_count: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ft: Option<FtBreakdown>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FtBreakdown {
    pub eps_approx: f64,
    pub budget_exponent: f64,
    pub per_gate_error: f64,
    pub rz_cost: RzCost,
    pub and_count: u64,
    pub adder_t: u64,
    pub batched_rotations: u64,
    pub single_rotations: u64,
    pub clifford_t: u64,
    pub rus_cnot_overhead: u64,
    pub t_without_weight_trick: u64,
    pub t_without_rus: u64,
    pub weight_trick_saving: f64,
    pub rus_saving: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth_estimate: Option<f64>,
}

/// Structural tallies of an FT-lowered circuit prefix.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct FtTally {
    ands: f64,
    adder_t: f64,
    batched: f64,
    unbatched: f64,
    single: f64,
    clifford_t: f64,
    cnot: f64,
    depth: f64,
}

impl FtTally {
    fn extrapolate(a: &FtTally, b: &FtTally, r: u64) -> FtTally {
        let f = |x: f64, y: f64| x + (r as f64 - 1.0) * (y - x);
        FtTally {
            ands: f(a.ands, b.ands),
            adder_t: f(a.adder_t, b.adder_t),
            batched: f(a.batched, b.batched),
            unbatched: f(a.unbatched, b.unbatched),
            single: f(a.single, b.single),
            clifford_t: f(a.clifford_t, b.clifford_t),
            cnot: f(a.cnot, b.cnot),
            depth: f(a.depth, b.depth),
        }
    }
}

/// Smallest group the weight trick is applied to; a pair would trade two
/// rotations for two rotations plus an adder.
pub const MIN_BATCH: u64 = 3;

/// Groups `CzPow` gates by two-qubit layer and angle; each group of size
/// `m ≥ MIN_BATCH` shares one weight-trick batch.
fn tally_ft(c: &Circuit) -> FtTally {
    let mut depth = vec![0u64; c.num_qubits()];
    let mut groups: HashMap<(u64, u64), u64> = HashMap::new();
    let mut t = FtTally::default();
    for g in c.ops() {
        if let (a, Some(b)) = g.qubits() {
            let d = depth[a].max(depth[b]) + 1;
            depth[a] = d;
            depth[b] = d;
            if let Gate::CzPow(x, _, _) = *g {
                *groups.entry((d, x.to_bits())).or_default() += 1;
            }
        }
        match g {
            Gate::Rz(..) | Gate::Rx(..) | Gate::Ry(..) => t.single += 1.0,
            Gate::T(_) | Gate::Tdg(_) => t.clifford_t += 1.0,
            Gate::Cnot(..) => t.cnot += 1.0,
            _ => {}
        }
    }
    for &m in groups.values() {
        t.ands += m as f64;
        t.unbatched += m as f64;
        if m >= MIN_BATCH {
            t.adder_t += (4 * (m - weight(m))) as f64;
            t.batched += bit_length(m) as f64;
        } else {
            t.batched += m as f64;
        }
    }
    t.depth = depth.into_iter().max().unwrap_or(0) as f64;
    t
}

fn block_prefix(
    h: &DisorderedHeisenberg,
    layout: &ColoredLayout,
    plan: &synth::ProductFormulaPlan,
    blocks: u64,
    lowering: Lowering,
    optimize: bool,
) -> Result<Circuit, FtError> {
    let c = synth::build_pf_blocks(h, layout, plan, blocks, lowering)?;
    Ok(if optimize { optimizer::optimize(&c).0 } else { c })
}

fn round(x: f64) -> u64 {
    x.round().max(0.0) as u64
}

/// Accounting-only estimate for `[S_{2k}(t/r)]^r` on the given graph.
///
/// One- and two-block prefixes are built (and optimized when requested);
/// every count is extrapolated linearly in the number of blocks.
pub fn estimate(req: &EstimateRequest) -> Result<EstimateReport, FtError> {
    req.model.validate()?;
    if !(req.eps > 0.0 && req.eps < 1.0) {
        return Err(FtError::Domain(format!("ε must lie in (0, 1), got {}", req.eps)));
    }
    let g = &req.graph;
    let k = g.degree_hint();
    let r = match req.r {
        RSource::Explicit(0) => return Err(FtError::Domain("r must be at least 1".into())),
        RSource::Explicit(r) => r,
        RSource::Custom(fit) => fit.r_at(g.n()),
        RSource::FromFit => {
            let kk = k.ok_or_else(|| FtError::Domain("fit lookup needs a regular graph".into()))?;
            fit_table(req.mode, req.order, kk)
                .ok_or(FtError::MissingFit { k: kk, order: req.order, mode: req.mode })?
                .r_at(g.n())
        }
    };
    let h = match req.time {
        Some(t) => DisorderedHeisenberg::new(g.clone(), req.disorders.clone(), t, req.eps)?,
        None => DisorderedHeisenberg::with_defaults(g.clone(), req.disorders.clone())?,
    };
    let layout = synth::default_layout(g);
    let plan = synth::suzuki_stages(req.order, h.time(), r)?;
    let stages = plan.stages_per_block() as u64 * r;
    let lowering = Lowering::from(req.mode);
    let one = block_prefix(&h, &layout, &plan, 1, lowering, req.optimize)?;
    let two = block_prefix(&h, &layout, &plan, 2, lowering, req.optimize)?;
    let mut report = EstimateReport {
        mode: req.mode,
        n: g.n(),
        edges: g.num_edges(),
        k,
        order: req.order,
        r,
        stages,
        colors_used: layout.colors_used(),
        optimized: req.optimize,
        cnot: 0,
        depth2q: 0,
        rz_count: 0,
        t_count: 0,
        ft: None,
        warnings: Vec::new(),
    };
    match req.mode {
        Mode::PreFt => {
            let (a, b) = (count_resources(&one), count_resources(&two));
            let ext = |x: u64, y: u64| x as i64 + (r as i64 - 1) * (y as i64 - x as i64);
            report.cnot = ext(a.cnot_count, b.cnot_count).max(0) as u64;
            report.depth2q = ext(a.two_qubit_depth, b.two_qubit_depth).max(0) as u64;
            report.rz_count = ext(a.rz_count, b.rz_count).max(0) as u64;
            report.t_count = ext(a.t_count, b.t_count).max(0) as u64;
        }
        Mode::Ft => {
            let tally = FtTally::extrapolate(&tally_ft(&one), &tally_ft(&two), r);
            let ft = ft_breakdown(&tally, req.eps, &req.model, g.n(), layout.colors_used(), stages)?;
            report.cnot = round(tally.cnot) + ft.rus_cnot_overhead;
            report.depth2q = round(tally.depth);
            report.rz_count = if req.model.weight_trick_enabled {
                round(tally.batched + tally.single)
            } else {
                round(tally.unbatched + tally.single)
            };
            report.t_count = total_t(&tally, &req.model, &ft.rz_cost);
            if !(0.51..=0.60).contains(&ft.weight_trick_saving) && req.model.weight_trick_enabled {
                report.warnings.push(format!(
                    "weight-trick saving {:.1}% outside the 51–60% reference band",
                    100.0 * ft.weight_trick_saving
                ));
            }
            if !(0.44..=0.50).contains(&ft.rus_saving) && req.model.rus_enabled {
                report.warnings.push(format!(
                    "RUS saving {:.1}% outside the 44–50% reference band",
                    100.0 * ft.rus_saving
                ));
            }
            report.ft = Some(ft);
        }
    }
    Ok(report)
}

fn rotations(t: &FtTally, model: &CostModel) -> u64 {
    round(if model.weight_trick_enabled { t.batched } else { t.unbatched } + t.single)
}

fn total_t(t: &FtTally, model: &CostModel, cost: &RzCost) -> u64 {
    let adders = if model.weight_trick_enabled { t.adder_t } else { 0.0 };
    round(4.0 * t.ands + adders + t.clifford_t) + rotations(t, model) * cost.t_count
}

fn t_for(t: &FtTally, eps: f64, model: &CostModel) -> Result<(u64, RzCost, f64), FtError> {
    let n_rz = rotations(t, model).max(1);
    let eps_gate = per_gate_budget(eps / 2.0, n_rz, model.p())?;
    let cost = rz_cost(eps_gate, model)?;
    Ok((total_t(t, model, &cost), cost, eps_gate))
}

fn ft_breakdown(
    t: &FtTally,
    eps: f64,
    model: &CostModel,
    n: usize,
    colors: usize,
    stages: u64,
) -> Result<FtBreakdown, FtError> {
    let (total, cost, eps_gate) = t_for(t, eps, model)?;
    let no_trick = CostModel { weight_trick_enabled: false, ..model.clone() };
    let no_rus = CostModel { rus_enabled: false, ..model.clone() };
    let (t_no_trick, _, _) = t_for(t, eps, &no_trick)?;
    let (t_no_rus, _, _) = t_for(t, eps, &no_rus)?;
    let saving = |with: u64, without: u64| if without == 0 { 0.0 } else { 1.0 - with as f64 / without as f64 };
    Ok(FtBreakdown {
        eps_approx: eps / 2.0,
        budget_exponent: model.p(),
        per_gate_error: eps_gate,
        rz_cost: cost,
        and_count: round(t.ands),
        adder_t: if model.weight_trick_enabled { round(t.adder_t) } else { 0 },
        batched_rotations: if model.weight_trick_enabled { round(t.batched) } else { round(t.unbatched) },
        single_rotations: round(t.single),
        clifford_t: round(t.clifford_t),
        rus_cnot_overhead: rotations(t, model) * cost.cnot_overhead,
        t_without_weight_trick: t_no_trick,
        t_without_rus: t_no_rus,
        weight_trick_saving: saving(total, t_no_trick),
        rus_saving: saving(total, t_no_rus),
        depth_estimate: model
            .approx_depth
            .map(|a| stages as f64 * colors as f64 * ((n as f64).log2() + a)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_examples() {
        assert_eq!(per_gate_budget(0.5, 1, 1.0).unwrap(), 0.5);
        let b = per_gate_budget(5e-4, 100_000, 0.665).unwrap();
        assert!((b - 5e-9f64.powf(0.665)).abs() < 1e-18);
        assert!((b - 3.0e-6).abs() < 0.1e-6);
        assert!(per_gate_budget(5e-4, 100_000, 0.6).unwrap() > b);
        assert!(per_gate_budget(0.0, 1, 1.0).is_err());
        assert!(per_gate_budget(0.5, 0, 1.0).is_err());
        assert!(per_gate_budget(0.5, 1, 1.5).is_err());
    }

    #[test]
    fn cost_examples() {
        let plain = CostModel::plain();
        assert_eq!(rz_cost(3.0e-6, &plain).unwrap().t_count, 58);
        assert_eq!(rz_cost(0.5, &plain).unwrap().t_count, 5);
        assert!(rz_cost(1.0, &plain).is_err());
        let rus = CostModel { rus_enabled: true, ..CostModel::plain() };
        let c = rus_transform(50, &rus);
        assert_eq!(c.t_count, 20);
        assert_eq!(c.cnot_overhead, 51);
        assert_eq!(c.ancillas, 1);
    }

    #[test]
    fn plan_examples() {
        let p = weight_trick_plan(35).unwrap();
        assert_eq!((p.adders, p.t_cost, p.rz_applications), (32, 128, 6));
        let p = weight_trick_plan(1).unwrap();
        assert_eq!((p.adders, p.t_cost, p.rz_applications), (0, 0, 1));
        for j in 0..20 {
            assert_eq!(weight_trick_plan(1 << j).unwrap().adders, (1 << j) - 1);
        }
        assert!(weight_trick_plan(0).is_err());
    }

    #[test]
    fn trick_beats_direct() {
        // Two rotations need a two-bit register: 4 + 2·50 > 2·50.
        let p = weight_trick_plan(2).unwrap();
        assert!(p.t_cost + p.rz_applications * 50 > 2 * 50);
        for m in 3..=1000u64 {
            let p = weight_trick_plan(m).unwrap();
            assert!(p.t_cost + p.rz_applications * 50 < m * 50, "m = {m}");
        }
    }

    #[test]
    fn overrides() {
        let mut m = CostModel::default();
        m.apply_overrides("grid_A = 4\n# note\ngrid_B=1.5\np_mixing=0.7\nrus=false\n").unwrap();
        assert_eq!((m.grid_a, m.grid_b, m.p_mixing, m.rus_enabled), (4.0, 1.5, 0.7, false));
        assert!(m.clone().apply_overrides("grid_C=1").is_err());
        assert!(m.clone().apply_overrides("p_direct=2").is_err());
        assert!(m.apply_overrides("grid_A").is_err());
    }

    #[test]
    fn fit_examples() {
        let pts: Vec<(f64, f64)> = [4.0, 6.0, 9.0].iter().map(|&n: &f64| (n, 5.0 * n.sqrt())).collect();
        let f = fit_power_law(&pts).unwrap();
        assert!((f.c - 5.0).abs() < 1e-9 && (f.alpha - 0.5).abs() < 1e-12 && f.residual < 1e-12);
        let pts: Vec<(f64, f64)> = [8.0, 10.0, 12.0].iter().map(|&n: &f64| (n, 116.3 * n.powf(0.169))).collect();
        let f = fit_power_law(&pts).unwrap();
        assert!((f.c - 116.3).abs() < 1e-6 && (f.alpha - 0.169).abs() < 1e-6);
        assert!(fit_power_law(&pts[..2]).is_err());
        assert!(fit_power_law(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]).is_err());
    }

    #[test]
    fn fit_table_gaps() {
        assert!(fit_table(Mode::PreFt, 4, 7).is_none());
        assert_eq!(fit_table(Mode::PreFt, 4, 3).unwrap().r_at(70), 239);
        assert_eq!(fit_table(Mode::Ft, 4, 3).unwrap().r_at(70), 315);
    }
}

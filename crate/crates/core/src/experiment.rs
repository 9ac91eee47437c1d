//! r-scaling sweeps over random regular graphs and power-law fits of their
//! output.
//!
//! Every sample draws its graph and disorder from a seed derived from the
//! master seed and `(k, n, sample)` with a splitmix64 chain, so samples are
//! independent of scheduling and the CSV is byte-identical across runs.

use std::io::{Read, Write};
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ftcost::{self, FitResult, FtError};
use crate::graphs::{self, Graph, GraphError};
use crate::sim::{self, SimError, TrotterProblem};
use crate::synth::{self, DisorderedHeisenberg, Mode, SynthError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("no usable rows in the sweep data")]
    Empty,
    #[error(transparent)]
    Fit(#[from] FtError),
}

fn default_order() -> u32 {
    4
}
fn default_eps() -> f64 {
    synth::DEFAULT_TARGET_ERROR
}
fn default_samples() -> usize {
    10
}
fn default_mode() -> Mode {
    Mode::PreFt
}

/// Sweep parameters. Field names double as the JSON config keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub k: usize,
    pub n_min: usize,
    pub n_max: usize,
    #[serde(default = "default_order")]
    pub order: u32,
    /// Evolution time; defaults to [`default_time`].
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    /// Cost-model override file (used by `estimate`).
    #[serde(default)]
    pub cost_model: Option<PathBuf>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Record wall-clock time per sample (makes the CSV non-reproducible).
    #[serde(default)]
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn new(k: usize, n_min: usize, n_max: usize) -> Self {
        ExperimentConfig {
            k,
            n_min,
            n_max,
            order: default_order(),
            t: None,
            eps: default_eps(),
            samples: default_samples(),
            seed: 0,
            mode: default_mode(),
            cost_model: None,
            out: None,
            timing: false,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.n_min > self.n_max {
            return bad(format!("empty n range {}..={}", self.n_min, self.n_max));
        }
        if self.n_max > sim::MAX_QUBITS {
            return bad(format!("n ≤ {} required, got {}", sim::MAX_QUBITS, self.n_max));
        }
        if self.n_min <= self.k {
            return bad(format!("n must exceed k = {}, got {}", self.k, self.n_min));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return bad(format!("ε must lie in (0, 1), got {}", self.eps));
        }
        if self.samples == 0 {
            return bad("samples must be at least 1".into());
        }
        if !matches!(self.order, 2 | 4 | 6) {
            return bad(format!("order must be 2, 4 or 6, got {}", self.order));
        }
        if let Some(t) = self.t {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("t must be positive, got {t}"));
            }
        }
        Ok(())
    }
}

/// `2d` for the degree-diameter graph of each degree the sweeps target:
/// (3-5-70), (4-4-98), (5-3-72), (7-2-50).
pub fn default_time(k: usize) -> Option<f64> {
    match k {
        3 => Some(10.0),
        4 => Some(8.0),
        5 => Some(6.0),
        7 => Some(4.0),
        _ => None,
    }
}

/// One splitmix64 output step.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// `splitmix(splitmix(splitmix(splitmix(master) ⊕ k) ⊕ n) ⊕ sample)`
pub fn sample_seed(master: u64, k: usize, n: usize, sample: usize) -> u64 {
    let mut s = splitmix64(master);
    for v in [k as u64, n as u64, sample as u64] {
        s = splitmix64(s ^ v);
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub n: usize,
    pub sample: usize,
    pub seed: u64,
    pub status: String,
    pub r_min: Option<u64>,
    pub error: Option<f64>,
    pub elapsed_ms: Option<u64>,
}

#[derive(Debug, Error)]
enum SampleError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Graph for one sample; `true` when the odd-`nk` repair was used.
pub fn sample_graph(n: usize, k: usize, seed: u64) -> Result<(Graph, bool), GraphError> {
    if n * k % 2 == 1 {
        Ok((graphs::random_regular_odd_repair(n, k, seed)?, true))
    } else {
        Ok((graphs::random_regular(n, k, seed)?, false))
    }
}

fn run_sample(cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<(bool, sim::RSearchResult), SampleError> {
    let (g, repaired) = sample_graph(n, cfg.k, seed)?;
    let d = synth::random_disorders(n, splitmix64(seed));
    let t = match cfg.t.or_else(|| default_time(cfg.k)) {
        Some(t) => t,
        None => 2.0 * graphs::diameter(&g)? as f64,
    };
    let h = DisorderedHeisenberg::new(g, d, t, cfg.eps)?;
    let problem = TrotterProblem::new(&h)?;
    let res = problem.find_min_r(cfg.order, sim::search_budget(cfg.mode, cfg.eps), cfg.mode)?;
    Ok((repaired, res))
}

/// Runs every `(n, sample)` job in parallel; rows come back sorted.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, ExperimentError> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = (cfg.n_min..=cfg.n_max)
        .flat_map(|n| (0..cfg.samples).map(move |s| (n, s)))
        .collect();
    let mut rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|&(n, sample)| {
            let seed = sample_seed(cfg.seed, cfg.k, n, sample);
            let start = Instant::now();
            let outcome = run_sample(cfg, n, seed);
            let elapsed_ms = cfg.timing.then(|| start.elapsed().as_millis() as u64);
            let (status, r_min, error) = match outcome {
                Ok((repaired, res)) => (
                    if repaired { "repaired" } else { "ok" }.to_string(),
                    Some(res.r_min),
                    Some(res.achieved_error),
                ),
                Err(e) => (format!("error: {e}"), None, None),
            };
            SweepRow {
                k: cfg.k,
                n,
                sample,
                seed,
                status,
                r_min,
                error,
                elapsed_ms,
            }
        })
        .collect();
    rows.sort_by_key(|r| (r.k, r.n, r.sample));
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<SweepRow>, ExperimentError> {
    let mut rd = csv::Reader::from_reader(input);
    let rows = rd.deserialize().collect::<Result<Vec<SweepRow>, _>>()?;
    Ok(rows)
}

/// Power-law fit of the mean `r_min` per `n`, for one `k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KFit {
    pub k: usize,
    pub c: f64,
    pub alpha: f64,
    pub residual: f64,
    /// `(n, mean r_min, sample count)`
    pub points: Vec<(usize, f64, usize)>,
}

/// Mean `r_min` per `(k, n)` over successful rows, fitted per `k`.
pub fn fit_rows(rows: &[SweepRow]) -> Result<Vec<KFit>, ExperimentError> {
    use std::collections::BTreeMap;
    let mut acc: BTreeMap<usize, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for r in rows {
        if let (Some(rm), false) = (r.r_min, r.status.starts_with("error")) {
            acc.entry(r.k).or_default().entry(r.n).or_default().push(rm as f64);
        }
    }
    if acc.is_empty() {
        return Err(ExperimentError::Empty);
    }
    acc.into_iter()
        .map(|(k, by_n)| {
            let points: Vec<(usize, f64, usize)> = by_n
                .into_iter()
                .map(|(n, v)| (n, v.iter().sum::<f64>() / v.len() as f64, v.len()))
                .collect();
            let xy: Vec<(f64, f64)> = points.iter().map(|&(n, r, _)| (n as f64, r)).collect();
            let FitResult { c, alpha, residual } = ftcost::fit_power_law(&xy)?;
            Ok(KFit {
                k,
                c,
                alpha,
                residual,
                points,
            })
        })
        .collect()
}

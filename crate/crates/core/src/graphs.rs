//! Interaction graphs: generation, loading, diameter, and edge coloring.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Whole-matching retries allowed when sampling random regular graphs.
pub const RETRY_BUDGET: usize = 10_000;

/// Reshuffle attempts used by [`vizing_color`] when searching for a Δ-coloring.
pub const DEFAULT_COLOR_ATTEMPTS: usize = 50;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid parameters: {0}")]
    Parameter(String),
    #[error("random generation failed after {0} attempts")]
    GenerationFailed(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid graph: {0}")]
    Validation(String),
    #[error("graph is disconnected; diameter is infinite")]
    Disconnected,
    #[error("edge coloring does not match the graph: {0}")]
    LayoutMismatch(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Undirected simple graph on nodes `0..n`. Edges are stored as `(u, v)` with
/// `u < v`, sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    degree_hint: Option<usize>,
}

impl Graph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Validation("graph must have at least one node".into()));
        }
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(GraphError::Validation(format!(
                    "edge ({u}, {v}) has an endpoint outside 0..{n}"
                )));
            }
            if u == v {
                return Err(GraphError::Validation(format!("self-loop at node {u}")));
            }
            if !set.insert((u.min(v), u.max(v))) {
                return Err(GraphError::Validation(format!("duplicate edge ({u}, {v})")));
            }
        }
        Ok(Graph {
            n,
            edges: set.into_iter().collect(),
            degree_hint: None,
        })
    }

    /// Declares the graph `k`-regular, checking every degree.
    pub fn with_degree_hint(mut self, k: usize) -> Result<Self, GraphError> {
        if let Some((v, d)) = self.degrees().into_iter().enumerate().find(|&(_, d)| d != k) {
            return Err(GraphError::Validation(format!(
                "node {v} has degree {d}, expected {k}"
            )));
        }
        self.degree_hint = Some(k);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn degree_hint(&self) -> Option<usize> {
        self.degree_hint
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(u, v) in &self.edges {
            d[u] += 1;
            d[v] += 1;
        }
        d
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.binary_search(&(u.min(v), u.max(v))).is_ok()
    }

    /// Edge-list text: `p <n>` header, then one `u v` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("p {}\n", self.n);
        for (u, v) in &self.edges {
            let _ = writeln!(s, "{u} {v}");
        }
        s
    }
}

/// Uniformly random `k`-regular simple graph on `n` nodes from the pairing
/// (configuration) model.
///
/// Stubs are paired at random, one pair at a time, rejecting pairs that would
/// form a loop or a repeated edge. If no admissible pair remains the whole
/// matching is discarded and restarted, up to [`RETRY_BUDGET`] times.
pub fn random_regular(n: usize, k: usize, seed: u64) -> Result<Graph, GraphError> {
    if k < 1 || n <= k {
        return Err(GraphError::Parameter(format!(
            "a {k}-regular graph on {n} nodes needs n > k >= 1"
        )));
    }
    if (n * k) % 2 == 1 {
        return Err(GraphError::Parameter(format!(
            "n*k = {} is odd; no {k}-regular graph on {n} nodes exists",
            n * k
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RETRY_BUDGET {
        if let Some(edges) = try_pairing(n, k, &mut rng) {
            return Graph::new(n, edges)?.with_degree_hint(k);
        }
    }
    Err(GraphError::GenerationFailed(RETRY_BUDGET))
}

fn try_pairing(n: usize, k: usize, rng: &mut impl Rng) -> Option<Vec<(usize, usize)>> {
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, k)).collect();
    let mut adjacent = vec![false; n * n];
    let mut edges = Vec::with_capacity(n * k / 2);
    let admissible = |u: usize, v: usize, adjacent: &[bool]| u != v && !adjacent[u * n + v];
    while !stubs.is_empty() {
        let mut picked = None;
        for _ in 0..64 {
            let i = rng.random_range(0..stubs.len());
            let j = rng.random_range(0..stubs.len());
            if i != j && admissible(stubs[i], stubs[j], &adjacent) {
                picked = Some((i, j));
                break;
            }
        }
        if picked.is_none() {
            // Fall back to an exhaustive scan so that a dead end is detected
            // rather than guessed at.
            let pairs: Vec<(usize, usize)> = (0..stubs.len())
                .flat_map(|i| (i + 1..stubs.len()).map(move |j| (i, j)))
                .filter(|&(i, j)| admissible(stubs[i], stubs[j], &adjacent))
                .collect();
            if pairs.is_empty() {
                return None;
            }
            picked = Some(pairs[rng.random_range(0..pairs.len())]);
        }
        let (i, j) = picked.unwrap();
        let (u, v) = (stubs[i], stubs[j]);
        adjacent[u * n + v] = true;
        adjacent[v * n + u] = true;
        edges.push((u, v));
        let (hi, lo) = (i.max(j), i.min(j));
        stubs.swap_remove(hi);
        stubs.swap_remove(lo);
    }
    Some(edges)
}

/// Near-regular graph for odd `n·k`: a random `k`-regular graph on `n + 1`
/// nodes loses a random vertex, then `⌊k/2⌋` disjoint random pairs of its
/// former neighbours are joined (never duplicating an edge). One vertex is
/// left at degree `k − 1`.
pub fn random_regular_odd_repair(n: usize, k: usize, seed: u64) -> Result<Graph, GraphError> {
    if (n * k).is_multiple_of(2) {
        return Err(GraphError::Parameter(format!(
            "n*k = {} is even; use random_regular",
            n * k
        )));
    }
    if k < 1 || n <= k {
        return Err(GraphError::Parameter(format!(
            "a degree-{k} graph on {n} nodes needs n > k >= 1"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    const PAIRINGS_PER_BASE: usize = 100;
    let mut attempts = 0;
    while attempts < RETRY_BUDGET {
        let base = random_regular(n + 1, k, rng.random())?;
        let removed = rng.random_range(0..=n);
        let relabel = |v: usize| if v > removed { v - 1 } else { v };
        let mut deficient = Vec::with_capacity(k);
        let mut kept = Vec::with_capacity(base.num_edges());
        for &(u, v) in base.edges() {
            if u == removed {
                deficient.push(relabel(v));
            } else if v == removed {
                deficient.push(relabel(u));
            } else {
                kept.push((relabel(u), relabel(v)));
            }
        }
        let reduced = Graph::new(n, kept.iter().copied())?;
        for _ in 0..PAIRINGS_PER_BASE {
            attempts += 1;
            deficient.shuffle(&mut rng);
            let new_edges: Vec<(usize, usize)> =
                deficient.chunks_exact(2).map(|p| (p[0], p[1])).collect();
            if new_edges.iter().all(|&(u, v)| !reduced.has_edge(u, v)) {
                return Graph::new(n, kept.iter().copied().chain(new_edges));
            }
            if attempts >= RETRY_BUDGET {
                break;
            }
        }
    }
    Err(GraphError::GenerationFailed(RETRY_BUDGET))
}

/// The Hoffman–Singleton graph (50 nodes, 7-regular, diameter 2, girth 5).
///
/// Five pentagons `P_h` (nodes `5h + j`, `j ~ j±1`) and five pentagrams `Q_i`
/// (nodes `25 + 5i + j`, `j ~ j±2`); node `j` of `P_h` is joined to node
/// `(h·i + j) mod 5` of `Q_i`.
pub fn hoffman_singleton() -> Graph {
    let p = |h: usize, j: usize| 5 * h + j % 5;
    let q = |i: usize, j: usize| 25 + 5 * i + j % 5;
    let mut edges = Vec::with_capacity(175);
    for h in 0..5 {
        for j in 0..5 {
            edges.push((p(h, j), p(h, j + 1)));
            edges.push((q(h, j), q(h, j + 2)));
            for i in 0..5 {
                edges.push((p(h, j), q(i, h * i + j)));
            }
        }
    }
    Graph::new(50, edges)
        .and_then(|g| g.with_degree_hint(7))
        .expect("construction is a simple 7-regular graph")
}

/// Parses the edge-list format: optional `p <n>` first line, then `u v` lines;
/// `#` lines and blank lines are ignored.
pub fn parse_edge_list(text: &str) -> Result<Graph, GraphError> {
    let mut declared_n = None;
    let mut edges = Vec::new();
    let mut seen_content = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = trimmed.split_whitespace().collect();
        let perr = |message: String| GraphError::Parse { line, message };
        if parts[0] == "p" {
            if seen_content {
                return Err(perr("`p <n>` header must come first".into()));
            }
            if parts.len() != 2 {
                return Err(perr("expected `p <n>`".into()));
            }
            let n = parts[1]
                .parse::<usize>()
                .map_err(|_| perr(format!("invalid node count `{}`", parts[1])))?;
            declared_n = Some(n);
            seen_content = true;
            continue;
        }
        seen_content = true;
        if parts.len() != 2 {
            return Err(perr(format!("expected `u v`, found `{trimmed}`")));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| GraphError::Parse { line, message: format!("invalid node id `{s}`") })
        };
        edges.push((parse(parts[0])?, parse(parts[1])?));
    }
    let inferred = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
    let n = match declared_n {
        Some(n) if n < inferred => {
            return Err(GraphError::Validation(format!(
                "header declares {n} nodes but node {} appears",
                inferred - 1
            )))
        }
        Some(n) => n,
        None => inferred,
    };
    let g = Graph::new(n, edges)?;
    let degrees = g.degrees();
    match degrees.first() {
        Some(&k) if k > 0 && degrees.iter().all(|&d| d == k) => g.with_degree_hint(k),
        _ => Ok(g),
    }
}

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Graph, GraphError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_edge_list(&text)
}

/// Loads a degree-diameter graph and checks it against its `(k-d-n)` triple.
pub fn load_degree_diameter(
    path: impl AsRef<Path>,
    k: usize,
    d: usize,
    n: usize,
) -> Result<Graph, GraphError> {
    let g = load_edge_list(path)?;
    if g.n() != n {
        return Err(GraphError::Validation(format!("expected {n} nodes, found {}", g.n())));
    }
    let g = g.with_degree_hint(k)?;
    let diam = diameter(&g)?;
    if diam != d {
        return Err(GraphError::Validation(format!("expected diameter {d}, found {diam}")));
    }
    Ok(g)
}

fn bfs(adj: &[Vec<usize>], src: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[src] = Some(0);
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap();
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Largest shortest-path distance between any two nodes.
pub fn diameter(g: &Graph) -> Result<usize, GraphError> {
    let adj = g.adjacency();
    let mut best = 0;
    for src in 0..g.n() {
        for d in bfs(&adj, src) {
            best = best.max(d.ok_or(GraphError::Disconnected)?);
        }
    }
    Ok(best)
}

/// Length of the shortest cycle, or `None` for forests.
pub fn girth(g: &Graph) -> Option<usize> {
    let adj = g.adjacency();
    let mut best: Option<usize> = None;
    for src in 0..g.n() {
        let mut dist = vec![usize::MAX; g.n()];
        let mut parent = vec![usize::MAX; g.n()];
        dist[src] = 0;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    parent[v] = u;
                    queue.push_back(v);
                } else if parent[u] != v {
                    let len = dist[u] + dist[v] + 1;
                    best = Some(best.map_or(len, |b| b.min(len)));
                }
            }
        }
    }
    best
}

/// Proper edge coloring: each class is a matching and the classes partition
/// the edge set. Classes are ordered by decreasing size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColoredLayout {
    classes: Vec<Vec<(usize, usize)>>,
}

impl ColoredLayout {
    pub fn from_classes(classes: Vec<Vec<(usize, usize)>>) -> Self {
        ColoredLayout {
            classes: classes.into_iter().filter(|c| !c.is_empty()).collect(),
        }
    }

    pub fn classes(&self) -> &[Vec<(usize, usize)>] {
        &self.classes
    }

    pub fn colors_used(&self) -> usize {
        self.classes.len()
    }

    /// Checks the layout colors exactly the edges of `g`, with matchings.
    pub fn check(&self, g: &Graph) -> Result<(), GraphError> {
        let mut seen = BTreeSet::new();
        for (ci, class) in self.classes.iter().enumerate() {
            let mut touched = BTreeSet::new();
            for &(u, v) in class {
                let e = (u.min(v), u.max(v));
                if !g.has_edge(e.0, e.1) {
                    return Err(GraphError::LayoutMismatch(format!("({u}, {v}) is not an edge")));
                }
                if !seen.insert(e) {
                    return Err(GraphError::LayoutMismatch(format!("({u}, {v}) colored twice")));
                }
                if !touched.insert(u) || !touched.insert(v) {
                    return Err(GraphError::LayoutMismatch(format!(
                        "class {ci} is not a matching at ({u}, {v})"
                    )));
                }
            }
        }
        if seen.len() != g.num_edges() {
            return Err(GraphError::LayoutMismatch(format!(
                "{} of {} edges colored",
                seen.len(),
                g.num_edges()
            )));
        }
        Ok(())
    }
}

/// Misra–Gries constructive Vizing coloring with at most Δ+1 colors.
struct MisraGries {
    /// `slot[u][c]` is the neighbour joined to `u` by the edge of color `c`.
    slot: Vec<Vec<Option<usize>>>,
    colors: usize,
}

impl MisraGries {
    fn new(n: usize, max_degree: usize) -> Self {
        MisraGries {
            slot: vec![vec![None; max_degree + 1]; n],
            colors: max_degree + 1,
        }
    }

    fn color_of(&self, u: usize, v: usize) -> Option<usize> {
        self.slot[u].iter().position(|&w| w == Some(v))
    }

    fn is_free(&self, u: usize, c: usize) -> bool {
        self.slot[u][c].is_none()
    }

    fn free_color(&self, u: usize) -> usize {
        (0..self.colors)
            .find(|&c| self.is_free(u, c))
            .expect("a vertex of degree <= Δ always has a free color among Δ+1")
    }

    fn set(&mut self, u: usize, v: usize, c: usize) {
        self.slot[u][c] = Some(v);
        self.slot[v][c] = Some(u);
    }

    fn unset(&mut self, u: usize, v: usize, c: usize) {
        self.slot[u][c] = None;
        self.slot[v][c] = None;
    }

    /// Maximal fan of `u` starting at the uncolored edge `(u, v)`.
    fn fan(&self, u: usize, v: usize, neighbours: &[usize]) -> Vec<usize> {
        let mut fan = vec![v];
        let mut in_fan = vec![false; neighbours.len()];
        loop {
            let last = *fan.last().unwrap();
            let next = neighbours.iter().enumerate().find(|&(i, &w)| {
                !in_fan[i]
                    && w != v
                    && self
                        .color_of(u, w)
                        .is_some_and(|c| self.is_free(last, c))
            });
            match next {
                Some((i, &w)) => {
                    in_fan[i] = true;
                    fan.push(w);
                }
                None => return fan,
            }
        }
    }

    /// Swaps colors `c` and `d` along the maximal path from `u` whose first
    /// edge has color `d`.
    fn invert_path(&mut self, u: usize, c: usize, d: usize) {
        let mut path = Vec::new();
        let mut cur = u;
        let mut want = d;
        while let Some(next) = self.slot[cur][want] {
            path.push((cur, next, want));
            cur = next;
            want = if want == d { c } else { d };
        }
        for &(a, b, col) in &path {
            self.unset(a, b, col);
        }
        for &(a, b, col) in &path {
            let other = if col == d { c } else { d };
            self.set(a, b, other);
        }
    }

    fn color_edge(&mut self, u: usize, v: usize, neighbours: &[usize]) {
        let fan = self.fan(u, v, neighbours);
        let c = self.free_color(u);
        let d = self.free_color(*fan.last().unwrap());
        if c != d {
            self.invert_path(u, c, d);
        }
        // After the inversion `d` is free on u; pick the first fan vertex with
        // `d` free whose prefix is still a fan.
        let mut w_idx = None;
        for (i, &w) in fan.iter().enumerate() {
            if i > 0 {
                let prev = fan[i - 1];
                match self.color_of(u, w) {
                    Some(col) if self.is_free(prev, col) => {}
                    _ => break,
                }
            }
            if self.is_free(w, d) {
                w_idx = Some(i);
                break;
            }
        }
        let w_idx = w_idx.expect("Misra-Gries guarantees a fan prefix ending at a d-free vertex");
        // Rotate the fan prefix: edge (u, fan[i]) takes the color of (u, fan[i+1]).
        for i in 0..w_idx {
            let next_col = self.color_of(u, fan[i + 1]).expect("fan edges are colored");
            self.unset(u, fan[i + 1], next_col);
            self.set(u, fan[i], next_col);
        }
        self.set(u, fan[w_idx], d);
    }
}

fn misra_gries(g: &Graph, order: &[(usize, usize)]) -> ColoredLayout {
    let delta = g.max_degree();
    let adj = g.adjacency();
    let mut mg = MisraGries::new(g.n(), delta);
    for &(u, v) in order {
        mg.color_edge(u, v, &adj[u]);
    }
    let mut classes = vec![Vec::new(); delta + 1];
    for &(u, v) in g.edges() {
        let c = mg.color_of(u, v).expect("every edge is colored");
        classes[c].push((u, v));
    }
    classes.sort_by_key(|c| std::cmp::Reverse(c.len()));
    ColoredLayout::from_classes(classes)
}

/// Edge coloring with at most Δ+1 colors. The first attempt uses the sorted
/// edge order; if it needs Δ+1 colors, up to `attempts` further runs on
/// seeded random edge orders look for a Δ-coloring. Otherwise the first
/// coloring is returned.
pub fn vizing_color(g: &Graph, seed: u64, attempts: usize) -> ColoredLayout {
    let delta = g.max_degree();
    let mut order = g.edges().to_vec();
    let first = misra_gries(g, &order);
    if first.colors_used() <= delta {
        return first;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..attempts {
        order.shuffle(&mut rng);
        let layout = misra_gries(g, &order);
        if layout.colors_used() <= delta {
            return layout;
        }
    }
    first
}

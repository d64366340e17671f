//! Regular graphs, their random-walk chains, and the arithmetic of the
//! expander nonembeddability bounds.
//!
//! Random regular graphs come from an incremental pairing model and are
//! resampled until simple and connected. The bound calculators use natural
//! logarithms throughout; every universal constant the bounds depend on is
//! an explicit input (see the `calibrate` command of the CLI).

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::markov::{build_reversible_chain, spectral_data, StochasticChain};
use crate::num::{ext_f64, rng_stream};
use crate::rayleigh::{gamma_heuristic_with, gamma_hilbert_exact, GapEstimate, HeuristicOptions, Implication};
use crate::spaces::MetricSpace;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Largest graph accepted by graph operations.
pub const MAX_GRAPH_VERTICES: usize = 100_000;
/// Sampling attempts before giving up.
pub const RESAMPLE_BUDGET: usize = 1000;

/// A simple `d`-regular graph on `{0, …, n−1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphJson", into = "GraphJson")]
pub struct RegularGraph {
    n: usize,
    d: usize,
    adj: Vec<Vec<usize>>,
    connected: bool,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d: Option<usize>,
    edges: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    connected: Option<bool>,
}

impl TryFrom<GraphJson> for RegularGraph {
    type Error = Error;
    fn try_from(j: GraphJson) -> Result<Self> {
        let n = j.n.unwrap_or_else(|| j.edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0));
        let g = RegularGraph::from_edges(n, &j.edges)?;
        if let Some(d) = j.d {
            if d != g.d {
                return Err(Error::InvalidInput(format!("declared degree {d} but the edges give degree {}", g.d)));
            }
        }
        Ok(g)
    }
}

impl From<RegularGraph> for GraphJson {
    fn from(g: RegularGraph) -> Self {
        GraphJson { n: Some(g.n), d: Some(g.d), edges: g.edges(), connected: Some(g.connected) }
    }
}

impl RegularGraph {
    /// Build from an undirected edge list, checking simplicity and regularity.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("a graph needs at least one vertex".into()));
        }
        if n > MAX_GRAPH_VERTICES {
            return Err(Error::InstanceTooLarge(format!("graphs are capped at {MAX_GRAPH_VERTICES} vertices, got {n}")));
        }
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidInput(format!("edge ({u}, {v}) leaves the vertex range 0..{n}")));
            }
            if u == v {
                return Err(Error::InvalidInput(format!("loop at vertex {u}")));
            }
            if adj[u].contains(&v) {
                return Err(Error::InvalidInput(format!("repeated edge ({u}, {v})")));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        let d = adj[0].len();
        if let Some(u) = adj.iter().position(|a| a.len() != d) {
            return Err(Error::InvalidInput(format!("vertex {u} has degree {} but vertex 0 has degree {d}", adj[u].len())));
        }
        for a in adj.iter_mut() {
            a.sort_unstable();
        }
        let connected = is_connected(&adj);
        Ok(RegularGraph { n, d, adj, connected })
    }

    /// The cycle `C_n` (2-regular).
    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidInput(format!("a cycle needs at least 3 vertices, got {n}")));
        }
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        RegularGraph::from_edges(n, &edges)
    }

    /// The complete graph `K_n`.
    pub fn complete(n: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                edges.push((i, j));
            }
        }
        RegularGraph::from_edges(n, &edges)
    }

    /// The hypercube graph `Q_k` on `{0,1}^k` (vertex = bitmask).
    pub fn hypercube(k: usize) -> Result<Self> {
        if k == 0 || k > 16 {
            return Err(Error::InvalidInput(format!("hypercube dimension must lie in 1..=16, got {k}")));
        }
        let n = 1usize << k;
        let mut edges = Vec::new();
        for u in 0..n {
            for b in 0..k {
                let v = u ^ (1 << b);
                if u < v {
                    edges.push((u, v));
                }
            }
        }
        RegularGraph::from_edges(n, &edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adj
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    /// Edges `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.n * self.d / 2);
        for (u, a) in self.adj.iter().enumerate() {
            out.extend(a.iter().filter(|&&v| u < v).map(|&v| (u, v)));
        }
        out
    }

    /// One `"u v"` line per edge.
    pub fn to_edge_list(&self) -> String {
        self.edges().iter().map(|(u, v)| format!("{u} {v}\n")).collect()
    }

    /// Shortest-path metric (requires a connected graph).
    pub fn metric(&self) -> Result<Matrix> {
        crate::spaces::graph_metric(&self.adj)
    }

    /// Whether `u ~ v`.
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }
}

fn is_connected(adj: &[Vec<usize>]) -> bool {
    bfs(adj, 0).iter().all(|&d| d != u16::MAX)
}

/// Breadth-first distances from `s`; unreachable vertices get `u16::MAX`.
fn bfs(adj: &[Vec<usize>], s: usize) -> Vec<u16> {
    let mut dist = vec![u16::MAX; adj.len()];
    let mut queue = VecDeque::new();
    dist[s] = 0;
    queue.push_back(s);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == u16::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Parse a graph from JSON (`{"n"?, "edges": [[u, v], …]}`) or from an edge
/// list with one `u v` pair per line (0-indexed; `#` starts a comment).
pub fn parse_graph(text: &str) -> Result<RegularGraph> {
    let t = text.trim_start();
    if t.starts_with('{') {
        return serde_json::from_str(t).map_err(|e| Error::InvalidInput(format!("graph JSON: {e}")));
    }
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::InvalidInput(format!("line {}: bad vertex {s:?}", lineno + 1)));
        match parts.as_slice() {
            [u, v] => edges.push((parse(u)?, parse(v)?)),
            _ => return Err(Error::InvalidInput(format!("line {}: expected \"u v\"", lineno + 1))),
        }
    }
    let n = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
    RegularGraph::from_edges(n, &edges)
}

/// Sample a simple connected `d`-regular graph on `n` vertices.
///
/// Each attempt pairs the `n·d` half-edges incrementally: two free
/// half-edges are drawn uniformly and joined unless that would create a loop
/// or a repeated edge; an attempt that gets stuck, or ends disconnected, is
/// discarded. All randomness comes from `seed`.
pub fn random_regular_graph(n: usize, d: usize, seed: u64) -> Result<RegularGraph> {
    if (n * d) % 2 == 1 {
        return Err(Error::ParityViolation { n, d });
    }
    if d < 3 {
        return Err(Error::InvalidInput(format!("degree must be at least 3, got {d}")));
    }
    if n <= d {
        return Err(Error::InvalidInput(format!("need n > d, got n = {n}, d = {d}")));
    }
    if n > MAX_GRAPH_VERTICES {
        return Err(Error::InstanceTooLarge(format!("graphs are capped at {MAX_GRAPH_VERTICES} vertices, got {n}")));
    }
    let mut rng = rng_stream(seed, 0);
    for _ in 0..RESAMPLE_BUDGET {
        if let Some(adj) = pairing_attempt(n, d, &mut rng) {
            if is_connected(&adj) {
                let edges: Vec<(usize, usize)> =
                    adj.iter().enumerate().flat_map(|(u, a)| a.iter().filter(move |&&v| u < v).map(move |&v| (u, v))).collect();
                return RegularGraph::from_edges(n, &edges);
            }
        }
    }
    Err(Error::ResampleBudgetExceeded(RESAMPLE_BUDGET))
}

fn pairing_attempt<R: Rng>(n: usize, d: usize, rng: &mut R) -> Option<Vec<Vec<usize>>> {
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, d)).collect();
    let mut adj: Vec<Vec<usize>> = vec![Vec::with_capacity(d); n];
    while !stubs.is_empty() {
        let m = stubs.len();
        let mut joined = false;
        for _ in 0..(4 * m).max(64) {
            let i = rng.random_range(0..m);
            let j = rng.random_range(0..m);
            let (u, v) = (stubs[i], stubs[j]);
            if i == j || u == v || adj[u].contains(&v) {
                continue;
            }
            adj[u].push(v);
            adj[v].push(u);
            let (hi, lo) = if i > j { (i, j) } else { (j, i) };
            stubs.swap_remove(hi);
            stubs.swap_remove(lo);
            joined = true;
            break;
        }
        if !joined {
            return None;
        }
    }
    Some(adj)
}

/// The simple random walk `A_G = adjacency/d` with uniform `π`.
///
/// Disconnected graphs are accepted; their chain has `λ₂ = 1`.
pub fn graph_chain(g: &RegularGraph) -> Result<StochasticChain> {
    if g.d == 0 {
        return Err(Error::InvalidInput("a 0-regular graph has no random walk".into()));
    }
    let n = g.n;
    let w = 1.0 / g.d as f64;
    let mut a = Matrix::zeros(n, n);
    for (u, nb) in g.adj.iter().enumerate() {
        for &v in nb {
            a[(u, v)] = w;
        }
    }
    build_reversible_chain(&a, Some(&vec![1.0 / n as f64; n]))
}

/// Largest `k` with `d^k ≤ n/2` (i.e. `⌊log_d(n/2)⌋`, and 0 when `n < 2d`).
pub fn spread_threshold(n: usize, d: usize) -> u32 {
    if d < 2 {
        return 0;
    }
    let mut k = 0u32;
    let mut pow = d as u128;
    while 2 * pow <= n as u128 {
        k += 1;
        pow *= d as u128;
    }
    k
}

/// Report of [`distance_spread_check`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpreadReport {
    pub threshold: u32,
    /// Minimum over `u` of `#{v : dist(u, v) ≥ threshold}`.
    pub count: usize,
    /// `count ≥ n/2`.
    pub holds: bool,
}

/// Check that every vertex sees at least half of the graph at distance
/// `≥ ⌊log_d(n/2)⌋` (balls of smaller radius hold fewer than `n/2` vertices).
pub fn distance_spread_check(g: &RegularGraph) -> Result<SpreadReport> {
    if !g.connected {
        return Err(Error::Disconnected);
    }
    let threshold = spread_threshold(g.n, g.d);
    let t = threshold as u16;
    let counts: Vec<usize> = (0..g.n).into_par_iter().map(|u| bfs(&g.adj, u).iter().filter(|&&x| x >= t).count()).collect();
    let count = counts.into_iter().min().unwrap_or(0);
    Ok(SpreadReport { threshold, count, holds: 2 * count >= g.n })
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && !x.is_nan() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be positive, got {x}")))
    }
}

/// `n^{c_q / (γ D ln d)}`: the least dimension of a normed space into which
/// an expander with gap `γ` embeds with average distortion `D`, given the
/// calibrated constant `c_q` (natural logarithms).
pub fn dimension_lower_bound(n: f64, d: f64, gamma: f64, dd: f64, q: f64, c_q: f64) -> Result<f64> {
    positive("n", n)?;
    positive("gamma", gamma)?;
    positive("D", dd)?;
    if !(d >= 2.0) {
        return Err(Error::InvalidInput(format!("degree must be at least 2, got {d}")));
    }
    if !(q >= 1.0) {
        return Err(Error::BadExponentRange(format!("q must be at least 1, got {q}")));
    }
    if !(c_q >= 0.0 && c_q.is_finite()) {
        return Err(Error::InvalidInput(format!("c_q must be a nonnegative real, got {c_q}")));
    }
    if c_q == 0.0 || dd.is_infinite() || gamma.is_infinite() {
        return Ok(1.0);
    }
    Ok((c_q * n.ln() / (gamma * dd * d.ln())).exp())
}

/// `log_d(n) / γ^{1/q}`: the average-distortion lower bound with implicit
/// constant 1 (`q = ∞` allowed).
pub fn avg_distortion_lower_bound(n: f64, d: f64, gamma: f64, q: f64) -> Result<f64> {
    positive("n", n)?;
    positive("gamma", gamma)?;
    if !(d >= 2.0) {
        return Err(Error::InvalidInput(format!("degree must be at least 2, got {d}")));
    }
    if !(q >= 1.0) {
        return Err(Error::BadExponentRange(format!("q must be at least 1, got {q}")));
    }
    Ok(n.ln() / d.ln() / gamma.powf(1.0 / q))
}

/// Report of [`coarse_obstruction`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseReport {
    /// `(2γ)^{1/p} Ω₁`: the largest value the lower modulus may take at `scale`.
    pub max_modulus: f64,
    /// `⌊log_d(n/2)⌋`.
    pub scale: u32,
}

/// The coarse-embedding obstruction: an equi-coarse family with upper
/// modulus `Ω₁` at scale 1 must have lower modulus `ω(scale) ≤ (2γ)^{1/p} Ω₁`.
pub fn coarse_obstruction(gamma: f64, omega1: f64, p: f64, n: usize, d: usize) -> Result<CoarseReport> {
    positive("gamma", gamma)?;
    if !(omega1 >= 0.0 && omega1.is_finite()) {
        return Err(Error::InvalidInput(format!("Omega_1 must be a nonnegative real, got {omega1}")));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::BadExponentRange(format!("p must be finite and at least 1, got {p}")));
    }
    if d < 2 || n == 0 {
        return Err(Error::InvalidInput(format!("need d >= 2 and n >= 1, got n = {n}, d = {d}")));
    }
    Ok(CoarseReport { max_modulus: (2.0 * gamma).powf(1.0 / p) * omega1, scale: spread_threshold(n, d) })
}

/// Report of [`lp_gap_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpGapReport {
    pub heuristic_gamma: GapEstimate,
    /// `p² / (1 − λ₂)` (implicit constant 1).
    #[serde(with = "ext_f64")]
    pub bound: f64,
    /// `heuristic / bound`, absent when both are infinite.
    #[serde(with = "ext_f64::option")]
    pub ratio: Option<f64>,
    pub status: Implication,
}

/// Compare a lower estimate of `γ(A, ‖·‖²_{ℓ_p^dim})` with `p²/(1 − λ₂)`.
///
/// For `p = 2` the gap is computed exactly. The comparison constant is not
/// known, so `status` only records whether the ratio is at most 1.
pub fn lp_gap_check(chain: &StochasticChain, p: f64, dim: usize, seed: u64, opts: &HeuristicOptions) -> Result<LpGapReport> {
    chain.require_reversible()?;
    if !(p >= 2.0 && p.is_finite()) {
        return Err(Error::BadExponentRange(format!("p must be finite and at least 2, got {p}")));
    }
    let spec = spectral_data(chain)?;
    let heuristic_gamma = if p == 2.0 {
        gamma_hilbert_exact(chain)?
    } else {
        gamma_heuristic_with(chain, &MetricSpace::lp(p, dim)?, 2.0, seed, opts)?
    };
    let bound = if spec.lambda2 >= 1.0 - crate::markov::ZERO_GAP { f64::INFINITY } else { p * p / (1.0 - spec.lambda2) };
    let (ratio, status) = match (heuristic_gamma.value.is_infinite(), bound.is_infinite()) {
        (true, true) => (None, Implication::Vacuous),
        (_, true) => (Some(0.0), Implication::Holds),
        (true, false) => (Some(f64::INFINITY), Implication::Violated),
        _ => {
            let r = heuristic_gamma.value / bound;
            (Some(r), if r <= 1.0 { Implication::Holds } else { Implication::Violated })
        }
    };
    Ok(LpGapReport { heuristic_gamma, bound, ratio, status })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k4_is_the_only_cubic_graph_on_four_vertices() {
        let g = random_regular_graph(4, 3, 9).unwrap();
        assert_eq!(g, RegularGraph::complete(4).unwrap());
    }

    #[test]
    fn parity_and_domain() {
        assert_eq!(random_regular_graph(5, 3, 0), Err(Error::ParityViolation { n: 5, d: 3 }));
        assert!(random_regular_graph(3, 3, 0).is_err());
        assert!(random_regular_graph(10, 2, 0).is_err());
    }

    #[test]
    fn cubic_graphs_are_simple_regular_connected() {
        for seed in 0..20 {
            let g = random_regular_graph(8, 3, seed).unwrap();
            assert!(g.adjacency().iter().all(|a| a.len() == 3));
            assert!(g.is_connected());
            assert_eq!(g, random_regular_graph(8, 3, seed).unwrap());
        }
    }

    #[test]
    fn k4_walk_spectrum() {
        let s = spectral_data(&graph_chain(&RegularGraph::complete(4).unwrap()).unwrap()).unwrap();
        assert!((s.lambda2 + 1.0 / 3.0).abs() < 1e-12);
        assert!((s.gamma_classical - 0.75).abs() < 1e-12);
    }

    #[test]
    fn disconnected_walk_has_unit_lambda2() {
        let g = RegularGraph::from_edges(6, &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)]).unwrap();
        assert!(!g.is_connected());
        let s = spectral_data(&graph_chain(&g).unwrap()).unwrap();
        assert!((s.lambda2 - 1.0).abs() < 1e-12);
        assert_eq!(distance_spread_check(&g), Err(Error::Disconnected));
    }

    #[test]
    fn spread_examples() {
        let c4 = distance_spread_check(&RegularGraph::cycle(4).unwrap()).unwrap();
        assert_eq!(c4, SpreadReport { threshold: 1, count: 3, holds: true });
        let k4 = distance_spread_check(&RegularGraph::complete(4).unwrap()).unwrap();
        assert_eq!((k4.threshold, k4.holds), (0, true));
    }

    #[test]
    fn bound_formulas() {
        assert!((dimension_lower_bound(1024.0, 4.0, 1.0, 1.0, 2.0, 1.0).unwrap() - 5f64.exp()).abs() < 1e-9);
        assert_eq!(dimension_lower_bound(1024.0, 4.0, 1.0, f64::INFINITY, 2.0, 1.0).unwrap(), 1.0);
        assert_eq!(dimension_lower_bound(1024.0, 4.0, 1.0, 1.0, 2.0, 0.0).unwrap(), 1.0);
        assert!((avg_distortion_lower_bound(1024.0, 4.0, 2.0, 2.0).unwrap() - 5.0 / 2f64.sqrt()).abs() < 1e-12);
        assert!((avg_distortion_lower_bound(3.0, 3.0, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(avg_distortion_lower_bound(16.0, 2.0, 5.0, f64::INFINITY).unwrap(), 4.0);
        assert_eq!(coarse_obstruction(2.0, 1.0, 2.0, 64, 3).unwrap().max_modulus, 2.0);
        assert_eq!(coarse_obstruction(0.5, 1.0, 1.0, 64, 3).unwrap().max_modulus, 1.0);
        assert_eq!(coarse_obstruction(0.5, 0.0, 1.0, 64, 3).unwrap().max_modulus, 0.0);
    }

    #[test]
    fn edge_list_round_trip() {
        let g = RegularGraph::hypercube(3).unwrap();
        assert_eq!(parse_graph(&g.to_edge_list()).unwrap(), g);
        let json = serde_json::to_string(&g).unwrap();
        assert_eq!(parse_graph(&json).unwrap(), g);
    }

    #[test]
    fn lp_gap_hilbert_case() {
        let c = graph_chain(&RegularGraph::complete(4).unwrap()).unwrap();
        let r = lp_gap_check(&c, 2.0, 3, 0, &HeuristicOptions::default()).unwrap();
        assert!((r.heuristic_gamma.value - 0.75).abs() < 1e-12);
        assert_eq!(r.status, Implication::Holds);
    }
}

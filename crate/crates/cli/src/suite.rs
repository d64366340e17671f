//! Verification batteries.
//!
//! `acceptance` runs every criterion at full scale; `smoke` runs the same
//! checks on reduced families. Instances within a criterion run
//! concurrently, but results are collected in index order so reports are
//! byte-identical for a given seed. Reports contain no timings.

use crate::commands::{mazur_battery, verify_embedding, DualityVerdict, MazurSummary};
use crate::report::{result, Provenance, Values};
use crate::sampling::{self, cube_vertices};
use crate::{CliError, Outcome};
use clap::{Args, ValueEnum};
use nsgap::embed::{average_embed_hilbert, evaluate_average_distortion, GramEmbedding};
use nsgap::expander::{
    avg_distortion_lower_bound, coarse_obstruction, dimension_lower_bound, distance_spread_check, random_regular_graph, RegularGraph,
};
use nsgap::john::{hilbert_distance, mvee_detailed, MVEE_MAX_ITER, MVEE_TOL};
use nsgap::linalg::Matrix;
use nsgap::markov::{build_reversible_chain, lazy_power, meanzero_opnorm_bound_check, random_chain_with_pi, random_reversible_chain, spectral_data};
use nsgap::mazur::geometric_scales;
use nsgap::num::rng_stream;
use nsgap::rayleigh::{abs_gap_sandwich_check, gamma_bruteforce, gamma_heuristic_with, rayleigh_calculus_check, HeuristicOptions};
use nsgap::spaces::MetricSpace;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteName {
    Acceptance,
    Smoke,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SuiteArgs {
    #[arg(long, value_enum, default_value_t = SuiteName::Acceptance)]
    pub name: SuiteName,
}

/// Family sizes of one battery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Scale {
    pub hilbert_chains: usize,
    pub sandwich_instances: usize,
    pub calculus_instances: usize,
    pub mazur_inputs: usize,
    pub max_cube_dim: usize,
    pub shadow_dims: &'static [usize],
    pub meanzero_chains: usize,
    pub graph_sizes: &'static [usize],
    pub graph_seeds: usize,
}

impl Scale {
    pub const ACCEPTANCE: Scale = Scale {
        hilbert_chains: 100,
        sandwich_instances: 50,
        calculus_instances: 10_000,
        mazur_inputs: 1000,
        max_cube_dim: 6,
        shadow_dims: &[2, 4, 8, 16],
        meanzero_chains: 100,
        graph_sizes: &[16, 32, 64, 128],
        graph_seeds: 100,
    };

    pub const SMOKE: Scale = Scale {
        hilbert_chains: 10,
        sandwich_instances: 10,
        calculus_instances: 500,
        mazur_inputs: 100,
        max_cube_dim: 4,
        shadow_dims: &[2, 4],
        meanzero_chains: 10,
        graph_sizes: &[16, 32],
        graph_seeds: 10,
    };

    pub fn of(name: SuiteName) -> Scale {
        match name {
            SuiteName::Acceptance => Scale::ACCEPTANCE,
            SuiteName::Smoke => Scale::SMOKE,
        }
    }
}

/// Verdict of one criterion.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub values: Values,
    pub detail: Value,
}

impl CriterionResult {
    fn new(id: u32, name: &str, passed: bool, values: Values, detail: Value) -> Self {
        CriterionResult { id, name: name.into(), passed, values, detail }
    }
}

/// Independent seed for criterion `id`.
fn sub_seed(seed: u64, id: u32) -> u64 {
    rng_stream(seed, 1_000_000 + u64::from(id)).random()
}

fn max_of(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(f64::INFINITY, f64::min)
}

/// Criterion 1: the heuristic on `ℓ₂^n` with `p = 2` reproduces
/// `1/(1−λ₂)` within `[−1e-6, +1e-9]` on random reversible chains.
pub fn criterion_1(scale: &Scale, seed: u64) -> Result<CriterionResult, CliError> {
    let opts = HeuristicOptions { restarts: 8, spectral_start: false, ..HeuristicOptions::default() };
    let rows = (0..scale.hilbert_chains)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_stream(seed, k as u64);
            let n = rng.random_range(2..=8);
            let chain = random_reversible_chain(n, 0.5, &mut rng)?;
            let exact = spectral_data(&chain)?.gamma_classical;
            let space = MetricSpace::lp(2.0, n)?;
            let h = gamma_heuristic_with(&chain, &space, 2.0, rng.random(), &opts)?.value;
            Ok((n, exact, h - exact))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let below = min_of(rows.iter().map(|r| r.2));
    let above = max_of(rows.iter().map(|r| r.2));
    let failures = rows.iter().filter(|r| !(r.2 >= -1e-6 && r.2 <= 1e-9)).count();
    let values = Values::new()
        .with("min_deviation", below, Provenance::Heuristic)
        .with("max_deviation", above, Provenance::Heuristic)
        .with("failures", failures as f64, Provenance::Exact);
    let detail = json!({ "chains": rows.len(), "band": [-1e-6, 1e-9], "restarts": opts.restarts, "spectral_start": false });
    Ok(CriterionResult::new(1, "hilbert gap identity", failures == 0, values, detail))
}

/// Criterion 2: `γ(flip, two-point, p) = 1/2` exactly for `p ∈ {1,2,3}`,
/// and the absolute-gap sandwich on a brute-forced battery.
pub fn criterion_2(scale: &Scale, seed: u64) -> Result<CriterionResult, CliError> {
    let flip = build_reversible_chain(&Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]])?, None)?;
    let two = MetricSpace::finite(Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]])?)?;
    let mut flip_values = Vec::new();
    for p in [1.0, 2.0, 3.0] {
        flip_values.push(gamma_bruteforce(&flip, &two, p)?.value);
    }
    let flip_ok = flip_values.iter().all(|&v| v == 0.5);
    let rows = (0..scale.sandwich_instances)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_stream(seed, k as u64);
            let n = rng.random_range(2..=4);
            let m = rng.random_range(2..=4);
            let q = if k % 2 == 0 { 1.0 } else { 2.0 };
            let chain = random_reversible_chain(n, 0.6, &mut rng)?;
            let space = MetricSpace::finite(sampling::finite_metric(m, &mut rng))?;
            Ok(abs_gap_sandwich_check(&chain, &space, q)?)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let failures = rows.iter().filter(|r| !(r.lower_ok && r.upper_ok)).count();
    let values = Values::new()
        .with("flip_gamma_p1", flip_values[0], Provenance::BruteForce)
        .with("flip_gamma_p2", flip_values[1], Provenance::BruteForce)
        .with("flip_gamma_p3", flip_values[2], Provenance::BruteForce)
        .with("sandwich_failures", failures as f64, Provenance::Exact);
    let detail = json!({ "instances": rows.len(), "flip_exact": flip_ok });
    Ok(CriterionResult::new(2, "brute-force oracle agreement", flip_ok && failures == 0, values, detail))
}

/// Criterion 3: mixture and dilution identities to `1e-12`, product and
/// power inequalities with slack `≥ −1e-12`, on random instances over
/// finite metrics and `ℓ_r` spaces.
pub fn criterion_3(scale: &Scale, seed: u64) -> Result<CriterionResult, CliError> {
    let rows = (0..scale.calculus_instances)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_stream(seed, k as u64);
            let n = rng.random_range(2..=6);
            let a = random_reversible_chain(n, 0.6, &mut rng)?;
            let b = random_chain_with_pi(a.pi(), 0.6, &mut rng)?;
            let space = if k % 2 == 0 {
                MetricSpace::finite(sampling::finite_metric(rng.random_range(2..=5), &mut rng))?
            } else {
                let r = [1.0, 1.5, 2.0, 3.0, f64::INFINITY][rng.random_range(0..5)];
                MetricSpace::lp(r, rng.random_range(1..=3))?
            };
            let x = sampling::configuration(&space, n, &mut rng).expect("spaces have at least two points");
            let p = rng.random_range(1.0..3.0);
            let lambda = rng.random_range(0.0..=1.0);
            let t = rng.random_range(1..=4);
            Ok(rayleigh_calculus_check(&space, &x, &a, &b, lambda, t, p)?)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let failures = rows.iter().filter(|r| !r.all_ok()).count();
    let values = Values::new()
        .with("max_affinity_error", max_of(rows.iter().map(|r| r.affinity_error)), Provenance::Exact)
        .with("max_dilution_error", max_of(rows.iter().map(|r| r.dilution_error)), Provenance::Exact)
        .with("min_product_slack", min_of(rows.iter().map(|r| r.product_slack)), Provenance::Exact)
        .with("min_power_slack", min_of(rows.iter().map(|r| r.power_slack)), Provenance::Exact)
        .with("failures", failures as f64, Provenance::Exact);
    Ok(CriterionResult::new(3, "rayleigh calculus", failures == 0, values, json!({ "instances": rows.len() })))
}

/// Criterion 4: Mazur round trip and norm transfer on random inputs, and
/// Hölder fits for `(p, q) ∈ {(1,2), (1.5,3), (2,4)}`.
pub fn criterion_4(scale: &Scale, seed: u64) -> Result<CriterionResult, CliError> {
    let space = MetricSpace::lp(3.0, 4)?;
    let scales = geometric_scales(20, 0.5);
    let pairs = [(1.0, 2.0), (1.5, 3.0), (2.0, 4.0)];
    let runs: Vec<MazurSummary> = pairs
        .iter()
        .enumerate()
        .map(|(i, &(p, q))| mazur_battery(&space, p, q, scale.mazur_inputs, &scales, seed.wrapping_add(i as u64)))
        .collect::<Result<_, _>>()?;
    let mut values = Values::new()
        .with("max_roundtrip_error", max_of(runs.iter().map(|r| r.max_roundtrip_error)), Provenance::Exact)
        .with("max_norm_transfer_error", max_of(runs.iter().map(|r| r.max_norm_transfer_error)), Provenance::Exact);
    for (&(p, q), r) in pairs.iter().zip(&runs) {
        if let Some(e) = r.sign_flip.fitted_exponent {
            values.insert(&format!("exponent_p{p}_q{q}"), e, Provenance::Fitted);
        }
    }
    let passed = runs.iter().all(MazurSummary::passed);
    let detail: Vec<Value> = pairs
        .iter()
        .zip(&runs)
        .map(|(&(p, q), r)| {
            json!({
                "p": p, "q": q, "inputs": r.trials, "roundtrip_failures": r.roundtrip_failures,
                "target_exponent": r.sign_flip.target_exponent,
                "sign_flip_exponent": r.sign_flip.fitted_exponent, "random_pair_exponent": r.random_pair.fitted_exponent,
                "slopes_ok": r.sign_flip.slope_ok && r.random_pair.slope_ok,
            })
        })
        .collect();
    Ok(CriterionResult::new(4, "mazur maps", passed, values, json!(detail)))
}

/// Criterion 5: John ellipsoids of cubes: `D_X = √d`, containment, the norm
/// sandwich on random directions, and the iteration cap.
pub fn criterion_5(scale: &Scale, seed: u64) -> Result<CriterionResult, CliError> {
    let mut values = Values::new();
    let mut detail = Vec::new();
    let mut passed = true;
    for d in 2..=scale.max_cube_dim {
        let vertices = cube_vertices(d);
        let m = mvee_detailed(&vertices, MVEE_TOL)?;
        let containment = max_of(vertices.iter().map(|v| m.ellipsoid.norm(v)));
        let hd = hilbert_distance(&MetricSpace::polytope(vertices)?)?;
        let mut rng = rng_stream(seed, d as u64);
        let x = MetricSpace::lp(f64::INFINITY, d)?;
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let y: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let nx = x.norm(&y)?;
            let nh = hd.h.norm(&y);
            worst = worst.max((nh - nx) / nx).max((nx - hd.d_x * nh) / nx);
        }
        let dx_error = (hd.d_x - (d as f64).sqrt()).abs();
        let ok = dx_error <= 1e-3 && containment <= 1.0 + 1e-6 && worst <= 1e-9 && m.iterations < MVEE_MAX_ITER;
        passed &= ok;
        values.insert(&format!("D_X_d{d}"), hd.d_x, if hd.exact { Provenance::Exact } else { Provenance::Heuristic });
        detail.push(json!({
            "d": d, "D_X": hd.d_x, "sqrt_d": (d as f64).sqrt(), "iterations": m.iterations,
            "max_containment": containment, "worst_sandwich_violation": worst, "ok": ok,
        }));
    }
    Ok(CriterionResult::new(5, "john ellipsoid of cubes", passed, values, json!(detail)))
}

/// A criterion-6 instance: cube corners (or a sampled face), its ℓ∞ metric,
/// the embedding, and the dimension `k` of the cube graph the points induce.
#[derive(Debug, Clone)]
pub struct ShadowInstance {
    pub d: usize,
    pub k: usize,
    pub points: Matrix,
    pub dist: Matrix,
    pub embedding: GramEmbedding,
}

/// Corners of `{±1}^d`, or for `2^d > 32` the corners of a random 5-face
/// (five free coordinates, the rest fixed at random signs). Points are
/// ordered by the bit pattern of their free coordinates, so consecutive
/// Hamming-1 indices are cube-graph neighbours.
fn shadow_points(d: usize, seed: u64) -> (usize, Matrix) {
    if d <= 5 {
        return (d, Matrix::from_rows(&cube_vertices(d)).expect("rectangular"));
    }
    let mut rng = rng_stream(seed, d as u64);
    let mut coords: Vec<usize> = (0..d).collect();
    coords.shuffle(&mut rng);
    let free = &coords[..5];
    let base: Vec<f64> = (0..d).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    let rows: Vec<Vec<f64>> = (0..32usize)
        .map(|m| {
            let mut v = base.clone();
            for (b, &c) in free.iter().enumerate() {
                v[c] = if m >> b & 1 == 1 { 1.0 } else { -1.0 };
            }
            v
        })
        .collect();
    (5, Matrix::from_rows(&rows).expect("rectangular"))
}

/// Criterion 6: average-distortion embeddings of cube corners under ℓ∞
/// with `θ = 1/2`; `D(d)/√ln(d+1)` stays within a factor 10 of its `d = 2`
/// value and every Lipschitz constraint holds to `1e-6`.
pub fn criterion_6(scale: &Scale, seed: u64) -> Result<(CriterionResult, Vec<ShadowInstance>), CliError> {
    let theta = 0.5;
    let space = |d| MetricSpace::lp(f64::INFINITY, d);
    let instances = scale
        .shadow_dims
        .par_iter()
        .map(|&d| {
            let (k, points) = shadow_points(d, seed);
            let dist = space(d)?.pairwise(&nsgap::spaces::Configuration::Vectors(points.clone()))?;
            let n = points.rows();
            let embedding = average_embed_hilbert(&dist, &vec![1.0 / n as f64; n], theta)?;
            Ok(ShadowInstance { d, k, points, dist, embedding })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let normalized: Vec<f64> = instances.iter().map(|s| s.embedding.d_achieved / ((s.d as f64 + 1.0).ln()).sqrt()).collect();
    let reference = normalized[0];
    let mut values = Values::new();
    let mut detail = Vec::new();
    let mut passed = true;
    for (s, &r) in instances.iter().zip(&normalized) {
        let e = &s.embedding;
        let n = s.points.rows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let emb = e.factor.row(i).iter().zip(e.factor.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                worst = worst.max(emb - e.lip * s.dist[(i, j)].powf(theta));
            }
        }
        let check = evaluate_average_distortion(&e.factor, &s.dist, &e.mu, 2.0, theta)?;
        let recomputed = (check.d - e.d_achieved).abs() <= 1e-6 * e.d_achieved.max(1.0);
        let band = r / reference;
        let ok = (0.1..=10.0).contains(&band) && worst <= 1e-6 && recomputed;
        passed &= ok;
        values.insert(&format!("D_achieved_d{}", s.d), e.d_achieved, Provenance::Heuristic);
        values.insert(&format!("D_lower_bound_d{}", s.d), e.d_lower_bound, Provenance::Exact);
        detail.push(json!({
            "d": s.d, "points": n, "D_achieved": e.d_achieved, "D_lower_bound": e.d_lower_bound,
            "normalized": r, "band_ratio": band, "worst_lipschitz_excess": worst,
            "recomputed_distortion": check.d, "converged": e.converged, "ok": ok,
        }));
    }
    let result = CriterionResult::new(6, "average john shadow", passed, values, json!(detail));
    Ok((result, instances))
}

/// Criterion 7: forward duality against the lazy walk on the induced cube
/// graph, the assembled witness on `[embedding, coordinates]`, and its
/// half-scaled negative control.
pub fn criterion_7(instances: &[ShadowInstance]) -> Result<CriterionResult, CliError> {
    let verdicts = instances
        .par_iter()
        .map(|s| {
            let chain = lazy_power(&nsgap::expander::graph_chain(&RegularGraph::hypercube(s.k)?)?, 1)?;
            verify_embedding(&s.embedding, &chain, &s.dist, &[s.embedding.factor.clone(), s.points.clone()])
        })
        .collect::<Result<Vec<DualityVerdict>, CliError>>()?;
    let passed = verdicts.iter().all(|v| v.passed() && v.forward.slack >= -1e-9);
    let values = Values::new()
        .with("min_forward_slack", min_of(verdicts.iter().map(|v| v.forward.slack)), Provenance::Exact)
        .with("negative_controls_rejected", verdicts.iter().filter(|v| !v.negative_control.average_ok).count() as f64, Provenance::Exact);
    let detail: Vec<Value> = instances
        .iter()
        .zip(&verdicts)
        .map(|(s, v)| json!({ "d": s.d, "k": s.k, "verdict": v, "passed": v.passed() }))
        .collect();
    Ok(CriterionResult::new(7, "duality witness", passed, values, json!(detail)))
}

/// Criterion 8: the mean-zero operator-norm bound with exact spectra.
pub fn criterion_8(scale: &Scale, seed: u64) -> Result<CriterionResult, CliError> {
    let rows = (0..scale.meanzero_chains)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_stream(seed, k as u64);
            let n = rng.random_range(2..=8);
            let chain = random_reversible_chain(n, 0.5, &mut rng)?;
            Ok(meanzero_opnorm_bound_check(&chain, 2.0, 1.0)?)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let failures = rows.iter().filter(|r| !r.holds).count();
    let values = Values::new()
        .with("min_slack", min_of(rows.iter().map(|r| r.rhs - r.lhs)), Provenance::Exact)
        .with("failures", failures as f64, Provenance::Exact);
    Ok(CriterionResult::new(8, "mean-zero operator norm bound", failures == 0, values, json!({ "chains": rows.len() })))
}

fn bfs_connected(adj: &[Vec<usize>]) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == adj.len()
}

fn is_simple_regular(adj: &[Vec<usize>], d: usize) -> bool {
    adj.iter().enumerate().all(|(u, nb)| {
        let mut s = nb.clone();
        s.sort_unstable();
        s.dedup();
        nb.len() == d && s.len() == d && !nb.contains(&u) && nb.iter().all(|&v| adj[v].contains(&u))
    })
}

/// Criterion 9: random cubic graphs are simple, 3-regular and connected,
/// the distance spread holds, and the bound calculators reproduce the
/// worked values to `1e-3` relative.
pub fn criterion_9(scale: &Scale, seed: u64) -> Result<CriterionResult, CliError> {
    let jobs: Vec<(usize, u64)> = scale.graph_sizes.iter().flat_map(|&n| (0..scale.graph_seeds as u64).map(move |s| (n, s))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(n, s)| {
            let g = random_regular_graph(n, 3, seed.wrapping_add(s))?;
            let structural = g.n() == n && is_simple_regular(g.adjacency(), 3) && bfs_connected(g.adjacency());
            let spread = distance_spread_check(&g)?;
            Ok((structural, spread.holds))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let structural_failures = rows.iter().filter(|r| !r.0).count();
    let spread_failures = rows.iter().filter(|r| !r.1).count();
    let formulas = [
        ("dimension_bound", dimension_lower_bound(1024.0, 4.0, 1.0, 1.0, 2.0, 1.0)?, 148.41),
        ("avg_distortion_bound", avg_distortion_lower_bound(1024.0, 4.0, 2.0, 2.0)?, 3.5355),
        ("coarse_modulus", coarse_obstruction(2.0, 1.0, 2.0, 1024, 4)?.max_modulus, 2.0),
    ];
    let formulas_ok = formulas.iter().all(|(_, v, w)| ((v - w) / w).abs() <= 1e-3);
    let mut values = Values::new()
        .with("structural_failures", structural_failures as f64, Provenance::Exact)
        .with("spread_failures", spread_failures as f64, Provenance::Exact);
    for (name, v, _) in &formulas {
        values.insert(name, *v, Provenance::Exact);
    }
    let detail = json!({
        "graphs": rows.len(), "sizes": scale.graph_sizes, "seeds_per_size": scale.graph_seeds,
        "formulas": formulas.iter().map(|(n, v, w)| json!({ "name": n, "value": v, "expected": w })).collect::<Vec<_>>(),
    });
    let passed = structural_failures == 0 && spread_failures == 0 && formulas_ok;
    Ok(CriterionResult::new(9, "expander pipeline", passed, values, detail))
}

/// Run criteria 1–9 in order.
pub fn run_criteria(scale: &Scale, seed: u64) -> Result<Vec<CriterionResult>, CliError> {
    let (c6, shadows) = criterion_6(scale, sub_seed(seed, 6))?;
    Ok(vec![
        criterion_1(scale, sub_seed(seed, 1))?,
        criterion_2(scale, sub_seed(seed, 2))?,
        criterion_3(scale, sub_seed(seed, 3))?,
        criterion_4(scale, sub_seed(seed, 4))?,
        criterion_5(scale, sub_seed(seed, 5))?,
        c6,
        criterion_7(&shadows)?,
        criterion_8(scale, sub_seed(seed, 8))?,
        criterion_9(scale, sub_seed(seed, 9))?,
    ])
}

/// Per-criterion seeds as used by [`run_criteria`].
pub fn criterion_seed(seed: u64, id: u32) -> u64 {
    sub_seed(seed, id)
}

pub fn run_suite(a: &SuiteArgs, seed: u64) -> Result<Outcome, CliError> {
    let scale = Scale::of(a.name);
    let criteria = run_criteria(&scale, seed)?;
    let passed = criteria.iter().all(|c| c.passed);
    let mut values = Values::new();
    for c in &criteria {
        values.insert(&format!("criterion_{}", c.id), f64::from(u8::from(c.passed)), Provenance::Exact);
    }
    let detail = json!({ "scale": scale, "criteria": criteria });
    Ok(Outcome { passed, ..Outcome::ok(serde_json::to_value(a).expect("serializable"), result(values, detail)) })
}

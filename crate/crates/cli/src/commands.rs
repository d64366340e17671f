//! Subcommand handlers: argument records and their mapping onto the library.

use crate::input::{load_chain, load_graph, load_metric, load_mu, load_space};
use crate::report::{result, table_csv, Provenance, Values};
use crate::sampling;
use crate::{CliError, Outcome};
use clap::{Args, Subcommand, ValueEnum};
use nsgap::embed::*;
use nsgap::expander::*;
use nsgap::john::{hilbert_distance, mvee_detailed, MVEE_TOL};
use nsgap::linalg::Matrix;
use nsgap::markov::*;
use nsgap::mazur::*;
use nsgap::num::rng_stream;
use nsgap::rayleigh::*;
use nsgap::spaces::{MetricSpace, SpaceKind};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::path::PathBuf;

fn config(args: &impl Serialize) -> Value {
    serde_json::to_value(args).expect("argument records are serializable")
}

fn heuristic_options(restarts: usize, max_iter: usize, no_spectral_start: bool) -> HeuristicOptions {
    HeuristicOptions { restarts, max_iter, spectral_start: !no_spectral_start }
}

/// Largest chain for which spectra are reported alongside graph output.
const MAX_SPECTRAL_STATES: usize = 4096;

// ---- gap / gap-plus ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapMethod {
    /// Brute force for finite spaces, exact for Hilbert squares, heuristic otherwise.
    Auto,
    Exact,
    BruteForce,
    Heuristic,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GapArgs {
    /// Chain: file, inline JSON, or built-in (e.g. `cycle:5`, `lazy-hypercube:3`).
    #[arg(long)]
    pub chain: String,
    /// Space: file, inline JSON, or built-in (e.g. `lp:inf:4`, `two-point`, `cycle:4`).
    #[arg(long)]
    pub space: String,
    /// Exponent of the metric power.
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, value_enum, default_value_t = GapMethod::Auto)]
    pub method: GapMethod,
    /// Heuristic restarts.
    #[arg(long, default_value_t = 32)]
    pub restarts: usize,
    /// Heuristic iterations per restart.
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    /// Start all heuristic restarts from random configurations.
    #[arg(long)]
    pub no_spectral_start: bool,
}

pub fn gap(a: &GapArgs, seed: u64) -> Result<Outcome, CliError> {
    let chain = load_chain(&a.chain)?;
    let space = load_space(&a.space)?;
    let opts = heuristic_options(a.restarts, a.max_iter, a.no_spectral_start);
    let g = match a.method {
        GapMethod::Auto => gap_auto(&chain, &space, a.p, seed, &opts)?,
        GapMethod::Exact => {
            if !(space.is_hilbert() && a.p * space.theta() == 2.0) {
                return Err(nsgap::Error::UnsupportedSpace("exact gaps need a Hilbert space with squared distances".into()).into());
            }
            gamma_hilbert_exact(&chain)?
        }
        GapMethod::BruteForce => gamma_bruteforce(&chain, &space, a.p)?,
        GapMethod::Heuristic => gamma_heuristic_with(&chain, &space, a.p, seed, &opts)?,
    };
    let spec = spectral_data(&chain)?;
    let values = Values::new()
        .with("gamma", g.value, g.kind.into())
        .with("gamma_classical", spec.gamma_classical, Provenance::Exact)
        .with("lambda2", spec.lambda2, Provenance::Exact);
    Ok(Outcome::ok(config(a), result(values, &g)))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GapPlusArgs {
    #[arg(long)]
    pub chain: String,
    #[arg(long)]
    pub space: String,
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
}

pub fn gap_plus(a: &GapPlusArgs) -> Result<Outcome, CliError> {
    let chain = load_chain(&a.chain)?;
    let space = load_space(&a.space)?;
    let g = match space.kind() {
        SpaceKind::Finite { .. } => gamma_plus_bruteforce(&chain, &space, a.q)?,
        _ if space.is_hilbert() && a.q * space.theta() == 2.0 => gamma_plus_hilbert_exact(&chain)?,
        _ => {
            return Err(nsgap::Error::UnsupportedSpace(
                "absolute gaps are computed for finite spaces (enumeration) or Hilbert squares (exact)".into(),
            )
            .into())
        }
    };
    let values = Values::new().with("gamma_plus", g.value, g.kind.into());
    Ok(Outcome::ok(config(a), result(values, &g)))
}

// ---- rayleigh-check ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RayleighMode {
    /// Mixture, dilution, product and power rules.
    Calculus,
    /// Markov type 2 ratio in Hilbert space.
    MarkovType,
    /// 2γ ≤ γ₊(lazy) ≤ 2^{2q+1}γ by enumeration.
    Sandwich,
    /// Pointwise transfer from the John norm to X.
    Pointwise,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RayleighCheckArgs {
    #[arg(long, value_enum, default_value_t = RayleighMode::Calculus)]
    pub mode: RayleighMode,
    #[arg(long)]
    pub chain: String,
    /// Second chain for the calculus rules (default: random chain with the same π).
    #[arg(long)]
    pub chain_b: Option<String>,
    #[arg(long)]
    pub space: String,
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    /// Power for the power rule / Markov type.
    #[arg(long, default_value_t = 3)]
    pub t: u32,
    /// Mixture weight (default: random per trial).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Pointwise-estimate η (default: 1/(2·D_X)).
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
struct CalculusSummary {
    trials: usize,
    affinity_failures: usize,
    dilution_failures: usize,
    product_failures: usize,
    power_failures: usize,
    max_affinity_error: f64,
    max_dilution_error: f64,
    min_product_slack: f64,
    min_power_slack: f64,
}

pub fn rayleigh_check(a: &RayleighCheckArgs, seed: u64) -> Result<Outcome, CliError> {
    let chain = load_chain(&a.chain)?;
    let space = load_space(&a.space)?;
    let n = chain.n();
    match a.mode {
        RayleighMode::Calculus => {
            let b = match &a.chain_b {
                Some(s) => load_chain(s)?,
                None => random_chain_with_pi(chain.pi(), 0.7, &mut rng_stream(seed, u64::MAX))?,
            };
            let reports: Vec<CalculusReport> = (0..a.trials)
                .into_par_iter()
                .map(|k| {
                    let mut rng = rng_stream(seed, k as u64);
                    let x = sampling::configuration(&space, n, &mut rng)
                        .ok_or_else(|| CliError::Config("the space needs at least two points".into()))?;
                    let lambda = a.lambda.unwrap_or_else(|| rng.random_range(0.0..=1.0));
                    Ok(rayleigh_calculus_check(&space, &x, &chain, &b, lambda, a.t, a.p)?)
                })
                .collect::<Result<_, CliError>>()?;
            let mut s = CalculusSummary { trials: reports.len(), min_product_slack: f64::INFINITY, min_power_slack: f64::INFINITY, ..Default::default() };
            for r in &reports {
                s.affinity_failures += usize::from(!r.affinity_ok);
                s.dilution_failures += usize::from(!r.dilution_ok);
                s.product_failures += usize::from(!r.product_ok);
                s.power_failures += usize::from(!r.power_ok);
                s.max_affinity_error = s.max_affinity_error.max(r.affinity_error);
                s.max_dilution_error = s.max_dilution_error.max(r.dilution_error);
                s.min_product_slack = s.min_product_slack.min(r.product_slack);
                s.min_power_slack = s.min_power_slack.min(r.power_slack);
            }
            let failures = s.affinity_failures + s.dilution_failures + s.product_failures + s.power_failures;
            let values = Values::new()
                .with("failures", failures as f64, Provenance::Exact)
                .with("max_affinity_error", s.max_affinity_error, Provenance::Exact)
                .with("max_dilution_error", s.max_dilution_error, Provenance::Exact)
                .with("min_product_slack", s.min_product_slack, Provenance::Exact)
                .with("min_power_slack", s.min_power_slack, Provenance::Exact);
            Ok(Outcome { passed: failures == 0, ..Outcome::ok(config(a), result(values, &s)) })
        }
        RayleighMode::MarkovType => {
            let ratios: Vec<MarkovTypeReport> = (0..a.trials)
                .into_par_iter()
                .map(|k| {
                    let mut rng = rng_stream(seed, k as u64);
                    let x = sampling::configuration(&space, n, &mut rng)
                        .ok_or_else(|| CliError::Config("the space needs at least two points".into()))?;
                    Ok(markov_type_ratio(&chain, &space, &x, a.t, a.p)?)
                })
                .collect::<Result<_, CliError>>()?;
            let max_ratio = ratios.iter().map(|r| r.ratio).fold(0.0, f64::max);
            let violations = ratios.iter().filter(|r| r.bound_holds == Some(false)).count();
            let values = Values::new()
                .with("max_ratio", max_ratio, Provenance::Exact)
                .with("violations", violations as f64, Provenance::Exact);
            let detail = json!({ "trials": ratios.len(), "max_ratio": max_ratio, "violations": violations, "bound_asserted": a.p == 2.0 });
            Ok(Outcome { passed: violations == 0, ..Outcome::ok(config(a), result(values, detail)) })
        }
        RayleighMode::Sandwich => {
            let r = abs_gap_sandwich_check(&chain, &space, a.p)?;
            let values = Values::new()
                .with("gamma", r.gamma, Provenance::BruteForce)
                .with("gamma_plus_lazy", r.gamma_plus_lazy, Provenance::BruteForce)
                .with("upper_factor", r.upper_factor, Provenance::Exact);
            let passed = r.lower_ok && r.upper_ok;
            Ok(Outcome { passed, ..Outcome::ok(config(a), result(values, &r)) })
        }
        RayleighMode::Pointwise => {
            let hd = hilbert_distance(&space)?;
            let eta = a.eta.unwrap_or(0.5 / hd.d_x);
            let reports: Vec<PointwiseReport> = (0..a.trials)
                .into_par_iter()
                .map(|k| {
                    let mut rng = rng_stream(seed, k as u64);
                    let x = sampling::configuration(&space, n, &mut rng)
                        .ok_or_else(|| CliError::Config("the space needs at least two points".into()))?;
                    Ok(pointwise_estimate_check(&x, &chain, &space, &hd.h, hd.d_x, eta, seed)?)
                })
                .collect::<Result<_, CliError>>()?;
            let count = |o: Implication| reports.iter().filter(|r| r.outcome == o).count();
            let (holds, vacuous, violated) = (count(Implication::Holds), count(Implication::Vacuous), count(Implication::Violated));
            let dx_prov = if hd.exact { Provenance::Exact } else { Provenance::Heuristic };
            let values = Values::new()
                .with("D_X", hd.d_x, dx_prov)
                .with("eta", eta, Provenance::Exact)
                .with("holds", holds as f64, Provenance::Exact)
                .with("vacuous", vacuous as f64, Provenance::Exact)
                .with("violated", violated as f64, Provenance::Exact);
            let detail = json!({ "trials": reports.len(), "holds": holds, "vacuous": vacuous, "violated": violated });
            Ok(Outcome { passed: violated == 0, ..Outcome::ok(config(a), result(values, detail)) })
        }
    }
}

// ---- mazur-check ----

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MazurCheckArgs {
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    #[arg(long, default_value_t = 2.0)]
    pub q: f64,
    /// Exponent r of the ℓ_r^dim norm on the value space.
    #[arg(long, default_value_t = 2.0)]
    pub norm_p: f64,
    #[arg(long, default_value_t = 4)]
    pub dim: usize,
    /// Random functions for the round-trip check.
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Length of the geometric scale ladder.
    #[arg(long, default_value_t = 20)]
    pub scales: usize,
    #[arg(long, default_value_t = 0.5)]
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MazurSummary {
    pub trials: usize,
    pub roundtrip_failures: usize,
    pub max_roundtrip_error: f64,
    pub max_norm_transfer_error: f64,
    pub sign_flip: HolderReport,
    pub random_pair: HolderReport,
}

/// Round trip on random functions plus Hölder fits on the sign-flip pair
/// (`±u` on one atom, dilated) and a random normalized pair (perturbed).
pub fn mazur_battery(space: &MetricSpace, p: f64, q: f64, trials: usize, scales: &[f64], seed: u64) -> Result<MazurSummary, CliError> {
    let dim = space.dim().ok_or_else(|| CliError::Config("Mazur maps need a normed space".into()))?;
    let reports: Vec<RoundtripReport> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_stream(seed, k as u64);
            let f = sampling::weighted_function(8, dim, &mut rng);
            mazur_roundtrip_check(&f, space, p, q)
        })
        .collect::<nsgap::Result<_>>()?;
    let mut rng = rng_stream(seed, trials as u64);
    let mut u: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nu = space.norm(&u)?;
    u.iter_mut().for_each(|v| *v /= nu);
    let minus: Vec<f64> = u.iter().map(|v| -v).collect();
    let f = WeightedVectorFunction::new(vec![1.0], Matrix::from_rows(&[u])?)?;
    let g = WeightedVectorFunction::new(vec![1.0], Matrix::from_rows(&[minus])?)?;
    let sign_flip = mazur_holder_check(&f, &g, space, p, q, scales, Ladder::Dilate)?;
    let f = sampling::weighted_function(6, dim, &mut rng);
    let g = WeightedVectorFunction::new(f.weights().to_vec(), sampling::uniform_matrix(f.len(), dim, &mut rng))?;
    let scale = f.lp_norm(space, p)?.max(g.lp_norm(space, p)?).max(f64::MIN_POSITIVE);
    let random_pair = mazur_holder_check(&f.combine(1.0 / scale, &g, 0.0)?, &g.combine(1.0 / scale, &f, 0.0)?, space, p, q, scales, Ladder::Perturb)?;
    Ok(MazurSummary {
        trials,
        roundtrip_failures: reports.iter().filter(|r| !r.ok).count(),
        max_roundtrip_error: reports.iter().map(|r| r.max_error).fold(0.0, f64::max),
        max_norm_transfer_error: reports.iter().map(|r| r.norm_transfer_error).fold(0.0, f64::max),
        sign_flip,
        random_pair,
    })
}

impl MazurSummary {
    pub fn passed(&self) -> bool {
        self.roundtrip_failures == 0 && self.sign_flip.slope_ok && self.random_pair.slope_ok
    }
}

pub fn mazur_check(a: &MazurCheckArgs, seed: u64) -> Result<Outcome, CliError> {
    let space = MetricSpace::lp(a.norm_p, a.dim)?;
    let s = mazur_battery(&space, a.p, a.q, a.trials, &geometric_scales(a.scales, a.ratio), seed)?;
    let mut values = Values::new()
        .with("roundtrip_failures", s.roundtrip_failures as f64, Provenance::Exact)
        .with("max_roundtrip_error", s.max_roundtrip_error, Provenance::Exact)
        .with("max_norm_transfer_error", s.max_norm_transfer_error, Provenance::Exact)
        .with("target_exponent", s.sign_flip.target_exponent, Provenance::Exact);
    if let Some(e) = s.sign_flip.fitted_exponent {
        values.insert("sign_flip_exponent", e, Provenance::Fitted);
    }
    if let Some(e) = s.random_pair.fitted_exponent {
        values.insert("random_pair_exponent", e, Provenance::Fitted);
    }
    Ok(Outcome { passed: s.passed(), ..Outcome::ok(config(a), result(values, &s)) })
}

// ---- extrapolate ----

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ExtrapolateArgs {
    #[arg(long)]
    pub chain: String,
    #[arg(long)]
    pub space: String,
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    #[arg(long, default_value_t = 2.0)]
    pub q: f64,
    #[arg(long, default_value_t = 32)]
    pub restarts: usize,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long)]
    pub no_spectral_start: bool,
}

pub fn extrapolate(a: &ExtrapolateArgs, seed: u64) -> Result<Outcome, CliError> {
    let chain = load_chain(&a.chain)?;
    let space = load_space(&a.space)?;
    let r = extrapolation_check(&chain, &space, a.p, a.q, seed, &heuristic_options(a.restarts, a.max_iter, a.no_spectral_start))?;
    let ratio_prov = if is_exact(r.gamma_p.kind) && is_exact(r.gamma_q.kind) { Provenance::Exact } else { Provenance::Heuristic };
    let values = Values::new()
        .with("gamma_p", r.gamma_p.value, r.gamma_p.kind.into())
        .with("gamma_q", r.gamma_q.value, r.gamma_q.kind.into())
        .with("left_ratio", r.left_ratio, ratio_prov)
        .with("right_ratio", r.right_ratio, ratio_prov);
    Ok(Outcome { passed: r.finite_positive, ..Outcome::ok(config(a), result(values, &r)) })
}

// ---- john ----

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct JohnArgs {
    /// Normed space whose D_X is computed.
    #[arg(long, conflicts_with = "points", required_unless_present = "points")]
    pub space: Option<String>,
    /// Point cloud (JSON list of vectors) for a bare minimum-volume ellipsoid.
    #[arg(long)]
    pub points: Option<String>,
    #[arg(long, default_value_t = MVEE_TOL)]
    pub tol: f64,
}

pub fn john(a: &JohnArgs) -> Result<Outcome, CliError> {
    if let Some(pts) = &a.points {
        let text = if pts.trim_start().starts_with('[') { pts.clone() } else { std::fs::read_to_string(pts).map_err(|e| CliError::Io(format!("{pts}: {e}")))? };
        let points: Vec<Vec<f64>> = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{pts}: {e}")))?;
        let m = mvee_detailed(&points, a.tol)?;
        let containment = m.points.iter().map(|v| m.ellipsoid.norm(v).powi(2)).fold(0.0, f64::max);
        let values = Values::new()
            .with("max_containment", containment, Provenance::Exact)
            .with("iterations", m.iterations as f64, Provenance::Exact);
        let detail = json!({ "Q": m.ellipsoid.q(), "iterations": m.iterations, "max_containment": containment });
        return Ok(Outcome::ok(config(a), result(values, detail)));
    }
    let space = load_space(a.space.as_deref().unwrap_or_default())?;
    let hd = hilbert_distance(&space)?;
    let prov = if hd.exact { Provenance::Exact } else { Provenance::Heuristic };
    let values = Values::new().with("D_X", hd.d_x, prov);
    Ok(Outcome { passed: hd.john_bound_ok, ..Outcome::ok(config(a), result(values, &hd)) })
}

// ---- embed / verify-duality ----

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EmbedArgs {
    /// Finite metric: space JSON, distance matrix, graph file, or built-in graph.
    #[arg(long)]
    pub metric: String,
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    /// `uniform` or a JSON probability vector.
    #[arg(long, default_value = "uniform")]
    pub mu: String,
    #[arg(long, default_value_t = EmbedOptions::default().max_iter)]
    pub max_iter: usize,
    /// Target relative duality gap.
    #[arg(long, default_value_t = EmbedOptions::default().tol)]
    pub tol: f64,
}

fn embed_options(max_iter: usize, tol: f64) -> EmbedOptions {
    EmbedOptions { max_iter, tol, ..EmbedOptions::default() }
}

fn embedding_values(e: &GramEmbedding) -> Values {
    Values::new()
        .with("D_achieved", e.d_achieved, Provenance::Heuristic)
        .with("D_lower_bound", e.d_lower_bound, Provenance::Exact)
        .with("lip", e.lip, Provenance::Exact)
        .with("spread", e.spread, Provenance::Exact)
        .with("relative_gap", e.relative_gap, Provenance::Exact)
}

/// `i, j, d_ij, d_ij^θ, ‖f_i − f_j‖` for every pair `i < j`.
pub fn pairwise_csv(e: &GramEmbedding, dist: &Matrix) -> String {
    let n = dist.rows();
    let mut rows = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let emb: f64 = e.factor.row(i).iter().zip(e.factor.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let d = dist.row(i)[j];
            rows.push(vec![i.to_string(), j.to_string(), d.to_string(), d.powf(e.theta).to_string(), emb.to_string()]);
        }
    }
    table_csv(&["i", "j", "distance", "snowflaked", "embedded"], &rows)
}

pub fn embed(a: &EmbedArgs) -> Result<Outcome, CliError> {
    let dist = load_metric(&a.metric)?;
    let mu = load_mu(&a.mu, dist.rows())?;
    let e = average_embed_hilbert_with(&dist, &mu, a.theta, &embed_options(a.max_iter, a.tol))?;
    let csv = Some(pairwise_csv(&e, &dist));
    Ok(Outcome { csv, ..Outcome::ok(config(a), result(embedding_values(&e), &e)) })
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct VerifyDualityArgs {
    #[arg(long)]
    pub metric: String,
    /// Source chain; its stationary vector is the embedding measure.
    #[arg(long)]
    pub chain: String,
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    #[arg(long, default_value_t = EmbedOptions::default().max_iter)]
    pub max_iter: usize,
    #[arg(long, default_value_t = EmbedOptions::default().tol)]
    pub tol: f64,
}

/// Forward and witness checks on one embedding.
#[derive(Debug, Clone, Serialize)]
pub struct DualityVerdict {
    pub forward: ForwardReport,
    pub witness: WitnessReport,
    /// The witness with every configuration halved (must fail the average check).
    pub negative_control: WitnessReport,
    pub witness_bound: f64,
}

impl DualityVerdict {
    pub fn passed(&self) -> bool {
        self.forward.gamma_source_le
            && self.forward.product_ok
            && self.witness.lipschitz_ok
            && self.witness.average_ok
            && !self.negative_control.average_ok
    }
}

/// Forward check against `chain`, then the assembled-map check on the
/// decomposition `configs` with equal mixture weights. The Lipschitz bound
/// handed to the witness check is `(Σ_k w_k L_k²)^{1/2}`, computed from the
/// individual configurations.
pub fn verify_embedding(e: &GramEmbedding, chain: &StochasticChain, dist: &Matrix, configs: &[Matrix]) -> Result<DualityVerdict, CliError> {
    let forward = duality_forward_check(e, chain, dist, e.theta, 2.0)?;
    let mu = chain.pi();
    let mix = vec![1.0 / configs.len() as f64; configs.len()];
    let w = assemble_weights(&mix, configs, dist, mu, 2.0, e.theta)?;
    let mut bound = 0.0;
    for (wk, y) in w.iter().zip(configs) {
        bound += wk * evaluate_average_distortion(y, dist, mu, 2.0, e.theta)?.lip.powi(2);
    }
    let witness_bound = bound.sqrt();
    let witness = duality_witness_check(&w, configs, dist, mu, 2.0, e.theta, witness_bound, 1e-9)?;
    let halved: Vec<Matrix> = configs.iter().map(|y| y.scaled(0.5)).collect();
    let negative_control = duality_witness_check(&w, &halved, dist, mu, 2.0, e.theta, witness_bound, 1e-9)?;
    Ok(DualityVerdict { forward, witness, negative_control, witness_bound })
}

pub fn verify_duality(a: &VerifyDualityArgs) -> Result<Outcome, CliError> {
    let dist = load_metric(&a.metric)?;
    let chain = load_chain(&a.chain)?;
    let e = average_embed_hilbert_with(&dist, chain.pi(), a.theta, &embed_options(a.max_iter, a.tol))?;
    let v = verify_embedding(&e, &chain, &dist, std::slice::from_ref(&e.factor))?;
    let values = embedding_values(&e)
        .with("forward_slack", v.forward.slack, Provenance::Exact)
        .with("gamma_target", v.forward.gamma_target, Provenance::Exact)
        .with("witness_lip", v.witness.lip, Provenance::Exact)
        .with("witness_bound", v.witness_bound, Provenance::Exact);
    Ok(Outcome { passed: v.passed(), ..Outcome::ok(config(a), result(values, json!({ "embedding": e, "verdict": v }))) })
}

// ---- expander ----

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ExpanderArgs {
    /// Vertex count of a random regular graph.
    #[arg(long, required_unless_present = "graph")]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    /// Analyse this graph instead of sampling one.
    #[arg(long, conflicts_with = "n")]
    pub graph: Option<String>,
    /// Include the edge list in the report.
    #[arg(long)]
    pub emit_graph: bool,
}

pub fn expander(a: &ExpanderArgs, seed: u64) -> Result<Outcome, CliError> {
    let g = match (&a.graph, a.n) {
        (Some(s), _) => load_graph(s)?,
        (None, Some(n)) => random_regular_graph(n, a.d, seed)?,
        (None, None) => return Err(CliError::Config("give --n or --graph".into())),
    };
    let mut values = Values::new().with("n", g.n() as f64, Provenance::Exact).with("d", g.d() as f64, Provenance::Exact);
    let spectral = if g.n() <= MAX_SPECTRAL_STATES {
        let s = spectral_data(&graph_chain(&g)?)?;
        values.insert("lambda2", s.lambda2, Provenance::Exact);
        values.insert("gamma", s.gamma_classical, Provenance::Exact);
        Some(json!({ "lambda2": s.lambda2, "gamma_classical": nsgap_ext(s.gamma_classical) }))
    } else {
        None
    };
    let spread = if g.is_connected() {
        let s = distance_spread_check(&g)?;
        values.insert("spread_threshold", s.threshold as f64, Provenance::Exact);
        values.insert("spread_count", s.count as f64, Provenance::Exact);
        Some(s)
    } else {
        None
    };
    let passed = spread.as_ref().is_none_or(|s| s.holds);
    let detail = json!({
        "n": g.n(),
        "d": g.d(),
        "connected": g.is_connected(),
        "edges": g.edges().len(),
        "spectral": spectral,
        "spread": spread,
        "graph": a.emit_graph.then(|| g.clone()),
    });
    Ok(Outcome { passed, ..Outcome::ok(config(a), result(values, detail)) })
}

fn nsgap_ext(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!("inf")
    }
}

// ---- bounds ----

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BoundsArgs {
    #[command(subcommand)]
    pub kind: BoundKind,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "bound")]
pub enum BoundKind {
    /// n^{c_q/(γ·D·ln d)}: dimension forced by an average-distortion embedding.
    Dimension {
        #[arg(long)]
        n: f64,
        #[arg(long)]
        d: f64,
        #[arg(long)]
        gamma: f64,
        /// Average distortion D.
        #[arg(long)]
        distortion: f64,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        /// The constant c_q (default: from --calibration).
        #[arg(long)]
        c_q: Option<f64>,
        #[arg(long)]
        calibration: Option<PathBuf>,
    },
    /// log_d(n)/γ^{1/q}: average-distortion lower bound.
    AvgDistortion {
        #[arg(long)]
        n: f64,
        #[arg(long)]
        d: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
    },
    /// (2γ)^{1/p}·Ω₁: largest admissible lower modulus at scale ⌊log_d(n/2)⌋.
    Coarse {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        omega1: f64,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
    },
    /// ⌈ln(2D_X)/ln(2/(1+λ₂))⌉.
    Tstar {
        #[arg(long, allow_hyphen_values = true)]
        lambda2: f64,
        #[arg(long)]
        dx: f64,
    },
    /// C·ln(D_X+1)/(1−λ₂).
    Thm4 {
        /// λ₂ directly (otherwise computed from --chain).
        #[arg(long, allow_hyphen_values = true, required_unless_present = "chain")]
        lambda2: Option<f64>,
        #[arg(long)]
        chain: Option<String>,
        /// D_X directly (otherwise computed from --space).
        #[arg(long, required_unless_present = "space")]
        dx: Option<f64>,
        #[arg(long)]
        space: Option<String>,
        /// The constant C (default: from --calibration).
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        calibration: Option<PathBuf>,
    },
    /// Heuristic γ(A, ‖·‖²_{ℓ_p}) against p²/(1−λ₂).
    LpGap {
        #[arg(long)]
        chain: String,
        #[arg(long, default_value_t = 4.0)]
        p: f64,
        #[arg(long, default_value_t = 4)]
        dim: usize,
        #[arg(long, default_value_t = 32)]
        restarts: usize,
    },
}

fn constant(explicit: Option<f64>, calibration: &Option<PathBuf>, name: &str) -> Result<(f64, Provenance), CliError> {
    match (explicit, calibration) {
        (Some(c), _) => Ok((c, Provenance::Exact)),
        (None, Some(path)) => Ok((crate::calibrate::read_constant(path, name)?, Provenance::Fitted)),
        (None, None) => Err(CliError::Config(format!("give the constant {name} explicitly or via --calibration"))),
    }
}

pub fn bounds(a: &BoundsArgs, seed: u64) -> Result<Outcome, CliError> {
    let (values, detail) = match &a.kind {
        BoundKind::Dimension { n, d, gamma, distortion, q, c_q, calibration } => {
            let (c, prov) = constant(*c_q, calibration, "c_q")?;
            let v = dimension_lower_bound(*n, *d, *gamma, *distortion, *q, c)?;
            (Values::new().with("bound", v, prov).with("c_q", c, prov), json!({ "bound": v, "log": "natural" }))
        }
        BoundKind::AvgDistortion { n, d, gamma, q } => {
            let v = avg_distortion_lower_bound(*n, *d, *gamma, *q)?;
            (Values::new().with("bound", v, Provenance::Exact), json!({ "bound": v, "implicit_constant": 1.0, "log": "natural" }))
        }
        BoundKind::Coarse { gamma, omega1, p, n, d } => {
            let r = coarse_obstruction(*gamma, *omega1, *p, *n, *d)?;
            (Values::new().with("max_modulus", r.max_modulus, Provenance::Exact).with("scale", r.scale as f64, Provenance::Exact), json!(r))
        }
        BoundKind::Tstar { lambda2, dx } => {
            let t = tstar(*lambda2, *dx)?;
            (Values::new().with("tstar", t as f64, Provenance::Exact), json!({ "tstar": t }))
        }
        BoundKind::Thm4 { lambda2, chain, dx, space, c, calibration } => {
            let l2 = match (lambda2, chain) {
                (Some(l), _) => *l,
                (None, Some(s)) => spectral_data(&load_chain(s)?)?.lambda2,
                (None, None) => return Err(CliError::Config("give --lambda2 or --chain".into())),
            };
            let (d_x, dx_prov) = match (dx, space) {
                (Some(v), _) => (*v, Provenance::Exact),
                (None, Some(s)) => {
                    let hd = hilbert_distance(&load_space(s)?)?;
                    (hd.d_x, if hd.exact { Provenance::Exact } else { Provenance::Heuristic })
                }
                (None, None) => return Err(CliError::Config("give --dx or --space".into())),
            };
            let (cv, prov) = constant(*c, calibration, "C_thm4")?;
            let v = theorem4_bound_from_lambda2(l2, d_x, cv)?;
            let values = Values::new()
                .with("bound", v, prov)
                .with("lambda2", l2, Provenance::Exact)
                .with("D_X", d_x, dx_prov)
                .with("C_thm4", cv, prov);
            (values, json!({ "bound": v, "tstar": tstar(l2, d_x).ok() }))
        }
        BoundKind::LpGap { chain, p, dim, restarts } => {
            let c = load_chain(chain)?;
            let r = lp_gap_check(&c, *p, *dim, seed, &HeuristicOptions { restarts: *restarts, ..HeuristicOptions::default() })?;
            let mut values = Values::new()
                .with("heuristic_gamma", r.heuristic_gamma.value, r.heuristic_gamma.kind.into())
                .with("bound", r.bound, Provenance::Exact);
            if let Some(x) = r.ratio {
                values.insert("ratio", x, r.heuristic_gamma.kind.into());
            }
            (values, json!(r))
        }
    };
    Ok(Outcome::ok(config(a), result(values, detail)))
}

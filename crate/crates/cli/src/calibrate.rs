//! Empirical fits of the unspecified universal constants.
//!
//! Each fit runs a random instance family and reports the extremal
//! instance ratio, i.e. the least (or greatest) constant that makes every
//! inequality of the family hold. Fitted values can be merged into a
//! calibration file read by `bounds`.

use crate::report::{result, Provenance, Values};
use crate::{CliError, Outcome};
use clap::{Args, ValueEnum};
use nsgap::embed::average_embed_hilbert;
use nsgap::expander::{graph_chain, random_regular_graph};
use nsgap::john::hilbert_distance;
use nsgap::markov::{random_reversible_chain, spectral_data};
use nsgap::mazur::extrapolation_check;
use nsgap::num::rng_stream;
use nsgap::rayleigh::{gamma_heuristic_with, HeuristicOptions};
use nsgap::spaces::MetricSpace;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum Constant {
    /// C in γ(A, ‖·‖^p_X) ≤ C·ln(D_X+1)/(1−λ₂), over random chains × ℓ∞^d.
    #[value(name = "C_thm4")]
    #[serde(rename = "C_thm4")]
    CThm4,
    /// c_q in r ≥ n^{c_q/(γ·D·ln d)}, over embeddings of random cubic graphs.
    #[value(name = "c_q")]
    #[serde(rename = "c_q")]
    Cq,
    /// C(p, q) in γ(B, ‖·‖^p) ≤ C·γ(B, ‖·‖^q), over random chains × finite metrics.
    #[value(name = "C_pq")]
    #[serde(rename = "C_pq")]
    Cpq,
}

impl Constant {
    pub fn name(self) -> &'static str {
        match self {
            Constant::CThm4 => "C_thm4",
            Constant::Cq => "c_q",
            Constant::Cpq => "C_pq",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CalibrateArgs {
    #[arg(long, value_enum)]
    pub constant: Constant,
    /// Family size.
    #[arg(long, default_value_t = 50)]
    pub count: usize,
    /// Largest chain / graph size (defaults: 8 for C_thm4, 32 for c_q, 4 for C_pq).
    #[arg(long)]
    pub max_n: Option<usize>,
    /// Largest ℓ∞ dimension (C_thm4) or metric size (C_pq).
    #[arg(long, default_value_t = 8)]
    pub max_dim: usize,
    /// Gap exponent p (defaults: 2 for C_thm4, 1 for C_pq).
    #[arg(long)]
    pub p: Option<f64>,
    /// Second exponent q (defaults: 2 for c_q and C_pq).
    #[arg(long)]
    pub q: Option<f64>,
    /// Heuristic restarts per instance.
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    /// Merge the fitted constant into this calibration file.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
}

/// One instance of a fit.
#[derive(Debug, Clone, Serialize)]
pub struct Instance {
    pub index: usize,
    pub n: usize,
    /// ℓ∞ dimension, metric size, or graph degree, depending on the family.
    pub size: usize,
    pub ratio: f64,
}

/// A fitted constant and the family it came from.
#[derive(Debug, Clone, Serialize)]
pub struct Fit {
    pub constant: Constant,
    pub value: f64,
    /// Whether the fit is the family maximum (upper constant) or minimum.
    pub extremum: &'static str,
    pub instances: Vec<Instance>,
    pub skipped: usize,
    pub extra: Value,
}

fn fit(constant: Constant, extremum: &'static str, results: Vec<Option<Instance>>, extra: Value) -> Result<Fit, CliError> {
    let skipped = results.iter().filter(|r| r.is_none()).count();
    let instances: Vec<Instance> = results.into_iter().flatten().collect();
    if instances.is_empty() {
        return Err(CliError::EmptyFamily);
    }
    let ratios = instances.iter().map(|i| i.ratio);
    let value = if extremum == "max" { ratios.fold(f64::NEG_INFINITY, f64::max) } else { ratios.fold(f64::INFINITY, f64::min) };
    Ok(Fit { constant, value, extremum, instances, skipped, extra })
}

/// Fit `C_thm4 = max γ_heur·(1−λ₂)/ln(D_X+1)` over random reversible
/// chains on `2..=max_n` states and `ℓ∞^d`, `d ∈ 2..=max_dim`.
pub fn fit_c_thm4(count: usize, max_n: usize, max_dim: usize, p: f64, restarts: usize, seed: u64) -> Result<Fit, CliError> {
    if max_n < 2 || max_dim < 1 {
        return Err(CliError::Config("need max_n >= 2 and max_dim >= 1".into()));
    }
    let opts = HeuristicOptions { restarts, ..HeuristicOptions::default() };
    let results = (0..count)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_stream(seed, k as u64);
            let n = rng.random_range(2..=max_n);
            let d = rng.random_range(2.min(max_dim)..=max_dim);
            let chain = random_reversible_chain(n, 0.6, &mut rng)?;
            let l2 = spectral_data(&chain)?.lambda2;
            if l2 >= 1.0 - 1e-12 {
                return Ok(None);
            }
            let space = MetricSpace::lp(f64::INFINITY, d)?;
            let d_x = hilbert_distance(&space)?.d_x;
            let g = gamma_heuristic_with(&chain, &space, p, seed ^ k as u64, &opts)?;
            Ok(Some(Instance { index: k, n, size: d, ratio: g.value * (1.0 - l2) / (d_x + 1.0).ln() }))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    fit(Constant::CThm4, "max", results, json!({ "p": p, "space": "l_inf^d" }))
}

/// Fit `c_q = min γ·D·ln d·ln r / ln n` over random cubic graphs on even
/// `n ∈ 4..=max_n`, with `D` the achieved quadratic average distortion of the
/// Hilbert embedding, `r` its rank, and `γ = γ(A_G, ‖·‖^q_{ℓ₂})` (exact for
/// `q = 2`, heuristic otherwise).
pub fn fit_c_q(count: usize, max_n: usize, q: f64, restarts: usize, seed: u64) -> Result<Fit, CliError> {
    if max_n < 4 {
        return Err(CliError::Config("need max_n >= 4 for cubic graphs".into()));
    }
    let opts = HeuristicOptions { restarts, ..HeuristicOptions::default() };
    let results = (0..count)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_stream(seed, k as u64);
            let n = 2 * rng.random_range(2..=max_n / 2);
            let g = random_regular_graph(n, 3, rng.random())?;
            if !g.is_connected() {
                return Ok(None);
            }
            let chain = graph_chain(&g)?;
            let gamma = if q == 2.0 {
                spectral_data(&chain)?.gamma_classical
            } else {
                gamma_heuristic_with(&chain, &MetricSpace::lp(2.0, n.min(8))?, q, seed ^ k as u64, &opts)?.value
            };
            let dist = g.metric()?;
            let e = average_embed_hilbert(&dist, &vec![1.0 / n as f64; n], 1.0)?;
            let norms: Vec<f64> = (0..e.factor.cols()).map(|c| e.factor.col(c).iter().map(|v| v * v).sum::<f64>()).collect();
            let top = norms.iter().cloned().fold(0.0, f64::max);
            let r = norms.iter().filter(|&&v| v > 1e-12 * top).count();
            if r < 2 || !gamma.is_finite() {
                return Ok(None);
            }
            let ratio = gamma * e.d_achieved * 3f64.ln() * (r as f64).ln() / (n as f64).ln();
            Ok(Some(Instance { index: k, n, size: 3, ratio }))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    fit(Constant::Cq, "min", results, json!({ "q": q, "degree": 3, "theta": 1.0 }))
}

/// Fit `C_pq = max γ_p/γ_q` over random chains on `2..=max_n` states and
/// random finite metrics on `2..=max_dim` points (both gaps by enumeration).
/// The minimum of `γ_p/γ_q^{p/q}` is reported alongside.
pub fn fit_c_pq(count: usize, max_n: usize, max_dim: usize, p: f64, q: f64, seed: u64) -> Result<Fit, CliError> {
    if max_n < 2 || max_dim < 2 {
        return Err(CliError::Config("need max_n >= 2 and max_dim >= 2".into()));
    }
    let opts = HeuristicOptions::default();
    let results = (0..count)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_stream(seed, k as u64);
            let n = rng.random_range(2..=max_n);
            let m = rng.random_range(2..=max_dim);
            let chain = random_reversible_chain(n, 0.6, &mut rng)?;
            let space = MetricSpace::finite(crate::sampling::finite_metric(m, &mut rng))?;
            match extrapolation_check(&chain, &space, p, q, seed, &opts) {
                Ok(r) => Ok(Some((Instance { index: k, n, size: m, ratio: r.right_ratio }, r.left_ratio))),
                Err(nsgap::Error::GapUnavailable(_)) => Ok(None),
                Err(e) => Err(e.into()),
            }
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let min_left = results.iter().flatten().map(|(_, l)| *l).fold(f64::INFINITY, f64::min);
    let results = results.into_iter().map(|r| r.map(|(i, _)| i)).collect();
    fit(Constant::Cpq, "max", results, json!({ "p": p, "q": q, "min_left_ratio": min_left }))
}

pub fn run_fit(a: &CalibrateArgs, seed: u64) -> Result<Fit, CliError> {
    match a.constant {
        Constant::CThm4 => fit_c_thm4(a.count, a.max_n.unwrap_or(8), a.max_dim, a.p.unwrap_or(2.0), a.restarts, seed),
        Constant::Cq => fit_c_q(a.count, a.max_n.unwrap_or(32), a.q.unwrap_or(2.0), a.restarts, seed),
        Constant::Cpq => fit_c_pq(a.count, a.max_n.unwrap_or(4), a.max_dim.min(4), a.p.unwrap_or(1.0), a.q.unwrap_or(2.0), seed),
    }
}

pub fn calibrate(a: &CalibrateArgs, seed: u64) -> Result<Outcome, CliError> {
    let f = run_fit(a, seed)?;
    if let Some(path) = &a.calibration {
        write_constant(path, f.constant.name(), f.value, seed)?;
    }
    let values = Values::new()
        .with(f.constant.name(), f.value, Provenance::Fitted)
        .with("instances", f.instances.len() as f64, Provenance::Exact)
        .with("skipped", f.skipped as f64, Provenance::Exact);
    Ok(Outcome::ok(serde_json::to_value(a).expect("serializable"), result(values, &f)))
}

fn read_file(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Merge `name = value` into the `constants` object of a calibration file,
/// creating the file if needed.
pub fn write_constant(path: &Path, name: &str, value: f64, seed: u64) -> Result<(), CliError> {
    let mut doc = if path.exists() { read_file(path)? } else { json!({}) };
    let obj = doc.as_object_mut().ok_or_else(|| CliError::Config(format!("{}: expected a JSON object", path.display())))?;
    let constants = obj.entry("constants").or_insert_with(|| Value::Object(Map::new()));
    let constants = constants.as_object_mut().ok_or_else(|| CliError::Config("`constants` must be an object".into()))?;
    constants.insert(name.to_string(), json!(value));
    let seeds = obj.entry("seeds").or_insert_with(|| Value::Object(Map::new()));
    if let Some(s) = seeds.as_object_mut() {
        s.insert(name.to_string(), json!(seed));
    }
    let text = serde_json::to_string_pretty(&doc).expect("serializable") + "\n";
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Read `constants.<name>` from a calibration file.
pub fn read_constant(path: &Path, name: &str) -> Result<f64, CliError> {
    read_file(path)?
        .get("constants")
        .and_then(|c| c.get(name))
        .and_then(Value::as_f64)
        .ok_or_else(|| CliError::Config(format!("{}: no constant {name}", path.display())))
}

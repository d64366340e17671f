//! Loading chains, spaces, metrics and graphs from command-line arguments.
//!
//! Every input argument is one of: a path to a file, inline JSON (starts
//! with `{` or `[`), or a built-in instance name such as `cycle:5`.

use crate::CliError;
use nsgap::expander::{graph_chain, parse_graph, RegularGraph};
use nsgap::linalg::Matrix;
use nsgap::markov::{build_reversible_chain, lazy_power, parse_chain, StochasticChain};
use nsgap::spaces::{MetricSpace, SpaceKind};
use std::fs;

fn read(arg: &str) -> Result<String, CliError> {
    let t = arg.trim_start();
    if t.starts_with('{') || t.starts_with('[') {
        Ok(arg.to_string())
    } else {
        fs::read_to_string(arg).map_err(|e| CliError::Io(format!("{arg}: {e}")))
    }
}

fn builtin(arg: &str) -> Option<(&str, Vec<&str>)> {
    let mut parts = arg.split(':');
    let name = parts.next()?;
    let rest: Vec<&str> = parts.collect();
    (!rest.is_empty() || matches!(name, "flip")).then_some((name, rest))
}

fn count(s: &str) -> Result<usize, CliError> {
    s.parse().map_err(|_| CliError::Config(format!("expected a count, got {s:?}")))
}

fn real(s: &str) -> Result<f64, CliError> {
    match s {
        "inf" | "infinity" => Ok(f64::INFINITY),
        _ => s.parse().map_err(|_| CliError::Config(format!("expected a number, got {s:?}"))),
    }
}

fn builtin_graph(name: &str, args: &[&str]) -> Result<Option<RegularGraph>, CliError> {
    Ok(match (name, args) {
        ("cycle", [n]) => Some(RegularGraph::cycle(count(n)?)?),
        ("complete", [n]) => Some(RegularGraph::complete(count(n)?)?),
        ("hypercube", [k]) => Some(RegularGraph::hypercube(count(k)?)?),
        _ => None,
    })
}

/// Chains: file/JSON/text, `flip`, `identity:N`, `cycle:N`, `complete:N`,
/// `hypercube:K`, and `lazy-<graph>:…` for the lazy walk.
pub fn load_chain(arg: &str) -> Result<StochasticChain, CliError> {
    if let Some((name, args)) = builtin(arg) {
        if name == "flip" {
            return Ok(build_reversible_chain(&Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]])?, None)?);
        }
        if let ("identity", [n]) = (name, args.as_slice()) {
            let n = count(n)?;
            return Ok(build_reversible_chain(&Matrix::identity(n), Some(&vec![1.0 / n as f64; n]))?);
        }
        let (lazy, base) = match name.strip_prefix("lazy-") {
            Some(b) => (true, b),
            None => (false, name),
        };
        if let Some(g) = builtin_graph(base, &args)? {
            let c = graph_chain(&g)?;
            return Ok(if lazy { lazy_power(&c, 1)? } else { c });
        }
        return Err(CliError::Config(format!("unknown chain {arg:?}")));
    }
    Ok(parse_chain(&read(arg)?)?)
}

/// Spaces: file/JSON, `lp:P:DIM[:THETA]`, `two-point`, `cycle:N`,
/// `complete:N`, `hypercube:K` (graph metrics).
pub fn load_space(arg: &str) -> Result<MetricSpace, CliError> {
    if arg == "two-point" {
        return Ok(MetricSpace::finite(Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]])?)?);
    }
    if let Some((name, args)) = builtin(arg) {
        if name == "lp" {
            return match args.as_slice() {
                [p, d] => Ok(MetricSpace::lp(real(p)?, count(d)?)?),
                [p, d, t] => Ok(MetricSpace::lp(real(p)?, count(d)?)?.with_theta(real(t)?)?),
                _ => Err(CliError::Config(format!("expected lp:P:DIM[:THETA], got {arg:?}"))),
            };
        }
        if let Some(g) = builtin_graph(name, &args)? {
            return Ok(MetricSpace::finite(g.metric()?)?);
        }
        return Err(CliError::Config(format!("unknown space {arg:?}")));
    }
    serde_json::from_str(&read(arg)?).map_err(|e| CliError::Config(format!("{arg}: {e}")))
}

/// A finite metric: a finite space description, a bare distance matrix,
/// or a graph (whose path metric is used).
pub fn load_metric(arg: &str) -> Result<Matrix, CliError> {
    if let Ok(space) = load_space(arg) {
        return match space.kind() {
            SpaceKind::Finite { dist } => Ok(dist.clone()),
            _ => Err(CliError::Config(format!("{arg}: expected a finite metric"))),
        };
    }
    let text = read(arg)?;
    if let Ok(rows) = serde_json::from_str::<Vec<Vec<f64>>>(&text) {
        let m = Matrix::from_rows(&rows)?;
        MetricSpace::finite(m.clone())?;
        return Ok(m);
    }
    Ok(load_graph(arg)?.metric()?)
}

/// Graphs: file (edge list or JSON) or `cycle:N`, `complete:N`,
/// `hypercube:K`.
pub fn load_graph(arg: &str) -> Result<RegularGraph, CliError> {
    if let Some((name, args)) = builtin(arg) {
        if let Some(g) = builtin_graph(name, &args)? {
            return Ok(g);
        }
    }
    Ok(parse_graph(&read(arg)?)?)
}

/// `uniform` or a JSON array (inline or file).
pub fn load_mu(arg: &str, n: usize) -> Result<Vec<f64>, CliError> {
    if arg == "uniform" {
        return Ok(vec![1.0 / n as f64; n]);
    }
    serde_json::from_str(&read(arg)?).map_err(|e| CliError::Config(format!("{arg}: {e}")))
}

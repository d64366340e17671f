//! Nonlinear Rayleigh quotients and nonlinear spectral gaps.
//!
//! For a chain `A` with stationary `π`, a metric `d` and a nonconstant
//! configuration `x = (x_1, …, x_n)`, the Rayleigh quotient is
//!
//! ```text
//! R(x; A, d^p) = Σ_ij π_i a_ij d(x_i, x_j)^p  /  Σ_ij π_i π_j d(x_i, x_j)^p
//! ```
//!
//! and the nonlinear spectral gap is `γ(A, d^p) = sup_x 1/R(x; A, d^p)`.
//! This module evaluates the supremum exactly (Euclidean squares via the
//! spectrum, finite spaces by enumeration), bounds it from below by local
//! search for other norms, and checks the algebraic properties that drive
//! the upper-bound pipeline: mixture/product/power rules, the pointwise
//! Hilbert-to-norm estimate, absolute gaps and Markov type.

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::markov::{lazy_power, reciprocal_gap, spectral_data, symmetrized_eigen, StochasticChain};
use crate::john::EllipsoidNorm;
use crate::num::{ext_f64, le_tol, rng_stream};
use crate::spaces::{Configuration, MetricSpace, SpaceKind};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Rayleigh quotients below this (at nonconstant configurations) are treated
/// as zero, i.e. the gap is reported as `∞`.
pub const ZERO_QUOTIENT: f64 = 1e-14;
/// Exponents accepted by the public interface.
pub const P_RANGE: (f64, f64) = (1.0, 8.0);
/// Largest finite space accepted by the enumerators.
pub const MAX_BRUTE_POINTS: usize = 8;
/// Largest chain accepted by the enumerators.
pub const MAX_BRUTE_STATES: usize = 6;
/// Enumeration budget (number of configurations or configuration pairs).
pub const MAX_ENUMERATION: u64 = 10_000_000;

/// How a gap value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapKind {
    ExactHilbert,
    BruteForce,
    HeuristicLowerBound,
    UpperBoundThm4,
}

/// The extremal configuration(s) behind a gap value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Witness {
    Single(Configuration),
    Pair(Configuration, Configuration),
}

/// A value of `γ` (or `γ₊`) together with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    #[serde(with = "ext_f64")]
    pub value: f64,
    pub kind: GapKind,
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

fn check_p(p: f64) -> Result<()> {
    if p >= P_RANGE.0 && p <= P_RANGE.1 {
        Ok(())
    } else {
        Err(Error::BadExponentRange(format!("p must lie in [1, 8], got {p}")))
    }
}

/// `(numerator, denominator)` of the quotient for a distance matrix.
fn quotient_parts(chain: &StochasticChain, dist: &Matrix, p: f64) -> (f64, f64) {
    let pi = chain.pi();
    let n = chain.n();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let dp = powi_or_powf(dist[(i, j)], p);
            num += pi[i] * chain.a(i, j) * dp;
            den += pi[i] * pi[j] * dp;
        }
    }
    (num, den)
}

fn powi_or_powf(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x * x
    } else if p.fract() == 0.0 {
        x.powi(p as i32)
    } else {
        x.powf(p)
    }
}

/// `1/R` with the small-quotient convention (`R < 1e-14 ↦ ∞`).
fn inverse_quotient(num: f64, den: f64) -> f64 {
    if num < ZERO_QUOTIENT * den {
        f64::INFINITY
    } else {
        den / num
    }
}

/// `R(x; A, d^p)` for a nonconstant configuration.
pub fn rayleigh_quotient(space: &MetricSpace, x: &Configuration, chain: &StochasticChain, p: f64) -> Result<f64> {
    check_p(p)?;
    if x.n() != chain.n() {
        return Err(Error::LengthMismatch { expected: chain.n(), found: x.n() });
    }
    let dist = space.pairwise(x)?;
    let (num, den) = quotient_parts(chain, &dist, p);
    if den <= 0.0 {
        return Err(Error::ConstantConfiguration);
    }
    Ok(num / den)
}

fn finite_dist(space: &MetricSpace) -> Result<Matrix> {
    match space.kind() {
        SpaceKind::Finite { dist } => Ok(Matrix::from_fn(dist.rows(), dist.cols(), |i, j| space.snowflake(dist[(i, j)]))),
        _ => Err(Error::UnsupportedSpace("enumeration needs a finite metric space".into())),
    }
}

fn enumeration_size(m: usize, slots: usize) -> Option<u64> {
    (m as u64).checked_pow(slots as u32)
}

fn check_brute_caps(m: usize, n: usize, slots: usize) -> Result<u64> {
    if m > MAX_BRUTE_POINTS || n > MAX_BRUTE_STATES {
        return Err(Error::InstanceTooLarge(format!(
            "enumeration needs |M| <= {MAX_BRUTE_POINTS} and n <= {MAX_BRUTE_STATES}, got |M| = {m}, n = {n}"
        )));
    }
    match enumeration_size(m, slots) {
        Some(k) if k <= MAX_ENUMERATION => Ok(k),
        _ => Err(Error::InstanceTooLarge(format!("{m}^{slots} configurations exceed the budget of {MAX_ENUMERATION}"))),
    }
}

/// Decode `code` as `slots` base-`m` digits (least significant first).
fn decode(mut code: u64, m: usize, slots: usize, out: &mut [usize]) {
    for o in out.iter_mut().take(slots) {
        *o = (code % m as u64) as usize;
        code /= m as u64;
    }
}

/// Best `(value, code)` over a range of codes, keeping the first maximizer.
fn best_over<F: Fn(u64) -> Option<f64> + Sync>(total: u64, eval: F) -> Option<(f64, u64)> {
    const CHUNK: u64 = 4096;
    let chunks = total.div_ceil(CHUNK);
    let per_chunk: Vec<Option<(f64, u64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut best: Option<(f64, u64)> = None;
            for code in c * CHUNK..((c + 1) * CHUNK).min(total) {
                if let Some(v) = eval(code) {
                    if best.is_none_or(|(b, _)| v > b) {
                        best = Some((v, code));
                    }
                }
            }
            best
        })
        .collect();
    per_chunk.into_iter().flatten().fold(None, |acc, (v, code)| match acc {
        Some((b, _)) if v <= b => acc,
        _ => Some((v, code)),
    })
}

/// Exact `γ(A, d^p)` over a finite metric space by enumerating all `|M|^n`
/// configurations. The witness is the first maximizer in lexicographic
/// (least-significant-state-first) order.
pub fn gamma_bruteforce(chain: &StochasticChain, space: &MetricSpace, p: f64) -> Result<GapEstimate> {
    check_p(p)?;
    chain.require_reversible()?;
    let dist = finite_dist(space)?;
    let (m, n) = (dist.rows(), chain.n());
    if m < 2 || n < 2 {
        return Err(Error::InvalidInput("enumeration needs at least two points and two states".into()));
    }
    let total = check_brute_caps(m, n, n)?;
    let dp = Matrix::from_fn(m, m, |a, b| powi_or_powf(dist[(a, b)], p));
    let pi = chain.pi();
    let eval = |code: u64| {
        let mut x = [0usize; MAX_BRUTE_STATES];
        decode(code, m, n, &mut x);
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let d = dp[(x[i], x[j])];
                num += pi[i] * chain.a(i, j) * d;
                den += pi[i] * pi[j] * d;
            }
        }
        (den > 0.0).then(|| inverse_quotient(num, den))
    };
    let (value, code) = best_over(total, eval).ok_or(Error::ConstantConfiguration)?;
    let mut x = vec![0usize; n];
    decode(code, m, n, &mut x);
    Ok(GapEstimate { value, kind: GapKind::BruteForce, p, witness: Some(Witness::Single(Configuration::Indices(x))) })
}

/// Exact absolute gap `γ₊(A, d^q)`: the least `γ₊` with
/// `Σ π_i π_j d(x_i, y_j)^q ≤ γ₊ Σ π_i a_ij d(x_i, y_j)^q` for all pairs of
/// configurations, by enumerating all `|M|^{2n}` pairs.
pub fn gamma_plus_bruteforce(chain: &StochasticChain, space: &MetricSpace, q: f64) -> Result<GapEstimate> {
    check_p(q)?;
    chain.require_reversible()?;
    let dist = finite_dist(space)?;
    let (m, n) = (dist.rows(), chain.n());
    if m < 2 {
        return Err(Error::InvalidInput("enumeration needs at least two points".into()));
    }
    let total = check_brute_caps(m, n, 2 * n)?;
    let dq = Matrix::from_fn(m, m, |a, b| powi_or_powf(dist[(a, b)], q));
    let pi = chain.pi();
    let eval = |code: u64| {
        let mut xy = [0usize; 2 * MAX_BRUTE_STATES];
        decode(code, m, 2 * n, &mut xy);
        let (x, y) = xy.split_at(n);
        let (mut lhs, mut rhs) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let d = dq[(x[i], y[j])];
                lhs += pi[i] * pi[j] * d;
                rhs += pi[i] * chain.a(i, j) * d;
            }
        }
        (lhs > 0.0).then(|| inverse_quotient(rhs, lhs))
    };
    let (value, code) = best_over(total, eval).ok_or(Error::ConstantConfiguration)?;
    let mut xy = vec![0usize; 2 * n];
    decode(code, m, 2 * n, &mut xy);
    let y = xy.split_off(n);
    Ok(GapEstimate {
        value,
        kind: GapKind::BruteForce,
        p: q,
        witness: Some(Witness::Pair(Configuration::Indices(xy), Configuration::Indices(y))),
    })
}

/// Eigenvector of `A` (in `L₂(π)` coordinates) for λ₂, orthogonal to the
/// constants even when λ₂ = λ₁ is degenerate.
fn second_eigenvector(chain: &StochasticChain) -> Result<(f64, Vec<f64>)> {
    let e = symmetrized_eigen(chain)?;
    let n = chain.n();
    let s: Vec<f64> = chain.pi().iter().map(|p| p.sqrt()).collect();
    let project = |k: usize| {
        let u = e.vectors.col(k);
        let c = dot(&u, &s);
        let w: Vec<f64> = u.iter().zip(&s).map(|(a, b)| a - c * b).collect();
        let nw = dot(&w, &w).sqrt();
        (nw, w)
    };
    let (nw, mut w) = project(1);
    if nw < 0.5 {
        w = project(0).1;
    }
    let nw = dot(&w, &w).sqrt();
    let v = (0..n).map(|i| w[i] / nw / s[i]).collect();
    Ok((e.values[1], v))
}

/// `γ(A, ‖·‖²_{ℓ₂}) = 1/(1 − λ₂)` with the λ₂-eigenvector as witness (a
/// configuration in `ℝ¹`).
pub fn gamma_hilbert_exact(chain: &StochasticChain) -> Result<GapEstimate> {
    chain.require_reversible()?;
    if chain.n() < 2 {
        return Err(Error::InvalidInput("a gap needs at least two states".into()));
    }
    let (lambda2, v) = second_eigenvector(chain)?;
    let witness = Configuration::Vectors(Matrix::from_vec(v.len(), 1, v)?);
    Ok(GapEstimate { value: reciprocal_gap(lambda2), kind: GapKind::ExactHilbert, p: 2.0, witness: Some(Witness::Single(witness)) })
}

/// `γ₊(A, ‖·‖²_{ℓ₂}) = 1/(1 − max_{i≥2} |λ_i|)`.
pub fn gamma_plus_hilbert_exact(chain: &StochasticChain) -> Result<GapEstimate> {
    let spec = spectral_data(chain)?;
    Ok(GapEstimate { value: reciprocal_gap(spec.meanzero_norm), kind: GapKind::ExactHilbert, p: 2.0, witness: None })
}

/// Tuning of [`gamma_heuristic_with`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicOptions {
    pub restarts: usize,
    /// Iteration cap per restart.
    pub max_iter: usize,
    /// Seed the first two restarts with the λ₂-eigenvector configuration.
    pub spectral_start: bool,
}

impl Default for HeuristicOptions {
    fn default() -> Self {
        HeuristicOptions { restarts: 32, max_iter: 500, spectral_start: true }
    }
}

/// Lower bound on `γ(A, ‖·‖^p_X)` for a normed space `X`: multi-start
/// local minimization of the Rayleigh quotient. See [`gamma_heuristic_with`].
pub fn gamma_heuristic(chain: &StochasticChain, space: &MetricSpace, p: f64, restarts: usize, seed: u64) -> Result<GapEstimate> {
    gamma_heuristic_with(chain, space, p, seed, &HeuristicOptions { restarts, ..HeuristicOptions::default() })
}

/// Multi-start minimization of `R(x; A, ‖·‖^{θp})` over `x ∈ (ℝ^d)^n`.
///
/// Each restart draws a Gaussian configuration from its own random stream
/// (`seed`, restart index) and iterates with the denominator renormalized
/// to one. Smooth norms use Polak–Ribière conjugate gradients with a
/// golden-section line search; ℓ₁, ℓ∞ and polytope norms use subgradient
/// steps (first-max tie-breaking) with line search and a diminishing
/// `0.1/√k` fallback step. Restarts run in parallel and are merged by index,
/// so the result depends only on the inputs and `seed`. The returned value
/// is `1/R` at the best configuration found, which is also the witness.
pub fn gamma_heuristic_with(
    chain: &StochasticChain,
    space: &MetricSpace,
    p: f64,
    seed: u64,
    opts: &HeuristicOptions,
) -> Result<GapEstimate> {
    check_p(p)?;
    chain.require_reversible()?;
    let d = space.dim().ok_or_else(|| Error::UnsupportedSpace("the heuristic needs a normed space".into()))?;
    let n = chain.n();
    if n < 2 {
        return Err(Error::InvalidInput("a gap needs at least two states".into()));
    }
    if opts.restarts == 0 {
        return Err(Error::InvalidInput("at least one restart is required".into()));
    }
    let problem = Problem::new(chain, space, p * space.theta(), d);
    let spectral = if opts.spectral_start { Some(second_eigenvector(chain)?.1) } else { None };
    let runs: Vec<Result<(f64, Vec<f64>)>> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let start = match (&spectral, r) {
                (Some(v), 0) => (0..n * d).map(|k| if k % d == 0 { v[k / d] } else { 0.0 }).collect(),
                (Some(v), 1) => (0..n * d).map(|k| v[k / d]).collect(),
                _ => {
                    let mut rng = rng_stream(seed, r as u64);
                    (0..n * d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
                }
            };
            problem.minimize(start, opts.max_iter)
        })
        .collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for run in runs {
        let (r, x) = run?;
        if best.as_ref().is_none_or(|(b, _)| r < *b) {
            best = Some((r, x));
        }
    }
    let (_, x) = best.expect("at least one restart");
    let config = Configuration::Vectors(Matrix::from_vec(n, d, x)?);
    // Report the quotient re-evaluated through the public path so the
    // witness reproduces the value exactly.
    let dist = space.pairwise(&config)?;
    let (num, den) = quotient_parts(chain, &dist, p);
    let value = if den > 0.0 { inverse_quotient(num, den) } else { f64::INFINITY };
    Ok(GapEstimate { value, kind: GapKind::HeuristicLowerBound, p, witness: Some(Witness::Single(config)) })
}

/// The smooth/nonsmooth minimization problem behind the heuristic.
struct Problem<'a> {
    space: &'a MetricSpace,
    n: usize,
    d: usize,
    /// Effective exponent `θ·p` of the base norm.
    e: f64,
    /// `π_i a_ij + π_j a_ji` and `2 π_i π_j` for `i < j`.
    pairs: Vec<(usize, usize, f64, f64)>,
    pi: Vec<f64>,
    smooth: bool,
}

impl<'a> Problem<'a> {
    fn new(chain: &StochasticChain, space: &'a MetricSpace, e: f64, d: usize) -> Self {
        let n = chain.n();
        let pi = chain.pi().to_vec();
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                pairs.push((i, j, pi[i] * chain.a(i, j) + pi[j] * chain.a(j, i), 2.0 * pi[i] * pi[j]));
            }
        }
        let smooth = match space.kind() {
            SpaceKind::Lp { p, .. } => *p > 1.0 && p.is_finite(),
            SpaceKind::Ellipsoid(_) => true,
            _ => false,
        } && e > 1.0;
        Problem { space, n, d, e, pairs, pi, smooth }
    }

    /// `(N, D)` and optionally their gradients.
    fn eval(&self, x: &[f64], grad: bool) -> Result<(f64, f64, Vec<f64>, Vec<f64>)> {
        let (n, d) = (self.n, self.d);
        let (mut num, mut den) = (0.0, 0.0);
        let (mut gn, mut gd) = if grad { (vec![0.0; n * d], vec![0.0; n * d]) } else { (Vec::new(), Vec::new()) };
        let mut diff = vec![0.0; d];
        for &(i, j, wn, wd) in &self.pairs {
            for k in 0..d {
                diff[k] = x[i * d + k] - x[j * d + k];
            }
            if grad {
                let (nv, g) = self.space.norm_with_subgradient(&diff)?;
                let w = powi_or_powf(nv, self.e);
                num += wn * w;
                den += wd * w;
                if nv > 0.0 {
                    let dw = self.e * w / nv;
                    for k in 0..d {
                        let gk = dw * g[k];
                        gn[i * d + k] += wn * gk;
                        gn[j * d + k] -= wn * gk;
                        gd[i * d + k] += wd * gk;
                        gd[j * d + k] -= wd * gk;
                    }
                }
            } else {
                let w = powi_or_powf(self.space.norm(&diff)?, self.e);
                num += wn * w;
                den += wd * w;
            }
        }
        Ok((num, den, gn, gd))
    }

    fn quotient(&self, x: &[f64]) -> Result<f64> {
        let (num, den, _, _) = self.eval(x, false)?;
        Ok(if den > 0.0 { num / den } else { f64::INFINITY })
    }

    /// Center (π-weighted mean zero) and rescale so the denominator is one.
    fn normalize(&self, x: &mut [f64]) -> Result<bool> {
        let d = self.d;
        for k in 0..d {
            let mean: f64 = (0..self.n).map(|i| self.pi[i] * x[i * d + k]).sum();
            for i in 0..self.n {
                x[i * d + k] -= mean;
            }
        }
        let (_, den, _, _) = self.eval(x, false)?;
        if !(den > 0.0 && den.is_finite()) {
            return Ok(false);
        }
        let s = den.powf(-1.0 / self.e);
        x.iter_mut().for_each(|v| *v *= s);
        Ok(true)
    }

    /// Golden-section search of `R(x + α s)` on `[0, hi]`, after expanding
    /// or shrinking `hi` to bracket a decrease. Returns the best step.
    fn line_search(&self, x: &[f64], s: &[f64], f0: f64, alpha0: f64) -> Result<Option<(f64, f64)>> {
        let at = |a: f64| -> Result<f64> {
            let y: Vec<f64> = x.iter().zip(s).map(|(xi, si)| xi + a * si).collect();
            self.quotient(&y)
        };
        let mut a = alpha0;
        let mut fa = at(a)?;
        let mut tries = 0;
        while !(fa < f0) {
            a *= 0.25;
            fa = at(a)?;
            tries += 1;
            if tries > 40 {
                return Ok(None);
            }
        }
        // Expand while still improving.
        let mut lo = 0.0;
        let mut hi = 2.0 * a;
        let mut fhi = at(hi)?;
        let mut expand = 0;
        while fhi < fa && expand < 40 {
            lo = a;
            a = hi;
            fa = fhi;
            hi *= 2.0;
            fhi = at(hi)?;
            expand += 1;
        }
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut l, mut r) = (lo, hi);
        let mut c = r - g * (r - l);
        let mut dd = l + g * (r - l);
        let (mut fc, mut fd) = (at(c)?, at(dd)?);
        for _ in 0..48 {
            if fc < fd {
                r = dd;
                dd = c;
                fd = fc;
                c = r - g * (r - l);
                fc = at(c)?;
            } else {
                l = c;
                c = dd;
                fc = fd;
                dd = l + g * (r - l);
                fd = at(dd)?;
            }
            if (r - l) <= 1e-12 * r.abs().max(1e-300) {
                break;
            }
        }
        let mut best = (a, fa);
        for cand in [(c, fc), (dd, fd)] {
            if cand.1 < best.1 {
                best = cand;
            }
        }
        Ok(Some(best))
    }

    fn minimize(&self, mut x: Vec<f64>, max_iter: usize) -> Result<(f64, Vec<f64>)> {
        if !self.normalize(&mut x)? {
            // A constant start: perturb deterministically along state index.
            for (k, v) in x.iter_mut().enumerate() {
                *v += (k as f64 + 1.0).sin();
            }
            if !self.normalize(&mut x)? {
                return Ok((f64::INFINITY, x));
            }
        }
        let mut f = self.quotient(&x)?;
        let mut best = (f, x.clone());
        if f < ZERO_QUOTIENT {
            return Ok(best);
        }
        let mut prev_grad: Option<Vec<f64>> = None;
        let mut dir: Vec<f64> = Vec::new();
        let mut alpha: f64 = 0.1;
        let mut stall = 0;
        for k in 1..=max_iter {
            let (num, den, gn, gd) = self.eval(&x, true)?;
            let r = num / den;
            let g: Vec<f64> = gn.iter().zip(&gd).map(|(a, b)| (a - r * b) / den).collect();
            let gnorm = dot(&g, &g).sqrt();
            let xnorm = dot(&x, &x).sqrt().max(1e-300);
            if gnorm * xnorm <= 1e-15 * r.max(1e-300) {
                break;
            }
            // Polak–Ribière+ for smooth norms; plain (sub)gradient otherwise.
            let beta = match (&prev_grad, self.smooth) {
                (Some(pg), true) => {
                    let den = dot(pg, pg);
                    let b = (dot(&g, &g) - dot(&g, pg)) / den;
                    if b.is_finite() { b.max(0.0) } else { 0.0 }
                }
                _ => 0.0,
            };
            if dir.is_empty() || beta == 0.0 || k % (self.n * self.d + 1) == 0 {
                dir = g.iter().map(|v| -v).collect();
            } else {
                for (di, gi) in dir.iter_mut().zip(&g) {
                    *di = -gi + beta * *di;
                }
                if dot(&dir, &g) >= 0.0 {
                    dir = g.iter().map(|v| -v).collect();
                }
            }
            prev_grad = Some(g);
            let dnorm = dot(&dir, &dir).sqrt();
            let step0 = alpha.max(1e-8) * xnorm / dnorm;
            match self.line_search(&x, &dir, f, step0)? {
                Some((a, fa)) => {
                    x.iter_mut().zip(&dir).for_each(|(xi, di)| *xi += a * di);
                    alpha = (a * dnorm / xnorm).clamp(1e-10, 10.0);
                    let improved = f - fa;
                    f = fa;
                    stall = if improved <= 1e-15 * f.abs() { stall + 1 } else { 0 };
                }
                None => {
                    if self.smooth {
                        break;
                    }
                    // Diminishing subgradient step; the best iterate is kept.
                    let a = 0.1 / (k as f64).sqrt() * xnorm / dnorm;
                    x.iter_mut().zip(&dir).for_each(|(xi, di)| *xi += a * di);
                    stall += 1;
                    prev_grad = None;
                }
            }
            if !self.normalize(&mut x)? {
                break;
            }
            f = self.quotient(&x)?;
            if f < best.0 {
                best = (f, x.clone());
            }
            if f < ZERO_QUOTIENT || stall >= if self.smooth { 3 } else { 50 } {
                break;
            }
        }
        Ok(best)
    }
}

/// Values and slacks of the four Rayleigh-quotient rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalculusReport {
    pub r_a: f64,
    pub r_b: f64,
    /// `|R(λA+(1−λ)B) − (λR(A)+(1−λ)R(B))|`.
    pub affinity_error: f64,
    /// `|R(λA+(1−λ)I) − λR(A)|`.
    pub dilution_error: f64,
    /// `R(A)^{1/p} + R(B)^{1/p} − R(AB)^{1/p}` (must be ≥ 0).
    pub product_slack: f64,
    /// `t^p R(B) − R(Bᵗ)` (must be ≥ 0).
    pub power_slack: f64,
    pub affinity_ok: bool,
    pub dilution_ok: bool,
    pub product_ok: bool,
    pub power_ok: bool,
}

impl CalculusReport {
    pub fn all_ok(&self) -> bool {
        self.affinity_ok && self.dilution_ok && self.product_ok && self.power_ok
    }
}

/// Evaluate the mixture, identity-dilution, product and power rules for
/// `R(x; ·, d^p)` on chains `A`, `B` sharing `π`.
///
/// Equalities are checked to `1e-12` and inequalities with slack `≥ −1e-12`,
/// both relative to the magnitude of the quantities involved (floored at 1).
pub fn rayleigh_calculus_check(
    space: &MetricSpace,
    x: &Configuration,
    a: &StochasticChain,
    b: &StochasticChain,
    lambda: f64,
    t: u32,
    p: f64,
) -> Result<CalculusReport> {
    check_p(p)?;
    if t == 0 {
        return Err(Error::InvalidPower);
    }
    let mix = a.mix(lambda, b)?;
    let dilute = a.mix(lambda, &a.identity_like())?;
    let ab = a.compose(b)?;
    let bt = b.power(t)?;
    let dist = space.pairwise(x)?;
    if x.n() != a.n() {
        return Err(Error::LengthMismatch { expected: a.n(), found: x.n() });
    }
    let r = |c: &StochasticChain| -> Result<f64> {
        let (num, den) = quotient_parts(c, &dist, p);
        if den <= 0.0 {
            Err(Error::ConstantConfiguration)
        } else {
            Ok(num / den)
        }
    };
    let (r_a, r_b, r_mix, r_dil, r_ab, r_bt) = (r(a)?, r(b)?, r(&mix)?, r(&dilute)?, r(&ab)?, r(&bt)?);
    let tol = |scale: f64| 1e-12 * scale.abs().max(1.0);
    let affinity_error = (r_mix - (lambda * r_a + (1.0 - lambda) * r_b)).abs();
    let dilution_error = (r_dil - lambda * r_a).abs();
    let root = |v: f64| v.powf(1.0 / p);
    let product_slack = root(r_a) + root(r_b) - root(r_ab);
    let tp = (t as f64).powf(p);
    let power_slack = tp * r_b - r_bt;
    Ok(CalculusReport {
        r_a,
        r_b,
        affinity_error,
        dilution_error,
        product_slack,
        power_slack,
        affinity_ok: affinity_error <= tol(r_mix),
        dilution_ok: dilution_error <= tol(r_dil),
        product_ok: product_slack >= -tol(root(r_a) + root(r_b)),
        power_ok: power_slack >= -tol(tp * r_b),
    })
}

/// Outcome of an implication check: premise false, or premise and conclusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Implication {
    Vacuous,
    Holds,
    Violated,
}

/// Report of [`pointwise_estimate_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseReport {
    /// `R(x; B², ‖·‖²_H)`.
    pub premise_value: f64,
    /// `1 − η²`.
    pub premise_threshold: f64,
    /// `R(x; B, ‖·‖²_X)`.
    pub conclusion_value: f64,
    /// `(1 − ηD)²/4`.
    pub conclusion_bound: f64,
    pub outcome: Implication,
}

/// Samples used to verify the norm sandwich.
const SANDWICH_SAMPLES: usize = 1000;

/// Pointwise transfer from a Hilbertian norm to `X`: if
/// `R(x; B², ‖·‖²_H) ≥ 1 − η²` then `R(x; B, ‖·‖²_X) ≥ (1 − ηD)²/4`,
/// provided `‖·‖_H ≤ ‖·‖_X ≤ D‖·‖_H`.
///
/// The sandwich is verified on the configuration's pairwise differences and
/// on random directions; a violation is an error rather than a vacuous pass.
pub fn pointwise_estimate_check(
    x: &Configuration,
    chain_b: &StochasticChain,
    space_x: &MetricSpace,
    h: &EllipsoidNorm,
    d: f64,
    eta: f64,
    seed: u64,
) -> Result<PointwiseReport> {
    chain_b.require_reversible()?;
    let dim = space_x.dim().ok_or_else(|| Error::UnsupportedSpace("X must be a normed space".into()))?;
    if h.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: h.dim() });
    }
    if space_x.theta() != 1.0 {
        return Err(Error::InvalidInput("the pointwise estimate is stated for norms, not snowflakes".into()));
    }
    if !(d >= 1.0) {
        return Err(Error::InvalidInput(format!("D must be at least 1, got {d}")));
    }
    if !(eta > 0.0 && eta * d < 1.0) {
        return Err(Error::InvalidInput(format!("eta must lie in (0, 1/D), got {eta}")));
    }
    let Configuration::Vectors(pts) = x else {
        return Err(Error::InvalidInput("the configuration must consist of vectors".into()));
    };
    let mut rng = rng_stream(seed, 0);
    let mut directions: Vec<Vec<f64>> = (0..SANDWICH_SAMPLES)
        .map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    for i in 0..pts.rows() {
        for j in (i + 1)..pts.rows() {
            directions.push(pts.row(i).iter().zip(pts.row(j)).map(|(a, b)| a - b).collect());
        }
    }
    for u in &directions {
        let (nh, nx) = (h.norm(u), space_x.norm(u)?);
        if nh > nx * (1.0 + 1e-9) || nx > d * nh * (1.0 + 1e-9) {
            return Err(Error::NormSandwichViolated(format!("||u||_H = {nh}, ||u||_X = {nx}, D = {d}")));
        }
    }
    let hspace = MetricSpace::ellipsoid(h.clone());
    let b2 = chain_b.compose(chain_b)?;
    let premise_value = rayleigh_quotient(&hspace, x, &b2, 2.0)?;
    let conclusion_value = rayleigh_quotient(space_x, x, chain_b, 2.0)?;
    let premise_threshold = 1.0 - eta * eta;
    let conclusion_bound = (1.0 - eta * d).powi(2) / 4.0;
    let outcome = if premise_value < premise_threshold {
        Implication::Vacuous
    } else if conclusion_value >= conclusion_bound * (1.0 - 1e-12) {
        Implication::Holds
    } else {
        Implication::Violated
    };
    Ok(PointwiseReport { premise_value, premise_threshold, conclusion_value, conclusion_bound, outcome })
}

/// Number of lazy steps needed so that the Hilbertian estimate transfers:
/// `⌈ln(2 D_X) / ln(2/(1+λ₂))⌉`, at least 1.
pub fn tstar(lambda2: f64, d_x: f64) -> Result<u64> {
    if !(-1.0..=1.0).contains(&lambda2) {
        return Err(Error::InvalidInput(format!("lambda2 must lie in [-1, 1], got {lambda2}")));
    }
    if lambda2 >= 1.0 - 1e-12 {
        return Err(Error::DegenerateGap(lambda2));
    }
    if !(d_x >= 1.0) {
        return Err(Error::InvalidInput(format!("D_X must be at least 1, got {d_x}")));
    }
    let denom = (2.0 / (1.0 + lambda2)).ln();
    let ratio = (2.0 * d_x).ln() / denom;
    // The ratio vanishes as λ₂ → −1; tiny guard against 2.0000000000001.
    Ok(((ratio - 1e-12).ceil() as u64).max(1))
}

/// `C·ln(D_X + 1)/(1 − λ₂)` from the second eigenvalue directly.
pub fn theorem4_bound_from_lambda2(lambda2: f64, d_x: f64, c: f64) -> Result<f64> {
    if lambda2 >= 1.0 - 1e-12 {
        return Err(Error::DegenerateGap(lambda2));
    }
    if !(d_x >= 1.0) {
        return Err(Error::InvalidInput(format!("D_X must be at least 1, got {d_x}")));
    }
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::InvalidInput(format!("the constant must be a nonnegative real, got {c}")));
    }
    Ok(c * (d_x + 1.0).ln() / (1.0 - lambda2))
}

/// Upper bound `C·ln(D_X + 1)/(1 − λ₂)` on `γ(A, ‖·‖²_X)`; `C` is a
/// calibrated constant, not a known value.
pub fn theorem4_upper_bound(chain: &StochasticChain, d_x: f64, c: f64) -> Result<f64> {
    let spec = spectral_data(chain)?;
    theorem4_bound_from_lambda2(spec.lambda2, d_x, c)
}

/// Report of [`abs_gap_sandwich_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    #[serde(with = "ext_f64")]
    pub gamma: f64,
    #[serde(with = "ext_f64")]
    pub gamma_plus_lazy: f64,
    pub upper_factor: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

/// `2γ(A, d^q) ≤ γ₊((A+I)/2, d^q) ≤ 2^{2q+1} γ(A, d^q)` with both sides
/// enumerated exactly (comparisons are tolerant to 1e-9 relative and treat
/// `∞ ≤ ∞` as true).
pub fn abs_gap_sandwich_check(chain: &StochasticChain, space: &MetricSpace, q: f64) -> Result<SandwichReport> {
    let gamma = gamma_bruteforce(chain, space, q)?.value;
    let lazy = lazy_power(chain, 1)?;
    let gamma_plus_lazy = gamma_plus_bruteforce(&lazy, space, q)?.value;
    let upper_factor = 2f64.powf(2.0 * q + 1.0);
    Ok(SandwichReport {
        gamma,
        gamma_plus_lazy,
        upper_factor,
        lower_ok: le_tol(2.0 * gamma, gamma_plus_lazy, 1e-9, 0.0),
        upper_ok: le_tol(gamma_plus_lazy, upper_factor * gamma, 1e-9, 0.0),
    })
}

/// Report of [`markov_type_ratio`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovTypeReport {
    #[serde(with = "ext_f64")]
    pub ratio: f64,
    /// `ratio ≤ 1 + 1e-9`; only asserted for `p = 2` (Markov type 2 with
    /// constant 1 in Hilbert space), `None` otherwise.
    pub bound_holds: Option<bool>,
}

/// `R(x; Aᵗ, ‖·‖^p) / (t·R(x; A, ‖·‖^p))` for a Hilbert-space configuration.
pub fn markov_type_ratio(chain: &StochasticChain, space: &MetricSpace, x: &Configuration, t: u32, p: f64) -> Result<MarkovTypeReport> {
    check_p(p)?;
    chain.require_reversible()?;
    if !space.is_hilbert() || space.theta() != 1.0 {
        return Err(Error::UnsupportedSpace("Markov type ratios are evaluated in Hilbert space".into()));
    }
    if t == 0 {
        return Err(Error::InvalidPower);
    }
    let r1 = rayleigh_quotient(space, x, chain, p)?;
    let rt = rayleigh_quotient(space, x, &chain.power(t)?, p)?;
    let ratio = if r1 > 0.0 {
        rt / (t as f64 * r1)
    } else if rt == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(MarkovTypeReport { ratio, bound_holds: (p == 2.0).then_some(ratio <= 1.0 + 1e-9) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::build_reversible_chain;

    fn two_point() -> MetricSpace {
        MetricSpace::finite(Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()).unwrap()
    }

    fn flip() -> StochasticChain {
        build_reversible_chain(&Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(), None).unwrap()
    }

    fn cycle4() -> StochasticChain {
        let a = Matrix::from_fn(4, 4, |i, j| if (i + 1) % 4 == j || (j + 1) % 4 == i { 0.5 } else { 0.0 });
        build_reversible_chain(&a, None).unwrap()
    }

    #[test]
    fn flip_chain_quotient() {
        let r = rayleigh_quotient(&two_point(), &Configuration::Indices(vec![0, 1]), &flip(), 1.0).unwrap();
        assert_eq!(r, 2.0);
        assert_eq!(
            rayleigh_quotient(&two_point(), &Configuration::Indices(vec![1, 1]), &flip(), 1.0),
            Err(Error::ConstantConfiguration)
        );
    }

    #[test]
    fn roots_of_unity_on_the_four_cycle() {
        let x = Configuration::Vectors(Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]]).unwrap());
        let r = rayleigh_quotient(&MetricSpace::lp(2.0, 2).unwrap(), &x, &cycle4(), 2.0).unwrap();
        assert!((r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exponent_range_is_enforced() {
        let x = Configuration::Indices(vec![0, 1]);
        assert!(matches!(rayleigh_quotient(&two_point(), &x, &flip(), 9.0), Err(Error::BadExponentRange(_))));
    }

    #[test]
    fn hilbert_exact_examples() {
        assert!((gamma_hilbert_exact(&cycle4()).unwrap().value - 1.0).abs() < 1e-12);
        let k3 = build_reversible_chain(&Matrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 0.5 }), None).unwrap();
        assert!((gamma_hilbert_exact(&k3).unwrap().value - 2.0 / 3.0).abs() < 1e-12);
        let id = build_reversible_chain(&Matrix::identity(3), Some(&[1.0 / 3.0; 3])).unwrap();
        let g = gamma_hilbert_exact(&id).unwrap();
        assert_eq!(g.value, f64::INFINITY);
        let Some(Witness::Single(w)) = g.witness else { panic!() };
        assert!(rayleigh_quotient(&MetricSpace::lp(2.0, 1).unwrap(), &w, &id, 2.0).is_ok());
    }

    #[test]
    fn brute_force_identity_is_infinite() {
        let id = build_reversible_chain(&Matrix::identity(2), Some(&[0.5, 0.5])).unwrap();
        assert_eq!(gamma_bruteforce(&id, &two_point(), 1.0).unwrap().value, f64::INFINITY);
        assert_eq!(gamma_plus_bruteforce(&id, &two_point(), 1.0).unwrap().value, f64::INFINITY);
    }

    #[test]
    fn uniform_chain_absolute_gap_is_one() {
        let b = build_reversible_chain(&Matrix::from_fn(2, 2, |_, _| 0.5), None).unwrap();
        assert_eq!(gamma_plus_bruteforce(&b, &two_point(), 1.0).unwrap().value, 1.0);
    }

    #[test]
    fn brute_force_caps() {
        let big = MetricSpace::finite(Matrix::from_fn(9, 9, |i, j| if i == j { 0.0 } else { 1.0 })).unwrap();
        let c = crate::markov::random_reversible_chain(3, 0.5, &mut rng_stream(1, 0)).unwrap();
        assert!(matches!(gamma_bruteforce(&c, &big, 1.0), Err(Error::InstanceTooLarge(_))));
    }

    #[test]
    fn sandwich_on_flip_chain() {
        let s = abs_gap_sandwich_check(&flip(), &two_point(), 1.0).unwrap();
        assert_eq!((s.gamma, s.gamma_plus_lazy), (0.5, 1.0));
        assert!(s.lower_ok && s.upper_ok);
    }

    #[test]
    fn tstar_examples() {
        assert_eq!(tstar(0.5, 2.0).unwrap(), 5);
        assert_eq!(tstar(0.0, 1.0).unwrap(), 1);
        assert_eq!(tstar(-1.0, 2.0).unwrap(), 1);
        assert!(matches!(tstar(1.0, 2.0), Err(Error::DegenerateGap(_))));
    }

    #[test]
    fn theorem4_examples() {
        assert!((theorem4_bound_from_lambda2(0.0, 1.0, 1.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(theorem4_bound_from_lambda2(1.0 - 1e-9, 1.0, 1.0).unwrap() > 1e8);
        assert!(matches!(theorem4_bound_from_lambda2(1.0, 1.0, 1.0), Err(Error::DegenerateGap(_))));
    }

    #[test]
    fn markov_type_on_eigenvector() {
        let c = cycle4();
        let lazy = lazy_power(&c, 1).unwrap();
        let Some(Witness::Single(x)) = gamma_hilbert_exact(&lazy).unwrap().witness else { panic!() };
        let line = MetricSpace::lp(2.0, 1).unwrap();
        for t in 1..5 {
            let r = markov_type_ratio(&lazy, &line, &x, t, 2.0).unwrap();
            let lambda: f64 = 0.5;
            let expected = (1.0 - lambda.powi(t as i32)) / (t as f64 * (1.0 - lambda));
            assert!((r.ratio - expected).abs() < 1e-12);
            assert_eq!(r.bound_holds, Some(true));
        }
    }

    #[test]
    fn heuristic_identity_is_infinite() {
        let id = build_reversible_chain(&Matrix::identity(3), Some(&[1.0 / 3.0; 3])).unwrap();
        let g = gamma_heuristic(&id, &MetricSpace::lp(2.0, 2).unwrap(), 2.0, 4, 1).unwrap();
        assert_eq!(g.value, f64::INFINITY);
    }
}

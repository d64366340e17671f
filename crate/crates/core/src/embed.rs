//! Average-distortion embeddings of finite metric spaces into Hilbert space.
//!
//! For a finite metric `d`, a probability vector `μ` and a snowflake
//! exponent `θ`, the quadratic average distortion of `f : X → ℓ₂` is
//!
//! ```text
//! D(f) = ‖f‖_Lip(d^θ) / ( Σ μ_i μ_j ‖f_i − f_j‖² / Σ μ_i μ_j d_ij^{2θ} )^{1/2}.
//! ```
//!
//! Minimizing `D` is a semidefinite program in the Gram matrix `G = F Fᵀ`:
//! maximize `Σ μ_i μ_j (G_ii + G_jj − 2G_ij)` subject to
//! `G_ii + G_jj − 2G_ij ≤ d_ij^{2θ}` and `G ⪰ 0`. It is solved here by a
//! primal–dual hybrid gradient method with exact PSD projections, with a
//! primal (feasible embedding) and a dual (weak-duality) certificate at every
//! check, so the reported distortion comes with a proven lower bound.
//!
//! The module also evaluates distortion of explicit maps and verifies both
//! directions of the duality between average distortion and nonlinear
//! spectral gaps at the level of witnesses.

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, sym_eigen_warm, Matrix};
use crate::markov::{spectral_data, StochasticChain};
use crate::num::ext_f64;
use crate::spaces::MetricSpace;
use serde::{Deserialize, Serialize};

/// Tolerance on `Σ μ = 1`.
pub const MU_SUM_TOL: f64 = 1e-9;
/// Largest metric accepted by the solver.
pub const MAX_EMBED_POINTS: usize = 256;

/// A Hilbert-space embedding given by its Gram matrix and a factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramEmbedding {
    #[serde(rename = "G")]
    pub g: Matrix,
    /// `n × r` with `factor·factorᵀ = G`; row `i` is the image of point `i`.
    pub factor: Matrix,
    pub mu: Vec<f64>,
    pub theta: f64,
    /// `max ‖f_i − f_j‖ / d_ij^θ`.
    pub lip: f64,
    /// `Σ μμ ‖f_i − f_j‖² / Σ μμ d^{2θ}`.
    pub spread: f64,
    #[serde(rename = "D_achieved", with = "ext_f64")]
    pub d_achieved: f64,
    /// Certified lower bound on the optimal quadratic average distortion.
    #[serde(rename = "D_lower_bound")]
    pub d_lower_bound: f64,
    /// `(upper − lower)/upper` for the normalized objective at exit.
    pub relative_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best certified objective after each check (nondecreasing).
    #[serde(skip)]
    pub objective_history: Vec<f64>,
}

/// Solver controls for [`average_embed_hilbert_with`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedOptions {
    pub max_iter: usize,
    /// Target relative duality gap.
    pub tol: f64,
    /// Iterations between certificate evaluations.
    pub check_every: usize,
    /// Give up if neither certificate improves (relatively) by `1e-10`
    /// within this many iterations.
    pub stall_window: usize,
    /// Gap above which an unconverged run is an error rather than a result.
    pub accept_gap: f64,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        EmbedOptions { max_iter: 20_000, tol: 1e-6, check_every: 10, stall_window: 1000, accept_gap: 1e-3 }
    }
}

fn validate_mu(mu: &[f64], n: usize) -> Result<()> {
    if mu.len() != n {
        return Err(Error::LengthMismatch { expected: n, found: mu.len() });
    }
    if let Some(i) = mu.iter().position(|m| !(*m > 0.0 && m.is_finite())) {
        return Err(Error::ZeroWeight(i));
    }
    let s: f64 = mu.iter().sum();
    if (s - 1.0).abs() > MU_SUM_TOL {
        return Err(Error::InvalidInput(format!("weights must sum to 1, got {s}")));
    }
    Ok(())
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("theta must lie in (0, 1], got {theta}")))
    }
}

/// Validate the metric (including positivity off the diagonal).
fn validate_metric(dist: &Matrix) -> Result<()> {
    MetricSpace::finite(dist.clone())?;
    let n = dist.rows();
    for i in 0..n {
        for j in 0..n {
            if i != j && dist[(i, j)] <= 0.0 {
                return Err(Error::NotAMetric(format!("distinct points {i} and {j} are at distance 0")));
            }
        }
    }
    Ok(())
}

/// Quadratic-average-distortion embedding with default options.
pub fn average_embed_hilbert(dist: &Matrix, mu: &[f64], theta: f64) -> Result<GramEmbedding> {
    average_embed_hilbert_with(dist, mu, theta, &EmbedOptions::default())
}

/// Pair data of the semidefinite program.
struct Sdp {
    n: usize,
    /// `(i, j, c_ij = d_ij^{2θ})` for `i < j`.
    pairs: Vec<(usize, usize, f64)>,
    /// Objective `2(diag μ − μμᵀ) / S`, `S = Σ_{i≠j} μ_i μ_j c_ij`.
    c_hat: Matrix,
    /// `Σ_{i<j} c_ij / n`: a bound on `tr G` for centered feasible `G`.
    trace_bound: f64,
}

impl Sdp {
    /// `K(G)_ij = (G_ii + G_jj − 2G_ij)/c_ij`.
    fn apply(&self, g: &Matrix) -> Vec<f64> {
        self.pairs.iter().map(|&(i, j, c)| (g[(i, i)] + g[(j, j)] - 2.0 * g[(i, j)]) / c).collect()
    }

    /// `K*(y) = Σ y_ij (e_i − e_j)(e_i − e_j)ᵀ / c_ij`.
    fn adjoint(&self, y: &[f64]) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for (&(i, j, c), &yk) in self.pairs.iter().zip(y) {
            let w = yk / c;
            m[(i, i)] += w;
            m[(j, j)] += w;
            m[(i, j)] -= w;
            m[(j, i)] -= w;
        }
        m
    }

    fn objective(&self, g: &Matrix) -> f64 {
        self.c_hat.as_slice().iter().zip(g.as_slice()).map(|(a, b)| a * b).sum()
    }

    /// Both certificates at a primal–dual point: the primal iterate
    /// rescaled to feasibility with its objective (when `K(G) ≠ 0`), and the
    /// weak-duality bound `Σy + T·λ_max(Ĉ − K*y)₊`.
    fn certificates(&self, g: &Matrix, y: &[f64]) -> Result<Certificates> {
        let kmax = self.apply(g).iter().cloned().fold(0.0, f64::max);
        let lower = (kmax > 0.0).then(|| (self.objective(g) / kmax, g.scaled(1.0 / kmax)));
        let slack = self.c_hat.lin_comb(1.0, &self.adjoint(y), -1.0)?;
        let lmax = sym_eigen(&slack)?.values[0].max(0.0);
        Ok(Certificates { lower, upper: y.iter().sum::<f64>() + self.trace_bound * lmax })
    }

    /// Operator norm of `W^{1/2}K` (Frobenius → Euclidean) by power iteration.
    fn norm_estimate(&self, w: &[f64]) -> f64 {
        let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
        let mut y: Vec<f64> = (0..self.pairs.len()).map(|k| 1.0 + (k % 7) as f64 * 0.1).collect();
        let mut est = 0.0;
        for _ in 0..200 {
            let scaled: Vec<f64> = y.iter().zip(&sw).map(|(a, b)| a * b).collect();
            let ky: Vec<f64> = self.apply(&self.adjoint(&scaled)).iter().zip(&sw).map(|(a, b)| a * b).collect();
            let nrm = ky.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            let next = (nrm / ny).sqrt();
            y = ky.iter().map(|v| v / nrm).collect();
            if (next - est).abs() <= 1e-6 * next {
                est = next;
                break;
            }
            est = next;
        }
        est * 1.05
    }
}

struct Certificates {
    /// Objective of the feasible rescaling and the rescaled matrix.
    lower: Option<(f64, Matrix)>,
    upper: f64,
}

impl Certificates {
    fn gap(&self) -> f64 {
        match &self.lower {
            Some((lb, _)) if *lb > 0.0 => ((self.upper - lb) / self.upper).max(0.0),
            _ => f64::INFINITY,
        }
    }
}

/// Exponent `α` of the per-constraint dual steps `∝ c_ij^{2α}`.
const DUAL_PRECONDITION_EXPONENT: f64 = 0.5;
/// Multiplier of the primal weight `1/T`.
const PRIMAL_WEIGHT_SCALE: f64 = 3.0;

/// Restart once the candidate gap falls below this fraction of the gap at
/// the previous restart.
const RESTART_FACTOR: f64 = 0.2;
/// Iterations before the first restart may happen.
const RESTART_MIN_LENGTH: usize = 50;

/// Project a symmetric matrix onto the PSD cone, reusing an eigenbasis.
fn project_psd(m: &Matrix, basis: &mut Option<Matrix>) -> Result<Matrix> {
    let e = match basis.as_ref() {
        Some(v) => sym_eigen_warm(m, v)?,
        None => sym_eigen(m)?,
    };
    let n = m.rows();
    let mut out = Matrix::zeros(n, n);
    for (k, &lam) in e.values.iter().enumerate() {
        if lam <= 0.0 {
            break;
        }
        for i in 0..n {
            let vi = lam * e.vectors[(i, k)];
            for j in 0..n {
                out[(i, j)] += vi * e.vectors[(j, k)];
            }
        }
    }
    *basis = Some(e.vectors);
    Ok(out.symmetrized())
}

/// Solve the embedding SDP by primal–dual hybrid gradient.
///
/// Iterates `G ← Π_{PSD}(G − τ(K*y − Ĉ))`, `y ← max(0, y + σ(K(2G⁺ − G) − 1))`
/// on the normalized constraints `K(G) ≤ 1`. Every `check_every` iterations
/// two certificates are formed: the primal iterate rescaled to exact
/// feasibility (a lower bound on the optimum and an actual embedding), and
/// the weak-duality bound `Σy + T·λ_max(Ĉ − K*y)₊` (an upper bound), at both
/// the current and the averaged iterates. The method restarts from the better
/// of the two whenever its gap has shrunk enough since the last restart, and
/// the dual steps are diagonally preconditioned per constraint. The run
/// stops when the relative gap reaches `tol`. Runs that stall or hit the
/// iteration cap are returned when the gap is below `accept_gap` (flagged
/// `converged = false`) and reported as [`Error::SolverStalled`] otherwise.
pub fn average_embed_hilbert_with(dist: &Matrix, mu: &[f64], theta: f64, opts: &EmbedOptions) -> Result<GramEmbedding> {
    validate_metric(dist)?;
    let n = dist.rows();
    validate_mu(mu, n)?;
    check_theta(theta)?;
    if n > MAX_EMBED_POINTS {
        return Err(Error::InstanceTooLarge(format!("embedding solver accepts at most {MAX_EMBED_POINTS} points, got {n}")));
    }
    if n == 1 {
        let g = Matrix::zeros(1, 1);
        return finish(dist, mu, theta, &g, f64::INFINITY, 0.0, 0, true, vec![]);
    }
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    let mut s = 0.0;
    let mut csum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let c = dist[(i, j)].powf(2.0 * theta);
            pairs.push((i, j, c));
            s += 2.0 * mu[i] * mu[j] * c;
            csum += c;
        }
    }
    let c_hat = Matrix::from_fn(n, n, |i, j| 2.0 * ((if i == j { mu[i] } else { 0.0 }) - mu[i] * mu[j]) / s);
    let sdp = Sdp { n, pairs, c_hat, trace_bound: csum / n as f64 };
    // Diagonal dual preconditioning: constraint (i, j) has row norm ∝ 1/c_ij,
    // so close pairs would dominate ‖K‖ and shrink every step; dual steps
    // ∝ c_ij^{2α} (relative to the mean) even this out.
    let cmean = sdp.pairs.iter().map(|p| p.2).sum::<f64>() / sdp.pairs.len() as f64;
    let w: Vec<f64> = sdp.pairs.iter().map(|p| (p.2 / cmean).powf(2.0 * DUAL_PRECONDITION_EXPONENT)).collect();
    let lk = sdp.norm_estimate(&w);
    // Primal weight: the optimal Gram matrix scales like the trace bound
    // while the normalized duals are O(1), so balance the steps by 1/T.
    let omega = PRIMAL_WEIGHT_SCALE / sdp.trace_bound;
    let tau = 0.95 / lk / omega;
    let sigma = 0.95 / lk * omega;

    let cmin = sdp.pairs.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
    let mut g = Matrix::from_fn(n, n, |i, j| 0.5 * cmin * (if i == j { 1.0 } else { 0.0 } - 1.0 / n as f64));
    let mut y = vec![0.0; sdp.pairs.len()];
    let mut basis: Option<Matrix> = None;

    let mut best_lb = f64::NEG_INFINITY;
    let mut best_g = g.clone();
    let mut best_ub = f64::INFINITY;
    let mut last_improvement = 0;
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    // Restart state: running sums of the iterates since the last restart and
    // the certificate gap at that restart.
    let mut sum_g = Matrix::zeros(n, n);
    let mut sum_y = vec![0.0; y.len()];
    let mut since_restart = 0usize;
    let mut restart_gap = f64::INFINITY;

    for k in 1..=opts.max_iter {
        iterations = k;
        let grad = sdp.adjoint(&y).lin_comb(1.0, &sdp.c_hat, -1.0)?;
        let step = g.lin_comb(1.0, &grad, -tau)?;
        if k % 100 == 0 {
            basis = None;
        }
        let g_next = project_psd(&step, &mut basis)?;
        let extrap = g_next.lin_comb(2.0, &g, -1.0)?;
        let kx = sdp.apply(&extrap);
        for ((yk, kv), wk) in y.iter_mut().zip(&kx).zip(&w) {
            *yk = (*yk + sigma * wk * (kv - 1.0)).max(0.0);
        }
        g = g_next;
        sum_g = sum_g.lin_comb(1.0, &g, 1.0)?;
        sum_y.iter_mut().zip(&y).for_each(|(s, v)| *s += v);
        since_restart += 1;

        if k % opts.check_every == 0 || k == opts.max_iter {
            let avg_g = sum_g.scaled(1.0 / since_restart as f64);
            let avg_y: Vec<f64> = sum_y.iter().map(|v| v / since_restart as f64).collect();
            let current = sdp.certificates(&g, &y)?;
            let averaged = sdp.certificates(&avg_g, &avg_y)?;
            let mut improved = false;
            for c in [&current, &averaged] {
                if let Some((lb, ref gs)) = c.lower {
                    if lb > best_lb * (1.0 + 1e-10) || best_lb == f64::NEG_INFINITY {
                        improved = true;
                    }
                    if lb > best_lb {
                        best_lb = lb;
                        best_g = gs.clone();
                    }
                }
                if c.upper < best_ub * (1.0 - 1e-10) {
                    improved = true;
                }
                best_ub = best_ub.min(c.upper);
            }
            history.push(best_lb);
            if improved {
                last_improvement = k;
            }
            if best_lb > 0.0 && best_ub - best_lb <= opts.tol * best_ub {
                converged = true;
                break;
            }
            if k - last_improvement >= opts.stall_window {
                break;
            }
            // Restart from the better of the current and averaged points once
            // its gap has shrunk enough since the previous restart.
            let (cand_gap, use_avg) = if averaged.gap() < current.gap() { (averaged.gap(), true) } else { (current.gap(), false) };
            if cand_gap <= RESTART_FACTOR * restart_gap || restart_gap.is_infinite() && since_restart >= RESTART_MIN_LENGTH {
                if use_avg {
                    g = avg_g;
                    y = avg_y;
                }
                restart_gap = cand_gap;
                sum_g = Matrix::zeros(n, n);
                sum_y.iter_mut().for_each(|v| *v = 0.0);
                since_restart = 0;
            }
        }
    }
    let gap = if best_lb > 0.0 { ((best_ub - best_lb) / best_ub).max(0.0) } else { f64::INFINITY };
    if !converged && !(gap <= opts.accept_gap) {
        return Err(Error::SolverStalled { iterations });
    }
    finish(dist, mu, theta, &best_g, best_ub, gap, iterations, converged, history)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    dist: &Matrix,
    mu: &[f64],
    theta: f64,
    g: &Matrix,
    upper: f64,
    relative_gap: f64,
    iterations: usize,
    converged: bool,
    objective_history: Vec<f64>,
) -> Result<GramEmbedding> {
    let n = g.rows();
    // Center (translation does not change distances), then factor.
    let mean_r: Vec<f64> = (0..n).map(|i| g.row(i).iter().sum::<f64>() / n as f64).collect();
    let mean = mean_r.iter().sum::<f64>() / n as f64;
    let centered = Matrix::from_fn(n, n, |i, j| g[(i, j)] - mean_r[i] - mean_r[j] + mean);
    let e = sym_eigen(&centered)?;
    let top = e.values.first().copied().unwrap_or(0.0).max(0.0);
    let keep: Vec<usize> = (0..n).filter(|&k| e.values[k] > 1e-12 * top && e.values[k] > 0.0).collect();
    let r = keep.len().max(1);
    let mut factor = Matrix::from_fn(n, r, |i, c| keep.get(c).map_or(0.0, |&k| e.vectors[(i, k)] * e.values[k].sqrt()));
    // Rescale so the Lipschitz constraint is tight exactly.
    let ev = evaluate_average_distortion(&factor, dist, mu, 2.0, theta)?;
    if ev.lip > 0.0 {
        factor = factor.scaled(1.0 / ev.lip);
    }
    let gram = factor.matmul(&factor.transpose())?;
    let ev = evaluate_average_distortion(&factor, dist, mu, 2.0, theta)?;
    let d_lower_bound = if upper.is_finite() && upper > 0.0 { 1.0 / upper.sqrt() } else { 1.0 };
    Ok(GramEmbedding {
        g: gram,
        factor,
        mu: mu.to_vec(),
        theta,
        lip: ev.lip,
        spread: ev.spread,
        d_achieved: ev.d,
        d_lower_bound: d_lower_bound.min(ev.d),
        relative_gap,
        iterations,
        converged,
        objective_history,
    })
}

/// Lipschitz constant, normalized spread and `q`-average distortion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub lip: f64,
    pub spread: f64,
    /// `lip / spread^{1/q}`; `∞` for a collapsing map.
    #[serde(rename = "D", with = "ext_f64")]
    pub d: f64,
}

/// Evaluate the `q`-average distortion of the map `i ↦ points[i] ∈ ℓ₂^r`
/// against `d^θ` and the measure `μ`.
pub fn evaluate_average_distortion(points: &Matrix, dist: &Matrix, mu: &[f64], q: f64, theta: f64) -> Result<DistortionReport> {
    let n = dist.rows();
    if !dist.is_square() || points.rows() != n || mu.len() != n {
        return Err(Error::SizeMismatch { expected: n, found: if points.rows() != n { points.rows() } else { mu.len() } });
    }
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::BadExponentRange(format!("q must be finite and at least 1, got {q}")));
    }
    check_theta(theta)?;
    let mut lip: f64 = 0.0;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let e = embedded_distance(points, i, j);
            let d = dist[(i, j)].powf(theta);
            if d > 0.0 {
                lip = lip.max(e / d);
            } else if e > 0.0 {
                lip = f64::INFINITY;
            }
            num += mu[i] * mu[j] * e.powf(q);
            den += mu[i] * mu[j] * d.powf(q);
        }
    }
    let spread = if den > 0.0 { num / den } else { 0.0 };
    let d = if spread > 0.0 { lip / spread.powf(1.0 / q) } else { f64::INFINITY };
    Ok(DistortionReport { lip, spread, d })
}

fn embedded_distance(points: &Matrix, i: usize, j: usize) -> f64 {
    points.row(i).iter().zip(points.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Report of [`duality_forward_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardReport {
    /// `Σ π_i π_j d_ij^{θq}`.
    pub lhs: f64,
    /// `D^q · γ(A, ‖·‖²) · Σ π_i a_ij d_ij^{θq}`.
    #[serde(with = "ext_f64")]
    pub rhs: f64,
    #[serde(with = "ext_f64")]
    pub slack: f64,
    /// `γ(A, ‖·‖²_{ℓ₂}) = 1/(1 − λ₂)`.
    #[serde(with = "ext_f64")]
    pub gamma_target: f64,
    /// Distortion of the embedding recomputed from its factor.
    #[serde(rename = "D")]
    pub d: f64,
    /// Poincaré inequality for the embedded points:
    /// `Σ ππ ‖f_i − f_j‖² ≤ γ Σ π a ‖f_i − f_j‖²`.
    pub product_ok: bool,
    /// The source-side inequality `Σ ππ d^{θq} ≤ D^q γ Σ π a d^{θq}`.
    pub gamma_source_le: bool,
}

/// Transfer a Hilbert-space Poincaré inequality through an embedding: the
/// chain `Σππ d^{θq} = Σππ‖f‖²/spread ≤ γ Σπa‖f‖²/spread ≤ D^q γ Σπa d^{θq}`
/// is evaluated term by term (`q = 2`).
pub fn duality_forward_check(embedding: &GramEmbedding, chain: &StochasticChain, dist: &Matrix, theta: f64, q: f64) -> Result<ForwardReport> {
    chain.require_reversible()?;
    if q != 2.0 {
        return Err(Error::UnsupportedSpace(format!("the forward check uses the exact Hilbert gap (q = 2), got q = {q}")));
    }
    let n = chain.n();
    if dist.rows() != n || embedding.factor.rows() != n {
        return Err(Error::SizeMismatch { expected: n, found: dist.rows().min(embedding.factor.rows()) });
    }
    if embedding.mu.iter().zip(chain.pi()).any(|(a, b)| (a - b).abs() > 1e-12) {
        return Err(Error::MismatchedStationary);
    }
    let gamma_target = spectral_data(chain)?.gamma_classical;
    let pi = chain.pi();
    let ev = evaluate_average_distortion(&embedding.factor, dist, pi, q, theta)?;
    let (mut lhs, mut edge_d, mut avg_f, mut edge_f) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let dq = dist[(i, j)].powf(theta * q);
            let fq = embedded_distance(&embedding.factor, i, j).powf(q);
            lhs += pi[i] * pi[j] * dq;
            edge_d += pi[i] * chain.a(i, j) * dq;
            avg_f += pi[i] * pi[j] * fq;
            edge_f += pi[i] * chain.a(i, j) * fq;
        }
    }
    let rhs = if gamma_target.is_infinite() { f64::INFINITY } else { ev.d.powf(q) * gamma_target * edge_d };
    let slack = rhs - lhs;
    let tol = 1e-9 * lhs.max(1.0);
    let product_ok = gamma_target.is_infinite() || avg_f <= gamma_target * edge_f + 1e-9 * avg_f.max(1.0);
    Ok(ForwardReport { lhs, rhs, slack, gamma_target, d: ev.d, product_ok, gamma_source_le: slack >= -tol })
}

/// Report of [`duality_witness_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    /// Lipschitz constant of the assembled map against `d^θ`.
    pub lip: f64,
    /// `Σ μμ ‖f_i − f_j‖^q`.
    pub average: f64,
    /// `Σ μμ d^{θq}`.
    pub target_average: f64,
    pub lipschitz_ok: bool,
    pub average_ok: bool,
}

/// `‖f(x_i) − f(x_j)‖^q` for the map assembled into `ℓ_q^m(ℓ₂^r)`.
fn assembled_power(weights: &[f64], configs: &[Matrix], i: usize, j: usize, q: f64) -> f64 {
    weights.iter().zip(configs).map(|(w, y)| w * embedded_distance(y, i, j).powf(q)).sum()
}

fn check_decomposition(configs: &[Matrix], n: usize) -> Result<()> {
    if configs.is_empty() {
        return Err(Error::EmptyDecomposition);
    }
    for y in configs {
        if y.rows() != n {
            return Err(Error::SizeMismatch { expected: n, found: y.rows() });
        }
        if (0..n).all(|i| embedded_distance(y, 0, i) == 0.0) {
            return Err(Error::ConstantConfiguration);
        }
    }
    Ok(())
}

/// Weights `w_k = μ_k Σ ππ d^{θq} / Σ ππ ‖y_r(k) − y_s(k)‖^q` that make the
/// assembled map's average exactly `Σ ππ d^{θq}` for mixing probabilities
/// `mix` (summing to 1).
pub fn assemble_weights(mix: &[f64], configs: &[Matrix], dist: &Matrix, pi: &[f64], q: f64, theta: f64) -> Result<Vec<f64>> {
    let n = dist.rows();
    check_decomposition(configs, n)?;
    if mix.len() != configs.len() {
        return Err(Error::LengthMismatch { expected: configs.len(), found: mix.len() });
    }
    validate_mu(pi, n)?;
    let mut target = 0.0;
    for i in 0..n {
        for j in 0..n {
            target += pi[i] * pi[j] * dist[(i, j)].powf(theta * q);
        }
    }
    Ok(mix
        .iter()
        .zip(configs)
        .map(|(m, y)| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += pi[i] * pi[j] * embedded_distance(y, i, j).powf(q);
                }
            }
            m * target / s
        })
        .collect())
}

/// Verify the map `f(x_i) = (w_k^{1/q} y_i(k))_k` into `ℓ_q^m(ℓ₂^r)`:
/// `‖f‖_Lip ≤ D + ε` against `d^θ`, and `Σ μμ ‖f_i − f_j‖^q ≥ Σ μμ d^{θq}`.
#[allow(clippy::too_many_arguments)]
pub fn duality_witness_check(
    weights: &[f64],
    configs: &[Matrix],
    dist: &Matrix,
    mu: &[f64],
    q: f64,
    theta: f64,
    d: f64,
    eps: f64,
) -> Result<WitnessReport> {
    let n = dist.rows();
    check_decomposition(configs, n)?;
    if weights.len() != configs.len() {
        return Err(Error::LengthMismatch { expected: configs.len(), found: weights.len() });
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidInput(format!("decomposition weights must be positive, got {w}")));
    }
    validate_mu(mu, n)?;
    check_theta(theta)?;
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::BadExponentRange(format!("q must be finite and at least 1, got {q}")));
    }
    let mut lip: f64 = 0.0;
    let (mut average, mut target_average) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let fq = assembled_power(weights, configs, i, j, q);
            let dt = dist[(i, j)].powf(theta);
            lip = if dt > 0.0 { lip.max(fq.powf(1.0 / q) / dt) } else if fq > 0.0 { f64::INFINITY } else { lip };
            average += mu[i] * mu[j] * fq;
            target_average += mu[i] * mu[j] * dt.powf(q);
        }
    }
    Ok(WitnessReport {
        lip,
        average,
        target_average,
        lipschitz_ok: lip <= (d + eps) * (1.0 + 1e-12),
        average_ok: average >= target_average * (1.0 - 1e-12),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{build_reversible_chain, lazy_power};

    fn equilateral(n: usize) -> Matrix {
        Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 })
    }

    fn cycle_metric(n: usize) -> Matrix {
        Matrix::from_fn(n, n, |i, j| {
            let k = i.abs_diff(j);
            k.min(n - k) as f64
        })
    }

    #[test]
    fn two_points_embed_isometrically() {
        let e = average_embed_hilbert(&equilateral(2), &[0.5, 0.5], 0.5).unwrap();
        assert!((e.d_achieved - 1.0).abs() < 1e-4, "{}", e.d_achieved);
        assert!((e.lip - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equilateral_sets_are_simplices() {
        for n in [3, 5, 8] {
            let e = average_embed_hilbert(&equilateral(n), &vec![1.0 / n as f64; n], 0.7).unwrap();
            assert!(e.d_achieved <= 1.0 + 1e-4, "n = {n}: {}", e.d_achieved);
            assert!(e.d_lower_bound <= e.d_achieved);
        }
    }

    #[test]
    fn four_cycle_square() {
        let e = average_embed_hilbert(&cycle_metric(4), &[0.25; 4], 0.5).unwrap();
        assert!((e.d_achieved - 1.0).abs() < 1e-4, "{}", e.d_achieved);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(average_embed_hilbert(&equilateral(2), &[1.0, 0.0], 0.5), Err(Error::ZeroWeight(1))));
        let z = Matrix::zeros(2, 2);
        assert!(matches!(average_embed_hilbert(&z, &[0.5, 0.5], 0.5), Err(Error::NotAMetric(_))));
    }

    #[test]
    fn collapse_has_infinite_distortion() {
        let r = evaluate_average_distortion(&Matrix::zeros(3, 2), &equilateral(3), &[1.0 / 3.0; 3], 2.0, 1.0).unwrap();
        assert_eq!(r.spread, 0.0);
        assert_eq!(r.d, f64::INFINITY);
    }

    #[test]
    fn forward_check_on_lazy_cycle() {
        let e = average_embed_hilbert(&cycle_metric(4), &[0.25; 4], 0.5).unwrap();
        let a = Matrix::from_fn(4, 4, |i, j| if i.abs_diff(j) % 2 == 1 { 0.5 } else { 0.0 });
        let lazy = lazy_power(&build_reversible_chain(&a, None).unwrap(), 1).unwrap();
        let r = duality_forward_check(&e, &lazy, &cycle_metric(4), 0.5, 2.0).unwrap();
        assert!(r.gamma_source_le && r.product_ok, "{r:?}");
    }

    #[test]
    fn witness_on_simplex_and_negative_control() {
        let s = 0.5f64.sqrt();
        let y = Matrix::from_rows(&[vec![s, 0.0, 0.0], vec![0.0, s, 0.0], vec![0.0, 0.0, s]]).unwrap();
        let mu = [1.0 / 3.0; 3];
        let r = duality_witness_check(&[1.0], std::slice::from_ref(&y), &equilateral(3), &mu, 2.0, 1.0, 1.0, 0.0).unwrap();
        assert!(r.lipschitz_ok && r.average_ok, "{r:?}");
        let half = duality_witness_check(&[1.0], &[y.scaled(0.5)], &equilateral(3), &mu, 2.0, 1.0, 1.0, 0.0).unwrap();
        assert!(!half.average_ok);
        assert_eq!(duality_witness_check(&[], &[], &equilateral(3), &mu, 2.0, 1.0, 1.0, 0.0), Err(Error::EmptyDecomposition));
    }
}

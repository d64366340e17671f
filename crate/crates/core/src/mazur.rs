//! Vector-valued Mazur maps and the extrapolation of Poincaré inequalities.
//!
//! For a finite measure space `(Ω, μ)` and a normed space `X`, the Mazur map
//! `M_{p,q} : L_p(μ; X) → L_q(μ; X)` acts pointwise by
//! `f(ω) ↦ f(ω)·‖f(ω)‖^{p/q − 1}` (zero is fixed). It transfers norms
//! exactly, `‖M_{p,q} f‖_q^q = ‖f‖_p^p`, inverts to `M_{q,p}`, and is
//! `min(p/q, 1)`-Hölder on the unit ball; these are the ingredients for
//! comparing `γ(B, ‖·‖^p)` with `γ(B, ‖·‖^q)`.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::markov::StochasticChain;
use crate::num::ext_f64;
use crate::rayleigh::{gamma_bruteforce, gamma_heuristic_with, gamma_hilbert_exact, GapEstimate, GapKind, HeuristicOptions};
use crate::spaces::{MetricSpace, SpaceKind};
use serde::{Deserialize, Serialize};

/// Tolerance on the total mass of the weights.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A function on a finite probability space with values in `ℝ^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WvfJson", into = "WvfJson")]
pub struct WeightedVectorFunction {
    weights: Vec<f64>,
    values: Matrix,
}

#[derive(Serialize, Deserialize)]
struct WvfJson {
    weights: Vec<f64>,
    values: Matrix,
}

impl TryFrom<WvfJson> for WeightedVectorFunction {
    type Error = Error;
    fn try_from(j: WvfJson) -> Result<Self> {
        WeightedVectorFunction::new(j.weights, j.values)
    }
}

impl From<WeightedVectorFunction> for WvfJson {
    fn from(f: WeightedVectorFunction) -> Self {
        WvfJson { weights: f.weights, values: f.values }
    }
}

impl WeightedVectorFunction {
    /// Validate a probability vector and one value row per atom.
    pub fn new(weights: Vec<f64>, values: Matrix) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidInput("a measure needs at least one atom".into()));
        }
        if values.rows() != weights.len() {
            return Err(Error::LengthMismatch { expected: weights.len(), found: values.rows() });
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidInput(format!("weights must be nonnegative, got {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidInput(format!("weights must sum to 1, got {total}")));
        }
        if values.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("values must be finite".into()));
        }
        Ok(WeightedVectorFunction { weights, values })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    /// Number of atoms.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    /// `‖f‖_{L_p(μ; X)}`.
    pub fn lp_norm(&self, space: &MetricSpace, p: f64) -> Result<f64> {
        Ok(self.lp_power(space, p)?.powf(1.0 / p))
    }

    /// `‖f‖_{L_p(μ; X)}^p`.
    pub fn lp_power(&self, space: &MetricSpace, p: f64) -> Result<f64> {
        check_space(space, self.dim())?;
        let mut s = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            s += w * space.norm(self.values.row(i))?.powf(p);
        }
        Ok(s)
    }

    /// `f − g` on the same measure.
    pub fn difference(&self, other: &WeightedVectorFunction) -> Result<WeightedVectorFunction> {
        self.same_measure(other)?;
        Ok(WeightedVectorFunction { weights: self.weights.clone(), values: self.values.lin_comb(1.0, &other.values, -1.0)? })
    }

    /// `a f + b g` on the same measure.
    pub fn combine(&self, a: f64, other: &WeightedVectorFunction, b: f64) -> Result<WeightedVectorFunction> {
        self.same_measure(other)?;
        Ok(WeightedVectorFunction { weights: self.weights.clone(), values: self.values.lin_comb(a, &other.values, b)? })
    }

    fn same_measure(&self, other: &WeightedVectorFunction) -> Result<()> {
        if self.weights != other.weights {
            return Err(Error::InvalidInput("functions live on different measures".into()));
        }
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::BadExponentRange(format!("exponents must be finite and at least 1, got {p}")))
    }
}

fn check_space(space: &MetricSpace, dim: usize) -> Result<()> {
    match space.dim() {
        Some(d) if d == dim => Ok(()),
        Some(d) => Err(Error::DimensionMismatch { expected: d, found: dim }),
        None => Err(Error::UnsupportedSpace("Mazur maps need a normed space".into())),
    }
}

/// `M_{p,q} f`, pointwise `v ↦ v·‖v‖^{p/q − 1}` with `0 ↦ 0`.
pub fn mazur_map(f: &WeightedVectorFunction, space: &MetricSpace, p: f64, q: f64) -> Result<WeightedVectorFunction> {
    check_exponent(p)?;
    check_exponent(q)?;
    check_space(space, f.dim())?;
    if p == q {
        return Ok(f.clone());
    }
    let e = p / q - 1.0;
    let mut values = f.values.clone();
    for i in 0..values.rows() {
        let nv = space.norm(values.row(i))?;
        let s = if nv > 0.0 { nv.powf(e) } else { 0.0 };
        values.row_mut(i).iter_mut().for_each(|v| *v *= s);
    }
    Ok(WeightedVectorFunction { weights: f.weights.clone(), values })
}

/// Report of [`mazur_roundtrip_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripReport {
    /// Largest componentwise `|M_{q,p}(M_{p,q} f) − f|`.
    pub max_error: f64,
    /// `|‖M_{p,q} f‖_q^q − ‖f‖_p^p|`.
    pub norm_transfer_error: f64,
    /// Both errors within `1e-12` (relative to the magnitudes, floored at 1).
    pub ok: bool,
}

/// Apply `M_{p,q}` then `M_{q,p}` and measure the defect, plus the exact
/// norm transfer.
pub fn mazur_roundtrip_check(f: &WeightedVectorFunction, space: &MetricSpace, p: f64, q: f64) -> Result<RoundtripReport> {
    let g = mazur_map(f, space, p, q)?;
    let back = mazur_map(&g, space, q, p)?;
    let max_error = back.values.max_abs_diff(&f.values);
    let scale = f.values.as_slice().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let (lhs, rhs) = (g.lp_power(space, q)?, f.lp_power(space, p)?);
    let norm_transfer_error = (lhs - rhs).abs();
    let ok = max_error <= 1e-12 * scale && norm_transfer_error <= 1e-12 * rhs.max(1.0);
    Ok(RoundtripReport { max_error, norm_transfer_error, ok })
}

/// How the pair `(f, g)` is moved towards coincidence across the scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ladder {
    /// `(f, f + s(g − f))`: shrink the difference at a fixed base point.
    Perturb,
    /// `(s f, s g)`: shrink both functions towards zero, where the Mazur map
    /// is least regular.
    Dilate,
}

/// `count` scales `ratio^1, …, ratio^count`.
pub fn geometric_scales(count: usize, ratio: f64) -> Vec<f64> {
    (1..=count as i32).map(|k| ratio.powi(k)).collect()
}

/// One rung of the Hölder ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderPoint {
    pub scale: f64,
    /// `‖f − g‖_{L_p}`.
    pub input_distance: f64,
    /// `‖M_{p,q} f − M_{p,q} g‖_{L_q}`.
    pub output_distance: f64,
    /// `output_distance / input_distance^{min(p/q, 1)}`.
    pub ratio: f64,
}

/// Report of [`mazur_holder_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    /// `min(p/q, 1)`.
    pub target_exponent: f64,
    /// Least-squares slope of `log output` against `log input`.
    #[serde(with = "ext_f64::option")]
    pub fitted_exponent: Option<f64>,
    pub per_scale: Vec<HolderPoint>,
    /// `fitted ≥ target − 0.1` (true when nothing could be fitted).
    pub slope_ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Slack allowed below the Hölder exponent in the fitted slope.
pub const SLOPE_SLACK: f64 = 0.1;

/// Empirical Hölder exponent of `M_{p,q}` along a ladder of pairs.
///
/// Every pair on the ladder must lie in the unit ball of `L_p(μ; X)`
/// (otherwise [`Error::NotNormalized`]). Rungs with `f = g` are skipped; if
/// none remain the report carries an empty-scale note.
pub fn mazur_holder_check(
    f: &WeightedVectorFunction,
    g: &WeightedVectorFunction,
    space: &MetricSpace,
    p: f64,
    q: f64,
    scales: &[f64],
    ladder: Ladder,
) -> Result<HolderReport> {
    check_exponent(p)?;
    check_exponent(q)?;
    f.same_measure(g)?;
    let target_exponent = (p / q).min(1.0);
    let mut per_scale = Vec::new();
    for &s in scales {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidInput(format!("scales must be positive, got {s}")));
        }
        let (a, b) = match ladder {
            Ladder::Perturb => (f.clone(), f.combine(1.0 - s, g, s)?),
            Ladder::Dilate => (f.combine(s, g, 0.0)?, f.combine(0.0, g, s)?),
        };
        for h in [&a, &b] {
            let nrm = h.lp_norm(space, p)?;
            if nrm > 1.0 + 1e-12 {
                return Err(Error::NotNormalized(nrm));
            }
        }
        let input_distance = a.difference(&b)?.lp_norm(space, p)?;
        if input_distance == 0.0 {
            continue;
        }
        let output_distance = mazur_map(&a, space, p, q)?.difference(&mazur_map(&b, space, p, q)?)?.lp_norm(space, q)?;
        per_scale.push(HolderPoint { scale: s, input_distance, output_distance, ratio: output_distance / input_distance.powf(target_exponent) });
    }
    let pts: Vec<(f64, f64)> = per_scale
        .iter()
        .filter(|h| h.output_distance > 0.0)
        .map(|h| (h.input_distance.ln(), h.output_distance.ln()))
        .collect();
    let fitted_exponent = least_squares_slope(&pts);
    let note = if per_scale.is_empty() {
        Some("no scale with f != g; nothing to fit".to_string())
    } else if fitted_exponent.is_none() {
        Some("fewer than two distinct input distances; slope not fitted".to_string())
    } else {
        None
    };
    let slope_ok = fitted_exponent.is_none_or(|e| e >= target_exponent - SLOPE_SLACK);
    Ok(HolderReport { target_exponent, fitted_exponent, per_scale, slope_ok, note })
}

/// Ordinary least-squares slope through `(x, y)` points.
pub fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 1e-24 * n).then(|| sxy / sxx)
}

/// Report of [`extrapolation_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationReport {
    pub gamma_p: GapEstimate,
    pub gamma_q: GapEstimate,
    /// `γ_p / γ_q^{p/q}` (bounded below by an unspecified `c(p, q)`).
    pub left_ratio: f64,
    /// `γ_p / γ_q` (bounded above by an unspecified `C(p, q)`).
    pub right_ratio: f64,
    /// Both ratios finite and positive — the only assertion made.
    pub finite_positive: bool,
}

/// Compute `γ(B, d^p)` by the strongest method available: enumeration for
/// finite spaces, the spectrum for squared Hilbertian norms, local search
/// otherwise.
pub fn gap_auto(chain: &StochasticChain, space: &MetricSpace, p: f64, seed: u64, opts: &HeuristicOptions) -> Result<GapEstimate> {
    let unavailable = |e: Error| match e {
        Error::InstanceTooLarge(m) | Error::UnsupportedSpace(m) => Error::GapUnavailable(m),
        other => other,
    };
    match space.kind() {
        SpaceKind::Finite { .. } => gamma_bruteforce(chain, space, p).map_err(unavailable),
        _ if space.is_hilbert() && (p * space.theta() - 2.0).abs() < 1e-15 => {
            let mut g = gamma_hilbert_exact(chain)?;
            g.p = p;
            g.witness = None;
            Ok(g)
        }
        _ => gamma_heuristic_with(chain, space, p, seed, opts).map_err(unavailable),
    }
}

/// Compare `γ(B, ‖·‖^p)` and `γ(B, ‖·‖^q)` for `1 ≤ p ≤ q`.
///
/// The constants in the comparison are not quantified, so only the ratios
/// and their finiteness are reported. Infinite gaps (e.g. reducible-looking
/// chains such as the identity) make the ratios meaningless and are reported
/// as [`Error::GapUnavailable`].
pub fn extrapolation_check(
    chain: &StochasticChain,
    space: &MetricSpace,
    p: f64,
    q: f64,
    seed: u64,
    opts: &HeuristicOptions,
) -> Result<ExtrapolationReport> {
    check_exponent(p)?;
    check_exponent(q)?;
    if p > q {
        return Err(Error::BadExponentRange(format!("need p <= q, got p = {p}, q = {q}")));
    }
    let gamma_p = gap_auto(chain, space, p, seed, opts)?;
    let gamma_q = gap_auto(chain, space, q, seed, opts)?;
    if !(gamma_p.value.is_finite() && gamma_q.value.is_finite()) {
        return Err(Error::GapUnavailable("an infinite gap makes the extrapolation ratios undefined".into()));
    }
    let left_ratio = gamma_p.value / gamma_q.value.powf(p / q);
    let right_ratio = gamma_p.value / gamma_q.value;
    let finite_positive = [left_ratio, right_ratio].iter().all(|r| r.is_finite() && *r > 0.0);
    Ok(ExtrapolationReport { gamma_p, gamma_q, left_ratio, right_ratio, finite_positive })
}

/// Whether a gap estimate was computed exactly.
pub fn is_exact(kind: GapKind) -> bool {
    matches!(kind, GapKind::ExactHilbert | GapKind::BruteForce)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::build_reversible_chain;

    fn scalar(values: &[f64], weights: &[f64]) -> WeightedVectorFunction {
        WeightedVectorFunction::new(weights.to_vec(), Matrix::from_vec(values.len(), 1, values.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn single_atom_square_root() {
        let f = scalar(&[4.0], &[1.0]);
        let g = mazur_map(&f, &MetricSpace::lp(2.0, 1).unwrap(), 1.0, 2.0).unwrap();
        assert_eq!(g.values()[(0, 0)], 2.0);
    }

    #[test]
    fn unit_vectors_are_fixed() {
        let f = WeightedVectorFunction::new(vec![0.5, 0.5], Matrix::identity(2)).unwrap();
        let g = mazur_map(&f, &MetricSpace::lp(2.0, 2).unwrap(), 2.0, 4.0).unwrap();
        assert_eq!(g, f);
    }

    #[test]
    fn zero_is_preserved() {
        let f = scalar(&[0.0, 3.0], &[0.5, 0.5]);
        let r = mazur_roundtrip_check(&f, &MetricSpace::lp(2.0, 1).unwrap(), 1.5, 3.0).unwrap();
        assert!(r.ok);
        let g = mazur_map(&f, &MetricSpace::lp(2.0, 1).unwrap(), 1.5, 3.0).unwrap();
        assert_eq!(g.values()[(0, 0)], 0.0);
    }

    #[test]
    fn weights_are_validated() {
        assert!(WeightedVectorFunction::new(vec![0.5, 0.6], Matrix::zeros(2, 1)).is_err());
        assert!(WeightedVectorFunction::new(vec![1.0], Matrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn sign_flip_has_half_slope() {
        let f = scalar(&[1.0], &[1.0]);
        let g = scalar(&[-1.0], &[1.0]);
        let r = mazur_holder_check(&f, &g, &MetricSpace::lp(2.0, 1).unwrap(), 1.0, 2.0, &geometric_scales(20, 0.5), Ladder::Dilate).unwrap();
        assert!((r.fitted_exponent.unwrap() - 0.5).abs() < 1e-9);
        assert!(r.slope_ok);
    }

    #[test]
    fn equal_functions_give_a_note() {
        let f = scalar(&[0.5], &[1.0]);
        let r = mazur_holder_check(&f, &f, &MetricSpace::lp(2.0, 1).unwrap(), 1.0, 2.0, &[0.5, 0.25], Ladder::Perturb).unwrap();
        assert!(r.per_scale.is_empty() && r.note.is_some() && r.slope_ok);
    }

    #[test]
    fn unnormalized_input_is_rejected() {
        let f = scalar(&[2.0], &[1.0]);
        let g = scalar(&[1.0], &[1.0]);
        assert!(matches!(
            mazur_holder_check(&f, &g, &MetricSpace::lp(2.0, 1).unwrap(), 1.0, 2.0, &[0.5], Ladder::Perturb),
            Err(Error::NotNormalized(_))
        ));
    }

    #[test]
    fn flip_chain_extrapolation() {
        let flip = build_reversible_chain(&Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(), None).unwrap();
        let two = MetricSpace::finite(Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()).unwrap();
        let r = extrapolation_check(&flip, &two, 1.0, 2.0, 0, &HeuristicOptions::default()).unwrap();
        assert_eq!((r.gamma_p.value, r.gamma_q.value), (0.5, 0.5));
        assert!((r.left_ratio - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(r.right_ratio, 1.0);
    }
}

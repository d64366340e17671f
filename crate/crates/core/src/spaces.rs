//! Metric and normed spaces, snowflakes, configurations, product metrics
//! and sampled two-point smoothness/convexity checks.
//!
//! A [`MetricSpace`] is either a finite metric given by its distance matrix
//! or a finite-dimensional normed space (ℓ_p, a symmetric polytope gauge or
//! an ellipsoidal norm), in every case viewed through a snowflake exponent
//! `θ ∈ (0, 1]`: the distance reported is `base^θ`.

use crate::error::{Error, Result};
use crate::john::EllipsoidNorm;
use crate::linalg::{dot, Matrix};
use crate::lp::solve_standard_form;
use crate::num::{ext_f64, rng_stream};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Tolerance of the triangle-inequality validation of finite metrics.
pub const TRIANGLE_TOL: f64 = 1e-9;
/// Largest finite metric validated (the check is O(n³)).
pub const MAX_FINITE_POINTS: usize = 512;
/// Largest ambient dimension of a polytope norm.
pub const MAX_POLYTOPE_DIM: usize = 16;

/// The underlying space, before snowflaking.
#[derive(Debug, Clone, PartialEq)]
pub enum SpaceKind {
    /// A finite metric on `{0, …, n−1}`.
    Finite { dist: Matrix },
    /// `ℓ_p^dim`, `p ∈ [1, ∞]`.
    Lp { p: f64, dim: usize },
    /// The norm whose unit ball is `conv(vertices)`, origin-symmetric.
    Polytope { vertices: Vec<Vec<f64>>, dim: usize },
    /// A Hilbertian norm `sqrt(yᵀQy)`.
    Ellipsoid(EllipsoidNorm),
}

/// A metric space together with its snowflake exponent θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceJson", into = "SpaceJson")]
pub struct MetricSpace {
    kind: SpaceKind,
    theta: f64,
}

/// A point of a [`MetricSpace`].
#[derive(Debug, Clone, PartialEq)]
pub enum Point<'a> {
    Index(usize),
    Vector(&'a [f64]),
}

impl MetricSpace {
    /// A finite metric; validated for symmetry, zero diagonal and the
    /// triangle inequality (to [`TRIANGLE_TOL`]).
    pub fn finite(dist: Matrix) -> Result<Self> {
        validate_metric(&dist)?;
        Ok(MetricSpace { kind: SpaceKind::Finite { dist }, theta: 1.0 })
    }

    /// `ℓ_p^dim`; use `f64::INFINITY` for the max norm.
    pub fn lp(p: f64, dim: usize) -> Result<Self> {
        if !(p >= 1.0) {
            return Err(Error::BadExponentRange(format!("l_p needs p in [1, inf], got {p}")));
        }
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        Ok(MetricSpace { kind: SpaceKind::Lp { p, dim }, theta: 1.0 })
    }

    /// The norm with unit ball `conv(±vertices)`. Negations are added and
    /// duplicates removed, so the ball is always origin-symmetric; the
    /// vertices must span `ℝ^d`.
    pub fn polytope(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let vertices = symmetrize_points(&vertices)?;
        let dim = vertices[0].len();
        if dim > MAX_POLYTOPE_DIM {
            return Err(Error::InstanceTooLarge(format!("polytope norms are capped at d = {MAX_POLYTOPE_DIM}")));
        }
        if rank(&vertices) < dim {
            return Err(Error::DegenerateSpan(dim));
        }
        Ok(MetricSpace { kind: SpaceKind::Polytope { vertices, dim }, theta: 1.0 })
    }

    /// An ellipsoidal (Hilbertian) norm.
    pub fn ellipsoid(e: EllipsoidNorm) -> Self {
        MetricSpace { kind: SpaceKind::Ellipsoid(e), theta: 1.0 }
    }

    /// The same space with snowflake exponent `theta ∈ (0, 1]`.
    pub fn with_theta(mut self, theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::InvalidInput(format!("snowflake exponent must lie in (0,1], got {theta}")));
        }
        self.theta = theta;
        Ok(self)
    }

    pub fn kind(&self) -> &SpaceKind {
        &self.kind
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn is_normed(&self) -> bool {
        !matches!(self.kind, SpaceKind::Finite { .. })
    }

    /// Euclidean `ℓ₂` or an ellipsoidal norm.
    pub fn is_hilbert(&self) -> bool {
        match &self.kind {
            SpaceKind::Lp { p, .. } => *p == 2.0,
            SpaceKind::Ellipsoid(_) => true,
            _ => false,
        }
    }

    /// Ambient dimension of a normed space.
    pub fn dim(&self) -> Option<usize> {
        match &self.kind {
            SpaceKind::Finite { .. } => None,
            SpaceKind::Lp { dim, .. } | SpaceKind::Polytope { dim, .. } => Some(*dim),
            SpaceKind::Ellipsoid(e) => Some(e.dim()),
        }
    }

    /// Number of points of a finite space.
    pub fn size(&self) -> Option<usize> {
        match &self.kind {
            SpaceKind::Finite { dist } => Some(dist.rows()),
            _ => None,
        }
    }

    fn require_normed(&self) -> Result<usize> {
        self.dim().ok_or_else(|| Error::UnsupportedSpace("operation requires a normed space".into()))
    }

    /// The base norm of `v` (no snowflake).
    pub fn norm(&self, v: &[f64]) -> Result<f64> {
        let d = self.require_normed()?;
        if v.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: v.len() });
        }
        Ok(match &self.kind {
            SpaceKind::Lp { p, .. } => lp_norm(v, *p),
            SpaceKind::Ellipsoid(e) => e.norm(v),
            SpaceKind::Polytope { vertices, .. } => polytope_gauge(vertices, v)?.0,
            SpaceKind::Finite { .. } => unreachable!(),
        })
    }

    /// The base norm of `v` together with a subgradient of the norm at `v`.
    ///
    /// For ℓ₁ and ℓ∞ ties are broken toward the first maximizing coordinate;
    /// at `v = 0` the zero vector is returned.
    pub fn norm_with_subgradient(&self, v: &[f64]) -> Result<(f64, Vec<f64>)> {
        let d = self.require_normed()?;
        if v.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: v.len() });
        }
        let zero = vec![0.0; d];
        Ok(match &self.kind {
            SpaceKind::Lp { p, .. } => {
                let nv = lp_norm(v, *p);
                if nv == 0.0 {
                    return Ok((0.0, zero));
                }
                let g = if *p == 1.0 {
                    v.iter().map(|x| if *x > 0.0 { 1.0 } else if *x < 0.0 { -1.0 } else { 0.0 }).collect()
                } else if p.is_infinite() {
                    let k = first_argmax_abs(v);
                    let mut g = zero;
                    g[k] = v[k].signum();
                    g
                } else {
                    v.iter().map(|x| x.signum() * (x.abs() / nv).powf(p - 1.0)).collect()
                };
                (nv, g)
            }
            SpaceKind::Ellipsoid(e) => {
                let qv = e.q().matvec(v)?;
                let nv = dot(v, &qv).max(0.0).sqrt();
                if nv == 0.0 {
                    return Ok((0.0, zero));
                }
                (nv, qv.iter().map(|x| x / nv).collect())
            }
            SpaceKind::Polytope { vertices, .. } => polytope_gauge(vertices, v)?,
            SpaceKind::Finite { .. } => unreachable!(),
        })
    }

    /// Snowflaked distance between two points of the space.
    pub fn distance(&self, a: &Point, b: &Point) -> Result<f64> {
        let base = match (&self.kind, a, b) {
            (SpaceKind::Finite { dist }, Point::Index(i), Point::Index(j)) => {
                let n = dist.rows();
                for k in [*i, *j] {
                    if k >= n {
                        return Err(Error::DimensionMismatch { expected: n, found: k });
                    }
                }
                dist[(*i, *j)]
            }
            (SpaceKind::Finite { .. }, _, _) => {
                return Err(Error::InvalidInput("finite spaces take point indices".into()));
            }
            (_, Point::Vector(x), Point::Vector(y)) => {
                if x.len() != y.len() {
                    return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
                }
                let diff: Vec<f64> = x.iter().zip(y.iter()).map(|(a, b)| a - b).collect();
                self.norm(&diff)?
            }
            _ => return Err(Error::InvalidInput("normed spaces take coordinate vectors".into())),
        };
        Ok(self.snowflake(base))
    }

    /// `base^θ`.
    pub fn snowflake(&self, base: f64) -> f64 {
        if self.theta == 1.0 {
            base
        } else {
            base.powf(self.theta)
        }
    }

    /// Matrix of snowflaked distances `d(x_i, x_j)` of a configuration.
    pub fn pairwise(&self, x: &Configuration) -> Result<Matrix> {
        x.check_space(self)?;
        let n = x.n();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let d = self.distance(&x.point(i), &x.point(j))?;
                out[(i, j)] = d;
                out[(j, i)] = d;
            }
        }
        Ok(out)
    }

    /// Matrix of snowflaked distances `d(x_i, y_j)` between two configurations.
    pub fn cross_distances(&self, x: &Configuration, y: &Configuration) -> Result<Matrix> {
        x.check_space(self)?;
        y.check_space(self)?;
        let mut out = Matrix::zeros(x.n(), y.n());
        for i in 0..x.n() {
            for j in 0..y.n() {
                out[(i, j)] = self.distance(&x.point(i), &y.point(j))?;
            }
        }
        Ok(out)
    }
}

/// `ℓ_p` norm, with `p = ∞` evaluated exactly as the max coordinate.
pub fn lp_norm(v: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    }
    if p == 1.0 {
        return v.iter().map(|x| x.abs()).sum();
    }
    if p == 2.0 {
        return v.iter().map(|x| x * x).sum::<f64>().sqrt();
    }
    let m = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if m == 0.0 {
        return 0.0;
    }
    m * v.iter().map(|x| (x.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
}

fn first_argmax_abs(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = k;
        }
    }
    best
}

/// Gauge `min{t ≥ 0 : v ∈ t·conv(V)}` and a subgradient, via the LP
/// `min Σλ s.t. Σ λ_k v_k = v, λ ≥ 0`; the dual solution is the subgradient.
fn polytope_gauge(vertices: &[Vec<f64>], v: &[f64]) -> Result<(f64, Vec<f64>)> {
    let d = v.len();
    if v.iter().all(|x| *x == 0.0) {
        return Ok((0.0, vec![0.0; d]));
    }
    let m = vertices.len();
    let a = Matrix::from_fn(d, m, |i, k| vertices[k][i]);
    let sol = solve_standard_form(&a, v, &vec![1.0; m])?;
    Ok((sol.objective.max(0.0), sol.y))
}

/// Add negations, drop duplicates (and the origin), preserving first-seen order.
pub(crate) fn symmetrize_points(points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let d = points.first().map(Vec::len).ok_or_else(|| Error::InvalidInput("empty point set".into()))?;
    if d == 0 {
        return Err(Error::InvalidInput("points must have positive dimension".into()));
    }
    let mut out: Vec<Vec<f64>> = Vec::new();
    for p in points {
        if p.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: p.len() });
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite coordinate".into()));
        }
        if p.iter().all(|x| *x == 0.0) {
            continue;
        }
        let neg: Vec<f64> = p.iter().map(|x| -x).collect();
        for cand in [p.clone(), neg] {
            let dup = out.iter().any(|q| q.iter().zip(&cand).all(|(a, b)| (a - b).abs() <= 1e-12));
            if !dup {
                out.push(cand);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::DegenerateSpan(d));
    }
    Ok(out)
}

/// Numerical rank of a point set (Gaussian elimination with pivoting).
pub(crate) fn rank(points: &[Vec<f64>]) -> usize {
    let d = points[0].len();
    let mut m: Vec<Vec<f64>> = points.to_vec();
    let scale = m.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs())).max(f64::MIN_POSITIVE);
    let mut r = 0;
    for c in 0..d {
        let Some(piv) = (r..m.len()).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())) else {
            break;
        };
        if m[piv][c].abs() <= 1e-10 * scale {
            continue;
        }
        m.swap(r, piv);
        for i in (r + 1)..m.len() {
            let f = m[i][c] / m[r][c];
            for k in c..d {
                m[i][k] -= f * m[r][k];
            }
        }
        r += 1;
    }
    r
}

fn validate_metric(dist: &Matrix) -> Result<()> {
    let n = dist.rows();
    if !dist.is_square() || n == 0 {
        return Err(Error::NotAMetric("distance matrix must be square and nonempty".into()));
    }
    if n > MAX_FINITE_POINTS {
        return Err(Error::InstanceTooLarge(format!("finite metrics are capped at {MAX_FINITE_POINTS} points")));
    }
    for i in 0..n {
        if dist[(i, i)] != 0.0 {
            return Err(Error::NotAMetric(format!("d({i},{i}) = {} is not zero", dist[(i, i)])));
        }
        for j in 0..n {
            let x = dist[(i, j)];
            if !(x.is_finite() && x >= 0.0) {
                return Err(Error::NotAMetric(format!("d({i},{j}) = {x} is not a nonnegative real")));
            }
            if (x - dist[(j, i)]).abs() > TRIANGLE_TOL {
                return Err(Error::NotAMetric(format!("d({i},{j}) != d({j},{i})")));
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if dist[(i, k)] > dist[(i, j)] + dist[(j, k)] + TRIANGLE_TOL {
                    return Err(Error::NotAMetric(format!("triangle inequality fails for ({i},{j},{k})")));
                }
            }
        }
    }
    Ok(())
}

/// One point per chain state: indices into a finite space, or the rows of
/// an `n × d` coordinate matrix for a normed space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Configuration {
    Indices(Vec<usize>),
    Vectors(Matrix),
}

impl Configuration {
    /// Number of points.
    pub fn n(&self) -> usize {
        match self {
            Configuration::Indices(v) => v.len(),
            Configuration::Vectors(m) => m.rows(),
        }
    }

    /// The `i`-th point.
    pub fn point(&self, i: usize) -> Point<'_> {
        match self {
            Configuration::Indices(v) => Point::Index(v[i]),
            Configuration::Vectors(m) => Point::Vector(m.row(i)),
        }
    }

    /// Check that the configuration lives in `space`.
    pub fn check_space(&self, space: &MetricSpace) -> Result<()> {
        match (self, space.kind()) {
            (Configuration::Indices(v), SpaceKind::Finite { dist }) => match v.iter().find(|&&i| i >= dist.rows()) {
                Some(&i) => Err(Error::DimensionMismatch { expected: dist.rows(), found: i }),
                None => Ok(()),
            },
            (Configuration::Vectors(m), _) if space.is_normed() => {
                let d = space.dim().unwrap_or(0);
                if m.cols() != d {
                    Err(Error::DimensionMismatch { expected: d, found: m.cols() })
                } else {
                    Ok(())
                }
            }
            _ => Err(Error::InvalidInput("configuration kind does not match the space".into())),
        }
    }
}

/// `(Σ_i π_i d(x_i, y_i)^p)^{1/p}`, the metric of `L_p(π; M)`.
pub fn product_distance(pi: &[f64], space: &MetricSpace, p: f64, x: &Configuration, y: &Configuration) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::BadExponentRange(format!("product metric needs finite p >= 1, got {p}")));
    }
    for c in [x, y] {
        if c.n() != pi.len() {
            return Err(Error::LengthMismatch { expected: pi.len(), found: c.n() });
        }
    }
    let mut s = 0.0;
    for (i, w) in pi.iter().enumerate() {
        s += w * space.distance(&x.point(i), &y.point(i))?.powf(p);
    }
    Ok(s.powf(1.0 / p))
}

/// Which two-point inequality [`modulus_check`] samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Modulus {
    /// `(‖x‖^p + ‖y‖^p)/2 ≤ ‖(x+y)/2‖^p + S^p ‖(x−y)/2‖^p`, `p ∈ [1,2]`.
    Smooth { p: f64, s: f64 },
    /// `‖(x+y)/2‖^q + K^{−q} ‖(x−y)/2‖^q ≤ (‖x‖^q + ‖y‖^q)/2`, `q ≥ 2`.
    Convex { q: f64, k: f64 },
}

/// Result of sampling a two-point inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusReport {
    pub trials: usize,
    pub violations: usize,
    /// Largest observed `lhs/rhs`; at most one when the inequality holds.
    #[serde(with = "ext_f64")]
    pub worst_ratio: f64,
}

/// Sample `trials` random pairs and test the requested modulus inequality.
///
/// Pairs mix independent Gaussian vectors, nearly parallel vectors and
/// vectors of very different lengths, where the inequalities are tightest.
pub fn modulus_check(space: &MetricSpace, mode: Modulus, trials: usize, seed: u64) -> Result<ModulusReport> {
    let d = space.require_normed()?;
    match mode {
        Modulus::Smooth { p, s } => {
            if !(1.0..=2.0).contains(&p) {
                return Err(Error::BadExponentRange(format!("smoothness needs p in [1,2], got {p}")));
            }
            if !(s > 0.0) {
                return Err(Error::InvalidInput("smoothness constant must be positive".into()));
            }
        }
        Modulus::Convex { q, k } => {
            if !(q >= 2.0 && q.is_finite()) {
                return Err(Error::BadExponentRange(format!("convexity needs q in [2,inf), got {q}")));
            }
            if !(k > 0.0) {
                return Err(Error::InvalidInput("convexity constant must be positive".into()));
            }
        }
    }
    let mut rng = rng_stream(seed, 0);
    let mut violations = 0;
    let mut worst = 0.0f64;
    for t in 0..trials {
        let x: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let y: Vec<f64> = match t % 4 {
            0 | 1 => (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
            2 => {
                let eps = 10f64.powf(-rng.random_range(1.0..6.0));
                x.iter().map(|xi| xi + eps * rng.sample::<f64, _>(StandardNormal)).collect()
            }
            _ => {
                let scale = 10f64.powf(rng.random_range(-3.0..3.0));
                (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
            }
        };
        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        let dif: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a - b)).collect();
        let (nx, ny, ns, nd) = (space.norm(&x)?, space.norm(&y)?, space.norm(&sum)?, space.norm(&dif)?);
        let (lhs, rhs) = match mode {
            Modulus::Smooth { p, s } => (0.5 * (nx.powf(p) + ny.powf(p)), ns.powf(p) + s.powf(p) * nd.powf(p)),
            Modulus::Convex { q, k } => (ns.powf(q) + k.powf(-q) * nd.powf(q), 0.5 * (nx.powf(q) + ny.powf(q))),
        };
        if lhs > rhs * (1.0 + 1e-12) + 1e-300 {
            violations += 1;
        }
        let ratio = if rhs > 0.0 { lhs / rhs } else if lhs > 0.0 { f64::INFINITY } else { 1.0 };
        worst = worst.max(ratio);
    }
    Ok(ModulusReport { trials, violations, worst_ratio: worst })
}

/// JSON form of a metric space.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum SpaceJson {
    Finite {
        dist: Matrix,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<f64>,
    },
    Lp {
        #[serde(with = "ext_f64")]
        p: f64,
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<f64>,
    },
    Polytope {
        vertices: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<f64>,
    },
    Ellipsoid {
        q: Matrix,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<f64>,
    },
}

impl TryFrom<SpaceJson> for MetricSpace {
    type Error = Error;
    fn try_from(j: SpaceJson) -> Result<Self> {
        let (space, theta) = match j {
            SpaceJson::Finite { dist, theta } => (MetricSpace::finite(dist)?, theta),
            SpaceJson::Lp { p, dim, theta } => (MetricSpace::lp(p, dim)?, theta),
            SpaceJson::Polytope { vertices, theta } => (MetricSpace::polytope(vertices)?, theta),
            SpaceJson::Ellipsoid { q, theta } => (MetricSpace::ellipsoid(EllipsoidNorm::new(q)?), theta),
        };
        space.with_theta(theta.unwrap_or(1.0))
    }
}

impl From<MetricSpace> for SpaceJson {
    fn from(s: MetricSpace) -> Self {
        let theta = (s.theta != 1.0).then_some(s.theta);
        match s.kind {
            SpaceKind::Finite { dist } => SpaceJson::Finite { dist, theta },
            SpaceKind::Lp { p, dim } => SpaceJson::Lp { p, dim, theta },
            SpaceKind::Polytope { vertices, .. } => SpaceJson::Polytope { vertices, theta },
            SpaceKind::Ellipsoid(e) => SpaceJson::Ellipsoid { q: e.q().clone(), theta },
        }
    }
}

/// Shortest-path metric of an unweighted graph given by adjacency lists.
pub fn graph_metric(adj: &[Vec<usize>]) -> Result<Matrix> {
    let n = adj.len();
    let mut dist = Matrix::zeros(n, n);
    for s in 0..n {
        let mut seen = vec![usize::MAX; n];
        seen[s] = 0;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if seen[v] == usize::MAX {
                    seen[v] = seen[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for t in 0..n {
            if seen[t] == usize::MAX {
                return Err(Error::Disconnected);
            }
            dist[(s, t)] = seen[t] as f64;
        }
    }
    Ok(dist)
}

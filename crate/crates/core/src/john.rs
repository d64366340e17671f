//! Minimum-volume enclosing ellipsoids of origin-symmetric point sets and
//! the Hilbertian approximation constant of a finite-dimensional norm.
//!
//! For a symmetric convex body `B_X ⊂ ℝ^d` with John (minimum-volume)
//! ellipsoid `E ⊇ B_X`, the norm `‖·‖_H` with unit ball `E` satisfies
//!
//! ```text
//! ‖y‖_H ≤ ‖y‖_X ≤ D_X ‖y‖_H,     D_X ≤ √d.
//! ```
//!
//! [`mvee`] computes `E` by Khachiyan's barycentric ascent on the centered
//! problem `max log det Σ u_i x_i x_iᵀ`; [`hilbert_distance`] then finds
//! `D_X = max_{‖y‖_H ≤ 1} ‖y‖_X`. That maximum of a convex function is
//! attained at a vertex of the polar body; it is exact for ℓ₁ and ℓ∞ (whose
//! polars are known) and otherwise found by multi-start successive
//! linearization, then checked against random directions.

use crate::error::{Error, Result};
use crate::linalg::{cholesky, dot, solve, spd_inverse, Matrix};
use crate::num::rng_stream;
use crate::spaces::{lp_norm, rank, symmetrize_points, MetricSpace, SpaceKind};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Default Khachiyan tolerance on the volume ratio.
pub const MVEE_TOL: f64 = 1e-7;
/// Khachiyan iteration cap.
pub const MVEE_MAX_ITER: usize = 100_000;

/// The Hilbertian norm `‖y‖ = sqrt(yᵀQy)` of a positive-definite `Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EllipsoidJson", into = "EllipsoidJson")]
pub struct EllipsoidNorm {
    q: Matrix,
}

#[derive(Serialize, Deserialize)]
struct EllipsoidJson {
    q: Matrix,
}

impl TryFrom<EllipsoidJson> for EllipsoidNorm {
    type Error = Error;
    fn try_from(j: EllipsoidJson) -> Result<Self> {
        EllipsoidNorm::new(j.q)
    }
}

impl From<EllipsoidNorm> for EllipsoidJson {
    fn from(e: EllipsoidNorm) -> Self {
        EllipsoidJson { q: e.q }
    }
}

impl EllipsoidNorm {
    /// Validate symmetry (1e-12) and positive definiteness.
    pub fn new(q: Matrix) -> Result<Self> {
        if !q.is_square() || q.rows() == 0 {
            return Err(Error::InvalidInput("ellipsoid matrix must be square and nonempty".into()));
        }
        let scale = q.frobenius_norm().max(1.0);
        if !q.is_symmetric(1e-12 * scale) {
            return Err(Error::InvalidInput("ellipsoid matrix is not symmetric".into()));
        }
        let q = q.symmetrized();
        if cholesky(&q).is_none() {
            return Err(Error::InvalidInput("ellipsoid matrix is not positive definite".into()));
        }
        Ok(EllipsoidNorm { q })
    }

    /// The Euclidean norm on `ℝ^d`.
    pub fn euclidean(d: usize) -> Self {
        EllipsoidNorm { q: Matrix::identity(d) }
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn dim(&self) -> usize {
        self.q.rows()
    }

    /// `sqrt(yᵀQy)`.
    pub fn norm(&self, y: &[f64]) -> f64 {
        let qy = self.q.matvec(y).expect("dimension checked by caller");
        dot(y, &qy).max(0.0).sqrt()
    }

    /// The dual norm `sqrt(zᵀQ⁻¹z)`.
    pub fn dual_norm(&self, z: &[f64]) -> f64 {
        let inv = spd_inverse(&self.q).expect("Q is positive definite");
        dot(z, &inv.matvec(z).expect("dimension")).max(0.0).sqrt()
    }

    /// The norm multiplied by `c > 0` (i.e. `Q ↦ c²Q`).
    pub fn scaled(&self, c: f64) -> EllipsoidNorm {
        EllipsoidNorm { q: self.q.scaled(c * c) }
    }
}

/// Output of [`mvee_detailed`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mvee {
    pub ellipsoid: EllipsoidNorm,
    pub iterations: usize,
    /// The symmetrized point set actually enclosed.
    pub points: Vec<Vec<f64>>,
}

/// Minimum-volume origin-centered ellipsoid containing `±points`.
pub fn mvee(points: &[Vec<f64>], tol: f64) -> Result<EllipsoidNorm> {
    Ok(mvee_detailed(points, tol)?.ellipsoid)
}

/// [`mvee`] with iteration statistics.
///
/// Stops once every point satisfies `xᵀM⁻¹x ≤ d(1+ε)` with
/// `(1+ε)^{d/2} = 1 + tol`, then scales so the farthest point lies exactly
/// on the boundary; the volume is then within a factor `1 + tol` of optimal.
pub fn mvee_detailed(points: &[Vec<f64>], tol: f64) -> Result<Mvee> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let pts = symmetrize_points(points)?;
    let d = pts[0].len();
    if pts.len() < d + 1 || rank(&pts) < d {
        return Err(Error::DegenerateSpan(d));
    }
    let m = pts.len();
    let eps = (1.0 + tol).powf(2.0 / d as f64) - 1.0;
    let mut u = vec![1.0 / m as f64; m];
    for iter in 0..=MVEE_MAX_ITER {
        let mut mm = Matrix::zeros(d, d);
        for (x, w) in pts.iter().zip(&u) {
            for a in 0..d {
                let wa = w * x[a];
                for b in 0..d {
                    mm[(a, b)] += wa * x[b];
                }
            }
        }
        let minv = spd_inverse(&mm).ok_or(Error::DegenerateSpan(d))?;
        let kappa: Vec<f64> = pts.iter().map(|x| dot(x, &minv.matvec(x).expect("dim"))).collect();
        let (j, kmax) = kappa.iter().enumerate().fold((0, f64::NEG_INFINITY), |(bj, bk), (i, &k)| {
            if k > bk {
                (i, k)
            } else {
                (bj, bk)
            }
        });
        if kmax <= d as f64 * (1.0 + eps) {
            let ellipsoid = EllipsoidNorm::new(minv.scaled(1.0 / kmax))?;
            return Ok(Mvee { ellipsoid, iterations: iter, points: pts });
        }
        if iter == MVEE_MAX_ITER {
            break;
        }
        // Away step (Todd–Yildirim): shrink the weight of the supported
        // point with the smallest κ when that gains more than the toward step.
        let (jmin, kmin) = kappa.iter().enumerate().filter(|&(i, _)| u[i] > 0.0).fold(
            (0, f64::INFINITY),
            |(bj, bk), (i, &k)| if k < bk { (i, k) } else { (bj, bk) },
        );
        let df = d as f64;
        if df - kmin > kmax - df && kmin > 0.0 {
            let beta_max = u[jmin] / (1.0 - u[jmin]);
            let beta = ((df - kmin) / (df * (kmin - 1.0)).abs()).min(beta_max);
            for w in u.iter_mut() {
                *w *= 1.0 + beta;
            }
            u[jmin] -= beta;
            if u[jmin] < 1e-300 {
                u[jmin] = 0.0;
            }
        } else {
            let beta = (kmax - df) / (df * (kmax - 1.0));
            for w in u.iter_mut() {
                *w *= 1.0 - beta;
            }
            u[j] += beta;
        }
    }
    Err(Error::NoConvergence(format!("Khachiyan did not converge in {MVEE_MAX_ITER} iterations")))
}

/// A Hilbertian sandwich `‖y‖_H ≤ ‖y‖_X ≤ D_X ‖y‖_H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HilbertDistance {
    #[serde(rename = "D_X")]
    pub d_x: f64,
    #[serde(rename = "H")]
    pub h: EllipsoidNorm,
    /// True when `D_X` was obtained by exact enumeration of polar vertices.
    pub exact: bool,
    /// Factor by which the ellipsoid had to be enlarged because the unit
    /// ball was only approximated by sampled vertices (0 when exact).
    pub approximation_slack: f64,
    /// `D_X ≤ √d + 1e-3`.
    pub john_bound_ok: bool,
    pub method: String,
}

/// Samples per orthant used to approximate smooth ℓ_p balls.
const LP_SAMPLES_PER_ORTHANT: usize = 6;
/// Largest dimension for which ℓ_p balls are approximated by sampling.
const MAX_SAMPLED_DIM: usize = 10;
const LOCAL_SEARCH_STARTS: usize = 64;
const SANDWICH_SAMPLES: usize = 1000;
/// Largest polar-vertex enumeration (subsets × sign patterns) attempted.
const MAX_POLAR_CANDIDATES: usize = 200_000;

/// Compute `(D_X, H)` for a normed space.
///
/// ℓ₂ and ellipsoidal norms give `D_X = 1`; ℓ∞ and ℓ₁ use their exact
/// vertex and polar-vertex descriptions; general symmetric polytopes use the
/// MVEE of their vertices with a local search over the polar; other ℓ_p
/// balls use the MVEE of `2^d·k` sampled boundary points, enlarged until it
/// contains the true ball, with the enlargement reported as slack.
pub fn hilbert_distance(space: &MetricSpace) -> Result<HilbertDistance> {
    let sqrt_d = |d: usize| (d as f64).sqrt();
    let finish = |d_x: f64, h: EllipsoidNorm, exact: bool, slack: f64, method: &str| {
        let d = h.dim();
        HilbertDistance { d_x, h, exact, approximation_slack: slack, john_bound_ok: d_x <= sqrt_d(d) + 1e-3, method: method.into() }
    };
    match space.kind() {
        SpaceKind::Finite { .. } => Err(Error::UnsupportedSpace("finite metrics have no unit ball".into())),
        SpaceKind::Ellipsoid(e) => Ok(finish(1.0, e.clone(), true, 0.0, "ellipsoid")),
        SpaceKind::Lp { p, dim } if *p == 2.0 => Ok(finish(1.0, EllipsoidNorm::euclidean(*dim), true, 0.0, "euclidean")),
        SpaceKind::Lp { p, dim } if p.is_infinite() || *p == 1.0 => {
            let d = *dim;
            if d > crate::spaces::MAX_POLYTOPE_DIM {
                return Err(Error::InstanceTooLarge(format!("vertex descriptions are capped at d = {}", crate::spaces::MAX_POLYTOPE_DIM)));
            }
            let (vertices, polar) = if p.is_infinite() { (sign_vectors(d), unit_vectors(d)) } else { (unit_vectors(d), sign_vectors(d)) };
            let h = mvee(&vertices, MVEE_TOL)?;
            let qinv = spd_inverse(h.q()).ok_or(Error::DegenerateSpan(d))?;
            let d_x = polar
                .iter()
                .map(|z| dot(z, &qinv.matvec(z).expect("dim")).sqrt())
                .fold(0.0, f64::max);
            let d_x = verify_sandwich(space, &h, d_x.max(1.0))?;
            Ok(finish(d_x, h, true, 0.0, if p.is_infinite() { "cube" } else { "cross-polytope" }))
        }
        SpaceKind::Polytope { vertices, dim } => {
            let h = mvee(vertices, MVEE_TOL)?;
            let (d_x, exact, method) = match polar_vertex_max(vertices, *dim, &h) {
                Some(v) => (v, true, "polytope-polar-vertices"),
                None => (local_max_x_over_h(space, &h)?, false, "polytope-local-search"),
            };
            let d_x = verify_sandwich(space, &h, d_x.max(1.0))?;
            Ok(finish(d_x, h, exact, 0.0, method))
        }
        SpaceKind::Lp { p, dim } => {
            let (p, d) = (*p, *dim);
            if d > MAX_SAMPLED_DIM {
                return Err(Error::InstanceTooLarge(format!("sampled l_p balls are capped at d = {MAX_SAMPLED_DIM}")));
            }
            let samples = sample_lp_sphere(p, d);
            let h0 = mvee(&samples, MVEE_TOL)?;
            // Enlarge so the whole ball (not only the samples) is inside.
            let c = local_max_h_over_lp(&h0, p)?.max(1.0);
            let h = h0.scaled(1.0 / c);
            let d_x = local_max_x_over_h(space, &h)?.max(1.0);
            let d_x = verify_sandwich(space, &h, d_x)?;
            Ok(finish(d_x, h, false, c - 1.0, "lp-sampled"))
        }
    }
}

fn unit_vectors(d: usize) -> Vec<Vec<f64>> {
    (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

/// All `2^d` sign vectors `{±1}^d`.
fn sign_vectors(d: usize) -> Vec<Vec<f64>> {
    (0..1usize << d).map(|mask| (0..d).map(|j| if mask >> j & 1 == 1 { -1.0 } else { 1.0 }).collect()).collect()
}

fn sample_lp_sphere(p: f64, d: usize) -> Vec<Vec<f64>> {
    let mut rng = rng_stream(0x4a6f686e, d as u64);
    let mut out = unit_vectors(d);
    for _ in 0..LP_SAMPLES_PER_ORTHANT {
        let w: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal).abs()).collect();
        let nw = lp_norm(&w, p);
        for s in sign_vectors(d) {
            out.push(w.iter().zip(&s).map(|(a, b)| a * b / nw).collect());
        }
    }
    out
}

/// `max_{‖y‖_H ≤ 1} ‖y‖_X` by successive linearization from several starts.
///
/// Each step maximizes the linearization `⟨g, y⟩` over the ellipsoid, which
/// has the closed form `Q⁻¹g / ‖g‖_{H*}`; the objective is convex, so the
/// iterates increase monotonically to a local maximum.
fn local_max_x_over_h(space: &MetricSpace, h: &EllipsoidNorm) -> Result<f64> {
    let d = h.dim();
    let qinv = spd_inverse(h.q()).ok_or(Error::DegenerateSpan(d))?;
    let mut rng = rng_stream(0x44585f, d as u64);
    let mut starts = unit_vectors(d);
    for _ in 0..LOCAL_SEARCH_STARTS {
        starts.push((0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect());
    }
    let mut best = 0.0f64;
    for s in starts {
        let mut y = s;
        let hy = h.norm(&y);
        y.iter_mut().for_each(|v| *v /= hy);
        let mut val = space.norm(&y)?;
        for _ in 0..200 {
            let (_, g) = space.norm_with_subgradient(&y)?;
            let qg = qinv.matvec(&g)?;
            let dn = dot(&g, &qg).sqrt();
            if dn == 0.0 {
                break;
            }
            let next: Vec<f64> = qg.iter().map(|v| v / dn).collect();
            let nv = space.norm(&next)?;
            if nv <= val * (1.0 + 1e-14) {
                val = val.max(nv);
                break;
            }
            y = next;
            val = nv;
        }
        best = best.max(val);
    }
    Ok(best)
}

/// `max ‖z‖_{H*}` over the vertices of the polar `{z : |⟨z, v_i⟩| ≤ 1}`,
/// which equals `max_{‖y‖_H ≤ 1} ‖y‖_X` for `B_X = conv(±v_i)`.
///
/// Vertices are enumerated as solutions of `d` signed tight constraints;
/// `None` when the enumeration would exceed [`MAX_POLAR_CANDIDATES`].
fn polar_vertex_max(vertices: &[Vec<f64>], d: usize, h: &EllipsoidNorm) -> Option<f64> {
    let m = vertices.len();
    if m < d {
        return None;
    }
    let mut subsets = 1f64;
    for k in 0..d {
        subsets *= (m - k) as f64 / (k + 1) as f64;
    }
    // Sign patterns up to a global flip, which maps vertices to vertices.
    if subsets * (1u64 << (d - 1)) as f64 > MAX_POLAR_CANDIDATES as f64 {
        return None;
    }
    let feasible = |z: &[f64]| vertices.iter().all(|v| dot(z, v).abs() <= 1.0 + 1e-9);
    let mut best = 0.0f64;
    let mut idx: Vec<usize> = (0..d).collect();
    loop {
        for mask in 0..(1usize << (d - 1)) {
            let a = Matrix::from_fn(d, d, |r, c| if r > 0 && mask >> (r - 1) & 1 == 1 { -vertices[idx[r]][c] } else { vertices[idx[r]][c] });
            if let Some(z) = solve(&a, &vec![1.0; d]) {
                if z.iter().all(|x| x.is_finite()) && feasible(&z) {
                    best = best.max(h.dual_norm(&z));
                }
            }
        }
        // Next d-subset in lexicographic order.
        let mut k = d;
        while k > 0 && idx[k - 1] == m - d + k - 1 {
            k -= 1;
        }
        if k == 0 {
            return Some(best);
        }
        idx[k - 1] += 1;
        for j in k..d {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// `max_{‖y‖_p ≤ 1} ‖y‖_H` by successive linearization (the linear step over
/// the ℓ_p ball is the duality map of the gradient).
fn local_max_h_over_lp(h: &EllipsoidNorm, p: f64) -> Result<f64> {
    let d = h.dim();
    let pstar = p / (p - 1.0);
    let mut rng = rng_stream(0x4c505f, d as u64);
    let mut best = 0.0f64;
    for k in 0..(LOCAL_SEARCH_STARTS + d) {
        let mut y: Vec<f64> = if k < d {
            unit_vectors(d).swap_remove(k)
        } else {
            (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
        };
        let ny = lp_norm(&y, p);
        y.iter_mut().for_each(|v| *v /= ny);
        let mut val = h.norm(&y);
        for _ in 0..500 {
            let g = h.q().matvec(&y)?;
            let gn = lp_norm(&g, pstar);
            if gn == 0.0 {
                break;
            }
            let next: Vec<f64> = g.iter().map(|v| v.signum() * (v.abs() / gn).powf(pstar - 1.0)).collect();
            let nv = h.norm(&next);
            if nv <= val * (1.0 + 1e-14) {
                val = val.max(nv);
                break;
            }
            y = next;
            val = nv;
        }
        best = best.max(val);
    }
    Ok(best)
}

/// Check `‖u‖_H ≤ ‖u‖_X ≤ D‖u‖_H` on random directions; raise `D` to the
/// largest observed ratio if a direction beats the local search.
fn verify_sandwich(space: &MetricSpace, h: &EllipsoidNorm, d_x: f64) -> Result<f64> {
    let d = h.dim();
    let mut rng = rng_stream(0x53616e64, d as u64);
    let mut d_x = d_x;
    for _ in 0..SANDWICH_SAMPLES {
        let u: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let (nh, nx) = (h.norm(&u), space.norm(&u)?);
        if nh > nx * (1.0 + 1e-9) {
            return Err(Error::NormSandwichViolated(format!("||u||_H = {nh} exceeds ||u||_X = {nx}")));
        }
        d_x = d_x.max(nx / nh);
    }
    Ok(d_x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_and_cross_polytope() {
        let sq = mvee(&[vec![1.0, 1.0], vec![1.0, -1.0]], MVEE_TOL).unwrap();
        assert!(sq.q().max_abs_diff(&Matrix::identity(2).scaled(0.5)) < 1e-9);
        let cr = mvee(&[vec![1.0, 0.0], vec![0.0, 1.0]], MVEE_TOL).unwrap();
        assert!(cr.q().max_abs_diff(&Matrix::identity(2)) < 1e-9);
    }

    #[test]
    fn degenerate_span_is_rejected() {
        assert_eq!(mvee(&[vec![1.0, 1.0], vec![2.0, 2.0]], MVEE_TOL), Err(Error::DegenerateSpan(2)));
    }

    #[test]
    fn random_cloud_is_contained() {
        let mut rng = rng_stream(11, 0);
        let pts: Vec<Vec<f64>> = (0..10).map(|_| (0..3).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).collect();
        let e = mvee(&pts, MVEE_TOL).unwrap();
        for p in &pts {
            assert!(e.norm(p).powi(2) <= 1.0 + 1e-6);
        }
    }

    #[test]
    fn john_distances_in_the_plane() {
        let sq2 = 2f64.sqrt();
        for p in [f64::INFINITY, 1.0] {
            let hd = hilbert_distance(&MetricSpace::lp(p, 2).unwrap()).unwrap();
            assert!((hd.d_x - sq2).abs() < 1e-9, "p = {p}: {}", hd.d_x);
            assert!(hd.exact && hd.john_bound_ok);
        }
        let l2 = hilbert_distance(&MetricSpace::lp(2.0, 5).unwrap()).unwrap();
        assert_eq!(l2.d_x, 1.0);
    }

    #[test]
    fn sampled_lp_ball_respects_sandwich() {
        let space = MetricSpace::lp(3.0, 3).unwrap();
        let hd = hilbert_distance(&space).unwrap();
        assert!(hd.john_bound_ok && hd.d_x >= 1.0);
        let mut rng = rng_stream(5, 0);
        for _ in 0..500 {
            let u: Vec<f64> = (0..3).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let (nh, nx) = (hd.h.norm(&u), space.norm(&u).unwrap());
            assert!(nh <= nx * (1.0 + 1e-6) && nx <= hd.d_x * nh * (1.0 + 1e-6));
        }
    }
}

//! Reversible Markov chains: construction and validation, stationary
//! distributions, spectra of the symmetrization `D^{1/2} A D^{-1/2}`, lazy
//! walks and chain algebra (mixtures, products, powers).

use crate::error::{Error, Result};
use crate::linalg::{solve, sym_eigen, Matrix, SymEigen};
use crate::num::ext_f64;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Input tolerance on row sums and on the total mass of a supplied `π`.
pub const ROW_SUM_TOL: f64 = 1e-9;
/// Absolute tolerance of the detailed-balance test.
pub const DETAILED_BALANCE_TOL: f64 = 1e-12;
/// Tolerance for two chains to count as sharing a stationary distribution.
pub const SAME_PI_TOL: f64 = 1e-12;
/// Largest chain accepted by the spectral routines.
pub const MAX_SPECTRAL_N: usize = 4096;
/// Spectral gaps `1 − λ₂` at or below this are treated as zero.
pub const ZERO_GAP: f64 = 1e-14;

/// A row-stochastic matrix with a strictly positive stationary distribution.
///
/// Construct with [`build_reversible_chain`]; the fields are private so the
/// invariants (rows sum to one, `π` positive and stationary, correct
/// reversibility flag) always hold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StochasticChain {
    n: usize,
    #[serde(rename = "rows")]
    a: Matrix,
    pi: Vec<f64>,
    reversible: bool,
}

impl StochasticChain {
    pub fn n(&self) -> usize {
        self.n
    }

    /// The transition matrix `A`.
    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    /// Entry `a_ij`.
    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[(i, j)]
    }

    /// The stationary distribution `π`.
    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// Whether detailed balance `π_i a_ij = π_j a_ji` holds to 1e-12.
    pub fn is_reversible(&self) -> bool {
        self.reversible
    }

    pub(crate) fn require_reversible(&self) -> Result<()> {
        if self.reversible {
            Ok(())
        } else {
            Err(Error::NotReversibleChain)
        }
    }

    /// Largest detailed-balance defect `max |π_i a_ij − π_j a_ji|`.
    pub fn detailed_balance_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.pi[i] * self.a[(i, j)] - self.pi[j] * self.a[(j, i)]).abs());
            }
        }
        worst
    }

    /// A chain on the same state space with matrix `m` and this chain's `π`.
    fn with_matrix(&self, m: Matrix) -> Result<StochasticChain> {
        build_reversible_chain(&m, Some(&self.pi))
    }

    fn check_same_pi(&self, other: &StochasticChain) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: other.n });
        }
        if self.pi.iter().zip(&other.pi).any(|(a, b)| (a - b).abs() > SAME_PI_TOL) {
            return Err(Error::MismatchedStationary);
        }
        Ok(())
    }

    /// The mixture `λ·self + (1−λ)·other` (both must share `π`).
    pub fn mix(&self, lambda: f64, other: &StochasticChain) -> Result<StochasticChain> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidInput(format!("mixture weight {lambda} outside [0,1]")));
        }
        self.check_same_pi(other)?;
        self.with_matrix(self.a.lin_comb(lambda, &other.a, 1.0 - lambda)?)
    }

    /// The product chain `self · other` (both must share `π`).
    pub fn compose(&self, other: &StochasticChain) -> Result<StochasticChain> {
        self.check_same_pi(other)?;
        self.with_matrix(self.a.matmul(&other.a)?)
    }

    /// The chain `Aᵗ`, `t ≥ 1`.
    pub fn power(&self, t: u32) -> Result<StochasticChain> {
        self.with_matrix(self.a.pow(t)?)
    }

    /// The identity chain on the same state space with the same `π`.
    pub fn identity_like(&self) -> StochasticChain {
        StochasticChain { n: self.n, a: Matrix::identity(self.n), pi: self.pi.clone(), reversible: true }
    }
}

/// Validate `a` and attach a stationary distribution.
///
/// Rows must be nonnegative and sum to one within [`ROW_SUM_TOL`]; they are
/// then renormalized exactly. When `pi` is `None` the stationary vector is
/// obtained by solving `(Aᵀ − I)π = 0` with the normalization row replacing
/// the last equation; a singular system means the chain is reducible and
/// has no unique positive stationary vector. A supplied `pi` must be
/// positive, normalized and stationary. Non-reversibility is not an error:
/// the flag is simply false.
pub fn build_reversible_chain(a: &Matrix, pi: Option<&[f64]>) -> Result<StochasticChain> {
    if !a.is_square() || a.rows() == 0 {
        return Err(Error::InvalidInput(format!(
            "transition matrix must be square and nonempty, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let mut m = a.clone();
    for i in 0..n {
        let row = m.row_mut(i);
        if let Some(j) = row.iter().position(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::NotStochastic { row: i, detail: format!("has invalid entry {} at column {j}", row[j]) });
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::NotStochastic { row: i, detail: format!("sums to {s}") });
        }
        row.iter_mut().for_each(|x| *x /= s);
    }
    let pi = match pi {
        Some(p) => validate_pi(&m, p)?,
        None => stationary_vector(&m)?,
    };
    let mut chain = StochasticChain { n, a: m, pi, reversible: false };
    chain.reversible = chain.detailed_balance_defect() <= DETAILED_BALANCE_TOL;
    Ok(chain)
}

fn validate_pi(a: &Matrix, p: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    if p.len() != n {
        return Err(Error::LengthMismatch { expected: n, found: p.len() });
    }
    if let Some(i) = p.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::NoPositiveStationary(format!("pi[{i}] = {} is not positive", p[i])));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::InvalidInput(format!("pi sums to {s}, not 1")));
    }
    let pi: Vec<f64> = p.iter().map(|x| x / s).collect();
    for j in 0..n {
        let v: f64 = (0..n).map(|i| pi[i] * a[(i, j)]).sum();
        if (v - pi[j]).abs() > ROW_SUM_TOL {
            return Err(Error::InvalidInput(format!("pi is not stationary at state {j}: (pi A)_j = {v}")));
        }
    }
    Ok(pi)
}

fn stationary_vector(a: &Matrix) -> Result<Vec<f64>> {
    let n = a.rows();
    let mut sys = Matrix::from_fn(n, n, |i, j| a[(j, i)] - if i == j { 1.0 } else { 0.0 });
    for j in 0..n {
        sys[(n - 1, j)] = 1.0;
    }
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = 1.0;
    let pi = solve(&sys, &rhs)
        .ok_or_else(|| Error::NoPositiveStationary("stationary system is singular (reducible chain)".into()))?;
    if let Some(i) = pi.iter().position(|x| !(*x > 1e-14)) {
        return Err(Error::NoPositiveStationary(format!("stationary mass at state {i} is {}", pi[i])));
    }
    let s: f64 = pi.iter().sum();
    Ok(pi.into_iter().map(|x| x / s).collect())
}

/// Spectrum of a reversible chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralData {
    /// Eigenvalues sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Second-largest eigenvalue λ₂.
    pub lambda2: f64,
    /// `1/(1 − λ₂)`, infinite when the gap vanishes.
    #[serde(with = "ext_f64")]
    pub gamma_classical: f64,
    /// Norm of `A` on mean-zero functions in `L₂(π)`: `max(|λ₂|, |λₙ|)`.
    pub meanzero_norm: f64,
}

/// Eigen-decomposition of `D^{1/2} A D^{-1/2}` (eigenvalues descending).
pub(crate) fn symmetrized_eigen(chain: &StochasticChain) -> Result<SymEigen> {
    chain.require_reversible()?;
    let n = chain.n;
    if n > MAX_SPECTRAL_N {
        return Err(Error::InstanceTooLarge(format!("spectral ops are capped at n = {MAX_SPECTRAL_N}, got {n}")));
    }
    let s: Vec<f64> = chain.pi.iter().map(|p| p.sqrt()).collect();
    let sym = Matrix::from_fn(n, n, |i, j| s[i] * chain.a[(i, j)] / s[j]);
    sym_eigen(&sym)
}

/// Reciprocal gap `1/(1 − λ)` with vanishing gaps mapped to `∞`.
pub fn reciprocal_gap(lambda: f64) -> f64 {
    let gap = 1.0 - lambda;
    if gap <= ZERO_GAP {
        f64::INFINITY
    } else {
        1.0 / gap
    }
}

/// Spectral data of a reversible chain via cyclic Jacobi.
pub fn spectral_data(chain: &StochasticChain) -> Result<SpectralData> {
    let e = symmetrized_eigen(chain)?;
    let ev = e.values;
    let n = ev.len();
    let (lambda2, meanzero_norm) = if n >= 2 { (ev[1], ev[1].abs().max(ev[n - 1].abs())) } else { (f64::NEG_INFINITY, 0.0) };
    Ok(SpectralData { gamma_classical: if n >= 2 { reciprocal_gap(lambda2) } else { 0.0 }, lambda2, meanzero_norm, eigenvalues: ev })
}

/// The lazy walk `((A + I)/2)ᵗ` with the same `π`, `t ≥ 1`.
pub fn lazy_power(chain: &StochasticChain, t: u32) -> Result<StochasticChain> {
    if t == 0 {
        return Err(Error::InvalidPower);
    }
    let lazy = chain.a.lin_comb(0.5, &Matrix::identity(chain.n), 0.5)?;
    let m = lazy.pow(t)?;
    let mut out = chain.with_matrix(m)?;
    // Powers of a self-adjoint operator are self-adjoint; keep the flag even
    // if rounding in long products nudges the defect above the tolerance.
    out.reversible = out.reversible || chain.reversible;
    Ok(out)
}

/// Outcome of the mean-zero operator-norm bound check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanZeroBoundReport {
    pub lhs: f64,
    pub rhs: f64,
    #[serde(with = "ext_f64")]
    pub gamma_plus: f64,
    pub holds: bool,
}

/// Check `‖A‖_{L₂⁰(π)} ≤ (1 − 1/((2^{q−1}−1) K^q γ₊))^{1/q}` for the
/// Hilbert-space instantiation (`q = 2`), using the exact Hilbert `γ₊`.
///
/// Other exponents would need the absolute gap of a non-Hilbertian target
/// and are rejected with [`Error::UnsupportedSpace`].
pub fn meanzero_opnorm_bound_check(chain: &StochasticChain, q: f64, k: f64) -> Result<MeanZeroBoundReport> {
    if q != 2.0 {
        return Err(Error::UnsupportedSpace(format!(
            "only the Hilbert instantiation q = 2 is available, got q = {q}"
        )));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidInput(format!("convexity constant must be positive, got {k}")));
    }
    let spec = spectral_data(chain)?;
    let gamma_plus = crate::rayleigh::gamma_plus_hilbert_exact(chain)?.value;
    let denom = (2f64.powf(q - 1.0) - 1.0) * k.powf(q) * gamma_plus;
    let inner = if denom.is_infinite() { 1.0 } else { 1.0 - 1.0 / denom };
    let rhs = inner.max(0.0).powf(1.0 / q);
    let lhs = spec.meanzero_norm;
    Ok(MeanZeroBoundReport { lhs, rhs, gamma_plus, holds: lhs <= rhs + 1e-9 })
}

/// Sample a random reversible chain on `n` states.
///
/// A symmetric nonnegative weight matrix `W` is drawn (each off-diagonal
/// pair present with probability `density`, plus a Hamiltonian cycle so the
/// chain is irreducible, plus random holding weights); then
/// `A = diag(W𝟙)⁻¹ W` and `π ∝ W𝟙`, so detailed balance holds by
/// construction.
pub fn random_reversible_chain<R: Rng + ?Sized>(n: usize, density: f64, rng: &mut R) -> Result<StochasticChain> {
    if n == 0 {
        return Err(Error::InvalidInput("chain needs at least one state".into()));
    }
    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent_on_cycle = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent_on_cycle || rng.random::<f64>() < density {
                let x = 0.05 + rng.random::<f64>();
                w[(i, j)] = x;
                w[(j, i)] = x;
            }
        }
        if rng.random::<f64>() < 0.5 {
            w[(i, i)] = rng.random::<f64>();
        }
    }
    if n == 1 {
        w[(0, 0)] = 1.0;
    }
    let deg: Vec<f64> = (0..n).map(|i| w.row(i).iter().sum()).collect();
    let total: f64 = deg.iter().sum();
    let a = Matrix::from_fn(n, n, |i, j| w[(i, j)] / deg[i]);
    let pi: Vec<f64> = deg.iter().map(|d| d / total).collect();
    build_reversible_chain(&a, Some(&pi))
}

/// Sample a random `π`-reversible chain with a prescribed `π` (Metropolis
/// construction over a random symmetric proposal).
///
/// Chains sharing `π` are what the Rayleigh-quotient calculus compares.
pub fn random_chain_with_pi<R: Rng + ?Sized>(pi: &[f64], density: f64, rng: &mut R) -> Result<StochasticChain> {
    let n = pi.len();
    if n == 0 {
        return Err(Error::InvalidInput("chain needs at least one state".into()));
    }
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent_on_cycle = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent_on_cycle || rng.random::<f64>() < density {
                let x = rng.random::<f64>() / n as f64;
                k[(i, j)] = x;
                k[(j, i)] = x;
            }
        }
    }
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        let mut off = 0.0;
        for j in 0..n {
            if i != j {
                a[(i, j)] = k[(i, j)] * (pi[j] / pi[i]).min(1.0);
                off += a[(i, j)];
            }
        }
        a[(i, i)] = 1.0 - off;
    }
    build_reversible_chain(&a, Some(pi))
}

/// JSON form of a chain: `{"n": 3, "rows": [[...]], "pi": [...]}`.
#[derive(Debug, Clone, Deserialize)]
struct ChainJson {
    n: Option<usize>,
    rows: Vec<Vec<f64>>,
    pi: Option<Vec<f64>>,
}

/// Parse a chain from JSON or whitespace-separated dense text.
///
/// The text form is `n·n` numbers, optionally preceded by `n`.
pub fn parse_chain(text: &str) -> Result<StochasticChain> {
    let trimmed = text.trim_start();
    let (a, pi) = if trimmed.starts_with('{') {
        let spec: ChainJson = serde_json::from_str(trimmed).map_err(|e| Error::InvalidInput(format!("chain JSON: {e}")))?;
        let a = Matrix::from_rows(&spec.rows)?;
        if let Some(n) = spec.n {
            if n != a.rows() {
                return Err(Error::DimensionMismatch { expected: n, found: a.rows() });
            }
        }
        (a, spec.pi)
    } else {
        let nums = trimmed
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| Error::InvalidInput(format!("chain text token {t:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let square = |len: usize| {
            let n = (len as f64).sqrt().round() as usize;
            (n * n == len && n > 0).then_some(n)
        };
        let (n, body) = match square(nums.len()) {
            Some(n) => (n, &nums[..]),
            None => {
                let n = nums.first().copied().unwrap_or(0.0);
                let n_int = n as usize;
                if n.fract() != 0.0 || n_int == 0 || nums.len() != 1 + n_int * n_int {
                    return Err(Error::InvalidInput("chain text must hold n*n entries, optionally preceded by n".into()));
                }
                (n_int, &nums[1..])
            }
        };
        (Matrix::from_vec(n, n, body.to_vec())?, None)
    };
    build_reversible_chain(&a, pi.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::rng_stream;

    fn flip() -> StochasticChain {
        build_reversible_chain(&Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(), None).unwrap()
    }

    #[test]
    fn flip_chain_has_uniform_stationary_vector() {
        let c = flip();
        assert_eq!(c.pi(), &[0.5, 0.5]);
        assert!(c.is_reversible());
    }

    #[test]
    fn identity_with_explicit_pi() {
        let pi = [1.0 / 3.0; 3];
        let c = build_reversible_chain(&Matrix::identity(3), Some(&pi)).unwrap();
        assert!(c.is_reversible());
        let s = spectral_data(&c).unwrap();
        assert!(s.eigenvalues.iter().all(|&l| (l - 1.0).abs() < 1e-15));
        assert_eq!(s.gamma_classical, f64::INFINITY);
    }

    #[test]
    fn identity_without_pi_is_reducible() {
        assert!(matches!(build_reversible_chain(&Matrix::identity(3), None), Err(Error::NoPositiveStationary(_))));
    }

    #[test]
    fn rejects_bad_rows() {
        let a = Matrix::from_rows(&[vec![0.5, 0.4], vec![0.5, 0.5]]).unwrap();
        assert!(matches!(build_reversible_chain(&a, None), Err(Error::NotStochastic { row: 0, .. })));
        let neg = Matrix::from_rows(&[vec![1.5, -0.5], vec![0.5, 0.5]]).unwrap();
        assert!(matches!(build_reversible_chain(&neg, None), Err(Error::NotStochastic { .. })));
    }

    #[test]
    fn non_reversible_chain_is_flagged_not_rejected() {
        // A biased 3-cycle is doubly stochastic but not reversible.
        let a = Matrix::from_rows(&[vec![0.0, 0.7, 0.3], vec![0.3, 0.0, 0.7], vec![0.7, 0.3, 0.0]]).unwrap();
        let c = build_reversible_chain(&a, None).unwrap();
        assert!(!c.is_reversible());
        assert_eq!(spectral_data(&c), Err(Error::NotReversibleChain));
    }

    #[test]
    fn lazy_power_rejects_zero_and_fixes_identity() {
        let id = build_reversible_chain(&Matrix::identity(2), Some(&[0.5, 0.5])).unwrap();
        assert_eq!(lazy_power(&id, 0), Err(Error::InvalidPower));
        assert!(lazy_power(&id, 7).unwrap().matrix().max_abs_diff(&Matrix::identity(2)) == 0.0);
    }

    #[test]
    fn lazy_flip_bound_check() {
        let lazy = lazy_power(&flip(), 1).unwrap();
        let r = meanzero_opnorm_bound_check(&lazy, 2.0, 1.0).unwrap();
        assert!(r.lhs.abs() < 1e-12 && r.rhs == 0.0 && r.holds);
        assert!(matches!(meanzero_opnorm_bound_check(&lazy, 3.0, 1.0), Err(Error::UnsupportedSpace(_))));
    }

    #[test]
    fn random_chains_are_reversible() {
        let mut rng = rng_stream(3, 0);
        for n in 1..8 {
            let c = random_reversible_chain(n, 0.4, &mut rng).unwrap();
            assert!(c.is_reversible());
            let d = random_chain_with_pi(c.pi(), 0.5, &mut rng).unwrap();
            assert!(d.is_reversible());
            assert!(d.pi().iter().zip(c.pi()).all(|(a, b)| (a - b).abs() < 1e-15));
        }
    }

    #[test]
    fn parses_json_and_text() {
        let c = parse_chain(r#"{"n":2,"rows":[[0,1],[1,0]]}"#).unwrap();
        assert_eq!(c.pi(), &[0.5, 0.5]);
        let t = parse_chain("2\n0.5 0.5\n0.5 0.5\n").unwrap();
        assert_eq!(t.n(), 2);
        let bare = parse_chain("0 1\n1 0").unwrap();
        assert_eq!(bare.n(), 2);
        assert!(parse_chain("1 2 3").is_err());
    }
}

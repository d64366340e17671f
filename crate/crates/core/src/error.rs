//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures reported by the library.
///
/// Variants are grouped by the module that raises them; [`Error::is_numerical`]
/// separates genuine numerical failures (non-convergence) from input
/// validation problems.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed input that does not fit a more specific variant.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A row of the transition matrix does not sum to one (or has a negative entry).
    #[error("matrix is not row-stochastic: row {row} {detail}")]
    NotStochastic { row: usize, detail: String },
    /// The chain has no strictly positive stationary vector.
    #[error("no strictly positive stationary distribution: {0}")]
    NoPositiveStationary(String),
    /// An operation requiring detailed balance received a non-reversible chain.
    #[error("chain is not reversible with respect to its stationary distribution")]
    NotReversibleChain,
    /// Matrix powers are only defined for positive exponents here.
    #[error("power must be a positive integer")]
    InvalidPower,
    /// Two chains that must share a stationary distribution do not.
    #[error("chains have different stationary distributions")]
    MismatchedStationary,
    /// The instance exceeds a documented size cap.
    #[error("instance too large: {0}")]
    InstanceTooLarge(String),
    /// Points or vectors of incompatible dimensions.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    /// Sequences of incompatible lengths.
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    /// Sizes of an embedding and its metric disagree.
    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    /// An exponent outside the range allowed by the requested inequality.
    #[error("exponent out of range: {0}")]
    BadExponentRange(String),
    /// A distance matrix violating the metric axioms.
    #[error("not a metric: {0}")]
    NotAMetric(String),
    /// A configuration with all points equal, for which the quotient is undefined.
    #[error("configuration is constant; the Rayleigh quotient is undefined")]
    ConstantConfiguration,
    /// The operation is only implemented for Hilbertian targets.
    #[error("unsupported space: {0}")]
    UnsupportedSpace(String),
    /// Sampling found a direction breaking the requested norm sandwich.
    #[error("norm sandwich violated: {0}")]
    NormSandwichViolated(String),
    /// The spectral gap vanishes (λ₂ numerically equal to 1).
    #[error("spectral gap is degenerate (lambda2 = {0})")]
    DegenerateGap(f64),
    /// A function is expected to have L_p norm at most one.
    #[error("function is not normalized: L_p norm {0} exceeds 1")]
    NotNormalized(f64),
    /// A gap needed by a composite check could not be computed.
    #[error("gap unavailable: {0}")]
    GapUnavailable(String),
    /// Points do not span the ambient space.
    #[error("points do not span R^{0}")]
    DegenerateSpan(usize),
    /// An iterative method hit its iteration cap.
    #[error("no convergence: {0}")]
    NoConvergence(String),
    /// A probability vector has a zero (or negative) atom.
    #[error("weight vector has a non-positive entry at index {0}")]
    ZeroWeight(usize),
    /// The embedding solver stopped improving before reaching feasibility.
    #[error("embedding solver stalled after {iterations} iterations")]
    SolverStalled { iterations: usize },
    /// A witness decomposition with no components.
    #[error("empty decomposition")]
    EmptyDecomposition,
    /// n·d is odd, so no d-regular graph on n vertices exists.
    #[error("no {d}-regular graph on {n} vertices: n*d is odd")]
    ParityViolation { n: usize, d: usize },
    /// The random graph sampler exhausted its attempt budget.
    #[error("resample budget of {0} attempts exceeded")]
    ResampleBudgetExceeded(usize),
    /// A graph operation requiring connectivity received a disconnected graph.
    #[error("graph is disconnected")]
    Disconnected,
}

impl Error {
    /// True for failures of an iterative method rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NoConvergence(_) | Error::SolverStalled { .. })
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

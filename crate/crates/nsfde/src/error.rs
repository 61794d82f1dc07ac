//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by construction, solving and certification routines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An input value violates a structural requirement (grids, supports,
    /// parameter ranges, ...).  The message names the offending field.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Vector dimensions of two objects that must interoperate disagree.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        /// Where the mismatch was detected.
        context: &'static str,
        /// Dimension required by the surrounding object.
        expected: usize,
        /// Dimension actually supplied.
        got: usize,
    },

    /// The neutral functional keeps unit (or larger) instantaneous mass at
    /// lag zero, so no admissible modulus exists: the small-interval
    /// contraction construction cannot start.
    #[error(
        "non-atomicity failure: instantaneous Lipschitz mass {rho_at_zero} at lag 0 is >= 1"
    )]
    NonAtomicityFailure {
        /// Limit of the contraction modulus as the window shrinks to zero.
        rho_at_zero: f64,
    },

    /// No interval length / weight pair satisfying the contraction recipe
    /// exists for the requested tuning parameter.
    #[error("interval selection failed: {0}")]
    SelectionFailed(String),

    /// A Volterra kernel cannot be inverted on the grid (unit or larger
    /// instantaneous mass at lag zero).
    #[error("ill-posed Volterra kernel: {0}")]
    IllPosedKernel(String),

    /// The hypothesis of a comparison statement fails on the supplied data.
    #[error("comparison hypothesis violated: max defect {max_defect} exceeds tolerance {tol}")]
    HypothesisViolated {
        /// Largest pointwise violation of the assumed inequality.
        max_defect: f64,
        /// Tolerance the defect was tested against.
        tol: f64,
    },

    /// A characteristic equation has no root in the admissible range.
    #[error("no characteristic root: {0}")]
    NoRoot(String),

    /// Both bounding measures vanish, so only the trivial diffusion exponent
    /// remains and no characteristic equation can be formed.
    #[error("degenerate certificate: bounding measures vanish, only the diffusion exponent {beta1} remains")]
    Degenerate {
        /// Diffusion exponent determined by `p` and the Young parameter.
        beta1: f64,
    },

    /// The Picard iteration failed to contract within the iteration budget.
    #[error(
        "Picard iteration did not converge on interval {interval}: last difference {last_diff:e} after {iterations} iterations ({trend})"
    )]
    Divergence {
        /// Index of the interval on which the iteration was running.
        interval: usize,
        /// Number of iterations performed.
        iterations: usize,
        /// Supremum-norm difference between the last two iterates.
        last_diff: f64,
        /// Qualitative behaviour of the recorded difference sequence.
        trend: DivergenceTrend,
    },

    /// Not enough data points to carry out the requested statistical fit.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Too few Monte Carlo paths for the requested estimator.
    #[error("precision error: {0}")]
    PrecisionError(String),

    /// The requested diagnostic does not apply to the supplied problem.
    #[error("inapplicable: {0}")]
    Inapplicable(String),

    /// A quantity whose logarithm is needed is non-positive.
    #[error("rate undefined: {0}")]
    RateUndefined(String),
}

/// Qualitative classification of a non-convergent difference sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceTrend {
    /// Differences kept shrinking; the budget was simply too small.
    SlowContraction,
    /// Differences stopped shrinking or grew: genuine divergence evidence.
    NonDecreasing,
}

impl std::fmt::Display for DivergenceTrend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DivergenceTrend::SlowContraction => write!(f, "slow contraction"),
            DivergenceTrend::NonDecreasing => write!(f, "non-decreasing differences"),
        }
    }
}

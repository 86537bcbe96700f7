//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A parameter or input violated its mathematical domain
    /// (non-stationary spec, discount factor out of range, exhausted
    /// rejection sampling against the parameter domain, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Every particle weight underflowed to zero after the exp guard.
    #[error("total weight underflow at t={t} (max log-weight {max_log_weight:.1})")]
    TotalWeightUnderflow { t: usize, max_log_weight: f64 },

    /// The autocovariance sequence fed to the Durbin-Levinson recursion is
    /// not positive definite.
    #[error("autocovariance sequence not positive definite at order {order}")]
    NotPositiveDefinite { order: usize },

    /// A variance required to be positive collapsed to zero.
    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Two group points (or a point and a config) disagree on `n`.
    #[error("dimension mismatch: expected n={expected}, got n={got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A scalar parameter violates its constraint.
    #[error("invalid parameter {name}={value}: {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    /// Evaluation time below the configured floor (no small-time asymptotics).
    #[error("time t={t} below the evaluation floor {floor}")]
    TimeBelowFloor { t: f64, floor: f64 },

    /// Quadrature error estimate did not reach the requested tolerance.
    #[error("quadrature did not converge: estimated error {est_error:.3e} > target {target:.3e}")]
    QuadratureNonConvergent { est_error: f64, target: f64 },

    /// Gaussian-bound fit exhausted the ceiling without certifying the grid.
    #[error("no M <= {m_max} certifies the Gaussian bound on the given grid")]
    BoundFitFailed { m_max: f64 },

    /// Grid index out of range.
    #[error("index {index} out of range for grid of {len} points")]
    IndexOutOfRange { index: usize, len: usize },

    /// Time reversal requires a grid closed under s -> t_end - s.
    #[error("grid is not symmetric under time reversal")]
    AsymmetricGrid,

    /// The Holder machinery requires the complete dyadic grid k/2^depth.
    #[error("grid is not the complete dyadic grid of depth {depth}")]
    GridNotDyadic { depth: u32 },

    /// insert_slice rejects a time that is already present.
    #[error("time {0} already present in cylinder set")]
    DuplicateTime(f64),

    /// Cylinder quadrature tractability limits (n == 1, at most 3 times).
    #[error("cylinder quadrature limit exceeded: {0}")]
    SizeLimit(String),

    /// A potential without a certified lower bound was requested.
    #[error("potential is not bounded below: {0}")]
    UnboundedPotential(String),
}

impl Error {
    pub fn invalid(name: &'static str, value: f64, constraint: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value,
            constraint,
        }
    }
}

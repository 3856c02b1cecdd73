use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("shift {shift} exceeds half-width {half_width}")]
    ShiftOutOfRange { shift: i64, half_width: usize },

    #[error("product dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("atom count {count} exceeds cap {cap}; use binned convolution")]
    AtomCap { count: usize, cap: usize },

    #[error(
        "tridiagonal eigensolver did not converge at index {index} after {iterations} iterations"
    )]
    NoConvergence { index: usize, iterations: usize },

    #[error("dense eigensolver did not converge")]
    DenseNoConvergence,

    #[error("Chebyshev degree cap {cap} exceeded (t = {t})")]
    DegreeCap { cap: usize, t: f64 },

    #[error(
        "light-cone margin violated: half-width {half_width} < required {required} \
         (2*t_max + support radius + margin)"
    )]
    LightCone { half_width: usize, required: usize },

    #[error("grid too short: {0}")]
    GridTooShort(String),

    #[error("degenerate fit window: {0}")]
    DegenerateWindow(String),
}

impl Error {
    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DimensionCap { .. }
                | Error::AtomCap { .. }
                | Error::NoConvergence { .. }
                | Error::DenseNoConvergence
                | Error::DegreeCap { .. }
                | Error::LightCone { .. }
        )
    }
}

use alloc::string::String;

use crate::c64;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("not a density operator: hermiticity {hermiticity:e}, trace {trace}, min eigenvalue {min_eigenvalue:e}")]
    NotADensityOperator {
        hermiticity: f64,
        trace: f64,
        min_eigenvalue: f64,
    },

    #[error("injection probabilities sum to {sum}")]
    ProbabilitySum { sum: f64 },

    #[error("near-defective generator: reconstruction residual {residual:e}")]
    NearDefective { residual: f64 },

    #[error("pole proximity: eigenvalue {eigenvalue} maps to magnitude {magnitude:e}")]
    PoleProximity { eigenvalue: c64, magnitude: f64 },

    #[error("generator has an eigenvalue with positive real part {real:e}")]
    UnstableSpectrum { real: f64 },

    #[error("series not converged: tail bound {tail_bound:e} at l_max {l_max}, requires l_max >= {required_l_max}")]
    SeriesNotConverged {
        l_max: usize,
        required_l_max: usize,
        tail_bound: f64,
    },

    #[error("no kick map supplied for a {k}-atom event")]
    MissingKick { k: usize },

    #[error("filter normalization violated: discrete integral {integral}")]
    FilterNormalization { integral: f64 },

    #[error("filter width below injection period")]
    FilterTooNarrow { width: f64, period: f64 },

    #[error("trajectory spans {span} but the filter needs {width}")]
    TrajectoryTooShort { span: f64, width: f64 },

    #[error(
        "degenerate steady state: kernel dimension {kernel_dimension}, singular-value gap {gap:e}"
    )]
    DegenerateSteadyState { kernel_dimension: usize, gap: f64 },

    #[error("eigensolver failed to converge")]
    Eigensolver,
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

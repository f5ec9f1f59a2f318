use thiserror::Error;

/// Errors raised by the numerical pipelines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("energy {energy} is outside the convergence region |E| > 3 of the Neumann series")]
    OutsideConvergenceRegion { energy: f64 },

    #[error("Neumann series did not converge within {cap} terms")]
    IterationCapExceeded { cap: usize },

    #[error("region has {sites} sites, above the dense assembly cap of {cap}")]
    CapExceeded { sites: usize, cap: usize },

    #[error("matrix is not Hermitian (deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("eigensolver did not converge after {sweeps} sweeps")]
    NotConverged { sweeps: usize },

    #[error("matrix is singular to working precision")]
    Singular,

    #[error("site {0} is not in the region")]
    SiteNotInRegion(String),

    #[error("sites {0} and {1} are not adjacent")]
    NotAdjacent(String, String),

    #[error(
        "region too small: truncation estimate {estimate:e} exceeds tolerance {tol:e} \
         (distance to exterior {distance})"
    )]
    RegionTooSmall {
        estimate: f64,
        tol: f64,
        distance: usize,
    },

    #[error("response vanishes at both defect sites")]
    ZeroBoundaryValues,

    #[error("Im u(v) = {imag:e} is not negligible; no Hermitian defect solves the constraint")]
    NonRealConstraint { imag: f64 },

    #[error("secular determinant has imaginary part {imag:e}")]
    ComplexDeterminant { imag: f64 },

    #[error("secular determinant {value:e} is not zero at E = {energy}")]
    SecularNotZero { energy: f64, value: f64 },

    #[error("defect kernel is degenerate (singular values {s_min:e}, {s_max:e})")]
    DegenerateKernel { s_min: f64, s_max: f64 },

    #[error("incompatible defect: interlayer commutator norm {norm:e}")]
    IncompatibleDefect { norm: f64 },

    #[error("forcing has a hybrid-2 component of norm {norm:e}")]
    HybridLeak { norm: f64 },

    #[error("curve lost at phi = {phi} (last good E = {energy})")]
    CurveLost { phi: f64, energy: f64 },

    #[error("curve approaches band edge at phi = {phi} (last good E = {energy})")]
    CurveAtBandEdge { phi: f64, energy: f64 },

    #[error("nothing to render")]
    EmptyData,
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("point {0:?} lies outside the chart domain")]
    OutsideChart([f64; 3]),
    #[error("metric is not positive definite at {0:?}")]
    NotPositiveDefinite([f64; 3]),
    #[error("tangent vectors span a degenerate plane")]
    DegeneratePlane,
    #[error("direction is not unit length (norm {0})")]
    NonUnitDirection(f64),
    #[error("integrated curve left the chart at parameter {0}")]
    ChartExit(f64),
    #[error("conjugate point reached before radius {0}")]
    ConjugatePoint(f64),
    #[error("tube map is not an immersion (signed area element {0})")]
    ImmersionFailure(f64),
    #[error("constant c = -2/5 is excluded")]
    ExcludedConstant,
    #[error("series fit is ill-conditioned: {0}")]
    IllConditionedFit(String),
    #[error("fit residual {residual:e} exceeds threshold {threshold:e}")]
    FitResidual { residual: f64, threshold: f64 },
    #[error("model is not cyclic-parallel Ricci with constant scalar curvature (defect {0:e})")]
    NotCyclicParallel(f64),
    #[error("ODE integration failed: {0}")]
    Integration(String),
    #[error("unknown model '{0}'")]
    UnknownModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

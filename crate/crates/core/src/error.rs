use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),
    #[error("degenerate polytope: {0}")]
    DegeneratePolytope(String),
    #[error("singular evaluation at ({x1}, {x2}): facet {facet} has value {value}")]
    SingularEvaluation {
        x1: f64,
        x2: f64,
        facet: usize,
        value: f64,
    },
    #[error("non-convex point: Hessian determinant {det} (trace {trace})")]
    NonConvexPoint { det: f64, trace: f64 },
    #[error("non-positive logarithm argument {0}")]
    NonPositiveLog(f64),
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),
    #[error("polytope kind mismatch: expected {expected}, got {got}")]
    KindMismatch { expected: String, got: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("root finding failed: {0}")]
    RootFinding(String),
    #[error("infeasible starting point: {0}")]
    InfeasibleStart(String),
    #[error("non-finite residual")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, Error>;

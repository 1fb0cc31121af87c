use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("resolution {got} is too small, need at least {min} nodes per axis")]
    ResolutionTooSmall { got: usize, min: usize },

    #[error("field length {got} does not match grid with {expected} nodes")]
    GridMismatch { expected: usize, got: usize },

    #[error("sub-box {0} is not contained in the domain")]
    SubBoxOutsideDomain(String),

    #[error("sub-box is not aligned with the grid nodes: {0}")]
    MisalignedSubBox(String),

    #[error("integral of |v|·δ^{gamma} diverges near the boundary")]
    DivergentWeight { gamma: f64 },

    #[error("state does not vanish on the boundary (max |u| = {max_abs:e})")]
    BoundaryValue { max_abs: f64 },

    #[error("singular linear system at row {row}")]
    Singular { row: usize },

    #[error("singular Jacobian at lambda = {lambda}; the state may be close to a fold, use continuation")]
    SingularJacobian { lambda: f64 },

    #[error("weight field vanishes identically")]
    ZeroWeight,

    #[error("gradient coefficient is not a positive constant")]
    NonConstantMu,

    #[error("exponential substitution left the admissible range (w <= -1)")]
    InvalidBranch,

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("negative source term f = {value:e} at node {node}")]
    NegativeSource { node: usize, value: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Errors caused by bad input rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidDomain(_)
                | Error::ResolutionTooSmall { .. }
                | Error::SubBoxOutsideDomain(_)
                | Error::MisalignedSubBox(_)
                | Error::InvalidParameter(_)
                | Error::GridMismatch { .. }
        )
    }
}

use thiserror::Error;

/// Errors raised by the simulation library.
///
/// The variants split into two families: violated preconditions
/// ([`SimError::Domain`], [`SimError::Budget`]) and numerical trouble
/// (everything else). Front ends map the two families to different exit codes.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("size budget exceeded: {0}")]
    Budget(String),

    #[error("integrator failure at t = {time:.6e}: {reason}")]
    Integrator { time: f64, reason: String },

    #[error("quadrature did not converge: achieved error {achieved:.3e}, requested {requested:.3e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("degenerate steady state: kernel dimension {0}")]
    DegenerateKernel(usize),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl SimError {
    pub fn domain(msg: impl Into<String>) -> Self {
        SimError::Domain(msg.into())
    }

    /// True for precondition and validation failures, false for numerical ones.
    pub fn is_domain(&self) -> bool {
        matches!(self, SimError::Domain(_) | SimError::Budget(_))
    }
}

pub type Result<T> = std::result::Result<T, SimError>;

use thiserror::Error;

/// Errors produced by the simulation layers.
///
/// `RegimeViolation` deserves a note: the perturbative formulas in this crate
/// are first-order expansions that are only meaningful when the small
/// parameters and the schedule gates hold. Operations that *evaluate* such a
/// formula refuse to run outside the regime; operations that merely *report*
/// on the regime (see [`crate::model::compute_epsilons`]) return the report
/// and leave the decision to the caller.
#[derive(Debug, Error)]
pub enum Error {
    /// Physical parameters or schedule fields violate a documented invariant.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// The iterative eigensolver failed to settle within its iteration cap.
    #[error("eigensolver did not converge within {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// A computation produced a non-finite value.
    #[error("numeric overflow in {0}")]
    NumericOverflow(&'static str),

    /// A perturbative formula was requested outside its validity regime.
    #[error("operating-regime violation: {0}")]
    RegimeViolation(String),

    /// Mean period length is undefined (flip or transition probability ~ 0).
    #[error("period statistics diverge: {0}")]
    DivergentPeriod(String),

    /// Requested integrator step exceeds the stability precondition.
    #[error("integration step {step:e} exceeds the stability bound {max:e}")]
    StepTooLarge { step: f64, max: f64 },

    /// The integrated density matrix drifted outside the positivity band.
    #[error("density matrix lost positivity: min eigenvalue {min_eig:e}")]
    PositivityLoss { min_eig: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

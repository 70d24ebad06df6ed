//! Error types shared across the solver layers.

use thiserror::Error;

/// Errors produced by the spectral, assembly and solver layers.
#[derive(Debug, Clone, Error)]
pub enum SolverError {
    /// The argument of the branch-fixed square root is on (or within
    /// 1e-12 of) the cut along the negative real axis.
    #[error("square-root argument {0:?} lies on the branch cut")]
    BranchCutHit(num_complex::Complex64),

    /// A finite slab is shorter than 1e-8.
    #[error("slab of length {0:.3e} is shorter than the 1e-8 floor")]
    DegenerateStack(f64),

    /// An LU pivot fell below 1e-300; the determinant is zero to working
    /// precision and the spectral point should be treated as a root.
    #[error("matching matrix is singular to working precision")]
    SingularToWorkingPrecision,

    /// The singular-value gap condition for a null vector is not met.
    #[error("spectral point is not a root: smallest/largest singular value ratio {0:.3e}")]
    NotARoot(f64),

    /// No sign change was found while scanning for eigenvalues.
    #[error("no eigenvalue found in the search interval for a = {0}")]
    NoEigenvalue(f64),

    /// The half-line junction system could not be solved.
    #[error("junction linear system is singular at lambda0 = {0}")]
    SingularSystem(f64),

    /// Corner-coefficient intercepts disagree across rays by more than 5%.
    #[error("corner-coefficient fit unstable: ray spread {0:.3e} relative")]
    FitUnstable(f64),

    /// Root iteration failed to converge within the iteration cap.
    #[error("root search did not converge within {0} iterations")]
    NoConvergence(usize),

    /// The winding-number guard found a root count different from one.
    #[error("winding count {0} around the candidate root (expected 1)")]
    MultipleRoots(i64),

    /// Richardson comparison between h and h/2 exceeds the coarseness cap.
    #[error("finite-difference grid too coarse: h-refinement moved eigenvalues by {0:.3e}")]
    GridTooCoarse(f64),

    /// The convergence study failed its ratio assertions; the table rows
    /// are attached as the diagnostic artifact.
    #[error("asymptotics convergence study failed: {reason}")]
    StudyFailed {
        reason: String,
        rows: Vec<crate::asymptotics::StudyRow>,
    },

    /// An input violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, SolverError>;

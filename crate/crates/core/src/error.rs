use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty set has no distance function")]
    EmptySet,

    #[error("kernel singularity at the origin")]
    KernelSingularity,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dyadic cover needs more than {cap} cubes")]
    CoverCap { cap: usize },

    #[error("quadrature did not converge: error estimate {estimate:e} above tolerance {tol:e}")]
    NonConvergent { estimate: f64, tol: f64 },

    #[error("linear program infeasible: {0}")]
    Infeasible(String),

    #[error("simplex stopped after {iterations} pivots without reaching optimality (objective {objective})")]
    SolverStalled { iterations: usize, objective: f64 },

    #[error("reference measure potential too small on E (certified minimum {m_inf:e}, margin {margin:e})")]
    ReferencePotentialTooSmall { m_inf: f64, margin: f64 },

    #[error("inconsistent capacity bracket: lower {lower} exceeds upper {upper}")]
    InconsistentBracket { lower: f64, upper: f64 },

    #[error("potential does not dominate on E (threshold fell to {theta:e})")]
    NoDominance { theta: f64 },

    #[error("superlevel region reaches the edge of the sampled domain")]
    UnboundedRegion,

    #[error("cube selection does not cover E ({uncovered} sample points left)")]
    NotCovered { uncovered: usize },

    #[error("sets {first} and {second} overlap")]
    Overlap { first: usize, second: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors produced across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid hamiltonian: {0}")]
    InvalidHamiltonian(String),
    #[error("invalid sector: {0}")]
    InvalidSector(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("invalid excitation: {0}")]
    Excitation(String),
    #[error("sector mismatch: {0}")]
    SectorMismatch(String),
    #[error("operator contains a term of particle rank {0}, at most 2 is supported")]
    Rank(usize),
    #[error("no convergence after {iterations} iterations (best estimate {estimate})")]
    Convergence { iterations: usize, estimate: f64 },
    #[error("walker population became extinct at iteration {0}")]
    Extinction(usize),
    #[error("walker population {population} exceeded the cap {cap} at iteration {iteration}")]
    Overflow {
        iteration: usize,
        population: f64,
        cap: f64,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("bound not applicable: {0}")]
    Applicability(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

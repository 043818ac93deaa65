use thiserror::Error;

/// Errors surfaced by the simulator core.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("failed to generate a connected graph after {attempts} attempts (n={n}, p={p})")]
    ConnectivityFailure { n: usize, p: f64, attempts: usize },

    #[error("row {row} of the weight matrix sums to {sum}, not 1")]
    NonStochasticInput { row: usize, sum: f64 },

    #[error("the subgraph induced by non-Byzantine agents is disconnected")]
    DisconnectedHonestSubgraph,

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("IDX file {path}: expected magic {expected:#010x}, found {found:#010x}")]
    BadMagic {
        path: String,
        expected: u32,
        found: u32,
    },

    #[error("IDX files disagree: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("IDX file {path}: truncated ({needed} bytes needed, {available} available)")]
    Truncated {
        path: String,
        needed: usize,
        available: usize,
    },

    #[error("pool of {available} samples cannot supply {required} ({n_agents} agents x {z} samples)")]
    InsufficientPool {
        available: usize,
        required: usize,
        n_agents: usize,
        z: usize,
    },

    #[error("perturbation index out of range: agent {agent}, position {position}")]
    IndexOutOfRange { agent: usize, position: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("minimizer did not reach gradient norm {tol} within {cap} iterations (reached {reached})")]
    NoConvergence { tol: f64, cap: usize, reached: f64 },

    #[error("weights do not match messages: {0}")]
    WeightMismatch(String),

    #[error("too few messages: received {received}, need more than {min_required}")]
    TooFewMessages { received: usize, min_required: usize },

    #[error("all certification trials were degenerate (honest messages coincide)")]
    DegenerateTrial,

    #[error("no honest messages visible to the attacker for recipient {recipient}")]
    NoVisibleHonest { recipient: usize },

    #[error("contraction condition violated: w = lambda - 8*rho*sqrt(N) = {w} <= 0")]
    ContractionViolated { w: f64 },

    #[error("invalid run configuration: {0}")]
    ConfigInvalid(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, SimError>;

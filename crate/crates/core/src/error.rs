use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("graph has no vertices")]
    EmptyGraph,
    #[error("vertex {vertex} out of range for a graph with {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("edge ({src}, {dst}) has zero multiplicity")]
    ZeroMultiplicity { src: usize, dst: usize },
    #[error("vertex {vertex} has in-degree {in_degree} but out-degree {out_degree}")]
    NotEulerian { vertex: usize, in_degree: u64, out_degree: u64 },
    #[error("graph is not strongly connected")]
    NotConnected,
    #[error("size out of range: {0}")]
    SizeOutOfRange(String),
    #[error("graph is not undirected (multiplicity matrix is not symmetric)")]
    NotUndirected,

    #[error("integer overflow in {0}")]
    Overflow(&'static str),
    #[error("sandpile has {got} values but the graph has {expected} vertices")]
    LengthMismatch { expected: usize, got: usize },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("spanning tree count {kappa} exceeds the enumeration cap {cap}")]
    CapExceeded { kappa: u128, cap: usize },
    #[error("seed configuration failed the burning test")]
    SeedNotRecurrent,
    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),
    #[error("burning iteration exceeded {0} rounds")]
    NonTermination(u64),

    #[error("Markov chain is not irreducible")]
    NotIrreducible,
    #[error("length function is periodic (gcd {0})")]
    Periodic(u64),
    #[error("every closed walk has total length zero")]
    AllLengthsZero,
    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("graph with {0} vertices is too large for brute-force enumeration")]
    TooLarge(usize),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

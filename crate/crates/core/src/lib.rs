//! Abelian sandpile dynamics on finite Eulerian multigraphs, with exact and
//! Monte Carlo tools for the threshold state of the fixed-energy sandpile.

pub mod chains;
pub mod decompose;
pub mod error;
pub mod graph;
pub mod io;
pub mod recurrent;
pub mod renewal;
pub mod replicas;
pub mod sandpile;
pub mod stats;
pub mod verify;
pub mod waves;

pub use error::{Error, Result};
pub use graph::{MultiGraph, VertexId};
pub use sandpile::{Odometer, Sandpile};

/// Exact rational arithmetic for laws and stationary distributions.
pub type Rational = num_rational::BigRational;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

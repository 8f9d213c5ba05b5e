pub mod agent;
pub mod baselines;
pub mod diffusion;
pub mod error;
pub mod gnn;
pub mod graph;
pub mod harness;
pub mod numerics;
pub mod pdw;
pub mod rng;

pub use error::{Error, Result};
pub use graph::{EdgeWeightScheme, Graph, NodeId};

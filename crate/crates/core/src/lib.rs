//! Model selection for chain event graphs: conjugate agglomerative
//! clustering and marginalized mixture models scored by bridge sampling.

pub mod ahc;
pub mod bridge;
pub mod conjugate;
pub mod data;
pub mod error;
pub mod math;
pub mod metrics;
pub mod mixture;
pub mod partition;
pub mod rng;
pub mod sampler;
pub mod search;
pub mod simlab;
pub mod transform;
pub mod tree;

pub use error::{Error, Result};

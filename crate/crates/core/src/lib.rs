pub mod builders;
pub mod classifiers;
pub mod dataset;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod pipeline;
pub mod reducers;
pub mod simulator;
pub mod stats;

pub use error::{Error, Result};

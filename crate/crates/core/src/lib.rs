pub mod convgraph;
pub mod curriculum;
pub mod datasets;
pub mod error;
pub mod harness;
pub mod model;
pub mod numerics;

pub use error::{Error, Result};

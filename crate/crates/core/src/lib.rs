pub mod error;
pub mod geometry;
pub mod harness;
pub mod lattice;
pub mod oracle;
pub mod pgm;
pub mod swarm;
pub mod tracer;

pub use error::{Error, Result};

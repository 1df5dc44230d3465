pub mod container;
pub mod error;
pub mod campaign;
pub mod hwcost;
pub mod mobo;
pub mod pareto;
pub mod pulsegen;
pub mod qnn;
pub mod stats;

pub use error::{Error, Result};

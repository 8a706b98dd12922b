pub mod acquisition;
pub mod cartography;
pub mod data;
pub mod error;
pub mod exec;
pub mod harness;
pub mod model;
pub mod report;
pub mod rng;

pub use error::{Error, Result};

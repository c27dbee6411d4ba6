pub mod circuit;
pub mod ed;
pub mod error;
pub mod experiment;
pub mod model;
pub mod mpdo;
pub mod tensor;
pub mod validate;
pub mod zne;

pub use error::{Error, Result};

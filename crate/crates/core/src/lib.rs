pub mod conformal;
pub mod dimension;
pub mod error;
pub mod gdms;
pub mod group;
pub mod linalg;
pub mod registry;
pub mod systems;
pub mod thermo;

pub use error::{Error, ErrorClass, Result};

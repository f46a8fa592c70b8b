pub mod degree_laws;
pub mod error;
pub mod mechanism;
pub mod quadrature;
mod roots;
pub mod samplers;
pub mod special;
pub mod verify;

pub use error::{Error, Result};
pub use mechanism::{BranchingMechanism, LevyMeasure, MechanismVariant, Side, Truncation};

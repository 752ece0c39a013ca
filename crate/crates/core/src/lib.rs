pub mod asympt;
pub mod background;
pub mod error;
pub mod jost;
pub mod poly;
pub mod sampling;
pub mod scattering;
pub mod states;
pub mod verify;

pub use error::{Error, Result};

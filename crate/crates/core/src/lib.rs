pub mod asymptotics;
pub mod check;
pub mod error;
pub mod experiments;
pub mod io;
pub mod model;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod stats;
pub mod weights;

pub use error::{Error, Result};

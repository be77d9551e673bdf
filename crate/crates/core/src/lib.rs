pub mod diagnostics;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod factorized;
pub mod importance;
pub mod mcmc;
pub mod mixtures;
pub mod numeric;

pub use distributions::{Dist1D, SimRng};
pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

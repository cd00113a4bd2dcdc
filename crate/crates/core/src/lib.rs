pub mod drift;
pub mod error;
pub mod eval;
pub mod fourier;
pub mod hoeffding;
pub mod pool;
pub mod stream;

pub use error::{Error, Result};

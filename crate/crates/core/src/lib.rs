pub mod error;
pub mod numerics;
pub mod quantreg;
pub mod basis;
pub mod qcov;
pub mod fpqr;
pub mod metrics;
pub mod simulate;
pub mod modelsel;

pub use error::{FpqrError, Result};

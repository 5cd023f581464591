pub mod batch;
pub mod distributions;
pub mod driver;
pub mod error;
pub mod gan;
pub mod metrics;
pub mod nn;
pub mod par;
pub mod protocol;
pub mod session;
pub mod viz;

pub use batch::{Batch, Point};
pub use error::{Error, Result};
pub use par::Execution;

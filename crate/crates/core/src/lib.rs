pub mod detect;
pub mod error;
pub mod evaluate;
pub mod ingest;
pub mod normalize;
pub mod pipeline;
pub mod represent;
pub mod synthetic;
pub mod vectorize;

pub use error::{Error, Result};

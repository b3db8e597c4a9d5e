//! Neural implicit representations loaded from INRW weight files.

mod cache;
mod format;
mod model;

pub use cache::{GradientCache, CACHE_QUANTUM};
pub use format::{load_inrw, parse_inrw, save_inrw, to_inrw_json};
pub use model::{Activation, InrModel, Layer, MlpParameters};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum InrError {
    #[error("INRW format error: {0}")]
    Format(String),
    #[error("INRW dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

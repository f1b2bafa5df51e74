//! Order-size laws and the capital allocator: q-Gamma limit-order sizes,
//! truncated geometric cancellation sizes, the market-order mixture of a
//! truncated geometric with Dirac atoms, and the power-law capital draw.
//!
//! Parameter records are immutable after construction; all sampling takes a
//! caller-supplied random stream.

mod mixture;
mod power_law;
mod qgamma;
mod tgeom;

pub use mixture::{fit_mixture_mle, MarketMixtureParams, MixtureFit};
pub use power_law::PowerLawParams;
pub use qgamma::QGammaParams;
pub use tgeom::{fit_tgeom_mle, TruncGeomParams};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DistError {
    #[error("invalid parameter: {0}")]
    BadParam(String),
    #[error("empty sample set")]
    NoSamples,
    #[error("sample {0} outside support 1..={1}")]
    OutOfSupport(u64, u64),
}

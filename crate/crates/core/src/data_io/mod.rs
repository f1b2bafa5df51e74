//! Binary feed parsing and order book reconstruction.
//!
//! The parser handles the eight order/trade message types of the exchange
//! feed subset (add, add-with-attribution, execute, execute-with-price,
//! cancel, delete, replace, hidden trade) in length-prefixed big-endian
//! records. Reconstruction replays messages through the matching book and
//! emits the six-letter event stream consumed by the point-process models.

mod itch;
mod reconstruct;
mod split;

pub use itch::{parse_itch, serialize_itch, symbol_from, AddOrder, ItchError, ItchMessage, ParseStats};
pub use reconstruct::{reconstruct, ReconStats, ReconstructedStream};
pub use split::{split_dataset, SplitResolution, SplitResult};

//! Core library for a limit-order-book exchange simulator with point-process
//! driven market-making agents.
//!
//! The crate is organized around the life cycle of a simulated trading day:
//!
//! * [`lob`] — the matching engine: price-time priority book, cancellations,
//!   queue-position queries and an append-only event log.
//! * [`hawkes`] — classical marked multivariate Hawkes processes: intensity
//!   evaluation, Ogata thinning, closed-form exponential-kernel likelihood
//!   and MLE fitting.
//! * [`dhp`] — the deep point-process model: stacked denoising autoencoders
//!   feeding a continuous-time deep LSTM with per-event-type intensity heads,
//!   trained by Adam on a Monte Carlo likelihood with its own reverse-mode
//!   autodiff tape.
//! * [`distributions`] — order-size laws (q-Gamma, truncated geometric,
//!   market-order mixture) and the power-law capital allocator.
//! * [`agents`] — the trading strategies behind a common [`agents::Strategy`]
//!   trait, registered by name and selected at runtime via config.
//! * [`market_sim`] — the discrete-event exchange: kernel with throttling and
//!   latency, FIX tag-value codec, session runner and multi-day campaigns.
//! * [`analytics`] — prediction/trading metrics, queue-value curves, book
//!   summary statistics and stylised-fact reports.
//! * [`data_io`] — ITCH-subset binary feed parsing, book reconstruction into
//!   six-letter event streams, and dataset splitting.
//!
//! [`testkit`] holds independent reference implementations (naive matcher,
//! quadrature, simple statistics) used by the test suites as oracles.

pub mod agents;
pub mod analytics;
pub mod autodiff;
pub mod config;
pub mod data_io;
pub mod dhp;
pub mod distributions;
pub mod hawkes;
pub mod lob;
pub mod market_sim;
pub mod opt;
pub mod stats;
pub mod testkit;

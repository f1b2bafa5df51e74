//! Metrics over predictions, trading sessions and order book logs: RMSE and
//! classification error of next-event forecasts, normalized PnL and mean
//! absolute position, the queue-value decomposition, book summary
//! statistics and stylized-fact reports.

mod metrics;
mod queue_value;
mod stylized;
mod summary;

pub use metrics::{
    agent_trading_metrics, prediction_metrics, trading_metrics, PredictionMetrics, TradingMetrics,
};
pub use queue_value::{queue_value_curve, QueuePositionValue, QueueValueCurve};
pub use stylized::{stylized_facts, StylizedFactsReport};
pub use summary::{lob_summary, LobSummaryStats};

//! The simulation framework: FIX tag-value transport, a deterministic
//! discrete-event kernel with throttling, latency and fairness, per-agent
//! accounting, the session runner and multi-day campaigns.

mod campaign;
mod fix;
mod session;

pub use campaign::run_campaign;
pub use fix::{
    checksum, decode_fix, encode_fix, encode_fix_with_checksum, tags, FixError, FixMessage, SOH,
};
pub use session::{
    allocate_capital, fills_csv, market_csv, rewards_csv, run_session, snapshots_csv,
    AgentSummary, FillRecord, KernelConfig, SessionConfig, SessionReport, StepMarket, StepReward,
    EXCHANGE_AGENT,
};

use rayon::prelude::*;

use crate::agents::{AgentError, StrategyContext, StrategyRegistry};

use super::session::{run_session, SessionConfig, SessionReport};

/// Independent sessions over consecutive day seeds; day k runs with seed
/// base_seed + k. Sessions are embarrassingly parallel and collected in day
/// order, so the result is identical to a serial run.
pub fn run_campaign(
    config: &SessionConfig,
    registry: &StrategyRegistry,
    ctx: &StrategyContext,
    n_days: usize,
) -> Result<Vec<SessionReport>, AgentError> {
    let reports: Vec<Result<SessionReport, AgentError>> = (0..n_days)
        .into_par_iter()
        .map(|day| {
            let mut day_config = config.clone();
            day_config.seed = config.seed.wrapping_add(day as u64);
            run_session(&day_config, registry, ctx)
        })
        .collect();
    reports.into_iter().collect()
}

use crate::market_sim::{SessionReport, StepMarket, StepReward};

/// Next-event forecast quality: root mean square error of predicted times
/// and classification error rate of predicted types.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionMetrics {
    pub rmse: f64,
    pub error_rate: f64,
    pub n: usize,
}

pub fn prediction_metrics(predicted: &[(f64, usize)], actual: &[(f64, usize)]) -> PredictionMetrics {
    let n = predicted.len().min(actual.len());
    if n == 0 {
        return PredictionMetrics {
            rmse: 0.0,
            error_rate: 0.0,
            n: 0,
        };
    }
    let mut sq = 0.0;
    let mut wrong = 0usize;
    for ((t_hat, k_hat), (t, k)) in predicted.iter().zip(actual).take(n) {
        sq += (t_hat - t) * (t_hat - t);
        if k_hat != k {
            wrong += 1;
        }
    }
    PredictionMetrics {
        rmse: (sq / n as f64).sqrt(),
        error_rate: wrong as f64 / n as f64,
        n,
    }
}

/// Trading quality of one agent over a session: hourly normalized PnL
/// (reward over the volume-weighted average spread) and the mean absolute
/// position.
#[derive(Debug, Clone, PartialEq)]
pub struct TradingMetrics {
    pub hourly_npnl: Vec<f64>,
    pub total_npnl: f64,
    pub map: f64,
    pub total_reward: f64,
}

/// Volume-weighted average spread over a slice of market steps; falls back
/// to the unweighted mean when nothing traded.
fn weighted_average_spread(market: &[&StepMarket]) -> f64 {
    let vol: f64 = market.iter().map(|m| m.volume as f64).sum();
    if vol > 0.0 {
        market
            .iter()
            .map(|m| m.spread * m.volume as f64)
            .sum::<f64>()
            / vol
    } else if !market.is_empty() {
        market.iter().map(|m| m.spread).sum::<f64>() / market.len() as f64
    } else {
        0.0
    }
}

pub fn trading_metrics(
    rewards: &[&StepReward],
    market: &[&StepMarket],
    hour_ns: i64,
) -> TradingMetrics {
    if rewards.is_empty() {
        return TradingMetrics {
            hourly_npnl: vec![],
            total_npnl: 0.0,
            map: 0.0,
            total_reward: 0.0,
        };
    }
    let t0 = rewards.iter().map(|r| r.time_ns).min().unwrap();
    let hours = |t: i64| ((t - t0) / hour_ns.max(1)) as usize;
    let n_hours = hours(rewards.iter().map(|r| r.time_ns).max().unwrap()) + 1;

    let mut hourly_reward = vec![0.0; n_hours];
    for r in rewards {
        hourly_reward[hours(r.time_ns)] += r.reward.total;
    }
    let mut hourly_npnl = Vec::with_capacity(n_hours);
    for (h, &rw) in hourly_reward.iter().enumerate() {
        let in_hour: Vec<&StepMarket> = market
            .iter()
            .copied()
            .filter(|m| hours(m.time_ns) == h)
            .collect();
        let was = weighted_average_spread(&in_hour);
        hourly_npnl.push(if was > 0.0 { rw / was } else { 0.0 });
    }

    let total_reward: f64 = rewards.iter().map(|r| r.reward.total).sum();
    let was_all = weighted_average_spread(&market.to_vec());
    let total_npnl = if was_all > 0.0 {
        total_reward / was_all
    } else {
        0.0
    };
    let map = rewards.iter().map(|r| r.inventory.abs() as f64).sum::<f64>() / rewards.len() as f64;
    TradingMetrics {
        hourly_npnl,
        total_npnl,
        map,
        total_reward,
    }
}

/// Convenience: trading metrics of one agent from a full session report.
pub fn agent_trading_metrics(report: &SessionReport, agent_id: u64, hour_ns: i64) -> TradingMetrics {
    let rewards: Vec<&StepReward> = report
        .rewards
        .iter()
        .filter(|r| r.agent_id == agent_id)
        .collect();
    let instrument = report
        .agents
        .iter()
        .find(|a| a.agent_id == agent_id)
        .map(|a| a.instrument)
        .unwrap_or(0);
    let market: Vec<&StepMarket> = report
        .market
        .iter()
        .filter(|m| m.instrument == instrument)
        .collect();
    trading_metrics(&rewards, &market, hour_ns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::RewardBreakdown;

    #[test]
    fn perfect_predictions_score_zero() {
        let actual = vec![(1.0, 0), (2.0, 1), (3.5, 2)];
        let m = prediction_metrics(&actual, &actual);
        assert_eq!(m.rmse, 0.0);
        assert_eq!(m.error_rate, 0.0);
    }

    #[test]
    fn all_types_wrong_gives_unit_error_rate() {
        let actual = vec![(1.0, 0), (2.0, 1), (3.0, 0)];
        let predicted = vec![(1.0, 1), (2.0, 0), (3.0, 2)];
        let m = prediction_metrics(&predicted, &actual);
        assert_eq!(m.error_rate, 1.0);
    }

    #[test]
    fn rmse_matches_hand_arithmetic() {
        let actual = vec![(1.0, 0), (2.0, 0), (3.0, 0)];
        let predicted = vec![(1.5, 0), (2.0, 0), (2.0, 0)];
        let m = prediction_metrics(&predicted, &actual);
        let want = ((0.25 + 0.0 + 1.0) / 3.0f64).sqrt();
        assert!((m.rmse - want).abs() < 1e-12);
    }

    fn step(t: i64, total: f64, inv: i64) -> StepReward {
        StepReward {
            time_ns: t,
            agent_id: 1,
            reward: RewardBreakdown {
                pnl: total,
                inventory_cost: 0.0,
                transaction_cost: 0.0,
                total,
            },
            inventory: inv,
        }
    }

    fn market(t: i64, spread: f64, volume: u64) -> StepMarket {
        StepMarket {
            time_ns: t,
            instrument: 0,
            mid: 100.0,
            spread,
            volume,
        }
    }

    #[test]
    fn zero_rewards_give_zero_npnl() {
        let rewards = vec![step(0, 0.0, 0), step(1, 0.0, 0)];
        let market = vec![market(0, 2.0, 5)];
        let refs: Vec<&StepReward> = rewards.iter().collect();
        let mrefs: Vec<&StepMarket> = market.iter().collect();
        let m = trading_metrics(&refs, &mrefs, 3_600_000_000_000);
        assert_eq!(m.total_npnl, 0.0);
    }

    #[test]
    fn constant_inventory_gives_its_absolute_position() {
        let rewards = vec![step(0, 1.0, 4), step(1, 1.0, -4), step(2, 1.0, 4)];
        let refs: Vec<&StepReward> = rewards.iter().collect();
        let m = trading_metrics(&refs, &[], 3_600_000_000_000);
        assert_eq!(m.map, 4.0);
    }

    #[test]
    fn weighted_spread_matches_brute_force_on_hand_ticks() {
        // ten hand ticks with varying volume
        let spreads = [1.0, 2.0, 3.0, 1.0, 2.0, 4.0, 1.0, 2.0, 1.0, 3.0];
        let volumes = [5u64, 0, 10, 2, 0, 1, 7, 3, 0, 2];
        let market: Vec<StepMarket> = spreads
            .iter()
            .zip(&volumes)
            .enumerate()
            .map(|(i, (&s, &v))| StepMarket {
                time_ns: i as i64,
                instrument: 0,
                mid: 100.0,
                spread: s,
                volume: v,
            })
            .collect();
        let refs: Vec<&StepMarket> = market.iter().collect();
        let got = weighted_average_spread(&refs);
        let brute: f64 = spreads
            .iter()
            .zip(&volumes)
            .map(|(&s, &v)| s * v as f64)
            .sum::<f64>()
            / volumes.iter().sum::<u64>() as f64;
        assert!((got - brute).abs() < 1e-12);

        // reward 30 over that spread
        let rewards = vec![step(0, 30.0, 0)];
        let rrefs: Vec<&StepReward> = rewards.iter().collect();
        let m = trading_metrics(&rrefs, &refs, 3_600_000_000_000);
        assert!((m.total_npnl - 30.0 / brute).abs() < 1e-12);
    }

    #[test]
    fn npnl_is_scale_invariant_under_joint_rescaling() {
        let rewards = vec![step(0, 10.0, 0), step(1, 20.0, 0)];
        let market = vec![market(0, 2.0, 5), market(1, 3.0, 5)];
        let refs: Vec<&StepReward> = rewards.iter().collect();
        let mrefs: Vec<&StepMarket> = market.iter().collect();
        let base = trading_metrics(&refs, &mrefs, 3_600_000_000_000);

        let scaled_rewards: Vec<StepReward> = rewards
            .iter()
            .map(|r| step(r.time_ns, r.reward.total * 7.0, r.inventory))
            .collect();
        let scaled_market: Vec<StepMarket> = market
            .iter()
            .map(|m| StepMarket {
                spread: m.spread * 7.0,
                ..*m
            })
            .collect();
        let srefs: Vec<&StepReward> = scaled_rewards.iter().collect();
        let smrefs: Vec<&StepMarket> = scaled_market.iter().collect();
        let scaled = trading_metrics(&srefs, &smrefs, 3_600_000_000_000);
        assert!((base.total_npnl - scaled.total_npnl).abs() < 1e-9);
    }
}

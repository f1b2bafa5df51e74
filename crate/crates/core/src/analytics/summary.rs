use crate::lob::{BookEvent, BookEventKind, Order, OrderBook, TimeNs};

/// Order book summary statistics over a window: arrival rates per minute,
/// average sizes per event class, price-jump statistics, market impact and
/// the time-weighted best-level queue size.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LobSummaryStats {
    /// Trade (market order) arrivals per minute.
    pub trade_arrival_rate: f64,
    /// Average trade size in shares.
    pub avg_trade_size: f64,
    /// Trade size spread (standard deviation) in shares.
    pub trade_size_std: f64,
    /// Cancellation arrivals per minute (partial and full).
    pub cancel_arrival_rate: f64,
    pub avg_cancel_size: f64,
    /// Price jumps (mid moves of at least one tick) per minute.
    pub price_jump_rate: f64,
    /// Average jump size in ticks.
    pub avg_jump_size: f64,
    /// Mean signed mid move per unit traded volume.
    pub market_impact: f64,
    /// Time-weighted best-level queue size in shares.
    pub avg_queue_size: f64,
    pub n_events: usize,
    pub duration_minutes: f64,
}

/// Replay the event log and compute the summary statistics. `window`
/// restricts to events with time in [start, end); `None` spans the log.
pub fn lob_summary(events: &[BookEvent], window: Option<(TimeNs, TimeNs)>) -> LobSummaryStats {
    let in_window = |t: TimeNs| match window {
        Some((a, b)) => t >= a && t < b,
        None => true,
    };
    let mut book = OrderBook::new(1.0);
    let mut stats = LobSummaryStats::default();

    let mut trade_sizes: Vec<f64> = Vec::new();
    let mut cancel_sizes: Vec<f64> = Vec::new();
    let mut jumps: Vec<f64> = Vec::new();
    let mut signed_move = 0.0;
    let mut traded_volume = 0.0;
    let mut last_mid: Option<f64> = None;

    // time-weighted best-level queue size
    let mut queue_weighted = 0.0;
    let mut queue_time = 0.0;
    let mut last_t: Option<TimeNs> = None;

    let mut t_min: Option<TimeNs> = None;
    let mut t_max: Option<TimeNs> = None;

    for ev in events {
        // accumulate the time-weighted queue size with the pre-event state
        if in_window(ev.time_ns) {
            if let Some(prev_t) = last_t {
                let dt = (ev.time_ns - prev_t).max(0) as f64;
                let snap = book.snapshot(1);
                let bid_q = snap.bids.first().map(|&(_, q)| q as f64);
                let ask_q = snap.asks.first().map(|&(_, q)| q as f64);
                let level = match (bid_q, ask_q) {
                    (Some(b), Some(a)) => Some(0.5 * (b + a)),
                    (Some(b), None) => Some(b),
                    (None, Some(a)) => Some(a),
                    (None, None) => None,
                };
                if let Some(q) = level {
                    queue_weighted += q * dt;
                    queue_time += dt;
                }
            }
            last_t = Some(ev.time_ns);
            t_min = Some(t_min.map_or(ev.time_ns, |t: TimeNs| t.min(ev.time_ns)));
            t_max = Some(t_max.map_or(ev.time_ns, |t: TimeNs| t.max(ev.time_ns)));
        }

        let mid_before = book.quotes().mid;
        match ev.kind {
            BookEventKind::LimitBuy | BookEventKind::LimitSell => {
                let _ = book.submit_limit(Order::limit(
                    ev.order_id,
                    ev.agent_id,
                    ev.side,
                    ev.price_ticks.expect("limit carries price"),
                    ev.quantity,
                    ev.time_ns,
                ));
            }
            BookEventKind::MarketBuy | BookEventKind::MarketSell => {
                let _ =
                    book.submit_market(ev.order_id, ev.agent_id, ev.side, ev.quantity, ev.time_ns);
                if in_window(ev.time_ns) {
                    trade_sizes.push(ev.quantity as f64);
                    if let (Some(before), Some(after)) = (mid_before, book.quotes().mid) {
                        let sign = match ev.kind {
                            BookEventKind::MarketBuy => 1.0,
                            _ => -1.0,
                        };
                        signed_move += sign * (after - before);
                        traded_volume += ev.quantity as f64;
                    }
                }
            }
            BookEventKind::CancelPartial | BookEventKind::CancelFull => {
                let qty = match ev.kind {
                    BookEventKind::CancelPartial => Some(ev.quantity),
                    _ => None,
                };
                book.cancel(ev.order_id, qty, ev.time_ns);
                if in_window(ev.time_ns) {
                    cancel_sizes.push(ev.quantity as f64);
                }
            }
        }
        if in_window(ev.time_ns) {
            stats.n_events += 1;
            if let (Some(before), Some(after)) = (last_mid.or(mid_before), book.quotes().mid) {
                let jump = (after - before).abs();
                if jump >= 1.0 {
                    jumps.push(jump);
                }
            }
            last_mid = book.quotes().mid.or(last_mid);
        }
    }

    let duration_ns = match (window, t_min, t_max) {
        (Some((a, b)), _, _) => (b - a).max(1),
        (None, Some(a), Some(b)) => (b - a).max(1),
        _ => 1,
    };
    let minutes = duration_ns as f64 / 60e9;
    stats.duration_minutes = minutes;

    stats.trade_arrival_rate = trade_sizes.len() as f64 / minutes;
    stats.avg_trade_size = crate::stats::mean(&trade_sizes);
    stats.trade_size_std = crate::stats::std_dev(&trade_sizes);
    stats.cancel_arrival_rate = cancel_sizes.len() as f64 / minutes;
    stats.avg_cancel_size = crate::stats::mean(&cancel_sizes);
    stats.price_jump_rate = jumps.len() as f64 / minutes;
    stats.avg_jump_size = crate::stats::mean(&jumps);
    stats.market_impact = if traded_volume > 0.0 {
        signed_move / traded_volume
    } else {
        0.0
    };
    stats.avg_queue_size = if queue_time > 0.0 {
        queue_weighted / queue_time
    } else {
        0.0
    };
    stats
}

impl LobSummaryStats {
    pub fn to_csv_row(&self, label: &str) -> String {
        format!(
            "{label},{},{},{},{},{},{},{},{},{}\n",
            self.trade_arrival_rate,
            self.avg_trade_size,
            self.trade_size_std,
            self.cancel_arrival_rate,
            self.avg_cancel_size,
            self.price_jump_rate,
            self.avg_jump_size,
            self.market_impact,
            self.avg_queue_size
        )
    }

    pub fn csv_header() -> &'static str {
        "label,tar_per_min,ats_shares,tss_shares,car_per_min,acs_shares,pjr_per_min,ajs_ticks,mi,aqs_shares\n"
    }
}

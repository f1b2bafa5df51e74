use std::collections::HashMap;

use crate::lob::{BookEvent, BookEventKind, Order, OrderBook, OrderId, Side};

/// One bucket of the value-by-queue-position decomposition:
/// V = FP * (LSP - ASC), estimated from resting limit order lifecycles.
#[derive(Debug, Clone, PartialEq)]
pub struct QueuePositionValue {
    /// Inclusive position range (shares ahead at submission).
    pub position_lo: u64,
    pub position_hi: u64,
    pub n_orders: usize,
    pub n_filled: usize,
    /// Fill probability; None when the bucket had too few orders.
    pub fill_probability: Option<f64>,
    /// Mean side-adjusted distance of the quote from the mid at submission.
    pub liquidity_spread_premium: Option<f64>,
    /// Mean side-adjusted mid move from submission to fill, over fills.
    pub adverse_selection_cost: Option<f64>,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueueValueCurve {
    pub buckets: Vec<QueuePositionValue>,
    pub n_tracked: usize,
}

struct Lifecycle {
    side: Side,
    price: f64,
    position: u64,
    mid_submit: f64,
    filled: Option<f64>, // mid at first fill
}

const MIN_ORDERS_PER_BUCKET: usize = 5;

/// Estimate fill probability, liquidity spread premium and adverse
/// selection per queue-position bucket by replaying the event log with
/// queue-position tracking. Orders still open at the end of the log count
/// as unfilled. Positions are bucketed by empirical quantiles.
pub fn queue_value_curve(events: &[BookEvent], tick_size: f64, n_buckets: usize) -> QueueValueCurve {
    let mut book = OrderBook::new(tick_size);
    let mut tracked: HashMap<OrderId, Lifecycle> = HashMap::new();

    for ev in events {
        let mid_before = book.quotes().mid;
        match ev.kind {
            BookEventKind::LimitBuy | BookEventKind::LimitSell => {
                let order = Order::limit(
                    ev.order_id,
                    ev.agent_id,
                    ev.side,
                    ev.price_ticks.expect("limit event carries a price"),
                    ev.quantity,
                    ev.time_ns,
                );
                if let Ok(outcome) = book.submit_limit(order) {
                    for fill in &outcome.fills {
                        note_fill(&mut tracked, fill.maker_order_id, &book);
                    }
                    if outcome.resting {
                        if let (Some(mid), Ok(position)) =
                            (mid_before, book.queue_position(ev.order_id))
                        {
                            tracked.insert(
                                ev.order_id,
                                Lifecycle {
                                    side: ev.side,
                                    price: ev.price_ticks.unwrap() as f64,
                                    position,
                                    mid_submit: mid,
                                    filled: None,
                                },
                            );
                        }
                    }
                }
            }
            BookEventKind::MarketBuy | BookEventKind::MarketSell => {
                if let Ok(outcome) =
                    book.submit_market(ev.order_id, ev.agent_id, ev.side, ev.quantity, ev.time_ns)
                {
                    for fill in &outcome.fills {
                        note_fill(&mut tracked, fill.maker_order_id, &book);
                    }
                }
            }
            BookEventKind::CancelPartial => {
                book.cancel(ev.order_id, Some(ev.quantity), ev.time_ns);
            }
            BookEventKind::CancelFull => {
                book.cancel(ev.order_id, None, ev.time_ns);
            }
        }
    }

    let mut lifecycles: Vec<&Lifecycle> = tracked.values().collect();
    let n_tracked = lifecycles.len();
    if lifecycles.is_empty() || n_buckets == 0 {
        return QueueValueCurve {
            buckets: vec![],
            n_tracked,
        };
    }
    lifecycles.sort_by_key(|l| l.position);

    let mut buckets = Vec::with_capacity(n_buckets);
    let per = (lifecycles.len() as f64 / n_buckets as f64).ceil() as usize;
    for chunk in lifecycles.chunks(per.max(1)) {
        let n_orders = chunk.len();
        let n_filled = chunk.iter().filter(|l| l.filled.is_some()).count();
        let lo = chunk.first().unwrap().position;
        let hi = chunk.last().unwrap().position;
        let side_sign = |side: Side| match side {
            Side::Sell => 1.0,
            Side::Buy => -1.0,
        };
        let (fp, lsp, asc, value) = if n_orders >= MIN_ORDERS_PER_BUCKET {
            let fp = n_filled as f64 / n_orders as f64;
            let lsp = chunk
                .iter()
                .map(|l| side_sign(l.side) * (l.price - l.mid_submit))
                .sum::<f64>()
                / n_orders as f64;
            let asc = if n_filled > 0 {
                chunk
                    .iter()
                    .filter_map(|l| l.filled.map(|m| side_sign(l.side) * (m - l.mid_submit)))
                    .sum::<f64>()
                    / n_filled as f64
            } else {
                0.0
            };
            (Some(fp), Some(lsp), Some(asc), Some(fp * (lsp - asc)))
        } else {
            (None, None, None, None)
        };
        buckets.push(QueuePositionValue {
            position_lo: lo,
            position_hi: hi,
            n_orders,
            n_filled,
            fill_probability: fp,
            liquidity_spread_premium: lsp,
            adverse_selection_cost: asc,
            value,
        });
    }
    QueueValueCurve { buckets, n_tracked }
}

fn note_fill(tracked: &mut HashMap<OrderId, Lifecycle>, maker: OrderId, book: &OrderBook) {
    if let Some(life) = tracked.get_mut(&maker) {
        if life.filled.is_none() {
            // mid right after the fill carries the trade's impact
            let mid = book.quotes().mid.unwrap_or(life.mid_submit);
            life.filled = Some(mid);
        }
    }
}

impl QueueValueCurve {
    /// Pointwise identity check V = FP * (LSP - ASC) for estimated buckets.
    pub fn identity_holds(&self, tol: f64) -> bool {
        self.buckets.iter().all(|b| {
            match (
                b.fill_probability,
                b.liquidity_spread_premium,
                b.adverse_selection_cost,
                b.value,
            ) {
                (Some(fp), Some(lsp), Some(asc), Some(v)) => (v - fp * (lsp - asc)).abs() <= tol,
                (None, None, None, None) => true,
                _ => false,
            }
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "position_lo,position_hi,n_orders,n_filled,fill_probability,lsp,asc,value\n",
        );
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for b in &self.buckets {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                b.position_lo,
                b.position_hi,
                b.n_orders,
                b.n_filled,
                fmt(b.fill_probability),
                fmt(b.liquidity_spread_premium),
                fmt(b.adverse_selection_cost),
                fmt(b.value),
            ));
        }
        out
    }
}

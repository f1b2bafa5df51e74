use std::collections::HashMap;

use crate::dhp::{Stream, StreamEvent};
use crate::hawkes::MarkedEvent;
use crate::lob::{BookEventKind, BookSnapshot, Order, OrderBook, Side};

use super::itch::{AddOrder, ItchMessage};

/// Book reconstruction output: the six-letter event stream (as both marked
/// events and a feature-bearing model stream), periodic snapshots, and
/// descriptive statistics.
#[derive(Debug, Clone)]
pub struct ReconstructedStream {
    pub marked: Vec<MarkedEvent>,
    pub stream: Stream,
    pub snapshots: Vec<(u64, BookSnapshot)>,
    pub stats: ReconStats,
    pub book: OrderBook,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReconStats {
    /// Event token counts per alphabet index.
    pub tokens: [usize; 6],
    pub stream_length: usize,
    /// Messages referencing unknown order ids, dropped.
    pub dropped: usize,
}

#[derive(Debug, Clone, Copy)]
struct TrackedOrder {
    side: Side,
    remaining: u32,
}

const SNAPSHOT_DEPTH: usize = 10;

/// Replay parsed feed messages through the matching book and emit the
/// six-letter event stream. Executions and hidden trades map to the resting
/// side's counterparty (a lifted sell is a market buy). Replaces map to a
/// full cancel plus a fresh limit add.
pub fn reconstruct(messages: &[ItchMessage], snapshot_every: usize) -> ReconstructedStream {
    let mut book = OrderBook::new(1e-4);
    let mut tracked: HashMap<u64, TrackedOrder> = HashMap::new();
    let mut marked = Vec::new();
    let mut events = Vec::new();
    let mut snapshots = Vec::new();
    let mut stats = ReconStats::default();
    let mut last_t = f64::NEG_INFINITY;
    let mut next_internal_id: u64 = 1;
    // feed refs can collide with replace-generated ids; remap everything
    let mut ref_to_id: HashMap<u64, u64> = HashMap::new();

    let emit = |book: &OrderBook,
                    marked: &mut Vec<MarkedEvent>,
                    events: &mut Vec<StreamEvent>,
                    stats: &mut ReconStats,
                    last_t: &mut f64,
                    kind: BookEventKind,
                    t_ns: u64| {
        let quotes = book.quotes();
        let snap = book.snapshot(1);
        let bid_q = snap.bids.first().map(|&(_, q)| q as f64).unwrap_or(0.0);
        let ask_q = snap.asks.first().map(|&(_, q)| q as f64).unwrap_or(0.0);
        let imbalance = if bid_q + ask_q > 0.0 {
            (bid_q - ask_q) / (bid_q + ask_q)
        } else {
            0.0
        };
        let mut t = t_ns as f64 * 1e-9;
        if t <= *last_t {
            // strict ordering after tie-break: nudge by one nanosecond
            t = *last_t + 1e-9;
        }
        *last_t = t;
        let idx = kind.index();
        stats.tokens[idx] += 1;
        stats.stream_length += 1;
        marked.push(MarkedEvent::new(t, idx, idx));
        events.push(StreamEvent {
            t,
            kind: idx,
            spread: quotes.spread.map(|s| s as f64).unwrap_or(0.0),
            imbalance,
        });
    };

    let add_order = |book: &mut OrderBook,
                         tracked: &mut HashMap<u64, TrackedOrder>,
                         ref_to_id: &mut HashMap<u64, u64>,
                         next_internal_id: &mut u64,
                         stats: &mut ReconStats,
                         a: &AddOrder|
     -> Option<BookEventKind> {
        if ref_to_id.contains_key(&a.order_ref) || a.shares == 0 || a.price == 0 {
            stats.dropped += 1;
            return None;
        }
        let side = if a.side_sell { Side::Sell } else { Side::Buy };
        let id = *next_internal_id;
        *next_internal_id += 1;
        ref_to_id.insert(a.order_ref, id);
        let order = Order::limit(id, 0, side, a.price as i64, a.shares as u64, a.timestamp_ns as i64);
        if book.submit_limit(order).is_err() {
            stats.dropped += 1;
            ref_to_id.remove(&a.order_ref);
            return None;
        }
        tracked.insert(
            a.order_ref,
            TrackedOrder {
                side,
                remaining: a.shares,
            },
        );
        Some(match side {
            Side::Buy => BookEventKind::LimitBuy,
            Side::Sell => BookEventKind::LimitSell,
        })
    };

    for (n, msg) in messages.iter().enumerate() {
        let t_ns = msg.timestamp_ns();
        let kind = match msg {
            ItchMessage::AddOrder(a) | ItchMessage::AddOrderAttributed(a, _) => add_order(
                &mut book,
                &mut tracked,
                &mut ref_to_id,
                &mut next_internal_id,
                &mut stats,
                a,
            ),
            ItchMessage::Executed {
                order_ref, shares, ..
            }
            | ItchMessage::ExecutedWithPrice {
                order_ref, shares, ..
            } => match (tracked.get_mut(order_ref), ref_to_id.get(order_ref)) {
                (Some(ord), Some(&id)) => {
                    let take = (*shares).min(ord.remaining);
                    ord.remaining -= take;
                    let taker_kind = match ord.side {
                        Side::Buy => BookEventKind::MarketSell,
                        Side::Sell => BookEventKind::MarketBuy,
                    };
                    book.cancel(id, Some(take as u64), t_ns as i64);
                    if ord.remaining == 0 {
                        tracked.remove(order_ref);
                        ref_to_id.remove(order_ref);
                    }
                    Some(taker_kind)
                }
                _ => {
                    stats.dropped += 1;
                    None
                }
            },
            ItchMessage::Trade { side_sell, .. } => Some(if *side_sell {
                BookEventKind::MarketBuy
            } else {
                BookEventKind::MarketSell
            }),
            ItchMessage::Cancel {
                order_ref,
                cancelled_shares,
                ..
            } => match (tracked.get_mut(order_ref), ref_to_id.get(order_ref)) {
                (Some(ord), Some(&id)) => {
                    let take = (*cancelled_shares).min(ord.remaining);
                    ord.remaining -= take;
                    book.cancel(id, Some(take as u64), t_ns as i64);
                    if ord.remaining == 0 {
                        tracked.remove(order_ref);
                        ref_to_id.remove(order_ref);
                        Some(BookEventKind::CancelFull)
                    } else {
                        Some(BookEventKind::CancelPartial)
                    }
                }
                _ => {
                    stats.dropped += 1;
                    None
                }
            },
            ItchMessage::Delete { order_ref, .. } => {
                match (tracked.remove(order_ref), ref_to_id.remove(order_ref)) {
                    (Some(_), Some(id)) => {
                        book.cancel(id, None, t_ns as i64);
                        Some(BookEventKind::CancelFull)
                    }
                    _ => {
                        stats.dropped += 1;
                        None
                    }
                }
            }
            ItchMessage::Replace {
                original_ref,
                new_ref,
                shares,
                price,
                timestamp_ns,
            } => match (tracked.remove(original_ref), ref_to_id.remove(original_ref)) {
                (Some(orig), Some(id)) => {
                    book.cancel(id, None, t_ns as i64);
                    emit(
                        &book,
                        &mut marked,
                        &mut events,
                        &mut stats,
                        &mut last_t,
                        BookEventKind::CancelFull,
                        t_ns,
                    );
                    add_order(
                        &mut book,
                        &mut tracked,
                        &mut ref_to_id,
                        &mut next_internal_id,
                        &mut stats,
                        &AddOrder {
                            timestamp_ns: *timestamp_ns,
                            order_ref: *new_ref,
                            side_sell: orig.side == Side::Sell,
                            shares: *shares,
                            symbol: [b' '; 8],
                            price: *price,
                        },
                    )
                }
                _ => {
                    stats.dropped += 1;
                    None
                }
            },
        };
        if let Some(kind) = kind {
            emit(
                &book,
                &mut marked,
                &mut events,
                &mut stats,
                &mut last_t,
                kind,
                t_ns,
            );
        }
        if snapshot_every > 0 && (n + 1) % snapshot_every == 0 {
            snapshots.push((t_ns, book.snapshot(SNAPSHOT_DEPTH)));
        }
    }
    if let Some(msg) = messages.last() {
        snapshots.push((msg.timestamp_ns(), book.snapshot(SNAPSHOT_DEPTH)));
    }

    // point-process convention: the observation window starts at the first
    // event, so downstream likelihoods do not integrate the empty span from
    // midnight to the session open
    if let Some(first) = marked.first().map(|e| e.t) {
        for ev in marked.iter_mut() {
            ev.t -= first;
        }
        for ev in events.iter_mut() {
            ev.t -= first;
        }
    }
    let horizon = marked.last().map(|e| e.t + 1e-9).unwrap_or(0.0);
    ReconstructedStream {
        marked,
        stream: Stream { events, horizon },
        snapshots,
        stats,
        book,
    }
}

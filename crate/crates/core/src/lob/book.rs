use std::collections::{BTreeMap, HashMap, VecDeque};

use super::events::{BookEvent, BookEventKind};
use super::{AgentId, Fill, LobError, Order, OrderId, OrderKind, Price, Qty, Side, TimeNs};

/// Top-of-book view. `mid` and `spread` are present only when both sides are.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quotes {
    pub best_bid: Option<Price>,
    pub best_ask: Option<Price>,
    pub mid: Option<f64>,
    pub spread: Option<Price>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitOutcome {
    pub fills: Vec<Fill>,
    pub resting: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketOutcome {
    pub fills: Vec<Fill>,
    /// Residue that found no opposite liquidity; discarded, never rests.
    pub unfilled: Qty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CancelOutcome {
    Cancelled,
    PartiallyCancelled { remaining: Qty },
    NotFound,
}

/// Price-time priority limit order book for a single instrument.
///
/// Single-writer: the book is not internally synchronized, the simulation
/// kernel serializes access.
#[derive(Debug, Clone)]
pub struct OrderBook {
    tick_size: f64,
    bids: BTreeMap<Price, VecDeque<Order>>,
    asks: BTreeMap<Price, VecDeque<Order>>,
    /// order id -> (side, price level) for O(1) lookup of resting orders.
    index: HashMap<OrderId, (Side, Price)>,
    seq: u64,
    event_log: Vec<BookEvent>,
    self_match_prevention: bool,
}

impl OrderBook {
    pub fn new(tick_size: f64) -> Self {
        assert!(tick_size > 0.0, "tick size must be positive");
        OrderBook {
            tick_size,
            bids: BTreeMap::new(),
            asks: BTreeMap::new(),
            index: HashMap::new(),
            seq: 0,
            event_log: Vec::new(),
            self_match_prevention: false,
        }
    }

    pub fn with_self_match_prevention(tick_size: f64, prevention: bool) -> Self {
        let mut book = OrderBook::new(tick_size);
        book.self_match_prevention = prevention;
        book
    }

    pub fn tick_size(&self) -> f64 {
        self.tick_size
    }

    pub fn ticks_to_currency(&self, ticks: Price) -> f64 {
        ticks as f64 * self.tick_size
    }

    pub fn event_log(&self) -> &[BookEvent] {
        &self.event_log
    }

    pub fn seq(&self) -> u64 {
        self.seq
    }

    pub fn best_bid(&self) -> Option<Price> {
        self.bids.keys().next_back().copied()
    }

    pub fn best_ask(&self) -> Option<Price> {
        self.asks.keys().next().copied()
    }

    pub fn quotes(&self) -> Quotes {
        let best_bid = self.best_bid();
        let best_ask = self.best_ask();
        let (mid, spread) = match (best_bid, best_ask) {
            (Some(b), Some(a)) => (Some((b + a) as f64 / 2.0), Some(a - b)),
            _ => (None, None),
        };
        Quotes {
            best_bid,
            best_ask,
            mid,
            spread,
        }
    }

    /// Submit a limit order. The marketable portion executes against the
    /// opposite side best-first, FIFO within a level; any residue rests.
    pub fn submit_limit(&mut self, order: Order) -> Result<LimitOutcome, LobError> {
        if order.kind != OrderKind::Limit {
            return Err(LobError::WrongKind {
                expected: OrderKind::Limit,
            });
        }
        if order.quantity == 0 || order.remaining == 0 {
            return Err(LobError::ZeroQuantity);
        }
        let price = order.price_ticks.ok_or(LobError::BadPrice(0))?;
        if price < 1 {
            return Err(LobError::BadPrice(price));
        }
        if self.index.contains_key(&order.order_id) {
            return Err(LobError::DuplicateOrderId(order.order_id));
        }

        self.push_event(BookEvent {
            time_ns: order.submit_time,
            kind: match order.side {
                Side::Buy => BookEventKind::LimitBuy,
                Side::Sell => BookEventKind::LimitSell,
            },
            order_id: order.order_id,
            agent_id: order.agent_id,
            side: order.side,
            price_ticks: Some(price),
            quantity: order.remaining,
        });

        let mut incoming = order;
        let crosses = |side: Side, best: Price| match side {
            Side::Buy => best <= price,
            Side::Sell => best >= price,
        };
        let fills = self.match_against_book(&mut incoming, Some(crosses));

        let resting = incoming.remaining > 0;
        if resting {
            self.rest_order(incoming);
        }
        debug_assert!(!self.is_crossed());
        Ok(LimitOutcome { fills, resting })
    }

    /// Submit a market order: walks levels best-first until filled or the
    /// opposite side is exhausted. Unfilled residue is discarded.
    pub fn submit_market(
        &mut self,
        order_id: OrderId,
        agent_id: AgentId,
        side: Side,
        quantity: Qty,
        time_ns: TimeNs,
    ) -> Result<MarketOutcome, LobError> {
        if quantity == 0 {
            return Err(LobError::ZeroQuantity);
        }
        if self.index.contains_key(&order_id) {
            return Err(LobError::DuplicateOrderId(order_id));
        }

        self.push_event(BookEvent {
            time_ns,
            kind: match side {
                Side::Buy => BookEventKind::MarketBuy,
                Side::Sell => BookEventKind::MarketSell,
            },
            order_id,
            agent_id,
            side,
            price_ticks: None,
            quantity,
        });

        let mut incoming = Order {
            order_id,
            agent_id,
            side,
            price_ticks: None,
            quantity,
            remaining: quantity,
            submit_time: time_ns,
            kind: OrderKind::Market,
        };
        let fills = self.match_against_book(&mut incoming, None::<fn(Side, Price) -> bool>);
        Ok(MarketOutcome {
            fills,
            unfilled: incoming.remaining,
        })
    }

    /// Cancel `qty` shares (or the whole order when `qty` is `None` or at
    /// least the remaining size). Partial cancellation preserves the queue
    /// slot. Cancelling zero shares leaves the order untouched.
    pub fn cancel(&mut self, order_id: OrderId, qty: Option<Qty>, time_ns: TimeNs) -> CancelOutcome {
        let (side, price) = match self.index.get(&order_id) {
            Some(loc) => *loc,
            None => return CancelOutcome::NotFound,
        };
        let levels = match side {
            Side::Buy => &mut self.bids,
            Side::Sell => &mut self.asks,
        };
        let queue = levels.get_mut(&price).expect("indexed level exists");
        let pos = queue
            .iter()
            .position(|o| o.order_id == order_id)
            .expect("indexed order exists");

        match qty {
            Some(q) if q > 0 && q < queue[pos].remaining => {
                queue[pos].remaining -= q;
                let (agent_id, remaining) = (queue[pos].agent_id, queue[pos].remaining);
                self.push_event(BookEvent {
                    time_ns,
                    kind: BookEventKind::CancelPartial,
                    order_id,
                    agent_id,
                    side,
                    price_ticks: Some(price),
                    quantity: q,
                });
                CancelOutcome::PartiallyCancelled { remaining }
            }
            Some(0) => CancelOutcome::PartiallyCancelled {
                remaining: queue[pos].remaining,
            },
            _ => {
                let order = queue.remove(pos).expect("position in range");
                if queue.is_empty() {
                    levels.remove(&price);
                }
                self.index.remove(&order_id);
                self.push_event(BookEvent {
                    time_ns,
                    kind: BookEventKind::CancelFull,
                    order_id,
                    agent_id: order.agent_id,
                    side,
                    price_ticks: Some(price),
                    quantity: order.remaining,
                });
                CancelOutcome::Cancelled
            }
        }
    }

    /// Shares resting at the same price with earlier priority.
    pub fn queue_position(&self, order_id: OrderId) -> Result<Qty, LobError> {
        let (side, price) = self
            .index
            .get(&order_id)
            .copied()
            .ok_or(LobError::NotFound(order_id))?;
        let queue = match side {
            Side::Buy => &self.bids[&price],
            Side::Sell => &self.asks[&price],
        };
        let mut ahead = 0;
        for o in queue {
            if o.order_id == order_id {
                return Ok(ahead);
            }
            ahead += o.remaining;
        }
        unreachable!("indexed order must be in its level queue")
    }

    pub fn order(&self, order_id: OrderId) -> Option<&Order> {
        let (side, price) = self.index.get(&order_id)?;
        let queue = match side {
            Side::Buy => &self.bids[price],
            Side::Sell => &self.asks[price],
        };
        queue.iter().find(|o| o.order_id == order_id)
    }

    /// Top `depth` levels per side as (price, aggregate quantity) ladders,
    /// bids descending, asks ascending.
    pub fn snapshot(&self, depth: usize) -> BookSnapshot {
        let bids = self
            .bids
            .iter()
            .rev()
            .take(depth)
            .map(|(p, q)| (*p, q.iter().map(|o| o.remaining).sum()))
            .collect();
        let asks = self
            .asks
            .iter()
            .take(depth)
            .map(|(p, q)| (*p, q.iter().map(|o| o.remaining).sum()))
            .collect();
        BookSnapshot { bids, asks }
    }

    /// Aggregate resting depth on one side.
    pub fn side_depth(&self, side: Side) -> Qty {
        let levels = match side {
            Side::Buy => &self.bids,
            Side::Sell => &self.asks,
        };
        levels
            .values()
            .map(|q| q.iter().map(|o| o.remaining).sum::<Qty>())
            .sum()
    }

    pub fn is_crossed(&self) -> bool {
        match (self.best_bid(), self.best_ask()) {
            (Some(b), Some(a)) => b >= a,
            _ => false,
        }
    }

    /// Comparable book state: (side, price, id, remaining, agent) per resting
    /// order in priority order, plus the sequence counter.
    pub fn state_digest(&self) -> (Vec<(u8, Price, OrderId, Qty, AgentId)>, u64) {
        let mut out = Vec::new();
        for (p, q) in self.bids.iter().rev() {
            for o in q {
                out.push((0u8, *p, o.order_id, o.remaining, o.agent_id));
            }
        }
        for (p, q) in self.asks.iter() {
            for o in q {
                out.push((1u8, *p, o.order_id, o.remaining, o.agent_id));
            }
        }
        (out, self.seq)
    }

    /// Replay an event log into a fresh book. Replaying a book's own log
    /// reproduces its state exactly.
    pub fn replay(tick_size: f64, events: &[BookEvent]) -> OrderBook {
        let mut book = OrderBook::new(tick_size);
        for ev in events {
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
                    book.submit_limit(order).expect("replayed limit is valid");
                }
                BookEventKind::MarketBuy | BookEventKind::MarketSell => {
                    book.submit_market(ev.order_id, ev.agent_id, ev.side, ev.quantity, ev.time_ns)
                        .expect("replayed market is valid");
                }
                BookEventKind::CancelPartial => {
                    book.cancel(ev.order_id, Some(ev.quantity), ev.time_ns);
                }
                BookEventKind::CancelFull => {
                    book.cancel(ev.order_id, None, ev.time_ns);
                }
            }
        }
        book
    }

    fn push_event(&mut self, event: BookEvent) {
        self.seq += 1;
        self.event_log.push(event);
    }

    /// Match `incoming` against the opposite side. `crosses` limits matching
    /// to levels satisfying the limit price; `None` walks the whole side.
    fn match_against_book(
        &mut self,
        incoming: &mut Order,
        crosses: Option<impl Fn(Side, Price) -> bool>,
    ) -> Vec<Fill> {
        let mut fills = Vec::new();
        while incoming.remaining > 0 {
            let best = match incoming.side {
                Side::Buy => self.best_ask(),
                Side::Sell => self.best_bid(),
            };
            let level = match best {
                Some(p) => p,
                None => break,
            };
            if let Some(check) = &crosses {
                if !check(incoming.side, level) {
                    break;
                }
            }
            let levels = match incoming.side {
                Side::Buy => &mut self.asks,
                Side::Sell => &mut self.bids,
            };
            let queue = levels.get_mut(&level).expect("best level exists");
            let maker = queue.front_mut().expect("level queues are never empty");

            if self.self_match_prevention && maker.agent_id == incoming.agent_id {
                // Cancel-resting policy: the stale own order leaves the book
                // without trading and matching continues.
                let dead = queue.pop_front().expect("front exists");
                if queue.is_empty() {
                    levels.remove(&level);
                }
                self.index.remove(&dead.order_id);
                self.push_event(BookEvent {
                    time_ns: incoming.submit_time,
                    kind: BookEventKind::CancelFull,
                    order_id: dead.order_id,
                    agent_id: dead.agent_id,
                    side: dead.side,
                    price_ticks: Some(level),
                    quantity: dead.remaining,
                });
                continue;
            }

            let qty = incoming.remaining.min(maker.remaining);
            if maker.agent_id == incoming.agent_id {
                log::debug!(
                    "self-match: agent {} order {} against own order {}",
                    incoming.agent_id,
                    incoming.order_id,
                    maker.order_id
                );
            }
            fills.push(Fill {
                maker_order_id: maker.order_id,
                taker_order_id: incoming.order_id,
                maker_agent_id: maker.agent_id,
                taker_agent_id: incoming.agent_id,
                price_ticks: level,
                quantity: qty,
                time_ns: incoming.submit_time,
            });
            incoming.remaining -= qty;
            maker.remaining -= qty;
            if maker.remaining == 0 {
                let done = queue.pop_front().expect("front exists");
                self.index.remove(&done.order_id);
                if queue.is_empty() {
                    levels.remove(&level);
                }
            }
        }
        fills
    }

    /// Rest a limit order residue. FIFO within a level is by submit time then
    /// arrival sequence, so out-of-order timestamps insert mid-queue.
    fn rest_order(&mut self, order: Order) {
        let price = order.price_ticks.expect("resting order has a price");
        let side = order.side;
        self.index.insert(order.order_id, (side, price));
        let levels = match side {
            Side::Buy => &mut self.bids,
            Side::Sell => &mut self.asks,
        };
        let queue = levels.entry(price).or_default();
        let pos = queue
            .iter()
            .position(|o| o.submit_time > order.submit_time)
            .unwrap_or(queue.len());
        queue.insert(pos, order);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BookSnapshot {
    pub bids: Vec<(Price, Qty)>,
    pub asks: Vec<(Price, Qty)>,
}

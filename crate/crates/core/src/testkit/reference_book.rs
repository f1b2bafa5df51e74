use rand::Rng;

use crate::lob::{Fill, OrderId, Price, Qty, Side, TimeNs};

#[derive(Debug, Clone)]
struct RefOrder {
    id: OrderId,
    agent: u64,
    side: Side,
    price: Price,
    remaining: Qty,
    time: TimeNs,
    seq: u64,
}

/// Naive O(n^2) price-time matcher over a flat order list. No price maps, no
/// queues: every fill re-scans all resting orders for the best price and the
/// earliest (time, seq) within it.
#[derive(Debug, Default)]
pub struct ReferenceBook {
    resting: Vec<RefOrder>,
    seq: u64,
}

impl ReferenceBook {
    pub fn new() -> Self {
        ReferenceBook::default()
    }

    fn best_opposite(&self, taker_side: Side, limit: Option<Price>) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, o) in self.resting.iter().enumerate() {
            if o.side == taker_side {
                continue;
            }
            let crosses = match (taker_side, limit) {
                (Side::Buy, Some(p)) => o.price <= p,
                (Side::Sell, Some(p)) => o.price >= p,
                (_, None) => true,
            };
            if !crosses {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(j) => {
                    let b = &self.resting[j];
                    let better_price = match taker_side {
                        Side::Buy => o.price < b.price,
                        Side::Sell => o.price > b.price,
                    };
                    let same_price_earlier =
                        o.price == b.price && (o.time, o.seq) < (b.time, b.seq);
                    if better_price || same_price_earlier {
                        Some(i)
                    } else {
                        Some(j)
                    }
                }
            };
        }
        best
    }

    fn execute(
        &mut self,
        id: OrderId,
        agent: u64,
        side: Side,
        mut qty: Qty,
        limit: Option<Price>,
        time: TimeNs,
    ) -> Vec<Fill> {
        let mut fills = Vec::new();
        while qty > 0 {
            let idx = match self.best_opposite(side, limit) {
                Some(i) => i,
                None => break,
            };
            let take = qty.min(self.resting[idx].remaining);
            let maker = &mut self.resting[idx];
            fills.push(Fill {
                maker_order_id: maker.id,
                taker_order_id: id,
                maker_agent_id: maker.agent,
                taker_agent_id: agent,
                price_ticks: maker.price,
                quantity: take,
                time_ns: time,
            });
            maker.remaining -= take;
            qty -= take;
            if self.resting[idx].remaining == 0 {
                self.resting.remove(idx);
            }
        }
        fills
    }

    pub fn submit_limit(
        &mut self,
        id: OrderId,
        agent: u64,
        side: Side,
        price: Price,
        qty: Qty,
        time: TimeNs,
    ) -> Vec<Fill> {
        self.seq += 1;
        let seq = self.seq;
        let fills = self.execute(id, agent, side, qty, Some(price), time);
        let filled: Qty = fills.iter().map(|f| f.quantity).sum();
        if filled < qty {
            self.resting.push(RefOrder {
                id,
                agent,
                side,
                price,
                remaining: qty - filled,
                time,
                seq,
            });
        }
        fills
    }

    pub fn submit_market(
        &mut self,
        id: OrderId,
        agent: u64,
        side: Side,
        qty: Qty,
        time: TimeNs,
    ) -> Vec<Fill> {
        self.seq += 1;
        self.execute(id, agent, side, qty, None, time)
    }

    pub fn cancel(&mut self, id: OrderId, qty: Option<Qty>) -> bool {
        let Some(idx) = self.resting.iter().position(|o| o.id == id) else {
            return false;
        };
        match qty {
            Some(q) if q > 0 && q < self.resting[idx].remaining => {
                self.resting[idx].remaining -= q;
            }
            Some(0) => {}
            _ => {
                self.resting.remove(idx);
            }
        }
        true
    }

    /// Resting orders as (side, price, id, remaining), bids best-first then
    /// asks best-first, FIFO within a level.
    pub fn sorted_state(&self) -> Vec<(u8, Price, OrderId, Qty)> {
        let mut rows: Vec<&RefOrder> = self.resting.iter().collect();
        rows.sort_by_key(|o| {
            let side_rank = match o.side {
                Side::Buy => 0u8,
                Side::Sell => 1u8,
            };
            let price_rank = match o.side {
                Side::Buy => -o.price,
                Side::Sell => o.price,
            };
            (side_rank, price_rank, o.time, o.seq)
        });
        rows.iter()
            .map(|o| {
                (
                    match o.side {
                        Side::Buy => 0u8,
                        Side::Sell => 1u8,
                    },
                    o.price,
                    o.id,
                    o.remaining,
                )
            })
            .collect()
    }

    pub fn live_ids(&self) -> Vec<OrderId> {
        self.resting.iter().map(|o| o.id).collect()
    }
}

/// One operation of a random matcher workload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceOp {
    Limit {
        id: OrderId,
        side: Side,
        price: Price,
        qty: Qty,
    },
    Market {
        id: OrderId,
        side: Side,
        qty: Qty,
    },
    Cancel {
        id: OrderId,
        qty: Option<Qty>,
    },
}

/// Generator for random operation streams used by the oracle-equivalence
/// checks. Cancels target ids known to have rested at some point.
pub struct RandomOpStream {
    next_id: OrderId,
    submitted: Vec<OrderId>,
}

impl RandomOpStream {
    pub fn new() -> Self {
        RandomOpStream {
            next_id: 1,
            submitted: Vec::new(),
        }
    }

    pub fn next_op<R: Rng>(&mut self, rng: &mut R) -> ReferenceOp {
        let roll: f64 = rng.random();
        let side = if rng.random::<bool>() {
            Side::Buy
        } else {
            Side::Sell
        };
        if roll < 0.55 || self.submitted.is_empty() {
            let id = self.next_id;
            self.next_id += 1;
            self.submitted.push(id);
            ReferenceOp::Limit {
                id,
                side,
                price: rng.random_range(80..=120),
                qty: rng.random_range(1..=50),
            }
        } else if roll < 0.72 {
            let id = self.next_id;
            self.next_id += 1;
            ReferenceOp::Market {
                id,
                side,
                qty: rng.random_range(1..=80),
            }
        } else {
            let id = self.submitted[rng.random_range(0..self.submitted.len())];
            let qty = if rng.random::<bool>() {
                None
            } else {
                Some(rng.random_range(1..=20))
            };
            ReferenceOp::Cancel { id, qty }
        }
    }
}

impl Default for RandomOpStream {
    fn default() -> Self {
        RandomOpStream::new()
    }
}

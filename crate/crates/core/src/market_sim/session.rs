use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agents::{
    reward, AgentError, ExecutionReport, InventoryState, MarketView, OpenOrder, OrderIntent,
    RewardBreakdown, Strategy, StrategyContext, StrategyRegistry,
};
use crate::distributions::PowerLawParams;
use crate::lob::{
    AgentId, BookEvent, BookSnapshot, Order, OrderBook, Price, Qty, Side, TimeNs,
};
use crate::market_sim::fix::{decode_fix, encode_fix, tags, FixMessage};

/// Message transport parameters: fixed-plus-jitter latency and a per-agent
/// token throttle. Throttling defers a message to the next window without
/// reordering the agent's stream.
#[derive(Debug, Clone)]
pub struct KernelConfig {
    pub latency_fixed_ns: TimeNs,
    pub latency_jitter_ns: TimeNs,
    pub throttle_messages: u32,
    pub throttle_interval_ns: TimeNs,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            latency_fixed_ns: 10_000,
            latency_jitter_ns: 5_000,
            throttle_messages: 100,
            throttle_interval_ns: 1_000_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub instruments: Vec<String>,
    pub tick_size: f64,
    /// Nanoseconds since midnight; defaults to the 09:30-16:00 trading day.
    pub open_ns: TimeNs,
    pub close_ns: TimeNs,
    pub initial_price_ticks: Price,
    /// Warm-start depth seeded by the exchange around the initial price.
    pub seed_book_levels: usize,
    pub seed_book_qty: Qty,
    /// (strategy name, count) pairs resolved through the registry.
    pub census: Vec<(String, usize)>,
    pub capital_exponent: f64,
    pub capital_scale: f64,
    /// Inventory bounds are power-law draws times this scale.
    pub inventory_bound_scale: f64,
    /// Fixed inventory bound for market-maker classes (dhmm/nhmm/pmm);
    /// 0 falls back to the power-law draw.
    pub mm_inventory_bound: i64,
    pub transaction_penalty: f64,
    pub cancellations_enabled: bool,
    /// Reporting cadence.
    pub step_ns: TimeNs,
    pub snapshot_every_steps: usize,
    pub snapshot_depth: usize,
    pub kernel: KernelConfig,
    pub seed: u64,
    /// Hard budget on transported messages.
    pub max_messages: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            instruments: vec!["TEST".to_string()],
            tick_size: 0.01,
            open_ns: 34_200_000_000_000,  // 09:30
            close_ns: 57_600_000_000_000, // 16:00
            initial_price_ticks: 10_000,
            seed_book_levels: 3,
            seed_book_qty: 50,
            census: vec![
                ("chartist".to_string(), 60),
                ("fundamental".to_string(), 30),
                ("noise".to_string(), 9),
            ],
            capital_exponent: 2.3,
            capital_scale: 1e4,
            inventory_bound_scale: 1e3,
            transaction_penalty: 0.06,
            mm_inventory_bound: 0,
            cancellations_enabled: true,
            step_ns: 1_000_000_000,
            snapshot_every_steps: 60,
            snapshot_depth: 10,
            kernel: KernelConfig::default(),
            seed: 1,
            max_messages: 20_000_000,
        }
    }
}

impl SessionConfig {
    /// Shorten the trading day, keeping the 09:30 open.
    pub fn with_duration_secs(mut self, secs: u64) -> Self {
        self.close_ns = self.open_ns + (secs as TimeNs) * 1_000_000_000;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FillRecord {
    pub time_ns: TimeNs,
    pub instrument: usize,
    pub maker_agent: AgentId,
    pub taker_agent: AgentId,
    pub maker_order: u64,
    pub taker_order: u64,
    pub price_ticks: Price,
    pub quantity: Qty,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReward {
    pub time_ns: TimeNs,
    pub agent_id: AgentId,
    pub reward: RewardBreakdown,
    pub inventory: i64,
}

/// Per-step market state of one instrument: mid, spread, traded volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMarket {
    pub time_ns: TimeNs,
    pub instrument: usize,
    pub mid: f64,
    pub spread: f64,
    pub volume: Qty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSummary {
    pub agent_id: AgentId,
    pub kind: String,
    pub instrument: usize,
    pub capital: f64,
    pub final_inventory: i64,
    pub final_cash_ticks: i64,
    pub unfilled_close_residue: Qty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionReport {
    pub event_logs: Vec<Vec<BookEvent>>,
    pub fills: Vec<FillRecord>,
    pub rewards: Vec<StepReward>,
    pub market: Vec<StepMarket>,
    pub snapshots: Vec<(TimeNs, usize, BookSnapshot)>,
    pub agents: Vec<AgentSummary>,
    pub incidents: usize,
    pub messages_sent: usize,
    pub final_mids: Vec<f64>,
}

/// The exchange's own agent id: seeds the warm-start book and absorbs
/// nothing else.
pub const EXCHANGE_AGENT: AgentId = 0;

struct AgentRec {
    strategy: Box<dyn Strategy>,
    kind: String,
    instrument: usize,
    inv: InventoryState,
    cash_ticks: i64,
    rng: ChaCha8Rng,
    open_orders: Vec<OpenOrder>,
    ask_fills: Vec<(Qty, Price)>,
    bid_fills: Vec<(Qty, Price)>,
    executed_volume: Qty,
    throttle_window: i64,
    throttle_sent: u32,
    send_floor: TimeNs,
    arrival_floor: TimeNs,
    unfilled_close_residue: Qty,
}

enum Payload {
    Wake,
    EngineMsg { instrument: usize, bytes: Vec<u8> },
    Report { bytes: Vec<u8> },
    Step,
    Close,
}

struct QueuedEvent {
    time: TimeNs,
    class: u8,
    agent: AgentId,
    seq: u64,
    payload: Payload,
}

impl PartialEq for QueuedEvent {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.class, self.agent, self.seq)
            == (other.time, other.class, other.agent, other.seq)
    }
}
impl Eq for QueuedEvent {}
impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueuedEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert for earliest-first
        (other.time, other.class, other.agent, other.seq).cmp(&(
            self.time,
            self.class,
            self.agent,
            self.seq,
        ))
    }
}

/// Power-law initial capital draws scaled by the configured base.
pub fn allocate_capital<R: Rng>(
    n: usize,
    law: &PowerLawParams,
    scale: f64,
    rng: &mut R,
) -> Vec<f64> {
    (0..n).map(|_| law.sample(rng) * scale).collect()
}

struct Session {
    config: SessionConfig,
    books: Vec<OrderBook>,
    broadcast_cursor: Vec<usize>,
    agents: Vec<AgentRec>,
    heap: BinaryHeap<QueuedEvent>,
    seq: u64,
    kernel_rng: ChaCha8Rng,
    next_order_id: u64,
    order_owner: std::collections::HashMap<u64, AgentId>,
    last_mid: Vec<f64>,
    step_mids: Vec<(f64, f64)>, // (previous step mid, one before) per instrument
    step_volume: Vec<Qty>,
    report: SessionReport,
    steps_done: usize,
    closed: bool,
}

impl Session {
    fn push(&mut self, time: TimeNs, class: u8, agent: AgentId, payload: Payload) {
        self.seq += 1;
        self.heap.push(QueuedEvent {
            time,
            class,
            agent,
            seq: self.seq,
            payload,
        });
    }

    fn quotes_view(&self, instrument: usize) -> (crate::lob::Quotes, BookSnapshot) {
        let book = &self.books[instrument];
        (book.quotes(), book.snapshot(self.config.snapshot_depth))
    }

    fn make_view<'a>(
        &self,
        agent: &AgentRec,
        now: TimeNs,
        quotes: crate::lob::Quotes,
        depth: &'a BookSnapshot,
        open_orders: &'a [OpenOrder],
    ) -> MarketView<'a> {
        let (m1, m2) = self.step_mids[agent.instrument];
        MarketView {
            now_ns: now,
            quotes,
            depth,
            prev_mid: if m1 > 0.0 { Some(m1) } else { None },
            prev_prev_mid: if m2 > 0.0 { Some(m2) } else { None },
            inventory: agent.inv,
            open_orders,
            cancellations_enabled: self.config.cancellations_enabled,
        }
    }

    /// Throttled send time at or after `candidate`, preserving per-agent
    /// order.
    fn schedule_send(&mut self, agent: AgentId, candidate: TimeNs) -> TimeNs {
        let open = self.config.open_ns;
        let interval = self.config.kernel.throttle_interval_ns.max(1);
        let max_msgs = self.config.kernel.throttle_messages.max(1);
        let rec = &mut self.agents[agent as usize];
        let mut t = candidate.max(rec.send_floor);
        loop {
            let window = (t - open) / interval;
            if window != rec.throttle_window {
                rec.throttle_window = window;
                rec.throttle_sent = 0;
            }
            if rec.throttle_sent < max_msgs {
                rec.throttle_sent += 1;
                rec.send_floor = t;
                return t;
            }
            t = open + (window + 1) * interval;
        }
    }

    fn transport(&mut self, agent: AgentId, instrument: usize, msg: &FixMessage, now: TimeNs) {
        if self.report.messages_sent >= self.config.max_messages {
            return;
        }
        let send = self.schedule_send(agent, now);
        let jitter = if self.config.kernel.latency_jitter_ns > 0 {
            self.kernel_rng
                .random_range(0..self.config.kernel.latency_jitter_ns)
        } else {
            0
        };
        let mut arrival = send + self.config.kernel.latency_fixed_ns + jitter;
        // transport never reorders one agent's messages
        let rec = &mut self.agents[agent as usize];
        arrival = arrival.max(rec.arrival_floor + 1);
        rec.arrival_floor = arrival;
        self.report.messages_sent += 1;
        self.push(
            arrival,
            0,
            agent,
            Payload::EngineMsg {
                instrument,
                bytes: encode_fix(msg),
            },
        );
    }

    fn intent_to_fix(&mut self, agent: AgentId, intent: &OrderIntent, now: TimeNs) -> FixMessage {
        let instrument = self.agents[agent as usize].instrument;
        let symbol = self.config.instruments[instrument].clone();
        match intent {
            OrderIntent::Limit {
                side,
                price_ticks,
                qty,
            } => {
                let id = self.next_order_id;
                self.next_order_id += 1;
                self.order_owner.insert(id, agent);
                FixMessage::new_order(id, &symbol, *side, *qty, Some(*price_ticks), now)
            }
            OrderIntent::Market { side, qty } => {
                let id = self.next_order_id;
                self.next_order_id += 1;
                self.order_owner.insert(id, agent);
                FixMessage::new_order(id, &symbol, *side, *qty, None, now)
            }
            OrderIntent::Cancel { order_id, qty } => {
                FixMessage::cancel(*order_id, &symbol, *qty, now)
            }
        }
    }

    fn broadcast_new_events(&mut self, instrument: usize) {
        let (quotes, depth) = self.quotes_view(instrument);
        let events: Vec<BookEvent> = {
            let log = self.books[instrument].event_log();
            let cursor = self.broadcast_cursor[instrument];
            let new = log[cursor..].to_vec();
            self.broadcast_cursor[instrument] = log.len();
            new
        };
        if events.is_empty() {
            return;
        }
        let (m1, m2) = self.step_mids[instrument];
        let cancels = self.config.cancellations_enabled;
        for rec in self.agents.iter_mut().skip(1) {
            if rec.instrument != instrument {
                continue;
            }
            for ev in &events {
                let view = MarketView {
                    now_ns: ev.time_ns,
                    quotes,
                    depth: &depth,
                    prev_mid: if m1 > 0.0 { Some(m1) } else { None },
                    prev_prev_mid: if m2 > 0.0 { Some(m2) } else { None },
                    inventory: rec.inv,
                    open_orders: &[],
                    cancellations_enabled: cancels,
                };
                rec.strategy.on_book_event(ev, &view);
            }
        }
    }

    fn settle_fill(&mut self, instrument: usize, fill: &crate::lob::Fill, taker_side: Side) {
        self.report.fills.push(FillRecord {
            time_ns: fill.time_ns,
            instrument,
            maker_agent: fill.maker_agent_id,
            taker_agent: fill.taker_agent_id,
            maker_order: fill.maker_order_id,
            taker_order: fill.taker_order_id,
            price_ticks: fill.price_ticks,
            quantity: fill.quantity,
        });
        self.step_volume[instrument] += fill.quantity;
        let maker_side = taker_side.opposite();
        let (buyer, seller) = match maker_side {
            Side::Sell => (fill.taker_agent_id, fill.maker_agent_id),
            Side::Buy => (fill.maker_agent_id, fill.taker_agent_id),
        };
        let value = fill.price_ticks * fill.quantity as i64;

        let buyer_rec = &mut self.agents[buyer as usize];
        buyer_rec.cash_ticks -= value;
        buyer_rec.inv.inventory += fill.quantity as i64;
        buyer_rec.bid_fills.push((fill.quantity, fill.price_ticks));
        buyer_rec.executed_volume += fill.quantity;

        let seller_rec = &mut self.agents[seller as usize];
        seller_rec.cash_ticks += value;
        seller_rec.inv.inventory -= fill.quantity as i64;
        seller_rec.ask_fills.push((fill.quantity, fill.price_ticks));
        seller_rec.executed_volume += fill.quantity;

        // maker open-order bookkeeping
        let maker_rec = &mut self.agents[fill.maker_agent_id as usize];
        if let Some(pos) = maker_rec
            .open_orders
            .iter()
            .position(|o| o.order_id == fill.maker_order_id)
        {
            let o = &mut maker_rec.open_orders[pos];
            o.remaining = o.remaining.saturating_sub(fill.quantity);
            if o.remaining == 0 {
                maker_rec.open_orders.remove(pos);
            }
        }

        // execution reports to both parties
        let symbol = self.config.instruments[instrument].clone();
        for (agent, side, order_id) in [
            (buyer, Side::Buy, if maker_side == Side::Buy { fill.maker_order_id } else { fill.taker_order_id }),
            (seller, Side::Sell, if maker_side == Side::Sell { fill.maker_order_id } else { fill.taker_order_id }),
        ] {
            if agent == EXCHANGE_AGENT {
                continue;
            }
            let leaves = self.agents[agent as usize]
                .open_orders
                .iter()
                .find(|o| o.order_id == order_id)
                .map(|o| o.remaining)
                .unwrap_or(0);
            let report = FixMessage::execution_report(
                order_id,
                &symbol,
                side,
                fill.price_ticks,
                fill.quantity,
                leaves,
                fill.time_ns,
            );
            let jitter = if self.config.kernel.latency_jitter_ns > 0 {
                self.kernel_rng
                    .random_range(0..self.config.kernel.latency_jitter_ns)
            } else {
                0
            };
            let arrival = fill.time_ns + self.config.kernel.latency_fixed_ns + jitter;
            self.push(arrival, 1, agent, Payload::Report { bytes: encode_fix(&report) });
        }
    }

    /// Apply one decoded message to the matching engine. Returns false on a
    /// rejected/malformed message (an incident).
    fn apply_message(&mut self, agent: AgentId, instrument: usize, msg: &FixMessage, now: TimeNs) -> bool {
        let kind = msg.msg_type().unwrap_or("");
        match kind {
            "D" => {
                let (Ok(id), Ok(side), Ok(qty), Ok(price)) = (
                    msg.parsed_cl_ord_id(),
                    msg.parsed_side(),
                    msg.parsed_qty(),
                    msg.parsed_price(),
                ) else {
                    return false;
                };
                match price {
                    Some(p) => {
                        let order = Order::limit(id, agent, side, p, qty, now);
                        match self.books[instrument].submit_limit(order) {
                            Ok(outcome) => {
                                if outcome.resting {
                                    let remaining = qty
                                        - outcome.fills.iter().map(|f| f.quantity).sum::<Qty>();
                                    self.agents[agent as usize].open_orders.push(OpenOrder {
                                        order_id: id,
                                        side,
                                        price_ticks: p,
                                        remaining,
                                    });
                                }
                                for fill in outcome.fills.clone() {
                                    self.settle_fill(instrument, &fill, side);
                                }
                                true
                            }
                            Err(_) => false,
                        }
                    }
                    None => match self.books[instrument].submit_market(id, agent, side, qty, now) {
                        Ok(outcome) => {
                            if outcome.unfilled > 0 {
                                log::debug!(
                                    "market order {id} of agent {agent} left {} unfilled",
                                    outcome.unfilled
                                );
                            }
                            for fill in outcome.fills.clone() {
                                self.settle_fill(instrument, &fill, side);
                            }
                            true
                        }
                        Err(_) => false,
                    },
                }
            }
            "F" => {
                let Ok(id) = msg.parsed_cl_ord_id() else {
                    return false;
                };
                let qty = msg.get(tags::ORDER_QTY).and_then(|q| q.parse().ok());
                // only the owner may cancel
                if self.order_owner.get(&id) != Some(&agent) {
                    return false;
                }
                let outcome = self.books[instrument].cancel(id, qty, now);
                let rec = &mut self.agents[agent as usize];
                match outcome {
                    crate::lob::CancelOutcome::Cancelled => {
                        rec.open_orders.retain(|o| o.order_id != id);
                    }
                    crate::lob::CancelOutcome::PartiallyCancelled { remaining } => {
                        if let Some(o) = rec.open_orders.iter_mut().find(|o| o.order_id == id) {
                            o.remaining = remaining;
                        }
                    }
                    crate::lob::CancelOutcome::NotFound => {}
                }
                true
            }
            _ => false,
        }
    }

    fn update_mid(&mut self, instrument: usize) {
        if let Some(mid) = self.books[instrument].quotes().mid {
            self.last_mid[instrument] = mid;
        }
    }

    fn record_step(&mut self, now: TimeNs) {
        self.steps_done += 1;
        for instrument in 0..self.books.len() {
            let quotes = self.books[instrument].quotes();
            let mid = quotes.mid.unwrap_or(self.last_mid[instrument]);
            let spread = quotes.spread.map(|s| s as f64).unwrap_or(0.0);
            self.report.market.push(StepMarket {
                time_ns: now,
                instrument,
                mid,
                spread,
                volume: self.step_volume[instrument],
            });
            self.step_volume[instrument] = 0;
            if self.config.snapshot_every_steps > 0
                && self.steps_done % self.config.snapshot_every_steps == 0
            {
                self.report.snapshots.push((
                    now,
                    instrument,
                    self.books[instrument].snapshot(self.config.snapshot_depth),
                ));
            }
        }
        let penalty = self.config.transaction_penalty;
        for (idx, rec) in self.agents.iter_mut().enumerate().skip(1) {
            let mid = {
                let q = self.books[rec.instrument].quotes();
                q.mid.unwrap_or(self.last_mid[rec.instrument])
            };
            let (prev_mid, _) = self.step_mids[rec.instrument];
            let prev = if prev_mid > 0.0 { prev_mid } else { mid };
            let breakdown = reward(
                &rec.ask_fills,
                &rec.bid_fills,
                mid,
                prev,
                rec.inv.inventory,
                rec.executed_volume,
                penalty,
            );
            self.report.rewards.push(StepReward {
                time_ns: now,
                agent_id: idx as AgentId,
                reward: breakdown,
                inventory: rec.inv.inventory,
            });
            rec.ask_fills.clear();
            rec.bid_fills.clear();
            rec.executed_volume = 0;
        }
        for instrument in 0..self.books.len() {
            let mid = self.books[instrument]
                .quotes()
                .mid
                .unwrap_or(self.last_mid[instrument]);
            let (m1, _) = self.step_mids[instrument];
            self.step_mids[instrument] = (mid, m1);
        }
    }

    fn handle_close(&mut self, now: TimeNs) {
        // flatten in agent-id order, synchronously through the engine
        for idx in 1..self.agents.len() {
            let (quotes, depth) = self.quotes_view(self.agents[idx].instrument);
            let open = self.agents[idx].open_orders.clone();
            let view = self.make_view(&self.agents[idx], now, quotes, &depth, &open);
            let mut rng = self.agents[idx].rng.clone();
            let intents = self.agents[idx].strategy.on_session_close(&view, &mut rng);
            self.agents[idx].rng = rng;
            let instrument = self.agents[idx].instrument;
            for intent in intents {
                let msg = self.intent_to_fix(idx as AgentId, &intent, now);
                if let OrderIntent::Market { qty, .. } = intent {
                    // record how much the close could not flatten
                    let before = self.report.fills.len();
                    if !self.apply_message(idx as AgentId, instrument, &msg, now) {
                        self.report.incidents += 1;
                    }
                    let filled: Qty = self.report.fills[before..]
                        .iter()
                        .map(|f| f.quantity)
                        .sum();
                    self.agents[idx].unfilled_close_residue += qty.saturating_sub(filled);
                } else if !self.apply_message(idx as AgentId, instrument, &msg, now) {
                    self.report.incidents += 1;
                }
                self.update_mid(instrument);
            }
            self.broadcast_new_events(instrument);
        }
        self.record_step(now);
        for instrument in 0..self.books.len() {
            self.report.snapshots.push((
                now,
                instrument,
                self.books[instrument].snapshot(self.config.snapshot_depth),
            ));
        }
        self.closed = true;
    }

    fn finalize(mut self) -> SessionReport {
        for (idx, rec) in self.agents.iter().enumerate() {
            self.report.agents.push(AgentSummary {
                agent_id: idx as AgentId,
                kind: rec.kind.clone(),
                instrument: rec.instrument,
                capital: rec.inv.capital,
                final_inventory: rec.inv.inventory,
                final_cash_ticks: rec.cash_ticks,
                unfilled_close_residue: rec.unfilled_close_residue,
            });
        }
        self.report.event_logs = self
            .books
            .iter()
            .map(|b| b.event_log().to_vec())
            .collect();
        self.report.final_mids = self.last_mid.clone();
        self.report
    }
}

/// Run one trading session: a deterministic discrete-event loop at
/// nanosecond resolution, keyed by (time, class, agent id, sequence).
pub fn run_session(
    config: &SessionConfig,
    registry: &StrategyRegistry,
    ctx: &StrategyContext,
) -> Result<SessionReport, AgentError> {
    let mut agents: Vec<AgentRec> = Vec::new();
    let session_seed = config.seed;

    // agent 0 is the exchange: seeds the book, never wakes
    agents.push(AgentRec {
        strategy: Box::new(NullStrategy),
        kind: "exchange".to_string(),
        instrument: 0,
        inv: InventoryState::new(i64::MAX / 2, i64::MIN / 2, 0.0),
        cash_ticks: 0,
        rng: ChaCha8Rng::seed_from_u64(session_seed),
        open_orders: Vec::new(),
        ask_fills: Vec::new(),
        bid_fills: Vec::new(),
        executed_volume: 0,
        throttle_window: -1,
        throttle_sent: 0,
        send_floor: 0,
        arrival_floor: 0,
        unfilled_close_residue: 0,
    });

    let capital_law = PowerLawParams::new(config.capital_exponent, 1.0)
        .map_err(|e| AgentError::BadParam(e.to_string()))?;
    let mut alloc_rng = ChaCha8Rng::seed_from_u64(session_seed ^ 0xCAFE_F00D);
    let mut instrument_rr = 0usize;
    for (name, count) in &config.census {
        for k in 0..*count {
            let agent_id = agents.len() as AgentId;
            let agent_seed = session_seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(agent_id);
            let strategy = registry.build(name, ctx, agent_seed)?;
            let capital = capital_law.sample(&mut alloc_rng) * config.capital_scale;
            let mut bound = (capital_law.sample(&mut alloc_rng) * config.inventory_bound_scale)
                .round()
                .max(1.0) as i64;
            if config.mm_inventory_bound > 0 && matches!(name.as_str(), "dhmm" | "nhmm" | "pmm") {
                bound = config.mm_inventory_bound;
            }
            agents.push(AgentRec {
                strategy,
                kind: name.clone(),
                instrument: instrument_rr % config.instruments.len(),
                inv: InventoryState::new(bound, -bound, capital),
                cash_ticks: 0,
                rng: ChaCha8Rng::seed_from_u64(agent_seed ^ 0x5EED),
                open_orders: Vec::new(),
                ask_fills: Vec::new(),
                bid_fills: Vec::new(),
                executed_volume: 0,
                throttle_window: -1,
                throttle_sent: 0,
                send_floor: 0,
                arrival_floor: 0,
                unfilled_close_residue: 0,
            });
            instrument_rr += 1;
            let _ = k;
        }
    }

    let n_instruments = config.instruments.len();
    let mut session = Session {
        books: (0..n_instruments)
            .map(|_| OrderBook::new(config.tick_size))
            .collect(),
        broadcast_cursor: vec![0; n_instruments],
        agents,
        heap: BinaryHeap::new(),
        seq: 0,
        kernel_rng: ChaCha8Rng::seed_from_u64(session_seed ^ 0xABCD_EF01),
        next_order_id: 1,
        order_owner: std::collections::HashMap::new(),
        last_mid: vec![config.initial_price_ticks as f64; n_instruments],
        step_mids: vec![(0.0, 0.0); n_instruments],
        step_volume: vec![0; n_instruments],
        report: SessionReport {
            event_logs: Vec::new(),
            fills: Vec::new(),
            rewards: Vec::new(),
            market: Vec::new(),
            snapshots: Vec::new(),
            agents: Vec::new(),
            incidents: 0,
            messages_sent: 0,
            final_mids: Vec::new(),
        },
        steps_done: 0,
        closed: false,
        config: config.clone(),
    };

    // warm-start depth around the initial price
    for instrument in 0..n_instruments {
        for level in 1..=config.seed_book_levels {
            let bid_price = config.initial_price_ticks - level as Price;
            let ask_price = config.initial_price_ticks + level as Price;
            for (side, price) in [(Side::Buy, bid_price), (Side::Sell, ask_price)] {
                if price < 1 {
                    continue;
                }
                let id = session.next_order_id;
                session.next_order_id += 1;
                session.order_owner.insert(id, EXCHANGE_AGENT);
                let order = Order::limit(
                    id,
                    EXCHANGE_AGENT,
                    side,
                    price,
                    config.seed_book_qty,
                    config.open_ns,
                );
                session.books[instrument]
                    .submit_limit(order)
                    .expect("seed orders are valid");
                session.agents[EXCHANGE_AGENT as usize]
                    .open_orders
                    .push(OpenOrder {
                        order_id: id,
                        side,
                        price_ticks: price,
                        remaining: config.seed_book_qty,
                    });
            }
        }
        session.update_mid(instrument);
        let (m, _) = session.step_mids[instrument];
        let _ = m;
        session.step_mids[instrument] = (session.last_mid[instrument], 0.0);
        session.broadcast_cursor[instrument] = session.books[instrument].event_log().len();
    }

    // initial wake-ups, reporting clock and close
    for idx in 1..session.agents.len() {
        let rec = &mut session.agents[idx];
        let mut rng = rec.rng.clone();
        let t = rec.strategy.next_wake(config.open_ns, &mut rng);
        rec.rng = rng;
        if t < config.close_ns {
            session.push(t, 2, idx as AgentId, Payload::Wake);
        }
    }
    session.push(config.open_ns + config.step_ns, 3, 0, Payload::Step);
    session.push(config.close_ns, 4, 0, Payload::Close);

    while let Some(ev) = session.heap.pop() {
        if session.closed {
            break;
        }
        match ev.payload {
            Payload::Wake => {
                let idx = ev.agent as usize;
                let instrument = session.agents[idx].instrument;
                let (quotes, depth) = session.quotes_view(instrument);
                let open = session.agents[idx].open_orders.clone();
                let view = session.make_view(&session.agents[idx], ev.time, quotes, &depth, &open);
                let mut rng = session.agents[idx].rng.clone();
                let intents = session.agents[idx].strategy.on_wake(&view, &mut rng);
                let next = session.agents[idx].strategy.next_wake(ev.time, &mut rng);
                session.agents[idx].rng = rng;
                for intent in intents {
                    let msg = session.intent_to_fix(ev.agent, &intent, ev.time);
                    session.transport(ev.agent, instrument, &msg, ev.time);
                }
                if next > ev.time && next < config.close_ns {
                    session.push(next, 2, ev.agent, Payload::Wake);
                }
            }
            Payload::EngineMsg { instrument, bytes } => {
                match decode_fix(&bytes) {
                    Ok(msg) => {
                        if !session.apply_message(ev.agent, instrument, &msg, ev.time) {
                            session.report.incidents += 1;
                            log::debug!("rejected message from agent {}", ev.agent);
                        }
                    }
                    Err(err) => {
                        session.report.incidents += 1;
                        log::debug!("malformed message from agent {}: {err}", ev.agent);
                    }
                }
                session.update_mid(instrument);
                session.broadcast_new_events(instrument);
            }
            Payload::Report { bytes } => {
                if let Ok(msg) = decode_fix(&bytes) {
                    let report = ExecutionReport {
                        order_id: msg.parsed_cl_ord_id().unwrap_or(0),
                        side: msg.parsed_side().unwrap_or(Side::Buy),
                        price_ticks: msg
                            .get(tags::EXEC_PRICE)
                            .and_then(|v| v.parse().ok())
                            .unwrap_or(0),
                        quantity: msg
                            .get(tags::EXEC_QTY)
                            .and_then(|v| v.parse().ok())
                            .unwrap_or(0),
                        remaining: msg
                            .get(tags::LEAVES_QTY)
                            .and_then(|v| v.parse().ok())
                            .unwrap_or(0),
                        time_ns: msg.parsed_time().unwrap_or(ev.time),
                    };
                    session.agents[ev.agent as usize]
                        .strategy
                        .on_execution(&report);
                }
            }
            Payload::Step => {
                session.record_step(ev.time);
                let next = ev.time + config.step_ns;
                if next < config.close_ns {
                    session.push(next, 3, 0, Payload::Step);
                }
            }
            Payload::Close => {
                session.handle_close(ev.time);
            }
        }
    }
    if !session.closed {
        session.handle_close(config.close_ns);
    }
    Ok(session.finalize())
}

struct NullStrategy;

impl Strategy for NullStrategy {
    fn kind(&self) -> &'static str {
        "exchange"
    }
    fn next_wake(&mut self, _now_ns: TimeNs, _rng: &mut ChaCha8Rng) -> TimeNs {
        TimeNs::MAX / 2
    }
    fn on_wake(&mut self, _view: &MarketView<'_>, _rng: &mut ChaCha8Rng) -> Vec<OrderIntent> {
        Vec::new()
    }
}

// ---------------------------------------------------------------- csv export

pub fn fills_csv(report: &SessionReport) -> String {
    let mut out =
        String::from("time_ns,instrument,maker_agent,taker_agent,price_ticks,quantity\n");
    for f in &report.fills {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            f.time_ns, f.instrument, f.maker_agent, f.taker_agent, f.price_ticks, f.quantity
        ));
    }
    out
}

pub fn rewards_csv(report: &SessionReport) -> String {
    let mut out = String::from("t,agent_id,pnl,ic,tc,total\n");
    for r in &report.rewards {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.time_ns,
            r.agent_id,
            r.reward.pnl,
            r.reward.inventory_cost,
            r.reward.transaction_cost,
            r.reward.total
        ));
    }
    out
}

pub fn market_csv(report: &SessionReport) -> String {
    let mut out = String::from("time_ns,instrument,mid,spread,volume\n");
    for m in &report.market {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            m.time_ns, m.instrument, m.mid, m.spread, m.volume
        ));
    }
    out
}

pub fn snapshots_csv(report: &SessionReport) -> String {
    let mut out = String::from("time_ns,instrument,side,level,price_ticks,quantity\n");
    for (t, instrument, snap) in &report.snapshots {
        for (level, (p, q)) in snap.bids.iter().enumerate() {
            out.push_str(&format!("{t},{instrument},B,{level},{p},{q}\n"));
        }
        for (level, (p, q)) in snap.asks.iter().enumerate() {
            out.push_str(&format!("{t},{instrument},S,{level},{p},{q}\n"));
        }
    }
    out
}

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dhp::{predict_next, DhpModel, ModelRuntime, StreamEvent};
use crate::distributions::{MarketMixtureParams, QGammaParams, TruncGeomParams};
use crate::lob::{BookEvent, BookEventKind, Price, Qty, Side, TimeNs};

use super::{inventory_factor, AgentError, MarketView, OrderIntent, Strategy};

/// Intensity heads for price-jump counting: one softplus head per jump
/// direction and tick size, evaluated on the model's hidden state. Freshly
/// built heads have zero weights, so each type fires at the constant rate
/// written into its scale.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpHeads {
    pub max_ticks: usize,
    pub up_w: Vec<Vec<f64>>,
    pub up_scale: Vec<f64>,
    pub down_w: Vec<Vec<f64>>,
    pub down_scale: Vec<f64>,
}

impl JumpHeads {
    /// Constant-rate heads: rate of an i-tick jump is base_rate / i^2.
    pub fn constant_rates(max_ticks: usize, hidden: usize, base_rate: f64) -> Self {
        let scale = |i: usize| (base_rate / ((i * i) as f64)).max(1e-12) / 2.0f64.ln();
        JumpHeads {
            max_ticks,
            up_w: vec![vec![0.0; hidden]; max_ticks],
            up_scale: (1..=max_ticks).map(scale).collect(),
            down_w: vec![vec![0.0; hidden]; max_ticks],
            down_scale: (1..=max_ticks).map(scale).collect(),
        }
    }

    /// lambda for a jump of `ticks` in the given direction at hidden state h.
    pub fn intensity(&self, up: bool, ticks: usize, h: &[f64]) -> f64 {
        let (w, s) = if up {
            (&self.up_w[ticks - 1], self.up_scale[ticks - 1])
        } else {
            (&self.down_w[ticks - 1], self.down_scale[ticks - 1])
        };
        let pre: f64 = w.iter().zip(h).map(|(a, b)| a * b).sum();
        let z = pre / s;
        s * if z > 30.0 {
            z
        } else if z < -30.0 {
            z.exp()
        } else {
            z.exp().ln_1p()
        }
    }
}

#[derive(Debug, Clone)]
pub struct DhmmParams {
    pub half_spread_ticks: i64,
    /// Largest tracked jump size in ticks.
    pub max_jump_ticks: usize,
    /// Base rate (per second) of 1-tick jumps for untrained heads.
    pub jump_base_rate: f64,
    /// Limit order size law parameters (scale, shape, tsallis q, min, max).
    pub limit_alpha: f64,
    pub limit_beta: f64,
    pub limit_tsallis_q: f64,
    pub limit_qmax: f64,
    /// Cancellation size law.
    pub cancel_p0: f64,
    pub cancel_cap: u64,
    /// Market order size mixture.
    pub market_p0: f64,
    pub market_theta0: f64,
    pub market_theta_inf: f64,
    pub market_cap: u64,
    /// Quote refresh interval bounds in seconds; the predicted next-event
    /// time is clamped into this window.
    pub min_quote_interval: f64,
    pub max_quote_interval: f64,
    /// Open-order budget per side when cancellations are disabled.
    pub max_open_per_side: usize,
}

impl Default for DhmmParams {
    fn default() -> Self {
        DhmmParams {
            half_spread_ticks: 1,
            max_jump_ticks: 5,
            jump_base_rate: 0.0,
            limit_alpha: 0.07,
            limit_beta: 1.52,
            limit_tsallis_q: 1.3,
            limit_qmax: 50.0,
            cancel_p0: 0.60,
            cancel_cap: 20,
            market_p0: 0.5,
            market_theta0: 0.7,
            market_theta_inf: 0.06,
            market_cap: 20,
            min_quote_interval: 0.5,
            max_quote_interval: 30.0,
            max_open_per_side: 3,
        }
    }
}

/// Market maker driven by the deep order-flow model: quotes around a
/// jump-adjusted reference price, times its actions with the predicted next
/// event, sizes orders from the fitted laws scaled by inventory.
pub struct DhmmStrategy {
    name: &'static str,
    model: Arc<DhpModel>,
    runtime: ModelRuntime,
    params: DhmmParams,
    limit_size: QGammaParams,
    cancel_size: TruncGeomParams,
    market_size: MarketMixtureParams,
    pub jump_up: Vec<u64>,
    pub jump_down: Vec<u64>,
    heads: JumpHeads,
    hazard_up: Vec<f64>,
    hazard_down: Vec<f64>,
    threshold_up: Vec<f64>,
    threshold_down: Vec<f64>,
    jump_rng: ChaCha8Rng,
    last_jump_t: f64,
    next_wake_dt: f64,
    predicted_kind: Option<usize>,
    /// Residual inventory reported when the close could not flatten.
    pub residual_inventory: i64,
}

impl DhmmStrategy {
    pub fn new(name: &'static str, model: Arc<DhpModel>, params: DhmmParams) -> Self {
        Self::try_new(name, model, params).expect("default market maker parameters are valid")
    }

    pub fn try_new(
        name: &'static str,
        model: Arc<DhpModel>,
        params: DhmmParams,
    ) -> Result<Self, AgentError> {
        let bad = |e: crate::distributions::DistError| AgentError::BadParam(e.to_string());
        let limit_size = QGammaParams::new(
            params.limit_alpha,
            params.limit_beta,
            params.limit_tsallis_q,
            0.0,
            params.limit_qmax,
        )
        .map_err(bad)?;
        let cancel_size = TruncGeomParams::new(params.cancel_p0, params.cancel_cap).map_err(bad)?;
        let n_atoms = ((params.market_cap.saturating_sub(1)) / 5) as usize;
        let atom_total = 1.0 - params.market_theta0 - params.market_theta_inf;
        let atoms = vec![atom_total / n_atoms.max(1) as f64; n_atoms];
        let market_size = MarketMixtureParams::new(
            params.market_p0,
            params.market_theta0,
            atoms,
            params.market_theta_inf,
            params.market_cap,
        )
        .map_err(bad)?;
        let hidden = model.config.hidden;
        let max_ticks = params.max_jump_ticks.max(1);
        let heads = JumpHeads::constant_rates(max_ticks, hidden, params.jump_base_rate);
        let runtime = ModelRuntime::new(&model);
        let min_int = params.min_quote_interval;
        Ok(DhmmStrategy {
            name,
            model,
            runtime,
            params,
            limit_size,
            cancel_size,
            market_size,
            jump_up: vec![0; max_ticks],
            jump_down: vec![0; max_ticks],
            heads,
            hazard_up: vec![0.0; max_ticks],
            hazard_down: vec![0.0; max_ticks],
            threshold_up: Vec::new(),
            threshold_down: Vec::new(),
            jump_rng: ChaCha8Rng::seed_from_u64(0),
            last_jump_t: 0.0,
            next_wake_dt: min_int,
            predicted_kind: None,
            residual_inventory: 0,
        })
    }

    pub fn with_jump_seed(mut self, seed: u64) -> Self {
        self.jump_rng = ChaCha8Rng::seed_from_u64(seed);
        self
    }

    pub fn with_jump_heads(mut self, heads: JumpHeads) -> Self {
        assert_eq!(heads.max_ticks, self.params.max_jump_ticks.max(1));
        self.heads = heads;
        self
    }

    /// Jump-adjusted reference price around the mid.
    pub fn reference_price(&self, mid: f64) -> Price {
        let mut p = mid.round() as i64;
        for i in 0..self.jump_up.len() {
            p += (i as i64 + 1) * self.jump_up[i] as i64;
            p -= (i as i64 + 1) * self.jump_down[i] as i64;
        }
        p.max(1)
    }

    /// Advance the integrated jump hazards to `t` and trip counters whose
    /// sampled exponential threshold was crossed (thinning per jump type).
    fn advance_jumps(&mut self, t: f64) {
        let dt = t - self.last_jump_t;
        if dt <= 0.0 {
            return;
        }
        if self.threshold_up.is_empty() {
            let n = self.jump_up.len();
            let draw = |rng: &mut ChaCha8Rng| -> f64 { -(1.0 - rng.random::<f64>()).ln() };
            self.threshold_up = (0..n).map(|_| draw(&mut self.jump_rng)).collect();
            self.threshold_down = (0..n).map(|_| draw(&mut self.jump_rng)).collect();
        }
        let h = self.runtime.hidden_at(&self.model, self.last_jump_t + 0.5 * dt);
        for i in 0..self.jump_up.len() {
            self.hazard_up[i] += self.heads.intensity(true, i + 1, &h) * dt;
            while self.hazard_up[i] >= self.threshold_up[i] {
                self.hazard_up[i] -= self.threshold_up[i];
                self.jump_up[i] += 1;
                self.threshold_up[i] = -(1.0 - self.jump_rng.random::<f64>()).ln();
            }
            self.hazard_down[i] += self.heads.intensity(false, i + 1, &h) * dt;
            while self.hazard_down[i] >= self.threshold_down[i] {
                self.hazard_down[i] -= self.threshold_down[i];
                self.jump_down[i] += 1;
                self.threshold_down[i] = -(1.0 - self.jump_rng.random::<f64>()).ln();
            }
        }
        self.last_jump_t = t;
    }

    fn sized_limit(
        &self,
        view: &MarketView<'_>,
        side: Side,
        price: Price,
        rng: &mut ChaCha8Rng,
    ) -> Option<OrderIntent> {
        let raw = self.limit_size.sample_size(rng);
        let factor = inventory_factor(side, view.inventory.inventory, view.inventory.max_inventory);
        let scaled = super::round_size(raw as f64 * factor).max(0) as Qty;
        let qty = view.clamp_size(side, scaled);
        if qty == 0 {
            return None;
        }
        Some(OrderIntent::Limit {
            side,
            price_ticks: price.max(1),
            qty,
        })
    }
}

impl Strategy for DhmmStrategy {
    fn kind(&self) -> &'static str {
        self.name
    }

    fn next_wake(&mut self, now_ns: TimeNs, _rng: &mut ChaCha8Rng) -> TimeNs {
        now_ns + (self.next_wake_dt * 1e9) as TimeNs
    }

    fn on_book_event(&mut self, event: &BookEvent, view: &MarketView<'_>) {
        let t = event.time_ns as f64 * 1e-9;
        self.advance_jumps(t);
        let spread = view.quotes.spread.map(|s| s as f64).unwrap_or(0.0);
        let snap = view.depth;
        let bid_q = snap.bids.first().map(|&(_, q)| q as f64).unwrap_or(0.0);
        let ask_q = snap.asks.first().map(|&(_, q)| q as f64).unwrap_or(0.0);
        let imbalance = if bid_q + ask_q > 0.0 {
            (bid_q - ask_q) / (bid_q + ask_q)
        } else {
            0.0
        };
        let t = t.max(self.runtime.last_t + 1e-9);
        self.runtime.observe(
            &self.model,
            &StreamEvent {
                t,
                kind: event.kind.index(),
                spread,
                imbalance,
            },
        );
    }

    fn on_wake(&mut self, view: &MarketView<'_>, rng: &mut ChaCha8Rng) -> Vec<OrderIntent> {
        let now_sec = view.now_ns as f64 * 1e-9;
        let Some(mid) = view.quotes.mid else {
            // cold book: nothing to quote against, retry shortly
            self.next_wake_dt = self.params.min_quote_interval;
            return Vec::new();
        };
        self.advance_jumps(now_sec);

        let reference = self.reference_price(mid);
        let ask = reference + self.params.half_spread_ticks;
        let bid = (reference - self.params.half_spread_ticks).max(1);

        // next action timing and type from the model's prediction
        let pred = predict_next(&self.model, &self.runtime);
        let dt = pred.t_hat - self.runtime.last_t;
        self.next_wake_dt = dt.clamp(
            self.params.min_quote_interval,
            self.params.max_quote_interval,
        );
        self.predicted_kind = Some(pred.k_hat);

        let mut intents = Vec::new();

        // stale quote management
        let mut open_buy = 0usize;
        let mut open_sell = 0usize;
        for o in view.open_orders {
            let (target, open) = match o.side {
                Side::Buy => (bid, &mut open_buy),
                Side::Sell => (ask, &mut open_sell),
            };
            if o.price_ticks == target {
                *open += 1;
            } else if view.cancellations_enabled {
                intents.push(OrderIntent::Cancel {
                    order_id: o.order_id,
                    qty: None,
                });
            } else {
                *open += 1; // stuck on the book
            }
        }

        let budget = if view.cancellations_enabled {
            usize::MAX
        } else {
            self.params.max_open_per_side
        };
        if open_buy < budget.max(1) && open_buy == 0 {
            if let Some(intent) = self.sized_limit(view, Side::Buy, bid, rng) {
                intents.push(intent);
            }
        }
        if open_sell < budget.max(1) && open_sell == 0 {
            if let Some(intent) = self.sized_limit(view, Side::Sell, ask, rng) {
                intents.push(intent);
            }
        }
        if !view.cancellations_enabled && (open_buy >= budget || open_sell >= budget) {
            // no room to manage exposure without cancellations
        }

        match self.predicted_kind.map(BookEventKind::from_index) {
            Some(Some(BookEventKind::MarketBuy)) | Some(Some(BookEventKind::MarketSell)) => {
                let side = if self.predicted_kind == Some(BookEventKind::MarketBuy.index()) {
                    Side::Buy
                } else {
                    Side::Sell
                };
                let raw = self.market_size.sample(rng);
                let factor =
                    inventory_factor(side, view.inventory.inventory, view.inventory.max_inventory);
                let qty = view.clamp_size(side, super::round_size(raw as f64 * factor).max(0) as Qty);
                if qty > 0 {
                    intents.push(OrderIntent::Market { side, qty });
                }
            }
            Some(Some(BookEventKind::CancelPartial)) if view.cancellations_enabled => {
                if let Some(o) = view.open_orders.first() {
                    let qty = self.cancel_size.sample(rng).min(o.remaining);
                    if qty > 0 && qty < o.remaining {
                        intents.push(OrderIntent::Cancel {
                            order_id: o.order_id,
                            qty: Some(qty),
                        });
                    }
                }
            }
            Some(Some(BookEventKind::CancelFull)) if view.cancellations_enabled => {
                if let Some(o) = view.open_orders.first() {
                    intents.push(OrderIntent::Cancel {
                        order_id: o.order_id,
                        qty: None,
                    });
                }
            }
            _ => {}
        }
        intents
    }

    fn on_session_close(
        &mut self,
        view: &MarketView<'_>,
        _rng: &mut ChaCha8Rng,
    ) -> Vec<OrderIntent> {
        let mut intents = Vec::new();
        if view.cancellations_enabled {
            for o in view.open_orders {
                intents.push(OrderIntent::Cancel {
                    order_id: o.order_id,
                    qty: None,
                });
            }
        }
        let inv = view.inventory.inventory;
        self.residual_inventory = 0;
        if inv > 0 {
            intents.push(OrderIntent::Market {
                side: Side::Sell,
                qty: inv as Qty,
            });
        } else if inv < 0 {
            intents.push(OrderIntent::Market {
                side: Side::Buy,
                qty: (-inv) as Qty,
            });
        }
        intents
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::InventoryState;
    use crate::dhp::DhpConfig;
    use crate::lob::{BookSnapshot, Quotes};

    fn tiny_model() -> Arc<DhpModel> {
        Arc::new(DhpModel::new(DhpConfig::desk(6, 4, 1), 3))
    }

    fn make_view<'a>(
        depth: &'a BookSnapshot,
        open: &'a [super::super::OpenOrder],
        mid: f64,
        inventory: i64,
    ) -> MarketView<'a> {
        MarketView {
            now_ns: 1_000_000_000,
            quotes: Quotes {
                best_bid: Some(mid.floor() as i64 - 1),
                best_ask: Some(mid.ceil() as i64 + 1),
                mid: Some(mid),
                spread: Some(2),
            },
            depth,
            prev_mid: Some(mid),
            prev_prev_mid: Some(mid),
            inventory: InventoryState {
                inventory,
                max_inventory: 100,
                min_inventory: -100,
                capital: 1e6,
            },
            open_orders: open,
            cancellations_enabled: true,
        }
    }

    #[test]
    fn zero_jumps_quote_symmetric_around_mid() {
        let mut s = DhmmStrategy::new("dhmm", tiny_model(), DhmmParams::default());
        let depth = BookSnapshot::default();
        let open = Vec::new();
        let view = make_view(&depth, &open, 10_000.0, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let intents = s.on_wake(&view, &mut rng);
        let mut bid = None;
        let mut ask = None;
        for i in &intents {
            if let OrderIntent::Limit { side, price_ticks, .. } = i {
                match side {
                    Side::Buy => bid = Some(*price_ticks),
                    Side::Sell => ask = Some(*price_ticks),
                }
            }
        }
        assert_eq!(bid, Some(9_999));
        assert_eq!(ask, Some(10_001));
    }

    #[test]
    fn upward_jump_shifts_reference_price() {
        let mut s = DhmmStrategy::new("dhmm", tiny_model(), DhmmParams::default());
        s.jump_up[1] = 1; // one 2-tick upward jump
        assert_eq!(s.reference_price(10_000.0), 10_002);
        s.jump_down[0] = 3;
        assert_eq!(s.reference_price(10_000.0), 9_999);
    }

    #[test]
    fn full_inventory_stops_buying() {
        let mut s = DhmmStrategy::new("dhmm", tiny_model(), DhmmParams::default());
        let depth = BookSnapshot::default();
        let open = Vec::new();
        let view = make_view(&depth, &open, 10_000.0, 100); // at max inventory
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let intents = s.on_wake(&view, &mut rng);
        assert!(
            !intents
                .iter()
                .any(|i| matches!(i, OrderIntent::Limit { side: Side::Buy, .. })),
            "{intents:?}"
        );
        // selling is still allowed (and scaled up)
        assert!(intents
            .iter()
            .any(|i| matches!(i, OrderIntent::Limit { side: Side::Sell, .. })));
    }

    #[test]
    fn cold_book_emits_nothing() {
        let mut s = DhmmStrategy::new("dhmm", tiny_model(), DhmmParams::default());
        let depth = BookSnapshot::default();
        let open = Vec::new();
        let mut view = make_view(&depth, &open, 10_000.0, 0);
        view.quotes = Quotes {
            best_bid: None,
            best_ask: None,
            mid: None,
            spread: None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(s.on_wake(&view, &mut rng).is_empty());
    }

    #[test]
    fn close_flattens_inventory_with_market_orders() {
        let mut s = DhmmStrategy::new("dhmm", tiny_model(), DhmmParams::default());
        let depth = BookSnapshot::default();
        let open = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);

        let view = make_view(&depth, &open, 10_000.0, 0);
        assert!(s.on_session_close(&view, &mut rng).is_empty());

        let view = make_view(&depth, &open, 10_000.0, 7);
        let intents = s.on_session_close(&view, &mut rng);
        assert_eq!(
            intents,
            vec![OrderIntent::Market {
                side: Side::Sell,
                qty: 7
            }]
        );

        let view = make_view(&depth, &open, 10_000.0, -4);
        let intents = s.on_session_close(&view, &mut rng);
        assert_eq!(
            intents,
            vec![OrderIntent::Market {
                side: Side::Buy,
                qty: 4
            }]
        );
    }

    #[test]
    fn stale_quotes_are_cancelled_when_enabled() {
        let mut s = DhmmStrategy::new("dhmm", tiny_model(), DhmmParams::default());
        let depth = BookSnapshot::default();
        let open = vec![super::super::OpenOrder {
            order_id: 55,
            side: Side::Buy,
            price_ticks: 9_990, // far from the fresh bid
            remaining: 3,
        }];
        let view = make_view(&depth, &open, 10_000.0, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let intents = s.on_wake(&view, &mut rng);
        assert!(intents
            .iter()
            .any(|i| matches!(i, OrderIntent::Cancel { order_id: 55, qty: None })));

        // with cancellations disabled the stale order stays
        let mut view = make_view(&depth, &open, 10_000.0, 0);
        view.cancellations_enabled = false;
        let intents = s.on_wake(&view, &mut rng);
        assert!(!intents.iter().any(|i| matches!(i, OrderIntent::Cancel { .. })));
    }

    #[test]
    fn constant_rate_jump_counting_matches_expectation() {
        let mut s = DhmmStrategy::new(
            "dhmm",
            tiny_model(),
            DhmmParams {
                jump_base_rate: 2.0,
                max_jump_ticks: 2,
                ..DhmmParams::default()
            },
        )
        .with_jump_seed(9);
        // advance over a long window; 1-tick jumps should arrive at ~rate 2,
        // 2-tick jumps at ~rate 0.5
        let horizon = 500.0;
        let steps = 5_000;
        for k in 1..=steps {
            s.advance_jumps(horizon * k as f64 / steps as f64);
        }
        let n1 = s.jump_up[0] + s.jump_down[0];
        let n2 = s.jump_up[1] + s.jump_down[1];
        let want1 = 2.0 * 2.0 * horizon;
        let want2 = 2.0 * 0.5 * horizon;
        assert!((n1 as f64 - want1).abs() < 4.0 * want1.sqrt(), "n1 {n1} want {want1}");
        assert!((n2 as f64 - want2).abs() < 4.0 * want2.sqrt(), "n2 {n2} want {want2}");
    }
}

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::lob::{Price, Side, TimeNs};

use super::{exp_wait_ns, round_size, AgentError, MarketView, OrderIntent, Strategy};

fn normal(std: f64) -> Normal<f64> {
    Normal::new(0.0, std.max(0.0)).expect("std >= 0")
}

/// Stale-order management shared by the background classes: cancel the
/// oldest own orders beyond the open-order budget (two per wake at most).
fn stale_cancels(view: &MarketView<'_>, max_open: usize) -> Vec<OrderIntent> {
    if !view.cancellations_enabled || view.open_orders.len() <= max_open {
        return Vec::new();
    }
    view.open_orders
        .iter()
        .take((view.open_orders.len() - max_open).min(2))
        .map(|o| OrderIntent::Cancel {
            order_id: o.order_id,
            qty: None,
        })
        .collect()
}

fn limit_intent(view: &MarketView<'_>, side: Side, price: f64, qty: i64) -> Option<OrderIntent> {
    let qty = view.clamp_size(side, qty.max(0) as u64);
    if qty == 0 {
        return None;
    }
    let price_ticks = (price.round() as Price).max(1);
    Some(OrderIntent::Limit {
        side,
        price_ticks,
        qty,
    })
}

// ---------------------------------------------------------------- fundamental

/// Value trader: believes in its own random-walk fundamental and trades the
/// gap between that value and the market mid.
#[derive(Debug, Clone)]
pub struct FundamentalParams {
    /// Drift per wake-up.
    pub drift: f64,
    /// Std of the fundamental's multiplicative shock.
    pub value_std: f64,
    /// Std of the limit price's multiplicative shock.
    pub price_std: f64,
    /// Order size sensitivity to the value gap (0 < eta < 1).
    pub eta: f64,
    /// Std of the additive size noise.
    pub size_std: f64,
    /// Initial fundamental value in ticks.
    pub initial_value: f64,
    /// Wake-ups per second.
    pub wake_rate: f64,
    /// Resting orders kept before stale ones are cancelled.
    pub max_open: usize,
}

impl Default for FundamentalParams {
    fn default() -> Self {
        FundamentalParams {
            drift: 0.0,
            value_std: 0.001,
            price_std: 0.001,
            eta: 0.04,
            size_std: 40.0,
            initial_value: 10_000.0,
            wake_rate: 0.2,
            max_open: 2,
        }
    }
}

pub struct FundamentalStrategy {
    params: FundamentalParams,
    value: f64,
}

impl FundamentalStrategy {
    pub fn new(params: FundamentalParams) -> Result<Self, AgentError> {
        if !(0.0 < params.eta && params.eta < 1.0) {
            return Err(AgentError::BadParam("fundamental eta must be in (0,1)".into()));
        }
        let value = params.initial_value;
        Ok(FundamentalStrategy { params, value })
    }
}

impl Strategy for FundamentalStrategy {
    fn kind(&self) -> &'static str {
        "fundamental"
    }

    fn next_wake(&mut self, now_ns: TimeNs, rng: &mut ChaCha8Rng) -> TimeNs {
        now_ns + exp_wait_ns(self.params.wake_rate, rng)
    }

    fn on_wake(&mut self, view: &MarketView<'_>, rng: &mut ChaCha8Rng) -> Vec<OrderIntent> {
        let p = &self.params;
        let shock = normal(p.value_std).sample(rng);
        self.value = (self.value * (1.0 + p.drift) * (1.0 + shock)).max(1.0);
        let mut intents = stale_cancels(view, p.max_open);
        let Some(prev_mid) = view.prev_mid.or(view.quotes.mid) else {
            return intents;
        };
        let price_shock = normal(p.price_std).sample(rng);
        let price = prev_mid * (1.0 + p.drift) * (1.0 + price_shock);
        let q = p.eta * (self.value - prev_mid) + normal(p.size_std).sample(rng);
        let q = round_size(q);
        if q == 0 {
            return intents;
        }
        let side = if q >= 0 { Side::Buy } else { Side::Sell };
        intents.extend(limit_intent(view, side, price, q.abs()));
        intents
    }
}

// ------------------------------------------------------------------ chartist

/// Trend follower: trades the sign of the last mid-price move.
#[derive(Debug, Clone)]
pub struct ChartistParams {
    pub drift: f64,
    pub price_std: f64,
    pub eta: f64,
    pub size_std: f64,
    pub wake_rate: f64,
    pub max_open: usize,
}

impl Default for ChartistParams {
    fn default() -> Self {
        ChartistParams {
            drift: 0.0,
            price_std: 0.001,
            eta: 0.04,
            size_std: 30.0,
            wake_rate: 0.2,
            max_open: 2,
        }
    }
}

pub struct ChartistStrategy {
    params: ChartistParams,
}

impl ChartistStrategy {
    pub fn new(params: ChartistParams) -> Result<Self, AgentError> {
        if !(0.0 < params.eta && params.eta < 1.0) {
            return Err(AgentError::BadParam("chartist eta must be in (0,1)".into()));
        }
        Ok(ChartistStrategy { params })
    }
}

impl Strategy for ChartistStrategy {
    fn kind(&self) -> &'static str {
        "chartist"
    }

    fn next_wake(&mut self, now_ns: TimeNs, rng: &mut ChaCha8Rng) -> TimeNs {
        now_ns + exp_wait_ns(self.params.wake_rate, rng)
    }

    fn on_wake(&mut self, view: &MarketView<'_>, rng: &mut ChaCha8Rng) -> Vec<OrderIntent> {
        let p = &self.params;
        let mut intents = stale_cancels(view, p.max_open);
        let (Some(m1), Some(m2)) = (view.prev_mid, view.prev_prev_mid) else {
            return intents;
        };
        let q = p.eta * (m1 - m2) + normal(p.size_std).sample(rng);
        let q = round_size(q);
        if q == 0 {
            return intents;
        }
        let price_shock = normal(p.price_std).sample(rng);
        let price = m1 * (1.0 + p.drift) * (1.0 + price_shock);
        let side = if q >= 0 { Side::Buy } else { Side::Sell };
        intents.extend(limit_intent(view, side, price, q.abs()));
        intents
    }
}

// --------------------------------------------------------------------- noise

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseFundamentalRule {
    /// f_t = max(0, eta*fbar + (1-eta)*f_{t-1} + y_t) - standard mean
    /// reversion toward fbar.
    MeanReverting,
    /// f_t = max(0, eta*fbar + eta*(1 - f_{t-1}) + y_t) - the printed
    /// recursion, selectable for comparison runs.
    PaperLiteral,
}

/// Uninformed trader: mean-reverting private fundamental, random side,
/// normal size. Acts even on an empty book since its price is its own.
#[derive(Debug, Clone)]
pub struct NoiseParams {
    pub eta: f64,
    /// Long-run fundamental anchor in ticks.
    pub mean_value: f64,
    /// Std of the fundamental shock and of the size draw.
    pub noise_std: f64,
    /// Std of the private-value draw around the fundamental.
    pub value_std: f64,
    pub rule: NoiseFundamentalRule,
    pub wake_rate: f64,
    pub max_open: usize,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            eta: 0.04,
            mean_value: 10_000.0,
            noise_std: 12.0,
            value_std: 8.0,
            rule: NoiseFundamentalRule::MeanReverting,
            wake_rate: 0.2,
            max_open: 2,
        }
    }
}

pub struct NoiseStrategy {
    params: NoiseParams,
    value: f64,
}

impl NoiseStrategy {
    pub fn new(params: NoiseParams) -> Result<Self, AgentError> {
        if !(0.0 < params.eta && params.eta < 1.0) {
            return Err(AgentError::BadParam("noise eta must be in (0,1)".into()));
        }
        let value = params.mean_value;
        Ok(NoiseStrategy { params, value })
    }

    pub fn fundamental(&self) -> f64 {
        self.value
    }

    pub fn update_fundamental(&mut self, shock: f64) {
        let p = &self.params;
        self.value = match p.rule {
            NoiseFundamentalRule::MeanReverting => {
                (p.eta * p.mean_value + (1.0 - p.eta) * self.value + shock).max(0.0)
            }
            NoiseFundamentalRule::PaperLiteral => {
                (p.eta * p.mean_value + p.eta * (1.0 - self.value) + shock).max(0.0)
            }
        };
    }
}

impl Strategy for NoiseStrategy {
    fn kind(&self) -> &'static str {
        "noise"
    }

    fn next_wake(&mut self, now_ns: TimeNs, rng: &mut ChaCha8Rng) -> TimeNs {
        now_ns + exp_wait_ns(self.params.wake_rate, rng)
    }

    fn on_wake(&mut self, view: &MarketView<'_>, rng: &mut ChaCha8Rng) -> Vec<OrderIntent> {
        let p = self.params.clone();
        let mut intents = stale_cancels(view, p.max_open);
        let shock = normal(p.noise_std).sample(rng);
        self.update_fundamental(shock);
        let private_value = normal(p.value_std).sample(rng) + self.value;
        let private_value = private_value.max(0.0);
        let size_draw = normal(p.noise_std).sample(rng);
        if size_draw == 0.0 {
            return intents;
        }
        let qty = round_size(size_draw.abs()).max(1);
        let side = if rng.random::<bool>() {
            Side::Buy
        } else {
            Side::Sell
        };
        intents.extend(limit_intent(view, side, private_value, qty));
        intents
    }
}

//! Trading strategies behind a common [`Strategy`] trait.
//!
//! Every agent class (deep market maker, probabilistic market maker,
//! fundamental, chartist, noise) implements the same interface: it names a
//! wake-up time, reacts to its wake with order intents, observes the public
//! tape and its own execution reports, and may flatten at the close. The
//! [`StrategyRegistry`] maps class names to builders so a session census is
//! just name -> count pairs in the config.
//!
//! Strategies do not keep authoritative position state: the simulation
//! kernel owns inventory and capital and passes them in through
//! [`MarketView`]. Order sizes are clamped so no action can push inventory
//! past its bounds.

mod background;
mod dhmm;
mod pmm;
mod reward;

pub use background::{
    ChartistParams, ChartistStrategy, FundamentalParams, FundamentalStrategy, NoiseFundamentalRule,
    NoiseParams, NoiseStrategy,
};
pub use dhmm::{DhmmParams, DhmmStrategy, JumpHeads};
pub use pmm::{PmmBelief, PmmParams, PmmStrategy, TradeObservation};
pub use reward::{reward, RewardBreakdown};

use std::collections::BTreeMap;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dhp::DhpModel;
use crate::lob::{BookEvent, BookSnapshot, OrderId, Price, Qty, Quotes, Side, TimeNs};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("unknown strategy '{0}'")]
    UnknownStrategy(String),
    #[error("strategy '{0}' needs a model but none was provided")]
    MissingModel(String),
    #[error("invalid parameter: {0}")]
    BadParam(String),
}

/// Position limits and holdings as tracked by the kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InventoryState {
    pub inventory: i64,
    pub max_inventory: i64,
    pub min_inventory: i64,
    pub capital: f64,
}

impl InventoryState {
    pub fn new(max_inventory: i64, min_inventory: i64, capital: f64) -> Self {
        InventoryState {
            inventory: 0,
            max_inventory,
            min_inventory,
            capital,
        }
    }
}

/// An order action emitted by a strategy; the kernel assigns ids and routes
/// it to the matching engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderIntent {
    Limit {
        side: Side,
        price_ticks: Price,
        qty: Qty,
    },
    Market {
        side: Side,
        qty: Qty,
    },
    Cancel {
        order_id: OrderId,
        qty: Option<Qty>,
    },
}

/// A strategy's own resting order as known to the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpenOrder {
    pub order_id: OrderId,
    pub side: Side,
    pub price_ticks: Price,
    pub remaining: Qty,
}

/// Fill notification for one of the agent's orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecutionReport {
    pub order_id: OrderId,
    pub side: Side,
    pub price_ticks: Price,
    pub quantity: Qty,
    pub remaining: Qty,
    pub time_ns: TimeNs,
}

/// Everything an agent may observe when deciding.
#[derive(Debug, Clone)]
pub struct MarketView<'a> {
    pub now_ns: TimeNs,
    pub quotes: Quotes,
    pub depth: &'a BookSnapshot,
    /// Mid at the previous observation step, if any.
    pub prev_mid: Option<f64>,
    /// Mid one step further back.
    pub prev_prev_mid: Option<f64>,
    pub inventory: InventoryState,
    pub open_orders: &'a [OpenOrder],
    pub cancellations_enabled: bool,
}

impl MarketView<'_> {
    pub fn open_exposure(&self, side: Side) -> Qty {
        self.open_orders
            .iter()
            .filter(|o| o.side == side)
            .map(|o| o.remaining)
            .sum()
    }

    /// Largest buy that cannot push inventory past its upper bound, given
    /// already-open buy orders.
    pub fn allowed_buy(&self) -> Qty {
        let room = self.inventory.max_inventory - self.inventory.inventory;
        (room.max(0) as Qty).saturating_sub(self.open_exposure(Side::Buy))
    }

    pub fn allowed_sell(&self) -> Qty {
        let room = self.inventory.inventory - self.inventory.min_inventory;
        (room.max(0) as Qty).saturating_sub(self.open_exposure(Side::Sell))
    }

    pub fn clamp_size(&self, side: Side, qty: Qty) -> Qty {
        match side {
            Side::Buy => qty.min(self.allowed_buy()),
            Side::Sell => qty.min(self.allowed_sell()),
        }
    }
}

/// Common interface of all trading strategies.
pub trait Strategy: Send {
    fn kind(&self) -> &'static str;

    /// The next time this agent wants to act, strictly after `now_ns`.
    fn next_wake(&mut self, now_ns: TimeNs, rng: &mut ChaCha8Rng) -> TimeNs;

    /// Decide at a wake-up.
    fn on_wake(&mut self, view: &MarketView<'_>, rng: &mut ChaCha8Rng) -> Vec<OrderIntent>;

    /// Public tape observation (every order book event).
    fn on_book_event(&mut self, _event: &BookEvent, _view: &MarketView<'_>) {}

    /// Own fill notification.
    fn on_execution(&mut self, _report: &ExecutionReport) {}

    /// Session close; returns final actions (flattening market orders).
    fn on_session_close(
        &mut self,
        _view: &MarketView<'_>,
        _rng: &mut ChaCha8Rng,
    ) -> Vec<OrderIntent> {
        Vec::new()
    }
}

/// Inventory scaling of quoted sizes: long inventory encourages selling.
/// Asks scale by (max + I)/max, bids by (max - I)/max, clamped to [0, 2].
pub fn inventory_factor(side: Side, inventory: i64, max_inventory: i64) -> f64 {
    if max_inventory <= 0 {
        return 0.0;
    }
    let ratio = inventory as f64 / max_inventory as f64;
    let factor = match side {
        Side::Sell => 1.0 + ratio,
        Side::Buy => 1.0 - ratio,
    };
    factor.clamp(0.0, 2.0)
}

/// Shared dependencies handed to strategy builders.
pub struct StrategyContext {
    pub tick_size: f64,
    /// Trained models by name ("dhmm", "nhmm").
    pub models: BTreeMap<String, Arc<DhpModel>>,
    pub dhmm: DhmmParams,
    pub pmm: PmmParams,
    pub fundamental: FundamentalParams,
    pub chartist: ChartistParams,
    pub noise: NoiseParams,
}

pub type StrategyBuilder =
    Box<dyn Fn(&StrategyContext, u64) -> Result<Box<dyn Strategy>, AgentError> + Send + Sync>;

/// Name-keyed registry of strategy builders; the built-in census covers the
/// five agent classes plus the depth-1 exponential market maker variant.
pub struct StrategyRegistry {
    builders: BTreeMap<String, StrategyBuilder>,
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        StrategyRegistry {
            builders: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut reg = StrategyRegistry::empty();
        reg.register(
            "dhmm",
            Box::new(|ctx, _seed| {
                let model = ctx
                    .models
                    .get("dhmm")
                    .cloned()
                    .ok_or_else(|| AgentError::MissingModel("dhmm".into()))?;
                Ok(Box::new(DhmmStrategy::new("dhmm", model, ctx.dhmm.clone())))
            }),
        );
        reg.register(
            "nhmm",
            Box::new(|ctx, _seed| {
                let model = ctx
                    .models
                    .get("nhmm")
                    .cloned()
                    .ok_or_else(|| AgentError::MissingModel("nhmm".into()))?;
                Ok(Box::new(DhmmStrategy::new("nhmm", model, ctx.dhmm.clone())))
            }),
        );
        reg.register(
            "pmm",
            Box::new(|ctx, _seed| Ok(Box::new(PmmStrategy::new(ctx.pmm.clone())?))),
        );
        reg.register(
            "fundamental",
            Box::new(|ctx, _seed| Ok(Box::new(FundamentalStrategy::new(ctx.fundamental.clone())?))),
        );
        reg.register(
            "chartist",
            Box::new(|ctx, _seed| Ok(Box::new(ChartistStrategy::new(ctx.chartist.clone())?))),
        );
        reg.register(
            "noise",
            Box::new(|ctx, _seed| Ok(Box::new(NoiseStrategy::new(ctx.noise.clone())?))),
        );
        reg
    }

    pub fn register(&mut self, name: &str, builder: StrategyBuilder) {
        self.builders.insert(name.to_string(), builder);
    }

    pub fn build(
        &self,
        name: &str,
        ctx: &StrategyContext,
        seed: u64,
    ) -> Result<Box<dyn Strategy>, AgentError> {
        let builder = self
            .builders
            .get(name)
            .ok_or_else(|| AgentError::UnknownStrategy(name.to_string()))?;
        builder(ctx, seed)
    }

    pub fn names(&self) -> Vec<&str> {
        self.builders.keys().map(|s| s.as_str()).collect()
    }
}

/// Draw an exponential waiting time with the given rate (events per second),
/// returned in nanoseconds and at least 1ns.
pub(crate) fn exp_wait_ns<R: rand::Rng>(rate_per_sec: f64, rng: &mut R) -> TimeNs {
    if rate_per_sec <= 0.0 {
        return TimeNs::MAX / 4;
    }
    let u: f64 = rng.random();
    let secs = -(1.0 - u).ln() / rate_per_sec;
    ((secs * 1e9) as TimeNs).max(1)
}

/// Round half away from zero; sizes of exactly zero mean "no order".
pub(crate) fn round_size(q: f64) -> i64 {
    if q >= 0.0 {
        (q + 0.5).floor() as i64
    } else {
        -((-q + 0.5).floor() as i64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inventory_factor_clamps_and_skews() {
        assert_eq!(inventory_factor(Side::Buy, 0, 10), 1.0);
        assert_eq!(inventory_factor(Side::Sell, 0, 10), 1.0);
        // long inventory: sell more, buy less
        assert_eq!(inventory_factor(Side::Sell, 5, 10), 1.5);
        assert_eq!(inventory_factor(Side::Buy, 5, 10), 0.5);
        assert_eq!(inventory_factor(Side::Buy, 10, 10), 0.0);
        // clamp at 2 even past the bound
        assert_eq!(inventory_factor(Side::Sell, 15, 10), 2.0);
        assert_eq!(inventory_factor(Side::Buy, -15, 10), 2.0);
    }

    #[test]
    fn round_size_is_half_away_from_zero() {
        assert_eq!(round_size(0.4), 0);
        assert_eq!(round_size(0.5), 1);
        assert_eq!(round_size(-0.5), -1);
        assert_eq!(round_size(-0.4), 0);
        assert_eq!(round_size(2.5), 3);
    }

    #[test]
    fn registry_has_builtins_and_rejects_unknown() {
        let reg = StrategyRegistry::with_builtins();
        let names = reg.names();
        for want in ["dhmm", "nhmm", "pmm", "fundamental", "chartist", "noise"] {
            assert!(names.contains(&want), "missing {want}");
        }
        let ctx = StrategyContext {
            tick_size: 0.01,
            models: BTreeMap::new(),
            dhmm: DhmmParams::default(),
            pmm: PmmParams::default(),
            fundamental: FundamentalParams::default(),
            chartist: ChartistParams::default(),
            noise: NoiseParams::default(),
        };
        assert!(matches!(
            reg.build("nope", &ctx, 0),
            Err(AgentError::UnknownStrategy(_))
        ));
        // model-backed strategies need a model
        assert!(matches!(
            reg.build("dhmm", &ctx, 0),
            Err(AgentError::MissingModel(_))
        ));
        // the rest build fine
        for name in ["pmm", "fundamental", "chartist", "noise"] {
            let s = reg.build(name, &ctx, 1).unwrap();
            assert_eq!(s.kind(), name);
        }
    }
}

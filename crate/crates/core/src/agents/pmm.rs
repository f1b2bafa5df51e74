use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::function::erf::erf;

use crate::lob::{BookEvent, BookEventKind, Price, Side, TimeNs};

use super::{exp_wait_ns, round_size, AgentError, MarketView, OrderIntent, Strategy};

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

/// Discrete probability estimate of the fundamental price over a tick grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PmmBelief {
    pub f_min: Price,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TradeObservation {
    Buy,
    Sell,
    NoTrade,
}

impl PmmBelief {
    pub fn uniform(f_min: Price, f_max: Price) -> Self {
        let n = (f_max - f_min + 1).max(1) as usize;
        PmmBelief {
            f_min,
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(f_min: Price, f_max: Price, at: Price) -> Self {
        let mut b = PmmBelief::uniform(f_min, f_max);
        for p in b.probs.iter_mut() {
            *p = 0.0;
        }
        let idx = (at - f_min).clamp(0, b.probs.len() as i64 - 1) as usize;
        b.probs[idx] = 1.0;
        b
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| (self.f_min + i as i64) as f64 * p)
            .sum()
    }

    pub fn normalize(&mut self) -> bool {
        let total: f64 = self.probs.iter().sum();
        if total <= 0.0 || !total.is_finite() {
            let n = self.probs.len();
            for p in self.probs.iter_mut() {
                *p = 1.0 / n as f64;
            }
            return false;
        }
        for p in self.probs.iter_mut() {
            *p /= total;
        }
        true
    }
}

/// Probability that an arriving order is a buy (at ask `p`) or sell (at bid
/// `p`) conditional on fundamental `f`: uninformed flow plus the informed
/// tail probability of the noisy valuation crossing the quote.
fn order_prob(side: Side, f: f64, quote: f64, informed: f64, uninformed: f64, noise_std: f64) -> f64 {
    let informed_prob = if noise_std > 1e-12 {
        match side {
            Side::Buy => normal_cdf((f - quote) / noise_std),
            Side::Sell => normal_cdf((quote - f) / noise_std),
        }
    } else {
        // degenerate noise: hard indicator with a half at equality
        let d = match side {
            Side::Buy => f - quote,
            Side::Sell => quote - f,
        };
        if d > 0.0 {
            1.0
        } else if d == 0.0 {
            0.5
        } else {
            0.0
        }
    };
    (1.0 - informed) * uninformed + informed * informed_prob
}

#[derive(Debug, Clone)]
pub struct PmmParams {
    /// Fraction of informed traders.
    pub informed_fraction: f64,
    /// Buy/sell probability of uninformed flow.
    pub uninformed_rate: f64,
    /// Std of the noisy-informed valuation, in ticks.
    pub noise_std: f64,
    /// Order/cancel size sensitivity to the mid change.
    pub eta: f64,
    /// Std of the order/cancel size draw.
    pub size_std: f64,
    /// Half-width of the belief grid around the first observed mid, ticks.
    pub grid_half_width: i64,
    /// Mid move treated as a jump event, ticks.
    pub jump_ticks: i64,
    /// Std of the jump diffusion applied to the belief, ticks.
    pub jump_std: f64,
    pub wake_rate: f64,
    pub max_fixed_point_iters: usize,
}

impl Default for PmmParams {
    fn default() -> Self {
        PmmParams {
            informed_fraction: 0.33,
            uninformed_rate: 0.33,
            noise_std: 5.0,
            eta: 0.04,
            size_std: 3.0,
            grid_half_width: 60,
            jump_ticks: 3,
            jump_std: 4.0,
            wake_rate: 0.5,
            max_fixed_point_iters: 1_000,
        }
    }
}

/// Fixed point of the conditional-expectation map for one quote side.
/// Returns (continuous solution, converged).
fn solve_quote(
    belief: &PmmBelief,
    side: Side,
    params: &PmmParams,
    max_iters: usize,
) -> (f64, bool) {
    let map = |p: f64| -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &w) in belief.probs.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let f = (belief.f_min + i as i64) as f64;
            let prob = order_prob(
                side,
                f,
                p,
                params.informed_fraction,
                params.uninformed_rate,
                params.noise_std,
            );
            num += f * prob * w;
            den += prob * w;
        }
        if den > 0.0 {
            num / den
        } else {
            p
        }
    };
    let mut p = belief.mean();
    for iter in 0..max_iters {
        let next = map(p);
        if (next - p).abs() < 1e-10 {
            return (next, true);
        }
        p = next;
        let _ = iter;
    }
    log::warn!("quote fixed point did not converge in {max_iters} iterations");
    (p, false)
}

/// Bid/ask from the belief: the ask solves the buy-side map, the bid the
/// sell-side map; grid rounding breaks ties toward the tighter spread.
pub fn pmm_quotes(belief: &PmmBelief, params: &PmmParams) -> ((Price, Price), bool) {
    let (ask_c, ok_a) = solve_quote(belief, Side::Buy, params, params.max_fixed_point_iters);
    let (bid_c, ok_b) = solve_quote(belief, Side::Sell, params, params.max_fixed_point_iters);
    // ties toward the tighter spread: ask floors on .5, bid ceils
    let ask = if ask_c.fract() == 0.5 {
        ask_c.floor() as Price
    } else {
        ask_c.round() as Price
    };
    let bid = if bid_c.fract() == 0.5 {
        bid_c.ceil() as Price
    } else {
        bid_c.round() as Price
    };
    ((bid.max(1), ask.max(1)), ok_a && ok_b)
}

/// Bayes update of the belief for one observation; jump events diffuse the
/// belief with a discrete normal kernel. Returns false when the posterior
/// mass vanished and the belief was reset to uniform.
pub fn pmm_update_belief(
    belief: &mut PmmBelief,
    obs: TradeObservation,
    bid: Price,
    ask: Price,
    params: &PmmParams,
) -> bool {
    for (i, p) in belief.probs.iter_mut().enumerate() {
        let f = (belief.f_min + i as i64) as f64;
        let buy = order_prob(
            Side::Buy,
            f,
            ask as f64,
            params.informed_fraction,
            params.uninformed_rate,
            params.noise_std,
        );
        let sell = order_prob(
            Side::Sell,
            f,
            bid as f64,
            params.informed_fraction,
            params.uninformed_rate,
            params.noise_std,
        );
        let like = match obs {
            TradeObservation::Buy => buy,
            TradeObservation::Sell => sell,
            TradeObservation::NoTrade => (1.0 - buy - sell).max(0.0),
        };
        *p *= like;
    }
    belief.normalize()
}

/// Convolve the belief with a zero-mean discrete normal of std `jump_std`.
pub fn pmm_diffuse_belief(belief: &mut PmmBelief, jump_std: f64) {
    if jump_std <= 0.0 {
        return;
    }
    let radius = (4.0 * jump_std).ceil() as i64;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k as f64 * k as f64) / (2.0 * jump_std * jump_std)).exp())
        .collect();
    let ksum: f64 = kernel.iter().sum();
    let n = belief.probs.len() as i64;
    let mut out = vec![0.0; belief.probs.len()];
    for (i, &w) in belief.probs.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (kidx, &kw) in kernel.iter().enumerate() {
            let j = i as i64 + kidx as i64 - radius;
            let j = j.clamp(0, n - 1) as usize;
            out[j] += w * kw / ksum;
        }
    }
    belief.probs = out;
    belief.normalize();
}

/// Signed order size from the mid change: eta * (mid - prev_mid) + noise,
/// rounded half away from zero.
pub fn pmm_order_size(
    params: &PmmParams,
    mid: f64,
    prev_mid: f64,
    rng: &mut ChaCha8Rng,
) -> i64 {
    let noise = if params.size_std > 0.0 {
        Normal::new(0.0, params.size_std).unwrap().sample(rng)
    } else {
        0.0
    };
    round_size(params.eta * (mid - prev_mid) + noise)
}

/// Benchmark market maker tracking the fundamental with a discrete belief.
pub struct PmmStrategy {
    params: PmmParams,
    belief: Option<PmmBelief>,
    quotes: (Price, Price),
    trades_since_wake: bool,
    last_event_mid: Option<f64>,
    pub resets: u32,
}

impl PmmStrategy {
    pub fn new(params: PmmParams) -> Result<Self, AgentError> {
        if !(0.0..=1.0).contains(&params.informed_fraction)
            || !(0.0..=1.0).contains(&params.uninformed_rate)
        {
            return Err(AgentError::BadParam(
                "informed fraction and uninformed rate must be in [0,1]".into(),
            ));
        }
        Ok(PmmStrategy {
            params,
            belief: None,
            quotes: (0, 0),
            trades_since_wake: false,
            last_event_mid: None,
            resets: 0,
        })
    }

    fn ensure_belief(&mut self, mid: f64) -> &mut PmmBelief {
        if self.belief.is_none() {
            let center = mid.round() as Price;
            let w = self.params.grid_half_width;
            self.belief = Some(PmmBelief::uniform((center - w).max(1), center + w));
            self.quotes = (center - 1, center + 1);
        }
        self.belief.as_mut().unwrap()
    }
}

impl Strategy for PmmStrategy {
    fn kind(&self) -> &'static str {
        "pmm"
    }

    fn next_wake(&mut self, now_ns: TimeNs, rng: &mut ChaCha8Rng) -> TimeNs {
        now_ns + exp_wait_ns(self.params.wake_rate, rng)
    }

    fn on_book_event(&mut self, event: &BookEvent, view: &MarketView<'_>) {
        let Some(mid) = view.quotes.mid else {
            return;
        };
        self.ensure_belief(mid);
        let (bid, ask) = self.quotes;
        let params = self.params.clone();
        let belief = self.belief.as_mut().unwrap();
        match event.kind {
            BookEventKind::MarketBuy => {
                if !pmm_update_belief(belief, TradeObservation::Buy, bid, ask, &params) {
                    self.resets += 1;
                }
                self.trades_since_wake = true;
            }
            BookEventKind::MarketSell => {
                if !pmm_update_belief(belief, TradeObservation::Sell, bid, ask, &params) {
                    self.resets += 1;
                }
                self.trades_since_wake = true;
            }
            _ => {}
        }
        if let Some(last) = self.last_event_mid {
            if (mid - last).abs() >= params.jump_ticks as f64 {
                pmm_diffuse_belief(belief, params.jump_std);
            }
        }
        self.last_event_mid = Some(mid);
    }

    fn on_wake(&mut self, view: &MarketView<'_>, rng: &mut ChaCha8Rng) -> Vec<OrderIntent> {
        let Some(mid) = view.quotes.mid else {
            return Vec::new();
        };
        self.ensure_belief(mid);
        let params = self.params.clone();
        if !self.trades_since_wake {
            let (bid, ask) = self.quotes;
            let belief = self.belief.as_mut().unwrap();
            if !pmm_update_belief(belief, TradeObservation::NoTrade, bid, ask, &params) {
                self.resets += 1;
            }
        }
        self.trades_since_wake = false;
        let belief = self.belief.as_ref().unwrap();
        let (quotes, _converged) = pmm_quotes(belief, &params);
        self.quotes = quotes;
        let (bid, ask) = quotes;

        let mut intents = Vec::new();
        let prev_mid = view.prev_mid.unwrap_or(mid);

        // stale own quotes leave the book (cancel size law shared with
        // orders; a draw at least the remaining size is a full cancel)
        if view.cancellations_enabled {
            let mut cancels = 0;
            for o in view.open_orders {
                let target = match o.side {
                    Side::Buy => bid,
                    Side::Sell => ask,
                };
                if o.price_ticks != target && cancels < 2 {
                    let draw = pmm_order_size(&params, mid, prev_mid, rng).unsigned_abs();
                    let qty = if draw == 0 || draw >= o.remaining {
                        None
                    } else {
                        Some(draw)
                    };
                    intents.push(OrderIntent::Cancel {
                        order_id: o.order_id,
                        qty,
                    });
                    cancels += 1;
                }
            }
        }

        let q = pmm_order_size(&params, mid, prev_mid, rng);
        if q != 0 {
            let (side, price) = if q > 0 {
                (Side::Buy, bid)
            } else {
                (Side::Sell, ask)
            };
            let qty = view.clamp_size(side, q.unsigned_abs());
            if qty > 0 {
                intents.push(OrderIntent::Limit {
                    side,
                    price_ticks: price.max(1),
                    qty,
                });
            }
        }
        intents
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn flat_params() -> PmmParams {
        PmmParams::default()
    }

    #[test]
    fn no_informed_traders_quote_the_mean() {
        let belief = PmmBelief::uniform(90, 110);
        let params = PmmParams {
            informed_fraction: 0.0,
            ..flat_params()
        };
        let ((bid, ask), converged) = pmm_quotes(&belief, &params);
        assert!(converged);
        let mean = belief.mean().round() as Price;
        assert_eq!(ask, mean);
        assert_eq!(bid, mean);
    }

    #[test]
    fn point_mass_quotes_straddle_within_one_step() {
        let belief = PmmBelief::point_mass(90, 110, 100);
        let params = PmmParams {
            noise_std: 1e-13,
            ..flat_params()
        };
        let ((bid, ask), _) = pmm_quotes(&belief, &params);
        assert!((ask - 100).abs() <= 1);
        assert!((bid - 100).abs() <= 1);
    }

    #[test]
    fn fixed_point_residual_below_one_grid_step() {
        // skewed belief
        let mut belief = PmmBelief::uniform(80, 120);
        for (i, p) in belief.probs.iter_mut().enumerate() {
            *p = (i as f64 + 1.0).powi(2);
        }
        belief.normalize();
        let params = flat_params();
        let ((bid, ask), converged) = pmm_quotes(&belief, &params);
        assert!(converged);
        for (side, quote) in [(Side::Buy, ask), (Side::Sell, bid)] {
            let (mapped, _) = solve_quote(&belief, side, &params, 1);
            let _ = mapped;
            // evaluate the map once at the returned grid quote
            let mut num = 0.0;
            let mut den = 0.0;
            for (i, &w) in belief.probs.iter().enumerate() {
                let f = (belief.f_min + i as i64) as f64;
                let prob = order_prob(side, f, quote as f64, params.informed_fraction, params.uninformed_rate, params.noise_std);
                num += f * prob * w;
                den += prob * w;
            }
            let residual = (num / den - quote as f64).abs();
            assert!(residual < 1.0, "side {side:?} residual {residual}");
        }
    }

    #[test]
    fn unit_likelihood_leaves_belief_unchanged() {
        // informed fraction 0 makes both likelihoods constant in f, so the
        // posterior equals the prior
        let mut belief = PmmBelief::uniform(95, 105);
        for (i, p) in belief.probs.iter_mut().enumerate() {
            *p = 1.0 + i as f64;
        }
        belief.normalize();
        let before = belief.clone();
        let params = PmmParams {
            informed_fraction: 0.0,
            ..flat_params()
        };
        pmm_update_belief(&mut belief, TradeObservation::Buy, 99, 101, &params);
        for (a, b) in belief.probs.iter().zip(&before.probs) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn repeated_buys_raise_posterior_mean() {
        // 5-point grid
        let mut belief = PmmBelief::uniform(98, 102);
        let params = flat_params();
        let mut last_mean = belief.mean();
        for _ in 0..10 {
            pmm_update_belief(&mut belief, TradeObservation::Buy, 99, 101, &params);
            let mean = belief.mean();
            assert!(mean >= last_mean - 1e-12, "mean {mean} < {last_mean}");
            last_mean = mean;
            let total: f64 = belief.probs.iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
        assert!(last_mean > 100.0);
    }

    #[test]
    fn vanished_posterior_resets_to_uniform() {
        let mut belief = PmmBelief::point_mass(90, 110, 90);
        let params = PmmParams {
            informed_fraction: 1.0,
            uninformed_rate: 0.0,
            noise_std: 1e-13,
            ..flat_params()
        };
        // a buy at ask 110 is impossible under a point mass at 90
        let ok = pmm_update_belief(&mut belief, TradeObservation::Buy, 90, 110, &params);
        assert!(!ok);
        let total: f64 = belief.probs.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        let uniform = 1.0 / belief.probs.len() as f64;
        assert!(belief.probs.iter().all(|p| (p - uniform).abs() < 1e-12));
    }

    #[test]
    fn order_size_rounds_and_tracks_mid_changes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let silent = PmmParams {
            size_std: 0.0,
            ..flat_params()
        };
        assert_eq!(pmm_order_size(&silent, 100.0, 100.0, &mut rng), 0);
        // eta * 10 = 0.4 rounds to zero
        assert_eq!(pmm_order_size(&silent, 110.0, 100.0, &mut rng), 0);
        // eta * 20 = 0.8 rounds to 1
        assert_eq!(pmm_order_size(&silent, 120.0, 100.0, &mut rng), 1);

        let noisy = flat_params();
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            acc += pmm_order_size(&noisy, 150.0, 100.0, &mut rng) as f64;
        }
        let mean = acc / n as f64;
        let want = noisy.eta * 50.0;
        // rounding keeps the mean near eta * dmid; allow 3 standard errors
        let se = noisy.size_std / (n as f64).sqrt();
        assert!((mean - want).abs() < 3.0 * se + 0.06, "mean {mean} want {want}");
    }

    #[test]
    fn diffusion_spreads_a_point_mass() {
        let mut belief = PmmBelief::point_mass(90, 110, 100);
        pmm_diffuse_belief(&mut belief, 2.0);
        let total: f64 = belief.probs.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(belief.probs[10] < 1.0);
        assert!(belief.probs[8] > 0.0);
    }
}

//! Flat `key = value` configuration. Lines starting with `#` are comments.
//! A `preset` key expands to a bundle of defaults (desk-scale or the
//! full-size census); explicit keys then override preset values, and
//! command-line `--set key=value` pairs override everything.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::agents::{
    ChartistParams, DhmmParams, FundamentalParams, NoiseFundamentalRule, NoiseParams, PmmParams,
};
use crate::dhp::{DecayMode, DhpConfig, PretrainConfig, SdaeActivation, TrainConfig};
use crate::hawkes::FitConfig;
use crate::market_sim::SessionConfig;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {0}: expected 'key = value'")]
    BadLine(usize),
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("bad value for '{key}': '{value}'")]
    BadValue { key: String, value: String },
    #[error("unknown preset '{0}' (expected desk or paper)")]
    UnknownPreset(String),
}

const KNOWN_KEYS: &[&str] = &[
    "preset",
    // session
    "instruments",
    "tick_size",
    "trading_open",
    "trading_close",
    "session_seconds",
    "initial_price_ticks",
    "seed_book_levels",
    "seed_book_qty",
    "seed",
    "step_seconds",
    "snapshot_every_steps",
    "snapshot_depth",
    "cancellations_enabled",
    "max_messages",
    // census
    "market_makers_dhmm",
    "market_makers_nhmm",
    "market_makers_pmm",
    "fundamental_traders",
    "chartist_traders",
    "noise_traders",
    // capital
    "initial_capital_alpha",
    "initial_capital_scale",
    "inventory_bound_scale",
    "mm_inventory_bound",
    "transaction_cost_penalty",
    // kernel
    "latency_fixed_ns",
    "latency_jitter_ns",
    "throttle_messages",
    "throttle_interval_ns",
    // deep market maker
    "dhmm_half_spread_ticks",
    "dhmm_max_jump_ticks",
    "dhmm_jump_base_rate",
    "dhmm_limit_alpha",
    "dhmm_limit_beta",
    "dhmm_limit_tsallis_q",
    "dhmm_limit_qmax",
    "dhmm_cancel_p0",
    "dhmm_cancel_cap",
    "dhmm_market_p0",
    "dhmm_market_theta0",
    "dhmm_market_theta_inf",
    "dhmm_market_cap",
    "dhmm_min_quote_interval",
    "dhmm_max_quote_interval",
    "dhmm_max_open_per_side",
    "dhmm_model_path",
    "nhmm_model_path",
    // probabilistic market maker
    "pmm_informed_fraction",
    "pmm_uninformed_rate",
    "pmm_noise_std",
    "pmm_eta",
    "pmm_size_std",
    "pmm_grid_half_width",
    "pmm_jump_ticks",
    "pmm_jump_std",
    "pmm_wake_rate",
    // background agents
    "fundamental_eta",
    "fundamental_drift",
    "fundamental_value_std",
    "fundamental_price_std",
    "fundamental_size_std",
    "fundamental_initial_value",
    "fundamental_wake_rate",
    "fundamental_max_open",
    "chartist_eta",
    "chartist_drift",
    "chartist_price_std",
    "chartist_size_std",
    "chartist_wake_rate",
    "chartist_max_open",
    "noise_eta",
    "noise_mean_value",
    "noise_noise_std",
    "noise_value_std",
    "noise_rule",
    "noise_wake_rate",
    "noise_max_open",
    // model
    "model_event_types",
    "model_hidden",
    "model_lstm_layers",
    "model_dae_layers",
    "model_dae_width",
    "model_dae_activation",
    "model_decay_mode",
    "model_tie_target_gates",
    "model_decay_scale",
    "model_init_std",
    "model_seed",
    // training
    "train_lambda1",
    "train_lambda2",
    "train_blocks",
    "train_pretrain_lr",
    "train_finetune_lr",
    "train_pretrain_epochs",
    "train_corruption",
    "train_batch_size",
    "train_max_epochs",
    "train_patience",
    "train_noise_std",
    "train_mc_samples",
    "train_segment_events",
    // classical point-process fit
    "hawkes_lr",
    "hawkes_max_iters",
];

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

fn parse_hhmm_ns(raw: &str) -> Option<i64> {
    let (h, m) = raw.split_once(':')?;
    let h: i64 = h.parse().ok()?;
    let m: i64 = m.parse().ok()?;
    if !(0..24).contains(&h) || !(0..60).contains(&m) {
        return None;
    }
    Some((h * 3600 + m * 60) * 1_000_000_000)
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let mut cfg = Config::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::BadLine(i + 1))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    fn typed<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(raw) => raw.parse().map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                value: raw.clone(),
            }),
        }
    }

    fn bool_key(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.values.get(key).map(|s| s.as_str()) {
            None => Ok(default),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("false") | Some("0") | Some("no") => Ok(false),
            Some(other) => Err(ConfigError::BadValue {
                key: key.to_string(),
                value: other.to_string(),
            }),
        }
    }

    /// Resolve the preset plus overrides into the runnable bundle.
    pub fn build(&self) -> Result<ResolvedConfig, ConfigError> {
        let preset = self.values.get("preset").map(|s| s.as_str()).unwrap_or("desk");
        let mut base = match preset {
            "desk" => Config::desk_preset(),
            "paper" => Config::paper_preset(),
            other => return Err(ConfigError::UnknownPreset(other.to_string())),
        };
        // explicit trading hours win over a preset's session duration
        if (self.values.contains_key("trading_close") || self.values.contains_key("trading_open"))
            && !self.values.contains_key("session_seconds")
        {
            base.values.remove("session_seconds");
        }
        for (k, v) in &self.values {
            if k != "preset" {
                base.values.insert(k.clone(), v.clone());
            }
        }
        base.resolve()
    }

    /// Workstation-scale defaults: 100-agent census, small model widths.
    fn desk_preset() -> Config {
        let mut c = Config::default();
        let pairs = [
            ("market_makers_dhmm", "1"),
            ("market_makers_nhmm", "1"),
            ("market_makers_pmm", "1"),
            ("fundamental_traders", "30"),
            ("chartist_traders", "60"),
            ("noise_traders", "9"),
            ("model_hidden", "32"),
            ("model_lstm_layers", "3"),
            ("model_dae_layers", "1"),
            ("model_dae_width", "16"),
            ("train_pretrain_epochs", "20"),
            ("train_max_epochs", "15"),
            ("inventory_bound_scale", "300"),
            ("session_seconds", "3600"),
            // calibrated desk ecology: a gently drifting consensus value,
            // anchored noise flow and market makers quoting a few ticks out
            ("chartist_size_std", "10"),
            ("fundamental_size_std", "20"),
            ("noise_noise_std", "6"),
            ("noise_wake_rate", "1.0"),
            ("fundamental_value_std", "0.0005"),
            ("fundamental_drift", "1e-4"),
            ("dhmm_half_spread_ticks", "4"),
            ("dhmm_min_quote_interval", "2.0"),
        ];
        for (k, v) in pairs {
            c.values.insert(k.to_string(), v.to_string());
        }
        c
    }

    /// Full-size configuration-table values: ~10^4 traders, 1024 hidden
    /// units, three autoencoder and LSTM layers, the published learning
    /// rates and the full trading day.
    fn paper_preset() -> Config {
        let mut c = Config::default();
        let pairs = [
            ("market_makers_dhmm", "1"),
            ("market_makers_nhmm", "1"),
            ("market_makers_pmm", "1"),
            ("fundamental_traders", "3000"),
            ("chartist_traders", "6000"),
            ("noise_traders", "4000"),
            ("model_hidden", "1024"),
            ("model_lstm_layers", "3"),
            ("model_dae_layers", "3"),
            ("model_dae_width", "1024"),
            ("train_pretrain_epochs", "100"),
            ("train_pretrain_lr", "0.05"),
            ("train_finetune_lr", "0.10"),
            ("train_noise_std", "0.50"),
            ("inventory_bound_scale", "1e5"),
            ("mm_inventory_bound", "0"),
        ];
        for (k, v) in pairs {
            c.values.insert(k.to_string(), v.to_string());
        }
        c
    }

    fn resolve(&self) -> Result<ResolvedConfig, ConfigError> {
        let mut session = SessionConfig::default();
        if let Some(raw) = self.values.get("instruments") {
            session.instruments = raw.split(',').map(|s| s.trim().to_string()).collect();
        }
        session.tick_size = self.typed("tick_size", session.tick_size)?;
        if let Some(raw) = self.values.get("trading_open") {
            session.open_ns = parse_hhmm_ns(raw).ok_or(ConfigError::BadValue {
                key: "trading_open".into(),
                value: raw.clone(),
            })?;
        }
        if let Some(raw) = self.values.get("trading_close") {
            session.close_ns = parse_hhmm_ns(raw).ok_or(ConfigError::BadValue {
                key: "trading_close".into(),
                value: raw.clone(),
            })?;
        }
        if self.values.contains_key("session_seconds") {
            let secs: u64 = self.typed("session_seconds", 3600u64)?;
            session.close_ns = session.open_ns + (secs as i64) * 1_000_000_000;
        }
        session.initial_price_ticks = self.typed("initial_price_ticks", session.initial_price_ticks)?;
        session.seed_book_levels = self.typed("seed_book_levels", session.seed_book_levels)?;
        session.seed_book_qty = self.typed("seed_book_qty", session.seed_book_qty)?;
        session.seed = self.typed("seed", session.seed)?;
        let step_secs: f64 = self.typed("step_seconds", 1.0)?;
        session.step_ns = (step_secs * 1e9) as i64;
        session.snapshot_every_steps = self.typed("snapshot_every_steps", session.snapshot_every_steps)?;
        session.snapshot_depth = self.typed("snapshot_depth", session.snapshot_depth)?;
        session.cancellations_enabled = self.bool_key("cancellations_enabled", true)?;
        session.max_messages = self.typed("max_messages", session.max_messages)?;
        session.capital_exponent = self.typed("initial_capital_alpha", session.capital_exponent)?;
        session.capital_scale = self.typed("initial_capital_scale", session.capital_scale)?;
        session.inventory_bound_scale =
            self.typed("inventory_bound_scale", session.inventory_bound_scale)?;
        session.mm_inventory_bound = self.typed("mm_inventory_bound", 50i64)?;
        session.transaction_penalty =
            self.typed("transaction_cost_penalty", session.transaction_penalty)?;
        session.kernel.latency_fixed_ns =
            self.typed("latency_fixed_ns", session.kernel.latency_fixed_ns)?;
        session.kernel.latency_jitter_ns =
            self.typed("latency_jitter_ns", session.kernel.latency_jitter_ns)?;
        session.kernel.throttle_messages =
            self.typed("throttle_messages", session.kernel.throttle_messages)?;
        session.kernel.throttle_interval_ns =
            self.typed("throttle_interval_ns", session.kernel.throttle_interval_ns)?;

        let mut census = Vec::new();
        for (key, name) in [
            ("market_makers_dhmm", "dhmm"),
            ("market_makers_nhmm", "nhmm"),
            ("market_makers_pmm", "pmm"),
            ("fundamental_traders", "fundamental"),
            ("chartist_traders", "chartist"),
            ("noise_traders", "noise"),
        ] {
            let count: usize = self.typed(key, 0usize)?;
            if count > 0 {
                census.push((name.to_string(), count));
            }
        }
        session.census = census;

        let initial_value = session.initial_price_ticks as f64;
        let dhmm = DhmmParams {
            half_spread_ticks: self.typed("dhmm_half_spread_ticks", 1)?,
            max_jump_ticks: self.typed("dhmm_max_jump_ticks", 5usize)?,
            jump_base_rate: self.typed("dhmm_jump_base_rate", 0.0)?,
            limit_alpha: self.typed("dhmm_limit_alpha", 0.07)?,
            limit_beta: self.typed("dhmm_limit_beta", 1.52)?,
            limit_tsallis_q: self.typed("dhmm_limit_tsallis_q", 1.3)?,
            limit_qmax: self.typed("dhmm_limit_qmax", 50.0)?,
            cancel_p0: self.typed("dhmm_cancel_p0", 0.60)?,
            cancel_cap: self.typed("dhmm_cancel_cap", 20u64)?,
            market_p0: self.typed("dhmm_market_p0", 0.5)?,
            market_theta0: self.typed("dhmm_market_theta0", 0.7)?,
            market_theta_inf: self.typed("dhmm_market_theta_inf", 0.06)?,
            market_cap: self.typed("dhmm_market_cap", 20u64)?,
            min_quote_interval: self.typed("dhmm_min_quote_interval", 0.5)?,
            max_quote_interval: self.typed("dhmm_max_quote_interval", 30.0)?,
            max_open_per_side: self.typed("dhmm_max_open_per_side", 3usize)?,
        };
        let pmm = PmmParams {
            informed_fraction: self.typed("pmm_informed_fraction", 0.33)?,
            uninformed_rate: self.typed("pmm_uninformed_rate", 0.33)?,
            noise_std: self.typed("pmm_noise_std", 5.0)?,
            eta: self.typed("pmm_eta", 0.04)?,
            size_std: self.typed("pmm_size_std", 3.0)?,
            grid_half_width: self.typed("pmm_grid_half_width", 60)?,
            jump_ticks: self.typed("pmm_jump_ticks", 3)?,
            jump_std: self.typed("pmm_jump_std", 4.0)?,
            wake_rate: self.typed("pmm_wake_rate", 0.5)?,
            max_fixed_point_iters: 1_000,
        };
        let fundamental = FundamentalParams {
            eta: self.typed("fundamental_eta", 0.04)?,
            drift: self.typed("fundamental_drift", 0.0)?,
            value_std: self.typed("fundamental_value_std", 0.001)?,
            price_std: self.typed("fundamental_price_std", 0.001)?,
            size_std: self.typed("fundamental_size_std", 40.0)?,
            initial_value: self.typed("fundamental_initial_value", initial_value)?,
            wake_rate: self.typed("fundamental_wake_rate", 0.2)?,
            max_open: self.typed("fundamental_max_open", 2usize)?,
        };
        let chartist = ChartistParams {
            eta: self.typed("chartist_eta", 0.04)?,
            drift: self.typed("chartist_drift", 0.0)?,
            price_std: self.typed("chartist_price_std", 0.001)?,
            size_std: self.typed("chartist_size_std", 30.0)?,
            wake_rate: self.typed("chartist_wake_rate", 0.2)?,
            max_open: self.typed("chartist_max_open", 2usize)?,
        };
        let noise_rule = match self.values.get("noise_rule").map(|s| s.as_str()) {
            None | Some("mean_reverting") => NoiseFundamentalRule::MeanReverting,
            Some("paper_literal") => NoiseFundamentalRule::PaperLiteral,
            Some(other) => {
                return Err(ConfigError::BadValue {
                    key: "noise_rule".into(),
                    value: other.to_string(),
                })
            }
        };
        let noise = NoiseParams {
            eta: self.typed("noise_eta", 0.04)?,
            mean_value: self.typed("noise_mean_value", initial_value)?,
            noise_std: self.typed("noise_noise_std", 12.0)?,
            value_std: self.typed("noise_value_std", 8.0)?,
            rule: noise_rule,
            wake_rate: self.typed("noise_wake_rate", 0.2)?,
            max_open: self.typed("noise_max_open", 2usize)?,
        };

        let dae_layers: usize = self.typed("model_dae_layers", 1usize)?;
        let dae_width: usize = self.typed("model_dae_width", 16usize)?;
        let decay_mode = match self.values.get("model_decay_mode").map(|s| s.as_str()) {
            None | Some("power_law") => DecayMode::PowerLaw,
            Some("exponential") => DecayMode::Exponential,
            Some(other) => {
                return Err(ConfigError::BadValue {
                    key: "model_decay_mode".into(),
                    value: other.to_string(),
                })
            }
        };
        let sdae_activation = match self.values.get("model_dae_activation").map(|s| s.as_str()) {
            None | Some("sigmoid") => SdaeActivation::Sigmoid,
            Some("linear") => SdaeActivation::Linear,
            Some("tanh") => SdaeActivation::Tanh,
            Some(other) => {
                return Err(ConfigError::BadValue {
                    key: "model_dae_activation".into(),
                    value: other.to_string(),
                })
            }
        };
        let model = DhpConfig {
            event_types: self.typed("model_event_types", 6usize)?,
            sdae_widths: vec![dae_width; dae_layers],
            sdae_activation,
            lstm_layers: self.typed("model_lstm_layers", 3usize)?,
            hidden: self.typed("model_hidden", 32usize)?,
            decay_mode,
            tie_target_gates: self.bool_key("model_tie_target_gates", false)?,
            decay_scale: self.typed("model_decay_scale", 1.0)?,
            init_std: self.typed("model_init_std", 0.1)?,
        };
        let train = TrainConfig {
            lambda1: self.typed("train_lambda1", 1e-4)?,
            lambda2: self.typed("train_lambda2", 1e-4)?,
            blocks: self.typed("train_blocks", 4usize)?,
            pretrain: PretrainConfig {
                lr: self.typed("train_pretrain_lr", 0.05)?,
                epochs: self.typed("train_pretrain_epochs", 100usize)?,
                corruption: self.typed("train_corruption", 0.3)?,
                batch_size: self.typed("train_batch_size", 64usize)?,
            },
            finetune_lr: self.typed("train_finetune_lr", 0.10)?,
            max_epochs: self.typed("train_max_epochs", 50usize)?,
            patience: self.typed("train_patience", 5usize)?,
            noise_std: self.typed("train_noise_std", 0.50)?,
            mc_samples: self.typed("train_mc_samples", 3usize)?,
            seed: self.typed("model_seed", session.seed)?,
        };
        let hawkes_fit = FitConfig {
            lr: self.typed("hawkes_lr", 0.05)?,
            max_iters: self.typed("hawkes_max_iters", 2_000usize)?,
            ..FitConfig::default()
        };

        let train_segment_events: usize = self.typed("train_segment_events", 512usize)?;
        Ok(ResolvedConfig {
            train_segment_events,
            session,
            dhmm,
            pmm,
            fundamental,
            chartist,
            noise,
            model,
            train,
            hawkes_fit,
            dhmm_model_path: self.values.get("dhmm_model_path").cloned(),
            nhmm_model_path: self.values.get("nhmm_model_path").cloned(),
        })
    }
}

/// Everything a run needs, assembled from the flat config.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub session: SessionConfig,
    /// Training streams are cut into segments of at most this many events.
    pub train_segment_events: usize,
    pub dhmm: DhmmParams,
    pub pmm: PmmParams,
    pub fundamental: FundamentalParams,
    pub chartist: ChartistParams,
    pub noise: NoiseParams,
    pub model: DhpConfig,
    pub train: TrainConfig,
    pub hawkes_fit: FitConfig,
    pub dhmm_model_path: Option<String>,
    pub nhmm_model_path: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_key_value_lines_with_comments() {
        let text = "# a comment\nseed = 7\ntick_size = 0.05\n\nchartist_traders = 3\n";
        let cfg = Config::parse(text).unwrap();
        let resolved = cfg.build().unwrap();
        assert_eq!(resolved.session.seed, 7);
        assert_eq!(resolved.session.tick_size, 0.05);
        assert!(resolved
            .session
            .census
            .iter()
            .any(|(n, c)| n == "chartist" && *c == 3));
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert!(matches!(
            Config::parse("nope = 1\n"),
            Err(ConfigError::UnknownKey(k)) if k == "nope"
        ));
    }

    #[test]
    fn malformed_line_is_rejected() {
        assert!(matches!(
            Config::parse("just-some-words\n"),
            Err(ConfigError::BadLine(1))
        ));
    }

    #[test]
    fn bad_value_is_named() {
        let cfg = Config::parse("seed = banana\n").unwrap();
        assert!(matches!(
            cfg.build(),
            Err(ConfigError::BadValue { key, .. }) if key == "seed"
        ));
    }

    #[test]
    fn desk_preset_is_default_and_paper_scales_up() {
        let desk = Config::parse("").unwrap().build().unwrap();
        let total: usize = desk.session.census.iter().map(|(_, c)| c).sum();
        assert_eq!(total, 102);
        assert_eq!(desk.model.hidden, 32);

        let paper = Config::parse("preset = paper\n").unwrap().build().unwrap();
        let total: usize = paper.session.census.iter().map(|(_, c)| c).sum();
        assert_eq!(total, 13_003);
        assert_eq!(paper.model.hidden, 1024);
        assert_eq!(paper.train.pretrain.epochs, 100);
        assert_eq!(paper.train.finetune_lr, 0.10);
        // full trading day 09:30-16:00
        assert_eq!(paper.session.open_ns, 34_200_000_000_000);
        assert_eq!(paper.session.close_ns, 57_600_000_000_000);
    }

    #[test]
    fn explicit_keys_override_preset() {
        let cfg = Config::parse("preset = paper\nmodel_hidden = 64\nsession_seconds = 60\n")
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(cfg.model.hidden, 64);
        assert_eq!(
            cfg.session.close_ns - cfg.session.open_ns,
            60_000_000_000
        );
    }

    #[test]
    fn trading_hours_parse() {
        let cfg = Config::parse("trading_open = 10:00\ntrading_close = 11:30\n")
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(cfg.session.open_ns, 36_000_000_000_000);
        assert_eq!(cfg.session.close_ns, 41_400_000_000_000);
        assert!(Config::parse("trading_open = 25:00\n").unwrap().build().is_err());
    }

    #[test]
    fn table_defaults_survive_resolution() {
        let cfg = Config::parse("").unwrap().build().unwrap();
        assert_eq!(cfg.session.transaction_penalty, 0.06);
        assert_eq!(cfg.session.capital_exponent, 2.3);
        assert_eq!(cfg.dhmm.limit_alpha, 0.07);
        assert_eq!(cfg.dhmm.limit_beta, 1.52);
        assert_eq!(cfg.dhmm.cancel_p0, 0.60);
        assert_eq!(cfg.pmm.informed_fraction, 0.33);
        assert_eq!(cfg.pmm.uninformed_rate, 0.33);
        assert_eq!(cfg.pmm.eta, 0.04);
        assert_eq!(cfg.fundamental.eta, 0.04);
        assert_eq!(cfg.chartist.eta, 0.04);
        assert_eq!(cfg.noise.eta, 0.04);
    }
}

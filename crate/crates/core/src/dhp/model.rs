use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{Tape, Var};

use super::ctlstm::{CtLstmLayer, DecayMode, LayerStateValues, LayerStateVars};
use super::embed::{embed_dim, FeatureNorm, Stream, StreamEvent};
use super::params::{ParamStore, SegId};
use super::sdae::{SdaeActivation, SdaeLayer};
use super::DhpError;

#[derive(Debug, Clone, PartialEq)]
pub struct DhpConfig {
    /// Size of the event alphabet (one intensity head per type).
    pub event_types: usize,
    /// Hidden widths of the denoising autoencoder stack; empty disables it.
    pub sdae_widths: Vec<usize>,
    pub sdae_activation: SdaeActivation,
    pub lstm_layers: usize,
    pub hidden: usize,
    pub decay_mode: DecayMode,
    /// Share the first input/forget gates with the target-cell update.
    pub tie_target_gates: bool,
    /// Fixed scale of the decay head's softplus.
    pub decay_scale: f64,
    pub init_std: f64,
}

impl Default for DhpConfig {
    fn default() -> Self {
        DhpConfig {
            event_types: 6,
            sdae_widths: vec![1024, 1024, 1024],
            sdae_activation: SdaeActivation::Sigmoid,
            lstm_layers: 3,
            hidden: 1024,
            decay_mode: DecayMode::PowerLaw,
            tie_target_gates: false,
            decay_scale: 1.0,
            init_std: 0.1,
        }
    }
}

impl DhpConfig {
    /// Small configuration for workstation-scale experiments and tests.
    pub fn desk(event_types: usize, hidden: usize, lstm_layers: usize) -> Self {
        DhpConfig {
            event_types,
            sdae_widths: vec![hidden.min(16)],
            lstm_layers,
            hidden,
            ..DhpConfig::default()
        }
    }

    /// Depth-1 exponential-decay benchmark configuration.
    pub fn neural_hawkes(event_types: usize, hidden: usize) -> Self {
        DhpConfig {
            event_types,
            sdae_widths: vec![],
            lstm_layers: 1,
            hidden,
            decay_mode: DecayMode::Exponential,
            ..DhpConfig::default()
        }
    }
}

/// The trained order-flow model: SDAE stack, continuous-time LSTM stack and
/// per-event-type softplus intensity heads over one flat parameter store.
#[derive(Debug, Clone, PartialEq)]
pub struct DhpModel {
    pub config: DhpConfig,
    pub params: ParamStore,
    pub sdae: Vec<SdaeLayer>,
    pub lstm: Vec<CtLstmLayer>,
    head_w: Vec<SegId>,
    head_log_scale: Vec<SegId>,
    pub feature_norm: FeatureNorm,
    /// Power-law decay time constant; set to the training median gap.
    pub tau0: f64,
}

impl DhpModel {
    pub fn new(config: DhpConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let k = config.event_types;
        let d = embed_dim(k);

        let mut sdae = Vec::new();
        let mut width = d;
        for (l, &w) in config.sdae_widths.iter().enumerate() {
            sdae.push(SdaeLayer::register(
                &mut params,
                &format!("sdae{l}"),
                width,
                w,
                config.sdae_activation,
                config.init_std,
                &mut rng,
            ));
            width = w;
        }

        let mut lstm = Vec::new();
        let mut input_dim = width;
        for l in 0..config.lstm_layers {
            lstm.push(CtLstmLayer::register(
                &mut params,
                &format!("lstm{l}"),
                input_dim,
                config.hidden,
                config.tie_target_gates,
                config.init_std,
                &mut rng,
            ));
            input_dim = config.hidden;
        }

        let mut head_w = Vec::new();
        let mut head_log_scale = Vec::new();
        for h in 0..k {
            head_w.push(params.register_normal(
                &format!("head{h}.w"),
                config.hidden,
                config.init_std,
                &mut rng,
            ));
            head_log_scale.push(params.register_zeros(&format!("head{h}.logs"), 1));
        }

        DhpModel {
            config,
            params,
            sdae,
            lstm,
            head_w,
            head_log_scale,
            feature_norm: FeatureNorm::default(),
            tau0: 1.0,
        }
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn embed_dim(&self) -> usize {
        embed_dim(self.config.event_types)
    }

    /// Input weight matrices of the LSTM stack (for group regularization).
    pub fn input_weight_segments(&self) -> Vec<(SegId, usize, usize)> {
        self.lstm
            .iter()
            .flat_map(|l| l.input_weight_segments())
            .collect()
    }

    pub fn leaves(&self, tape: &mut Tape) -> Vec<Var> {
        self.params
            .segment_ids()
            .map(|id| tape.leaf(self.params.slice(id).to_vec()))
            .collect()
    }

    /// Accumulate leaf gradients into a flat vector aligned with
    /// `params.values`.
    pub fn accumulate_grads(
        &self,
        grads: &crate::autodiff::Grads,
        leaves: &[Var],
        out: &mut [f64],
    ) {
        for id in self.params.segment_ids() {
            let g = grads.of(leaves[id.index()]);
            let offset = self.params.offset(id);
            for (o, gi) in out[offset..offset + g.len()].iter_mut().zip(g) {
                *o += gi;
            }
        }
    }

    pub fn initial_states(&self, tape: &mut Tape) -> Vec<LayerStateVars> {
        self.lstm.iter().map(|l| l.initial_state(tape)).collect()
    }

    pub fn initial_state_values(&self) -> Vec<LayerStateValues> {
        self.lstm
            .iter()
            .map(|l| LayerStateValues::initial(l.hidden))
            .collect()
    }

    fn encode_graph(&self, tape: &mut Tape, leaves: &[Var], x: Vec<f64>) -> Var {
        let mut v = tape.leaf(x);
        for layer in &self.sdae {
            v = layer.encode_graph(tape, leaves, v);
        }
        v
    }

    pub fn encode_values(&self, x: &[f64]) -> Vec<f64> {
        let mut v = x.to_vec();
        for layer in &self.sdae {
            v = layer.encode_values(&self.params, &v);
        }
        v
    }

    /// lambda_k(t) = s_k softplus(w_k . h(t) / s_k) with s_k = exp(logs__k).
    pub fn head_intensity_graph(&self, tape: &mut Tape, leaves: &[Var], h: Var, k: usize) -> Var {
        let pre = tape.dot(leaves[self.head_w[k].index()], h);
        let s = tape.exp(leaves[self.head_log_scale[k].index()]);
        tape.softplus_var(pre, s)
    }

    pub fn head_intensity_values(&self, h: &[f64], k: usize) -> f64 {
        let w = self.params.slice(self.head_w[k]);
        let pre: f64 = w.iter().zip(h).map(|(a, b)| a * b).sum();
        let s = self.params.slice(self.head_log_scale[k])[0].exp();
        let z = pre / s;
        s * if z > 30.0 {
            z
        } else if z < -30.0 {
            z.exp()
        } else {
            z.exp().ln_1p()
        }
    }

    /// Hidden state of the top layer `dt` after the last event.
    fn top_hidden_graph(
        &self,
        tape: &mut Tape,
        states: &[LayerStateVars],
        dt: f64,
    ) -> Var {
        let top = self.lstm.len() - 1;
        self.lstm[top].hidden_at(tape, &states[top], dt, self.config.decay_mode, self.tau0)
    }

    /// One event update of all layers. `x_raw` is the embedded input;
    /// returns the new states and the per-layer pre-update hidden at t_n.
    pub fn step_graph(
        &self,
        tape: &mut Tape,
        leaves: &[Var],
        states: &mut Vec<LayerStateVars>,
        x_raw: Vec<f64>,
        dt: f64,
    ) {
        let code = self.encode_graph(tape, leaves, x_raw);
        let mut below = code;
        for (l, layer) in self.lstm.iter().enumerate() {
            let c_tn = layer.decay_cell(tape, &states[l], dt, self.config.decay_mode, self.tau0);
            let tc = tape.tanh(c_tn);
            let h_tn = tape.hadamard(states[l].o, tc);
            let (next, h_post) = layer.step_with(
                tape,
                leaves,
                below,
                c_tn,
                h_tn,
                states[l].c_target,
                self.config.decay_scale,
            );
            states[l] = next;
            below = h_post;
        }
    }

    /// Negative log-likelihood graph over one stream: event log-intensities
    /// minus a Monte Carlo compensator with `mc_samples` uniform draws per
    /// inter-event interval (and the trailing interval up to the horizon).
    ///
    /// `noise_std > 0` adds isotropic Gaussian noise to the SDAE inputs.
    pub fn nll_graph<R: Rng>(
        &self,
        tape: &mut Tape,
        stream: &Stream,
        mc_samples: usize,
        rng: &mut R,
        noise_std: f64,
    ) -> Result<(Var, Vec<Var>), DhpError> {
        let k = self.config.event_types;
        let mut last_t = 0.0;
        for (n, ev) in stream.events.iter().enumerate() {
            if ev.kind >= k {
                return Err(DhpError::BadEventType(ev.kind, k));
            }
            if n > 0 && ev.t <= last_t {
                return Err(DhpError::UnsortedStream(n));
            }
            last_t = ev.t;
        }
        if stream
            .events
            .last()
            .map(|e| e.t > stream.horizon)
            .unwrap_or(false)
        {
            return Err(DhpError::HorizonTooShort);
        }

        let leaves = self.leaves(tape);
        let mut states = self.initial_states(tape);
        let noise = Normal::new(0.0, noise_std.max(0.0)).expect("std >= 0");

        let mut comp_terms: Vec<Var> = Vec::new();
        let mut log_terms: Vec<Var> = Vec::new();
        let mut prev_t = 0.0;

        let mc_interval = |tape: &mut Tape,
                               states: &[LayerStateVars],
                               a: f64,
                               b: f64,
                               comp_terms: &mut Vec<Var>,
                               rng: &mut R| {
            let len = b - a;
            if len <= 0.0 || mc_samples == 0 {
                return;
            }
            let mut lambdas = Vec::with_capacity(mc_samples);
            for _ in 0..mc_samples {
                let u: f64 = rng.random();
                let h = self.top_hidden_graph(tape, states, len * u);
                let per_type: Vec<Var> = (0..k)
                    .map(|t| self.head_intensity_graph(tape, &leaves, h, t))
                    .collect();
                lambdas.push(tape.add_many(&per_type));
            }
            let total = tape.add_many(&lambdas);
            comp_terms.push(tape.scale(total, len / mc_samples as f64));
        };

        for ev in &stream.events {
            let dt = ev.t - prev_t;
            mc_interval(tape, &states, prev_t, ev.t, &mut comp_terms, rng);

            // event term from the pre-update hidden at t_n
            let h_tn = self.top_hidden_graph(tape, &states, dt);
            let lambda = self.head_intensity_graph(tape, &leaves, h_tn, ev.kind);
            log_terms.push(tape.ln(lambda));

            let mut x = self
                .feature_norm
                .embed(ev.kind, k, dt, ev.spread, ev.imbalance);
            if noise_std > 0.0 {
                for v in x.iter_mut() {
                    *v += noise.sample(rng);
                }
            }
            self.step_graph(tape, &leaves, &mut states, x, dt);
            prev_t = ev.t;
        }
        mc_interval(tape, &states, prev_t, stream.horizon, &mut comp_terms, rng);

        let nll = match (comp_terms.is_empty(), log_terms.is_empty()) {
            (false, false) => {
                let comp = tape.add_many(&comp_terms);
                let logs = tape.add_many(&log_terms);
                tape.sub(comp, logs)
            }
            (false, true) => tape.add_many(&comp_terms),
            (true, false) => {
                let logs = tape.add_many(&log_terms);
                tape.scale(logs, -1.0)
            }
            (true, true) => tape.leaf(vec![0.0]),
        };
        Ok((nll, leaves))
    }

    /// Monte Carlo NLL value, deterministic under `seed`.
    pub fn nll(&self, stream: &Stream, mc_samples: usize, seed: u64) -> Result<f64, DhpError> {
        let mut tape = Tape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (v, _) = self.nll_graph(&mut tape, stream, mc_samples, &mut rng, 0.0)?;
        Ok(tape.scalar(v))
    }
}

/// Streaming evaluator: plain-value layer states updated event by event,
/// with intensity queries inside the current interval. Used by prediction
/// and by the trading agents.
#[derive(Debug, Clone)]
pub struct ModelRuntime {
    states: Vec<LayerStateValues>,
    pub last_t: f64,
    pub n_observed: usize,
}

impl ModelRuntime {
    pub fn new(model: &DhpModel) -> Self {
        ModelRuntime {
            states: model.initial_state_values(),
            last_t: 0.0,
            n_observed: 0,
        }
    }

    pub fn reset(&mut self, model: &DhpModel) {
        self.states = model.initial_state_values();
        self.last_t = 0.0;
        self.n_observed = 0;
    }

    /// Feed one observed event (time must not decrease).
    pub fn observe(&mut self, model: &DhpModel, ev: &StreamEvent) {
        let dt = (ev.t - self.last_t).max(0.0);
        let k = model.config.event_types;
        let x = model
            .feature_norm
            .embed(ev.kind.min(k - 1), k, dt, ev.spread, ev.imbalance);
        let code = model.encode_values(&x);
        let mut below = code;
        for (l, layer) in model.lstm.iter().enumerate() {
            let mut c_tn = vec![0.0; layer.hidden];
            layer.decay_cell_values(
                &self.states[l],
                dt,
                model.config.decay_mode,
                model.tau0,
                &mut c_tn,
            );
            let h_tn = layer.hidden_at_values(
                &self.states[l],
                dt,
                model.config.decay_mode,
                model.tau0,
            );
            let (next, h_post) = layer.step_values(
                &model.params,
                &below,
                &c_tn,
                &h_tn,
                &self.states[l].c_target,
                model.config.decay_scale,
            );
            self.states[l] = next;
            below = h_post;
        }
        self.last_t = ev.t;
        self.n_observed += 1;
    }

    /// Top-layer hidden state at absolute time `t >= last_t`.
    pub fn hidden_at(&self, model: &DhpModel, t: f64) -> Vec<f64> {
        let dt = (t - self.last_t).max(0.0);
        let top = model.lstm.len() - 1;
        model.lstm[top].hidden_at_values(
            &self.states[top],
            dt,
            model.config.decay_mode,
            model.tau0,
        )
    }

    /// All per-type intensities at absolute time `t`.
    pub fn intensities_at(&self, model: &DhpModel, t: f64) -> Vec<f64> {
        let h = self.hidden_at(model, t);
        (0..model.config.event_types)
            .map(|k| model.head_intensity_values(&h, k))
            .collect()
    }

    pub fn intensity_at(&self, model: &DhpModel, k: usize, t: f64) -> f64 {
        let h = self.hidden_at(model, t);
        model.head_intensity_values(&h, k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_model() -> DhpModel {
        let config = DhpConfig {
            event_types: 2,
            sdae_widths: vec![4],
            sdae_activation: SdaeActivation::Sigmoid,
            lstm_layers: 2,
            hidden: 4,
            decay_mode: DecayMode::PowerLaw,
            tie_target_gates: false,
            decay_scale: 1.0,
            init_std: 0.2,
        };
        DhpModel::new(config, 42)
    }

    fn tiny_stream() -> Stream {
        Stream {
            events: vec![
                StreamEvent { t: 0.4, kind: 0, spread: 0.0, imbalance: 0.0 },
                StreamEvent { t: 1.1, kind: 1, spread: 0.0, imbalance: 0.0 },
                StreamEvent { t: 1.9, kind: 0, spread: 0.0, imbalance: 0.0 },
            ],
            horizon: 2.5,
        }
    }

    #[test]
    fn zero_head_weights_give_constant_log2_intensity() {
        let mut model = tiny_model();
        let w = model.head_w[0];
        for v in model.params.slice_mut(w).iter_mut() {
            *v = 0.0;
        }
        let runtime = ModelRuntime::new(&model);
        for t in [0.1, 0.5, 2.0, 7.0] {
            let lam = runtime.intensity_at(&model, 0, t);
            assert!((lam - 2.0f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn intensities_are_strictly_positive_for_random_states() {
        let model = tiny_model();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100_000 {
            let h: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
            for k in 0..2 {
                assert!(model.head_intensity_values(&h, k) > 0.0);
            }
        }
    }

    #[test]
    fn intensity_is_continuous_between_events() {
        let model = tiny_model();
        let mut runtime = ModelRuntime::new(&model);
        runtime.observe(
            &model,
            &StreamEvent { t: 1.0, kind: 0, spread: 0.0, imbalance: 0.0 },
        );
        // scan 10^3 points in the open interval; the one-sided jump at each
        // point must vanish
        let mut max_jump: f64 = 0.0;
        for i in 0..1000 {
            let t = 1.0 + 1e-3 + i as f64 * 5e-3;
            let jump =
                (runtime.intensity_at(&model, 1, t + 1e-9) - runtime.intensity_at(&model, 1, t)).abs();
            max_jump = max_jump.max(jump);
        }
        assert!(max_jump < 1e-6, "max jump {max_jump}");
    }

    #[test]
    fn nll_is_deterministic_under_seed() {
        let model = tiny_model();
        let stream = tiny_stream();
        let a = model.nll(&stream, 8, 7).unwrap();
        let b = model.nll(&stream, 8, 7).unwrap();
        assert_eq!(a, b);
        let c = model.nll(&stream, 8, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn constant_intensity_compensator_is_exact() {
        // zero head weights: every lambda_k = s_k ln 2; with K = 2 and both
        // scales 1 the integral over [0, T] is 2 T ln 2 regardless of draws
        let mut model = tiny_model();
        for k in 0..2 {
            let w = model.head_w[k];
            for v in model.params.slice_mut(w).iter_mut() {
                *v = 0.0;
            }
        }
        let stream = Stream { events: vec![], horizon: 5.0 };
        let nll = model.nll(&stream, 4, 1).unwrap();
        let want = 2.0 * 5.0 * 2.0f64.ln();
        assert!((nll - want).abs() < 1e-10, "nll {nll} want {want}");
    }

    #[test]
    fn hand_checked_nll_single_event() {
        // one event of type 0 at t=1, constant lambda = 1 per type (scale 1,
        // zero weights => lambda = ln 2; rescale s so lambda = 1): with
        // lambda_k = 1, K = 2, T = 2: nll = integral (2) - log 1 = 4
        let mut model = tiny_model();
        for k in 0..2 {
            let w = model.head_w[k];
            for v in model.params.slice_mut(w).iter_mut() {
                *v = 0.0;
            }
            // s * ln 2 = 1  =>  logs = -ln(ln 2)
            let ls = model.head_log_scale[k];
            model.params.slice_mut(ls)[0] = -(2.0f64.ln().ln());
        }
        // zero the LSTM influence on heads is automatic (head weights are 0)
        let stream = Stream {
            events: vec![StreamEvent { t: 1.0, kind: 0, spread: 0.0, imbalance: 0.0 }],
            horizon: 2.0,
        };
        let nll = model.nll(&stream, 16, 3).unwrap();
        assert!((nll - 4.0).abs() < 1e-10, "nll {nll}");
    }

    #[test]
    fn runtime_matches_graph_values() {
        let model = tiny_model();
        let stream = tiny_stream();

        // graph path: step through events, read top hidden after each
        let mut tape = Tape::new();
        let leaves = model.leaves(&mut tape);
        let mut states = model.initial_states(&mut tape);
        let mut prev_t = 0.0;
        let mut graph_h = Vec::new();
        for ev in &stream.events {
            let dt = ev.t - prev_t;
            let x = model.feature_norm.embed(ev.kind, 2, dt, ev.spread, ev.imbalance);
            model.step_graph(&mut tape, &leaves, &mut states, x, dt);
            let h = model.top_hidden_graph(&mut tape, &states, 0.3);
            graph_h.push(tape.value(h).to_vec());
            prev_t = ev.t;
        }

        // runtime path
        let mut runtime = ModelRuntime::new(&model);
        for (i, ev) in stream.events.iter().enumerate() {
            runtime.observe(&model, ev);
            let h = runtime.hidden_at(&model, ev.t + 0.3);
            for (a, b) in h.iter().zip(&graph_h[i]) {
                assert!((a - b).abs() < 1e-12, "event {i}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn unsorted_stream_rejected() {
        let model = tiny_model();
        let stream = Stream {
            events: vec![
                StreamEvent { t: 1.0, kind: 0, spread: 0.0, imbalance: 0.0 },
                StreamEvent { t: 0.5, kind: 1, spread: 0.0, imbalance: 0.0 },
            ],
            horizon: 2.0,
        };
        assert!(matches!(
            model.nll(&stream, 2, 0),
            Err(DhpError::UnsortedStream(1))
        ));
    }

    #[test]
    fn neural_hawkes_config_is_depth_one_exponential() {
        let model = DhpModel::new(DhpConfig::neural_hawkes(6, 8), 1);
        assert_eq!(model.lstm.len(), 1);
        assert!(model.sdae.is_empty());
        assert_eq!(model.config.decay_mode, DecayMode::Exponential);
    }
}

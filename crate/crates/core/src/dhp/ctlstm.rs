use rand::Rng;

use crate::autodiff::{Tape, Var};

use super::params::{ParamStore, SegId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayMode {
    /// c(t) = target + (start - target) * (1 + dt/tau0)^(-p)
    PowerLaw,
    /// c(t) = target + (start - target) * exp(-p * dt)
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct GateIds {
    wx: SegId,
    wh: SegId,
    wc: SegId,
    b: SegId,
}

/// One continuous-time LSTM layer: input, forget, output and decay gates read
/// (x_n, h(t_n), c(t_n)); the candidate reads (x_n, h(t_n)); a second
/// input/forget gate pair drives the decay target cell. Setting `tied`
/// reuses the first gate pair for the target cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CtLstmLayer {
    pub input_dim: usize,
    pub hidden: usize,
    pub tied: bool,
    gate_i: GateIds,
    gate_f: GateIds,
    gate_o: GateIds,
    gate_d: GateIds,
    gate_i_hat: Option<GateIds>,
    gate_f_hat: Option<GateIds>,
    cand_wx: SegId,
    cand_wh: SegId,
    cand_b: SegId,
}

/// Interval state: cells and gates governing (t_n, t_{n+1}].
#[derive(Debug, Clone, Copy)]
pub struct LayerStateVars {
    pub c_start: Var,
    pub c_target: Var,
    pub o: Var,
    pub decay: Var,
}

/// Plain-value mirror of [`LayerStateVars`] for streaming evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStateValues {
    pub c_start: Vec<f64>,
    pub c_target: Vec<f64>,
    pub o: Vec<f64>,
    pub decay: Vec<f64>,
}

impl LayerStateValues {
    pub fn initial(hidden: usize) -> Self {
        LayerStateValues {
            c_start: vec![0.0; hidden],
            c_target: vec![0.0; hidden],
            o: vec![0.5; hidden],
            decay: vec![1.0; hidden],
        }
    }
}

impl CtLstmLayer {
    pub fn register<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden: usize,
        tied: bool,
        init_std: f64,
        rng: &mut R,
    ) -> Self {
        let gate = |store: &mut ParamStore, g: &str, rng: &mut R| GateIds {
            wx: store.register_normal(&format!("{prefix}.{g}.wx"), hidden * input_dim, init_std, rng),
            wh: store.register_normal(&format!("{prefix}.{g}.wh"), hidden * hidden, init_std, rng),
            wc: store.register_normal(&format!("{prefix}.{g}.wc"), hidden * hidden, init_std, rng),
            b: store.register_zeros(&format!("{prefix}.{g}.b"), hidden),
        };
        let gate_i = gate(store, "i", rng);
        let gate_f = gate(store, "f", rng);
        let cand_wx =
            store.register_normal(&format!("{prefix}.z.wx"), hidden * input_dim, init_std, rng);
        let cand_wh = store.register_normal(&format!("{prefix}.z.wh"), hidden * hidden, init_std, rng);
        let cand_b = store.register_zeros(&format!("{prefix}.z.b"), hidden);
        let gate_o = gate(store, "o", rng);
        let gate_d = gate(store, "d", rng);
        let (gate_i_hat, gate_f_hat) = if tied {
            (None, None)
        } else {
            (Some(gate(store, "ihat", rng)), Some(gate(store, "fhat", rng)))
        };
        CtLstmLayer {
            input_dim,
            hidden,
            tied,
            gate_i,
            gate_f,
            gate_o,
            gate_d,
            gate_i_hat,
            gate_f_hat,
            cand_wx,
            cand_wh,
            cand_b,
        }
    }

    /// Input weight matrices (segment, rows, cols) for group regularization.
    pub fn input_weight_segments(&self) -> Vec<(SegId, usize, usize)> {
        let mut out = vec![
            (self.gate_i.wx, self.hidden, self.input_dim),
            (self.gate_f.wx, self.hidden, self.input_dim),
            (self.cand_wx, self.hidden, self.input_dim),
            (self.gate_o.wx, self.hidden, self.input_dim),
            (self.gate_d.wx, self.hidden, self.input_dim),
        ];
        if let (Some(ih), Some(fh)) = (&self.gate_i_hat, &self.gate_f_hat) {
            out.push((ih.wx, self.hidden, self.input_dim));
            out.push((fh.wx, self.hidden, self.input_dim));
        }
        out
    }

    pub fn initial_state(&self, tape: &mut Tape) -> LayerStateVars {
        let init = LayerStateValues::initial(self.hidden);
        LayerStateVars {
            c_start: tape.leaf(init.c_start),
            c_target: tape.leaf(init.c_target),
            o: tape.leaf(init.o),
            decay: tape.leaf(init.decay),
        }
    }

    pub fn state_to_vars(&self, tape: &mut Tape, values: &LayerStateValues) -> LayerStateVars {
        LayerStateVars {
            c_start: tape.leaf(values.c_start.clone()),
            c_target: tape.leaf(values.c_target.clone()),
            o: tape.leaf(values.o.clone()),
            decay: tape.leaf(values.decay.clone()),
        }
    }

    fn gate_pre(
        &self,
        tape: &mut Tape,
        leaves: &[Var],
        ids: &GateIds,
        x: Var,
        h: Var,
        c: Var,
    ) -> Var {
        let ax = tape.matvec(leaves[ids.wx.index()], x, self.hidden);
        let ah = tape.matvec(leaves[ids.wh.index()], h, self.hidden);
        let ac = tape.matvec(leaves[ids.wc.index()], c, self.hidden);
        tape.add_many(&[ax, ah, ac, leaves[ids.b.index()]])
    }

    /// Decay the interval cell to `dt` past its start.
    pub fn decay_cell(
        &self,
        tape: &mut Tape,
        state: &LayerStateVars,
        dt: f64,
        mode: DecayMode,
        tau0: f64,
    ) -> Var {
        let diff = tape.sub(state.c_start, state.c_target);
        let exponent = match mode {
            DecayMode::PowerLaw => {
                let lnb = (1.0 + dt / tau0).ln();
                tape.scale(state.decay, -lnb)
            }
            DecayMode::Exponential => tape.scale(state.decay, -dt),
        };
        let factor = tape.exp(exponent);
        let decayed = tape.hadamard(diff, factor);
        tape.add(state.c_target, decayed)
    }

    /// Hidden state h(t) = o (*) tanh(c(t)) at `dt` past the interval start.
    pub fn hidden_at(
        &self,
        tape: &mut Tape,
        state: &LayerStateVars,
        dt: f64,
        mode: DecayMode,
        tau0: f64,
    ) -> Var {
        let c = self.decay_cell(tape, state, dt, mode, tau0);
        let tc = tape.tanh(c);
        tape.hadamard(state.o, tc)
    }

    /// One event update given the pre-decayed (c(t_n), h(t_n)). Returns the
    /// next interval state and the post-update hidden at t_n+ that feeds the
    /// layer above.
    pub fn step_with(
        &self,
        tape: &mut Tape,
        leaves: &[Var],
        x: Var,
        c_tn: Var,
        h_tn: Var,
        prev_target: Var,
        decay_scale: f64,
    ) -> (LayerStateVars, Var) {
        let pre_i = self.gate_pre(tape, leaves, &self.gate_i, x, h_tn, c_tn);
        let gate_i = tape.sigmoid(pre_i);
        let pre_f = self.gate_pre(tape, leaves, &self.gate_f, x, h_tn, c_tn);
        let gate_f = tape.sigmoid(pre_f);

        let zx = tape.matvec(leaves[self.cand_wx.index()], x, self.hidden);
        let zh = tape.matvec(leaves[self.cand_wh.index()], h_tn, self.hidden);
        let pre_z = tape.add_many(&[zx, zh, leaves[self.cand_b.index()]]);
        let cand = tape.tanh(pre_z);

        let pre_o = self.gate_pre(tape, leaves, &self.gate_o, x, h_tn, c_tn);
        let gate_o = tape.sigmoid(pre_o);
        let pre_d = self.gate_pre(tape, leaves, &self.gate_d, x, h_tn, c_tn);
        let decay = tape.softplus_const(pre_d, decay_scale);

        let (gate_i_hat, gate_f_hat) = match (&self.gate_i_hat, &self.gate_f_hat) {
            (Some(ih), Some(fh)) => {
                let pre_ih = self.gate_pre(tape, leaves, ih, x, h_tn, c_tn);
                let pre_fh = self.gate_pre(tape, leaves, fh, x, h_tn, c_tn);
                (tape.sigmoid(pre_ih), tape.sigmoid(pre_fh))
            }
            _ => (gate_i, gate_f),
        };

        let fc = tape.hadamard(gate_f, c_tn);
        let iz = tape.hadamard(gate_i, cand);
        let c_next = tape.add(fc, iz);
        let fct = tape.hadamard(gate_f_hat, prev_target);
        let izt = tape.hadamard(gate_i_hat, cand);
        let target_next = tape.add(fct, izt);

        let tc = tape.tanh(c_next);
        let h_post = tape.hadamard(gate_o, tc);
        (
            LayerStateVars {
                c_start: c_next,
                c_target: target_next,
                o: gate_o,
                decay,
            },
            h_post,
        )
    }

    // ---- plain-value path used for streaming/prediction; must agree with
    // the tape path to machine precision (pinned by tests) ----

    pub fn decay_cell_values(
        &self,
        state: &LayerStateValues,
        dt: f64,
        mode: DecayMode,
        tau0: f64,
        out: &mut [f64],
    ) {
        let factor_of = |p: f64| match mode {
            DecayMode::PowerLaw => (-p * (1.0 + dt / tau0).ln()).exp(),
            DecayMode::Exponential => (-p * dt).exp(),
        };
        for h in 0..self.hidden {
            let f = factor_of(state.decay[h]);
            out[h] = state.c_target[h] + (state.c_start[h] - state.c_target[h]) * f;
        }
    }

    pub fn hidden_at_values(
        &self,
        state: &LayerStateValues,
        dt: f64,
        mode: DecayMode,
        tau0: f64,
    ) -> Vec<f64> {
        let mut c = vec![0.0; self.hidden];
        self.decay_cell_values(state, dt, mode, tau0, &mut c);
        c.iter()
            .zip(&state.o)
            .map(|(c, o)| o * c.tanh())
            .collect()
    }

    fn affine(
        &self,
        store: &ParamStore,
        ids: &GateIds,
        x: &[f64],
        h: &[f64],
        c: &[f64],
        out: &mut [f64],
    ) {
        let wx = store.slice(ids.wx);
        let wh = store.slice(ids.wh);
        let wc = store.slice(ids.wc);
        let b = store.slice(ids.b);
        for r in 0..self.hidden {
            let mut acc = b[r];
            let row = &wx[r * self.input_dim..(r + 1) * self.input_dim];
            for (w, xv) in row.iter().zip(x) {
                acc += w * xv;
            }
            let row = &wh[r * self.hidden..(r + 1) * self.hidden];
            for (w, hv) in row.iter().zip(h) {
                acc += w * hv;
            }
            let row = &wc[r * self.hidden..(r + 1) * self.hidden];
            for (w, cv) in row.iter().zip(c) {
                acc += w * cv;
            }
            out[r] = acc;
        }
    }

    pub fn step_values(
        &self,
        store: &ParamStore,
        x: &[f64],
        c_tn: &[f64],
        h_tn: &[f64],
        prev_target: &[f64],
        decay_scale: f64,
    ) -> (LayerStateValues, Vec<f64>) {
        let hdim = self.hidden;
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let softplus = |v: f64| {
            let z = v / decay_scale;
            decay_scale
                * if z > 30.0 {
                    z
                } else if z < -30.0 {
                    z.exp()
                } else {
                    z.exp().ln_1p()
                }
        };

        let mut pre = vec![0.0; hdim];
        self.affine(store, &self.gate_i, x, h_tn, c_tn, &mut pre);
        let gate_i: Vec<f64> = pre.iter().map(|&v| sig(v)).collect();
        self.affine(store, &self.gate_f, x, h_tn, c_tn, &mut pre);
        let gate_f: Vec<f64> = pre.iter().map(|&v| sig(v)).collect();

        let wx = store.slice(self.cand_wx);
        let wh = store.slice(self.cand_wh);
        let b = store.slice(self.cand_b);
        let mut cand = vec![0.0; hdim];
        for r in 0..hdim {
            let mut acc = b[r];
            for (w, xv) in wx[r * self.input_dim..(r + 1) * self.input_dim].iter().zip(x) {
                acc += w * xv;
            }
            for (w, hv) in wh[r * hdim..(r + 1) * hdim].iter().zip(h_tn) {
                acc += w * hv;
            }
            cand[r] = acc.tanh();
        }

        self.affine(store, &self.gate_o, x, h_tn, c_tn, &mut pre);
        let gate_o: Vec<f64> = pre.iter().map(|&v| sig(v)).collect();
        self.affine(store, &self.gate_d, x, h_tn, c_tn, &mut pre);
        let decay: Vec<f64> = pre.iter().map(|&v| softplus(v)).collect();

        let (gi_hat, gf_hat) = match (&self.gate_i_hat, &self.gate_f_hat) {
            (Some(ih), Some(fh)) => {
                self.affine(store, ih, x, h_tn, c_tn, &mut pre);
                let a: Vec<f64> = pre.iter().map(|&v| sig(v)).collect();
                self.affine(store, fh, x, h_tn, c_tn, &mut pre);
                let b: Vec<f64> = pre.iter().map(|&v| sig(v)).collect();
                (a, b)
            }
            _ => (gate_i.clone(), gate_f.clone()),
        };

        let mut c_next = vec![0.0; hdim];
        let mut target_next = vec![0.0; hdim];
        let mut h_post = vec![0.0; hdim];
        for r in 0..hdim {
            c_next[r] = gate_f[r] * c_tn[r] + gate_i[r] * cand[r];
            target_next[r] = gf_hat[r] * prev_target[r] + gi_hat[r] * cand[r];
            h_post[r] = gate_o[r] * c_next[r].tanh();
        }
        (
            LayerStateValues {
                c_start: c_next,
                c_target: target_next,
                o: gate_o,
                decay,
            },
            h_post,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn build_layer(tied: bool, std: f64) -> (ParamStore, CtLstmLayer) {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layer = CtLstmLayer::register(&mut store, "lstm0", 3, 4, tied, std, &mut rng);
        (store, layer)
    }

    #[test]
    fn zero_weight_step_gives_half_gates() {
        // all weights and biases zero: sigmoid(0) = 0.5 everywhere and the
        // candidate is tanh(0) = 0, so c_next = 0.5 * c(t_n)
        let (store, layer) = build_layer(false, 0.0);
        let c_tn = vec![0.8, -0.4, 0.2, 1.0];
        let h_tn = vec![0.1; 4];
        let (state, h_post) = layer.step_values(&store, &[1.0, 0.0, 0.0], &c_tn, &h_tn, &[0.0; 4], 1.0);
        for (got, c) in state.c_start.iter().zip(&c_tn) {
            assert!((got - 0.5 * c).abs() < 1e-15);
        }
        assert!(state.o.iter().all(|&o| (o - 0.5).abs() < 1e-15));
        // decay head: softplus(0) = ln 2
        assert!(state
            .decay
            .iter()
            .all(|&p| (p - 2.0f64.ln()).abs() < 1e-15));
        for (hp, c) in h_post.iter().zip(&state.c_start) {
            assert!((hp - 0.5 * c.tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn tape_and_value_paths_agree_to_machine_precision() {
        for tied in [false, true] {
            let (store, layer) = build_layer(tied, 0.3);
            let x = vec![0.7, -0.2, 1.1];
            let prev = LayerStateValues {
                c_start: vec![0.3, -0.5, 0.9, 0.0],
                c_target: vec![0.1, 0.0, -0.2, 0.4],
                o: vec![0.6, 0.4, 0.5, 0.7],
                decay: vec![0.9, 1.4, 0.3, 2.0],
            };
            let dt = 0.37;
            let tau0 = 0.8;

            // tape path
            let mut tape = Tape::new();
            let leaves: Vec<Var> = store
                .segment_ids()
                .map(|id| tape.leaf(store.slice(id).to_vec()))
                .collect();
            let sv = layer.state_to_vars(&mut tape, &prev);
            let c_tn = layer.decay_cell(&mut tape, &sv, dt, DecayMode::PowerLaw, tau0);
            let tc = tape.tanh(c_tn);
            let h_tn = tape.hadamard(sv.o, tc);
            let xv = tape.leaf(x.clone());
            let (next, h_post) =
                layer.step_with(&mut tape, &leaves, xv, c_tn, h_tn, sv.c_target, 1.0);

            // value path
            let mut c_vals = vec![0.0; 4];
            layer.decay_cell_values(&prev, dt, DecayMode::PowerLaw, tau0, &mut c_vals);
            let h_vals = layer.hidden_at_values(&prev, dt, DecayMode::PowerLaw, tau0);
            let (next_vals, h_post_vals) =
                layer.step_values(&store, &x, &c_vals, &h_vals, &prev.c_target, 1.0);

            let close = |a: &[f64], b: &[f64]| {
                a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
            };
            assert!(close(tape.value(c_tn), &c_vals));
            assert!(close(tape.value(next.c_start), &next_vals.c_start));
            assert!(close(tape.value(next.c_target), &next_vals.c_target));
            assert!(close(tape.value(next.o), &next_vals.o));
            assert!(close(tape.value(next.decay), &next_vals.decay));
            assert!(close(tape.value(h_post), &h_post_vals));
        }
    }

    #[test]
    fn step_matches_straight_line_transcription() {
        // independent straight-line evaluation of the update equations for a
        // 2-unit layer with hand-set weights
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let layer = CtLstmLayer::register(&mut store, "l", 2, 2, false, 0.25, &mut rng);
        let x = [0.5, -1.0];
        let h = [0.2, 0.3];
        let c = [-0.1, 0.6];
        let prev_target = [0.05, -0.2];

        let (state, h_post) = layer.step_values(&store, &x, &c, &h, &prev_target, 1.0);

        let get = |name: &str| store.slice(store.find(name).unwrap()).to_vec();
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let affine = |wx: &[f64], wh: &[f64], wc: &[f64], b: &[f64], r: usize| {
            wx[r * 2] * x[0]
                + wx[r * 2 + 1] * x[1]
                + wh[r * 2] * h[0]
                + wh[r * 2 + 1] * h[1]
                + wc[r * 2] * c[0]
                + wc[r * 2 + 1] * c[1]
                + b[r]
        };
        for r in 0..2 {
            let gi = sig(affine(&get("l.i.wx"), &get("l.i.wh"), &get("l.i.wc"), &get("l.i.b"), r));
            let gf = sig(affine(&get("l.f.wx"), &get("l.f.wh"), &get("l.f.wc"), &get("l.f.b"), r));
            let zwx = get("l.z.wx");
            let zwh = get("l.z.wh");
            let zb = get("l.z.b");
            let cand = (zwx[r * 2] * x[0] + zwx[r * 2 + 1] * x[1] + zwh[r * 2] * h[0]
                + zwh[r * 2 + 1] * h[1]
                + zb[r])
                .tanh();
            let go = sig(affine(&get("l.o.wx"), &get("l.o.wh"), &get("l.o.wc"), &get("l.o.b"), r));
            let gih = sig(affine(
                &get("l.ihat.wx"),
                &get("l.ihat.wh"),
                &get("l.ihat.wc"),
                &get("l.ihat.b"),
                r,
            ));
            let gfh = sig(affine(
                &get("l.fhat.wx"),
                &get("l.fhat.wh"),
                &get("l.fhat.wc"),
                &get("l.fhat.b"),
                r,
            ));
            let pd = affine(&get("l.d.wx"), &get("l.d.wh"), &get("l.d.wc"), &get("l.d.b"), r);
            let want_c = gf * c[r] + gi * cand;
            let want_target = gfh * prev_target[r] + gih * cand;
            assert!((state.c_start[r] - want_c).abs() < 1e-12);
            assert!((state.c_target[r] - want_target).abs() < 1e-12);
            assert!((state.o[r] - go).abs() < 1e-12);
            assert!((state.decay[r] - (pd.exp().ln_1p())).abs() < 1e-12);
            assert!((h_post[r] - go * want_c.tanh()).abs() < 1e-12);
        }
    }

    #[test]
    fn decay_boundary_and_limit() {
        let (_, layer) = build_layer(false, 0.1);
        let state = LayerStateValues {
            c_start: vec![1.0, -2.0, 0.5, 0.0],
            c_target: vec![0.2, 0.0, -0.5, 0.1],
            o: vec![0.5; 4],
            decay: vec![0.7, 1.3, 2.0, 0.4],
        };
        for mode in [DecayMode::PowerLaw, DecayMode::Exponential] {
            let mut c = vec![0.0; 4];
            layer.decay_cell_values(&state, 1e-12, mode, 1.0, &mut c);
            for (got, want) in c.iter().zip(&state.c_start) {
                assert!((got - want).abs() < 1e-9, "boundary {mode:?}");
            }
            layer.decay_cell_values(&state, 1e9, mode, 1.0, &mut c);
            for (got, want) in c.iter().zip(&state.c_target) {
                assert!((got - want).abs() < 1e-4, "limit {mode:?}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn decay_is_monotone_between_start_and_target() {
        let (_, layer) = build_layer(false, 0.1);
        let state = LayerStateValues {
            c_start: vec![1.0, -1.0, 0.3, 2.0],
            c_target: vec![0.0, 0.5, 0.3, -1.0],
            o: vec![0.5; 4],
            decay: vec![0.9, 1.1, 0.5, 1.7],
        };
        for mode in [DecayMode::PowerLaw, DecayMode::Exponential] {
            let mut prev = state.c_start.clone();
            for step in 1..=1000 {
                let dt = step as f64 * 0.01;
                let mut c = vec![0.0; 4];
                layer.decay_cell_values(&state, dt, mode, 1.0, &mut c);
                for k in 0..4 {
                    let (lo, hi) = if state.c_start[k] <= state.c_target[k] {
                        (state.c_start[k], state.c_target[k])
                    } else {
                        (state.c_target[k], state.c_start[k])
                    };
                    assert!(c[k] >= lo - 1e-12 && c[k] <= hi + 1e-12, "path leaves envelope");
                    if state.c_start[k] > state.c_target[k] {
                        assert!(c[k] <= prev[k] + 1e-12, "not decreasing at {dt} ({mode:?})");
                    } else if state.c_start[k] < state.c_target[k] {
                        assert!(c[k] >= prev[k] - 1e-12, "not increasing at {dt} ({mode:?})");
                    }
                }
                prev = c;
            }
        }
    }

    #[test]
    fn tied_layer_has_no_second_gate_parameters() {
        let (store, layer) = build_layer(true, 0.1);
        assert!(store.find("lstm0.ihat.wx").is_none());
        assert_eq!(layer.input_weight_segments().len(), 5);
        let (store2, layer2) = build_layer(false, 0.1);
        assert!(store2.find("lstm0.ihat.wx").is_some());
        assert_eq!(layer2.input_weight_segments().len(), 7);
    }
}

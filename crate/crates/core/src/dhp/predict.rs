use super::model::{DhpModel, ModelRuntime};

/// Next-event prediction: expected time from the conditional density
/// f(t) = lambda(t) exp(-integral of lambda), and the most likely type from
/// the per-type mass integrals.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub t_hat: f64,
    pub k_hat: usize,
    /// P(next event has type k); sums to ~1 up to the survival cutoff.
    pub type_probs: Vec<f64>,
    /// Sampled (t, f(t)) pairs of the conditional density.
    pub density: Vec<(f64, f64)>,
}

const SURVIVAL_CUTOFF: f64 = 1e-6;

struct PassResult {
    t_hat: f64,
    type_mass: Vec<f64>,
    density: Vec<(f64, f64)>,
}

fn integrate(model: &DhpModel, runtime: &ModelRuntime, du0: f64, growth: f64) -> PassResult {
    let k = model.config.event_types;
    let t0 = runtime.last_t;
    let mut u = 0.0;
    let mut du = du0;
    let mut lambdas_prev = runtime.intensities_at(model, t0);
    let mut total_prev: f64 = lambdas_prev.iter().sum();
    let mut hazard = 0.0;
    let mut surv_prev = 1.0;
    let mut t_num = 0.0;
    let mut type_mass = vec![0.0; k];
    let mut density = Vec::new();
    density.push((t0, total_prev));

    // trapezoid on a geometrically growing grid until the survival vanishes
    let max_steps = 200_000;
    for _ in 0..max_steps {
        let u_next = u + du;
        let lambdas = runtime.intensities_at(model, t0 + u_next);
        let total: f64 = lambdas.iter().sum();
        hazard += 0.5 * (total_prev + total) * du;
        let surv = (-hazard).exp();
        let f_prev = total_prev * surv_prev;
        let f_cur = total * surv;
        t_num += 0.5 * ((t0 + u) * f_prev + (t0 + u_next) * f_cur) * du;
        for t in 0..k {
            type_mass[t] += 0.5 * (lambdas_prev[t] * surv_prev + lambdas[t] * surv) * du;
        }
        if density.len() < 512 {
            density.push((t0 + u_next, f_cur));
        }
        u = u_next;
        surv_prev = surv;
        total_prev = total;
        lambdas_prev = lambdas;
        du *= growth;
        if surv < SURVIVAL_CUTOFF {
            break;
        }
    }
    PassResult {
        t_hat: t_num,
        type_mass,
        density,
    }
}

/// Predict the next event after everything the runtime has observed. Works
/// from a cold start as well (empty history).
pub fn predict_next(model: &DhpModel, runtime: &ModelRuntime) -> Prediction {
    let total0: f64 = runtime
        .intensities_at(model, runtime.last_t)
        .iter()
        .sum();
    let scale = 1.0 / total0.max(1e-12);
    let mut du0 = 0.01 * scale;
    let mut result = integrate(model, runtime, du0, 1.02);
    // halve the initial step until the expected time stabilizes
    for _ in 0..3 {
        du0 *= 0.5;
        let refined = integrate(model, runtime, du0, 1.01);
        let delta = (refined.t_hat - result.t_hat).abs();
        let done = delta <= 1e-5 * refined.t_hat.abs().max(1e-12);
        result = refined;
        if done {
            break;
        }
    }
    let mass: f64 = result.type_mass.iter().sum();
    let type_probs: Vec<f64> = if mass > 0.0 {
        result.type_mass.iter().map(|m| m / mass).collect()
    } else {
        vec![1.0 / model.config.event_types as f64; model.config.event_types]
    };
    let k_hat = type_probs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    Prediction {
        t_hat: result.t_hat,
        k_hat,
        type_probs,
        density: result.density,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dhp::ctlstm::DecayMode;
    use crate::dhp::embed::StreamEvent;
    use crate::dhp::model::DhpConfig;
    use crate::dhp::sdae::SdaeActivation;

    /// Model with constant per-type intensities `rates` (zero head weights,
    /// scales set so s_k ln 2 = rate_k).
    fn constant_rate_model(rates: &[f64]) -> DhpModel {
        let config = DhpConfig {
            event_types: rates.len(),
            sdae_widths: vec![],
            sdae_activation: SdaeActivation::Sigmoid,
            lstm_layers: 1,
            hidden: 4,
            decay_mode: DecayMode::Exponential,
            tie_target_gates: false,
            decay_scale: 1.0,
            init_std: 0.1,
        };
        let mut model = DhpModel::new(config, 5);
        for (k, &rate) in rates.iter().enumerate() {
            let w = model.params.find(&format!("head{k}.w")).unwrap();
            for v in model.params.slice_mut(w).iter_mut() {
                *v = 0.0;
            }
            let ls = model.params.find(&format!("head{k}.logs")).unwrap();
            model.params.slice_mut(ls)[0] = (rate / 2.0f64.ln()).ln();
        }
        model
    }

    #[test]
    fn poisson_expected_time_is_inverse_rate() {
        let mu = 0.8;
        let model = constant_rate_model(&[mu]);
        let runtime = ModelRuntime::new(&model);
        let pred = predict_next(&model, &runtime);
        assert!(
            (pred.t_hat - 1.0 / mu).abs() < 1e-4,
            "t_hat {} want {}",
            pred.t_hat,
            1.0 / mu
        );

        // after an observed event the clock restarts from its time
        let mut runtime = ModelRuntime::new(&model);
        runtime.observe(
            &model,
            &StreamEvent { t: 3.0, kind: 0, spread: 0.0, imbalance: 0.0 },
        );
        let pred = predict_next(&model, &runtime);
        assert!(
            (pred.t_hat - (3.0 + 1.0 / mu)).abs() < 1e-3,
            "t_hat {}",
            pred.t_hat
        );
    }

    #[test]
    fn constant_rates_pick_the_larger_type() {
        let model = constant_rate_model(&[1.0, 3.0]);
        let runtime = ModelRuntime::new(&model);
        let pred = predict_next(&model, &runtime);
        assert_eq!(pred.k_hat, 1);
        assert!((pred.type_probs[1] - 0.75).abs() < 1e-3, "{:?}", pred.type_probs);
        let total: f64 = pred.type_probs.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn trained_style_model_matches_fine_grid_oracle() {
        // random 1-layer model: compare t_hat against a brute-force uniform
        // fine-grid integration
        let config = DhpConfig {
            event_types: 2,
            sdae_widths: vec![],
            sdae_activation: SdaeActivation::Sigmoid,
            lstm_layers: 1,
            hidden: 6,
            decay_mode: DecayMode::Exponential,
            tie_target_gates: false,
            decay_scale: 1.0,
            init_std: 0.4,
        };
        let model = DhpModel::new(config, 9);
        let mut runtime = ModelRuntime::new(&model);
        runtime.observe(&model, &StreamEvent { t: 0.5, kind: 0, spread: 0.0, imbalance: 0.0 });
        runtime.observe(&model, &StreamEvent { t: 1.2, kind: 1, spread: 0.0, imbalance: 0.0 });

        let pred = predict_next(&model, &runtime);

        // oracle: uniform grid, du constant, far horizon
        let t0 = runtime.last_t;
        let du = 2e-4;
        let mut hazard = 0.0;
        let mut surv_prev = 1.0;
        let mut total_prev: f64 = runtime.intensities_at(&model, t0).iter().sum();
        let mut t_num = 0.0;
        let mut u = 0.0;
        loop {
            let u_next = u + du;
            let total: f64 = runtime.intensities_at(&model, t0 + u_next).iter().sum();
            hazard += 0.5 * (total_prev + total) * du;
            let surv = (-hazard).exp();
            t_num += 0.5 * ((t0 + u) * total_prev * surv_prev + (t0 + u_next) * total * surv) * du;
            u = u_next;
            surv_prev = surv;
            total_prev = total;
            if surv < 1e-8 {
                break;
            }
        }
        let rel = (pred.t_hat - t_num).abs() / t_num.abs();
        assert!(rel < 1e-3, "pred {} oracle {} rel {rel}", pred.t_hat, t_num);
    }
}

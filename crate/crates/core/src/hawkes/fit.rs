use crate::opt::{Adam, AdamConfig};

use super::{log_likelihood_grad, HawkesError, HawkesParams, MarkedEvent};

#[derive(Debug, Clone, Copy)]
pub struct FitConfig {
    pub lr: f64,
    pub max_iters: usize,
    /// Convergence threshold on the gradient norm in log-parameter space,
    /// scaled by the event count.
    pub grad_tol: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            lr: 0.05,
            max_iters: 2_000,
            grad_tol: 1e-5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: HawkesParams,
    pub log_likelihood: f64,
    pub grad_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

// positivity through log-parameterization; keep exponents in a sane range
const LOG_MIN: f64 = -25.0;
const LOG_MAX: f64 = 10.0;

fn pack(params: &HawkesParams) -> Vec<f64> {
    let m = params.dim();
    let mut theta = Vec::with_capacity(m + 2 * m * m);
    let squash = |x: f64| x.max(1e-10).ln().clamp(LOG_MIN, LOG_MAX);
    theta.extend(params.mu.iter().map(|&x| squash(x)));
    for i in 0..m {
        theta.extend(params.alpha[i].iter().map(|&x| squash(x)));
    }
    for i in 0..m {
        theta.extend(params.beta[i].iter().map(|&x| squash(x)));
    }
    theta
}

fn unpack(theta: &[f64], m: usize, impact: Option<Vec<Vec<f64>>>) -> HawkesParams {
    let mu = theta[..m].iter().map(|x| x.exp()).collect();
    let mut alpha = vec![vec![0.0; m]; m];
    let mut beta = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            alpha[i][j] = theta[m + i * m + j].exp();
            beta[i][j] = theta[m + m * m + i * m + j].exp();
        }
    }
    HawkesParams {
        mu,
        alpha,
        beta,
        impact,
    }
}

/// Maximum-likelihood fit by Adam ascent on log-parameters.
///
/// Returns the best iterate seen; `converged` is false when the gradient
/// norm never dropped below tolerance within `max_iters`.
pub fn fit_mle(
    events: &[MarkedEvent],
    horizon: f64,
    init: &HawkesParams,
    config: FitConfig,
) -> Result<FitResult, HawkesError> {
    if events.len() < 2 {
        return Err(HawkesError::TooFewEvents(2));
    }
    init.validate()?;
    let m = init.dim();
    let scale = events.len() as f64;

    let mut theta = pack(init);
    let mut adam = Adam::new(theta.len(), AdamConfig::with_lr(config.lr));
    let mut best_theta = theta.clone();
    let mut best_ll = f64::NEG_INFINITY;
    let mut grad_norm = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..config.max_iters {
        iterations = iter + 1;
        let params = unpack(&theta, m, init.impact.clone());
        let (ll, nat_grad) = log_likelihood_grad(&params, events, horizon)?;
        if ll.is_finite() && ll > best_ll {
            best_ll = ll;
            best_theta.copy_from_slice(&theta);
        }

        // chain rule through theta = ln(param): dL/dtheta = param * dL/dparam
        let mut grad = vec![0.0; theta.len()];
        for i in 0..m {
            grad[i] = params.mu[i] * nat_grad.mu[i];
            for j in 0..m {
                grad[m + i * m + j] = params.alpha[i][j] * nat_grad.alpha[i][j];
                grad[m + m * m + i * m + j] = params.beta[i][j] * nat_grad.beta[i][j];
            }
        }
        grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt() / scale;
        if grad_norm < config.grad_tol {
            converged = true;
            break;
        }

        // ascent: negate for the descent-form optimizer
        for g in grad.iter_mut() {
            *g = -*g;
        }
        adam.step(&mut theta, &grad);
        for x in theta.iter_mut() {
            *x = x.clamp(LOG_MIN, LOG_MAX);
        }
    }

    if !converged {
        log::warn!(
            "Hawkes MLE stopped after {} iterations with grad norm {:.3e}; returning best iterate",
            iterations,
            grad_norm
        );
    }
    let params = unpack(&best_theta, m, init.impact.clone());
    let (ll, grad) = log_likelihood_grad(&params, events, horizon)?;
    Ok(FitResult {
        params,
        log_likelihood: ll,
        grad_norm: grad.norm() / scale,
        converged,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hawkes::{log_likelihood, simulate_thinning};

    #[test]
    fn recovers_univariate_parameters_from_simulation() {
        let truth = HawkesParams::univariate(0.5, 0.8, 1.0).unwrap();
        let horizon = 1_500.0;
        let events = simulate_thinning(&truth, horizon, 7).unwrap();
        assert!(events.len() >= 2_000, "n={}", events.len());

        let init = HawkesParams::univariate(0.3, 0.3, 2.0).unwrap();
        let fit = fit_mle(&events, horizon, &init, FitConfig::default()).unwrap();
        let p = &fit.params;
        assert!(
            (p.mu[0] - 0.5).abs() / 0.5 < 0.15,
            "mu {} (ll {})",
            p.mu[0],
            fit.log_likelihood
        );
        assert!((p.alpha[0][0] - 0.8).abs() / 0.8 < 0.15, "alpha {}", p.alpha[0][0]);
        assert!((p.beta[0][0] - 1.0).abs() / 1.0 < 0.15, "beta {}", p.beta[0][0]);
    }

    #[test]
    fn poisson_truth_drives_branching_ratio_to_zero() {
        let truth = HawkesParams::univariate(1.5, 0.0, 1.0).unwrap();
        let events = simulate_thinning(&truth, 2_000.0, 11).unwrap();
        let init = HawkesParams::univariate(1.0, 0.2, 1.0).unwrap();
        let fit = fit_mle(&events, 2_000.0, &init, FitConfig::default()).unwrap();
        let ratio = fit.params.alpha[0][0] / fit.params.beta[0][0];
        assert!(ratio < 0.05, "branching ratio {ratio}");
    }

    #[test]
    fn likelihood_does_not_decrease_from_truth_init() {
        let truth = HawkesParams::univariate(0.5, 0.8, 1.0).unwrap();
        let events = simulate_thinning(&truth, 800.0, 3).unwrap();
        let ll_truth = log_likelihood(&truth, &events, 800.0).unwrap();
        let fit = fit_mle(&events, 800.0, &truth, FitConfig::default()).unwrap();
        assert!(
            fit.log_likelihood >= ll_truth - 1e-9,
            "fit {} vs truth {}",
            fit.log_likelihood,
            ll_truth
        );
    }

    #[test]
    fn too_few_events_rejected() {
        let init = HawkesParams::univariate(0.5, 0.8, 1.0).unwrap();
        let events = vec![crate::hawkes::MarkedEvent::new(1.0, 0, 0)];
        assert!(matches!(
            fit_mle(&events, 10.0, &init, FitConfig::default()),
            Err(HawkesError::TooFewEvents(2))
        ));
    }
}

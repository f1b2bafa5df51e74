//! Distributional properties of the Hawkes simulator and likelihood.

use hawkmaker_core::hawkes::{
    log_likelihood, log_likelihood_grad, simulate_thinning, time_rescaling_residuals,
    HawkesParams,
};
use hawkmaker_core::stats::ks_test_exp1;

#[test]
fn time_rescaling_residuals_are_unit_exponential() {
    let params = HawkesParams::new(
        vec![0.6, 0.4],
        vec![vec![0.5, 0.2], vec![0.1, 0.6]],
        vec![vec![1.3, 1.0], vec![0.9, 1.7]],
    )
    .unwrap();
    // horizon chosen to land well above 5000 events
    let events = simulate_thinning(&params, 2_500.0, 21).unwrap();
    assert!(events.len() >= 5_000, "n={}", events.len());
    let residuals = time_rescaling_residuals(&params, &events).unwrap();
    let (d, p) = ks_test_exp1(&residuals);
    assert!(p > 0.01, "KS d={d:.4} p={p:.4} n={}", residuals.len());
}

#[test]
fn log_parameter_gradient_matches_finite_differences_on_simulated_data() {
    let truth = HawkesParams::univariate(0.5, 0.8, 1.0).unwrap();
    let horizon = 200.0;
    let events = simulate_thinning(&truth, horizon, 5).unwrap();
    let (_, grad) = log_likelihood_grad(&truth, &events, horizon).unwrap();

    let h = 1e-5;
    let eval = |mu: f64, alpha: f64, beta: f64| {
        let p = HawkesParams::univariate(mu, alpha, beta).unwrap();
        log_likelihood(&p, &events, horizon).unwrap()
    };
    let fd_mu = (eval(0.5 + h, 0.8, 1.0) - eval(0.5 - h, 0.8, 1.0)) / (2.0 * h);
    let fd_alpha = (eval(0.5, 0.8 + h, 1.0) - eval(0.5, 0.8 - h, 1.0)) / (2.0 * h);
    let fd_beta = (eval(0.5, 0.8, 1.0 + h) - eval(0.5, 0.8, 1.0 - h)) / (2.0 * h);
    for (got, fd) in [
        (grad.mu[0], fd_mu),
        (grad.alpha[0][0], fd_alpha),
        (grad.beta[0][0], fd_beta),
    ] {
        let rel = (got - fd).abs() / fd.abs().max(1e-9);
        assert!(rel < 1e-6, "got {got} fd {fd} rel {rel}");
    }
}

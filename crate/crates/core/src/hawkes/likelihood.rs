use super::{check_sorted, ExcitationState, HawkesError, HawkesParams, MarkedEvent};

/// Gradient of the log-likelihood with respect to the natural parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrad {
    pub mu: Vec<f64>,
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
}

impl ParamGrad {
    fn zeros(m: usize) -> Self {
        ParamGrad {
            mu: vec![0.0; m],
            alpha: vec![vec![0.0; m]; m],
            beta: vec![vec![0.0; m]; m],
        }
    }

    pub fn norm(&self) -> f64 {
        let mut acc: f64 = self.mu.iter().map(|g| g * g).sum();
        for i in 0..self.alpha.len() {
            acc += self.alpha[i].iter().map(|g| g * g).sum::<f64>();
            acc += self.beta[i].iter().map(|g| g * g).sum::<f64>();
        }
        acc.sqrt()
    }
}

fn validate_window(events: &[MarkedEvent], horizon: f64) -> Result<(), HawkesError> {
    check_sorted(events)?;
    if let Some(first) = events.first() {
        if first.t < 0.0 {
            return Err(HawkesError::EventOutOfWindow(0));
        }
    }
    if let Some(last) = events.last() {
        if last.t > horizon {
            return Err(HawkesError::EventOutOfWindow(events.len() - 1));
        }
    }
    Ok(())
}

/// Exact log-likelihood for exponential kernels: sum of log-intensities at
/// event times minus the closed-form compensator over [0, horizon].
///
/// Returns negative infinity when an observed event has zero intensity.
pub fn log_likelihood(
    params: &HawkesParams,
    events: &[MarkedEvent],
    horizon: f64,
) -> Result<f64, HawkesError> {
    params.validate()?;
    validate_window(events, horizon)?;
    let m = params.dim();
    let mut state = ExcitationState::new(m);
    let mut ll = 0.0;

    for (n, ev) in events.iter().enumerate() {
        if ev.component >= m {
            return Err(HawkesError::BadComponent(ev.component, m));
        }
        state.advance(params, ev.t);
        let lambda = state.intensity(params, ev.component);
        if lambda <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        ll += lambda.ln();
        state.on_event(params, ev.component, ev.mark);
        let _ = n;
    }

    // compensator: sum_i mu_i*T + sum_i sum_{events n} alpha_i,cn * psi_n *
    // (1 - exp(-beta_i,cn (T - t_n))) / beta_i,cn
    let mut compensator: f64 = params.mu.iter().sum::<f64>() * horizon;
    for ev in events {
        let psi = params.impact_of(ev.component, ev.mark);
        let rem = horizon - ev.t;
        for i in 0..m {
            let a = params.alpha[i][ev.component];
            let b = params.beta[i][ev.component];
            compensator += a * psi * (1.0 - (-b * rem).exp()) / b;
        }
    }
    Ok(ll - compensator)
}

/// Log-likelihood and its analytic gradient in natural parameter space.
pub fn log_likelihood_grad(
    params: &HawkesParams,
    events: &[MarkedEvent],
    horizon: f64,
) -> Result<(f64, ParamGrad), HawkesError> {
    params.validate()?;
    validate_window(events, horizon)?;
    let m = params.dim();
    let mut grad = ParamGrad::zeros(m);
    let mut ll = 0.0;

    // s[i][j]: decayed impact sum; u[i][j]: decayed (dt * impact) sum, the
    // beta-derivative companion of s.
    let mut s = vec![vec![0.0; m]; m];
    let mut u = vec![vec![0.0; m]; m];
    let mut last_t = 0.0;

    for ev in events {
        if ev.component >= m {
            return Err(HawkesError::BadComponent(ev.component, m));
        }
        let dt = ev.t - last_t;
        for i in 0..m {
            for j in 0..m {
                let decay = (-params.beta[i][j] * dt).exp();
                u[i][j] = decay * (u[i][j] + dt * s[i][j]);
                s[i][j] *= decay;
            }
        }
        last_t = ev.t;

        let i = ev.component;
        let lambda = params.mu[i]
            + (0..m).map(|j| params.alpha[i][j] * s[i][j]).sum::<f64>();
        if lambda <= 0.0 {
            return Ok((f64::NEG_INFINITY, grad));
        }
        ll += lambda.ln();
        grad.mu[i] += 1.0 / lambda;
        for j in 0..m {
            grad.alpha[i][j] += s[i][j] / lambda;
            grad.beta[i][j] -= params.alpha[i][j] * u[i][j] / lambda;
        }

        let psi = params.impact_of(ev.component, ev.mark);
        for row in s.iter_mut() {
            row[ev.component] += psi;
        }
    }

    let mut compensator: f64 = params.mu.iter().sum::<f64>() * horizon;
    for g in grad.mu.iter_mut() {
        *g -= horizon;
    }
    for ev in events {
        let psi = params.impact_of(ev.component, ev.mark);
        let rem = horizon - ev.t;
        let j = ev.component;
        for i in 0..m {
            let a = params.alpha[i][j];
            let b = params.beta[i][j];
            let e = (-b * rem).exp();
            compensator += a * psi * (1.0 - e) / b;
            grad.alpha[i][j] -= psi * (1.0 - e) / b;
            grad.beta[i][j] -= a * psi * (rem * e / b - (1.0 - e) / (b * b));
        }
    }
    Ok((ll - compensator, grad))
}

/// Time-rescaling residuals of the pooled process: compensator increments
/// between consecutive events. Under the true parameters these are i.i.d.
/// unit exponential.
pub fn time_rescaling_residuals(
    params: &HawkesParams,
    events: &[MarkedEvent],
) -> Result<Vec<f64>, HawkesError> {
    params.validate()?;
    check_sorted(events)?;
    let m = params.dim();
    let mu_total: f64 = params.mu.iter().sum();
    let mut s = vec![vec![0.0; m]; m];
    let mut last_t = 0.0;
    let mut residuals = Vec::with_capacity(events.len());

    for ev in events {
        if ev.component >= m {
            return Err(HawkesError::BadComponent(ev.component, m));
        }
        let dt = ev.t - last_t;
        // integral of total intensity over (last_t, ev.t]
        let mut increment = mu_total * dt;
        for i in 0..m {
            for j in 0..m {
                let b = params.beta[i][j];
                increment += params.alpha[i][j] * s[i][j] * (1.0 - (-b * dt).exp()) / b;
            }
        }
        residuals.push(increment);
        // decay then add the new event's impact
        for i in 0..m {
            for j in 0..m {
                s[i][j] *= (-params.beta[i][j] * dt).exp();
            }
        }
        let psi = params.impact_of(ev.component, ev.mark);
        for row in s.iter_mut() {
            row[ev.component] += psi;
        }
        last_t = ev.t;
    }
    Ok(residuals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::adaptive_simpson;

    #[test]
    fn no_events_gives_minus_mu_t() {
        let params = HawkesParams::univariate(0.5, 0.8, 1.0).unwrap();
        let ll = log_likelihood(&params, &[], 10.0).unwrap();
        assert!((ll - (-5.0)).abs() < 1e-12);
    }

    #[test]
    fn poisson_single_event() {
        let params = HawkesParams::univariate(1.0, 0.0, 1.0).unwrap();
        for t in [0.5, 3.0, 9.9] {
            let ll = log_likelihood(&params, &[MarkedEvent::new(t, 0, 0)], 10.0).unwrap();
            assert!((ll - (-10.0)).abs() < 1e-12, "ll={ll} at t={t}");
        }
    }

    #[test]
    fn zero_intensity_event_gives_neg_infinity() {
        let params = HawkesParams::univariate(0.0, 0.8, 1.0).unwrap();
        let ll = log_likelihood(&params, &[MarkedEvent::new(1.0, 0, 0)], 10.0).unwrap();
        assert_eq!(ll, f64::NEG_INFINITY);
    }

    fn random_instance() -> (HawkesParams, Vec<MarkedEvent>, f64) {
        let params = HawkesParams::new(
            vec![0.4, 0.6],
            vec![vec![0.3, 0.5], vec![0.2, 0.4]],
            vec![vec![1.1, 2.3], vec![0.7, 1.9]],
        )
        .unwrap();
        let events = vec![
            MarkedEvent::new(0.31, 0, 0),
            MarkedEvent::new(0.95, 1, 0),
            MarkedEvent::new(1.07, 0, 0),
            MarkedEvent::new(2.4, 1, 0),
            MarkedEvent::new(3.33, 0, 0),
            MarkedEvent::new(4.9, 1, 0),
        ];
        (params, events, 6.0)
    }

    #[test]
    fn compensator_matches_quadrature_oracle() {
        let (params, events, horizon) = random_instance();
        // closed-form compensator extracted from the likelihood identity
        let ll = log_likelihood(&params, &events, horizon).unwrap();
        let mut log_sum = 0.0;
        for (n, ev) in events.iter().enumerate() {
            log_sum += super::super::intensity(&params, &events[..n], ev.component, ev.t)
                .unwrap()
                .ln();
        }
        let closed_compensator = log_sum - ll;

        // quadrature of the total intensity, integrating each inter-event
        // segment separately to keep the integrand smooth
        let mut knots = vec![0.0];
        knots.extend(events.iter().map(|e| e.t));
        knots.push(horizon);
        let mut quad = 0.0;
        for w in knots.windows(2) {
            let (a, b) = (w[0], w[1]);
            let total = |t: f64| {
                let hist: Vec<MarkedEvent> =
                    events.iter().copied().filter(|e| e.t < t).collect();
                (0..params.dim())
                    .map(|i| super::super::intensity(&params, &hist, i, t).unwrap())
                    .sum::<f64>()
            };
            quad += adaptive_simpson(&total, a + 1e-12, b, 1e-12);
        }
        let rel = (closed_compensator - quad).abs() / quad.abs();
        assert!(rel < 1e-8, "rel err {rel}");
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let (params, events, horizon) = random_instance();
        let (_, grad) = log_likelihood_grad(&params, &events, horizon).unwrap();
        let h = 1e-6;
        let check = |got: f64, f: &dyn Fn(f64) -> HawkesParams, x0: f64| {
            let up = log_likelihood(&f(x0 + h), &events, horizon).unwrap();
            let dn = log_likelihood(&f(x0 - h), &events, horizon).unwrap();
            let fd = (up - dn) / (2.0 * h);
            let rel = (got - fd).abs() / fd.abs().max(1e-9);
            assert!(rel < 1e-6, "got {got} fd {fd} rel {rel}");
        };
        for i in 0..2 {
            let p = params.clone();
            check(
                grad.mu[i],
                &move |x| {
                    let mut q = p.clone();
                    q.mu[i] = x;
                    q
                },
                params.mu[i],
            );
            for j in 0..2 {
                let p = params.clone();
                check(
                    grad.alpha[i][j],
                    &move |x| {
                        let mut q = p.clone();
                        q.alpha[i][j] = x;
                        q
                    },
                    params.alpha[i][j],
                );
                let p = params.clone();
                check(
                    grad.beta[i][j],
                    &move |x| {
                        let mut q = p.clone();
                        q.beta[i][j] = x;
                        q
                    },
                    params.beta[i][j],
                );
            }
        }
    }

    #[test]
    fn grad_value_agrees_with_plain_likelihood() {
        let (params, events, horizon) = random_instance();
        let ll = log_likelihood(&params, &events, horizon).unwrap();
        let (ll2, _) = log_likelihood_grad(&params, &events, horizon).unwrap();
        assert!((ll - ll2).abs() < 1e-12);
    }

    #[test]
    fn out_of_window_event_rejected() {
        let params = HawkesParams::univariate(0.5, 0.8, 1.0).unwrap();
        let events = vec![MarkedEvent::new(11.0, 0, 0)];
        assert!(log_likelihood(&params, &events, 10.0).is_err());
    }

    #[test]
    fn residuals_of_poisson_are_scaled_gaps() {
        let params = HawkesParams::univariate(2.0, 0.0, 1.0).unwrap();
        let events = vec![
            MarkedEvent::new(0.5, 0, 0),
            MarkedEvent::new(1.25, 0, 0),
            MarkedEvent::new(3.0, 0, 0),
        ];
        let res = time_rescaling_residuals(&params, &events).unwrap();
        assert_eq!(res.len(), 3);
        assert!((res[0] - 1.0).abs() < 1e-12);
        assert!((res[1] - 1.5).abs() < 1e-12);
        assert!((res[2] - 3.5).abs() < 1e-12);
    }
}

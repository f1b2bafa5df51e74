//! Marked multivariate Hawkes processes with exponential kernels.
//!
//! Serves both as a data generator (Ogata thinning) and as a fitting
//! baseline: intensity evaluation, closed-form log-likelihood with analytic
//! gradients, Adam MLE in log-parameter space, and time-rescaling
//! diagnostics.

mod fit;
mod likelihood;
mod thinning;

pub use fit::{fit_mle, FitConfig, FitResult};
pub use likelihood::{log_likelihood, log_likelihood_grad, time_rescaling_residuals, ParamGrad};
pub use thinning::simulate_thinning;

use thiserror::Error;

/// A point-process event: time in seconds, component index and mark index
/// (both 0-based).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkedEvent {
    pub t: f64,
    pub component: usize,
    pub mark: usize,
}

impl MarkedEvent {
    pub fn new(t: f64, component: usize, mark: usize) -> Self {
        MarkedEvent { t, component, mark }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum HawkesError {
    #[error("event stream must be strictly increasing in time (index {0})")]
    UnsortedHistory(usize),
    #[error("event at index {0} lies outside the evaluation window")]
    EventOutOfWindow(usize),
    #[error("component index {0} out of range for dimension {1}")]
    BadComponent(usize, usize),
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("need at least {0} events to fit")]
    TooFewEvents(usize),
}

/// Parameters of an M-dimensional marked Hawkes process with exponential
/// kernels alpha_ij * exp(-beta_ij * dt) and optional mark impact table
/// `impact[j][k]` applied to events of component j carrying mark k.
#[derive(Debug, Clone, PartialEq)]
pub struct HawkesParams {
    pub mu: Vec<f64>,
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub impact: Option<Vec<Vec<f64>>>,
}

impl HawkesParams {
    pub fn new(mu: Vec<f64>, alpha: Vec<Vec<f64>>, beta: Vec<Vec<f64>>) -> Result<Self, HawkesError> {
        let params = HawkesParams {
            mu,
            alpha,
            beta,
            impact: None,
        };
        params.validate()?;
        Ok(params)
    }

    /// Convenience 1-D constructor.
    pub fn univariate(mu: f64, alpha: f64, beta: f64) -> Result<Self, HawkesError> {
        HawkesParams::new(vec![mu], vec![vec![alpha]], vec![vec![beta]])
    }

    pub fn with_impact(mut self, impact: Vec<Vec<f64>>) -> Result<Self, HawkesError> {
        if impact.len() != self.dim() {
            return Err(HawkesError::BadParams(
                "impact table must have one row per component".into(),
            ));
        }
        self.impact = Some(impact);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self) -> Result<(), HawkesError> {
        let m = self.dim();
        if m == 0 {
            return Err(HawkesError::BadParams("dimension must be positive".into()));
        }
        if self.alpha.len() != m || self.beta.len() != m {
            return Err(HawkesError::BadParams("alpha/beta must be MxM".into()));
        }
        for i in 0..m {
            if self.alpha[i].len() != m || self.beta[i].len() != m {
                return Err(HawkesError::BadParams("alpha/beta must be MxM".into()));
            }
            if self.mu[i] < 0.0 || !self.mu[i].is_finite() {
                return Err(HawkesError::BadParams(format!("mu[{i}] must be >= 0")));
            }
            for j in 0..m {
                if self.alpha[i][j] < 0.0 || !self.alpha[i][j].is_finite() {
                    return Err(HawkesError::BadParams(format!("alpha[{i}][{j}] must be >= 0")));
                }
                if self.beta[i][j] <= 0.0 || !self.beta[i][j].is_finite() {
                    return Err(HawkesError::BadParams(format!("beta[{i}][{j}] must be > 0")));
                }
            }
        }
        Ok(())
    }

    pub fn impact_of(&self, component: usize, mark: usize) -> f64 {
        match &self.impact {
            Some(table) => table
                .get(component)
                .and_then(|row| row.get(mark))
                .copied()
                .unwrap_or(1.0),
            None => 1.0,
        }
    }

    /// Spectral radius of the branching matrix [alpha_ij / beta_ij] by power
    /// iteration. The process is stable when this is < 1.
    pub fn branching_spectral_radius(&self) -> f64 {
        let m = self.dim();
        let mut v = vec![1.0 / (m as f64).sqrt(); m];
        let mut radius = 0.0;
        for _ in 0..200 {
            let mut w = vec![0.0; m];
            for i in 0..m {
                for j in 0..m {
                    w[i] += self.alpha[i][j] / self.beta[i][j] * v[j];
                }
            }
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            radius = norm;
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi / norm;
            }
        }
        radius
    }

    pub fn is_stable(&self) -> bool {
        self.branching_spectral_radius() < 1.0
    }
}

pub(crate) fn check_sorted(events: &[MarkedEvent]) -> Result<(), HawkesError> {
    for (n, pair) in events.windows(2).enumerate() {
        if pair[1].t <= pair[0].t {
            return Err(HawkesError::UnsortedHistory(n + 1));
        }
    }
    Ok(())
}

/// Conditional intensity of component `i` at time `t` given a strictly
/// ordered history of events before `t`.
pub fn intensity(
    params: &HawkesParams,
    history: &[MarkedEvent],
    i: usize,
    t: f64,
) -> Result<f64, HawkesError> {
    if i >= params.dim() {
        return Err(HawkesError::BadComponent(i, params.dim()));
    }
    check_sorted(history)?;
    if let Some(last) = history.last() {
        if last.t >= t {
            return Err(HawkesError::EventOutOfWindow(history.len() - 1));
        }
    }
    let mut lambda = params.mu[i];
    for ev in history {
        if ev.component >= params.dim() {
            return Err(HawkesError::BadComponent(ev.component, params.dim()));
        }
        let a = params.alpha[i][ev.component];
        let b = params.beta[i][ev.component];
        lambda += a * (-b * (t - ev.t)).exp() * params.impact_of(ev.component, ev.mark);
    }
    Ok(lambda)
}

/// Exponential-kernel excitation state allowing O(M^2) advance/update instead
/// of re-summing history.
#[derive(Debug, Clone)]
pub(crate) struct ExcitationState {
    /// s[i][j] = sum over past events of component j of impact * exp decay
    /// with rate beta_ij.
    pub s: Vec<Vec<f64>>,
    pub t: f64,
}

impl ExcitationState {
    pub fn new(m: usize) -> Self {
        ExcitationState {
            s: vec![vec![0.0; m]; m],
            t: 0.0,
        }
    }

    pub fn advance(&mut self, params: &HawkesParams, t: f64) {
        let dt = t - self.t;
        debug_assert!(dt >= 0.0);
        for (i, row) in self.s.iter_mut().enumerate() {
            for (j, s) in row.iter_mut().enumerate() {
                *s *= (-params.beta[i][j] * dt).exp();
            }
        }
        self.t = t;
    }

    pub fn on_event(&mut self, params: &HawkesParams, component: usize, mark: usize) {
        let psi = params.impact_of(component, mark);
        for row in self.s.iter_mut() {
            row[component] += psi;
        }
    }

    pub fn intensity(&self, params: &HawkesParams, i: usize) -> f64 {
        params.mu[i]
            + self.s[i]
                .iter()
                .enumerate()
                .map(|(j, s)| params.alpha[i][j] * s)
                .sum::<f64>()
    }

    pub fn total_intensity(&self, params: &HawkesParams) -> f64 {
        (0..params.dim()).map(|i| self.intensity(params, i)).sum()
    }
}

pub const EVENT_STREAM_CSV_HEADER: &str = "t,component,mark";

/// Serialize an event stream as `t,component,mark` CSV.
pub fn export_events_csv(events: &[MarkedEvent]) -> String {
    let mut out = String::from(EVENT_STREAM_CSV_HEADER);
    out.push('\n');
    for ev in events {
        out.push_str(&format!("{},{},{}\n", ev.t, ev.component, ev.mark));
    }
    out
}

pub fn parse_events_csv(text: &str) -> Result<Vec<MarkedEvent>, HawkesError> {
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if (i == 0 && line == EVENT_STREAM_CSV_HEADER) || line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let bad = || HawkesError::BadParams(format!("bad event csv line {}", i + 1));
        let t: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let component: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let mark: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        events.push(MarkedEvent { t, component, mark });
    }
    check_sorted(&events)?;
    Ok(events)
}

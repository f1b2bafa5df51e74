use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ExcitationState, HawkesError, HawkesParams, MarkedEvent};

/// Default hard cap on simulated events, a guard for unstable parameters.
pub const DEFAULT_EVENT_CAP: usize = 1_000_000;

/// Simulate an event stream on [0, horizon] by Ogata thinning.
///
/// The dominating bound is recomputed after every candidate (the total
/// intensity of an exponential-kernel process is non-increasing between
/// events, so the value just after the current time dominates). Accepted
/// candidates are assigned to component i with probability lambda_i / total.
/// Marks are drawn uniformly over the impact table's columns when a table is
/// present, otherwise the mark repeats the component index.
///
/// Deterministic for a fixed seed. Unstable parameters trigger a warning and
/// the stream is truncated at `DEFAULT_EVENT_CAP` events.
pub fn simulate_thinning(
    params: &HawkesParams,
    horizon: f64,
    seed: u64,
) -> Result<Vec<MarkedEvent>, HawkesError> {
    simulate_thinning_capped(params, horizon, seed, DEFAULT_EVENT_CAP)
}

pub fn simulate_thinning_capped(
    params: &HawkesParams,
    horizon: f64,
    seed: u64,
    event_cap: usize,
) -> Result<Vec<MarkedEvent>, HawkesError> {
    params.validate()?;
    if horizon <= 0.0 {
        return Err(HawkesError::BadParams("horizon must be > 0".into()));
    }
    if !params.is_stable() {
        log::warn!(
            "unstable Hawkes parameters (branching radius {:.3}); capping at {} events",
            params.branching_spectral_radius(),
            event_cap
        );
    }

    let m = params.dim();
    let mark_range = params.impact.as_ref().map(|table| {
        table
            .iter()
            .map(|row| row.len())
            .min()
            .unwrap_or(1)
            .max(1)
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = ExcitationState::new(m);
    let mut events = Vec::new();
    let mut t = 0.0;

    loop {
        if events.len() >= event_cap {
            log::warn!("event cap {event_cap} reached at t={t:.3}; truncating stream");
            break;
        }
        let bound = state.total_intensity(params);
        if bound <= 0.0 {
            break; // nothing can ever fire again
        }
        let w = -rng.random::<f64>().ln() / bound;
        t += w;
        if t > horizon {
            break;
        }
        state.advance(params, t);
        let total = state.total_intensity(params);
        if rng.random::<f64>() * bound <= total {
            // assign component proportionally to its intensity share
            let mut pick = rng.random::<f64>() * total;
            let mut component = m - 1;
            for i in 0..m {
                let li = state.intensity(params, i);
                if pick < li {
                    component = i;
                    break;
                }
                pick -= li;
            }
            let mark = match mark_range {
                Some(k) => rng.random_range(0..k),
                None => component,
            };
            state.on_event(params, component, mark);
            events.push(MarkedEvent::new(t, component, mark));
        }
    }
    Ok(events)
}

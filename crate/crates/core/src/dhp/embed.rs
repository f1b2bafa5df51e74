use crate::hawkes::MarkedEvent;

/// One element of a model input stream: event type over the six-letter
/// alphabet plus the top-of-book features observed just before the event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamEvent {
    pub t: f64,
    pub kind: usize,
    /// Spread in ticks at the event time; 0 for synthetic streams.
    pub spread: f64,
    /// Depth-1 imbalance (bid - ask) / (bid + ask); 0 for synthetic streams.
    pub imbalance: f64,
}

/// An event stream with its observation horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub events: Vec<StreamEvent>,
    pub horizon: f64,
}

impl Stream {
    pub fn from_marked(events: &[MarkedEvent], horizon: f64) -> Self {
        Stream {
            events: events
                .iter()
                .map(|e| StreamEvent {
                    t: e.t,
                    kind: e.component,
                    spread: 0.0,
                    imbalance: 0.0,
                })
                .collect(),
            horizon,
        }
    }
}

/// Standardization constants for the non-categorical input features,
/// estimated on the training set and stored with the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureNorm {
    pub logdt_mean: f64,
    pub logdt_std: f64,
    pub spread_mean: f64,
    pub spread_std: f64,
    pub imbalance_mean: f64,
    pub imbalance_std: f64,
    /// Median inter-event gap of the training set; the power-law decay time
    /// constant defaults to this.
    pub median_gap: f64,
}

impl Default for FeatureNorm {
    fn default() -> Self {
        FeatureNorm {
            logdt_mean: 0.0,
            logdt_std: 1.0,
            spread_mean: 0.0,
            spread_std: 1.0,
            imbalance_mean: 0.0,
            imbalance_std: 1.0,
            median_gap: 1.0,
        }
    }
}

const MIN_DT: f64 = 1e-9;

impl FeatureNorm {
    pub fn estimate(streams: &[Stream]) -> FeatureNorm {
        let mut logdts = Vec::new();
        let mut gaps = Vec::new();
        let mut spreads = Vec::new();
        let mut imbalances = Vec::new();
        for stream in streams {
            let mut last = 0.0;
            for ev in &stream.events {
                let dt = (ev.t - last).max(MIN_DT);
                logdts.push(dt.ln());
                gaps.push(dt);
                spreads.push(ev.spread);
                imbalances.push(ev.imbalance);
                last = ev.t;
            }
        }
        let ms = |xs: &[f64]| {
            let m = crate::stats::mean(xs);
            let s = crate::stats::std_dev(xs);
            (m, if s > 1e-12 { s } else { 1.0 })
        };
        let (lm, ls) = ms(&logdts);
        let (sm, ss) = ms(&spreads);
        let (im, is) = ms(&imbalances);
        let median_gap = crate::stats::median(&gaps).max(MIN_DT);
        FeatureNorm {
            logdt_mean: lm,
            logdt_std: ls,
            spread_mean: sm,
            spread_std: ss,
            imbalance_mean: im,
            imbalance_std: is,
            median_gap,
        }
    }

    /// Input embedding: one-hot event type, standardized log inter-arrival,
    /// standardized spread and imbalance. Dimension = alphabet + 3.
    pub fn embed(&self, kind: usize, alphabet: usize, dt: f64, spread: f64, imbalance: f64) -> Vec<f64> {
        let mut x = vec![0.0; alphabet + 3];
        if kind < alphabet {
            x[kind] = 1.0;
        }
        x[alphabet] = ((dt.max(MIN_DT)).ln() - self.logdt_mean) / self.logdt_std;
        x[alphabet + 1] = (spread - self.spread_mean) / self.spread_std;
        x[alphabet + 2] = (imbalance - self.imbalance_mean) / self.imbalance_std;
        x
    }
}

pub fn embed_dim(alphabet: usize) -> usize {
    alphabet + 3
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_layout() {
        let norm = FeatureNorm::default();
        let x = norm.embed(2, 6, 1.0, 3.0, -0.5);
        assert_eq!(x.len(), 9);
        assert_eq!(x[2], 1.0);
        assert_eq!(x[0], 0.0);
        assert!((x[6] - 0.0).abs() < 1e-12); // ln(1) standardized by (0,1)
        assert_eq!(x[7], 3.0);
        assert_eq!(x[8], -0.5);
    }

    #[test]
    fn estimate_standardizes_features() {
        let events = vec![
            StreamEvent { t: 1.0, kind: 0, spread: 2.0, imbalance: 0.1 },
            StreamEvent { t: 3.0, kind: 1, spread: 4.0, imbalance: -0.1 },
            StreamEvent { t: 7.0, kind: 2, spread: 6.0, imbalance: 0.3 },
        ];
        let stream = Stream { events, horizon: 8.0 };
        let norm = FeatureNorm::estimate(std::slice::from_ref(&stream));
        assert!((norm.spread_mean - 4.0).abs() < 1e-12);
        assert!((norm.median_gap - 2.0).abs() < 1e-12);
        let x = norm.embed(0, 6, 2.0, 4.0, norm.imbalance_mean);
        assert!((x[7] - 0.0).abs() < 1e-12);
        assert!((x[8] - 0.0).abs() < 1e-12);
    }
}

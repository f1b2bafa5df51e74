use crate::dhp::{Stream, StreamEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitResolution {
    Nanosecond,
    /// Collapse timestamps to milliseconds, keeping the first event per
    /// (millisecond, type) pair.
    Millisecond,
}

#[derive(Debug, Clone)]
pub struct SplitResult {
    pub train: Stream,
    pub val: Stream,
    pub test: Stream,
    /// Original-time windows [start, end) of the three contiguous segments.
    pub windows: [(f64, f64); 3],
}

fn rebase(events: &[StreamEvent], window: (f64, f64)) -> Stream {
    Stream {
        events: events
            .iter()
            .map(|e| StreamEvent {
                t: e.t - window.0,
                ..*e
            })
            .collect(),
        horizon: window.1 - window.0,
    }
}

/// Contiguous chronological split (train, then validation, then test) by
/// event-count ratios. Each output stream is re-based to its own window so
/// it can be consumed independently.
pub fn split_dataset(stream: &Stream, ratios: (f64, f64, f64), resolution: SplitResolution) -> SplitResult {
    let events = match resolution {
        SplitResolution::Nanosecond => stream.events.clone(),
        SplitResolution::Millisecond => downsample_ms(&stream.events),
    };
    let total: f64 = ratios.0 + ratios.1 + ratios.2;
    let (a, b) = if total > 0.0 {
        (ratios.0 / total, ratios.1 / total)
    } else {
        (1.0, 0.0)
    };
    let n = events.len();
    let n_train = (n as f64 * a).floor() as usize;
    let n_val = (n as f64 * b).floor() as usize;
    let train_events = &events[..n_train.min(n)];
    let val_events = &events[n_train.min(n)..(n_train + n_val).min(n)];
    let test_events = &events[(n_train + n_val).min(n)..];

    let end = |evs: &[StreamEvent], fallback: f64| evs.last().map(|e| e.t + 1e-9).unwrap_or(fallback);
    let horizon_all = match resolution {
        SplitResolution::Nanosecond => stream.horizon,
        SplitResolution::Millisecond => end(&events, stream.horizon),
    };
    let t0 = 0.0;
    let t1 = end(train_events, t0);
    let t2 = end(val_events, t1);
    let t3 = horizon_all.max(end(test_events, t2));
    let windows = [(t0, t1), (t1, t2), (t2, t3)];

    SplitResult {
        train: rebase(train_events, windows[0]),
        val: rebase(val_events, windows[1]),
        test: rebase(test_events, windows[2]),
        windows,
    }
}

/// Millisecond downsampling: timestamps collapse to the millisecond grid and
/// only the first event per (millisecond, type) survives. Collapsed times
/// are kept strictly increasing by a nanosecond nudge.
fn downsample_ms(events: &[StreamEvent]) -> Vec<StreamEvent> {
    let mut out: Vec<StreamEvent> = Vec::new();
    let mut last_key: Option<(i64, usize)> = None;
    let mut seen_in_ms: Vec<usize> = Vec::new();
    let mut current_ms = i64::MIN;
    let mut last_t = f64::NEG_INFINITY;
    for ev in events {
        let ms = (ev.t * 1000.0).floor() as i64;
        if ms != current_ms {
            current_ms = ms;
            seen_in_ms.clear();
        }
        if seen_in_ms.contains(&ev.kind) {
            continue;
        }
        seen_in_ms.push(ev.kind);
        let mut t = ms as f64 * 1e-3;
        if t <= last_t {
            t = last_t + 1e-9;
        }
        last_t = t;
        out.push(StreamEvent { t, ..*ev });
        last_key = Some((ms, ev.kind));
    }
    let _ = last_key;
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream_of(n: usize) -> Stream {
        Stream {
            events: (0..n)
                .map(|i| StreamEvent {
                    t: (i + 1) as f64 * 0.01,
                    kind: i % 3,
                    spread: 0.0,
                    imbalance: 0.0,
                })
                .collect(),
            horizon: (n + 1) as f64 * 0.01,
        }
    }

    #[test]
    fn proportions_follow_requested_ratios() {
        let s = stream_of(1000);
        let split = split_dataset(&s, (0.8, 0.08, 0.12), SplitResolution::Nanosecond);
        assert_eq!(split.train.events.len(), 800);
        assert_eq!(split.val.events.len(), 80);
        assert_eq!(split.test.events.len(), 120);
        // train > test > val, the dataset-table ordering
        assert!(split.train.events.len() > split.test.events.len());
        assert!(split.test.events.len() > split.val.events.len());
    }

    #[test]
    fn everything_in_train_when_ratio_is_one() {
        let s = stream_of(50);
        let split = split_dataset(&s, (1.0, 0.0, 0.0), SplitResolution::Nanosecond);
        assert_eq!(split.train.events.len(), 50);
        assert!(split.val.events.is_empty());
        assert!(split.test.events.is_empty());
    }

    #[test]
    fn split_windows_respect_time_order() {
        let s = stream_of(300);
        let split = split_dataset(&s, (0.6, 0.2, 0.2), SplitResolution::Nanosecond);
        assert!(split.windows[0].1 <= split.windows[1].0 + 1e-12);
        assert!(split.windows[1].1 <= split.windows[2].0 + 1e-12);
        // each rebased stream starts near zero and fits its horizon
        for part in [&split.train, &split.val, &split.test] {
            if let (Some(first), Some(last)) = (part.events.first(), part.events.last()) {
                assert!(first.t >= 0.0);
                assert!(last.t <= part.horizon);
            }
        }
    }

    #[test]
    fn millisecond_mode_keeps_first_event_per_ms_and_type() {
        let events = vec![
            StreamEvent { t: 0.0001, kind: 0, spread: 0.0, imbalance: 0.0 },
            StreamEvent { t: 0.0004, kind: 0, spread: 0.0, imbalance: 0.0 }, // dup (ms 0, kind 0)
            StreamEvent { t: 0.0006, kind: 1, spread: 0.0, imbalance: 0.0 },
            StreamEvent { t: 0.0012, kind: 0, spread: 0.0, imbalance: 0.0 },
            StreamEvent { t: 0.0013, kind: 0, spread: 0.0, imbalance: 0.0 }, // dup (ms 1, kind 0)
        ];
        let s = Stream { events, horizon: 0.01 };
        let split = split_dataset(&s, (1.0, 0.0, 0.0), SplitResolution::Millisecond);
        let kept = &split.train.events;
        assert_eq!(kept.len(), 3);
        assert_eq!(kept[0].kind, 0);
        assert_eq!(kept[1].kind, 1);
        assert_eq!(kept[2].kind, 0);
        // shorter stream than the nanosecond variant
        assert!(kept.len() < s.events.len());
        for w in kept.windows(2) {
            assert!(w[1].t > w[0].t);
        }
    }
}

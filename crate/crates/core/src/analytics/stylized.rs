use crate::lob::TimeNs;
use crate::stats::{acf, hill_estimator};

/// Stylized-fact measurements of a mid-price path: heavy-tail exponents of
/// the return distribution and the autocorrelation of returns.
#[derive(Debug, Clone, PartialEq)]
pub struct StylizedFactsReport {
    pub dt_ns: TimeNs,
    pub n_returns: usize,
    /// Hill exponent of the positive / negative / absolute return tails.
    pub tail_exponent_pos: Option<f64>,
    pub tail_exponent_neg: Option<f64>,
    pub tail_exponent_abs: Option<f64>,
    pub tail_fraction: f64,
    /// Normalized autocorrelation of returns by lag; acf[0] = 1.
    pub acf: Vec<f64>,
    /// Two-standard-error white-noise band.
    pub acf_band: f64,
    /// Histogram of standardized returns as (bin center, density).
    pub histogram: Vec<(f64, f64)>,
    /// Positive-tail CCDF sample points (x, P(r > x)) of standardized returns.
    pub ccdf_pos: Vec<(f64, f64)>,
    pub ccdf_neg: Vec<(f64, f64)>,
}

/// Log returns of a mid series resampled on a fixed grid
/// (last observation carried forward).
pub fn log_returns(mids: &[(TimeNs, f64)], dt_ns: TimeNs) -> Vec<f64> {
    if mids.len() < 2 || dt_ns <= 0 {
        return vec![];
    }
    let t0 = mids[0].0;
    let t1 = mids.last().unwrap().0;
    let mut grid = Vec::new();
    let mut idx = 0usize;
    let mut t = t0;
    while t <= t1 {
        while idx + 1 < mids.len() && mids[idx + 1].0 <= t {
            idx += 1;
        }
        grid.push(mids[idx].1);
        t += dt_ns;
    }
    grid.windows(2)
        .filter(|w| w[0] > 0.0 && w[1] > 0.0)
        .map(|w| (w[1] / w[0]).ln())
        .collect()
}

pub fn stylized_facts(
    mids: &[(TimeNs, f64)],
    dt_ns: TimeNs,
    max_lag: usize,
    tail_fraction: f64,
) -> StylizedFactsReport {
    let returns = log_returns(mids, dt_ns);
    stylized_facts_from_returns(&returns, dt_ns, max_lag, tail_fraction)
}

pub fn stylized_facts_from_returns(
    returns: &[f64],
    dt_ns: TimeNs,
    max_lag: usize,
    tail_fraction: f64,
) -> StylizedFactsReport {
    let n = returns.len();
    // tails of centered returns, so a drift does not masquerade as scale
    let center = crate::stats::mean(returns);
    let centered: Vec<f64> = returns.iter().map(|r| r - center).collect();
    let pos: Vec<f64> = centered.iter().copied().filter(|r| *r > 0.0).collect();
    let neg: Vec<f64> = centered.iter().copied().filter(|r| *r < 0.0).map(|r| -r).collect();
    let abs: Vec<f64> = centered.iter().map(|r| r.abs()).filter(|r| *r > 0.0).collect();

    let rho = acf(returns, max_lag);
    let band = if n > 0 { 2.0 / (n as f64).sqrt() } else { 0.0 };

    // standardized returns for plot-ready outputs
    let std = crate::stats::std_dev(returns).max(1e-300);
    let mean = crate::stats::mean(returns);
    let zs: Vec<f64> = returns.iter().map(|r| (r - mean) / std).collect();

    let bins = 41;
    let span = 5.0;
    let mut hist = vec![0.0; bins];
    for z in &zs {
        let idx = (((z + span) / (2.0 * span)) * bins as f64).floor();
        if idx >= 0.0 && (idx as usize) < bins {
            hist[idx as usize] += 1.0;
        }
    }
    let bin_width = 2.0 * span / bins as f64;
    let histogram: Vec<(f64, f64)> = hist
        .iter()
        .enumerate()
        .map(|(i, c)| {
            (
                -span + (i as f64 + 0.5) * bin_width,
                c / (n.max(1) as f64 * bin_width),
            )
        })
        .collect();

    let ccdf = |tail: &[f64]| -> Vec<(f64, f64)> {
        if tail.is_empty() {
            return vec![];
        }
        let mut xs: Vec<f64> = tail.iter().map(|r| (r - mean).abs() / std).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let m = xs.len();
        let step = (m / 200).max(1);
        xs.iter()
            .enumerate()
            .step_by(step)
            .map(|(i, &x)| (x, (m - i) as f64 / m as f64))
            .collect()
    };

    StylizedFactsReport {
        dt_ns,
        n_returns: n,
        tail_exponent_pos: hill_estimator(&pos, tail_fraction),
        tail_exponent_neg: hill_estimator(&neg, tail_fraction),
        tail_exponent_abs: hill_estimator(&abs, tail_fraction),
        tail_fraction,
        acf: rho,
        acf_band: band,
        histogram,
        ccdf_pos: ccdf(&pos),
        ccdf_neg: ccdf(&neg),
    }
}

impl StylizedFactsReport {
    pub fn acf_csv(&self) -> String {
        let mut out = String::from("lag,acf\n");
        for (lag, r) in self.acf.iter().enumerate() {
            out.push_str(&format!("{lag},{r}\n"));
        }
        out
    }

    pub fn pdf_csv(&self) -> String {
        let mut out = String::from("z,density\n");
        for (z, d) in &self.histogram {
            out.push_str(&format!("{z},{d}\n"));
        }
        out
    }

    pub fn ccdf_csv(&self) -> String {
        let mut out = String::from("tail,x,ccdf\n");
        for (x, p) in &self.ccdf_pos {
            out.push_str(&format!("pos,{x},{p}\n"));
        }
        for (x, p) in &self.ccdf_neg {
            out.push_str(&format!("neg,{x},{p}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::Distribution;

    #[test]
    fn iid_normal_returns_have_no_autocorrelation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let normal = rand_distr::Normal::new(0.0, 1e-3).unwrap();
        let mut mids = Vec::new();
        let mut log_p: f64 = (100.0f64).ln();
        for k in 0..20_000i64 {
            mids.push((k * 1_000, log_p.exp()));
            log_p += normal.sample(&mut rng);
        }
        let report = stylized_facts(&mids, 1_000, 10, 0.05);
        assert_eq!(report.n_returns, 19_999);
        assert!((report.acf[0] - 1.0).abs() < 1e-12);
        for (lag, r) in report.acf.iter().enumerate().skip(1) {
            assert!(r.abs() < report.acf_band, "lag {lag}: {r}");
        }
    }

    #[test]
    fn pareto_returns_recover_tail_exponent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // symmetric Pareto(alpha = 3) returns
        let n = 100_000;
        let returns: Vec<f64> = (0..n)
            .map(|_| {
                let u: f64 = rand::Rng::random(&mut rng);
                let mag = (1.0 - u).powf(-1.0 / 2.0);
                if rand::Rng::random::<bool>(&mut rng) {
                    mag
                } else {
                    -mag
                }
            })
            .collect();
        let report = stylized_facts_from_returns(&returns, 1, 5, 0.05);
        let alpha = report.tail_exponent_pos.unwrap();
        assert!((alpha - 3.0).abs() < 0.3, "pos tail {alpha}");
        let alpha_n = report.tail_exponent_neg.unwrap();
        assert!((alpha_n - 3.0).abs() < 0.3, "neg tail {alpha_n}");
    }

    #[test]
    fn resampling_carries_last_observation_forward() {
        let mids = vec![(0i64, 100.0), (2_500, 110.0), (10_000, 121.0)];
        let returns = log_returns(&mids, 5_000);
        // grid at 0, 5000, 10000: prices 100, 110, 121
        assert_eq!(returns.len(), 2);
        assert!((returns[0] - (1.1f64).ln()).abs() < 1e-12);
        assert!((returns[1] - (1.1f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn histogram_integrates_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
        let returns: Vec<f64> = (0..50_000).map(|_| normal.sample(&mut rng)).collect();
        let report = stylized_facts_from_returns(&returns, 1, 5, 0.05);
        let bin_width = 10.0 / 41.0;
        let total: f64 = report.histogram.iter().map(|(_, d)| d * bin_width).sum();
        assert!((total - 1.0).abs() < 0.01, "total {total}");
    }
}

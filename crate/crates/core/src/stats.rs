//! Small statistics toolbox shared by fitting diagnostics, analytics and
//! the acceptance checks: Hill tail estimator, Kolmogorov-Smirnov and
//! chi-square goodness of fit, rank-sum comparison, autocorrelation.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Hill estimator of a power-law pdf exponent from the top `tail_fraction`
/// order statistics: alpha = 1 + k / sum log(x_(i)/x_(k+1)).
///
/// Returns `None` when fewer than 2 tail points are available or the tail is
/// degenerate.
pub fn hill_estimator(samples: &[f64], tail_fraction: f64) -> Option<f64> {
    let mut xs: Vec<f64> = samples.iter().copied().filter(|x| *x > 0.0).collect();
    if xs.len() < 4 {
        return None;
    }
    xs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let k = ((xs.len() as f64 * tail_fraction).floor() as usize).clamp(2, xs.len() - 1);
    let threshold = xs[k];
    if threshold <= 0.0 {
        return None;
    }
    let sum: f64 = xs[..k].iter().map(|x| (x / threshold).ln()).sum();
    if sum <= 0.0 {
        return None;
    }
    Some(1.0 + k as f64 / sum)
}

/// Two-sided Kolmogorov-Smirnov test of `samples` against the unit
/// exponential distribution. Returns (statistic, asymptotic p-value).
pub fn ks_test_exp1(samples: &[f64]) -> (f64, f64) {
    let mut xs: Vec<f64> = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n == 0 {
        return (0.0, 1.0);
    }
    let mut d: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let cdf = 1.0 - (-x).exp();
        let hi = (i + 1) as f64 / n as f64 - cdf;
        let lo = cdf - i as f64 / n as f64;
        d = d.max(hi).max(lo);
    }
    (d, ks_pvalue(d, n))
}

/// Asymptotic Kolmogorov distribution: P(D > d) for sample size n.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sqrt_n = (n as f64).sqrt();
    // Stephens' small-sample correction.
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64 * lambda).powi(2)).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-12 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Chi-square goodness-of-fit p-value for observed counts against expected
/// counts. Bins with expected count below `min_expected` are pooled into the
/// previous bin.
pub fn chi_square_pvalue(observed: &[f64], expected: &[f64], min_expected: f64) -> f64 {
    assert_eq!(observed.len(), expected.len());
    let mut obs_pooled = Vec::new();
    let mut exp_pooled = Vec::new();
    let mut acc_o = 0.0;
    let mut acc_e = 0.0;
    for (&o, &e) in observed.iter().zip(expected) {
        acc_o += o;
        acc_e += e;
        if acc_e >= min_expected {
            obs_pooled.push(acc_o);
            exp_pooled.push(acc_e);
            acc_o = 0.0;
            acc_e = 0.0;
        }
    }
    if acc_e > 0.0 {
        if let (Some(o), Some(e)) = (obs_pooled.last_mut(), exp_pooled.last_mut()) {
            *o += acc_o;
            *e += acc_e;
        } else {
            obs_pooled.push(acc_o);
            exp_pooled.push(acc_e);
        }
    }
    if obs_pooled.len() < 2 {
        return 1.0;
    }
    let stat: f64 = obs_pooled
        .iter()
        .zip(&exp_pooled)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum();
    let dof = (obs_pooled.len() - 1) as f64;
    let chi = ChiSquared::new(dof).expect("dof >= 1");
    1.0 - chi.cdf(stat)
}

/// One-sided Mann-Whitney rank-sum test of H1: `xs` stochastically greater
/// than `ys`. Normal approximation with tie correction; returns the p-value.
pub fn rank_sum_greater_pvalue(xs: &[f64], ys: &[f64]) -> f64 {
    let n1 = xs.len() as f64;
    let n2 = ys.len() as f64;
    if n1 == 0.0 || n2 == 0.0 {
        return 1.0;
    }
    let mut all: Vec<(f64, usize)> = xs
        .iter()
        .map(|&v| (v, 0usize))
        .chain(ys.iter().map(|&v| (v, 1usize)))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let n = all.len();
    let mut ranks = vec![0.0; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let avg_rank = (i + j + 2) as f64 / 2.0;
        for r in ranks.iter_mut().take(j + 1).skip(i) {
            *r = avg_rank;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let r1: f64 = all
        .iter()
        .zip(&ranks)
        .filter(|((_, g), _)| *g == 0)
        .map(|(_, r)| r)
        .sum();
    let u1 = r1 - n1 * (n1 + 1.0) / 2.0;
    let mu = n1 * n2 / 2.0;
    let n_tot = n1 + n2;
    let sigma2 = n1 * n2 / 12.0 * ((n_tot + 1.0) - tie_term / (n_tot * (n_tot - 1.0)));
    if sigma2 <= 0.0 {
        return if u1 > mu { 0.0 } else { 1.0 };
    }
    let z = (u1 - mu - 0.5) / sigma2.sqrt();
    let normal = Normal::new(0.0, 1.0).unwrap();
    1.0 - normal.cdf(z)
}

/// Normalized autocorrelation of a series up to `max_lag` (biased estimator,
/// divides by n). acf[0] == 1 by construction.
pub fn acf(series: &[f64], max_lag: usize) -> Vec<f64> {
    let n = series.len();
    if n == 0 {
        return vec![];
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let var: f64 = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    let mut out = Vec::with_capacity(max_lag + 1);
    if var == 0.0 {
        out.push(1.0);
        out.extend(std::iter::repeat(0.0).take(max_lag));
        return out;
    }
    for lag in 0..=max_lag.min(n - 1) {
        let cov: f64 = (0..n - lag)
            .map(|t| (series[t] - mean) * (series[t + lag] - mean))
            .sum::<f64>()
            / n as f64;
        out.push(cov / var);
    }
    out
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

use rand::Rng;

use super::tgeom::{maximize_p, TruncGeomParams};
use super::DistError;

/// Market-order size mixture: a truncated geometric plus Dirac atoms at
/// q = 5k+1 and, when the cap is not itself of that form, an atom at the cap.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketMixtureParams {
    pub p0: f64,
    pub theta0: f64,
    /// Atom weights at q = 5k+1 for k = 1..=(cap-1)/5.
    pub theta_atoms: Vec<f64>,
    pub theta_inf: f64,
    pub cap: u64,
}

const WEIGHT_TOL: f64 = 1e-9;

impl MarketMixtureParams {
    pub fn new(
        p0: f64,
        theta0: f64,
        theta_atoms: Vec<f64>,
        theta_inf: f64,
        cap: u64,
    ) -> Result<Self, DistError> {
        let tg = TruncGeomParams::new(p0, cap)?; // validates p0 and cap
        let _ = tg;
        let n_atoms = ((cap.saturating_sub(1)) / 5) as usize;
        if theta_atoms.len() != n_atoms {
            return Err(DistError::BadParam(format!(
                "expected {n_atoms} atom weights for cap {cap}, got {}",
                theta_atoms.len()
            )));
        }
        if theta0 < 0.0 || theta_inf < 0.0 || theta_atoms.iter().any(|&t| t < 0.0) {
            return Err(DistError::BadParam("mixture weights must be >= 0".into()));
        }
        let total = theta0 + theta_inf + theta_atoms.iter().sum::<f64>();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(DistError::BadParam(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        if cap % 5 == 1 && theta_inf > 0.0 {
            // the cap atom's indicator requires cap != 5n+1; its mass would
            // otherwise vanish and the pmf would not normalize
            return Err(DistError::BadParam(
                "theta_inf must be 0 when cap = 5n+1".into(),
            ));
        }
        Ok(MarketMixtureParams {
            p0,
            theta0,
            theta_atoms,
            theta_inf,
            cap,
        })
    }

    /// Pure truncated geometric (theta0 = 1).
    pub fn pure_geometric(p0: f64, cap: u64) -> Result<Self, DistError> {
        let n_atoms = ((cap.saturating_sub(1)) / 5) as usize;
        MarketMixtureParams::new(p0, 1.0, vec![0.0; n_atoms], 0.0, cap)
    }

    fn tg(&self) -> TruncGeomParams {
        TruncGeomParams {
            p0: self.p0,
            cap: self.cap,
        }
    }

    pub fn pmf(&self, q: u64) -> f64 {
        if q < 1 || q > self.cap {
            return 0.0;
        }
        let mut p = self.theta0 * self.tg().pmf(q);
        if q >= 6 && (q - 1) % 5 == 0 {
            let k = ((q - 1) / 5) as usize;
            if k >= 1 && k <= self.theta_atoms.len() {
                p += self.theta_atoms[k - 1];
            }
        }
        if q == self.cap && self.cap % 5 != 1 {
            p += self.theta_inf;
        }
        p
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> u64 {
        let mut pick: f64 = rng.random();
        if pick < self.theta0 {
            return self.tg().sample(rng);
        }
        pick -= self.theta0;
        for (k, &w) in self.theta_atoms.iter().enumerate() {
            if pick < w {
                return 5 * (k as u64 + 1) + 1;
            }
            pick -= w;
        }
        self.cap
    }

    fn log_likelihood(&self, samples: &[u64]) -> f64 {
        samples.iter().map(|&x| self.pmf(x).max(1e-300).ln()).sum()
    }
}

#[derive(Debug, Clone)]
pub struct MixtureFit {
    pub params: MarketMixtureParams,
    pub log_likelihood: f64,
    pub ll_history: Vec<f64>,
    pub iterations: usize,
    /// Set when the sample had a single distinct value and the estimate sits
    /// on the boundary of the parameter space.
    pub degenerate: bool,
}

/// EM fit of the market-order mixture on samples in 1..=cap. The expected
/// complete-data log-likelihood is maximized exactly in each M step, so the
/// observed log-likelihood is non-decreasing across iterations.
pub fn fit_mixture_mle(samples: &[u64], cap: u64) -> Result<MixtureFit, DistError> {
    if samples.is_empty() {
        return Err(DistError::NoSamples);
    }
    for &x in samples {
        if x < 1 || x > cap {
            return Err(DistError::OutOfSupport(x, cap));
        }
    }
    let n = samples.len() as f64;
    let n_atoms = ((cap.saturating_sub(1)) / 5) as usize;
    let has_cap_atom = cap % 5 != 1;
    let mut distinct = samples.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let degenerate = distinct.len() == 1;

    // moment initialization for the geometric component, equal shares for
    // the atoms
    let mean = samples.iter().sum::<u64>() as f64 / n;
    let mut p0 = (1.0 / mean).clamp(1e-6, 1.0 - 1e-6);
    let n_components = 1 + n_atoms + usize::from(has_cap_atom);
    let mut weights = vec![1.0 / n_components as f64; n_components];

    let assemble = |p0: f64, weights: &[f64]| -> MarketMixtureParams {
        MarketMixtureParams {
            p0,
            theta0: weights[0],
            theta_atoms: weights[1..1 + n_atoms].to_vec(),
            theta_inf: if has_cap_atom { weights[1 + n_atoms] } else { 0.0 },
            cap,
        }
    };

    let mut ll = assemble(p0, &weights).log_likelihood(samples);
    let mut ll_history = vec![ll];
    let mut iterations = 0;
    for _ in 0..500 {
        iterations += 1;
        let params = assemble(p0, &weights);
        let tg = TruncGeomParams { p0, cap };

        // E step: responsibilities per sample, accumulated per component
        let mut resp_sum = vec![0.0; n_components];
        let mut geo_weighted: Vec<(u64, f64)> = Vec::new();
        for &x in samples {
            let mut contrib = vec![0.0; n_components];
            contrib[0] = weights[0] * tg.pmf(x);
            if x >= 6 && (x - 1) % 5 == 0 {
                let k = ((x - 1) / 5) as usize;
                if (1..=n_atoms).contains(&k) {
                    contrib[k] = weights[k];
                }
            }
            if has_cap_atom && x == cap {
                contrib[1 + n_atoms] = weights[1 + n_atoms];
            }
            let total: f64 = contrib.iter().sum();
            if total <= 0.0 {
                continue;
            }
            for (c, v) in contrib.iter().enumerate() {
                resp_sum[c] += v / total;
            }
            if contrib[0] > 0.0 {
                geo_weighted.push((x, contrib[0] / total));
            }
        }

        // M step: closed-form weights, 1-D search for p0
        for (w, r) in weights.iter_mut().zip(&resp_sum) {
            *w = (r / n).max(0.0);
        }
        let wsum: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= wsum;
        }
        if resp_sum[0] > 1e-12 {
            p0 = maximize_p(|p| {
                let tg = TruncGeomParams { p0: p, cap };
                geo_weighted
                    .iter()
                    .map(|&(x, r)| r * tg.pmf(x).max(1e-300).ln())
                    .sum()
            });
        }

        let new_ll = assemble(p0, &weights).log_likelihood(samples);
        debug_assert!(
            new_ll >= ll - 1e-9 * ll.abs().max(1.0),
            "EM decreased beyond roundoff: {ll} -> {new_ll}"
        );
        ll_history.push(new_ll);
        if (new_ll - ll).abs() < 1e-10 * ll.abs().max(1.0) {
            ll = new_ll;
            break;
        }
        ll = new_ll;
        let _ = params;
    }

    Ok(MixtureFit {
        params: assemble(p0, &weights),
        log_likelihood: ll,
        ll_history,
        iterations,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn theta0_one_reduces_to_truncated_geometric() {
        let mix = MarketMixtureParams::pure_geometric(0.6, 13).unwrap();
        let tg = TruncGeomParams::new(0.6, 13).unwrap();
        for q in 1..=13 {
            assert!((mix.pmf(q) - tg.pmf(q)).abs() < 1e-15);
        }
    }

    #[test]
    fn single_atom_concentrates_mass() {
        // cap 11: atoms at k=1 (q=6) and k=2 (q=11); all weight on k=2
        let mix = MarketMixtureParams::new(0.5, 0.0, vec![0.0, 1.0], 0.0, 11).unwrap();
        assert!((mix.pmf(11) - 1.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            assert_eq!(mix.sample(&mut rng), 11);
        }
    }

    #[test]
    fn pmf_sums_to_one_for_random_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..50 {
            let cap = rng.random_range(2..40);
            let n_atoms = ((cap - 1) / 5) as usize;
            let has_cap_atom = cap % 5 != 1;
            let n_comp = 1 + n_atoms + usize::from(has_cap_atom);
            let mut raw: Vec<f64> = (0..n_comp).map(|_| rng.random::<f64>()).collect();
            let total: f64 = raw.iter().sum();
            for w in raw.iter_mut() {
                *w /= total;
            }
            let mix = MarketMixtureParams::new(
                rng.random_range(0.05..0.9),
                raw[0],
                raw[1..1 + n_atoms].to_vec(),
                if has_cap_atom { raw[1 + n_atoms] } else { 0.0 },
                cap,
            )
            .unwrap();
            let sum: f64 = (1..=cap).map(|q| mix.pmf(q)).sum();
            assert!((sum - 1.0).abs() < 1e-9, "cap {cap} sum {sum}");
        }
    }

    #[test]
    fn weights_not_summing_to_one_rejected() {
        assert!(MarketMixtureParams::new(0.5, 0.6, vec![0.2, 0.1], 0.2, 11).is_err());
        // cap = 11 -> 11 % 5 == 1 -> theta_inf must vanish
        assert!(MarketMixtureParams::new(0.5, 0.5, vec![0.2, 0.2], 0.1, 11).is_err());
    }

    #[test]
    fn em_recovers_pure_geometric() {
        let truth = MarketMixtureParams::pure_geometric(0.6, 13).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<u64> = (0..100_000).map(|_| truth.sample(&mut rng)).collect();
        let fit = fit_mixture_mle(&samples, 13).unwrap();
        // the atoms can absorb likelihood-equivalent mass at 6 and 11, so
        // only the geometric rate is identified
        assert!((fit.params.p0 - 0.6).abs() < 0.02, "p0 {}", fit.params.p0);
    }

    #[test]
    fn all_samples_at_one_atom_drive_its_weight_to_one() {
        let samples = vec![11u64; 5_000];
        let fit = fit_mixture_mle(&samples, 12).unwrap();
        assert!(fit.degenerate);
        assert!(fit.params.theta_atoms[1] > 0.95, "{:?}", fit.params);
    }

    #[test]
    fn em_log_likelihood_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let truth =
            MarketMixtureParams::new(0.3, 0.55, vec![0.2, 0.15], 0.1, 14).unwrap();
        let samples: Vec<u64> = (0..20_000).map(|_| truth.sample(&mut rng)).collect();
        let fit = fit_mixture_mle(&samples, 14).unwrap();
        assert!(fit.log_likelihood.is_finite());
        for w in fit.ll_history.windows(2) {
            assert!(
                w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0),
                "EM step decreased: {} -> {}",
                w[0],
                w[1]
            );
        }
        assert!((fit.params.theta_atoms[0] - 0.2).abs() < 0.05);
    }

    #[test]
    fn sampler_matches_pmf_chi_square() {
        let mix = MarketMixtureParams::new(0.4, 0.6, vec![0.25], 0.15, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 100_000;
        let mut counts = vec![0.0; 9];
        for _ in 0..n {
            counts[(mix.sample(&mut rng) - 1) as usize] += 1.0;
        }
        let expected: Vec<f64> = (1..=9).map(|q| mix.pmf(q) * n as f64).collect();
        let pv = crate::stats::chi_square_pvalue(&counts, &expected, 5.0);
        assert!(pv > 0.01, "chi-square p={pv}");
    }
}

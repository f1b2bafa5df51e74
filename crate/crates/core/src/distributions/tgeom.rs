use rand::Rng;

use super::DistError;

/// Geometric law truncated to {1, ..., cap}:
/// P(q) = p0 (1-p0)^(q-1) / (1 - (1-p0)^cap).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncGeomParams {
    pub p0: f64,
    pub cap: u64,
}

impl TruncGeomParams {
    pub fn new(p0: f64, cap: u64) -> Result<Self, DistError> {
        if !(0.0 < p0 && p0 < 1.0) {
            return Err(DistError::BadParam("p0 must be in (0,1)".into()));
        }
        if cap < 1 {
            return Err(DistError::BadParam("cap must be >= 1".into()));
        }
        Ok(TruncGeomParams { p0, cap })
    }

    pub fn pmf(&self, q: u64) -> f64 {
        if q < 1 || q > self.cap {
            return 0.0;
        }
        let r = 1.0 - self.p0;
        self.p0 * r.powi((q - 1) as i32) / (1.0 - r.powi(self.cap as i32))
    }

    /// Closed-form inverse-CDF draw.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> u64 {
        let r = 1.0 - self.p0;
        let norm = 1.0 - r.powi(self.cap as i32);
        let u: f64 = rng.random();
        let q = ((1.0 - u * norm).ln() / r.ln()).ceil() as i64;
        q.clamp(1, self.cap as i64) as u64
    }

    fn log_likelihood(&self, samples: &[u64]) -> f64 {
        samples.iter().map(|&x| self.pmf(x).max(1e-300).ln()).sum()
    }
}

/// MLE of p0 for a truncated geometric on {1..cap} by golden-section search
/// on the log-likelihood.
pub fn fit_tgeom_mle(samples: &[u64], cap: u64) -> Result<TruncGeomParams, DistError> {
    if samples.is_empty() {
        return Err(DistError::NoSamples);
    }
    for &x in samples {
        if x < 1 || x > cap {
            return Err(DistError::OutOfSupport(x, cap));
        }
    }
    let p0 = maximize_p(|p| {
        TruncGeomParams { p0: p, cap }.log_likelihood(samples)
    });
    TruncGeomParams::new(p0, cap)
}

/// Golden-section maximizer on p in (eps, 1-eps).
pub(crate) fn maximize_p<F: Fn(f64) -> f64>(f: F) -> f64 {
    let mut a = 1e-9;
    let mut b = 1.0 - 1e-9;
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
        if (b - a) < 1e-12 {
            break;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_truncation_is_a_point_mass() {
        let p = TruncGeomParams::new(0.3, 1).unwrap();
        assert!((p.pmf(1) - 1.0).abs() < 1e-12);
        assert_eq!(p.pmf(2), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            assert_eq!(p.sample(&mut rng), 1);
        }
    }

    #[test]
    fn hand_computed_pmf_values() {
        // direct normalization arithmetic: r=0.4, 1-r^3 = 0.936
        let p = TruncGeomParams::new(0.6, 3).unwrap();
        assert!((p.pmf(1) - 0.64103).abs() < 1e-5);
        assert!((p.pmf(2) - 0.25641).abs() < 1e-5);
        assert!((p.pmf(3) - 0.10256).abs() < 1e-5);
    }

    #[test]
    fn pmf_sums_to_one_for_random_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let p0: f64 = rng.random_range(0.01..0.99);
            let cap = rng.random_range(1..60);
            let p = TruncGeomParams::new(p0, cap).unwrap();
            let total: f64 = (1..=cap).map(|q| p.pmf(q)).sum();
            assert!((total - 1.0).abs() < 1e-10, "p0={p0} cap={cap} total={total}");
        }
    }

    #[test]
    fn sampler_matches_pmf_chi_square() {
        let p = TruncGeomParams::new(0.35, 12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 100_000;
        let mut counts = vec![0.0; 12];
        for _ in 0..n {
            counts[(p.sample(&mut rng) - 1) as usize] += 1.0;
        }
        let expected: Vec<f64> = (1..=12).map(|q| p.pmf(q) * n as f64).collect();
        let pv = crate::stats::chi_square_pvalue(&counts, &expected, 5.0);
        assert!(pv > 0.01, "chi-square p={pv}");
    }

    #[test]
    fn mle_recovers_p0() {
        let truth = TruncGeomParams::new(0.6, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let samples: Vec<u64> = (0..100_000).map(|_| truth.sample(&mut rng)).collect();
        let fit = fit_tgeom_mle(&samples, 10).unwrap();
        assert!((fit.p0 - 0.6).abs() < 0.02, "fitted {}", fit.p0);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(TruncGeomParams::new(0.0, 5).is_err());
        assert!(TruncGeomParams::new(1.0, 5).is_err());
        assert!(TruncGeomParams::new(0.5, 0).is_err());
        assert!(fit_tgeom_mle(&[], 5).is_err());
        assert!(fit_tgeom_mle(&[7], 5).is_err());
    }
}

use rand::Rng;

use super::DistError;

/// Pareto-type law with density proportional to x^(-exponent) on
/// [x_min, inf). Used for initial capital and inventory bound draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawParams {
    pub exponent: f64,
    pub x_min: f64,
}

impl PowerLawParams {
    pub fn new(exponent: f64, x_min: f64) -> Result<Self, DistError> {
        if exponent <= 1.0 {
            return Err(DistError::BadParam("exponent must be > 1".into()));
        }
        if x_min <= 0.0 {
            return Err(DistError::BadParam("x_min must be > 0".into()));
        }
        Ok(PowerLawParams { exponent, x_min })
    }

    /// Inverse-CDF draw: x_min * (1-u)^(-1/(exponent-1)).
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.x_min * (1.0 - u).powf(-1.0 / (self.exponent - 1.0))
    }

    /// Analytic median: x_min * 2^(1/(exponent-1)).
    pub fn median(&self) -> f64 {
        self.x_min * 2.0f64.powf(1.0 / (self.exponent - 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn configured_exponent_accepted() {
        let p = PowerLawParams::new(2.3, 1.0).unwrap();
        assert_eq!(p.exponent, 2.3);
        assert!(PowerLawParams::new(1.0, 1.0).is_err());
        assert!(PowerLawParams::new(2.3, 0.0).is_err());
    }

    #[test]
    fn sample_median_matches_analytic_value() {
        let p = PowerLawParams::new(2.3, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut xs: Vec<f64> = (0..1_000_000).map(|_| p.sample(&mut rng)).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = xs[xs.len() / 2];
        let want = p.median();
        assert!((median - want).abs() / want < 0.02, "median {median} want {want}");
    }

    #[test]
    fn all_samples_at_least_x_min() {
        let p = PowerLawParams::new(2.5, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            assert!(p.sample(&mut rng) >= 3.0);
        }
    }

    #[test]
    fn hill_estimator_recovers_exponent() {
        let p = PowerLawParams::new(2.3, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let xs: Vec<f64> = (0..1_000_000).map(|_| p.sample(&mut rng)).collect();
        let alpha = crate::stats::hill_estimator(&xs, 0.05).unwrap();
        assert!((alpha - 2.3).abs() < 0.2, "hill {alpha}");
    }
}

use rand::Rng;

use crate::testkit::adaptive_simpson;

use super::DistError;

/// Tsallis q-Gamma law for limit-order sizes, truncated to [q_min, q_max]
/// for sampling. At tsallis_q = 1 it reduces to the Gamma shape
/// (q/alpha)^beta exp(-q/alpha).
#[derive(Debug, Clone)]
pub struct QGammaParams {
    pub alpha: f64,
    pub beta: f64,
    pub tsallis_q: f64,
    pub q_min: f64,
    pub q_max: f64,
    /// Normalization over the full support, computed at construction.
    pub z: f64,
    // inverse-CDF table over [q_min, q_max]
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

const GRID_POINTS: usize = 2048;

impl QGammaParams {
    pub fn new(
        alpha: f64,
        beta: f64,
        tsallis_q: f64,
        q_min: f64,
        q_max: f64,
    ) -> Result<Self, DistError> {
        if alpha <= 0.0 || !alpha.is_finite() {
            return Err(DistError::BadParam("alpha must be > 0".into()));
        }
        if beta <= 0.0 || !beta.is_finite() {
            return Err(DistError::BadParam("beta must be > 0".into()));
        }
        if tsallis_q >= 2.0 {
            return Err(DistError::BadParam("tsallis q must be < 2".into()));
        }
        if q_min < 0.0 || q_max < q_min {
            return Err(DistError::BadParam("need 0 <= q_min <= q_max".into()));
        }
        if tsallis_q > 1.0 {
            // integrability of the power tail q^(beta - 1/(q-1))
            let tail = 1.0 / (tsallis_q - 1.0);
            if beta + 1.0 >= tail {
                return Err(DistError::BadParam(format!(
                    "tsallis q {tsallis_q} makes the density non-normalizable for beta {beta}"
                )));
            }
        }
        if tsallis_q < 1.0 {
            // the bracket 1-(1-q)x/alpha turns negative past alpha/(1-q)
            let support_end = alpha / (1.0 - tsallis_q);
            if q_max > support_end {
                return Err(DistError::BadParam(format!(
                    "q_max {q_max} exceeds the support end {support_end} where the bracket is negative"
                )));
            }
        }

        let mut params = QGammaParams {
            alpha,
            beta,
            tsallis_q,
            q_min,
            q_max,
            z: 1.0,
            grid: Vec::new(),
            cdf: Vec::new(),
        };
        params.z = params.compute_z()?;
        params.build_table();
        Ok(params)
    }

    /// Unnormalized density (q/alpha)^beta [1-(1-q)q/alpha]^(1/(1-q)),
    /// evaluated through log1p for stability near tsallis_q = 1.
    fn kernel(&self, q: f64) -> f64 {
        if q < 0.0 {
            return 0.0;
        }
        if q == 0.0 {
            return if self.beta > 0.0 { 0.0 } else { 1.0 };
        }
        let x = q / self.alpha;
        let one_minus_q = 1.0 - self.tsallis_q;
        let bracket_log = if one_minus_q.abs() < 1e-12 {
            -x
        } else {
            let inner = -one_minus_q * x;
            if inner <= -1.0 {
                return 0.0; // outside support for tsallis_q < 1
            }
            inner.ln_1p() / one_minus_q
        };
        (self.beta * x.ln() + bracket_log).exp()
    }

    fn compute_z(&self) -> Result<f64, DistError> {
        let kernel = |q: f64| self.kernel(q);
        let support_end = if self.tsallis_q < 1.0 {
            self.alpha / (1.0 - self.tsallis_q)
        } else {
            f64::INFINITY
        };
        // integrate in doubling windows so the quadrature resolves the bulk
        // near the mode even when the support is effectively unbounded
        let mut b = (self.alpha * (self.beta + 1.0)).max(1.0).min(support_end);
        let mut z = adaptive_simpson(&kernel, 0.0, b, 1e-13);
        while b < support_end && b < 1e12 {
            let next = (2.0 * b).min(support_end);
            let extra = adaptive_simpson(&kernel, b, next, 1e-13);
            z += extra;
            b = next;
            if extra < 1e-12 * z.max(1e-300) {
                break;
            }
        }
        if !(z.is_finite() && z > 0.0) {
            return Err(DistError::BadParam("normalization is not positive".into()));
        }
        Ok(z)
    }

    fn build_table(&mut self) {
        if self.q_max == self.q_min {
            self.grid = vec![self.q_min];
            self.cdf = vec![1.0];
            return;
        }
        let n = GRID_POINTS;
        let step = (self.q_max - self.q_min) / (n - 1) as f64;
        let mut grid = Vec::with_capacity(n);
        let mut cdf = Vec::with_capacity(n);
        let mut acc = 0.0;
        let mut prev = self.kernel(self.q_min);
        grid.push(self.q_min);
        cdf.push(0.0);
        for i in 1..n {
            let q = self.q_min + step * i as f64;
            let cur = self.kernel(q);
            acc += 0.5 * (prev + cur) * step;
            grid.push(q);
            cdf.push(acc);
            prev = cur;
        }
        let total = acc.max(1e-300);
        for c in cdf.iter_mut() {
            *c /= total;
        }
        self.grid = grid;
        self.cdf = cdf;
    }

    /// Normalized density over the full support.
    pub fn pdf(&self, q: f64) -> f64 {
        self.kernel(q) / self.z
    }

    /// Continuous draw from the law truncated to [q_min, q_max], by inverse
    /// CDF over the tabulated grid.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.grid.len() == 1 {
            return self.grid[0];
        }
        let u: f64 = rng.random();
        let idx = self.cdf.partition_point(|c| *c < u);
        if idx == 0 {
            return self.grid[0];
        }
        if idx >= self.grid.len() {
            return *self.grid.last().unwrap();
        }
        let (c0, c1) = (self.cdf[idx - 1], self.cdf[idx]);
        let (g0, g1) = (self.grid[idx - 1], self.grid[idx]);
        if c1 > c0 {
            g0 + (g1 - g0) * (u - c0) / (c1 - c0)
        } else {
            g0
        }
    }

    /// Integer share count: rounded draw with minimum 1.
    pub fn sample_size<R: Rng>(&self, rng: &mut R) -> u64 {
        (self.sample(rng).round() as i64).max(1) as u64
    }

    /// Mean of the truncated law by quadrature.
    pub fn truncated_mean(&self) -> f64 {
        let mass = adaptive_simpson(&|q| self.kernel(q), self.q_min, self.q_max, 1e-13);
        let first = adaptive_simpson(&|q| q * self.kernel(q), self.q_min, self.q_max, 1e-13);
        first / mass
    }
}

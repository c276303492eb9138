use rand::Rng;

/// Discrete Gaussian over `{-B..=B}` sampled by inverse-CDF lookup.
///
/// Standard deviation is `B/2`; mass beyond the support radius is cut.
#[derive(Debug, Clone)]
pub struct DiscreteGaussian {
    bound: u64,
    cdf: Vec<f64>,
}

impl DiscreteGaussian {
    pub fn new(bound: u64) -> Self {
        if bound == 0 {
            return DiscreteGaussian { bound, cdf: vec![1.0] };
        }
        let sigma = bound as f64 / 2.0;
        let weights: Vec<f64> = (-(bound as i64)..=bound as i64)
            .map(|x| (-((x * x) as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        *cdf.last_mut().unwrap() = 1.0;
        DiscreteGaussian { bound, cdf }
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let u: f64 = rng.gen();
        let idx = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        idx as i64 - self.bound as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn samples_stay_in_support() {
        let g = DiscreteGaussian::new(8);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let xs: Vec<i64> = (0..20_000).map(|_| g.sample(&mut rng)).collect();
        assert!(xs.iter().all(|x| x.abs() <= 8));
        let mean = xs.iter().sum::<i64>() as f64 / xs.len() as f64;
        assert!(mean.abs() < 0.1, "mean {mean}");
        let var = xs.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        // variance of the truncated weights exp(-x^2/32) on -8..=8
        let w: Vec<f64> = (-8..=8).map(|x: i64| (-((x * x) as f64) / 32.0).exp()).collect();
        let expect = (-8..=8i64).zip(&w).map(|(x, w)| (x * x) as f64 * w).sum::<f64>() / w.iter().sum::<f64>();
        assert!((var - expect).abs() / expect < 0.05, "var {var} vs {expect}");
    }

    #[test]
    fn zero_bound_is_zero() {
        let g = DiscreteGaussian::new(0);
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        assert!((0..100).all(|_| g.sample(&mut rng) == 0));
    }
}

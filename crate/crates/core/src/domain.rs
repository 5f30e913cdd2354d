//! Axis-aligned sample domains and sampling configuration.

use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// An axis-aligned box, lo < hi componentwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Domain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Domain> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch(lo.len(), hi.len()));
        }
        if lo.iter().zip(&hi).any(|(&a, &b)| !(a < b)) {
            return Err(Error::Schema(format!(
                "domain must satisfy lo < hi componentwise: {lo:?} vs {hi:?}"
            )));
        }
        Ok(Domain { lo, hi })
    }

    /// The symmetric cube [-a, a]^n.
    pub fn cube(n: usize, a: f64) -> Domain {
        Domain {
            lo: vec![-a; n],
            hi: vec![a; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(&a, &b)| b - a).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&v, (&a, &b))| v >= a && v <= b)
    }

    /// Whether `self` is contained in `other`.
    pub fn subset_of(&self, other: &Domain) -> bool {
        self.lo
            .iter()
            .zip(&other.lo)
            .all(|(&a, &b)| a >= b)
            && self.hi.iter().zip(&other.hi).all(|(&a, &b)| a <= b)
    }

    pub fn sample_into(&self, rng: &mut impl Rng, out: &mut [f64]) {
        for i in 0..self.dim() {
            out[i] = rng.gen_range(self.lo[i]..self.hi[i]);
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.sample_into(rng, &mut x);
        x
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&a, &b)| 0.5 * (a + b))
            .collect()
    }
}

/// Sampling parameters for the seminorm estimators.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleConfig {
    /// Fractional order s, strictly inside (0,1).
    pub s: f64,
    /// Integrability exponent p >= 1.
    pub p: f64,
    /// Pairs per dyadic shell (for the metric seminorm) or x-samples (for the
    /// directional seminorm).
    pub pairs: usize,
    /// Dyadic shells below r0; the innermost shell cuts off at 2^-k_max r0.
    pub shells: usize,
    /// Points on the geometric t-grid of directional seminorms.
    pub t_points: usize,
    pub seed: u64,
    pub r0: f64,
}

impl SampleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::Schema(format!("s must be in (0,1), got {}", self.s)));
        }
        if !(self.p >= 1.0) {
            return Err(Error::Schema(format!("p must be >= 1, got {}", self.p)));
        }
        if self.pairs == 0 || self.shells == 0 || self.t_points == 0 {
            return Err(Error::Schema("counts must be positive".into()));
        }
        if !(self.r0 > 0.0) {
            return Err(Error::Schema(format!("r0 must be positive, got {}", self.r0)));
        }
        Ok(())
    }
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            s: 0.5,
            p: 2.0,
            pairs: 2000,
            shells: 12,
            t_points: 48,
            seed: 0,
            r0: 0.5,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn construction_and_volume() {
        let d = Domain::new(vec![-1.0, 0.0], vec![1.0, 2.0]).unwrap();
        assert_eq!(d.volume(), 4.0);
        assert!(Domain::new(vec![1.0], vec![1.0]).is_err());
        assert!(Domain::new(vec![0.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn containment_and_nesting() {
        let inner = Domain::cube(3, 1.0);
        let outer = Domain::cube(3, 1.2);
        assert!(inner.subset_of(&outer));
        assert!(!outer.subset_of(&inner));
        assert!(inner.contains(&[1.0, -1.0, 0.0]));
        assert!(!inner.contains(&[1.01, 0.0, 0.0]));
    }

    #[test]
    fn samples_land_inside() {
        let d = Domain::new(vec![-2.0, 3.0], vec![-1.0, 5.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert!(d.contains(&d.sample(&mut rng)));
        }
    }

    #[test]
    fn sample_config_validation() {
        assert!(SampleConfig::default().validate().is_ok());
        assert!(SampleConfig { s: 1.0, ..Default::default() }.validate().is_err());
        assert!(SampleConfig { p: 0.5, ..Default::default() }.validate().is_err());
        assert!(SampleConfig { pairs: 0, ..Default::default() }.validate().is_err());
    }
}

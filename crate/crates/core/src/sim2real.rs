//! Transfer aids: command low-pass filtering, per-episode domain
//! randomization and additive Gaussian noise.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// First-order recursive smoother `y_t = α·y_{t-1} + (1-α)·x_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowPassFilter {
    alpha: f64,
    state: Vec<f64>,
}

impl LowPassFilter {
    pub fn new(alpha: f64, dim: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::Config(format!("low-pass coefficient must lie in [0, 1), got {alpha}")));
        }
        Ok(LowPassFilter {
            alpha,
            state: vec![0.0; dim],
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.state.len()
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|s| *s = 0.0);
    }

    /// Filter one command vector in place of the raw one and return it.
    pub fn apply(&mut self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.state.len() {
            return Err(Error::Dimension {
                expected: self.state.len(),
                actual: raw.len(),
            });
        }
        for (y, &x) in self.state.iter_mut().zip(raw) {
            *y = self.alpha * *y + (1.0 - self.alpha) * x;
        }
        Ok(self.state.clone())
    }
}

/// Closed interval `[low, high]`, written as a two-element array in config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Range {
    pub low: f64,
    pub high: f64,
}

impl From<[f64; 2]> for Range {
    fn from([low, high]: [f64; 2]) -> Self {
        Range { low, high }
    }
}

impl From<Range> for [f64; 2] {
    fn from(r: Range) -> Self {
        [r.low, r.high]
    }
}

impl Range {
    pub const fn new(low: f64, high: f64) -> Self {
        Range { low, high }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.low + self.high)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.low && v <= self.high
    }

    pub fn is_valid(&self) -> bool {
        self.low.is_finite() && self.high.is_finite() && self.low <= self.high
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.low == self.high {
            return self.low;
        }
        let u: f64 = rng.random();
        self.low + (self.high - self.low) * u
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomizationRanges {
    /// m/s², magnitude of downward gravity.
    pub gravity: Range,
    /// Multiplier on servo bandwidth, drawn independently for base, arm, hand.
    pub gain_scale: Range,
    /// Control steps before the object is released.
    pub throw_offset: [u32; 2],
    /// Observation noise standard deviation (m).
    pub obs_sigma: Range,
    /// Action noise standard deviation (normalized action units).
    pub act_sigma: Range,
}

impl Default for RandomizationRanges {
    fn default() -> Self {
        RandomizationRanges {
            gravity: Range::new(9.31, 10.31),
            gain_scale: Range::new(0.8, 1.2),
            throw_offset: [0, 12],
            obs_sigma: Range::new(0.0, 0.01),
            act_sigma: Range::new(0.0, 0.02),
        }
    }
}

impl RandomizationRanges {
    pub fn validate(&self) -> Result<()> {
        let ranges = [self.gravity, self.gain_scale, self.obs_sigma, self.act_sigma];
        if ranges.iter().any(|r| !r.is_valid()) || self.throw_offset[0] > self.throw_offset[1] {
            return Err(Error::Config(format!("randomization ranges need low <= high: {self:?}")));
        }
        if self.gravity.low <= 0.0 || self.gain_scale.low <= 0.0 {
            return Err(Error::Config("gravity and gain scale must be positive".into()));
        }
        if self.obs_sigma.low < 0.0 || self.act_sigma.low < 0.0 {
            return Err(Error::Config("noise standard deviations must be >= 0".into()));
        }
        Ok(())
    }
}

/// Servo bandwidth multipliers per actuated component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainScales {
    pub base: f64,
    pub arm: f64,
    pub hand: f64,
}

/// One episode's randomized dynamics and sensing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainParams {
    pub gravity: f64,
    pub gain_scale: GainScales,
    pub throw_offset: u32,
    pub obs_sigma: f64,
    pub act_sigma: f64,
}

/// Independent uniform draw of every field. With `enabled == false` every
/// range collapses to its midpoint and the RNG is not touched.
pub fn sample_env_params<R: Rng + ?Sized>(rng: &mut R, ranges: &RandomizationRanges, enabled: bool) -> DomainParams {
    if !enabled {
        let g = ranges.gain_scale.midpoint();
        return DomainParams {
            gravity: ranges.gravity.midpoint(),
            gain_scale: GainScales { base: g, arm: g, hand: g },
            throw_offset: (ranges.throw_offset[0] + ranges.throw_offset[1]) / 2,
            obs_sigma: ranges.obs_sigma.midpoint(),
            act_sigma: ranges.act_sigma.midpoint(),
        };
    }
    let gravity = ranges.gravity.sample(rng);
    let gain_scale = GainScales {
        base: ranges.gain_scale.sample(rng),
        arm: ranges.gain_scale.sample(rng),
        hand: ranges.gain_scale.sample(rng),
    };
    let [lo, hi] = ranges.throw_offset;
    let throw_offset = if lo == hi { lo } else { rng.random_range(lo..=hi) };
    DomainParams {
        gravity,
        gain_scale,
        throw_offset,
        obs_sigma: ranges.obs_sigma.sample(rng),
        act_sigma: ranges.act_sigma.sample(rng),
    }
}

/// Add zero-mean Gaussian noise with standard deviation `sigma` to every
/// element. `sigma == 0` returns the input unchanged and draws nothing.
pub fn add_noise<R: Rng + ?Sized>(rng: &mut R, v: &[f64], sigma: f64) -> Vec<f64> {
    debug_assert!(sigma >= 0.0);
    if sigma == 0.0 {
        return v.to_vec();
    }
    v.iter()
        .map(|x| {
            let n: f64 = StandardNormal.sample(rng);
            x + sigma * n
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn disabled_filter_is_identity() {
        let mut f = LowPassFilter::new(0.0, 2).unwrap();
        assert_eq!(f.apply(&[0.3, -1.5]).unwrap(), vec![0.3, -1.5]);
        assert_eq!(f.apply(&[2.0, 4.0]).unwrap(), vec![2.0, 4.0]);
    }

    #[test]
    fn geometric_step_response() {
        let mut f = LowPassFilter::new(0.9, 1).unwrap();
        let mut y = 0.0;
        for _ in 0..10 {
            y = f.apply(&[1.0]).unwrap()[0];
        }
        assert!((y - (1.0 - 0.9f64.powi(10))).abs() <= 1e-12);
        assert!((y - 0.6513215599).abs() < 1e-9);
        for _ in 0..1000 {
            y = f.apply(&[1.0]).unwrap()[0];
        }
        assert!((y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn filter_rejects_bad_input() {
        assert!(LowPassFilter::new(1.0, 2).is_err());
        assert!(LowPassFilter::new(-0.1, 2).is_err());
        let mut f = LowPassFilter::new(0.5, 2).unwrap();
        assert!(f.apply(&[1.0]).is_err());
    }

    #[test]
    fn degenerate_ranges_are_exact() {
        let ranges = RandomizationRanges {
            gravity: Range::new(9.7, 9.7),
            gain_scale: Range::new(1.1, 1.1),
            throw_offset: [4, 4],
            obs_sigma: Range::new(0.002, 0.002),
            act_sigma: Range::new(0.0, 0.0),
        };
        let p = sample_env_params(&mut ChaCha8Rng::seed_from_u64(1), &ranges, true);
        assert_eq!(p.gravity, 9.7);
        assert_eq!(p.gain_scale, GainScales { base: 1.1, arm: 1.1, hand: 1.1 });
        assert_eq!(p.throw_offset, 4);
        assert_eq!(p.obs_sigma, 0.002);
        assert_eq!(p.act_sigma, 0.0);
    }

    #[test]
    fn disabled_collapses_to_midpoint() {
        let r = RandomizationRanges::default();
        let p = sample_env_params(&mut ChaCha8Rng::seed_from_u64(1), &r, false);
        assert!((p.gravity - 9.81).abs() < 1e-12);
        assert_eq!(p.gain_scale.arm, 1.0);
        assert_eq!(p.throw_offset, 6);
    }

    #[test]
    fn seeded_sequences_repeat() {
        let r = RandomizationRanges::default();
        let mut a = ChaCha8Rng::seed_from_u64(99);
        let mut b = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            assert_eq!(sample_env_params(&mut a, &r, true), sample_env_params(&mut b, &r, true));
        }
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(add_noise(&mut a, &[1.0; 8], 0.3), add_noise(&mut b, &[1.0; 8], 0.3));
    }

    #[test]
    fn zero_sigma_noise_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v = [0.1, -0.2, 0.3];
        assert_eq!(add_noise(&mut rng, &v, 0.0), v.to_vec());
    }

    #[test]
    fn validation() {
        assert!(RandomizationRanges::default().validate().is_ok());
        let bad = RandomizationRanges {
            obs_sigma: Range::new(-0.1, 0.1),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = RandomizationRanges {
            throw_offset: [5, 2],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}

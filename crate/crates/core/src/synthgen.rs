//! Seeded piecewise-stationary generators.
//!
//! Randomness comes from ChaCha8 with a fixed stream per concern, so the
//! output depends only on the config: stream 0 draws changepoint
//! positions, stream 1 segment parameters, stream 2 the samples.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{LabelSet, TimeSeries};

const STREAM_POSITIONS: u64 = 0;
const STREAM_PARAMS: u64 = 1;
const STREAM_SAMPLES: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    /// Exponential samples with a per-segment rate.
    #[default]
    ExponentialSegments,
    /// Constant per-segment mean plus Gaussian noise.
    StepMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub length: usize,
    pub changepoints: usize,
    pub seed: u64,
    pub kind: SynthKind,
    /// Rates (exponential) or means (step) are drawn uniformly from here.
    pub param_range: (f64, f64),
    /// Noise standard deviation for step-mean series.
    pub noise_sigma: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            length: 2000,
            changepoints: 4,
            seed: 0,
            kind: SynthKind::ExponentialSegments,
            param_range: (0.5, 5.0),
            noise_sigma: 0.1,
        }
    }
}

impl SynthConfig {
    /// Shortest segment the generator will produce.
    pub fn min_segment(&self) -> usize {
        if self.changepoints == 0 {
            return 2;
        }
        (self.length / (10 * self.changepoints)).max(2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.length < 2 {
            return Err(Error::InvalidConfig("length must be >= 2".into()));
        }
        if self.changepoints >= self.length {
            return Err(Error::InvalidConfig(format!(
                "{} changepoints do not fit in length {}",
                self.changepoints, self.length
            )));
        }
        let (lo, hi) = self.param_range;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "param_range must satisfy 0 < low < high, got ({lo}, {hi})"
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidConfig("noise_sigma must be >= 0".into()));
        }
        let m = self.min_segment();
        if (self.changepoints + 1) * m > self.length {
            return Err(Error::InvalidConfig(format!(
                "{} changepoints with minimum segment {m} need length >= {}, got {}",
                self.changepoints,
                (self.changepoints + 1) * m,
                self.length
            )));
        }
        Ok(())
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Uniform over all placements with every segment at least `m` long.
///
/// Segment lengths are `m` plus a composition of the slack into `k + 1`
/// nonnegative parts; those compositions are in bijection with `k`-subsets
/// of `0..slack + k`, which Floyd's algorithm samples uniformly.
fn positions(len: usize, k: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = len - (k + 1) * m + k;
    let mut chosen = BTreeSet::new();
    for j in n - k..n {
        let t = rng.random_range(0..=j);
        if !chosen.insert(t) {
            chosen.insert(j);
        }
    }
    chosen
        .into_iter()
        .enumerate()
        .map(|(i, c)| c + (i + 1) * (m - 1) + 1)
        .collect()
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Returns the series and its ground-truth breakpoints; the per-segment
/// parameters are available through [`segment_params`].
pub fn generate(cfg: &SynthConfig) -> Result<(TimeSeries, LabelSet)> {
    let (series, labels, _) = generate_with_params(cfg)?;
    Ok((series, labels))
}

/// Per-segment rates or means, in segment order.
pub fn segment_params(cfg: &SynthConfig) -> Result<Vec<f64>> {
    Ok(generate_with_params(cfg)?.2)
}

fn generate_with_params(cfg: &SynthConfig) -> Result<(TimeSeries, LabelSet, Vec<f64>)> {
    cfg.validate()?;
    let k = cfg.changepoints;
    let bps = positions(cfg.length, k, cfg.min_segment(), &mut rng(cfg.seed, STREAM_POSITIONS));

    let mut prng = rng(cfg.seed, STREAM_PARAMS);
    let (lo, hi) = cfg.param_range;
    let params: Vec<f64> = (0..=k).map(|_| prng.random_range(lo..hi)).collect();

    let mut srng = rng(cfg.seed, STREAM_SAMPLES);
    let mut values = Vec::with_capacity(cfg.length);
    let mut seg = 0;
    for t in 0..cfg.length {
        if seg < k && t == bps[seg] {
            seg += 1;
        }
        let p = params[seg];
        let x = match cfg.kind {
            SynthKind::ExponentialSegments => -(1.0 - srng.random::<f64>()).ln() / p,
            SynthKind::StepMean => p + cfg.noise_sigma * standard_normal(&mut srng),
        };
        values.push(x);
    }
    let series = TimeSeries::univariate(values)?.with_origin("synthetic");
    let labels = LabelSet::new(bps, cfg.length)?;
    Ok((series, labels, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::true_segment_sizes;
    use proptest::prelude::*;

    #[test]
    fn no_changepoints() {
        let cfg = SynthConfig {
            changepoints: 0,
            length: 100,
            ..Default::default()
        };
        let (s, l) = generate(&cfg).unwrap();
        assert_eq!(s.len(), 100);
        assert!(l.is_empty());
        assert_eq!(segment_params(&cfg).unwrap().len(), 1);
    }

    #[test]
    fn deterministic() {
        let cfg = SynthConfig {
            seed: 99,
            kind: SynthKind::StepMean,
            ..Default::default()
        };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a, b);
        let c = generate(&SynthConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn too_many_changepoints() {
        let cfg = SynthConfig {
            length: 2000,
            changepoints: 1999,
            ..Default::default()
        };
        assert!(matches!(generate(&cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn exponential_segment_means() {
        let cfg = SynthConfig {
            length: 10_000,
            changepoints: 9,
            seed: 5,
            ..Default::default()
        };
        let (s, l) = generate(&cfg).unwrap();
        let rates = segment_params(&cfg).unwrap();
        let mut start = 0;
        for (i, size) in true_segment_sizes(&l, s.len()).into_iter().enumerate() {
            let seg = &s.channel(0)[start..start + size];
            let mean = seg.iter().sum::<f64>() / size as f64;
            // Exponential(λ) has mean and standard deviation 1/λ.
            let se = 1.0 / rates[i] / (size as f64).sqrt();
            assert!((mean - 1.0 / rates[i]).abs() < 3.0 * se, "segment {i}");
            start += size;
        }
    }

    #[test]
    fn placements_are_uniform() {
        // T = 6, k = 1, m = 2: breakpoints 2, 3, 4 equally likely.
        let mut counts = [0usize; 7];
        let mut r = rng(1, 0);
        for _ in 0..30_000 {
            counts[positions(6, 1, 2, &mut r)[0]] += 1;
        }
        assert_eq!(counts[0] + counts[1] + counts[5] + counts[6], 0);
        for c in &counts[2..5] {
            assert!((*c as f64 - 10_000.0).abs() < 400.0, "{counts:?}");
        }
    }

    proptest! {
        #[test]
        fn segments_respect_minimum(len in 2usize..400, k in 0usize..20, seed: u64) {
            let cfg = SynthConfig { length: len, changepoints: k, seed, ..Default::default() };
            prop_assume!(cfg.validate().is_ok());
            let (s, l) = generate(&cfg).unwrap();
            prop_assert_eq!(l.len(), k);
            let sizes = true_segment_sizes(&l, s.len());
            prop_assert_eq!(sizes.iter().sum::<usize>(), len);
            prop_assert!(sizes.iter().all(|&n| n >= cfg.min_segment()));
        }
    }
}

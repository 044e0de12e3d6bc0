//! Penalised exact segmentation with PELT pruning.
//!
//! Segment costs are twice the negative maximised log-likelihood, dropping
//! terms that depend only on the data (they cancel across segmentations).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{DetectionResult, TimeSeries};

/// Variance floor for the mean/variance cost.
const MIN_VARIANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeltCost {
    /// Gaussian mean shift with unit variance: `sum (x - mean)^2`.
    NormalMean,
    /// Gaussian mean and variance shift: `n (ln(2 pi var) + 1)`.
    NormalMeanVariance,
    /// Exponential rate shift: `2 n (ln mean + 1)`. Needs positive data.
    Exponential,
    /// Poisson rate shift: `2 n mean - 2 sum(x) ln mean`. Needs counts.
    Poisson,
}

impl PeltCost {
    pub fn name(self) -> &'static str {
        match self {
            PeltCost::NormalMean => "normal_mean",
            PeltCost::NormalMeanVariance => "normal_mean_variance",
            PeltCost::Exponential => "exponential",
            PeltCost::Poisson => "poisson",
        }
    }

    /// Free parameters fitted per segment.
    pub fn params_per_segment(self) -> usize {
        match self {
            PeltCost::NormalMeanVariance => 2,
            _ => 1,
        }
    }

    fn min_segment(self) -> usize {
        match self {
            PeltCost::NormalMeanVariance => 2,
            _ => 1,
        }
    }

    fn check_domain(self, data: &[f64]) -> Result<()> {
        let bad = match self {
            PeltCost::Exponential => data.iter().position(|&x| x <= 0.0),
            PeltCost::Poisson => data.iter().position(|&x| x < 0.0 || x.fract() != 0.0),
            _ => None,
        };
        match bad {
            Some(i) => Err(Error::Domain {
                cost: self.name(),
                reason: format!("value {} at index {i}", data[i]),
            }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    Value(f64),
    /// `p ln T` with `p` the parameters per segment of the cost.
    Bic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PeltConfig {
    pub cost: PeltCost,
    pub penalty: Penalty,
    pub min_segment: usize,
}

impl Default for PeltConfig {
    fn default() -> Self {
        Self::new(PeltCost::NormalMean)
    }
}

impl PeltConfig {
    pub fn new(cost: PeltCost) -> Self {
        Self {
            cost,
            penalty: Penalty::Bic,
            min_segment: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Penalty::Value(b) = self.penalty {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::InvalidConfig(format!("penalty must be > 0, got {b}")));
            }
        }
        if self.min_segment == 0 {
            return Err(Error::InvalidConfig("min_segment must be >= 1".into()));
        }
        Ok(())
    }

    pub fn resolved_penalty(&self, len: usize) -> f64 {
        match self.penalty {
            Penalty::Value(b) => b,
            Penalty::Bic => self.cost.params_per_segment() as f64 * (len as f64).ln(),
        }
    }

    /// Minimum segment length after the cost's own lower bound.
    pub fn effective_min_segment(&self) -> usize {
        self.min_segment.max(self.cost.min_segment())
    }
}

/// Running sum carrying its rounding error, so differences of prefixes stay
/// accurate even when the segment is tiny relative to the prefix.
#[derive(Clone, Copy, Default)]
struct Compensated {
    hi: f64,
    lo: f64,
}

impl Compensated {
    fn add(self, x: f64, x_err: f64) -> Self {
        let hi = self.hi + x;
        let bb = hi - self.hi;
        let err = (self.hi - (hi - bb)) + (x - bb);
        Self {
            hi,
            lo: self.lo + err + x_err,
        }
    }

    fn minus(self, other: Self) -> f64 {
        (self.hi - other.hi) + (self.lo - other.lo)
    }
}

/// Prefix sums giving O(1) segment costs on `[start, end)`.
pub(crate) struct SegmentCost {
    cost: PeltCost,
    sum: Vec<Compensated>,
    sum_sq: Vec<Compensated>,
}

impl SegmentCost {
    pub(crate) fn new(cost: PeltCost, data: &[f64]) -> Self {
        // The Gaussian costs are shift invariant; centring limits
        // cancellation in `sum_sq - sum^2 / n`.
        let shift = match cost {
            PeltCost::NormalMean | PeltCost::NormalMeanVariance if !data.is_empty() => {
                data.iter().sum::<f64>() / data.len() as f64
            }
            _ => 0.0,
        };
        let mut sum = Vec::with_capacity(data.len() + 1);
        let mut sum_sq = Vec::with_capacity(data.len() + 1);
        let (mut s, mut q) = (Compensated::default(), Compensated::default());
        sum.push(s);
        sum_sq.push(q);
        for &x in data {
            let x = x - shift;
            let sq = x * x;
            s = s.add(x, 0.0);
            q = q.add(sq, x.mul_add(x, -sq));
            sum.push(s);
            sum_sq.push(q);
        }
        Self { cost, sum, sum_sq }
    }

    pub(crate) fn eval(&self, start: usize, end: usize) -> f64 {
        let n = (end - start) as f64;
        let s = self.sum[end].minus(self.sum[start]);
        match self.cost {
            PeltCost::NormalMean => {
                let q = self.sum_sq[end].minus(self.sum_sq[start]);
                (q - s * s / n).max(0.0)
            }
            PeltCost::NormalMeanVariance => {
                let q = self.sum_sq[end].minus(self.sum_sq[start]);
                let mean = s / n;
                let var = (q / n - mean * mean).max(MIN_VARIANCE);
                n * ((2.0 * std::f64::consts::PI * var).ln() + 1.0)
            }
            PeltCost::Exponential => 2.0 * n * ((s / n).ln() + 1.0),
            PeltCost::Poisson => {
                if s <= 0.0 {
                    0.0
                } else {
                    2.0 * s - 2.0 * s * (s / n).ln()
                }
            }
        }
    }
}

/// Changepoints and the optimal penalised cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub changepoints: Vec<usize>,
    pub cost: f64,
}

/// Minimise `sum segment_cost + penalty * #changepoints` exactly.
pub fn pelt(data: &[f64], cfg: &PeltConfig) -> Result<Segmentation> {
    cfg.validate()?;
    cfg.cost.check_domain(data)?;
    let n = data.len();
    let m = cfg.effective_min_segment();
    let beta = cfg.resolved_penalty(n);
    let cost = SegmentCost::new(cfg.cost, data);

    if n < m {
        return Ok(Segmentation {
            changepoints: vec![],
            cost: if n == 0 { 0.0 } else { cost.eval(0, n) },
        });
    }

    // best[t]: optimal penalised cost of data[..t] (each segment adds beta,
    // so best[0] = -beta cancels the first one).
    let mut best = vec![f64::INFINITY; n + 1];
    let mut last = vec![0usize; n + 1];
    best[0] = -beta;

    let mut candidates: Vec<usize> = vec![0];
    // Candidates found dominated at time t stay usable until t + m, since
    // a split at t cannot serve endings closer than m samples.
    let mut pending: Vec<(usize, usize)> = Vec::new();

    for t in m..=n {
        let mut f_t = f64::INFINITY;
        let mut arg = 0;
        let mut evaluated: Vec<(usize, f64)> = Vec::with_capacity(candidates.len());
        for &tau in &candidates {
            if t - tau < m {
                continue;
            }
            let partial = best[tau] + cost.eval(tau, t);
            evaluated.push((tau, partial));
            let v = partial + beta;
            if v < f_t {
                f_t = v;
                arg = tau;
            }
        }
        best[t] = f_t;
        last[t] = arg;

        let slack = 1e-10 * (1.0 + f_t.abs());
        for (tau, partial) in evaluated {
            if partial > f_t + slack {
                pending.push((t + m, tau));
            }
        }
        let mut drop: Vec<usize> = Vec::new();
        pending.retain(|&(at, tau)| {
            if at <= t + 1 {
                drop.push(tau);
                false
            } else {
                true
            }
        });
        if !drop.is_empty() {
            candidates.retain(|c| !drop.contains(c));
        }
        if t + m <= n {
            candidates.push(t);
        }
    }

    Ok(Segmentation {
        changepoints: backtrack(&last, n),
        cost: best[n],
    })
}

fn backtrack(last: &[usize], n: usize) -> Vec<usize> {
    let mut cps = Vec::new();
    let mut t = n;
    while t > 0 {
        let tau = last[t];
        if tau > 0 {
            cps.push(tau);
        }
        t = tau;
    }
    cps.reverse();
    cps
}

/// Unpruned optimal partitioning over every admissible last changepoint.
pub fn optimal_partitioning(data: &[f64], cfg: &PeltConfig) -> Result<Segmentation> {
    cfg.validate()?;
    cfg.cost.check_domain(data)?;
    let n = data.len();
    let m = cfg.effective_min_segment();
    let beta = cfg.resolved_penalty(n);
    let cost = SegmentCost::new(cfg.cost, data);
    if n < m {
        return Ok(Segmentation {
            changepoints: vec![],
            cost: if n == 0 { 0.0 } else { cost.eval(0, n) },
        });
    }
    let mut best = vec![f64::INFINITY; n + 1];
    let mut last = vec![0usize; n + 1];
    best[0] = -beta;
    for t in m..=n {
        for tau in 0..=t - m {
            if tau != 0 && tau < m {
                continue;
            }
            let v = best[tau] + cost.eval(tau, t) + beta;
            if v < best[t] {
                best[t] = v;
                last[t] = tau;
            }
        }
    }
    Ok(Segmentation {
        changepoints: backtrack(&last, n),
        cost: best[n],
    })
}

/// PELT on a series; multichannel input is reduced by the per-timestamp
/// L2 norm.
pub fn pelt_segment(series: &TimeSeries, cfg: &PeltConfig) -> Result<DetectionResult> {
    let data = series.reduce_l2();
    let seg = pelt(&data, cfg)?;
    let id = crate::detector::detector_id(&format!("pelt_{}", cfg.cost.name()), cfg);
    DetectionResult::new(id, seg.changepoints, series.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
        let u1: f64 = 1.0 - rng.random::<f64>();
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    #[test]
    fn constant_series_no_changes() {
        let s = TimeSeries::univariate(vec![3.0; 100]).unwrap();
        for cost in [PeltCost::NormalMean, PeltCost::Exponential, PeltCost::Poisson] {
            let r = pelt_segment(&s, &PeltConfig::new(cost)).unwrap();
            assert!(r.breakpoints.is_empty(), "{cost:?}");
        }
    }

    #[test]
    fn single_mean_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let data: Vec<f64> = (0..100)
            .map(|i| if i < 50 { 0.0 } else { 10.0 } + gaussian(&mut rng))
            .collect();
        // BIC alone splits off short runs of same-signed noise here.
        let cfg = PeltConfig {
            penalty: Penalty::Value(20.0),
            ..PeltConfig::new(PeltCost::NormalMean)
        };
        let p = pelt(&data, &cfg).unwrap();
        let o = optimal_partitioning(&data, &cfg).unwrap();
        assert_eq!(p, o);
        assert_eq!(p.changepoints, vec![50]);
    }

    #[test]
    fn domain_errors() {
        let cfg = PeltConfig::new(PeltCost::Exponential);
        assert!(matches!(pelt(&[1.0, 0.0, 2.0], &cfg), Err(Error::Domain { .. })));
        let cfg = PeltConfig::new(PeltCost::Poisson);
        assert!(matches!(pelt(&[1.0, 2.5], &cfg), Err(Error::Domain { .. })));
        let cfg = PeltConfig {
            penalty: Penalty::Value(0.0),
            ..PeltConfig::new(PeltCost::NormalMean)
        };
        assert!(pelt(&[1.0, 2.0], &cfg).is_err());
    }

    #[test]
    fn bic_penalty() {
        let cfg = PeltConfig::new(PeltCost::NormalMeanVariance);
        assert!((cfg.resolved_penalty(100) - 2.0 * 100f64.ln()).abs() < 1e-12);
        assert_eq!(PeltConfig::new(PeltCost::Poisson).resolved_penalty(1), 0.0);
    }

    #[test]
    fn matches_unpruned_with_min_segment() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for trial in 0..50 {
            let n = rng.random_range(2..120);
            let data: Vec<f64> = (0..n)
                .map(|i| (i / 15) as f64 * 2.0 + gaussian(&mut rng))
                .collect();
            let cfg = PeltConfig {
                cost: PeltCost::NormalMean,
                penalty: Penalty::Value(rng.random_range(0.5..15.0)),
                min_segment: rng.random_range(1..8),
            };
            let p = pelt(&data, &cfg).unwrap();
            let o = optimal_partitioning(&data, &cfg).unwrap();
            assert_eq!(p.changepoints, o.changepoints, "trial {trial}");
            for w in p.changepoints.windows(2) {
                assert!(w[1] - w[0] >= cfg.min_segment);
            }
        }
    }

    #[test]
    fn larger_penalty_never_adds_changepoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<f64> = (0..150)
            .map(|i| ((i / 20) % 3) as f64 + 0.7 * gaussian(&mut rng))
            .collect();
        let mut prev = usize::MAX;
        for beta in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0] {
            let cfg = PeltConfig {
                cost: PeltCost::NormalMean,
                penalty: Penalty::Value(beta),
                min_segment: 1,
            };
            let k = pelt(&data, &cfg).unwrap().changepoints.len();
            assert!(k <= prev);
            prev = k;
        }
    }
}

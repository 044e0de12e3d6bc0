//! Window stacking and min/max scaling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{true_segment_sizes, LabelSet, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub window_size: usize,
    pub stride: usize,
}

impl WindowConfig {
    pub fn new(window_size: usize, stride: usize) -> Result<Self> {
        if window_size == 0 {
            return Err(Error::InvalidConfig("window_size must be >= 1".into()));
        }
        if stride == 0 || stride > window_size {
            return Err(Error::InvalidConfig(format!(
                "stride must be in 1..={window_size}, got {stride}"
            )));
        }
        Ok(Self {
            window_size,
            stride,
        })
    }

    /// Half-overlapping windows: stride is `window_size / 2` rounded up.
    pub fn half_overlap(window_size: usize) -> Result<Self> {
        Self::new(window_size, window_size.div_ceil(2).max(1))
    }

    /// Number of full windows that fit in `len` samples.
    pub fn window_count(&self, len: usize) -> usize {
        if self.window_size > len {
            0
        } else {
            (len - self.window_size) / self.stride + 1
        }
    }

    /// Original-series index of the boundary between window `i` and
    /// window `i + 1` (0-based): the midpoint between the two window
    /// centres, rounded down.
    pub fn boundary(&self, i: usize) -> usize {
        ((2 * i + 1) * self.stride + self.window_size) / 2
    }
}

/// Per-channel extrema used to map samples into `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalingParams {
    /// Constant channels map to 0.5.
    pub fn scale(&self, channel: usize, x: f64) -> f64 {
        let (lo, hi) = (self.min[channel], self.max[channel]);
        if hi > lo {
            ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
        } else {
            0.5
        }
    }

    pub fn unscale(&self, channel: usize, y: f64) -> f64 {
        let (lo, hi) = (self.min[channel], self.max[channel]);
        if hi > lo {
            lo + y * (hi - lo)
        } else {
            lo
        }
    }
}

pub fn fit_scaler(series: &TimeSeries) -> ScalingParams {
    let (min, max) = (0..series.channels())
        .map(|c| {
            series
                .channel(c)
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                })
        })
        .unzip();
    ScalingParams { min, max }
}

/// Scaled, stacked window vectors `s_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSeries {
    pub vectors: Vec<Vec<f64>>,
    /// `boundary_timestamps[i]` separates window `i` from window `i + 1`.
    pub boundary_timestamps: Vec<usize>,
    pub config: WindowConfig,
    pub scaling: ScalingParams,
}

impl WindowedSeries {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    /// First sample covered by window `i`.
    pub fn window_start(&self, i: usize) -> usize {
        i * self.config.stride
    }
}

/// Cut the series into full windows. Each vector lists all samples of
/// channel 0, then channel 1, and so on. Trailing samples that do not
/// fill a window are dropped.
pub fn segment(
    series: &TimeSeries,
    config: WindowConfig,
    scaling: &ScalingParams,
) -> Result<WindowedSeries> {
    let n_w = config.window_size;
    if n_w > series.len() {
        return Err(Error::InvalidConfig(format!(
            "window size {n_w} exceeds series length {}",
            series.len()
        )));
    }
    if scaling.min.len() != series.channels() {
        return Err(Error::DimensionMismatch {
            expected: series.channels(),
            actual: scaling.min.len(),
        });
    }
    let m = config.window_count(series.len());
    let vectors = (0..m)
        .map(|i| {
            let start = i * config.stride;
            let mut v = Vec::with_capacity(series.channels() * n_w);
            for c in 0..series.channels() {
                v.extend(
                    series.channel(c)[start..start + n_w]
                        .iter()
                        .map(|&x| scaling.scale(c, x)),
                );
            }
            v
        })
        .collect();
    let boundary_timestamps = (0..m.saturating_sub(1)).map(|i| config.boundary(i)).collect();
    Ok(WindowedSeries {
        vectors,
        boundary_timestamps,
        config,
        scaling: scaling.clone(),
    })
}

/// Window size at which the empirical CDF of true segment sizes reaches
/// 0.1 (nearest-rank), clamped to `[2, len]`.
pub fn suggest_window_size(labels: &LabelSet, len: usize) -> Result<usize> {
    let mut sizes = true_segment_sizes(labels, len);
    if sizes.len() < 2 {
        return Err(Error::InvalidInput(
            "window heuristic needs at least two segments".into(),
        ));
    }
    sizes.sort_unstable();
    let rank = sizes.len().div_ceil(10).max(1);
    Ok(sizes[rank - 1].clamp(2, len.max(2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scaler_extrema() {
        let s = TimeSeries::univariate(vec![0.0, 5.0, 10.0]).unwrap();
        let p = fit_scaler(&s);
        assert_eq!((p.min[0], p.max[0]), (0.0, 10.0));

        let s = TimeSeries::univariate(vec![3.0, 3.0, 3.0]).unwrap();
        let p = fit_scaler(&s);
        assert_eq!((p.min[0], p.max[0]), (3.0, 3.0));
        assert_eq!(p.scale(0, 3.0), 0.5);

        let s = TimeSeries::from_channels(vec![vec![0.0, 1.0], vec![-2.0, 2.0]]).unwrap();
        let p = fit_scaler(&s);
        assert_eq!(p.min, vec![0.0, -2.0]);
        assert_eq!(p.max, vec![1.0, 2.0]);
    }

    #[test]
    fn non_overlapping_windows() {
        let s = TimeSeries::univariate(vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]).unwrap();
        let w = segment(&s, WindowConfig::new(2, 2).unwrap(), &fit_scaler(&s)).unwrap();
        assert_eq!(w.vectors, vec![vec![0.0, 0.2], vec![0.4, 0.6], vec![0.8, 1.0]]);
        // Disjoint windows: the boundary is the first sample of the next window.
        assert_eq!(w.boundary_timestamps, vec![2, 4]);
    }

    #[test]
    fn overlapping_count_and_dim() {
        let s = TimeSeries::univariate(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let w = segment(&s, WindowConfig::new(2, 1).unwrap(), &fit_scaler(&s)).unwrap();
        assert_eq!(w.len(), 3);

        let s = TimeSeries::from_channels(vec![vec![0.0; 10], vec![1.0; 10]]).unwrap();
        let w = segment(&s, WindowConfig::new(3, 3).unwrap(), &fit_scaler(&s)).unwrap();
        assert_eq!(w.dim(), 6);
    }

    #[test]
    fn channel_major_layout() {
        let s = TimeSeries::from_channels(vec![vec![0.0, 1.0, 2.0], vec![10.0, 20.0, 30.0]])
            .unwrap();
        let w = segment(&s, WindowConfig::new(2, 1).unwrap(), &fit_scaler(&s)).unwrap();
        assert_eq!(w.vectors[1], vec![0.5, 1.0, 0.5, 1.0]);
    }

    #[test]
    fn window_too_large() {
        let s = TimeSeries::univariate(vec![1.0, 2.0, 3.0]).unwrap();
        let p = fit_scaler(&s);
        assert!(segment(&s, WindowConfig::new(4, 1).unwrap(), &p).is_err());
        assert!(WindowConfig::new(3, 4).is_err());
        assert!(WindowConfig::new(0, 1).is_err());
    }

    #[test]
    fn half_overlap_default() {
        assert_eq!(WindowConfig::half_overlap(50).unwrap().stride, 25);
        assert_eq!(WindowConfig::half_overlap(5).unwrap().stride, 3);
        assert_eq!(WindowConfig::half_overlap(1).unwrap().stride, 1);
    }

    #[test]
    fn suggestion() {
        let sizes = [10, 20, 30, 40, 50, 60, 70, 80, 90, 100];
        let mut acc = 0;
        let bps: Vec<usize> = sizes[..9].iter().map(|s| {
            acc += s;
            acc
        }).collect();
        let len = sizes.iter().sum();
        let l = LabelSet::new(bps, len).unwrap();
        assert_eq!(suggest_window_size(&l, len).unwrap(), 10);

        let l = LabelSet::new(vec![25, 50, 75], 100).unwrap();
        assert_eq!(suggest_window_size(&l, 100).unwrap(), 25);

        let l = LabelSet::new(vec![], 100).unwrap();
        assert!(suggest_window_size(&l, 100).is_err());

        let l = LabelSet::new(vec![1, 2, 3], 100).unwrap();
        assert_eq!(suggest_window_size(&l, 100).unwrap(), 2);
    }

    proptest! {
        #[test]
        fn window_count_closed_form(len in 1usize..400, a in 1usize..400, b in 1usize..400) {
            let n_w = a.min(len);
            let stride = b.min(n_w);
            let cfg = WindowConfig::new(n_w, stride).unwrap();
            let brute = (0..).take_while(|i| i * stride + n_w <= len).count();
            prop_assert_eq!(cfg.window_count(len), brute);
            prop_assert_eq!(cfg.window_count(len), (len - n_w) / stride + 1);
        }

        #[test]
        fn scaled_range_and_inverse(
            values in proptest::collection::vec(-1e3f64..1e3, 4..60),
            n_w in 1usize..4,
        ) {
            let s = TimeSeries::univariate(values.clone()).unwrap();
            let p = fit_scaler(&s);
            let cfg = WindowConfig::half_overlap(n_w).unwrap();
            let w = segment(&s, cfg, &p).unwrap();
            for (i, v) in w.vectors.iter().enumerate() {
                for (k, &y) in v.iter().enumerate() {
                    prop_assert!((0.0..=1.0).contains(&y));
                    if p.max[0] > p.min[0] {
                        let orig = values[w.window_start(i) + k];
                        let back = p.unscale(0, y);
                        let ulp = (p.max[0] - p.min[0]).abs() * f64::EPSILON * 4.0;
                        prop_assert!((back - orig).abs() <= ulp, "{back} vs {orig}");
                    }
                }
            }
        }
    }
}

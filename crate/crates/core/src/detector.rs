//! Distance curve between consecutive window features, peak picking, and
//! the end-to-end autoencoder detector.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autoencoder::{train_stack, AutoencoderStack, StackConfig};
use crate::error::{Error, Result};
use crate::series::{DetectionResult, TimeSeries};
use crate::windowing::{fit_scaler, segment, WindowConfig, WindowedSeries};

/// `values[i]` compares windows `i` and `i + 1`; `boundary_timestamps[i]`
/// is where that pair meets in the original series.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DistanceCurve {
    #[serde(rename = "timestamps")]
    pub boundary_timestamps: Vec<usize>,
    pub values: Vec<f64>,
}

impl DistanceCurve {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Two columns, `timestamp,distance`, with a header row.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("timestamp,distance\n");
        for (t, v) in self.boundary_timestamps.iter().zip(&self.values) {
            out.push_str(&format!("{t},{v}\n"));
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Centred moving average of odd `width`; the window shrinks at the ends.
    pub fn smoothed(&self, width: usize) -> Result<Self> {
        if width.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "smoothing width must be odd, got {width}"
            )));
        }
        let half = width / 2;
        let n = self.values.len();
        let values = (0..n)
            .map(|i| {
                let lo = i.saturating_sub(half);
                let hi = (i + half + 1).min(n);
                self.values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
            })
            .collect();
        Ok(Self {
            boundary_timestamps: self.boundary_timestamps.clone(),
            values,
        })
    }
}

/// Euclidean distance normalised by the geometric mean of the two norms:
/// `|a - b| / sqrt(|a| |b|)`.
pub fn feature_distance(current: &[f64], previous: &[f64]) -> Result<f64> {
    if current.len() != previous.len() {
        return Err(Error::DimensionMismatch {
            expected: previous.len(),
            actual: current.len(),
        });
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (na, nb) = (norm(current), norm(previous));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InvalidInput("feature vector has zero norm".into()));
    }
    let diff = current
        .iter()
        .zip(previous)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(diff / (na * nb).sqrt())
}

pub fn distance_curve(stack: &AutoencoderStack, windows: &WindowedSeries) -> Result<DistanceCurve> {
    if !windows.is_empty() && windows.dim() != stack.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: stack.input_dim(),
            actual: windows.dim(),
        });
    }
    let features: Vec<Vec<f64>> = windows
        .vectors
        .par_iter()
        .map(|s| stack.encode(s))
        .collect::<Result<_>>()?;
    let values = features
        .windows(2)
        .map(|pair| feature_distance(&pair[1], &pair[0]))
        .collect::<Result<Vec<_>>>()?;
    Ok(DistanceCurve {
        boundary_timestamps: windows.boundary_timestamps.clone(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PeakConfig {
    /// Minimum prominence as a fraction of the curve maximum.
    pub min_prominence: f64,
    /// Minimum index distance between kept peaks; the higher peak wins.
    pub min_separation: usize,
    /// Odd moving-average width applied before peak picking; 0 or 1 disables.
    pub smoothing_width: usize,
}

impl Default for PeakConfig {
    fn default() -> Self {
        Self {
            min_prominence: 0.05,
            min_separation: 1,
            smoothing_width: 0,
        }
    }
}

impl PeakConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.min_prominence) {
            return Err(Error::InvalidConfig(format!(
                "min_prominence must be in [0, 1], got {}",
                self.min_prominence
            )));
        }
        if self.smoothing_width > 1 && self.smoothing_width.is_multiple_of(2) {
            return Err(Error::InvalidConfig("smoothing_width must be odd".into()));
        }
        Ok(())
    }
}

/// Strict local maxima. A plateau counts once, at its centre (rounded
/// down), when it is strictly higher than both neighbours. Runs touching
/// either end of the curve are never peaks.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if values[i] > values[i - 1] {
            let mut end = i;
            while end + 1 < n && values[end + 1] == values[i] {
                end += 1;
            }
            if end + 1 < n && values[end + 1] < values[i] {
                peaks.push((i + end) / 2);
            }
            i = end + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

/// Height of a peak above the higher of the two lowest points separating it
/// from taller terrain (or the curve ends).
pub fn prominence(values: &[f64], peak: usize) -> f64 {
    let h = values[peak];
    let mut left_min = h;
    for &v in values[..peak].iter().rev() {
        if v > h {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = h;
    for &v in &values[peak + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

pub fn find_peaks(curve: &DistanceCurve, cfg: &PeakConfig) -> Vec<usize> {
    let values = &curve.values;
    let max = values.iter().cloned().fold(0.0_f64, f64::max);
    let floor = cfg.min_prominence * max;
    let mut peaks: Vec<usize> = local_maxima(values)
        .into_iter()
        .filter(|&p| prominence(values, p) >= floor)
        .collect();

    if cfg.min_separation > 1 && peaks.len() > 1 {
        let mut by_height = peaks.clone();
        by_height.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        let mut kept: Vec<usize> = Vec::new();
        for p in by_height {
            if kept.iter().all(|&q| p.abs_diff(q) >= cfg.min_separation) {
                kept.push(p);
            }
        }
        kept.sort_unstable();
        peaks = kept;
    }
    peaks
}

/// Tag naming the method and a digest of its configuration.
pub fn detector_id(method: &str, config: &impl Serialize) -> String {
    format!("{method}-{}", crate::config_digest(config))
}

#[derive(Debug, Clone)]
pub struct Detection {
    pub result: DetectionResult,
    pub stack: AutoencoderStack,
    pub windows: WindowedSeries,
}

/// Scale, window, train the stack, score consecutive windows, pick peaks
/// and map them back to series indices.
pub fn detect(
    series: &TimeSeries,
    window: &WindowConfig,
    stack_cfg: &StackConfig,
    peaks: &PeakConfig,
) -> Result<DetectionResult> {
    detect_full(series, window, stack_cfg, peaks).map(|d| d.result)
}

pub fn detect_full(
    series: &TimeSeries,
    window: &WindowConfig,
    stack_cfg: &StackConfig,
    peaks: &PeakConfig,
) -> Result<Detection> {
    peaks.validate()?;
    stack_cfg.validate()?;
    let window = WindowConfig::new(window.window_size, window.stride)?;
    let scaling = fit_scaler(series);
    let windows = segment(series, window, &scaling)?;
    let stack = train_stack(&windows.vectors, stack_cfg)?;
    let raw = distance_curve(&stack, &windows)?;
    let curve = if peaks.smoothing_width > 1 {
        raw.smoothed(peaks.smoothing_width)?
    } else {
        raw
    };
    let breakpoints: Vec<usize> = find_peaks(&curve, peaks)
        .into_iter()
        .map(|i| curve.boundary_timestamps[i])
        .collect();
    let id = detector_id("autoencoder", &(window, stack_cfg, peaks));
    let result = DetectionResult::new(id, breakpoints, series.len())?.with_curve(curve);
    Ok(Detection {
        result,
        stack,
        windows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::{LayerParams, TrainConfig};
    use proptest::prelude::*;

    fn curve(values: &[f64]) -> DistanceCurve {
        DistanceCurve {
            boundary_timestamps: (1..=values.len()).collect(),
            values: values.to_vec(),
        }
    }

    fn literal() -> PeakConfig {
        PeakConfig {
            min_prominence: 0.0,
            min_separation: 0,
            smoothing_width: 0,
        }
    }

    #[test]
    fn distance_examples() {
        assert_eq!(feature_distance(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 0.0);
        let d = feature_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
        assert!(feature_distance(&[0.0, 0.0], &[1.0, 0.0]).is_err());
        assert!(feature_distance(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn peak_examples() {
        assert_eq!(find_peaks(&curve(&[0.0, 1.0, 0.0]), &literal()), vec![1]);
        assert_eq!(find_peaks(&curve(&[0.0, 1.0, 1.0, 0.0]), &literal()), vec![1]);
        assert_eq!(find_peaks(&curve(&[0.0, 1.0, 2.0, 3.0]), &literal()), Vec::<usize>::new());
        assert_eq!(find_peaks(&curve(&[3.0, 1.0, 2.0]), &literal()), Vec::<usize>::new());
        // plateau touching the end is not a peak
        assert_eq!(local_maxima(&[0.0, 2.0, 2.0]), Vec::<usize>::new());
        assert_eq!(local_maxima(&[0.0, 2.0, 2.0, 2.0, 1.0]), vec![2]);
        assert!(local_maxima(&[]).is_empty());
    }

    #[test]
    fn prominence_filter() {
        // small bump riding on the flank of a tall peak
        let v = [0.0, 10.0, 0.0, 1.0, 0.8, 1.5, 0.0];
        assert_eq!(prominence(&v, 1), 10.0);
        assert!((prominence(&v, 3) - 0.2).abs() < 1e-12);
        let cfg = PeakConfig {
            min_prominence: 0.05,
            ..literal()
        };
        assert_eq!(find_peaks(&curve(&v), &cfg), vec![1, 5]);
    }

    #[test]
    fn separation_keeps_higher() {
        let v = [0.0, 3.0, 0.0, 5.0, 0.0, 1.0, 0.0, 0.0, 2.0, 0.0];
        let cfg = PeakConfig {
            min_separation: 3,
            ..literal()
        };
        assert_eq!(find_peaks(&curve(&v), &cfg), vec![3, 8]);
    }

    #[test]
    fn smoothing() {
        let c = curve(&[0.0, 3.0, 0.0]).smoothed(3).unwrap();
        assert_eq!(c.values, vec![1.5, 1.0, 1.5]);
        assert!(curve(&[1.0]).smoothed(2).is_err());
    }

    fn stack_for(dim: usize) -> AutoencoderStack {
        AutoencoderStack {
            layers: vec![LayerParams::zeros(dim, 2, crate::autoencoder::Activation::Sigmoid)],
            loss_history: vec![vec![]],
            config: StackConfig::new(vec![2], TrainConfig::default()).unwrap(),
        }
    }

    #[test]
    fn curve_edge_cases() {
        let s = TimeSeries::univariate(vec![1.0, 2.0, 3.0]).unwrap();
        let w = segment(&s, WindowConfig::new(3, 1).unwrap(), &fit_scaler(&s)).unwrap();
        let c = distance_curve(&stack_for(3), &w).unwrap();
        assert!(c.is_empty());

        let s = TimeSeries::univariate(vec![4.0; 20]).unwrap();
        let w = segment(&s, WindowConfig::new(4, 2).unwrap(), &fit_scaler(&s)).unwrap();
        let mut stack = stack_for(4);
        stack.layers[0].weights = vec![0.3, -0.2, 0.1, 0.5, 0.7, 0.1, -0.4, 0.2];
        let c = distance_curve(&stack, &w).unwrap();
        assert_eq!(c.len(), w.len() - 1);
        assert!(c.values.iter().all(|&v| v == 0.0));

        assert!(distance_curve(&stack_for(5), &w).is_err());
    }

    #[test]
    fn curve_against_pairwise_composition() {
        let s = TimeSeries::univariate((0..40).map(|i| ((i * 7) % 11) as f64).collect()).unwrap();
        let w = segment(&s, WindowConfig::new(6, 3).unwrap(), &fit_scaler(&s)).unwrap();
        let cfg = StackConfig::new(vec![3, 2], TrainConfig { epochs: 5, ..Default::default() })
            .unwrap();
        let stack = train_stack(&w.vectors, &cfg).unwrap();
        let c = distance_curve(&stack, &w).unwrap();
        for i in 0..c.len() {
            let a = stack.layers[1].encode(&stack.layers[0].encode(&w.vectors[i]).unwrap()).unwrap();
            let b = stack.layers[1]
                .encode(&stack.layers[0].encode(&w.vectors[i + 1]).unwrap())
                .unwrap();
            let num: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((c.values[i] - num / (na * nb).sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_series_has_no_breakpoints() {
        let s = TimeSeries::univariate(vec![2.5; 200]).unwrap();
        let w = WindowConfig::half_overlap(20).unwrap();
        let cfg = StackConfig::from_ratio(20, 2, 0.1, TrainConfig::default()).unwrap();
        let r = detect(&s, &w, &cfg, &PeakConfig::default()).unwrap();
        assert!(r.breakpoints.is_empty());
        assert!(r.detector_id.starts_with("autoencoder-"));
        let c = r.curve.unwrap();
        assert!(c.values.iter().all(|&v| v == 0.0));
    }

    proptest! {
        #[test]
        fn zero_distance_iff_equal(
            a in proptest::collection::vec(0.01f64..1.0, 1..6),
            b in proptest::collection::vec(0.01f64..1.0, 1..6),
        ) {
            let n = a.len().min(b.len());
            let (a, b) = (&a[..n], &b[..n]);
            let d = feature_distance(a, b).unwrap();
            prop_assert!(d >= 0.0);
            prop_assert_eq!(d == 0.0, a == b);
            prop_assert_eq!(feature_distance(a, a).unwrap(), 0.0);
        }

        #[test]
        fn peaks_exceed_neighbours(values in proptest::collection::vec(0u8..5, 0..40)) {
            let v: Vec<f64> = values.iter().map(|&x| x as f64).collect();
            for p in find_peaks(&curve(&v), &PeakConfig::default()) {
                prop_assert!(p > 0 && p + 1 < v.len());
                let mut l = p;
                while v[l - 1] == v[p] { l -= 1; }
                let mut r = p;
                while v[r + 1] == v[p] { r += 1; }
                prop_assert!(v[l - 1] < v[p] && v[r + 1] < v[p]);
            }
        }
    }
}

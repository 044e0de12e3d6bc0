//! Bayesian online changepoint detection with a constant hazard.
//!
//! Run length `r` at step `t` counts the observations before `x_t` in the
//! current segment, so `r = 0` means `x_t` opens a new segment and the
//! first observation always has `r = 0`.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{DetectionResult, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BocpdModel {
    /// Zero-mean Gaussian with a Gamma(shape, rate) prior on the precision.
    /// The series is standardised first.
    GammaPrecision { shape: f64, rate: f64 },
    /// Gaussian with a Normal(mean, std^2) prior on the mean and known
    /// observation noise. `noise_std = None` estimates it from the data.
    Gaussian {
        mean: f64,
        std: f64,
        #[serde(default)]
        noise_std: Option<f64>,
    },
}

impl BocpdModel {
    fn name(&self) -> &'static str {
        match self {
            BocpdModel::GammaPrecision { .. } => "gamma_precision",
            BocpdModel::Gaussian { .. } => "gaussian",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BocpdConfig {
    pub model: BocpdModel,
    /// Expected segment length; the hazard is its reciprocal.
    pub hazard_rate: f64,
    /// Run lengths beyond this are truncated; `None` keeps all of them.
    pub max_run_length: Option<usize>,
    /// Report `t` when `P(r_t = 0 | x_1..x_t)` exceeds this.
    pub threshold: f64,
}

impl Default for BocpdConfig {
    fn default() -> Self {
        Self::gamma_default()
    }
}

impl BocpdConfig {
    /// Gamma(1, 1) precision prior, expected segment length 1000.
    pub fn gamma_default() -> Self {
        Self {
            model: BocpdModel::GammaPrecision {
                shape: 1.0,
                rate: 1.0,
            },
            hazard_rate: 1000.0,
            max_run_length: None,
            threshold: 0.5,
        }
    }

    /// Normal(1.15e5, 1e4^2) mean prior, expected segment length 250.
    pub fn gaussian_default() -> Self {
        Self {
            model: BocpdModel::Gaussian {
                mean: 1.15e5,
                std: 1e4,
                noise_std: None,
            },
            hazard_rate: 250.0,
            max_run_length: None,
            threshold: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        let ok_model = match self.model {
            BocpdModel::GammaPrecision { shape, rate } => positive(shape) && positive(rate),
            BocpdModel::Gaussian {
                std, noise_std, ..
            } => positive(std) && noise_std.is_none_or(positive),
        };
        if !ok_model {
            return Err(Error::InvalidConfig("BOCPD prior parameters must be > 0".into()));
        }
        if self.hazard_rate.is_nan() || self.hazard_rate <= 0.0 {
            return Err(Error::InvalidConfig("hazard_rate must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidConfig("threshold must be in [0, 1]".into()));
        }
        if self.max_run_length == Some(0) {
            return Err(Error::InvalidConfig("max_run_length must be >= 1".into()));
        }
        Ok(())
    }
}

/// Sufficient statistics of one candidate run.
#[derive(Debug, Clone, Copy, Default)]
struct RunStats {
    n: f64,
    sum: f64,
    sum_sq: f64,
}

impl RunStats {
    fn push(self, x: f64) -> Self {
        Self {
            n: self.n + 1.0,
            sum: self.sum + x,
            sum_sq: self.sum_sq + x * x,
        }
    }
}

/// Predictive log-density of the next observation given a run's data.
enum Predictive {
    Gamma { shape: f64, rate: f64 },
    Gaussian { mean: f64, var: f64, noise_var: f64 },
}

impl Predictive {
    fn log_pdf(&self, stats: &RunStats, x: f64) -> f64 {
        match *self {
            Predictive::Gamma { shape, rate } => {
                // Student-t, 2a dof, location 0, scale^2 = b / a.
                let a = shape + stats.n / 2.0;
                let b = rate + stats.sum_sq / 2.0;
                let nu = 2.0 * a;
                let scale_sq = b / a;
                ln_gamma((nu + 1.0) / 2.0)
                    - ln_gamma(nu / 2.0)
                    - 0.5 * (nu * PI * scale_sq).ln()
                    - (nu + 1.0) / 2.0 * (1.0 + x * x / (nu * scale_sq)).ln()
            }
            Predictive::Gaussian {
                mean,
                var,
                noise_var,
            } => {
                let post_var = 1.0 / (1.0 / var + stats.n / noise_var);
                let post_mean = post_var * (mean / var + stats.sum / noise_var);
                let v = post_var + noise_var;
                -0.5 * ((2.0 * PI * v).ln() + (x - post_mean).powi(2) / v)
            }
        }
    }
}

/// Lanczos approximation (g = 7, n = 9), accurate to ~1e-15 for x > 0.
fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Robust noise scale from first differences: `MAD / (0.6745 sqrt 2)`.
pub fn estimate_noise_std(data: &[f64]) -> f64 {
    let mut diffs: Vec<f64> = data.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    if diffs.is_empty() {
        return 1.0;
    }
    diffs.sort_by(f64::total_cmp);
    let mid = diffs.len() / 2;
    let median = if diffs.len().is_multiple_of(2) {
        0.5 * (diffs[mid - 1] + diffs[mid])
    } else {
        diffs[mid]
    };
    let sigma = median / (0.674_489_750_196_081_7 * std::f64::consts::SQRT_2);
    if sigma > 0.0 {
        sigma
    } else {
        1.0
    }
}

fn standardize(data: &[f64]) -> Vec<f64> {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
    data.iter().map(|x| (x - mean) / sd).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BocpdOutput {
    /// `posterior[t][r] = P(r_t = r | x_1..x_t)`; column `t` has
    /// `min(t, max_run_length) + 1` entries.
    pub posterior: Vec<Vec<f64>>,
    /// Most probable run length at each step.
    pub map_run_length: Vec<usize>,
    pub result: DetectionResult,
}

impl BocpdOutput {
    /// Long-format CSV: `t,run_length,probability`.
    pub fn write_posterior_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "t,run_length,probability").map_err(io)?;
        for (t, col) in self.posterior.iter().enumerate() {
            for (r, p) in col.iter().enumerate() {
                writeln!(w, "{t},{r},{p}").map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }
}

/// Filtering pass over a univariate sequence.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLengthTrace {
    /// `posterior[t][r] = P(r_t = r | x_1..x_t)`.
    pub posterior: Vec<Vec<f64>>,
    pub map_run_length: Vec<usize>,
    /// Steps where `P(r_t = 0)` exceeds the threshold.
    pub changepoints: Vec<usize>,
}

pub fn bocpd(data: &[f64], cfg: &BocpdConfig) -> Result<RunLengthTrace> {
    cfg.validate()?;
    if data.is_empty() {
        return Ok(RunLengthTrace::default());
    }
    let (xs, predictive) = match cfg.model {
        BocpdModel::GammaPrecision { shape, rate } => {
            (standardize(data), Predictive::Gamma { shape, rate })
        }
        BocpdModel::Gaussian {
            mean,
            std,
            noise_std,
        } => {
            let noise = noise_std.unwrap_or_else(|| estimate_noise_std(data));
            (
                data.to_vec(),
                Predictive::Gaussian {
                    mean,
                    var: std * std,
                    noise_var: noise * noise,
                },
            )
        }
    };
    let hazard = (1.0 / cfg.hazard_rate).min(1.0);
    let log_h = hazard.ln();
    let log_1mh = (-hazard).ln_1p();
    let cap = cfg.max_run_length.unwrap_or(usize::MAX);

    let mut posterior: Vec<Vec<f64>> = Vec::with_capacity(xs.len());
    let mut map = Vec::with_capacity(xs.len());
    let mut changepoints = Vec::new();

    // Stats for each run length of the previous column; index r holds the
    // r observations preceding the current one.
    let mut stats: Vec<RunStats> = vec![RunStats::default()];
    let mut prev: Vec<f64> = Vec::new();

    for (t, &x) in xs.iter().enumerate() {
        let col = if t == 0 {
            vec![1.0]
        } else {
            let prior_lp = predictive.log_pdf(&RunStats::default(), x);
            let mut logw = Vec::with_capacity(prev.len() + 1);
            // Changepoint: every previous run length hands over hazard mass.
            logw.push(log_h + prior_lp);
            for (r, &p) in prev.iter().enumerate() {
                let lp = if p > 0.0 {
                    p.ln() + log_1mh + predictive.log_pdf(&stats[r + 1], x)
                } else {
                    f64::NEG_INFINITY
                };
                logw.push(lp);
            }
            logw.truncate(cap.saturating_add(1));
            let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut col: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
            let z: f64 = col.iter().sum();
            col.iter_mut().for_each(|p| *p /= z);
            col
        };

        if t > 0 && col[0] > cfg.threshold {
            changepoints.push(t);
        }
        let (argmax, _) = col
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            });
        map.push(argmax);

        // Fold x_t into every run; index shifts by one (run r -> r + 1).
        let mut next = Vec::with_capacity(col.len() + 1);
        next.push(RunStats::default());
        next.extend(stats.iter().take(col.len()).map(|s| s.push(x)));
        stats = next;
        prev = col.clone();
        posterior.push(col);
    }
    Ok(RunLengthTrace {
        posterior,
        map_run_length: map,
        changepoints,
    })
}

/// BOCPD on a series; multichannel input is reduced by the per-timestamp
/// L2 norm.
pub fn bocpd_run(series: &TimeSeries, cfg: &BocpdConfig) -> Result<BocpdOutput> {
    let data = series.reduce_l2();
    let trace = bocpd(&data, cfg)?;
    let id = crate::detector::detector_id(&format!("bocpd_{}", cfg.model.name()), cfg);
    Ok(BocpdOutput {
        result: DetectionResult::new(id, trace.changepoints, series.len())?,
        posterior: trace.posterior,
        map_run_length: trace.map_run_length,
    })
}

//! Toleration-distance matching, ROC sweeps, prediction ratio, nearest
//! breakpoint MSE and prediction loss.

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::series::{DetectionResult, LabelSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    /// Correct alarms (`N_CR`).
    pub correct: usize,
    /// Ground-truth breakpoints (`N_GT`).
    pub ground_truth: usize,
    /// All alarms (`N_AL`).
    pub alarms: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchOutcome {
    pub counts: ConfusionCounts,
    /// `(true breakpoint, alarm)` pairs counted as correct.
    pub pairs: Vec<(usize, usize)>,
}

/// Element of the sorted slice closest to `x`; ties go to the smaller one.
pub fn nearest(sorted: &[usize], x: usize) -> Option<usize> {
    let i = sorted.partition_point(|&v| v < x);
    match (i.checked_sub(1).map(|j| sorted[j]), sorted.get(i).copied()) {
        (Some(lo), Some(hi)) => Some(if x - lo <= hi - x { lo } else { hi }),
        (lo, hi) => lo.or(hi),
    }
}

/// An alarm `a` is correct when its nearest true breakpoint `b` has `a` as
/// its own nearest alarm and `|a - b| < tau`. Both inputs must be sorted.
pub fn match_breakpoints(truth: &[usize], alarms: &[usize], tau: usize) -> MatchOutcome {
    let mut pairs = Vec::new();
    for &a in alarms {
        let Some(b) = nearest(truth, a) else { break };
        if nearest(alarms, b) == Some(a) && a.abs_diff(b) < tau {
            pairs.push((b, a));
        }
    }
    MatchOutcome {
        counts: ConfusionCounts {
            correct: pairs.len(),
            ground_truth: truth.len(),
            alarms: alarms.len(),
        },
        pairs,
    }
}

/// `TPR = N_CR / N_GT`, `FPR = (N_AL - N_CR) / N_AL` (0 when there are no
/// alarms).
pub fn tpr_fpr(counts: &ConfusionCounts) -> Result<(f64, f64)> {
    if counts.ground_truth == 0 {
        return Err(Error::Undefined("true positive rate with no ground truth"));
    }
    let tpr = counts.correct as f64 / counts.ground_truth as f64;
    let fpr = if counts.alarms == 0 {
        0.0
    } else {
        (counts.alarms - counts.correct) as f64 / counts.alarms as f64
    };
    Ok((tpr, fpr))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub tau: usize,
    pub tpr: f64,
    pub fpr: f64,
}

/// Re-matches at every toleration distance.
pub fn roc_sweep(truth: &[usize], alarms: &[usize], taus: &[usize]) -> Result<Vec<RocPoint>> {
    if taus.is_empty() {
        return Err(Error::InvalidConfig("ROC sweep needs at least one tau".into()));
    }
    taus.iter()
        .map(|&tau| {
            let (tpr, fpr) = tpr_fpr(&match_breakpoints(truth, alarms, tau).counts)?;
            Ok(RocPoint { tau, tpr, fpr })
        })
        .collect()
}

/// `N_AL / N_GT`
pub fn prediction_ratio(counts: &ConfusionCounts) -> Result<f64> {
    if counts.ground_truth == 0 {
        return Err(Error::Undefined("prediction ratio with no ground truth"));
    }
    Ok(counts.alarms as f64 / counts.ground_truth as f64)
}

/// Mean over true breakpoints of the squared distance to the closest alarm,
/// with distances divided by `unit` first. Infinite when there are no
/// alarms; zero when there is no ground truth.
pub fn mse_nearest(truth: &[usize], alarms: &[usize], unit: f64) -> f64 {
    if alarms.is_empty() {
        return f64::INFINITY;
    }
    if truth.is_empty() {
        return 0.0;
    }
    let total: f64 = truth
        .iter()
        .map(|&b| {
            let a = nearest(alarms, b).expect("alarms non-empty");
            (a.abs_diff(b) as f64 / unit).powi(2)
        })
        .sum();
    total / truth.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PredictionLoss {
    Value(f64),
    Undefined,
}

impl PredictionLoss {
    pub fn value(self) -> Option<f64> {
        match self {
            PredictionLoss::Value(v) => Some(v),
            PredictionLoss::Undefined => None,
        }
    }
}

impl std::fmt::Display for PredictionLoss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PredictionLoss::Value(v) => write!(f, "{v}"),
            PredictionLoss::Undefined => f.write_str("undef"),
        }
    }
}

impl Serialize for PredictionLoss {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PredictionLoss::Value(v) => s.serialize_f64(*v),
            PredictionLoss::Undefined => s.serialize_str("undef"),
        }
    }
}

/// Default prediction ratio above which prediction loss is reported as
/// undefined.
pub const DEFAULT_PR_CAP: f64 = 100.0;

/// `|1 - pr| * mse`, undefined when there are no alarms or `pr > pr_cap`.
pub fn prediction_loss(pr: f64, mse: f64, counts: &ConfusionCounts, pr_cap: f64) -> PredictionLoss {
    if counts.alarms == 0 || pr > pr_cap || !mse.is_finite() {
        PredictionLoss::Undefined
    } else {
        PredictionLoss::Value((1.0 - pr).abs() * mse)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub toleration: usize,
    pub roc_taus: Vec<usize>,
    /// Samples per distance unit for the MSE (the window stride gives
    /// window-index units).
    pub distance_unit: f64,
    pub pr_cap: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            toleration: 50,
            roc_taus: vec![1, 2, 5, 10, 20, 50, 100, 200, 500, 1000],
            distance_unit: 1.0,
            pr_cap: DEFAULT_PR_CAP,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.distance_unit > 0.0 && self.distance_unit.is_finite()) {
            return Err(Error::InvalidConfig("distance_unit must be > 0".into()));
        }
        if self.roc_taus.is_empty() {
            return Err(Error::InvalidConfig("roc_taus must not be empty".into()));
        }
        if self.pr_cap.is_nan() || self.pr_cap < 0.0 {
            return Err(Error::InvalidConfig("pr_cap must be >= 0".into()));
        }
        Ok(())
    }
}

fn finite_or_inf<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str("inf")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub detector_id: String,
    pub toleration: usize,
    pub counts: ConfusionCounts,
    pub tpr: f64,
    pub fpr: f64,
    pub roc: Vec<RocPoint>,
    pub pr: f64,
    #[serde(serialize_with = "finite_or_inf")]
    pub mse: f64,
    pub pl: PredictionLoss,
}

pub fn evaluate(truth: &LabelSet, detection: &DetectionResult, cfg: &EvalConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let gt = truth.breakpoints();
    let al = &detection.breakpoints;
    if al.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("alarms must be strictly increasing".into()));
    }
    let counts = match_breakpoints(gt, al, cfg.toleration).counts;
    let (tpr, fpr) = tpr_fpr(&counts)?;
    let roc = roc_sweep(gt, al, &cfg.roc_taus)?;
    let pr = prediction_ratio(&counts)?;
    let mse = mse_nearest(gt, al, cfg.distance_unit);
    let pl = prediction_loss(pr, mse, &counts, cfg.pr_cap);
    Ok(EvalReport {
        detector_id: detection.detector_id.clone(),
        toleration: cfg.toleration,
        counts,
        tpr,
        fpr,
        roc,
        pr,
        mse,
        pl,
    })
}

fn cell(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        "inf".to_string()
    }
}

/// Comparison table with one row per detector and `PR,MSE,PL` columns per
/// dataset, in first-seen order. Missing cells are left empty.
pub fn comparison_table(entries: &[(String, EvalReport)]) -> String {
    let mut datasets: Vec<&str> = Vec::new();
    let mut detectors: Vec<&str> = Vec::new();
    for (ds, r) in entries {
        if !datasets.contains(&ds.as_str()) {
            datasets.push(ds);
        }
        if !detectors.contains(&r.detector_id.as_str()) {
            detectors.push(&r.detector_id);
        }
    }
    let mut out = String::from("detector");
    for ds in &datasets {
        out.push_str(&format!(",{ds} PR,{ds} MSE,{ds} PL"));
    }
    out.push('\n');
    for det in detectors {
        out.push_str(det);
        for ds in &datasets {
            match entries
                .iter()
                .find(|(d, r)| d == ds && r.detector_id == det)
            {
                Some((_, r)) => {
                    let pl = match r.pl {
                        PredictionLoss::Value(v) => cell(v),
                        PredictionLoss::Undefined => "undef".to_string(),
                    };
                    out.push_str(&format!(",{},{},{}", cell(r.pr), cell(r.mse), pl));
                }
                None => out.push_str(",,,"),
            }
        }
        out.push('\n');
    }
    out
}

/// `tau,tpr,fpr` rows for one detector.
pub fn roc_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("detector,tau,tpr,fpr\n");
    for r in reports {
        for p in &r.roc {
            out.push_str(&format!("{},{},{},{}\n", r.detector_id, p.tau, p.tpr, p.fpr));
        }
    }
    out
}

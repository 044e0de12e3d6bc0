//! Command-line front end.
//!
//! Every command resolves its settings from defaults, then an optional TOML
//! file, then flags, and records the resolved settings and their digest in
//! `manifest.json` next to the outputs. Nothing time- or host-dependent is
//! written, so reruns produce identical files.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::autoencoder::{Activation, LossKind, StackConfig, TrainConfig};
use crate::baselines::{bocpd_run, pelt_segment, BocpdConfig, PeltConfig, PeltCost, Penalty};
use crate::detector::{detect_full, PeakConfig};
use crate::error::{Error, Result};
use crate::metrics::{comparison_table, evaluate, roc_csv, EvalConfig, EvalReport};
use crate::series::{load_csv, load_labels, write_csv, write_labels, CsvLayout, DetectionResult, TimeSeries};
use crate::synthgen::{generate, SynthConfig, SynthKind};
use crate::windowing::{suggest_window_size, WindowConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "autoseg", version, about = "Unsupervised time-series breakpoint detection")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random component.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic series with ground-truth breakpoints.
    Synth(SynthArgs),
    /// Detect breakpoints with the autoencoder or a baseline.
    Detect(DetectArgs),
    /// Score detections against ground-truth labels.
    Evaluate(EvaluateArgs),
    /// Print the window size suggested by a label set.
    SuggestWindow(SuggestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Method {
    Autoencoder,
    Pelt,
    Bocpd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum KindArg {
    ExponentialSegments,
    StepMean,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum LayoutArg {
    Columns,
    Rows,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum CostArg {
    NormalMean,
    NormalMeanVariance,
    Exponential,
    Poisson,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum LossArg {
    Square,
    CrossEntropy,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ActivationArg {
    Sigmoid,
    Tanh,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum BocpdPreset {
    /// Gamma(1, 1) precision prior, hazard 1/1000.
    GammaPrecision,
    /// Normal(1.15e5, 1e4^2) mean prior, hazard 1/250.
    Gaussian,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// Series length.
    #[arg(long = "T", alias = "length")]
    length: Option<usize>,
    /// Number of changepoints.
    #[arg(long = "k", alias = "changepoints")]
    changepoints: Option<usize>,
    #[arg(long)]
    param_low: Option<f64>,
    #[arg(long)]
    param_high: Option<f64>,
    #[arg(long)]
    noise_sigma: Option<f64>,
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Series CSV.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    layout: Option<LayoutArg>,
    /// The CSV has a header row (column layout) or column (row layout).
    #[arg(long)]
    header: bool,
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum)]
    method: Option<Method>,

    /// Window length N_w in samples.
    #[arg(long)]
    window_size: Option<usize>,
    /// Window stride; defaults to half the window, rounded up.
    #[arg(long)]
    stride: Option<usize>,
    /// Derive the window size from this label file when none is given.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    feature_ratio: Option<f64>,
    /// Explicit per-layer feature sizes, e.g. `5,1`.
    #[arg(long, value_delimiter = ',')]
    feature_dims: Option<Vec<usize>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    #[arg(long, value_enum)]
    activation: Option<ActivationArg>,
    #[arg(long)]
    min_prominence: Option<f64>,
    #[arg(long)]
    min_separation: Option<usize>,
    #[arg(long)]
    smoothing_width: Option<usize>,

    #[arg(long, value_enum)]
    cost: Option<CostArg>,
    /// Fixed PELT penalty; the default is BIC.
    #[arg(long)]
    penalty: Option<f64>,
    #[arg(long)]
    min_segment: Option<usize>,

    #[arg(long, value_enum)]
    bocpd_model: Option<BocpdPreset>,
    #[arg(long)]
    hazard_rate: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    max_run_length: Option<usize>,
    /// Also write the run-length posterior (BOCPD only).
    #[arg(long)]
    dump_posterior: bool,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Ground-truth label file.
    #[arg(long)]
    labels: PathBuf,
    /// Detection JSON; repeat for several detectors.
    #[arg(long = "detection", required = true)]
    detections: Vec<PathBuf>,
    /// Series length; alternatively pass the series with --input.
    #[arg(long)]
    length: Option<usize>,
    #[command(flatten)]
    input: InputArgs,
    /// Toleration distance in samples.
    #[arg(long)]
    tau: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    roc_taus: Option<Vec<usize>>,
    /// Samples per MSE distance unit.
    #[arg(long)]
    unit: Option<f64>,
    /// Dataset name used in the comparison table.
    #[arg(long)]
    dataset: Option<String>,
}

#[derive(Debug, Args)]
struct SuggestArgs {
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    length: Option<usize>,
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub path: Option<PathBuf>,
    pub layout: CsvLayout,
    pub header: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSection {
    pub window_size: Option<usize>,
    pub stride: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StackSection {
    pub depth: usize,
    pub feature_ratio: f64,
    pub feature_dims: Option<Vec<usize>>,
    pub train: TrainConfig,
}

impl Default for StackSection {
    fn default() -> Self {
        Self {
            depth: 2,
            feature_ratio: 0.1,
            feature_dims: None,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    #[serde(flatten)]
    pub metrics: EvalConfig,
    pub dataset: String,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            metrics: EvalConfig::default(),
            dataset: "dataset".into(),
        }
    }
}

/// Everything a run can be configured with. Missing keys take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub method: Method,
    pub input: InputConfig,
    pub synth: SynthConfig,
    pub window: WindowSection,
    pub stack: StackSection,
    pub peaks: PeakConfig,
    pub pelt: PeltConfig,
    pub bocpd: BocpdConfig,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            method: Method::Autoencoder,
            input: InputConfig::default(),
            synth: SynthConfig::default(),
            window: WindowSection::default(),
            stack: StackSection::default(),
            peaks: PeakConfig::default(),
            pelt: PeltConfig::default(),
            bocpd: BocpdConfig::default(),
            eval: EvalSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }
}

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config_digest: String,
    config: &'a T,
    outputs: Vec<&'a str>,
}

fn write_manifest<T: Serialize>(out: &Path, command: &'static str, config: &T, outputs: &[&str]) -> Result<()> {
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        config_digest: crate::config_digest(config),
        config,
        outputs: outputs.to_vec(),
    };
    write_text(&out.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")
}

fn write_text(path: &Path, text: String) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn apply_input(cfg: &mut InputConfig, args: &InputArgs) {
    if let Some(p) = &args.input {
        cfg.path = Some(p.clone());
    }
    if let Some(l) = args.layout {
        cfg.layout = match l {
            LayoutArg::Columns => CsvLayout::ChannelsAsColumns,
            LayoutArg::Rows => CsvLayout::ChannelsAsRows,
        };
    }
    if args.header {
        cfg.header = true;
    }
}

fn load_input(cfg: &InputConfig) -> Result<TimeSeries> {
    let path = cfg
        .path
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("no input series (pass --input)".into()))?;
    load_csv(path, cfg.layout, cfg.header)
}

fn cmd_synth(mut cfg: RunConfig, args: &SynthArgs) -> Result<()> {
    let s = &mut cfg.synth;
    s.seed = cfg.seed;
    if let Some(k) = args.kind {
        s.kind = match k {
            KindArg::ExponentialSegments => SynthKind::ExponentialSegments,
            KindArg::StepMean => SynthKind::StepMean,
        };
    }
    if let Some(v) = args.length {
        s.length = v;
    }
    if let Some(v) = args.changepoints {
        s.changepoints = v;
    }
    if let Some(v) = args.param_low {
        s.param_range.0 = v;
    }
    if let Some(v) = args.param_high {
        s.param_range.1 = v;
    }
    if let Some(v) = args.noise_sigma {
        s.noise_sigma = v;
    }
    let (series, labels) = generate(&cfg.synth)?;
    create_dir(&cfg.out)?;
    write_csv(&series, cfg.out.join("series.csv"), CsvLayout::ChannelsAsColumns, false)?;
    write_labels(&labels, cfg.out.join("labels.txt"))?;
    write_manifest(&cfg.out, "synth", &cfg.synth, &["series.csv", "labels.txt"])?;
    println!(
        "synth: {} samples, {} breakpoints -> {}",
        series.len(),
        labels.len(),
        cfg.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct DetectManifest<'a> {
    method: Method,
    input: &'a InputConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    window: Option<WindowConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stack: Option<&'a StackConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    peaks: Option<&'a PeakConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pelt: Option<&'a PeltConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bocpd: Option<&'a BocpdConfig>,
}

fn apply_detect_flags(cfg: &mut RunConfig, a: &DetectArgs) {
    apply_input(&mut cfg.input, &a.input);
    if let Some(m) = a.method {
        cfg.method = m;
    }
    let w = &mut cfg.window;
    w.window_size = a.window_size.or(w.window_size);
    w.stride = a.stride.or(w.stride);

    let st = &mut cfg.stack;
    st.depth = a.depth.unwrap_or(st.depth);
    st.feature_ratio = a.feature_ratio.unwrap_or(st.feature_ratio);
    if a.feature_dims.is_some() {
        st.feature_dims = a.feature_dims.clone();
    }
    let t = &mut st.train;
    t.seed = cfg.seed;
    t.epochs = a.epochs.unwrap_or(t.epochs);
    t.learning_rate = a.learning_rate.unwrap_or(t.learning_rate);
    t.weight_decay = a.weight_decay.unwrap_or(t.weight_decay);
    if let Some(l) = a.loss {
        t.loss = match l {
            LossArg::Square => LossKind::Square,
            LossArg::CrossEntropy => LossKind::CrossEntropy,
        };
    }
    if let Some(act) = a.activation {
        t.activation = match act {
            ActivationArg::Sigmoid => Activation::Sigmoid,
            ActivationArg::Tanh => Activation::Tanh,
        };
    }

    let p = &mut cfg.peaks;
    p.min_prominence = a.min_prominence.unwrap_or(p.min_prominence);
    p.min_separation = a.min_separation.unwrap_or(p.min_separation);
    p.smoothing_width = a.smoothing_width.unwrap_or(p.smoothing_width);

    if let Some(c) = a.cost {
        cfg.pelt.cost = match c {
            CostArg::NormalMean => PeltCost::NormalMean,
            CostArg::NormalMeanVariance => PeltCost::NormalMeanVariance,
            CostArg::Exponential => PeltCost::Exponential,
            CostArg::Poisson => PeltCost::Poisson,
        };
    }
    if let Some(b) = a.penalty {
        cfg.pelt.penalty = Penalty::Value(b);
    }
    cfg.pelt.min_segment = a.min_segment.unwrap_or(cfg.pelt.min_segment);

    if let Some(preset) = a.bocpd_model {
        cfg.bocpd = match preset {
            BocpdPreset::GammaPrecision => BocpdConfig::gamma_default(),
            BocpdPreset::Gaussian => BocpdConfig::gaussian_default(),
        };
    }
    let b = &mut cfg.bocpd;
    b.hazard_rate = a.hazard_rate.unwrap_or(b.hazard_rate);
    b.threshold = a.threshold.unwrap_or(b.threshold);
    if a.max_run_length.is_some() {
        b.max_run_length = a.max_run_length;
    }
}

fn cmd_detect(mut cfg: RunConfig, args: &DetectArgs) -> Result<()> {
    apply_detect_flags(&mut cfg, args);
    let series = load_input(&cfg.input)?;
    let out = cfg.out.clone();

    match cfg.method {
        Method::Autoencoder => {
            let window_size = match (cfg.window.window_size, &args.labels) {
                (Some(n), _) => n,
                (None, Some(labels)) => {
                    let n = suggest_window_size(&load_labels(labels, series.len())?, series.len())?;
                    log::info!("window size {n} suggested by {}", labels.display());
                    n
                }
                (None, None) => {
                    return Err(Error::InvalidConfig(
                        "window size not set (pass --window-size or --labels)".into(),
                    ))
                }
            };
            let window = match cfg.window.stride {
                Some(stride) => WindowConfig::new(window_size, stride)?,
                None => WindowConfig::half_overlap(window_size)?,
            };
            let input_dim = window_size * series.channels();
            let stack_cfg = match &cfg.stack.feature_dims {
                Some(dims) => StackConfig::new(dims.clone(), cfg.stack.train)?,
                None => StackConfig::from_ratio(
                    input_dim,
                    cfg.stack.depth,
                    cfg.stack.feature_ratio,
                    cfg.stack.train,
                )?,
            };
            let detection = detect_full(&series, &window, &stack_cfg, &cfg.peaks)?;
            create_dir(&out)?;
            let result = &detection.result;
            result.save(out.join("detection.json"))?;
            if let Some(curve) = &result.curve {
                curve.write_csv(out.join("curve.csv"))?;
            }
            detection.stack.save(out.join("model.json"))?;
            let m = DetectManifest {
                method: cfg.method,
                input: &cfg.input,
                window: Some(window),
                stack: Some(&stack_cfg),
                peaks: Some(&cfg.peaks),
                pelt: None,
                bocpd: None,
            };
            write_manifest(&out, "detect", &m, &["detection.json", "curve.csv", "model.json"])?;
            report(result);
        }
        Method::Pelt => {
            let result = pelt_segment(&series, &cfg.pelt)?;
            create_dir(&out)?;
            result.save(out.join("detection.json"))?;
            let m = DetectManifest {
                method: cfg.method,
                input: &cfg.input,
                window: None,
                stack: None,
                peaks: None,
                pelt: Some(&cfg.pelt),
                bocpd: None,
            };
            write_manifest(&out, "detect", &m, &["detection.json"])?;
            report(&result);
        }
        Method::Bocpd => {
            let output = bocpd_run(&series, &cfg.bocpd)?;
            create_dir(&out)?;
            output.result.save(out.join("detection.json"))?;
            let mut files = vec!["detection.json"];
            if args.dump_posterior {
                output.write_posterior_csv(out.join("posterior.csv"))?;
                files.push("posterior.csv");
            }
            let m = DetectManifest {
                method: cfg.method,
                input: &cfg.input,
                window: None,
                stack: None,
                peaks: None,
                pelt: None,
                bocpd: Some(&cfg.bocpd),
            };
            write_manifest(&out, "detect", &m, &files)?;
            report(&output.result);
        }
    }
    Ok(())
}

fn report(result: &DetectionResult) {
    println!(
        "detect: {} breakpoints ({})",
        result.breakpoints.len(),
        result.detector_id
    );
}

fn series_length(length: Option<usize>, input: &InputConfig) -> Result<usize> {
    match (length, &input.path) {
        (Some(n), _) => Ok(n),
        (None, Some(_)) => Ok(load_input(input)?.len()),
        (None, None) => Err(Error::InvalidConfig(
            "series length unknown (pass --length or --input)".into(),
        )),
    }
}

#[derive(Serialize)]
struct EvaluateManifest<'a> {
    labels: &'a Path,
    detections: &'a [PathBuf],
    length: usize,
    eval: &'a EvalSection,
}

fn cmd_evaluate(mut cfg: RunConfig, args: &EvaluateArgs) -> Result<()> {
    apply_input(&mut cfg.input, &args.input);
    let e = &mut cfg.eval;
    e.metrics.toleration = args.tau.unwrap_or(e.metrics.toleration);
    if let Some(taus) = &args.roc_taus {
        e.metrics.roc_taus = taus.clone();
    }
    e.metrics.distance_unit = args.unit.unwrap_or(e.metrics.distance_unit);
    if let Some(ds) = &args.dataset {
        e.dataset = ds.clone();
    }

    let len = series_length(args.length, &cfg.input)?;
    let truth = load_labels(&args.labels, len)?;
    let mut reports: Vec<EvalReport> = Vec::new();
    for path in &args.detections {
        let det = DetectionResult::load(path)?;
        det.validate(len).map_err(|err| {
            Error::InvalidInput(format!("{} does not fit a series of length {len}: {err}", path.display()))
        })?;
        reports.push(evaluate(&truth, &det, &cfg.eval.metrics)?);
    }

    create_dir(&cfg.out)?;
    write_text(
        &cfg.out.join("eval.json"),
        serde_json::to_string_pretty(&reports)? + "\n",
    )?;
    write_text(&cfg.out.join("roc.csv"), roc_csv(&reports))?;
    let entries: Vec<(String, EvalReport)> = reports
        .iter()
        .map(|r| (cfg.eval.dataset.clone(), r.clone()))
        .collect();
    write_text(&cfg.out.join("table.csv"), comparison_table(&entries))?;
    let m = EvaluateManifest {
        labels: &args.labels,
        detections: &args.detections,
        length: len,
        eval: &cfg.eval,
    };
    write_manifest(&cfg.out, "evaluate", &m, &["eval.json", "roc.csv", "table.csv"])?;
    for r in &reports {
        println!(
            "evaluate: {} tpr={:.4} fpr={:.4} pr={:.4} mse={} pl={}",
            r.detector_id, r.tpr, r.fpr, r.pr, r.mse, r.pl
        );
    }
    Ok(())
}

fn cmd_suggest_window(mut cfg: RunConfig, args: &SuggestArgs) -> Result<()> {
    apply_input(&mut cfg.input, &args.input);
    let len = series_length(args.length, &cfg.input)?;
    let labels = load_labels(&args.labels, len)?;
    println!("{}", suggest_window_size(&labels, len)?);
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    match &cli.command {
        Command::Synth(a) => cmd_synth(cfg, a),
        Command::Detect(a) => cmd_detect(cfg, a),
        Command::Evaluate(a) => cmd_evaluate(cfg, a),
        Command::SuggestWindow(a) => cmd_suggest_window(cfg, a),
    }
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_INPUT
    }
}

/// Parse `std::env::args`, run the command and return the process exit code.
/// Log verbosity comes from `AUTOSEG_LOG` (e.g. `info`, `debug`).
pub fn run() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("AUTOSEG_LOG", "warn"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

//! Run configuration: flat `key = value` text with dotted section names.
//!
//! ```text
//! # comments start with '#'
//! task = synth
//! model.hidden_dim = 8
//! training.epochs = 30
//! ```
//!
//! Unknown keys and repeated keys are rejected. Relative data paths are resolved
//! against the directory of the config file. [`RunConfig::to_text`] renders every
//! resolved value and parses back to the same configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::SyntheticTaskSpec;
use crate::error::{Error, Result};
use crate::model::{InputMode, ModelConfig};
use crate::training::{BackwardMode, LossSpec, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Smnist,
    Psmnist,
    Har2,
    Synth,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Smnist => "smnist",
            Task::Psmnist => "psmnist",
            Task::Har2 => "har2",
            Task::Synth => "synth",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "smnist" => Ok(Task::Smnist),
            "psmnist" => Ok(Task::Psmnist),
            "har2" => Ok(Task::Har2),
            "synth" => Ok(Task::Synth),
            other => Err(Error::InvalidConfig(format!(
                "unknown task {other:?} (expected smnist, psmnist, har2 or synth)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DataPaths {
    pub train_images: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub train_features: Option<PathBuf>,
    pub test_features: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    /// extracted `UCI HAR Dataset` directory; replaces the HAR feature/label files
    pub har_root: Option<PathBuf>,
    /// `None` selects the bundled permutation
    pub permutation: Option<PathBuf>,
    /// keep only the first `k` samples; 0 keeps all
    pub train_limit: usize,
    pub test_limit: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSettings {
    pub batch: usize,
    pub repeats: usize,
    pub parallel: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckSettings {
    pub step: f64,
    pub samples: usize,
    /// negative control: perturbs the analytic gradient before comparing
    pub corrupt: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: DataPaths,
    pub synth: SyntheticTaskSpec,
    pub synth_train_fraction: f64,
    pub output_dir: PathBuf,
    /// write measured epoch times to metrics.csv; off keeps the file byte-stable
    pub wall_clock: bool,
    pub bench: BenchSettings,
    pub gradcheck: GradcheckSettings,
    pub workers: usize,
}

const KEYS: &[&str] = &[
    "task",
    "model.hidden_dim",
    "model.num_channels",
    "model.base_freq",
    "model.input_mode",
    "model.conv_window",
    "model.conv_stride",
    "training.epochs",
    "training.batch_size",
    "training.lr_initial",
    "training.decay_factor",
    "training.backward_mode",
    "training.loss",
    "training.seed",
    "data.train_images",
    "data.test_images",
    "data.train_features",
    "data.test_features",
    "data.train_labels",
    "data.test_labels",
    "data.har_root",
    "data.permutation",
    "data.train_limit",
    "data.test_limit",
    "synth.frequencies",
    "synth.noise_sigma",
    "synth.samples_per_class",
    "synth.seq_len",
    "synth.phase_jitter",
    "synth.data_seed",
    "synth.train_fraction",
    "output.dir",
    "output.wall_clock",
    "bench.batch",
    "bench.repeats",
    "bench.parallel",
    "gradcheck.step",
    "gradcheck.samples",
    "gradcheck.corrupt",
    "run.workers",
];

/// Parses `key = value` lines. Later layers are applied with [`RunConfig::from_layers`].
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!("line {}: expected `key = value`", i + 1))
        })?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(Error::InvalidConfig(format!(
                "line {}: unknown key {k:?}",
                i + 1
            )));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::InvalidConfig(format!(
                "line {}: key {k:?} given twice",
                i + 1
            )));
        }
    }
    Ok(out)
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse {v:?}")))
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "on" => Ok(true),
        "false" | "off" => Ok(false),
        _ => Err(Error::InvalidConfig(format!(
            "{key}: expected true/false, got {v:?}"
        ))),
    }
}

fn path(base: &Path, v: &str) -> PathBuf {
    let p = PathBuf::from(v);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

impl RunConfig {
    /// Per-task defaults before any file values are applied.
    pub fn defaults(task: Task) -> Self {
        let mut model = ModelConfig {
            input_dim: 1,
            hidden_dim: 8,
            num_channels: 3,
            base_freq: 1.0,
            seq_len: 128,
            output_dim: 2,
            input_mode: InputMode::FullyConnected,
        };
        let mut train = TrainConfig {
            epochs: 30,
            batch_size: 16,
            lr_initial: 0.5,
            decay_factor: 0.95,
            ..TrainConfig::default()
        };
        match task {
            Task::Synth => {}
            Task::Smnist | Task::Psmnist => {
                model.seq_len = 784;
                model.output_dim = 10;
                model.hidden_dim = 48;
                model.num_channels = 3;
                model.base_freq = 2.0;
                model.input_mode = InputMode::Conv1D {
                    window: 84,
                    stride: 28,
                };
                train.batch_size = 32;
                train.lr_initial = 0.5;
                train.decay_factor = 0.9;
                if task == Task::Psmnist {
                    model.hidden_dim = 160;
                }
            }
            Task::Har2 => {
                model.seq_len = 128;
                model.input_dim = 9;
                model.hidden_dim = 64;
                model.num_channels = 4;
                model.input_mode = InputMode::Conv1D {
                    window: 3,
                    stride: 1,
                };
                train.epochs = 100;
                train.batch_size = 32;
                train.lr_initial = 1e-3;
                train.decay_factor = 0.7;
            }
        }
        RunConfig {
            task,
            model,
            train,
            data: DataPaths::default(),
            synth: SyntheticTaskSpec::default(),
            synth_train_fraction: 0.5,
            output_dir: PathBuf::from("out"),
            wall_clock: false,
            bench: BenchSettings {
                batch: 8,
                repeats: 5,
                parallel: true,
            },
            gradcheck: GradcheckSettings {
                step: 1e-4,
                samples: 3,
                corrupt: false,
            },
            workers: 1,
        }
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        Self::from_layers(&[parse_pairs(text)?], base_dir)
    }

    pub fn load(config_path: &Path) -> Result<Self> {
        Self::load_with(config_path, &BTreeMap::new())
    }

    /// Reads a config file and applies `overrides` on top of it.
    pub fn load_with(config_path: &Path, overrides: &BTreeMap<String, String>) -> Result<Self> {
        let text = std::fs::read_to_string(config_path).map_err(|e| {
            Error::InvalidConfig(format!("cannot read {}: {e}", config_path.display()))
        })?;
        let base = config_path.parent().unwrap_or(Path::new("."));
        for k in overrides.keys() {
            if !KEYS.contains(&k.as_str()) {
                return Err(Error::InvalidConfig(format!("unknown key {k:?}")));
            }
        }
        Self::from_layers(&[parse_pairs(&text)?, overrides.clone()], base)
    }

    /// Merges layers (later wins) and resolves them against the task defaults.
    pub fn from_layers(layers: &[BTreeMap<String, String>], base_dir: &Path) -> Result<Self> {
        let mut merged = BTreeMap::new();
        for layer in layers {
            merged.extend(layer.iter().map(|(k, v)| (k.clone(), v.clone())));
        }
        let task = Task::parse(
            merged
                .get("task")
                .ok_or_else(|| Error::InvalidConfig("missing required key `task`".into()))?,
        )?;
        let mut cfg = RunConfig::defaults(task);
        let mut window = None;
        let mut stride = None;
        let mut mode = None;
        for (k, v) in &merged {
            let v = v.as_str();
            match k.as_str() {
                "task" => {}
                "model.hidden_dim" => cfg.model.hidden_dim = num(k, v)?,
                "model.num_channels" => cfg.model.num_channels = num(k, v)?,
                "model.base_freq" => cfg.model.base_freq = num(k, v)?,
                "model.input_mode" => mode = Some(v.to_string()),
                "model.conv_window" => window = Some(num::<usize>(k, v)?),
                "model.conv_stride" => stride = Some(num::<usize>(k, v)?),
                "training.epochs" => cfg.train.epochs = num(k, v)?,
                "training.batch_size" => cfg.train.batch_size = num(k, v)?,
                "training.lr_initial" => cfg.train.lr_initial = num(k, v)?,
                "training.decay_factor" => cfg.train.decay_factor = num(k, v)?,
                "training.backward_mode" => {
                    cfg.train.mode = match v {
                        "exact" => BackwardMode::ExactChainRule,
                        "paper" => BackwardMode::PaperFaithful,
                        _ => {
                            return Err(Error::InvalidConfig(format!(
                                "{k}: expected exact or paper, got {v:?}"
                            )))
                        }
                    }
                }
                "training.loss" => {
                    cfg.train.loss = match v {
                        "cross_entropy" => LossSpec::SoftmaxCrossEntropy,
                        "mse" => LossSpec::MeanSquaredError,
                        _ => {
                            return Err(Error::InvalidConfig(format!(
                                "{k}: expected cross_entropy or mse, got {v:?}"
                            )))
                        }
                    }
                }
                "training.seed" => cfg.train.seed = num(k, v)?,
                "data.train_images" => cfg.data.train_images = Some(path(base_dir, v)),
                "data.test_images" => cfg.data.test_images = Some(path(base_dir, v)),
                "data.train_features" => cfg.data.train_features = Some(path(base_dir, v)),
                "data.test_features" => cfg.data.test_features = Some(path(base_dir, v)),
                "data.train_labels" => cfg.data.train_labels = Some(path(base_dir, v)),
                "data.test_labels" => cfg.data.test_labels = Some(path(base_dir, v)),
                "data.har_root" => cfg.data.har_root = Some(path(base_dir, v)),
                "data.permutation" => {
                    cfg.data.permutation = (v != "bundled").then(|| path(base_dir, v));
                }
                "data.train_limit" => cfg.data.train_limit = num(k, v)?,
                "data.test_limit" => cfg.data.test_limit = num(k, v)?,
                "synth.frequencies" => {
                    cfg.synth.class_frequencies = v
                        .split(',')
                        .map(|s| num::<f64>(k, s.trim()))
                        .collect::<Result<Vec<_>>>()?;
                }
                "synth.noise_sigma" => cfg.synth.noise_sigma = num(k, v)?,
                "synth.samples_per_class" => cfg.synth.samples_per_class = num(k, v)?,
                "synth.seq_len" => cfg.synth.seq_len = num(k, v)?,
                "synth.phase_jitter" => cfg.synth.phase_jitter = num(k, v)?,
                "synth.data_seed" => cfg.synth.seed = num(k, v)?,
                "synth.train_fraction" => cfg.synth_train_fraction = num(k, v)?,
                "output.dir" => cfg.output_dir = path(base_dir, v),
                "output.wall_clock" => cfg.wall_clock = boolean(k, v)?,
                "bench.batch" => cfg.bench.batch = num(k, v)?,
                "bench.repeats" => cfg.bench.repeats = num(k, v)?,
                "bench.parallel" => cfg.bench.parallel = boolean(k, v)?,
                "gradcheck.step" => cfg.gradcheck.step = num(k, v)?,
                "gradcheck.samples" => cfg.gradcheck.samples = num(k, v)?,
                "gradcheck.corrupt" => cfg.gradcheck.corrupt = boolean(k, v)?,
                "run.workers" => cfg.workers = num(k, v)?,
                other => return Err(Error::InvalidConfig(format!("unknown key {other:?}"))),
            }
        }

        let (dw, ds) = match cfg.model.input_mode {
            InputMode::Conv1D { window, stride } => (window, stride),
            InputMode::FullyConnected => (3, 1),
        };
        let mode = mode.unwrap_or_else(|| match cfg.model.input_mode {
            InputMode::FullyConnected => "fc".into(),
            InputMode::Conv1D { .. } => "conv".into(),
        });
        cfg.model.input_mode = match mode.as_str() {
            "fc" => {
                if window.is_some() || stride.is_some() {
                    return Err(Error::InvalidConfig(
                        "model.conv_window/conv_stride need model.input_mode = conv".into(),
                    ));
                }
                InputMode::FullyConnected
            }
            "conv" => InputMode::Conv1D {
                window: window.unwrap_or(dw),
                stride: stride.unwrap_or(ds),
            },
            other => {
                return Err(Error::InvalidConfig(format!(
                    "model.input_mode: expected fc or conv, got {other:?}"
                )))
            }
        };

        if !merged.contains_key("output.dir") {
            cfg.output_dir = base_dir.join("out");
        }
        if task == Task::Synth {
            cfg.synth.num_classes = cfg.synth.class_frequencies.len();
            cfg.model.seq_len = cfg.synth.seq_len;
            cfg.model.output_dim = cfg.synth.num_classes;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every knob before any data is read or compute starts.
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        if self.workers == 0 {
            return Err(Error::InvalidConfig(
                "run.workers must be at least 1".into(),
            ));
        }
        if self.bench.repeats < 5 {
            return Err(Error::InvalidConfig(
                "bench.repeats must be at least 5".into(),
            ));
        }
        if self.bench.batch == 0 {
            return Err(Error::InvalidConfig("bench.batch must be positive".into()));
        }
        if !(self.gradcheck.step.is_finite() && self.gradcheck.step > 0.0)
            || self.gradcheck.samples == 0
        {
            return Err(Error::InvalidConfig(
                "gradcheck.step and gradcheck.samples must be positive".into(),
            ));
        }
        if self.task == Task::Synth {
            self.synth
                .validate()
                .map_err(|e| Error::InvalidConfig(format!("synth: {e}")))?;
            if !(self.synth_train_fraction > 0.0 && self.synth_train_fraction < 1.0) {
                return Err(Error::InvalidConfig(
                    "synth.train_fraction must lie in (0, 1)".into(),
                ));
            }
        }
        Ok(())
    }

    /// Every resolved value in config syntax. Parsing this text reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let opt = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        kv("task", self.task.name().into());
        kv("model.hidden_dim", self.model.hidden_dim.to_string());
        kv("model.num_channels", self.model.num_channels.to_string());
        kv("model.base_freq", self.model.base_freq.to_string());
        match self.model.input_mode {
            InputMode::FullyConnected => kv("model.input_mode", "fc".into()),
            InputMode::Conv1D { window, stride } => {
                kv("model.input_mode", "conv".into());
                kv("model.conv_window", window.to_string());
                kv("model.conv_stride", stride.to_string());
            }
        }
        kv("training.epochs", self.train.epochs.to_string());
        kv("training.batch_size", self.train.batch_size.to_string());
        kv("training.lr_initial", self.train.lr_initial.to_string());
        kv("training.decay_factor", self.train.decay_factor.to_string());
        kv(
            "training.backward_mode",
            match self.train.mode {
                BackwardMode::ExactChainRule => "exact",
                BackwardMode::PaperFaithful => "paper",
            }
            .into(),
        );
        kv(
            "training.loss",
            match self.train.loss {
                LossSpec::SoftmaxCrossEntropy => "cross_entropy",
                LossSpec::MeanSquaredError => "mse",
            }
            .into(),
        );
        kv("training.seed", self.train.seed.to_string());
        for (k, p) in [
            ("data.train_images", &self.data.train_images),
            ("data.test_images", &self.data.test_images),
            ("data.train_features", &self.data.train_features),
            ("data.test_features", &self.data.test_features),
            ("data.train_labels", &self.data.train_labels),
            ("data.test_labels", &self.data.test_labels),
            ("data.har_root", &self.data.har_root),
        ] {
            if let Some(v) = opt(p) {
                kv(k, v);
            }
        }
        kv(
            "data.permutation",
            opt(&self.data.permutation).unwrap_or_else(|| "bundled".into()),
        );
        kv("data.train_limit", self.data.train_limit.to_string());
        kv("data.test_limit", self.data.test_limit.to_string());
        if self.task == Task::Synth {
            let freqs: Vec<String> = self
                .synth
                .class_frequencies
                .iter()
                .map(f64::to_string)
                .collect();
            kv("synth.frequencies", freqs.join(","));
            kv("synth.noise_sigma", self.synth.noise_sigma.to_string());
            kv(
                "synth.samples_per_class",
                self.synth.samples_per_class.to_string(),
            );
            kv("synth.seq_len", self.synth.seq_len.to_string());
            kv("synth.phase_jitter", self.synth.phase_jitter.to_string());
            kv("synth.data_seed", self.synth.seed.to_string());
            kv(
                "synth.train_fraction",
                self.synth_train_fraction.to_string(),
            );
        }
        kv("output.dir", self.output_dir.display().to_string());
        kv("output.wall_clock", self.wall_clock.to_string());
        kv("bench.batch", self.bench.batch.to_string());
        kv("bench.repeats", self.bench.repeats.to_string());
        kv("bench.parallel", self.bench.parallel.to_string());
        kv("gradcheck.step", self.gradcheck.step.to_string());
        kv("gradcheck.samples", self.gradcheck.samples.to_string());
        kv("gradcheck.corrupt", self.gradcheck.corrupt.to_string());
        kv("run.workers", self.workers.to_string());
        s
    }
}

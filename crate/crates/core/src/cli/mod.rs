//! `ofnn` command line: train, eval, gradcheck and bench driven by a config file.
//!
//! Exit codes: 0 success, 1 gradient check failed, 2 configuration error,
//! 3 data error, 4 numeric failure. Every failure prints one diagnostic line to stderr.

pub mod blob;
pub mod config;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bench::{
    count_baseline_ops, count_forward_ops, hidden_multiply_ratio, time_forward, PhaseCounts,
};
use crate::data::{
    load_har2, load_har2_uci, load_idx, permute, split, synth_frequency_task, Dataset,
    PermutationSpec, DEFAULT_PERMUTATION_SEED,
};
use crate::error::{Error, Result};
use crate::model::{forward, make_channels, Model, Params};
use crate::tensor::Matrix;
use crate::training::{
    backward, channel_contributions, evaluate, finite_diff_gradients, fit, loss_and_output_grad,
    max_relative_error_by_block, multi_seed_eval, train_and_score, BackwardMode, EpochRecord,
};

pub use blob::{decode_params, encode_params, params_for, BlobShape};
pub use config::{parse_pairs, RunConfig, Task};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

pub const METRICS_HEADER: &str = "epoch,lr,train_loss,train_acc,test_acc,wall_ms";
pub const BENCH_HEADER: &str = "phase,multiplies,adds,trig_evals,median_ms";
pub const GRADCHECK_TOLERANCE: f64 = 1e-5;
pub const GRADCHECK_MAX_PARAMS: usize = 10_000;

#[derive(Parser, Debug)]
#[command(
    name = "ofnn",
    version,
    about = "Oscillatory Fourier neural network toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model and write metrics.csv, final_params.bin and manifest.txt
    Train(Common),
    /// Evaluate saved parameters, or retrain over several seeds
    Eval(EvalArgs),
    /// Compare analytic gradients with finite differences
    Gradcheck(Common),
    /// Count forward-pass operations and time the forward pass
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// overrides training.seed
    #[arg(long)]
    seed: Option<u64>,
    /// overrides run.workers
    #[arg(long)]
    workers: Option<usize>,
    /// extra `key=value` overrides, applied after the file
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// parameter blob (default: <output.dir>/final_params.bin)
    #[arg(long)]
    params: Option<PathBuf>,
    /// retrain with this many consecutive seeds and report mean ± std
    #[arg(long)]
    seeds: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    /// overrides bench.parallel
    #[arg(long)]
    parallel: Option<OnOff>,
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

type Outcome = std::result::Result<i32, Failure>;

fn config_err(e: Error) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: e.to_string(),
    }
}

fn data_err(e: Error) -> Failure {
    Failure {
        code: EXIT_DATA,
        message: e.to_string(),
    }
}

/// Errors raised once data is loaded and compute has started.
fn compute_err(e: Error) -> Failure {
    let code = match &e {
        Error::NumericFailure { .. } => EXIT_NUMERIC,
        Error::SeedFailure { source, .. } if matches!(**source, Error::NumericFailure { .. }) => {
            EXIT_NUMERIC
        }
        Error::Data(_) | Error::Io { .. } => EXIT_DATA,
        _ => EXIT_CONFIG,
    };
    Failure {
        code,
        message: e.to_string(),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    data_err(Error::io(path, e))
}

/// Binary entry point.
pub fn main() -> i32 {
    run(std::env::args_os())
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Train(c) => {
            resolve(&c, BTreeMap::new()).and_then(|cfg| with_pool(&cfg, || cmd_train(&cfg)))
        }
        Command::Eval(a) => resolve(&a.common, BTreeMap::new())
            .and_then(|cfg| with_pool(&cfg, || cmd_eval(&cfg, a.params.as_deref(), a.seeds))),
        Command::Gradcheck(c) => {
            resolve(&c, BTreeMap::new()).and_then(|cfg| with_pool(&cfg, || cmd_gradcheck(&cfg)))
        }
        Command::Bench(a) => {
            let mut extra = BTreeMap::new();
            if let Some(p) = a.parallel {
                extra.insert(
                    "bench.parallel".to_string(),
                    matches!(p, OnOff::On).to_string(),
                );
            }
            resolve(&a.common, extra).and_then(|cfg| with_pool(&cfg, || cmd_bench(&cfg)))
        }
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn resolve(
    c: &Common,
    mut extra: BTreeMap<String, String>,
) -> std::result::Result<RunConfig, Failure> {
    for kv in &c.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| {
            config_err(Error::InvalidConfig(format!(
                "--set expects KEY=VALUE, got {kv:?}"
            )))
        })?;
        extra.insert(k.trim().to_string(), v.trim().to_string());
    }
    if let Some(s) = c.seed {
        extra.insert("training.seed".into(), s.to_string());
    }
    if let Some(w) = c.workers {
        extra.insert("run.workers".into(), w.to_string());
    }
    RunConfig::load_with(&c.config, &extra).map_err(config_err)
}

fn with_pool(cfg: &RunConfig, f: impl FnOnce() -> Outcome + Send) -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| {
            config_err(Error::InvalidConfig(format!(
                "cannot start {} workers: {e}",
                cfg.workers
            )))
        })?;
    pool.install(f)
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> std::result::Result<&'a Path, Failure> {
    p.as_deref()
        .ok_or_else(|| config_err(Error::InvalidConfig(format!("task needs `{key}`"))))
}

fn limit(ds: Dataset, k: usize) -> Result<Dataset> {
    if k == 0 || k >= ds.len() {
        return Ok(ds);
    }
    ds.subset(&(0..k).collect::<Vec<_>>())
}

/// Loads the train split and, when configured, the test split.
pub fn load_task_data(cfg: &RunConfig) -> std::result::Result<(Dataset, Option<Dataset>), Failure> {
    let d = &cfg.data;
    let (train, test) = match cfg.task {
        Task::Synth => {
            let all = synth_frequency_task(&cfg.synth).map_err(data_err)?;
            let (tr, te) =
                split(&all, cfg.synth_train_fraction, cfg.synth.seed).map_err(data_err)?;
            (tr, Some(te))
        }
        Task::Smnist | Task::Psmnist => {
            let ti = required(&d.train_images, "data.train_images")?;
            let tl = required(&d.train_labels, "data.train_labels")?;
            let train = load_idx(ti, tl).map_err(data_err)?;
            let test = match &d.test_images {
                Some(p) => Some(
                    load_idx(p, required(&d.test_labels, "data.test_labels")?).map_err(data_err)?,
                ),
                None => None,
            };
            if cfg.task == Task::Psmnist {
                let spec = match &d.permutation {
                    None => PermutationSpec::default_psmnist(),
                    Some(p) => {
                        let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
                        PermutationSpec::parse(&text, DEFAULT_PERMUTATION_SEED)
                            .map_err(|e| data_err(e.into()))?
                    }
                };
                let train = permute(&train, &spec).map_err(data_err)?;
                let test = test
                    .map(|t| permute(&t, &spec))
                    .transpose()
                    .map_err(data_err)?;
                (train, test)
            } else {
                (train, test)
            }
        }
        Task::Har2 if d.har_root.is_some() => {
            let root = d.har_root.as_deref().unwrap();
            let (train, stats) = load_har2_uci(root, "train", None).map_err(data_err)?;
            let (test, _) = load_har2_uci(root, "test", Some(&stats)).map_err(data_err)?;
            (train, Some(test))
        }
        Task::Har2 => {
            let tf = required(&d.train_features, "data.train_features")?;
            let tl = required(&d.train_labels, "data.train_labels")?;
            let (train, stats) = load_har2(tf, tl, None).map_err(data_err)?;
            let test = match &d.test_features {
                Some(p) => {
                    let l = required(&d.test_labels, "data.test_labels")?;
                    Some(load_har2(p, l, Some(&stats)).map_err(data_err)?.0)
                }
                None => None,
            };
            (train, test)
        }
    };
    let train = limit(train, d.train_limit).map_err(data_err)?;
    let test = test
        .map(|t| limit(t, d.test_limit))
        .transpose()
        .map_err(data_err)?;
    for ds in std::iter::once(&train).chain(test.as_ref()) {
        let m = ds.meta();
        if m.seq_len != cfg.model.seq_len
            || m.input_dim != cfg.model.input_dim
            || m.num_classes > cfg.model.output_dim
        {
            return Err(data_err(Error::InvalidInput(format!(
                "{} data is {} steps x {} features with {} classes; model expects {} x {} with {} outputs",
                m.name,
                m.seq_len,
                m.input_dim,
                m.num_classes,
                cfg.model.seq_len,
                cfg.model.input_dim,
                cfg.model.output_dim
            ))));
        }
    }
    Ok((train, test))
}

pub fn metrics_row(r: &EpochRecord, wall_clock: bool) -> String {
    let test = r.test_acc.map(|a| a.to_string()).unwrap_or_default();
    let wall = if wall_clock {
        format!("{:.3}", r.wall_ms)
    } else {
        "0".into()
    };
    format!(
        "{},{},{},{},{},{}",
        r.epoch, r.lr, r.train_loss, r.train_acc, test, wall
    )
}

pub fn manifest_text(cfg: &RunConfig, command: &str) -> String {
    format!(
        "# ofnn {} {command} manifest; rerun with `ofnn {command} --config <this file>`\n{}",
        env!("CARGO_PKG_VERSION"),
        cfg.to_text()
    )
}

fn cmd_train(cfg: &RunConfig) -> Outcome {
    let (train, test) = load_task_data(cfg)?;
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let manifest = out.join("manifest.txt");
    fs::write(&manifest, manifest_text(cfg, "train")).map_err(|e| io_err(&manifest, e))?;
    let metrics_path = out.join("metrics.csv");
    let mut metrics = fs::File::create(&metrics_path).map_err(|e| io_err(&metrics_path, e))?;
    writeln!(metrics, "{METRICS_HEADER}").map_err(|e| io_err(&metrics_path, e))?;

    let mut model = Model::new(cfg.model.clone(), cfg.train.seed).map_err(config_err)?;
    let mut write_err = None;
    let records = fit(&mut model, &train, test.as_ref(), &cfg.train, |r| {
        eprintln!(
            "epoch {:>3}  lr {:.3e}  loss {:.4}  train_acc {:.4}  test_acc {}  {:.0} ms",
            r.epoch,
            r.lr,
            r.train_loss,
            r.train_acc,
            r.test_acc
                .map(|a| format!("{a:.4}"))
                .unwrap_or_else(|| "-".into()),
            r.wall_ms
        );
        if let Err(e) = writeln!(metrics, "{}", metrics_row(r, cfg.wall_clock)) {
            write_err.get_or_insert(e);
        }
    })
    .map_err(compute_err)?;
    if let Some(e) = write_err {
        return Err(io_err(&metrics_path, e));
    }

    let params_path = out.join("final_params.bin");
    fs::write(
        &params_path,
        encode_params(&model.params, cfg.model.num_channels),
    )
    .map_err(|e| io_err(&params_path, e))?;
    if let Some(last) = records.last() {
        println!("{METRICS_HEADER}\n{}", metrics_row(last, cfg.wall_clock));
    } else {
        println!("no epochs run");
    }
    Ok(EXIT_OK)
}

fn cmd_eval(cfg: &RunConfig, params: Option<&Path>, seeds: Option<usize>) -> Outcome {
    let (train, test) = load_task_data(cfg)?;
    let test = test.unwrap_or_else(|| {
        eprintln!("note: no test split configured, evaluating on the training data");
        train.clone()
    });
    if let Some(k) = seeds {
        if k == 0 {
            return Err(config_err(Error::InvalidConfig(
                "--seeds must be at least 1".into(),
            )));
        }
        let list: Vec<u64> = (0..k as u64)
            .map(|i| cfg.train.seed.wrapping_add(i))
            .collect();
        let (accs, mean, std) = if k == 1 {
            let a = train_and_score(&cfg.model, &cfg.train, &train, &test, list[0])
                .map_err(compute_err)?;
            (vec![a], a, 0.0)
        } else {
            let r = multi_seed_eval(&cfg.model, &cfg.train, &train, &test, &list)
                .map_err(compute_err)?;
            (r.accuracies, r.mean, r.stddev)
        };
        for (s, a) in list.iter().zip(&accs) {
            println!("seed {s}: test_acc = {a}");
        }
        println!("seeds = {k}\nmean_test_acc = {mean}\nstd_test_acc = {std}");
        return Ok(EXIT_OK);
    }

    let path = params
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.output_dir.join("final_params.bin"));
    let bytes = fs::read(&path).map_err(|e| io_err(&path, e))?;
    let params = params_for(&bytes, &cfg.model).map_err(|e| match e {
        Error::Data(_) => data_err(e),
        other => config_err(other),
    })?;
    let model = Model::from_params(cfg.model.clone(), params).map_err(config_err)?;
    let report = evaluate(&model, &test, cfg.train.loss).map_err(compute_err)?;
    println!(
        "test_loss = {}\ntest_acc = {}",
        report.loss, report.accuracy
    );
    Ok(EXIT_OK)
}

/// Gradient-check report: per-block worst relative error and per-channel
/// exact/paper scale ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub blocks: [(&'static str, f64); 4],
    /// least-squares ratio of exact to paper channel contributions, and the cosine
    /// similarity between them
    pub channel_ratios: Vec<(f64, f64)>,
}

impl GradcheckReport {
    pub fn max_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.1).fold(0.0, f64::max)
    }
}

fn contribution_vec(c: &(Vec<f64>, Matrix)) -> Vec<f64> {
    c.0.iter().chain(c.1.as_slice()).copied().collect()
}

/// Runs the comparison on `cfg.gradcheck.samples` seeded random models and inputs.
pub fn gradient_check(cfg: &RunConfig) -> Result<GradcheckReport> {
    let model = &cfg.model;
    let channels = make_channels(model)?;
    let mut blocks = [("W_x", 0.0), ("b_x", 0.0), ("W_y", 0.0), ("b_y", 0.0)];
    let mut dots = vec![(0.0, 0.0, 0.0); model.num_channels];
    for s in 0..cfg.gradcheck.samples as u64 {
        let seed = cfg.train.seed.wrapping_add(s);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut params = Params::init(model, seed);
        for b in params.b_x.iter_mut().chain(params.b_y.iter_mut()) {
            *b = rng.random_range(-1.0..1.0);
        }
        let seq = Matrix::from_fn(model.seq_len, model.input_dim, |_, _| {
            rng.random_range(-1.0..1.0)
        });
        let target = rng.random_range(0..model.output_dim);

        let (y, cache) = forward(&params, &channels, &seq, model)?;
        let (_, dy) = loss_and_output_grad(&y, target, cfg.train.loss)?;
        let mut analytic = backward(
            &cache,
            &dy,
            &params,
            &channels,
            model,
            BackwardMode::ExactChainRule,
        )?;
        if cfg.gradcheck.corrupt {
            analytic.scale(1.001);
        }
        let numeric = finite_diff_gradients(
            &params,
            &channels,
            &seq,
            target,
            model,
            cfg.train.loss,
            cfg.gradcheck.step,
        )?;
        for (slot, (_, e)) in blocks
            .iter_mut()
            .zip(max_relative_error_by_block(&analytic, &numeric))
        {
            slot.1 = f64::max(slot.1, e);
        }

        let exact = channel_contributions(
            &cache,
            &dy,
            &params,
            &channels,
            model,
            BackwardMode::ExactChainRule,
        )?;
        let paper = channel_contributions(
            &cache,
            &dy,
            &params,
            &channels,
            model,
            BackwardMode::PaperFaithful,
        )?;
        for (acc, (e, p)) in dots.iter_mut().zip(exact.iter().zip(&paper)) {
            let (e, p) = (contribution_vec(e), contribution_vec(p));
            acc.0 += e.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>();
            acc.1 += p.iter().map(|b| b * b).sum::<f64>();
            acc.2 += e.iter().map(|a| a * a).sum::<f64>();
        }
    }
    let channel_ratios = dots
        .iter()
        .map(|&(ep, pp, ee)| (ep / pp, ep / (ee * pp).sqrt()))
        .collect();
    Ok(GradcheckReport {
        blocks,
        channel_ratios,
    })
}

fn cmd_gradcheck(cfg: &RunConfig) -> Outcome {
    let count = cfg.model.param_count();
    if count > GRADCHECK_MAX_PARAMS {
        return Err(config_err(Error::InvalidConfig(format!(
            "gradcheck refuses models above {GRADCHECK_MAX_PARAMS} parameters; this one has {count}"
        ))));
    }
    let report = gradient_check(cfg).map_err(compute_err)?;
    for (name, e) in report.blocks {
        println!("max_rel_err {name} = {e:e}");
    }
    for (c, (ratio, cos)) in report.channel_ratios.iter().enumerate() {
        println!("channel {c} exact/paper = {ratio} (cosine {cos})");
    }
    let worst = report.max_error();
    let ok = worst <= GRADCHECK_TOLERANCE;
    println!(
        "gradcheck {}: max_rel_err = {worst:e}, tolerance {GRADCHECK_TOLERANCE:e}",
        if ok { "passed" } else { "FAILED" }
    );
    Ok(if ok { EXIT_OK } else { EXIT_CHECK_FAILED })
}

pub fn bench_rows(
    ofnn: &PhaseCounts,
    baseline: &PhaseCounts,
    ofnn_ms: f64,
    baseline_ms: Option<f64>,
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{BENCH_HEADER}");
    for (prefix, counts, ms) in [
        ("ofnn", ofnn, Some(ofnn_ms)),
        ("baseline", baseline, baseline_ms),
    ] {
        for c in counts {
            let ms = ms.map(|m| format!("{m:.6}")).unwrap_or_default();
            let _ = writeln!(
                s,
                "{prefix}/{},{},{},{},{ms}",
                c.phase.name(),
                c.multiplies,
                c.adds,
                c.trig_evals
            );
        }
    }
    s
}

fn cmd_bench(cfg: &RunConfig) -> Outcome {
    let ofnn = count_forward_ops(&cfg.model).map_err(config_err)?;
    let baseline = count_baseline_ops(&cfg.model).map_err(config_err)?;
    let timing = time_forward(
        &cfg.model,
        cfg.bench.batch,
        cfg.bench.parallel,
        cfg.bench.repeats,
        cfg.workers,
    )
    .map_err(compute_err)?;
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let path = out.join("bench.csv");
    fs::write(&path, bench_rows(&ofnn, &baseline, timing.median_ms, None))
        .map_err(|e| io_err(&path, e))?;

    let checksum: f64 = timing.outputs.iter().flatten().sum();
    println!(
        "forward median {:.3} ms, p90 {:.3} ms over {} workers (parallel = {})",
        timing.median_ms, timing.p90_ms, timing.workers, cfg.bench.parallel
    );
    println!("output checksum = {checksum:e}");
    match hidden_multiply_ratio(&ofnn, &baseline) {
        Some(r) => println!("hidden accumulation multiplies baseline/ofnn = {r}"),
        None => println!(
            "hidden accumulation multiplies: baseline {} vs ofnn 0 (eliminated)",
            crate::bench::hidden(&baseline).multiplies
        ),
    }
    println!("wrote {}", path.display());
    Ok(EXIT_OK)
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn ofnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ofnn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes `body` as a config in a fresh directory; outputs land in `<dir>/out`.
fn setup(body: &str) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    std::fs::write(&path, body).unwrap();
    (dir, path)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| {
            l.strip_prefix(key)?
                .trim()
                .strip_prefix('=')?
                .trim()
                .parse()
                .ok()
        })
        .unwrap_or_else(|| panic!("{key} missing in {text}"))
}

#[test]
fn zero_epochs_writes_header_only() {
    let (dir, cfg) = setup("task = synth\ntraining.epochs = 0\n");
    let o = ofnn(&["train", "--config", p(&cfg)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let metrics = std::fs::read_to_string(dir.path().join("out/metrics.csv")).unwrap();
    assert_eq!(metrics, "epoch,lr,train_loss,train_acc,test_acc,wall_ms\n");
    assert!(dir.path().join("out/final_params.bin").exists());
}

#[test]
fn synth_training_reaches_calibrated_accuracy() {
    let (dir, cfg) = setup("task = synth\n");
    let o = ofnn(&["train", "--config", p(&cfg)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let metrics = std::fs::read_to_string(dir.path().join("out/metrics.csv")).unwrap();
    let rows: Vec<&str> = metrics.lines().skip(1).collect();
    assert_eq!(rows.len(), 30);
    let last: Vec<&str> = rows[29].split(',').collect();
    assert_eq!(last.len(), 6);
    assert_eq!(last[0], "30");
    assert!(last[3].parse::<f64>().unwrap() >= 0.95, "{}", rows[29]);
    assert_eq!(last[5], "0");

    // the manifest alone reproduces the run
    let manifest = dir.path().join("out/manifest.txt");
    let text = std::fs::read_to_string(&manifest).unwrap();
    assert!(text.contains("training.seed = 0") && text.contains("run.workers = 1"));
    let again = dir.path().join("again");
    let o = ofnn(&[
        "train",
        "--config",
        p(&manifest),
        "--set",
        &format!("output.dir={}", again.display()),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        std::fs::read_to_string(again.join("metrics.csv")).unwrap(),
        metrics
    );
}

#[test]
fn eval_after_train_reproduces_final_row() {
    let (dir, cfg) = setup("task = synth\ntraining.epochs = 4\nmodel.hidden_dim = 5\n");
    assert_eq!(code(&ofnn(&["train", "--config", p(&cfg)])), 0);
    let metrics = std::fs::read_to_string(dir.path().join("out/metrics.csv")).unwrap();
    let final_test: f64 = metrics
        .lines()
        .last()
        .unwrap()
        .split(',')
        .nth(4)
        .unwrap()
        .parse()
        .unwrap();
    let o = ofnn(&["eval", "--config", p(&cfg)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(value(&stdout(&o), "test_acc"), final_test);

    // same blob against a different shape is a config error
    let o = ofnn(&["eval", "--config", p(&cfg), "--set", "model.hidden_dim=6"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("shape"));
}

#[test]
fn eval_seeds() {
    let (_dir, cfg) = setup("task = synth\ntraining.epochs = 30\n");
    let o = ofnn(&["eval", "--config", p(&cfg), "--seeds", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(value(&stdout(&o), "std_test_acc"), 0.0);

    let o = ofnn(&["eval", "--config", p(&cfg), "--seeds", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(value(&out, "mean_test_acc") >= 0.95, "{out}");
    assert!(value(&out, "std_test_acc") <= 0.05, "{out}");
}

#[test]
fn missing_data_file_exits_3_without_outputs() {
    let (dir, cfg) =
        setup("task = smnist\ndata.train_images = nope-images\ndata.train_labels = nope-labels\n");
    let o = ofnn(&["train", "--config", p(&cfg)]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert_eq!(stderr(&o).lines().count(), 1);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn corrupt_data_file_exits_3() {
    let (dir, cfg) = setup("task = smnist\ndata.train_images = img\ndata.train_labels = lbl\n");
    std::fs::write(dir.path().join("img"), [0u8, 0, 8, 1, 0, 0, 0, 1]).unwrap();
    std::fs::write(dir.path().join("lbl"), [0u8, 0, 8, 1, 0, 0, 0, 1, 3]).unwrap();
    let o = ofnn(&["train", "--config", p(&cfg)]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("magic"));
}

#[test]
fn config_errors_exit_2() {
    for body in [
        "task = synth\nmodel.hidden_dim = zero\n",
        "model.hidden_dim = 3\n",
        "task = synth\nbogus.key = 1\n",
    ] {
        let (_dir, cfg) = setup(body);
        for cmd in ["train", "bench", "gradcheck"] {
            let o = ofnn(&[cmd, "--config", p(&cfg)]);
            assert_eq!(code(&o), 2, "{cmd} {body:?}: {}", stderr(&o));
        }
    }
    let (_dir, cfg) = setup("task = smnist\n");
    let o = ofnn(&["train", "--config", p(&cfg)]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("data.train_images"));
    let o = ofnn(&["train", "--config", "/definitely/not/here.conf"]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&ofnn(&["train"])), 2);
    assert_eq!(code(&ofnn(&["frobnicate"])), 2);
}

#[test]
fn diverging_training_exits_4() {
    let (_dir, cfg) = setup("task = synth\ntraining.lr_initial = 1e308\ntraining.epochs = 3\n");
    let o = ofnn(&["train", "--config", p(&cfg)]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(stderr(&o).contains("numeric failure"));
}

#[test]
fn gradcheck_default_passes_and_reports_ratios() {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/gradcheck.conf");
    let o = ofnn(&["gradcheck", "--config", p(&cfg)]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    let out = stdout(&o);
    for block in ["W_x", "b_x", "W_y", "b_y"] {
        assert!(value(&out, &format!("max_rel_err {block}")) <= 1e-5);
    }
    assert_eq!(out.matches("exact/paper").count(), 3);
}

#[test]
fn gradcheck_single_channel_ratio_is_sqrt2() {
    let (_dir, cfg) = setup("task = synth\nmodel.num_channels = 1\nmodel.hidden_dim = 3\n");
    let o = ofnn(&["gradcheck", "--config", p(&cfg)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let line = stdout(&o)
        .lines()
        .find(|l| l.starts_with("channel 0 exact/paper"))
        .unwrap()
        .to_string();
    let ratio: f64 = line
        .split('=')
        .nth(1)
        .unwrap()
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((ratio - std::f64::consts::SQRT_2).abs() <= 1e-9, "{line}");
}

#[test]
fn gradcheck_negative_control_and_size_guard() {
    let (_dir, cfg) = setup("task = synth\nmodel.hidden_dim = 3\ngradcheck.corrupt = true\n");
    let o = ofnn(&["gradcheck", "--config", p(&cfg)]);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
    assert!(stdout(&o).contains("FAILED"));

    // 2000 + 2000 + 2*3*2000 + 2 = 16002 parameters
    let (_dir, cfg) = setup("task = synth\nmodel.hidden_dim = 2000\n");
    let o = ofnn(&["gradcheck", "--config", p(&cfg)]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("10000"));
}

#[test]
fn bench_writes_counts_and_parallel_flag_is_numerically_neutral() {
    let (dir, cfg) = setup("task = synth\nbench.batch = 3\n");
    let on = ofnn(&[
        "bench",
        "--config",
        p(&cfg),
        "--parallel",
        "on",
        "--workers",
        "2",
    ]);
    assert_eq!(code(&on), 0, "{}", stderr(&on));
    let csv = std::fs::read_to_string(dir.path().join("out/bench.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("phase,multiplies,adds,trig_evals,median_ms")
    );
    let hidden: Vec<&str> = csv
        .lines()
        .find(|l| l.starts_with("ofnn/hidden_accumulation"))
        .unwrap()
        .split(',')
        .collect();
    // n = 8, C = 3, N = 128
    assert_eq!(&hidden[1..4], &["0", "3072", "3072"]);
    let base: Vec<&str> = csv
        .lines()
        .find(|l| l.starts_with("baseline/hidden_accumulation"))
        .unwrap()
        .split(',')
        .collect();
    assert_eq!(&base[1..3], &["3072", "3072"]);
    assert!(hidden[4].parse::<f64>().unwrap() > 0.0);

    let off = ofnn(&["bench", "--config", p(&cfg), "--parallel", "off"]);
    assert_eq!(code(&off), 0);
    let checksum = |o: &Output| {
        stdout(o)
            .lines()
            .find(|l| l.starts_with("output checksum"))
            .unwrap()
            .to_string()
    };
    assert_eq!(checksum(&on), checksum(&off));
    assert!(stdout(&off).contains("eliminated"));
}

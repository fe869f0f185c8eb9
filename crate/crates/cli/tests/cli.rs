//! Black-box tests of the command surface plus round-trip checks of the
//! container formats.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

use glassflow::formats;
use glassflow_core::flow::FlowModel;
use glassflow_core::pt::{SampleMeta, SampleSet};
use glassflow_core::rng::stream_rng;
use glassflow_core::spinglass::DisorderRealization;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_glassflow"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn binary");
    assert!(
        out.status.success(),
        "command {:?} failed\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
    out
}

fn run_err(args: &[&str], expected_code: i32) -> String {
    let out = bin().args(args).output().expect("spawn binary");
    assert_eq!(
        out.status.code(),
        Some(expected_code),
        "command {:?} exited {:?}\nstderr: {}",
        args,
        out.status.code(),
        String::from_utf8_lossy(&out.stderr),
    );
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path_str(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

/// gen-disorder + a short tempering run, shared scaffolding for the
/// analyze tests.
fn small_pipeline(dir: &Path) -> (PathBuf, PathBuf) {
    let disorder_dir = dir.join("disorder");
    run_ok(&[
        "gen-disorder",
        "--n",
        "8",
        "--scale",
        "1",
        "--seed",
        "7",
        "--epsilon",
        "0.01",
        "--out",
        path_str(&disorder_dir),
    ]);
    let disorder = disorder_dir.join("disorder.sgd");
    let pt_dir = dir.join("pt");
    run_ok(&[
        "sample-pt",
        "--disorder",
        path_str(&disorder),
        "--t-min",
        "0.5",
        "--t-max",
        "5",
        "--replicas",
        "3",
        "--samples",
        "400",
        "--seed",
        "3",
        "--emit-x",
        "--out",
        path_str(&pt_dir),
    ]);
    (disorder, pt_dir)
}

#[test]
fn usage_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let out = path_str(dir.path());
    run_err(&["gen-disorder", "--n", "1", "--out", out], 2);
    run_err(&["gen-disorder", "--out", out], 2);
    run_err(&["gen-disorder", "--n", "4", "--bogus", "1", "--out", out], 2);
    run_err(&["train", "--disorder", "x.sgd", "--loss", "reverse", "--out", out], 2);
    run_err(&["analyze", "overlap", "--out", out], 2);
}

#[test]
fn missing_input_exits_4() {
    let dir = TempDir::new().unwrap();
    let out = path_str(dir.path());
    run_err(
        &["sample-pt", "--disorder", "/nonexistent.sgd", "--samples", "10", "--out", out],
        4,
    );
    run_err(
        &[
            "analyze",
            "overlap",
            "--samples",
            "/nonexistent.sgs",
            "--out",
            out,
        ],
        4,
    );
}

#[test]
fn zero_samples_is_usage_error() {
    let dir = TempDir::new().unwrap();
    let (disorder, _) = small_pipeline(dir.path());
    let stderr = run_err(
        &[
            "sample-pt",
            "--disorder",
            path_str(&disorder),
            "--samples",
            "0",
            "--out",
            path_str(&dir.path().join("zero")),
        ],
        2,
    );
    assert!(stderr.contains("--samples"), "stderr: {stderr}");
}

#[test]
fn config_unknown_key_rejected() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("exp.json");
    fs::write(&config, r#"{"disorder": {"n": 4, "typo": 1}}"#).unwrap();
    let stderr = run_err(
        &[
            "--config",
            path_str(&config),
            "gen-disorder",
            "--out",
            path_str(&dir.path().join("out")),
        ],
        2,
    );
    assert!(stderr.contains("typo"), "stderr: {stderr}");
}

#[test]
fn config_supplies_defaults_and_flags_override() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("exp.json");
    fs::write(&config, r#"{"disorder": {"n": 6, "seed": 1, "epsilon": 0.05}}"#).unwrap();
    let out = dir.path().join("out");
    run_ok(&[
        "--config",
        path_str(&config),
        "gen-disorder",
        "--seed",
        "9",
        "--out",
        path_str(&out),
    ]);
    let resolved: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(resolved["disorder"]["n"], 6);
    assert_eq!(resolved["disorder"]["seed"], 9);
    assert_eq!(resolved["disorder"]["epsilon"], 0.05);
    let (_, epsilon) = formats::read_disorder(&out.join("disorder.sgd")).unwrap();
    assert_eq!(epsilon, 0.05);
}

#[test]
fn disorder_roundtrip_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let d = DisorderRealization::sample_sk(10, 1.5, 21).unwrap();
    let first = dir.path().join("a.sgd");
    let second = dir.path().join("b.sgd");
    formats::write_disorder(&first, &d, 0.02).unwrap();
    let (read, epsilon) = formats::read_disorder(&first).unwrap();
    assert_eq!(read.content_id(), d.content_id());
    assert_eq!(epsilon, 0.02);
    formats::write_disorder(&second, &read, epsilon).unwrap();
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
}

#[test]
fn sample_set_roundtrip_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let mut rng = stream_rng(5, 0);
    let n = 6;
    let m = 40;
    let spins: Vec<i8> = (0..m * n)
        .map(|_| if rand::Rng::gen::<bool>(&mut rng) { 1 } else { -1 })
        .collect();
    for xs in [None, Some((0..m * n).map(|i| i as f64 * 0.25 - 3.0).collect::<Vec<f64>>())] {
        let set = SampleSet {
            disorder_id: "deadbeef01234567".to_string(),
            beta: 1.25,
            n_spins: n,
            n_samples: m,
            spins: spins.clone(),
            xs,
            meta: SampleMeta { sweeps_per_sample: 1, burn_in: 60, seed: 5 },
        };
        let first = dir.path().join("a.sgs");
        let second = dir.path().join("b.sgs");
        formats::write_sample_set(&first, &set).unwrap();
        let read = formats::read_sample_set(&first).unwrap();
        assert_eq!(read, set);
        formats::write_sample_set(&second, &read).unwrap();
        assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
    }
}

#[test]
fn checkpoint_roundtrip_preserves_the_model() {
    let dir = TempDir::new().unwrap();
    let model = FlowModel::init(10, 4, 77).unwrap();
    let first = dir.path().join("a.sgf");
    let second = dir.path().join("b.sgf");
    let meta = formats::TrainMeta {
        loss: "reverse".to_string(),
        beta: 5.0,
        update_index: 120,
        n_updates: 120,
        learning_rate: 1e-4,
        batch_size: 50,
        symmetrize: true,
        seed: 3,
    };
    formats::write_checkpoint(&first, &model, Some(&meta)).unwrap();
    let (read, read_meta) = formats::read_checkpoint(&first).unwrap();
    let read_meta = read_meta.expect("meta stored");
    assert_eq!(read_meta.beta, 5.0);
    assert_eq!(read_meta.loss, "reverse");

    let z: Vec<f64> = (0..10).map(|i| (i as f64 - 4.5) * 0.3).collect();
    let (x_orig, logdet_orig) = model.forward(&z).unwrap();
    let (x_read, logdet_read) = read.forward(&z).unwrap();
    assert_eq!(x_orig, x_read);
    assert_eq!(logdet_orig, logdet_read);

    formats::write_checkpoint(&second, &read, Some(&read_meta)).unwrap();
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
}

#[test]
fn pipeline_smoke_produces_all_artifacts() {
    let dir = TempDir::new().unwrap();
    let (disorder, pt_dir) = small_pipeline(dir.path());
    for slot in 0..3 {
        assert!(pt_dir.join(format!("pt_{slot:02}.sgs")).exists());
    }
    assert!(pt_dir.join("config.json").exists());
    assert!(pt_dir.join("provenance.json").exists());

    let fwd = dir.path().join("fwd");
    run_ok(&[
        "train",
        "--disorder",
        path_str(&disorder),
        "--loss",
        "forward",
        "--temp",
        "0.5",
        "--data",
        path_str(&pt_dir.join("pt_02.sgs")),
        "--updates",
        "60",
        "--seed",
        "2",
        "--snapshot-every",
        "30",
        "--checkpoint-every",
        "0",
        "--out",
        path_str(&fwd),
    ]);
    assert!(fwd.join("model.sgf").exists());
    let loss_rows = fs::read_to_string(fwd.join("loss.csv")).unwrap();
    assert_eq!(loss_rows.lines().count(), 61);

    let overlap = dir.path().join("overlap");
    run_ok(&[
        "analyze",
        "overlap",
        "--samples",
        path_str(&pt_dir.join("pt_00.sgs")),
        path_str(&pt_dir.join("pt_01.sgs")),
        path_str(&pt_dir.join("pt_02.sgs")),
        "--temp",
        "0.5",
        "--pairs",
        "5000",
        "--svg",
        "--out",
        path_str(&overlap),
    ]);
    assert!(overlap.join("overlap.csv").exists());
    assert!(overlap.join("overlap.svg").exists());

    let tri = dir.path().join("tri");
    run_ok(&[
        "analyze",
        "triangles",
        "--checkpoint",
        path_str(&fwd.join("model.sgf")),
        "--disorder",
        path_str(&disorder),
        "--count",
        "300",
        "--triples",
        "2000",
        "--out",
        path_str(&tri),
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tri.join("triangles.json")).unwrap()).unwrap();
    assert_eq!(report["source"], "flow-forward");
    let total = report["equilateral_fraction"].as_f64().unwrap()
        + report["acute_isosceles_fraction"].as_f64().unwrap()
        + report["other_fraction"].as_f64().unwrap();
    assert!((total - 1.0).abs() < 1e-12);

    let fe = dir.path().join("fe");
    run_ok(&[
        "analyze",
        "free-energy",
        "--disorder",
        path_str(&disorder),
        "--temp",
        "0.5",
        "--exact",
        "--forward-snapshots",
        path_str(&fwd.join("snapshots.csv")),
        "--x-samples",
        path_str(&pt_dir.join("pt_02.sgs")),
        "--out",
        path_str(&fe),
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fe.join("free_energy.json")).unwrap()).unwrap();
    assert_eq!(report["log_z_s_method"], "exact");
    assert!(report["forward_kl"]["value"].as_f64().unwrap().is_finite());

    let layers = dir.path().join("layers");
    run_ok(&[
        "analyze",
        "layers",
        "--checkpoint",
        path_str(&fwd.join("model.sgf")),
        "--disorder",
        path_str(&disorder),
        "--count",
        "300",
        "--pairs",
        "2000",
        "--triples",
        "2000",
        "--out",
        path_str(&layers),
    ]);
    for layer in 0..=4 {
        assert!(layers.join(format!("layer_{layer:02}_overlap.csv")).exists());
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(layers.join("layers.json")).unwrap()).unwrap();
    assert_eq!(report["layers"].as_array().unwrap().len(), 5);
}

#[test]
fn rerun_reproduces_identical_bytes() {
    let dir = TempDir::new().unwrap();
    let (disorder, _) = small_pipeline(dir.path());
    let out = dir.path().join("pt-rerun");
    let args = [
        "sample-pt",
        "--disorder",
        path_str(&disorder),
        "--t-min",
        "0.5",
        "--t-max",
        "5",
        "--replicas",
        "3",
        "--samples",
        "200",
        "--seed",
        "11",
        "--emit-x",
        "--out",
        path_str(&out),
    ];
    run_ok(&args);
    let snapshot: Vec<(PathBuf, Vec<u8>)> = fs::read_dir(&out)
        .unwrap()
        .map(|e| {
            let path = e.unwrap().path();
            let bytes = fs::read(&path).unwrap();
            (path, bytes)
        })
        .collect();
    fs::remove_dir_all(&out).unwrap();
    run_ok(&args);
    for (path, bytes) in snapshot {
        assert_eq!(fs::read(&path).unwrap(), bytes, "{} changed across reruns", path.display());
    }
}

#[test]
fn convert_rejects_already_decorated_input() {
    let dir = TempDir::new().unwrap();
    let (disorder, pt_dir) = small_pipeline(dir.path());
    run_err(
        &[
            "convert",
            "--disorder",
            path_str(&disorder),
            "--samples",
            path_str(&pt_dir.join("pt_00.sgs")),
            "--out",
            path_str(&dir.path().join("conv")),
        ],
        2,
    );
}

#[test]
fn analyze_requires_temperature_to_pick_among_files() {
    let dir = TempDir::new().unwrap();
    let (_, pt_dir) = small_pipeline(dir.path());
    let out = dir.path().join("pick");
    let stderr = run_err(
        &[
            "analyze",
            "overlap",
            "--samples",
            path_str(&pt_dir.join("pt_00.sgs")),
            path_str(&pt_dir.join("pt_01.sgs")),
            "--out",
            path_str(&out),
        ],
        2,
    );
    assert!(stderr.contains("--temp"), "stderr: {stderr}");
    run_err(
        &[
            "analyze",
            "overlap",
            "--samples",
            path_str(&pt_dir.join("pt_00.sgs")),
            path_str(&pt_dir.join("pt_01.sgs")),
            "--temp",
            "3.33",
            "--out",
            path_str(&out),
        ],
        2,
    );
}

#[test]
fn train_zero_updates_emits_initial_checkpoint_only() {
    let dir = TempDir::new().unwrap();
    let (disorder, pt_dir) = small_pipeline(dir.path());
    let out = dir.path().join("zero");
    run_ok(&[
        "train",
        "--disorder",
        path_str(&disorder),
        "--loss",
        "forward",
        "--temp",
        "0.5",
        "--data",
        path_str(&pt_dir.join("pt_02.sgs")),
        "--updates",
        "0",
        "--out",
        path_str(&out),
    ]);
    assert!(out.join("model.sgf").exists());
    let loss_rows = fs::read_to_string(out.join("loss.csv")).unwrap();
    assert_eq!(loss_rows, "update_index,loss\n");
    let names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("ckpt_"))
        .collect();
    assert!(names.is_empty(), "unexpected periodic checkpoints: {names:?}");

    let (model, meta) = formats::read_checkpoint(&out.join("model.sgf")).unwrap();
    assert_eq!(meta.unwrap().update_index, 0);
    assert_eq!(model.n_sites(), 8);
}

#[test]
fn snapshot_readback_returns_last_row() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("snapshots.csv");
    fs::write(&path, "update_index,loss,std_error\n0,2.5,0.1\n10,1.25,0.05\n").unwrap();
    assert_eq!(formats::read_final_snapshot(&path).unwrap(), (1.25, 0.05));
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas")
}

fn vo2snn(outdir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vo2snn"))
        .arg("--outdir")
        .arg(outdir)
        .args(["--tag", "t"])
        .args(args)
        .output()
        .expect("binary runs")
}

/// Run, require success, and check stdout against the shipped schema and
/// the summary file on disk.
fn run_ok(outdir: &Path, args: &[&str]) -> Value {
    let out = vo2snn(outdir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: Value = serde_json::from_slice(&out.stdout).expect("stdout is JSON");
    let sub = summary["subcommand"].as_str().unwrap().to_string();
    let schema: Value = serde_json::from_str(
        &fs::read_to_string(schema_dir().join(format!("{sub}.schema.json"))).unwrap(),
    )
    .unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator
        .iter_errors(&summary)
        .map(|e| e.to_string())
        .collect();
    assert!(errors.is_empty(), "{sub}: {errors:?}");
    let on_disk: Value =
        serde_json::from_str(&fs::read_to_string(outdir.join(format!("{sub}-t.json"))).unwrap())
            .unwrap();
    assert_eq!(on_disk, summary);
    for f in summary["files"].as_array().unwrap() {
        assert!(outdir.join(f.as_str().unwrap()).is_file(), "{f}");
    }
    summary
}

const QUICK: &[&[&str]] = &[
    &["iv", "--level", "1"],
    &["cycles", "--n", "200"],
    &["oscillate", "--level", "2"],
    &[
        "oscillate",
        "--drive",
        "constant",
        "--amplitude",
        "10",
        "--jitter",
        "0.01",
    ],
    &["phase", "--nr", "16", "--nv", "16"],
    &["vf", "--levels", "1,5", "--points", "8", "--checks", "1"],
    &["power", "--levels", "1,4", "--points", "8", "--checks", "1"],
    &["net2x2"],
];

#[test]
fn every_device_subcommand_matches_its_schema() {
    let dir = tempfile::tempdir().unwrap();
    for args in QUICK {
        run_ok(dir.path(), args);
    }
}

#[test]
fn iv_extracts_the_level_one_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let s = run_ok(dir.path(), &["iv", "--level", "1"]);
    assert!((s["v_th"].as_f64().unwrap() - 6.5).abs() <= s["step"].as_f64().unwrap());
    let csv = fs::read_to_string(dir.path().join("iv-t.csv")).unwrap();
    assert!(csv.starts_with("v_applied,current,v_device,branch,state\n"));
}

#[test]
fn same_flags_give_identical_artifacts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["cycles", "--n", "300", "--seed", "7"];
    run_ok(a.path(), &args);
    run_ok(b.path(), &args);
    for f in ["cycles-t.csv", "cycles-t.json", "cycles-t.svg"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["phase", "--level", "99"][..],
        &["iv", "--load", "-5"],
        &["oscillate", "--drive", "sine"],
        &["oscillate", "--drive", "square"],
        &["oscillate", "--amplitude", "3"],
        &["nosuch"],
        &["iv", "--unknown-flag"],
    ] {
        let out = vo2snn(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    assert!(fs::read_dir(dir.path()).map_or(true, |mut d| d.next().is_none()));
}

#[test]
fn runtime_errors_exit_1_naming_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = vo2snn(dir.path(), &["eval", "--model", "/nonexistent/net.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("eval") && err.contains("/nonexistent/net.json"),
        "{err}"
    );

    let bad = dir.path().join("bad");
    fs::create_dir(&bad).unwrap();
    fs::write(
        bad.join("t10k-images-idx3-ubyte"),
        [0u8, 0, 8, 1, 0, 0, 0, 0],
    )
    .unwrap();
    fs::write(
        bad.join("t10k-labels-idx1-ubyte"),
        [0u8, 0, 8, 1, 0, 0, 0, 0],
    )
    .unwrap();
    fs::write(bad.join("net.json"), "{}").unwrap();
    let model = bad.join("net.json");
    let out = vo2snn(dir.path(), &["eval", "--model", model.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

fn mnist_dir() -> Option<PathBuf> {
    let dir = vo2snn::mnist::resolve_data_dir(None);
    if dir.join(vo2snn::mnist::TEST_LABELS).is_file() {
        Some(dir)
    } else {
        eprintln!("MNIST not found at {}; skipping", dir.display());
        None
    }
}

#[test]
fn network_subcommands_match_their_schemas() {
    let Some(data) = mnist_dir() else { return };
    let data = data.to_str().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("net.json");
    let model = model.to_str().unwrap();
    let t = run_ok(
        dir.path(),
        &[
            "train",
            "--data-dir",
            data,
            "--train-limit",
            "300",
            "--test-limit",
            "100",
            "--epochs",
            "2",
            "--model",
            model,
        ],
    );
    assert_eq!(t["history"].as_array().unwrap().len(), 2);
    assert_eq!(
        fs::read(model).unwrap(),
        fs::read(dir.path().join("train-t-network.json")).unwrap()
    );
    let e = run_ok(
        dir.path(),
        &[
            "eval",
            "--model",
            model,
            "--data-dir",
            data,
            "--test-limit",
            "100",
        ],
    );
    assert_eq!(e["accuracy"], t["final_test_accuracy"]);
    let csv = fs::read_to_string(dir.path().join("eval-t.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
    let i = run_ok(
        dir.path(),
        &[
            "infer",
            "--model",
            model,
            "--data-dir",
            data,
            "--index",
            "3",
        ],
    );
    let r = run_ok(
        dir.path(),
        &[
            "raster",
            "--model",
            model,
            "--data-dir",
            data,
            "--index",
            "3",
        ],
    );
    assert_eq!(i["predicted"], r["predicted"]);
    assert_eq!(r["spike_counts"].as_array().unwrap().len(), 3);
}

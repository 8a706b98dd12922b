use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn alcart(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alcart"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.json");
    let cfg = r#"{
        "dataset": {"generator": {
            "num_examples": 300, "num_classes": 3, "vision_dims": 3, "language_dims": 2,
            "cluster_spread": 1.0, "outlier_fraction_noise": 0.15, "outlier_fraction_underspecified": 0.15,
            "underspecified_group_size": 3, "rng_seed": 9
        }},
        "model": {"kind": "mlp", "hidden_dim": 8},
        "strategies": ["random", "entropy", "bald"],
        "batch_fraction": 0.25,
        "replicate_seeds": [1, 2],
        "removal_fraction": 0.25,
        "removal_fractions": [0.25]
    }"#;
    fs::write(&path, cfg).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn no_arguments_is_a_usage_error() {
    assert_eq!(alcart(&[]).status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let out = alcart(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("ablate"));
}

#[test]
fn missing_config_file_is_a_runtime_error_naming_the_path() {
    let out = alcart(&["run", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/cfg.json"));
}

#[test]
fn run_without_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = alcart(&["run", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn empty_results_dir_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(alcart(&["report", "--results", d, "--out", d]).status.code(), Some(1));
}

#[test]
fn gen_map_run_profile_report_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let root = dir.path();
    let sub = |name: &str| root.join(name).to_str().unwrap().to_string();

    let ok = |args: &[&str]| {
        let out = alcart(args);
        assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    };
    ok(&["gen", "--config", &cfg, "--out", &sub("data")]);
    assert!(root.join("data/dataset.csv").exists());
    ok(&["map", "--config", &cfg, "--out", &sub("map")]);
    ok(&["run", "--config", &cfg, "--out", &sub("run1")]);
    ok(&["run", "--config", &cfg, "--out", &sub("run2"), "--parallel", "2"]);
    ok(&["profile", "--results", &sub("run1"), "--map", &sub("map/map.csv"), "--out", &sub("profile")]);
    ok(&["report", "--results", &sub("run1"), "--map", &sub("map/map.csv"), "--out", &sub("report")]);
    ok(&["ablate", "--config", &cfg, "--out", &sub("ablate"), "--seed", "4"]);

    // identical config and seeds give byte-identical result files
    let mut jsons = 0;
    for entry in fs::read_dir(root.join("run1")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let twin = root.join("run2").join(path.file_name().unwrap());
            assert_eq!(fs::read(&path).unwrap(), fs::read(twin).unwrap());
            jsons += 1;
        }
    }
    assert_eq!(jsons, 6);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(root.join("report/manifest.json")).unwrap()).unwrap();
    assert!(!manifest["entries"].as_array().unwrap().is_empty());
    let eff = fs::read_to_string(root.join("ablate/efficiency.csv")).unwrap();
    assert!(eff.starts_with("strategy,removal_fraction,target_accuracy"));
    assert!(fs::read_to_string(root.join("profile/profiles.csv")).unwrap().contains("entropy"));
}

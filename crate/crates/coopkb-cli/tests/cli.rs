//! End-to-end checks of the CLI verbs against a miniature sweep.

use std::fs;
use std::path::Path;
use std::process::Command;

const TINY_CONFIG: &str = r#"
[instance]
agents = 2
arms_per_agent = 3
feature_dim = 3

[fc]
enabled = true
delta = 0.05
runs = 3
delta_min_grid = [0.4]
regimes = ["ones"]
algorithms = ["coop"]

[fb]
enabled = true
delta_min = 0.3
runs = 3
budget_grid = [2000]
regimes = ["ones"]
algorithms = ["coop", "uniform"]

[experiment]
master_seed = 5
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coopkb"))
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("tiny.toml");
    fs::write(&path, TINY_CONFIG).unwrap();
    path
}

#[test]
fn dry_run_prints_grid_and_exits_zero() {
    let dir = tempdir();
    let config = write_config(&dir);
    let out = bin()
        .args(["run", "--config"])
        .arg(&config)
        .args(["--out"])
        .arg(dir.join("artifacts"))
        .arg("--dry-run")
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("1 fixed-confidence points (3 runs)"), "{text}");
    assert!(text.contains("2 fixed-budget points (6 runs)"), "{text}");
    // dry run writes nothing
    assert!(!dir.join("artifacts").exists());
}

#[test]
fn run_writes_all_artifacts_and_is_deterministic() {
    let dir = tempdir();
    let config = write_config(&dir);
    for out_name in ["a", "b"] {
        let status = bin()
            .args(["run", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(dir.join(out_name))
            .status()
            .unwrap();
        assert!(status.success());
    }
    for name in ["results.csv", "resolved_config.toml"] {
        assert!(dir.join("a").join(name).exists(), "missing {name}");
    }
    assert!(dir.join("a/plots/fc_ones.svg").exists());
    assert!(dir.join("a/plots/fb_ones.svg").exists());
    assert!(dir.join("a/reports/fc_ones_coop-kernel-fc_d0.4.json").exists());
    let csv_a = fs::read(dir.join("a/results.csv")).unwrap();
    let csv_b = fs::read(dir.join("b/results.csv")).unwrap();
    assert_eq!(csv_a, csv_b, "identical config + seed must give byte-identical CSVs");

    // plots regenerate from the CSV alone
    let status = bin().args(["plot", "--out"]).arg(dir.join("a")).status().unwrap();
    assert!(status.success());
}

#[test]
fn invalid_config_exits_two_with_line_message() {
    let dir = tempdir();
    let path = dir.join("bad.toml");
    fs::write(&path, "[instance\nagents = 2").unwrap();
    let out = bin()
        .args(["run", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.join("artifacts"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stderr);
    assert!(text.contains("line 1"), "error message lacks position: {text}");
}

#[test]
fn semantic_config_error_exits_two() {
    let dir = tempdir();
    let path = dir.join("bad.toml");
    fs::write(
        &path,
        "[instance]\nagents = 2\narms_per_agent = 3\nfeature_dim = 3\n[fc]\nenabled = true\ndelta = 2.0\n",
    )
    .unwrap();
    let out = bin()
        .args(["run", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.join("artifacts"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fc.delta"));
}

#[test]
fn verify_passes_on_fresh_checkout() {
    let out = bin().arg("verify").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("PASS pair-norm-oracle"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn verify_tolerance_scale_tightens() {
    // an absurdly tight scale must fail some floating-point comparison
    let out = bin().args(["verify", "--tol-scale", "1e-20"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn bundled_configs_parse_and_resolve() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["paper_fc.toml", "paper_fb.toml", "smoke.toml"] {
        let path = configs.join(name);
        let out = bin()
            .args(["run", "--config"])
            .arg(&path)
            .args(["--out", "/nonexistent-not-used", "--dry-run"])
            .output()
            .unwrap();
        assert!(out.status.success(), "{name} failed to resolve");
        assert!(String::from_utf8_lossy(&out.stdout).contains("resolved grid"));
    }
}

#[test]
fn diag_emits_json_blocks() {
    let dir = tempdir();
    let config = write_config(&dir);
    let out = bin().args(["diag", "--config"]).arg(&config).output().unwrap();
    assert!(out.status.success());
    let parsed: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("diag output is JSON");
    assert!(parsed.as_array().map(|a| !a.is_empty()).unwrap_or(false));
}

fn tempdir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "coopkb-cli-test-{}-{}",
        std::process::id(),
        rand::random::<u32>()
    ));
    fs::create_dir_all(&dir).unwrap();
    dir
}

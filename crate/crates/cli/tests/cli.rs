use std::path::Path;
use std::process::Command;

fn sojourn(args: &[&str], out: &Path) -> (i32, String, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_sojourn"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("SOJOURN_SEED")
        .env_remove("SOJOURN_WORKERS")
        .env_remove("SOJOURN_CONFIG")
        .env_remove("SOJOURN_SAMPLES")
        .output()
        .unwrap();
    (o.status.code().unwrap(), String::from_utf8_lossy(&o.stdout).into(), String::from_utf8_lossy(&o.stderr).into())
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&read(&dir.join("manifest.json"))).unwrap()
}

#[test]
fn oracle_table_and_unsupported_alpha() {
    let d = tempfile::tempdir().unwrap();
    let (code, _, _) = sojourn(&["oracle", "--x", "0,1"], d.path());
    assert_eq!(code, 0);
    let csv = read(&d.path().join("oracle.csv"));
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "x,S,value");
    let v: f64 = rows[1].split(',').nth(2).unwrap().parse().unwrap();
    assert!((v - 1.56419).abs() < 5e-6);
    assert_eq!(rows[2], "1,1,0");
    let (code, _, err) = sojourn(&["oracle", "--alpha", "1"], &d.path().join("x"));
    assert_eq!(code, 2);
    assert!(err.contains("no closed-form oracle; use --family brownian-sup checks"), "{err}");
}

#[test]
fn invalid_parameters_exit_with_config_code() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(sojourn(&["estimate-constant", "--alpha", "3", "--seed", "1"], d.path()).0, 2);
    assert_eq!(sojourn(&["estimate-constant", "--family", "nonsense"], d.path()).0, 2);
    assert_eq!(sojourn(&["double-sum", "--n-values", "2,64", "--seed", "1", "--samples", "200"], d.path()).0, 2);
    let bad = d.path().join("bad.toml");
    std::fs::write(&bad, "[constant]\nalpah = 1.0\n").unwrap();
    let (code, _, err) = sojourn(&["estimate-constant", "--config", bad.to_str().unwrap()], d.path());
    assert_eq!(code, 2);
    assert!(err.contains("alpah"), "{err}");
}

#[test]
fn vanishing_by_bound_is_flagged() {
    let d = tempfile::tempdir().unwrap();
    let args = ["estimate-constant", "--alpha", "2", "--x", "0,1.5", "--samples", "1000", "--seed", "4", "--ppu", "64"];
    assert_eq!(sojourn(&args, d.path()).0, 0);
    let csv = read(&d.path().join("constant.csv"));
    let last = csv.lines().last().unwrap();
    assert!(last.starts_with("1.5,B,0,0,1,") && last.ends_with("vanishing-by-bound"), "{last}");
    let m = manifest(d.path());
    assert!(m["flags"].as_array().unwrap().iter().any(|f| f["name"] == "vanishing-by-bound"));
    assert_eq!(m["outputs"][0]["schema"], "constant/v1");
}

#[test]
fn seed_is_drawn_and_recorded_then_replayable() {
    let d = tempfile::tempdir().unwrap();
    let a = d.path().join("a");
    let args = ["estimate-constant", "--alpha", "1.5", "--samples", "500", "--ppu", "32"];
    assert_eq!(sojourn(&args, &a).0, 0);
    let seed = manifest(&a)["config"]["seed"].as_u64().unwrap();
    let b = d.path().join("b");
    let m = a.join("manifest.json");
    assert_eq!(sojourn(&["estimate-constant", "--config", m.to_str().unwrap()], &b).0, 0);
    assert_eq!(manifest(&b)["config"]["seed"].as_u64().unwrap(), seed);
    assert_eq!(read(&a.join("constant.csv")), read(&b.join("constant.csv")));
}

#[test]
fn experiment_starts_at_one_and_queue_excludes_window_end() {
    let d = tempfile::tempdir().unwrap();
    let args = [
        "run-experiment", "--family", "chi", "--levels", "2,2.5,3", "--x", "0,0.5,1", "--ppu", "128", "--conditioned", "100",
        "--seed", "9",
    ];
    assert_eq!(sojourn(&args, d.path()).0, 0);
    let csv = read(&d.path().join("experiment.csv"));
    let first = csv.lines().nth(1).unwrap();
    assert!(first.starts_with("2,0,1,"), "{first}");
    let q = d.path().join("q");
    let toml = q.with_extension("toml");
    std::fs::write(
        &toml,
        "seed = 3\n[experiment]\nfamily = { kind = \"queue\", alpha = 1.0, c = 1.0 }\nlevels = [1.5, 2.0, 2.5]\nxs = [0.0, 1.0, 4.0]\npoints_per_unit = 64.0\nn_target_conditioned = 50\nqueue_regime = { kind = \"finite\", t = 4.0 }\n[experiment.target]\nn_samples = 500\npoints_per_unit = 8.0\n",
    )
    .unwrap();
    assert_eq!(sojourn(&["run-experiment", "--config", toml.to_str().unwrap()], &q).0, 0);
    let csv = read(&q.join("experiment.csv"));
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(1) != Some("4")));
    assert!(manifest(&q)["flags"].as_array().unwrap().iter().any(|f| f["name"] == "excluded-x"));
}

#[test]
fn environment_overrides_apply() {
    let d = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_sojourn"))
        .args(["oracle", "--family", "queue"])
        .env("SOJOURN_OUT", d.path())
        .env("SOJOURN_SEED", "77")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(manifest(d.path())["config"]["seed"], 77);
    let csv = read(&d.path().join("queue_closed_forms.csv"));
    assert!(csv.lines().nth(1).unwrap().starts_with("4,1,4,2,0.5,0.5,0.125,"));
}

use std::path::Path;
use std::process::{Command, Output};

fn misinfo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_misinfo")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn invalid_value_exits_one_and_names_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"network": {"q": 1.5}}"#);
    let out = dir.path().join("out");
    let o = misinfo(&["ensemble", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("network.q"), "{}", stderr(&o));
    assert!(!out.join("run_manifest.json").exists());
}

#[test]
fn all_violations_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"network": {"q": -0.1, "alpha": 0.5}}"#);
    let o = misinfo(&["ensemble", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("network.q") && err.contains("network.alpha"), "{err}");
}

#[test]
fn unknown_field_and_wrong_type() {
    let dir = tempfile::tempdir().unwrap();
    for (text, key) in [
        (r#"{"strain": {"lamda_1": 1.0}}"#, "strain"),
        (r#"{"solver": {"dt": "small"}}"#, "solver.dt"),
    ] {
        let cfg = write(dir.path(), "c.json", text);
        let o = misinfo(&["meanfield", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(1));
        assert!(stderr(&o).contains(key), "{}", stderr(&o));
    }
}

#[test]
fn unknown_subcommand_exits_one() {
    assert_eq!(misinfo(&["spread"]).status.code(), Some(1));
    assert_eq!(misinfo(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let records = write(
        dir.path(),
        "r.csv",
        "participant_gender,participant_age_band,participant_race,perceived_gender,perceived_age_band,perceived_race,guess,truth\n\
         female,30-49,white,female,30-49,white,real,fake\n",
    );
    let o = misinfo(&[
        "stats",
        "compare",
        "--a",
        &records,
        "--b",
        &records,
        "--a-filter",
        "participant_race=poc",
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn minimal_config_resolves_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"network": {"d_max": 20}}"#);
    let out = dir.path().join("o");
    let o = misinfo(&["ensemble", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = json(&out.join("run_manifest.json"));
    assert_eq!(m["command"], "ensemble");
    assert_eq!(m["config"]["network"]["d_max"], 20);
    assert_eq!(m["config"]["network"]["alpha"], 2.5);
    assert_eq!(m["config"]["network"]["q"], 0.8);
    let outputs: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    for f in &outputs {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn zero_lambda_never_spreads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"network": {"d_max": 30}, "strain": {"lambda_1": 0, "lambda_2": 0, "gamma": 0.5}, "solver": {"t_max": 50}}"#,
    );
    let out = dir.path().join("o");
    let o = misinfo(&["meanfield", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = json(&out.join("summary.json"));
    assert!(s["final_total"].as_f64().unwrap() < 1e-6, "{s}");
}

#[test]
fn identical_groups_are_indistinguishable() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "m.csv", "tp,fn,fp,tn\n120,80,70,130\n");
    let out = dir.path().join("o");
    let o = misinfo(&["stats", "compare", "--a", &m, "--b", &m, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&out.join("compare.json"));
    let cred = r["result"]["credibility"].as_f64().unwrap();
    assert!((cred - 0.5).abs() <= 0.02, "{cred}");
    assert_eq!(r["result"]["significant"], false);
}

#[test]
fn seed_override_is_recorded_and_changes_sample() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"network": {"d_max": 20}, "n_nodes": 500}"#);
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let o = misinfo(&["ensemble", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", seed]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let (a, b, c) = (run("1", "a"), run("1", "b"), run("2", "c"));
    assert_eq!(json(&a.join("run_manifest.json"))["seed"], 1);
    let edges = |d: &Path| std::fs::read(d.join("edges.csv")).unwrap();
    assert_eq!(edges(&a), edges(&b));
    assert_ne!(edges(&a), edges(&c));
}

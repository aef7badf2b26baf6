use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fluxlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fluxlab"))
        .args(args)
        .current_dir(dir)
        .env_remove("FLUXLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn identities_on_defaults_lists_seven_passing_kinds() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fluxlab(&["identities", "--out", "run"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&tmp.path().join("run"));
    let kinds = s["result"]["kinds"].as_array().unwrap();
    assert_eq!(kinds.len(), 7);
    assert!(kinds.iter().all(|k| k["pass"] == true && k["max_error"].as_f64().unwrap() <= 1e-12));
    assert_eq!(s["schema"], "fluxlab-report-v1");
    assert!(s["header"]["timestamp_unix"].is_u64());
    assert!(s["header"]["git_describe"].is_string());
    // 3 coupling sets x 10 fields x 7 kinds
    let csv = fs::read_to_string(tmp.path().join("run/identities.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 210);
}

#[test]
fn malformed_config_exits_one_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.toml"), "[model\nd = 2\n").unwrap();
    let out = fluxlab(&["spectrum", "--config", "bad.toml", "--out", "run"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(!tmp.path().join("run").exists());
}

#[test]
fn invalid_values_are_all_reported_by_key() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.toml"), "[model]\ng = -1\nK = 0\ncolour = 3\n").unwrap();
    let out = fluxlab(&["check-theorem", "--config", "c.toml", "--out", "run"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    for key in ["model.g", "model.K", "model.colour"] {
        assert!(err.contains(key), "{key} not in {err}");
    }
    assert!(!tmp.path().join("run").exists());
}

#[test]
fn missing_config_file_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fluxlab(&["spectrum", "--config", "nope.toml", "--out", "run"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(!tmp.path().join("run").exists());
}

#[test]
fn reruns_give_identical_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("c.toml"),
        "[run]\nsamples = 4\n[anneal]\nrestarts = 3\nsweeps_per_temp = 2\ncooling = 0.5\n",
    )
    .unwrap();
    for exp in ["check-theorem", "anneal", "orbit-average"] {
        for run in ["a", "b"] {
            let out = fluxlab(
                &[exp, "--config", "c.toml", "--seed", "11", "--out", &format!("{exp}_{run}")],
                tmp.path(),
            );
            assert!(matches!(out.status.code(), Some(0 | 2)), "{exp}");
        }
        let a = tmp.path().join(format!("{exp}_a"));
        let b = tmp.path().join(format!("{exp}_b"));
        let mut n = 0;
        for entry in fs::read_dir(&a).unwrap() {
            let name = entry.unwrap().file_name();
            if name.to_string_lossy().ends_with(".csv") {
                assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?}");
                n += 1;
            }
        }
        assert!(n > 0);
        let (sa, sb) = (summary(&a), summary(&b));
        assert_eq!(sa["result"], sb["result"]);
        assert_eq!(sa["config_hash"], sb["config_hash"]);
    }
}

#[test]
fn seed_flag_changes_hash_and_data() {
    let tmp = tempfile::tempdir().unwrap();
    for (seed, dir) in [("1", "s1"), ("2", "s2")] {
        let out = fluxlab(&["check-theorem", "--seed", seed, "--out", dir], tmp.path());
        assert_eq!(out.status.code(), Some(0));
    }
    let a = fs::read_to_string(tmp.path().join("s1/theorem_margins.csv")).unwrap();
    let b = fs::read_to_string(tmp.path().join("s2/theorem_margins.csv")).unwrap();
    assert_ne!(a.lines().next(), b.lines().next());
    assert_ne!(a, b);
}

#[test]
fn every_output_names_schema_and_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fluxlab(&["correlations", "--out", "run"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let dir = tmp.path().join("run");
    let s = summary(&dir);
    let hash = s["config_hash"].as_str().unwrap().to_string();
    for f in s["files"].as_array().unwrap() {
        let text = fs::read_to_string(dir.join(f.as_str().unwrap())).unwrap();
        let first = text.lines().next().unwrap();
        assert!(first.starts_with("# schema=fluxlab-report-v1"));
        assert!(first.contains(&hash));
    }
}

#[test]
fn json_config_and_thread_env() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.json"), r#"{"model": {"d": 2, "L": 1}, "run": {"field": "pi-flux"}}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fluxlab"))
        .args(["spectrum", "--config", "c.json", "--out", "run"])
        .current_dir(tmp.path())
        .env("FLUXLAB_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&tmp.path().join("run"));
    assert_eq!(s["header"]["threads"], 2);
    assert_eq!(s["result"]["dim"], 256);
    let csv = fs::read_to_string(tmp.path().join("run/spectrum.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some("sector,index,eigenvalue"));
    assert_eq!(csv.lines().count(), 2 + 256);

    let bad = Command::new(env!("CARGO_BIN_EXE_fluxlab"))
        .args(["spectrum", "--out", "run2"])
        .current_dir(tmp.path())
        .env("FLUXLAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn verdict_failure_exits_two() {
    // a schedule this short cannot reach the flux target from random starts
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("c.toml"),
        "[model]\nkappa = 0\ng = 0\n[anneal]\nrestarts = 4\nsweeps_per_temp = 1\nt_initial = 0.01\nt_final = 0.01\nproposal_width = 0.01\n",
    )
    .unwrap();
    let out = fluxlab(&["anneal", "--config", "c.toml", "--out", "run"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let s = summary(&tmp.path().join("run"));
    assert_eq!(s["verdict"], false);
    let trace = fs::read_to_string(tmp.path().join("run/anneal_trace.csv")).unwrap();
    assert!(trace.lines().nth(1).unwrap().starts_with("restart,step,temperature,objective,flux_distance"));
}

use std::path::Path;
use std::process::{Command, Output};

fn cegmix(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_cegmix")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "cegmix {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_fit_and_score() {
    let dir = tempfile::tempdir().unwrap();
    let p = |f: &str| dir.path().join(f).to_string_lossy().into_owned();
    cegmix(&["simulate", "--family", "binomial", "--units", "12", "--stages", "2", "--seed", "4",
        "--data", &p("d.csv"), "--truth", &p("truth.json")]);
    cegmix(&["fit-ahc", "--data", &p("d.csv"), "--out", &p("ahc.json")]);
    let ahc = json(&dir.path().join("ahc.json"));
    std::fs::write(dir.path().join("pred.json"), ahc["partition"].to_string()).unwrap();
    let out = cegmix(&["score", "--pred", &p("pred.json"), "--truth", &p("truth.json")]);
    let scores: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(scores["nmi"].as_f64().unwrap() > 0.9);
    assert!(scores["rand"].as_f64().unwrap() > 0.9);
}

#[test]
fn exact_search_on_small_input() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    std::fs::write(&data, "situation_id,successes,totals\na,5,100\nb,7,100\nc,90,100\n").unwrap();
    let out = cegmix(&["fit-ahc", "--exact", "--data", data.to_str().unwrap()]);
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["evaluated"], 5);
}

#[test]
fn fit_mixture_saves_draws() {
    let dir = tempfile::tempdir().unwrap();
    let p = |f: &str| dir.path().join(f).to_string_lossy().into_owned();
    cegmix(&["simulate", "--family", "weibull", "--units", "10", "--stages", "2", "--seed", "2",
        "--data", &p("e.csv"), "--truth", &p("truth.json")]);
    std::fs::create_dir(dir.path().join("draws")).unwrap();
    cegmix(&["fit-mixture", "--family", "weibull", "--data", &p("e.csv"), "--k-max", "3",
        "--chains", "2", "--warmup", "150", "--samples", "500", "--save-draws", &p("draws"),
        "--out", &p("fit.json")]);
    let fit = json(&dir.path().join("fit.json"));
    assert!(fit["k_selected"].as_u64().unwrap() >= 2);
    let dump = std::fs::read_to_string(dir.path().join("draws/k2_chain1.csv")).unwrap();
    let mut lines = dump.lines();
    assert_eq!(lines.next().unwrap(), "iter,param_1,param_2,param_3,param_4");
    assert_eq!(lines.count(), 500);
}

#[test]
fn experiment_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"methods": ["ahc"], "scenarios": [{"family": "binomial", "units": 20, "stages": 2, "replicates": 3, "seed": 5}]}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    cegmix(&["experiment", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", "1"]);
    for f in ["trials.csv", "summary_table1.csv", "summary_table2.csv", "summary_table3.csv", "convergence.csv", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert_eq!(std::fs::read_to_string(out.join("trials.csv")).unwrap().lines().count(), 4);
}

#[test]
fn dot_output() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("t.json");
    std::fs::write(
        &tree,
        r#"{"root": "r", "edges": [["r","a","x"],["r","b","y"],["a","l1","u"],["a","l2","v"],["b","l3","u"],["b","l4","v"]],
            "staging": [["r"], ["a","b"]]}"#,
    )
    .unwrap();
    let out = cegmix(&["dot", "--tree", tree.to_str().unwrap()]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("digraph ceg"));
    assert_eq!(text.matches("->").count(), 4);
    let out = cegmix(&["dot", "--staged-tree", "--tree", tree.to_str().unwrap()]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().matches("->").count(), 6);
}

#[test]
fn bad_input_fails_cleanly() {
    let out = Command::new(env!("CARGO_BIN_EXE_cegmix"))
        .args(["fit-ahc", "--data", "/nonexistent.csv"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

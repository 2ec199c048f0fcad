use std::path::Path;
use std::process::{Command, Output};

fn isinglab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isinglab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn run_to_file(dir: &Path, name: &str, args: &[&str]) -> Vec<u8> {
    let path = dir.join(name);
    let mut full = args.to_vec();
    full.extend(["--out", path.to_str().unwrap()]);
    let out = isinglab(&full);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::read(path).unwrap()
}

#[test]
fn graph_emits_header_and_spectrum() {
    let out = isinglab(&["graph", "--n", "8", "--j-grid", "0.4"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    let first = lines.next().unwrap();
    assert!(first.starts_with("# figure=spectrum") && first.contains("j_crit=0.5"));
    assert_eq!(lines.next().unwrap(), "j,k,lambda,residual");
    assert_eq!(lines.count(), 8);
    assert!(text.contains("0.4,4,1.6,"));
}

#[test]
fn seeded_output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["basins", "--runs", "300", "--seed", "9", "--p", "1.5"];
    let a = run_to_file(dir.path(), "a.csv", &args);
    let b = run_to_file(dir.path(), "b.csv", &args);
    assert_eq!(a, b);
    let c = run_to_file(
        dir.path(),
        "c.csv",
        &["basins", "--runs", "300", "--seed", "10", "--p", "1.5"],
    );
    assert_ne!(a, c);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 302);
}

#[test]
fn json_output_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, "format = \"json\"\n[instance]\nn = 8\nj = 0.6\n").unwrap();
    let out = isinglab(&["oracle", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["figure"], "oracle");
    assert_eq!(doc["params"]["j"], 0.6);
    // j above 4/n: the eight S1 states are degenerate ground states
    assert_eq!(doc["params"]["ground_states"].as_str().unwrap().split('|').count(), 8);
    let total: u64 = doc["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r[1].as_u64().unwrap())
        .sum();
    assert_eq!(total, 256);
}

#[test]
fn small_sweep_rows_are_ordered() {
    let out = isinglab(&[
        "sweep",
        "--n",
        "8",
        "--j-grid",
        "0.45,0.3",
        "--runs",
        "40",
        "--variants",
        "CIM-I,HT",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let rows: Vec<Vec<&str>> = text.lines().skip(2).map(|l| l.split(',').collect()).collect();
    let keys: Vec<(&str, &str)> = rows.iter().map(|r| (r[0], r[2])).collect();
    assert_eq!(
        keys,
        [
            ("HT", "0.45"),
            ("HT", "0.3"),
            ("CIM-I", "0.45"),
            ("CIM-I", "0.3"),
            ("QA", "0.45"),
            ("QA", "0.3")
        ]
    );
    for r in &rows {
        let p: f64 = r[5].parse().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[instance]\nj_grid = []\n").unwrap();
    let unknown = dir.path().join("unknown.toml");
    std::fs::write(&unknown, "[qa]\nbogus = 1\n").unwrap();
    for args in [
        vec!["graph", "--n", "7"],
        vec!["sweep", "--config", bad.to_str().unwrap()],
        vec!["oracle", "--config", unknown.to_str().unwrap()],
        vec!["verify", "--only", "12"],
        vec!["no-such-command"],
        vec!["basins", "--runs", "0"],
    ] {
        let out = isinglab(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn verify_subset_passes() {
    let out = isinglab(&["verify", "--only", "1,3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().skip(2).all(|l| l.contains(",true,")));
}

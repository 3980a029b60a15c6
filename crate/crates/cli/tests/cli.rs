use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fmod(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fmod"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "status {:?}, stderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TWO_EDGES: &str = "0,1,0,0\n1,0,0,0\n0,0,0,1\n0,0,1,0\n";

#[test]
fn mi_prints_mutual_information() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "p.csv", "0.4,0.1\n0.1,0.4\n");
    let kl: f64 = stdout(&fmod(&["mi", "--input", s(&p), "--family", "kl"]))
        .trim()
        .parse()
        .unwrap();
    assert!((kl - (0.8 * 1.6_f64.ln() + 0.2 * 0.4_f64.ln())).abs() < 1e-15);
    let pearson: f64 = stdout(&fmod(&["mi", "--input", s(&p), "--family", "pearson"]))
        .trim()
        .parse()
        .unwrap();
    assert!((pearson - 0.36).abs() < 1e-15);
}

#[test]
fn newman_two_disjoint_edges() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.csv", TWO_EDGES);
    let part = write(&dir, "part.txt", "x\nx\ny\ny\n");
    let q: f64 = stdout(&fmod(&[
        "newman",
        "--adjacency",
        s(&a),
        "--partition",
        s(&part),
    ]))
    .trim()
    .parse()
    .unwrap();
    assert_eq!(q, 0.5);
}

#[test]
fn bipartition_prints_signs_and_objective() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.csv", TWO_EDGES);
    let text = stdout(&fmod(&["bipartition", "--adjacency", s(&a)]));
    assert_eq!(text, "signs: 1 1 -1 -1\nobjective: 1\n");
}

#[test]
fn modularity_report_and_labels() {
    let dir = TempDir::new().unwrap();
    let edges = write(
        &dir,
        "g.tsv",
        "ann\tbooks\t3\nann\tfilms\nbob\tbooks\nbob\tmusic\t2\ncat\tmusic\t4\ncat\tfilms\n",
    );
    let out = dir.path().join("report.json");
    stdout(&fmod(&[
        "modularity",
        "--edges",
        s(&edges),
        "--family",
        "pearson",
        "--rank",
        "2",
        "--out",
        s(&out),
    ]));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let keys: Vec<&str> = report
        .as_object()
        .unwrap()
        .keys()
        .map(String::as_str)
        .collect();
    assert_eq!(
        keys,
        [
            "value",
            "rank_used",
            "residual_ratio",
            "family",
            "method",
            "distinguisher_stats",
            "fallback_applied",
            "config"
        ]
    );
    assert_eq!(report["rank_used"], 2);
    assert_eq!(report["family"], "pearson");
    assert_eq!(report["method"], "svd");
    assert!(report["value"].as_f64().unwrap() >= 0.0);
    let labels = fs::read_to_string(dir.path().join("report.labels.tsv")).unwrap();
    assert!(
        labels.starts_with("side\tindex\tlabel\nu\t0\tann\nu\t1\tbob\nu\t2\tcat\nv\t0\tbooks\n")
    );
}

#[test]
fn modularity_from_adjacency_to_stdout() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.csv", TWO_EDGES);
    let text = stdout(&fmod(&[
        "modularity",
        "--adjacency",
        s(&a),
        "--family",
        "tvd",
    ]));
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(report["method"], "sign");
    assert!(report["value"].as_f64().unwrap() > 0.0);
}

#[test]
fn sbm_gen_is_seeded() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.tsv");
    let b = dir.path().join("b.tsv");
    let p = dir.path().join("p.csv");
    let base = [
        "sbm-gen", "--m", "3", "--n", "4", "--alpha", "0.2", "--edges", "500", "--seed", "9",
    ];
    stdout(&fmod(
        &[&base[..], &["--out", s(&a), "--dist", s(&p)]].concat(),
    ));
    stdout(&fmod(&[&base[..], &["--out", s(&b)]].concat()));
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let total: u64 = text
        .lines()
        .map(|l| l.split('\t').nth(2).unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 500);
    let dist = fs::read_to_string(&p).unwrap();
    assert_eq!(dist.lines().count(), 12);
}

#[test]
fn contract_merges_groups() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("p.csv");
    stdout(&fmod(&[
        "sbm-gen",
        "--m",
        "3",
        "--n",
        "2",
        "--alpha",
        "0.1",
        "--edges",
        "10",
        "--out",
        s(&dir.path().join("g.tsv")),
        "--dist",
        s(&p),
    ]));
    let groups = write(
        &dir,
        "groups.json",
        r#"{"block_sizes":[2,2,2],"groups":[[0],[1],[2]]}"#,
    );
    let out = dir.path().join("p2.csv");
    let groups_out = dir.path().join("groups2.json");
    stdout(&fmod(&[
        "contract",
        "--dist",
        s(&p),
        "--groups",
        s(&groups),
        "--merge",
        "0",
        "1",
        "--out",
        s(&out),
        "--groups-out",
        s(&groups_out),
    ]));
    let rows: Vec<Vec<f64>> = fs::read_to_string(&out)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    let total: f64 = rows.iter().flatten().sum();
    assert!((total - 1.0).abs() < 1e-12);
    let first = rows[0][0];
    assert!(rows[..4].iter().all(|r| r[..4].iter().all(|x| *x == first)));
    let merged: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&groups_out).unwrap()).unwrap();
    assert_eq!(merged["groups"], serde_json::json!([[0, 1], [2]]));
}

#[test]
fn experiment_outputs_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let config = write(
        &dir,
        "exp.json",
        r#"{"families":["js","pearson"],"m":3,"n":4,"alphas":[0.1,0.3],"edges":800,"trials":6,"seed":5}"#,
    );
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let json = dir.path().join("a.json");
    let maps = dir.path().join("maps");
    stdout(&fmod(&[
        "experiment",
        "--config",
        s(&config),
        "--out",
        s(&a),
        "--json",
        s(&json),
        "--heatmaps",
        s(&maps),
        "--threads",
        "3",
    ]));
    stdout(&fmod(&[
        "experiment",
        "--config",
        s(&config),
        "--out",
        s(&b),
        "--threads",
        "1",
    ]));
    let first = fs::read(&a).unwrap();
    assert_eq!(first, fs::read(&b).unwrap());
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("family,alpha,stage,theory,"));
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 3);
    assert!(json.exists());
    assert!(maps.join("alpha_0.1").join("stage_0.csv").exists());
    assert!(maps.join("alpha_0.3").join("stage_2.csv").exists());
}

#[test]
fn invalid_input_exits_with_2() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.csv", "0.5,x\n");
    assert_eq!(fmod(&["mi", "--input", s(&bad)]).status.code(), Some(2));
    let unnormalized = write(&dir, "u.csv", "0.5,0.6\n");
    assert_eq!(
        fmod(&["mi", "--input", s(&unnormalized)]).status.code(),
        Some(2)
    );
    let missing = dir.path().join("missing.csv");
    assert_eq!(fmod(&["mi", "--input", s(&missing)]).status.code(), Some(2));
    assert_eq!(fmod(&["mi", "--family", "renyi"]).status.code(), Some(2));
    let asym = write(&dir, "asym.csv", "0,1\n0,0\n");
    assert_eq!(
        fmod(&["bipartition", "--adjacency", s(&asym)])
            .status
            .code(),
        Some(2)
    );
    let config = write(&dir, "exp.json", r#"{"trials":0}"#);
    let out = fmod(&["experiment", "--config", s(&config)]);
    assert_eq!(out.status.code(), Some(2));
    let config = write(&dir, "exp2.json", r#"{"unknown_key":1}"#);
    assert_eq!(
        fmod(&["experiment", "--config", s(&config)]).status.code(),
        Some(2)
    );
}

#[test]
fn infinite_divergence_exits_with_3() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "p.csv", "1,0\n");
    let q = write(&dir, "q.csv", "0,1\n");
    let out = fmod(&["divergence", "--p", s(&p), "--q", s(&q), "--family", "kl"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    let out = fmod(&["divergence", "--p", s(&p), "--q", s(&q), "--family", "tvd"]);
    assert_eq!(out.status.code(), Some(3));
    let half = write(&dir, "half.csv", "0.5,0.5\n");
    let tvd: f64 = stdout(&fmod(&[
        "divergence",
        "--p",
        s(&p),
        "--q",
        s(&half),
        "--family",
        "tvd",
    ]))
    .trim()
    .parse()
    .unwrap();
    assert_eq!(tvd, 1.0);
}

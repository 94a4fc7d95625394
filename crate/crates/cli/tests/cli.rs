use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_threshold-lab"));
    c.env_remove("THRESHOLD_LAB_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

/// Every artifact except the manifest, which records wall time.
fn artifacts(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["verify", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["laws", "--graph", "/no/such/file"]).status.code(), Some(1));
    assert_eq!(run(&["laws", "--gen", "cycle:3", "--sink", "7"]).status.code(), Some(1));
    assert_eq!(run(&["decompose", "--gen", "cycle:3"]).status.code(), Some(1));
    // A tolerance that no finite sample meets.
    let o = run(&["simulate", "--gen", "cycle:3", "--replicas", "200", "--max-tv", "0"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn verify_core_suite() {
    let o = run(&["verify", "--suite", "core", "--graph", "gen:cycle:3"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("cases passed"));
    let o = run(&["verify", "--graph", "gen:torus:2,2", "--seed", "4"]);
    assert!(o.status.success(), "{}", stdout(&o));
}

#[test]
fn laws_tables_are_exact() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["laws", "--gen", "cycle:3", "--sink", "2", "--out", dir.path().to_str().unwrap(), "--plot"]);
    assert!(o.status.success());
    let burst = fs::read_to_string(dir.path().join("burst_law.csv")).unwrap();
    assert!(burst.contains("2/9") && burst.contains("5/9") && burst.contains("4/9"), "{burst}");
    let s_tau = fs::read_to_string(dir.path().join("s_tau_law.csv")).unwrap();
    assert!(s_tau.contains("3,2/3") && s_tau.contains("4,1/3"), "{s_tau}");
    assert!(dir.path().join("burst_law.dat").exists());
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn simulate_reports_small_tv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["simulate", "--gen", "cycle:3", "--h", "-40", "--replicas", "20000", "--seed", "3", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(dir.path());
    let tv = s["tv"]["joint"].as_f64().unwrap();
    assert!(tv < 0.03, "{s}");
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = run(&[
            "simulate",
            "--gen",
            "cycle:4",
            "--replicas",
            "3000",
            "--seed",
            "9",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert!(o.status.success());
    }
    assert_eq!(artifacts(a.path()), artifacts(b.path()));
}

#[test]
fn seed_falls_back_to_environment() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let base = ["simulate", "--gen", "cycle:3", "--replicas", "2000", "--out"];
    let o = run(&[&base[..], &[a.path().to_str().unwrap(), "--seed", "17"]].concat());
    assert!(o.status.success());
    let o = bin().args(base).arg(b.path()).env("THRESHOLD_LAB_SEED", "17").output().unwrap();
    assert!(o.status.success());
    assert_eq!(artifacts(a.path()), artifacts(b.path()));
}

#[test]
fn thread_count_does_not_change_results() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (d, threads) in [(&a, "1"), (&b, "3")] {
        let o = run(&[
            "--threads",
            threads,
            "simulate",
            "--gen",
            "complete:4",
            "--replicas",
            "3000",
            "--seed",
            "5",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert!(o.status.success());
    }
    assert_eq!(artifacts(a.path()), artifacts(b.path()));
}

#[test]
fn file_formats_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.txt");
    assert!(run(&["gen", "--gen", "torus:2,2", "--out", graph.to_str().unwrap()]).status.success());
    let s0 = dir.path().join("s0.txt");
    fs::write(&s0, "sandpile n 4\n0 -3\n1 -3\n2 -3\n3 -3\n").unwrap();
    let o = run(&["decompose", "--graph", graph.to_str().unwrap(), "--s0", s0.to_str().unwrap()]);
    assert!(o.status.success());
    let d: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(d["m"].as_i64().unwrap() < 0);

    let alpha = dir.path().join("alpha.txt");
    fs::write(&alpha, "alpha n 4\n0 1\n1 1\n2 2\n3 4\n").unwrap();
    let out = dir.path().join("run");
    let o = run(&[
        "simulate",
        "--graph",
        graph.to_str().unwrap(),
        "--alpha",
        alpha.to_str().unwrap(),
        "--mode",
        "direct",
        "--replicas",
        "500",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let enumerated = dir.path().join("enum");
    let o = run(&["enumerate", "--graph", graph.to_str().unwrap(), "--out", enumerated.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(fs::read_dir(&enumerated).unwrap().count() >= 2);
}

#[test]
fn renewal_and_waves_commands() {
    let dir = tempfile::tempdir().unwrap();
    let chain = dir.path().join("chain.txt");
    fs::write(&chain, "chain 2\n0 0 1/2 1\n0 1 1/2 1\n1 0 1 2\n").unwrap();
    let out = dir.path().join("renewal");
    let o = run(&[
        "renewal",
        "--chain",
        chain.to_str().unwrap(),
        "--n",
        "500",
        "--replicas",
        "20000",
        "--max-tv",
        "0.03",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(summary(&out)["normalization"], "4/3");

    let out = dir.path().join("waves");
    let o =
        run(&["waves", "--gen", "cycle:3", "--replicas", "20000", "--max-tv", "0.03", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("wave_counts.csv").exists());
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use autosage::cache::ScheduleCache;
use autosage::csr::load_csr;

const BIN: &str = env!("CARGO_BIN_EXE_autosage");

fn cmd(dir: &Path) -> Command {
    let mut c = Command::new(BIN);
    c.current_dir(dir);
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("AUTOSAGE_")) {
        c.env_remove(k);
    }
    c
}

fn run(c: &mut Command) -> Output {
    c.output().expect("binary runs")
}

fn ok(c: &mut Command) -> String {
    let out = run(c);
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn small_graph(dir: &Path) -> PathBuf {
    let path = dir.join("hub.csr");
    ok(cmd(dir)
        .args([
            "gen",
            "hubfixed",
            "--n",
            "3000",
            "--hubs",
            "1",
            "--hub-deg",
            "1000",
            "--other-deg",
            "16",
        ])
        .arg("--out")
        .arg(&path));
    path
}

fn fast() -> [&'static str; 4] {
    ["--iters", "2", "--warmup", "1"]
}

fn read_csv(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_owned();
    (
        header,
        lines
            .map(|l| l.split(',').map(str::to_owned).collect())
            .collect(),
    )
}

fn sidecar(csv: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(csv.with_extension("meta.json")).unwrap())
        .unwrap()
}

#[test]
fn gen_hubfixed_reports_closed_form_nnz() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(cmd(dir.path()).args([
        "gen",
        "hubfixed",
        "--n",
        "20000",
        "--hubs",
        "1",
        "--hub-deg",
        "5000",
        "--other-deg",
        "64",
        "--out",
        "g.csr",
    ]));
    let expected = 5000 + (20000 - 1) * 64;
    assert!(out.contains(&format!("nnz={expected}")), "{out}");
    assert_eq!(load_csr(dir.path().join("g.csr")).unwrap().nnz(), expected);
}

#[test]
fn gen_er_matches_binomial_expectation_and_empty_case() {
    let dir = tempfile::tempdir().unwrap();
    ok(cmd(dir.path()).args([
        "gen", "er", "--n", "200000", "--p", "2e-5", "--seed", "1", "--out", "er.csr",
    ]));
    let m = load_csr(dir.path().join("er.csr")).unwrap();
    let mean = 200000.0 * 199999.0 * 2e-5;
    assert!(
        (m.nnz() as f64 - mean).abs() <= 0.05 * mean,
        "nnz {}",
        m.nnz()
    );

    ok(cmd(dir.path()).args(["gen", "er", "--n", "0", "--p", "0.5", "--out", "empty.csr"]));
    let e = load_csr(dir.path().join("empty.csr")).unwrap();
    assert_eq!((e.n_rows(), e.nnz()), (0, 0));
}

#[test]
fn bench_csv_sidecar_and_guardrail_readback() {
    let dir = tempfile::tempdir().unwrap();
    let g = small_graph(dir.path());
    let csv = dir.path().join("out/bench.csv");
    ok(cmd(dir.path())
        .env("AUTOSAGE_PROBE_ITERS", "3")
        .env("AUTOSAGE_GUARDRAIL", "0.5")
        .args([
            "bench", "--op", "both", "--f", "16,63", "--alpha", "0.9", "--cache", "c.tsv",
        ])
        .args(fast())
        .arg("--graph")
        .arg(&g)
        .arg("--out")
        .arg(&csv));
    let (header, rows) = read_csv(&csv);
    assert_eq!(header, "dataset,F,op,choice,baseline_ms,chosen_ms,speedup");
    assert_eq!(rows.len(), 4);
    let cache = ScheduleCache::new();
    cache.load(dir.path().join("c.tsv")).unwrap();
    assert_eq!(cache.len(), 4);
    for row in &rows {
        assert!(row[3] == "autosage" || row[3] == "baseline", "{row:?}");
        let b: f64 = row[4].parse().unwrap();
        let c: f64 = row[5].parse().unwrap();
        let s: f64 = row[6].parse().unwrap();
        assert!((s - b / c).abs() <= 5e-4, "{row:?}");
        let rec = cache
            .records()
            .into_iter()
            .find(|r| r.key.f.to_string() == row[1] && r.key.op.to_string() == row[2])
            .unwrap();
        assert_eq!(rec.alpha, 0.9, "flag wins over env");
        assert_eq!(row[3] == "autosage", !rec.choice.is_baseline());
        if row[3] == "autosage" {
            assert!(rec.t_star <= rec.alpha * rec.t_b);
        }
    }

    let meta = sidecar(&csv);
    assert_eq!(meta["env"]["AUTOSAGE_PROBE_ITERS"], "3");
    assert_eq!(meta["env"]["AUTOSAGE_GUARDRAIL"], "0.5");
    assert_eq!(meta["cfg"]["alpha"], 0.9);
    assert_eq!(meta["cfg"]["probe_iters"], 3);
    assert_eq!(meta["artifact_version"], autosage::ARTIFACT_VERSION);
    assert!(meta["device"]["cores"].as_u64().unwrap() >= 1);
    assert_eq!(meta["decisions"].as_array().unwrap().len(), 4);
}

#[test]
fn rerun_with_sidecar_env_reproduces_choices() {
    let dir = tempfile::tempdir().unwrap();
    let g = small_graph(dir.path());
    let first = dir.path().join("first.csv");
    ok(cmd(dir.path())
        .env("AUTOSAGE_CACHE", "c.tsv")
        .env("AUTOSAGE_PROBE_TOPK", "2")
        .args(["bench", "--op", "both", "--f", "8,32"])
        .args(fast())
        .arg("--graph")
        .arg(&g)
        .arg("--out")
        .arg(&first));
    let meta = sidecar(&first);
    let second = dir.path().join("second.csv");
    let mut c = cmd(dir.path());
    for (k, v) in meta["env"].as_object().unwrap() {
        c.env(k, v.as_str().unwrap());
    }
    ok(c.args(["bench", "--op", "both", "--f", "8,32"])
        .args(fast())
        .arg("--graph")
        .arg(&g)
        .arg("--out")
        .arg(&second));
    let choices = |p: &Path| {
        read_csv(p)
            .1
            .into_iter()
            .map(|r| r[3].clone())
            .collect::<Vec<_>>()
    };
    assert_eq!(choices(&first), choices(&second));
    let sources: Vec<String> = sidecar(&second)["decisions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| d["source"].as_str().unwrap().to_owned())
        .collect();
    assert!(sources.iter().all(|s| s == "cached"), "{sources:?}");
}

#[test]
fn replay_hit_miss_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let g = small_graph(dir.path());
    ok(cmd(dir.path())
        .args([
            "bench", "--op", "both", "--f", "32", "--cache", "c.tsv", "--out", "b.csv",
        ])
        .args(fast())
        .arg("--graph")
        .arg(&g));
    let cache = ScheduleCache::new();
    cache.load(dir.path().join("c.tsv")).unwrap();

    let out = ok(cmd(dir.path())
        .args([
            "replay", "--cache", "c.tsv", "--op", "both", "--f", "32", "--strict",
        ])
        .args(fast())
        .arg("--graph")
        .arg(&g));
    for r in cache.records() {
        let line = out
            .lines()
            .find(|l| l.contains(&format!(" {}:", r.key.op)))
            .unwrap();
        assert!(line.contains(&format!("choice={} ", r.choice)), "{line}");
        assert!(line.contains("source=replayed"), "{line}");
    }

    let strict = run(cmd(dir.path())
        .args(["replay", "--cache", "none.tsv", "--f", "32", "--strict"])
        .arg("--graph")
        .arg(&g));
    assert_eq!(strict.status.code(), Some(3));

    let lenient = run(cmd(dir.path())
        .args(["replay", "--cache", "none.tsv", "--f", "32"])
        .args(fast())
        .arg("--graph")
        .arg(&g));
    assert_eq!(lenient.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&lenient.stdout).contains("choice=baseline"));
    assert!(String::from_utf8_lossy(&lenient.stderr).contains("WARN"));
}

#[test]
fn usage_and_io_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(cmd(dir.path()).arg("bench")).status.code(), Some(1));
    assert_eq!(
        run(cmd(dir.path()).args(["frobnicate"])).status.code(),
        Some(1)
    );
    assert_eq!(run(cmd(dir.path()).arg("--help")).status.code(), Some(0));
    assert_eq!(
        run(cmd(dir.path()).args(["gen", "er", "--n", "10", "--p", "1.5", "--out", "x.csr"]))
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        run(cmd(dir.path()).args(["bench", "--graph", "missing.csr", "--out", "b.csv"]))
            .status
            .code(),
        Some(2)
    );
    let g = small_graph(dir.path());
    std::fs::write(dir.path().join("bad.tsv"), "1\tonly\tthree\n").unwrap();
    let corrupt = run(cmd(dir.path())
        .args(["replay", "--cache", "bad.tsv", "--f", "8"])
        .arg("--graph")
        .arg(&g));
    assert_eq!(corrupt.status.code(), Some(2));
    let bad_env = run(cmd(dir.path())
        .env("AUTOSAGE_GUARDRAIL", "lots")
        .args(["bench", "--out", "b.csv"])
        .arg("--graph")
        .arg(&g));
    assert_eq!(bad_env.status.code(), Some(1));
}

#[test]
fn attention_cold_warm_replay() {
    let dir = tempfile::tempdir().unwrap();
    let g = small_graph(dir.path());
    let csv = dir.path().join("att.csv");
    ok(cmd(dir.path())
        .args(["attention", "--f", "16", "--f-out", "8", "--cache", "c.tsv"])
        .args(fast())
        .arg("--graph")
        .arg(&g)
        .arg("--out")
        .arg(&csv));
    let (header, rows) = read_csv(&csv);
    let col = |name: &str| header.split(',').position(|h| h == name).unwrap();
    assert_eq!(rows.len(), 3);
    let cache = ScheduleCache::new();
    cache.load(dir.path().join("c.tsv")).unwrap();
    assert_eq!(cache.len(), 2, "one record per sub-op");
    assert_eq!(rows[0][col("sddmm_source")], "probed");
    assert!(rows[0][col("probe_launches")].parse::<u64>().unwrap() > 0);
    assert_eq!(rows[1][col("probe_launches")], "0");
    assert_eq!(rows[1][col("spmm_source")], "cached");
    assert_eq!(
        (
            rows[2][col("sddmm_source")].as_str(),
            rows[2][col("spmm_source")].as_str()
        ),
        ("replayed", "replayed")
    );
    assert_eq!(rows[2][col("probe_launches")], "0");
    assert!(csv.with_extension("meta.json").exists());
}

#[test]
fn ablate_vec_marks_ineligible_widths() {
    let dir = tempfile::tempdir().unwrap();
    let g = small_graph(dir.path());
    let csv = dir.path().join("vec.csv");
    ok(cmd(dir.path())
        .args(["ablate-vec", "--f", "63,64"])
        .args(fast())
        .arg("--graph")
        .arg(&g)
        .arg("--out")
        .arg(&csv));
    let (header, rows) = read_csv(&csv);
    assert_eq!(header, "dataset,F,op,variant,off_ms,on_ms,speedup");
    assert_eq!(rows[0][5], "ineligible");
    assert_eq!(rows[0][6], "ineligible");
    let off: f64 = rows[1][4].parse().unwrap();
    let on: f64 = rows[1][5].parse().unwrap();
    let ratio: f64 = rows[1][6].parse().unwrap();
    assert!((ratio - off / on).abs() <= 5e-4);
    assert!(csv.with_extension("meta.json").exists());
}

#[test]
fn sweep_split_verifies_against_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let g = small_graph(dir.path());
    let csv = dir.path().join("split.csv");
    ok(cmd(dir.path())
        .args([
            "sweep-split",
            "--f",
            "32",
            "--thresholds",
            "256,2000",
            "--op",
            "both",
        ])
        .args(fast())
        .arg("--graph")
        .arg(&g)
        .arg("--out")
        .arg(&csv));
    let (header, rows) = read_csv(&csv);
    let col = |name: &str| header.split(',').position(|h| h == name).unwrap();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert!(r[col("max_rel_err")].parse::<f64>().unwrap() <= 1e-5);
        let expected_heavy = if r[col("hub_threshold")] == "256" {
            "1"
        } else {
            "0"
        };
        assert_eq!(r[col("heavy_rows")], expected_heavy);
    }
    assert!(csv.with_extension("meta.json").exists());
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use warpflow::soliton::classify_sweep;

fn warpflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_warpflow")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn oracle_check_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let o = warpflow(&["--mode", "oracle-check", "--seed", "1", "--out", s(dir)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["summary.json", "oracle.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let v = summary(&a);
    assert_eq!(v["verdicts"][0]["criterion"], "1");
    assert_eq!(v["verdicts"][0]["pass"], true);
    assert_eq!(v["seed"], 1);
}

#[test]
fn thread_cap_does_not_change_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let run = |dir: &Path, threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_warpflow"))
            .args(["--mode", "oracle-check", "--seed", "3", "--out", s(dir)])
            .env("WARPFLOW_THREADS", threads)
            .output()
            .unwrap()
    };
    assert_eq!(code(&run(&a, "1")), 0);
    assert_eq!(code(&run(&b, "4")), 0);
    assert_eq!(fs::read(a.join("oracle.json")).unwrap(), fs::read(b.join("oracle.json")).unwrap());
}

#[test]
fn homogeneous_run_reports_t_hat_one_half() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "mode = \"run-s1\"\n[grid]\nm = 32\n[[fiber]]\nn = 2\nmu = 1.0\nfamily = \"constant\"\na = 1.0\n").unwrap();
    let out = tmp.path().join("run");
    let o = warpflow(&["--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = summary(&out);
    let t_hat = v["results"]["t_hat"]["t_hat"].as_f64().unwrap();
    assert!((t_hat - 0.5).abs() < 1e-4, "{t_hat}");
    assert!(out.join("monitors.csv").is_file());
    assert!(out.join("snapshots/index.csv").is_file());
    let header = fs::read_to_string(out.join("snapshots/snapshot_00000.csv")).unwrap();
    assert!(header.starts_with("theta,s,phi,v_1\n"));
}

#[test]
fn soliton_sweep_matches_library_classification() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    let o = warpflow(&["--mode", "soliton-shoot", "--sweep", "--rmax", "30", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v0s: Vec<f64> = (0..=12).map(|i| 0.6 + 0.2 * i as f64).collect();
    let lib = classify_sweep(&v0s, 30.0).unwrap();
    let mut rdr = csv::Reader::from_path(out.join("shots.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), lib.entries.len());
    for (row, e) in rows.iter().zip(&lib.entries) {
        assert_eq!(row[0].parse::<f64>().unwrap(), e.v0);
        assert_eq!(&row[1], format!("{:?}", e.classification));
        assert_eq!(row[2].parse::<f64>().unwrap(), e.r_end);
    }
    let v = summary(&out);
    assert_eq!(v["verdicts"][0]["criterion"], "8b");
    assert_eq!(v["verdicts"][0]["pass"], true);
}

#[test]
fn single_shots_write_profiles() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("shots");
    let o = warpflow(&["--mode", "soliton-shoot", "--v0", "1.4142135623730951", "--v0", "2.0", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let ids: Vec<String> = summary(&out)["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["criterion"].as_str().unwrap().to_owned())
        .collect();
    assert_eq!(ids, ["8a", "8c", "8b"]);
    let profile = fs::read_to_string(out.join("profile_000.csv")).unwrap();
    assert!(profile.starts_with("r,rho,rho_p,rho_pp,v,v_p,v_pp,f,f_p,f_pp\n"));
    assert!(out.join("profile_001.csv").is_file());
}

#[test]
fn report_aggregates_and_flags_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    assert_eq!(code(&warpflow(&["--mode", "oracle-check", "--seed", "1", "--out", s(&root.join("good"))])), 0);
    let o = warpflow(&["--mode", "report", "--out", s(root)]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("verdict: PASS"));

    let cfg = root.join("strict.toml");
    fs::write(&cfg, "mode = \"oracle-check\"\nseed = 1\n[oracle]\ncount = 10\ntolerance = 1e-14\n").unwrap();
    let o = warpflow(&["--config", s(&cfg), "--out", s(&root.join("strict"))]);
    assert_eq!(code(&o), 4);

    let o = warpflow(&["--mode", "report", "--out", s(root)]);
    assert_eq!(code(&o), 4);
    let doc: Value = serde_json::from_str(&fs::read_to_string(root.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(doc["verdict"], "FAIL");
    let failed = doc["failed"].as_array().unwrap();
    assert_eq!(failed.len(), 1);
    assert!(failed[0].as_str().unwrap().starts_with("1 "));
    assert!(failed[0].as_str().unwrap().contains("strict"));
}

#[test]
fn empty_directory_is_missing_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let o = warpflow(&["--mode", "report", "--out", s(tmp.path())]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing artifacts"));
}

#[test]
fn exit_codes_by_class() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "mode = \"run-s1\"\n[grid]\nm = 8\n[[fiber]]\nn = 1\nfamily = \"constant\"\na = 1\n").unwrap();
    let o = warpflow(&["--config", s(&bad)]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3") && err.contains("line 5") && err.contains("n_a ≥ 2"), "{err}");

    let blow = tmp.path().join("blow.toml");
    fs::write(
        &blow,
        "mode = \"run-s1\"\n[grid]\nm = 64\n[[fiber]]\nn = 2\nfamily = \"cosine\"\na = 1.0\nb = 0.3\n[run]\nfixed_dt = 1.0\n",
    )
    .unwrap();
    let o = warpflow(&["--config", s(&blow), "--out", s(&tmp.path().join("blow"))]);
    assert_eq!(code(&o), 3);

    let o = Command::new(env!("CARGO_BIN_EXE_warpflow"))
        .args(["--mode", "oracle-check", "--out", s(&tmp.path().join("t"))])
        .env("WARPFLOW_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn csv_columns_are_documented() {
    let schema = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/schema.md")).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("surf.toml");
    fs::write(
        &cfg,
        "mode = \"run-surface\"\n[grid]\nmx = 16\nmy = 16\n[[fiber]]\nn = 2\nfamily = \"sine\"\na = 1.0\nb = 0.1\n[run]\nt_max = 0.01\n",
    )
    .unwrap();
    let surf = tmp.path().join("surf");
    assert_eq!(code(&warpflow(&["--config", s(&cfg), "--out", s(&surf)])), 0);
    let shots = tmp.path().join("shots");
    assert_eq!(code(&warpflow(&["--mode", "soliton-shoot", "--v0", "1.0", "--out", s(&shots)])), 0);
    let files = [
        surf.join("monitors.csv"),
        surf.join("surface.csv"),
        surf.join("snapshots/index.csv"),
        surf.join("snapshots/snapshot_00000.csv"),
        shots.join("shots.csv"),
        shots.join("profile_000.csv"),
    ];
    for f in files {
        let mut rdr = csv::Reader::from_path(&f).unwrap();
        for col in rdr.headers().unwrap() {
            let generic = col.rsplit_once('_').filter(|(_, a)| a.parse::<usize>().is_ok()).map(|(b, _)| format!("{b}_a"));
            let name = generic.unwrap_or_else(|| col.to_owned());
            assert!(schema.contains(&format!("`{name}`")), "column {col} of {} is undocumented", f.display());
        }
    }
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_procex"));
    cmd.arg("--data").arg(dir).args(args);
    cmd.env_remove("PROCEX_SEED").env_remove("PROCEX_CONFIG").env_remove("PROCEX_DATA");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = run(dir, args, &[]);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn prepared() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["make-fixtures", "--docs", "6"]);
    ok(dir.path(), &["parse-protocol"]);
    ok(dir.path(), &["match"]);
    dir
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("datasets/manifest.json")).unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["no-such-command"], &[]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["match", "--method", "psychic"], &[]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["--set", "bogus=1", "match"], &[]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["--portion", "0:0:0", "gen-datasets"], &[]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["--help"], &[]).status.code(), Some(0));
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["match"], &[]).status.code(), Some(2));
    let bad = dir.path().join("bad.protocol.txt");
    fs::write(&bad, "1. first (lines 1-2)\n1. again (lines 3-4)\n").unwrap();
    let out = run(dir.path(), &["parse-protocol", "--input", bad.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn parse_protocol_prints_canonical_json() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.txt");
    fs::write(&p, "1. insert the wire (lines 1-2)\n2. if flow stops (lines 3-3):\n  2a. withdraw it (lines 4-4)\n  2b. go on (lines 5-5)\n3. secure it (lines 6-6)\n").unwrap();
    let out = run(dir.path(), &["parse-protocol", "--input", p.to_str().unwrap()], &[]);
    assert!(out.status.success());
    let g: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(g["phrases"].as_array().unwrap().len(), 5);
    let ifs = g["edges"].as_array().unwrap().iter().filter(|e| e.to_string().contains("\"if\"")).count();
    assert_eq!(ifs, 2);
}

#[test]
fn flags_override_env_which_overrides_config() {
    let dir = prepared();
    let cfg = dir.path().join("procex.conf");
    fs::write(&cfg, "# test config\nseed = 5\nk = 1\nportion = 1:1:1\n").unwrap();
    let cfg = cfg.to_str().unwrap();

    let out = run(dir.path(), &["--config", cfg, "gen-datasets"], &[]);
    assert!(out.status.success());
    let m = manifest(dir.path());
    assert_eq!((m["seed"].as_u64(), m["k"].as_u64(), m["portion"].as_str()), (Some(5), Some(1), Some("1:1:1")));

    assert!(run(dir.path(), &["--config", cfg, "gen-datasets"], &[("PROCEX_SEED", "7")]).status.success());
    assert_eq!(manifest(dir.path())["seed"].as_u64(), Some(7));

    let out = run(dir.path(), &["--config", cfg, "--seed", "9", "-k", "3", "gen-datasets"], &[("PROCEX_SEED", "7")]);
    assert!(out.status.success());
    let m = manifest(dir.path());
    assert_eq!((m["seed"].as_u64(), m["k"].as_u64()), (Some(9), Some(3)));

    let out = run(dir.path(), &["--config", cfg, "--set", "k=2", "gen-datasets"], &[("PROCEX_CONFIG", "/nonexistent")]);
    assert!(out.status.success());
    assert_eq!(manifest(dir.path())["k"].as_u64(), Some(2));
}

#[test]
fn malformed_config_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    fs::write(&cfg, "seed = 1\nthis line is wrong\n").unwrap();
    let out = run(dir.path(), &["--config", cfg.to_str().unwrap(), "match"], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn sweep_check_failure_exits_3() {
    let dir = prepared();
    // Without K=2 in the grid the check cannot run: a usage error.
    let out = run(dir.path(), &["--set", "runs=1", "sweep", "--ks", "0", "--portions", "4:2:1", "--check"], &[]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(dir.path(), &["--set", "runs=1", "sweep", "--ks", "2,0", "--portions", "4:2:1", "--check"], &[]);
    // Six separable documents leave too few test pairs for context to help.
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not exceed"));
    assert!(dir.path().join("reports/sweep.txt").exists());
}

#[test]
fn outputs_leave_no_temporary_files() {
    let dir = prepared();
    for args in [&["gen-datasets"][..], &["train-seq"], &["train-re"], &["predict", "--all"], &["assemble"]] {
        ok(dir.path(), args);
    }
    for sub in ["graphs", "matches", "datasets", "models", "predictions", "output"] {
        for entry in fs::read_dir(dir.path().join(sub)).unwrap() {
            let name = entry.unwrap().file_name().to_string_lossy().into_owned();
            assert!(!name.starts_with(".tmp"), "{sub}/{name}");
        }
    }
    let dot = fs::read_to_string(dir.path().join("output/doc00.dot")).unwrap();
    assert!(dot.starts_with("digraph G {\n"));
}

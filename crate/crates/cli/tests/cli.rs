use std::fs;
use std::io::Write;
use std::process::{Command, Output, Stdio};

fn bplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bplab"))
        .args(args)
        .env_remove("BPLAB_SEED")
        .output()
        .expect("binary runs")
}

fn bplab_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_bplab"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child
        .stdin
        .take()
        .unwrap()
        .write_all(input.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn concepts_prints_the_key_count() {
    let o = bplab(&["concepts", "--n", "3"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "18\n");
    let o = bplab(&["concepts", "--n", "2", "--list"]);
    assert_eq!(stdout(&o).lines().count(), 1 + 8);
}

#[test]
fn loopy_markdown_happy_path() {
    let o = bplab(&["loopy", "--trials", "100", "--seed", "42", "--format", "md"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("| Experiment | Vars | Loops | Converged | Avg KL | Avg MAE |"));
    assert_eq!(out.matches("100/100").count(), 5);
}

#[test]
fn loopy_csv_is_byte_identical_across_runs_and_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |p: &std::path::Path, jobs: &str| {
        bplab(&[
            "loopy",
            "--trials",
            "20",
            "--seed",
            "9",
            "--jobs",
            jobs,
            "--output",
            p.to_str().unwrap(),
        ])
    };
    assert!(args(&a, "1").status.success());
    assert!(args(&b, "3").status.success());
    let (a, b) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("structure,seed,converged,iterations,kl,mae\n"));
    assert_eq!(text.lines().count(), 1 + 100);
}

#[test]
fn seed_falls_back_to_environment() {
    let run = |env: Option<&str>, args: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_bplab"));
        cmd.args(args).env_remove("BPLAB_SEED");
        if let Some(s) = env {
            cmd.env("BPLAB_SEED", s);
        }
        stdout(&cmd.output().unwrap())
    };
    let from_env = run(Some("7"), &["oracle", "--batch", "3"]);
    let from_flag = run(None, &["oracle", "--batch", "3", "--seed", "7"]);
    let default = run(None, &["oracle", "--batch", "3"]);
    assert_eq!(from_env, from_flag);
    assert_ne!(from_env, default);
}

#[test]
fn equivalence_exit_codes() {
    let o = bplab(&["equiv", "--count", "50", "--mode", "hard", "--tol", "1e-12"]);
    assert_eq!(o.status.code(), Some(0));
    let o = bplab(&[
        "equiv", "--count", "50", "--mode", "soft", "--beta", "1", "--tol", "1e-12",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = bplab(&["equiv", "--count", "5", "--format", "md"]);
    assert!(stdout(&o).contains("tol 1e-12: 5/5"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(bplab(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(bplab(&["loopy", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(bplab(&["concepts"]).status.code(), Some(2));
    let o = bplab(&["loopy", "--structure", "pentagon"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("pentagon"));
}

#[test]
fn every_subcommand_has_help() {
    for sub in [
        "loopy",
        "tree",
        "equiv",
        "concentrate",
        "uniqueness",
        "concepts",
        "fsm",
        "binarize",
        "oracle",
    ] {
        let o = bplab(&[sub, "--help"]);
        assert!(o.status.success(), "{sub}");
        assert!(stdout(&o).contains("--seed"), "{sub}");
    }
    assert!(stdout(&bplab(&["tree", "--help"])).contains("[default: 200]"));
}

#[test]
fn oracle_reads_a_graph_from_stdin() {
    let o = bplab_stdin(&["oracle"], "vars 2\nfactor 0 1 1 2 3 4\n");
    assert!(o.status.success());
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "var,marginal");
    let p0: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
    let p1: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!((p0 - 0.7).abs() < 1e-12 && (p1 - 0.6).abs() < 1e-12);
    assert_eq!(lines[3], "# partition 10");

    let bad = bplab_stdin(&["oracle"], "vars 2\nfactor 0 0 1 1 1 1\n");
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("line 2"));
}

#[test]
fn oracle_batch_csv() {
    let o = bplab(&["oracle", "--batch", "100", "--seed", "3"]);
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("table4,posterior0,posterior1"));
    let mut rows = 0;
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        let t: Vec<f64> = cols[0].split(' ').map(|v| v.parse().unwrap()).collect();
        let z: f64 = t.iter().sum();
        let p0: f64 = cols[1].parse().unwrap();
        let p1: f64 = cols[2].parse().unwrap();
        assert!((p0 - (t[2] + t[3]) / z).abs() < 1e-9);
        assert!((p1 - (t[1] + t[3]) / z).abs() < 1e-9);
        assert!(t.iter().all(|&v| (0.05..=1.0).contains(&v)));
        rows += 1;
    }
    assert_eq!(rows, 100);
}

#[test]
fn fsm_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.fsm");
    fs::write(&path, "states 2\nsym a 1 0\nsym b 1 0\nsym c 0 0\n").unwrap();
    let o = bplab(&["fsm", path.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "states 2\nsymbols 3\nclasses 2\nbound 4\n");
    assert_eq!(bplab(&["fsm", "/nonexistent/spec"]).status.code(), Some(2));
}

#[test]
fn binarize_splits_gates() {
    let input = "vars 5\nfactor 0 1 0.5 1 1 0.5\nkfactor 4 0 1 2 3 kind=or\n";
    let o = bplab_stdin(&["binarize", "--check"], input);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.starts_with("vars 7\n"));
    assert_eq!(out.matches("kfactor").count(), 3);
    assert!(out.contains("# max marginal deviation"));
}

#[test]
fn tree_uniqueness_and_concentration_pass() {
    assert_eq!(bplab(&["tree", "--count", "30"]).status.code(), Some(0));
    let u = bplab(&["uniqueness", "--samples", "200"]);
    assert_eq!(u.status.code(), Some(0));
    assert_eq!(stdout(&u).lines().count(), 1 + 27);
    let c = bplab(&[
        "concentrate",
        "--count",
        "20",
        "--betas",
        "1,2,4,8,16,32,64",
    ]);
    assert_eq!(c.status.code(), Some(0));
    assert_eq!(stdout(&c).lines().count(), 1 + 7);
    let bad = bplab(&["concentrate", "--count", "5", "--betas", "4,2"]);
    assert_eq!(bad.status.code(), Some(2));
}

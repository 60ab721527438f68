//! End-to-end behavior of the binary: exit code partitioning, the report
//! envelope, determinism, and the atomic --out path. Everything runs in a
//! temp directory with relative paths, which also exercises report writes
//! into the current directory.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SCALARS: &str = r#"{"points": [[0.0], [0.01], [0.02], [0.04], [0.08], [0.16], [0.32], [0.64]], "metric": "l1"}"#;
const UNIT_VECTORS: &str = r#"{"points": [[1.0, 0.0], [0.0, 1.0]], "metric": "euclidean"}"#;

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmetric"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("the binary spawns")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn parse(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).expect("reports are JSON")
}

fn dir_with(files: &[(&str, &str)]) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in files {
        fs::write(dir.path().join(name), text).unwrap();
    }
    dir
}

#[test]
fn exit_codes_partition_pass_violation_and_usage() {
    let dir = dir_with(&[("pts.json", SCALARS), ("units.json", UNIT_VECTORS)]);
    let d = dir.path();

    let ok = run_in(
        d,
        &["check", "--construction", "discrete", "--order", "3", "--sample", "pts.json"],
    );
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));

    let bad = run_in(
        d,
        &["check", "--construction", "norm_diameter", "--order", "1", "--sample", "units.json"],
    );
    assert_eq!(code(&bad), 1);
    let report = parse(&bad.stdout);
    assert_eq!(report["version"], "gmetric-report/1");
    assert_eq!(report["verb"], "check");
    assert_eq!(report["verdict"], "fail");
    let viols = report["violations"].as_array().unwrap();
    assert_eq!(viols.len(), 1);
    assert_eq!(viols[0]["axiom"], "g1");

    let missing = run_in(
        d,
        &["check", "--construction", "max", "--order", "2", "--sample", "absent.json"],
    );
    assert_eq!(code(&missing), 2);
    assert!(missing.stdout.is_empty());
    let err = String::from_utf8(missing.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.starts_with("error: "), "{err}");
}

#[test]
fn malformed_inputs_exit_two_with_one_line() {
    let dir = dir_with(&[("pts.json", SCALARS), ("broken.json", "{ nope")]);
    let d = dir.path();
    let cases: &[&[&str]] = &[
        // unknown catalog kind
        &["check", "--construction", "euclidean", "--order", "2", "--sample", "pts.json"],
        // kind without an order
        &["check", "--construction", "max", "--sample", "pts.json"],
        // sample file that is not JSON
        &["check", "--construction", "max", "--order", "2", "--sample", "broken.json"],
        // tuple arity differs from order + 1
        &["eval", "--construction", "max", "--order", "2", "--sample", "pts.json", "--tuple", "0,1"],
        // affine map with one coefficient
        &["fixpoint", "--map", "affine:0.5", "--x0", "1"],
        // table file that does not exist
        &["fixpoint", "--map", "table:absent.json", "--x0", "0", "--sample", "pts.json"],
        // table map without a sample
        &["fixpoint", "--map", "table:pts.json", "--x0", "0"],
        // orbit regime without a start
        &["fixpoint", "--map", "affine:0.5,0"],
        // center outside the sample
        &["ball", "--construction", "max", "--order", "2", "--sample", "pts.json", "--center", "99", "--radius", "0.5"],
        // non-positive radius
        &["net", "--construction", "max", "--order", "2", "--sample", "pts.json", "--eps", "0"],
    ];
    for args in cases {
        let out = run_in(d, args);
        assert_eq!(code(&out), 2, "args {args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty(), "args {args:?} wrote a report");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.trim_end().lines().count(), 1, "args {args:?}: {err}");
    }
}

#[test]
fn identical_inputs_and_seed_give_identical_bytes() {
    let dir = dir_with(&[("pts.json", SCALARS)]);
    let d = dir.path();
    let runs: &[&[&str]] = &[
        &["check", "--construction", "max", "--order", "2", "--sample", "pts.json", "--sampled", "--seed", "7"],
        &["fixpoint", "--map", "affine:0.5,0", "--x0", "1", "--trials", "3", "--seed", "9"],
    ];
    for args in runs {
        let with_out = |name: &'static str| {
            let mut v = args.to_vec();
            v.extend(["--out", name]);
            v
        };
        run_in(d, &with_out("a.json"));
        run_in(d, &with_out("b.json"));
        let a = fs::read(d.join("a.json")).unwrap();
        assert_eq!(a, fs::read(d.join("b.json")).unwrap(), "{args:?}");
        // stdout carries the same bytes as the file
        assert_eq!(run_in(d, args).stdout, a, "{args:?}");
    }
}

#[test]
fn out_replaces_existing_files_and_leaves_no_temps() {
    let dir = dir_with(&[("pts.json", SCALARS)]);
    let d = dir.path();
    fs::write(d.join("report.json"), "garbage {{{").unwrap();
    let out = run_in(
        d,
        &["eval", "--construction", "diameter", "--order", "2", "--sample", "pts.json",
          "--tuple", "0,3,7", "--out", "report.json"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = parse(&fs::read(d.join("report.json")).unwrap());
    assert_eq!(report["verb"], "eval");
    assert_eq!(report["value"], 0.64);
    let leftovers: Vec<String> = fs::read_dir(d)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with(".gmetric-report"))
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}

#[test]
fn ball_members_nest_and_nets_cover() {
    let dir = dir_with(&[("pts.json", SCALARS)]);
    let d = dir.path();
    let out = run_in(
        d,
        &["ball", "--construction", "diameter", "--order", "2", "--sample", "pts.json",
          "--center", "0", "--radius", "0.1"],
    );
    assert_eq!(code(&out), 0);
    let r = parse(&out.stdout);
    let members = |key: &str| -> Vec<u64> {
        r[key].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect()
    };
    let (shrunk, mid, outer) = (members("shrunk_members"), members("d_members"), members("g_members"));
    assert!(shrunk.iter().all(|i| mid.contains(i)), "{shrunk:?} vs {mid:?}");
    assert!(mid.iter().all(|i| outer.contains(i)), "{mid:?} vs {outer:?}");
    assert!(r["violations"].as_array().unwrap().is_empty());

    let out = run_in(
        d,
        &["net", "--construction", "diameter", "--order", "2", "--sample", "pts.json", "--eps", "0.2"],
    );
    assert_eq!(code(&out), 0);
    let r = parse(&out.stdout);
    assert!(r["uncovered"].as_array().unwrap().is_empty());
    assert!(!r["centers"].as_array().unwrap().is_empty());
}

#[test]
fn seq_reports_the_cauchy_caveat_without_failing() {
    // Harmonic partial sums: consecutive steps decay but the tail spread
    // does not, which is exactly the gap the caveat warns about. That gap
    // is a fact about finite prefixes, not a violation, so the exit stays 0.
    let mut partial = 0.0;
    let points: Vec<Vec<f64>> = (1..=10)
        .map(|k| {
            partial += 1.0 / k as f64;
            vec![partial]
        })
        .collect();
    let sample = serde_json::json!({ "points": points, "metric": "l1" }).to_string();
    let prefix = serde_json::json!((0..10).collect::<Vec<usize>>()).to_string();
    let dir = dir_with(&[("h.json", sample.as_str()), ("idx.json", prefix.as_str()), ("pts.json", SCALARS)]);
    let d = dir.path();

    let out = run_in(
        d,
        &["seq", "--construction", "diameter", "--order", "2", "--sample", "h.json",
          "--prefix-file", "idx.json"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = parse(&out.stdout);
    assert_eq!(r["cauchy"]["agree_on_all"], false);
    assert!(r["cauchy"]["caveat"].is_string());
    assert!(r.get("convergence").is_none());

    // A tail that actually settles: criteria agree and --limit adds the
    // convergence report.
    fs::write(d.join("tail.json"), "[7, 6, 5, 4, 3, 2, 1, 0]").unwrap();
    let out = run_in(
        d,
        &["seq", "--construction", "diameter", "--order", "2", "--sample", "pts.json",
          "--prefix-file", "tail.json", "--limit", "0"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = parse(&out.stdout);
    assert_eq!(r["convergence"]["agree_on_all"], true);
    assert_eq!(r["convergence"]["candidate_limit"], 0);
}

#[test]
fn conjectural_orders_report_evidence_not_failure() {
    // On the line the cheapest path sweeps min to max, so higher orders
    // audit clean; the verdict still reads "evidence" because the claim
    // is open there.
    let dir = dir_with(&[("pts.json", SCALARS)]);
    let out = run_in(
        dir.path(),
        &["check", "--construction", "shortest_path", "--order", "3", "--sample", "pts.json",
          "--sampled", "--budget", "2000"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = parse(&out.stdout);
    assert_eq!(r["verdict"], "evidence");
    assert_eq!(r["conjectural"], true);
    assert_eq!(r["mode"], "sampled");
}

#[test]
fn non_contractive_evidence_exits_one() {
    let dir = dir_with(&[("pts.json", SCALARS), ("ident.json", "[0, 1, 2, 3, 4, 5, 6, 7]")]);
    let d = dir.path();

    let out = run_in(d, &["fixpoint", "--map", "affine:1,0", "--x0", "1"]);
    assert_eq!(code(&out), 1);
    let r = parse(&out.stdout);
    assert_eq!(r["trace"]["stop_reason"], "non_contractive");
    assert!(r["trace"]["steps"].as_array().unwrap().is_empty());

    let out = run_in(d, &["lambda", "--sample", "pts.json", "--map", "table:ident.json"]);
    assert_eq!(code(&out), 1);
    let r = parse(&out.stdout);
    assert_eq!(r["certificate"]["non_contractive"], true);
    assert_eq!(r["certificate"]["lambda_hat"], 1.0);
}

#[test]
fn weak_regime_argmin_declares_or_refutes() {
    let two = r#"{"points": [[0.0], [1.0]], "metric": "l1"}"#;
    let dir = dir_with(&[("two.json", two), ("konst.json", "[0, 0]"), ("swap.json", "[1, 0]")]);
    let d = dir.path();

    let ok = run_in(
        d,
        &["fixpoint", "--regime", "weak", "--map", "table:konst.json", "--sample", "two.json"],
    );
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
    let r = parse(&ok.stdout);
    assert_eq!(r["weak"]["fixed_point"], 0);
    assert!(r["weak"]["strictness_failures"].as_array().unwrap().is_empty());

    // The swap has no fixed point; the strict-decrease scan refutes the
    // hypothesis instead of silently returning the argmin.
    let no = run_in(
        d,
        &["fixpoint", "--regime", "weak", "--map", "table:swap.json", "--sample", "two.json"],
    );
    assert_eq!(code(&no), 1);
    let r = parse(&no.stdout);
    assert!(r["weak"]["fixed_point"].is_null());
    assert!(!r["weak"]["strictness_failures"].as_array().unwrap().is_empty());
}

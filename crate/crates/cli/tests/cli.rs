use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cyclic_shift::exact::DistributionComparison;
use cyclic_shift::io::{load_matrix, read_json, read_report, NaPolicy};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cyclic-shift"))
        .args(args)
        .env_remove("CYCLIC_SHIFT_THREADS")
        .env_remove("CYCLIC_SHIFT_BUDGET")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn exhaustive_fixture_reports_one_third() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("two_by_three.tsv");
    let out = run(&["test", "--input", s(&input), "--exhaustive", "--out", s(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_report(dir.path().join("report.json")).unwrap();
    assert_eq!(report.p_value, 1.0 / 3.0);
    assert_eq!((report.exceed_count, report.num_shifts), (3, 9));
    assert_eq!(report.peak.marker_id, "m1");
    assert_eq!(report.provenance.inputs.len(), 1);
    let csv = std::fs::read_to_string(dir.path().join("column_stats.csv")).unwrap();
    assert_eq!(csv, "index,marker_id,chrom,pos,value\n0,m1,1,100,2\n1,m2,1,200,0\n2,m3,1,300,0\n");
    let manifest: serde_json::Value = read_json(dir.path().join("manifest.json")).unwrap();
    assert_eq!(manifest["subcommand"], "test");
    assert_eq!(manifest["flags"]["exhaustive"], true);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
    assert!(String::from_utf8_lossy(&out.stdout).contains("3 of 9"));
}

#[test]
fn single_shift_gives_p_one() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("two_by_three.tsv");
    let out = run(&["test", "--input", s(&input), "--n-shifts", "1", "--out", s(dir.path())]);
    assert_eq!(code(&out), 0);
    assert_eq!(read_report(dir.path().join("report.json")).unwrap().p_value, 1.0);
}

#[test]
fn input_errors_exit_two() {
    assert_eq!(code(&run(&["test", "--input", "/definitely/not/here.tsv"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.tsv");
    std::fs::write(&bad, "marker_id\tchrom\tpos\tA\nm1\t1\t5\tNA\nm2\t1\t6\t1\n").unwrap();
    let out = run(&["test", "--input", s(&bad)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    assert_eq!(code(&run(&["test", "--input", s(&bad), "--na-policy", "impute-row-median", "--n-shifts", "10"])), 0);
    assert_eq!(code(&run(&["test"])), 2);
}

#[test]
fn budget_exit_code_and_env_override() {
    let input = fixture("two_by_three.tsv");
    assert_eq!(code(&run(&["test", "--input", s(&input), "--exhaustive", "--budget", "8"])), 4);
    let out = Command::new(env!("CARGO_BIN_EXE_cyclic-shift"))
        .args(["test", "--input", s(&input), "--exhaustive"])
        .env("CYCLIC_SHIFT_BUDGET", "8")
        .output()
        .unwrap();
    assert_eq!(code(&out), 4);
}

#[test]
fn chromosome_filter() {
    let input = fixture("pvalues.tsv");
    let out = run(&["test", "--input", s(&input), "--chrom", "1", "--n-shifts", "10"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("2 samples x 2 markers"));
    assert_eq!(code(&run(&["test", "--input", s(&input), "--chrom", "7"])), 2);
}

#[test]
fn simulate_then_peel() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("sim.tsv");
    let spec = fixture("markov5.spec");
    let out = run(&["simulate", "--spec", s(&spec), "--model", "markov", "--n", "6", "--m", "80", "--seed", "5", "--out", s(&table)]);
    assert_eq!(code(&out), 0);
    let x = load_matrix(&table, NaPolicy::Reject).unwrap().matrix;
    assert_eq!((x.n_rows(), x.n_cols()), (6, 80));
    let direct = cyclic_shift::null_models::load_model_spec(&spec).unwrap().simulate(6, 80, 5).unwrap();
    assert_eq!(x.values(), direct.values());
    assert!(dir.path().join("sim.tsv.manifest.json").exists());

    let peel_dir = dir.path().join("peel");
    let out = run(&["peel", "--input", s(&table), "--n-shifts", "200", "--max-iter", "1", "--out", s(&peel_dir)]);
    assert_eq!(code(&out), 0);
    let report = read_report(peel_dir.join("report.json")).unwrap();
    assert_eq!(report.command, "peel");
    assert_eq!(report.peel_findings.len(), 1);
    assert_eq!(report.peel_findings[0].t0, report.t0);

    assert_eq!(code(&run(&["peel", "--input", s(&table), "--alpha", "1.5"])), 2);
}

#[test]
fn simulate_rejects_bad_models() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.tsv");
    for (spec, expected) in [("reducible.spec", 3), ("forbidden_pair.spec", 3)] {
        let r = run(&["simulate", "--spec", s(&fixture(spec)), "--n", "2", "--m", "10", "--out", s(&out)]);
        assert_eq!(code(&r), expected, "{spec}");
    }
    let r = run(&["simulate", "--spec", s(&fixture("ar1.spec")), "--model", "markov", "--n", "2", "--m", "10", "--out", s(&out)]);
    assert_eq!(code(&r), 2);
    let r = run(&["simulate", "--spec", s(&fixture("ar1.spec")), "--n", "2", "--m", "1", "--out", s(&out)]);
    assert_eq!(code(&r), 2);
}

#[test]
fn validate_writes_comparisons() {
    let dir = tempfile::tempdir().unwrap();
    let spec = fixture("markov3.spec");
    let out = run(&[
        "validate", "--spec", s(&spec), "--n", "2", "--m-list", "6,8", "--replicates", "3", "--seed", "4",
        "--out-dir", s(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let c: DistributionComparison = read_json(dir.path().join("comparison_m8_rep002.json")).unwrap();
    assert_eq!((c.meta.n, c.meta.m, c.meta.replicate), (2, 8, 2));
    assert_eq!(c.grid.len(), c.cdf_p.len());
    let raw: serde_json::Value = read_json(dir.path().join("comparison_m8_rep002.json")).unwrap();
    for key in ["meta", "grid", "cdf_p", "cdf_q", "sup_distance"] {
        assert!(raw.get(key).is_some(), "{key}");
    }
    let summary: serde_json::Value = read_json(dir.path().join("summary.json")).unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 2);

    let r = run(&[
        "validate", "--spec", s(&spec), "--n", "4", "--m-list", "50", "--method", "exact", "--budget", "1000",
        "--out-dir", s(dir.path()),
    ]);
    assert_eq!(code(&r), 4);
    let r = run(&["validate", "--spec", s(&fixture("reducible.spec")), "--n", "2", "--m-list", "6", "--out-dir", s(dir.path())]);
    assert_eq!(code(&r), 3);
}

#[test]
fn transforms() {
    let dir = tempfile::tempdir().unwrap();
    let z = dir.path().join("z.tsv");
    let out = run(&["transform", "--mode", "zscore", "--input", s(&fixture("pvalues.tsv")), "--out", s(&z)]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("clamped"));
    let zm = load_matrix(&z, NaPolicy::Reject).unwrap().matrix;
    assert!((zm.get(0, 0) - 1.959_963_984_540_054).abs() < 1e-9);
    assert_eq!(zm.get(1, 0), 0.0);
    assert_eq!(zm.get(0, 1), 0.0);

    let floored = dir.path().join("zf.tsv");
    let out = run(&["transform", "--mode", "zscore", "--input", s(&fixture("pvalues.tsv")), "--floor", "-10", "--out", s(&floored)]);
    assert_eq!(code(&out), 0);
    let zf = load_matrix(&floored, NaPolicy::Reject).unwrap().matrix;
    assert!((zf.get(0, 1) + 1.281_551_565_544_600_5).abs() < 1e-9);

    let d = dir.path().join("d.tsv");
    let out = run(&[
        "transform", "--mode", "paired-diff", "--input", s(&fixture("tumor.tsv")), "--normal",
        s(&fixture("normal.tsv")), "--out", s(&d),
    ]);
    assert_eq!(code(&out), 0);
    let dm = load_matrix(&d, NaPolicy::Reject).unwrap().matrix;
    assert!((dm.get(0, 0) - 0.5).abs() < 1e-15);

    let out = run(&[
        "transform", "--mode", "paired-diff", "--input", s(&fixture("tumor.tsv")), "--normal",
        s(&fixture("normal_mismatch.tsv")), "--out", s(&d),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("marker m2"));
    assert_eq!(code(&run(&["transform", "--mode", "paired-diff", "--input", s(&fixture("tumor.tsv")), "--out", s(&d)])), 2);
}

#[test]
fn output_write_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let input = fixture("two_by_three.tsv");
    let out = run(&["test", "--input", s(&input), "--n-shifts", "5", "--out", s(&blocker.join("sub"))]);
    assert_eq!(code(&out), 1);
}

#[test]
fn rerun_from_manifest_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("pvalues.tsv");
    let first = dir.path().join("a");
    assert_eq!(code(&run(&["test", "--input", s(&input), "--n-shifts", "300", "--seed", "9", "--out", s(&first)])), 0);
    let manifest: serde_json::Value = read_json(first.join("manifest.json")).unwrap();
    let mut argv: Vec<String> = manifest["command_line"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    let second = dir.path().join("b");
    let pos = argv.iter().position(|a| a == "--out").unwrap();
    argv[pos + 1] = s(&second).to_string();
    let refs: Vec<&str> = argv.iter().map(String::as_str).collect();
    assert_eq!(code(&run(&refs)), 0);
    for f in ["report.json", "column_stats.csv"] {
        assert_eq!(std::fs::read(first.join(f)).unwrap(), std::fs::read(second.join(f)).unwrap(), "{f}");
    }
}

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_alphacomb"))
}

fn run(args: &[&str]) -> Output {
    bin().env_remove("ALPHACOMB_DENSE_CAP").args(args).output().expect("spawn alphacomb")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn gen(dir: &Path, n: usize, m: usize, seed: u64) {
    ok(&["gen", "--n", &n.to_string(), "--m", &m.to_string(), "--seed", &seed.to_string(), "--out-dir", p(dir)]);
}

fn read_weights(path: &Path) -> Vec<(String, f64)> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("alpha_id,weight"));
    lines
        .map(|l| {
            let (id, w) = l.split_once(',').unwrap();
            (id.to_string(), w.parse().unwrap())
        })
        .collect()
}

fn combine(dir: &Path, out: &Path, extra: &[&str]) -> String {
    let returns = dir.join("returns.csv");
    let expected = dir.join("expected.csv");
    let mut args = vec!["combine", "--returns", p(&returns), "--expected", p(&expected), "--out", p(out)];
    args.extend_from_slice(extra);
    ok(&args)
}

fn field(summary: &str, key: &str) -> String {
    let at = summary.find(&format!("{key} = ")).unwrap_or_else(|| panic!("{key} missing in {summary}"));
    summary[at + key.len() + 3..].split(',').next().unwrap().trim().to_string()
}

#[test]
fn gen_is_deterministic_and_complete() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    gen(&a, 50, 10, 7);
    gen(&b, 50, 10, 7);
    for f in ["returns.csv", "expected.csv", "truth.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let truth = fs::read_to_string(a.join("truth.csv")).unwrap();
    assert!(truth.starts_with("alpha_id,specific_risk,loading_1,loading_2,loading_3\n"));
    assert_eq!(truth.lines().count(), 51);
    let returns = fs::read_to_string(a.join("returns.csv")).unwrap();
    assert_eq!(returns.lines().next().unwrap().split(',').count(), 12);
}

#[test]
fn combine_writes_normalized_weights() {
    let tmp = TempDir::new().unwrap();
    gen(tmp.path(), 300, 20, 1);
    let out = tmp.path().join("w.csv");
    let summary = combine(tmp.path(), &out, &[]);
    let w = read_weights(&out);
    assert_eq!(w.len(), 300);
    assert_eq!(w[0].0, "a1");
    let abs: f64 = w.iter().map(|(_, v)| v.abs()).sum();
    assert!((abs - 1.0).abs() < 1e-12, "sum |w| = {abs}");
    assert_eq!(field(&summary, "N"), "300");
    assert_eq!(field(&summary, "M"), "20");
    assert_eq!(field(&summary, "columns"), "19");
    let neg: usize = field(&summary, "negative weights").parse().unwrap();
    assert_eq!(neg, w.iter().filter(|(_, v)| *v < 0.0).count());

    let kept = combine(tmp.path(), &tmp.path().join("k.csv"), &["--keep-overall-mode"]);
    assert_eq!(field(&kept, "columns"), "20");
}

#[test]
fn thread_count_does_not_change_weights() {
    let tmp = TempDir::new().unwrap();
    gen(tmp.path(), 400, 30, 3);
    let (w1, w2) = (tmp.path().join("w1.csv"), tmp.path().join("w2.csv"));
    combine(tmp.path(), &w1, &["--threads", "1"]);
    combine(tmp.path(), &w2, &["--threads", "2"]);
    assert_eq!(fs::read(&w1).unwrap(), fs::read(&w2).unwrap());
}

#[test]
fn weight_sources_from_files_and_pcs() {
    let tmp = TempDir::new().unwrap();
    gen(tmp.path(), 200, 15, 4);
    let truth = fs::read_to_string(tmp.path().join("truth.csv")).unwrap();
    let mut risks = String::from("alpha_id,specific_risk\n");
    // Reversed order: rows are matched by id.
    for line in truth.lines().skip(1).collect::<Vec<_>>().into_iter().rev() {
        let mut it = line.split(',');
        writeln!(risks, "{},{}", it.next().unwrap(), it.next().unwrap()).unwrap();
    }
    let risk_path = tmp.path().join("risks.csv");
    fs::write(&risk_path, risks).unwrap();
    let out = tmp.path().join("w.csv");
    combine(tmp.path(), &out, &["--specific-risks", p(&risk_path)]);
    let abs: f64 = read_weights(&out).iter().map(|(_, v)| v.abs()).sum();
    assert!((abs - 1.0).abs() < 1e-12);

    combine(tmp.path(), &out, &["--pc-specific", "3", "--zeta", "0.5"]);
    assert_eq!(read_weights(&out).len(), 200);

    let returns = tmp.path().join("returns.csv");
    let expected = tmp.path().join("expected.csv");
    let clash = run(&[
        "combine", "--returns", p(&returns), "--expected", p(&expected), "--out", p(&out),
        "--specific-risks", p(&risk_path), "--pc-specific", "3",
    ]);
    assert!(!clash.status.success());
}

fn write_positions(dir: &Path, n: usize, instruments: usize) -> std::path::PathBuf {
    let mut text = String::from("alpha_id,instrument_id,time,position\n");
    for i in 0..n {
        for t in 0..3 {
            for k in 0..instruments {
                // Deterministic, varied, never all zero per slice.
                let v = ((i * 7 + k * 13 + t * 5) % 11) as f64 - 4.5;
                writeln!(text, "a{},x{k},{t},{v}", i + 1).unwrap();
            }
        }
    }
    let path = dir.join("positions.csv");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn position_loadings_replace_and_union() {
    let tmp = TempDir::new().unwrap();
    gen(tmp.path(), 120, 10, 5);
    let pos = write_positions(tmp.path(), 120, 6);
    let out = tmp.path().join("w.csv");

    let rep = combine(tmp.path(), &out, &["--loadings", p(&pos)]);
    assert_eq!(field(&rep, "columns"), "5");
    let abs: f64 = read_weights(&out).iter().map(|(_, v)| v.abs()).sum();
    assert!((abs - 1.0).abs() < 1e-12);

    let uni = combine(tmp.path(), &out, &["--loadings", p(&pos), "--loadings-mode", "union"]);
    let cols: usize = field(&uni, "columns").parse().unwrap();
    assert!(cols > 9 && cols <= 9 + 6, "columns {cols}");

    let missing = write_positions(tmp.path(), 100, 6);
    let returns = tmp.path().join("returns.csv");
    let expected = tmp.path().join("expected.csv");
    let r = run(&["combine", "--returns", p(&returns), "--expected", p(&expected), "--out", p(&out), "--loadings", p(&missing)]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("no positions"));
}

#[test]
fn oracle_check_small_and_degenerate() {
    let out = ok(&["oracle-check", "--n", "200", "--m", "20", "--trend", "100,200", "--zeta", "0.2,0.8"]);
    assert!(out.contains("[PASS]"));
    assert_eq!(out.matches("shrinkage sweep").count(), 4);
    assert_eq!(out.matches("trend zeta").count(), 2);

    let out = ok(&["oracle-check", "--n", "3", "--trend", "3"]);
    assert!(out.contains("[PASS]"));
    assert!(out.contains("n/a"));
}

#[test]
fn dense_cap_refuses_large_oracles() {
    let out = bin().env("ALPHACOMB_DENSE_CAP", "100").args(["oracle-check", "--n", "200"]).output().unwrap();
    assert!(!out.status.success());
    let out = run(&["--dense-cap", "1", "oracle-check"]);
    assert!(!out.status.success());
}

#[test]
fn bench_single_point() {
    let tmp = TempDir::new().unwrap();
    let csv = tmp.path().join("bench.csv");
    ok(&["bench", "--n", "2000,4000", "--m", "20", "--out", p(&csv)]);
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,m,seconds,ratio");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("2000,20,") && lines[1].ends_with(','));
    let ratio: f64 = lines[2].rsplit(',').next().unwrap().parse().unwrap();
    assert!(ratio > 0.0);

    let stdout = ok(&["bench", "--n", "1000", "--m", "10"]);
    assert!(stdout.starts_with("n,m,seconds,ratio\n1000,10,"));
}

#[test]
fn style_reports_for_both_factors() {
    let tmp = TempDir::new().unwrap();
    gen(tmp.path(), 60, 30, 6);
    let report = tmp.path().join("r.csv");
    let figure = tmp.path().join("f.csv");
    let returns = tmp.path().join("returns.csv");
    let table = ok(&["style", "--returns", p(&returns), "--factor", "volatility", "--out", p(&report), "--figure", p(&figure)]);
    assert!(table.contains("Intercept") && table.contains("F-statistic"));
    let rep = fs::read_to_string(&report).unwrap();
    assert!(rep.starts_with("term,estimate,standard_error,t_statistic,overall\n"));
    assert_eq!(fs::read_to_string(&figure).unwrap().lines().count(), 60 * 59 / 2 + 1);

    // Synthetic returns have mixed-sign cumulative returns; momentum needs positive ones.
    let mom = run(&["style", "--returns", p(&returns), "--factor", "momentum", "--out", p(&report), "--figure", p(&figure)]);
    assert!(!mom.status.success());

    let mut text = String::from("alpha_id");
    for t in 0..9 {
        write!(text, ",t{t}").unwrap();
    }
    text.push('\n');
    for i in 0..25 {
        write!(text, "a{i}").unwrap();
        for t in 0..9 {
            let v = 0.01 * (1 + i % 5) as f64 + 0.02 * (((i * 3 + t * 7) % 5) as f64 - 2.0);
            write!(text, ",{v}").unwrap();
        }
        text.push('\n');
    }
    let pos = tmp.path().join("positive.csv");
    fs::write(&pos, text).unwrap();
    ok(&["style", "--returns", p(&pos), "--factor", "momentum", "--out", p(&report), "--figure", p(&figure)]);
    assert!(fs::read_to_string(&report).unwrap().starts_with("term,estimate,standard_error,t_statistic,overall\n"));
}

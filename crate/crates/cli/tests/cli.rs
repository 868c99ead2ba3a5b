use std::path::Path;
use std::process::{Command, Output};

fn nnsk(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nnsk"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn nnsk")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = nnsk(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn gen_build_query_stats() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["gen", "-o", "p.npts", "--n", "64", "--d", "3", "--queries", "5", "--seed", "2"]);
    assert!(dir.join("p.npts.queries.npts").exists());
    ok(dir, &["build", "p.npts", "-o", "s.nnsk", "--distances", "on", "--q", "5"]);

    let stats = ok(dir, &["stats", "s.nnsk"]);
    let blob = std::fs::metadata(dir.join("s.nnsk")).unwrap().len();
    assert!(stats.contains(&format!("{}", blob * 8)), "stats do not report the blob size:\n{stats}");

    let ann = ok(dir, &["query-ann", "s.nnsk", "p.npts.queries.npts"]);
    let answers: Vec<usize> = ann.lines().map(|l| l.trim().parse().unwrap()).collect();
    assert_eq!(answers.len(), 5);
    assert!(answers.iter().all(|&a| a < 64));

    let one = ok(dir, &["query-dist", "s.nnsk", "p.npts.queries.npts", "--index", "3"]);
    assert_eq!(one.lines().count(), 5);
    for line in one.lines() {
        assert!(line.trim().parse::<f64>().unwrap() >= 0.0);
    }
}

#[test]
fn failures_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let missing = nnsk(dir, &["stats", "nope.nnsk"]);
    assert!(!missing.status.success());
    assert!(!missing.stderr.is_empty());

    std::fs::write(dir.join("junk.nnsk"), b"not a sketch").unwrap();
    assert!(!nnsk(dir, &["stats", "junk.nnsk"]).status.success());

    ok(dir, &["gen", "-o", "p.npts", "--n", "16", "--d", "2", "--phi", "64"]);
    ok(dir, &["build", "p.npts", "-o", "q.nnsk", "--engine", "quadtree"]);
    std::fs::write(dir.join("y.txt"), "0 0\n").unwrap();
    assert!(!nnsk(dir, &["query-dist", "q.nnsk", "y.txt"]).status.success());
    std::fs::write(dir.join("far.txt"), "65 0\n").unwrap();
    assert!(!nnsk(dir, &["query-ann", "q.nnsk", "far.txt"]).status.success());
}

#[test]
fn hard_instance_key_evaluates() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["gen", "-o", "h.npts", "--hard", "--n", "16", "--eps", "0.5"]);
    let key = std::fs::read_to_string(dir.join("h.npts.key")).unwrap();
    assert_eq!(key.lines().filter(|l| !l.trim().is_empty()).count(), 16 * 4);
    let report = ok(
        dir,
        &["eval", "--key", "h.npts.key", "--points", "h.npts", "--queries", "h.npts.queries.npts", "--eps", "0.5", "--engine", "quadtree"],
    );
    assert!(report.contains("bit_recovery_rate="), "{report}");
}

#[test]
fn eval_writes_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let report = ok(dir, &["eval", "--n", "32", "--d", "2", "--q", "4", "--trials", "3", "--csv", "t.csv", "--report", "r.txt"]);
    assert!(report.contains("success_rate="));
    assert_eq!(std::fs::read_to_string(dir.join("r.txt")).unwrap(), report);
    let csv = std::fs::read_to_string(dir.join("t.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "trial,success,bits_total,bits_tree,bits_hashes,bits_dist,t_build_ms,t_query_us");
    assert_eq!(lines.count(), 3);
}

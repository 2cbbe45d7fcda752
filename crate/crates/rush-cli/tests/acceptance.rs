//! Criterion 8: every CLI command rerun with identical flags produces
//! byte-identical outputs, for --jobs 1 and --jobs 8.

use std::path::Path;
use std::process::Command;

fn rush() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rush"))
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

fn run_ok(cmd: &mut Command) {
    let out = cmd.output().expect("spawning rush");
    assert!(
        out.status.success(),
        "command failed: {:?}\nstdout: {}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn criterion_8_cli_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let bench = p("fam.json");

    // gen twice with identical flags
    for out in ["fam.json", "fam2.json"] {
        run_ok(rush().args([
            "gen",
            "--arms",
            "20",
            "--horizon",
            "64",
            "--tasks",
            "4",
            "--rho",
            "1.0",
            "--noise",
            "0.1",
            "--seed",
            "7",
            "-o",
            p(out).to_str().unwrap(),
        ]));
    }
    assert_eq!(read(&p("fam.json")), read(&p("fam2.json")), "gen is not deterministic");

    // run: jobs 1 twice, jobs 8 once — all byte-identical
    let run_with = |jobs: &str, csv: &str, json: &str| {
        run_ok(rush().args([
            "run",
            "--scheduler",
            "rush",
            "--bench",
            bench.to_str().unwrap(),
            "--budget",
            "120",
            "--sequence-length",
            "4",
            "--repetitions",
            "6",
            "--arms-per-task",
            "12",
            "--seed",
            "3",
            "--jobs",
            jobs,
            "--out-csv",
            p(csv).to_str().unwrap(),
            "--out-json",
            p(json).to_str().unwrap(),
        ]));
    };
    run_with("1", "run_a.csv", "run_a.json");
    run_with("1", "run_b.csv", "run_b.json");
    run_with("8", "run_c.csv", "run_c.json");
    assert_eq!(read(&p("run_a.csv")), read(&p("run_b.csv")), "run rerun differs");
    assert_eq!(read(&p("run_a.json")), read(&p("run_b.json")));
    assert_eq!(read(&p("run_a.csv")), read(&p("run_c.csv")), "jobs 1 vs 8 differ");
    assert_eq!(read(&p("run_a.json")), read(&p("run_c.json")));

    // compare: jobs 1 vs 8
    let compare_with = |jobs: &str, csv: &str, json: &str| {
        run_ok(rush().args([
            "compare",
            "--baseline",
            "sh",
            "--candidate",
            "rush",
            "--bench",
            bench.to_str().unwrap(),
            "--budget",
            "120",
            "--sequence-length",
            "4",
            "--repetitions",
            "6",
            "--arms-per-task",
            "12",
            "--seed",
            "3",
            "--jobs",
            jobs,
            "--out-csv",
            p(csv).to_str().unwrap(),
            "--out-json",
            p(json).to_str().unwrap(),
        ]));
    };
    compare_with("1", "cmp_a.csv", "cmp_a.json");
    compare_with("8", "cmp_b.csv", "cmp_b.json");
    assert_eq!(read(&p("cmp_a.csv")), read(&p("cmp_b.csv")), "compare jobs 1 vs 8");
    assert_eq!(read(&p("cmp_a.json")), read(&p("cmp_b.json")));

    // sweep: jobs 1 vs 8
    let sweep_with = |jobs: &str, csv: &str, json: &str| {
        run_ok(rush().args([
            "sweep",
            "--scheduler",
            "rush",
            "--budgets",
            "60,120",
            "--bench",
            bench.to_str().unwrap(),
            "--sequence-length",
            "4",
            "--repetitions",
            "6",
            "--arms-per-task",
            "12",
            "--seed",
            "3",
            "--jobs",
            jobs,
            "--out-csv",
            p(csv).to_str().unwrap(),
            "--out-json",
            p(json).to_str().unwrap(),
        ]));
    };
    sweep_with("1", "sweep_a.csv", "sweep_a.json");
    sweep_with("8", "sweep_b.csv", "sweep_b.json");
    assert_eq!(read(&p("sweep_a.csv")), read(&p("sweep_b.csv")), "sweep jobs 1 vs 8");
    assert_eq!(read(&p("sweep_a.json")), read(&p("sweep_b.json")));

    // verify-theorem twice
    for out in ["verify_a.json", "verify_b.json"] {
        run_ok(rush().args([
            "verify-theorem",
            "--instances",
            "25",
            "--max-arms",
            "8",
            "--seed",
            "9",
            "--out-json",
            p(out).to_str().unwrap(),
        ]));
    }
    assert_eq!(read(&p("verify_a.json")), read(&p("verify_b.json")));

    println!(
        "ACCEPTANCE 8 cli determinism: PASS — gen/run/compare/sweep/verify-theorem byte-identical across reruns and --jobs 1 vs 8"
    );
}

//! End-to-end checks of the command-line interface: ledger rows, exit
//! codes, reproducibility, and the config-file merge.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mttkrp-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .skip(1) // header
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn seq_blocked_example_row() {
    let o = run(&["seq", "--synthetic", "4,4,4:2", "--mode", "1", "--M", "16"]);
    assert!(o.status.success());
    let rows = data_rows(&stdout(&o));
    assert_eq!(rows.len(), 1);
    let r = &rows[0];
    assert_eq!(r[0], "blocked");
    assert_eq!(r[5], "2", "default block size from the planner");
    let loads: u128 = r[6].parse().unwrap();
    let stores: u128 = r[7].parse().unwrap();
    assert_eq!(loads + stores, 192);
}

#[test]
fn seq_unblocked_example_row() {
    let o = run(&["seq", "--synthetic", "4,4,4:2", "--alg", "unblocked", "--M", "16"]);
    assert!(o.status.success());
    let rows = data_rows(&stdout(&o));
    let loads: u128 = rows[0][6].parse().unwrap();
    let stores: u128 = rows[0][7].parse().unwrap();
    assert_eq!(loads + stores, 576);
}

#[test]
fn seq_below_minimum_capacity_is_infeasible() {
    let o = run(&["seq", "--M", "2", "-N", "3"]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr).into_owned();
    assert!(err.contains("infeasible machine"), "stderr: {err}");
}

#[test]
fn seq_without_problem_or_memory_is_invalid() {
    let o = run(&["seq", "--M", "16"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["seq", "--synthetic", "4,4:1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn par_stationary_example_per_processor_words() {
    let o = run(&[
        "par",
        "--synthetic",
        "8,8,8:4",
        "--grid",
        "1x2x2x2",
        "--alg",
        "stationary",
        "--verify",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 9, "8 processors plus a summary row");
    for r in &rows {
        assert_eq!(r[8], "36", "words_sent in {r:?}");
    }
    assert!(text.contains("status=ok"));
}

#[test]
fn par_planner_chooses_grid_from_processor_count() {
    let o = run(&["par", "--synthetic", "8,8,8:4", "--P", "8", "--verify"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("grid=1x2x2x2"), "{text}");
}

#[test]
fn par_infeasible_grid_is_a_planning_error() {
    let o = run(&["par", "--synthetic", "4,4:2", "--grid", "1x8x1"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn bounds_example_row() {
    let o = run(&["bounds", "-N", "3", "--dims", "16^3", "--R", "16", "--M", "256"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let row = text
        .lines()
        .find(|l| l.starts_with("seq_memdep"))
        .expect("memory-dependent bound row");
    let value: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((value - 525.458_256_249_741_2).abs() < 1e-6, "value {value}");
    let trivial = text
        .lines()
        .find(|l| l.starts_with("seq_trivial"))
        .unwrap();
    let tv: f64 = trivial.split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(tv, 4096.0 + 3.0 * 16.0 * 16.0 - 512.0);
}

#[test]
fn bounds_order_must_match_dims() {
    let o = run(&["bounds", "-N", "2", "--dims", "4,4,4", "--R", "2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bounds_with_processor_count_emits_parallel_rows() {
    let o = run(&["bounds", "--dims", "8^3", "--R", "4", "--M", "32", "--P", "8"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for kind in [
        "par_memdep",
        "par_memind_general",
        "par_memind_rect",
        "par_combined",
    ] {
        assert!(text.lines().any(|l| l.starts_with(kind)), "missing {kind}");
    }
    let combined = text.lines().find(|l| l.starts_with("par_combined")).unwrap();
    let regime = combined.split(',').next_back().unwrap();
    assert!(regime == "general" || regime == "rect");
}

#[test]
fn par_krp_arithmetic_mode_runs() {
    let o = run(&[
        "par",
        "--synthetic",
        "6,4,4:3",
        "--grid",
        "1x2x2x1",
        "--arith",
        "krp",
        "--verify",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("status=ok"));
}

#[test]
fn sweep_fig3_shape_and_checkpoint() {
    let o = run(&["sweep", "--fig3"]);
    assert!(o.status.success());
    let rows = data_rows(&stdout(&o));
    assert_eq!(rows.len(), 31);
    let r17 = rows.iter().find(|r| r[0] == "131072").unwrap();
    let alg3: f64 = r17[1].parse().unwrap();
    let mm: f64 = r17[3].parse().unwrap();
    let ratio = mm / alg3;
    assert!((12.5..50.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn verify_subcommand_reports_ok() {
    let o = run(&["verify", "--synthetic", "5,4,3:3@7", "--mode", "2", "--M", "32"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("unblocked: OK"));
    assert!(text.contains("blocked: OK"));
    assert!(text.contains("stationary: OK"));
    assert!(text.contains("general: OK"));
}

#[test]
fn identical_configuration_gives_byte_identical_output() {
    let args = [
        "par",
        "--synthetic",
        "6,5,4:3@11",
        "--mode",
        "3",
        "--grid",
        "2x2x1x2",
        "--alg",
        "general",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn config_file_fills_defaults_and_flags_win() {
    let dir = std::env::temp_dir();
    let cfg: PathBuf = dir.join(format!("mttkrp-lab-cli-{}.cfg", std::process::id()));
    std::fs::write(&cfg, "synthetic=4,4,4:2\nM=16\nb=1\n").unwrap();
    // config supplies everything
    let o = run(&["seq", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let rows = data_rows(&stdout(&o));
    assert_eq!(rows[0][5], "1", "block size from config");
    // an explicit flag overrides the config's b=1
    let o = run(&["seq", "--config", cfg.to_str().unwrap(), "--b", "2"]);
    let rows = data_rows(&stdout(&o));
    assert_eq!(rows[0][5], "2", "flag wins over config");
    std::fs::remove_file(&cfg).ok();
}

#[test]
fn out_flag_writes_the_table_to_a_file() {
    let dir = std::env::temp_dir();
    let path: PathBuf = dir.join(format!("mttkrp-lab-out-{}.csv", std::process::id()));
    let dat: PathBuf = dir.join(format!("mttkrp-lab-out-{}.dat", std::process::id()));
    let o = run(&[
        "sweep",
        "--dims",
        "16^3",
        "--R",
        "4",
        "--p-pow2",
        "4",
        "--out",
        path.to_str().unwrap(),
        "--dat",
        dat.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(&path).unwrap();
    assert!(csv.contains("P,alg3_words"));
    let table = std::fs::read_to_string(&dat).unwrap();
    assert!(table.contains("P alg3_words"));
    std::fs::remove_file(&path).ok();
    std::fs::remove_file(&dat).ok();
}

#[test]
fn problem_files_round_trip_through_the_cli() {
    let dir = std::env::temp_dir();
    let path: PathBuf = dir.join(format!("mttkrp-lab-problem-{}.txt", std::process::id()));
    let p = mttkrp_lab::tensor::MttkrpProblem::synthetic(&[4, 4, 4], 2, 0, 42).unwrap();
    std::fs::write(&path, mttkrp_lab::io::write_problem(&p)).unwrap();
    let from_file = run(&[
        "seq",
        "--input",
        path.to_str().unwrap(),
        "--M",
        "16",
        "--verify",
    ]);
    assert!(from_file.status.success());
    let synth = run(&[
        "seq",
        "--synthetic",
        "4,4,4:2@42",
        "--mode",
        "1",
        "--M",
        "16",
    ]);
    // same ledger row either way
    assert_eq!(data_rows(&stdout(&from_file)), data_rows(&stdout(&synth)));
    std::fs::remove_file(&path).ok();
}

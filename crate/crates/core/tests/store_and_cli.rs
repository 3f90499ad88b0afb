//! Results store, report outputs and the command-line front door.

mod common;

use std::fs;
use std::path::Path;

use common::*;
use lagged_ehr::cohort::{serialize_events, Direction, PairId};
use lagged_ehr::reference::parse_grid_table;
use lagged_ehr::report::write_report;
use lagged_ehr::store::{run_grid, Store};
use lagged_ehr::study::{Study, StudyInput};
use lagged_ehr::synth::{generate_cohort, SynthSpec};

/// Two-cohort file study with two gold standards that disagree on both pairs.
fn two_cohort_study(dir: &Path, replicates: usize, grid: &str) -> Study {
    let mut text = format!("out_dir = \"results\"\nreplicates = {replicates}\nseed = 2\ngrid = \"{grid}\"\n");
    for (k, dir_) in [Direction::Increase, Direction::NoEffect].iter().enumerate() {
        let pair = PairId::new(format!("drug{k}"), "lab");
        let spec = SynthSpec { patients: 30, effect_direction: *dir_, seed: 40 + k as u64, ..SynthSpec::default() };
        let (cohort, _) = generate_cohort(&spec, pair).unwrap();
        fs::write(dir.join(format!("c{k}.csv")), serialize_events(&cohort.patients)).unwrap();
        text.push_str(&format!("[[cohort]]\ndrug = \"drug{k}\"\nlab = \"lab\"\npath = \"c{k}.csv\"\n"));
    }
    fs::write(dir.join("a.csv"), "drug,lab,direction\ndrug0,lab,1\ndrug1,lab,0\n").unwrap();
    fs::write(dir.join("b.csv"), "drug,lab,direction\ndrug0,lab,0\ndrug1,lab,-1\n").unwrap();
    text.push_str("[[gold]]\nlabel = \"a\"\npath = \"a.csv\"\n[[gold]]\nlabel = \"b\"\npath = \"b.csv\"\n");
    fs::write(dir.join("study.toml"), text).unwrap();
    Study::load(dir.join("study.toml")).unwrap()
}

#[test]
fn smoke_run_full_grid_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let study = two_cohort_study(tmp.path(), 10, "all");
    let summary = run_grid(&study).unwrap();
    assert_eq!((summary.cells, summary.computed), (128, 128));
    let store = Store::open(&study.out_dir).unwrap();
    assert_eq!(store.cells.len(), 128);
    assert_eq!(fs::read_dir(study.out_dir.join("cells")).unwrap().count(), 256);

    write_report(&store).unwrap();
    let report = study.out_dir.join("report");
    let table = fs::read_to_string(report.join("grid_table.csv")).unwrap();
    let (labels, rows) = parse_grid_table(&table).unwrap();
    assert_eq!(labels, ["a", "b"]);
    assert_eq!(rows.len(), 64);
    let best = rows.iter().map(|r| r.scores[0].0).fold(f64::MIN, f64::max);
    assert_eq!(rows[0].scores[0].0, best);
    let contrasts = fs::read_to_string(report.join("contrasts.csv")).unwrap();
    assert!(contrasts.contains("sequence vs real time"));
    assert!(contrasts.contains("preferred set vs complement"));
    let scatter = fs::read_to_string(report.join("scatter.csv")).unwrap();
    assert!(scatter.starts_with("# pearson"));
    assert_eq!(scatter.lines().count(), 66);
    let traj = fs::read_to_string(report.join("trajectories.csv")).unwrap();
    assert_eq!(traj.lines().count(), 1 + 128 * 30);
    assert!(fs::read_to_string(report.join("auroc_chart.svg")).unwrap().starts_with("<svg"));
    for g in ["a", "b"] {
        let t = fs::read_to_string(study.out_dir.join("auroc").join(format!("{g}.csv"))).unwrap();
        assert_eq!(t.lines().count(), 65);
    }
}

#[test]
fn rerun_reuses_cells_and_seed_change_recomputes() {
    let tmp = tempfile::tempdir().unwrap();
    let mut study = two_cohort_study(tmp.path(), 6, "time=seq,ctx=no,bin=no");
    let first = run_grid(&study).unwrap();
    let snap = snapshot(&study.out_dir);
    let again = run_grid(&study).unwrap();
    assert_eq!((again.computed, again.reused), (0, first.cells));
    assert_eq!(snapshot(&study.out_dir), snap);

    study.seed += 1;
    let changed = run_grid(&study).unwrap();
    assert_eq!(changed.computed, changed.cells);
    let fresh: Vec<String> = Store::open(&study.out_dir).unwrap().cells.iter().map(|c| c.digest.clone()).collect();
    assert!(fresh.iter().all(|d| !snap.iter().any(|(name, _)| name.contains(d.as_str()))));
}

#[test]
fn tampered_or_missing_cells_are_store_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let study = two_cohort_study(tmp.path(), 4, "time=seq,ctx=no,bin=no,norm=yes");
    run_grid(&study).unwrap();
    let store = Store::open(&study.out_dir).unwrap();
    let (a, b) = (&store.cells[0].digest, &store.cells[1].digest);
    let cells = study.out_dir.join("cells");
    let text = fs::read_to_string(cells.join(format!("{a}.profile"))).unwrap();
    fs::write(cells.join(format!("{a}.profile")), text.replace(a.as_str(), b.as_str())).unwrap();
    let err = Store::open(&study.out_dir).unwrap_err().to_string();
    assert!(err.contains("digest mismatch"), "{err}");
    fs::remove_file(cells.join(format!("{a}.profile"))).unwrap();
    let err = Store::open(&study.out_dir).unwrap_err();
    assert!(!err.is_validation() && err.to_string().contains("incomplete"), "{err}");
}

#[test]
fn cli_runs_are_deterministic_across_worker_counts() {
    let study = SMALL_STUDY.replace("grid = \"all\"", "grid = \"time=seq,ctx=no\"");
    if let Err(e) = end_to_end_determinism(&study, &[1, 3]) {
        panic!("{e}");
    }
}

#[test]
fn cli_exit_codes() {
    let code = |args: &[&str]| run_cli(args).unwrap().status.code();
    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["--version"]), Some(0));
    assert_eq!(code(&["frobnicate"]), Some(1));
    assert_eq!(code(&["run", "--grid", "time=later"]), Some(1));
    assert_eq!(code(&["run", "--study", "/no/such/study.toml"]), Some(1));
    assert_eq!(code(&["kappa"]), Some(0));
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().to_string_lossy().into_owned();
    assert_eq!(code(&["report", "--out", &empty]), Some(2));
    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "patient_id,time_seconds,channel,value\np,1,LAB,\n").unwrap();
    assert_eq!(code(&["ingest", &bad.to_string_lossy()]), Some(1));
}

#[test]
fn cli_synth_then_compare() {
    let tmp = tempfile::tempdir().unwrap();
    let base = tmp.path().join("base.toml");
    fs::write(&base, "replicates = 4\ngrid = \"time=seq,ctx=no,bin=no,norm=yes\"\n[synth]\npatients = 20\n").unwrap();
    let out = tmp.path().join("syn");
    let o = run_cli(&["synth", "--study", &base.to_string_lossy(), "--out", &out.to_string_lossy(), "--seed", "7"]).unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let study = Study::load(out.join("study.toml")).unwrap();
    assert!(matches!(study.input, StudyInput::Files(ref f) if f.len() == 28));
    let s = out.join("study.toml").to_string_lossy().into_owned();
    assert!(run_cli(&["run", "--study", &s]).unwrap().status.success());
    let o = run_cli(&["compare", "--study", &s, "--a", "model=joint", "--b", "model=indep"]).unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("synthetic,"), "{text}");
    let o = run_cli(&["compare", "--study", &s, "--a", "model=joint", "--b", "all"]).unwrap();
    assert_eq!(o.status.code(), Some(1));
}

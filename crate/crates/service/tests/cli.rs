mod common;

use std::process::Command;

use clap::Parser;
use serde_json::Value;
use tempfile::tempdir;
use wrapped_haptics::psychophysics::{
    write_responses_csv, MethodOrder, PairProtocol, SigmoidObserver, TrialResponse, TripletObserver, TripletProtocol,
    REFERENCE_PSI,
};
use wrapped_haptics_service::cli::Cli;

fn run(args: &[&str]) -> Result<String, String> {
    let cli = Cli::try_parse_from(std::iter::once("wrapsim").chain(args.iter().copied())).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    cli.run(&mut out).map_err(|e| e.to_string())?;
    Ok(String::from_utf8(out).unwrap())
}

#[test]
fn protocol_matches_the_library_generator() {
    let pair = run(&["protocol", "--kind", "pair", "--seed", "3"]).unwrap();
    assert_eq!(pair.trim_end(), PairProtocol::generate(3).to_json());
    let tri = run(&["protocol", "--kind", "triplet", "--seed", "3", "--order", "global-first"]).unwrap();
    assert_eq!(tri.trim_end(), TripletProtocol::generate(3, MethodOrder::GlobalFirst).to_json());
}

#[test]
fn seeds_are_always_explicit() {
    assert!(run(&["protocol", "--kind", "pair"]).is_err());
    assert!(run(&["simulate", "--task", "welding", "--feedback", "global"]).is_err());
}

#[test]
fn fit_reports_pairs_and_triplets() {
    let dir = tempdir().unwrap();
    let pairs = PairProtocol::generate(1);
    let mut observer = SigmoidObserver::new(4.7, REFERENCE_PSI, 1);
    let mut responses: Vec<TrialResponse> =
        pairs.trials.iter().map(|t| TrialResponse::pair(t, observer.answer(t), 3.0)).collect();
    let triplets = TripletProtocol::generate(1, MethodOrder::LocalFirst);
    let mut tri = TripletObserver::new(0.9, 1);
    responses.extend(triplets.trials().map(|t| TrialResponse::triplet(t, tri.answer(t), 2.0)));
    let path = dir.path().join("responses.csv");
    write_responses_csv(std::fs::File::create(&path).unwrap(), &responses).unwrap();

    let report: Value = serde_json::from_str(&run(&["fit", "--input", path.to_str().unwrap()]).unwrap()).unwrap();
    assert_eq!(report["pair"]["n"], 70);
    let k = report["pair"]["k"].as_f64().unwrap();
    assert!((report["pair"]["jnd"].as_f64().unwrap() * k - 3f64.ln()).abs() < 1e-9);
    assert_eq!(report["triplet"]["local"]["n"], 48);
    assert_eq!(report["triplet"]["global"]["n"], 48);
}

#[test]
fn simulate_runs_a_welding_session() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("weld.json");
    let report =
        run(&["simulate", "--task", "welding", "--feedback", "local", "--seed", "2", "--out", out.to_str().unwrap()]);
    let report: Value = serde_json::from_str(&report.unwrap()).unwrap();
    assert!(report["metrics"]["improvement_weld"].is_number());
    assert!(report["frames"].as_u64().unwrap() > 0);
    assert!(out.exists());
    assert!(run(&["simulate", "--task", "welding", "--feedback", "loud", "--seed", "2"]).is_err());
}

#[test]
fn simulate_runs_a_cleaning_session() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("session.jsonl");
    let report = run(&[
        "simulate",
        "--task",
        "cleaning-middle",
        "--feedback",
        "global",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    let report: Value = serde_json::from_str(&report.unwrap()).unwrap();
    assert_eq!(report["teacher"], "threshold");
    assert!(report["metrics"]["correct_segment"].as_f64().unwrap() > 50.0);
    let record = wrapped_haptics::teaching::SessionRecord::read_jsonl(std::io::BufReader::new(
        std::fs::File::open(&out).unwrap(),
    ))
    .unwrap();
    let metrics = common::context().metrics(&record).unwrap();
    assert_eq!(serde_json::to_value(metrics).unwrap(), report["metrics"]);
}

#[test]
fn export_reads_the_data_directory() {
    let dir = tempdir().unwrap();
    let (service, _) = common::service(dir.path());
    let req = wrapped_haptics_service::experiments::CreateExperiment {
        kind: wrapped_haptics_service::log::ExperimentKind::Pair,
        seed: 1,
        method: None,
        client_token: None,
    };
    let id = service.create_experiment(&req).unwrap().id;
    let data_dir = dir.path().to_str().unwrap();
    let jsonl = run(&["export", "--id", &id, "--format", "jsonl", "--data-dir", data_dir]).unwrap();
    assert_eq!(jsonl.lines().count(), service.events(&id).unwrap().len());
    let csv = run(&["export", "--id", &id, "--format", "csv", "--data-dir", data_dir]).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert!(run(&["export", "--id", "e-missing", "--format", "csv", "--data-dir", data_dir]).is_err());
}

#[test]
fn binary_exposes_every_verb() {
    let bin = env!("CARGO_BIN_EXE_wrapsim");
    let help = Command::new(bin).arg("--help").output().unwrap();
    let text = String::from_utf8(help.stdout).unwrap();
    for verb in ["serve", "simulate", "protocol", "fit", "export"] {
        assert!(text.contains(verb), "{verb} missing from help");
    }
    let out = Command::new(bin).args(["protocol", "--kind", "pair", "--seed", "5"]).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim_end(), PairProtocol::generate(5).to_json());
    let bad = Command::new(bin)
        .args(["export", "--id", "s-none", "--format", "csv"])
        .env("HAPTIC_DATA_DIR", tempdir().unwrap().path())
        .output()
        .unwrap();
    assert!(!bad.status.success());
}

//! Black-box checks of the installed binary: output file formats, exit
//! codes, and agreement with the library called in-process.

use std::path::Path;
use std::process::Command;

use kubo::model::load_tight_binding;
use kubo::{
    conductivity_trace, DissipationSpec, FrequencyGrid, OccupationSpec,
};

fn kubo_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kubo"))
}

fn run_ok(args: &[&str], dir: &Path) -> String {
    let out = kubo_bin().args(args).current_dir(dir).output().expect("binary runs");
    assert!(
        out.status.success(),
        "expected success for {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("stdout is UTF-8")
}

fn exit_code(args: &[&str], dir: &Path) -> i32 {
    kubo_bin().args(args).current_dir(dir).output().expect("binary runs").status.code().unwrap()
}

#[test]
fn csv_matches_the_library_to_the_last_bit() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        &[
            "conductivity",
            "--model",
            "chain",
            "--method",
            "trace",
            "--beta",
            "2",
            "--mu",
            "0.3",
            "--gamma",
            "0.5",
            "--omega",
            "0:2:5",
            "--L",
            "16",
            "-o",
            "chain.csv",
        ],
        dir.path(),
    );
    let text = std::fs::read_to_string(dir.path().join("chain.csv")).unwrap();

    let constants = kubo::PhysicalConstants::default();
    let model = kubo::model::ring(1.0).finite_model(16).unwrap();
    let want = conductivity_trace(
        &model,
        &OccupationSpec::with_mu(2.0, 0.3).unwrap(),
        &DissipationSpec::new(0.5).unwrap(),
        &FrequencyGrid::linspace(0.0, 2.0, 5).unwrap(),
        &constants,
    )
    .unwrap();

    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("omega,re_sigma_xx,im_sigma_xx"));
    for (i, line) in lines.enumerate() {
        let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells[0], want.omegas[i]);
        assert_eq!(cells[1], want.entry(i, 0, 0).re, "row {i} real part");
        assert_eq!(cells[2], want.entry(i, 0, 0).im, "row {i} imaginary part");
    }
}

#[test]
fn empty_sweep_writes_the_header_only() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        &[
            "conductivity",
            "--model",
            "chain",
            "--beta",
            "2",
            "--mu",
            "0",
            "--gamma",
            "0.5",
            "--omega",
            "0:4:0",
            "--L",
            "8",
            "-o",
            "empty.csv",
        ],
        dir.path(),
    );
    let text = std::fs::read_to_string(dir.path().join("empty.csv")).unwrap();
    assert_eq!(text, "omega,re_sigma_xx,im_sigma_xx\n");
}

#[test]
fn json_format_is_one_self_contained_file() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        &[
            "conductivity",
            "--model",
            "graphene",
            "--beta",
            "4",
            "--mu",
            "0",
            "--gamma",
            "0.2",
            "--omega",
            "0,1",
            "--L",
            "16",
            "-o",
            "g.json",
            "--format",
            "json",
        ],
        dir.path(),
    );
    let text = std::fs::read_to_string(dir.path().join("g.json")).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["data"]["dim"], 2);
    assert_eq!(doc["data"]["omegas"].as_array().unwrap().len(), 2);
    assert_eq!(doc["data"]["sigma"][0].as_array().unwrap().len(), 4);
    assert_eq!(doc["run"]["command"], "conductivity");
    assert_eq!(doc["run"]["model"], "graphene");
    assert_eq!(doc["method"], "graphene_closed_form");
    assert!(doc["version"].is_string());
    assert!(doc["wall_time_s"].is_number());
    // no sidecar in JSON mode: the file carries its own metadata
    assert!(!dir.path().join("g.meta.json").exists());
}

#[test]
fn model_files_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"{
        "dim": 1,
        "lattice_A": [[1.0]],
        "orbitals": [
            {"label": "A", "tau": [0.0]},
            {"label": "B", "tau": [0.4]}
        ],
        "hoppings": [
            {"R": [0], "from": 0, "to": 0, "value": [0.3, 0.0]},
            {"R": [0], "from": 1, "to": 1, "value": [-0.3, 0.0]},
            {"R": [0], "from": 0, "to": 1, "value": [0.9, 0.2]},
            {"R": [0], "from": 1, "to": 0, "value": [0.9, -0.2]},
            {"R": [1], "from": 1, "to": 0, "value": [0.5, -0.1]},
            {"R": [-1], "from": 0, "to": 1, "value": [0.5, 0.1]}
        ]
    }"#;
    let model_path = dir.path().join("model.json");
    std::fs::write(&model_path, spec).unwrap();

    run_ok(
        &[
            "conductivity",
            "--model",
            "model.json",
            "--beta",
            "3",
            "--mu",
            "0.2",
            "--gamma",
            "0.4",
            "--omega",
            "0,0.9",
            "--L",
            "12",
            "-o",
            "ladder.csv",
        ],
        dir.path(),
    );
    let text = std::fs::read_to_string(dir.path().join("ladder.csv")).unwrap();

    let loaded = load_tight_binding(&model_path).unwrap();
    let model = loaded.tight_binding.finite_model(12).unwrap();
    let want = conductivity_trace(
        &model,
        &OccupationSpec::with_mu(3.0, 0.2).unwrap(),
        &DissipationSpec::new(0.4).unwrap(),
        &FrequencyGrid::new(vec![0.0, 0.9]).unwrap(),
        &loaded.constants,
    )
    .unwrap();

    let row: Vec<f64> = text
        .lines()
        .nth(2)
        .unwrap()
        .split(',')
        .map(|c| c.parse().unwrap())
        .collect();
    assert_eq!(row[0], 0.9);
    assert_eq!(row[1], want.entry(1, 0, 0).re);
    assert_eq!(row[2], want.entry(1, 0, 0).im);

    // model file is untouched and the sidecar records the auto-selected route
    let still: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&model_path).unwrap()).unwrap();
    assert!(still["hoppings"].is_array());
    let sidecar: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("ladder.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(sidecar["method"], "trace");
    assert_eq!(sidecar["run"]["model"], "model.json");
}

#[test]
fn reruns_with_one_seed_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate-classical",
        "--gamma",
        "0.7",
        "--omega",
        "1.3",
        "--n-events",
        "5000",
        "--seed",
        "21",
        "-o",
        "c.csv",
    ];
    run_ok(&args, dir.path());
    let first = std::fs::read(dir.path().join("c.csv")).unwrap();
    run_ok(&args, dir.path());
    let second = std::fs::read(dir.path().join("c.csv")).unwrap();
    assert!(!first.is_empty());
    assert_eq!(first, second);
}

#[test]
fn contract_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // malformed sweep: validation failure
    assert_eq!(
        exit_code(
            &[
                "conductivity", "--model", "chain", "--beta", "2", "--mu", "0", "--gamma",
                "0.5", "--omega", "0:bad:3", "-o", "x.csv"
            ],
            dir.path()
        ),
        1
    );
    // both chemical specifications at once: clap-level conflict
    assert_eq!(
        exit_code(
            &[
                "conductivity", "--model", "chain", "--beta", "2", "--mu", "0", "--density",
                "1", "--gamma", "0.5", "-o", "x.csv"
            ],
            dir.path()
        ),
        1
    );
    // refinement that cannot converge: numerical failure
    assert_eq!(
        exit_code(
            &[
                "conductivity", "--model", "graphene", "--method", "bloch", "--beta", "4",
                "--mu", "0", "--gamma", "0.2", "--omega", "0:1:2", "--L", "16", "--rtol",
                "1e-14", "--max-refinements", "0", "-o", "x.csv"
            ],
            dir.path()
        ),
        2
    );
    // help is not an error
    assert_eq!(exit_code(&["--help"], dir.path()), 0);
}

#[test]
fn oracle_suite_passes_from_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let out = kubo_bin().args(["validate", "--suite", "oracle"]).current_dir(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.ends_with("ok")).count(), 4, "{text}");
}

#[test]
fn bad_worker_cap_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = kubo_bin()
        .args(["validate", "--suite", "oracle"])
        .env("KUBO_THREADS", "zero")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

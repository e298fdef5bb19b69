use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cellassoc_cli::exec::{self, Comparison};
use cellassoc_cli::{load_scenario, Policy};

fn cellassoc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cellassoc")).args(args).output().unwrap()
}

fn small_scenario(dir: &Path, extra: &str) -> String {
    let path = dir.join("small.scn");
    let text = format!(
        "name = small\n\
         domain.kind = interval\n\
         domain.x = 0, 1\n\
         domain.resolution = 12\n\
         density.kind = linear\n\
         density.coefficients = 1, 2\n\
         station.1.position = 0.1\n\
         station.1.congestion = polynomial 0 1\n\
         station.2.position = 0.8\n\
         station.2.congestion = polynomial 0.2 0.5\n\
         radio.sigma = 0.3\n\
         users.total = 10\n\
         policy = optimal\n\
         cost.base = distance\n\
         cost.exponent = 2\n\
         cost.coupling = additive\n\
         output.dir = {}\n{extra}",
        dir.join("out").display()
    );
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_writes_outputs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let scn = small_scenario(dir.path(), "");
    let out = cellassoc(&["run", &scn]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let partition = fs::read_to_string(dir.path().join("out/partition.csv")).unwrap();
    assert_eq!(partition.lines().next(), Some("cell_index,x,station_index"));
    assert_eq!(partition.lines().count(), 13);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["converged"], true);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let scn = small_scenario(dir.path(), "");
    let mut outputs = Vec::new();
    for sub in ["a", "b"] {
        let out_dir = dir.path().join(sub);
        assert_eq!(cellassoc(&["run", &scn, "--out", out_dir.to_str().unwrap()]).status.code(), Some(0));
        outputs
            .push((fs::read(out_dir.join("partition.csv")).unwrap(), fs::read(out_dir.join("report.json")).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn non_convergence_exits_two_with_output() {
    let dir = tempfile::tempdir().unwrap();
    let scn = small_scenario(dir.path(), "solver.max_iter = 1\nsolver.refine = false\n");
    let out = cellassoc(&["run", &scn]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out/partition.csv").exists());
}

#[test]
fn negative_sigma_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let scn = small_scenario(dir.path(), "");
    let text = fs::read_to_string(&scn).unwrap().replace("radio.sigma = 0.3", "radio.sigma = -1");
    fs::write(&scn, text).unwrap();
    let out = cellassoc(&["run", &scn]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sigma"));
}

#[test]
fn unknown_scenario_is_an_error() {
    assert_eq!(cellassoc(&["run", "no-such-preset"]).status.code(), Some(1));
}

#[test]
fn oracle_agrees_on_small_instance() {
    let dir = tempfile::tempdir().unwrap();
    let scn = small_scenario(dir.path(), "");
    let out = cellassoc(&["oracle", &scn, "--mode", "exhaustive"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let check: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(check["agree"], true);
}

#[test]
fn presets_list_names_every_preset() {
    let out = cellassoc(&["presets", "list"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for (name, _) in cellassoc_cli::presets::PRESETS {
        assert!(text.contains(name));
    }
}

#[test]
fn sweep_csv_has_header_and_one_row_per_step() {
    let out = cellassoc(&["sweep", "1d-two-stations", "--station", "1", "--from", "-8", "--to", "-2", "--steps", "4"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "param_value,threshold_1,common_rate,classification");
    assert_eq!(rows.len(), 5);
}

#[test]
fn two_station_threshold_moves_with_the_station() {
    let s = load_scenario("1d-two-stations").unwrap();
    let rows = exec::sweep(&s, 1, -9.0, -1.0, 9).unwrap();
    let mut last = f64::NEG_INFINITY;
    for r in &rows {
        assert!(r.converged, "{r:?}");
        let t = r.thresholds[0];
        assert!(t > r.param_value && t < 0.0, "threshold {t} outside ({}, 0)", r.param_value);
        assert!(t > last, "threshold {t} not increasing");
        last = t;
    }
}

#[test]
fn five_station_plane_has_five_nonempty_cells() {
    let s = load_scenario("2d-five-stations").unwrap();
    let inst = exec::Instance::build(&s).unwrap();
    let r = exec::execute(&s, s.policy, &inst).unwrap();
    assert!(r.converged);
    assert_eq!(r.masses.len(), 5);
    assert!(r.masses.iter().all(|m| *m > 0.0));
}

fn compare(preset: &str, policies: &[Policy]) -> Comparison {
    let s = load_scenario(preset).unwrap();
    exec::compare(&s, policies, None).unwrap().0
}

#[test]
fn equilibrium_costs_more_than_optimum_in_poa_toy() {
    let c = compare("poa-toy", &[Policy::Wardrop, Policy::Optimal]);
    assert!(c.ratios[0].ratio > 1.0, "{:?}", c.ratios);
}

#[test]
fn round_robin_beats_voronoi_on_its_own_objective() {
    let c = compare("example1-linear", &[Policy::RoundRobin, Policy::RateFair]);
    assert!(c.policies[0].cost <= c.policies[1].cost, "{:?}", c.policies);
}

#[test]
fn symmetric_instance_compares_equal() {
    let c = compare("example1-uniform", &[Policy::RoundRobin, Policy::RateFair]);
    assert!((c.ratios[0].ratio - 1.0).abs() <= 1e-9, "{:?}", c.ratios);
}

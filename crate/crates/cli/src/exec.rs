//! Policy dispatch and the run, sweep, compare and oracle commands.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use cellassoc::oracle::scan_supported;
use cellassoc::policy::{alpha_fair_spec, penalized_spec, round_robin_spec};
use cellassoc::wardrop::{equilibria, EquilibriumModel};
use cellassoc::{
    alpha_fair_solver, brute_force_oracle, penalized_rate_fair_solver, price_of_anarchy, rate_fair_solver,
    round_robin_solver, select_equilibrium, solve, total_cost, BaseCost, Congestion, CongestionSpec, CostRateModel,
    DensityField, OracleMode, Partition, RadioParams, ShareRateModel, SolverReport, Station,
};
use serde::Serialize;

use crate::scenario::{ModelKind, Policy, Scenario};

/// Density, stations and radio parameters built from a scenario.
pub struct Instance {
    pub density: DensityField,
    pub stations: Vec<Station>,
    pub params: RadioParams,
}

impl Instance {
    pub fn build(scenario: &Scenario) -> Result<Instance> {
        let density = scenario.build_density().context("building the density")?;
        if density.domain().dimension() != scenario.dim {
            bail!(
                "station coordinates are {}D but the density grid is {}D",
                scenario.dim,
                density.domain().dimension()
            );
        }
        Ok(Instance { density, stations: scenario.build_stations(), params: scenario.radio_params()? })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumSummary {
    pub masses: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub common_rate: f64,
    pub residual: f64,
    pub converged: bool,
    pub classification: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PoaSummary {
    pub equilibrium_cost: f64,
    pub optimum_cost: f64,
    pub ratio: f64,
    pub equilibrium_masses: Vec<f64>,
    pub optimum_masses: Vec<f64>,
    pub equilibria_found: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct WardropReport {
    pub model: String,
    pub selection: String,
    /// Index into `equilibria` of the exported solution.
    pub selected: usize,
    pub equilibria: Vec<EquilibriumSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub price_of_anarchy: Option<PoaSummary>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Report {
    Solver(SolverReport),
    Wardrop(WardropReport),
}

pub struct PolicyResult {
    pub policy: Policy,
    pub partition: Partition,
    pub masses: Vec<f64>,
    pub converged: bool,
    /// Cost under the policy's own objective.
    pub own_cost: f64,
    pub report: Report,
    /// Set for wardrop runs of the cost model: the optimum behind the PoA.
    pub optimum: Option<Partition>,
    /// Position-ordered boundaries (1D).
    pub thresholds: Vec<f64>,
    pub common_rate: Option<f64>,
    pub classification: String,
}

/// The cost a policy minimizes. Equilibria of the share model are scored
/// with the rate-fair cost.
pub fn objective(scenario: &Scenario, policy: Policy, inst: &Instance) -> Result<CongestionSpec> {
    let k = inst.stations.len();
    Ok(match policy {
        Policy::RoundRobin => round_robin_spec(&inst.params, scenario.users, k),
        Policy::RateFair => CongestionSpec::distance_only(BaseCost::path_loss(&inst.params), k),
        Policy::Penalized => penalized_spec(&inst.params, &inst.stations, scenario.users, scenario.solver.tol),
        Policy::AlphaFair(a) => alpha_fair_spec(&inst.params, scenario.users, a, k)?,
        Policy::Optimal => scenario.custom_spec()?,
        Policy::Wardrop => match scenario.wardrop.model {
            ModelKind::Cost => scenario.custom_spec()?,
            ModelKind::Share => CongestionSpec::distance_only(BaseCost::path_loss(&inst.params), k),
        },
    })
}

fn model(scenario: &Scenario, inst: &Instance) -> Result<Box<dyn EquilibriumModel>> {
    Ok(match scenario.wardrop.model {
        ModelKind::Share => Box::new(ShareRateModel::new(inst.stations.clone(), inst.params, scenario.users)?),
        ModelKind::Cost => Box::new(CostRateModel::new(inst.stations.clone(), scenario.custom_spec()?)?),
    })
}

fn with_counts(mut p: Partition, users: f64) -> Partition {
    p.user_counts = p.masses.iter().map(|m| m * users).collect();
    p
}

pub fn execute(scenario: &Scenario, policy: Policy, inst: &Instance) -> Result<PolicyResult> {
    let (density, stations) = (&inst.density, inst.stations.as_slice());
    let cfg = &scenario.solver;
    let spec = objective(scenario, policy, inst)?;
    let solved = match policy {
        Policy::RoundRobin => Some(round_robin_solver(density, stations, &inst.params, scenario.users, cfg)?),
        Policy::Penalized => Some(penalized_rate_fair_solver(density, stations, &inst.params, scenario.users, cfg)?),
        Policy::AlphaFair(a) => Some(alpha_fair_solver(density, stations, &inst.params, scenario.users, a, cfg)?),
        Policy::Optimal => {
            let (mut p, mut r) = solve(density, stations, &spec, cfg)?;
            // Marginal costs jump at a step, so the fixed point can stop at a
            // local optimum; on a line the scan finds the global one.
            let stepped = spec.terms().iter().any(|t| matches!(t, Congestion::Step { .. }));
            if stepped && scan_supported(density, stations.len()) {
                let (scan, cost) = brute_force_oracle(density, stations, &spec, OracleMode::ThresholdScan)?;
                if cost < r.total_cost {
                    let breakdown = total_cost(&scan, density, stations, &spec)?;
                    r.total_cost = breakdown.total;
                    r.intracell_costs = breakdown.per_station;
                    r.masses = scan.masses.clone();
                    p = scan;
                }
            }
            Some((with_counts(p, scenario.users), r))
        }
        Policy::RateFair => {
            let p = with_counts(rate_fair_solver(density, stations, &inst.params)?, scenario.users);
            let cost = total_cost(&p, density, stations, &spec)?;
            let report = SolverReport {
                iterations: 0,
                residual: 0.0,
                converged: true,
                total_cost: cost.total,
                masses: p.masses.clone(),
                intracell_costs: cost.per_station,
                max_mass_drift: None,
                refinement_moves: None,
                exact: None,
                total_power: None,
            };
            Some((p, report))
        }
        Policy::Wardrop => None,
    };
    let thresholds =
        |p: &Partition| if scenario.is_1d() { p.thresholds(density.domain(), stations) } else { Vec::new() };
    if let Some((partition, report)) = solved {
        return Ok(PolicyResult {
            policy,
            masses: report.masses.clone(),
            converged: report.converged,
            own_cost: report.total_cost,
            thresholds: thresholds(&partition),
            partition,
            optimum: None,
            common_rate: None,
            classification: if report.converged { "optimal" } else { "unconverged" }.into(),
            report: Report::Solver(report),
        });
    }

    let model = model(scenario, inst)?;
    let found = equilibria(density, model.as_ref(), &scenario.wardrop.config)?;
    let chosen = select_equilibrium(&found, scenario.wardrop.select)?;
    let selected = found.iter().position(|s| *s == chosen).unwrap_or(0);
    let poa = match scenario.wardrop.model {
        ModelKind::Cost => {
            Some(price_of_anarchy(density, stations, &spec, model.as_ref(), &scenario.wardrop.config, cfg)?)
        }
        ModelKind::Share => None,
    };
    let own_cost = total_cost(&chosen.partition, density, stations, &spec)?.total;
    let report = WardropReport {
        model: match scenario.wardrop.model {
            ModelKind::Share => "share".into(),
            ModelKind::Cost => "cost".into(),
        },
        selection: format!("{:?}", scenario.wardrop.select).to_lowercase(),
        selected,
        equilibria: found
            .iter()
            .map(|s| EquilibriumSummary {
                masses: s.masses.clone(),
                thresholds: s.thresholds.clone(),
                common_rate: s.common_rate,
                residual: s.residual,
                converged: s.converged,
                classification: s.classification.to_string(),
            })
            .collect(),
        price_of_anarchy: poa.as_ref().map(|p| PoaSummary {
            equilibrium_cost: p.equilibrium_cost,
            optimum_cost: p.optimum_cost,
            ratio: p.ratio,
            equilibrium_masses: p.equilibrium.masses.clone(),
            optimum_masses: p.optimum.masses.clone(),
            equilibria_found: p.equilibria_found,
        }),
    };
    // Cells that are not ordered intervals have no thresholds.
    let thresholds = match (scenario.is_1d(), chosen.thresholds.is_empty()) {
        (false, _) => Vec::new(),
        (true, false) => chosen.thresholds.clone(),
        (true, true) => vec![f64::NAN; stations.len() - 1],
    };
    Ok(PolicyResult {
        policy,
        masses: chosen.masses.clone(),
        converged: chosen.converged,
        own_cost,
        partition: with_counts(chosen.partition.clone(), scenario.users),
        optimum: poa.map(|p| with_counts(p.optimum, scenario.users)),
        thresholds,
        common_rate: Some(chosen.common_rate),
        classification: chosen.classification.to_string(),
        report: Report::Wardrop(report),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub scenario: String,
    pub scenario_hash: String,
    pub policy: String,
    pub converged: bool,
    pub masses: Vec<f64>,
    pub user_counts: Vec<f64>,
    pub total_cost: f64,
    pub partition: PathBuf,
    pub report: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimum_partition: Option<PathBuf>,
    pub wall_clock_seconds: f64,
}

fn write_partition(path: &Path, partition: &Partition, density: &DensityField) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    partition.write_csv(density.domain(), std::io::BufWriter::new(file))?;
    Ok(())
}

/// Runs the scenario's policy and writes `partition.csv`, `report.json` and
/// `record.json` (plus `optimum.csv` for cost-model equilibria) to `out_dir`.
pub fn run_scenario(scenario: &Scenario, out_dir: &Path) -> Result<(RunRecord, PolicyResult)> {
    let start = Instant::now();
    let inst = Instance::build(scenario)?;
    let result = execute(scenario, scenario.policy, &inst).with_context(|| format!("scenario {}", scenario.name))?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let partition_path = out_dir.join("partition.csv");
    let report_path = out_dir.join("report.json");
    write_partition(&partition_path, &result.partition, &inst.density)?;
    let optimum_path = match &result.optimum {
        Some(p) => {
            let path = out_dir.join("optimum.csv");
            write_partition(&path, p, &inst.density)?;
            Some(path)
        }
        None => None,
    };
    fs::write(&report_path, serde_json::to_string_pretty(&result.report)? + "\n")?;
    let record = RunRecord {
        scenario: scenario.name.clone(),
        scenario_hash: scenario.hash(),
        policy: result.policy.name(),
        converged: result.converged,
        masses: result.masses.clone(),
        user_counts: result.masses.iter().map(|m| m * scenario.users).collect(),
        total_cost: result.own_cost,
        partition: partition_path,
        report: report_path,
        optimum_partition: optimum_path,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    fs::write(out_dir.join("record.json"), serde_json::to_string_pretty(&record)? + "\n")?;
    Ok((record, result))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param_value: f64,
    pub thresholds: Vec<f64>,
    pub common_rate: Option<f64>,
    pub classification: String,
    pub converged: bool,
}

/// Moves station `station` (1-based) through `steps` evenly spaced
/// positions from `from` to `to`. Rows whose solve fails carry NaN
/// thresholds and are marked unclassified.
pub fn sweep(scenario: &Scenario, station: usize, from: f64, to: f64, steps: usize) -> Result<Vec<SweepRow>> {
    if !scenario.is_1d() {
        bail!("sweeps need a 1D scenario");
    }
    if station == 0 || station > scenario.stations.len() {
        bail!("station {station} does not exist (stations are numbered 1 to {})", scenario.stations.len());
    }
    if steps == 0 || !from.is_finite() || !to.is_finite() {
        bail!("need at least one step and finite bounds");
    }
    let base = Instance::build(scenario)?;
    let k = scenario.stations.len();
    let mut rows = Vec::with_capacity(steps);
    for step in 0..steps {
        let x = if steps == 1 { from } else { from + (to - from) * step as f64 / (steps - 1) as f64 };
        let mut s = scenario.clone();
        s.stations[station - 1].position.x = x;
        let inst = Instance { density: base.density.clone(), stations: s.build_stations(), params: base.params };
        let row = match execute(&s, s.policy, &inst) {
            Ok(r) => SweepRow {
                param_value: x,
                thresholds: r.thresholds,
                common_rate: r.common_rate,
                classification: r.classification,
                converged: r.converged,
            },
            Err(e) => {
                eprintln!("sweep at {x}: {e:#}");
                SweepRow {
                    param_value: x,
                    thresholds: vec![f64::NAN; k - 1],
                    common_rate: None,
                    classification: "unclassified".into(),
                    converged: false,
                }
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], stations: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["param_value".to_string()];
    header.extend((1..stations).map(|i| format!("threshold_{i}")));
    header.push("common_rate".into());
    header.push("classification".into());
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.param_value.to_string()];
        rec.extend((0..stations - 1).map(|i| r.thresholds.get(i).copied().unwrap_or(f64::NAN).to_string()));
        rec.push(r.common_rate.map(|c| c.to_string()).unwrap_or_default());
        rec.push(r.classification.clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareEntry {
    pub policy: String,
    /// Cost under the comparison objective.
    pub cost: f64,
    pub own_cost: f64,
    pub masses: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CostRatio {
    pub numerator: String,
    pub denominator: String,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    /// Policy whose objective scores every partition.
    pub objective: String,
    pub policies: Vec<CompareEntry>,
    pub ratios: Vec<CostRatio>,
}

/// Scores each policy's partition with the objective of `reference`
/// (default: the first policy) and reports every pairwise cost ratio.
pub fn compare(scenario: &Scenario, policies: &[Policy], reference: Option<Policy>) -> Result<(Comparison, bool)> {
    if policies.len() < 2 {
        bail!("compare needs at least two policies");
    }
    let inst = Instance::build(scenario)?;
    let reference = reference.unwrap_or(policies[0]);
    let spec = objective(scenario, reference, &inst)?;
    let mut entries = Vec::new();
    for p in policies {
        let r = execute(scenario, *p, &inst).with_context(|| format!("policy {}", p.name()))?;
        entries.push(CompareEntry {
            policy: p.name(),
            cost: total_cost(&r.partition, &inst.density, &inst.stations, &spec)?.total,
            own_cost: r.own_cost,
            masses: r.masses,
            converged: r.converged,
        });
    }
    let mut ratios = Vec::new();
    for (i, a) in entries.iter().enumerate() {
        for b in &entries[i + 1..] {
            ratios.push(CostRatio {
                numerator: a.policy.clone(),
                denominator: b.policy.clone(),
                ratio: a.cost / b.cost,
            });
        }
    }
    let converged = entries.iter().all(|e| e.converged);
    Ok((Comparison { objective: reference.name(), policies: entries, ratios }, converged))
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleCheck {
    pub policy: String,
    pub mode: OracleMode,
    pub cells: usize,
    pub solver_cost: f64,
    pub oracle_cost: f64,
    /// `(solver - oracle) / |oracle|`; negative when the solver beats the
    /// oracle's search family.
    pub relative_gap: f64,
    pub agree: bool,
    pub solver_masses: Vec<f64>,
    pub oracle_masses: Vec<f64>,
}

pub const ORACLE_TOL: f64 = 1e-6;

/// Solves the scenario's objective and compares against brute force.
/// Without `mode`, grids small enough are enumerated exhaustively and the
/// rest threshold-scanned.
pub fn oracle(scenario: &Scenario, mode: Option<OracleMode>) -> Result<OracleCheck> {
    let inst = Instance::build(scenario)?;
    let spec = objective(scenario, scenario.policy, &inst)?;
    let cells = inst.density.domain().num_cells();
    let mode = mode.unwrap_or(if cells <= cellassoc::oracle::EXHAUSTIVE_MAX_CELLS {
        OracleMode::Exhaustive
    } else {
        OracleMode::ThresholdScan
    });
    let (solved, report) = solve(&inst.density, &inst.stations, &spec, &scenario.solver)?;
    let (found, oracle_cost) = brute_force_oracle(&inst.density, &inst.stations, &spec, mode)?;
    let relative_gap = (report.total_cost - oracle_cost) / oracle_cost.abs().max(f64::MIN_POSITIVE);
    Ok(OracleCheck {
        policy: scenario.policy.name(),
        mode,
        cells,
        solver_cost: report.total_cost,
        oracle_cost,
        relative_gap,
        agree: relative_gap <= ORACLE_TOL,
        solver_masses: solved.masses,
        oracle_masses: found.masses,
    })
}

use serde::{Deserialize, Serialize};

use crate::congestion::{BaseCost, Congestion, CongestionSpec};
use crate::density::DensityField;
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::oracle::{brute_force_oracle, scan_supported, OracleMode};
use crate::partition::{total_cost, Partition};
use crate::radio::Station;
use crate::solver::{solve, SolverConfig};

use super::line::{solve_equilibrium_1d_loads, solve_equilibrium_1d_multi, solve_equilibrium_1d_two_stations};
use super::plane::{solve_equilibrium_2d, EquilibriumConfig};
use super::{CostRateModel, EquilibriumModel, EquilibriumSolution};

/// Equilibria with the solver suited to the instance: all two-station
/// thresholds on a line, the Gauss-Seidel threshold solution for more
/// stations on a line, and the load fixed point on a rectangle.
///
/// On a line the threshold solvers only see equilibria whose cells are
/// intervals ordered like the stations. When none of theirs converges the
/// load fixed point with continuous boundaries is tried as well.
pub fn equilibria(
    density: &DensityField,
    model: &dyn EquilibriumModel,
    cfg: &EquilibriumConfig,
) -> Result<Vec<EquilibriumSolution>> {
    let k = model.stations().len();
    let found = match density.domain() {
        Domain::Rectangle { .. } => return Ok(vec![solve_equilibrium_2d(density, model, cfg)?]),
        Domain::Interval(_) if k == 2 => solve_equilibrium_1d_two_stations(density, model, cfg.scan_resolution)?,
        Domain::Interval(_) => solve_equilibrium_1d_multi(density, model, cfg)?,
    };
    if found.iter().any(|s| s.converged) || k == 1 {
        return Ok(found);
    }
    let general = solve_equilibrium_1d_loads(density, model, cfg)?;
    Ok(if general.converged { vec![general] } else { found })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoaReport {
    /// Cost of the most expensive equilibrium found.
    pub equilibrium_cost: f64,
    pub optimum_cost: f64,
    pub ratio: f64,
    pub equilibrium: EquilibriumSolution,
    pub optimum: Partition,
    pub equilibria_found: usize,
}

/// Ratio of the costliest equilibrium's cost to the optimum's under `spec`.
/// The optimum is the cheapest of the optimizer's partition, the threshold
/// scan (1D instances it supports) and the equilibria themselves.
pub fn price_of_anarchy(
    density: &DensityField,
    stations: &[Station],
    spec: &CongestionSpec,
    model: &dyn EquilibriumModel,
    eq_cfg: &EquilibriumConfig,
    solver_cfg: &SolverConfig,
) -> Result<PoaReport> {
    let found = equilibria(density, model, eq_cfg)?;
    if found.is_empty() {
        return Err(Error::NoEquilibria);
    }
    let mut worst: Option<(f64, &EquilibriumSolution)> = None;
    for s in &found {
        let c = total_cost(&s.partition, density, stations, spec)?.total;
        if worst.is_none_or(|(w, _)| c > w) {
            worst = Some((c, s));
        }
    }
    let (equilibrium_cost, equilibrium) = worst.expect("nonempty");

    let (mut optimum, report) = solve(density, stations, spec, solver_cfg)?;
    let mut optimum_cost = report.total_cost;
    if scan_supported(density, stations.len()) {
        let (p, c) = brute_force_oracle(density, stations, spec, OracleMode::ThresholdScan)?;
        if c < optimum_cost {
            optimum = p;
            optimum_cost = c;
        }
    }
    for s in &found {
        let c = total_cost(&s.partition, density, stations, spec)?.total;
        if c < optimum_cost {
            optimum = s.partition.clone();
            optimum_cost = c;
        }
    }
    if !(optimum_cost > 0.0) {
        return Err(Error::DegenerateOptimum(optimum_cost));
    }
    Ok(PoaReport {
        equilibrium_cost,
        optimum_cost,
        ratio: equilibrium_cost / optimum_cost,
        equilibrium: equilibrium.clone(),
        optimum,
        equilibria_found: found.len(),
    })
}

/// Stations at 0 and 1 on `[0, 1]`, cost `d + s_i(N)` with `s_1 = 100` and
/// `s_2` zero up to a load of 0.999 and 1 beyond.
pub fn poa_toy_spec() -> (Vec<Station>, CongestionSpec) {
    let spec = CongestionSpec::additive(
        BaseCost::DistancePower { exponent: 1.0 },
        vec![Congestion::Constant(100.0), Congestion::Step { at: 0.999, below: 0.0, above: 1.0 }],
    );
    (vec![Station::on_line(0.0), Station::on_line(1.0)], spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoaToyReport {
    pub equilibrium_masses: Vec<f64>,
    pub optimum_masses: Vec<f64>,
    /// Right edge of the first station's optimal cell.
    pub optimum_boundary: f64,
    pub equilibrium_cost: f64,
    pub optimum_cost: f64,
    pub ratio: f64,
}

/// The two-station instance whose equilibrium sends everyone to the
/// second station while the optimum carves a sliver for the first.
pub fn poa_toy_example(resolution: usize) -> Result<PoaToyReport> {
    let density = DensityField::uniform(Domain::interval(0.0, 1.0, resolution)?);
    let (stations, spec) = poa_toy_spec();
    let model = CostRateModel::new(stations.clone(), spec.clone())?;
    let poa =
        price_of_anarchy(&density, &stations, &spec, &model, &EquilibriumConfig::default(), &SolverConfig::default())?;
    let first = poa.optimum.assignment.iter().take_while(|s| **s == 0).count();
    Ok(PoaToyReport {
        equilibrium_masses: poa.equilibrium.masses.clone(),
        optimum_masses: poa.optimum.masses.clone(),
        optimum_boundary: density.domain().x_axis().edge(first),
        equilibrium_cost: poa.equilibrium_cost,
        optimum_cost: poa.optimum_cost,
        ratio: poa.ratio,
    })
}

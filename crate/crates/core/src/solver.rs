//! Optimal partitions for congestion-augmented transport costs.
//!
//! Both solvers iterate on the load state: given masses `N` (and, for the
//! multiplicative rule, base-cost integrals `I`) every cell goes to the
//! station with the smallest marginal cost
//!
//! * additive: `F_i(d) + s_i(N_i) + N_i s_i'(N_i)`
//! * multiplicative: `m_i(N_i) F_i(d) + m_i'(N_i) I_i`
//!
//! and the state moves toward the loads of that assignment by a damped step.
//! The damping factor is halved whenever a station's load correction
//! changes sign, which settles the two-cycles a discrete grid otherwise
//! produces near a boundary. The final assignment is then polished against
//! the exact objective (see [`crate::refine`]).

use serde::{Deserialize, Serialize};

use crate::congestion::CongestionSpec;
use crate::density::DensityField;
use crate::error::{Error, Result};
use crate::par;
use crate::partition::{check_stations, cost_of_assignment, CostTable, Partition};
use crate::radio::Station;
use crate::refine;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Convergence tolerance on the load update.
    pub tol: f64,
    /// Initial damping factor in `(0, 1]`.
    pub damping: f64,
    pub max_iter: usize,
    /// Run exact-objective refinement after the fixed point.
    pub refine: bool,
    /// Largest grid searched exhaustively (branch and bound) during refinement.
    pub exact_max_cells: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: 1e-8, damping: 0.5, max_iter: 10_000, refine: true, exact_max_cells: 20 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::param("tol", format!("must be positive, got {}", self.tol)));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::param("damping", format!("must be in (0, 1], got {}", self.damping)));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    /// Size of the last load update, `max_i |N_i^{k+1} - N_i^k|`.
    pub residual: f64,
    pub converged: bool,
    pub total_cost: f64,
    pub masses: Vec<f64>,
    pub intracell_costs: Vec<f64>,
    /// Largest `|sum_i N_i - 1|` seen over all iterates.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_mass_drift: Option<f64>,
    /// Cells reassigned by refinement.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub refinement_moves: Option<usize>,
    /// Set when refinement proved the assignment optimal over all assignments.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub exact: Option<bool>,
    /// Total transmit power of the network (round robin only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub total_power: Option<f64>,
}

impl SolverReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Minimizes `sum_i int_{C_i} (F_i(d_i) + s_i(N_i)) lambda`.
pub fn solve_additive(
    density: &DensityField,
    stations: &[Station],
    spec: &CongestionSpec,
    cfg: &SolverConfig,
) -> Result<(Partition, SolverReport)> {
    if !spec.is_additive() {
        return Err(Error::param("spec", "solve_additive needs an additive congestion spec"));
    }
    solve(density, stations, spec, cfg)
}

/// Minimizes `sum_i m_i(N_i) int_{C_i} F_i(d_i) lambda`.
pub fn solve_multiplicative(
    density: &DensityField,
    stations: &[Station],
    spec: &CongestionSpec,
    cfg: &SolverConfig,
) -> Result<(Partition, SolverReport)> {
    if spec.is_additive() {
        return Err(Error::param("spec", "solve_multiplicative needs a multiplicative congestion spec"));
    }
    solve(density, stations, spec, cfg)
}

/// Dispatches on the coupling of `spec`.
pub fn solve(
    density: &DensityField,
    stations: &[Station],
    spec: &CongestionSpec,
    cfg: &SolverConfig,
) -> Result<(Partition, SolverReport)> {
    cfg.validate()?;
    check_stations(stations, true)?;
    let table = CostTable::new(density, stations, spec)?;
    let k = stations.len();
    let multiplicative = !spec.is_additive();

    // Voronoi start.
    let mut assignment = par::map(table.cells, |c| table.best_station(c, |i| table.d(i, c)));
    let (mut n, mut integ) = table.loads(&assignment);
    let mut gamma = cfg.damping;
    let mut prev_step: Option<Vec<f64>> = None;
    let mut drift = (n.iter().sum::<f64>() - 1.0).abs();
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    let mut best: Option<(f64, Vec<usize>)> = None;

    while iterations < cfg.max_iter {
        iterations += 1;
        let next =
            par::map(table.cells, |c| table.best_station(c, |i| spec.marginal_cost(i, table.f(i, c), n[i], integ[i])));
        let (m, j) = table.loads(&next);
        let step: Vec<f64> = (0..k).map(|i| m[i] - n[i]).collect();
        if let Some(prev) = &prev_step {
            if step.iter().zip(prev).any(|(a, b)| a * b < 0.0) {
                gamma *= 0.5;
            }
        }
        let integ_scale = integ.iter().map(|v| v.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
        residual = (0..k)
            .map(|i| {
                let dn = gamma * step[i].abs();
                if multiplicative {
                    dn.max(gamma * (j[i] - integ[i]).abs() / integ_scale)
                } else {
                    dn
                }
            })
            .fold(0.0, f64::max);
        for i in 0..k {
            n[i] += gamma * step[i];
            integ[i] += gamma * (j[i] - integ[i]);
        }
        drift = drift.max((n.iter().sum::<f64>() - 1.0).abs());
        assignment = next;
        if residual <= cfg.tol {
            converged = true;
            break;
        }
        let cost = cost_of_assignment(&table, spec, &assignment).total;
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, assignment.clone()));
        }
        prev_step = Some(step);
    }
    if !converged {
        if let Some((_, a)) = best {
            assignment = a;
        }
    }

    let mut moves = None;
    let mut exact = None;
    if cfg.refine {
        let mut count = refine::local_search(&table, spec, &mut assignment, 10_000);
        if table.cells <= cfg.exact_max_cells && spec.is_monotone() {
            let r = refine::branch_and_bound(&table, spec, &mut assignment);
            if r.improved {
                count += refine::local_search(&table, spec, &mut assignment, 10);
            }
            exact = Some(r.complete);
        }
        moves = Some(count);
    }

    let breakdown = cost_of_assignment(&table, spec, &assignment);
    let partition = Partition::from_assignment(density, assignment, k, 1.0);
    let report = SolverReport {
        iterations,
        residual,
        converged,
        total_cost: breakdown.total,
        masses: partition.masses.clone(),
        intracell_costs: breakdown.per_station,
        max_mass_drift: Some(drift),
        refinement_moves: moves,
        exact,
        total_power: None,
    };
    Ok((partition, report))
}

/// Result of [`check_optimality`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalityCheck {
    /// `max_i |N_i - mass(C_i)|` between reported and recomputed masses.
    pub mass_residual: f64,
    /// Largest amount by which a cell's own marginal cost exceeds another
    /// station's, beyond the allowance (zero when every cell passes).
    pub max_violation: f64,
    /// Cells that fail their inequality.
    pub violations: usize,
}

/// Verifies the first-order conditions at `partition`: each cell's assigned
/// station must have the smallest marginal cost up to `tol` times the local
/// cost scale plus the change a single cell's mass causes in the compared
/// marginal costs.
pub fn check_optimality(
    partition: &Partition,
    density: &DensityField,
    stations: &[Station],
    spec: &CongestionSpec,
    tol: f64,
) -> Result<OptimalityCheck> {
    let table = CostTable::new(density, stations, spec)?;
    let (n, integ) = table.loads(&partition.assignment);
    let mass_residual = n.iter().zip(&partition.masses).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let k = stations.len();
    let per_cell = par::map(table.cells, |c| {
        let j = partition.assignment[c];
        let w = table.mass[c];
        let own = spec.marginal_cost(j, table.f(j, c), n[j], integ[j]);
        let own_less = spec.marginal_cost(j, table.f(j, c), (n[j] - w).max(0.0), integ[j] - w * table.f(j, c));
        let mut worst: f64 = 0.0;
        for i in (0..k).filter(|i| *i != j) {
            let other = spec.marginal_cost(i, table.f(i, c), n[i], integ[i]);
            let other_more = spec.marginal_cost(i, table.f(i, c), n[i] + w, integ[i] + w * table.f(i, c));
            let slack = (own - own_less).abs() + (other_more - other).abs();
            let scale = own.abs().max(other.abs());
            let excess = own - other - slack - tol * scale;
            worst = worst.max(excess);
        }
        worst
    });
    let violations = per_cell.iter().filter(|v| **v > 0.0).count();
    let max_violation = per_cell.into_iter().fold(0.0, f64::max);
    Ok(OptimalityCheck { mass_residual, max_violation, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::congestion::{BaseCost, Congestion};
    use crate::domain::{Domain, Point};
    use crate::partition::{total_cost, voronoi_partition};
    use approx::assert_abs_diff_eq;

    fn line(n: usize) -> DensityField {
        DensityField::uniform(Domain::interval(0.0, 1.0, n).unwrap())
    }

    fn two() -> [Station; 2] {
        [Station::on_line(0.0), Station::on_line(1.0)]
    }

    #[test]
    fn zero_congestion_is_voronoi_in_one_iteration() {
        let d = DensityField::from_fn(Domain::rectangle((0.0, 2.0), (0.0, 1.0), 40, 20).unwrap(), |p| 1.0 + p.x * p.y)
            .unwrap();
        let stations =
            [Station::at(Point::new(0.3, 0.2)), Station::at(Point::new(1.5, 0.7)), Station::at(Point::new(1.0, 0.1))];
        let spec = CongestionSpec::distance_only(BaseCost::DistancePower { exponent: 1.0 }, 3);
        let (p, r) = solve_additive(&d, &stations, &spec, &SolverConfig::default()).unwrap();
        assert!(r.converged && r.iterations <= 2);
        assert_eq!(p.assignment, voronoi_partition(&d, &stations).unwrap().assignment);
        let unit = CongestionSpec::multiplicative(
            BaseCost::DistancePower { exponent: 2.0 },
            vec![Congestion::Constant(1.0); 3],
        );
        let (p, r) = solve_multiplicative(&d, &stations, &unit, &SolverConfig::default()).unwrap();
        assert!(r.converged && r.iterations <= 2);
        assert_eq!(p.assignment, voronoi_partition(&d, &stations).unwrap().assignment);
    }

    #[test]
    fn linear_congestion_pushes_boundary_left() {
        let d = line(10_000);
        let spec = CongestionSpec::additive(
            BaseCost::DistancePower { exponent: 1.0 },
            vec![Congestion::Polynomial(vec![0.0, 1.0]), Congestion::Zero],
        );
        let (p, r) = solve_additive(&d, &two(), &spec, &SolverConfig::default()).unwrap();
        assert!(r.converged);
        // Marginal 2 N + t = 1 - t with N = t gives t = 1/4.
        assert_abs_diff_eq!(p.masses[0], 0.25, epsilon = 2e-4);
        let check = check_optimality(&p, &d, &two(), &spec, 1e-8).unwrap();
        assert_eq!(check.violations, 0);
        assert!(check.mass_residual <= 1e-12);
        assert_abs_diff_eq!(r.total_cost, total_cost(&p, &d, &two(), &spec).unwrap().total, epsilon = 1e-15);
    }

    #[test]
    fn symmetric_multiplicative_splits_evenly() {
        let d = line(1000);
        let spec = CongestionSpec::multiplicative(
            BaseCost::DistancePower { exponent: 2.0 },
            vec![Congestion::Exp2 { scale: 3.0, power: 1.0, floor: 0.0 }; 2],
        );
        let (p, r) = solve_multiplicative(&d, &two(), &spec, &SolverConfig::default()).unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(p.masses[0], 0.5, epsilon = 1e-12);
        assert!(r.max_mass_drift.unwrap() <= 1e-9);
    }

    #[test]
    fn wrong_coupling_is_rejected() {
        let spec = CongestionSpec::distance_only(BaseCost::DistancePower { exponent: 1.0 }, 2);
        assert!(solve_multiplicative(&line(10), &two(), &spec, &SolverConfig::default()).is_err());
        let bad = SolverConfig { damping: 0.0, ..SolverConfig::default() };
        assert!(solve_additive(&line(10), &two(), &spec, &bad).is_err());
    }

    #[test]
    fn report_json_has_expected_fields() {
        let spec = CongestionSpec::distance_only(BaseCost::DistancePower { exponent: 1.0 }, 2);
        let cfg = SolverConfig { refine: false, ..SolverConfig::default() };
        let (_, r) = solve_additive(&line(10), &two(), &spec, &cfg).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        for key in ["iterations", "residual", "converged", "total_cost", "masses", "intracell_costs"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert!(v.get("refinement_moves").is_none());
    }

    #[test]
    fn increasing_linear_congestion_never_grows_first_cell() {
        let d = line(2000);
        let mut last = f64::INFINITY;
        for c in [0.0, 0.1, 1.0, 10.0] {
            let spec = CongestionSpec::additive(
                BaseCost::DistancePower { exponent: 1.0 },
                vec![Congestion::Polynomial(vec![0.0, c]), Congestion::Zero],
            );
            let (p, _) = solve_additive(&d, &two(), &spec, &SolverConfig::default()).unwrap();
            assert!(p.masses[0] <= last + 1e-12);
            last = p.masses[0];
        }
    }
}

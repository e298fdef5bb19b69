//! Threshold equilibria on an interval. Cells are taken to be contiguous and
//! ordered like their stations.

use crate::density::{CumulativeMass, DensityField};
use crate::domain::{Domain, Point};
use crate::error::{Error, Result};
use crate::partition::{check_stations, position_order, Partition};

use super::plane::EquilibriumConfig;
use super::{classify, wardrop_check, Classification, EquilibriumModel, EquilibriumSolution, WARDROP_TOL};

/// Required indifference at an interior threshold, relative to the rate.
const INDIFFERENCE_TOL: f64 = 1e-10;

fn interval(density: &DensityField) -> Result<(f64, f64)> {
    match density.domain() {
        Domain::Interval(x) => Ok((x.lo, x.hi)),
        Domain::Rectangle { .. } => Err(Error::InvalidDomain("threshold equilibria need a 1D domain".into())),
    }
}

fn rate_at(model: &dyn EquilibriumModel, station: usize, t: f64, mass: f64) -> f64 {
    model.offered_rate(station, Point::on_line(t), mass)
}

/// Partition whose runs, left to right, belong to `order[k]` up to `right[k]`.
fn runs_partition(density: &DensityField, order: &[usize], right: &[f64], stations: usize) -> Partition {
    let domain = density.domain();
    let assignment = (0..domain.num_cells())
        .map(|c| {
            let x = domain.cell_center(c).x;
            let k = right[..order.len() - 1].iter().position(|r| x < *r).unwrap_or(order.len() - 1);
            order[k]
        })
        .collect();
    Partition::from_assignment(density, assignment, stations, 1.0)
}

fn finish(
    density: &DensityField,
    model: &dyn EquilibriumModel,
    partition: Partition,
    masses: Vec<f64>,
    thresholds: Vec<f64>,
    residual: f64,
    converged: bool,
) -> (EquilibriumSolution, bool) {
    let check = wardrop_check(&partition, &masses, density, model);
    let valid = check.holds(WARDROP_TOL);
    let solution = EquilibriumSolution {
        partition,
        masses,
        thresholds,
        common_rate: check.min_rate,
        residual: residual.max(check.max_violation),
        converged: converged && valid,
        classification: Classification::Unclassified,
    };
    (solution, valid)
}

/// All two-station threshold equilibria found by scanning the indifference
/// `g(t) = rate_left(t, N_left(t)) - rate_right(t, N_right(t))` for sign
/// changes and bisecting each one, plus the boundary-pinned solutions in
/// which one cell is empty. Only solutions that pass the Wardrop check are
/// returned, sorted by threshold.
pub fn solve_equilibrium_1d_two_stations(
    density: &DensityField,
    model: &dyn EquilibriumModel,
    scan_resolution: usize,
) -> Result<Vec<EquilibriumSolution>> {
    let stations = model.stations();
    if stations.len() != 2 {
        return Err(Error::Mismatch(format!("expected 2 stations, got {}", stations.len())));
    }
    check_stations(stations, true)?;
    if scan_resolution < 2 {
        return Err(Error::param("scan_resolution", "must be at least 2"));
    }
    let (a, b) = interval(density)?;
    let order = position_order(stations);
    let (l, r) = (order[0], order[1]);
    let cm = CumulativeMass::new(density);
    let total = cm.total();
    let g = |t: f64| {
        let n1 = cm.below(t);
        let rl = rate_at(model, l, t, n1);
        let rr = rate_at(model, r, t, total - n1);
        (rl - rr, rl.abs().max(rr.abs()).max(1.0))
    };
    let solution_at = |t: f64, residual: f64| {
        let n1 = if t <= a {
            0.0
        } else if t >= b {
            total
        } else {
            cm.below(t)
        };
        let mut masses = vec![0.0; 2];
        masses[l] = n1;
        masses[r] = total - n1;
        let partition = runs_partition(density, &order, &[t], 2);
        finish(density, model, partition, masses, vec![t], residual, true)
    };

    let mut out = Vec::new();
    let grid: Vec<f64> = (0..=scan_resolution).map(|k| a + (b - a) * k as f64 / scan_resolution as f64).collect();
    let values: Vec<f64> = grid.iter().map(|t| g(*t).0).collect();
    let mut roots = Vec::new();
    for k in 0..scan_resolution {
        let (g0, g1) = (values[k], values[k + 1]);
        if g0 == 0.0 && k > 0 {
            roots.push(grid[k]);
        } else if g0 != 0.0 && g1 != 0.0 && (g0 > 0.0) != (g1 > 0.0) {
            let (mut lo, mut hi) = (grid[k], grid[k + 1]);
            let lo_positive = g0 > 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let v = g(mid).0;
                if v == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (v > 0.0) == lo_positive {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t = if g(lo).0.abs() <= g(hi).0.abs() { lo } else { hi };
            roots.push(t);
        }
    }
    for t in roots {
        let (v, scale) = g(t);
        let n1 = cm.below(t);
        let load_ok = n1.min(total - n1) >= model.min_load();
        if v.abs() <= INDIFFERENCE_TOL * scale && load_ok && t > a && t < b {
            let (s, valid) = solution_at(t, v.abs() / scale);
            if valid {
                out.push(s);
            }
        }
    }
    for t in [a, b] {
        let (s, valid) = solution_at(t, 0.0);
        if valid {
            out.push(s);
        }
    }
    out.sort_by(|x, y| x.thresholds[0].total_cmp(&y.thresholds[0]));
    classify(&mut out);
    Ok(out)
}

/// Simultaneous thresholds for any number of stations: Gauss-Seidel sweeps
/// set each threshold to the indifference point between its two neighbors
/// with the other thresholds fixed. Stations whose cells end up holding
/// less than the model's minimum load are removed and the rest re-solved;
/// their (empty) cells show up as repeated thresholds.
pub fn solve_equilibrium_1d_multi(
    density: &DensityField,
    model: &dyn EquilibriumModel,
    cfg: &EquilibriumConfig,
) -> Result<Vec<EquilibriumSolution>> {
    let stations = model.stations();
    check_stations(stations, true)?;
    let (a, b) = interval(density)?;
    let order = position_order(stations);
    let k_all = stations.len();
    let cm = CumulativeMass::new(density);
    let total = cm.total();
    let mut active = order.clone();

    loop {
        let k = active.len();
        // Right edge of each active station's cell.
        let mut right: Vec<f64> = (0..k)
            .map(|i| {
                if i + 1 == k {
                    b
                } else {
                    let mid = 0.5 * (stations[active[i]].position.x + stations[active[i + 1]].position.x);
                    mid.clamp(a, b)
                }
            })
            .collect();
        let mut converged = k == 1;
        for _ in 0..cfg.max_iter {
            if k == 1 {
                break;
            }
            let mut change: f64 = 0.0;
            for i in 0..k - 1 {
                let lo = if i == 0 { a } else { right[i - 1] };
                let hi = right[i + 1];
                let t = indifference(model, &cm, active[i], active[i + 1], lo, hi);
                let t = right[i] + cfg.damping_1d * (t - right[i]);
                change = change.max((t - right[i]).abs());
                right[i] = t;
            }
            if change <= cfg.tol * (b - a) {
                converged = true;
                break;
            }
        }
        let mut left = a;
        let masses_active: Vec<f64> = right
            .iter()
            .map(|&r| {
                let m = cm.between(left, r);
                left = r;
                m
            })
            .collect();
        let starving = (0..k)
            .filter(|&i| masses_active[i] < model.min_load())
            .min_by(|x, y| masses_active[*x].total_cmp(&masses_active[*y]));
        if let (Some(i), true) = (starving, k > 1) {
            active.remove(i);
            continue;
        }

        // Residual: indifference at every interior threshold.
        let mut residual: f64 = 0.0;
        let mut left = a;
        for i in 0..k.saturating_sub(1) {
            let t = right[i];
            let rl = rate_at(model, active[i], t, cm.between(left, t));
            let rr = rate_at(model, active[i + 1], t, cm.between(t, right[i + 1]));
            let scale = rl.abs().max(rr.abs()).max(1.0);
            residual = residual.max((rl - rr).abs() / scale);
            left = t;
        }

        // Expand to every station in position order.
        let mut masses = vec![0.0; k_all];
        let mut thresholds = Vec::with_capacity(k_all - 1);
        let mut edge = a;
        for (pos, &s) in order.iter().enumerate() {
            if let Some(i) = active.iter().position(|x| *x == s) {
                masses[s] = masses_active[i];
                edge = right[i];
            }
            if pos + 1 < k_all {
                thresholds.push(edge);
            }
        }
        let mut full_right = thresholds.clone();
        full_right.push(b);
        let partition = runs_partition(density, &order, &full_right, k_all);
        let total_check = masses.iter().sum::<f64>();
        debug_assert!((total_check - total).abs() < 1e-9);
        let (solution, _) = finish(density, model, partition, masses, thresholds, residual, converged);
        let mut out = vec![solution];
        classify(&mut out);
        return Ok(out);
    }
}

/// Load fixed point on an interval without the contiguity assumption.
///
/// The best response to loads `N` sends every user to the station with the
/// highest offered rate; its cell boundaries are located between grid edges
/// by bisection and its masses read off the cumulative mass, so the map is
/// continuous in `N` and the fixed point is not limited by the grid. Loads
/// move with the same sign-adaptive steps as [`super::solve_equilibrium_2d`].
/// Thresholds are reported only when the cells come out as intervals in
/// station position order.
pub fn solve_equilibrium_1d_loads(
    density: &DensityField,
    model: &dyn EquilibriumModel,
    cfg: &EquilibriumConfig,
) -> Result<EquilibriumSolution> {
    let stations = model.stations();
    check_stations(stations, true)?;
    if !(cfg.damping > 0.0 && cfg.damping <= 1.0) {
        return Err(Error::param("damping", format!("must be in (0, 1], got {}", cfg.damping)));
    }
    let (a, b) = interval(density)?;
    let axis = *density.domain().x_axis();
    let cm = CumulativeMass::new(density);
    let total = cm.total();
    let k = stations.len();

    let best = |x: f64, loads: &[f64]| {
        let mut top = 0;
        let mut top_rate = rate_at(model, 0, x, loads[0]);
        for i in 1..k {
            let r = rate_at(model, i, x, loads[i]);
            if r > top_rate {
                top = i;
                top_rate = r;
            }
        }
        top
    };
    // Runs `(station, start, end)` of the best response, left to right.
    let response = |loads: &[f64]| {
        let mut runs: Vec<(usize, f64, f64)> = Vec::new();
        let mut start = a;
        let mut current = best(a, loads);
        let mut prev = a;
        for e in 1..=axis.cells {
            let x = axis.edge(e);
            let s = best(x, loads);
            if s != current {
                let (mut lo, mut hi) = (prev, x);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if best(mid, loads) == current {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                runs.push((current, start, hi));
                start = hi;
                current = best(hi, loads);
            }
            prev = x;
        }
        runs.push((current, start, b));
        runs
    };
    let masses_of = |runs: &[(usize, f64, f64)]| {
        let mut m = vec![0.0; k];
        for (s, lo, hi) in runs {
            m[*s] += cm.between(*lo, *hi);
        }
        m
    };

    let mut loads = masses_of(&response(&vec![total / k as f64; k]));
    let mut step = vec![cfg.damping; k];
    let mut prev = vec![0.0; k];
    let mut converged = k == 1;
    let mut iterations = 0;
    while !converged && iterations < cfg.max_iter {
        iterations += 1;
        let target = masses_of(&response(&loads));
        let mut largest: f64 = 0.0;
        for i in 0..k {
            let d = target[i] - loads[i];
            if d * prev[i] < 0.0 {
                step[i] *= 0.5;
            } else if d * prev[i] > 0.0 {
                step[i] = (step[i] * 1.2).min(cfg.damping);
            }
            prev[i] = d;
            loads[i] = (loads[i] + step[i] * d).max(0.0);
            largest = largest.max((step[i] * d).abs());
        }
        let sum: f64 = loads.iter().sum();
        loads.iter_mut().for_each(|v| *v *= total / sum);
        converged = largest <= cfg.tol;
    }

    let runs = response(&loads);
    let masses = masses_of(&runs);
    let residual = masses.iter().zip(&loads).map(|(m, l)| (m - l).abs()).fold(0.0, f64::max);
    let domain = density.domain();
    let assignment = (0..domain.num_cells()).map(|c| best(domain.cell_center(c).x, &loads)).collect();
    let partition = Partition::from_assignment(density, assignment, k, 1.0);

    let order = position_order(stations);
    let mut rank = vec![0; k];
    for (pos, s) in order.iter().enumerate() {
        rank[*s] = pos;
    }
    let ordered = runs.windows(2).all(|w| rank[w[0].0] < rank[w[1].0]);
    let thresholds = if ordered {
        let mut edge = a;
        let mut t = Vec::with_capacity(k - 1);
        for s in &order[..k - 1] {
            if let Some(run) = runs.iter().find(|r| r.0 == *s) {
                edge = run.2;
            }
            t.push(edge);
        }
        t
    } else {
        Vec::new()
    };
    let (mut solution, _) = finish(density, model, partition, masses, thresholds, residual, converged);
    if solution.converged {
        solution.classification = Classification::Best;
    }
    Ok(solution)
}

/// Point in `[lo, hi]` where users are indifferent between `left` (cell
/// `[lo, t]`) and `right` (cell `[t, hi]`); an endpoint when one side is
/// preferred throughout.
fn indifference(model: &dyn EquilibriumModel, cm: &CumulativeMass, left: usize, right: usize, lo: f64, hi: f64) -> f64 {
    let h = |t: f64| rate_at(model, left, t, cm.between(lo, t)) - rate_at(model, right, t, cm.between(t, hi));
    if hi <= lo {
        return lo;
    }
    if h(lo) <= 0.0 {
        return lo;
    }
    if h(hi) >= 0.0 {
        return hi;
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if h(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    if h(a).abs() <= h(b).abs() {
        a
    } else {
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::{RadioParams, Station};
    use crate::wardrop::ShareRateModel;
    use approx::assert_abs_diff_eq;

    fn params() -> RadioParams {
        RadioParams::with_sigma(0.3, 2.0, 1.0, 1.0).unwrap()
    }

    fn line(n: usize) -> DensityField {
        DensityField::uniform(Domain::interval(-10.0, 10.0, n).unwrap())
    }

    #[test]
    fn symmetric_pair_meets_in_the_middle() {
        let model = ShareRateModel::new(vec![Station::on_line(5.0), Station::on_line(-5.0)], params(), 100.0).unwrap();
        let sols = solve_equilibrium_1d_two_stations(&line(1000), &model, 2000).unwrap();
        assert_eq!(sols.len(), 1);
        assert_abs_diff_eq!(sols[0].thresholds[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sols[0].masses[0], 0.5, epsilon = 1e-12);
        assert!(sols[0].converged);
        assert_eq!(sols[0].classification, Classification::Best);
    }

    #[test]
    fn three_equally_spaced_stations() {
        let stations = vec![Station::on_line(-6.0), Station::on_line(0.0), Station::on_line(6.0)];
        let model = ShareRateModel::new(stations, params(), 100.0).unwrap();
        let d = DensityField::uniform(Domain::interval(-9.0, 9.0, 900).unwrap());
        let sols = solve_equilibrium_1d_multi(&d, &model, &EquilibriumConfig::default()).unwrap();
        let s = &sols[0];
        assert!(s.converged);
        assert_abs_diff_eq!(s.thresholds[0], -3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.thresholds[1], 3.0, epsilon = 1e-9);
    }

    #[test]
    fn weak_middle_station_empties() {
        let stations = vec![Station::on_line(-10.0), Station::on_line(10.0), Station::on_line(0.0).with_power(1e-6)];
        let model = ShareRateModel::new(stations, params(), 2500.0).unwrap();
        let sols = solve_equilibrium_1d_multi(&line(2000), &model, &EquilibriumConfig::default()).unwrap();
        let s = &sols[0];
        assert_eq!(s.masses[2], 0.0);
        assert!(s.converged, "residual {}", s.residual);
        assert_eq!(s.thresholds[0], s.thresholds[1]);
        assert_abs_diff_eq!(s.thresholds[0], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn two_station_multi_agrees_with_scan() {
        let stations = vec![Station::on_line(-2.0), Station::on_line(6.0).with_power(1.3)];
        let model = ShareRateModel::new(stations, params(), 50.0).unwrap();
        let d = DensityField::from_fn(Domain::interval(-10.0, 10.0, 4000).unwrap(), |p| 10.0 - 0.2 * p.x).unwrap();
        let scan = solve_equilibrium_1d_two_stations(&d, &model, 2000).unwrap();
        let multi = solve_equilibrium_1d_multi(&d, &model, &EquilibriumConfig::default()).unwrap();
        assert_eq!(scan.len(), 1);
        assert!(multi[0].converged);
        assert_abs_diff_eq!(scan[0].thresholds[0], multi[0].thresholds[0], epsilon = 1e-9);
    }

    #[test]
    fn rejects_2d() {
        let d = DensityField::uniform(Domain::rectangle((0.0, 1.0), (0.0, 1.0), 4, 4).unwrap());
        let model = ShareRateModel::new(vec![Station::on_line(0.0), Station::on_line(1.0)], params(), 10.0).unwrap();
        assert!(solve_equilibrium_1d_two_stations(&d, &model, 100).is_err());
    }
}

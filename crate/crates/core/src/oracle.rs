//! Brute-force reference solutions.

use serde::{Deserialize, Serialize};

use crate::congestion::CongestionSpec;
use crate::density::DensityField;
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::par;
use crate::partition::{check_stations, cost_of_assignment, position_order, CostTable, Partition};
use crate::radio::Station;

/// Largest grid for exhaustive enumeration.
pub const EXHAUSTIVE_MAX_CELLS: usize = 16;
/// Largest station count for either mode.
pub const ORACLE_MAX_STATIONS: usize = 3;
/// Largest grid for a two-station threshold scan (linear time).
pub const SCAN_MAX_CELLS_TWO: usize = 10_000_000;
/// Largest grid for a three-station threshold scan (quadratic time).
pub const SCAN_MAX_CELLS_THREE: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMode {
    /// 1D only: every split of the line into contiguous runs, one per
    /// station. Two stations are tried in both orders; three stations in
    /// position order. Empty runs are allowed.
    ThresholdScan,
    /// Every assignment of cells to stations.
    Exhaustive,
}

/// Whether the threshold scan accepts `stations` stations on `density`'s grid.
pub fn scan_supported(density: &DensityField, stations: usize) -> bool {
    let n = density.domain().num_cells();
    matches!(density.domain(), Domain::Interval(_))
        && (2..=ORACLE_MAX_STATIONS).contains(&stations)
        && n <= if stations == 3 { SCAN_MAX_CELLS_THREE } else { SCAN_MAX_CELLS_TWO }
}

/// Global minimum over the family searched by `mode`.
pub fn brute_force_oracle(
    density: &DensityField,
    stations: &[Station],
    spec: &CongestionSpec,
    mode: OracleMode,
) -> Result<(Partition, f64)> {
    check_stations(stations, false)?;
    let k = stations.len();
    let n = density.domain().num_cells();
    if k > ORACLE_MAX_STATIONS {
        return Err(Error::InstanceTooLarge {
            mode: mode_name(mode),
            reason: format!("{k} stations, at most {ORACLE_MAX_STATIONS} supported"),
        });
    }
    let table = CostTable::new(density, stations, spec)?;
    let assignment = match mode {
        OracleMode::Exhaustive => {
            if n > EXHAUSTIVE_MAX_CELLS {
                return Err(Error::InstanceTooLarge {
                    mode: "exhaustive",
                    reason: format!("{n} cells, at most {EXHAUSTIVE_MAX_CELLS} supported"),
                });
            }
            exhaustive(&table, spec)
        }
        OracleMode::ThresholdScan => {
            if !matches!(density.domain(), Domain::Interval(_)) {
                return Err(Error::InstanceTooLarge { mode: "threshold-scan", reason: "needs a 1D domain".into() });
            }
            let limit = if k == 3 { SCAN_MAX_CELLS_THREE } else { SCAN_MAX_CELLS_TWO };
            if n > limit {
                return Err(Error::InstanceTooLarge {
                    mode: "threshold-scan",
                    reason: format!("{n} cells with {k} stations, at most {limit} supported"),
                });
            }
            threshold_scan(&table, spec, stations)
        }
    };
    let cost = cost_of_assignment(&table, spec, &assignment).total;
    Ok((Partition::from_assignment(density, assignment, k, 1.0), cost))
}

fn mode_name(mode: OracleMode) -> &'static str {
    match mode {
        OracleMode::ThresholdScan => "threshold-scan",
        OracleMode::Exhaustive => "exhaustive",
    }
}

/// Odometer over all `k^n` assignments; each step touches one or a few
/// cells and only the affected stations are re-costed.
fn exhaustive(table: &CostTable, spec: &CongestionSpec) -> Vec<usize> {
    let (n, k) = (table.cells, table.stations);
    let mut a = vec![0usize; n];
    let mut mass = vec![0.0; k];
    let mut integral = vec![0.0; k];
    let mut count = vec![0usize; k];
    for c in 0..n {
        mass[0] += table.mass[c];
        integral[0] += table.mass[c] * table.f(0, c);
    }
    count[0] = n;
    let cost_of = |i: usize, count: &[usize], mass: &[f64], integral: &[f64]| {
        if count[i] == 0 {
            0.0
        } else {
            spec.station_cost(i, mass[i], integral[i])
        }
    };
    let mut cost: Vec<f64> = (0..k).map(|i| cost_of(i, &count, &mass, &integral)).collect();
    let mut best = a.clone();
    let mut best_cost: f64 = cost.iter().sum();
    if k == 1 {
        return best;
    }
    loop {
        // Advance the odometer.
        let mut c = 0;
        loop {
            if c == n {
                return best;
            }
            let from = a[c];
            let to = (from + 1) % k;
            a[c] = to;
            let w = table.mass[c];
            mass[from] -= w;
            integral[from] -= w * table.f(from, c);
            count[from] -= 1;
            mass[to] += w;
            integral[to] += w * table.f(to, c);
            count[to] += 1;
            if count[from] == 0 {
                mass[from] = 0.0;
                integral[from] = 0.0;
            }
            cost[from] = cost_of(from, &count, &mass, &integral);
            cost[to] = cost_of(to, &count, &mass, &integral);
            if to != 0 {
                break;
            }
            c += 1;
        }
        let total: f64 = cost.iter().sum();
        if total < best_cost {
            best_cost = total;
            best.copy_from_slice(&a);
        }
    }
}

/// Prefix sums of cell mass and `mass * F_i` for every station.
struct Prefix {
    mass: Vec<f64>,
    integral: Vec<Vec<f64>>,
}

impl Prefix {
    fn new(table: &CostTable) -> Self {
        let n = table.cells;
        let mut mass = vec![0.0; n + 1];
        let mut integral = vec![vec![0.0; n + 1]; table.stations];
        for c in 0..n {
            mass[c + 1] = mass[c] + table.mass[c];
            for (i, row) in integral.iter_mut().enumerate() {
                row[c + 1] = row[c] + table.mass[c] * table.f(i, c);
            }
        }
        Prefix { mass, integral }
    }

    /// Cost of station `i` owning cells `lo..hi`.
    fn cost(&self, spec: &CongestionSpec, i: usize, lo: usize, hi: usize) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        spec.station_cost(i, self.mass[hi] - self.mass[lo], self.integral[i][hi] - self.integral[i][lo])
    }
}

fn threshold_scan(table: &CostTable, spec: &CongestionSpec, stations: &[Station]) -> Vec<usize> {
    let n = table.cells;
    let prefix = Prefix::new(table);
    let order = position_order(stations);
    let fill = |runs: &[(usize, usize, usize)]| {
        let mut a = vec![0; n];
        for &(s, lo, hi) in runs {
            a[lo..hi].iter_mut().for_each(|x| *x = s);
        }
        a
    };
    match stations.len() {
        1 => vec![0; n],
        2 => {
            let mut best = (f64::INFINITY, 0, 0, 0);
            for (l, r) in [(order[0], order[1]), (order[1], order[0])] {
                for t in 0..=n {
                    let c = prefix.cost(spec, l, 0, t) + prefix.cost(spec, r, t, n);
                    if c < best.0 {
                        best = (c, l, r, t);
                    }
                }
            }
            let (_, l, r, t) = best;
            fill(&[(l, 0, t), (r, t, n)])
        }
        _ => {
            let (a, b, c) = (order[0], order[1], order[2]);
            let right: Vec<f64> = (0..=n).map(|t| prefix.cost(spec, c, t, n)).collect();
            let rows = par::map(n + 1, |t1| {
                let left = prefix.cost(spec, a, 0, t1);
                let mut best = (f64::INFINITY, t1);
                for t2 in t1..=n {
                    let v = left + prefix.cost(spec, b, t1, t2) + right[t2];
                    if v < best.0 {
                        best = (v, t2);
                    }
                }
                best
            });
            let (t1, (_, t2)) =
                rows.into_iter()
                    .enumerate()
                    .fold((0, (f64::INFINITY, 0)), |acc, (t1, r)| if r.0 < acc.1 .0 { (t1, r) } else { acc });
            fill(&[(a, 0, t1), (b, t1, t2), (c, t2, n)])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::congestion::{BaseCost, Congestion};
    use crate::domain::Domain;
    use crate::partition::voronoi_partition;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pure_distance_gives_voronoi() {
        let d = DensityField::from_fn(Domain::interval(0.0, 1.0, 12).unwrap(), |p| 1.0 + p.x).unwrap();
        let s = [Station::on_line(0.1), Station::on_line(0.45), Station::on_line(0.8)];
        let spec = CongestionSpec::distance_only(BaseCost::DistancePower { exponent: 1.0 }, 3);
        let v = voronoi_partition(&d, &s).unwrap();
        for mode in [OracleMode::Exhaustive, OracleMode::ThresholdScan] {
            let (p, _) = brute_force_oracle(&d, &s, &spec, mode).unwrap();
            assert_eq!(p.assignment, v.assignment, "{mode:?}");
        }
    }

    #[test]
    fn scan_finds_quarter_boundary() {
        let d = DensityField::uniform(Domain::interval(0.0, 1.0, 10_000).unwrap());
        let s = [Station::on_line(0.0), Station::on_line(1.0)];
        let spec = CongestionSpec::additive(
            BaseCost::DistancePower { exponent: 1.0 },
            vec![Congestion::Polynomial(vec![0.0, 1.0]), Congestion::Zero],
        );
        let (p, cost) = brute_force_oracle(&d, &s, &spec, OracleMode::ThresholdScan).unwrap();
        assert_abs_diff_eq!(p.masses[0], 0.25, epsilon = 1e-4);
        // t^2/2 + t^2 + (1-t)^2/2 at t = 1/4.
        assert_abs_diff_eq!(cost, 0.375, epsilon = 1e-6);
    }

    #[test]
    fn exhaustive_can_beat_contiguous() {
        // Balanced loads need cells {0, 2} against {1, 3}, which no single
        // threshold produces.
        let d = DensityField::from_weights(Domain::interval(0.0, 1.0, 4).unwrap(), vec![5.0, 5.0, 1.0, 1.0]).unwrap();
        let s = [Station::on_line(0.0), Station::on_line(1.0)];
        let spec = CongestionSpec::additive(
            BaseCost::DistancePower { exponent: 0.0 },
            vec![Congestion::Polynomial(vec![0.0, 1.0]), Congestion::Polynomial(vec![0.0, 1.0])],
        );
        let (_, ex) = brute_force_oracle(&d, &s, &spec, OracleMode::Exhaustive).unwrap();
        let (_, sc) = brute_force_oracle(&d, &s, &spec, OracleMode::ThresholdScan).unwrap();
        assert!(ex < sc);
    }

    #[test]
    fn size_limits() {
        let d = DensityField::uniform(Domain::interval(0.0, 1.0, 17).unwrap());
        let s = [Station::on_line(0.0), Station::on_line(1.0)];
        let spec = CongestionSpec::distance_only(BaseCost::DistancePower { exponent: 1.0 }, 2);
        assert!(matches!(
            brute_force_oracle(&d, &s, &spec, OracleMode::Exhaustive),
            Err(Error::InstanceTooLarge { .. })
        ));
        let four: Vec<Station> = (0..4).map(|i| Station::on_line(i as f64 / 4.0)).collect();
        let spec4 = CongestionSpec::distance_only(BaseCost::DistancePower { exponent: 1.0 }, 4);
        assert!(brute_force_oracle(&d, &four, &spec4, OracleMode::ThresholdScan).is_err());
        let sq = DensityField::uniform(Domain::rectangle((0.0, 1.0), (0.0, 1.0), 3, 3).unwrap());
        assert!(brute_force_oracle(&sq, &s, &spec, OracleMode::ThresholdScan).is_err());
    }
}

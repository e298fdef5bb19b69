use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::congestion::CongestionSpec;
use crate::density::DensityField;
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::par;
use crate::radio::Station;

/// Assignment of every quadrature cell to a station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub assignment: Vec<usize>,
    /// Proportion of users per station.
    pub masses: Vec<f64>,
    /// `masses * total_users`.
    pub user_counts: Vec<f64>,
}

impl Partition {
    pub fn from_assignment(density: &DensityField, assignment: Vec<usize>, stations: usize, total_users: f64) -> Self {
        debug_assert_eq!(assignment.len(), density.domain().num_cells());
        let masses = par::bucket_sums(assignment.len(), stations, |c| (assignment[c], density.cell_mass(c)));
        let user_counts = masses.iter().map(|m| m * total_users).collect();
        Partition { assignment, masses, user_counts }
    }

    pub fn stations(&self) -> usize {
        self.masses.len()
    }

    pub fn cells_of(&self, station: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignment.iter().enumerate().filter(move |(_, s)| **s == station).map(|(c, _)| c)
    }

    /// Area (or length) covered by each station's cell.
    pub fn areas(&self, domain: &Domain) -> Vec<f64> {
        let mut counts = vec![0usize; self.stations()];
        for s in &self.assignment {
            counts[*s] += 1;
        }
        counts.into_iter().map(|k| k as f64 * domain.cell_measure()).collect()
    }

    /// Boundaries of a 1D partition, one per consecutive pair of stations in
    /// position order: the edge after the cells of the first `k` stations.
    /// Matches the actual cell boundaries whenever cells are contiguous and
    /// ordered like their stations.
    pub fn thresholds(&self, domain: &Domain, stations: &[Station]) -> Vec<f64> {
        let order = position_order(stations);
        let axis = domain.x_axis();
        let mut counts = vec![0usize; self.stations()];
        for s in &self.assignment {
            counts[*s] += 1;
        }
        let mut acc = 0;
        order[..order.len().saturating_sub(1)]
            .iter()
            .map(|&s| {
                acc += counts[s];
                axis.edge(acc)
            })
            .collect()
    }

    /// Writes `cell_index,x[,y],station_index` rows.
    pub fn write_csv<W: Write>(&self, domain: &Domain, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        match domain {
            Domain::Interval(_) => w.write_record(["cell_index", "x", "station_index"])?,
            Domain::Rectangle { .. } => w.write_record(["cell_index", "x", "y", "station_index"])?,
        }
        for (c, s) in self.assignment.iter().enumerate() {
            let p = domain.cell_center(c);
            match domain {
                Domain::Interval(_) => w.write_record([c.to_string(), p.x.to_string(), s.to_string()])?,
                Domain::Rectangle { .. } => {
                    w.write_record([c.to_string(), p.x.to_string(), p.y.to_string(), s.to_string()])?
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Station indices sorted by x position, ties by index.
pub fn position_order(stations: &[Station]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..stations.len()).collect();
    order.sort_by(|a, b| stations[*a].position.x.total_cmp(&stations[*b].position.x).then(a.cmp(b)));
    order
}

pub(crate) fn check_stations(stations: &[Station], require_distinct: bool) -> Result<()> {
    if stations.is_empty() {
        return Err(Error::NoStations);
    }
    for s in stations {
        s.validate()?;
    }
    if require_distinct {
        for i in 0..stations.len() {
            for j in i + 1..stations.len() {
                if stations[i].position == stations[j].position {
                    return Err(Error::DuplicateStation { first: i, second: j });
                }
            }
        }
    }
    Ok(())
}

/// Nearest-station partition; ties go to the lowest index.
pub fn voronoi_partition(density: &DensityField, stations: &[Station]) -> Result<Partition> {
    check_stations(stations, true)?;
    let domain = density.domain();
    let assignment = par::map(domain.num_cells(), |c| {
        let p = domain.cell_center(c);
        argmin(stations.len(), |i| stations[i].position.distance(&p))
    });
    Ok(Partition::from_assignment(density, assignment, stations.len(), 1.0))
}

/// Index of the smallest score; ties resolve to the lowest index.
pub(crate) fn argmin(k: usize, score: impl Fn(usize) -> f64) -> usize {
    let mut best = 0;
    let mut best_v = score(0);
    for i in 1..k {
        let v = score(i);
        if v < best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Base cost `F_i(d_i(c))` for every station and cell, plus cell masses.
#[derive(Debug, Clone)]
pub(crate) struct CostTable {
    pub cells: usize,
    pub stations: usize,
    /// Station-major: `base[i * cells + c]`.
    pub base: Vec<f64>,
    /// Same layout as `base`; used to break score ties toward the nearer station.
    pub dist: Vec<f64>,
    pub mass: Vec<f64>,
}

impl CostTable {
    pub fn new(density: &DensityField, stations: &[Station], spec: &CongestionSpec) -> Result<Self> {
        spec.validate(stations.len())?;
        let domain = density.domain();
        let cells = domain.num_cells();
        let k = stations.len();
        let dist = par::map(k * cells, |idx| {
            let (i, c) = (idx / cells, idx % cells);
            stations[i].position.distance(&domain.cell_center(c))
        });
        let base = par::map(k * cells, |idx| spec.base[idx / cells].eval(dist[idx]));
        if let Some(idx) = base.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteIntegrand { cell: idx % cells });
        }
        Ok(CostTable { cells, stations: k, base, dist, mass: density.cell_masses() })
    }

    #[inline]
    pub fn f(&self, station: usize, cell: usize) -> f64 {
        self.base[station * self.cells + cell]
    }

    #[inline]
    pub fn d(&self, station: usize, cell: usize) -> f64 {
        self.dist[station * self.cells + cell]
    }

    /// Station minimizing `score`, ties to the nearer station, then the lower index.
    pub fn best_station(&self, cell: usize, score: impl Fn(usize) -> f64) -> usize {
        let mut best = 0;
        let mut best_v = score(0);
        for i in 1..self.stations {
            let v = score(i);
            if v < best_v || (v == best_v && self.d(i, cell) < self.d(best, cell)) {
                best = i;
                best_v = v;
            }
        }
        best
    }

    /// Per-station `(mass, base-cost integral)` of an assignment.
    pub fn loads(&self, assignment: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let masses = par::bucket_sums(self.cells, self.stations, |c| (assignment[c], self.mass[c]));
        let integrals =
            par::bucket_sums(self.cells, self.stations, |c| (assignment[c], self.f(assignment[c], c) * self.mass[c]));
        (masses, integrals)
    }
}

/// Per-station and total cost of a partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub total: f64,
    pub per_station: Vec<f64>,
}

/// `sum_i integral over C_i of cost_i(x, N_i) * density`.
pub fn total_cost(
    partition: &Partition,
    density: &DensityField,
    stations: &[Station],
    spec: &CongestionSpec,
) -> Result<CostBreakdown> {
    let table = CostTable::new(density, stations, spec)?;
    Ok(cost_of_assignment(&table, spec, &partition.assignment))
}

pub(crate) fn cost_of_assignment(table: &CostTable, spec: &CongestionSpec, assignment: &[usize]) -> CostBreakdown {
    let (masses, integrals) = table.loads(assignment);
    let per_station: Vec<f64> = (0..table.stations).map(|i| spec.station_cost(i, masses[i], integrals[i])).collect();
    let mut acc = par::NeumaierSum::default();
    per_station.iter().for_each(|v| acc.add(*v));
    CostBreakdown { total: acc.value(), per_station }
}

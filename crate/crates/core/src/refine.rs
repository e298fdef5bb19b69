//! Exact-objective polishing of a discrete assignment.
//!
//! The fixed point works with first-order conditions; on a finite grid the
//! best assignment can sit one cell away from it, or (on very coarse grids)
//! be non-contiguous altogether. Single-cell moves fix the former, and a
//! depth-first branch and bound settles small instances exactly.

use crate::congestion::{CongestionSpec, Coupling};
use crate::partition::CostTable;

/// Relative improvement a move must achieve to be accepted.
const IMPROVEMENT: f64 = 1e-13;

/// Node budget for branch and bound before giving up on exactness.
const NODE_BUDGET: u64 = 200_000_000;

struct Loads {
    mass: Vec<f64>,
    integral: Vec<f64>,
    count: Vec<usize>,
    cost: Vec<f64>,
}

impl Loads {
    fn new(table: &CostTable, spec: &CongestionSpec, assignment: &[usize]) -> Self {
        let (mass, integral) = table.loads(assignment);
        let mut count = vec![0; table.stations];
        for s in assignment {
            count[*s] += 1;
        }
        let cost = (0..table.stations).map(|i| station_cost(spec, i, count[i], mass[i], integral[i])).collect();
        Loads { mass, integral, count, cost }
    }

    fn total(&self) -> f64 {
        self.cost.iter().sum()
    }
}

fn station_cost(spec: &CongestionSpec, i: usize, count: usize, mass: f64, integral: f64) -> f64 {
    if count == 0 {
        0.0
    } else {
        spec.station_cost(i, mass, integral)
    }
}

/// Greedy single-cell moves until none lowers the objective. Sweeps
/// alternate direction so a boundary can travel either way within one pass.
/// Returns the number of moves made.
pub(crate) fn local_search(
    table: &CostTable,
    spec: &CongestionSpec,
    assignment: &mut [usize],
    max_passes: usize,
) -> usize {
    let k = table.stations;
    if k < 2 {
        return 0;
    }
    let mut loads = Loads::new(table, spec, assignment);
    let mut moves = 0;
    for pass in 0..max_passes {
        let mut moved = false;
        let scale = loads.cost.iter().map(|c| c.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
        let threshold = IMPROVEMENT * scale;
        for step in 0..table.cells {
            let c = if pass % 2 == 0 { step } else { table.cells - 1 - step };
            let w = table.mass[c];
            if w <= 0.0 {
                continue;
            }
            let j = assignment[c];
            let fj = table.f(j, c);
            let left_j = station_cost(spec, j, loads.count[j] - 1, loads.mass[j] - w, loads.integral[j] - w * fj);
            let base_delta = left_j - loads.cost[j];
            let mut best: Option<(usize, f64, f64)> = None;
            for i in (0..k).filter(|i| *i != j) {
                let joined =
                    station_cost(spec, i, loads.count[i] + 1, loads.mass[i] + w, loads.integral[i] + w * table.f(i, c));
                let delta = base_delta + joined - loads.cost[i];
                if delta < -threshold && best.is_none_or(|(_, d, _)| delta < d) {
                    best = Some((i, delta, joined));
                }
            }
            if let Some((i, _, joined)) = best {
                assignment[c] = i;
                loads.count[j] -= 1;
                loads.count[i] += 1;
                loads.mass[j] -= w;
                loads.mass[i] += w;
                loads.integral[j] -= w * fj;
                loads.integral[i] += w * table.f(i, c);
                loads.cost[j] = left_j;
                loads.cost[i] = joined;
                moves += 1;
                moved = true;
            }
        }
        if !moved {
            break;
        }
        // Resynchronize the running sums.
        loads = Loads::new(table, spec, assignment);
    }
    moves
}

/// Outcome of [`branch_and_bound`].
pub(crate) struct ExactResult {
    /// Whether the search finished within its node budget.
    pub complete: bool,
    pub improved: bool,
}

/// Exhaustive search over all assignments with cost-bound pruning, seeded
/// with `assignment` as incumbent. Requires `spec.is_monotone()`: partial
/// station costs must never decrease as cells are added.
pub(crate) fn branch_and_bound(table: &CostTable, spec: &CongestionSpec, assignment: &mut [usize]) -> ExactResult {
    let k = table.stations;
    let n = table.cells;
    debug_assert!(spec.is_monotone());
    // Heaviest cells first: their placement moves the bound the most.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| table.mass[*b].total_cmp(&table.mass[*a]).then(a.cmp(b)));

    let incumbent_cost = Loads::new(table, spec, assignment).total();
    let mut search = Search {
        table,
        spec,
        order,
        multiplicative: matches!(spec.coupling, Coupling::Multiplicative(_)),
        suffix_min: Vec::new(),
        best_cost: incumbent_cost,
        best: assignment.to_vec(),
        current: vec![0; n],
        mass: vec![0.0; k],
        integral: vec![0.0; k],
        count: vec![0; k],
        nodes: 0,
        improved: false,
    };
    // Remaining base cost if every remaining cell went to its cheapest station.
    let mut suffix = vec![0.0; n + 1];
    for pos in (0..n).rev() {
        let c = search.order[pos];
        let m = (0..k).map(|i| table.f(i, c)).fold(f64::INFINITY, f64::min);
        suffix[pos] = suffix[pos + 1] + table.mass[c] * m;
    }
    search.suffix_min = suffix;
    search.descend(0);
    let complete = search.nodes <= NODE_BUDGET;
    if search.improved {
        assignment.copy_from_slice(&search.best);
    }
    ExactResult { complete, improved: search.improved }
}

struct Search<'a> {
    table: &'a CostTable,
    spec: &'a CongestionSpec,
    order: Vec<usize>,
    multiplicative: bool,
    suffix_min: Vec<f64>,
    best_cost: f64,
    best: Vec<usize>,
    current: Vec<usize>,
    mass: Vec<f64>,
    integral: Vec<f64>,
    count: Vec<usize>,
    nodes: u64,
    improved: bool,
}

impl Search<'_> {
    fn partial_cost(&self) -> f64 {
        (0..self.table.stations)
            .map(|i| station_cost(self.spec, i, self.count[i], self.mass[i], self.integral[i]))
            .sum()
    }

    fn lower_bound(&self, pos: usize, partial: f64) -> f64 {
        if !self.multiplicative {
            return partial + self.suffix_min[pos];
        }
        let factors: Vec<f64> = (0..self.table.stations).map(|i| self.spec.terms()[i].value(self.mass[i])).collect();
        let rest: f64 = self.order[pos..]
            .iter()
            .map(|&c| {
                let cheapest =
                    (0..self.table.stations).map(|i| factors[i] * self.table.f(i, c)).fold(f64::INFINITY, f64::min);
                self.table.mass[c] * cheapest
            })
            .sum();
        partial + rest
    }

    fn descend(&mut self, pos: usize) {
        self.nodes += 1;
        if self.nodes > NODE_BUDGET {
            return;
        }
        let partial = self.partial_cost();
        if pos == self.order.len() {
            if partial < self.best_cost - IMPROVEMENT * self.best_cost.abs() {
                self.best_cost = partial;
                self.best.copy_from_slice(&self.current);
                self.improved = true;
            }
            return;
        }
        if self.lower_bound(pos, partial) >= self.best_cost {
            return;
        }
        let c = self.order[pos];
        let w = self.table.mass[c];
        // Try the cheapest stations first.
        let mut stations: Vec<usize> = (0..self.table.stations).collect();
        stations.sort_by(|a, b| self.table.f(*a, c).total_cmp(&self.table.f(*b, c)).then(a.cmp(b)));
        for i in stations {
            let (m0, i0) = (self.mass[i], self.integral[i]);
            self.current[c] = i;
            self.mass[i] += w;
            self.integral[i] += w * self.table.f(i, c);
            self.count[i] += 1;
            self.descend(pos + 1);
            self.count[i] -= 1;
            self.mass[i] = m0;
            self.integral[i] = i0;
        }
    }
}

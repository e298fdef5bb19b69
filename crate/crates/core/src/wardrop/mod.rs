//! User-optimal (Wardrop) associations: every user picks the station that
//! offers it the best rate given the current loads, so no user gains by
//! switching alone.

mod line;
mod model;
mod plane;
mod poa;

use serde::{Deserialize, Serialize};

use crate::density::DensityField;
use crate::error::{Error, Result};
use crate::par;
use crate::partition::Partition;

pub use line::{solve_equilibrium_1d_loads, solve_equilibrium_1d_multi, solve_equilibrium_1d_two_stations};
pub use model::{CostRateModel, EquilibriumModel, ShareRateModel};
pub use plane::{solve_equilibrium_2d, EquilibriumConfig};
pub use poa::{equilibria, poa_toy_example, poa_toy_spec, price_of_anarchy, PoaReport, PoaToyReport};

/// Relative tolerance of the Wardrop conditions.
pub const WARDROP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Best,
    Worst,
    Unclassified,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::Best => "best",
            Classification::Worst => "worst",
            Classification::Unclassified => "unclassified",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    /// Cellwise partition; in 2D a cell split between stations goes to the
    /// station holding most of it.
    pub partition: Partition,
    /// Equilibrium loads. In 1D these are continuous in the threshold
    /// positions rather than rounded to whole grid cells.
    pub masses: Vec<f64>,
    /// Cell boundaries in position order (1D only).
    pub thresholds: Vec<f64>,
    /// Rate of the worst-served user.
    pub common_rate: f64,
    /// Largest relative rate imbalance the solver left behind.
    pub residual: f64,
    pub converged: bool,
    pub classification: Classification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    Best,
    Worst,
}

impl std::str::FromStr for Selection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "best" => Ok(Selection::Best),
            "worst" => Ok(Selection::Worst),
            other => Err(Error::param("selection", format!("expected best or worst, got {other:?}"))),
        }
    }
}

/// Best (highest common rate) or worst (lowest) equilibrium; ties go to
/// the solution with the lowest first threshold, then the earliest.
pub fn select_equilibrium(solutions: &[EquilibriumSolution], criterion: Selection) -> Result<EquilibriumSolution> {
    let first_threshold = |s: &EquilibriumSolution| s.thresholds.first().copied().unwrap_or(f64::NEG_INFINITY);
    let mut best: Option<&EquilibriumSolution> = None;
    for s in solutions {
        best = Some(match best {
            None => s,
            Some(b) => {
                let better = match criterion {
                    Selection::Best => s.common_rate > b.common_rate,
                    Selection::Worst => s.common_rate < b.common_rate,
                };
                let tie = s.common_rate == b.common_rate && first_threshold(s) < first_threshold(b);
                if better || tie {
                    s
                } else {
                    b
                }
            }
        });
    }
    best.cloned().ok_or(Error::NoEquilibria)
}

/// Marks the extremes of a list of equilibria. A lone solution is `Best`.
pub(crate) fn classify(solutions: &mut [EquilibriumSolution]) {
    if solutions.is_empty() {
        return;
    }
    let best = solutions.iter().map(|s| s.common_rate).fold(f64::NEG_INFINITY, f64::max);
    let worst = solutions.iter().map(|s| s.common_rate).fold(f64::INFINITY, f64::min);
    for s in solutions.iter_mut() {
        s.classification = if !s.converged {
            Classification::Unclassified
        } else if s.common_rate == best {
            Classification::Best
        } else if s.common_rate == worst {
            Classification::Worst
        } else {
            Classification::Unclassified
        };
    }
}

/// Result of [`wardrop_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WardropCheck {
    /// Largest relative amount by which some station beats the one a user
    /// is assigned to; empty stations are valued at a lone user's rate.
    pub max_violation: f64,
    /// Rate of the worst-served user.
    pub min_rate: f64,
}

impl WardropCheck {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_violation <= tol
    }
}

/// Evaluates the Wardrop conditions of `partition` at the loads `masses`.
pub fn wardrop_check(
    partition: &Partition,
    masses: &[f64],
    density: &DensityField,
    model: &dyn EquilibriumModel,
) -> WardropCheck {
    let domain = density.domain();
    let k = model.stations().len();
    let per_cell = par::map(domain.num_cells(), |c| {
        if density.cell_mass(c) <= 0.0 {
            return (0.0, f64::INFINITY);
        }
        let p = domain.cell_center(c);
        let j = partition.assignment[c];
        let own = model.rate(j, model.quality(j, p), masses[j].max(f64::MIN_POSITIVE));
        let mut violation: f64 = 0.0;
        for i in (0..k).filter(|i| *i != j) {
            let alt = model.alternative_rate(i, model.quality(i, p), masses[i]);
            let scale = own.abs().max(alt.abs()).max(f64::MIN_POSITIVE);
            violation = violation.max((alt - own) / scale);
        }
        (violation, own)
    });
    WardropCheck {
        max_violation: per_cell.iter().map(|v| v.0).fold(0.0, f64::max),
        min_rate: per_cell.iter().map(|v| v.1).fold(f64::INFINITY, f64::min),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sol(rate: f64, t: f64) -> EquilibriumSolution {
        EquilibriumSolution {
            partition: Partition { assignment: vec![], masses: vec![], user_counts: vec![] },
            masses: vec![],
            thresholds: vec![t],
            common_rate: rate,
            residual: 0.0,
            converged: true,
            classification: Classification::Unclassified,
        }
    }

    #[test]
    fn selection_orders_by_common_rate() {
        let list = vec![sol(0.2, 0.5), sol(0.3, 0.1), sol(0.1, 0.9)];
        assert_eq!(select_equilibrium(&list, Selection::Best).unwrap().common_rate, 0.3);
        assert_eq!(select_equilibrium(&list, Selection::Worst).unwrap().common_rate, 0.1);
        assert_eq!(select_equilibrium(&list[..1], Selection::Worst).unwrap().common_rate, 0.2);
        assert!(matches!(select_equilibrium(&[], Selection::Best), Err(Error::NoEquilibria)));
        let tied = vec![sol(0.2, 0.5), sol(0.2, 0.1)];
        assert_eq!(select_equilibrium(&tied, Selection::Best).unwrap().thresholds[0], 0.1);
    }

    #[test]
    fn classification_marks_extremes() {
        let mut list = vec![sol(0.2, 0.5), sol(0.3, 0.1), sol(0.1, 0.9)];
        classify(&mut list);
        let c: Vec<_> = list.iter().map(|s| s.classification).collect();
        assert_eq!(c, vec![Classification::Unclassified, Classification::Best, Classification::Worst]);
    }
}

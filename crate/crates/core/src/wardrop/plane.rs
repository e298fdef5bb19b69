//! Equilibria on any grid.
//!
//! Models of the form `exp(v) / N` use a Newton ascent on the dual of their
//! congestion potential. Other models use a load-balancing fixed point:
//! loads `N` move toward the loads of the best-response assignment with a
//! per-station step that grows while its correction keeps its sign and is
//! halved when it flips. At the limit only the few cells on which users
//! are exactly indifferent are undecided; their mass is split between the
//! tied stations so the loads match `N` (iterative proportional fitting).

use serde::{Deserialize, Serialize};

use crate::density::DensityField;
use crate::error::{Error, Result};
use crate::par;
use crate::partition::{check_stations, Partition};

use super::{wardrop_check, Classification, EquilibriumModel, EquilibriumSolution, WARDROP_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumConfig {
    /// Scan points for the two-station threshold search.
    pub scan_resolution: usize,
    /// Convergence tolerance on load (2D) or threshold (1D, relative to the
    /// domain length) updates.
    pub tol: f64,
    /// Largest load step.
    pub damping: f64,
    /// Threshold step of the 1D Gauss-Seidel sweeps.
    pub damping_1d: f64,
    pub max_iter: usize,
}

impl Default for EquilibriumConfig {
    fn default() -> Self {
        EquilibriumConfig { scan_resolution: 2000, tol: 1e-13, damping: 0.5, damping_1d: 1.0, max_iter: 20_000 }
    }
}

/// Relative rate gap below which a cell counts as indifferent.
const TIE: f64 = 1e-9;

pub fn solve_equilibrium_2d(
    density: &DensityField,
    model: &dyn EquilibriumModel,
    cfg: &EquilibriumConfig,
) -> Result<EquilibriumSolution> {
    let stations = model.stations();
    check_stations(stations, true)?;
    if !(cfg.damping > 0.0 && cfg.damping <= 1.0) {
        return Err(Error::param("damping", format!("must be in (0, 1], got {}", cfg.damping)));
    }
    let domain = density.domain();
    let n = domain.num_cells();
    let k = stations.len();
    let w = density.cell_masses();
    let quality = par::map(k * n, |idx| model.quality(idx / n, domain.cell_center(idx % n)));
    let utility: Option<Vec<f64>> = (0..k * n).map(|idx| model.log_utility(idx / n, quality[idx])).collect();

    // Cell-major shares: `shares[c * k + i]` is the mass of cell `c` on station `i`.
    let (shares, converged) = match utility {
        Some(v) if k > 1 => log_share_split(&v, &w, k),
        _ => load_balance(model, &quality, &w, density, cfg),
    };

    let masses: Vec<f64> = (0..k).map(|i| par::sum(n, |c| shares[c * k + i])).collect();
    let q = |i: usize, c: usize| quality[i * n + c];
    let assignment: Vec<usize> = par::map(n, |c| {
        let row = &shares[c * k..(c + 1) * k];
        let mut best = 0;
        for i in 1..k {
            if row[i] > row[best] {
                best = i;
            }
        }
        best
    });

    // Rate imbalance over each cell's support.
    let residual = par::map(n, |c| {
        if w[c] <= 0.0 {
            return 0.0;
        }
        let top = (0..k).map(|i| model.alternative_rate(i, q(i, c), masses[i])).fold(f64::NEG_INFINITY, f64::max);
        (0..k)
            .filter(|i| shares[c * k + i] > 1e-12 * w[c])
            .map(|i| {
                let r = model.rate(i, q(i, c), masses[i].max(f64::MIN_POSITIVE));
                (top - r) / top.abs().max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max)
    })
    .into_iter()
    .fold(0.0, f64::max);

    let partition = Partition::from_assignment(density, assignment, k, 1.0);
    let check = wardrop_check(&partition, &masses, density, model);
    let ok = converged && residual <= WARDROP_TOL;
    Ok(EquilibriumSolution {
        partition,
        masses,
        thresholds: Vec::new(),
        common_rate: check.min_rate,
        residual,
        converged: ok,
        classification: if ok { Classification::Best } else { Classification::Unclassified },
    })
}

/// Smoothing temperatures of the dual ascent, coarse to fine.
const TEMPERATURES: [f64; 11] = [1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10];

/// Equilibrium of a model whose users rank stations by `v - ln(mass)`.
///
/// The equilibrium minimizes the convex potential
/// `sum_i (N_i ln N_i - N_i) - sum_{c,i} x_ci v_ci`. Its dual in the
/// log-loads `u` is `-sum_i exp(u_i) - sum_c w_c max_i (v_ci - u_i)`; the
/// max is replaced by a soft max at temperature `t` and maximized by damped
/// Newton steps while `t` decreases. At the last temperature only cells
/// within a few `t` of indifference are split.
fn log_share_split(v: &[f64], w: &[f64], k: usize) -> (Vec<f64>, bool) {
    let n = w.len();
    let total = par::sum(n, |c| w[c]);
    let softmax = |u: &[f64], t: f64, c: usize, out: &mut [f64]| -> f64 {
        let mut m = f64::NEG_INFINITY;
        for i in 0..k {
            m = m.max(v[i * n + c] - u[i]);
        }
        if !m.is_finite() {
            out.iter_mut().for_each(|p| *p = 1.0 / k as f64);
            return 0.0;
        }
        let mut z = 0.0;
        for i in 0..k {
            out[i] = ((v[i * n + c] - u[i] - m) / t).exp();
            z += out[i];
        }
        out.iter_mut().for_each(|p| *p /= z);
        m + t * z.ln()
    };
    // Dual value, gradient and negated Hessian packed as `[D, g.., P..]`.
    let evaluate = |u: &[f64], t: f64, hessian: bool| {
        let dim = if hessian { 1 + k + k * k } else { 1 + k };
        let mut acc = par::vector_sum(n, dim, |c, acc| {
            if w[c] <= 0.0 {
                return;
            }
            let mut p = vec![0.0; k];
            acc[0] -= w[c] * softmax(u, t, c, &mut p);
            for i in 0..k {
                acc[1 + i] += w[c] * p[i];
            }
            if hessian {
                for i in 0..k {
                    for j in 0..k {
                        let d = if i == j { p[i] } else { 0.0 };
                        acc[1 + k + i * k + j] += w[c] * (d - p[i] * p[j]) / t;
                    }
                }
            }
        });
        for i in 0..k {
            let e = u[i].exp();
            acc[0] -= e;
            acc[1 + i] -= e;
            if hessian {
                acc[1 + k + i * k + i] += e;
            }
        }
        acc
    };

    let mut u = vec![(total / k as f64).ln(); k];
    let mut gap = f64::INFINITY;
    for &t in &TEMPERATURES {
        let mut best = f64::INFINITY;
        let mut stalled = 0;
        for _ in 0..200 {
            let e = evaluate(&u, t, true);
            let g = &e[1..1 + k];
            gap = g.iter().fold(0.0, |a, x| a.max(x.abs()));
            if gap <= 1e-14 * total {
                break;
            }
            // Stop once roundoff keeps the gap from shrinking.
            if gap < 0.5 * best {
                best = gap;
                stalled = 0;
            } else {
                stalled += 1;
                if stalled == 20 {
                    break;
                }
            }
            let Some(d) = cholesky_solve(&e[1 + k..], g, k) else { break };
            let slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            // The dual is concave, so its slope along `d` decreases; halve
            // until the slope has not overshot by more than half.
            let mut step = 1.0;
            let mut moved = false;
            while step > 1e-12 {
                let trial: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + step * b).collect();
                let grad = evaluate(&trial, t, false);
                let along: f64 = grad[1..].iter().zip(&d).map(|(a, b)| a * b).sum();
                if along >= -0.5 * slope {
                    u = trial;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
    }
    let t = TEMPERATURES[TEMPERATURES.len() - 1];
    let shares: Vec<f64> = par::map(n, |c| {
        let mut p = vec![0.0; k];
        softmax(&u, t, c, &mut p);
        p.into_iter().map(|x| x * w[c]).collect::<Vec<_>>()
    })
    .concat();
    (shares, gap <= 1e-8 * total)
}

/// Solves `P x = b` for a symmetric positive definite `P` given row-major.
fn cholesky_solve(p: &[f64], b: &[f64], k: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            let s: f64 = p[i * k + j] - (0..j).map(|m| l[i * k + m] * l[j * k + m]).sum::<f64>();
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * k + i] = s.sqrt();
            } else {
                l[i * k + j] = s / l[j * k + j];
            }
        }
    }
    let mut y = vec![0.0; k];
    for i in 0..k {
        y[i] = (b[i] - (0..i).map(|m| l[i * k + m] * y[m]).sum::<f64>()) / l[i * k + i];
    }
    for i in (0..k).rev() {
        y[i] = (y[i] - (i + 1..k).map(|m| l[m * k + i] * y[m]).sum::<f64>()) / l[i * k + i];
    }
    Some(y)
}

/// Generic load-balancing fixed point with tie splitting.
fn load_balance(
    model: &dyn EquilibriumModel,
    quality: &[f64],
    w: &[f64],
    density: &DensityField,
    cfg: &EquilibriumConfig,
) -> (Vec<f64>, bool) {
    let domain = density.domain();
    let stations = model.stations();
    let n = w.len();
    let k = stations.len();
    let total = density.total_mass();
    let q = |i: usize, c: usize| quality[i * n + c];
    let rate = |i: usize, c: usize, mass: f64| {
        if mass <= 0.0 {
            model.empty_rate(i, q(i, c))
        } else {
            model.rate(i, q(i, c), mass)
        }
    };
    let best_response = |loads: &[f64]| {
        par::map(n, |c| {
            let mut best = 0;
            let mut best_v = rate(0, c, loads[0]);
            for i in 1..k {
                let v = rate(i, c, loads[i]);
                if v > best_v {
                    best = i;
                    best_v = v;
                }
            }
            best
        })
    };
    let loads_of = |assignment: &[usize]| par::bucket_sums(n, k, |c| (assignment[c], w[c]));

    // Nearest-station start.
    let start: Vec<usize> = par::map(n, |c| {
        let p = domain.cell_center(c);
        crate::partition::argmin(k, |i| stations[i].position.distance(&p))
    });
    let mut loads = loads_of(&start);
    let mut step = vec![cfg.damping; k];
    let mut prev = vec![0.0; k];
    let mut converged = k == 1;
    let mut iterations = 0;
    while !converged && iterations < cfg.max_iter {
        iterations += 1;
        let target = loads_of(&best_response(&loads));
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

    // Split indifferent cells so the loads are met exactly.
    let assignment = best_response(&loads);
    let ties: Vec<(usize, Vec<usize>)> = (0..n)
        .filter_map(|c| {
            let top = rate(assignment[c], c, loads[assignment[c]]);
            let set: Vec<usize> = (0..k)
                .filter(|&i| {
                    let r = rate(i, c, loads[i]);
                    top - r <= TIE * top.abs()
                })
                .collect();
            (set.len() > 1).then_some((c, set))
        })
        .collect();
    let mut shares = vec![0.0; n * k];
    let mut is_tie = vec![false; n];
    for (c, _) in &ties {
        is_tie[*c] = true;
    }
    let mut pure = vec![0.0; k];
    for c in 0..n {
        if !is_tie[c] {
            pure[assignment[c]] += w[c];
            shares[c * k + assignment[c]] = w[c];
        }
    }
    let deficit: Vec<f64> = (0..k).map(|i| loads[i] - pure[i]).collect();
    let mut split: Vec<Vec<f64>> = ties.iter().map(|(c, set)| vec![w[*c] / set.len() as f64; set.len()]).collect();
    if !ties.is_empty() && deficit.iter().all(|d| *d >= -1e-15) {
        for _ in 0..10_000 {
            let mut col = vec![0.0; k];
            for ((_, set), y) in ties.iter().zip(&split) {
                for (i, v) in set.iter().zip(y) {
                    col[*i] += v;
                }
            }
            let err =
                (0..k).filter(|i| col[*i] > 0.0).map(|i| (col[i] - deficit[i].max(0.0)).abs()).fold(0.0, f64::max);
            if err <= 1e-16 {
                break;
            }
            for ((c, set), y) in ties.iter().zip(split.iter_mut()) {
                for (i, v) in set.iter().zip(y.iter_mut()) {
                    if col[*i] > 0.0 {
                        *v *= deficit[*i].max(0.0) / col[*i];
                    }
                }
                let row: f64 = y.iter().sum();
                if row > 0.0 {
                    y.iter_mut().for_each(|v| *v *= w[*c] / row);
                }
            }
        }
    } else {
        // Nothing to split, or the split is infeasible: keep the pure choice.
        split = ties
            .iter()
            .map(|(c, set)| set.iter().map(|i| if *i == assignment[*c] { w[*c] } else { 0.0 }).collect())
            .collect();
    }
    for ((c, set), y) in ties.iter().zip(&split) {
        for (i, v) in set.iter().zip(y) {
            shares[c * k + i] = *v;
        }
    }
    (shares, converged)
}

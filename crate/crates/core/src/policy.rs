//! Resource-allocation policies expressed as congestion specs.

use crate::congestion::{BaseCost, Congestion, CongestionSpec};
use crate::density::DensityField;
use crate::error::{Error, Result};
use crate::par;
use crate::partition::{check_stations, CostTable, Partition};
use crate::radio::{RadioParams, Station, MAX_RATE_EXPONENT};
use crate::solver::{solve_additive, solve_multiplicative, SolverConfig, SolverReport};

fn check_users(total_users: f64) -> Result<()> {
    if !(total_users.is_finite() && total_users >= 1.0) {
        return Err(Error::param("total_users", format!("must be at least 1, got {total_users}")));
    }
    Ok(())
}

fn check_rate_exponent(params: &RadioParams, total_users: f64) -> Result<()> {
    let exponent = total_users * params.theta_bar;
    if exponent > MAX_RATE_EXPONENT {
        return Err(Error::PowerOverflow { exponent, limit: MAX_RATE_EXPONENT });
    }
    Ok(())
}

/// Total transmit power under round robin: `F = sigma2 (R^2 + d^2)^(xi/2)`,
/// `m_i(N) = 2^(N users theta_bar) - 1`.
pub fn round_robin_spec(params: &RadioParams, total_users: f64, stations: usize) -> CongestionSpec {
    CongestionSpec::multiplicative(
        BaseCost::path_loss(params),
        vec![Congestion::Exp2 { scale: total_users * params.theta_bar, power: 1.0, floor: 0.0 }; stations],
    )
}

/// Minimum total power partition under round-robin scheduling with a
/// per-user throughput target. The report's `total_power` is
/// `total_users * total_cost`.
pub fn round_robin_solver(
    density: &DensityField,
    stations: &[Station],
    params: &RadioParams,
    total_users: f64,
    cfg: &SolverConfig,
) -> Result<(Partition, SolverReport)> {
    params.validate()?;
    check_users(total_users)?;
    check_rate_exponent(params, total_users)?;
    let spec = round_robin_spec(params, total_users, stations.len());
    let (p, mut r) = solve_multiplicative(density, stations, &spec, cfg)?;
    r.total_power = Some(total_users * r.total_cost);
    Ok((with_users(p, total_users), r))
}

/// Rate-fair allocation: each user goes to the station with the smallest
/// path loss, i.e. its nearest station.
pub fn rate_fair_solver(density: &DensityField, stations: &[Station], params: &RadioParams) -> Result<Partition> {
    params.validate()?;
    check_stations(stations, true)?;
    let spec = CongestionSpec::distance_only(BaseCost::path_loss(params), stations.len());
    let table = CostTable::new(density, stations, &spec)?;
    let assignment = par::map(table.cells, |c| table.best_station(c, |i| table.f(i, c)));
    Ok(Partition::from_assignment(density, assignment, stations.len(), 1.0))
}

/// Rate-fair cost plus a penalty `kappa_bar (N users - max_carriers)` per
/// user of a station above its carrier capacity. Stations without a
/// capacity are never penalized.
pub fn penalized_spec(params: &RadioParams, stations: &[Station], total_users: f64, kink_band: f64) -> CongestionSpec {
    let terms = stations
        .iter()
        .map(|s| match (s.max_carriers, s.kappa_bar) {
            (Some(max_carriers), Some(kappa_bar)) => {
                Congestion::Penalty { users: total_users, max_carriers, kappa_bar, kink_band }
            }
            _ => Congestion::Zero,
        })
        .collect();
    CongestionSpec::additive(BaseCost::path_loss(params), terms)
}

pub fn penalized_rate_fair_solver(
    density: &DensityField,
    stations: &[Station],
    params: &RadioParams,
    total_users: f64,
    cfg: &SolverConfig,
) -> Result<(Partition, SolverReport)> {
    params.validate()?;
    check_users(total_users)?;
    let spec = penalized_spec(params, stations, total_users, cfg.tol);
    let (p, r) = solve_additive(density, stations, &spec, cfg)?;
    Ok((with_users(p, total_users), r))
}

/// Generalized alpha-fair objective: `F = (sigma2 (R^2 + d^2)^(xi/2))^(alpha-1) / (alpha-1)`,
/// `m_i(N) = (2^(N users theta_bar) - 1)^(alpha-1)`. For `alpha < 1` the load
/// entering `m` is floored at one user so the factor stays finite.
pub fn alpha_fair_spec(params: &RadioParams, total_users: f64, alpha: f64, stations: usize) -> Result<CongestionSpec> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::param("alpha", format!("must be finite and nonnegative, got {alpha}")));
    }
    if alpha == 1.0 {
        return Err(Error::UnsupportedAlpha);
    }
    let floor = if alpha < 1.0 { 1.0 / total_users } else { 0.0 };
    Ok(CongestionSpec::multiplicative(
        BaseCost::AlphaFair { sigma2: params.sigma2, height: params.height, xi: params.xi, alpha },
        vec![Congestion::Exp2 { scale: total_users * params.theta_bar, power: alpha - 1.0, floor }; stations],
    ))
}

pub fn alpha_fair_solver(
    density: &DensityField,
    stations: &[Station],
    params: &RadioParams,
    total_users: f64,
    alpha: f64,
    cfg: &SolverConfig,
) -> Result<(Partition, SolverReport)> {
    params.validate()?;
    check_users(total_users)?;
    check_rate_exponent(params, total_users)?;
    let spec = alpha_fair_spec(params, total_users, alpha, stations.len())?;
    let (p, r) = solve_multiplicative(density, stations, &spec, cfg)?;
    Ok((with_users(p, total_users), r))
}

fn with_users(mut p: Partition, total_users: f64) -> Partition {
    p.user_counts = p.masses.iter().map(|m| m * total_users).collect();
    p
}

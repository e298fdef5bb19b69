//! Transport costs augmented by load-dependent congestion.
//!
//! A station's cost depends on the distance to the user through a base cost
//! `F` and on the mass `N` of its cell through a congestion term, either
//! added (`F(d) + s(N)`) or multiplied (`F(d) * m(N)`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radio::{exp2_m1, RadioParams};

/// Base cost as a function of user-station distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BaseCost {
    /// `d^p`.
    DistancePower { exponent: f64 },
    /// Inverse channel gain scaled by noise: `sigma2 (R^2 + d^2)^(xi/2)`.
    PathLoss { sigma2: f64, height: f64, xi: f64 },
    /// `(sigma2 (R^2 + d^2)^(xi/2))^(alpha-1) / (alpha - 1)`.
    AlphaFair { sigma2: f64, height: f64, xi: f64, alpha: f64 },
}

impl BaseCost {
    pub fn path_loss(params: &RadioParams) -> Self {
        BaseCost::PathLoss { sigma2: params.sigma2, height: params.height, xi: params.xi }
    }

    pub fn eval(&self, d: f64) -> f64 {
        match *self {
            BaseCost::DistancePower { exponent } => d.powf(exponent),
            BaseCost::PathLoss { sigma2, height, xi } => sigma2 * (height * height + d * d).powf(xi / 2.0),
            BaseCost::AlphaFair { sigma2, height, xi, alpha } => {
                let loss = sigma2 * (height * height + d * d).powf(xi / 2.0);
                loss.powf(alpha - 1.0) / (alpha - 1.0)
            }
        }
    }

    /// True when the cost is nonnegative for every distance.
    pub fn is_nonnegative(&self) -> bool {
        match *self {
            BaseCost::AlphaFair { alpha, .. } => alpha > 1.0,
            _ => true,
        }
    }
}

const STEP_SLACK: f64 = 1e-12;

/// A congestion term as a function of cell mass `N` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Congestion {
    Zero,
    Constant(f64),
    /// `c0 + c1 N + c2 N^2 + ...`
    Polynomial(Vec<f64>),
    /// `(2^(scale * max(N, floor)) - 1)^power`.
    ///
    /// Round robin uses `scale = users * theta_bar`, `power = 1`. Negative
    /// powers need a positive `floor` so the value stays finite at `N = 0`.
    Exp2 {
        scale: f64,
        power: f64,
        floor: f64,
    },
    /// Carrier-capacity penalty `kappa_bar * max(N users - max_carriers, 0)`.
    ///
    /// The derivative is one-sided: zero below the kink, `kappa_bar * users`
    /// above, and their average within `kink_band * users` users of it.
    Penalty {
        users: f64,
        max_carriers: f64,
        kappa_bar: f64,
        kink_band: f64,
    },
    /// `below` for `N <= at`, `above` otherwise; derivative taken as zero.
    Step {
        at: f64,
        below: f64,
        above: f64,
    },
}

impl Congestion {
    pub fn value(&self, n: f64) -> f64 {
        match self {
            Congestion::Zero => 0.0,
            Congestion::Constant(c) => *c,
            Congestion::Polynomial(coeffs) => coeffs.iter().rev().fold(0.0, |acc, c| acc * n + c),
            Congestion::Exp2 { scale, power, floor } => {
                let base = exp2_m1(scale * n.max(*floor));
                if *power == 1.0 {
                    base
                } else {
                    base.powf(*power)
                }
            }
            Congestion::Penalty { users, max_carriers, kappa_bar, .. } => {
                kappa_bar * (n * users - max_carriers).max(0.0)
            }
            Congestion::Step { at, below, above } => {
                // Loads are sums of many cell masses; don't let their
                // rounding decide which side of the step they fall on.
                if n <= *at + STEP_SLACK * at.abs().max(1.0) {
                    *below
                } else {
                    *above
                }
            }
        }
    }

    pub fn derivative(&self, n: f64) -> f64 {
        match self {
            Congestion::Zero | Congestion::Constant(_) | Congestion::Step { .. } => 0.0,
            Congestion::Polynomial(coeffs) => {
                coeffs.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, c)| acc * n + k as f64 * c)
            }
            Congestion::Exp2 { scale, power, floor } => {
                if n < *floor {
                    return 0.0;
                }
                let growth = (scale * n).exp2() * scale * std::f64::consts::LN_2;
                if *power == 1.0 {
                    growth
                } else {
                    power * exp2_m1(scale * n).powf(power - 1.0) * growth
                }
            }
            Congestion::Penalty { users, max_carriers, kappa_bar, kink_band } => {
                let excess = n * users - max_carriers;
                if excess.abs() <= kink_band * users {
                    0.5 * kappa_bar * users
                } else if excess > 0.0 {
                    kappa_bar * users
                } else {
                    0.0
                }
            }
        }
    }

    /// True when the term is nonnegative and non-decreasing on `[0, 1]`.
    pub fn is_monotone_nonnegative(&self) -> bool {
        match self {
            Congestion::Zero => true,
            Congestion::Constant(c) => *c >= 0.0,
            Congestion::Polynomial(coeffs) => coeffs.iter().all(|c| *c >= 0.0),
            Congestion::Exp2 { scale, power, .. } => *scale >= 0.0 && *power >= 0.0,
            Congestion::Penalty { kappa_bar, .. } => *kappa_bar >= 0.0,
            Congestion::Step { below, above, .. } => *below >= 0.0 && above >= below,
        }
    }
}

/// Whether congestion adds to or multiplies the base cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Coupling {
    Additive(Vec<Congestion>),
    Multiplicative(Vec<Congestion>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CongestionSpec {
    /// Base cost per station.
    pub base: Vec<BaseCost>,
    pub coupling: Coupling,
}

impl CongestionSpec {
    pub fn additive(base: BaseCost, terms: Vec<Congestion>) -> Self {
        CongestionSpec { base: vec![base; terms.len()], coupling: Coupling::Additive(terms) }
    }

    pub fn multiplicative(base: BaseCost, factors: Vec<Congestion>) -> Self {
        CongestionSpec { base: vec![base; factors.len()], coupling: Coupling::Multiplicative(factors) }
    }

    /// Pure transport cost: additive with zero congestion.
    pub fn distance_only(base: BaseCost, stations: usize) -> Self {
        Self::additive(base, vec![Congestion::Zero; stations])
    }

    pub fn stations(&self) -> usize {
        self.base.len()
    }

    pub fn terms(&self) -> &[Congestion] {
        match &self.coupling {
            Coupling::Additive(t) | Coupling::Multiplicative(t) => t,
        }
    }

    pub fn is_additive(&self) -> bool {
        matches!(self.coupling, Coupling::Additive(_))
    }

    pub fn validate(&self, stations: usize) -> Result<()> {
        if self.base.len() != stations || self.terms().len() != stations {
            return Err(Error::Mismatch(format!(
                "cost spec covers {} base costs and {} congestion terms for {stations} stations",
                self.base.len(),
                self.terms().len()
            )));
        }
        Ok(())
    }

    /// Total cost of station `i` whose cell has mass `mass` and base-cost
    /// integral `integral = sum over its cells of F(d) * cell mass`.
    pub fn station_cost(&self, i: usize, mass: f64, integral: f64) -> f64 {
        if mass <= 0.0 {
            return 0.0;
        }
        match &self.coupling {
            Coupling::Additive(s) => integral + mass * s[i].value(mass),
            Coupling::Multiplicative(m) => m[i].value(mass) * integral,
        }
    }

    /// Cost a user at distance `d` from station `i` pays given cell mass `mass`.
    pub fn user_cost(&self, i: usize, d: f64, mass: f64) -> f64 {
        let f = self.base[i].eval(d);
        match &self.coupling {
            Coupling::Additive(s) => f + s[i].value(mass),
            Coupling::Multiplicative(m) => f * m[i].value(mass),
        }
    }

    /// Marginal cost of adding mass at a point with base cost `f` to station
    /// `i`: `f + s(N) + N s'(N)` (additive) or `m(N) f + m'(N) integral`
    /// (multiplicative).
    pub fn marginal_cost(&self, i: usize, f: f64, mass: f64, integral: f64) -> f64 {
        match &self.coupling {
            Coupling::Additive(s) => f + s[i].value(mass) + mass * s[i].derivative(mass),
            Coupling::Multiplicative(m) => m[i].value(mass) * f + m[i].derivative(mass) * integral,
        }
    }

    /// True when partial station costs can only grow as cells are added,
    /// which makes them valid lower bounds during exact search.
    pub fn is_monotone(&self) -> bool {
        let terms_ok = self.terms().iter().all(Congestion::is_monotone_nonnegative);
        match self.coupling {
            Coupling::Additive(_) => terms_ok,
            Coupling::Multiplicative(_) => terms_ok && self.base.iter().all(BaseCost::is_nonnegative),
        }
    }
}

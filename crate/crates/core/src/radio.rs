//! Physical layer: path-loss gain, SNR, Shannon rate and the per-user power
//! needed under round-robin time sharing.
//!
//! Throughput is measured in bits per channel use (`log2`), which makes
//! [`RadioParams::required_power_round_robin`] the exact inverse of
//! [`throughput`] applied to a time-shared rate.

use serde::{Deserialize, Serialize};

use crate::domain::Point;
use crate::error::{Error, Result};

/// Largest `users * theta_bar` (in bits) accepted before `2^x` is considered
/// an overflow.
pub const MAX_RATE_EXPONENT: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    /// Noise power.
    pub sigma2: f64,
    /// Path-loss exponent.
    pub xi: f64,
    /// Antenna height, km.
    pub height: f64,
    /// Target average throughput per user, bits per channel use.
    pub theta_bar: f64,
}

impl RadioParams {
    pub fn new(sigma2: f64, xi: f64, height: f64, theta_bar: f64) -> Result<Self> {
        let p = RadioParams { sigma2, xi, height, theta_bar };
        p.validate()?;
        Ok(p)
    }

    /// Builds parameters from the noise standard deviation.
    pub fn with_sigma(sigma: f64, xi: f64, height: f64, theta_bar: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::param("sigma", format!("must be positive, got {sigma}")));
        }
        Self::new(sigma * sigma, xi, height, theta_bar)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(Error::param("sigma2", format!("must be positive, got {}", self.sigma2)));
        }
        if !(self.xi.is_finite() && self.xi > 0.0) {
            return Err(Error::param("xi", format!("must be positive, got {}", self.xi)));
        }
        if !(self.height.is_finite() && self.height >= 0.0) {
            return Err(Error::param("height", format!("must be nonnegative, got {}", self.height)));
        }
        if !(self.theta_bar.is_finite() && self.theta_bar > 0.0) {
            return Err(Error::param("theta_bar", format!("must be positive, got {}", self.theta_bar)));
        }
        Ok(())
    }

    /// `(R^2 + d^2)^(xi/2)`, the inverse of the channel gain.
    pub fn path_loss(&self, d: f64) -> f64 {
        (self.height * self.height + d * d).powf(self.xi / 2.0)
    }

    /// Channel gain `(R^2 + d^2)^(-xi/2)` at distance `d`.
    pub fn gain_at(&self, d: f64) -> f64 {
        1.0 / self.path_loss(d)
    }

    pub fn channel_gain(&self, station: &Station, point: Point) -> f64 {
        self.gain_at(distance(station, point))
    }

    pub fn snr(&self, power: f64, gain: f64) -> f64 {
        power * gain / self.sigma2
    }

    /// Power that delivers `rate` bits per channel use over a channel with
    /// gain `gain`; inverse of `throughput(snr(p, gain))`.
    pub fn power_for_rate(&self, rate: f64, gain: f64) -> f64 {
        self.sigma2 * exp2_m1(rate) / gain
    }

    /// Per-user power meeting `theta_bar` when `users` share the station in
    /// round robin: `sigma2 (2^(users theta_bar) - 1) (R^2 + d^2)^(xi/2)`.
    pub fn required_power_round_robin(&self, station: &Station, point: Point, users: f64) -> Result<f64> {
        if !(users >= 0.0) {
            return Err(Error::param("users", format!("must be nonnegative, got {users}")));
        }
        let exponent = users * self.theta_bar;
        if exponent > MAX_RATE_EXPONENT {
            return Err(Error::PowerOverflow { exponent, limit: MAX_RATE_EXPONENT });
        }
        Ok(self.sigma2 * exp2_m1(exponent) * self.path_loss(distance(station, point)))
    }
}

/// `2^x - 1` without cancellation for small `x`.
pub fn exp2_m1(x: f64) -> f64 {
    (x * std::f64::consts::LN_2).exp_m1()
}

/// A base station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub position: Point,
    /// Constant transmit power under the rate-fair policy.
    pub tx_power: Option<f64>,
    /// Carrier capacity, in users.
    pub max_carriers: Option<f64>,
    /// Penalty per user above capacity.
    pub kappa_bar: Option<f64>,
}

impl Station {
    pub fn at(position: Point) -> Self {
        Station { position, tx_power: None, max_carriers: None, kappa_bar: None }
    }

    pub fn on_line(x: f64) -> Self {
        Self::at(Point::on_line(x))
    }

    pub fn with_power(mut self, power: f64) -> Self {
        self.tx_power = Some(power);
        self
    }

    pub fn with_capacity(mut self, max_carriers: f64, kappa_bar: f64) -> Self {
        self.max_carriers = Some(max_carriers);
        self.kappa_bar = Some(kappa_bar);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.tx_power {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::param("tx_power", format!("must be positive, got {p}")));
            }
        }
        if let Some(m) = self.max_carriers {
            if !(m.is_finite() && m >= 1.0) {
                return Err(Error::param("max_carriers", format!("must be at least 1, got {m}")));
            }
        }
        if let Some(k) = self.kappa_bar {
            if !(k.is_finite() && k >= 0.0) {
                return Err(Error::param("kappa_bar", format!("must be nonnegative, got {k}")));
            }
        }
        Ok(())
    }
}

pub fn distance(station: &Station, point: Point) -> f64 {
    station.position.distance(&point)
}

/// Shannon rate `log2(1 + snr)` in bits per channel use.
pub fn throughput(snr: f64) -> f64 {
    snr.ln_1p() / std::f64::consts::LN_2
}

/// Shannon rate `ln(1 + snr)` in nats per channel use.
pub fn throughput_nats(snr: f64) -> f64 {
    snr.ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(sigma2: f64, xi: f64, height: f64) -> RadioParams {
        RadioParams::new(sigma2, xi, height, 1.0).unwrap()
    }

    #[test]
    fn distance_examples() {
        let s = Station::at(Point::new(0.0, 0.0));
        assert_eq!(distance(&s, Point::new(3.0, 4.0)), 5.0);
        assert_eq!(distance(&s, Point::new(0.0, 0.0)), 0.0);
        assert_eq!(distance(&Station::on_line(0.0), Point::on_line(-10.0)), 10.0);
    }

    #[test]
    fn gain_examples() {
        let s = Station::on_line(0.0);
        assert_relative_eq!(params(1.0, 2.0, 1.0).channel_gain(&s, Point::on_line(0.0)), 1.0);
        assert_relative_eq!(params(1.0, 2.0, 1.0).channel_gain(&s, Point::on_line(1.0)), 0.5);
        assert_relative_eq!(params(1.0, 4.0, 1.0).channel_gain(&s, Point::on_line(2.0)), 0.04, epsilon = 1e-15);
    }

    #[test]
    fn snr_examples() {
        let p = params(0.09, 2.0, 1.0);
        assert_eq!(p.snr(0.0, 0.7), 0.0);
        assert_relative_eq!(p.snr(1.0, 0.5), 0.5 / 0.09);
        let q = params(2.5, 2.0, 1.0);
        assert_relative_eq!(q.snr(2.5, 1.0), 1.0);
    }

    #[test]
    fn throughput_examples() {
        assert_eq!(throughput(0.0), 0.0);
        assert_relative_eq!(throughput_nats(std::f64::consts::E - 1.0), 1.0, epsilon = 1e-15);
        assert_relative_eq!(throughput(1.0), 1.0, epsilon = 1e-15);
        assert!(throughput(3.0) > throughput(1.0));
    }

    #[test]
    fn round_robin_power_examples() {
        let s = Station::on_line(0.0);
        let p = RadioParams::new(1.0, 2.0, 1.0, 1.0).unwrap();
        assert_eq!(p.required_power_round_robin(&s, Point::on_line(0.0), 0.0).unwrap(), 0.0);
        assert_relative_eq!(p.required_power_round_robin(&s, Point::on_line(0.0), 1.0).unwrap(), 1.0);
        let one = p.required_power_round_robin(&s, Point::on_line(0.7), 1.0).unwrap();
        let two = p.required_power_round_robin(&s, Point::on_line(0.7), 2.0).unwrap();
        assert_relative_eq!(two / one, 3.0, epsilon = 1e-14);
    }

    #[test]
    fn round_robin_power_overflow_is_reported() {
        let p = RadioParams::new(1.0, 2.0, 1.0, 0.5).unwrap();
        let err = p.required_power_round_robin(&Station::on_line(0.0), Point::on_line(1.0), 2500.0);
        assert!(matches!(err, Err(Error::PowerOverflow { .. })));
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(RadioParams::new(0.0, 2.0, 1.0, 1.0).is_err());
        assert!(RadioParams::new(1.0, -2.0, 1.0, 1.0).is_err());
        assert!(RadioParams::new(1.0, 2.0, -1.0, 1.0).is_err());
        assert!(RadioParams::new(1.0, 2.0, 1.0, 0.0).is_err());
        assert!(RadioParams::with_sigma(-0.3, 2.0, 1.0, 1.0).is_err());
        assert!(Station::on_line(0.0).with_power(0.0).validate().is_err());
    }

    proptest! {
        #[test]
        fn gain_decreases_with_distance(d in 0.0f64..50.0, dd in 1e-3f64..10.0, xi in 0.5f64..6.0, h in 0.0f64..3.0) {
            let p = RadioParams::new(1.0, xi, h, 1.0).unwrap();
            prop_assert!(p.gain_at(d + dd) < p.gain_at(d));
        }

        #[test]
        fn gain_at_zero_is_height_power(xi in 0.5f64..6.0, h in 0.1f64..3.0) {
            let p = RadioParams::new(1.0, xi, h, 1.0).unwrap();
            prop_assert!((p.gain_at(0.0) - h.powf(-xi)).abs() <= 1e-12 * h.powf(-xi));
        }

        #[test]
        fn round_robin_power_increases_in_load_and_distance(
            users in 0.0f64..50.0, du in 0.1f64..10.0, d in 0.0f64..10.0, dd in 0.01f64..5.0,
        ) {
            let p = RadioParams::new(0.09, 2.0, 1.0, 0.1).unwrap();
            let s = Station::on_line(0.0);
            let base = p.required_power_round_robin(&s, Point::on_line(d), users).unwrap();
            let more_users = p.required_power_round_robin(&s, Point::on_line(d), users + du).unwrap();
            let farther = p.required_power_round_robin(&s, Point::on_line(d + dd), users + du).unwrap();
            prop_assert!(more_users > base);
            prop_assert!(farther > more_users);
        }

        #[test]
        fn power_inverts_time_shared_rate(users in 1.0f64..200.0, d in 0.0f64..10.0, theta in 1e-3f64..0.5) {
            let p = RadioParams::new(0.09, 2.0, 1.0, theta).unwrap();
            let s = Station::on_line(0.0);
            let x = Point::on_line(d);
            let power = p.required_power_round_robin(&s, x, users).unwrap();
            let rate = throughput(p.snr(power, p.channel_gain(&s, x))) / users;
            prop_assert!((rate - theta).abs() <= 1e-12 * theta.max(1.0));
            let back = p.power_for_rate(users * theta, p.channel_gain(&s, x));
            prop_assert!((back - power).abs() <= 1e-9 * power);
        }
    }
}

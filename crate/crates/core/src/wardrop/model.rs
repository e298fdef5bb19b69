use crate::congestion::CongestionSpec;
use crate::domain::Point;
use crate::error::{Error, Result};
use crate::radio::{throughput, RadioParams, Station};

/// Rate a station offers a user, split into a load-independent quality of
/// the user's position and a cheap load-dependent part.
pub trait EquilibriumModel: Sync {
    fn stations(&self) -> &[Station];

    /// Load-independent part of the rate station `station` offers at `point`.
    fn quality(&self, station: usize, point: Point) -> f64;

    /// Rate given the quality and a positive cell mass.
    fn rate(&self, station: usize, quality: f64, mass: f64) -> f64;

    /// Rate used inside best response when the cell is empty.
    fn empty_rate(&self, station: usize, quality: f64) -> f64;

    /// Rate a single user would get by joining an empty cell.
    fn solo_rate(&self, station: usize, quality: f64) -> f64;

    /// Cells with less mass than this count as empty.
    fn min_load(&self) -> f64;

    fn offered_rate(&self, station: usize, point: Point, mass: f64) -> f64 {
        let q = self.quality(station, point);
        if mass <= 0.0 {
            self.empty_rate(station, q)
        } else {
            self.rate(station, q, mass)
        }
    }

    /// `Some(v)` when the rate is a common factor times `exp(v) / mass`, so
    /// users rank stations by `v - ln(mass)`.
    fn log_utility(&self, _station: usize, _quality: f64) -> Option<f64> {
        None
    }

    /// Rate compared against in the empty-cell condition.
    fn alternative_rate(&self, station: usize, quality: f64, mass: f64) -> f64 {
        if mass < self.min_load() || mass <= 0.0 {
            self.solo_rate(station, quality)
        } else {
            self.rate(station, quality, mass)
        }
    }
}

/// Time-shared Shannon rate: `log2(1 + P h / sigma2) / (N users)` with the
/// station's constant transmit power `P` (1 W when unset).
#[derive(Debug, Clone)]
pub struct ShareRateModel {
    pub stations: Vec<Station>,
    pub params: RadioParams,
    pub total_users: f64,
}

impl ShareRateModel {
    pub fn new(stations: Vec<Station>, params: RadioParams, total_users: f64) -> Result<Self> {
        params.validate()?;
        if !(total_users.is_finite() && total_users >= 1.0) {
            return Err(Error::param("total_users", format!("must be at least 1, got {total_users}")));
        }
        for s in &stations {
            s.validate()?;
        }
        Ok(ShareRateModel { stations, params, total_users })
    }

    fn power(&self, station: usize) -> f64 {
        self.stations[station].tx_power.unwrap_or(1.0)
    }
}

impl EquilibriumModel for ShareRateModel {
    fn stations(&self) -> &[Station] {
        &self.stations
    }

    fn quality(&self, station: usize, point: Point) -> f64 {
        let gain = self.params.channel_gain(&self.stations[station], point);
        throughput(self.params.snr(self.power(station), gain))
    }

    fn rate(&self, _station: usize, quality: f64, mass: f64) -> f64 {
        quality / (mass * self.total_users)
    }

    fn empty_rate(&self, _station: usize, _quality: f64) -> f64 {
        f64::INFINITY
    }

    fn solo_rate(&self, _station: usize, quality: f64) -> f64 {
        quality
    }

    fn min_load(&self) -> f64 {
        1.0 / self.total_users
    }

    fn log_utility(&self, _station: usize, quality: f64) -> Option<f64> {
        Some(quality.ln())
    }
}

/// Users maximize the negative of their additive cost `F_i(d) + s_i(N)`.
#[derive(Debug, Clone)]
pub struct CostRateModel {
    pub stations: Vec<Station>,
    pub spec: CongestionSpec,
}

impl CostRateModel {
    pub fn new(stations: Vec<Station>, spec: CongestionSpec) -> Result<Self> {
        spec.validate(stations.len())?;
        if !spec.is_additive() {
            return Err(Error::param("spec", "the cost model needs an additive congestion spec"));
        }
        Ok(CostRateModel { stations, spec })
    }
}

impl EquilibriumModel for CostRateModel {
    fn stations(&self) -> &[Station] {
        &self.stations
    }

    fn quality(&self, station: usize, point: Point) -> f64 {
        -self.spec.base[station].eval(self.stations[station].position.distance(&point))
    }

    fn rate(&self, station: usize, quality: f64, mass: f64) -> f64 {
        quality - self.spec.terms()[station].value(mass)
    }

    fn empty_rate(&self, station: usize, quality: f64) -> f64 {
        self.rate(station, quality, 0.0)
    }

    fn solo_rate(&self, station: usize, quality: f64) -> f64 {
        self.rate(station, quality, 0.0)
    }

    fn min_load(&self) -> f64 {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::congestion::{BaseCost, Congestion};
    use approx::assert_relative_eq;

    fn share() -> ShareRateModel {
        let params = RadioParams::with_sigma(0.3, 2.0, 1.0, 1.0).unwrap();
        ShareRateModel::new(vec![Station::on_line(0.0).with_power(1.0), Station::on_line(5.0)], params, 10.0).unwrap()
    }

    #[test]
    fn share_rate_example() {
        let m = share();
        assert_relative_eq!(
            m.offered_rate(0, Point::on_line(1.0), 1.0),
            (1.0 + 0.5 / 0.09f64).log2() / 10.0,
            epsilon = 1e-15
        );
        assert!((m.offered_rate(0, Point::on_line(1.0), 1.0) - 0.2713).abs() < 1e-4);
    }

    #[test]
    fn share_rate_halves_when_load_doubles() {
        let m = share();
        let p = Point::on_line(2.0);
        assert_relative_eq!(m.offered_rate(0, p, 0.4), 2.0 * m.offered_rate(0, p, 0.8), epsilon = 1e-15);
        assert!(m.offered_rate(0, Point::on_line(0.0), 0.5) > m.offered_rate(0, Point::on_line(5.0), 0.5));
        assert_eq!(m.offered_rate(1, p, 0.0), f64::INFINITY);
        // A lone user is a single share.
        let q = m.quality(1, p);
        assert_relative_eq!(m.alternative_rate(1, q, 0.0), m.rate(1, q, 0.1));
    }

    #[test]
    fn cost_model_is_negative_cost() {
        let spec = CongestionSpec::additive(
            BaseCost::DistancePower { exponent: 1.0 },
            vec![Congestion::Constant(100.0), Congestion::Step { at: 0.999, below: 0.0, above: 1.0 }],
        );
        let m = CostRateModel::new(vec![Station::on_line(0.0), Station::on_line(1.0)], spec).unwrap();
        assert_eq!(m.offered_rate(0, Point::on_line(0.25), 0.0), -100.25);
        assert_eq!(m.offered_rate(1, Point::on_line(0.25), 1.0), -1.75);
    }
}

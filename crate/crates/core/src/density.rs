//! User-density fields discretized on the quadrature grid of a [`Domain`].
//!
//! Every constructor normalizes the field so that the midpoint-rule mass of
//! the whole domain is one; the mass of a region is then the proportion of
//! users living there.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::domain::{Axis, Domain, Point, Region};
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    domain: Domain,
    weights: Vec<f64>,
}

impl DensityField {
    /// Normalizes raw nonnegative cell values into a density.
    pub fn from_weights(domain: Domain, mut weights: Vec<f64>) -> Result<Self> {
        if weights.len() != domain.num_cells() {
            return Err(Error::InvalidDensity(format!(
                "expected {} cell values, got {}",
                domain.num_cells(),
                weights.len()
            )));
        }
        if let Some(c) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidDensity(format!("cell {c} has value {}", weights[c])));
        }
        let raw_mass = par::sum(weights.len(), |c| weights[c]) * domain.cell_measure();
        if raw_mass <= 0.0 {
            return Err(Error::InvalidDensity("total mass is zero".into()));
        }
        weights.iter_mut().for_each(|w| *w /= raw_mass);
        Ok(DensityField { domain, weights })
    }

    /// Samples `f` at the cell centers and normalizes.
    pub fn from_fn(domain: Domain, f: impl Fn(Point) -> f64 + Sync + Send) -> Result<Self> {
        let weights = par::map(domain.num_cells(), |c| f(domain.cell_center(c)));
        Self::from_weights(domain, weights)
    }

    /// Users spread evenly: weight `1/|domain|` everywhere.
    pub fn uniform(domain: Domain) -> Self {
        let w = 1.0 / (domain.cell_measure() * domain.num_cells() as f64);
        DensityField { weights: vec![w; domain.num_cells()], domain }
    }

    /// Step density: each piece gets its level, pieces must tile the domain.
    pub fn piecewise(domain: Domain, pieces: &[(Region, f64)]) -> Result<Self> {
        let mut level: Vec<Option<f64>> = vec![None; domain.num_cells()];
        let mut overlaps = 0;
        for (region, lvl) in pieces {
            region.validate(&domain)?;
            if !(lvl.is_finite() && *lvl > 0.0) {
                return Err(Error::InvalidDensity(format!("piece level must be positive, got {lvl}")));
            }
            for c in region.cells(&domain) {
                if level[c].replace(*lvl).is_some() {
                    overlaps += 1;
                }
            }
        }
        let gaps = level.iter().filter(|l| l.is_none()).count();
        if gaps > 0 || overlaps > 0 {
            return Err(Error::Coverage { gaps, overlaps });
        }
        Self::from_weights(domain, level.into_iter().map(|l| l.unwrap_or(0.0)).collect())
    }

    /// Radial profile `radius^2 - |p|^2`, centered at the origin.
    pub fn radial(domain: Domain, radius: f64) -> Result<Self> {
        let r2 = radius * radius;
        let slack = 1e-12 * r2.max(1.0);
        for corner in domain.corners() {
            let v = r2 - (corner.x * corner.x + corner.y * corner.y);
            if v < -slack {
                return Err(Error::InvalidDensity(format!(
                    "radial density is negative ({v}) at ({}, {})",
                    corner.x, corner.y
                )));
            }
        }
        Self::from_fn(domain, move |p| (r2 - (p.x * p.x + p.y * p.y)).max(0.0))
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Density value per cell (users per unit measure, normalized).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Mass carried by one cell.
    pub fn cell_mass(&self, cell: usize) -> f64 {
        self.weights[cell] * self.domain.cell_measure()
    }

    pub fn cell_masses(&self) -> Vec<f64> {
        let m = self.domain.cell_measure();
        self.weights.iter().map(|w| w * m).collect()
    }

    pub fn total_mass(&self) -> f64 {
        par::sum(self.weights.len(), |c| self.cell_mass(c))
    }

    /// Proportion of users in `region`.
    pub fn mass(&self, region: &Region) -> Result<f64> {
        region.validate(&self.domain)?;
        let cells = region.cells(&self.domain);
        Ok(par::sum(cells.len(), |k| self.cell_mass(cells[k])))
    }

    /// Midpoint-rule integral of `f * density`.
    pub fn integrate(&self, f: impl Fn(Point) -> f64 + Sync + Send) -> Result<f64> {
        let values = par::map(self.weights.len(), |c| f(self.domain.cell_center(c)));
        if let Some(cell) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteIntegrand { cell });
        }
        Ok(par::sum(values.len(), |c| values[c] * self.cell_mass(c)))
    }

    /// Mass of `{x < t}` on a 1D domain, treating the density as constant on
    /// each cell so the result is continuous and piecewise linear in `t`.
    pub fn cumulative_mass(&self, t: f64) -> f64 {
        let axis = self.domain.x_axis();
        let u = ((t - axis.lo) / axis.step()).clamp(0.0, axis.cells as f64);
        let full = (u.floor() as usize).min(axis.cells);
        // Cumulative sums are rebuilt per call; callers on hot paths use `CumulativeMass`.
        let mut acc = par::NeumaierSum::default();
        for c in 0..full {
            acc.add(self.cell_mass(c));
        }
        if full < axis.cells {
            acc.add(self.cell_mass(full) * (u - full as f64));
        }
        acc.value()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        match self.domain {
            Domain::Interval(_) => w.write_record(["x", "weight"])?,
            Domain::Rectangle { .. } => w.write_record(["x", "y", "weight"])?,
        }
        for (c, weight) in self.weights.iter().enumerate() {
            let p = self.domain.cell_center(c);
            match self.domain {
                Domain::Interval(_) => w.write_record([p.x.to_string(), weight.to_string()])?,
                Domain::Rectangle { .. } => w.write_record([p.x.to_string(), p.y.to_string(), weight.to_string()])?,
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a grid written as `x[,y],weight` rows in row-major order. The
    /// domain is recovered from the cell centers; weights need not be
    /// normalized.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers()?.clone();
        let names: Vec<&str> = headers.iter().map(str::trim).collect();
        let two_d = match names.as_slice() {
            ["x", "weight"] => false,
            ["x", "y", "weight"] => true,
            _ => return Err(Error::InvalidDensity(format!("unexpected csv header {names:?}"))),
        };
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut weights = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let field = |k: usize| -> Result<f64> {
                record
                    .get(k)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidDensity(format!("row {}: bad field {k}", line + 2)))
            };
            xs.push(field(0)?);
            if two_d {
                ys.push(field(1)?);
                weights.push(field(2)?);
            } else {
                weights.push(field(1)?);
            }
        }
        let domain = if two_d {
            let x = axis_from_centers(&xs, "x")?;
            let y = axis_from_centers(&ys, "y")?;
            let d = Domain::Rectangle { x, y };
            for (c, (px, py)) in xs.iter().zip(&ys).enumerate() {
                let p = d.cell_center(c);
                if !close(p.x, *px, x.step()) || !close(p.y, *py, y.step()) {
                    return Err(Error::InvalidDensity(format!("row {} is out of row-major order", c + 2)));
                }
            }
            d
        } else {
            let x = axis_from_centers(&xs, "x")?;
            let d = Domain::Interval(x);
            for (c, px) in xs.iter().enumerate() {
                if !close(d.cell_center(c).x, *px, x.step()) {
                    return Err(Error::InvalidDensity(format!("row {} is out of order", c + 2)));
                }
            }
            d
        };
        Self::from_weights(domain, weights)
    }
}

/// Prefix sums of cell masses for repeated `{x < t}` queries on a 1D grid.
#[derive(Debug, Clone)]
pub struct CumulativeMass {
    axis: Axis,
    prefix: Vec<f64>,
    masses: Vec<f64>,
}

impl CumulativeMass {
    pub fn new(density: &DensityField) -> Self {
        let axis = *density.domain().x_axis();
        let masses = density.cell_masses();
        let mut prefix = Vec::with_capacity(masses.len() + 1);
        let mut acc = par::NeumaierSum::default();
        prefix.push(0.0);
        for m in &masses {
            acc.add(*m);
            prefix.push(acc.value());
        }
        CumulativeMass { axis, prefix, masses }
    }

    pub fn below(&self, t: f64) -> f64 {
        let u = ((t - self.axis.lo) / self.axis.step()).clamp(0.0, self.axis.cells as f64);
        let full = (u.floor() as usize).min(self.axis.cells);
        let partial = if full < self.axis.cells { self.masses[full] * (u - full as f64) } else { 0.0 };
        self.prefix[full] + partial
    }

    pub fn between(&self, lo: f64, hi: f64) -> f64 {
        (self.below(hi) - self.below(lo)).max(0.0)
    }

    pub fn total(&self) -> f64 {
        self.prefix[self.prefix.len() - 1]
    }
}

fn close(a: f64, b: f64, step: f64) -> bool {
    (a - b).abs() <= 1e-6 * step
}

fn axis_from_centers(values: &[f64], name: &str) -> Result<Axis> {
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0));
    if distinct.len() < 2 {
        return Err(Error::InvalidDensity(format!("need at least two distinct {name} centers")));
    }
    let n = distinct.len();
    let step = (distinct[n - 1] - distinct[0]) / (n - 1) as f64;
    for (k, v) in distinct.iter().enumerate() {
        if !close(*v, distinct[0] + k as f64 * step, step) {
            return Err(Error::InvalidDensity(format!("{name} centers are not evenly spaced")));
        }
    }
    Axis::new(distinct[0] - step / 2.0, distinct[n - 1] + step / 2.0, n)
}

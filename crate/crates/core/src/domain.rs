//! Network region and its regular quadrature grid.
//!
//! Cells are indexed row-major: in two dimensions cell `j * nx + i` has its
//! center at `(x_i, y_j)`, so `x` varies fastest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A location in km. One-dimensional domains use `y = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub const fn on_line(x: f64) -> Self {
        Point { x, y: 0.0 }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// One grid axis: the interval `[lo, hi]` split into `cells` equal cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            return Err(Error::InvalidDomain(format!("need lo < hi, got [{lo}, {hi}]")));
        }
        if cells < 2 {
            return Err(Error::InvalidDomain(format!("resolution must be at least 2, got {cells}")));
        }
        Ok(Axis { lo, hi, cells })
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn step(&self) -> f64 {
        self.length() / self.cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.step()
    }

    /// Left edge of cell `i` (`i == cells` gives `hi`).
    pub fn edge(&self, i: usize) -> f64 {
        if i == self.cells {
            self.hi
        } else {
            self.lo + i as f64 * self.step()
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Interval(Axis),
    Rectangle { x: Axis, y: Axis },
}

impl Domain {
    pub fn interval(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        Ok(Domain::Interval(Axis::new(lo, hi, cells)?))
    }

    pub fn rectangle(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> Result<Self> {
        Ok(Domain::Rectangle { x: Axis::new(x.0, x.1, nx)?, y: Axis::new(y.0, y.1, ny)? })
    }

    pub fn dimension(&self) -> usize {
        match self {
            Domain::Interval(_) => 1,
            Domain::Rectangle { .. } => 2,
        }
    }

    pub fn x_axis(&self) -> &Axis {
        match self {
            Domain::Interval(x) | Domain::Rectangle { x, .. } => x,
        }
    }

    pub fn y_axis(&self) -> Option<&Axis> {
        match self {
            Domain::Interval(_) => None,
            Domain::Rectangle { y, .. } => Some(y),
        }
    }

    pub fn num_cells(&self) -> usize {
        match self {
            Domain::Interval(x) => x.cells,
            Domain::Rectangle { x, y } => x.cells * y.cells,
        }
    }

    /// Length (1D) or area (2D) of the whole domain.
    pub fn measure(&self) -> f64 {
        match self {
            Domain::Interval(x) => x.length(),
            Domain::Rectangle { x, y } => x.length() * y.length(),
        }
    }

    /// Measure of a single cell; the grid is regular so all cells agree.
    pub fn cell_measure(&self) -> f64 {
        match self {
            Domain::Interval(x) => x.step(),
            Domain::Rectangle { x, y } => x.step() * y.step(),
        }
    }

    pub fn cell_center(&self, cell: usize) -> Point {
        match self {
            Domain::Interval(x) => Point::on_line(x.center(cell)),
            Domain::Rectangle { x, y } => {
                let (i, j) = (cell % x.cells, cell / x.cells);
                Point::new(x.center(i), y.center(j))
            }
        }
    }

    pub fn cell_centers(&self) -> Vec<Point> {
        (0..self.num_cells()).map(|c| self.cell_center(c)).collect()
    }

    pub fn contains(&self, p: &Point) -> bool {
        match self {
            Domain::Interval(x) => x.contains(p.x) && p.y == 0.0,
            Domain::Rectangle { x, y } => x.contains(p.x) && y.contains(p.y),
        }
    }

    /// Corner points of the domain (2 in 1D, 4 in 2D).
    pub fn corners(&self) -> Vec<Point> {
        match self {
            Domain::Interval(x) => vec![Point::on_line(x.lo), Point::on_line(x.hi)],
            Domain::Rectangle { x, y } => {
                vec![Point::new(x.lo, y.lo), Point::new(x.hi, y.lo), Point::new(x.hi, y.hi), Point::new(x.lo, y.hi)]
            }
        }
    }

    /// Same extent with a different number of cells per axis.
    pub fn with_resolution(&self, cells: usize) -> Result<Self> {
        match self {
            Domain::Interval(x) => Domain::interval(x.lo, x.hi, cells),
            Domain::Rectangle { x, y } => Domain::rectangle((x.lo, x.hi), (y.lo, y.hi), cells, cells),
        }
    }
}

/// A sub-region of the domain. A cell belongs to a box region iff its
/// center lies in the half-open box `[lo, hi)`; a box whose upper bound is
/// the domain boundary is closed there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Region {
    Interval { lo: f64, hi: f64 },
    Rectangle { x: (f64, f64), y: (f64, f64) },
    Cells(Vec<usize>),
}

impl Region {
    pub fn whole(domain: &Domain) -> Region {
        match domain {
            Domain::Interval(x) => Region::Interval { lo: x.lo, hi: x.hi },
            Domain::Rectangle { x, y } => Region::Rectangle { x: (x.lo, x.hi), y: (y.lo, y.hi) },
        }
    }

    /// Checks the region lies inside `domain`.
    pub fn validate(&self, domain: &Domain) -> Result<()> {
        let inside = |a: &Axis, lo: f64, hi: f64| lo <= hi && lo >= a.lo && hi <= a.hi;
        let ok = match (self, domain) {
            (Region::Interval { lo, hi }, Domain::Interval(x)) => inside(x, *lo, *hi),
            (Region::Rectangle { x: rx, y: ry }, Domain::Rectangle { x, y }) => {
                inside(x, rx.0, rx.1) && inside(y, ry.0, ry.1)
            }
            (Region::Cells(cells), d) => cells.iter().all(|&c| c < d.num_cells()),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidDomain(format!("region {self:?} is not contained in the domain")))
        }
    }

    /// Cells of `domain` that belong to this region, in ascending order.
    pub fn cells(&self, domain: &Domain) -> Vec<usize> {
        match self {
            Region::Cells(cells) => {
                let mut v = cells.clone();
                v.sort_unstable();
                v.dedup();
                v
            }
            _ => (0..domain.num_cells()).filter(|&c| self.contains_center(domain, &domain.cell_center(c))).collect(),
        }
    }

    fn contains_center(&self, domain: &Domain, p: &Point) -> bool {
        let within = |v: f64, lo: f64, hi: f64, axis_hi: f64| v >= lo && (v < hi || (hi >= axis_hi && v <= hi));
        match (self, domain) {
            (Region::Interval { lo, hi }, Domain::Interval(x)) => within(p.x, *lo, *hi, x.hi),
            (Region::Rectangle { x: rx, y: ry }, Domain::Rectangle { x, y }) => {
                within(p.x, rx.0, rx.1, x.hi) && within(p.y, ry.0, ry.1, y.hi)
            }
            _ => false,
        }
    }
}

//! Scenario files.
//!
//! A scenario is plain text, one `key = value` per line. Keys are dotted
//! (`station.2.position`), `#` starts a comment, and lists are comma
//! separated. Every problem in a file is reported at once, each with its
//! line number when it has one. See the README for the full key list.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use cellassoc::{
    BaseCost, Congestion, CongestionSpec, DensityField, Domain, EquilibriumConfig, Point, RadioParams, Region,
    Selection, SolverConfig, Station,
};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid scenario:\n{}", list(.0))]
    Invalid(Vec<Diagnostic>),
}

fn list(d: &[Diagnostic]) -> String {
    d.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Clone, PartialEq)]
pub enum DomainSpec {
    Interval { x: (f64, f64), cells: usize },
    Rectangle { x: (f64, f64), y: (f64, f64), nx: usize, ny: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum DensitySpec {
    Uniform,
    /// `(region bounds, level)`; bounds are `[lo, hi]` in 1D and
    /// `[x0, x1, y0, y1]` in 2D.
    Piecewise(Vec<(Vec<f64>, f64)>),
    /// `R_D^2 - (x^2 + y^2)`; `None` uses the farthest corner.
    Radial {
        radius: Option<f64>,
    },
    /// `c0 + c1 x + c2 y`.
    Linear(Vec<f64>),
    Csv(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationSpec {
    pub position: Point,
    pub power: Option<f64>,
    pub max_carriers: Option<f64>,
    pub kappa_bar: Option<f64>,
    /// Congestion term of the `optimal` policy and the cost equilibrium model.
    pub congestion: Option<Congestion>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioSpec {
    pub sigma: f64,
    pub xi: f64,
    pub height: f64,
    pub theta_bar: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseKind {
    Distance,
    PathLoss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingKind {
    Additive,
    Multiplicative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostSpecText {
    pub base: BaseKind,
    pub exponent: f64,
    pub coupling: CouplingKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Policy {
    RoundRobin,
    RateFair,
    Penalized,
    AlphaFair(f64),
    Wardrop,
    /// Minimizes the cost built from `cost.*` and the station congestion terms.
    Optimal,
}

impl Policy {
    pub fn name(&self) -> String {
        match self {
            Policy::RoundRobin => "round-robin".into(),
            Policy::RateFair => "rate-fair".into(),
            Policy::Penalized => "penalized".into(),
            Policy::AlphaFair(a) => format!("alpha-fair({a})"),
            Policy::Wardrop => "wardrop".into(),
            Policy::Optimal => "optimal".into(),
        }
    }

    fn keyword(&self) -> &'static str {
        match self {
            Policy::RoundRobin => "round-robin",
            Policy::RateFair => "rate-fair",
            Policy::Penalized => "penalized",
            Policy::AlphaFair(_) => "alpha-fair",
            Policy::Wardrop => "wardrop",
            Policy::Optimal => "optimal",
        }
    }

    /// Parses a policy name; `alpha-fair(2)` carries its own alpha and a bare
    /// `alpha-fair` takes `default_alpha`.
    pub fn parse(s: &str, default_alpha: Option<f64>) -> Result<Policy, String> {
        let s = s.trim();
        if let Some(inner) = s.strip_prefix("alpha-fair(").and_then(|r| r.strip_suffix(')')) {
            return inner.trim().parse().map(Policy::AlphaFair).map_err(|_| format!("bad alpha {inner:?}"));
        }
        Ok(match s {
            "round-robin" => Policy::RoundRobin,
            "rate-fair" | "voronoi" => Policy::RateFair,
            "penalized" => Policy::Penalized,
            "alpha-fair" => Policy::AlphaFair(default_alpha.ok_or("alpha-fair needs policy.alpha")?),
            "wardrop" => Policy::Wardrop,
            "optimal" => Policy::Optimal,
            other => {
                return Err(format!(
                "unknown policy {other:?} (expected round-robin, rate-fair, penalized, alpha-fair, wardrop or optimal)"
            ))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Share,
    Cost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WardropSpec {
    pub model: ModelKind,
    pub select: Selection,
    pub config: EquilibriumConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    /// Absent when the grid comes from a density CSV.
    pub domain: Option<DomainSpec>,
    pub density: DensitySpec,
    pub stations: Vec<StationSpec>,
    pub radio: RadioSpec,
    pub users: f64,
    pub policy: Policy,
    pub cost: CostSpecText,
    pub wardrop: WardropSpec,
    pub solver: SolverConfig,
    pub output_dir: PathBuf,
    /// 1 or 2.
    pub dim: usize,
}

const KNOWN_TOP: &[&str] = &[
    "name",
    "domain.kind",
    "domain.x",
    "domain.y",
    "domain.resolution",
    "density.kind",
    "density.radius",
    "density.coefficients",
    "density.path",
    "radio.sigma",
    "radio.xi",
    "radio.height",
    "radio.theta_bar",
    "users.total",
    "policy",
    "policy.alpha",
    "cost.base",
    "cost.exponent",
    "cost.coupling",
    "wardrop.model",
    "wardrop.select",
    "wardrop.scan",
    "wardrop.tol",
    "wardrop.damping",
    "wardrop.damping_1d",
    "wardrop.max_iter",
    "solver.tol",
    "solver.damping",
    "solver.max_iter",
    "solver.refine",
    "solver.exact_max_cells",
    "output.dir",
];

const STATION_FIELDS: &[&str] = &["position", "power", "max_carriers", "kappa_bar", "congestion"];

struct Entries {
    map: BTreeMap<String, (String, usize)>,
    errors: Vec<Diagnostic>,
}

impl Entries {
    fn err(&mut self, key: &str, message: impl Into<String>) {
        let line = self.map.get(key).map(|v| v.1);
        self.errors.push(Diagnostic { line, key: key.to_string(), message: message.into() });
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|v| v.0.as_str())
    }

    fn get<T: std::str::FromStr>(&mut self, key: &str) -> Option<T> {
        let raw = self.raw(key)?.to_string();
        match raw.parse() {
            Ok(v) => Some(v),
            Err(_) => {
                self.err(key, format!("cannot parse {raw:?}"));
                None
            }
        }
    }

    fn get_or<T: std::str::FromStr>(&mut self, key: &str, default: T) -> T {
        self.get(key).unwrap_or(default)
    }

    fn require<T: std::str::FromStr>(&mut self, key: &str) -> Option<T> {
        if self.raw(key).is_none() {
            self.err(key, "missing");
            return None;
        }
        self.get(key)
    }

    fn floats(&mut self, key: &str) -> Option<Vec<f64>> {
        let raw = self.raw(key)?.to_string();
        let parsed: Result<Vec<f64>, _> = raw.split(',').map(|s| s.trim().parse::<f64>()).collect();
        match parsed {
            Ok(v) if v.iter().all(|x| x.is_finite()) => Some(v),
            _ => {
                self.err(key, format!("expected comma-separated numbers, got {raw:?}"));
                None
            }
        }
    }

    fn pair(&mut self, key: &str) -> Option<(f64, f64)> {
        let v = self.floats(key)?;
        if v.len() != 2 {
            self.err(key, format!("expected two numbers, got {}", v.len()));
            return None;
        }
        if v[1] <= v[0] {
            self.err(key, "upper bound must exceed lower bound");
            return None;
        }
        Some((v[0], v[1]))
    }
}

fn parse_lines(text: &str) -> Entries {
    let mut e = Entries { map: BTreeMap::new(), errors: Vec::new() };
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            e.errors.push(Diagnostic {
                line: Some(line),
                key: content.to_string(),
                message: "expected key = value".into(),
            });
            continue;
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            e.errors.push(Diagnostic { line: Some(line), key: k.to_string(), message: "empty key or value".into() });
            continue;
        }
        if let Some((_, first)) = e.map.get(k) {
            e.errors.push(Diagnostic {
                line: Some(line),
                key: k.to_string(),
                message: format!("duplicate key (first set on line {first})"),
            });
            continue;
        }
        e.map.insert(k.to_string(), (v.to_string(), line));
    }
    e
}

/// Parses `zero`, `constant c`, `polynomial c0 c1 ...`, `exp2 scale power [floor]`
/// or `step at below above`.
pub fn parse_congestion(s: &str) -> Result<Congestion, String> {
    let mut words = s.split_whitespace();
    let kind = words.next().ok_or("empty congestion")?;
    let nums: Vec<f64> =
        words.map(|w| w.parse::<f64>().map_err(|_| format!("bad number {w:?}"))).collect::<Result<_, _>>()?;
    let want =
        |n: usize| if nums.len() == n { Ok(()) } else { Err(format!("{kind} takes {n} numbers, got {}", nums.len())) };
    Ok(match kind {
        "zero" => {
            want(0)?;
            Congestion::Zero
        }
        "constant" => {
            want(1)?;
            Congestion::Constant(nums[0])
        }
        "polynomial" => {
            if nums.is_empty() {
                return Err("polynomial needs at least one coefficient".into());
            }
            Congestion::Polynomial(nums)
        }
        "exp2" => match nums.len() {
            2 => Congestion::Exp2 { scale: nums[0], power: nums[1], floor: 0.0 },
            3 => Congestion::Exp2 { scale: nums[0], power: nums[1], floor: nums[2] },
            n => return Err(format!("exp2 takes 2 or 3 numbers, got {n}")),
        },
        "step" => {
            want(3)?;
            Congestion::Step { at: nums[0], below: nums[1], above: nums[2] }
        }
        other => return Err(format!("unknown congestion {other:?}")),
    })
}

fn congestion_text(c: &Congestion) -> String {
    match c {
        Congestion::Zero => "zero".into(),
        Congestion::Constant(v) => format!("constant {v}"),
        Congestion::Polynomial(cs) => {
            let mut s = "polynomial".to_string();
            for c in cs {
                let _ = write!(s, " {c}");
            }
            s
        }
        Congestion::Exp2 { scale, power, floor } => format!("exp2 {scale} {power} {floor}"),
        Congestion::Step { at, below, above } => format!("step {at} {below} {above}"),
        Congestion::Penalty { .. } => "zero".into(),
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        Self::parse_in(text, None)
    }

    /// Parses `text`; relative CSV paths resolve against `base`.
    pub fn parse_in(text: &str, base: Option<&Path>) -> Result<Scenario, ScenarioError> {
        let mut e = parse_lines(text);

        // Unknown keys.
        let keys: Vec<String> = e.map.keys().cloned().collect();
        let mut station_ids = Vec::new();
        let mut piece_ids = Vec::new();
        for k in &keys {
            if KNOWN_TOP.contains(&k.as_str()) {
                continue;
            }
            let parts: Vec<&str> = k.split('.').collect();
            match parts.as_slice() {
                ["station", id, field] if STATION_FIELDS.contains(field) => match id.parse::<usize>() {
                    Ok(n) if n >= 1 => station_ids.push(n),
                    _ => e.err(k, "station numbers start at 1"),
                },
                ["density", "piece", id] => match id.parse::<usize>() {
                    Ok(n) if n >= 1 => piece_ids.push(n),
                    _ => e.err(k, "piece numbers start at 1"),
                },
                _ => e.err(k, "unknown key"),
            }
        }
        station_ids.sort_unstable();
        station_ids.dedup();
        piece_ids.sort_unstable();
        piece_ids.dedup();

        let name = e.get_or("name", "unnamed".to_string());

        // Domain.
        let density_kind = e.get_or("density.kind", "uniform".to_string());
        let domain = if density_kind == "csv" {
            for k in ["domain.kind", "domain.x", "domain.y", "domain.resolution"] {
                if e.raw(k).is_some() {
                    e.err(k, "the grid of a csv density comes from the file");
                }
            }
            None
        } else {
            parse_domain(&mut e)
        };
        let dim = match &domain {
            Some(DomainSpec::Rectangle { .. }) => 2,
            Some(DomainSpec::Interval { .. }) => 1,
            // A csv grid's dimension shows in the station coordinates.
            None => e.floats("station.1.position").map_or(1, |v| v.len().clamp(1, 2)),
        };

        // Density.
        let density = match density_kind.as_str() {
            "uniform" => Some(DensitySpec::Uniform),
            "radial" => {
                let radius = e.get::<f64>("density.radius");
                if let Some(r) = radius {
                    if !(r > 0.0) {
                        e.err("density.radius", format!("must be positive, got {r}"));
                    }
                }
                Some(DensitySpec::Radial { radius })
            }
            "linear" => {
                let c = e.floats("density.coefficients");
                if c.is_none() && e.raw("density.coefficients").is_none() {
                    e.err("density.coefficients", "missing");
                }
                c.and_then(|c| {
                    if c.len() != dim + 1 {
                        e.err("density.coefficients", format!("expected {} numbers, got {}", dim + 1, c.len()));
                        None
                    } else {
                        Some(DensitySpec::Linear(c))
                    }
                })
            }
            "piecewise" => {
                let mut pieces = Vec::new();
                if piece_ids.is_empty() {
                    e.err("density.piece.1", "missing");
                }
                for id in &piece_ids {
                    let key = format!("density.piece.{id}");
                    if let Some(v) = e.floats(&key) {
                        if v.len() != 2 * dim + 1 {
                            e.err(
                                &key,
                                format!("expected {} numbers (bounds then level), got {}", 2 * dim + 1, v.len()),
                            );
                        } else {
                            pieces.push((v[..2 * dim].to_vec(), v[2 * dim]));
                        }
                    }
                }
                Some(DensitySpec::Piecewise(pieces))
            }
            "csv" => e.require::<String>("density.path").map(|p| {
                let p = PathBuf::from(p);
                DensitySpec::Csv(match base {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p,
                })
            }),
            other => {
                e.err(
                    "density.kind",
                    format!("unknown density {other:?} (expected uniform, piecewise, radial, linear or csv)"),
                );
                None
            }
        };
        if density_kind != "piecewise" && !piece_ids.is_empty() {
            e.err(&format!("density.piece.{}", piece_ids[0]), "only used by piecewise densities");
        }

        // Stations.
        let mut stations = Vec::new();
        for (expect, id) in station_ids.iter().enumerate() {
            if *id != expect + 1 {
                e.err(
                    &format!("station.{id}.position"),
                    format!("station numbers must be consecutive from 1; station.{} is missing", expect + 1),
                );
                break;
            }
        }
        if station_ids.is_empty() {
            e.err("station.1.position", "at least one station is required");
        }
        for id in &station_ids {
            let key = |f: &str| format!("station.{id}.{f}");
            let position = e.floats(&key("position"));
            if position.is_none() && e.raw(&key("position")).is_none() {
                e.err(&key("position"), "missing");
            }
            let position = position.and_then(|v| match (v.len(), dim) {
                (1, 1) => Some(Point::on_line(v[0])),
                (2, 2) => Some(Point::new(v[0], v[1])),
                (n, _) => {
                    e.err(&key("position"), format!("expected {dim} coordinate(s), got {n}"));
                    None
                }
            });
            let mut checked = |f: &str, ok: fn(f64) -> bool, want: &str| -> Option<f64> {
                let v = e.get::<f64>(&key(f))?;
                if !(v.is_finite() && ok(v)) {
                    e.err(&key(f), format!("{want}, got {v}"));
                }
                Some(v)
            };
            let power = checked("power", |v| v > 0.0, "must be positive");
            let max_carriers = checked("max_carriers", |v| v >= 1.0, "must be at least 1");
            let kappa_bar = checked("kappa_bar", |v| v >= 0.0, "must be nonnegative");
            if max_carriers.is_some() != kappa_bar.is_some() {
                e.err(&key("max_carriers"), "max_carriers and kappa_bar go together");
            }
            let congestion =
                e.raw(&key("congestion")).map(str::to_string).and_then(|raw| match parse_congestion(&raw) {
                    Ok(c) => Some(c),
                    Err(m) => {
                        e.err(&key("congestion"), m);
                        None
                    }
                });
            if let Some(position) = position {
                stations.push(StationSpec { position, power, max_carriers, kappa_bar, congestion });
            }
        }

        // Radio.
        let radio = RadioSpec {
            sigma: e.get_or("radio.sigma", 1.0),
            xi: e.get_or("radio.xi", 2.0),
            height: e.get_or("radio.height", 1.0),
            theta_bar: e.get("radio.theta_bar"),
        };
        if !(radio.sigma > 0.0 && radio.sigma.is_finite()) {
            e.err("radio.sigma", format!("must be positive, got {}", radio.sigma));
        }
        if !(radio.xi > 0.0 && radio.xi.is_finite()) {
            e.err("radio.xi", format!("must be positive, got {}", radio.xi));
        }
        if !(radio.height >= 0.0 && radio.height.is_finite()) {
            e.err("radio.height", format!("must be nonnegative, got {}", radio.height));
        }
        if let Some(t) = radio.theta_bar {
            if !(t > 0.0 && t.is_finite()) {
                e.err("radio.theta_bar", format!("must be positive, got {t}"));
            }
        }
        let users: f64 = e.get_or("users.total", 1.0);
        if !(users >= 1.0 && users.is_finite()) {
            e.err("users.total", format!("must be at least 1, got {users}"));
        }

        // Policy.
        let alpha = e.get::<f64>("policy.alpha");
        let policy_raw = e.get_or("policy", "optimal".to_string());
        let policy = match Policy::parse(&policy_raw, alpha) {
            Ok(p) => {
                if let (Policy::AlphaFair(a), true) = (p, e.raw("policy.alpha").is_some()) {
                    if Some(a) != alpha {
                        e.err("policy.alpha", "conflicts with the alpha in policy");
                    }
                }
                if !matches!(p, Policy::AlphaFair(_)) && alpha.is_some() {
                    e.err("policy.alpha", "only used by alpha-fair");
                }
                if let Policy::AlphaFair(a) = p {
                    if !(a >= 0.0 && a.is_finite()) || a == 1.0 {
                        e.err("policy.alpha", format!("must be nonnegative and not 1, got {a}"));
                    }
                }
                if matches!(p, Policy::RoundRobin | Policy::AlphaFair(_)) && radio.theta_bar.is_none() {
                    e.err("radio.theta_bar", format!("required by {}", p.name()));
                }
                Some(p)
            }
            Err(m) => {
                e.err("policy", m);
                None
            }
        };

        let cost = CostSpecText {
            base: match e.get_or("cost.base", "distance".to_string()).as_str() {
                "distance" => BaseKind::Distance,
                "path-loss" => BaseKind::PathLoss,
                other => {
                    e.err("cost.base", format!("expected distance or path-loss, got {other:?}"));
                    BaseKind::Distance
                }
            },
            exponent: e.get_or("cost.exponent", 1.0),
            coupling: match e.get_or("cost.coupling", "additive".to_string()).as_str() {
                "additive" => CouplingKind::Additive,
                "multiplicative" => CouplingKind::Multiplicative,
                other => {
                    e.err("cost.coupling", format!("expected additive or multiplicative, got {other:?}"));
                    CouplingKind::Additive
                }
            },
        };
        if !(cost.exponent > 0.0 && cost.exponent.is_finite()) {
            e.err("cost.exponent", format!("must be positive, got {}", cost.exponent));
        }

        let defaults = EquilibriumConfig::default();
        let model = match e.get_or("wardrop.model", "share".to_string()).as_str() {
            "share" => ModelKind::Share,
            "cost" => ModelKind::Cost,
            other => {
                e.err("wardrop.model", format!("expected share or cost, got {other:?}"));
                ModelKind::Share
            }
        };
        if model == ModelKind::Cost && cost.coupling == CouplingKind::Multiplicative {
            e.err("wardrop.model", "the cost model needs cost.coupling = additive");
        }
        let select = match e.get_or("wardrop.select", "best".to_string()).parse::<Selection>() {
            Ok(s) => s,
            Err(m) => {
                e.err("wardrop.select", m.to_string());
                Selection::Best
            }
        };
        let wardrop = WardropSpec {
            model,
            select,
            config: EquilibriumConfig {
                scan_resolution: e.get_or("wardrop.scan", defaults.scan_resolution),
                tol: e.get_or("wardrop.tol", defaults.tol),
                damping: e.get_or("wardrop.damping", defaults.damping),
                damping_1d: e.get_or("wardrop.damping_1d", defaults.damping_1d),
                max_iter: e.get_or("wardrop.max_iter", defaults.max_iter),
            },
        };
        if wardrop.config.scan_resolution < 2 {
            e.err("wardrop.scan", "must be at least 2");
        }
        for (k, v) in [("wardrop.damping", wardrop.config.damping), ("wardrop.damping_1d", wardrop.config.damping_1d)] {
            if !(v > 0.0 && v <= 1.0) {
                e.err(k, format!("must be in (0, 1], got {v}"));
            }
        }
        if !(wardrop.config.tol > 0.0) {
            e.err("wardrop.tol", "must be positive");
        }

        let sd = SolverConfig::default();
        let solver = SolverConfig {
            tol: e.get_or("solver.tol", sd.tol),
            damping: e.get_or("solver.damping", sd.damping),
            max_iter: e.get_or("solver.max_iter", sd.max_iter),
            refine: e.get_or("solver.refine", sd.refine),
            exact_max_cells: e.get_or("solver.exact_max_cells", sd.exact_max_cells),
        };
        if let Err(err) = solver.validate() {
            let key = match &err {
                cellassoc::Error::InvalidParameter { name, .. } => format!("solver.{name}"),
                _ => "solver".to_string(),
            };
            e.err(&key, err.to_string());
        }

        let output_dir = PathBuf::from(e.get_or("output.dir", "cellassoc-out".to_string()));

        if !e.errors.is_empty() {
            e.errors.sort_by_key(|d| d.line.unwrap_or(usize::MAX));
            return Err(ScenarioError::Invalid(e.errors));
        }
        Ok(Scenario {
            name,
            domain,
            density: density.expect("checked"),
            stations,
            radio,
            users,
            policy: policy.expect("checked"),
            cost,
            wardrop,
            solver,
            output_dir,
            dim,
        })
    }

    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
        Self::parse_in(&text, path.parent())
    }

    /// Canonical text form; parsing it gives back the same scenario.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("name", self.name.clone());
        match &self.domain {
            Some(DomainSpec::Interval { x, cells }) => {
                kv("domain.kind", "interval".into());
                kv("domain.x", join(&[x.0, x.1]));
                kv("domain.resolution", cells.to_string());
            }
            Some(DomainSpec::Rectangle { x, y, nx, ny }) => {
                kv("domain.kind", "rectangle".into());
                kv("domain.x", join(&[x.0, x.1]));
                kv("domain.y", join(&[y.0, y.1]));
                kv("domain.resolution", format!("{nx}, {ny}"));
            }
            None => {}
        }
        match &self.density {
            DensitySpec::Uniform => kv("density.kind", "uniform".into()),
            DensitySpec::Piecewise(pieces) => {
                kv("density.kind", "piecewise".into());
                for (i, (bounds, level)) in pieces.iter().enumerate() {
                    let mut v = bounds.clone();
                    v.push(*level);
                    kv(&format!("density.piece.{}", i + 1), join(&v));
                }
            }
            DensitySpec::Radial { radius } => {
                kv("density.kind", "radial".into());
                if let Some(r) = radius {
                    kv("density.radius", r.to_string());
                }
            }
            DensitySpec::Linear(c) => {
                kv("density.kind", "linear".into());
                kv("density.coefficients", join(c));
            }
            DensitySpec::Csv(p) => {
                kv("density.kind", "csv".into());
                kv("density.path", p.display().to_string());
            }
        }
        for (i, st) in self.stations.iter().enumerate() {
            let k = |f: &str| format!("station.{}.{f}", i + 1);
            let p = st.position;
            let pos = if self.dim == 2 { join(&[p.x, p.y]) } else { p.x.to_string() };
            kv(&k("position"), pos);
            if let Some(p) = st.power {
                kv(&k("power"), p.to_string());
            }
            if let Some(m) = st.max_carriers {
                kv(&k("max_carriers"), m.to_string());
            }
            if let Some(m) = st.kappa_bar {
                kv(&k("kappa_bar"), m.to_string());
            }
            if let Some(c) = &st.congestion {
                kv(&k("congestion"), congestion_text(c));
            }
        }
        kv("radio.sigma", self.radio.sigma.to_string());
        kv("radio.xi", self.radio.xi.to_string());
        kv("radio.height", self.radio.height.to_string());
        if let Some(t) = self.radio.theta_bar {
            kv("radio.theta_bar", t.to_string());
        }
        kv("users.total", self.users.to_string());
        kv("policy", self.policy.keyword().into());
        if let Policy::AlphaFair(a) = self.policy {
            kv("policy.alpha", a.to_string());
        }
        kv(
            "cost.base",
            match self.cost.base {
                BaseKind::Distance => "distance".into(),
                BaseKind::PathLoss => "path-loss".into(),
            },
        );
        kv("cost.exponent", self.cost.exponent.to_string());
        kv(
            "cost.coupling",
            match self.cost.coupling {
                CouplingKind::Additive => "additive".into(),
                CouplingKind::Multiplicative => "multiplicative".into(),
            },
        );
        kv(
            "wardrop.model",
            match self.wardrop.model {
                ModelKind::Share => "share".into(),
                ModelKind::Cost => "cost".into(),
            },
        );
        kv(
            "wardrop.select",
            match self.wardrop.select {
                Selection::Best => "best".into(),
                Selection::Worst => "worst".into(),
            },
        );
        let c = &self.wardrop.config;
        kv("wardrop.scan", c.scan_resolution.to_string());
        kv("wardrop.tol", c.tol.to_string());
        kv("wardrop.damping", c.damping.to_string());
        kv("wardrop.damping_1d", c.damping_1d.to_string());
        kv("wardrop.max_iter", c.max_iter.to_string());
        kv("solver.tol", self.solver.tol.to_string());
        kv("solver.damping", self.solver.damping.to_string());
        kv("solver.max_iter", self.solver.max_iter.to_string());
        kv("solver.refine", self.solver.refine.to_string());
        kv("solver.exact_max_cells", self.solver.exact_max_cells.to_string());
        kv("output.dir", self.output_dir.display().to_string());
        s
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn build_density(&self) -> cellassoc::Result<DensityField> {
        if let DensitySpec::Csv(path) = &self.density {
            let file = std::fs::File::open(path)?;
            return DensityField::read_csv(file);
        }
        let domain = match self.domain.as_ref().expect("non-csv scenarios have a domain") {
            DomainSpec::Interval { x, cells } => Domain::interval(x.0, x.1, *cells)?,
            DomainSpec::Rectangle { x, y, nx, ny } => Domain::rectangle(*x, *y, *nx, *ny)?,
        };
        match &self.density {
            DensitySpec::Uniform => Ok(DensityField::uniform(domain)),
            DensitySpec::Radial { radius } => {
                let r = radius.unwrap_or_else(|| {
                    domain.corners().iter().map(|c| c.distance(&Point::new(0.0, 0.0))).fold(0.0, f64::max)
                });
                DensityField::radial(domain, r)
            }
            DensitySpec::Linear(c) => {
                let c = c.clone();
                DensityField::from_fn(domain, move |p| c[0] + c[1] * p.x + c.get(2).map_or(0.0, |c2| c2 * p.y))
            }
            DensitySpec::Piecewise(pieces) => {
                let regions: Vec<(Region, f64)> = pieces
                    .iter()
                    .map(|(b, level)| {
                        let region = if b.len() == 2 {
                            Region::Interval { lo: b[0], hi: b[1] }
                        } else {
                            Region::Rectangle { x: (b[0], b[1]), y: (b[2], b[3]) }
                        };
                        (region, *level)
                    })
                    .collect();
                DensityField::piecewise(domain, &regions)
            }
            DensitySpec::Csv(_) => unreachable!(),
        }
    }

    pub fn build_stations(&self) -> Vec<Station> {
        self.stations
            .iter()
            .map(|s| Station {
                position: s.position,
                tx_power: s.power,
                max_carriers: s.max_carriers,
                kappa_bar: s.kappa_bar,
            })
            .collect()
    }

    /// Radio parameters; an unset `theta_bar` becomes 1 for policies that
    /// never use it.
    pub fn radio_params(&self) -> cellassoc::Result<RadioParams> {
        RadioParams::with_sigma(self.radio.sigma, self.radio.xi, self.radio.height, self.radio.theta_bar.unwrap_or(1.0))
    }

    /// Cost of the `optimal` policy and of the cost equilibrium model.
    pub fn custom_spec(&self) -> cellassoc::Result<CongestionSpec> {
        let base = match self.cost.base {
            BaseKind::Distance => BaseCost::DistancePower { exponent: self.cost.exponent },
            BaseKind::PathLoss => BaseCost::path_loss(&self.radio_params()?),
        };
        let neutral = match self.cost.coupling {
            CouplingKind::Additive => Congestion::Zero,
            CouplingKind::Multiplicative => Congestion::Constant(1.0),
        };
        let terms = self.stations.iter().map(|s| s.congestion.clone().unwrap_or_else(|| neutral.clone())).collect();
        Ok(match self.cost.coupling {
            CouplingKind::Additive => CongestionSpec::additive(base, terms),
            CouplingKind::Multiplicative => CongestionSpec::multiplicative(base, terms),
        })
    }

    pub fn is_1d(&self) -> bool {
        self.dim == 1
    }
}

fn parse_domain(e: &mut Entries) -> Option<DomainSpec> {
    let kind = e.require::<String>("domain.kind")?;
    let resolution = e.floats("domain.resolution");
    if resolution.is_none() && e.raw("domain.resolution").is_none() {
        e.err("domain.resolution", "missing");
    }
    let counts: Option<Vec<usize>> = resolution.and_then(|r| {
        if r.iter().all(|v| v.fract() == 0.0 && *v >= 2.0) {
            Some(r.iter().map(|v| *v as usize).collect())
        } else {
            e.err("domain.resolution", "cells per axis must be whole numbers of at least 2");
            None
        }
    });
    match kind.as_str() {
        "interval" => {
            if e.raw("domain.y").is_some() {
                e.err("domain.y", "an interval has no y range");
            }
            let x = e.pair("domain.x");
            if x.is_none() && e.raw("domain.x").is_none() {
                e.err("domain.x", "missing");
            }
            let cells = counts.and_then(|c| {
                if c.len() == 1 {
                    Some(c[0])
                } else {
                    e.err("domain.resolution", "an interval takes one cell count");
                    None
                }
            });
            Some(DomainSpec::Interval { x: x?, cells: cells? })
        }
        "rectangle" => {
            let x = e.pair("domain.x");
            let y = e.pair("domain.y");
            for k in ["domain.x", "domain.y"] {
                if e.raw(k).is_none() {
                    e.err(k, "missing");
                }
            }
            let (nx, ny) = match counts.as_deref() {
                Some([n]) => (*n, *n),
                Some([nx, ny]) => (*nx, *ny),
                Some(_) => {
                    e.err("domain.resolution", "a rectangle takes one or two cell counts");
                    return None;
                }
                None => return None,
            };
            Some(DomainSpec::Rectangle { x: x?, y: y?, nx, ny })
        }
        other => {
            e.err("domain.kind", format!("expected interval or rectangle, got {other:?}"));
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
domain.kind = interval
domain.x = 0, 1
domain.resolution = 10
station.1.position = 0.2
station.2.position = 0.8   # trailing comment
";

    #[test]
    fn minimal_scenario_gets_defaults() {
        let s = Scenario::parse(MINIMAL).unwrap();
        assert_eq!(s.stations.len(), 2);
        assert_eq!(s.policy, Policy::Optimal);
        assert_eq!(s.density, DensitySpec::Uniform);
        assert_eq!(s.solver, SolverConfig::default());
        assert_eq!(Scenario::parse(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn every_error_is_listed_with_its_line() {
        let text = format!("{MINIMAL}radio.sigma = -1\nfoo.bar = 3\nstation.1.power = x\n");
        let Err(ScenarioError::Invalid(d)) = Scenario::parse(&text) else { panic!("should fail") };
        let keys: Vec<_> = d.iter().map(|d| d.key.as_str()).collect();
        assert!(keys.contains(&"radio.sigma"), "{d:?}");
        assert!(keys.contains(&"foo.bar"));
        assert!(keys.contains(&"station.1.power"));
        let sigma = d.iter().find(|d| d.key == "radio.sigma").unwrap();
        assert_eq!(sigma.line, Some(7));
    }

    #[test]
    fn duplicate_and_malformed_lines() {
        let text = format!("{MINIMAL}domain.x = 0, 2\njust words\n");
        let Err(ScenarioError::Invalid(d)) = Scenario::parse(&text) else { panic!("should fail") };
        assert!(d.iter().any(|d| d.message.contains("duplicate") && d.line == Some(7)));
        assert!(d.iter().any(|d| d.line == Some(8)));
    }

    #[test]
    fn stations_must_be_consecutive() {
        let text = MINIMAL.replace("station.2", "station.3");
        assert!(Scenario::parse(&text).is_err());
    }

    #[test]
    fn congestion_syntax() {
        assert_eq!(parse_congestion("step 0.999 0 1").unwrap(), Congestion::Step { at: 0.999, below: 0.0, above: 1.0 });
        assert_eq!(parse_congestion("constant 100").unwrap(), Congestion::Constant(100.0));
        assert_eq!(parse_congestion("exp2 5 1").unwrap(), Congestion::Exp2 { scale: 5.0, power: 1.0, floor: 0.0 });
        assert!(parse_congestion("constant").is_err());
        assert!(parse_congestion("cubic 1").is_err());
        for c in ["zero", "polynomial 1 2 3", "exp2 5 -1 0.1", "step 0.5 1 2"] {
            assert_eq!(congestion_text(&parse_congestion(c).unwrap()), c);
        }
    }

    #[test]
    fn policies_parse() {
        assert_eq!(Policy::parse("alpha-fair(0.5)", None).unwrap(), Policy::AlphaFair(0.5));
        assert_eq!(Policy::parse("alpha-fair", Some(2.0)).unwrap(), Policy::AlphaFair(2.0));
        assert_eq!(Policy::parse("voronoi", None).unwrap(), Policy::RateFair);
        assert!(Policy::parse("alpha-fair", None).is_err());
        assert!(Policy::parse("greedy", None).is_err());
    }

    #[test]
    fn round_robin_needs_theta_bar() {
        let text = format!("{MINIMAL}policy = round-robin\n");
        let Err(ScenarioError::Invalid(d)) = Scenario::parse(&text) else { panic!("should fail") };
        assert_eq!(d[0].key, "radio.theta_bar");
    }

    #[test]
    fn hash_ignores_comments() {
        let a = Scenario::parse(MINIMAL).unwrap();
        let b = Scenario::parse(&format!("# header\n{MINIMAL}")).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn piecewise_density_builds() {
        let text = "
domain.kind = rectangle
domain.x = 0, 1
domain.y = 0, 1
domain.resolution = 8
density.kind = piecewise
density.piece.1 = 0, 0.25, 0, 1, 2
density.piece.2 = 0.25, 0.5, 0, 1, 1
density.piece.3 = 0.5, 1, 0, 1, 0.5
station.1.position = 0.5, 0.5
";
        let s = Scenario::parse(text).unwrap();
        let d = s.build_density().unwrap();
        assert!((d.total_mass() - 1.0).abs() < 1e-12);
        assert_eq!(Scenario::parse(&s.to_text()).unwrap(), s);
    }
}

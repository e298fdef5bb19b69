//! Cell association for base-station networks over a continuous user density.
//!
//! Users are described by a density on an interval or rectangle, discretized
//! on a regular midpoint grid. The crate computes cost-minimizing partitions
//! (semidiscrete optimal transport with congestion) and selfish-user
//! (Wardrop) equilibria, and compares the two.

pub mod congestion;
pub mod density;
pub mod domain;
pub mod error;
pub mod oracle;
pub mod par;
pub mod partition;
pub mod policy;
pub mod radio;
mod refine;
pub mod solver;
pub mod wardrop;

pub use congestion::{BaseCost, Congestion, CongestionSpec, Coupling};
pub use density::{CumulativeMass, DensityField};
pub use domain::{Axis, Domain, Point, Region};
pub use error::{Error, Result};
pub use oracle::{brute_force_oracle, OracleMode};
pub use partition::{total_cost, voronoi_partition, CostBreakdown, Partition};
pub use policy::{alpha_fair_solver, penalized_rate_fair_solver, rate_fair_solver, round_robin_solver};
pub use radio::{throughput, throughput_nats, RadioParams, Station};
pub use solver::{check_optimality, solve, solve_additive, solve_multiplicative, SolverConfig, SolverReport};
pub use wardrop::{
    poa_toy_example, price_of_anarchy, select_equilibrium, solve_equilibrium_1d_multi,
    solve_equilibrium_1d_two_stations, solve_equilibrium_2d, wardrop_check, Classification, CostRateModel,
    EquilibriumConfig, EquilibriumModel, EquilibriumSolution, Selection, ShareRateModel,
};

//! Scenario files, bundled presets and the commands behind the `cellassoc`
//! binary.

pub mod exec;
pub mod presets;
pub mod scenario;

use std::path::Path;

use anyhow::{anyhow, Result};

pub use exec::{compare, execute, oracle, run_scenario, sweep, write_sweep_csv, Instance, PolicyResult, RunRecord};
pub use scenario::{Policy, Scenario};

/// Loads `arg` as a scenario file, or as a preset name when no such file
/// exists.
pub fn load_scenario(arg: &str) -> Result<Scenario> {
    let path = Path::new(arg);
    if path.exists() {
        return Ok(Scenario::load(path)?);
    }
    match presets::load_preset(arg) {
        Some(s) => Ok(s?),
        None => Err(anyhow!("{arg}: no such file or preset (see `cellassoc presets list`)")),
    }
}

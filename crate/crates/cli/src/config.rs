//! JSON run configurations for the `simulate` subcommand.
//!
//! The file is validated in full before any computation starts; a malformed
//! config produces a usage error and no partial output.

use std::path::Path;

use serde::Deserialize;

use hypergns_core::geometry::StripSpec;
use hypergns_core::simulator::{CauchyData, SimulationSetup, Upsilon};
use hypergns_core::TestFamily;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SimConfigFile {
    dim: usize,
    h: f64,
    #[serde(default = "default_cfl")]
    cfl: f64,
    epsilon: f64,
    tau_ladder: Vec<f64>,
    /// Absent or null runs the linear benchmark (Υ ≡ 0).
    #[serde(default)]
    upsilon: Option<UpsilonConfig>,
    #[serde(default)]
    phi0: Option<TestFamily>,
    #[serde(default)]
    phi1: Option<TestFamily>,
    #[serde(default = "default_budget")]
    node_budget: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct UpsilonConfig {
    v_lo: f64,
    v_hi: f64,
    amplitude: f64,
}

fn default_cfl() -> f64 {
    0.5
}

fn default_budget() -> usize {
    6_000_000
}

pub fn load_simulation_config(path: &Path) -> Result<SimulationSetup, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let file: SimConfigFile =
        serde_json::from_str(&text).map_err(|e| format!("invalid config: {e}"))?;
    if file.tau_ladder.is_empty() {
        return Err("invalid config: tau_ladder must be nonempty".into());
    }
    if !(file.cfl > 0.0 && file.cfl <= 0.5) {
        return Err(format!("invalid config: cfl must lie in (0, 1/2], got {}", file.cfl));
    }
    let mut setup = SimulationSetup::new(file.dim, file.h, file.epsilon, file.tau_ladder);
    setup.cfl = file.cfl;
    setup.node_budget = file.node_budget;
    setup.upsilon = match file.upsilon {
        Some(u) => {
            let strip = StripSpec::new(u.v_lo, u.v_hi).map_err(|e| format!("invalid config: {e}"))?;
            Some(Upsilon::new(strip, u.amplitude))
        }
        None => None,
    };
    let mut data = CauchyData::default_profile(file.dim, file.epsilon);
    if let Some(p0) = file.phi0 {
        data.phi0 = p0;
    }
    if let Some(p1) = file.phi1 {
        data.phi1 = p1;
    }
    data.epsilon = file.epsilon;
    data.validate(file.dim).map_err(|e| format!("invalid config: {e}"))?;
    setup.data = data;
    setup.config().map_err(|e| format!("invalid config: {e}"))?;
    Ok(setup)
}

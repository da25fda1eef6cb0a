use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Charging dynamics a scenario runs under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimulationMode {
    /// Bidirectional: actions in `[-1, 1]`.
    V2g,
    /// Smart charging only: actions in `[0, 1]`.
    G2v,
    /// Uncontrolled charging baseline: actions in `[0, 1]`.
    #[serde(alias = "no_control", alias = "no-control")]
    NoControl,
}

impl SimulationMode {
    pub fn allows_discharge(self) -> bool {
        matches!(self, SimulationMode::V2g)
    }

    /// Inclusive action range for this mode.
    pub fn action_range(self) -> (f64, f64) {
        if self.allows_discharge() {
            (-1.0, 1.0)
        } else {
            (0.0, 1.0)
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SimulationMode::V2g => "v2g",
            SimulationMode::G2v => "g2v",
            SimulationMode::NoControl => "nocontrol",
        }
    }
}

impl fmt::Display for SimulationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown simulation mode `{0}` (expected v2g, g2v or nocontrol)")]
pub struct UnknownMode(pub String);

impl FromStr for SimulationMode {
    type Err = UnknownMode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "v2g" => Ok(SimulationMode::V2g),
            "g2v" => Ok(SimulationMode::G2v),
            "nocontrol" | "no_control" | "no-control" => Ok(SimulationMode::NoControl),
            _ => Err(UnknownMode(s.to_string())),
        }
    }
}

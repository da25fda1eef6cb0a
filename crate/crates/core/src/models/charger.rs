use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{check_fraction, Curve, ModelError};
use crate::SimulationMode;

/// Charger identity `EVC_<building>_<charger>_<plug>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChargerId {
    pub building: u32,
    pub charger: u32,
    pub plug: u32,
}

impl fmt::Display for ChargerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EVC_{}_{}_{}", self.building, self.charger, self.plug)
    }
}

impl FromStr for ChargerId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::InvalidChargerId(s.to_string());
        let rest = s.strip_prefix("EVC_").ok_or_else(bad)?;
        let mut parts = rest.split('_').map(|p| p.parse::<u32>());
        let mut next = || match parts.next() {
            Some(Ok(v)) if v > 0 => Ok(v),
            _ => Err(bad()),
        };
        let id = ChargerId {
            building: next()?,
            charger: next()?,
            plug: next()?,
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(id)
    }
}

impl Serialize for ChargerId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ChargerId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Charger parameters as they appear in a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChargerParams {
    pub nominal_power_charging: f64,
    #[serde(default)]
    pub nominal_power_discharging: f64,
    #[serde(default = "default_efficiency")]
    pub efficiency: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efficiency_curve: Option<Curve>,
}

fn default_efficiency() -> f64 {
    1.0
}

/// An EV charger plug. Powers in kW.
#[derive(Debug, Clone, PartialEq)]
pub struct Charger {
    pub id: ChargerId,
    pub nominal_power_charging: f64,
    pub nominal_power_discharging: f64,
    pub technical_efficiency: f64,
    /// `(load fraction, efficiency)` breakpoints overriding the constant efficiency.
    pub efficiency_curve: Option<Curve>,
}

impl Charger {
    /// Builds a charger; discharge power is forced to zero outside V2G.
    pub fn new(id: ChargerId, params: &ChargerParams, mode: SimulationMode) -> Result<Self, ModelError> {
        for (name, v) in [
            ("nominal_power_charging", params.nominal_power_charging),
            ("nominal_power_discharging", params.nominal_power_discharging),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ModelError::InvalidParameter {
                    name,
                    reason: format!("{v} is not a non-negative power"),
                });
            }
        }
        check_fraction("efficiency", params.efficiency, true, false)?;
        if let Some(curve) = &params.efficiency_curve {
            curve.check_domain(0.0, 1.0, f64::MIN_POSITIVE, 1.0)?;
        }
        Ok(Self {
            id,
            nominal_power_charging: params.nominal_power_charging,
            nominal_power_discharging: if mode.allows_discharge() {
                params.nominal_power_discharging
            } else {
                0.0
            },
            technical_efficiency: params.efficiency,
            efficiency_curve: params.efficiency_curve.clone(),
        })
    }

    /// Grid-side energy drawn for `action` over one step (kWh, negative on export).
    pub fn consumption(&self, action: f64, mode: SimulationMode, timestep_hours: f64) -> Result<f64, ModelError> {
        let (lo, hi) = mode.action_range();
        if !(action >= lo && action <= hi) {
            return Err(ModelError::ModeViolation { action, mode, lo, hi });
        }
        Ok(self.consumption_unchecked(action, timestep_hours))
    }

    pub(crate) fn consumption_unchecked(&self, action: f64, timestep_hours: f64) -> f64 {
        if action >= 0.0 {
            action * self.nominal_power_charging * timestep_hours
        } else {
            action * self.nominal_power_discharging * timestep_hours
        }
    }

    /// Efficiency applied to a given consumption.
    pub fn efficiency_at(&self, consumption: f64, timestep_hours: f64) -> f64 {
        match &self.efficiency_curve {
            None => self.technical_efficiency,
            Some(curve) => {
                let nominal = if consumption >= 0.0 {
                    self.nominal_power_charging
                } else {
                    self.nominal_power_discharging
                };
                let capacity = nominal * timestep_hours;
                let load = if capacity > 0.0 {
                    consumption.abs() / capacity
                } else {
                    0.0
                };
                curve.eval(load)
            }
        }
    }

    /// Energy delivered to the vehicle terminals: efficiency times consumption.
    pub fn supplied_energy(&self, consumption: f64, timestep_hours: f64) -> f64 {
        self.efficiency_at(consumption, timestep_hours) * consumption
    }
}

//! Physical models of the charger and the EV battery.

mod battery;
mod charger;
mod curve;

pub use battery::{BatteryParams, BatteryStep, DegradationParams, DodConvention, EnergyTransfer, EvBattery};
pub use charger::{Charger, ChargerId, ChargerParams};
pub use curve::{Curve, CurveError};

/// Errors raised by the charger and battery models.
#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("action {action} is outside the {mode} range [{lo}, {hi}]")]
    ModeViolation {
        action: f64,
        mode: crate::SimulationMode,
        lo: f64,
        hi: f64,
    },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("invalid charger id `{0}` (expected EVC_<building>_<charger>_<plug>)")]
    InvalidChargerId(String),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

pub(crate) fn check_fraction(name: &'static str, value: f64, lo_open: bool, hi_open: bool) -> Result<(), ModelError> {
    let lo_ok = if lo_open { value > 0.0 } else { value >= 0.0 };
    let hi_ok = if hi_open { value < 1.0 } else { value <= 1.0 };
    if value.is_finite() && lo_ok && hi_ok {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter {
            name,
            reason: format!(
                "{value} not in {}0, 1{}",
                if lo_open { "(" } else { "[" },
                if hi_open { ")" } else { "]" }
            ),
        })
    }
}

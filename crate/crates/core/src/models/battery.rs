use serde::{Deserialize, Serialize};

use super::{check_fraction, Curve, ModelError};

/// How `depth_of_discharge` maps onto the stored-energy floor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DodConvention {
    /// DoD is the usable fraction: floor = C0 * (1 - DoD).
    #[default]
    UsableFraction,
    /// DoD is itself the floor fraction: floor = C0 * DoD.
    FloorFraction,
}

/// Linear capacity fade with cumulative throughput.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegradationParams {
    /// Fractional capacity loss per full-capacity equivalent of throughput.
    #[serde(default)]
    pub rate: f64,
    /// Capacity never fades below this fraction of C0.
    #[serde(default = "default_min_capacity_fraction")]
    pub min_capacity_fraction: f64,
}

fn default_min_capacity_fraction() -> f64 {
    0.8
}

impl Default for DegradationParams {
    fn default() -> Self {
        Self {
            rate: 0.0,
            min_capacity_fraction: default_min_capacity_fraction(),
        }
    }
}

/// Battery parameters as they appear in a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryParams {
    /// C0 in kWh.
    pub capacity: f64,
    /// Nominal charge/discharge power in kW.
    pub nominal_power: f64,
    #[serde(default = "one")]
    pub round_trip_efficiency: f64,
    /// Per-step self-discharge fraction.
    #[serde(default)]
    pub thermal_loss: f64,
    #[serde(default = "default_dod")]
    pub depth_of_discharge: f64,
    #[serde(default)]
    pub dod_convention: DodConvention,
    /// `(SoC, fraction of nominal power)` breakpoints; defaults to 1 everywhere.
    #[serde(default = "default_power_curve")]
    pub power_curve: Curve,
    #[serde(default)]
    pub degradation: DegradationParams,
}

fn one() -> f64 {
    1.0
}

fn default_dod() -> f64 {
    0.9
}

fn default_power_curve() -> Curve {
    Curve::constant(1.0)
}

impl BatteryParams {
    pub fn new(capacity: f64, nominal_power: f64) -> Self {
        Self {
            capacity,
            nominal_power,
            round_trip_efficiency: 1.0,
            thermal_loss: 0.0,
            depth_of_discharge: default_dod(),
            dod_convention: DodConvention::default(),
            power_curve: default_power_curve(),
            degradation: DegradationParams::default(),
        }
    }
}

/// Outcome of one battery update, all energies in kWh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryStep {
    pub stored_before: f64,
    /// Stored energy after self-discharge, before any transfer.
    pub carried: f64,
    pub stored_after: f64,
    /// Energy at the battery terminals actually exchanged (signed like the request).
    pub accepted: f64,
    /// True when a power, capacity or floor limit cut the requested transfer.
    pub limited: bool,
}

impl BatteryStep {
    pub fn delta(&self) -> f64 {
        self.stored_after - self.stored_before
    }
}

/// Metered energy for one charger over one step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyTransfer {
    /// Grid-side energy drawn by the charger (negative on export).
    pub charger_consumption: f64,
    /// Energy delivered to the vehicle terminals.
    pub supplied_energy: f64,
    /// Realised change in stored energy.
    pub battery_delta: f64,
}

/// EV battery energy storage state.
#[derive(Debug, Clone, PartialEq)]
pub struct EvBattery {
    capacity_initial: f64,
    capacity_current: f64,
    nominal_power: f64,
    power_curve: Curve,
    round_trip_efficiency: f64,
    thermal_loss: f64,
    depth_of_discharge: f64,
    dod_convention: DodConvention,
    degradation: DegradationParams,
    stored_energy: f64,
    cumulative_throughput: f64,
}

impl EvBattery {
    /// Creates a battery at `initial_soc`, clamped into the admissible band.
    pub fn new(params: &BatteryParams, initial_soc: f64) -> Result<Self, ModelError> {
        if !(params.capacity.is_finite() && params.capacity > 0.0) {
            return Err(ModelError::InvalidParameter {
                name: "capacity",
                reason: format!("{} is not a positive energy", params.capacity),
            });
        }
        if !(params.nominal_power.is_finite() && params.nominal_power > 0.0) {
            return Err(ModelError::InvalidParameter {
                name: "nominal_power",
                reason: format!("{} is not a positive power", params.nominal_power),
            });
        }
        check_fraction("round_trip_efficiency", params.round_trip_efficiency, true, false)?;
        check_fraction("thermal_loss", params.thermal_loss, false, true)?;
        check_fraction("depth_of_discharge", params.depth_of_discharge, true, false)?;
        check_fraction("initial_soc", initial_soc, false, false)?;
        params.power_curve.check_domain(0.0, 1.0, 0.0, 1.0)?;
        let deg = params.degradation;
        if !(deg.rate.is_finite() && deg.rate >= 0.0) {
            return Err(ModelError::InvalidParameter {
                name: "degradation.rate",
                reason: format!("{} is negative", deg.rate),
            });
        }
        check_fraction(
            "degradation.min_capacity_fraction",
            deg.min_capacity_fraction,
            true,
            false,
        )?;

        let mut battery = Self {
            capacity_initial: params.capacity,
            capacity_current: params.capacity,
            nominal_power: params.nominal_power,
            power_curve: params.power_curve.clone(),
            round_trip_efficiency: params.round_trip_efficiency,
            thermal_loss: params.thermal_loss,
            depth_of_discharge: params.depth_of_discharge,
            dod_convention: params.dod_convention,
            degradation: deg,
            stored_energy: 0.0,
            cumulative_throughput: 0.0,
        };
        if battery.floor_energy() > params.capacity * deg.min_capacity_fraction {
            return Err(ModelError::InvalidParameter {
                name: "degradation.min_capacity_fraction",
                reason: "capacity could fade below the depth-of-discharge floor".into(),
            });
        }
        battery.set_soc(initial_soc);
        Ok(battery)
    }

    pub fn capacity_initial(&self) -> f64 {
        self.capacity_initial
    }

    pub fn capacity_current(&self) -> f64 {
        self.capacity_current
    }

    pub fn nominal_power(&self) -> f64 {
        self.nominal_power
    }

    pub fn round_trip_efficiency(&self) -> f64 {
        self.round_trip_efficiency
    }

    pub fn thermal_loss(&self) -> f64 {
        self.thermal_loss
    }

    pub fn stored_energy(&self) -> f64 {
        self.stored_energy
    }

    pub fn cumulative_throughput(&self) -> f64 {
        self.cumulative_throughput
    }

    /// Lowest stored energy the battery management allows.
    pub fn floor_energy(&self) -> f64 {
        match self.dod_convention {
            DodConvention::UsableFraction => self.capacity_initial * (1.0 - self.depth_of_discharge),
            DodConvention::FloorFraction => self.capacity_initial * self.depth_of_discharge,
        }
    }

    pub fn floor_soc(&self) -> f64 {
        self.floor_energy() / self.capacity_initial
    }

    /// State of charge relative to the initial capacity.
    pub fn soc(&self) -> f64 {
        self.stored_energy / self.capacity_initial
    }

    /// Power available at the current SoC, in kW.
    pub fn max_power(&self) -> f64 {
        self.nominal_power * self.power_curve.eval(self.soc())
    }

    /// Capacity implied by the throughput accumulated so far.
    pub fn degrade_capacity(&self) -> f64 {
        let c0 = self.capacity_initial;
        let fade = self.degradation.rate * self.cumulative_throughput / c0;
        c0 * (1.0 - fade).max(self.degradation.min_capacity_fraction)
    }

    /// Overwrites the state of charge, clamped into `[floor, C_t]`.
    pub fn set_soc(&mut self, soc: f64) {
        let target = soc * self.capacity_initial;
        self.stored_energy = target.min(self.capacity_current).max(self.floor_energy());
    }

    /// Applies one step with `supplied` kWh at the terminals (sign selects charge/discharge).
    pub fn update(&mut self, supplied: f64, timestep_hours: f64) -> BatteryStep {
        if supplied >= 0.0 {
            self.charge(supplied, timestep_hours)
        } else {
            self.discharge(supplied, timestep_hours)
        }
    }

    /// Self-discharge only.
    pub fn idle(&mut self, timestep_hours: f64) -> BatteryStep {
        self.charge(0.0, timestep_hours)
    }

    pub fn charge(&mut self, supplied: f64, timestep_hours: f64) -> BatteryStep {
        debug_assert!(supplied >= 0.0);
        let (capacity, limit, carried) = self.begin_step(timestep_hours);
        let intake = supplied.min(limit);
        let expected = carried + intake * self.round_trip_efficiency;
        let stored_after = capacity.min(expected);
        let limited = intake < supplied || stored_after < expected;
        let accepted = if limited {
            (stored_after - carried) / self.round_trip_efficiency
        } else {
            supplied
        };
        self.finish_step(carried, stored_after, accepted, limited)
    }

    pub fn discharge(&mut self, supplied: f64, timestep_hours: f64) -> BatteryStep {
        debug_assert!(supplied <= 0.0);
        let (_, limit, carried) = self.begin_step(timestep_hours);
        let output = supplied.max(-limit);
        let expected = carried + output / self.round_trip_efficiency;
        let floor = self.floor_energy().min(carried);
        let stored_after = floor.max(expected);
        let limited = output > supplied || stored_after > expected;
        let accepted = if limited {
            (stored_after - carried) * self.round_trip_efficiency
        } else {
            supplied
        };
        self.finish_step(carried, stored_after, accepted, limited)
    }

    /// Returns (C_t, power limit in kWh for the step, energy carried over after self-discharge).
    fn begin_step(&mut self, timestep_hours: f64) -> (f64, f64, f64) {
        let capacity = self.degrade_capacity();
        let limit = self.max_power() * timestep_hours;
        let previous = self.stored_energy;
        // self-discharge stops at the DoD floor
        let decayed = (previous * (1.0 - self.thermal_loss)).max(previous.min(self.floor_energy()));
        (capacity, limit, decayed.min(capacity))
    }

    fn finish_step(&mut self, carried: f64, stored_after: f64, accepted: f64, limited: bool) -> BatteryStep {
        let stored_before = self.stored_energy;
        self.capacity_current = self.degrade_capacity();
        self.stored_energy = stored_after;
        self.cumulative_throughput += (stored_after - carried).abs();
        BatteryStep {
            stored_before,
            carried,
            stored_after,
            accepted,
            limited,
        }
    }
}

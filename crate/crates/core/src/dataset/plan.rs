use chrono::NaiveDateTime;
use serde::Deserialize;

use super::{derive_seed, generate, DatasetError, EvScheduleRow, GeneratorParams};
use crate::calendar;

/// A batch of vehicles to generate, as read from a parameters file.
///
/// Each vehicle entry holds an `id` plus any [`GeneratorParams`] fields;
/// unset fields take the defaults of the vehicle's `mode`. Unless a vehicle
/// sets its own `seed`, it gets one derived from the plan seed and its position.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationPlan {
    #[serde(default)]
    pub seed: u64,
    pub days: usize,
    #[serde(default = "one")]
    pub timestep_hours: f64,
    #[serde(default = "calendar::default_start", with = "calendar::serde_start")]
    pub calendar_start: NaiveDateTime,
    #[serde(default)]
    pub vehicles: Vec<PlannedVehicle>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
pub struct PlannedVehicle {
    pub id: String,
    #[serde(flatten)]
    pub params: serde_json::Map<String, serde_json::Value>,
}

impl GenerationPlan {
    pub fn from_json_str(text: &str) -> Result<Self, DatasetError> {
        serde_json::from_str(text).map_err(|e| DatasetError::Config(e.to_string()))
    }

    pub fn horizon_steps(&self) -> Result<usize, DatasetError> {
        if self.days == 0 {
            return Err(DatasetError::Config("days must be at least 1".into()));
        }
        let spd = calendar::steps_per_day(self.timestep_hours).ok_or_else(|| {
            DatasetError::Config(format!("timestep_hours {} does not divide a day", self.timestep_hours))
        })?;
        Ok(self.days * spd)
    }

    /// Fully resolved parameters per vehicle, in plan order.
    pub fn params(&self) -> Result<Vec<(String, GeneratorParams)>, DatasetError> {
        self.vehicles
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let mut obj = v.params.clone();
                obj.entry("seed")
                    .or_insert_with(|| derive_seed(self.seed, i as u64).into());
                obj.insert("timestep_hours".into(), self.timestep_hours.into());
                obj.insert(
                    "calendar_start".into(),
                    self.calendar_start.format("%Y-%m-%dT%H:%M:%S").to_string().into(),
                );
                let p = GeneratorParams::from_json(obj.into())
                    .map_err(|e| DatasetError::Config(format!("vehicle {}: {e}", v.id)))?;
                p.validate()
                    .map_err(|e| DatasetError::Config(format!("vehicle {}: {e}", v.id)))?;
                Ok((v.id.clone(), p))
            })
            .collect()
    }

    pub fn generate(&self) -> Result<Vec<(String, GeneratorParams, Vec<EvScheduleRow>)>, DatasetError> {
        let horizon = self.horizon_steps()?;
        self.params()?
            .into_iter()
            .map(|(id, p)| {
                let rows = generate(&p, horizon)?;
                Ok((id, p, rows))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_resolves_modes_and_seeds() {
        let plan = GenerationPlan::from_json_str(
            r#"{"seed": 5, "days": 7, "vehicles": [
                {"id": "EV_1", "mode": "household", "charger_ids": ["EVC_2_1_1"]},
                {"id": "EV_2", "mode": "workplace", "charger_ids": ["EVC_1_1_1"], "seed": 99}
            ]}"#,
        )
        .unwrap();
        let params = plan.params().unwrap();
        assert_eq!(params[0].1.seed, derive_seed(5, 0));
        assert_eq!(params[1].1.seed, 99);
        assert_eq!(params[1].1.arrival_mean, 9.0);
        let out = plan.generate().unwrap();
        assert_eq!(out[0].2.len(), 168);
    }

    #[test]
    fn empty_plan_generates_nothing() {
        let plan = GenerationPlan::from_json_str(r#"{"days": 1}"#).unwrap();
        assert!(plan.generate().unwrap().is_empty());
    }

    #[test]
    fn bad_probability_is_reported() {
        let plan = GenerationPlan::from_json_str(
            r#"{"days": 1, "vehicles": [{"id": "EV_1", "mode": "household", "charger_ids": ["EVC_1_1_1"], "routine_break_probability": 2.0}]}"#,
        )
        .unwrap();
        assert!(plan.generate().is_err());
    }
}

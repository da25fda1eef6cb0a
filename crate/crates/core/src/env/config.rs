//! Scenario file loading.
//!
//! A scenario is a JSON document naming buildings (each with a load/PV series
//! and nested chargers), electric vehicles (each with a nested battery and a
//! schedule file), and district price and carbon-intensity series. Relative
//! paths resolve against the scenario file's directory.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::reward::RewardWeights;
use crate::calendar;
use crate::dataset::{self, DatasetError, EvScheduleRow};
use crate::models::{BatteryParams, Charger, ChargerId, ChargerParams, EvBattery, ModelError};
use crate::SimulationMode;

pub const LOAD_COLUMN: &str = "non_shiftable_load";
pub const PV_COLUMN: &str = "solar_generation";
pub const PRICE_COLUMN: &str = "electricity_pricing";
pub const CARBON_COLUMN: &str = "carbon_intensity";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("series {path}: {reason}")]
    Series { path: String, reason: String },
    #[error("series `{name}` has {len} rows, shorter than the horizon of {horizon} steps")]
    SeriesTooShort { name: String, len: usize, horizon: usize },
    #[error("vehicle {ev} references charger {charger} which no building defines")]
    DanglingCharger { ev: String, charger: ChargerId },
    #[error("charger {0} is defined more than once")]
    DuplicateCharger(ChargerId),
    #[error("{context}: {source}")]
    Model {
        context: String,
        #[source]
        source: ModelError,
    },
    #[error("vehicle {ev} schedule: {source}")]
    Schedule {
        ev: String,
        #[source]
        source: DatasetError,
    },
    #[error("{0}")]
    Invalid(String),
}

/// Price-rule controller settings; thresholds default to price-series quartiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RbcSettings {
    #[serde(default)]
    pub low_price: Option<f64>,
    #[serde(default)]
    pub high_price: Option<f64>,
    #[serde(default = "default_reserve")]
    pub reserve_soc: f64,
}

fn default_reserve() -> f64 {
    0.2
}

impl Default for RbcSettings {
    fn default() -> Self {
        Self {
            low_price: None,
            high_price: None,
            reserve_soc: default_reserve(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub mode: SimulationMode,
    #[serde(default = "one")]
    pub timestep_hours: f64,
    #[serde(default)]
    pub horizon_steps: Option<usize>,
    #[serde(default = "calendar::default_start", with = "calendar::serde_start")]
    pub calendar_start: NaiveDateTime,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_noise")]
    pub arrival_soc_noise_std: f64,
    pub pricing: PathBuf,
    pub carbon_intensity: PathBuf,
    #[serde(default)]
    pub reward: RewardWeights,
    #[serde(default)]
    pub rbc: RbcSettings,
    pub buildings: IndexMap<String, BuildingFile>,
    #[serde(default)]
    pub electric_vehicles: IndexMap<String, VehicleFile>,
}

fn one() -> f64 {
    1.0
}

fn default_noise() -> f64 {
    0.05
}

fn default_initial_soc() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildingFile {
    pub energy_simulation: PathBuf,
    #[serde(default)]
    pub chargers: IndexMap<ChargerId, ChargerParams>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleFile {
    pub energy_simulation: PathBuf,
    #[serde(default = "default_initial_soc")]
    pub initial_soc: f64,
    pub battery: BatteryParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildingSpec {
    pub name: String,
    pub load: Vec<f64>,
    pub pv: Vec<f64>,
    pub chargers: Vec<(ChargerId, ChargerParams)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleSpec {
    pub name: String,
    pub battery: BatteryParams,
    pub initial_soc: f64,
    pub schedule: Vec<EvScheduleRow>,
}

/// A fully resolved and validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub mode: SimulationMode,
    pub timestep_hours: f64,
    pub horizon_steps: usize,
    pub calendar_start: NaiveDateTime,
    pub seed: u64,
    pub arrival_soc_noise_std: f64,
    pub buildings: Vec<BuildingSpec>,
    pub vehicles: Vec<VehicleSpec>,
    pub price: Vec<f64>,
    pub carbon: Vec<f64>,
    pub reward: RewardWeights,
    pub rbc: RbcSettings,
}

impl Scenario {
    pub fn charger_ids(&self) -> impl Iterator<Item = ChargerId> + '_ {
        self.buildings.iter().flat_map(|b| b.chargers.iter().map(|(id, _)| *id))
    }

    /// Copy with a different mode and/or horizon, revalidated.
    pub fn with_overrides(&self, mode: Option<SimulationMode>, horizon: Option<usize>) -> Result<Self, ConfigError> {
        let mut s = self.clone();
        if let Some(m) = mode {
            s.mode = m;
        }
        if let Some(h) = horizon {
            s.horizon_steps = h;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if calendar::steps_per_day(self.timestep_hours).is_none() {
            return Err(ConfigError::Invalid(format!(
                "timestep_hours {} must be positive and divide a day",
                self.timestep_hours
            )));
        }
        if self.horizon_steps == 0 {
            return Err(ConfigError::Invalid("horizon must be at least one step".into()));
        }
        if !(self.arrival_soc_noise_std.is_finite() && self.arrival_soc_noise_std >= 0.0) {
            return Err(ConfigError::Invalid(
                "arrival_soc_noise_std must be non-negative".into(),
            ));
        }
        if !self.reward.is_finite() {
            return Err(ConfigError::Invalid("reward weights must be finite".into()));
        }
        if let (Some(lo), Some(hi)) = (self.rbc.low_price, self.rbc.high_price) {
            if lo > hi {
                return Err(ConfigError::Invalid(format!(
                    "rbc low_price {lo} exceeds high_price {hi}"
                )));
            }
        }

        let mut seen = HashSet::new();
        for b in &self.buildings {
            for (id, params) in &b.chargers {
                if !seen.insert(*id) {
                    return Err(ConfigError::DuplicateCharger(*id));
                }
                Charger::new(*id, params, self.mode).map_err(|source| ConfigError::Model {
                    context: format!("charger {id}"),
                    source,
                })?;
            }
        }
        for v in &self.vehicles {
            EvBattery::new(&v.battery, v.initial_soc).map_err(|source| ConfigError::Model {
                context: format!("vehicle {} battery", v.name),
                source,
            })?;
            if let Some(id) = v
                .schedule
                .iter()
                .filter_map(|r| r.charger_id)
                .find(|id| !seen.contains(id))
            {
                return Err(ConfigError::DanglingCharger {
                    ev: v.name.clone(),
                    charger: id,
                });
            }
        }

        let h = self.horizon_steps;
        let mut series: Vec<(String, usize)> = vec![
            ("pricing".into(), self.price.len()),
            ("carbon_intensity".into(), self.carbon.len()),
        ];
        for b in &self.buildings {
            series.push((format!("{} load", b.name), b.load.len()));
            series.push((format!("{} pv", b.name), b.pv.len()));
        }
        for v in &self.vehicles {
            series.push((format!("{} schedule", v.name), v.schedule.len()));
        }
        if let Some((name, len)) = series.into_iter().find(|(_, len)| *len < h) {
            return Err(ConfigError::SeriesTooShort { name, len, horizon: h });
        }
        Ok(())
    }
}

/// Reads named numeric columns from a CSV file.
pub fn read_series(path: &Path, columns: &[&str]) -> Result<Vec<Vec<f64>>, ConfigError> {
    let err = |reason: String| ConfigError::Series {
        path: path.display().to_string(),
        reason,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| err(e.to_string()))?.clone();
    let idx: Vec<usize> = columns
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h.trim() == *c)
                .ok_or_else(|| err(format!("missing column `{c}`")))
        })
        .collect::<Result<_, _>>()?;
    let mut out = vec![Vec::new(); columns.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        for (k, &i) in idx.iter().enumerate() {
            let raw = rec.get(i).unwrap_or("").trim();
            let v: f64 = raw.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                err(format!(
                    "row {}: `{raw}` in `{}` is not a finite number",
                    row + 1,
                    columns[k]
                ))
            })?;
            out[k].push(v);
        }
    }
    Ok(out)
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Loads and validates a scenario from a schema file, or from `schema.json` inside a directory.
pub fn load_config(path: &Path) -> Result<Scenario, ConfigError> {
    let schema;
    let path = if path.is_dir() {
        schema = path.join("schema.json");
        schema.as_path()
    } else {
        path
    };
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file: ScenarioFile = serde_json::from_str(&text).map_err(|source| ConfigError::Json {
        path: path.display().to_string(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    resolve_scenario(file, base)
}

/// Resolves series and schedule paths of a parsed scenario file against `base`.
pub fn resolve_scenario(file: ScenarioFile, base: &Path) -> Result<Scenario, ConfigError> {
    let mut cache: HashMap<PathBuf, Vec<Vec<f64>>> = HashMap::new();
    let mut column = |p: &Path, cols: &[&str]| -> Result<Vec<Vec<f64>>, ConfigError> {
        let full = resolve(base, p);
        if let Some(v) = cache.get(&full) {
            return Ok(v.clone());
        }
        let v = read_series(&full, cols)?;
        cache.insert(full, v.clone());
        Ok(v)
    };

    let price = column(&file.pricing, &[PRICE_COLUMN])?.remove(0);
    let carbon = column(&file.carbon_intensity, &[CARBON_COLUMN])?.remove(0);
    let mut buildings = Vec::with_capacity(file.buildings.len());
    for (name, b) in file.buildings {
        let mut cols = column(&b.energy_simulation, &[LOAD_COLUMN, PV_COLUMN])?;
        let pv = cols.pop().expect("two columns");
        let load = cols.pop().expect("two columns");
        buildings.push(BuildingSpec {
            name,
            load,
            pv,
            chargers: b.chargers.into_iter().collect(),
        });
    }
    let mut vehicles = Vec::with_capacity(file.electric_vehicles.len());
    for (name, v) in file.electric_vehicles {
        let schedule =
            dataset::read_schedule(&resolve(base, &v.energy_simulation)).map_err(|source| ConfigError::Schedule {
                ev: name.clone(),
                source,
            })?;
        vehicles.push(VehicleSpec {
            name,
            battery: v.battery,
            initial_soc: v.initial_soc,
            schedule,
        });
    }

    let shortest = std::iter::once(price.len())
        .chain(std::iter::once(carbon.len()))
        .chain(buildings.iter().flat_map(|b| [b.load.len(), b.pv.len()]))
        .chain(vehicles.iter().map(|v| v.schedule.len()))
        .min()
        .unwrap_or(0);
    let scenario = Scenario {
        mode: file.mode,
        timestep_hours: file.timestep_hours,
        horizon_steps: file.horizon_steps.unwrap_or(shortest),
        calendar_start: file.calendar_start,
        seed: file.seed,
        arrival_soc_noise_std: file.arrival_soc_noise_std,
        buildings,
        vehicles,
        price,
        carbon,
        reward: file.reward,
        rbc: file.rbc,
    };
    scenario.validate()?;
    Ok(scenario)
}

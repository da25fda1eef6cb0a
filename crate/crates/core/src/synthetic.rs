//! Synthetic districts: building load/PV, a three-tier tariff and generated EV schedules.
//!
//! When there are commuters, building 1 is an office whose plugs serve them;
//! every other building is a home with one charger for one household vehicle.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDateTime, Timelike};
use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calendar::{self, Calendar};
use crate::dataset::{self, derive_seed, generate, schedule_file_name, GeneratorParams};
use crate::env::{
    BuildingFile, BuildingSpec, ConfigError, RbcSettings, RewardWeights, Scenario, ScenarioFile, VehicleFile,
    VehicleSpec, CARBON_COLUMN, LOAD_COLUMN, PRICE_COLUMN, PV_COLUMN,
};
use crate::models::{BatteryParams, ChargerId, ChargerParams};
use crate::SimulationMode;

/// Tariff tiers (currency/kWh): night 23:00-07:00, day, evening 17:00-23:00.
pub const NIGHT_PRICE: f64 = 0.08;
pub const DAY_PRICE: f64 = 0.15;
pub const EVENING_PRICE: f64 = 0.30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistrictSpec {
    pub mode: SimulationMode,
    pub days: usize,
    /// Homes, each with one charger and one vehicle.
    pub homes: usize,
    /// Commuters charging at the office (two plugs per charger).
    pub commuters: usize,
    pub seed: u64,
    #[serde(with = "calendar::serde_start")]
    pub calendar_start: NaiveDateTime,
    /// Peak PV output per home (kW).
    pub pv_peak: f64,
    /// Household load during 17:00-23:00 (kW); the rest of the day follows a fixed shape.
    pub home_evening_load: f64,
    pub home_charger_power: f64,
    pub office_charger_power: f64,
    pub battery_capacity: f64,
}

impl Default for DistrictSpec {
    fn default() -> Self {
        Self {
            mode: SimulationMode::V2g,
            days: 14,
            homes: 8,
            commuters: 4,
            seed: 1,
            calendar_start: calendar::default_start(),
            pv_peak: 2.0,
            home_evening_load: 3.5,
            home_charger_power: 3.7,
            office_charger_power: 11.0,
            battery_capacity: 40.0,
        }
    }
}

pub fn tariff(hour_of_day: u32) -> f64 {
    match hour_of_day {
        0..=6 | 23 => NIGHT_PRICE,
        17..=22 => EVENING_PRICE,
        _ => DAY_PRICE,
    }
}

fn carbon(hour_of_day: u32, day_of_year: u32) -> f64 {
    let seasonal = 0.05 * (std::f64::consts::TAU * f64::from(day_of_year) / 365.0).cos();
    let daily = match hour_of_day {
        0..=6 | 23 => 0.25,
        17..=22 => 0.45,
        _ => 0.35,
    };
    daily + seasonal
}

/// Solar output as a fraction of peak.
fn solar_shape(hour: f64, day_of_year: u32) -> f64 {
    let season = 0.5 - 0.5 * (std::f64::consts::TAU * (f64::from(day_of_year) + 10.0) / 365.0).cos();
    let half_width = 5.0 + 2.5 * season;
    let x = (hour - 13.0) / half_width;
    if x.abs() >= 1.0 {
        0.0
    } else {
        (0.4 + 0.6 * season) * (std::f64::consts::FRAC_PI_2 * x).cos()
    }
}

fn home_load(hour: u32, weekend: bool, evening: f64) -> f64 {
    match hour {
        0..=5 => 0.4,
        6..=8 => 1.2,
        9..=16 if weekend => 1.0,
        9..=16 => 0.6,
        17..=22 => evening,
        _ => 1.0,
    }
}

fn office_load(hour: u32, weekend: bool) -> f64 {
    match hour {
        8..=17 if !weekend => 9.0,
        7 | 18 if !weekend => 5.0,
        _ => 2.0,
    }
}

/// Builds the district in memory.
pub fn build_district(spec: &DistrictSpec) -> Result<Scenario, ConfigError> {
    let spd = 24;
    let dt = 1.0;
    let horizon = spec.days * spd;
    let cal = Calendar::new(spec.calendar_start, dt);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let times: Vec<NaiveDateTime> = (0..horizon).map(|t| cal.datetime(t)).collect();
    let price: Vec<f64> = times.iter().map(|d| tariff(d.hour())).collect();
    let carbon_series: Vec<f64> = times.iter().map(|d| carbon(d.hour(), d.ordinal())).collect();

    let office_plugs: Vec<ChargerId> = (0..spec.commuters)
        .map(|i| ChargerId {
            building: 1,
            charger: (i / 2 + 1) as u32,
            plug: (i % 2 + 1) as u32,
        })
        .collect();

    let mut buildings = Vec::new();
    let first_home = if spec.commuters > 0 { 2 } else { 1 };
    let office_load_series: Vec<f64> = times
        .iter()
        .enumerate()
        .map(|(t, _)| office_load(times[t].hour(), cal.is_weekend(t)) * rng.random_range(0.9..1.1))
        .collect();
    let office = BuildingSpec {
        name: "Building_1".into(),
        load: office_load_series,
        pv: times
            .iter()
            .map(|d| 3.0 * spec.pv_peak * solar_shape(f64::from(d.hour()) + 0.5, d.ordinal()))
            .collect(),
        chargers: office_plugs
            .iter()
            .map(|id| {
                (
                    *id,
                    ChargerParams {
                        nominal_power_charging: spec.office_charger_power,
                        nominal_power_discharging: spec.office_charger_power,
                        efficiency: 0.95,
                        efficiency_curve: None,
                    },
                )
            })
            .collect(),
    };
    if spec.commuters > 0 {
        buildings.push(office);
    }
    for h in 0..spec.homes {
        let scale = rng.random_range(0.8..1.2);
        let load = (0..horizon)
            .map(|t| {
                scale
                    * home_load(times[t].hour(), cal.is_weekend(t), spec.home_evening_load)
                    * rng.random_range(0.85..1.15)
            })
            .collect();
        let pv = times
            .iter()
            .map(|d| spec.pv_peak * solar_shape(f64::from(d.hour()) + 0.5, d.ordinal()))
            .collect();
        let b = (h + first_home) as u32;
        buildings.push(BuildingSpec {
            name: format!("Building_{b}"),
            load,
            pv,
            chargers: vec![(
                ChargerId {
                    building: b,
                    charger: 1,
                    plug: 1,
                },
                ChargerParams {
                    nominal_power_charging: spec.home_charger_power,
                    nominal_power_discharging: spec.home_charger_power,
                    efficiency: 0.95,
                    efficiency_curve: None,
                },
            )],
        });
    }

    let mut vehicles = Vec::new();
    let total = spec.homes + spec.commuters;
    for i in 0..total {
        let seed = derive_seed(spec.seed, i as u64);
        let mut params = if i < spec.homes {
            GeneratorParams::household(buildings[i + first_home - 1].chargers[0].0, seed)
        } else {
            GeneratorParams::workplace(vec![office_plugs[i - spec.homes]], seed)
        };
        params.calendar_start = spec.calendar_start;
        params.timestep_hours = dt;
        let schedule = generate(&params, horizon).map_err(|source| ConfigError::Schedule {
            ev: format!("EV_{}", i + 1),
            source,
        })?;
        let mut battery = BatteryParams::new(spec.battery_capacity, 50.0);
        battery.round_trip_efficiency = 0.95;
        vehicles.push(VehicleSpec {
            name: format!("EV_{}", i + 1),
            battery,
            initial_soc: params.initial_soc,
            schedule,
        });
    }

    let scenario = Scenario {
        mode: spec.mode,
        timestep_hours: dt,
        horizon_steps: horizon,
        calendar_start: spec.calendar_start,
        seed: spec.seed,
        arrival_soc_noise_std: 0.05,
        buildings,
        vehicles,
        price,
        carbon: carbon_series,
        reward: RewardWeights::default(),
        rbc: RbcSettings::default(),
    };
    scenario.validate()?;
    Ok(scenario)
}

fn io_err(path: &Path, source: std::io::Error) -> ConfigError {
    ConfigError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_columns(path: &Path, names: &[&str], columns: &[&[f64]]) -> Result<(), ConfigError> {
    let mut out = std::io::BufWriter::new(fs::File::create(path).map_err(|e| io_err(path, e))?);
    let n = columns.iter().map(|c| c.len()).min().unwrap_or(0);
    let mut text = names.join(",");
    text.push('\n');
    for i in 0..n {
        let row: Vec<String> = columns.iter().map(|c| format!("{:.6}", c[i])).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    out.write_all(text.as_bytes()).map_err(|e| io_err(path, e))?;
    out.flush().map_err(|e| io_err(path, e))
}

/// Writes a scenario as `schema.json` plus its CSV inputs into `dir`; returns the schema path.
///
/// Series are written with six decimals, so a scenario loaded back matches to that precision.
pub fn write_scenario(dir: &Path, scenario: &Scenario) -> Result<PathBuf, ConfigError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write_columns(&dir.join("pricing.csv"), &[PRICE_COLUMN], &[&scenario.price])?;
    write_columns(&dir.join("carbon_intensity.csv"), &[CARBON_COLUMN], &[&scenario.carbon])?;

    let mut buildings = IndexMap::new();
    for b in &scenario.buildings {
        let file = format!("{}.csv", b.name);
        write_columns(&dir.join(&file), &[LOAD_COLUMN, PV_COLUMN], &[&b.load, &b.pv])?;
        buildings.insert(
            b.name.clone(),
            BuildingFile {
                energy_simulation: file.into(),
                chargers: b.chargers.iter().cloned().collect(),
            },
        );
    }
    let mut electric_vehicles = IndexMap::new();
    for v in &scenario.vehicles {
        let file = schedule_file_name(&v.name);
        dataset::write_schedule_file(&dir.join(&file), &v.schedule).map_err(|source| ConfigError::Schedule {
            ev: v.name.clone(),
            source,
        })?;
        electric_vehicles.insert(
            v.name.clone(),
            VehicleFile {
                energy_simulation: file.into(),
                initial_soc: v.initial_soc,
                battery: v.battery.clone(),
            },
        );
    }

    let file = ScenarioFile {
        mode: scenario.mode,
        timestep_hours: scenario.timestep_hours,
        horizon_steps: Some(scenario.horizon_steps),
        calendar_start: scenario.calendar_start,
        seed: scenario.seed,
        arrival_soc_noise_std: scenario.arrival_soc_noise_std,
        pricing: "pricing.csv".into(),
        carbon_intensity: "carbon_intensity.csv".into(),
        reward: scenario.reward,
        rbc: scenario.rbc,
        buildings,
        electric_vehicles,
    };
    let path = dir.join("schema.json");
    let mut text = serde_json::to_string_pretty(&file).expect("scenario serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

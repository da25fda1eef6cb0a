//! Independent reference implementations and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use evflex_core::dataset::{EvScheduleRow, EvState};
use evflex_core::env::{ChargerObservation, ChargerState, EnvOptions, Environment, Scenario, StepResult};
use evflex_core::models::ChargerId;

pub fn repo_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

/// Piecewise-linear interpolation, held flat outside the breakpoints.
pub fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    if x <= points[0].0 {
        return points[0].1;
    }
    for w in points.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x < x1 {
            return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
        }
    }
    points[points.len() - 1].1
}

/// Straightforward re-statement of the storage update rules.
#[derive(Debug, Clone)]
pub struct OracleBattery {
    pub c0: f64,
    pub p_nom: f64,
    pub curve: Vec<(f64, f64)>,
    pub eta: f64,
    pub theta: f64,
    pub floor: f64,
    pub fade_rate: f64,
    pub min_fraction: f64,
    pub stored: f64,
    pub throughput: f64,
}

impl OracleBattery {
    pub fn step(&mut self, supplied: f64, dt: f64) -> f64 {
        let capacity = self.c0 * f64::max(self.min_fraction, 1.0 - self.fade_rate * self.throughput / self.c0);
        let limit = self.p_nom * interpolate(&self.curve, self.stored / self.c0) * dt;
        let mut carried = self.stored * (1.0 - self.theta);
        let lowest = f64::min(self.stored, self.floor);
        if carried < lowest {
            carried = lowest;
        }
        if carried > capacity {
            carried = capacity;
        }
        let next = if supplied >= 0.0 {
            let intake = if supplied < limit { supplied } else { limit };
            f64::min(capacity, carried + intake * self.eta)
        } else {
            let output = if supplied > -limit { supplied } else { -limit };
            f64::max(f64::min(self.floor, carried), carried + output / self.eta)
        };
        self.throughput += (next - carried).abs();
        self.stored = next;
        next
    }
}

/// Energy at the vehicle terminals for `action` on a charger.
pub fn oracle_supplied(
    action: f64,
    p_charge: f64,
    p_discharge: f64,
    efficiency: f64,
    curve: Option<&[(f64, f64)]>,
    dt: f64,
) -> f64 {
    let nominal = if action >= 0.0 { p_charge } else { p_discharge };
    let consumption = action * nominal * dt;
    let eta = match curve {
        None => efficiency,
        Some(points) => {
            let load = if nominal > 0.0 {
                consumption.abs() / (nominal * dt)
            } else {
                0.0
            };
            interpolate(points, load)
        }
    };
    eta * consumption
}

/// Brute-force KPI values in table order.
pub fn oracle_kpis(
    net: &[f64],
    price: &[f64],
    carbon: &[f64],
    demand: &[f64],
    months: &[u8],
    steps_per_day: usize,
) -> [f64; 7] {
    let n = net.len();
    let mut d = 0.0;
    let mut c = 0.0;
    let mut g = 0.0;
    let mut total_demand = 0.0;
    for i in 0..n {
        let import = if net[i] > 0.0 { net[i] } else { 0.0 };
        d += import;
        c += import * price[i];
        g += import * carbon[i];
        total_demand += demand[i];
    }
    let z = if total_demand > 0.0 { d / total_demand } else { 0.0 };

    let mut peak_sum = 0.0;
    let mut days = 0;
    let mut i = 0;
    while i < n {
        let mut peak = net[i];
        let mut j = i;
        while j < n && j < i + steps_per_day {
            if net[j] > peak {
                peak = net[j];
            }
            j += 1;
        }
        peak_sum += peak;
        days += 1;
        i = j;
    }
    let p = peak_sum / days as f64;

    let mut r = 0.0;
    for i in 1..n {
        r += (net[i] - net[i - 1]).abs();
    }

    let mut lf_sum = 0.0;
    let mut lf_count = 0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        let mut sum = 0.0;
        let mut peak = f64::NEG_INFINITY;
        while j < n && months[j] == months[i] {
            sum += net[j];
            if net[j] > peak {
                peak = net[j];
            }
            j += 1;
        }
        if peak > 0.0 {
            lf_sum += 1.0 - (sum / (j - i) as f64) / peak;
            lf_count += 1;
        }
        i = j;
    }
    let l = if lf_count == 0 { 0.0 } else { lf_sum / lf_count as f64 };
    [d, c, g, z, p, r, l]
}

/// Sentinel rules for one observation vector.
pub fn sentinel_ok(o: &ChargerObservation) -> bool {
    let v = o.to_vector();
    match o.state {
        ChargerState::Empty => v[1..].iter().all(|&x| x == -1.0),
        ChargerState::Connected => (0.0..=1.0).contains(&v[1]) && v[4] == -1.0 && v[5] == -1.0,
        ChargerState::Incoming => v[1] == -1.0 && v[2] == -1.0 && v[3] == -1.0,
    }
}

/// Re-checks one step: metering identity, power within slice, SoC band and sentinels.
/// Returns a description of every failure.
pub fn check_step(env: &Environment, t: usize, result: &StepResult) -> Vec<String> {
    let mut bad = Vec::new();
    let scenario = env.scenario();
    let dt = scenario.timestep_hours;
    let buildings = env.charger_buildings();
    for (b, spec) in scenario.buildings.iter().enumerate() {
        let mut expected = spec.load[t] - spec.pv[t];
        for (c, step) in result.chargers.iter().enumerate() {
            if buildings[c] == b {
                expected += step.transfer.charger_consumption;
            }
        }
        if (expected - result.net_electricity[b]).abs() > 1e-9 {
            bad.push(format!(
                "t={t} building {b}: net {} != {expected}",
                result.net_electricity[b]
            ));
        }
    }
    for (c, step) in result.chargers.iter().enumerate() {
        let power = step.transfer.charger_consumption / dt;
        if power < step.bounds.p_min - 1e-9 || power > step.bounds.p_max + 1e-9 {
            bad.push(format!("t={t} charger {c}: power {power} outside {:?}", step.bounds));
        }
    }
    for (ev, v) in scenario.vehicles.iter().enumerate() {
        let battery = env.battery(ev);
        let soc = battery.soc();
        if soc < battery.floor_soc() - 1e-12 || soc > 1.0 + 1e-12 {
            bad.push(format!(
                "t={t} {}: soc {soc} outside [{}, 1]",
                v.name,
                battery.floor_soc()
            ));
        }
    }
    for (c, o) in result.observation.chargers.iter().enumerate() {
        if !sentinel_ok(o) {
            bad.push(format!("t={t} charger {c}: observation {:?}", o.to_vector()));
        }
    }
    bad
}

pub fn plugged(charger: ChargerId, departure: u32, req: f64) -> EvScheduleRow {
    EvScheduleRow {
        month: 1,
        hour: 1,
        ev_state: EvState::PluggedReady,
        charger_id: Some(charger),
        est_departure_steps: Some(departure),
        req_soc_departure: Some(req),
        est_arrival_steps: None,
        est_soc_arrival: None,
    }
}

pub fn transit() -> EvScheduleRow {
    EvScheduleRow {
        month: 1,
        hour: 1,
        ev_state: EvState::Transit,
        charger_id: None,
        est_departure_steps: None,
        req_soc_departure: None,
        est_arrival_steps: None,
        est_soc_arrival: None,
    }
}

pub fn incoming(charger: ChargerId, arrival: u32, soc: f64) -> EvScheduleRow {
    EvScheduleRow {
        month: 1,
        hour: 1,
        ev_state: EvState::Incoming,
        charger_id: Some(charger),
        est_departure_steps: None,
        req_soc_departure: None,
        est_arrival_steps: Some(arrival),
        est_soc_arrival: Some(soc),
    }
}

pub fn env(scenario: Scenario) -> Environment {
    Environment::new(scenario, EnvOptions::default()).unwrap()
}

pub fn charger_id() -> ChargerId {
    "EVC_1_1_1".parse().unwrap()
}

/// One building with one charger and one vehicle; flat load/PV/price unless overwritten.
pub fn single_charger_scenario(
    mode: evflex_core::SimulationMode,
    charger: evflex_core::models::ChargerParams,
    battery: evflex_core::models::BatteryParams,
    initial_soc: f64,
    schedule: Vec<EvScheduleRow>,
) -> Scenario {
    use evflex_core::env::{BuildingSpec, RbcSettings, RewardWeights, VehicleSpec};
    let n = schedule.len();
    Scenario {
        mode,
        timestep_hours: 1.0,
        horizon_steps: n,
        calendar_start: evflex_core::calendar::default_start(),
        seed: 0,
        arrival_soc_noise_std: 0.0,
        buildings: vec![BuildingSpec {
            name: "Building_1".into(),
            load: vec![2.0; n],
            pv: vec![0.5; n],
            chargers: vec![(charger_id(), charger)],
        }],
        vehicles: vec![VehicleSpec {
            name: "EV_1".into(),
            battery,
            initial_soc,
            schedule,
        }],
        price: vec![0.2; n],
        carbon: vec![0.4; n],
        reward: RewardWeights::default(),
        rbc: RbcSettings::default(),
    }
}

pub fn charger_params(power: f64) -> evflex_core::models::ChargerParams {
    evflex_core::models::ChargerParams {
        nominal_power_charging: power,
        nominal_power_discharging: power,
        efficiency: 1.0,
        efficiency_curve: None,
    }
}

//! The simulation environment.
//!
//! One call to [`Environment::step`] applies the actions decided for step `t`:
//! exogenous building load and PV first, then every charger meters its
//! consumption, delivers energy and updates the connected battery. Time then
//! advances and the vehicle schedules are applied (plug-ins, departures)
//! before the observation for `t + 1` is returned.

mod config;
mod observation;
mod reward;

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use config::{
    load_config, read_series, resolve_scenario, BuildingFile, BuildingSpec, ConfigError, RbcSettings, Scenario,
    ScenarioFile, VehicleFile, VehicleSpec, CARBON_COLUMN, LOAD_COLUMN, PRICE_COLUMN, PV_COLUMN,
};
pub use observation::{
    ChargerLimits, ChargerObservation, ChargerState, Context, Observation, OBSERVATION_FIELDS, SENTINEL,
};
pub use reward::{building_reward, RewardWeights};

use crate::calendar::Calendar;
use crate::dataset::{derive_seed, EvScheduleRow, EvState};
use crate::flexoffer::{build_flexoffer, slice_bounds, validate_action, FlexOfferRecord, Slice};
use crate::models::{Charger, ChargerId, EnergyTransfer, EvBattery};
use crate::SimulationMode;

/// Tolerance for the runtime metering and SoC checks.
pub const INVARIANT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("expected {expected} actions (one per charger), got {found}")]
    ActionCount { expected: usize, found: usize },
    #[error("action {action} for charger {charger} is outside the {mode} range")]
    ActionOutOfRange {
        charger: ChargerId,
        action: f64,
        mode: SimulationMode,
    },
    #[error("episode is over; call reset")]
    EpisodeDone,
    #[error("invariant violated at step {step}: {}", .messages.join("; "))]
    InvariantViolation { step: usize, messages: Vec<String> },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnvOptions {
    /// Reject out-of-range actions and fail on invariant violations instead of clamping/recording.
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionFlag {
    /// Non-zero action on a charger without a connected vehicle; coerced to 0.
    NoVehicle,
    /// Action outside the mode's range; clamped.
    Clamped,
    /// NaN or infinite action; replaced by 0.
    NotFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChargerStep {
    pub requested_action: f64,
    pub applied_action: f64,
    /// Power envelope in force for the step (zero when nothing is connected).
    pub bounds: Slice,
    pub transfer: EnergyTransfer,
    pub flag: Option<ActionFlag>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Departure {
    pub ev: usize,
    pub charger: usize,
    pub soc: f64,
    pub required_soc: Option<f64>,
    pub shortfall: f64,
    /// Whether charging at full power from plug-in could have met the requirement.
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum EmsEvent {
    Connected {
        ev: usize,
        charger: usize,
        soc: f64,
    },
    Disconnected {
        ev: usize,
        charger: usize,
    },
    /// Plug occupied; the vehicle retries next step.
    Deferred {
        ev: usize,
        charger: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepResult {
    /// Time index after the step.
    pub t: usize,
    pub observation: Observation,
    /// Per-building net electricity: load - PV + charger consumption (kWh).
    pub net_electricity: Vec<f64>,
    pub rewards: Vec<f64>,
    pub done: bool,
    pub chargers: Vec<ChargerStep>,
    pub departures: Vec<Departure>,
    pub events: Vec<EmsEvent>,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone)]
struct ChargerSlot {
    charger: Charger,
    building: usize,
    connected: Option<usize>,
}

#[derive(Debug, Clone)]
struct Session {
    charger: usize,
    required_soc: Option<f64>,
    feasible: bool,
}

#[derive(Debug, Clone)]
struct Vehicle {
    battery: EvBattery,
    rng: ChaCha8Rng,
    session: Option<Session>,
    /// Expected SoC from the latest incoming row, consumed at the next plug-in.
    expected_arrival_soc: Option<f64>,
}

pub struct Environment {
    scenario: Scenario,
    options: EnvOptions,
    calendar: Calendar,
    chargers: Vec<ChargerSlot>,
    charger_index: HashMap<ChargerId, usize>,
    vehicles: Vec<Vehicle>,
    t: usize,
    previous_net: Vec<Option<f64>>,
    flexoffers: Vec<FlexOfferRecord>,
}

impl Environment {
    /// Builds the environment and resets it with the scenario seed.
    pub fn new(scenario: Scenario, options: EnvOptions) -> Result<Self, EnvError> {
        scenario.validate()?;
        let mut chargers = Vec::new();
        for (b, spec) in scenario.buildings.iter().enumerate() {
            for (id, params) in &spec.chargers {
                let charger = Charger::new(*id, params, scenario.mode).map_err(|source| ConfigError::Model {
                    context: format!("charger {id}"),
                    source,
                })?;
                chargers.push(ChargerSlot {
                    charger,
                    building: b,
                    connected: None,
                });
            }
        }
        let charger_index = chargers.iter().enumerate().map(|(i, c)| (c.charger.id, i)).collect();
        let calendar = Calendar::new(scenario.calendar_start, scenario.timestep_hours);
        let seed = scenario.seed;
        let mut env = Self {
            previous_net: vec![None; scenario.buildings.len()],
            scenario,
            options,
            calendar,
            chargers,
            charger_index,
            vehicles: Vec::new(),
            t: 0,
            flexoffers: Vec::new(),
        };
        env.reset(seed);
        Ok(env)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn mode(&self) -> SimulationMode {
        self.scenario.mode
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn horizon(&self) -> usize {
        self.scenario.horizon_steps
    }

    pub fn is_done(&self) -> bool {
        self.t >= self.scenario.horizon_steps
    }

    pub fn calendar(&self) -> &Calendar {
        &self.calendar
    }

    pub fn charger_ids(&self) -> Vec<ChargerId> {
        self.chargers.iter().map(|c| c.charger.id).collect()
    }

    /// Building index of each charger, in charger order.
    pub fn charger_buildings(&self) -> Vec<usize> {
        self.chargers.iter().map(|c| c.building).collect()
    }

    pub fn battery(&self, ev: usize) -> &EvBattery {
        &self.vehicles[ev].battery
    }

    /// Vehicle connected to a charger, if any.
    pub fn connected_vehicle(&self, charger: usize) -> Option<usize> {
        self.chargers[charger].connected
    }

    /// FlexOffers issued at every plug-in since the last reset.
    pub fn flexoffers(&self) -> &[FlexOfferRecord] {
        &self.flexoffers
    }

    /// Returns to `t = 0` with initial SoCs and connections from the first schedule rows.
    pub fn reset(&mut self, seed: u64) -> Observation {
        self.t = 0;
        self.previous_net = vec![None; self.scenario.buildings.len()];
        self.flexoffers.clear();
        for slot in &mut self.chargers {
            slot.connected = None;
        }
        self.vehicles = self
            .scenario
            .vehicles
            .iter()
            .enumerate()
            .map(|(i, v)| Vehicle {
                battery: EvBattery::new(&v.battery, v.initial_soc).expect("validated battery"),
                rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64)),
                session: None,
                expected_arrival_soc: None,
            })
            .collect();
        let mut departures = Vec::new();
        let mut events = Vec::new();
        self.apply_schedules(false, &mut departures, &mut events);
        self.observe()
    }

    /// Applies one action per charger (charger order) and advances one step.
    pub fn step(&mut self, actions: &[f64]) -> Result<StepResult, EnvError> {
        if self.is_done() {
            return Err(EnvError::EpisodeDone);
        }
        if actions.len() != self.chargers.len() {
            return Err(EnvError::ActionCount {
                expected: self.chargers.len(),
                found: actions.len(),
            });
        }
        let t = self.t;
        let dt = self.scenario.timestep_hours;
        let mode = self.scenario.mode;
        let (lo, hi) = mode.action_range();
        let mut violations = Vec::new();

        let mut net: Vec<f64> = self.scenario.buildings.iter().map(|b| b.load[t] - b.pv[t]).collect();

        let mut charger_steps = Vec::with_capacity(self.chargers.len());
        let mut touched = vec![false; self.vehicles.len()];
        for (i, &requested) in actions.iter().enumerate() {
            let slot = &self.chargers[i];
            let mut flag = None;
            let mut action = requested;
            if !action.is_finite() {
                flag = Some(ActionFlag::NotFinite);
                action = 0.0;
            } else if action < lo || action > hi {
                if self.options.strict {
                    return Err(EnvError::ActionOutOfRange {
                        charger: slot.charger.id,
                        action,
                        mode,
                    });
                }
                flag = Some(ActionFlag::Clamped);
                action = action.clamp(lo, hi);
            }

            let Some(ev) = slot.connected else {
                if action != 0.0 {
                    flag = Some(ActionFlag::NoVehicle);
                }
                charger_steps.push(ChargerStep {
                    requested_action: requested,
                    applied_action: 0.0,
                    bounds: Slice { p_min: 0.0, p_max: 0.0 },
                    transfer: EnergyTransfer::default(),
                    flag,
                });
                continue;
            };

            touched[ev] = true;
            let battery = &mut self.vehicles[ev].battery;
            let bounds = slice_bounds(&slot.charger, battery, mode);
            let requested_energy = slot.charger.consumption_unchecked(action, dt);
            let bounded = requested_energy.clamp(bounds.p_min * dt, bounds.p_max * dt);
            let efficiency = slot.charger.efficiency_at(bounded, dt);
            let supplied = efficiency * bounded;
            let before = battery.stored_energy();
            let outcome = battery.update(supplied, dt);
            let transfer = if outcome.limited {
                EnergyTransfer {
                    charger_consumption: outcome.accepted / efficiency,
                    supplied_energy: outcome.accepted,
                    battery_delta: outcome.stored_after - before,
                }
            } else {
                EnergyTransfer {
                    charger_consumption: bounded,
                    supplied_energy: supplied,
                    battery_delta: outcome.stored_after - before,
                }
            };
            if !validate_action(&bounds, transfer.charger_consumption / dt) {
                violations.push(format!(
                    "charger {} power {} outside [{}, {}]",
                    slot.charger.id,
                    transfer.charger_consumption / dt,
                    bounds.p_min,
                    bounds.p_max
                ));
            }
            net[slot.building] += transfer.charger_consumption;
            charger_steps.push(ChargerStep {
                requested_action: requested,
                applied_action: action,
                bounds,
                transfer,
                flag,
            });
        }
        for (v, vehicle) in self.vehicles.iter_mut().enumerate() {
            if !touched[v] {
                vehicle.battery.idle(dt);
            }
        }

        // metering identity, recomputed from the per-charger records
        for (b, spec) in self.scenario.buildings.iter().enumerate() {
            let metered: f64 = charger_steps
                .iter()
                .zip(&self.chargers)
                .filter(|(_, slot)| slot.building == b)
                .map(|(s, _)| s.transfer.charger_consumption)
                .sum();
            let expected = spec.load[t] - spec.pv[t] + metered;
            if (expected - net[b]).abs() > INVARIANT_TOLERANCE {
                violations.push(format!(
                    "building {} metering mismatch {} vs {}",
                    spec.name, net[b], expected
                ));
            }
        }

        let price = self.scenario.price[t];
        let carbon = self.scenario.carbon[t];
        self.t += 1;
        let mut departures = Vec::new();
        let mut events = Vec::new();
        if self.t < self.scenario.horizon_steps {
            self.apply_schedules(true, &mut departures, &mut events);
        }

        let mut shortfalls = vec![Vec::new(); net.len()];
        for d in &departures {
            shortfalls[self.chargers[d.charger].building].push(d.shortfall);
        }
        let rewards = net
            .iter()
            .enumerate()
            .map(|(b, &n)| {
                building_reward(
                    &self.scenario.reward,
                    n,
                    self.previous_net[b],
                    price,
                    carbon,
                    &shortfalls[b],
                )
            })
            .collect();
        self.previous_net = net.iter().copied().map(Some).collect();

        let observation = self.observe();
        self.check_state(&observation, &mut violations);
        if self.options.strict && !violations.is_empty() {
            return Err(EnvError::InvariantViolation {
                step: t,
                messages: violations,
            });
        }
        Ok(StepResult {
            t: self.t,
            observation,
            net_electricity: net,
            rewards,
            done: self.is_done(),
            chargers: charger_steps,
            departures,
            events,
            violations,
        })
    }

    /// Current observation without advancing.
    pub fn observe(&self) -> Observation {
        let t = self.t;
        let chargers = (0..self.chargers.len()).map(|c| self.observe_charger(c)).collect();
        let limits = (0..self.chargers.len()).map(|c| self.limits(c)).collect();
        let idx = t.min(self.scenario.price.len() - 1);
        let (month, hour) = self.calendar.month_hour(t);
        Observation {
            t,
            chargers,
            context: Context {
                month,
                hour,
                price: self.scenario.price[idx],
                carbon_intensity: self.scenario.carbon[idx.min(self.scenario.carbon.len() - 1)],
                limits,
            },
        }
    }

    fn row(&self, ev: usize) -> Option<&EvScheduleRow> {
        self.scenario.vehicles[ev].schedule.get(self.t)
    }

    pub fn observe_charger(&self, c: usize) -> ChargerObservation {
        let slot = &self.chargers[c];
        if let Some(ev) = slot.connected {
            let soc = self.vehicles[ev].battery.soc();
            let row = self.row(ev).filter(|r| r.ev_state == EvState::PluggedReady);
            let req = row
                .and_then(|r| r.req_soc_departure)
                .or_else(|| self.vehicles[ev].session.as_ref().and_then(|s| s.required_soc));
            return ChargerObservation::connected(soc, row.and_then(|r| r.est_departure_steps), req);
        }
        let id = slot.charger.id;
        let incoming = (0..self.vehicles.len())
            .filter_map(|ev| {
                let r = self.row(ev)?;
                (r.ev_state == EvState::Incoming && r.charger_id == Some(id)).then_some(r)
            })
            .min_by_key(|r| r.est_arrival_steps.unwrap_or(u32::MAX));
        match incoming {
            Some(r) => ChargerObservation::incoming(r.est_arrival_steps, r.est_soc_arrival),
            None => ChargerObservation::empty(),
        }
    }

    fn limits(&self, c: usize) -> ChargerLimits {
        let slot = &self.chargers[c];
        let Some(ev) = slot.connected else {
            return ChargerLimits::default();
        };
        let dt = self.scenario.timestep_hours;
        let battery = &self.vehicles[ev].battery;
        let bounds = slice_bounds(&slot.charger, battery, self.scenario.mode);
        let c0 = battery.capacity_initial();
        let eta = battery.round_trip_efficiency();
        let charge = bounds.p_max * dt;
        let discharge = bounds.p_min * dt;
        ChargerLimits {
            max_charge_soc_gain: slot.charger.efficiency_at(charge, dt) * charge * eta / c0,
            max_discharge_soc_loss: -slot.charger.efficiency_at(discharge, dt) * discharge / eta / c0,
        }
    }

    /// Departures, then plug-ins, from the schedule rows at the current `t`.
    fn apply_schedules(&mut self, noisy: bool, departures: &mut Vec<Departure>, events: &mut Vec<EmsEvent>) {
        let t = self.t;
        for ev in 0..self.vehicles.len() {
            let row = self.scenario.vehicles[ev].schedule.get(t);
            let Some(session) = self.vehicles[ev].session.as_ref() else {
                continue;
            };
            let c = session.charger;
            let stays = row.is_some_and(|r| {
                r.ev_state == EvState::PluggedReady && r.charger_id == Some(self.chargers[c].charger.id)
            });
            if stays {
                continue;
            }
            let session = self.vehicles[ev].session.take().expect("checked");
            let soc = self.vehicles[ev].battery.soc();
            let shortfall = session.required_soc.map_or(0.0, |r| (r - soc).max(0.0));
            departures.push(Departure {
                ev,
                charger: c,
                soc,
                required_soc: session.required_soc,
                shortfall,
                feasible: session.feasible,
            });
            events.push(EmsEvent::Disconnected { ev, charger: c });
            self.chargers[c].connected = None;
        }

        for ev in 0..self.vehicles.len() {
            let Some(row) = self.scenario.vehicles[ev].schedule.get(t) else {
                continue;
            };
            match row.ev_state {
                EvState::Incoming => {
                    if let Some(soc) = row.est_soc_arrival {
                        self.vehicles[ev].expected_arrival_soc = Some(soc);
                    }
                }
                EvState::PluggedReady if self.vehicles[ev].session.is_none() => {
                    let Some(c) = row.charger_id.and_then(|id| self.charger_index.get(&id).copied()) else {
                        continue;
                    };
                    if self.chargers[c].connected.is_some() {
                        events.push(EmsEvent::Deferred { ev, charger: c });
                        continue;
                    }
                    self.connect(ev, c, noisy);
                    events.push(EmsEvent::Connected {
                        ev,
                        charger: c,
                        soc: self.vehicles[ev].battery.soc(),
                    });
                }
                _ => {}
            }
        }
    }

    fn connect(&mut self, ev: usize, c: usize, noisy: bool) {
        let t = self.t;
        let std = self.scenario.arrival_soc_noise_std;
        let mode = self.scenario.mode;
        let dt = self.scenario.timestep_hours;
        let schedule = &self.scenario.vehicles[ev].schedule;
        let row = &schedule[t];
        let vehicle = &mut self.vehicles[ev];
        if let Some(expected) = vehicle.expected_arrival_soc.take() {
            let soc = if noisy {
                truncated_normal(&mut vehicle.rng, expected, std, 0.0, 1.0)
            } else {
                expected
            };
            vehicle.battery.set_soc(soc);
        }

        let charger = &self.chargers[c].charger;
        let feasible = match (row.est_departure_steps, row.req_soc_departure) {
            (Some(steps), Some(req)) => {
                let mut probe = vehicle.battery.clone();
                for _ in 0..steps {
                    let e = slice_bounds(charger, &probe, mode).p_max * dt;
                    probe.update(charger.efficiency_at(e, dt) * e, dt);
                }
                probe.soc() >= req - 1e-9
            }
            _ => true,
        };
        vehicle.session = Some(Session {
            charger: c,
            required_soc: row.req_soc_departure,
            feasible,
        });

        let end = schedule[t..]
            .iter()
            .position(|r| r.ev_state != EvState::PluggedReady || r.charger_id != row.charger_id)
            .map_or(schedule.len(), |k| t + k);
        if let Ok(offer) = build_flexoffer(t, &schedule[t..end], charger, &vehicle.battery, mode) {
            self.flexoffers.push(FlexOfferRecord {
                ev_id: self.scenario.vehicles[ev].name.clone(),
                charger_id: charger.id.to_string(),
                offer,
            });
        }
        self.chargers[c].connected = Some(ev);
    }

    fn check_state(&self, observation: &Observation, violations: &mut Vec<String>) {
        for (i, v) in self.vehicles.iter().enumerate() {
            let b = &v.battery;
            let q = b.stored_energy();
            if q < b.floor_energy() - INVARIANT_TOLERANCE || q > b.capacity_current() + INVARIANT_TOLERANCE {
                violations.push(format!(
                    "vehicle {} stored energy {q} outside [{}, {}]",
                    self.scenario.vehicles[i].name,
                    b.floor_energy(),
                    b.capacity_current()
                ));
            }
        }
        for (c, o) in observation.chargers.iter().enumerate() {
            if !o.is_consistent() {
                violations.push(format!(
                    "charger {} observation {:?} breaks sentinel rules",
                    self.chargers[c].charger.id, o
                ));
            }
        }
    }
}

/// Normal sample conditioned on `[lo, hi]` (rejection, falling back to clamping).
pub fn truncated_normal<R: rand::Rng + ?Sized>(rng: &mut R, mean: f64, std: f64, lo: f64, hi: f64) -> f64 {
    if std <= 0.0 {
        return mean.clamp(lo, hi);
    }
    let normal = Normal::new(mean, std).expect("finite std");
    for _ in 0..1000 {
        let x = normal.sample(rng);
        if (lo..=hi).contains(&x) {
            return x;
        }
    }
    mean.clamp(lo, hi)
}

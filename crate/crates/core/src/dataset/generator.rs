//! Synthetic schedule generator with household and workplace routines.
//!
//! Times of day are drawn from normal distributions, rounded to the nearest
//! step and clamped into the feasible part of the day. Every away period is at
//! least `incoming_lead_steps + 1` steps long so the sequence
//! plugged -> transit -> incoming -> plugged always appears.

use chrono::NaiveDateTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DatasetError, EvScheduleRow, EvState};
use crate::calendar::{self, Calendar};
use crate::models::ChargerId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorMode {
    Household,
    Workplace,
}

/// Parameters of the synthetic generator. Times are hours of the day.
///
/// For household mode `departure_*` is leaving home and `arrival_*` is coming
/// back; for workplace mode `arrival_*` is reaching the office charger and
/// `departure_*` is leaving it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorParams {
    pub mode: GeneratorMode,
    pub charger_ids: Vec<ChargerId>,
    pub seed: u64,
    #[serde(with = "calendar::serde_start")]
    pub calendar_start: NaiveDateTime,
    pub timestep_hours: f64,
    pub departure_mean: f64,
    pub departure_std: f64,
    pub arrival_mean: f64,
    pub arrival_std: f64,
    pub routine_break_probability: f64,
    pub weekend_morning_outing_probability: f64,
    pub weekend_afternoon_outing_probability: f64,
    pub weekend_morning_departure: f64,
    pub weekend_afternoon_departure: f64,
    pub weekend_outing_std: f64,
    pub weekend_morning_duration: f64,
    pub weekend_afternoon_duration: f64,
    pub traffic_delay_probability: f64,
    pub traffic_delay_hours: f64,
    pub commute_soc_drop_mean: f64,
    pub commute_soc_drop_std: f64,
    pub req_soc_mean: f64,
    pub req_soc_std: f64,
    /// SoC assumed at the last departure before the horizon starts.
    pub initial_soc: f64,
    pub incoming_lead_steps: u32,
}

impl GeneratorParams {
    pub fn household(charger: ChargerId, seed: u64) -> Self {
        Self {
            mode: GeneratorMode::Household,
            charger_ids: vec![charger],
            seed,
            calendar_start: calendar::default_start(),
            timestep_hours: 1.0,
            departure_mean: 8.0,
            departure_std: 1.0,
            arrival_mean: 18.0,
            arrival_std: 1.0,
            routine_break_probability: 0.05,
            weekend_morning_outing_probability: 0.5,
            weekend_afternoon_outing_probability: 0.4,
            weekend_morning_departure: 10.0,
            weekend_afternoon_departure: 15.0,
            weekend_outing_std: 1.0,
            weekend_morning_duration: 3.0,
            weekend_afternoon_duration: 4.0,
            traffic_delay_probability: 0.0,
            traffic_delay_hours: 1.0,
            commute_soc_drop_mean: 0.2,
            commute_soc_drop_std: 0.05,
            req_soc_mean: 0.8,
            req_soc_std: 0.05,
            initial_soc: 0.8,
            incoming_lead_steps: 2,
        }
    }

    pub fn workplace(chargers: Vec<ChargerId>, seed: u64) -> Self {
        Self {
            mode: GeneratorMode::Workplace,
            charger_ids: chargers,
            departure_mean: 17.0,
            arrival_mean: 9.0,
            routine_break_probability: 0.05,
            weekend_morning_outing_probability: 0.0,
            weekend_afternoon_outing_probability: 0.0,
            traffic_delay_probability: 0.2,
            commute_soc_drop_mean: 0.15,
            req_soc_mean: 0.7,
            ..Self::household(
                ChargerId {
                    building: 1,
                    charger: 1,
                    plug: 1,
                },
                seed,
            )
        }
    }

    /// Reads parameters from JSON; fields left out take the defaults of the given `mode`.
    pub fn from_json(value: serde_json::Value) -> Result<Self, DatasetError> {
        let obj = value
            .as_object()
            .ok_or_else(|| DatasetError::Config("generator parameters must be a JSON object".into()))?;
        let mode: GeneratorMode = serde_json::from_value(obj.get("mode").cloned().unwrap_or_default())
            .map_err(|e| DatasetError::Config(format!("mode: {e}")))?;
        let base = match mode {
            GeneratorMode::Household => Self::household(
                ChargerId {
                    building: 1,
                    charger: 1,
                    plug: 1,
                },
                0,
            ),
            GeneratorMode::Workplace => Self::workplace(Vec::new(), 0),
        };
        let mut merged = serde_json::to_value(base).expect("params serialize");
        let target = merged.as_object_mut().expect("object");
        for (k, v) in obj {
            target.insert(k.clone(), v.clone());
        }
        serde_json::from_value(merged).map_err(|e| DatasetError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::Config(m));
        for (name, p) in [
            ("routine_break_probability", self.routine_break_probability),
            (
                "weekend_morning_outing_probability",
                self.weekend_morning_outing_probability,
            ),
            (
                "weekend_afternoon_outing_probability",
                self.weekend_afternoon_outing_probability,
            ),
            ("traffic_delay_probability", self.traffic_delay_probability),
            ("req_soc_mean", self.req_soc_mean),
            ("initial_soc", self.initial_soc),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not in [0, 1]"));
            }
        }
        for (name, s) in [
            ("departure_std", self.departure_std),
            ("arrival_std", self.arrival_std),
            ("weekend_outing_std", self.weekend_outing_std),
            ("commute_soc_drop_std", self.commute_soc_drop_std),
            ("req_soc_std", self.req_soc_std),
            ("commute_soc_drop_mean", self.commute_soc_drop_mean),
            ("traffic_delay_hours", self.traffic_delay_hours),
            ("weekend_morning_duration", self.weekend_morning_duration),
            ("weekend_afternoon_duration", self.weekend_afternoon_duration),
        ] {
            if !(s.is_finite() && s >= 0.0) {
                return bad(format!("{name} = {s} must be non-negative"));
            }
        }
        if self.charger_ids.is_empty() {
            return bad("at least one charger id is required".into());
        }
        if calendar::steps_per_day(self.timestep_hours).is_none() {
            return bad(format!("timestep of {} h does not divide a day", self.timestep_hours));
        }
        if self.incoming_lead_steps == 0 {
            return bad("incoming_lead_steps must be at least 1".into());
        }
        Ok(())
    }
}

/// Independent per-vehicle seed from a base seed (splitmix64 finaliser).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
struct Session {
    start: usize,
    end: usize,
    charger: ChargerId,
    req_soc: f64,
    arrival_soc: f64,
}

struct Sampler {
    rng: ChaCha8Rng,
    dt: f64,
}

impl Sampler {
    fn normal(&mut self, mean: f64, std: f64) -> f64 {
        if std == 0.0 {
            return mean;
        }
        Normal::new(mean, std).expect("validated std").sample(&mut self.rng)
    }

    fn chance(&mut self, p: f64) -> bool {
        p > 0.0 && self.rng.random_bool(p)
    }

    /// Step within the day for an hour-of-day sample, clamped to `[lo, hi]`.
    fn time_step(&mut self, mean: f64, std: f64, lo: usize, hi: usize) -> usize {
        let x = (self.normal(mean, std) / self.dt).round();
        (x.max(lo as f64) as usize).min(hi)
    }

    fn hours(&self, h: f64) -> usize {
        (h / self.dt).round() as usize
    }

    fn fraction(&mut self, mean: f64, std: f64) -> f64 {
        round2(self.normal(mean, std).clamp(0.0, 1.0))
    }
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn check_horizon(params: &GeneratorParams, horizon: usize) -> Result<usize, DatasetError> {
    params.validate()?;
    let spd = calendar::steps_per_day(params.timestep_hours).expect("validated");
    if !horizon.is_multiple_of(spd) {
        return Err(DatasetError::Config(format!(
            "horizon of {horizon} steps is not a whole number of days ({spd} steps per day)"
        )));
    }
    Ok(spd)
}

/// Generates a schedule for either mode.
pub fn generate(params: &GeneratorParams, horizon_steps: usize) -> Result<Vec<EvScheduleRow>, DatasetError> {
    match params.mode {
        GeneratorMode::Household => generate_household(params, horizon_steps),
        GeneratorMode::Workplace => generate_workplace(params, horizon_steps),
    }
}

pub fn generate_household(params: &GeneratorParams, horizon_steps: usize) -> Result<Vec<EvScheduleRow>, DatasetError> {
    if params.mode != GeneratorMode::Household {
        return Err(DatasetError::Config(
            "household generator called with workplace parameters".into(),
        ));
    }
    let spd = check_horizon(params, horizon_steps)?;
    let cal = Calendar::new(params.calendar_start, params.timestep_hours);
    let mut s = Sampler {
        rng: ChaCha8Rng::seed_from_u64(params.seed),
        dt: params.timestep_hours,
    };
    let min_trip = params.incoming_lead_steps as usize + 1;
    let last = spd - 1;

    // away periods [leave, return) in absolute steps
    let mut trips = Vec::new();
    for day in 0..horizon_steps / spd {
        let day0 = day * spd;
        if cal.is_weekend(day0) {
            let mut earliest = 0;
            for (p, dep_mean, dur) in [
                (
                    params.weekend_morning_outing_probability,
                    params.weekend_morning_departure,
                    params.weekend_morning_duration,
                ),
                (
                    params.weekend_afternoon_outing_probability,
                    params.weekend_afternoon_departure,
                    params.weekend_afternoon_duration,
                ),
            ] {
                if !s.chance(p) || earliest + min_trip > last {
                    continue;
                }
                let dep = s.time_step(dep_mean, params.weekend_outing_std, earliest, last - min_trip);
                let arr = (dep + s.hours(dur).max(min_trip)).min(last);
                trips.push((day0 + dep, day0 + arr));
                earliest = arr + 1;
            }
        } else if !s.chance(params.routine_break_probability) {
            let dep = s.time_step(params.departure_mean, params.departure_std, 0, last - min_trip);
            let arr = s.time_step(params.arrival_mean, params.arrival_std, dep + min_trip, last);
            trips.push((day0 + dep, day0 + arr));
        }
    }

    let mut bounds = Vec::with_capacity(trips.len() + 1);
    let mut start = 0;
    for &(leave, back) in &trips {
        bounds.push((start, leave));
        start = back;
    }
    bounds.push((start, horizon_steps));
    let sessions = attach_session_data(&mut s, params, bounds);
    Ok(fill_rows(&cal, params, &sessions, horizon_steps))
}

pub fn generate_workplace(params: &GeneratorParams, horizon_steps: usize) -> Result<Vec<EvScheduleRow>, DatasetError> {
    if params.mode != GeneratorMode::Workplace {
        return Err(DatasetError::Config(
            "workplace generator called with household parameters".into(),
        ));
    }
    let spd = check_horizon(params, horizon_steps)?;
    let cal = Calendar::new(params.calendar_start, params.timestep_hours);
    let mut s = Sampler {
        rng: ChaCha8Rng::seed_from_u64(params.seed),
        dt: params.timestep_hours,
    };
    let lead = params.incoming_lead_steps as usize;
    let last = spd - 1;
    if lead + 2 > last {
        return Err(DatasetError::Config(
            "incoming lead leaves no room for a working day".into(),
        ));
    }

    let mut bounds = Vec::new();
    for day in 0..horizon_steps / spd {
        let day0 = day * spd;
        if cal.is_weekend(day0) || s.chance(params.routine_break_probability) {
            continue;
        }
        let mut arr = s.time_step(params.arrival_mean, params.arrival_std, 0, usize::MAX);
        if s.chance(params.traffic_delay_probability) {
            arr += s.hours(params.traffic_delay_hours);
        }
        let arr = arr.clamp(lead + 1, last - 1);
        let dep = s.time_step(params.departure_mean, params.departure_std, arr + 1, last);
        bounds.push((day0 + arr, day0 + dep));
    }
    let sessions = attach_session_data(&mut s, params, bounds);
    Ok(fill_rows(&cal, params, &sessions, horizon_steps))
}

fn attach_session_data(s: &mut Sampler, params: &GeneratorParams, bounds: Vec<(usize, usize)>) -> Vec<Session> {
    let mut prev_soc = params.initial_soc;
    bounds
        .into_iter()
        .filter(|(a, b)| b > a)
        .map(|(start, end)| {
            let charger = if params.charger_ids.len() == 1 {
                params.charger_ids[0]
            } else {
                params.charger_ids[s.rng.random_range(0..params.charger_ids.len())]
            };
            let drop = s
                .normal(params.commute_soc_drop_mean, params.commute_soc_drop_std)
                .max(0.0);
            let arrival_soc = round2((prev_soc - drop).clamp(0.0, 1.0));
            let req_soc = s.fraction(params.req_soc_mean, params.req_soc_std);
            prev_soc = req_soc;
            Session {
                start,
                end,
                charger,
                req_soc,
                arrival_soc,
            }
        })
        .collect()
}

fn fill_rows(cal: &Calendar, params: &GeneratorParams, sessions: &[Session], horizon: usize) -> Vec<EvScheduleRow> {
    let lead = params.incoming_lead_steps as usize;
    let mut rows = Vec::with_capacity(horizon);
    let mut idx = 0;
    for t in 0..horizon {
        while idx < sessions.len() && sessions[idx].end <= t {
            idx += 1;
        }
        let (month, hour) = cal.month_hour(t);
        let mut row = EvScheduleRow {
            month,
            hour,
            ev_state: EvState::Transit,
            charger_id: None,
            est_departure_steps: None,
            req_soc_departure: None,
            est_arrival_steps: None,
            est_soc_arrival: None,
        };
        if let Some(sess) = sessions.get(idx) {
            row.charger_id = Some(sess.charger);
            if sess.start <= t {
                row.ev_state = EvState::PluggedReady;
                row.est_departure_steps = (sess.end < horizon).then(|| (sess.end - t) as u32);
                row.req_soc_departure = Some(sess.req_soc);
            } else {
                // keep at least one transit step after the previous session
                let window = match idx.checked_sub(1) {
                    Some(p) => lead.min(sess.start - sessions[p].end - 1),
                    None => lead,
                };
                let until = sess.start - t;
                if until <= window {
                    row.ev_state = EvState::Incoming;
                    row.est_arrival_steps = Some(until as u32);
                    row.est_soc_arrival = Some(sess.arrival_soc);
                }
            }
        }
        rows.push(row);
    }
    rows
}

use serde::Serialize;

use super::{EvScheduleRow, EvState};
use crate::calendar::Calendar;

/// Departure/arrival timing of one schedule, in hours of the day.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleStats {
    pub steps: usize,
    pub departures: usize,
    pub arrivals: usize,
    pub departure_hour_mean: f64,
    pub departure_hour_std: f64,
    pub arrival_hour_mean: f64,
    pub arrival_hour_std: f64,
    /// Share of steps spent plugged in.
    pub plugged_fraction: f64,
}

/// Steps at which a vehicle leaves the plugged-in state.
pub fn departure_steps(rows: &[EvScheduleRow]) -> Vec<usize> {
    (1..rows.len())
        .filter(|&t| rows[t - 1].ev_state == EvState::PluggedReady && rows[t].ev_state != EvState::PluggedReady)
        .collect()
}

/// Steps at which a vehicle becomes plugged in.
pub fn arrival_steps(rows: &[EvScheduleRow]) -> Vec<usize> {
    (1..rows.len())
        .filter(|&t| rows[t - 1].ev_state != EvState::PluggedReady && rows[t].ev_state == EvState::PluggedReady)
        .collect()
}

/// Sample mean and standard deviation (n - 1); NaN where undefined.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn schedule_stats(rows: &[EvScheduleRow], calendar: &Calendar) -> ScheduleStats {
    let hour_of = |t: usize| {
        use chrono::Timelike;
        let d = calendar.datetime(t);
        f64::from(d.hour()) + f64::from(d.minute()) / 60.0
    };
    let deps: Vec<f64> = departure_steps(rows).into_iter().map(hour_of).collect();
    let arrs: Vec<f64> = arrival_steps(rows).into_iter().map(hour_of).collect();
    let (dm, ds) = mean_std(&deps);
    let (am, as_) = mean_std(&arrs);
    let plugged = rows.iter().filter(|r| r.ev_state == EvState::PluggedReady).count();
    ScheduleStats {
        steps: rows.len(),
        departures: deps.len(),
        arrivals: arrs.len(),
        departure_hour_mean: dm,
        departure_hour_std: ds,
        arrival_hour_mean: am,
        arrival_hour_std: as_,
        plugged_fraction: if rows.is_empty() {
            0.0
        } else {
            plugged as f64 / rows.len() as f64
        },
    }
}

//! FlexOffer envelopes: plug-in window, departure requirement and per-step
//! power bounds for a connected vehicle.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::{EvScheduleRow, EvState};
use crate::models::{Charger, EvBattery};
use crate::SimulationMode;

/// Tolerance (kW) used when checking a realised power against a slice.
pub const SLICE_TOLERANCE: f64 = 1e-9;

/// Admissible power range for one timestep, in kW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub p_min: f64,
    pub p_max: f64,
}

impl Slice {
    pub fn contains(&self, power: f64) -> bool {
        validate_action(self, power)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlexOffer {
    pub earliest_start: usize,
    /// Absent when the departure time is unknown.
    pub latest_start: Option<usize>,
    pub soc_departure: f64,
    pub slices: Vec<Slice>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FlexOfferError {
    #[error("window row {0} is not a plugged-in row")]
    NotPlugged(usize),
    #[error("window row {0} targets a different charger")]
    ChargerChanged(usize),
    #[error("window row {index}: departure countdown {found} breaks contiguity (expected {expected})")]
    Countdown { index: usize, expected: u32, found: u32 },
    #[error("window has {len} rows but the departure is {expected} steps after plug-in")]
    Length { len: usize, expected: usize },
}

/// Power bounds at the battery's current SoC.
pub fn slice_bounds(charger: &Charger, battery: &EvBattery, mode: SimulationMode) -> Slice {
    let battery_power = battery.max_power();
    let p_max = charger.nominal_power_charging.min(battery_power);
    let p_min = if mode.allows_discharge() {
        -charger.nominal_power_discharging.min(battery_power)
    } else {
        0.0
    };
    Slice { p_min, p_max }
}

/// Builds the FlexOffer for a plugged-in interval starting at `start_step`.
///
/// Every slice carries the bounds at plug-in; the environment re-evaluates
/// [`slice_bounds`] each step as SoC changes.
pub fn build_flexoffer(
    start_step: usize,
    window: &[EvScheduleRow],
    charger: &Charger,
    battery: &EvBattery,
    mode: SimulationMode,
) -> Result<FlexOffer, FlexOfferError> {
    let Some(first) = window.first() else {
        return Ok(FlexOffer {
            earliest_start: start_step,
            latest_start: None,
            soc_departure: 0.0,
            slices: Vec::new(),
        });
    };
    let charger_id = first.charger_id;
    for (i, row) in window.iter().enumerate() {
        if row.ev_state != EvState::PluggedReady {
            return Err(FlexOfferError::NotPlugged(i));
        }
        if row.charger_id != charger_id {
            return Err(FlexOfferError::ChargerChanged(i));
        }
        if let (Some(d0), Some(d)) = (first.est_departure_steps, row.est_departure_steps) {
            let expected = d0.saturating_sub(i as u32);
            if d != expected {
                return Err(FlexOfferError::Countdown {
                    index: i,
                    expected,
                    found: d,
                });
            }
        }
    }
    let latest_start = first.est_departure_steps.map(|d| start_step + d as usize);
    if let Some(ls) = latest_start {
        let expected = ls - start_step;
        if window.len() != expected {
            return Err(FlexOfferError::Length {
                len: window.len(),
                expected,
            });
        }
    }
    let slice = slice_bounds(charger, battery, mode);
    Ok(FlexOffer {
        earliest_start: start_step,
        latest_start,
        soc_departure: first.req_soc_departure.unwrap_or(0.0),
        slices: vec![slice; window.len()],
    })
}

/// True iff `realized_power` lies within the slice (inclusive, 1e-9 kW slack).
pub fn validate_action(slice: &Slice, realized_power: f64) -> bool {
    realized_power >= slice.p_min - SLICE_TOLERANCE && realized_power <= slice.p_max + SLICE_TOLERANCE
}

/// A FlexOffer tagged with the vehicle and charger it was issued for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlexOfferRecord {
    pub ev_id: String,
    pub charger_id: String,
    pub offer: FlexOffer,
}

pub const FLEXOFFER_HEADER: &str = "ev_id,charger_id,t_es,t_ls,soc_departure,slice,p_min,p_max";

/// Writes one line per slice; offers without slices get a single line with empty slice columns.
pub fn write_flexoffers<W: Write>(mut out: W, records: &[FlexOfferRecord]) -> std::io::Result<()> {
    writeln!(out, "{FLEXOFFER_HEADER}")?;
    for r in records {
        let ls = r
            .offer
            .latest_start
            .map_or_else(|| "nan".to_string(), |v| v.to_string());
        let prefix = format!(
            "{},{},{},{},{}",
            r.ev_id, r.charger_id, r.offer.earliest_start, ls, r.offer.soc_departure
        );
        if r.offer.slices.is_empty() {
            writeln!(out, "{prefix},,,")?;
        }
        for (i, s) in r.offer.slices.iter().enumerate() {
            writeln!(out, "{prefix},{i},{},{}", s.p_min, s.p_max)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{BatteryParams, ChargerParams, Curve};

    fn charger(ch: f64, dis: f64, mode: SimulationMode) -> Charger {
        let p = ChargerParams {
            nominal_power_charging: ch,
            nominal_power_discharging: dis,
            efficiency: 1.0,
            efficiency_curve: None,
        };
        Charger::new("EVC_1_1_1".parse().unwrap(), &p, mode).unwrap()
    }

    fn plugged(departure: Option<u32>, req: f64) -> EvScheduleRow {
        EvScheduleRow {
            month: 1,
            hour: 1,
            ev_state: EvState::PluggedReady,
            charger_id: Some("EVC_1_1_1".parse().unwrap()),
            est_departure_steps: departure,
            req_soc_departure: Some(req),
            est_arrival_steps: None,
            est_soc_arrival: None,
        }
    }

    #[test]
    fn bounds_take_elementwise_minimum() {
        let b = EvBattery::new(&BatteryParams::new(40.0, 7.4), 0.5).unwrap();
        let s = slice_bounds(&charger(22.0, 11.0, SimulationMode::V2g), &b, SimulationMode::V2g);
        assert_eq!(
            s,
            Slice {
                p_min: -7.4,
                p_max: 7.4
            }
        );
    }

    #[test]
    fn no_discharge_outside_v2g() {
        let b = EvBattery::new(&BatteryParams::new(40.0, 7.4), 0.5).unwrap();
        for mode in [SimulationMode::G2v, SimulationMode::NoControl] {
            let s = slice_bounds(&charger(22.0, 11.0, mode), &b, mode);
            assert_eq!(s.p_min, 0.0);
            assert_eq!(s.p_max, 7.4);
        }
    }

    #[test]
    fn zero_available_power_closes_the_slice() {
        let mut p = BatteryParams::new(40.0, 7.4);
        p.power_curve = Curve::new(vec![(0.0, 1.0), (0.8, 1.0), (1.0, 0.0)]).unwrap();
        let b = EvBattery::new(&p, 1.0).unwrap();
        let s = slice_bounds(&charger(22.0, 11.0, SimulationMode::V2g), &b, SimulationMode::V2g);
        assert_eq!(s.p_max, 0.0);
        assert_eq!(s.p_min, 0.0);
    }

    #[test]
    fn overnight_window_gives_ten_slices() {
        // plugged in at 22:00 (step 22), leaves at 08:00 next day
        let window: Vec<_> = (0..10).map(|i| plugged(Some(10 - i), 0.8)).collect();
        let b = EvBattery::new(&BatteryParams::new(40.0, 7.4), 0.3).unwrap();
        let fo = build_flexoffer(
            22,
            &window,
            &charger(22.0, 0.0, SimulationMode::G2v),
            &b,
            SimulationMode::G2v,
        )
        .unwrap();
        assert_eq!(fo.earliest_start, 22);
        assert_eq!(fo.latest_start, Some(32));
        assert_eq!(fo.slices.len(), 10);
        assert_eq!(fo.soc_departure, 0.8);
        assert!(fo.slices.iter().all(|s| s.p_min == 0.0 && s.p_max == 7.4));
    }

    #[test]
    fn unknown_departure_leaves_latest_start_open() {
        let window: Vec<_> = (0..4).map(|_| plugged(None, 0.7)).collect();
        let b = EvBattery::new(&BatteryParams::new(40.0, 7.4), 0.3).unwrap();
        let fo = build_flexoffer(
            5,
            &window,
            &charger(7.4, 7.4, SimulationMode::V2g),
            &b,
            SimulationMode::V2g,
        )
        .unwrap();
        assert_eq!(fo.latest_start, None);
        assert_eq!(fo.slices.len(), 4);
    }

    #[test]
    fn empty_window_is_degenerate() {
        let b = EvBattery::new(&BatteryParams::new(40.0, 7.4), 0.3).unwrap();
        let fo = build_flexoffer(3, &[], &charger(7.4, 0.0, SimulationMode::G2v), &b, SimulationMode::G2v).unwrap();
        assert!(fo.slices.is_empty());
        assert_eq!(fo.latest_start, None);
    }

    #[test]
    fn non_contiguous_window_is_rejected() {
        let b = EvBattery::new(&BatteryParams::new(40.0, 7.4), 0.3).unwrap();
        let c = charger(7.4, 0.0, SimulationMode::G2v);
        let mut window: Vec<_> = (0..3).map(|i| plugged(Some(3 - i), 0.8)).collect();
        window[1].ev_state = EvState::Transit;
        window[1].est_departure_steps = None;
        assert_eq!(
            build_flexoffer(0, &window, &c, &b, SimulationMode::G2v),
            Err(FlexOfferError::NotPlugged(1))
        );
        let window = vec![plugged(Some(3), 0.8), plugged(Some(1), 0.8), plugged(Some(0), 0.8)];
        assert!(matches!(
            build_flexoffer(0, &window, &c, &b, SimulationMode::G2v),
            Err(FlexOfferError::Countdown { index: 1, .. })
        ));
        let window = vec![plugged(Some(3), 0.8), plugged(Some(2), 0.8)];
        assert!(matches!(
            build_flexoffer(0, &window, &c, &b, SimulationMode::G2v),
            Err(FlexOfferError::Length { len: 2, expected: 3 })
        ));
    }

    #[test]
    fn validate_action_is_inclusive() {
        let v2g = Slice {
            p_min: -7.4,
            p_max: 7.4,
        };
        assert!(validate_action(&v2g, 3.7));
        assert!(validate_action(&v2g, 7.4));
        assert!(validate_action(&v2g, -7.4));
        assert!(!validate_action(&v2g, 7.5));
        assert!(!validate_action(&Slice { p_min: 0.0, p_max: 7.4 }, -1.0));
    }

    #[test]
    fn export_has_one_line_per_slice() {
        let rec = FlexOfferRecord {
            ev_id: "EV_1".into(),
            charger_id: "EVC_1_1_1".into(),
            offer: FlexOffer {
                earliest_start: 2,
                latest_start: Some(4),
                soc_departure: 0.8,
                slices: vec![Slice { p_min: 0.0, p_max: 7.4 }; 2],
            },
        };
        let mut buf = Vec::new();
        write_flexoffers(&mut buf, &[rec]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "ev_id,charger_id,t_es,t_ls,soc_departure,slice,p_min,p_max\n\
             EV_1,EVC_1_1_1,2,4,0.8,0,0,7.4\n\
             EV_1,EVC_1_1_1,2,4,0.8,1,0,7.4\n"
        );
    }
}

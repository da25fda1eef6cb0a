use serde::{Deserialize, Serialize};

/// Value reported for fields that do not apply to the charger's state.
pub const SENTINEL: f64 = -1.0;

/// Field order of [`ChargerObservation::to_vector`].
pub const OBSERVATION_FIELDS: [&str; 6] = [
    "state",
    "soc",
    "est_departure",
    "req_soc_departure",
    "est_arrival",
    "est_soc_arrival",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChargerState {
    Empty = 0,
    Connected = 1,
    Incoming = 2,
}

impl ChargerState {
    pub fn code(self) -> u8 {
        self as u8
    }
}

/// What a controller sees for one charger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargerObservation {
    pub state: ChargerState,
    pub soc: f64,
    pub est_departure: f64,
    pub req_soc_departure: f64,
    pub est_arrival: f64,
    pub est_soc_arrival: f64,
}

impl ChargerObservation {
    pub fn empty() -> Self {
        Self {
            state: ChargerState::Empty,
            soc: SENTINEL,
            est_departure: SENTINEL,
            req_soc_departure: SENTINEL,
            est_arrival: SENTINEL,
            est_soc_arrival: SENTINEL,
        }
    }

    pub fn connected(soc: f64, est_departure: Option<u32>, req_soc: Option<f64>) -> Self {
        Self {
            state: ChargerState::Connected,
            soc,
            est_departure: est_departure.map_or(SENTINEL, f64::from),
            req_soc_departure: req_soc.unwrap_or(SENTINEL),
            ..Self::empty()
        }
    }

    pub fn incoming(est_arrival: Option<u32>, est_soc: Option<f64>) -> Self {
        Self {
            state: ChargerState::Incoming,
            est_arrival: est_arrival.map_or(SENTINEL, f64::from),
            est_soc_arrival: est_soc.unwrap_or(SENTINEL),
            ..Self::empty()
        }
    }

    pub fn to_vector(&self) -> [f64; 6] {
        [
            f64::from(self.state.code()),
            self.soc,
            self.est_departure,
            self.req_soc_departure,
            self.est_arrival,
            self.est_soc_arrival,
        ]
    }

    /// Whether fields that do not apply to the state hold the sentinel.
    pub fn is_consistent(&self) -> bool {
        let s = |v: f64| v == SENTINEL;
        let frac = |v: f64| (0.0..=1.0).contains(&v);
        match self.state {
            ChargerState::Empty => {
                s(self.soc)
                    && s(self.est_departure)
                    && s(self.req_soc_departure)
                    && s(self.est_arrival)
                    && s(self.est_soc_arrival)
            }
            ChargerState::Connected => frac(self.soc) && s(self.est_arrival) && s(self.est_soc_arrival),
            ChargerState::Incoming => s(self.soc) && s(self.est_departure) && s(self.req_soc_departure),
        }
    }
}

/// Per-charger limits a controller can plan with, as SoC fractions per step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChargerLimits {
    pub max_charge_soc_gain: f64,
    pub max_discharge_soc_loss: f64,
}

/// Exogenous signals for the step about to be taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Context {
    pub month: u8,
    pub hour: u8,
    pub price: f64,
    pub carbon_intensity: f64,
    pub limits: Vec<ChargerLimits>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub t: usize,
    pub chargers: Vec<ChargerObservation>,
    pub context: Context,
}

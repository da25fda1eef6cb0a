//! Built-in policies: the uncontrolled baseline and a price-threshold rule.

use crate::env::{ChargerLimits, ChargerObservation, ChargerState, Observation, RbcSettings};
use crate::SimulationMode;

/// Slack for the deadline arithmetic so rounding never turns a feasible plan into a shortfall.
const DEADLINE_EPS: f64 = 1e-9;

/// Maps an observation to one action per charger, in charger order.
pub trait Policy {
    fn act(&mut self, observation: &Observation) -> Vec<f64>;
}

/// Charges at full power whenever a vehicle is plugged in and not full.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoControl;

pub fn no_control(chargers: &[ChargerObservation]) -> Vec<f64> {
    chargers
        .iter()
        .map(|c| {
            if c.state == ChargerState::Connected && c.soc < 1.0 {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

impl Policy for NoControl {
    fn act(&mut self, observation: &Observation) -> Vec<f64> {
        no_control(&observation.chargers)
    }
}

/// Charges when power is cheap, discharges (V2G) when it is expensive, and
/// otherwise spreads the remaining energy so the vehicle still leaves with its
/// required SoC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceRule {
    pub low_price: f64,
    pub high_price: f64,
    pub reserve_soc: f64,
    pub mode: SimulationMode,
}

impl PriceRule {
    /// Thresholds from `settings`, falling back to the 25th/75th percentile of `prices`.
    pub fn from_prices(prices: &[f64], settings: &RbcSettings, mode: SimulationMode) -> Self {
        let low = settings.low_price.unwrap_or_else(|| percentile(prices, 0.25));
        let high = settings.high_price.unwrap_or_else(|| percentile(prices, 0.75));
        Self {
            low_price: low.min(high),
            high_price: high.max(low),
            reserve_soc: settings.reserve_soc,
            mode,
        }
    }

    pub fn decide(&self, obs: &ChargerObservation, limits: &ChargerLimits, price: f64) -> f64 {
        if obs.state != ChargerState::Connected {
            return 0.0;
        }
        let can_discharge = self.mode.allows_discharge() && limits.max_discharge_soc_loss > 0.0;
        let gain = limits.max_charge_soc_gain;
        let loss = limits.max_discharge_soc_loss;
        let soc = obs.soc;
        let discharge_above_reserve = || -((soc - self.reserve_soc) / loss).min(1.0);

        if obs.est_departure < 1.0 || obs.req_soc_departure < 0.0 {
            // no deadline known: behave like a stationary battery
            if price <= self.low_price && soc < 1.0 {
                return 1.0;
            }
            if price >= self.high_price && can_discharge && soc > self.reserve_soc {
                return discharge_above_reserve();
            }
            return 0.0;
        }

        let steps = obs.est_departure;
        let need = (obs.req_soc_departure - soc).max(0.0);
        if gain <= 0.0 {
            return 0.0;
        }
        if need > DEADLINE_EPS && need > (steps - 1.0) * gain - DEADLINE_EPS {
            return 1.0;
        }
        if price <= self.low_price {
            return if soc < 1.0 { 1.0 } else { 0.0 };
        }
        if price >= self.high_price && can_discharge && soc > self.reserve_soc {
            let action = discharge_above_reserve();
            // energy given up now must be recoverable in the remaining steps
            let after = soc + action * loss;
            if obs.req_soc_departure - after <= (steps - 1.0) * gain - DEADLINE_EPS {
                return action;
            }
            return 0.0;
        }
        (need / (steps * gain)).min(1.0)
    }
}

impl Policy for PriceRule {
    fn act(&mut self, observation: &Observation) -> Vec<f64> {
        let price = observation.context.price;
        observation
            .chargers
            .iter()
            .zip(&observation.context.limits)
            .map(|(o, l)| self.decide(o, l, price))
            .collect()
    }
}

/// Linear-interpolation percentile (`q` in [0, 1]); 0 for an empty series.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if sorted.is_empty() {
        return 0.0;
    }
    sorted.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule(mode: SimulationMode) -> PriceRule {
        PriceRule {
            low_price: 0.1,
            high_price: 0.3,
            reserve_soc: 0.2,
            mode,
        }
    }

    fn limits() -> ChargerLimits {
        ChargerLimits {
            max_charge_soc_gain: 0.1,
            max_discharge_soc_loss: 0.1,
        }
    }

    #[test]
    fn no_control_cases() {
        let obs = [
            ChargerObservation::connected(0.3, Some(4), Some(0.8)),
            ChargerObservation::empty(),
            ChargerObservation::connected(1.0, Some(4), Some(0.8)),
            ChargerObservation::incoming(Some(2), Some(0.4)),
        ];
        assert_eq!(no_control(&obs), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn cheap_price_charges() {
        let o = ChargerObservation::connected(0.5, Some(10), Some(0.8));
        assert_eq!(rule(SimulationMode::V2g).decide(&o, &limits(), 0.05), 1.0);
    }

    #[test]
    fn expensive_price_discharges_in_v2g() {
        let o = ChargerObservation::connected(0.9, Some(20), Some(0.8));
        assert_eq!(rule(SimulationMode::V2g).decide(&o, &limits(), 0.4), -1.0);
        assert!(rule(SimulationMode::G2v).decide(&o, &limits(), 0.4) >= 0.0);
    }

    #[test]
    fn deadline_forces_charging() {
        // 3 steps left, 0.3 to gain at 0.1 per step
        let o = ChargerObservation::connected(0.5, Some(3), Some(0.8));
        assert_eq!(rule(SimulationMode::V2g).decide(&o, &limits(), 0.4), 1.0);
    }

    #[test]
    fn mid_price_spreads_need() {
        let o = ChargerObservation::connected(0.6, Some(10), Some(0.8));
        let a = rule(SimulationMode::G2v).decide(&o, &limits(), 0.2);
        assert!((a - 0.2).abs() < 1e-12);
    }

    #[test]
    fn discharge_withheld_when_unrecoverable() {
        // 4 steps left, 0.25 short: discharging 0.1 would need 0.35 in 3 steps
        let o = ChargerObservation::connected(0.55, Some(4), Some(0.8));
        assert_eq!(rule(SimulationMode::V2g).decide(&o, &limits(), 0.4), 0.0);
    }

    #[test]
    fn quartiles() {
        let p = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&p, 0.25), 2.0);
        assert_eq!(percentile(&p, 0.75), 4.0);
        assert_eq!(percentile(&[1.0, 2.0], 0.5), 1.5);
    }
}

use serde::{Deserialize, Serialize};

/// Weights of the per-building reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardWeights {
    pub cost: f64,
    pub carbon: f64,
    pub ramp: f64,
    pub soc: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            cost: 1.0,
            carbon: 1.0,
            ramp: 0.1,
            soc: 10.0,
        }
    }
}

impl RewardWeights {
    pub fn zero() -> Self {
        Self {
            cost: 0.0,
            carbon: 0.0,
            ramp: 0.0,
            soc: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.cost, self.carbon, self.ramp, self.soc]
            .iter()
            .all(|w| w.is_finite())
    }
}

/// Reward of one building for one step.
///
/// `shortfalls` are `max(0, required - actual)` SoC gaps of vehicles that
/// departed from the building's chargers this step. Without a previous net
/// value the ramp term is zero.
pub fn building_reward(
    weights: &RewardWeights,
    net: f64,
    previous_net: Option<f64>,
    price: f64,
    carbon_intensity: f64,
    shortfalls: &[f64],
) -> f64 {
    let import = net.max(0.0);
    let ramp = previous_net.map_or(0.0, |p| (net - p).abs());
    let penalty: f64 = shortfalls.iter().map(|s| s * s).sum();
    -(weights.cost * import * price + weights.carbon * import * carbon_intensity + weights.ramp * ramp)
        - weights.soc * penalty
}

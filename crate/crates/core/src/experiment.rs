//! Baseline-and-policy runs as used by the command line.

use serde::{Deserialize, Serialize};

use crate::controllers::{NoControl, Policy, PriceRule};
use crate::env::{EnvError, EnvOptions, Environment, Scenario};
use crate::kpi::{compute_kpis, normalize, KpiError, KpiReport};
use crate::trace::{run_episode, Trace};
use crate::SimulationMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    NoControl,
    Rbc,
    Bridge,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::NoControl => "nocontrol",
            PolicyKind::Rbc => "rbc",
            PolicyKind::Bridge => "bridge",
        }
    }
}

/// In-process policy for `kind`; `None` for the bridge, which runs out of process.
pub fn in_process_policy(kind: PolicyKind, scenario: &Scenario) -> Option<Box<dyn Policy>> {
    match kind {
        PolicyKind::NoControl => Some(Box::new(NoControl)),
        PolicyKind::Rbc => Some(Box::new(PriceRule::from_prices(
            &scenario.price,
            &scenario.rbc,
            scenario.mode,
        ))),
        PolicyKind::Bridge => None,
    }
}

/// The reference run: No-Control dynamics with the uncontrolled policy.
pub fn baseline_trace(
    scenario: &Scenario,
    seed: u64,
    steps: Option<usize>,
    options: EnvOptions,
) -> Result<Trace, EnvError> {
    let base = scenario.with_overrides(Some(SimulationMode::NoControl), None)?;
    let mut env = Environment::new(base, options)?;
    run_episode(&mut env, &mut NoControl, seed, steps)
}

pub fn policy_trace(
    scenario: &Scenario,
    policy: &mut dyn Policy,
    seed: u64,
    steps: Option<usize>,
    options: EnvOptions,
) -> Result<Trace, EnvError> {
    let mut env = Environment::new(scenario.clone(), options)?;
    run_episode(&mut env, policy, seed, steps)
}

/// KPIs of `trace` relative to the baseline over the same steps.
///
/// A run that stopped early (an agent ending a bridge session) is compared
/// against the matching prefix of the baseline.
pub fn evaluate(trace: &Trace, baseline: &Trace) -> Result<KpiReport, KpiError> {
    let raw = compute_kpis(&trace.kpi_inputs())?;
    let mut base_inputs = baseline.kpi_inputs();
    base_inputs.truncate(trace.steps.len());
    let base = compute_kpis(&base_inputs)?;
    Ok(normalize(&raw, &base))
}

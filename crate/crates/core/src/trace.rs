//! Per-step records of an episode, their CSV form and the KPI inputs derived from them.

use std::io::Write;

use serde::Serialize;

use crate::controllers::Policy;
use crate::env::{ChargerState, Departure, EnvError, Environment, Observation, StepResult};
use crate::flexoffer::FlexOfferRecord;
use crate::kpi::KpiInputs;

/// Shortfalls at or below this SoC fraction count as met.
pub const SHORTFALL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChargerRecord {
    pub state: ChargerState,
    pub soc: f64,
    pub req_soc: f64,
    pub est_departure: f64,
    pub action: f64,
    pub consumption: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceStep {
    pub step: usize,
    pub month: u8,
    pub hour: u8,
    pub price: f64,
    pub carbon: f64,
    pub building_net: Vec<f64>,
    /// Building load plus positive EV charging.
    pub demand: f64,
    pub chargers: Vec<ChargerRecord>,
}

impl TraceStep {
    pub fn district_net(&self) -> f64 {
        self.building_net.iter().sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TraceSummary {
    pub steps: usize,
    pub departures: usize,
    /// Departures below the required SoC although full-power charging could have met it.
    pub feasible_shortfalls: usize,
    pub infeasible_shortfalls: usize,
    pub total_shortfall: f64,
    pub flagged_actions: usize,
    pub deferred_connections: usize,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub buildings: Vec<String>,
    pub chargers: Vec<String>,
    pub timestep_hours: f64,
    pub steps: Vec<TraceStep>,
    pub departures: Vec<Departure>,
    pub flexoffers: Vec<FlexOfferRecord>,
    pub summary: TraceSummary,
}

/// Collects steps as they happen; shared by in-process runs and bridge sessions.
#[derive(Debug, Clone)]
pub struct TraceRecorder {
    trace: Trace,
}

impl TraceRecorder {
    pub fn new(env: &Environment) -> Self {
        let scenario = env.scenario();
        Self {
            trace: Trace {
                buildings: scenario.buildings.iter().map(|b| b.name.clone()).collect(),
                chargers: env.charger_ids().iter().map(ToString::to_string).collect(),
                timestep_hours: scenario.timestep_hours,
                steps: Vec::new(),
                departures: Vec::new(),
                flexoffers: Vec::new(),
                summary: TraceSummary::default(),
            },
        }
    }

    /// Records the step taken from `before` with `actions`.
    pub fn record(&mut self, env: &Environment, before: &Observation, actions: &[f64], result: &StepResult) {
        let t = before.t;
        let scenario = env.scenario();
        let load: f64 = scenario.buildings.iter().map(|b| b.load[t]).sum();
        let charging: f64 = result
            .chargers
            .iter()
            .map(|c| c.transfer.charger_consumption.max(0.0))
            .sum();
        let chargers = before
            .chargers
            .iter()
            .zip(actions)
            .zip(&result.chargers)
            .map(|((o, &action), c)| ChargerRecord {
                state: o.state,
                soc: o.soc,
                req_soc: o.req_soc_departure,
                est_departure: o.est_departure,
                action,
                consumption: c.transfer.charger_consumption,
            })
            .collect();
        self.trace.steps.push(TraceStep {
            step: t,
            month: before.context.month,
            hour: before.context.hour,
            price: scenario.price[t],
            carbon: scenario.carbon[t],
            building_net: result.net_electricity.clone(),
            demand: load + charging,
            chargers,
        });

        let s = &mut self.trace.summary;
        s.steps += 1;
        s.flagged_actions += result.chargers.iter().filter(|c| c.flag.is_some()).count();
        s.deferred_connections += result
            .events
            .iter()
            .filter(|e| matches!(e, crate::env::EmsEvent::Deferred { .. }))
            .count();
        s.violations
            .extend(result.violations.iter().map(|v| format!("step {t}: {v}")));
        for d in &result.departures {
            s.departures += 1;
            s.total_shortfall += d.shortfall;
            if d.shortfall > SHORTFALL_TOLERANCE {
                if d.feasible {
                    s.feasible_shortfalls += 1;
                } else {
                    s.infeasible_shortfalls += 1;
                }
            }
        }
        self.trace.departures.extend(result.departures.iter().cloned());
    }

    pub fn finish(mut self, env: &Environment) -> Trace {
        self.trace.flexoffers = env.flexoffers().to_vec();
        self.trace
    }
}

/// Resets `env` with `seed` and runs `policy` for at most `max_steps` steps (to the horizon by default).
pub fn run_episode<P: Policy + ?Sized>(
    env: &mut Environment,
    policy: &mut P,
    seed: u64,
    max_steps: Option<usize>,
) -> Result<Trace, EnvError> {
    let mut observation = env.reset(seed);
    let mut recorder = TraceRecorder::new(env);
    let limit = max_steps.unwrap_or(usize::MAX);
    while !env.is_done() && recorder.trace.steps.len() < limit {
        let actions = policy.act(&observation);
        let result = env.step(&actions)?;
        recorder.record(env, &observation, &actions, &result);
        observation = result.observation;
    }
    Ok(recorder.finish(env))
}

impl Trace {
    pub fn district_net(&self) -> Vec<f64> {
        self.steps.iter().map(TraceStep::district_net).collect()
    }

    pub fn kpi_inputs(&self) -> KpiInputs {
        KpiInputs {
            net: self.district_net(),
            price: self.steps.iter().map(|s| s.price).collect(),
            carbon: self.steps.iter().map(|s| s.carbon).collect(),
            demand: self.steps.iter().map(|s| s.demand).collect(),
            months: self.steps.iter().map(|s| s.month).collect(),
            timestep_hours: self.timestep_hours,
        }
    }

    /// Writes the per-step CSV; with a baseline, its net columns sit next to this run's.
    pub fn write_csv<W: Write>(&self, out: W, baseline: Option<&Trace>) -> std::io::Result<()> {
        let mut out = std::io::BufWriter::new(out);
        let mut header = vec!["step", "month", "hour", "price", "carbon", "district_net"]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>();
        if baseline.is_some() {
            header.push("district_net_baseline".into());
        }
        for b in &self.buildings {
            header.push(format!("net_{b}"));
            if baseline.is_some() {
                header.push(format!("net_{b}_baseline"));
            }
        }
        for c in &self.chargers {
            for field in ["state", "soc", "req_soc", "est_departure", "action", "consumption"] {
                header.push(format!("{c}_{field}"));
            }
        }
        writeln!(out, "{}", header.join(","))?;

        let mut cells: Vec<String> = Vec::with_capacity(header.len());
        for (i, s) in self.steps.iter().enumerate() {
            let base = baseline.and_then(|b| b.steps.get(i));
            cells.clear();
            cells.push(s.step.to_string());
            cells.push(s.month.to_string());
            cells.push(s.hour.to_string());
            cells.push(s.price.to_string());
            cells.push(s.carbon.to_string());
            cells.push(s.district_net().to_string());
            if baseline.is_some() {
                cells.push(base.map_or(String::new(), |b| b.district_net().to_string()));
            }
            for (j, net) in s.building_net.iter().enumerate() {
                cells.push(net.to_string());
                if baseline.is_some() {
                    cells.push(
                        base.and_then(|b| b.building_net.get(j))
                            .map_or(String::new(), ToString::to_string),
                    );
                }
            }
            for c in &s.chargers {
                cells.push(c.state.code().to_string());
                cells.push(c.soc.to_string());
                cells.push(c.req_soc.to_string());
                cells.push(c.est_departure.to_string());
                cells.push(c.action.to_string());
                cells.push(c.consumption.to_string());
            }
            writeln!(out, "{}", cells.join(","))?;
        }
        out.flush()
    }

    pub fn to_csv_string(&self, baseline: Option<&Trace>) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, baseline).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

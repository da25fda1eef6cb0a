//! Line-delimited JSON control surface for agents running in another process.
//!
//! Each line is one object with a `type` field. Agent to environment:
//! `hello`, `reset {seed}`, `observe`, `act {actions}`, `done`. The environment
//! answers `hello`, `observation`, `step`, `error` or `bye`. Observation
//! vectors follow [`OBSERVATION_FIELDS`]. The field set is versioned by
//! [`PROTOCOL_VERSION`].

use std::io::{BufRead, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::env::{ActionFlag, Context, EnvError, Environment, Observation, StepResult, OBSERVATION_FIELDS};
use crate::trace::{Trace, TraceRecorder};
use crate::SimulationMode;

pub const PROTOCOL_VERSION: u32 = 1;

/// How often a listening bridge checks for an incoming connection.
pub const ACCEPT_POLL: Duration = Duration::from_millis(50);

#[derive(Debug, thiserror::Error)]
pub enum BridgeError {
    #[error("bridge i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("no agent connected within {0:?}")]
    ConnectTimeout(Duration),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Request {
    Hello,
    Reset {
        #[serde(default)]
        seed: Option<u64>,
    },
    Observe,
    Act {
        actions: Vec<f64>,
    },
    Done,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Response {
    Hello {
        protocol: u32,
        mode: SimulationMode,
        chargers: Vec<String>,
        buildings: Vec<String>,
        horizon: usize,
        timestep_hours: f64,
        observation_fields: Vec<String>,
        action_range: (f64, f64),
    },
    Observation {
        t: usize,
        observations: Vec<[f64; 6]>,
        context: Context,
    },
    Step {
        t: usize,
        observations: Vec<[f64; 6]>,
        context: Context,
        rewards: Vec<f64>,
        net_electricity: Vec<f64>,
        done: bool,
        flags: Vec<Option<ActionFlag>>,
    },
    Error {
        message: String,
    },
    Bye,
}

fn vectors(observation: &Observation) -> Vec<[f64; 6]> {
    observation.chargers.iter().map(|c| c.to_vector()).collect()
}

impl Response {
    fn observation(observation: &Observation) -> Self {
        Response::Observation {
            t: observation.t,
            observations: vectors(observation),
            context: observation.context.clone(),
        }
    }

    fn step(result: &StepResult) -> Self {
        Response::Step {
            t: result.t,
            observations: vectors(&result.observation),
            context: result.observation.context.clone(),
            rewards: result.rewards.clone(),
            net_electricity: result.net_electricity.clone(),
            done: result.done,
            flags: result.chargers.iter().map(|c| c.flag).collect(),
        }
    }
}

fn send<W: Write>(out: &mut W, response: &Response) -> std::io::Result<()> {
    let line = serde_json::to_string(response).map_err(std::io::Error::other)?;
    writeln!(out, "{line}")?;
    out.flush()
}

/// Serves one agent until it sends `done` or closes the stream.
///
/// The environment is reset with `seed` before the first request; the returned
/// trace covers the steps since the last reset. An invariant violation in
/// strict mode ends the session with an error.
pub fn serve<R: BufRead, W: Write>(
    env: &mut Environment,
    seed: u64,
    reader: R,
    mut writer: W,
) -> Result<Trace, BridgeError> {
    let mut observation = env.reset(seed);
    let mut recorder = TraceRecorder::new(env);
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let request: Request = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                send(
                    &mut writer,
                    &Response::Error {
                        message: format!("bad request: {e}"),
                    },
                )?;
                continue;
            }
        };
        match request {
            Request::Hello => {
                let (lo, hi) = env.mode().action_range();
                let scenario = env.scenario();
                send(
                    &mut writer,
                    &Response::Hello {
                        protocol: PROTOCOL_VERSION,
                        mode: env.mode(),
                        chargers: env.charger_ids().iter().map(ToString::to_string).collect(),
                        buildings: scenario.buildings.iter().map(|b| b.name.clone()).collect(),
                        horizon: env.horizon(),
                        timestep_hours: scenario.timestep_hours,
                        observation_fields: OBSERVATION_FIELDS.iter().map(|s| s.to_string()).collect(),
                        action_range: (lo, hi),
                    },
                )?;
            }
            Request::Reset { seed: s } => {
                observation = env.reset(s.unwrap_or(seed));
                recorder = TraceRecorder::new(env);
                send(&mut writer, &Response::observation(&observation))?;
            }
            Request::Observe => send(&mut writer, &Response::observation(&observation))?,
            Request::Act { actions } => match env.step(&actions) {
                Ok(result) => {
                    recorder.record(env, &observation, &actions, &result);
                    send(&mut writer, &Response::step(&result))?;
                    observation = result.observation;
                }
                Err(e @ EnvError::InvariantViolation { .. }) => {
                    send(&mut writer, &Response::Error { message: e.to_string() })?;
                    return Err(e.into());
                }
                Err(e) => send(&mut writer, &Response::Error { message: e.to_string() })?,
            },
            Request::Done => {
                send(&mut writer, &Response::Bye)?;
                break;
            }
        }
    }
    Ok(recorder.finish(env))
}

/// Waits up to `timeout` for one agent to connect.
pub fn accept(listener: &TcpListener, timeout: Duration) -> Result<TcpStream, BridgeError> {
    listener.set_nonblocking(true)?;
    let deadline = Instant::now() + timeout;
    loop {
        match listener.accept() {
            Ok((stream, _)) => {
                stream.set_nonblocking(false)?;
                return Ok(stream);
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                if Instant::now() >= deadline {
                    return Err(BridgeError::ConnectTimeout(timeout));
                }
                std::thread::sleep(ACCEPT_POLL);
            }
            Err(e) => return Err(e.into()),
        }
    }
}

/// Binds `addr`, waits for one agent and serves it.
pub fn serve_tcp<A: ToSocketAddrs>(
    env: &mut Environment,
    seed: u64,
    addr: A,
    timeout: Duration,
) -> Result<Trace, BridgeError> {
    let listener = TcpListener::bind(addr)?;
    serve_listener(env, seed, &listener, timeout)
}

pub fn serve_listener(
    env: &mut Environment,
    seed: u64,
    listener: &TcpListener,
    timeout: Duration,
) -> Result<Trace, BridgeError> {
    let stream = accept(listener, timeout)?;
    let reader = std::io::BufReader::new(stream.try_clone()?);
    serve(env, seed, reader, stream)
}

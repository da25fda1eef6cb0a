//! Discrete-time simulation of electric-vehicle chargers embedded in an
//! energy community.
//!
//! The crate is organised bottom-up:
//!
//! - [`models`]: charger metering and the EV battery state model.
//! - [`flexoffer`]: per-step power envelopes for plugged-in vehicles.
//! - [`dataset`]: the per-vehicle schedule files, their validation, and a
//!   synthetic household/workplace generator.
//! - [`env`]: scenario loading and the `reset`/`step` loop.
//! - [`controllers`]: the no-control baseline and a price-threshold rule.
//! - [`kpi`]: district KPIs and baseline normalisation.
//! - [`trace`]: episode recording and plot-ready CSV output.
//! - [`bridge`]: newline-delimited JSON protocol for out-of-process agents.
//! - [`synthetic`]: builder for complete demo scenarios.

pub mod bridge;
pub mod calendar;
pub mod controllers;
pub mod dataset;
pub mod env;
pub mod experiment;
pub mod flexoffer;
pub mod kpi;
pub mod mode;
pub mod models;
pub mod synthetic;
pub mod trace;

pub use mode::SimulationMode;

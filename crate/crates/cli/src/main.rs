//! `evflex` command line: schedule generation, simulation runs and KPI comparison.

mod manifest;

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use evflex_core::bridge::{self, BridgeError};
use evflex_core::calendar::Calendar;
use evflex_core::dataset::{schedule_file_name, schedule_stats, write_schedule, GenerationPlan};
use evflex_core::env::{load_config, EnvError, EnvOptions, Environment};
use evflex_core::experiment::{self, PolicyKind};
use evflex_core::flexoffer::write_flexoffers;
use evflex_core::kpi::{format_table, read_kpi_csv, write_kpi_csv};
use evflex_core::synthetic::{build_district, write_scenario, DistrictSpec};
use evflex_core::trace::Trace;
use evflex_core::SimulationMode;

use manifest::Manifest;

const EXIT_USAGE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "evflex", version, about = "EV charging and V2G district simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic EV schedules from a parameters file.
    Generate {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run the no-control baseline and a policy on a scenario, writing trace and KPI files.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long, value_enum, default_value = "nocontrol")]
        policy: PolicyArg,
        /// Seed for arrival-SoC noise; defaults to the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Horizon in steps; defaults to the scenario horizon.
        #[arg(long)]
        steps: Option<usize>,
        /// Reject out-of-range actions and stop on the first invariant violation.
        #[arg(long)]
        strict: bool,
        /// Serve the bridge on this TCP address instead of stdin/stdout.
        #[arg(long)]
        bridge_listen: Option<String>,
        /// Seconds to wait for a bridge agent to connect.
        #[arg(long, default_value_t = 60)]
        bridge_timeout: u64,
        #[arg(long, env = "EVFLEX_OUT_DIR", default_value = "out")]
        out_dir: PathBuf,
    },
    /// Side-by-side KPI table of finished runs.
    Compare {
        #[arg(required = true, num_args = 2..)]
        runs: Vec<PathBuf>,
        /// Also write the table to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic district scenario (buildings, tariff, generated schedules).
    Scenario {
        #[arg(long)]
        out_dir: PathBuf,
        /// JSON file with district settings; flags below override it.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        days: Option<usize>,
        #[arg(long)]
        homes: Option<usize>,
        #[arg(long)]
        commuters: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    V2g,
    G2v,
    Nocontrol,
}

impl From<ModeArg> for SimulationMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::V2g => SimulationMode::V2g,
            ModeArg::G2v => SimulationMode::G2v,
            ModeArg::Nocontrol => SimulationMode::NoControl,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Nocontrol,
    Rbc,
    Bridge,
}

impl From<PolicyArg> for PolicyKind {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Nocontrol => PolicyKind::NoControl,
            PolicyArg::Rbc => PolicyKind::Rbc,
            PolicyArg::Bridge => PolicyKind::Bridge,
        }
    }
}

/// An error paired with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

trait ExitWith<T> {
    fn exit_with(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ExitWith<T> for Result<T, E> {
    fn exit_with(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure { code, error: e.into() })
    }
}

fn env_code(e: &EnvError) -> u8 {
    match e {
        EnvError::Config(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Generate { params, out_dir } => cmd_generate(&params, &out_dir),
        Command::Run {
            scenario,
            mode,
            policy,
            seed,
            steps,
            strict,
            bridge_listen,
            bridge_timeout,
            out_dir,
        } => cmd_run(RunArgs {
            scenario,
            mode: mode.map(Into::into),
            policy: policy.into(),
            seed,
            steps,
            strict,
            bridge_listen,
            bridge_timeout: Duration::from_secs(bridge_timeout),
            out_dir,
        }),
        Command::Compare { runs, out } => cmd_compare(&runs, out.as_deref()),
        Command::Scenario {
            out_dir,
            spec,
            days,
            homes,
            commuters,
            seed,
            mode,
        } => cmd_scenario(&out_dir, spec.as_deref(), days, homes, commuters, seed, mode),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", describe(&f.error));
            ExitCode::from(f.code)
        }
    }
}

/// The error chain, skipping causes already spelled out by the message above them.
fn describe(error: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in error.chain() {
        let part = cause.to_string();
        if !text.contains(&part) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&part);
        }
    }
    text
}

fn cmd_generate(params: &Path, out_dir: &Path) -> Result<(), Failure> {
    let text = fs::read_to_string(params)
        .with_context(|| format!("reading {}", params.display()))
        .exit_with(EXIT_USAGE)?;
    let plan = GenerationPlan::from_json_str(&text).exit_with(EXIT_USAGE)?;
    let generated = plan.generate().exit_with(EXIT_USAGE)?;
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))
        .exit_with(EXIT_RUNTIME)?;

    let mut manifest = Manifest::new("generate", out_dir);
    manifest.seed = Some(plan.seed);
    manifest.steps = Some(plan.horizon_steps().exit_with(EXIT_USAGE)?);
    let mut summary = String::from(
        "ev_id,mode,seed,steps,departures,departure_hour_mean,departure_hour_std,arrivals,arrival_hour_mean,arrival_hour_std,plugged_fraction\n",
    );
    for (id, params, rows) in &generated {
        let mut buf = Vec::new();
        write_schedule(&mut buf, rows).exit_with(EXIT_RUNTIME)?;
        manifest
            .emit(out_dir, &schedule_file_name(id), &buf)
            .exit_with(EXIT_RUNTIME)?;
        let stats = schedule_stats(rows, &Calendar::new(params.calendar_start, params.timestep_hours));
        summary.push_str(&format!(
            "{id},{},{},{},{},{:.4},{:.4},{},{:.4},{:.4},{:.4}\n",
            serde_json::to_value(params.mode)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default(),
            params.seed,
            stats.steps,
            stats.departures,
            stats.departure_hour_mean,
            stats.departure_hour_std,
            stats.arrivals,
            stats.arrival_hour_mean,
            stats.arrival_hour_std,
            stats.plugged_fraction
        ));
    }
    manifest
        .emit(out_dir, "summary.csv", summary.as_bytes())
        .exit_with(EXIT_RUNTIME)?;
    manifest.write(out_dir).exit_with(EXIT_RUNTIME)?;
    eprintln!("generated {} schedule(s) in {}", generated.len(), out_dir.display());
    Ok(())
}

struct RunArgs {
    scenario: PathBuf,
    mode: Option<SimulationMode>,
    policy: PolicyKind,
    seed: Option<u64>,
    steps: Option<usize>,
    strict: bool,
    bridge_listen: Option<String>,
    bridge_timeout: Duration,
    out_dir: PathBuf,
}

fn bridge_trace(args: &RunArgs, env: &mut Environment, seed: u64) -> Result<Trace, Failure> {
    let result = match &args.bridge_listen {
        Some(addr) => {
            eprintln!(
                "waiting up to {}s for a bridge agent on {addr}",
                args.bridge_timeout.as_secs()
            );
            bridge::serve_tcp(env, seed, addr.as_str(), args.bridge_timeout)
        }
        None => {
            let stdin = std::io::stdin();
            bridge::serve(env, seed, stdin.lock(), std::io::stdout().lock())
        }
    };
    result.map_err(|e| {
        let code = match &e {
            BridgeError::Env(inner) => env_code(inner),
            _ => EXIT_RUNTIME,
        };
        Failure { code, error: e.into() }
    })
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let base = load_config(&args.scenario).exit_with(EXIT_CONFIG)?;
    let scenario = base.with_overrides(args.mode, args.steps).exit_with(EXIT_CONFIG)?;
    let seed = args.seed.unwrap_or(scenario.seed);
    let options = EnvOptions { strict: args.strict };

    let run_err = |e: EnvError| Failure {
        code: env_code(&e),
        error: e.into(),
    };
    let baseline = experiment::baseline_trace(&scenario, seed, None, options).map_err(run_err)?;
    let trace = match experiment::in_process_policy(args.policy, &scenario) {
        Some(mut policy) => {
            experiment::policy_trace(&scenario, policy.as_mut(), seed, None, options).map_err(run_err)?
        }
        None => {
            let mut env = Environment::new(scenario.clone(), options).map_err(run_err)?;
            bridge_trace(&args, &mut env, seed)?
        }
    };
    let report = experiment::evaluate(&trace, &baseline).exit_with(EXIT_RUNTIME)?;

    let out = &args.out_dir;
    fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .exit_with(EXIT_RUNTIME)?;
    let mut manifest = Manifest::new("run", out);
    manifest.scenario = Some(args.scenario.display().to_string());
    manifest.mode = Some(scenario.mode.to_string());
    manifest.policy = Some(args.policy.as_str().into());
    manifest.seed = Some(seed);
    manifest.steps = Some(trace.steps.len());

    let emit = |m: &mut Manifest, name: &str, bytes: Vec<u8>| m.emit(out, name, &bytes).exit_with(EXIT_RUNTIME);
    emit(
        &mut manifest,
        "trace.csv",
        trace.to_csv_string(Some(&baseline)).into_bytes(),
    )?;
    let mut kpis = Vec::new();
    write_kpi_csv(&mut kpis, &report).exit_with(EXIT_RUNTIME)?;
    emit(&mut manifest, "kpis.csv", kpis)?;
    let label = format!("{}/{}", scenario.mode, args.policy.as_str());
    emit(
        &mut manifest,
        "kpis.txt",
        format_table(&[(label, &report)]).into_bytes(),
    )?;
    let mut offers = Vec::new();
    write_flexoffers(&mut offers, &trace.flexoffers).exit_with(EXIT_RUNTIME)?;
    emit(&mut manifest, "flexoffers.csv", offers)?;
    let summary = serde_json::json!({
        "summary": trace.summary,
        "baseline_summary": baseline.summary,
        "departures": trace.departures,
    });
    let mut summary_text = serde_json::to_string_pretty(&summary).exit_with(EXIT_RUNTIME)?;
    summary_text.push('\n');
    emit(&mut manifest, "summary.json", summary_text.into_bytes())?;
    manifest.write(out).exit_with(EXIT_RUNTIME)?;

    let s = &trace.summary;
    eprintln!(
        "{} steps, {} departures, {} feasible shortfall(s), {} flagged action(s)",
        s.steps, s.departures, s.feasible_shortfalls, s.flagged_actions
    );
    if !s.violations.is_empty() {
        eprintln!(
            "warning: {} invariant violation(s); first: {}",
            s.violations.len(),
            s.violations[0]
        );
    }
    let mut stderr = std::io::stderr();
    let _ = write!(stderr, "{}", format_table(&[(scenario.mode.to_string(), &report)]));
    Ok(())
}

fn cmd_compare(runs: &[PathBuf], out: Option<&Path>) -> Result<(), Failure> {
    let mut reports = Vec::new();
    let mut horizon = None;
    for dir in runs {
        let manifest = Manifest::read(dir).exit_with(EXIT_CONFIG)?;
        let steps = manifest
            .steps
            .ok_or_else(|| anyhow!("{}: manifest lacks a step count", dir.display()));
        let steps = steps.exit_with(EXIT_CONFIG)?;
        match horizon {
            None => horizon = Some((steps, dir.clone())),
            Some((h, ref first)) if h != steps => {
                return Err(anyhow!(
                    "horizon mismatch: {} has {h} steps, {} has {steps}",
                    first.display(),
                    dir.display()
                ))
                .exit_with(EXIT_CONFIG);
            }
            Some(_) => {}
        }
        let path = dir.join("kpis.csv");
        let file = fs::File::open(&path)
            .with_context(|| format!("opening {}", path.display()))
            .exit_with(EXIT_CONFIG)?;
        let report = read_kpi_csv(BufReader::new(file))
            .with_context(|| format!("schema error in {}", path.display()))
            .exit_with(EXIT_CONFIG)?;
        let name = dir
            .file_name()
            .map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned());
        reports.push((name, report));
    }
    let columns: Vec<(String, &_)> = reports.iter().map(|(n, r)| (n.clone(), r)).collect();
    let table = format_table(&columns);
    print!("{table}");
    if let Some(path) = out {
        fs::write(path, &table)
            .with_context(|| format!("writing {}", path.display()))
            .exit_with(EXIT_RUNTIME)?;
    }
    Ok(())
}

fn cmd_scenario(
    out_dir: &Path,
    spec_path: Option<&Path>,
    days: Option<usize>,
    homes: Option<usize>,
    commuters: Option<usize>,
    seed: Option<u64>,
    mode: Option<ModeArg>,
) -> Result<(), Failure> {
    let mut spec = match spec_path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))
                .exit_with(EXIT_USAGE)?;
            serde_json::from_str::<DistrictSpec>(&text)
                .with_context(|| format!("parsing {}", p.display()))
                .exit_with(EXIT_USAGE)?
        }
        None => DistrictSpec::default(),
    };
    if let Some(d) = days {
        spec.days = d;
    }
    if let Some(h) = homes {
        spec.homes = h;
    }
    if let Some(c) = commuters {
        spec.commuters = c;
    }
    if let Some(s) = seed {
        spec.seed = s;
    }
    if let Some(m) = mode {
        spec.mode = m.into();
    }
    let scenario = build_district(&spec).exit_with(EXIT_CONFIG)?;
    let path = write_scenario(out_dir, &scenario).exit_with(EXIT_RUNTIME)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::models::ChargerId;

/// Exact header of a schedule file.
pub const SCHEDULE_HEADER: [&str; 8] = [
    "Month",
    "Hour",
    "EV_State",
    "Charger",
    "Est_Departure_Time",
    "Req_SOC_Departure",
    "Est_Arrival_Time",
    "Est_SoC_Arrival",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EvState {
    PluggedReady = 1,
    Incoming = 2,
    Transit = 3,
}

impl EvState {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(EvState::PluggedReady),
            2 => Some(EvState::Incoming),
            3 => Some(EvState::Transit),
            _ => None,
        }
    }
}

impl fmt::Display for EvState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            EvState::PluggedReady => "plugged",
            EvState::Incoming => "incoming",
            EvState::Transit => "transit",
        };
        f.write_str(name)
    }
}

/// One timestep of a vehicle's schedule. Countdowns are in steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvScheduleRow {
    pub month: u8,
    pub hour: u8,
    pub ev_state: EvState,
    pub charger_id: Option<ChargerId>,
    pub est_departure_steps: Option<u32>,
    pub req_soc_departure: Option<f64>,
    pub est_arrival_steps: Option<u32>,
    pub est_soc_arrival: Option<f64>,
}

/// Canonical file name for a vehicle id.
pub fn schedule_file_name(ev_id: &str) -> String {
    format!("electric_vehicle_{ev_id}.csv")
}

fn is_absent(s: &str) -> bool {
    s.is_empty() || s.eq_ignore_ascii_case("nan")
}

fn parse_err(row: usize, column: &'static str, value: &str, reason: impl Into<String>) -> DatasetError {
    DatasetError::Parse {
        row,
        column,
        value: value.to_string(),
        reason: reason.into(),
    }
}

/// Integer that may be written as `10` or `10.0`.
fn parse_int(row: usize, column: &'static str, raw: &str) -> Result<i64, DatasetError> {
    if let Ok(v) = raw.parse::<i64>() {
        return Ok(v);
    }
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() && v.fract() == 0.0 => Ok(v as i64),
        _ => Err(parse_err(row, column, raw, "not an integer")),
    }
}

fn parse_opt_count(row: usize, column: &'static str, raw: &str) -> Result<Option<u32>, DatasetError> {
    if is_absent(raw) {
        return Ok(None);
    }
    let v = parse_int(row, column, raw)?;
    u32::try_from(v)
        .map(Some)
        .map_err(|_| parse_err(row, column, raw, "not a non-negative step count"))
}

fn parse_opt_fraction(row: usize, column: &'static str, raw: &str) -> Result<Option<f64>, DatasetError> {
    if is_absent(raw) {
        return Ok(None);
    }
    let v: f64 = raw.parse().map_err(|_| parse_err(row, column, raw, "not a number"))?;
    if !(0.0..=1.0).contains(&v) {
        return Err(DatasetError::Validation { row, column, value: v });
    }
    Ok(Some(v))
}

fn check_header(headers: &csv::StringRecord) -> Result<(), DatasetError> {
    let found: Vec<&str> = headers.iter().map(str::trim).collect();
    if found == SCHEDULE_HEADER {
        return Ok(());
    }
    if let Some(missing) = SCHEDULE_HEADER.iter().find(|c| !found.contains(c)) {
        return Err(DatasetError::Header(format!("missing required column `{missing}`")));
    }
    Err(DatasetError::Header(format!(
        "expected `{}`, found `{}`",
        SCHEDULE_HEADER.join(","),
        found.join(",")
    )))
}

/// Parses a schedule CSV. Rows are numbered from 1 in errors (header excluded).
pub fn parse_schedule<R: Read>(reader: R) -> Result<Vec<EvScheduleRow>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    check_header(rdr.headers()?)?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let f = |k: usize| rec.get(k).unwrap_or("").trim();

        let month = parse_int(row, "Month", f(0))?;
        if !(1..=12).contains(&month) {
            return Err(parse_err(row, "Month", f(0), "month must be in 1..=12"));
        }
        let hour = parse_int(row, "Hour", f(1))?;
        if !(1..=24).contains(&hour) {
            return Err(parse_err(row, "Hour", f(1), "hour must be in 1..=24"));
        }
        let state_code = parse_int(row, "EV_State", f(2))?;
        let ev_state = u8::try_from(state_code)
            .ok()
            .and_then(EvState::from_code)
            .ok_or_else(|| parse_err(row, "EV_State", f(2), "expected 1, 2 or 3"))?;
        let charger_id = if is_absent(f(3)) {
            None
        } else {
            Some(
                f(3).parse::<ChargerId>()
                    .map_err(|e| parse_err(row, "Charger", f(3), e.to_string()))?,
            )
        };

        rows.push(EvScheduleRow {
            month: month as u8,
            hour: hour as u8,
            ev_state,
            charger_id,
            est_departure_steps: parse_opt_count(row, "Est_Departure_Time", f(4))?,
            req_soc_departure: parse_opt_fraction(row, "Req_SOC_Departure", f(5))?,
            est_arrival_steps: parse_opt_count(row, "Est_Arrival_Time", f(6))?,
            est_soc_arrival: parse_opt_fraction(row, "Est_SoC_Arrival", f(7))?,
        });
    }
    Ok(rows)
}

pub fn read_schedule(path: &Path) -> Result<Vec<EvScheduleRow>, DatasetError> {
    let file = File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_schedule(BufReader::new(file))
}

fn opt<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "nan".to_string(), |v| v.to_string())
}

/// Writes rows in canonical form: absent values as `nan`, shortest round-trip floats.
pub fn write_schedule<W: Write>(mut out: W, rows: &[EvScheduleRow]) -> std::io::Result<()> {
    writeln!(out, "{}", SCHEDULE_HEADER.join(","))?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.month,
            r.hour,
            r.ev_state.code(),
            opt(&r.charger_id),
            opt(&r.est_departure_steps),
            opt(&r.req_soc_departure),
            opt(&r.est_arrival_steps),
            opt(&r.est_soc_arrival),
        )?;
    }
    out.flush()
}

pub fn write_schedule_file(path: &Path, rows: &[EvScheduleRow]) -> Result<(), DatasetError> {
    let io_err = |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    write_schedule(BufWriter::new(file), rows).map_err(io_err)
}

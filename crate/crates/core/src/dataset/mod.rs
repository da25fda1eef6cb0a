//! Per-vehicle schedule time series: parsing, writing, validation and
//! synthetic generation.

mod generator;
mod plan;
mod schedule;
mod stats;
mod validate;

pub use generator::{derive_seed, generate, generate_household, generate_workplace, GeneratorMode, GeneratorParams};
pub use plan::{GenerationPlan, PlannedVehicle};
pub use schedule::{
    parse_schedule, read_schedule, schedule_file_name, write_schedule, write_schedule_file, EvScheduleRow, EvState,
    SCHEDULE_HEADER,
};
pub use stats::{arrival_steps, departure_steps, mean_std, schedule_stats, ScheduleStats};
pub use validate::{validate_schedule, Severity, Violation, ViolationKind};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("schedule header mismatch: {0}")]
    Header(String),
    #[error("row {row}, column {column}: cannot parse `{value}`: {reason}")]
    Parse {
        row: usize,
        column: &'static str,
        value: String,
        reason: String,
    },
    #[error("row {row}, column {column}: value {value} outside [0, 1]")]
    Validation {
        row: usize,
        column: &'static str,
        value: f64,
    },
    #[error("generator configuration: {0}")]
    Config(String),
}

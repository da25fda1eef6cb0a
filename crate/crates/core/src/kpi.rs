//! District KPIs over a net-load trace, normalized against a baseline run.
//!
//! Every KPI is "lower is better". Z is the grid-import share of gross demand,
//! so more self-consumed energy moves its ratio below 1.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KpiError {
    #[error("empty trace")]
    Empty,
    #[error("series `{name}` has {found} values, expected {expected}")]
    Length {
        name: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("timestep {0} h does not divide a day")]
    Timestep(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kpi {
    ElectricityConsumption,
    ElectricityPrice,
    CarbonEmissions,
    ZeroNetEnergy,
    AverageDailyPeak,
    Ramping,
    OneMinusLoadFactor,
}

impl Kpi {
    /// Table order.
    pub const ALL: [Kpi; 7] = [
        Kpi::ElectricityConsumption,
        Kpi::ElectricityPrice,
        Kpi::CarbonEmissions,
        Kpi::ZeroNetEnergy,
        Kpi::AverageDailyPeak,
        Kpi::Ramping,
        Kpi::OneMinusLoadFactor,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Kpi::ElectricityConsumption => "D",
            Kpi::ElectricityPrice => "C",
            Kpi::CarbonEmissions => "G",
            Kpi::ZeroNetEnergy => "Z",
            Kpi::AverageDailyPeak => "P",
            Kpi::Ramping => "R",
            Kpi::OneMinusLoadFactor => "1-L",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Kpi::ElectricityConsumption => "electricity_consumption",
            Kpi::ElectricityPrice => "electricity_price",
            Kpi::CarbonEmissions => "carbon_emissions",
            Kpi::ZeroNetEnergy => "zero_net_energy",
            Kpi::AverageDailyPeak => "average_daily_peak",
            Kpi::Ramping => "ramping",
            Kpi::OneMinusLoadFactor => "one_minus_load_factor",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Kpi::ElectricityConsumption => "Electricity Consumption (D)",
            Kpi::ElectricityPrice => "Electricity Price (C)",
            Kpi::CarbonEmissions => "Carbon Emissions (G)",
            Kpi::ZeroNetEnergy => "Zero Net Energy (Z)",
            Kpi::AverageDailyPeak => "Average Daily Peak (P)",
            Kpi::Ramping => "Ramping (R)",
            Kpi::OneMinusLoadFactor => "1 - Load Factor (1-L)",
        }
    }

    pub fn from_key(key: &str) -> Option<Kpi> {
        Kpi::ALL.into_iter().find(|k| k.key() == key)
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Aligned per-step series for one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KpiInputs {
    /// District net electricity per step (kWh, negative = export).
    pub net: Vec<f64>,
    pub price: Vec<f64>,
    pub carbon: Vec<f64>,
    /// Gross demand per step: building load plus EV charging (kWh).
    pub demand: Vec<f64>,
    /// Calendar month of each step.
    pub months: Vec<u8>,
    pub timestep_hours: f64,
}

impl KpiInputs {
    /// Keeps the first `len` steps.
    pub fn truncate(&mut self, len: usize) {
        self.net.truncate(len);
        self.price.truncate(len);
        self.carbon.truncate(len);
        self.demand.truncate(len);
        self.months.truncate(len);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KpiValues([f64; 7]);

impl KpiValues {
    pub fn get(&self, kpi: Kpi) -> f64 {
        self.0[kpi.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Kpi, f64)> + '_ {
        Kpi::ALL.into_iter().map(|k| (k, self.get(k)))
    }
}

pub fn compute_kpis(inputs: &KpiInputs) -> Result<KpiValues, KpiError> {
    let n = inputs.net.len();
    if n == 0 {
        return Err(KpiError::Empty);
    }
    for (name, len) in [
        ("price", inputs.price.len()),
        ("carbon", inputs.carbon.len()),
        ("demand", inputs.demand.len()),
        ("months", inputs.months.len()),
    ] {
        if len != n {
            return Err(KpiError::Length {
                name,
                expected: n,
                found: len,
            });
        }
    }
    let per_day =
        crate::calendar::steps_per_day(inputs.timestep_hours).ok_or(KpiError::Timestep(inputs.timestep_hours))?;

    let net = &inputs.net;
    let import = |i: usize| net[i].max(0.0);
    let consumption: f64 = (0..n).map(import).sum();
    let cost: f64 = (0..n).map(|i| import(i) * inputs.price[i]).sum();
    let emissions: f64 = (0..n).map(|i| import(i) * inputs.carbon[i]).sum();
    let demand: f64 = inputs.demand.iter().sum();
    let zero_net = if demand > 0.0 { consumption / demand } else { 0.0 };

    // partial trailing day counts as a day
    let peaks: Vec<f64> = net
        .chunks(per_day)
        .map(|day| day.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let daily_peak = peaks.iter().sum::<f64>() / peaks.len() as f64;

    let ramping: f64 = net.windows(2).map(|w| (w[1] - w[0]).abs()).sum();

    // contiguous runs of the same month; months without a positive peak are skipped
    let mut factors = Vec::new();
    let mut start = 0;
    while start < n {
        let month = inputs.months[start];
        let end = inputs.months[start..]
            .iter()
            .position(|&m| m != month)
            .map_or(n, |k| start + k);
        let run = &net[start..end];
        let peak = run.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if peak > 0.0 {
            let mean = run.iter().sum::<f64>() / run.len() as f64;
            factors.push(1.0 - mean / peak);
        }
        start = end;
    }
    let load_factor = if factors.is_empty() {
        0.0
    } else {
        factors.iter().sum::<f64>() / factors.len() as f64
    };

    Ok(KpiValues([
        consumption,
        cost,
        emissions,
        zero_net,
        daily_peak,
        ramping,
        load_factor,
    ]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KpiRow {
    pub kpi: Kpi,
    pub raw: f64,
    pub baseline: f64,
    /// `raw / baseline`, or `raw` itself when the baseline is zero.
    pub value: f64,
    /// False when the baseline was zero and `value` is absolute.
    pub normalized: bool,
}

impl KpiRow {
    /// Change against the baseline in percent; `None` for absolute rows.
    pub fn percent_delta(&self) -> Option<f64> {
        self.normalized.then_some((self.value - 1.0) * 100.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    pub rows: Vec<KpiRow>,
}

pub fn normalize(report: &KpiValues, baseline: &KpiValues) -> KpiReport {
    let rows = Kpi::ALL
        .into_iter()
        .map(|kpi| {
            let raw = report.get(kpi);
            let base = baseline.get(kpi);
            let normalized = base != 0.0;
            KpiRow {
                kpi,
                raw,
                baseline: base,
                value: if normalized { raw / base } else { raw },
                normalized,
            }
        })
        .collect();
    KpiReport { rows }
}

impl KpiReport {
    pub fn row(&self, kpi: Kpi) -> Option<&KpiRow> {
        self.rows.iter().find(|r| r.kpi == kpi)
    }
}

pub const KPI_HEADER: &str = "kpi,code,raw,baseline,ratio,normalized";

pub fn write_kpi_csv<W: Write>(mut out: W, report: &KpiReport) -> std::io::Result<()> {
    writeln!(out, "{KPI_HEADER}")?;
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.kpi.key(),
            r.kpi.code(),
            r.raw,
            r.baseline,
            r.value,
            r.normalized
        )?;
    }
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum KpiCsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("row {row}: {reason}")]
    Row { row: usize, reason: String },
    #[error("missing KPI `{0}`")]
    MissingKpi(&'static str),
}

/// Reads a table written by [`write_kpi_csv`], in table order.
pub fn read_kpi_csv<R: std::io::Read>(input: R) -> Result<KpiReport, KpiCsvError> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &'static str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or(KpiCsvError::MissingColumn(name))
    };
    let (ki, ri, bi, vi, ni) = (
        col("kpi")?,
        col("raw")?,
        col("baseline")?,
        col("ratio")?,
        col("normalized")?,
    );
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let field = |c: usize| rec.get(c).unwrap_or("").trim();
        let num = |c: usize| {
            field(c).parse::<f64>().map_err(|_| KpiCsvError::Row {
                row,
                reason: format!("`{}` is not a number", field(c)),
            })
        };
        let kpi = Kpi::from_key(field(ki)).ok_or_else(|| KpiCsvError::Row {
            row,
            reason: format!("unknown KPI `{}`", field(ki)),
        })?;
        let normalized = field(ni).parse::<bool>().map_err(|_| KpiCsvError::Row {
            row,
            reason: format!("`{}` is not a boolean", field(ni)),
        })?;
        rows.push(KpiRow {
            kpi,
            raw: num(ri)?,
            baseline: num(bi)?,
            value: num(vi)?,
            normalized,
        });
    }
    let mut ordered = Vec::with_capacity(Kpi::ALL.len());
    for kpi in Kpi::ALL {
        let row = rows
            .iter()
            .find(|r| r.kpi == kpi)
            .ok_or(KpiCsvError::MissingKpi(kpi.key()))?;
        ordered.push(*row);
    }
    Ok(KpiReport { rows: ordered })
}

fn format_delta(row: Option<&KpiRow>) -> String {
    match row {
        Some(r) => match r.percent_delta() {
            Some(d) => format!("{d:+.2}%"),
            None => format!("{:.4} (abs)", r.value),
        },
        None => "-".into(),
    }
}

/// Aligned text table: one row per KPI, one ratio/delta column pair per run.
pub fn format_table(columns: &[(String, &KpiReport)]) -> String {
    let mut header = vec!["KPI".to_string()];
    for (name, _) in columns {
        header.push(format!("{name} ratio"));
        header.push(format!("{name} delta"));
    }
    let mut lines = vec![header];
    for kpi in Kpi::ALL {
        let mut line = vec![kpi.label().to_string()];
        for (_, report) in columns {
            let row = report.row(kpi);
            line.push(row.map_or("-".into(), |r| format!("{:.4}", r.value)));
            line.push(format_delta(row));
        }
        lines.push(line);
    }
    let widths: Vec<usize> = (0..lines[0].len())
        .map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for line in &lines {
        let cells: Vec<String> = line
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c == 0 {
                    format!("{s:<w$}", w = widths[c])
                } else {
                    format!("{s:>w$}", w = widths[c])
                }
            })
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(net: Vec<f64>) -> KpiInputs {
        let n = net.len();
        KpiInputs {
            demand: net.iter().map(|e| e.max(0.0)).collect(),
            net,
            price: vec![0.2; n],
            carbon: vec![0.5; n],
            months: vec![1; n],
            timestep_hours: 1.0,
        }
    }

    #[test]
    fn constant_profile() {
        let k = compute_kpis(&inputs(vec![5.0; 48])).unwrap();
        assert_eq!(k.get(Kpi::Ramping), 0.0);
        assert_eq!(k.get(Kpi::OneMinusLoadFactor), 0.0);
        assert_eq!(k.get(Kpi::AverageDailyPeak), 5.0);
        assert_eq!(k.get(Kpi::ElectricityConsumption), 240.0);
    }

    #[test]
    fn alternating_ramping() {
        let net = (0..24).map(|i| if i % 2 == 0 { 0.0 } else { 10.0 }).collect();
        assert_eq!(compute_kpis(&inputs(net)).unwrap().get(Kpi::Ramping), 230.0);
    }

    #[test]
    fn export_only() {
        let k = compute_kpis(&inputs(vec![-3.0; 24])).unwrap();
        for kpi in [Kpi::ElectricityConsumption, Kpi::ElectricityPrice, Kpi::CarbonEmissions] {
            assert_eq!(k.get(kpi), 0.0);
        }
        assert_eq!(k.get(Kpi::OneMinusLoadFactor), 0.0);
    }

    #[test]
    fn empty_is_error() {
        assert_eq!(compute_kpis(&inputs(vec![])), Err(KpiError::Empty));
    }

    #[test]
    fn self_normalization() {
        let net = (0..48).map(|i| (i as f64 * 0.7).sin() * 4.0 + 1.0).collect();
        let k = compute_kpis(&inputs(net)).unwrap();
        let r = normalize(&k, &k);
        for row in &r.rows {
            assert!(!row.normalized || row.value == 1.0, "{row:?}");
        }
    }

    #[test]
    fn zero_baseline_is_flagged() {
        let k = compute_kpis(&inputs(vec![5.0; 24])).unwrap();
        let r = normalize(&k, &k);
        let ramp = r.row(Kpi::Ramping).unwrap();
        assert!(!ramp.normalized);
        assert_eq!(ramp.percent_delta(), None);
    }

    #[test]
    fn csv_round_trip() {
        let net = (0..48).map(|i| (i as f64 * 0.3).cos() * 3.0).collect();
        let k = compute_kpis(&inputs(net)).unwrap();
        let report = normalize(&k, &KpiValues([1.0, 2.0, 0.0, 1.0, 1.0, 3.0, 0.5]));
        let mut buf = Vec::new();
        write_kpi_csv(&mut buf, &report).unwrap();
        assert_eq!(read_kpi_csv(&buf[..]).unwrap(), report);
    }

    #[test]
    fn csv_missing_column() {
        let text = "kpi,code,raw,baseline,normalized\n";
        assert!(matches!(
            read_kpi_csv(text.as_bytes()),
            Err(KpiCsvError::MissingColumn("ratio"))
        ));
    }

    #[test]
    fn display_delta() {
        let row = KpiRow {
            kpi: Kpi::ElectricityPrice,
            raw: 0.8865,
            baseline: 1.0,
            value: 0.8865,
            normalized: true,
        };
        assert_eq!(format_delta(Some(&row)), "-11.35%");
    }
}

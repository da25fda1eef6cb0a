use serde::Serialize;

use super::{EvScheduleRow, EvState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Severity {
    /// Unusual but simulatable.
    Warning,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    TimestampGap,
    IllegalTransition,
    MissingIncoming,
    CountdownIncrease,
    CountdownSkip,
    DepartureOverrun,
    FieldStateMismatch,
    MissingCharger,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// Zero-based row index.
    pub row: usize,
    pub severity: Severity,
    pub kind: ViolationKind,
    pub message: String,
}

fn next_hour(h: u8) -> u8 {
    if h == 24 {
        1
    } else {
        h + 1
    }
}

fn next_month(m: u8) -> u8 {
    if m == 12 {
        1
    } else {
        m + 1
    }
}

/// Checks a schedule for structural problems. An empty result means the
/// schedule is clean; warnings alone do not prevent simulation.
pub fn validate_schedule(rows: &[EvScheduleRow]) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |row: usize, severity, kind, message: String| {
        out.push(Violation {
            row,
            severity,
            kind,
            message,
        })
    };

    for (i, r) in rows.iter().enumerate() {
        let plugged = r.ev_state == EvState::PluggedReady;
        let incoming = r.ev_state == EvState::Incoming;
        if !plugged && (r.est_departure_steps.is_some() || r.req_soc_departure.is_some()) {
            push(
                i,
                Severity::Error,
                ViolationKind::FieldStateMismatch,
                format!("departure fields set while {}", r.ev_state),
            );
        }
        if !incoming && (r.est_arrival_steps.is_some() || r.est_soc_arrival.is_some()) {
            push(
                i,
                Severity::Error,
                ViolationKind::FieldStateMismatch,
                format!("arrival fields set while {}", r.ev_state),
            );
        }
        if plugged && r.charger_id.is_none() {
            push(
                i,
                Severity::Error,
                ViolationKind::MissingCharger,
                "plugged in without a charger".into(),
            );
        }
        if incoming && r.charger_id.is_none() {
            push(
                i,
                Severity::Warning,
                ViolationKind::MissingCharger,
                "incoming without a destination charger".into(),
            );
        }

        let Some(prev) = i.checked_sub(1).map(|j| &rows[j]) else {
            continue;
        };

        let hour_ok = r.hour == prev.hour || r.hour == next_hour(prev.hour);
        let month_ok = if r.month == prev.month {
            true
        } else {
            r.month == next_month(prev.month) && r.hour == 1 && prev.hour == 24
        };
        if !hour_ok || !month_ok {
            push(
                i,
                Severity::Error,
                ViolationKind::TimestampGap,
                format!(
                    "timestamp jumps from {}/{} to {}/{}",
                    prev.month, prev.hour, r.month, r.hour
                ),
            );
        }

        use EvState::*;
        match (prev.ev_state, r.ev_state) {
            (Transit, PluggedReady) => push(
                i,
                Severity::Warning,
                ViolationKind::MissingIncoming,
                "missing Incoming phase before plug-in".into(),
            ),
            (PluggedReady, Incoming) | (Incoming, Transit) => push(
                i,
                Severity::Error,
                ViolationKind::IllegalTransition,
                format!("illegal transition {} -> {}", prev.ev_state, r.ev_state),
            ),
            _ => {}
        }

        if prev.ev_state == PluggedReady && r.ev_state == PluggedReady {
            if prev.est_departure_steps == Some(0) {
                push(
                    i,
                    Severity::Error,
                    ViolationKind::DepartureOverrun,
                    "still plugged in after departure countdown reached 0".into(),
                );
            }
            if prev.charger_id == r.charger_id {
                check_countdown(
                    &mut push,
                    i,
                    "departure",
                    prev.est_departure_steps,
                    r.est_departure_steps,
                );
            }
        }
        if prev.ev_state == Incoming && r.ev_state == Incoming && prev.charger_id == r.charger_id {
            check_countdown(&mut push, i, "arrival", prev.est_arrival_steps, r.est_arrival_steps);
        }
    }
    out
}

fn check_countdown(
    push: &mut impl FnMut(usize, Severity, ViolationKind, String),
    row: usize,
    what: &str,
    prev: Option<u32>,
    cur: Option<u32>,
) {
    if let (Some(p), Some(c)) = (prev, cur) {
        if c > p {
            push(
                row,
                Severity::Error,
                ViolationKind::CountdownIncrease,
                format!("{what} countdown increased from {p} to {c}"),
            );
        } else if c + 1 != p {
            push(
                row,
                Severity::Warning,
                ViolationKind::CountdownSkip,
                format!("{what} countdown went from {p} to {c}"),
            );
        }
    }
}

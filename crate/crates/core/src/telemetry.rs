//! Per-tick telemetry collection and the CSV analysis-file format.
//!
//! Files are RFC-4180 style: comma delimiter, LF line endings, header row
//! first, fields containing commas/quotes/newlines double-quoted with inner
//! quotes doubled. Numbers are rendered in shortest round-trip form with at
//! most 9 significant digits so golden files are stable across platforms.

use std::io::{self, Write};

use thiserror::Error;

use crate::engine::{LinkedModel, SimState};
use crate::script::Value;
use crate::Real;

/// One monitored column: a variable name or a machine path whose current
/// state is recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorSpec {
    pub source: String,
    pub column: String,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TelemetryError {
    #[error("malformed csv at line {0}")]
    MalformedCsv(usize),
    #[error("monitor source `{0}` is neither a variable nor a machine path")]
    UnknownMonitor(String),
    #[error("duplicate monitor column `{0}`")]
    DuplicateColumn(String),
}

/// Render a number with at most 9 significant digits, shortest round-trip.
pub fn format_number(v: Real) -> String {
    let shortest = format!("{v}");
    if significant_digits(&shortest) <= 9 {
        return shortest;
    }
    let rounded: Real = format!("{v:.8e}").parse().expect("rounded float reparses");
    format!("{rounded}")
}

fn significant_digits(s: &str) -> usize {
    let mantissa = s.split(['e', 'E']).next().unwrap_or(s);
    mantissa
        .chars()
        .filter(|c| c.is_ascii_digit())
        .skip_while(|&c| c == '0')
        .count()
}

/// An ordered table of per-tick rows; `time_s` is always the first column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Trace {
    pub fn new(monitor_columns: &[String]) -> Trace {
        let mut columns = vec!["time_s".to_string()];
        columns.extend(monitor_columns.iter().cloned());
        Trace { columns, rows: Vec::new() }
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match header");
        self.rows.push(row);
    }
}

/// Collect one row for the current tick: time first, then each monitor.
/// A source naming a store variable records its value; otherwise it must
/// resolve to a machine path and records the dotted current-state text.
pub fn snapshot(
    state: &SimState,
    model: &LinkedModel,
    monitors: &[MonitorSpec],
) -> Result<Vec<String>, TelemetryError> {
    let mut row = Vec::with_capacity(monitors.len() + 1);
    row.push(state.clock.to_string());
    for m in monitors {
        if let Some(value) = state.get_var(&m.source) {
            row.push(render_value(value));
        } else if let Some(idx) = model.resolve_machine(&m.source) {
            let path = &model.instances[idx].path;
            match state.state_of(model, idx) {
                Some(s) => row.push(format!("{path}.{s}")),
                None => row.push("inactive".to_string()),
            }
        } else {
            return Err(TelemetryError::UnknownMonitor(m.source.clone()));
        }
    }
    Ok(row)
}

fn render_value(value: &Value) -> String {
    match value {
        Value::Num(n) => format_number(*n),
        Value::Bool(b) => b.to_string(),
        Value::Text(t) => t.clone(),
    }
}

pub fn check_monitor_columns(monitors: &[MonitorSpec]) -> Result<(), TelemetryError> {
    for (i, m) in monitors.iter().enumerate() {
        if monitors[..i].iter().any(|other| other.column == m.column) {
            return Err(TelemetryError::DuplicateColumn(m.column.clone()));
        }
    }
    Ok(())
}

pub fn write_csv(trace: &Trace, sink: &mut dyn Write) -> io::Result<()> {
    write_record(&trace.columns, sink)?;
    for row in &trace.rows {
        write_record(row, sink)?;
    }
    Ok(())
}

fn write_record(fields: &[String], sink: &mut dyn Write) -> io::Result<()> {
    for (i, field) in fields.iter().enumerate() {
        if i > 0 {
            sink.write_all(b",")?;
        }
        if field.contains([',', '"', '\n', '\r']) {
            sink.write_all(b"\"")?;
            sink.write_all(field.replace('"', "\"\"").as_bytes())?;
            sink.write_all(b"\"")?;
        } else {
            sink.write_all(field.as_bytes())?;
        }
    }
    sink.write_all(b"\n")
}

pub fn read_csv(source: &str) -> Result<Trace, TelemetryError> {
    let records = parse_records(source)?;
    let mut it = records.into_iter();
    let columns = it.next().unwrap_or_default();
    let mut rows = Vec::new();
    for (i, record) in it.enumerate() {
        if record.len() != columns.len() {
            return Err(TelemetryError::MalformedCsv(i + 2));
        }
        rows.push(record);
    }
    Ok(Trace { columns, rows })
}

fn parse_records(source: &str) -> Result<Vec<Vec<String>>, TelemetryError> {
    let mut records = Vec::new();
    let mut record: Vec<String> = Vec::new();
    let mut field = String::new();
    let mut line = 1usize;
    let mut chars = source.chars().peekable();
    // Per-field states: at start, inside quotes, after closing quote, bare.
    #[derive(PartialEq)]
    enum S {
        Start,
        Quoted,
        Closed,
        Bare,
    }
    let mut s = S::Start;
    let mut any = false;

    while let Some(c) = chars.next() {
        any = true;
        match s {
            S::Start => match c {
                '"' => s = S::Quoted,
                ',' => record.push(std::mem::take(&mut field)),
                '\n' | '\r' => {
                    if c == '\r' && chars.peek() == Some(&'\n') {
                        chars.next();
                    }
                    record.push(std::mem::take(&mut field));
                    records.push(std::mem::take(&mut record));
                    line += 1;
                }
                _ => {
                    field.push(c);
                    s = S::Bare;
                }
            },
            S::Bare => match c {
                '"' => return Err(TelemetryError::MalformedCsv(line)),
                ',' => {
                    record.push(std::mem::take(&mut field));
                    s = S::Start;
                }
                '\n' | '\r' => {
                    if c == '\r' && chars.peek() == Some(&'\n') {
                        chars.next();
                    }
                    record.push(std::mem::take(&mut field));
                    records.push(std::mem::take(&mut record));
                    line += 1;
                    s = S::Start;
                }
                _ => field.push(c),
            },
            S::Quoted => match c {
                '"' => s = S::Closed,
                '\n' => {
                    line += 1;
                    field.push(c);
                }
                _ => field.push(c),
            },
            S::Closed => match c {
                '"' => {
                    field.push('"');
                    s = S::Quoted;
                }
                ',' => {
                    record.push(std::mem::take(&mut field));
                    s = S::Start;
                }
                '\n' | '\r' => {
                    if c == '\r' && chars.peek() == Some(&'\n') {
                        chars.next();
                    }
                    record.push(std::mem::take(&mut field));
                    records.push(std::mem::take(&mut record));
                    line += 1;
                    s = S::Start;
                }
                _ => return Err(TelemetryError::MalformedCsv(line)),
            },
        }
    }
    if s == S::Quoted {
        return Err(TelemetryError::MalformedCsv(line));
    }
    if any && (!field.is_empty() || !record.is_empty() || s == S::Closed) {
        // Final record without a trailing newline.
        record.push(field);
        records.push(record);
    }
    Ok(records)
}

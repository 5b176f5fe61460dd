//! Textual model (`.fsm`) and plan (`.plan`) formats.
//!
//! Model files hold variable declarations, machine definitions with embedded
//! scripts, and monitor declarations. Plan files hold timed event injections
//! and temporal assertions. Every parse error carries a 1-based line/column.

mod lexer;
mod parser;
mod printer;

pub use parser::{parse_model, parse_plan, ModelFile};
pub use printer::{print_expr, print_model, print_plan};

use thiserror::Error;

use crate::script::Expr;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DslError {
    #[error("syntax error at line {line}, column {col}: expected {expected}")]
    Syntax { line: u32, col: u32, expected: String },
    #[error("line {line}: duplicate state `{state}` in machine `{machine}`")]
    DuplicateState { line: u32, machine: String, state: String },
    #[error("line {line}: duplicate variable `{name}`")]
    DuplicateVar { line: u32, name: String },
    #[error("line {line}: transition targets undeclared state `{state}` in machine `{machine}`")]
    UnknownTarget { line: u32, machine: String, state: String },
    #[error("line {line}: machine `{machine}` has undeclared initial state `{state}`")]
    UnknownInitial { line: u32, machine: String, state: String },
    #[error("line {line}: plan times must be non-decreasing")]
    NonMonotonicTimes { line: u32 },
    #[error("line {line}: window start must not exceed its end")]
    BadWindow { line: u32 },
    #[error("line {line}: auto transition requires a guard")]
    AutoWithoutGuard { line: u32 },
}

impl DslError {
    pub fn line(&self) -> u32 {
        match self {
            DslError::Syntax { line, .. }
            | DslError::DuplicateState { line, .. }
            | DslError::DuplicateVar { line, .. }
            | DslError::UnknownTarget { line, .. }
            | DslError::UnknownInitial { line, .. }
            | DslError::NonMonotonicTimes { line }
            | DslError::BadWindow { line }
            | DslError::AutoWithoutGuard { line } => *line,
        }
    }
}

/// A parsed operational plan.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanFile {
    pub name: String,
    /// (time in seconds, event name), non-decreasing in time.
    pub injections: Vec<(u64, String)>,
    pub assertions: Vec<Assertion>,
}

impl PlanFile {
    /// Last simulated second any entry of the plan can still observe.
    pub fn horizon(&self) -> u64 {
        let inj = self.injections.iter().map(|&(t, _)| t).max().unwrap_or(0);
        let asserts = self
            .assertions
            .iter()
            .filter_map(|a| match a {
                Assertion::At { t, .. } => Some(*t),
                Assertion::EventuallyWithin { t2, .. } => Some(*t2),
                Assertion::Always { .. } => None,
            })
            .max()
            .unwrap_or(0);
        inj.max(asserts)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Assertion {
    At { t: u64, predicate: Expr, line: u32 },
    Always { predicate: Expr, line: u32 },
    EventuallyWithin { t1: u64, t2: u64, predicate: Expr, line: u32 },
}

impl Assertion {
    pub fn describe(&self) -> String {
        match self {
            Assertion::At { t, predicate, .. } => {
                format!("at {t} expect {}", print_expr(predicate))
            }
            Assertion::Always { predicate, .. } => {
                format!("expect always {}", print_expr(predicate))
            }
            Assertion::EventuallyWithin { t1, t2, predicate, .. } => {
                format!("expect eventually within {t1}..{t2} {}", print_expr(predicate))
            }
        }
    }
}

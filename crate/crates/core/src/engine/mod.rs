//! Hierarchical FSM execution: static machine definitions, model linking,
//! deterministic run-to-completion stepping and the explicit product-automaton
//! oracle used to cross-check the semantics on small models.

mod exec;
mod flatten;
mod link;

pub use exec::{Engine, EngineConfig, SimState, Timer};
pub use flatten::{flatten, project, FlatAutomaton, FlatConfig, FlatConfigId, FlattenConfig};
pub use link::{link_model, Instance, LinkedModel};

use thiserror::Error;

use crate::script::{ActionBlock, Expr, ScriptError};
use crate::telemetry::MonitorSpec;

/// Static description of one FSM. Machines are the unit of nesting: a state
/// may list submachines which become active whenever that state is active.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineDef {
    pub name: String,
    pub initial: String,
    pub states: Vec<StateDef>,
    /// Monitors declared inside the machine body; merged into the model's
    /// monitor table after the top-level ones.
    pub monitors: Vec<MonitorSpec>,
}

impl MachineDef {
    pub fn state(&self, name: &str) -> Option<&StateDef> {
        self.states.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateDef {
    pub name: String,
    pub entry_actions: Actions,
    pub exit_actions: Actions,
    pub periodic: Option<Periodic>,
    pub submachines: Vec<String>,
    pub transitions: Vec<TransitionDef>,
}

impl StateDef {
    pub fn named(name: &str) -> StateDef {
        StateDef {
            name: name.to_string(),
            entry_actions: Actions::default(),
            exit_actions: Actions::default(),
            periodic: None,
            submachines: Vec::new(),
            transitions: Vec::new(),
        }
    }
}

/// An action block plus the 1-based source line it came from, so runtime
/// errors can name machine, state and line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Actions {
    pub stmts: ActionBlock,
    pub line: u32,
}

impl Actions {
    pub fn new(stmts: ActionBlock) -> Actions {
        Actions { stmts, line: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Periodic {
    /// Interval in simulated seconds; must be a positive whole number of ticks.
    pub interval: u64,
    pub actions: Actions,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Trigger {
    /// Named broadcast event.
    Event(String),
    /// Expiry of a timer owned by this machine.
    Timer(String),
    /// Guard-only transition attempted after the event queue drains.
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionDef {
    pub trigger: Trigger,
    pub guard: Option<Expr>,
    pub actions: Actions,
    pub target: String,
    pub line: u32,
}

/// A broadcast event instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub name: String,
    pub origin: EventOrigin,
    /// Simulation clock, in seconds, at enqueue time.
    pub timestamp: u64,
}

impl Event {
    pub fn external(name: impl Into<String>) -> Event {
        Event {
            name: name.into(),
            origin: EventOrigin::External,
            timestamp: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventOrigin {
    External,
    /// Emitted by an action of the machine instance at this path.
    Machine(String),
    /// Timer expiry; `owner` indexes the owning instance in the linked model.
    Timer { owner: usize },
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EngineError {
    #[error("unknown submachine `{0}`")]
    UnknownSubmachine(String),
    #[error("submachine nesting cycle through `{0}`")]
    NestingCycle(String),
    #[error("duplicate machine `{0}`")]
    DuplicateMachine(String),
    #[error("unknown root machine `{0}`")]
    UnknownRoot(String),
    #[error("machine `{machine}`: duplicate state `{state}`")]
    DuplicateState { machine: String, state: String },
    #[error("machine `{machine}`: unknown state `{state}`")]
    UnknownState { machine: String, state: String },
    #[error("machine `{machine}`, state `{state}`: auto transition without a guard")]
    AutoWithoutGuard { machine: String, state: String },
    #[error("machine `{machine}`, state `{state}`: periodic interval must be a positive whole number of ticks")]
    BadPeriodicInterval { machine: String, state: String },
    #[error("script error in machine `{machine}`, state `{state}`, line {line}: {source}")]
    Script {
        machine: String,
        state: String,
        line: u32,
        source: ScriptError,
    },
    #[error("guard in machine `{machine}`, state `{state}`, line {line} did not evaluate to a boolean")]
    GuardType {
        machine: String,
        state: String,
        line: u32,
    },
    #[error("livelock: exceeded {cap} microsteps in one macro tick")]
    Livelock { cap: usize },
    #[error("bad timer delay {delay} for timer `{timer}`: must be a positive whole multiple of the tick")]
    BadDelay { timer: String, delay: f64 },
    #[error("unknown machine path `{0}`")]
    UnknownMachinePath(String),
    #[error("oracle unsupported: {0}")]
    OracleUnsupported(String),
    #[error("oracle state explosion: more than {cap} reachable configurations")]
    StateExplosion { cap: usize },
}

pub type Result<T> = std::result::Result<T, EngineError>;

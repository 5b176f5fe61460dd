//! Ties the pieces together: a stepping session that injects environment
//! events, integrates the battery, samples faults and records telemetry;
//! plus plan execution with an accept/reject verdict.

use std::fmt;

use thiserror::Error;

use crate::config::SimConfig;
use crate::dsl::{Assertion, DslError, ModelFile, PlanFile};
use crate::engine::{
    link_model, Engine, EngineError, Event, LinkedModel, SimState,
};
use crate::fault::FaultModel;
use crate::mission::{self};
use crate::script::Value;
use crate::telemetry::{self, MonitorSpec, TelemetryError, Trace};
use crate::Real;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
    #[error(transparent)]
    Dsl(#[from] DslError),
}

/// Merge several parsed model files into one. Machines stay separate
/// (duplicates are caught at link time); variables must not collide.
pub fn merge_models(mut files: Vec<ModelFile>) -> Result<ModelFile, RunError> {
    let mut merged = ModelFile {
        machines: Vec::new(),
        monitors: Vec::new(),
        variables: Vec::new(),
    };
    for file in files.drain(..) {
        for (name, value) in file.variables {
            if merged.variables.iter().any(|(n, _)| *n == name) {
                return Err(RunError::Dsl(DslError::DuplicateVar { line: 0, name }));
            }
            merged.variables.push((name, value));
        }
        merged.machines.extend(file.machines);
        merged.monitors.extend(file.monitors);
    }
    Ok(merged)
}

pub fn link(file: &ModelFile) -> Result<LinkedModel, RunError> {
    let roots = file.roots();
    let mut model = link_model(file.machines.clone(), &roots)?;
    // File-level monitors come first, then the machine-local ones that
    // link_model collected.
    let mut monitors = file.monitors.clone();
    monitors.append(&mut model.monitors);
    model.monitors = monitors;
    Ok(model)
}

/// A running simulation: owns the dynamic state and advances it one macro
/// tick at a time, weaving in scheduled injections, environment events,
/// battery integration and fault sampling.
pub struct Session<'m> {
    pub engine: Engine<'m>,
    pub cfg: SimConfig,
    pub fault: FaultModel,
    pub sim: SimState,
    injections: Vec<(u64, String)>,
    next_injection: usize,
}

impl<'m> Session<'m> {
    pub fn new(
        model: &'m LinkedModel,
        cfg: SimConfig,
        file: &ModelFile,
        seed: u64,
        injections: Vec<(u64, String)>,
    ) -> Result<Session<'m>, RunError> {
        let engine = Engine::with_config(model, cfg.engine);
        let fault_seed = cfg.fault.seed.unwrap_or(seed);
        let mut fault = FaultModel::new(cfg.fault.beta, cfg.fault.eta, fault_seed, cfg.fault.enabled);
        fault.paper_literal_rule = cfg.fault.paper_literal_rule;

        let sim = engine.initialize(file.initial_store(), seed)?;
        let mut session = Session {
            engine,
            cfg,
            fault,
            sim,
            injections,
            next_injection: 0,
        };
        // Events scheduled at t=0 are delivered before the first tick.
        let mut t0 = session.due_injections(0);
        t0.extend(mission::environment_events(0, &session.cfg.orbit));
        session.engine.inject(&mut session.sim, t0)?;
        Ok(session)
    }

    fn due_injections(&mut self, clock: u64) -> Vec<Event> {
        let mut events = Vec::new();
        while let Some((t, name)) = self.injections.get(self.next_injection) {
            if *t <= clock {
                events.push(Event::external(name.clone()));
                self.next_injection += 1;
            } else {
                break;
            }
        }
        events
    }

    pub fn clock(&self) -> u64 {
        self.sim.clock
    }

    /// Advance one macro tick. Returns every event processed during it.
    pub fn tick(&mut self) -> Result<Vec<Event>, RunError> {
        let dt = self.cfg.engine.dt;
        let next_clock = self.sim.clock + dt;
        let mut external = self.due_injections(next_clock);
        external.extend(mission::environment_events(next_clock, &self.cfg.orbit));
        let mut processed = self.engine.macro_tick(&mut self.sim, external)?;

        self.update_battery(dt);
        let t = (next_clock - dt) as Real;
        if self.fault.sample_fault(t, dt as Real) {
            processed.extend(
                self.engine
                    .inject(&mut self.sim, vec![Event::external("fault")])?,
            );
        }
        if self.sim.store.contains_key("fault_count") {
            self.sim
                .store
                .insert("fault_count".into(), Value::Num(self.fault.fault_count as Real));
        }
        Ok(processed)
    }

    /// Deliver events immediately at the current clock (interactive `emit`).
    pub fn emit_now(&mut self, name: &str) -> Result<Vec<Event>, RunError> {
        Ok(self.engine.inject(&mut self.sim, vec![Event::external(name)])?)
    }

    fn update_battery(&mut self, dt: u64) {
        let Some(Value::Num(level)) = self.sim.store.get("battery").cloned() else {
            return;
        };
        let sun = match self.sim.store.get("sun") {
            Some(Value::Bool(b)) => *b,
            _ => self.cfg.orbit.in_sun(self.sim.clock),
        };
        let loads = mission::active_loads(&self.cfg.power, |name| {
            matches!(
                self.sim.store.get(&format!("{name}_on")),
                Some(Value::Bool(true))
            )
        });
        let next = mission::battery_update(level, sun, loads, dt as Real, &self.cfg.power);
        self.sim.store.insert("battery".into(), Value::Num(next));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictStatus {
    Accepted,
    Rejected,
    Error,
}

impl fmt::Display for VerdictStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerdictStatus::Accepted => write!(f, "ACCEPTED"),
            VerdictStatus::Rejected => write!(f, "REJECTED"),
            VerdictStatus::Error => write!(f, "ERROR"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub assertion: String,
    pub time: u64,
    pub observed: String,
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub status: VerdictStatus,
    pub violations: Vec<Violation>,
    pub ticks_run: u64,
    pub faults_injected: u64,
}

/// Outcome of a full simulation run.
pub struct RunOutcome<'m> {
    pub trace: Trace,
    pub verdict: Option<Verdict>,
    pub session: Session<'m>,
}

/// Run `duration` seconds of simulation, recording one telemetry row per
/// macro tick. When a plan is given its injections are scheduled and its
/// assertions evaluated (AT at its tick, ALWAYS at every tick including
/// t=0, EVENTUALLY_WITHIN over its window).
pub fn simulate<'m>(
    model: &'m LinkedModel,
    file: &ModelFile,
    cfg: SimConfig,
    seed: u64,
    duration: Option<u64>,
    plan: Option<&PlanFile>,
    extra_monitors: &[MonitorSpec],
) -> Result<RunOutcome<'m>, RunError> {
    let mut monitors = model.monitors.clone();
    monitors.extend(extra_monitors.iter().cloned());
    telemetry::check_monitor_columns(&monitors)?;

    let injections = plan.map(|p| p.injections.clone()).unwrap_or_default();
    let duration = duration
        .or_else(|| plan.map(|p| p.horizon()))
        .unwrap_or(0);

    let mut session = Session::new(model, cfg, file, seed, injections)?;
    let mut trace = Trace::new(
        &monitors.iter().map(|m| m.column.clone()).collect::<Vec<_>>(),
    );
    let mut checker = plan.map(|p| AssertionChecker::new(p));

    if let Some(c) = checker.as_mut() {
        c.observe(&session.engine, &mut session.sim)?;
    }
    let dt = session.cfg.engine.dt;
    let ticks = duration / dt;
    for _ in 0..ticks {
        session.tick()?;
        trace.push_row(telemetry::snapshot(&session.sim, model, &monitors)?);
        if let Some(c) = checker.as_mut() {
            c.observe(&session.engine, &mut session.sim)?;
        }
    }

    let verdict = checker.map(|c| {
        let violations = c.finish();
        Verdict {
            status: if violations.is_empty() {
                VerdictStatus::Accepted
            } else {
                VerdictStatus::Rejected
            },
            violations,
            ticks_run: ticks,
            faults_injected: session.fault.fault_count,
        }
    });
    Ok(RunOutcome { trace, verdict, session })
}

struct AssertionChecker<'p> {
    plan: &'p PlanFile,
    /// Per-assertion first violation; EVENTUALLY entries flip to satisfied.
    violations: Vec<Option<Violation>>,
    satisfied: Vec<bool>,
}

impl<'p> AssertionChecker<'p> {
    fn new(plan: &'p PlanFile) -> AssertionChecker<'p> {
        AssertionChecker {
            plan,
            violations: vec![None; plan.assertions.len()],
            satisfied: vec![false; plan.assertions.len()],
        }
    }

    fn observe(&mut self, engine: &Engine<'_>, sim: &mut SimState) -> Result<(), RunError> {
        let now = sim.clock;
        for (i, assertion) in self.plan.assertions.iter().enumerate() {
            if self.violations[i].is_some() {
                continue;
            }
            match assertion {
                Assertion::At { t, predicate, .. } if *t == now => {
                    let observed = engine.eval(sim, predicate)?;
                    if observed != Value::Bool(true) {
                        self.violations[i] = Some(Violation {
                            assertion: assertion.describe(),
                            time: now,
                            observed: observed.to_string(),
                        });
                    }
                }
                Assertion::Always { predicate, .. } => {
                    let observed = engine.eval(sim, predicate)?;
                    if observed != Value::Bool(true) {
                        self.violations[i] = Some(Violation {
                            assertion: assertion.describe(),
                            time: now,
                            observed: observed.to_string(),
                        });
                    }
                }
                Assertion::EventuallyWithin { t1, t2, predicate, .. }
                    if (*t1..=*t2).contains(&now) && !self.satisfied[i] =>
                {
                    if engine.eval(sim, predicate)? == Value::Bool(true) {
                        self.satisfied[i] = true;
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn finish(self) -> Vec<Violation> {
        let mut all = Vec::new();
        for (i, assertion) in self.plan.assertions.iter().enumerate() {
            if let Some(v) = self.violations[i].clone() {
                all.push(v);
            } else if let Assertion::EventuallyWithin { t2, .. } = assertion {
                if !self.satisfied[i] {
                    all.push(Violation {
                        assertion: assertion.describe(),
                        time: *t2,
                        observed: "never true in window".to_string(),
                    });
                }
            }
        }
        all.sort_by_key(|v| v.time);
        all
    }
}

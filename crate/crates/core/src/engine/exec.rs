//! Deterministic execution of a linked model: broadcast dispatch, macro
//! ticks with run-to-completion microstepping, timers and periodic actions.

use std::collections::{BTreeMap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::link::LinkedModel;
use super::{Actions, EngineError, Event, EventOrigin, Result, Trigger};
use crate::script::{
    self, Effects, EvalCtx, ScriptError, StateQuery, Value, VariableStore,
};

#[derive(Debug, Clone, Copy)]
pub struct EngineConfig {
    /// Tick quantum in simulated seconds.
    pub dt: u64,
    /// Hard cap on microsteps per macro tick.
    pub livelock_cap: usize,
}

impl Default for EngineConfig {
    fn default() -> EngineConfig {
        EngineConfig { dt: 1, livelock_cap: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timer {
    pub name: String,
    /// Owning instance index.
    pub owner: usize,
    pub expiry: u64,
}

/// Dynamic snapshot of a simulation. Cloning yields an independent fork;
/// identical (model, store, seed, schedule) always reproduce the same run.
#[derive(Debug, Clone)]
pub struct SimState {
    pub clock: u64,
    /// Current state index per instance; `None` while inactive.
    current: Vec<Option<usize>>,
    entered_at: Vec<u64>,
    pub store: VariableStore,
    pub queue: VecDeque<Event>,
    pub timers: Vec<Timer>,
    pub rng: ChaCha8Rng,
}

impl SimState {
    /// Current state name of an instance, if it is active.
    pub fn state_of<'m>(&self, model: &'m LinkedModel, instance: usize) -> Option<&'m str> {
        self.current[instance]
            .map(|s| model.def_of(instance).states[s].name.as_str())
    }

    pub fn is_active(&self, instance: usize) -> bool {
        self.current[instance].is_some()
    }

    /// Active configuration as a path -> state-name map.
    pub fn active_config(&self, model: &LinkedModel) -> BTreeMap<String, String> {
        (0..model.instances.len())
            .filter_map(|i| {
                self.state_of(model, i)
                    .map(|s| (model.instances[i].path.clone(), s.to_string()))
            })
            .collect()
    }

    pub fn get_var(&self, name: &str) -> Option<&Value> {
        self.store.get(name)
    }
}

struct ConfigQuery<'a> {
    model: &'a LinkedModel,
    current: &'a [Option<usize>],
}

impl StateQuery for ConfigQuery<'_> {
    fn in_state(&self, machine: &str, state: &str) -> std::result::Result<bool, ScriptError> {
        let idx = self
            .model
            .resolve_machine(machine)
            .ok_or_else(|| ScriptError::UnknownMachine(machine.to_string()))?;
        Ok(match self.current[idx] {
            Some(s) => self.model.def_of(idx).states[s].name == state,
            None => false,
        })
    }
}

/// Execution façade binding a linked model to an engine configuration.
pub struct Engine<'m> {
    pub model: &'m LinkedModel,
    pub cfg: EngineConfig,
}

impl<'m> Engine<'m> {
    pub fn new(model: &'m LinkedModel) -> Engine<'m> {
        Engine { model, cfg: EngineConfig::default() }
    }

    pub fn with_config(model: &'m LinkedModel, cfg: EngineConfig) -> Engine<'m> {
        Engine { model, cfg }
    }

    /// Enter every root machine's initial state (entry actions outermost
    /// first, siblings in document order) and drain any events they emitted.
    pub fn initialize(&self, initial_store: VariableStore, seed: u64) -> Result<SimState> {
        for def in &self.model.defs {
            for state in &def.states {
                if let Some(p) = &state.periodic {
                    if p.interval % self.cfg.dt != 0 {
                        return Err(EngineError::BadPeriodicInterval {
                            machine: def.name.clone(),
                            state: state.name.clone(),
                        });
                    }
                }
            }
        }
        let n = self.model.instances.len();
        let mut state = SimState {
            clock: 0,
            current: vec![None; n],
            entered_at: vec![0; n],
            store: initial_store,
            queue: VecDeque::new(),
            timers: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        for &root in &self.model.roots {
            self.activate(&mut state, root)?;
        }
        let mut processed = Vec::new();
        let mut steps = 0;
        self.drain(&mut state, &mut processed, &mut steps)?;
        Ok(state)
    }

    /// Deliver one event to every active machine, pre-order, siblings in
    /// document order. Events emitted by fired actions are queued, not
    /// processed recursively.
    pub fn dispatch(&self, state: &mut SimState, event: &Event) -> Result<()> {
        let snapshot: Vec<usize> =
            (0..self.model.instances.len()).filter(|&i| state.is_active(i)).collect();
        for i in snapshot {
            let Some(state_idx) = state.current[i] else { continue };
            let def = self.model.def_of(i);
            let transitions = &def.states[state_idx].transitions;
            let mut fired = None;
            for (ti, tr) in transitions.iter().enumerate() {
                let matches = match &tr.trigger {
                    Trigger::Event(name) => {
                        !matches!(event.origin, EventOrigin::Timer { .. }) && *name == event.name
                    }
                    Trigger::Timer(name) => {
                        matches!(event.origin, EventOrigin::Timer { owner } if owner == i)
                            && *name == event.name
                    }
                    Trigger::Auto => false,
                };
                if matches && self.guard_holds(state, i, tr.guard.as_ref(), tr.line)? {
                    fired = Some(ti);
                    break;
                }
            }
            if let Some(ti) = fired {
                self.fire(state, i, state_idx, ti)?;
            }
        }
        Ok(())
    }

    /// One macro tick: advance the clock, fire expired timers, enqueue
    /// external events, run to completion, run periodic actions, then sweep
    /// auto transitions to a fixpoint. Returns every event processed.
    pub fn macro_tick(&self, state: &mut SimState, external: Vec<Event>) -> Result<Vec<Event>> {
        state.clock += self.cfg.dt;
        let clock = state.clock;

        let (expired, live): (Vec<Timer>, Vec<Timer>) =
            std::mem::take(&mut state.timers).into_iter().partition(|t| t.expiry <= clock);
        state.timers = live;
        for t in expired {
            state.queue.push_back(Event {
                name: t.name,
                origin: EventOrigin::Timer { owner: t.owner },
                timestamp: clock,
            });
        }
        for mut e in external {
            e.timestamp = clock;
            state.queue.push_back(e);
        }

        let mut processed = Vec::new();
        let mut steps = 0;
        self.drain(state, &mut processed, &mut steps)?;
        self.run_periodic(state)?;
        self.settle(state, &mut processed, &mut steps)?;
        Ok(processed)
    }

    /// Deliver events at the current clock without advancing time: append,
    /// drain to completion and settle auto transitions. Used for injections
    /// scheduled at t=0 and for interactive `emit`.
    pub fn inject(&self, state: &mut SimState, events: Vec<Event>) -> Result<Vec<Event>> {
        for mut e in events {
            e.timestamp = state.clock;
            state.queue.push_back(e);
        }
        let mut processed = Vec::new();
        let mut steps = 0;
        self.settle(state, &mut processed, &mut steps)?;
        Ok(processed)
    }

    /// Register a timer for the machine at `owner_path`. An existing
    /// (name, owner) timer is replaced.
    pub fn set_timer(
        &self,
        state: &mut SimState,
        name: &str,
        owner_path: &str,
        delay: u64,
    ) -> Result<()> {
        let owner = self
            .model
            .resolve_machine(owner_path)
            .ok_or_else(|| EngineError::UnknownMachinePath(owner_path.to_string()))?;
        self.set_timer_for(state, name.to_string(), owner, delay as f64)
    }

    /// Evaluate an expression (e.g. a plan predicate) against the current
    /// snapshot. `rand()` draws from the simulation's PRNG stream.
    pub fn eval(&self, state: &mut SimState, expr: &script::Expr) -> Result<Value> {
        let SimState { clock, current, store, rng, .. } = state;
        let query = ConfigQuery { model: self.model, current };
        let mut ctx = EvalCtx { store, clock: *clock, rng, states: &query };
        script::eval_expr(expr, &mut ctx).map_err(|source| EngineError::Script {
            machine: String::new(),
            state: String::new(),
            line: 0,
            source,
        })
    }

    /// Active-configuration consistency: a machine is active iff it is a
    /// root or its parent state currently nests it.
    pub fn config_consistent(&self, state: &SimState) -> bool {
        (0..self.model.instances.len()).all(|i| {
            let inst = &self.model.instances[i];
            let should = match inst.parent {
                None => true,
                Some(p) => match state.state_of(self.model, p) {
                    Some(parent_state) => self.model.children_under(p, parent_state).contains(&i),
                    None => false,
                },
            };
            state.is_active(i) == should
        })
    }

    fn set_timer_for(
        &self,
        state: &mut SimState,
        name: String,
        owner: usize,
        delay: f64,
    ) -> Result<()> {
        let whole = delay > 0.0 && delay.fract() == 0.0;
        if !whole || (delay as u64) % self.cfg.dt != 0 {
            return Err(EngineError::BadDelay { timer: name, delay });
        }
        let expiry = state.clock + delay as u64;
        state.timers.retain(|t| !(t.name == name && t.owner == owner));
        state.timers.push(Timer { name, owner, expiry });
        Ok(())
    }

    /// Drain the queue, then alternate auto sweeps and drains until neither
    /// produces work. Livelocks hit the microstep cap and error out.
    fn settle(
        &self,
        state: &mut SimState,
        processed: &mut Vec<Event>,
        steps: &mut usize,
    ) -> Result<()> {
        loop {
            self.drain(state, processed, steps)?;
            let fired = self.auto_sweep(state, steps)?;
            if fired == 0 && state.queue.is_empty() {
                return Ok(());
            }
        }
    }

    fn drain(
        &self,
        state: &mut SimState,
        processed: &mut Vec<Event>,
        steps: &mut usize,
    ) -> Result<()> {
        while let Some(event) = state.queue.pop_front() {
            self.bump(steps)?;
            self.dispatch(state, &event)?;
            processed.push(event);
        }
        Ok(())
    }

    /// One sweep over active machines: the first enabled auto transition of
    /// each machine fires. Returns the number of firings.
    fn auto_sweep(&self, state: &mut SimState, steps: &mut usize) -> Result<usize> {
        let mut fired = 0;
        for i in 0..self.model.instances.len() {
            let Some(state_idx) = state.current[i] else { continue };
            let transitions = &self.model.def_of(i).states[state_idx].transitions;
            for (ti, tr) in transitions.iter().enumerate() {
                if !matches!(tr.trigger, Trigger::Auto) {
                    continue;
                }
                if self.guard_holds(state, i, tr.guard.as_ref(), tr.line)? {
                    self.bump(steps)?;
                    self.fire(state, i, state_idx, ti)?;
                    fired += 1;
                    break;
                }
            }
        }
        Ok(fired)
    }

    fn run_periodic(&self, state: &mut SimState) -> Result<()> {
        for i in 0..self.model.instances.len() {
            let Some(state_idx) = state.current[i] else { continue };
            let sdef = &self.model.def_of(i).states[state_idx];
            if let Some(p) = &sdef.periodic {
                let elapsed = state.clock - state.entered_at[i];
                if elapsed > 0 && elapsed % p.interval == 0 {
                    self.run_actions(state, i, &sdef.name, &p.actions)?;
                }
            }
        }
        Ok(())
    }

    fn bump(&self, steps: &mut usize) -> Result<()> {
        *steps += 1;
        if *steps > self.cfg.livelock_cap {
            return Err(EngineError::Livelock { cap: self.cfg.livelock_cap });
        }
        Ok(())
    }

    fn guard_holds(
        &self,
        state: &mut SimState,
        instance: usize,
        guard: Option<&script::Expr>,
        line: u32,
    ) -> Result<bool> {
        let Some(guard) = guard else { return Ok(true) };
        let machine = self.model.instances[instance].path.clone();
        let state_name = state
            .state_of(self.model, instance)
            .unwrap_or_default()
            .to_string();
        let SimState { clock, current, store, rng, .. } = state;
        let query = ConfigQuery { model: self.model, current };
        let mut ctx = EvalCtx { store, clock: *clock, rng, states: &query };
        match script::eval_expr(guard, &mut ctx) {
            Ok(Value::Bool(b)) => Ok(b),
            Ok(_) => Err(EngineError::GuardType { machine, state: state_name, line }),
            Err(source) => Err(EngineError::Script { machine, state: state_name, line, source }),
        }
    }

    /// Fire transition `ti` out of `state_idx` on `instance`: deactivate the
    /// source subtree innermost-first, run exit then transition actions,
    /// enter the target and activate its subtree outermost-first.
    fn fire(&self, state: &mut SimState, instance: usize, state_idx: usize, ti: usize) -> Result<()> {
        let def = self.model.def_of(instance);
        let source = &def.states[state_idx];
        let tr = &source.transitions[ti];
        let target_idx = def
            .states
            .iter()
            .position(|s| s.name == tr.target)
            .expect("target checked at link time");

        self.deactivate_children(state, instance, &source.name)?;
        self.run_actions(state, instance, &source.name, &source.exit_actions)?;
        self.run_actions(state, instance, &source.name, &tr.actions)?;

        state.current[instance] = Some(target_idx);
        state.entered_at[instance] = state.clock;
        let target = &def.states[target_idx];
        self.run_actions(state, instance, &target.name, &target.entry_actions)?;
        self.activate_children(state, instance, &target.name)
    }

    fn activate(&self, state: &mut SimState, instance: usize) -> Result<()> {
        let def = self.model.def_of(instance);
        let initial_idx = def
            .states
            .iter()
            .position(|s| s.name == def.initial)
            .expect("initial checked at link time");
        state.current[instance] = Some(initial_idx);
        state.entered_at[instance] = state.clock;
        let initial = &def.states[initial_idx];
        self.run_actions(state, instance, &initial.name, &initial.entry_actions)?;
        self.activate_children(state, instance, &initial.name)
    }

    fn activate_children(&self, state: &mut SimState, instance: usize, state_name: &str) -> Result<()> {
        for child in self.model.children_under(instance, state_name) {
            self.activate(state, child)?;
        }
        Ok(())
    }

    fn deactivate(&self, state: &mut SimState, instance: usize) -> Result<()> {
        let Some(state_idx) = state.current[instance] else { return Ok(()) };
        let sdef = &self.model.def_of(instance).states[state_idx];
        self.deactivate_children(state, instance, &sdef.name)?;
        self.run_actions(state, instance, &sdef.name, &sdef.exit_actions)?;
        state.current[instance] = None;
        Ok(())
    }

    fn deactivate_children(&self, state: &mut SimState, instance: usize, state_name: &str) -> Result<()> {
        for child in self.model.children_under(instance, state_name) {
            self.deactivate(state, child)?;
        }
        Ok(())
    }

    fn run_actions(
        &self,
        state: &mut SimState,
        instance: usize,
        state_name: &str,
        actions: &Actions,
    ) -> Result<()> {
        if actions.stmts.is_empty() {
            return Ok(());
        }
        let path = self.model.instances[instance].path.clone();
        let mut effects = Effects::default();
        {
            let SimState { clock, current, store, rng, .. } = state;
            let query = ConfigQuery { model: self.model, current };
            script::exec_block(&actions.stmts, store, *clock, rng, &query, &mut effects).map_err(
                |source| EngineError::Script {
                    machine: path.clone(),
                    state: state_name.to_string(),
                    line: actions.line,
                    source,
                },
            )?;
        }
        for name in effects.emitted {
            state.queue.push_back(Event {
                name,
                origin: EventOrigin::Machine(path.clone()),
                timestamp: state.clock,
            });
        }
        for (name, delay) in effects.timers {
            self.set_timer_for(state, name, instance, delay)?;
        }
        Ok(())
    }
}

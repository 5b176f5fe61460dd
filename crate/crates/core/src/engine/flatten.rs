//! Explicit product-automaton construction for small boolean-only models.
//!
//! This is a deliberately separate, compact interpreter: it shares the parsed
//! definitions and the expression evaluator with the engine but none of the
//! stepping code, so it can serve as a brute-force cross-check of the engine
//! semantics (broadcast order, FIFO run-to-completion, auto settling).

use std::collections::{BTreeMap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::link::LinkedModel;
use super::{EngineError, MachineDef, Result, Trigger};
use crate::script::{
    self, ActionBlock, Builtin, EvalCtx, Expr, ScriptError, StateQuery, Stmt, Value,
    VariableStore,
};

pub type FlatConfigId = usize;

#[derive(Debug, Clone, Copy)]
pub struct FlattenConfig {
    /// Maximum number of reachable configurations before giving up.
    pub state_cap: usize,
    pub microstep_cap: usize,
}

impl Default for FlattenConfig {
    fn default() -> FlattenConfig {
        FlattenConfig { state_cap: 4096, microstep_cap: 10_000 }
    }
}

/// A global configuration: one state index per instance (`None` = inactive)
/// plus the boolean store.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct FlatConfig {
    pub states: Vec<Option<usize>>,
    pub store: BTreeMap<String, bool>,
}

#[derive(Debug, Clone)]
pub struct FlatAutomaton {
    pub configs: Vec<FlatConfig>,
    pub initial: FlatConfigId,
    /// Event alphabet, sorted.
    pub alphabet: Vec<String>,
    /// (source config, alphabet index) -> successor config.
    pub transitions: BTreeMap<(FlatConfigId, usize), FlatConfigId>,
}

impl FlatAutomaton {
    pub fn successor(&self, from: FlatConfigId, event: &str) -> Option<FlatConfigId> {
        let e = self.alphabet.iter().position(|a| a == event)?;
        self.transitions.get(&(from, e)).copied()
    }
}

/// Build the reachable product automaton by BFS from the initial
/// configuration. Only boolean stores, plain-event triggers and pure
/// non-random scripts are supported.
pub fn flatten(
    model: &LinkedModel,
    initial_store: &VariableStore,
    cfg: FlattenConfig,
) -> Result<FlatAutomaton> {
    check_supported(model, initial_store)?;

    let alphabet = {
        let mut names: Vec<String> = model
            .defs
            .iter()
            .flat_map(|d| d.states.iter())
            .flat_map(|s| s.transitions.iter())
            .filter_map(|t| match &t.trigger {
                Trigger::Event(name) => Some(name.clone()),
                _ => None,
            })
            .collect();
        names.sort();
        names.dedup();
        names
    };

    let interp = Interp { model, cap: cfg.microstep_cap };
    let initial = interp.initial_config(initial_store)?;

    let mut configs = vec![initial.clone()];
    let mut index: BTreeMap<FlatConfig, FlatConfigId> = BTreeMap::new();
    index.insert(initial, 0);
    let mut transitions = BTreeMap::new();
    let mut frontier = VecDeque::from([0usize]);

    while let Some(id) = frontier.pop_front() {
        for (e, event) in alphabet.iter().enumerate() {
            let succ = interp.step(&configs[id], event)?;
            let succ_id = match index.get(&succ) {
                Some(&known) => known,
                None => {
                    let new_id = configs.len();
                    if new_id >= cfg.state_cap {
                        return Err(EngineError::StateExplosion { cap: cfg.state_cap });
                    }
                    configs.push(succ.clone());
                    index.insert(succ, new_id);
                    frontier.push_back(new_id);
                    new_id
                }
            };
            transitions.insert((id, e), succ_id);
        }
    }

    Ok(FlatAutomaton { configs, initial: 0, alphabet, transitions })
}

fn check_supported(model: &LinkedModel, initial_store: &VariableStore) -> Result<()> {
    for (name, value) in initial_store {
        if !matches!(value, Value::Bool(_)) {
            return Err(EngineError::OracleUnsupported(format!(
                "variable `{name}` is not boolean"
            )));
        }
    }
    for def in &model.defs {
        check_machine(def)?;
    }
    Ok(())
}

fn check_machine(def: &MachineDef) -> Result<()> {
    let unsupported = |what: &str| {
        Err(EngineError::OracleUnsupported(format!(
            "machine `{}` uses {what}",
            def.name
        )))
    };
    for state in &def.states {
        if state.periodic.is_some() {
            return unsupported("periodic actions");
        }
        check_block(def, &state.entry_actions.stmts)?;
        check_block(def, &state.exit_actions.stmts)?;
        for t in &state.transitions {
            if matches!(t.trigger, Trigger::Timer(_)) {
                return unsupported("timers");
            }
            if let Some(g) = &t.guard {
                check_expr(def, g)?;
            }
            check_block(def, &t.actions.stmts)?;
        }
    }
    Ok(())
}

fn check_block(def: &MachineDef, block: &ActionBlock) -> Result<()> {
    for stmt in block {
        match stmt {
            Stmt::Assign(_, e) => check_expr(def, e)?,
            Stmt::Emit(_) => {}
            Stmt::StartTimer(..) => {
                return Err(EngineError::OracleUnsupported(format!(
                    "machine `{}` uses timers",
                    def.name
                )))
            }
            Stmt::If { cond, then_block, else_block } => {
                check_expr(def, cond)?;
                check_block(def, then_block)?;
                check_block(def, else_block)?;
            }
        }
    }
    Ok(())
}

fn check_expr(def: &MachineDef, expr: &Expr) -> Result<()> {
    match expr {
        Expr::Call { builtin: Builtin::Rand | Builtin::Time, .. } => {
            Err(EngineError::OracleUnsupported(format!(
                "machine `{}` uses rand()/time()",
                def.name
            )))
        }
        Expr::Call { args, .. } => args.iter().try_for_each(|a| check_expr(def, a)),
        Expr::Unary { expr, .. } => check_expr(def, expr),
        Expr::Binary { lhs, rhs, .. } => {
            check_expr(def, lhs)?;
            check_expr(def, rhs)
        }
        Expr::Lit(_) | Expr::Var(_) | Expr::InState { .. } => Ok(()),
    }
}

struct StatesView<'a> {
    model: &'a LinkedModel,
    states: &'a [Option<usize>],
}

impl StateQuery for StatesView<'_> {
    fn in_state(&self, machine: &str, state: &str) -> std::result::Result<bool, ScriptError> {
        let idx = self
            .model
            .resolve_machine(machine)
            .ok_or_else(|| ScriptError::UnknownMachine(machine.to_string()))?;
        Ok(match self.states[idx] {
            Some(s) => self.model.def_of(idx).states[s].name == state,
            None => false,
        })
    }
}

struct Interp<'a> {
    model: &'a LinkedModel,
    cap: usize,
}

impl Interp<'_> {
    fn initial_config(&self, initial_store: &VariableStore) -> Result<FlatConfig> {
        let mut states = vec![None; self.model.instances.len()];
        let mut store = initial_store.clone();
        let mut queue = VecDeque::new();
        for &root in &self.model.roots {
            self.enter(root, &mut states, &mut store, &mut queue)?;
        }
        // Matches engine initialization: drain, no auto settling.
        let mut steps = 0;
        while let Some(ev) = queue.pop_front() {
            self.check_steps(&mut steps)?;
            self.deliver(&ev, &mut states, &mut store, &mut queue)?;
        }
        self.freeze(states, store)
    }

    fn step(&self, from: &FlatConfig, event: &str) -> Result<FlatConfig> {
        let mut states = from.states.clone();
        let mut store: VariableStore = from
            .store
            .iter()
            .map(|(k, v)| (k.clone(), Value::Bool(*v)))
            .collect();
        let mut queue = VecDeque::from([event.to_string()]);
        let mut steps = 0;
        loop {
            while let Some(ev) = queue.pop_front() {
                self.check_steps(&mut steps)?;
                self.deliver(&ev, &mut states, &mut store, &mut queue)?;
            }
            let fired = self.auto_sweep(&mut states, &mut store, &mut queue, &mut steps)?;
            if fired == 0 && queue.is_empty() {
                break;
            }
        }
        self.freeze(states, store)
    }

    fn check_steps(&self, steps: &mut usize) -> Result<()> {
        *steps += 1;
        if *steps > self.cap {
            return Err(EngineError::Livelock { cap: self.cap });
        }
        Ok(())
    }

    fn deliver(
        &self,
        event: &str,
        states: &mut [Option<usize>],
        store: &mut VariableStore,
        queue: &mut VecDeque<String>,
    ) -> Result<()> {
        let order: Vec<usize> = (0..states.len()).filter(|&i| states[i].is_some()).collect();
        for i in order {
            let Some(si) = states[i] else { continue };
            let n_transitions = self.model.def_of(i).states[si].transitions.len();
            for ti in 0..n_transitions {
                let tr = &self.model.def_of(i).states[si].transitions[ti];
                let matches = matches!(&tr.trigger, Trigger::Event(n) if n == event);
                if matches && self.guard(i, ti, si, states, store)? {
                    self.fire(i, si, ti, states, store, queue)?;
                    break;
                }
            }
        }
        Ok(())
    }

    fn auto_sweep(
        &self,
        states: &mut [Option<usize>],
        store: &mut VariableStore,
        queue: &mut VecDeque<String>,
        steps: &mut usize,
    ) -> Result<usize> {
        let mut fired = 0;
        for i in 0..states.len() {
            let Some(si) = states[i] else { continue };
            let n_transitions = self.model.def_of(i).states[si].transitions.len();
            for ti in 0..n_transitions {
                let tr = &self.model.def_of(i).states[si].transitions[ti];
                if matches!(tr.trigger, Trigger::Auto) && self.guard(i, ti, si, states, store)? {
                    self.check_steps(steps)?;
                    self.fire(i, si, ti, states, store, queue)?;
                    fired += 1;
                    break;
                }
            }
        }
        Ok(fired)
    }

    fn guard(
        &self,
        instance: usize,
        ti: usize,
        si: usize,
        states: &[Option<usize>],
        store: &VariableStore,
    ) -> Result<bool> {
        let def = self.model.def_of(instance);
        let tr = &def.states[si].transitions[ti];
        let Some(guard) = &tr.guard else { return Ok(true) };
        let mut rng = ChaCha8Rng::seed_from_u64(0); // rand() is rejected statically
        let view = StatesView { model: self.model, states };
        let mut ctx = EvalCtx { store, clock: 0, rng: &mut rng, states: &view };
        match script::eval_expr(guard, &mut ctx) {
            Ok(Value::Bool(b)) => Ok(b),
            Ok(_) => Err(EngineError::GuardType {
                machine: def.name.clone(),
                state: def.states[si].name.clone(),
                line: tr.line,
            }),
            Err(source) => Err(EngineError::Script {
                machine: def.name.clone(),
                state: def.states[si].name.clone(),
                line: tr.line,
                source,
            }),
        }
    }

    fn fire(
        &self,
        instance: usize,
        si: usize,
        ti: usize,
        states: &mut [Option<usize>],
        store: &mut VariableStore,
        queue: &mut VecDeque<String>,
    ) -> Result<()> {
        let def = self.model.def_of(instance);
        let source_name = def.states[si].name.clone();
        let target_name = def.states[si].transitions[ti].target.clone();

        self.leave_children(instance, &source_name, states, store, queue)?;
        let source = &self.model.def_of(instance).states[si];
        self.run_block(instance, &source.exit_actions.stmts.clone(), states, store, queue)?;
        let actions = self.model.def_of(instance).states[si].transitions[ti].actions.stmts.clone();
        self.run_block(instance, &actions, states, store, queue)?;

        let target_idx = self
            .model
            .def_of(instance)
            .states
            .iter()
            .position(|s| s.name == target_name)
            .expect("target checked at link time");
        states[instance] = Some(target_idx);
        let entry = self.model.def_of(instance).states[target_idx].entry_actions.stmts.clone();
        self.run_block(instance, &entry, states, store, queue)?;
        for child in self.model.children_under(instance, &target_name) {
            self.enter_into(child, states, store, queue)?;
        }
        Ok(())
    }

    fn enter(
        &self,
        instance: usize,
        states: &mut [Option<usize>],
        store: &mut VariableStore,
        queue: &mut VecDeque<String>,
    ) -> Result<()> {
        self.enter_into(instance, states, store, queue)
    }

    fn enter_into(
        &self,
        instance: usize,
        states: &mut [Option<usize>],
        store: &mut VariableStore,
        queue: &mut VecDeque<String>,
    ) -> Result<()> {
        let def = self.model.def_of(instance);
        let initial_idx = def
            .states
            .iter()
            .position(|s| s.name == def.initial)
            .expect("initial checked at link time");
        let initial_name = def.states[initial_idx].name.clone();
        states[instance] = Some(initial_idx);
        let entry = def.states[initial_idx].entry_actions.stmts.clone();
        self.run_block(instance, &entry, states, store, queue)?;
        for child in self.model.children_under(instance, &initial_name) {
            self.enter_into(child, states, store, queue)?;
        }
        Ok(())
    }

    fn leave_children(
        &self,
        instance: usize,
        state_name: &str,
        states: &mut [Option<usize>],
        store: &mut VariableStore,
        queue: &mut VecDeque<String>,
    ) -> Result<()> {
        for child in self.model.children_under(instance, state_name) {
            if let Some(csi) = states[child] {
                let child_state = self.model.def_of(child).states[csi].name.clone();
                self.leave_children(child, &child_state, states, store, queue)?;
                let exit = self.model.def_of(child).states[csi].exit_actions.stmts.clone();
                self.run_block(child, &exit, states, store, queue)?;
                states[child] = None;
            }
        }
        Ok(())
    }

    fn run_block(
        &self,
        instance: usize,
        block: &ActionBlock,
        states: &mut [Option<usize>],
        store: &mut VariableStore,
        queue: &mut VecDeque<String>,
    ) -> Result<()> {
        if block.is_empty() {
            return Ok(());
        }
        let def = self.model.def_of(instance);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut effects = script::Effects::default();
        {
            let view = StatesView { model: self.model, states };
            script::exec_block(block, store, 0, &mut rng, &view, &mut effects).map_err(
                |source| EngineError::Script {
                    machine: def.name.clone(),
                    state: String::new(),
                    line: 0,
                    source,
                },
            )?;
        }
        queue.extend(effects.emitted);
        Ok(())
    }

    fn freeze(&self, states: Vec<Option<usize>>, store: VariableStore) -> Result<FlatConfig> {
        let mut bools = BTreeMap::new();
        for (name, value) in store {
            match value {
                Value::Bool(b) => {
                    bools.insert(name, b);
                }
                other => {
                    return Err(EngineError::OracleUnsupported(format!(
                        "variable `{name}` became {} during exploration",
                        other.type_name()
                    )))
                }
            }
        }
        Ok(FlatConfig { states, store: bools })
    }
}

/// Project an engine state onto the oracle's configuration shape.
pub fn project(sim: &super::SimState, model: &LinkedModel) -> Result<FlatConfig> {
    let states = (0..model.instances.len())
        .map(|i| {
            sim.state_of(model, i).map(|name| {
                model
                    .def_of(i)
                    .states
                    .iter()
                    .position(|s| s.name == name)
                    .expect("state names are unique")
            })
        })
        .collect();
    let mut bools = BTreeMap::new();
    for (name, value) in &sim.store {
        match value {
            Value::Bool(b) => {
                bools.insert(name.clone(), *b);
            }
            other => {
                return Err(EngineError::OracleUnsupported(format!(
                    "variable `{name}` is {}",
                    other.type_name()
                )))
            }
        }
    }
    Ok(FlatConfig { states, store: bools })
}

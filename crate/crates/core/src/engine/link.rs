//! Resolves a flat list of machine definitions into the instance tree.

use super::{EngineError, MachineDef, Result, Trigger};
use crate::telemetry::MonitorSpec;

/// One machine instance in the linked tree. Instances are stored in
/// pre-order, which is also the broadcast delivery order.
#[derive(Debug, Clone)]
pub struct Instance {
    /// Dotted path from the root, e.g. `model.system.space.eps`.
    pub path: String,
    /// Index into [`LinkedModel::defs`].
    pub def: usize,
    pub parent: Option<usize>,
    /// (parent state name, child instance index), in document order.
    pub children: Vec<(String, usize)>,
}

#[derive(Debug, Clone)]
pub struct LinkedModel {
    pub defs: Vec<MachineDef>,
    /// Pre-order over the instance tree.
    pub instances: Vec<Instance>,
    pub roots: Vec<usize>,
    /// Top-level monitors followed by machine-local ones, document order.
    pub monitors: Vec<MonitorSpec>,
}

impl LinkedModel {
    pub fn def_of(&self, instance: usize) -> &MachineDef {
        &self.defs[self.instances[instance].def]
    }

    /// Children of `instance` nested under `state`, in document order.
    pub fn children_under(&self, instance: usize, state: &str) -> Vec<usize> {
        self.instances[instance]
            .children
            .iter()
            .filter(|(s, _)| s == state)
            .map(|&(_, c)| c)
            .collect()
    }

    /// Resolve a machine reference: exact dotted path first, then a unique
    /// path-suffix match (`obsw` finds `model.system.space.obsw`).
    pub fn resolve_machine(&self, path: &str) -> Option<usize> {
        if let Some(i) = self.instances.iter().position(|m| m.path == path) {
            return Some(i);
        }
        let suffix = format!(".{path}");
        let mut hits = self
            .instances
            .iter()
            .enumerate()
            .filter(|(_, m)| m.path.ends_with(&suffix));
        match (hits.next(), hits.next()) {
            (Some((i, _)), None) => Some(i),
            _ => None,
        }
    }
}

/// Link machine definitions into a tree rooted at `roots`, checking the
/// structural invariants: unique machine and state names, resolvable initial
/// states and transition targets, guards on auto transitions, and no cycles
/// in the nesting relation.
pub fn link_model(defs: Vec<MachineDef>, roots: &[String]) -> Result<LinkedModel> {
    for (i, def) in defs.iter().enumerate() {
        if defs[..i].iter().any(|d| d.name == def.name) {
            return Err(EngineError::DuplicateMachine(def.name.clone()));
        }
        validate_def(def)?;
    }

    let mut model = LinkedModel {
        defs,
        instances: Vec::new(),
        roots: Vec::new(),
        monitors: Vec::new(),
    };
    for root in roots {
        let def = model
            .defs
            .iter()
            .position(|d| &d.name == root)
            .ok_or_else(|| EngineError::UnknownRoot(root.clone()))?;
        let idx = instantiate(&mut model, def, None, root.clone(), &mut Vec::new())?;
        model.roots.push(idx);
    }

    let machine_monitors: Vec<MonitorSpec> = model
        .defs
        .iter()
        .flat_map(|d| d.monitors.iter().cloned())
        .collect();
    model.monitors.extend(machine_monitors);
    Ok(model)
}

fn validate_def(def: &MachineDef) -> Result<()> {
    for (i, state) in def.states.iter().enumerate() {
        if def.states[..i].iter().any(|s| s.name == state.name) {
            return Err(EngineError::DuplicateState {
                machine: def.name.clone(),
                state: state.name.clone(),
            });
        }
    }
    if def.state(&def.initial).is_none() {
        return Err(EngineError::UnknownState {
            machine: def.name.clone(),
            state: def.initial.clone(),
        });
    }
    for state in &def.states {
        for t in &state.transitions {
            if def.state(&t.target).is_none() {
                return Err(EngineError::UnknownState {
                    machine: def.name.clone(),
                    state: t.target.clone(),
                });
            }
            if matches!(t.trigger, Trigger::Auto) && t.guard.is_none() {
                return Err(EngineError::AutoWithoutGuard {
                    machine: def.name.clone(),
                    state: state.name.clone(),
                });
            }
        }
        if let Some(p) = &state.periodic {
            if p.interval == 0 {
                return Err(EngineError::BadPeriodicInterval {
                    machine: def.name.clone(),
                    state: state.name.clone(),
                });
            }
        }
    }
    Ok(())
}

fn instantiate(
    model: &mut LinkedModel,
    def: usize,
    parent: Option<usize>,
    path: String,
    nesting: &mut Vec<usize>,
) -> Result<usize> {
    if nesting.contains(&def) {
        return Err(EngineError::NestingCycle(path));
    }
    if model.instances.iter().any(|m| m.path == path) {
        return Err(EngineError::DuplicateMachine(path));
    }
    let idx = model.instances.len();
    model.instances.push(Instance {
        path: path.clone(),
        def,
        parent,
        children: Vec::new(),
    });

    nesting.push(def);
    // Walk states in document order so the pre-order instance list is stable.
    for state_idx in 0..model.defs[def].states.len() {
        for sub_idx in 0..model.defs[def].states[state_idx].submachines.len() {
            let state_name = model.defs[def].states[state_idx].name.clone();
            let sub_name = model.defs[def].states[state_idx].submachines[sub_idx].clone();
            let sub_def = model
                .defs
                .iter()
                .position(|d| d.name == sub_name)
                .ok_or_else(|| EngineError::UnknownSubmachine(sub_name.clone()))?;
            let child_path = format!("{path}.{sub_name}");
            let child = instantiate(model, sub_def, Some(idx), child_path, nesting)?;
            model.instances[idx].children.push((state_name, child));
        }
    }
    nesting.pop();
    Ok(idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::StateDef;

    fn machine(name: &str, initial: &str, states: Vec<StateDef>) -> MachineDef {
        MachineDef {
            name: name.into(),
            initial: initial.into(),
            states,
            monitors: Vec::new(),
        }
    }

    fn nesting(name: &str, state: &str, subs: &[&str]) -> MachineDef {
        let mut s = StateDef::named(state);
        s.submachines = subs.iter().map(|x| x.to_string()).collect();
        machine(name, state, vec![s])
    }

    #[test]
    fn links_reference_style_hierarchy() {
        let defs = vec![
            nesting("model", "ACTIVE", &["system", "environment"]),
            nesting("system", "ACTIVE", &[]),
            nesting("environment", "ACTIVE", &[]),
        ];
        let model = link_model(defs, &["model".into()]).unwrap();
        assert_eq!(model.roots, vec![0]);
        assert_eq!(model.instances.len(), 3);
        assert_eq!(model.instances[0].path, "model");
        assert_eq!(model.instances[1].path, "model.system");
        assert_eq!(model.instances[2].path, "model.environment");
        assert_eq!(model.instances[0].children.len(), 2);
    }

    #[test]
    fn single_machine_degenerate_tree() {
        let defs = vec![nesting("m", "A", &[])];
        let model = link_model(defs, &["m".into()]).unwrap();
        assert_eq!(model.instances.len(), 1);
        assert!(model.instances[0].children.is_empty());
    }

    #[test]
    fn rejects_nesting_cycle() {
        let defs = vec![nesting("a", "S", &["b"]), nesting("b", "S", &["a"])];
        let err = link_model(defs, &["a".into()]).unwrap_err();
        assert!(matches!(err, EngineError::NestingCycle(_)));
    }

    #[test]
    fn rejects_duplicate_machine_names() {
        let defs = vec![nesting("a", "S", &[]), nesting("a", "S", &[])];
        let err = link_model(defs, &["a".into()]).unwrap_err();
        assert_eq!(err, EngineError::DuplicateMachine("a".into()));
    }

    #[test]
    fn rejects_unknown_submachine() {
        let defs = vec![nesting("a", "S", &["ghost"])];
        let err = link_model(defs, &["a".into()]).unwrap_err();
        assert_eq!(err, EngineError::UnknownSubmachine("ghost".into()));
    }

    #[test]
    fn resolves_suffix_paths() {
        let defs = vec![
            nesting("model", "ACTIVE", &["space"]),
            nesting("space", "ACTIVE", &["obsw"]),
            nesting("obsw", "OFF", &[]),
        ];
        let model = link_model(defs, &["model".into()]).unwrap();
        assert_eq!(model.resolve_machine("model.space.obsw"), Some(2));
        assert_eq!(model.resolve_machine("obsw"), Some(2));
        assert_eq!(model.resolve_machine("space.obsw"), Some(2));
        assert_eq!(model.resolve_machine("nope"), None);
    }
}

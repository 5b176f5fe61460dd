//! Pretty-printers. `parse(print(x))` is structurally identical to `x`.

use std::fmt::Write;

use super::parser::ModelFile;
use super::{Assertion, PlanFile};
use crate::engine::{Actions, MachineDef, StateDef, TransitionDef, Trigger};
use crate::script::{BinOp, Expr, Stmt, UnaryOp, Value};

pub fn print_model(model: &ModelFile) -> String {
    let mut out = String::new();
    for (name, value) in &model.variables {
        let _ = writeln!(out, "var {name} = {}", print_literal(value));
    }
    if !model.variables.is_empty() {
        out.push('\n');
    }
    for machine in &model.machines {
        print_machine(&mut out, machine);
        out.push('\n');
    }
    for m in &model.monitors {
        let _ = writeln!(out, "monitor {} as \"{}\"", m.source, m.column);
    }
    out
}

pub fn print_plan(plan: &PlanFile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "plan {} {{", plan.name);
    // Injections and assertions interleave by time on output; order inside
    // the file is reconstructed from the parse, injections first per time.
    for (t, event) in &plan.injections {
        let _ = writeln!(out, "  at {t} emit {event}");
    }
    for a in &plan.assertions {
        match a {
            Assertion::At { t, predicate, .. } => {
                let _ = writeln!(out, "  at {t} expect {}", print_expr(predicate));
            }
            Assertion::Always { predicate, .. } => {
                let _ = writeln!(out, "  expect always {}", print_expr(predicate));
            }
            Assertion::EventuallyWithin { t1, t2, predicate, .. } => {
                let _ = writeln!(
                    out,
                    "  expect eventually within {t1}..{t2} {}",
                    print_expr(predicate)
                );
            }
        }
    }
    out.push_str("}\n");
    out
}

fn print_machine(out: &mut String, machine: &MachineDef) {
    let _ = writeln!(out, "machine {} {{", machine.name);
    let _ = writeln!(out, "  initial {}", machine.initial);
    for m in &machine.monitors {
        let _ = writeln!(out, "  monitor {} as \"{}\"", m.source, m.column);
    }
    for state in &machine.states {
        print_state(out, state);
    }
    out.push_str("}\n");
}

fn print_state(out: &mut String, state: &StateDef) {
    let _ = writeln!(out, "  state {} {{", state.name);
    if !state.entry_actions.stmts.is_empty() {
        let _ = writeln!(out, "    entry {}", print_block(&state.entry_actions));
    }
    if !state.exit_actions.stmts.is_empty() {
        let _ = writeln!(out, "    exit {}", print_block(&state.exit_actions));
    }
    if let Some(p) = &state.periodic {
        let _ = writeln!(out, "    every {} {}", p.interval, print_block(&p.actions));
    }
    if !state.submachines.is_empty() {
        let _ = writeln!(out, "    uses {}", state.submachines.join(", "));
    }
    for t in &state.transitions {
        print_transition(out, t);
    }
    out.push_str("  }\n");
}

fn print_transition(out: &mut String, t: &TransitionDef) {
    out.push_str("    on ");
    match &t.trigger {
        Trigger::Event(name) => out.push_str(name),
        Trigger::Timer(name) => {
            let _ = write!(out, "timer {name}");
        }
        Trigger::Auto => out.push_str("auto"),
    }
    if let Some(g) = &t.guard {
        let _ = write!(out, " [{}]", print_expr(g));
    }
    if !t.actions.stmts.is_empty() {
        let _ = write!(out, " / {}", print_block(&t.actions));
    }
    let _ = writeln!(out, " -> {}", t.target);
}

fn print_block(actions: &Actions) -> String {
    let mut parts = Vec::new();
    for stmt in &actions.stmts {
        parts.push(print_stmt(stmt));
    }
    format!("{{ {} }}", parts.join("; "))
}

fn print_stmt(stmt: &Stmt) -> String {
    match stmt {
        Stmt::Assign(name, e) => format!("{name} = {}", print_expr(e)),
        Stmt::Emit(event) => format!("emit {event}"),
        Stmt::StartTimer(name, delay) => {
            format!("start_timer {name} {}", print_atom(delay))
        }
        Stmt::If { cond, then_block, else_block } => {
            let then = print_block(&Actions::new(then_block.clone()));
            if else_block.is_empty() {
                format!("if {} {then}", print_expr(cond))
            } else {
                let els = print_block(&Actions::new(else_block.clone()));
                format!("if {} {then} else {els}", print_expr(cond))
            }
        }
    }
}

pub fn print_expr(expr: &Expr) -> String {
    print_prec(expr, 0)
}

/// Delay expressions follow the timer name with no separator, so anything
/// non-atomic is parenthesized to keep the print unambiguous.
fn print_atom(expr: &Expr) -> String {
    match expr {
        Expr::Lit(_) | Expr::Var(_) | Expr::Call { .. } | Expr::InState { .. } => print_expr(expr),
        _ => format!("({})", print_expr(expr)),
    }
}

fn prec_of(op: BinOp) -> u8 {
    match op {
        BinOp::Or => 1,
        BinOp::And => 2,
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne => 4,
        BinOp::Add | BinOp::Sub => 5,
        BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
    }
}

fn print_prec(expr: &Expr, min: u8) -> String {
    match expr {
        Expr::Lit(v) => print_literal(v),
        Expr::Var(name) => name.clone(),
        Expr::InState { machine, state } => format!("in({machine}, {state})"),
        Expr::Call { builtin, args } => {
            let args: Vec<String> = args.iter().map(|a| print_prec(a, 0)).collect();
            format!("{}({})", builtin.name(), args.join(", "))
        }
        Expr::Unary { op: UnaryOp::Not, expr } => {
            let s = format!("not {}", print_prec(expr, 3));
            if min > 3 {
                format!("({s})")
            } else {
                s
            }
        }
        Expr::Unary { op: UnaryOp::Neg, expr } => {
            let s = format!("-{}", print_prec(expr, 7));
            if min > 7 {
                format!("({s})")
            } else {
                s
            }
        }
        Expr::Binary { op, lhs, rhs } => {
            let p = prec_of(*op);
            // Comparisons are non-associative; others are left-associative.
            let (lp, rp) = if p == 4 { (5, 5) } else { (p, p + 1) };
            let s = format!(
                "{} {} {}",
                print_prec(lhs, lp),
                op.symbol(),
                print_prec(rhs, rp)
            );
            if p < min {
                format!("({s})")
            } else {
                s
            }
        }
    }
}

fn print_literal(v: &Value) -> String {
    match v {
        // Shortest round-trip form keeps reparsed literals bit-identical.
        Value::Num(n) => format!("{n}"),
        Value::Bool(b) => b.to_string(),
        Value::Text(t) => format!("\"{t}\""),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_model, parse_plan, DslError};
    use crate::mission;

    #[test]
    fn reference_model_parses() {
        let model = parse_model(mission::reference_model()).unwrap();
        let names: Vec<&str> = model.machines.iter().map(|m| m.name.as_str()).collect();
        for expected in ["model", "environment", "space", "eps", "obsw", "ants"] {
            assert!(names.contains(&expected), "missing machine {expected}");
        }
        let obsw = model.machines.iter().find(|m| m.name == "obsw").unwrap();
        let states: Vec<&str> = obsw.states.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(states, ["OFF", "WAIT", "BOOT", "DEPLOYMENT", "SAFE", "NOMINAL"]);
        assert_eq!(model.roots(), vec!["model".to_string()]);
    }

    #[test]
    fn minimal_machine() {
        let model = parse_model("machine m { initial A state A { } }").unwrap();
        assert_eq!(model.machines.len(), 1);
        assert_eq!(model.machines[0].states.len(), 1);
        assert!(model.machines[0].states[0].transitions.is_empty());
    }

    #[test]
    fn undeclared_target_names_the_state() {
        let err = parse_model("machine m { initial A state A { on go -> GHOST } }").unwrap_err();
        match err {
            DslError::UnknownTarget { state, .. } => assert_eq!(state, "GHOST"),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn strip_lines(model: &mut ModelFile) {
        for machine in &mut model.machines {
            for state in &mut machine.states {
                state.entry_actions.line = 0;
                state.exit_actions.line = 0;
                if let Some(p) = &mut state.periodic {
                    p.actions.line = 0;
                }
                for t in &mut state.transitions {
                    t.line = 0;
                    t.actions.line = 0;
                }
            }
        }
    }

    #[test]
    fn model_round_trip() {
        let mut model = parse_model(mission::reference_model()).unwrap();
        let printed = print_model(&model);
        let mut reparsed = parse_model(&printed).unwrap_or_else(|e| panic!("{e}\n{printed}"));
        strip_lines(&mut model);
        strip_lines(&mut reparsed);
        assert_eq!(reparsed, model);
    }

    #[test]
    fn plan_round_trip() {
        let plan = parse_plan(mission::launch_plan()).unwrap();
        assert_eq!(plan.injections, vec![(0, "launched".to_string())]);
        assert_eq!(plan.assertions.len(), 6);
        let printed = print_plan(&plan);
        let mut reparsed = parse_plan(&printed).unwrap();
        // Printing groups injections first; compare order-insensitively on
        // the assertion list and exactly on injections.
        assert_eq!(reparsed.injections, plan.injections);
        let strip = |a: &mut Assertion| match a {
            Assertion::At { line, .. }
            | Assertion::Always { line, .. }
            | Assertion::EventuallyWithin { line, .. } => *line = 0,
        };
        let mut orig = plan.assertions.clone();
        orig.iter_mut().for_each(strip);
        reparsed.assertions.iter_mut().for_each(strip);
        assert_eq!(reparsed.assertions, orig);
    }

    #[test]
    fn empty_plan_is_valid() {
        let plan = parse_plan("plan nothing { }").unwrap();
        assert!(plan.injections.is_empty() && plan.assertions.is_empty());
        assert_eq!(plan.horizon(), 0);
    }

    #[test]
    fn non_monotonic_times_rejected() {
        let err = parse_plan("plan p {\n  at 100 emit a\n  at 50 emit b\n}").unwrap_err();
        assert_eq!(err, DslError::NonMonotonicTimes { line: 3 });
    }

    #[test]
    fn fractional_times_rejected() {
        let err = parse_plan("plan p { at 1.5 emit a }").unwrap_err();
        assert!(matches!(err, DslError::Syntax { .. }));
    }

    #[test]
    fn expression_printing_preserves_structure() {
        let cases = [
            "1 + 2 * 3",
            "(1 + 2) * 3",
            "not a and b",
            "not (a and b)",
            "a or b and c",
            "-x * y",
            "-(x * y)",
            "clamp(battery + 1, 0, 20)",
            "in(space.obsw, SAFE) == true",
            "a - b - c",
            "a - (b - c)",
        ];
        for case in cases {
            let model = parse_model(&format!(
                "machine m {{ initial A state A {{ on e [{case}] -> A }} }}"
            ))
            .unwrap();
            let guard = model.machines[0].states[0].transitions[0]
                .guard
                .clone()
                .unwrap();
            let printed = print_expr(&guard);
            let reparsed = parse_model(&format!(
                "machine m {{ initial A state A {{ on e [{printed}] -> A }} }}"
            ))
            .unwrap();
            let guard2 = reparsed.machines[0].states[0].transitions[0]
                .guard
                .clone()
                .unwrap();
            assert_eq!(guard, guard2, "case `{case}` printed as `{printed}`");
        }
    }

    #[test]
    fn duplicate_var_rejected() {
        let err = parse_model("var a = 1\nvar a = 2\n").unwrap_err();
        assert_eq!(err, DslError::DuplicateVar { line: 2, name: "a".into() });
    }

    #[test]
    fn auto_requires_guard_at_parse_time() {
        let err = parse_model("machine m { initial A state A { on auto -> A } }").unwrap_err();
        assert!(matches!(err, DslError::AutoWithoutGuard { .. }));
    }
}

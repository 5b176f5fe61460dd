//! Line-oriented interactive debugger: step the simulation, emit events,
//! inspect and set variables, and run to breakpoints.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::runner::{RunError, Session};
use crate::script::Value;

const HELP: &str = "commands:
  step [n]              advance n macro ticks (default 1)
  emit <event>          deliver an event at the current clock
  get <var>             print a variable
  set <var> <value>     assign a variable (true/false, number, or text)
  states                print the active configuration
  break <machine> <state>  halt `continue` when the machine enters the state
  continue              run until a breakpoint hits (or 1000000 ticks)
  quit                  leave the session";

const CONTINUE_CAP: u64 = 1_000_000;

pub struct Repl<'m> {
    session: Session<'m>,
    breakpoints: Vec<(String, String)>,
}

impl<'m> Repl<'m> {
    pub fn new(session: Session<'m>) -> Repl<'m> {
        Repl { session, breakpoints: Vec::new() }
    }

    /// Drive the session from `input`, writing replies to `output`, until
    /// `quit` or end of input. Every command echoes the resulting clock and
    /// any state changes it caused.
    pub fn run(
        mut self,
        input: impl BufRead,
        mut output: impl Write,
    ) -> Result<Session<'m>, RunError> {
        let _ = writeln!(output, "clock={}  (type `help` for commands)", self.session.clock());
        for line in input.lines() {
            let Ok(line) = line else { break };
            let words: Vec<&str> = line.split_whitespace().collect();
            match self.command(&words, &mut output) {
                Ok(true) => {}
                Ok(false) => break,
                Err(e) => return Err(e),
            }
        }
        Ok(self.session)
    }

    /// Returns Ok(false) when the session should end.
    fn command(&mut self, words: &[&str], out: &mut impl Write) -> Result<bool, RunError> {
        let before = self.snapshot();
        match words {
            [] => return Ok(true),
            ["quit"] | ["exit"] => return Ok(false),
            ["step"] => self.step(1)?,
            ["step", n] => match n.parse::<u64>() {
                Ok(n) => self.step(n)?,
                Err(_) => {
                    let _ = writeln!(out, "step count must be a whole number");
                    return Ok(true);
                }
            },
            ["emit", event] => {
                self.session.emit_now(event)?;
            }
            ["get", var] => {
                match self.session.sim.get_var(var) {
                    Some(v) => {
                        let _ = writeln!(out, "{var} = {v}");
                    }
                    None => {
                        let _ = writeln!(out, "no variable named `{var}`");
                    }
                }
                return Ok(true);
            }
            ["set", var, rest @ ..] if !rest.is_empty() => {
                let text = rest.join(" ");
                let value = parse_value(&text);
                self.session.sim.store.insert(var.to_string(), value);
                // Assignments can enable auto transitions; settle like an
                // action-script assignment would.
                self.session.engine.inject(&mut self.session.sim, vec![])?;
            }
            ["states"] => {
                for (path, state) in self.session.sim.active_config(self.session.engine.model) {
                    let _ = writeln!(out, "{path}: {state}");
                }
                let _ = writeln!(out, "clock={}", self.session.clock());
                return Ok(true);
            }
            ["break", machine, state] => {
                if self.session.engine.model.resolve_machine(machine).is_none() {
                    let _ = writeln!(out, "no machine named `{machine}`");
                    return Ok(true);
                }
                self.breakpoints.push((machine.to_string(), state.to_string()));
            }
            ["continue"] => {
                let mut ticks = 0;
                while !self.at_breakpoint() && ticks < CONTINUE_CAP {
                    self.session.tick()?;
                    ticks += 1;
                }
                if ticks == CONTINUE_CAP {
                    let _ = writeln!(out, "no breakpoint hit after {CONTINUE_CAP} ticks");
                }
            }
            ["help"] => {
                let _ = writeln!(out, "{HELP}");
                return Ok(true);
            }
            _ => {
                let _ = writeln!(out, "unknown command: {}", words.join(" "));
                let _ = writeln!(out, "{HELP}");
                return Ok(true);
            }
        }
        self.report(before, out);
        Ok(true)
    }

    fn step(&mut self, n: u64) -> Result<(), RunError> {
        for _ in 0..n {
            self.session.tick()?;
        }
        Ok(())
    }

    fn at_breakpoint(&self) -> bool {
        let model = self.session.engine.model;
        self.breakpoints.iter().any(|(machine, state)| {
            model
                .resolve_machine(machine)
                .and_then(|i| self.session.sim.state_of(model, i))
                .is_some_and(|s| s == state)
        })
    }

    fn snapshot(&self) -> BTreeMap<String, String> {
        self.session.sim.active_config(self.session.engine.model)
    }

    fn report(&self, before: BTreeMap<String, String>, out: &mut impl Write) {
        let after = self.snapshot();
        for (path, state) in &after {
            match before.get(path) {
                Some(old) if old != state => {
                    let _ = writeln!(out, "{path}: {old} -> {state}");
                }
                None => {
                    let _ = writeln!(out, "{path}: inactive -> {state}");
                }
                _ => {}
            }
        }
        for (path, old) in &before {
            if !after.contains_key(path) {
                let _ = writeln!(out, "{path}: {old} -> inactive");
            }
        }
        let _ = writeln!(out, "clock={}", self.session.clock());
    }
}

fn parse_value(text: &str) -> Value {
    match text {
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        _ => match text.parse::<crate::Real>() {
            Ok(n) => Value::Num(n),
            Err(_) => Value::Text(text.trim_matches('"').to_string()),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;
    use crate::dsl::parse_model;
    use crate::mission;
    use crate::runner;

    fn drive(commands: &str) -> String {
        let file = parse_model(mission::reference_model()).unwrap();
        let model = runner::link(&file).unwrap();
        let session =
            Session::new(&model, SimConfig::default(), &file, 0, Vec::new()).unwrap();
        let mut out = Vec::new();
        Repl::new(session)
            .run(commands.as_bytes(), &mut out)
            .unwrap();
        String::from_utf8(out).unwrap()
    }

    #[test]
    fn killswitch_reads_true_before_any_command() {
        let out = drive("get killswitch\n");
        assert!(out.contains("killswitch = true"), "{out}");
    }

    #[test]
    fn emit_and_step_show_powered_eps() {
        let out = drive("emit launched\nstep 1\nstates\nget killswitch\n");
        assert!(out.contains("model.system.space.service.eps: POWERED"), "{out}");
        assert!(out.contains("killswitch = false"), "{out}");
    }

    #[test]
    fn breakpoint_halts_at_boot() {
        let out = drive("emit launched\nbreak obsw BOOT\ncontinue\nstates\n");
        assert!(out.contains("model.system.space.service.obsw: BOOT"), "{out}");
        assert!(out.contains("clock=1800"), "{out}");
    }

    #[test]
    fn set_feeds_guards_like_an_action_assignment() {
        // Flip killswitch back on before launch: the eps power-on guard
        // must then block the whole chain.
        let out = drive("set killswitch true\nemit launched\nstep 5\nstates\n");
        assert!(out.contains("model.system.space.service.eps: OFF"), "{out}");
    }

    #[test]
    fn unknown_command_prints_help_and_continues() {
        let out = drive("frobnicate\nget killswitch\n");
        assert!(out.contains("unknown command"), "{out}");
        assert!(out.contains("killswitch = true"), "{out}");
    }
}

//! Recursive-descent parsers for model and plan files.

use super::lexer::{tokenize, Tok, Token};
use super::{Assertion, DslError, PlanFile};
use crate::engine::{Actions, MachineDef, Periodic, StateDef, TransitionDef, Trigger};
use crate::script::{BinOp, Builtin, Expr, Stmt, UnaryOp, Value, VariableStore};
use crate::telemetry::MonitorSpec;

/// A parsed model file: machines, monitors and declared variables with their
/// initial values (in declaration order, for faithful printing).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub machines: Vec<MachineDef>,
    pub monitors: Vec<MonitorSpec>,
    pub variables: Vec<(String, Value)>,
}

impl ModelFile {
    pub fn initial_store(&self) -> VariableStore {
        self.variables.iter().cloned().collect()
    }

    /// Machines not referenced as a submachine anywhere, in file order.
    pub fn roots(&self) -> Vec<String> {
        let referenced: Vec<&str> = self
            .machines
            .iter()
            .flat_map(|m| m.states.iter())
            .flat_map(|s| s.submachines.iter().map(String::as_str))
            .collect();
        self.machines
            .iter()
            .filter(|m| !referenced.contains(&m.name.as_str()))
            .map(|m| m.name.clone())
            .collect()
    }
}

pub fn parse_model(text: &str) -> Result<ModelFile, DslError> {
    let mut p = Parser::new(text)?;
    let mut model = ModelFile {
        machines: Vec::new(),
        monitors: Vec::new(),
        variables: Vec::new(),
    };
    loop {
        match p.peek().clone() {
            Tok::Eof => break,
            Tok::Ident(kw) if kw == "var" => {
                let line = p.line();
                p.bump();
                let name = p.ident("variable name")?;
                p.expect(Tok::Assign, "`=`")?;
                let value = p.literal()?;
                if model.variables.iter().any(|(n, _)| *n == name) {
                    return Err(DslError::DuplicateVar { line, name });
                }
                model.variables.push((name, value));
            }
            Tok::Ident(kw) if kw == "machine" => {
                model.machines.push(p.machine()?);
            }
            Tok::Ident(kw) if kw == "monitor" => {
                model.monitors.push(p.monitor()?);
            }
            _ => return Err(p.err("`var`, `machine` or `monitor`")),
        }
    }
    Ok(model)
}

pub fn parse_plan(text: &str) -> Result<PlanFile, DslError> {
    let mut p = Parser::new(text)?;
    p.keyword("plan")?;
    let name = p.ident("plan name")?;
    p.expect(Tok::LBrace, "`{`")?;
    let mut plan = PlanFile { name, injections: Vec::new(), assertions: Vec::new() };
    let mut last_at: Option<u64> = None;
    while !p.at(&Tok::RBrace) {
        let line = p.line();
        match p.peek().clone() {
            Tok::Ident(kw) if kw == "at" => {
                p.bump();
                let t = p.seconds()?;
                if last_at.is_some_and(|prev| t < prev) {
                    return Err(DslError::NonMonotonicTimes { line });
                }
                last_at = Some(t);
                match p.peek().clone() {
                    Tok::Ident(kw) if kw == "emit" => {
                        p.bump();
                        let event = p.ident("event name")?;
                        plan.injections.push((t, event));
                    }
                    Tok::Ident(kw) if kw == "expect" => {
                        p.bump();
                        let predicate = p.expr()?;
                        plan.assertions.push(Assertion::At { t, predicate, line });
                    }
                    _ => return Err(p.err("`emit` or `expect`")),
                }
            }
            Tok::Ident(kw) if kw == "expect" => {
                p.bump();
                match p.peek().clone() {
                    Tok::Ident(kw) if kw == "always" => {
                        p.bump();
                        let predicate = p.expr()?;
                        plan.assertions.push(Assertion::Always { predicate, line });
                    }
                    Tok::Ident(kw) if kw == "eventually" => {
                        p.bump();
                        p.keyword("within")?;
                        let t1 = p.seconds()?;
                        p.expect(Tok::DotDot, "`..`")?;
                        let t2 = p.seconds()?;
                        if t1 > t2 {
                            return Err(DslError::BadWindow { line });
                        }
                        let predicate = p.expr()?;
                        plan.assertions
                            .push(Assertion::EventuallyWithin { t1, t2, predicate, line });
                    }
                    _ => return Err(p.err("`always` or `eventually`")),
                }
            }
            _ => return Err(p.err("`at`, `expect` or `}`")),
        }
    }
    p.bump(); // `}`
    p.expect(Tok::Eof, "end of file")?;
    Ok(plan)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Parser, DslError> {
        Ok(Parser { tokens: tokenize(text)?, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn line(&self) -> u32 {
        self.tokens[self.pos].line
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn at(&self, tok: &Tok) -> bool {
        self.peek() == tok
    }

    fn err(&self, expected: &str) -> DslError {
        let t = &self.tokens[self.pos];
        DslError::Syntax {
            line: t.line,
            col: t.col,
            expected: format!("{expected}, found {}", t.tok.describe()),
        }
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<(), DslError> {
        if self.peek() == &tok {
            self.bump();
            Ok(())
        } else {
            Err(self.err(expected))
        }
    }

    fn ident(&mut self, expected: &str) -> Result<String, DslError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.err(expected)),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), DslError> {
        match self.peek() {
            Tok::Ident(s) if s == kw => {
                self.bump();
                Ok(())
            }
            _ => Err(self.err(&format!("`{kw}`"))),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn literal(&mut self) -> Result<Value, DslError> {
        match self.peek().clone() {
            Tok::Number(n) => {
                self.bump();
                Ok(Value::Num(n))
            }
            Tok::Minus => {
                self.bump();
                match self.peek().clone() {
                    Tok::Number(n) => {
                        self.bump();
                        Ok(Value::Num(-n))
                    }
                    _ => Err(self.err("number")),
                }
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Value::Text(s))
            }
            Tok::Ident(s) if s == "true" => {
                self.bump();
                Ok(Value::Bool(true))
            }
            Tok::Ident(s) if s == "false" => {
                self.bump();
                Ok(Value::Bool(false))
            }
            _ => Err(self.err("literal value")),
        }
    }

    /// A non-negative whole number of seconds.
    fn seconds(&mut self) -> Result<u64, DslError> {
        match self.peek().clone() {
            Tok::Number(n) if n >= 0.0 && n.fract() == 0.0 => {
                self.bump();
                Ok(n as u64)
            }
            _ => Err(self.err("whole number of seconds")),
        }
    }

    fn dotted_path(&mut self) -> Result<String, DslError> {
        let mut path = self.ident("machine path")?;
        while self.at(&Tok::Dot) {
            self.bump();
            path.push('.');
            path.push_str(&self.ident("path segment")?);
        }
        Ok(path)
    }

    fn monitor(&mut self) -> Result<MonitorSpec, DslError> {
        self.keyword("monitor")?;
        let source = self.dotted_path()?;
        self.keyword("as")?;
        let column = match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                s
            }
            _ => return Err(self.err("quoted column label")),
        };
        Ok(MonitorSpec { source, column })
    }

    fn machine(&mut self) -> Result<MachineDef, DslError> {
        self.keyword("machine")?;
        let decl_line = self.line();
        let name = self.ident("machine name")?;
        self.expect(Tok::LBrace, "`{`")?;
        self.keyword("initial")?;
        let initial = self.ident("initial state name")?;
        let mut states: Vec<StateDef> = Vec::new();
        let mut monitors = Vec::new();
        while !self.at(&Tok::RBrace) {
            if self.at_keyword("monitor") {
                monitors.push(self.monitor()?);
                continue;
            }
            let line = self.line();
            let state = self.state(&name)?;
            if states.iter().any(|s| s.name == state.name) {
                return Err(DslError::DuplicateState {
                    line,
                    machine: name.clone(),
                    state: state.name,
                });
            }
            states.push(state);
        }
        self.bump(); // `}`

        if !states.iter().any(|s| s.name == initial) {
            return Err(DslError::UnknownInitial {
                line: decl_line,
                machine: name,
                state: initial,
            });
        }
        for state in &states {
            for t in &state.transitions {
                if !states.iter().any(|s| s.name == t.target) {
                    return Err(DslError::UnknownTarget {
                        line: t.line,
                        machine: name,
                        state: t.target.clone(),
                    });
                }
            }
        }
        Ok(MachineDef { name, initial, states, monitors })
    }

    fn state(&mut self, machine: &str) -> Result<StateDef, DslError> {
        self.keyword("state")
            .map_err(|_| self.err("`state`, `monitor` or `}`"))?;
        let name = self.ident("state name")?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut def = StateDef::named(&name);

        if self.at_keyword("entry") {
            self.bump();
            def.entry_actions = self.action_block()?;
        }
        if self.at_keyword("exit") {
            self.bump();
            def.exit_actions = self.action_block()?;
        }
        if self.at_keyword("every") {
            self.bump();
            let interval = match self.peek().clone() {
                Tok::Number(n) if n > 0.0 && n.fract() == 0.0 => {
                    self.bump();
                    n as u64
                }
                _ => return Err(self.err("positive whole interval in seconds")),
            };
            let actions = self.action_block()?;
            def.periodic = Some(Periodic { interval, actions });
        }
        if self.at_keyword("uses") {
            self.bump();
            def.submachines.push(self.ident("submachine name")?);
            while self.at(&Tok::Comma) {
                self.bump();
                def.submachines.push(self.ident("submachine name")?);
            }
        }
        while self.at_keyword("on") {
            def.transitions.push(self.transition(machine)?);
        }
        self.expect(Tok::RBrace, "`on` or `}`")?;
        let _ = machine;
        Ok(def)
    }

    fn transition(&mut self, _machine: &str) -> Result<TransitionDef, DslError> {
        let line = self.line();
        self.keyword("on")?;
        let trigger = match self.peek().clone() {
            Tok::Ident(s) if s == "timer" => {
                self.bump();
                Trigger::Timer(self.ident("timer name")?)
            }
            Tok::Ident(s) if s == "auto" => {
                self.bump();
                Trigger::Auto
            }
            Tok::Ident(_) => Trigger::Event(self.ident("event name")?),
            _ => return Err(self.err("event name, `timer` or `auto`")),
        };
        let guard = if self.at(&Tok::LBracket) {
            self.bump();
            let g = self.expr()?;
            self.expect(Tok::RBracket, "`]`")?;
            Some(g)
        } else {
            None
        };
        if matches!(trigger, Trigger::Auto) && guard.is_none() {
            return Err(DslError::AutoWithoutGuard { line });
        }
        let actions = if self.at(&Tok::Slash) {
            self.bump();
            self.action_block()?
        } else {
            Actions::default()
        };
        self.expect(Tok::Arrow, "`->`")?;
        let target = self.ident("target state name")?;
        Ok(TransitionDef { trigger, guard, actions, target, line })
    }

    fn action_block(&mut self) -> Result<Actions, DslError> {
        let line = self.line();
        let stmts = self.braced_statements()?;
        Ok(Actions { stmts, line })
    }

    fn braced_statements(&mut self) -> Result<Vec<Stmt>, DslError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut stmts = Vec::new();
        loop {
            while self.at(&Tok::Semi) {
                self.bump();
            }
            if self.at(&Tok::RBrace) {
                self.bump();
                return Ok(stmts);
            }
            stmts.push(self.statement()?);
        }
    }

    fn statement(&mut self) -> Result<Stmt, DslError> {
        match self.peek().clone() {
            Tok::Ident(kw) if kw == "emit" => {
                self.bump();
                Ok(Stmt::Emit(self.ident("event name")?))
            }
            Tok::Ident(kw) if kw == "start_timer" => {
                self.bump();
                let name = self.ident("timer name")?;
                let delay = self.expr()?;
                Ok(Stmt::StartTimer(name, delay))
            }
            Tok::Ident(kw) if kw == "if" => {
                self.bump();
                let cond = self.expr()?;
                let then_block = self.braced_statements()?;
                let else_block = if self.at_keyword("else") {
                    self.bump();
                    self.braced_statements()?
                } else {
                    Vec::new()
                };
                Ok(Stmt::If { cond, then_block, else_block })
            }
            Tok::Ident(_) => {
                let name = self.ident("variable name")?;
                self.expect(Tok::Assign, "`=`")?;
                Ok(Stmt::Assign(name, self.expr()?))
            }
            _ => Err(self.err("statement")),
        }
    }

    // Expression grammar, loosest to tightest:
    //   or -> and -> not -> comparison -> additive -> multiplicative -> unary
    fn expr(&mut self) -> Result<Expr, DslError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.and_expr()?;
        while self.at_keyword("or") {
            self.bump();
            let rhs = self.and_expr()?;
            lhs = Expr::Binary { op: BinOp::Or, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.not_expr()?;
        while self.at_keyword("and") {
            self.bump();
            let rhs = self.not_expr()?;
            lhs = Expr::Binary { op: BinOp::And, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr, DslError> {
        if self.at_keyword("not") {
            self.bump();
            let inner = self.not_expr()?;
            return Ok(Expr::Unary { op: UnaryOp::Not, expr: Box::new(inner) });
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, DslError> {
        let lhs = self.additive()?;
        let op = match self.peek() {
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::EqEq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.additive()?;
        Ok(Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) })
    }

    fn additive(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.multiplicative()?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Percent => BinOp::Rem,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
    }

    fn unary(&mut self) -> Result<Expr, DslError> {
        if self.at(&Tok::Minus) {
            self.bump();
            let inner = self.unary()?;
            return Ok(Expr::Unary { op: UnaryOp::Neg, expr: Box::new(inner) });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, DslError> {
        match self.peek().clone() {
            Tok::Number(n) => {
                self.bump();
                Ok(Expr::Lit(Value::Num(n)))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Lit(Value::Text(s)))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(s) if s == "true" => {
                self.bump();
                Ok(Expr::Lit(Value::Bool(true)))
            }
            Tok::Ident(s) if s == "false" => {
                self.bump();
                Ok(Expr::Lit(Value::Bool(false)))
            }
            Tok::Ident(s) if s == "in" => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let machine = self.dotted_path()?;
                self.expect(Tok::Comma, "`,`")?;
                let state = self.ident("state name")?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::InState { machine, state })
            }
            Tok::Ident(name) => {
                self.bump();
                if self.at(&Tok::LParen) {
                    let call_err = self.err("builtin function");
                    self.bump();
                    let mut args = Vec::new();
                    if !self.at(&Tok::RParen) {
                        args.push(self.expr()?);
                        while self.at(&Tok::Comma) {
                            self.bump();
                            args.push(self.expr()?);
                        }
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    let builtin = Builtin::from_name(&name).ok_or(call_err)?;
                    if args.len() != builtin.arity() {
                        return Err(self.err(&format!(
                            "{} argument(s) for `{name}`",
                            builtin.arity()
                        )));
                    }
                    Ok(Expr::Call { builtin, args })
                } else {
                    Ok(Expr::Var(name))
                }
            }
            _ => Err(self.err("expression")),
        }
    }
}

//! The embedded action/expression language used for guards, entry/exit and
//! transition actions, periodic blocks and plan predicates.
//!
//! The language is deliberately closed: no loops, no user functions, a fixed
//! builtin set. Every action block terminates by construction.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::Real;

/// A runtime value: 64-bit float, boolean or text. No implicit coercions.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(Real),
    Bool(bool),
    Text(String),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Num(_) => "number",
            Value::Bool(_) => "boolean",
            Value::Text(_) => "text",
        }
    }

    fn as_num(&self) -> Result<Real, ScriptError> {
        match self {
            Value::Num(n) => Ok(*n),
            other => Err(ScriptError::TypeMismatch {
                expected: "number",
                found: other.type_name(),
            }),
        }
    }

    fn as_bool(&self) -> Result<bool, ScriptError> {
        match self {
            Value::Bool(b) => Ok(*b),
            other => Err(ScriptError::TypeMismatch {
                expected: "boolean",
                found: other.type_name(),
            }),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(n) => write!(f, "{}", crate::telemetry::format_number(*n)),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Text(t) => write!(f, "{t}"),
        }
    }
}

/// The global variable store shared by every machine in a simulation.
pub type VariableStore = BTreeMap<String, Value>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "and",
            BinOp::Or => "or",
        }
    }
}

/// The fixed builtin function set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Exp,
    Pow,
    Clamp,
    Min,
    Max,
    Abs,
    Time,
    Rand,
}

impl Builtin {
    pub fn from_name(name: &str) -> Option<Builtin> {
        Some(match name {
            "exp" => Builtin::Exp,
            "pow" => Builtin::Pow,
            "clamp" => Builtin::Clamp,
            "min" => Builtin::Min,
            "max" => Builtin::Max,
            "abs" => Builtin::Abs,
            "time" => Builtin::Time,
            "rand" => Builtin::Rand,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Exp => "exp",
            Builtin::Pow => "pow",
            Builtin::Clamp => "clamp",
            Builtin::Min => "min",
            Builtin::Max => "max",
            Builtin::Abs => "abs",
            Builtin::Time => "time",
            Builtin::Rand => "rand",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::Exp | Builtin::Abs => 1,
            Builtin::Pow | Builtin::Min | Builtin::Max => 2,
            Builtin::Clamp => 3,
            Builtin::Time | Builtin::Rand => 0,
        }
    }

    /// `rand()` consumes PRNG state; everything else is pure.
    pub fn is_pure(self) -> bool {
        !matches!(self, Builtin::Rand)
    }
}

/// Expression AST. `InState` is the state-membership atom used by plan
/// predicates and guards: `in(machine-path, state-name)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(Value),
    Var(String),
    InState { machine: String, state: String },
    Unary { op: UnaryOp, expr: Box<Expr> },
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Call { builtin: Builtin, args: Vec<Expr> },
}

/// One statement of an action block.
#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Assign(String, Expr),
    Emit(String),
    StartTimer(String, Expr),
    If {
        cond: Expr,
        then_block: ActionBlock,
        else_block: ActionBlock,
    },
}

pub type ActionBlock = Vec<Stmt>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ScriptError {
    #[error("undeclared variable `{0}`")]
    UndeclaredVariable(String),
    #[error("type mismatch: expected {expected}, found {found}")]
    TypeMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("division by zero")]
    DivisionByZero,
    #[error("unknown machine `{0}` in state-membership test")]
    UnknownMachine(String),
}

/// Resolver for `in(machine, state)` atoms. The engine supplies one backed by
/// the active configuration; contexts without machines use [`NoStates`].
pub trait StateQuery {
    fn in_state(&self, machine: &str, state: &str) -> Result<bool, ScriptError>;
}

/// A [`StateQuery`] that rejects every membership test.
pub struct NoStates;

impl StateQuery for NoStates {
    fn in_state(&self, machine: &str, _state: &str) -> Result<bool, ScriptError> {
        Err(ScriptError::UnknownMachine(machine.to_string()))
    }
}

/// Read-only evaluation context: the shared store, the simulation clock in
/// seconds, the seeded PRNG and the state-membership resolver.
pub struct EvalCtx<'a> {
    pub store: &'a VariableStore,
    pub clock: u64,
    pub rng: &'a mut ChaCha8Rng,
    pub states: &'a dyn StateQuery,
}

/// Side effects produced by executing an action block. The engine turns
/// emitted names into queued events and timer requests into registered timers.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Effects {
    pub emitted: Vec<String>,
    /// (timer name, delay in seconds as evaluated).
    pub timers: Vec<(String, Real)>,
}

pub fn eval_expr(expr: &Expr, ctx: &mut EvalCtx<'_>) -> Result<Value, ScriptError> {
    match expr {
        Expr::Lit(v) => Ok(v.clone()),
        Expr::Var(name) => ctx
            .store
            .get(name)
            .cloned()
            .ok_or_else(|| ScriptError::UndeclaredVariable(name.clone())),
        Expr::InState { machine, state } => {
            Ok(Value::Bool(ctx.states.in_state(machine, state)?))
        }
        Expr::Unary { op, expr } => {
            let v = eval_expr(expr, ctx)?;
            match op {
                UnaryOp::Neg => Ok(Value::Num(-v.as_num()?)),
                UnaryOp::Not => Ok(Value::Bool(!v.as_bool()?)),
            }
        }
        Expr::Binary { op, lhs, rhs } => eval_binary(*op, lhs, rhs, ctx),
        Expr::Call { builtin, args } => eval_call(*builtin, args, ctx),
    }
}

fn eval_binary(
    op: BinOp,
    lhs: &Expr,
    rhs: &Expr,
    ctx: &mut EvalCtx<'_>,
) -> Result<Value, ScriptError> {
    // `and`/`or` short-circuit; everything else evaluates both sides.
    match op {
        BinOp::And => {
            return if eval_expr(lhs, ctx)?.as_bool()? {
                Ok(Value::Bool(eval_expr(rhs, ctx)?.as_bool()?))
            } else {
                Ok(Value::Bool(false))
            };
        }
        BinOp::Or => {
            return if eval_expr(lhs, ctx)?.as_bool()? {
                Ok(Value::Bool(true))
            } else {
                Ok(Value::Bool(eval_expr(rhs, ctx)?.as_bool()?))
            };
        }
        _ => {}
    }
    let l = eval_expr(lhs, ctx)?;
    let r = eval_expr(rhs, ctx)?;
    match op {
        BinOp::Add => Ok(Value::Num(l.as_num()? + r.as_num()?)),
        BinOp::Sub => Ok(Value::Num(l.as_num()? - r.as_num()?)),
        BinOp::Mul => Ok(Value::Num(l.as_num()? * r.as_num()?)),
        BinOp::Div => {
            let d = r.as_num()?;
            if d == 0.0 {
                return Err(ScriptError::DivisionByZero);
            }
            Ok(Value::Num(l.as_num()? / d))
        }
        BinOp::Rem => {
            let d = r.as_num()?;
            if d == 0.0 {
                return Err(ScriptError::DivisionByZero);
            }
            Ok(Value::Num(l.as_num()? % d))
        }
        BinOp::Lt => Ok(Value::Bool(l.as_num()? < r.as_num()?)),
        BinOp::Le => Ok(Value::Bool(l.as_num()? <= r.as_num()?)),
        BinOp::Gt => Ok(Value::Bool(l.as_num()? > r.as_num()?)),
        BinOp::Ge => Ok(Value::Bool(l.as_num()? >= r.as_num()?)),
        BinOp::Eq => value_eq(&l, &r).map(Value::Bool),
        BinOp::Ne => value_eq(&l, &r).map(|b| Value::Bool(!b)),
        BinOp::And | BinOp::Or => unreachable!("handled above"),
    }
}

/// Equality is only defined between values of the same type; comparisons
/// are exact (tolerances belong to tests, not to the language).
fn value_eq(l: &Value, r: &Value) -> Result<bool, ScriptError> {
    match (l, r) {
        (Value::Num(a), Value::Num(b)) => Ok(a == b),
        (Value::Bool(a), Value::Bool(b)) => Ok(a == b),
        (Value::Text(a), Value::Text(b)) => Ok(a == b),
        _ => Err(ScriptError::TypeMismatch {
            expected: l.type_name(),
            found: r.type_name(),
        }),
    }
}

fn eval_call(
    builtin: Builtin,
    args: &[Expr],
    ctx: &mut EvalCtx<'_>,
) -> Result<Value, ScriptError> {
    debug_assert_eq!(args.len(), builtin.arity(), "parser enforces arity");
    let mut nums = Vec::with_capacity(args.len());
    for a in args {
        nums.push(eval_expr(a, ctx)?.as_num()?);
    }
    let v = match builtin {
        Builtin::Exp => nums[0].exp(),
        Builtin::Pow => nums[0].powf(nums[1]),
        Builtin::Clamp => nums[0].max(nums[1]).min(nums[2]),
        Builtin::Min => nums[0].min(nums[1]),
        Builtin::Max => nums[0].max(nums[1]),
        Builtin::Abs => nums[0].abs(),
        Builtin::Time => ctx.clock as Real,
        Builtin::Rand => ctx.rng.gen::<Real>(),
    };
    Ok(Value::Num(v))
}

/// Execute a block: assignments land in `store` and are visible to later
/// statements of the same block; emitted events and timer requests are
/// appended to `effects` in statement order.
pub fn exec_block(
    block: &ActionBlock,
    store: &mut VariableStore,
    clock: u64,
    rng: &mut ChaCha8Rng,
    states: &dyn StateQuery,
    effects: &mut Effects,
) -> Result<(), ScriptError> {
    for stmt in block {
        match stmt {
            Stmt::Assign(name, expr) => {
                let v = {
                    let mut ctx = EvalCtx { store, clock, rng, states };
                    eval_expr(expr, &mut ctx)?
                };
                store.insert(name.clone(), v);
            }
            Stmt::Emit(event) => effects.emitted.push(event.clone()),
            Stmt::StartTimer(name, delay) => {
                let v = {
                    let mut ctx = EvalCtx { store, clock, rng, states };
                    eval_expr(delay, &mut ctx)?
                };
                effects.timers.push((name.clone(), v.as_num()?));
            }
            Stmt::If { cond, then_block, else_block } => {
                let taken = {
                    let mut ctx = EvalCtx { store, clock, rng, states };
                    eval_expr(cond, &mut ctx)?.as_bool()?
                };
                let branch = if taken { then_block } else { else_block };
                exec_block(branch, store, clock, rng, states, effects)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn ctx_parts() -> (VariableStore, ChaCha8Rng) {
        (VariableStore::new(), ChaCha8Rng::seed_from_u64(7))
    }

    fn eval(expr: &Expr, store: &VariableStore, rng: &mut ChaCha8Rng) -> Result<Value, ScriptError> {
        let mut ctx = EvalCtx { store, clock: 0, rng, states: &NoStates };
        eval_expr(expr, &mut ctx)
    }

    fn num(n: Real) -> Expr {
        Expr::Lit(Value::Num(n))
    }

    #[test]
    fn arithmetic_precedence_shape() {
        // 1 + 2*3 built as the parser would build it.
        let (store, mut rng) = ctx_parts();
        let e = Expr::Binary {
            op: BinOp::Add,
            lhs: Box::new(num(1.0)),
            rhs: Box::new(Expr::Binary {
                op: BinOp::Mul,
                lhs: Box::new(num(2.0)),
                rhs: Box::new(num(3.0)),
            }),
        };
        assert_eq!(eval(&e, &store, &mut rng).unwrap(), Value::Num(7.0));
    }

    #[test]
    fn bool_equality_against_store() {
        let (mut store, mut rng) = ctx_parts();
        store.insert("killswitch".into(), Value::Bool(false));
        let e = Expr::Binary {
            op: BinOp::Eq,
            lhs: Box::new(Expr::Var("killswitch".into())),
            rhs: Box::new(Expr::Lit(Value::Bool(false))),
        };
        assert_eq!(eval(&e, &store, &mut rng).unwrap(), Value::Bool(true));
    }

    #[test]
    fn weibull_shape_via_builtins() {
        // exp(-pow(1000/5000, 1.5)) against a direct evaluation.
        let (store, mut rng) = ctx_parts();
        let e = Expr::Call {
            builtin: Builtin::Exp,
            args: vec![Expr::Unary {
                op: UnaryOp::Neg,
                expr: Box::new(Expr::Call {
                    builtin: Builtin::Pow,
                    args: vec![
                        Expr::Binary {
                            op: BinOp::Div,
                            lhs: Box::new(num(1000.0)),
                            rhs: Box::new(num(5000.0)),
                        },
                        num(1.5),
                    ],
                }),
            }],
        };
        let got = match eval(&e, &store, &mut rng).unwrap() {
            Value::Num(n) => n,
            other => panic!("expected number, got {other:?}"),
        };
        let expected = (-(1000.0f64 / 5000.0).powf(1.5)).exp();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn undeclared_read_is_an_error() {
        let (store, mut rng) = ctx_parts();
        let err = eval(&Expr::Var("ghost".into()), &store, &mut rng).unwrap_err();
        assert_eq!(err, ScriptError::UndeclaredVariable("ghost".into()));
    }

    #[test]
    fn division_by_zero() {
        let (store, mut rng) = ctx_parts();
        let e = Expr::Binary {
            op: BinOp::Div,
            lhs: Box::new(num(1.0)),
            rhs: Box::new(num(0.0)),
        };
        assert_eq!(eval(&e, &store, &mut rng).unwrap_err(), ScriptError::DivisionByZero);
    }

    #[test]
    fn no_text_number_coercion() {
        let (store, mut rng) = ctx_parts();
        let e = Expr::Binary {
            op: BinOp::Eq,
            lhs: Box::new(Expr::Lit(Value::Text("1".into()))),
            rhs: Box::new(num(1.0)),
        };
        assert!(matches!(
            eval(&e, &store, &mut rng).unwrap_err(),
            ScriptError::TypeMismatch { .. }
        ));
    }

    #[test]
    fn block_sequencing_and_effects() {
        let (mut store, mut rng) = ctx_parts();
        let block = vec![
            Stmt::Assign("x".into(), num(1.0)),
            Stmt::Assign(
                "x".into(),
                Expr::Binary {
                    op: BinOp::Add,
                    lhs: Box::new(Expr::Var("x".into())),
                    rhs: Box::new(num(1.0)),
                },
            ),
            Stmt::Emit("eps_power_on".into()),
        ];
        let mut effects = Effects::default();
        exec_block(&block, &mut store, 0, &mut rng, &NoStates, &mut effects).unwrap();
        assert_eq!(store.get("x"), Some(&Value::Num(2.0)));
        assert_eq!(effects.emitted, vec!["eps_power_on".to_string()]);
    }

    #[test]
    fn empty_block_is_a_no_op() {
        let (mut store, mut rng) = ctx_parts();
        store.insert("a".into(), Value::Num(5.0));
        let before = store.clone();
        let mut effects = Effects::default();
        exec_block(&Vec::new(), &mut store, 0, &mut rng, &NoStates, &mut effects).unwrap();
        assert_eq!(store, before);
        assert!(effects.emitted.is_empty() && effects.timers.is_empty());
    }

    #[test]
    fn rand_stream_reproducible() {
        let call = Expr::Call { builtin: Builtin::Rand, args: vec![] };
        let draw_seq = |seed: u64| -> Vec<Real> {
            let store = VariableStore::new();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..16)
                .map(|_| match eval(&call, &store, &mut rng).unwrap() {
                    Value::Num(n) => n,
                    _ => unreachable!(),
                })
                .collect()
        };
        assert_eq!(draw_seq(42), draw_seq(42));
        assert!(draw_seq(42).iter().all(|u| (0.0..1.0).contains(u)));
    }
}

//! Concrete small-step interpreter.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde_json::{json, Map, Value as Json};
use thiserror::Error;

use crate::lang::{Expr, Instr, Label, OpName, Primitive, Program, Reference};

/// A run-unique address. `site` is the allocating label: the current label
/// for objects, the body label for call environments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Address {
    pub site: Label,
    pub id: u32,
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.site, self.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Env {
    Top,
    Frame(Address),
}

impl fmt::Display for Env {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Env::Top => f.write_str("top"),
            Env::Frame(a) => write!(f, "{a}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Prim(Primitive),
    Obj(Address),
    Closure { param: String, body: Label },
}

impl Value {
    pub fn int(n: i64) -> Value {
        Value::Prim(Primitive::Int(n))
    }

    pub fn str(s: impl Into<String>) -> Value {
        Value::Prim(Primitive::Str(s.into()))
    }

    pub fn bool(b: bool) -> Value {
        Value::Prim(Primitive::Bool(b))
    }

    pub fn to_json(&self) -> Json {
        match self {
            Value::Prim(p) => prim_to_json(p),
            Value::Obj(a) => json!({ "obj": a.to_string() }),
            Value::Closure { param, body } => json!({ "fun": { "param": param, "body": body.0 } }),
        }
    }

    /// Accepts the plain JSON scalars produced by [`Value::to_json`] for
    /// primitives: numbers, strings, booleans and `null` for undef.
    pub fn from_json(j: &Json) -> Option<Value> {
        prim_from_json(j).map(Value::Prim)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Prim(p) => write!(f, "{p}"),
            Value::Obj(a) => write!(f, "obj({a})"),
            Value::Closure { param, body } => write!(f, "fun({param})@{body}"),
        }
    }
}

pub(crate) fn prim_to_json(p: &Primitive) -> Json {
    match p {
        Primitive::Int(n) => json!(n),
        Primitive::Str(s) => json!(s),
        Primitive::Bool(b) => json!(b),
        Primitive::Undef => Json::Null,
    }
}

pub(crate) fn prim_from_json(j: &Json) -> Option<Primitive> {
    match j {
        Json::Number(n) => n.as_i64().map(Primitive::Int),
        Json::String(s) => Some(Primitive::Str(s.clone())),
        Json::Bool(b) => Some(Primitive::Bool(*b)),
        Json::Null => Some(Primitive::Undef),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Location {
    Var(Env, String),
    Prop(Address, String),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Var(Env::Top, x) => f.write_str(x),
            Location::Var(env, x) => write!(f, "{env}.{x}"),
            Location::Prop(a, k) => write!(f, "obj({a})[{k:?}]"),
        }
    }
}

/// Where a call returns to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Frame {
    pub ret_env: Env,
    pub ret_label: Label,
    pub target: Location,
}

pub type Memory = BTreeMap<Location, Value>;
pub type Context = BTreeMap<Address, Frame>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConcreteState {
    pub label: Label,
    pub memory: Memory,
    pub context: Context,
    pub env: Env,
    /// Next unused address id. Kept in the state so that runs are a pure
    /// function of their starting state.
    pub fresh: u32,
}

impl ConcreteState {
    /// Entry state with the given top-level variables bound.
    pub fn initial(program: &Program, vars: impl IntoIterator<Item = (String, Value)>) -> Self {
        ConcreteState {
            label: program.entry(),
            memory: vars
                .into_iter()
                .map(|(x, v)| (Location::Var(Env::Top, x), v))
                .collect(),
            context: Context::new(),
            env: Env::Top,
            fresh: 0,
        }
    }

    /// Value at a top-level variable, if bound.
    pub fn top_var(&self, name: &str) -> Option<&Value> {
        self.memory.get(&Location::Var(Env::Top, name.to_string()))
    }

    pub fn to_json(&self) -> Json {
        let memory: Map<String, Json> = self
            .memory
            .iter()
            .map(|(l, v)| (l.to_string(), v.to_json()))
            .collect();
        json!({ "label": self.label.0, "env": self.env.to_string(), "memory": memory })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExecError {
    #[error("read of unbound location {0}")]
    UnboundLocation(String),
    #[error("property base is not an object")]
    NotAnObject,
    #[error("property key is not a string")]
    NotAString,
    #[error("callee is not a function")]
    NotAFunction,
    #[error("{op}: operand type mismatch")]
    TypeMismatch { op: OpName },
    #[error("{op}: expected {expected} operand(s), got {got}")]
    ArityMismatch { op: OpName, expected: usize, got: usize },
    #[error("{op}: integer overflow")]
    Overflow { op: OpName },
    #[error("branch condition is not a boolean")]
    NonBoolCondition,
    #[error("control falls off the end after label {0}")]
    FellOffEnd(Label),
    #[error("unknown label {0}")]
    UnknownLabel(Label),
    #[error("return from an environment with no context entry")]
    MissingFrame,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepResult {
    Next(ConcreteState),
    Halt(Value),
    Stuck(ExecError),
}

pub fn eval_ref(state: &ConcreteState, r: &Reference) -> Result<Location, ExecError> {
    match r {
        Reference::Var(x) => Ok(Location::Var(state.env, x.clone())),
        Reference::Prop(obj, key) => {
            let base = eval_expr(state, obj)?;
            let key = eval_expr(state, key)?;
            match (base, key) {
                (Value::Obj(a), Value::Prim(Primitive::Str(k))) => Ok(Location::Prop(a, k)),
                (Value::Obj(_), _) => Err(ExecError::NotAString),
                _ => Err(ExecError::NotAnObject),
            }
        }
    }
}

pub fn eval_expr(state: &ConcreteState, e: &Expr) -> Result<Value, ExecError> {
    match e {
        Expr::Prim(p) => Ok(Value::Prim(p.clone())),
        Expr::Lambda { param, body } => Ok(Value::Closure {
            param: param.clone(),
            body: *body,
        }),
        Expr::Ref(r) => {
            let l = eval_ref(state, r)?;
            state
                .memory
                .get(&l)
                .cloned()
                .ok_or_else(|| ExecError::UnboundLocation(l.to_string()))
        }
        Expr::Op(op, args) => {
            let vals = args
                .iter()
                .map(|a| eval_expr(state, a))
                .collect::<Result<Vec<_>, _>>()?;
            apply_op(*op, &vals)
        }
    }
}

pub fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Prim(Primitive::Int(_)) => "number",
        Value::Prim(Primitive::Str(_)) => "string",
        Value::Prim(Primitive::Bool(_)) => "boolean",
        Value::Prim(Primitive::Undef) => "undefined",
        Value::Obj(_) => "object",
        Value::Closure { .. } => "function",
    }
}

/// The operator table over concrete values.
pub fn apply_op(op: OpName, args: &[Value]) -> Result<Value, ExecError> {
    if args.len() != op.arity() {
        return Err(ExecError::ArityMismatch {
            op,
            expected: op.arity(),
            got: args.len(),
        });
    }
    if op == OpName::Typeof {
        return Ok(Value::str(type_name(&args[0])));
    }
    let prims: Vec<&Primitive> = args
        .iter()
        .map(|a| match a {
            Value::Prim(p) => Ok(p),
            _ => Err(ExecError::TypeMismatch { op }),
        })
        .collect::<Result<_, _>>()?;
    apply_prim_op(op, &prims).map(Value::Prim)
}

/// The operator table restricted to primitives; shared with sealed execution.
pub fn apply_prim_op(op: OpName, args: &[&Primitive]) -> Result<Primitive, ExecError> {
    use Primitive::*;
    let mismatch = ExecError::TypeMismatch { op };
    let overflow = ExecError::Overflow { op };
    if args.len() != op.arity() {
        return Err(ExecError::ArityMismatch {
            op,
            expected: op.arity(),
            got: args.len(),
        });
    }
    Ok(match (op, args) {
        (OpName::Add, [Int(a), Int(b)]) => Int(a.checked_add(*b).ok_or(overflow)?),
        (OpName::Sub, [Int(a), Int(b)]) => Int(a.checked_sub(*b).ok_or(overflow)?),
        (OpName::Mul, [Int(a), Int(b)]) => Int(a.checked_mul(*b).ok_or(overflow)?),
        (OpName::Neg, [Int(a)]) => Int(a.checked_neg().ok_or(overflow)?),
        (OpName::Lt, [Int(a), Int(b)]) => Bool(a < b),
        (OpName::Le, [Int(a), Int(b)]) => Bool(a <= b),
        (OpName::Gt, [Int(a), Int(b)]) => Bool(a > b),
        (OpName::Ge, [Int(a), Int(b)]) => Bool(a >= b),
        (OpName::Eq, [Int(a), Int(b)]) => Bool(a == b),
        (OpName::Not, [Bool(a)]) => Bool(!a),
        (OpName::And, [Bool(a), Bool(b)]) => Bool(*a && *b),
        (OpName::Or, [Bool(a), Bool(b)]) => Bool(*a || *b),
        (OpName::Concat, [Str(a), Str(b)]) => Str(format!("{a}{b}")),
        (OpName::Num2Str, [Int(a)]) => Str(a.to_string()),
        (OpName::Typeof, [p]) => Str(
            match p {
                Int(_) => "number",
                Str(_) => "string",
                Bool(_) => "boolean",
                Undef => "undefined",
            }
            .to_string(),
        ),
        _ => return Err(mismatch),
    })
}

fn next_of(program: &Program, label: Label) -> Result<Label, ExecError> {
    program
        .next_label(label)
        .map_err(|_| ExecError::UnknownLabel(label))?
        .ok_or(ExecError::FellOffEnd(label))
}

/// One transition. Deterministic: at most one successor exists.
pub fn concrete_step(program: &Program, state: &ConcreteState) -> StepResult {
    match step_inner(program, state) {
        Ok(r) => r,
        Err(e) => StepResult::Stuck(e),
    }
}

fn step_inner(program: &Program, s: &ConcreteState) -> Result<StepResult, ExecError> {
    let instr = program
        .instr(s.label)
        .ok_or(ExecError::UnknownLabel(s.label))?;
    let mut out = s.clone();
    match instr {
        Instr::Assign(r, e) => {
            let l = eval_ref(s, r)?;
            let v = eval_expr(s, e)?;
            out.label = next_of(program, s.label)?;
            out.memory.insert(l, v);
        }
        Instr::NewObject(r) => {
            let l = eval_ref(s, r)?;
            let a = Address {
                site: s.label,
                id: s.fresh,
            };
            out.label = next_of(program, s.label)?;
            out.fresh += 1;
            out.memory.insert(l, Value::Obj(a));
        }
        Instr::Call(r, callee, arg) => {
            let l = eval_ref(s, r)?;
            let (param, body) = match eval_expr(s, callee)? {
                Value::Closure { param, body } => (param, body),
                _ => return Err(ExecError::NotAFunction),
            };
            let v = eval_expr(s, arg)?;
            let ret_label = next_of(program, s.label)?;
            let a = Address {
                site: body,
                id: s.fresh,
            };
            out.fresh += 1;
            out.memory.insert(Location::Var(Env::Frame(a), param), v);
            out.context.insert(
                a,
                Frame {
                    ret_env: s.env,
                    ret_label,
                    target: l,
                },
            );
            out.env = Env::Frame(a);
            out.label = body;
        }
        Instr::Return(e) => {
            let v = eval_expr(s, e)?;
            let a = match s.env {
                Env::Top => return Ok(StepResult::Halt(v)),
                Env::Frame(a) => a,
            };
            let frame = s.context.get(&a).ok_or(ExecError::MissingFrame)?;
            out.memory.insert(frame.target.clone(), v);
            out.env = frame.ret_env;
            out.label = frame.ret_label;
        }
        Instr::Branch(cond, target) => match eval_expr(s, cond)? {
            Value::Prim(Primitive::Bool(true)) => out.label = *target,
            Value::Prim(Primitive::Bool(false)) => out.label = next_of(program, s.label)?,
            _ => return Err(ExecError::NonBoolCondition),
        },
    }
    Ok(StepResult::Next(out))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Halt(Value),
    Stuck(ExecError),
    BudgetExceeded,
}

#[derive(Debug, Clone)]
pub struct ConcreteRun {
    /// Every visited state, starting with the initial one.
    pub trace: Vec<ConcreteState>,
    pub outcome: Outcome,
}

impl ConcreteRun {
    /// The collecting semantics of this single run.
    pub fn collecting(&self) -> BTreeSet<&ConcreteState> {
        self.trace.iter().collect()
    }

    pub fn steps(&self) -> usize {
        self.trace.len() - 1
    }
}

/// Runs at most `budget` transitions from `initial`.
pub fn run_concrete(program: &Program, initial: ConcreteState, budget: usize) -> ConcreteRun {
    let mut trace = vec![initial];
    loop {
        if trace.len() > budget {
            return ConcreteRun {
                trace,
                outcome: Outcome::BudgetExceeded,
            };
        }
        let cur = trace.last().expect("trace is never empty");
        match concrete_step(program, cur) {
            StepResult::Next(s) => trace.push(s),
            StepResult::Halt(v) => {
                return ConcreteRun {
                    trace,
                    outcome: Outcome::Halt(v),
                }
            }
            StepResult::Stuck(e) => {
                return ConcreteRun {
                    trace,
                    outcome: Outcome::Stuck(e),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::{neg_abs, neg_abs_program, SELF_LOOP_SOURCE};
    use crate::lang::parse_program;

    fn at_x(x: i64) -> ConcreteState {
        ConcreteState::initial(&neg_abs_program(), [("x".to_string(), Value::int(x))])
    }

    #[test]
    fn eval_ref_variants() {
        let mut s = at_x(1);
        assert_eq!(
            eval_ref(&s, &Reference::var("x")),
            Ok(Location::Var(Env::Top, "x".into()))
        );
        let a = Address { site: Label(0), id: 0 };
        s.memory
            .insert(Location::Var(Env::Top, "obj".into()), Value::Obj(a));
        assert_eq!(
            eval_ref(&s, &Reference::prop(Expr::var("obj"), Expr::str("p1"))),
            Ok(Location::Prop(a, "p1".into()))
        );
        assert_eq!(
            eval_ref(&s, &Reference::prop(Expr::var("obj"), Expr::int(1))),
            Err(ExecError::NotAString)
        );
        assert_eq!(
            eval_ref(&s, &Reference::prop(Expr::var("x"), Expr::str("p"))),
            Err(ExecError::NotAnObject)
        );
    }

    #[test]
    fn eval_expr_basics() {
        let s = at_x(1);
        assert_eq!(eval_expr(&s, &Expr::int(42)), Ok(Value::int(42)));
        assert_eq!(
            eval_expr(
                &s,
                &Expr::Lambda {
                    param: "x".into(),
                    body: Label(3)
                }
            ),
            Ok(Value::Closure {
                param: "x".into(),
                body: Label(3)
            })
        );
        assert_eq!(
            eval_expr(&s, &Expr::op(OpName::Add, vec![Expr::int(1), Expr::int(2)])),
            Ok(Value::int(3))
        );
        assert!(matches!(
            eval_expr(&s, &Expr::var("nope")),
            Err(ExecError::UnboundLocation(_))
        ));
    }

    #[test]
    fn operator_table() {
        assert_eq!(apply_op(OpName::Neg, &[Value::int(-42)]), Ok(Value::int(42)));
        assert_eq!(
            apply_op(OpName::Ge, &[Value::int(-42), Value::int(0)]),
            Ok(Value::bool(false))
        );
        assert_eq!(
            apply_op(OpName::Concat, &[Value::str("p"), Value::str("1")]),
            Ok(Value::str("p1"))
        );
        assert_eq!(
            apply_op(OpName::Add, &[Value::str("a"), Value::str("b")]),
            Err(ExecError::TypeMismatch { op: OpName::Add })
        );
        assert_eq!(
            apply_op(OpName::Add, &[Value::int(i64::MAX), Value::int(1)]),
            Err(ExecError::Overflow { op: OpName::Add })
        );
        assert_eq!(
            apply_op(
                OpName::Typeof,
                &[Value::Closure {
                    param: "a".into(),
                    body: Label(0)
                }]
            ),
            Ok(Value::str("function"))
        );
    }

    #[test]
    fn neg_abs_trace_for_minus_42() {
        let run = run_concrete(&neg_abs_program(), at_x(-42), 100);
        assert_eq!(run.outcome, Outcome::Halt(Value::int(-42)));
        let seen: Vec<(Label, i64)> = run
            .trace
            .iter()
            .map(|s| match s.top_var("x") {
                Some(Value::Prim(Primitive::Int(n))) => (s.label, *n),
                other => panic!("unexpected {other:?}"),
            })
            .collect();
        assert_eq!(
            seen,
            vec![
                (neg_abs::TEST, -42),
                (neg_abs::ELSE, -42),
                (neg_abs::JUMP, 42),
                (neg_abs::MERGE, 42),
                (neg_abs::EXIT, -42),
            ]
        );
    }

    #[test]
    fn neg_abs_zero_takes_then_branch() {
        let run = run_concrete(&neg_abs_program(), at_x(0), 100);
        let labels: Vec<u32> = run.trace.iter().map(|s| s.label.0).collect();
        assert_eq!(labels, vec![0, 3, 4, 5]);
        assert_eq!(run.outcome, Outcome::Halt(Value::int(0)));
    }

    #[test]
    fn self_loop_exhausts_budget() {
        let p = parse_program(SELF_LOOP_SOURCE).unwrap();
        let run = run_concrete(&p, ConcreteState::initial(&p, []), 10);
        assert_eq!(run.outcome, Outcome::BudgetExceeded);
        assert_eq!(run.steps(), 10);
        assert_eq!(run.collecting().len(), 1);
    }

    #[test]
    fn calls_and_objects() {
        let p = parse_program(
            "0: o = {}\n\
             1: f = fun(a)@6\n\
             2: o[\"k\"] = 5\n\
             3: r = f(o)\n\
             4: z = o[\"k\"]\n\
             5: ret r\n\
             6: b = a[\"k\"]\n\
             7: ret add(b, 1)",
        )
        .unwrap();
        let run = run_concrete(&p, ConcreteState::initial(&p, []), 100);
        assert_eq!(run.outcome, Outcome::Halt(Value::int(6)));
        let last = run.trace.last().unwrap();
        assert_eq!(last.env, Env::Top);
        assert_eq!(last.top_var("z"), Some(&Value::int(5)));
        // one object and one frame, distinct ids
        assert_eq!(last.fresh, 2);
        assert_eq!(last.context.len(), 1);
    }

    #[test]
    fn stuck_cases() {
        let p = parse_program("0: if 1 1\n1: ret 0").unwrap();
        let run = run_concrete(&p, ConcreteState::initial(&p, []), 10);
        assert_eq!(run.outcome, Outcome::Stuck(ExecError::NonBoolCondition));
        let p = parse_program("0: x = 1").unwrap();
        let run = run_concrete(&p, ConcreteState::initial(&p, []), 10);
        assert_eq!(run.outcome, Outcome::Stuck(ExecError::FellOffEnd(Label(0))));
    }
}

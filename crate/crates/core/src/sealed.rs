//! Sealed execution: concrete execution over values that may be opaque
//! symbols. Moving a symbol around is fine; inspecting one stops the run.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::time::{Duration, Instant};

use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::concrete::{
    apply_op, type_name, Address, ConcreteState, Env, ExecError, Frame, Location, Value,
};
use crate::domain::{gamma_value_with, inc, AbsAddr, AbsFrame, AbsLoc, AbsValue, AbsCounter, Gamma};
use crate::lang::{Expr, Instr, Label, OpName, Primitive, Program, Reference};

/// A sealed value ω.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sym(pub u32);

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ω{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SVal {
    Val(Value),
    Sealed(Sym),
}

impl fmt::Display for SVal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SVal::Val(v) => write!(f, "{v}"),
            SVal::Sealed(s) => write!(f, "{s}"),
        }
    }
}

/// A context entry: a concrete return frame or a sealed continuation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SFrame {
    Frame(Frame),
    Sealed(Sym),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SealedState {
    pub label: Label,
    pub memory: BTreeMap<Location, SVal>,
    pub context: BTreeMap<Address, SFrame>,
    pub env: Env,
    /// Allocation counts per site, carried through execution.
    pub counter: AbsCounter,
    pub fresh: u32,
}

impl SealedState {
    /// Every symbol occurring in memory or context.
    pub fn syms(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        for v in self.memory.values() {
            if let SVal::Sealed(s) = v {
                out.insert(*s);
            }
        }
        for f in self.context.values() {
            if let SFrame::Sealed(s) = f {
                out.insert(*s);
            }
        }
        out
    }

    /// A symbol-free concrete state viewed as a sealed one.
    pub fn from_concrete(s: &ConcreteState, counter: AbsCounter) -> SealedState {
        SealedState {
            label: s.label,
            memory: s
                .memory
                .iter()
                .map(|(l, v)| (l.clone(), SVal::Val(v.clone())))
                .collect(),
            context: s
                .context
                .iter()
                .map(|(a, f)| (*a, SFrame::Frame(f.clone())))
                .collect(),
            env: s.env,
            counter,
            fresh: s.fresh,
        }
    }
}

/// Abstract instantiation map: what each symbol stands for, plus the
/// concrete address chosen for each abstract address at seal time.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct AbstractInstantiationMap {
    pub values: BTreeMap<Sym, AbsValue>,
    /// Sealed continuations: the abstract frames a return would go to.
    pub continuations: BTreeMap<Sym, BTreeSet<AbsFrame>>,
    pub addresses: BTreeMap<AbsAddr, Address>,
}

impl AbstractInstantiationMap {
    pub fn is_empty(&self) -> bool {
        self.values.is_empty() && self.continuations.is_empty()
    }

    pub fn omega_count(&self) -> usize {
        self.values.len() + self.continuations.len()
    }

    fn materialize(&self, site: Label) -> Option<Address> {
        self.addresses.get(&AbsAddr::Site(site)).copied()
    }

    fn concrete_env(&self, a: AbsAddr) -> Option<Env> {
        match a {
            AbsAddr::Top => Some(Env::Top),
            AbsAddr::Site(_) => self.addresses.get(&a).map(|x| Env::Frame(*x)),
        }
    }

    fn concrete_loc(&self, l: &AbsLoc) -> Option<Location> {
        match l {
            AbsLoc::Var(a, x) => self.concrete_env(*a).map(|e| Location::Var(e, x.clone())),
            AbsLoc::Prop(site, k) => self.materialize(*site).map(|a| Location::Prop(a, k.clone())),
        }
    }
}

/// A concrete instantiation of the symbols.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct InstMap {
    pub values: BTreeMap<Sym, Value>,
    pub frames: BTreeMap<Sym, Frame>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Position {
    Operand(OpName),
    Condition,
    PropertyBase,
    PropertyKey,
    Callee,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Position::Operand(op) => write!(f, "operand of {op}"),
            Position::Condition => f.write_str("branch condition"),
            Position::PropertyBase => f.write_str("property base"),
            Position::PropertyKey => f.write_str("property key"),
            Position::Callee => f.write_str("callee"),
        }
    }
}

/// Why a sealed state has no sealed transition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BotReason {
    SealedAccess { sym: Sym, position: Position },
    /// `ret` through a sealed continuation; carries the returned value.
    SealedReturn { value: SVal },
    /// `ret` at top level.
    Halt { value: SVal },
    Stuck(ExecError),
}

impl BotReason {
    pub fn tag(&self) -> &'static str {
        match self {
            BotReason::SealedAccess { .. } => "sealed_access",
            BotReason::SealedReturn { .. } => "sealed_return",
            BotReason::Halt { .. } => "halt",
            BotReason::Stuck(_) => "stuck",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SealedStep {
    Next(SealedState),
    Bot(BotReason),
}

enum Blocked {
    Access(Sym, Position),
    Err(ExecError),
}

impl From<ExecError> for Blocked {
    fn from(e: ExecError) -> Self {
        Blocked::Err(e)
    }
}

impl From<Blocked> for BotReason {
    fn from(b: Blocked) -> Self {
        match b {
            Blocked::Access(sym, position) => BotReason::SealedAccess { sym, position },
            Blocked::Err(e) => BotReason::Stuck(e),
        }
    }
}

fn eval_sref(s: &SealedState, r: &Reference) -> Result<Location, Blocked> {
    match r {
        Reference::Var(x) => Ok(Location::Var(s.env, x.clone())),
        Reference::Prop(obj, key) => {
            let base = eval_sexpr(s, obj)?;
            let key = eval_sexpr(s, key)?;
            let a = match base {
                SVal::Sealed(w) => return Err(Blocked::Access(w, Position::PropertyBase)),
                SVal::Val(Value::Obj(a)) => a,
                SVal::Val(_) => match key {
                    // The concrete rule evaluates both sides before checking.
                    SVal::Sealed(w) => return Err(Blocked::Access(w, Position::PropertyKey)),
                    _ => return Err(ExecError::NotAnObject.into()),
                },
            };
            match key {
                SVal::Sealed(w) => Err(Blocked::Access(w, Position::PropertyKey)),
                SVal::Val(Value::Prim(Primitive::Str(k))) => Ok(Location::Prop(a, k)),
                SVal::Val(_) => Err(ExecError::NotAString.into()),
            }
        }
    }
}

fn eval_sexpr(s: &SealedState, e: &Expr) -> Result<SVal, Blocked> {
    match e {
        Expr::Prim(p) => Ok(SVal::Val(Value::Prim(p.clone()))),
        Expr::Lambda { param, body } => Ok(SVal::Val(Value::Closure {
            param: param.clone(),
            body: *body,
        })),
        Expr::Ref(r) => {
            let l = eval_sref(s, r)?;
            s.memory
                .get(&l)
                .cloned()
                .ok_or_else(|| ExecError::UnboundLocation(l.to_string()).into())
        }
        Expr::Op(op, args) => {
            let vals = args
                .iter()
                .map(|a| eval_sexpr(s, a))
                .collect::<Result<Vec<_>, _>>()?;
            let mut concrete = Vec::with_capacity(vals.len());
            for v in vals {
                match v {
                    SVal::Sealed(w) => return Err(Blocked::Access(w, Position::Operand(*op))),
                    SVal::Val(v) => concrete.push(v),
                }
            }
            if *op == OpName::Typeof && concrete.len() == 1 {
                return Ok(SVal::Val(Value::str(type_name(&concrete[0]))));
            }
            Ok(SVal::Val(apply_op(*op, &concrete)?))
        }
    }
}

fn next_of(program: &Program, label: Label) -> Result<Label, ExecError> {
    program
        .next_label(label)
        .map_err(|_| ExecError::UnknownLabel(label))?
        .ok_or(ExecError::FellOffEnd(label))
}

/// One sealed transition, defined only when it needs no symbol's value.
pub fn sealed_step(program: &Program, s: &SealedState) -> SealedStep {
    match sealed_step_inner(program, s) {
        Ok(step) => step,
        Err(b) => SealedStep::Bot(b.into()),
    }
}

fn sealed_step_inner(program: &Program, s: &SealedState) -> Result<SealedStep, Blocked> {
    let instr = program
        .instr(s.label)
        .ok_or(ExecError::UnknownLabel(s.label))?;
    let mut out = s.clone();
    match instr {
        Instr::Assign(r, e) => {
            let l = eval_sref(s, r)?;
            let v = eval_sexpr(s, e)?;
            out.label = next_of(program, s.label)?;
            out.memory.insert(l, v);
        }
        Instr::NewObject(r) => {
            let l = eval_sref(s, r)?;
            let a = Address {
                site: s.label,
                id: s.fresh,
            };
            out.label = next_of(program, s.label)?;
            out.fresh += 1;
            out.counter = inc(&s.counter, AbsAddr::Site(s.label));
            out.memory.insert(l, SVal::Val(Value::Obj(a)));
        }
        Instr::Call(r, callee, arg) => {
            let l = eval_sref(s, r)?;
            let (param, body) = match eval_sexpr(s, callee)? {
                SVal::Sealed(w) => return Err(Blocked::Access(w, Position::Callee)),
                SVal::Val(Value::Closure { param, body }) => (param, body),
                SVal::Val(_) => return Err(ExecError::NotAFunction.into()),
            };
            let v = eval_sexpr(s, arg)?;
            let ret_label = next_of(program, s.label)?;
            let a = Address {
                site: body,
                id: s.fresh,
            };
            out.fresh += 1;
            out.counter = inc(&s.counter, AbsAddr::Site(body));
            out.memory.insert(Location::Var(Env::Frame(a), param), v);
            out.context.insert(
                a,
                SFrame::Frame(Frame {
                    ret_env: s.env,
                    ret_label,
                    target: l,
                }),
            );
            out.env = Env::Frame(a);
            out.label = body;
        }
        Instr::Return(e) => {
            let v = eval_sexpr(s, e)?;
            let a = match s.env {
                Env::Top => return Ok(SealedStep::Bot(BotReason::Halt { value: v })),
                Env::Frame(a) => a,
            };
            match s.context.get(&a) {
                None => return Err(ExecError::MissingFrame.into()),
                Some(SFrame::Sealed(_)) => {
                    return Ok(SealedStep::Bot(BotReason::SealedReturn { value: v }))
                }
                Some(SFrame::Frame(frame)) => {
                    out.memory.insert(frame.target.clone(), v);
                    out.env = frame.ret_env;
                    out.label = frame.ret_label;
                }
            }
        }
        Instr::Branch(cond, target) => match eval_sexpr(s, cond)? {
            SVal::Sealed(w) => return Err(Blocked::Access(w, Position::Condition)),
            SVal::Val(Value::Prim(Primitive::Bool(true))) => out.label = *target,
            SVal::Val(Value::Prim(Primitive::Bool(false))) => {
                out.label = next_of(program, s.label)?
            }
            SVal::Val(_) => return Err(ExecError::NonBoolCondition.into()),
        },
    }
    Ok(SealedStep::Next(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budgets {
    pub max_steps: usize,
    pub wall_clock: Duration,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            max_steps: 100_000,
            wall_clock: Duration::from_millis(5000),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SealedOutcome {
    Bot(BotReason),
    BudgetExceeded,
}

#[derive(Debug, Clone)]
pub struct SealedRun {
    /// Visited states, starting with the initial one.
    pub trace: Vec<SealedState>,
    pub outcome: SealedOutcome,
}

impl SealedRun {
    pub fn steps(&self) -> usize {
        self.trace.len() - 1
    }

    pub fn last(&self) -> &SealedState {
        self.trace.last().expect("trace is never empty")
    }

    /// The sealed-run log record.
    pub fn log_json(&self, imap: &AbstractInstantiationMap) -> Json {
        let terminal = match &self.outcome {
            SealedOutcome::Bot(r) => r.tag(),
            SealedOutcome::BudgetExceeded => "budget",
        };
        let omegas: Vec<u32> = imap
            .values
            .keys()
            .chain(imap.continuations.keys())
            .map(|s| s.0)
            .collect();
        json!({
            "start_label": self.trace[0].label.0,
            "end_label": self.last().label.0,
            "steps": self.steps(),
            "terminal": terminal,
            "omegas": omegas,
        })
    }
}

/// Runs sealed steps until ⊥ or until a budget runs out.
pub fn run_sealed(program: &Program, initial: SealedState, budgets: Budgets) -> SealedRun {
    let start = Instant::now();
    let mut trace = vec![initial];
    loop {
        let steps = trace.len() - 1;
        if steps >= budgets.max_steps
            || (steps % 1024 == 1023 && start.elapsed() > budgets.wall_clock)
        {
            return SealedRun {
                trace,
                outcome: SealedOutcome::BudgetExceeded,
            };
        }
        match sealed_step(program, trace.last().expect("non-empty")) {
            SealedStep::Next(s) => trace.push(s),
            SealedStep::Bot(r) => {
                return SealedRun {
                    trace,
                    outcome: SealedOutcome::Bot(r),
                }
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SealedError {
    #[error("symbol {0} is not bound by the instantiation")]
    UnboundSymbol(Sym),
}

/// Replaces every symbol by its instantiation. A sealed continuation bound
/// only to a plain value is dropped from the context: substitution is
/// syntactic and judging such maps is the oracle's business.
pub fn instantiate(s: &SealedState, m: &InstMap) -> Result<ConcreteState, SealedError> {
    let mut memory = BTreeMap::new();
    for (l, v) in &s.memory {
        let v = match v {
            SVal::Val(v) => v.clone(),
            SVal::Sealed(w) => m
                .values
                .get(w)
                .cloned()
                .ok_or(SealedError::UnboundSymbol(*w))?,
        };
        memory.insert(l.clone(), v);
    }
    let mut context = BTreeMap::new();
    for (a, f) in &s.context {
        match f {
            SFrame::Frame(f) => {
                context.insert(*a, f.clone());
            }
            SFrame::Sealed(w) => match m.frames.get(w) {
                Some(f) => {
                    context.insert(*a, f.clone());
                }
                None if m.values.contains_key(w) => {}
                None => return Err(SealedError::UnboundSymbol(*w)),
            },
        }
    }
    Ok(ConcreteState {
        label: s.label,
        memory,
        context,
        env: s.env,
        fresh: s.fresh,
    })
}

/// Concretization of an abstract instantiation map: the product of the
/// per-symbol concretizations. Non-enumerable when the product would have
/// more than `limit` members.
pub fn gamma_imap(m: &AbstractInstantiationMap, cap: i64, limit: usize) -> Gamma<InstMap> {
    let mut choices: Vec<(Sym, Vec<Value>)> = Vec::new();
    for (w, v) in &m.values {
        match gamma_value_with(v, cap, &|l| m.materialize(l)) {
            Gamma::Values(vs) => choices.push((*w, vs)),
            Gamma::NonEnumerable(why) => return Gamma::NonEnumerable(format!("{w}: {why}")),
        }
    }
    let mut frame_choices: Vec<(Sym, Vec<Frame>)> = Vec::new();
    for (w, frames) in &m.continuations {
        let mut fs = Vec::new();
        for f in frames {
            let ret_env = match m.concrete_env(f.ret_env) {
                Some(e) => e,
                None => return Gamma::NonEnumerable(format!("{w}: caller environment")),
            };
            for t in &f.targets {
                match m.concrete_loc(t) {
                    Some(target) => fs.push(Frame {
                        ret_env,
                        ret_label: f.ret_label,
                        target,
                    }),
                    None => return Gamma::NonEnumerable(format!("{w}: return target")),
                }
            }
        }
        frame_choices.push((*w, fs));
    }
    let size = choices
        .iter()
        .map(|(_, v)| v.len())
        .chain(frame_choices.iter().map(|(_, f)| f.len()))
        .fold(1usize, |a, n| a.saturating_mul(n));
    if size > limit {
        return Gamma::NonEnumerable(format!("{size} instantiations exceed {limit}"));
    }
    let mut out = vec![InstMap::default()];
    for (w, vs) in choices {
        let mut next = Vec::with_capacity(out.len() * vs.len());
        for m in &out {
            for v in &vs {
                let mut m = m.clone();
                m.values.insert(w, v.clone());
                next.push(m);
            }
        }
        out = next;
    }
    for (w, fs) in frame_choices {
        let mut next = Vec::with_capacity(out.len() * fs.len());
        for m in &out {
            for f in &fs {
                let mut m = m.clone();
                m.frames.insert(w, f.clone());
                next.push(m);
            }
        }
        out = next;
    }
    Gamma::Values(out)
}

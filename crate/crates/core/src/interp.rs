//! Flow-sensitive abstract interpretation: one abstract state per label.

use std::collections::{BTreeMap, BTreeSet};

use log::{debug, warn};
use serde_json::{json, Map, Value as Json};
use thiserror::Error;

use crate::domain::{
    abstract_apply_op, inc, mem_update, refine_comparison, AbsAddr, AbsFrame, AbsLoc, AbsState,
    AbsValue, Count, Domain, DomainError, Strs,
};
use crate::lang::{Expr, Instr, Label, Primitive, Program, Reference};

/// Per-label abstract states; an absent label is bottom (unreachable).
pub type ViewMap = BTreeMap<Label, AbsState>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalysisSettings {
    pub domain: Domain,
    /// Filter a compared variable on branch edges, e.g. `x >= 0` on the
    /// taken edge keeps only the non-negative part of `x`.
    pub refine_branches: bool,
    /// Safety valve on fixpoint rounds.
    pub max_iterations: usize,
}

impl AnalysisSettings {
    pub fn new(domain: Domain) -> AnalysisSettings {
        AnalysisSettings {
            domain,
            refine_branches: domain.refines_by_default(),
            max_iterations: 1_000_000,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InterpError {
    #[error("property key at label {label} may be any string")]
    NonEnumerableKey { label: Label },
    #[error("fixpoint not reached within {cap} iterations")]
    IterationCapExceeded { cap: usize },
    #[error("unknown label {0}")]
    UnknownLabel(Label),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

pub fn abs_eval_ref(
    state: &AbsState,
    r: &Reference,
    domain: Domain,
) -> Result<BTreeSet<AbsLoc>, KeyError> {
    match r {
        Reference::Var(x) => Ok(BTreeSet::from([AbsLoc::Var(state.env, x.clone())])),
        Reference::Prop(obj, key) => {
            let base = abs_eval_expr(state, obj, domain)?;
            let key = abs_eval_expr(state, key, domain)?;
            if base.addrs.is_empty() {
                return Ok(BTreeSet::new());
            }
            match key.prims.strs() {
                Strs::Top => Err(KeyError),
                Strs::Set(keys) => Ok(base
                    .addrs
                    .iter()
                    .flat_map(|a| keys.iter().map(|k| AbsLoc::Prop(*a, k.clone())))
                    .collect()),
            }
        }
    }
}

/// A property key whose string component is top.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyError;

pub fn abs_eval_expr(state: &AbsState, e: &Expr, domain: Domain) -> Result<AbsValue, KeyError> {
    match e {
        Expr::Prim(p) => Ok(AbsValue::prim(domain, p)),
        Expr::Lambda { param, body } => Ok(AbsValue::func(domain, param.clone(), *body)),
        Expr::Ref(r) => {
            let mut v = AbsValue::bottom(domain);
            for l in abs_eval_ref(state, r, domain)? {
                if let Some(w) = state.memory.get(&l) {
                    v.join_in(w);
                }
            }
            Ok(v)
        }
        Expr::Op(op, args) => {
            let vals = args
                .iter()
                .map(|a| abs_eval_expr(state, a, domain))
                .collect::<Result<Vec<_>, _>>()?;
            if vals.len() != op.arity() {
                return Ok(AbsValue::bottom(domain));
            }
            Ok(abstract_apply_op(*op, &vals))
        }
    }
}

/// All outgoing view transitions of `from`, in a deterministic order.
/// Several results may share a target label; callers join them.
pub fn successors(
    program: &Program,
    from: Label,
    state: &AbsState,
    settings: &AnalysisSettings,
) -> Result<Vec<(Label, AbsState)>, InterpError> {
    let key_err = |_| InterpError::NonEnumerableKey { label: from };
    let d = settings.domain;
    let instr = program.instr(from).ok_or(InterpError::UnknownLabel(from))?;
    let next = program.next_label(from).ok().flatten();
    let mut out = Vec::new();
    match instr {
        Instr::Assign(r, e) => {
            let targets = abs_eval_ref(state, r, d).map_err(key_err)?;
            let v = abs_eval_expr(state, e, d).map_err(key_err)?;
            if let (Some(next), false, false) = (next, targets.is_empty(), v.is_bottom()) {
                let mut s = state.clone();
                mem_update(&mut s.memory, &state.counter, &targets, &v);
                out.push((next, s));
            }
        }
        Instr::NewObject(r) => {
            let targets = abs_eval_ref(state, r, d).map_err(key_err)?;
            if let (Some(next), false) = (next, targets.is_empty()) {
                let mut s = state.clone();
                mem_update(&mut s.memory, &state.counter, &targets, &AbsValue::addr(d, from));
                s.counter = inc(&state.counter, AbsAddr::Site(from));
                out.push((next, s));
            }
        }
        Instr::Call(r, callee, arg) => {
            let targets = abs_eval_ref(state, r, d).map_err(key_err)?;
            let f = abs_eval_expr(state, callee, d).map_err(key_err)?;
            let v = abs_eval_expr(state, arg, d).map_err(key_err)?;
            if !f.prims.is_bottom() || !f.addrs.is_empty() {
                debug!("call at {from}: non-closure callee components ignored");
            }
            if let (Some(next), false, false) = (next, targets.is_empty(), v.is_bottom()) {
                for func in &f.funcs {
                    let env = AbsAddr::Site(func.body);
                    let mut s = state.clone();
                    s.context.entry(func.body).or_default().insert(AbsFrame {
                        ret_env: state.env,
                        ret_label: next,
                        targets: targets.clone(),
                    });
                    s.counter = inc(&state.counter, env);
                    let param = BTreeSet::from([AbsLoc::Var(env, func.param.clone())]);
                    mem_update(&mut s.memory, &s.counter, &param, &v);
                    s.env = env;
                    out.push((func.body, s));
                }
            }
        }
        Instr::Return(e) => {
            let v = abs_eval_expr(state, e, d).map_err(key_err)?;
            if let (AbsAddr::Site(site), false) = (state.env, v.is_bottom()) {
                for frame in state.context.get(&site).into_iter().flatten() {
                    if frame.targets.is_empty() {
                        continue;
                    }
                    let mut s = state.clone();
                    mem_update(&mut s.memory, &state.counter, &frame.targets, &v);
                    s.env = frame.ret_env;
                    out.push((frame.ret_label, s));
                }
            }
        }
        Instr::Branch(cond, target) => {
            let c = abs_eval_expr(state, cond, d).map_err(key_err)?;
            if c.prims.may_be_true() {
                if let Some(s) = refine(state, cond, true, settings) {
                    out.push((*target, s));
                }
            }
            if let (true, Some(next)) = (c.prims.may_be_false(), next) {
                if let Some(s) = refine(state, cond, false, settings) {
                    out.push((next, s));
                }
            }
        }
    }
    Ok(out)
}

/// The state on a branch edge. `None` when refinement proves the edge
/// infeasible.
fn refine(
    state: &AbsState,
    cond: &Expr,
    outcome: bool,
    settings: &AnalysisSettings,
) -> Option<AbsState> {
    if !settings.refine_branches {
        return Some(state.clone());
    }
    let (op, x, c) = match cond {
        Expr::Op(op, args) if op.is_int_comparison() && args.len() == 2 => match (&args[0], &args[1]) {
            (Expr::Ref(r), Expr::Prim(Primitive::Int(c))) => match r.as_ref() {
                Reference::Var(x) => (*op, x, *c),
                _ => return Some(state.clone()),
            },
            _ => return Some(state.clone()),
        },
        _ => return Some(state.clone()),
    };
    // Only a location standing for a single concrete variable may be narrowed.
    if state.counter.get(state.env) != Count::One {
        return Some(state.clone());
    }
    let loc = AbsLoc::Var(state.env, x.clone());
    let v = state.memory.get(&loc)?;
    let refined = refine_comparison(op, v, c, outcome)?;
    if refined.is_bottom() {
        return None;
    }
    let mut s = state.clone();
    s.memory.insert(loc, refined);
    Some(s)
}

/// A single view transition `from → to`; `None` when no rule applies.
pub fn view_transition(
    program: &Program,
    from: Label,
    to: Label,
    state: &AbsState,
    settings: &AnalysisSettings,
) -> Result<Option<AbsState>, InterpError> {
    let mut acc: Option<AbsState> = None;
    for (l, s) in successors(program, from, state, settings)? {
        if l != to {
            continue;
        }
        match &mut acc {
            None => acc = Some(s),
            Some(a) => join_lenient(a, &s, to)?,
        }
    }
    Ok(acc)
}

/// Joins, keeping the first environment on a mismatch (logged).
pub(crate) fn join_lenient(into: &mut AbsState, s: &AbsState, at: Label) -> Result<(), InterpError> {
    match into.join_in(s) {
        Ok(()) => Ok(()),
        Err(DomainError::EnvMismatch { left, right }) => {
            warn!("environment mismatch at view {at}: keeping {left}, dropping {right}");
            Ok(())
        }
        Err(e) => Err(e.into()),
    }
}

/// Joins `s` into view `at`; returns whether the view grew.
pub(crate) fn join_into_view(views: &mut ViewMap, at: Label, s: &AbsState) -> Result<bool, InterpError> {
    match views.get_mut(&at) {
        None => {
            views.insert(at, s.clone());
            Ok(true)
        }
        Some(old) => {
            if s.leq(old) {
                return Ok(false);
            }
            join_lenient(old, s, at)?;
            Ok(true)
        }
    }
}

/// One application of the abstract step to every view: the join of all
/// incoming transitions per target view.
pub fn abstract_step(
    program: &Program,
    views: &ViewMap,
    settings: &AnalysisSettings,
) -> Result<ViewMap, InterpError> {
    let mut out = ViewMap::new();
    for (l, s) in views {
        for (to, t) in successors(program, *l, s, settings)? {
            join_into_view(&mut out, to, &t)?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractResult {
    pub views: ViewMap,
    /// Fixpoint rounds, including the final one that changed nothing.
    pub iterations: usize,
    /// View transitions evaluated (edges that produced a state).
    pub transitions: u64,
}

/// Least fixpoint of `d ↦ d ⊔ step(d)` above `initial`. Each round only
/// re-steps the views that grew in the previous round, which yields the
/// same iterates as stepping every view.
pub fn analyze_abstract(
    program: &Program,
    initial: &ViewMap,
    settings: &AnalysisSettings,
) -> Result<AbstractResult, InterpError> {
    let mut views = initial.clone();
    let mut dirty: BTreeSet<Label> = views.keys().copied().collect();
    let mut iterations = 0;
    let mut transitions = 0u64;
    while !dirty.is_empty() {
        iterations += 1;
        if iterations > settings.max_iterations {
            return Err(InterpError::IterationCapExceeded {
                cap: settings.max_iterations,
            });
        }
        let mut produced = Vec::new();
        for l in &dirty {
            let s = &views[l];
            let succ = successors(program, *l, s, settings)?;
            transitions += succ.len() as u64;
            produced.extend(succ);
        }
        let mut next_dirty = BTreeSet::new();
        for (to, s) in produced {
            if join_into_view(&mut views, to, &s)? {
                next_dirty.insert(to);
            }
        }
        dirty = next_dirty;
    }
    Ok(AbstractResult {
        views,
        iterations,
        transitions,
    })
}

/// The entry-only view map binding top-level variables.
pub fn entry_views(program: &Program, vars: impl IntoIterator<Item = (String, AbsValue)>) -> ViewMap {
    ViewMap::from([(program.entry(), AbsState::entry(vars))])
}

/// Join of a top-level variable over every view that binds it.
pub fn union_of_var(views: &ViewMap, domain: Domain, x: &str) -> AbsValue {
    let loc = AbsLoc::var(x);
    let mut out = AbsValue::bottom(domain);
    for s in views.values() {
        if let Some(v) = s.memory.get(&loc) {
            out.join_in(v);
        }
    }
    out
}

pub fn views_to_json(views: &ViewMap) -> Json {
    let m: Map<String, Json> = views
        .iter()
        .map(|(l, s)| (l.0.to_string(), s.to_json()))
        .collect();
    Json::Object(m)
}

pub fn views_from_json(j: &Json, domain: Domain) -> Result<ViewMap, DomainError> {
    let obj = j
        .as_object()
        .ok_or_else(|| DomainError::Json("views must be an object".into()))?;
    let mut out = ViewMap::new();
    for (k, v) in obj {
        let l = k
            .parse::<u32>()
            .map_err(|_| DomainError::Json(format!("bad view label {k:?}")))?;
        out.insert(Label(l), AbsState::from_json(v, domain)?);
    }
    Ok(out)
}

impl AbstractResult {
    pub fn to_json(&self) -> Json {
        json!({ "views": views_to_json(&self.views), "iterations": self.iterations })
    }
}

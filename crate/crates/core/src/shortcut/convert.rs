//! Conversion between abstract views and sealed states.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::concrete::{Address, Env, Frame, Location, Value};
use crate::domain::{
    AbsAddr, AbsContext, AbsFrame, AbsLoc, AbsMemory, AbsState, AbsValue, Count, Domain, Singleton,
};
use crate::lang::{Label, Program};
use crate::sealed::{
    sealed_step, AbstractInstantiationMap, BotReason, SFrame, SVal, SealedState, SealedStep, Sym,
};

use super::ShortcutPolicy;

/// Why a view could not be sealed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NotApplicable {
    PolicyRejected,
    /// A reachable abstract address may stand for several concrete ones.
    MultiInstanceAddress(AbsAddr),
    /// A reachable environment has zero or several return frames (or a
    /// frame with several return targets).
    AmbiguousContext(Label),
    /// The sealed state could not take even one step.
    NoFirstStep(BotReason),
}

impl NotApplicable {
    pub fn tag(&self) -> &'static str {
        match self {
            NotApplicable::PolicyRejected => "policy_rejected",
            NotApplicable::MultiInstanceAddress(_) => "multi_instance_address",
            NotApplicable::AmbiguousContext(_) => "ambiguous_context",
            NotApplicable::NoFirstStep(_) => "no_first_step",
        }
    }
}

impl fmt::Display for NotApplicable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NotApplicable::PolicyRejected => f.write_str("policy rejected the view"),
            NotApplicable::MultiInstanceAddress(a) => write!(f, "address {a} has several instances"),
            NotApplicable::AmbiguousContext(l) => write!(f, "ambiguous return context for {l}"),
            NotApplicable::NoFirstStep(r) => write!(f, "no sealed step ({})", r.tag()),
        }
    }
}

/// The parts of an abstract state not reachable from its environment;
/// they sit out the sealed run and are joined back afterwards.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Residue {
    pub memory: AbsMemory,
    pub context: AbsContext,
}

/// A sealed analysis element together with what unsealing needs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SealedPair {
    pub domain: Domain,
    pub imap: AbstractInstantiationMap,
    pub state: SealedState,
    pub residue: Residue,
}

fn admits(policy: ShortcutPolicy, program: &Program, label: Label, state: &AbsState) -> bool {
    match policy {
        ShortcutPolicy::Off => false,
        ShortcutPolicy::EveryView => true,
        ShortcutPolicy::FunctionLevel => {
            state.env == AbsAddr::Site(label) && program.function_entries().contains(&label)
        }
    }
}

/// Addresses reachable from the environment through memory and return
/// frames. `sealed_ctx` names the context entry that will become a
/// continuation symbol and is therefore not traversed.
fn reachable(state: &AbsState, sealed_ctx: Option<Label>) -> Result<BTreeSet<AbsAddr>, NotApplicable> {
    let mut by_addr: BTreeMap<AbsAddr, Vec<&AbsValue>> = BTreeMap::new();
    for (l, v) in &state.memory {
        by_addr.entry(l.addr()).or_default().push(v);
    }
    let mut seen = BTreeSet::from([state.env]);
    let mut work = vec![state.env];
    let visit = |a: AbsAddr, seen: &mut BTreeSet<AbsAddr>, work: &mut Vec<AbsAddr>| {
        if seen.insert(a) {
            work.push(a);
        }
    };
    while let Some(a) = work.pop() {
        for v in by_addr.get(&a).into_iter().flatten() {
            for site in &v.addrs {
                visit(AbsAddr::Site(*site), &mut seen, &mut work);
            }
        }
        let AbsAddr::Site(l) = a else { continue };
        if Some(l) == sealed_ctx {
            continue;
        }
        if let Some(frames) = state.context.get(&l) {
            let frame = match (frames.len(), frames.first()) {
                (1, Some(f)) if f.targets.len() == 1 => f,
                _ => return Err(NotApplicable::AmbiguousContext(l)),
            };
            visit(frame.ret_env, &mut seen, &mut work);
            for t in &frame.targets {
                visit(t.addr(), &mut seen, &mut work);
            }
        }
    }
    Ok(seen)
}

/// Seals view `label`. Succeeds only when the policy admits the view, each
/// reachable address stands for exactly one concrete address, return
/// contexts are unambiguous and the sealed state can take a first step.
pub fn seal(
    program: &Program,
    label: Label,
    state: &AbsState,
    policy: ShortcutPolicy,
    domain: Domain,
) -> Result<SealedPair, NotApplicable> {
    if !admits(policy, program, label, state) {
        return Err(NotApplicable::PolicyRejected);
    }
    let sealed_ctx = match policy {
        ShortcutPolicy::FunctionLevel => Some(label),
        _ => None,
    };
    let reach = reachable(state, sealed_ctx)?;
    for a in &reach {
        if state.counter.get(*a) != Count::One {
            return Err(NotApplicable::MultiInstanceAddress(*a));
        }
    }
    let mut addresses = BTreeMap::new();
    let mut fresh = 0u32;
    for a in &reach {
        if let AbsAddr::Site(site) = a {
            addresses.insert(*a, Address { site: *site, id: fresh });
            fresh += 1;
        }
    }
    let env_of = |a: AbsAddr| match a {
        AbsAddr::Top => Env::Top,
        AbsAddr::Site(_) => Env::Frame(addresses[&a]),
    };
    let obj_of = |site: Label| addresses[&AbsAddr::Site(site)];
    let loc_of = |l: &AbsLoc| match l {
        AbsLoc::Var(a, x) => Location::Var(env_of(*a), x.clone()),
        AbsLoc::Prop(site, k) => Location::Prop(obj_of(*site), k.clone()),
    };

    let mut next_sym = 0u32;
    let mut memory = BTreeMap::new();
    let mut residue = Residue::default();
    let mut minted = BTreeMap::new();
    for (l, v) in &state.memory {
        if !reach.contains(&l.addr()) {
            residue.memory.insert(l.clone(), v.clone());
            continue;
        }
        let sv = match v.singleton() {
            Some(Singleton::Prim(p)) => SVal::Val(Value::Prim(p)),
            Some(Singleton::Addr(site)) => SVal::Val(Value::Obj(obj_of(site))),
            Some(Singleton::Func(f)) => SVal::Val(Value::Closure {
                param: f.param,
                body: f.body,
            }),
            None => {
                let w = Sym(next_sym);
                next_sym += 1;
                minted.insert(w, v.clone());
                SVal::Sealed(w)
            }
        };
        memory.insert(loc_of(l), sv);
    }
    let mut imap = AbstractInstantiationMap {
        values: minted,
        continuations: BTreeMap::new(),
        addresses: addresses.clone(),
    };

    let mut context = BTreeMap::new();
    for (l, frames) in &state.context {
        let a = AbsAddr::Site(*l);
        if Some(*l) == sealed_ctx {
            let w = Sym(next_sym);
            next_sym += 1;
            imap.continuations.insert(w, frames.clone());
            context.insert(addresses[&a], SFrame::Sealed(w));
        } else if reach.contains(&a) {
            let f = frames.first().expect("checked by reachable");
            let target = f.targets.first().expect("checked by reachable");
            context.insert(
                addresses[&a],
                SFrame::Frame(Frame {
                    ret_env: env_of(f.ret_env),
                    ret_label: f.ret_label,
                    target: loc_of(target),
                }),
            );
        } else {
            residue.context.insert(*l, frames.clone());
        }
    }

    let sealed = SealedState {
        label,
        memory,
        context,
        env: env_of(state.env),
        counter: state.counter.clone(),
        fresh,
    };
    if let SealedStep::Bot(r) = sealed_step(program, &sealed) {
        return Err(NotApplicable::NoFirstStep(r));
    }
    Ok(SealedPair {
        domain,
        imap,
        state: sealed,
        residue,
    })
}

fn abs_env(e: Env) -> AbsAddr {
    match e {
        Env::Top => AbsAddr::Top,
        Env::Frame(a) => AbsAddr::Site(a.site),
    }
}

fn abs_loc(l: &Location) -> AbsLoc {
    match l {
        Location::Var(e, x) => AbsLoc::Var(abs_env(*e), x.clone()),
        Location::Prop(a, k) => AbsLoc::Prop(a.site, k.clone()),
    }
}

/// Unseals `state`, a state reached from `pair.state`: values are
/// abstracted, symbols replaced by what they stand for, and concrete
/// addresses collapsed to their sites (joining when several share one).
pub fn unseal(pair: &SealedPair, state: &SealedState) -> (Label, AbsState) {
    let mut memory = AbsMemory::new();
    let put = |l: AbsLoc, v: &AbsValue, memory: &mut AbsMemory| {
        if v.is_bottom() {
            return;
        }
        match memory.get_mut(&l) {
            Some(old) => old.join_in(v),
            None => {
                memory.insert(l, v.clone());
            }
        }
    };
    for (l, sv) in &state.memory {
        let v = match sv {
            SVal::Val(v) => AbsValue::from_concrete(pair.domain, v),
            SVal::Sealed(w) => match pair.imap.values.get(w) {
                Some(v) => v.clone(),
                None => continue,
            },
        };
        put(abs_loc(l), &v, &mut memory);
    }
    for (l, v) in &pair.residue.memory {
        put(l.clone(), v, &mut memory);
    }
    let mut context = AbsContext::new();
    for (a, f) in &state.context {
        let frames = context.entry(a.site).or_default();
        match f {
            SFrame::Frame(f) => {
                frames.insert(AbsFrame {
                    ret_env: abs_env(f.ret_env),
                    ret_label: f.ret_label,
                    targets: BTreeSet::from([abs_loc(&f.target)]),
                });
            }
            SFrame::Sealed(w) => {
                frames.extend(pair.imap.continuations.get(w).into_iter().flatten().cloned());
            }
        }
    }
    for (l, fs) in &pair.residue.context {
        context.entry(*l).or_default().extend(fs.iter().cloned());
    }
    (
        state.label,
        AbsState {
            memory,
            context,
            env: abs_env(state.env),
            counter: state.counter.clone(),
        },
    )
}

use std::time::Duration;

use serde_json::{json, Value as Json};

use crate::concrete::{concrete_step, Address, ConcreteState, Env, Frame, Location, StepResult, Value};
use crate::domain::{AbsAddr, AbsLoc, Gamma};
use crate::lang::{Primitive, Program};
use crate::sealed::{
    gamma_imap, instantiate, run_sealed, sealed_step, AbstractInstantiationMap, Budgets, InstMap,
    SealedState, SealedStep,
};
use crate::shortcut::SealedPair;

use super::OracleCaps;

/// Address ids used for probe objects and caller environments, far above
/// anything a run allocates.
const PROBE_ID: u32 = 1 << 30;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidityOutcome {
    NextConfirmed,
    BotJustified,
    Skipped(String),
    Failed(String),
}

/// Values outside any particular concretization, used to exercise the
/// "for every instantiation" half of validity.
pub fn instantiation_probes(program: &Program) -> Vec<Value> {
    vec![
        Value::int(-1000),
        Value::int(0),
        Value::int(1000),
        Value::str("probe"),
        Value::bool(true),
        Value::bool(false),
        Value::Prim(Primitive::Undef),
        Value::Closure {
            param: "probe".into(),
            body: program.entry(),
        },
        Value::Obj(Address {
            site: program.entry(),
            id: PROBE_ID,
        }),
    ]
}

fn probe_frames(program: &Program) -> Vec<Frame> {
    [program.entry(), program.last_label()]
        .into_iter()
        .map(|ret_label| Frame {
            ret_env: Env::Top,
            ret_label,
            target: Location::Var(Env::Top, "probe".into()),
        })
        .collect()
}

/// Gives caller environments and targets of sealed continuations concrete
/// stand-ins so their frames can be enumerated.
fn with_probe_addresses(imap: &AbstractInstantiationMap) -> AbstractInstantiationMap {
    let mut m = imap.clone();
    let mut need = Vec::new();
    for frames in imap.continuations.values() {
        for f in frames {
            need.push(f.ret_env);
            need.extend(f.targets.iter().map(AbsLoc::addr));
        }
    }
    for a in need {
        if let AbsAddr::Site(site) = a {
            m.addresses.entry(a).or_insert(Address {
                site,
                id: PROBE_ID + 1 + site.0,
            });
        }
    }
    m
}

fn instantiations(
    program: &Program,
    imap: &AbstractInstantiationMap,
    caps: &OracleCaps,
) -> Result<Vec<InstMap>, String> {
    let base = match gamma_imap(&with_probe_addresses(imap), caps.int_cap, caps.max_instantiations) {
        Gamma::Values(v) => v,
        Gamma::NonEnumerable(why) => return Err(why),
    };
    let Some(m0) = base.first().cloned() else {
        return Err("empty concretization".into());
    };
    let mut all = base;
    for w in imap.values.keys() {
        for v in instantiation_probes(program) {
            let mut m = m0.clone();
            m.values.insert(*w, v);
            all.push(m);
        }
    }
    for w in imap.continuations.keys() {
        for f in probe_frames(program) {
            let mut m = m0.clone();
            m.frames.insert(*w, f);
            all.push(m);
        }
    }
    Ok(all)
}

/// Whether one sealed state describes every successor: shapes agree and
/// each varying location tracks a single symbol.
fn anti_unifiable(succ: &[(InstMap, ConcreteState)]) -> bool {
    let (_, first) = &succ[0];
    let same_shape = succ.iter().all(|(_, s)| {
        s.label == first.label
            && s.env == first.env
            && s.fresh == first.fresh
            && s.memory.keys().eq(first.memory.keys())
            && s.context.keys().eq(first.context.keys())
    });
    if !same_shape {
        return false;
    }
    let syms: Vec<_> = succ[0].0.values.keys().chain(succ[0].0.frames.keys()).copied().collect();
    let mem_ok = first.memory.iter().all(|(l, v0)| {
        succ.iter().all(|(_, s)| &s.memory[l] == v0)
            || syms
                .iter()
                .any(|w| succ.iter().all(|(m, s)| m.values.get(w) == Some(&s.memory[l])))
    });
    let ctx_ok = first.context.iter().all(|(a, f0)| {
        succ.iter().all(|(_, s)| &s.context[a] == f0)
            || syms
                .iter()
                .any(|w| succ.iter().all(|(m, s)| m.frames.get(w) == Some(&s.context[a])))
    });
    mem_ok && ctx_ok
}

/// Checks one sealed state against the validity condition: a sealed step
/// must commute with every instantiation, and a missing sealed step must
/// be forced (some instantiation is blocked, or the concrete successors
/// admit no common sealed description).
pub fn check_validity(
    program: &Program,
    imap: &AbstractInstantiationMap,
    state: &SealedState,
    caps: &OracleCaps,
) -> ValidityOutcome {
    let ms = match instantiations(program, imap, caps) {
        Ok(ms) => ms,
        Err(why) => return ValidityOutcome::Skipped(why),
    };
    let step = sealed_step(program, state);
    let mut succ = Vec::with_capacity(ms.len());
    let mut blocked = false;
    for m in ms {
        let c = match instantiate(state, &m) {
            Ok(c) => c,
            Err(e) => return ValidityOutcome::Skipped(e.to_string()),
        };
        match concrete_step(program, &c) {
            StepResult::Next(next) => succ.push((m, next)),
            _ => blocked = true,
        }
        if let (SealedStep::Next(_), true) = (&step, blocked) {
            return ValidityOutcome::Failed(format!(
                "sealed step at {} but an instantiation is blocked",
                state.label
            ));
        }
    }
    match step {
        SealedStep::Next(next) => {
            for (m, c) in &succ {
                match instantiate(&next, m) {
                    Ok(expected) if &expected == c => {}
                    _ => {
                        return ValidityOutcome::Failed(format!(
                            "sealed successor of {} disagrees with the concrete one",
                            state.label
                        ))
                    }
                }
            }
            ValidityOutcome::NextConfirmed
        }
        SealedStep::Bot(reason) => {
            if blocked || !anti_unifiable(&succ) {
                ValidityOutcome::BotJustified
            } else {
                ValidityOutcome::Failed(format!(
                    "no sealed step at {} ({}) although every instantiation agrees",
                    state.label,
                    reason.tag()
                ))
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidityReport {
    pub next_confirmed: usize,
    pub bot_justified: usize,
    pub skipped: Vec<String>,
    pub failures: Vec<String>,
}

impl ValidityReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn checked(&self) -> usize {
        self.next_confirmed + self.bot_justified
    }

    pub fn record(&mut self, o: ValidityOutcome) {
        match o {
            ValidityOutcome::NextConfirmed => self.next_confirmed += 1,
            ValidityOutcome::BotJustified => self.bot_justified += 1,
            ValidityOutcome::Skipped(s) => self.skipped.push(s),
            ValidityOutcome::Failed(s) => self.failures.push(s),
        }
    }

    pub fn merge(&mut self, o: ValidityReport) {
        self.next_confirmed += o.next_confirmed;
        self.bot_justified += o.bot_justified;
        self.skipped.extend(o.skipped);
        self.failures.extend(o.failures);
    }

    pub fn to_json(&self) -> Json {
        json!({
            "pass": self.passed(),
            "next_confirmed": self.next_confirmed,
            "bot_justified": self.bot_justified,
            "skipped": self.skipped.len(),
            "failures": self.failures.iter().take(10).collect::<Vec<_>>(),
        })
    }
}

/// Replays the sealed run of `pair` and checks up to `max_states` of its
/// states, always including the terminal one.
pub fn check_run_validity(program: &Program, pair: &SealedPair, caps: &OracleCaps, max_states: usize) -> ValidityReport {
    let budgets = Budgets {
        max_steps: caps.step_budget,
        wall_clock: Duration::from_secs(5),
    };
    let run = run_sealed(program, pair.state.clone(), budgets);
    let mut report = ValidityReport::default();
    let n = run.trace.len();
    for (i, st) in run.trace.iter().enumerate() {
        if i + 1 < n && i >= max_states {
            continue;
        }
        report.record(check_validity(program, &pair.imap, st, caps));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AbsCounter, AbsValue, Prims, Sign, SignSet};
    use crate::examples::{neg_abs, neg_abs_program};
    use crate::lang::Label;
    use crate::sealed::{SVal, Sym};
    use std::collections::BTreeMap;

    fn setup(label: Label, s: &[Sign]) -> (AbstractInstantiationMap, SealedState) {
        let imap = AbstractInstantiationMap {
            values: BTreeMap::from([(Sym(0), AbsValue::from_prims(Prims::of_signs(SignSet::of(s))))]),
            ..Default::default()
        };
        let state = SealedState {
            label,
            memory: BTreeMap::from([(Location::Var(Env::Top, "x".into()), SVal::Sealed(Sym(0)))]),
            context: BTreeMap::new(),
            env: Env::Top,
            counter: AbsCounter::initial(),
            fresh: 0,
        };
        (imap, state)
    }

    #[test]
    fn copy_is_confirmed() {
        let p = neg_abs_program();
        let (m, s) = setup(neg_abs::THEN, &[Sign::Zero, Sign::Pos]);
        assert_eq!(check_validity(&p, &m, &s, &OracleCaps::default()), ValidityOutcome::NextConfirmed);
    }

    #[test]
    fn branch_bot_is_justified() {
        let p = neg_abs_program();
        let (m, s) = setup(neg_abs::TEST, &[Sign::Neg, Sign::Pos]);
        assert_eq!(check_validity(&p, &m, &s, &OracleCaps::default()), ValidityOutcome::BotJustified);
    }

    #[test]
    fn concrete_state_matches() {
        let p = neg_abs_program();
        let (m, mut s) = setup(neg_abs::TEST, &[Sign::Zero]);
        s.memory.insert(Location::Var(Env::Top, "x".into()), SVal::Val(Value::int(0)));
        assert_eq!(check_validity(&p, &m, &s, &OracleCaps::default()), ValidityOutcome::NextConfirmed);
    }

    #[test]
    fn uniform_successors_anti_unify() {
        // Successors that differ only where the symbol does admit a sealed
        // description, so a ⊥ there would be refuted.
        let p = neg_abs_program();
        let (m, s) = setup(neg_abs::THEN, &[Sign::Zero, Sign::Pos]);
        let succ: Vec<_> = instantiations(&p, &m, &OracleCaps::default())
            .unwrap()
            .into_iter()
            .map(|m| {
                let c = instantiate(&s, &m).unwrap();
                match concrete_step(&p, &c) {
                    StepResult::Next(n) => (m, n),
                    other => panic!("{other:?}"),
                }
            })
            .collect();
        assert!(anti_unifiable(&succ));
        let (m, s) = setup(neg_abs::TEST, &[Sign::Neg, Sign::Pos]);
        let succ: Vec<_> = instantiations(&p, &m, &OracleCaps::default())
            .unwrap()
            .into_iter()
            .filter_map(|m| match concrete_step(&p, &instantiate(&s, &m).unwrap()) {
                StepResult::Next(n) => Some((m, n)),
                _ => None,
            })
            .collect();
        assert!(!anti_unifiable(&succ));
    }

    #[test]
    fn sealed_return_is_justified() {
        use crate::domain::AbsFrame;
        use crate::sealed::SFrame;
        use std::collections::BTreeSet;
        let p = crate::lang::parse_program("0: f = fun(a)@3\n1: r = f(1)\n2: ret r\n3: ret a").unwrap();
        let a = Address { site: Label(3), id: 0 };
        let imap = AbstractInstantiationMap {
            continuations: BTreeMap::from([(
                Sym(0),
                BTreeSet::from([AbsFrame {
                    ret_env: AbsAddr::Top,
                    ret_label: Label(2),
                    targets: BTreeSet::from([AbsLoc::var("r")]),
                }]),
            )]),
            addresses: BTreeMap::from([(AbsAddr::Site(Label(3)), a)]),
            ..Default::default()
        };
        let s = SealedState {
            label: Label(3),
            memory: BTreeMap::from([(Location::Var(Env::Frame(a), "a".into()), SVal::Val(Value::int(1)))]),
            context: BTreeMap::from([(a, SFrame::Sealed(Sym(0)))]),
            env: Env::Frame(a),
            counter: AbsCounter::initial(),
            fresh: 1,
        };
        assert_eq!(check_validity(&p, &imap, &s, &OracleCaps::default()), ValidityOutcome::BotJustified);
    }
}

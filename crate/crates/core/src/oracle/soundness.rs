use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value as Json};

use crate::concrete::{run_concrete, Address, ConcreteState, Env, Location, Value};
use crate::domain::{gamma_value, AbsAddr, AbsLoc, AbsState, Count, Gamma};
use crate::interp::ViewMap;
use crate::lang::{Label, Program};

use super::OracleCaps;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InitialStates {
    States {
        states: Vec<ConcreteState>,
        /// The product was cut at the cap.
        truncated: bool,
    },
    NonEnumerable(String),
}

/// Concrete states described by the entry view, enumerated as the product
/// of the per-variable concretizations.
pub fn enumerate_initial_states(program: &Program, initial: &ViewMap, caps: &OracleCaps) -> InitialStates {
    let entry = program.entry();
    if initial.keys().any(|l| *l != entry) {
        return InitialStates::NonEnumerable("initial views beyond the entry".into());
    }
    let Some(state) = initial.get(&entry) else {
        return InitialStates::States {
            states: Vec::new(),
            truncated: false,
        };
    };
    if state.env != AbsAddr::Top
        || !state.context.is_empty()
        || state.counter.iter().any(|(a, c)| a != AbsAddr::Top && c != Count::Zero)
    {
        return InitialStates::NonEnumerable("entry state has allocations or frames".into());
    }
    let mut choices = Vec::new();
    for (l, v) in &state.memory {
        let AbsLoc::Var(AbsAddr::Top, x) = l else {
            return InitialStates::NonEnumerable(format!("entry binds non-variable {l}"));
        };
        match gamma_value(v, caps.int_cap) {
            Gamma::Values(vs) => choices.push((x.clone(), vs)),
            Gamma::NonEnumerable(why) => return InitialStates::NonEnumerable(format!("{x}: {why}")),
        }
    }
    let mut combos: Vec<Vec<(String, Value)>> = vec![Vec::new()];
    let mut truncated = false;
    for (x, vs) in choices {
        let mut next = Vec::new();
        'outer: for c in &combos {
            for v in &vs {
                if next.len() == caps.max_initial_states {
                    truncated = true;
                    break 'outer;
                }
                let mut c = c.clone();
                c.push((x.clone(), v.clone()));
                next.push(c);
            }
        }
        combos = next;
    }
    InitialStates::States {
        states: combos
            .into_iter()
            .map(|vars| ConcreteState::initial(program, vars))
            .collect(),
        truncated,
    }
}

fn alpha_env(e: Env) -> AbsAddr {
    match e {
        Env::Top => AbsAddr::Top,
        Env::Frame(a) => AbsAddr::Site(a.site),
    }
}

fn alpha_loc(l: &Location) -> AbsLoc {
    match l {
        Location::Var(e, x) => AbsLoc::Var(alpha_env(*e), x.clone()),
        Location::Prop(a, k) => AbsLoc::Prop(a.site, k.clone()),
    }
}

/// Whether `c` is in the concretization of `s`. Only locations bound in
/// `c` are checked, so a state may lack locations the abstraction has.
pub fn covers(s: &AbsState, c: &ConcreteState) -> Result<(), String> {
    if alpha_env(c.env) != s.env {
        return Err(format!("environment {} vs {}", c.env, s.env));
    }
    let mut addrs: BTreeSet<Address> = BTreeSet::new();
    let note_env = |e: Env, addrs: &mut BTreeSet<Address>| {
        if let Env::Frame(a) = e {
            addrs.insert(a);
        }
    };
    note_env(c.env, &mut addrs);
    for (l, v) in &c.memory {
        match l {
            Location::Var(e, _) => note_env(*e, &mut addrs),
            Location::Prop(a, _) => {
                addrs.insert(*a);
            }
        }
        if let Value::Obj(a) = v {
            addrs.insert(*a);
        }
        let al = alpha_loc(l);
        match s.memory.get(&al) {
            Some(av) if av.contains(v) => {}
            Some(av) => return Err(format!("{l} = {v} not in {av}")),
            None => return Err(format!("{l} = {v} unbound in the abstraction")),
        }
    }
    for (a, f) in &c.context {
        addrs.insert(*a);
        note_env(f.ret_env, &mut addrs);
        let frames = s.context.get(&a.site).into_iter().flatten();
        let ok = frames.into_iter().any(|af| {
            af.ret_env == alpha_env(f.ret_env)
                && af.ret_label == f.ret_label
                && af.targets.contains(&alpha_loc(&f.target))
        });
        if !ok {
            return Err(format!("frame of {a} not covered"));
        }
    }
    let mut per_site: BTreeMap<Label, usize> = BTreeMap::new();
    for a in &addrs {
        *per_site.entry(a.site).or_default() += 1;
    }
    for (site, n) in per_site {
        let need = if n >= 2 { Count::Many } else { Count::One };
        if s.counter.get(AbsAddr::Site(site)) < need {
            return Err(format!("counter of {site} below {n} instances"));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub initial: ConcreteState,
    pub reached: ConcreteState,
    pub view: Label,
    pub reason: String,
}

impl Violation {
    pub fn to_json(&self) -> Json {
        json!({
            "initial": self.initial.to_json(),
            "reached": self.reached.to_json(),
            "view": self.view.0,
            "reason": self.reason,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SoundnessReport {
    pub programs_checked: usize,
    pub states_enumerated: usize,
    pub states_checked: usize,
    pub truncated: bool,
    pub violations: Vec<Violation>,
    pub skipped: Vec<String>,
}

impl SoundnessReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn merge(&mut self, o: SoundnessReport) {
        self.programs_checked += o.programs_checked;
        self.states_enumerated += o.states_enumerated;
        self.states_checked += o.states_checked;
        self.truncated |= o.truncated;
        self.violations.extend(o.violations);
        self.skipped.extend(o.skipped);
    }

    pub fn to_json(&self) -> Json {
        json!({
            "pass": self.passed(),
            "programs_checked": self.programs_checked,
            "states_enumerated": self.states_enumerated,
            "states_checked": self.states_checked,
            "truncated": self.truncated,
            "violation_count": self.violations.len(),
            "violations": self.violations.iter().take(10).map(Violation::to_json).collect::<Vec<_>>(),
            "skipped": self.skipped,
        })
    }
}

/// Runs every enumerated initial state concretely and checks each state
/// reached against the result view at its label.
pub fn check_soundness(program: &Program, result: &ViewMap, initial: &ViewMap, caps: &OracleCaps) -> SoundnessReport {
    let mut report = SoundnessReport {
        programs_checked: 1,
        ..SoundnessReport::default()
    };
    let (states, truncated) = match enumerate_initial_states(program, initial, caps) {
        InitialStates::States { states, truncated } => (states, truncated),
        InitialStates::NonEnumerable(why) => {
            report.skipped.push(why);
            return report;
        }
    };
    report.truncated = truncated;
    report.states_enumerated = states.len();
    for s0 in states {
        let run = run_concrete(program, s0.clone(), caps.step_budget);
        for reached in &run.trace {
            report.states_checked += 1;
            let verdict = match result.get(&reached.label) {
                None => Err("view is bottom".to_string()),
                Some(s) => covers(s, reached),
            };
            if let Err(reason) = verdict {
                report.violations.push(Violation {
                    initial: s0.clone(),
                    reached: reached.clone(),
                    view: reached.label,
                    reason,
                });
                break;
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AbsValue, Domain, Prims, Sign, SignSet, Strs};
    use crate::examples::{neg_abs, neg_abs_program};
    use crate::interp::{analyze_abstract, entry_views, AnalysisSettings};

    fn signs(s: &[Sign]) -> AbsValue {
        AbsValue::from_prims(Prims::of_signs(SignSet::of(s)))
    }

    #[test]
    fn enumeration() {
        use Sign::*;
        let p = neg_abs_program();
        let caps = OracleCaps {
            int_cap: 1,
            ..OracleCaps::default()
        };
        let one = |v: AbsValue| enumerate_initial_states(&p, &entry_views(&p, [("x".to_string(), v)]), &caps);
        match one(signs(&[Zero])) {
            InitialStates::States { states, .. } => {
                assert_eq!(states.len(), 1);
                assert_eq!(states[0].top_var("x"), Some(&Value::int(0)));
            }
            other => panic!("{other:?}"),
        }
        match one(signs(&[Neg, Zero, Pos])) {
            InitialStates::States { states, truncated } => {
                let xs: Vec<_> = states.iter().map(|s| s.top_var("x").cloned().unwrap()).collect();
                assert_eq!(xs, vec![Value::int(-1), Value::int(0), Value::int(1)]);
                assert!(!truncated);
            }
            other => panic!("{other:?}"),
        }
        let top = AbsValue::from_prims(Prims::of_strs(Domain::Sign, Strs::Top));
        assert!(matches!(one(top), InitialStates::NonEnumerable(_)));
    }

    #[test]
    fn truncation_is_flagged() {
        use Sign::*;
        let p = neg_abs_program();
        let all = signs(&[Neg, Zero, Pos]);
        let init = entry_views(&p, [("x".to_string(), all.clone()), ("y".to_string(), all)]);
        match enumerate_initial_states(&p, &init, &OracleCaps::default()) {
            InitialStates::States { states, truncated } => {
                assert_eq!(states.len(), 64);
                assert!(truncated);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn table_is_sound_and_mutation_is_caught() {
        use Sign::*;
        let p = neg_abs_program();
        let init = entry_views(&p, [("x".to_string(), signs(&[Neg, Zero, Pos]))]);
        let r = analyze_abstract(&p, &init, &AnalysisSettings::new(Domain::Sign)).unwrap();
        let caps = OracleCaps {
            int_cap: 3,
            ..OracleCaps::default()
        };
        let report = check_soundness(&p, &r.views, &init, &caps);
        assert!(report.passed(), "{:?}", report.violations);
        assert_eq!(report.states_enumerated, 7);

        let mut bad = r.views.clone();
        bad.get_mut(&neg_abs::EXIT)
            .unwrap()
            .memory
            .insert(AbsLoc::var("x"), signs(&[Zero]));
        let report = check_soundness(&p, &bad, &init, &caps);
        assert!(!report.passed());
        assert!(report.violations.iter().all(|v| v.view == neg_abs::EXIT));
    }
}

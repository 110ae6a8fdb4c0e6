use std::collections::BTreeSet;

use log::{debug, info};

use crate::domain::{height_bound, AbsState};
use crate::interp::{
    abstract_step, join_into_view, successors, AnalysisSettings, InterpError, ViewMap,
};
use crate::lang::{Label, Program};
use crate::sealed::{run_sealed, sealed_step, Budgets, SealedOutcome, SealedStep};

use super::{
    seal, unseal, EventOutcome, Metrics, SealedPair, ShortcutEvent, ShortcutPolicy, ShortcutResult,
};

/// Fixpoint of the combined transfer. Each round re-processes the views
/// that grew. A view that can be sealed is run to its terminal at once and
/// the terminal state is unsealed into its view; otherwise (or when the run
/// exceeds the budget) the view takes its abstract transitions. States the
/// sealed runs pass through are reported alongside the abstract views.
pub fn analyze_with_shortcuts(
    program: &Program,
    initial: &ViewMap,
    policy: ShortcutPolicy,
    budgets: Budgets,
    settings: &AnalysisSettings,
) -> Result<ShortcutResult, InterpError> {
    let mut views = initial.clone();
    let mut passed = ViewMap::new();
    let mut dirty: BTreeSet<Label> = views.keys().copied().collect();
    let mut blacklist: BTreeSet<(Label, AbsState)> = BTreeSet::new();
    let mut seen: BTreeSet<SealedPair> = BTreeSet::new();
    let mut shortcuts = Vec::new();
    let mut sealed_runs = Vec::new();
    let mut metrics = Metrics::default();
    let mut iterations = 0;
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
            if policy != ShortcutPolicy::Off && !blacklist.contains(&(*l, s.clone())) {
                match seal(program, *l, s, policy, settings.domain) {
                    Ok(pair) => {
                        if !seen.insert(pair.clone()) {
                            continue;
                        }
                        let run = run_sealed(program, pair.state.clone(), budgets);
                        let omega_count = pair.imap.omega_count();
                        match &run.outcome {
                            SealedOutcome::BudgetExceeded => {
                                info!("sealed run from {l} exceeded its budget; reverting");
                                blacklist.insert((*l, s.clone()));
                                shortcuts.push(ShortcutEvent {
                                    start_view: *l,
                                    end_view: run.last().label,
                                    steps: run.steps(),
                                    outcome: EventOutcome::BudgetReverted,
                                    omega_count,
                                });
                            }
                            SealedOutcome::Bot(reason) => {
                                debug!("shortcut {l} → {} in {} steps", run.last().label, run.steps());
                                metrics.sealed_steps += run.steps() as u64;
                                metrics.shortcuts_taken += 1;
                                let n = run.trace.len();
                                for st in &run.trace[1..n - 1] {
                                    let (at, a) = unseal(&pair, st);
                                    join_into_view(&mut passed, at, &a)?;
                                }
                                produced.push(unseal(&pair, run.last()));
                                shortcuts.push(ShortcutEvent {
                                    start_view: *l,
                                    end_view: run.last().label,
                                    steps: run.steps(),
                                    outcome: EventOutcome::Taken {
                                        terminal: reason.tag(),
                                    },
                                    omega_count,
                                });
                                sealed_runs.push(pair);
                                continue;
                            }
                        }
                    }
                    Err(reason) => shortcuts.push(ShortcutEvent {
                        start_view: *l,
                        end_view: *l,
                        steps: 0,
                        outcome: EventOutcome::NotApplicable(reason),
                        omega_count: 0,
                    }),
                }
            }
            let succ = successors(program, *l, s, settings)?;
            metrics.abstract_transitions += succ.len() as u64;
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
    let bound = height_bound(program, settings.domain).saturating_add(budgets.max_steps as u64);
    assert!(
        iterations as u64 <= bound,
        "{iterations} iterations exceed the termination bound {bound}"
    );
    for (l, s) in &passed {
        join_into_view(&mut views, *l, s)?;
    }
    Ok(ShortcutResult {
        views,
        shortcuts,
        iterations,
        metrics,
        sealed_runs,
    })
}

/// One element of the combined domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnalysisElement {
    Abs(Label, AbsState),
    Sealed(SealedPair),
}

/// Abstract views plus the set of in-flight sealed pairs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CombinedState {
    pub views: ViewMap,
    pub sealed: BTreeSet<SealedPair>,
}

impl CombinedState {
    pub fn from_views(views: ViewMap) -> CombinedState {
        CombinedState {
            views,
            sealed: BTreeSet::new(),
        }
    }

    fn join_in(&mut self, o: &CombinedState) -> Result<bool, InterpError> {
        let mut grew = false;
        for (l, s) in &o.views {
            grew |= join_into_view(&mut self.views, *l, s)?;
        }
        for p in &o.sealed {
            grew |= self.sealed.insert(p.clone());
        }
        Ok(grew)
    }

    /// The views with every sealed pair unsealed into its own label.
    pub fn covering_views(&self) -> Result<ViewMap, InterpError> {
        let mut out = self.views.clone();
        for p in &self.sealed {
            let (l, s) = unseal(p, &p.state);
            join_into_view(&mut out, l, &s)?;
        }
        Ok(out)
    }
}

/// Seals an abstract element whose run stays within budget; unseals a
/// sealed element that cannot step; leaves anything else alone.
pub fn reform_elem(
    program: &Program,
    elem: AnalysisElement,
    policy: ShortcutPolicy,
    budgets: Budgets,
    settings: &AnalysisSettings,
) -> AnalysisElement {
    match elem {
        AnalysisElement::Abs(l, s) => match seal(program, l, &s, policy, settings.domain) {
            Ok(pair)
                if run_sealed(program, pair.state.clone(), budgets).outcome
                    != SealedOutcome::BudgetExceeded =>
            {
                AnalysisElement::Sealed(pair)
            }
            _ => AnalysisElement::Abs(l, s),
        },
        AnalysisElement::Sealed(p) => match sealed_step(program, &p.state) {
            SealedStep::Bot(_) => {
                let (l, s) = unseal(&p, &p.state);
                AnalysisElement::Abs(l, s)
            }
            SealedStep::Next(_) => AnalysisElement::Sealed(p),
        },
    }
}

/// Reforms every element; sealed views contribute nothing to the rebuilt
/// view map.
pub fn reform(
    program: &Program,
    c: &CombinedState,
    policy: ShortcutPolicy,
    budgets: Budgets,
    settings: &AnalysisSettings,
) -> Result<CombinedState, InterpError> {
    let elems = c
        .views
        .iter()
        .map(|(l, s)| AnalysisElement::Abs(*l, s.clone()))
        .chain(c.sealed.iter().cloned().map(AnalysisElement::Sealed));
    let mut out = CombinedState::default();
    for e in elems {
        match reform_elem(program, e, policy, budgets, settings) {
            AnalysisElement::Abs(l, s) => {
                join_into_view(&mut out.views, l, &s)?;
            }
            AnalysisElement::Sealed(p) => {
                out.sealed.insert(p);
            }
        }
    }
    Ok(out)
}

/// Reform, then one abstract step on the views and one sealed step on
/// every sealed pair.
pub fn combined_step(
    program: &Program,
    c: &CombinedState,
    policy: ShortcutPolicy,
    budgets: Budgets,
    settings: &AnalysisSettings,
) -> Result<CombinedState, InterpError> {
    let r = reform(program, c, policy, budgets, settings)?;
    let views = abstract_step(program, &r.views, settings)?;
    let sealed = r
        .sealed
        .into_iter()
        .filter_map(|p| match sealed_step(program, &p.state) {
            SealedStep::Next(state) => Some(SealedPair { state, ..p }),
            SealedStep::Bot(_) => None,
        })
        .collect();
    Ok(CombinedState { views, sealed })
}

/// Iterates `c ↦ c ⊔ combined_step(c)` to its fixpoint: the unoptimized
/// reference for [`analyze_with_shortcuts`].
pub fn combined_fixpoint(
    program: &Program,
    initial: &ViewMap,
    policy: ShortcutPolicy,
    budgets: Budgets,
    settings: &AnalysisSettings,
) -> Result<(CombinedState, usize), InterpError> {
    let mut c = CombinedState::from_views(initial.clone());
    let mut iterations = 0;
    loop {
        iterations += 1;
        if iterations > settings.max_iterations {
            return Err(InterpError::IterationCapExceeded {
                cap: settings.max_iterations,
            });
        }
        let next = combined_step(program, &c, policy, budgets, settings)?;
        if !c.join_in(&next)? {
            return Ok((c, iterations));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AbsValue, Domain, Prims, Sign, SignSet};
    use crate::examples::{neg_abs, neg_abs_program, SELF_LOOP_SOURCE};
    use crate::interp::{analyze_abstract, entry_views};
    use crate::lang::parse_program;

    fn signs(s: &[Sign]) -> AbsValue {
        AbsValue::from_prims(Prims::of_signs(SignSet::of(s)))
    }

    fn run(s: &[Sign], policy: ShortcutPolicy) -> ShortcutResult {
        let p = neg_abs_program();
        let init = entry_views(&p, [("x".to_string(), signs(s))]);
        analyze_with_shortcuts(&p, &init, policy, Budgets::default(), &AnalysisSettings::new(Domain::Sign))
            .unwrap()
    }

    fn x_at(r: &ViewMap, l: Label) -> AbsValue {
        r[&l].var("x").cloned().unwrap()
    }

    #[test]
    fn singleton_entry_runs_to_exit() {
        let r = run(&[Sign::Zero], ShortcutPolicy::EveryView);
        let taken: Vec<_> = r.taken().collect();
        assert_eq!(taken.len(), 1);
        assert_eq!((taken[0].start_view, taken[0].end_view), (neg_abs::TEST, neg_abs::EXIT));
        assert_eq!(taken[0].omega_count, 0);
        assert_eq!(x_at(&r.views, neg_abs::EXIT), signs(&[Sign::Zero]));
        assert_eq!(r.metrics.abstract_transitions, 0);
    }

    #[test]
    fn positive_entry() {
        let r = run(&[Sign::Pos], ShortcutPolicy::EveryView);
        let taken: Vec<_> = r.taken().collect();
        assert_eq!(taken.len(), 1);
        assert_eq!((taken[0].start_view, taken[0].end_view), (neg_abs::THEN, neg_abs::MERGE));
        assert_eq!(x_at(&r.views, neg_abs::EXIT), signs(&[Sign::Neg]));
    }

    #[test]
    fn full_entry() {
        use Sign::*;
        let r = run(&[Neg, Zero, Pos], ShortcutPolicy::EveryView);
        assert_eq!(x_at(&r.views, neg_abs::MERGE), signs(&[Zero, Pos]));
        assert_eq!(x_at(&r.views, neg_abs::EXIT), signs(&[Neg, Zero]));
        let first = r.taken().next().unwrap();
        assert_eq!(first.start_view, neg_abs::THEN);
        assert_eq!(r.sealed_runs[0].imap.values.values().next(), Some(&signs(&[Zero, Pos])));
    }

    #[test]
    fn off_equals_plain_analysis() {
        use Sign::*;
        let p = neg_abs_program();
        let init = entry_views(&p, [("x".to_string(), signs(&[Neg, Zero, Pos]))]);
        let settings = AnalysisSettings::new(Domain::Sign);
        let a = analyze_abstract(&p, &init, &settings).unwrap();
        let r = analyze_with_shortcuts(&p, &init, ShortcutPolicy::Off, Budgets::default(), &settings).unwrap();
        assert_eq!(a.views, r.views);
        assert_eq!(a.iterations, r.iterations);
        assert_eq!(a.transitions, r.metrics.abstract_transitions);
        assert!(r.shortcuts.is_empty());
    }

    #[test]
    fn self_loop_reverts() {
        let p = parse_program(&format!("0: x = 1\n{}", SELF_LOOP_SOURCE.replace("0:", "1:").replace(" 0", " 1"))).unwrap();
        let init = entry_views(&p, []);
        let settings = AnalysisSettings::new(Domain::Sign);
        let budgets = Budgets {
            max_steps: 1000,
            ..Budgets::default()
        };
        let off = analyze_abstract(&p, &init, &settings).unwrap();
        let r = analyze_with_shortcuts(&p, &init, ShortcutPolicy::EveryView, budgets, &settings).unwrap();
        assert!(r
            .shortcuts
            .iter()
            .any(|e| e.outcome == EventOutcome::BudgetReverted));
        assert_eq!(r.views, off.views);
    }

    #[test]
    fn reference_fixpoint_agrees() {
        use Sign::*;
        let p = neg_abs_program();
        let settings = AnalysisSettings::new(Domain::Sign);
        for s in [&[Zero][..], &[Pos], &[Neg, Zero, Pos]] {
            let init = entry_views(&p, [("x".to_string(), signs(s))]);
            let fast = analyze_with_shortcuts(&p, &init, ShortcutPolicy::EveryView, Budgets::default(), &settings)
                .unwrap();
            let (c, _) = combined_fixpoint(&p, &init, ShortcutPolicy::EveryView, Budgets::default(), &settings)
                .unwrap();
            assert_eq!(fast.views, c.covering_views().unwrap(), "entry {s:?}");
        }
    }

    #[test]
    fn reform_seals_entry() {
        let p = neg_abs_program();
        let settings = AnalysisSettings::new(Domain::Sign);
        let c = CombinedState::from_views(entry_views(&p, [("x".to_string(), signs(&[Sign::Zero]))]));
        let r = reform(&p, &c, ShortcutPolicy::EveryView, Budgets::default(), &settings).unwrap();
        assert!(r.views.is_empty());
        assert_eq!(r.sealed.len(), 1);
        let pair = r.sealed.first().unwrap();
        assert!(pair.imap.is_empty());
        // Unchanged when nothing converts.
        let r = reform(&p, &c, ShortcutPolicy::Off, Budgets::default(), &settings).unwrap();
        assert_eq!(r, c);
    }
}

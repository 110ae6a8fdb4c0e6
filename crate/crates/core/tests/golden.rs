//! Worked examples of the running sign-analysis program, checked exactly.

use dynshort::concrete::{run_concrete, ConcreteState, Outcome, Value};
use dynshort::domain::{inc, AbsAddr, AbsCounter, AbsValue, Count, Domain, Prims, Sign, SignSet};
use dynshort::examples::{neg_abs, neg_abs_program, SELF_LOOP_SOURCE};
use dynshort::interp::{analyze_abstract, entry_views, union_of_var, AnalysisSettings, ViewMap};
use dynshort::lang::{parse_program, Label};
use dynshort::sealed::Budgets;
use dynshort::shortcut::{analyze_with_shortcuts, compare_precision, ShortcutPolicy, ShortcutResult, Verdict};

use Sign::*;

fn signs(s: &[Sign]) -> AbsValue {
    AbsValue::from_prims(Prims::of_signs(SignSet::of(s)))
}

fn init(s: &[Sign]) -> ViewMap {
    entry_views(&neg_abs_program(), [("x".to_string(), signs(s))])
}

fn x_at(views: &ViewMap, l: Label) -> AbsValue {
    views[&l].var("x").cloned().expect("x bound")
}

fn with_policy(s: &[Sign], policy: ShortcutPolicy) -> ShortcutResult {
    analyze_with_shortcuts(
        &neg_abs_program(),
        &init(s),
        policy,
        Budgets::default(),
        &AnalysisSettings::new(Domain::Sign),
    )
    .unwrap()
}

#[test]
fn flow_sensitive_table() {
    let r = analyze_abstract(&neg_abs_program(), &init(&[Neg, Zero, Pos]), &AnalysisSettings::new(Domain::Sign))
        .unwrap();
    assert_eq!(x_at(&r.views, neg_abs::TEST), signs(&[Neg, Zero, Pos]));
    assert_eq!(x_at(&r.views, neg_abs::THEN), signs(&[Zero, Pos]));
    assert_eq!(x_at(&r.views, neg_abs::ELSE), signs(&[Neg]));
    assert_eq!(x_at(&r.views, neg_abs::MERGE), signs(&[Zero, Pos]));
    assert_eq!(x_at(&r.views, neg_abs::EXIT), signs(&[Neg, Zero]));
}

#[test]
fn insensitive_union() {
    let r = analyze_abstract(&neg_abs_program(), &init(&[Neg]), &AnalysisSettings::new(Domain::Sign)).unwrap();
    assert_eq!(union_of_var(&r.views, Domain::Sign, "x"), signs(&[Neg, Pos]));
}

#[test]
fn zero_runs_through() {
    let r = with_policy(&[Zero], ShortcutPolicy::EveryView);
    let taken: Vec<_> = r.taken().collect();
    assert_eq!(taken.len(), 1);
    assert_eq!(taken[0].start_view, neg_abs::TEST);
    assert_eq!(taken[0].end_view, neg_abs::EXIT);
    assert_eq!(taken[0].omega_count, 0);
    assert_eq!(x_at(&r.views, neg_abs::EXIT), signs(&[Zero]));
    assert_eq!(r.metrics.abstract_transitions, 0);
}

#[test]
fn positive_stops_at_negation() {
    let r = with_policy(&[Pos], ShortcutPolicy::EveryView);
    let taken: Vec<_> = r.taken().collect();
    assert_eq!(taken.len(), 1);
    assert_eq!(taken[0].start_view, neg_abs::THEN);
    assert_eq!(taken[0].end_view, neg_abs::MERGE);
    assert_eq!(
        taken[0].outcome,
        dynshort::shortcut::EventOutcome::Taken { terminal: "sealed_access" }
    );
    assert_eq!(x_at(&r.views, neg_abs::EXIT), signs(&[Neg]));
}

#[test]
fn all_integers_join_at_merge() {
    let r = with_policy(&[Neg, Zero, Pos], ShortcutPolicy::EveryView);
    let first = r.taken().next().unwrap();
    assert_eq!((first.start_view, first.end_view), (neg_abs::THEN, neg_abs::MERGE));
    let pair = &r.sealed_runs[0];
    assert_eq!(pair.imap.values.len(), 1);
    assert_eq!(pair.imap.values.values().next(), Some(&signs(&[Zero, Pos])));
    assert_eq!(x_at(&r.views, neg_abs::MERGE), signs(&[Zero, Pos]));
    assert_eq!(x_at(&r.views, neg_abs::EXIT), signs(&[Neg, Zero]));
    // The else branch is analysed abstractly.
    assert!(r.metrics.abstract_transitions > 0);
}

#[test]
fn off_policy_reproduces_table() {
    let r = with_policy(&[Neg, Zero, Pos], ShortcutPolicy::Off);
    let a = analyze_abstract(&neg_abs_program(), &init(&[Neg, Zero, Pos]), &AnalysisSettings::new(Domain::Sign))
        .unwrap();
    assert_eq!(r.views, a.views);
}

#[test]
fn concrete_trace() {
    let p = neg_abs_program();
    let run = run_concrete(&p, ConcreteState::initial(&p, [("x".to_string(), Value::int(-42))]), 100);
    assert_eq!(run.outcome, Outcome::Halt(Value::int(-42)));
    let seen: Vec<(Label, Value)> = run
        .trace
        .iter()
        .map(|s| (s.label, s.top_var("x").cloned().unwrap()))
        .collect();
    let expected = [
        (neg_abs::TEST, -42),
        (neg_abs::ELSE, -42),
        (neg_abs::JUMP, 42),
        (neg_abs::MERGE, 42),
        (neg_abs::EXIT, -42),
    ];
    assert_eq!(
        seen,
        expected.iter().map(|(l, x)| (*l, Value::int(*x))).collect::<Vec<_>>()
    );
}

#[test]
fn shortcuts_gain_precision() {
    // Without refinement the analysis cannot see through add then sub.
    let p = parse_program("0: x = add(x, 1)\n1: x = sub(x, 1)\n2: ret x").unwrap();
    let init = entry_views(&p, [("x".to_string(), signs(&[Zero]))]);
    let settings = AnalysisSettings::new(Domain::Sign);
    let off = analyze_abstract(&p, &init, &settings).unwrap();
    let ds = analyze_with_shortcuts(&p, &init, ShortcutPolicy::EveryView, Budgets::default(), &settings).unwrap();
    assert_eq!(x_at(&off.views, Label(2)), signs(&[Neg, Zero, Pos]));
    assert_eq!(x_at(&ds.views, Label(2)), signs(&[Zero]));
    let report = compare_precision(&ds.views, &off.views).unwrap();
    assert_eq!(report.per_view[&Label(2)], Verdict::Less);
}

#[test]
fn self_loop_falls_back() {
    let p = parse_program(&format!("0: x = 1\n{}", SELF_LOOP_SOURCE.replace('0', "1"))).unwrap();
    let init = entry_views(&p, []);
    let settings = AnalysisSettings::new(Domain::Sign);
    let budgets = Budgets {
        max_steps: 2000,
        ..Budgets::default()
    };
    let off = analyze_abstract(&p, &init, &settings).unwrap();
    let r = analyze_with_shortcuts(&p, &init, ShortcutPolicy::EveryView, budgets, &settings).unwrap();
    assert!(r
        .shortcuts
        .iter()
        .any(|e| e.outcome == dynshort::shortcut::EventOutcome::BudgetReverted));
    assert_eq!(r.views, off.views);
}

#[test]
fn inc_cases() {
    let p = dynshort::examples::straight_line_source(10);
    let p = parse_program(&p).unwrap();
    let labels: Vec<Label> = p.labels().collect();
    assert_eq!(labels.len(), 10);
    for a in &labels {
        let a = AbsAddr::Site(*a);
        for (from, to) in [(Count::Zero, Count::One), (Count::One, Count::Many), (Count::Many, Count::Many)] {
            let mut c = AbsCounter::new();
            for (i, b) in labels.iter().enumerate() {
                c.set(AbsAddr::Site(*b), [Count::Zero, Count::One, Count::Many][i % 3]);
            }
            c.set(a, from);
            let d = inc(&c, a);
            assert_eq!(d.get(a), to);
            for b in &labels {
                let b = AbsAddr::Site(*b);
                if b != a {
                    assert_eq!(d.get(b), c.get(b));
                }
            }
            assert_eq!(d.get(AbsAddr::Top), c.get(AbsAddr::Top));
        }
    }
}

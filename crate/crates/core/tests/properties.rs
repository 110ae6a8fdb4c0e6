use std::collections::BTreeSet;

use proptest::prelude::*;

use dynshort::concrete::{apply_op, type_name, Value};
use dynshort::domain::{
    abstract_apply_op, gamma_value, AbsValue, Domain, Gamma, Prims, Sign, SignSet, Strs,
};
use dynshort::interp::{analyze_abstract, AnalysisSettings};
use dynshort::lang::{format_program, parse_program, Label, OpName, Primitive};
use dynshort::oracle::{covers, generate_program, Shape};
use dynshort::sealed::{gamma_imap, instantiate, sealed_step, Budgets, SealedStep};
use dynshort::shortcut::{
    analyze_with_shortcuts, combined_fixpoint, reform, seal, unseal, CombinedState, ShortcutPolicy,
};

const CAP: i64 = 3;

fn sign_set() -> impl Strategy<Value = SignSet> {
    prop::collection::vec(prop_oneof![Just(Sign::Neg), Just(Sign::Zero), Just(Sign::Pos)], 0..3)
        .prop_map(|v| SignSet::of(&v))
}

fn strs() -> impl Strategy<Value = Strs> {
    prop_oneof![
        4 => prop::collection::btree_set(prop_oneof![Just("a"), Just("b"), Just("ab"), Just("0")], 0..3)
            .prop_map(|s| Strs::Set(s.into_iter().map(String::from).collect())),
        1 => Just(Strs::Top),
    ]
}

fn prims(domain: Domain) -> BoxedStrategy<Prims> {
    let ints: BoxedStrategy<Prims> = match domain {
        Domain::Sign => sign_set().prop_map(Prims::of_signs).boxed(),
        Domain::KSet(_) => prop::collection::vec(-3i64..=3, 0..6)
            .prop_map(move |v| Prims::of_ints(domain, v))
            .boxed(),
    };
    (ints, strs(), any::<bool>(), any::<bool>(), any::<bool>())
        .prop_map(move |(i, s, t, f, u)| {
            let mut p = i.join(&Prims::of_strs(domain, s)).join(&Prims::of_bools(domain, t, f));
            if u {
                p.add(&Primitive::Undef);
            }
            p
        })
        .boxed()
}

fn value(domain: Domain) -> impl Strategy<Value = AbsValue> {
    (
        prims(domain),
        prop::collection::btree_set(0u32..3, 0..2),
        prop::collection::btree_set(0u32..2, 0..2),
    )
        .prop_map(|(p, addrs, funcs)| {
            let mut v = AbsValue::from_prims(p);
            v.addrs = addrs.into_iter().map(Label).collect();
            for b in funcs {
                v.join_in(&AbsValue::func(v.domain(), "a", Label(b)));
            }
            v
        })
}

fn domain() -> impl Strategy<Value = Domain> {
    prop_oneof![Just(Domain::Sign), Just(Domain::KSet(4))]
}

fn two_values() -> impl Strategy<Value = (AbsValue, AbsValue, AbsValue)> {
    domain().prop_flat_map(|d| (value(d), value(d), value(d)))
}

/// Finite-primitive values: enumerable under the cap.
fn finite_value(domain: Domain) -> impl Strategy<Value = AbsValue> {
    prims(domain).prop_filter_map("enumerable", |p| {
        let v = AbsValue::from_prims(p);
        matches!(gamma_value(&v, CAP), Gamma::Values(_)).then_some(v)
    })
}

const OPS: [OpName; 15] = [
    OpName::Add,
    OpName::Sub,
    OpName::Mul,
    OpName::Neg,
    OpName::Lt,
    OpName::Le,
    OpName::Gt,
    OpName::Ge,
    OpName::Eq,
    OpName::Not,
    OpName::And,
    OpName::Or,
    OpName::Concat,
    OpName::Num2Str,
    OpName::Typeof,
];

fn op_case() -> impl Strategy<Value = (OpName, Vec<AbsValue>)> {
    (domain(), prop::sample::select(&OPS[..]))
        .prop_flat_map(|(d, op)| (Just(op), prop::collection::vec(finite_value(d), op.arity())))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn join_is_a_semilattice((a, b, c) in two_values()) {
        prop_assert_eq!(a.join(&b), b.join(&a));
        prop_assert_eq!(a.join(&b).join(&c), a.join(&b.join(&c)));
        prop_assert_eq!(a.join(&a), a.clone());
        prop_assert!(a.leq(&a.join(&b)));
        prop_assert_eq!(a.leq(&b), a.join(&b) == b);
        prop_assert_eq!(a.join(&AbsValue::bottom(a.domain())), a.clone());
    }

    #[test]
    fn gamma_is_monotone((a, b, _) in two_values()) {
        let j = a.join(&b);
        if let (Gamma::Values(xs), Gamma::Values(ys)) = (gamma_value(&a, CAP), gamma_value(&j, CAP)) {
            let ys: BTreeSet<_> = ys.into_iter().collect();
            for x in xs {
                prop_assert!(ys.contains(&x));
            }
        }
    }

    #[test]
    fn ops_are_sound((op, args) in op_case()) {
        let out = abstract_apply_op(op, &args);
        let gammas: Vec<Vec<Value>> = args.iter().map(|a| gamma_value(a, CAP).values().unwrap()).collect();
        let mut tuples: Vec<Vec<Value>> = vec![Vec::new()];
        for g in &gammas {
            tuples = tuples
                .into_iter()
                .flat_map(|t| g.iter().map(move |v| { let mut t = t.clone(); t.push(v.clone()); t }))
                .collect();
        }
        for t in tuples {
            let r = if op == OpName::Typeof { Ok(Value::str(type_name(&t[0]))) } else { apply_op(op, &t) };
            if let Ok(v) = r {
                prop_assert!(out.contains(&v), "{op}({:?}) = {v} not in {out}", t);
            }
        }
    }

    #[test]
    fn parse_format_round_trip(seed in 0u64..5000, kset in any::<bool>()) {
        let d = if kset { Domain::KSet(4) } else { Domain::Sign };
        let (p, _) = generate_program(seed, Shape::default(), d);
        let text = format_program(&p);
        let q = parse_program(&text).unwrap();
        prop_assert_eq!(&q, &p);
        prop_assert_eq!(format_program(&q), text);
    }

    #[test]
    fn seal_unseal_round_trip(seed in 0u64..5000, kset in any::<bool>()) {
        let d = if kset { Domain::KSet(4) } else { Domain::Sign };
        let (p, init) = generate_program(seed, Shape::default(), d);
        let settings = AnalysisSettings::new(d);
        let r = analyze_abstract(&p, &init, &settings).unwrap();
        for policy in [ShortcutPolicy::EveryView, ShortcutPolicy::FunctionLevel] {
            for (l, s) in &r.views {
                let Ok(pair) = seal(&p, *l, s, policy, d) else { continue };
                let (l2, back) = unseal(&pair, &pair.state);
                prop_assert_eq!(l2, *l);
                prop_assert_eq!(&back, s);
                // Every instantiation of the sealed state is described by
                // the original view.
                if let Gamma::Values(ms) = gamma_imap(&pair.imap, CAP, 64) {
                    for m in ms {
                        let c = instantiate(&pair.state, &m).unwrap();
                        prop_assert!(covers(s, &c).is_ok(), "{:?}", covers(s, &c));
                    }
                }
            }
        }
    }

    #[test]
    fn reformed_pairs_can_step(seed in 0u64..5000) {
        let (p, init) = generate_program(seed, Shape::default(), Domain::Sign);
        let settings = AnalysisSettings::new(Domain::Sign);
        let r = analyze_abstract(&p, &init, &settings).unwrap();
        let c = CombinedState::from_views(r.views);
        let reformed = reform(&p, &c, ShortcutPolicy::EveryView, Budgets::default(), &settings).unwrap();
        for pair in &reformed.sealed {
            prop_assert!(matches!(sealed_step(&p, &pair.state), SealedStep::Next(_)));
        }
        // Reform never loses coverage.
        let before = c.covering_views().unwrap();
        let after = reformed.covering_views().unwrap();
        for (l, s) in &before {
            prop_assert!(after.get(l).is_some_and(|t| s.leq(t)), "view {l}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn driver_matches_reference_fixpoint(seed in 0u64..5000, function_level in any::<bool>()) {
        let policy = if function_level { ShortcutPolicy::FunctionLevel } else { ShortcutPolicy::EveryView };
        let (p, init) = generate_program(seed, Shape::default(), Domain::Sign);
        let settings = AnalysisSettings::new(Domain::Sign);
        let fast = analyze_with_shortcuts(&p, &init, policy, Budgets::default(), &settings).unwrap();
        let (c, _) = combined_fixpoint(&p, &init, policy, Budgets::default(), &settings).unwrap();
        prop_assert_eq!(fast.views, c.covering_views().unwrap());
    }
}

use dynshort::domain::Domain;
use dynshort::interp::{analyze_abstract, AnalysisSettings};
use dynshort::lang::format_program;
use dynshort::oracle::{check_run_validity, check_soundness, generate_program, OracleCaps, Shape, SoundnessReport, ValidityReport};
use dynshort::sealed::Budgets;
use dynshort::shortcut::{analyze_with_shortcuts, ShortcutPolicy};

fn caps() -> OracleCaps {
    OracleCaps {
        int_cap: 4,
        ..OracleCaps::default()
    }
}

fn sweep(domain: Domain, seeds: std::ops::Range<u64>) {
    let settings = AnalysisSettings::new(domain);
    let mut sound = SoundnessReport::default();
    let mut valid = ValidityReport::default();
    let mut taken = 0;
    for seed in seeds {
        let (p, init) = generate_program(seed, Shape::default(), domain);
        let off = analyze_abstract(&p, &init, &settings).unwrap();
        for policy in [ShortcutPolicy::Off, ShortcutPolicy::EveryView, ShortcutPolicy::FunctionLevel] {
            let r = analyze_with_shortcuts(&p, &init, policy, Budgets::default(), &settings).unwrap();
            if policy == ShortcutPolicy::Off {
                assert_eq!(r.views, off.views, "seed {seed}");
            }
            let rep = check_soundness(&p, &r.views, &init, &caps());
            if !rep.passed() {
                eprintln!("seed {seed} {policy:?}\n{}\n{:#?}", format_program(&p), rep.violations[0]);
            }
            sound.merge(rep);
            for pair in &r.sealed_runs {
                taken += 1;
                let v = check_run_validity(&p, pair, &caps(), 64);
                if !v.passed() {
                    eprintln!("seed {seed} {policy:?}\n{}\n{:?}", format_program(&p), v.failures);
                }
                valid.merge(v);
            }
        }
    }
    eprintln!(
        "{domain}: states {} violations {} skipped {} | runs {taken} next {} bot {} vskip {} vfail {}",
        sound.states_checked,
        sound.violations.len(),
        sound.skipped.len(),
        valid.next_confirmed,
        valid.bot_justified,
        valid.skipped.len(),
        valid.failures.len()
    );
    assert!(sound.passed());
    assert!(valid.passed());
}

#[test]
fn generated_sign() {
    sweep(Domain::Sign, 0..200);
}

#[test]
fn generated_kset() {
    sweep(Domain::KSet(4), 1000..1200);
}

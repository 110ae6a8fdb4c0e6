use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde_json::{json, Value as Json};

use crate::domain::{AbsState, Domain, DomainError};
use crate::interp::ViewMap;
use crate::lang::Label;

use super::{EventOutcome, ShortcutEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Verdict {
    Equal,
    /// The first map is strictly more precise here.
    Less,
    Greater,
    Incomparable,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Equal => "equal",
            Verdict::Less => "less",
            Verdict::Greater => "greater",
            Verdict::Incomparable => "incomparable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrecisionReport {
    pub per_view: BTreeMap<Label, Verdict>,
}

impl PrecisionReport {
    pub fn count(&self, v: Verdict) -> usize {
        self.per_view.values().filter(|x| **x == v).count()
    }

    pub fn all_equal(&self) -> bool {
        self.per_view.values().all(|v| *v == Verdict::Equal)
    }

    pub fn to_json(&self) -> Json {
        let per_view: serde_json::Map<String, Json> = self
            .per_view
            .iter()
            .map(|(l, v)| (l.0.to_string(), json!(v.name())))
            .collect();
        json!({
            "per_view": per_view,
            "equal": self.count(Verdict::Equal),
            "less": self.count(Verdict::Less),
            "greater": self.count(Verdict::Greater),
            "incomparable": self.count(Verdict::Incomparable),
        })
    }
}

fn domain_of(views: &ViewMap) -> Option<Domain> {
    views
        .values()
        .flat_map(|s| s.memory.values())
        .map(|v| v.domain())
        .next()
}

fn leq(a: Option<&AbsState>, b: Option<&AbsState>) -> bool {
    match (a, b) {
        (None, _) => true,
        (Some(_), None) => false,
        (Some(a), Some(b)) => a.leq(b),
    }
}

/// View-by-view comparison; a missing view is bottom.
pub fn compare_precision(a: &ViewMap, b: &ViewMap) -> Result<PrecisionReport, DomainError> {
    if let (Some(x), Some(y)) = (domain_of(a), domain_of(b)) {
        if x != y {
            return Err(DomainError::DomainMismatch { left: x, right: y });
        }
    }
    let labels: BTreeSet<Label> = a.keys().chain(b.keys()).copied().collect();
    let per_view = labels
        .into_iter()
        .map(|l| {
            let (x, y) = (a.get(&l), b.get(&l));
            let v = match (leq(x, y), leq(y, x)) {
                (true, true) => Verdict::Equal,
                (true, false) => Verdict::Less,
                (false, true) => Verdict::Greater,
                (false, false) => Verdict::Incomparable,
            };
            (l, v)
        })
        .collect();
    Ok(PrecisionReport { per_view })
}

/// DOT rendering of the shortcut events: one edge per attempted run.
pub fn shortcut_graph_dot(events: &[ShortcutEvent]) -> String {
    let mut out = String::from("digraph shortcuts {\n  rankdir=LR;\n");
    for e in events {
        let (style, label) = match &e.outcome {
            EventOutcome::Taken { terminal } => ("solid", format!("{} steps, {terminal}", e.steps)),
            EventOutcome::BudgetReverted => ("dashed", format!("reverted after {}", e.steps)),
            EventOutcome::NotApplicable(_) => continue,
        };
        let _ = writeln!(
            out,
            "  \"{}\" -> \"{}\" [style={style}, label=\"{label}\"];",
            e.start_view, e.end_view
        );
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AbsValue, Prims, Sign, SignSet};

    fn view(s: &[Sign]) -> AbsState {
        AbsState::entry([("x".to_string(), AbsValue::from_prims(Prims::of_signs(SignSet::of(s))))])
    }

    #[test]
    fn verdicts() {
        use Sign::*;
        let a = ViewMap::from([(Label(0), view(&[Zero])), (Label(1), view(&[Neg]))]);
        let b = ViewMap::from([(Label(0), view(&[Zero, Pos])), (Label(1), view(&[Pos]))]);
        let r = compare_precision(&a, &b).unwrap();
        assert_eq!(r.per_view[&Label(0)], Verdict::Less);
        assert_eq!(r.per_view[&Label(1)], Verdict::Incomparable);
        assert!(compare_precision(&a, &a).unwrap().all_equal());
        let r = compare_precision(&ViewMap::new(), &a).unwrap();
        assert_eq!(r.count(Verdict::Less), 2);
    }

    #[test]
    fn domain_mismatch() {
        let a = ViewMap::from([(Label(0), view(&[Sign::Zero]))]);
        let b = ViewMap::from([(
            Label(0),
            AbsState::entry([("x".to_string(), AbsValue::from_prims(Prims::of_ints(Domain::KSet(4), [0])))]),
        )]);
        assert!(matches!(compare_precision(&a, &b), Err(DomainError::DomainMismatch { .. })));
    }
}

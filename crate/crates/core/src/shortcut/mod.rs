//! The combined domain: abstract views plus sealed runs started from them.

mod convert;
mod engine;
mod precision;

use std::fmt;
use std::str::FromStr;

use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::interp::{views_to_json, ViewMap};
use crate::lang::Label;

pub use convert::{seal, unseal, NotApplicable, Residue, SealedPair};
pub use engine::{
    analyze_with_shortcuts, combined_fixpoint, combined_step, reform, reform_elem,
    AnalysisElement, CombinedState,
};
pub use precision::{compare_precision, shortcut_graph_dot, PrecisionReport, Verdict};

/// Where the analysis may try to seal a view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ShortcutPolicy {
    Off,
    EveryView,
    /// Only at function-body entries, sealing the return continuation.
    FunctionLevel,
}

impl fmt::Display for ShortcutPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShortcutPolicy::Off => "off",
            ShortcutPolicy::EveryView => "every-view",
            ShortcutPolicy::FunctionLevel => "function",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown policy {0:?} (expected off, every-view or function)")]
pub struct BadPolicy(pub String);

impl FromStr for ShortcutPolicy {
    type Err = BadPolicy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "off" => Ok(ShortcutPolicy::Off),
            "every-view" => Ok(ShortcutPolicy::EveryView),
            "function" => Ok(ShortcutPolicy::FunctionLevel),
            _ => Err(BadPolicy(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventOutcome {
    /// The sealed run ended by ⊥; carries the terminal kind.
    Taken { terminal: &'static str },
    NotApplicable(NotApplicable),
    /// The run exceeded its budget and the view fell back to the abstract
    /// transition.
    BudgetReverted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShortcutEvent {
    pub start_view: Label,
    pub end_view: Label,
    pub steps: usize,
    pub outcome: EventOutcome,
    pub omega_count: usize,
}

impl ShortcutEvent {
    pub fn is_taken(&self) -> bool {
        matches!(self.outcome, EventOutcome::Taken { .. })
    }

    pub fn to_json(&self) -> Json {
        let mut j = json!({
            "start_view": self.start_view.0,
            "end_view": self.end_view.0,
            "steps": self.steps,
            "omega_count": self.omega_count,
        });
        let (outcome, detail) = match &self.outcome {
            EventOutcome::Taken { terminal } => ("taken", json!({ "terminal": terminal })),
            EventOutcome::NotApplicable(r) => ("not-applicable", json!({ "reason": r.tag() })),
            EventOutcome::BudgetReverted => ("budget-reverted", json!({})),
        };
        j["outcome"] = json!(outcome);
        if let Json::Object(m) = detail {
            for (k, v) in m {
                j[k] = v;
            }
        }
        j
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Metrics {
    /// View transitions evaluated by the abstract semantics.
    pub abstract_transitions: u64,
    pub sealed_steps: u64,
    pub shortcuts_taken: u64,
}

impl Metrics {
    pub fn to_json(&self) -> Json {
        json!({
            "abstract_transitions": self.abstract_transitions,
            "sealed_steps": self.sealed_steps,
            "shortcuts_taken": self.shortcuts_taken,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ShortcutResult {
    /// Abstract views joined with every state the sealed runs passed through.
    pub views: ViewMap,
    pub shortcuts: Vec<ShortcutEvent>,
    pub iterations: usize,
    pub metrics: Metrics,
    /// The sealed pairs whose runs were taken, as sealed.
    pub sealed_runs: Vec<SealedPair>,
}

impl ShortcutResult {
    pub fn taken(&self) -> impl Iterator<Item = &ShortcutEvent> {
        self.shortcuts.iter().filter(|e| e.is_taken())
    }

    pub fn to_json(&self) -> Json {
        json!({
            "views": views_to_json(&self.views),
            "shortcuts": self.shortcuts.iter().map(ShortcutEvent::to_json).collect::<Vec<_>>(),
            "iterations": self.iterations,
            "metrics": self.metrics.to_json(),
        })
    }
}

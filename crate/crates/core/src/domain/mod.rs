//! Lattices for the abstract semantics: primitive base domains, abstract
//! values, counters, contexts and per-view states.

mod gamma;
mod ops;
mod prims;
mod state;
mod value;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use gamma::{gamma_value, gamma_value_with, Gamma, DEFAULT_INT_CAP};
pub use ops::{abstract_apply_op, refine_comparison};
pub use prims::{Ints, Prims, Sign, SignSet, Strs};
pub use state::{
    inc, mem_update, AbsAddr, AbsContext, AbsCounter, AbsFrame, AbsLoc, AbsMemory, AbsState,
    Count,
};
pub use value::{AbsValue, Func, Singleton};

/// The finite-height base domain for primitives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Domain {
    /// Integers as subsets of {-, 0, +}; strings as bounded sets.
    Sign,
    /// Every primitive type as a set of at most `k` elements, else top.
    KSet(usize),
}

impl Domain {
    pub const DEFAULT_K: usize = 4;
    /// String set bound used alongside the sign domain.
    pub const SIGN_STR_BOUND: usize = 4;

    pub fn str_bound(self) -> usize {
        match self {
            Domain::Sign => Domain::SIGN_STR_BOUND,
            Domain::KSet(k) => k,
        }
    }

    /// Whether branch refinement is on unless configured otherwise.
    pub fn refines_by_default(self) -> bool {
        matches!(self, Domain::Sign)
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Sign => f.write_str("sign"),
            Domain::KSet(k) => write!(f, "kset:{k}"),
        }
    }
}

impl FromStr for Domain {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Domain, DomainError> {
        match s {
            "sign" => Ok(Domain::Sign),
            "kset" => Ok(Domain::KSet(Domain::DEFAULT_K)),
            _ => {
                let k = s
                    .strip_prefix("kset:")
                    .and_then(|k| k.parse::<usize>().ok())
                    .filter(|&k| k >= 1)
                    .ok_or_else(|| DomainError::BadDomain(s.to_string()))?;
                Ok(Domain::KSet(k))
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DomainError {
    #[error("domain mismatch: {left} vs {right}")]
    DomainMismatch { left: Domain, right: Domain },
    #[error("environment mismatch: {left} vs {right}")]
    EnvMismatch { left: AbsAddr, right: AbsAddr },
    #[error("unknown domain {0:?} (expected `sign` or `kset:<k>`)")]
    BadDomain(String),
    #[error("malformed abstract value: {0}")]
    Json(String),
}

/// A generous static bound on the length of strictly ascending chains of
/// view maps for `program`. Used to sanity-check fixpoint iteration counts.
pub fn height_bound(program: &crate::lang::Program, domain: Domain) -> u64 {
    let views = program.len() as u64;
    let entries = program.function_entries().len() as u64;
    let idents = program.identifiers().len() as u64;
    let sites = views;
    let k = domain.str_bound() as u64;
    let keys = program.string_literals().len() as u64 + (program.string_builders() as u64 + 1) * k;
    let int_height = match domain {
        Domain::Sign => 3,
        Domain::KSet(k) => k as u64 + 1,
    };
    let value_height = int_height + k + 1 + 2 + 1 + sites + entries;
    let locs = (entries + 1) * idents + sites * keys;
    let frames = entries * views * (1 + locs);
    let per_state = locs
        .saturating_mul(value_height)
        .saturating_add(frames)
        .saturating_add(2 * (sites + 1))
        .saturating_add(1);
    views.saturating_mul(per_state).saturating_add(1)
}

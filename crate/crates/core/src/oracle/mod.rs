//! Brute-force referees for the analyzers: soundness against concrete
//! runs, validity of sealed steps against instantiated concrete steps, and
//! a small random program generator to feed both.

mod generate;
mod soundness;
mod validity;

pub use generate::{generate_program, Shape};
pub use soundness::{check_soundness, covers, enumerate_initial_states, InitialStates, SoundnessReport, Violation};
pub use validity::{check_validity, check_run_validity, instantiation_probes, ValidityOutcome, ValidityReport};

use crate::domain::DEFAULT_INT_CAP;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleCaps {
    /// Sign elements enumerate integers in `[-int_cap, int_cap]`.
    pub int_cap: i64,
    pub max_instantiations: usize,
    /// Step budget for each concrete run.
    pub step_budget: usize,
    pub max_initial_states: usize,
}

impl Default for OracleCaps {
    fn default() -> Self {
        OracleCaps {
            int_cap: DEFAULT_INT_CAP,
            max_instantiations: 64,
            step_budget: 10_000,
            max_initial_states: 64,
        }
    }
}

//! Flow-sensitive abstract interpretation of a small JavaScript-like core
//! language, with dynamic shortcuts: abstract states are sealed into
//! concrete-shaped states, executed concretely while no sealed value is
//! inspected, and unsealed back into the analysis.

pub mod examples;
pub mod lang;
pub mod concrete;
pub mod domain;
pub mod interp;
pub mod sealed;
pub mod shortcut;
pub mod oracle;

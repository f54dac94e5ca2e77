//! Front end of the `safelane` binary.
//!
//! Exit codes: 0 when every check passes, 1 when a counterexample or
//! violation is found, 2 on usage or configuration errors.

pub mod commands;
pub mod crossval;
pub mod output;
pub mod scenario;

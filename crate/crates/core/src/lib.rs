//! Semantics-preserving SQL injection payload mutation, black-box search
//! against detectors, an execution oracle and a campaign harness.

pub mod detectors;
pub mod grammar;
pub mod harness;
pub mod mutation;
pub mod oracle;
pub mod payload;
pub mod search;

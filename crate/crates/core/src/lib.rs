//! Verification of global robustness and global fairness for logic gate
//! networks by reduction to SAT.
//!
//! A network and a similarity predicate over pairs of binarized inputs are
//! lowered to CNF ([`property::build_query`]); an external DIMACS solver
//! decides the query ([`solver`]); [`driver`] runs fixed-threshold checks,
//! the binary search for the smallest safe confidence threshold and the
//! attainability check. [`eval`] holds the concrete semantics and the
//! exhaustive oracles the encoding is tested against.

pub mod cnf;
pub mod data;
pub mod driver;
pub mod error;
pub mod eval;
pub mod kappa;
pub mod netlist;
pub mod property;
pub mod schema;
pub mod solver;

#[cfg(test)]
mod testsat;

pub use error::{Error, Result};
pub use eval::{Mode, Status, Verdict};
pub use kappa::Kappa;
pub use netlist::Netlist;
pub use schema::FeatureSchema;

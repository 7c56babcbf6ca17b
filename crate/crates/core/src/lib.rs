//! Confluence analysis for Constraint Handling Rules programs.
//!
//! The library computes the critical peaks of a program under the
//! equivalence-based operational semantics, searches for joining valleys
//! and checks them against local confluence, strong confluence,
//! decreasingness with respect to a rule order, and modularity.

pub mod analysis;
pub mod cli;
pub mod engine;
pub mod orders;
pub mod peaks;
pub mod state;
pub mod syntax;
pub mod terms;

//! Interleaving search with exact scheduling-cost accounting.
//!
//! The crate executes relational programs step by step under the reference
//! transition system of interleaving search, counts the number of visited
//! states (`d`) and the scheduling factor (`t`, the summed leftmost heights),
//! extracts symbolic execution schemes of relation bodies, and evaluates the
//! cost factors derived from them.

pub mod bench;
pub mod engine;
pub mod factors;
pub mod goal;
pub mod measures;
pub mod parse;
pub mod programs;
pub mod scheme;
pub mod term;

pub use engine::{init, run, EngineConfig, Env, Label, State, TraceStats};
pub use goal::{Goal, Query, RelId, Spec};
pub use parse::{parse_goal, parse_program};
pub use term::{Substitution, Term, Var};

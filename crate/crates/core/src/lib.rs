//! Compilation forking for a small dynamically compiled language.
//!
//! Hot functions are compiled into several versions that differ in one loop
//! decision, run alternately while their self time is measured, and the
//! measurements become datasets for learned heuristics.

pub mod analysis;
pub mod corpus;
pub mod dataset;
pub mod features;
pub mod forking;
pub mod lang;
pub mod loopopts;
pub mod runtime;
pub mod session;
pub mod selftime;

pub use lang::{parse, FunctionIR, LoopId, NodeId, NodeKind, Program, Value};
pub use runtime::{Clock, ClockMode, Profiles};

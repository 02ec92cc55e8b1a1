//! Shared setup for the criterion benches.

use forklab_core::corpus::{self, Driver};
use forklab_core::Program;

/// Parses a corpus program and its driver. Panics on unknown names.
pub fn load(name: &str) -> (Program, Driver) {
    let p = corpus::program(name).unwrap_or_else(|| panic!("no corpus program {name}"));
    let program = forklab_core::parse(p.source).expect("corpus parses");
    let driver = Driver::from_source(p.source).expect("corpus driver");
    (program, driver)
}

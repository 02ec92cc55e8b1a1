//! MiniLang: source language, structured IR and IR analyses.

pub mod analysis;
pub mod ast;
pub mod parser;
pub mod printer;

pub use analysis::{
    census_of, deep_copy, detect_counted, find_loops, fingerprint, node_census, serialize,
    AnalysisError, Bound, Census, CensusScope, CountedInfo, LoopInfo,
};
pub use ast::*;
pub use parser::{parse, ParseError};
pub use printer::{print_function, print_program};

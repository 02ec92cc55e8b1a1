//! Bundled MiniLang programs and their driver directives.
//!
//! A program names its entry point and argument ranges in `//!` comments:
//!
//! ```text
//! //! entry: main
//! //! args: 0..40, 1..5
//! ```

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::lang::Value;

#[derive(Clone, Copy, Debug)]
pub struct CorpusProgram {
    pub name: &'static str,
    pub source: &'static str,
}

macro_rules! program {
    ($name:literal) => {
        CorpusProgram {
            name: $name,
            source: include_str!(concat!("../../../corpus/", $name, ".ml")),
        }
    };
}

pub const CORPUS: &[CorpusProgram] = &[
    program!("bubble"),
    program!("calls"),
    program!("collatz"),
    program!("fib"),
    program!("floats"),
    program!("guard"),
    program!("loops"),
    program!("matmul"),
    program!("safepoints"),
    program!("sieve"),
    program!("stencil"),
];

pub fn program(name: &str) -> Option<&'static CorpusProgram> {
    CORPUS.iter().find(|p| p.name == name)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DriverError {
    #[error("line {line}: {message}")]
    Directive { line: usize, message: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Driver {
    pub entry: String,
    /// Half-open integer range per entry argument.
    pub args: Vec<Range<i64>>,
}

impl Default for Driver {
    fn default() -> Self {
        Driver {
            entry: "main".to_string(),
            args: Vec::new(),
        }
    }
}

fn range(text: &str) -> Option<Range<i64>> {
    let (lo, hi) = text.trim().split_once("..")?;
    let r = lo.trim().parse().ok()?..hi.trim().parse().ok()?;
    (r.start < r.end).then_some(r)
}

impl Driver {
    /// Reads `//!` directives; unknown keys are errors.
    pub fn from_source(source: &str) -> Result<Driver, DriverError> {
        let mut d = Driver::default();
        for (i, line) in source.lines().enumerate() {
            let Some(rest) = line.trim_start().strip_prefix("//!") else { continue };
            let err = |message: String| DriverError::Directive { line: i + 1, message };
            let (key, value) = rest
                .split_once(':')
                .ok_or_else(|| err(format!("expected `key: value`, found `{}`", rest.trim())))?;
            match key.trim() {
                "entry" => d.entry = value.trim().to_string(),
                "args" => {
                    d.args = value
                        .split(',')
                        .filter(|s| !s.trim().is_empty())
                        .map(|s| range(s).ok_or_else(|| err(format!("bad range `{}`", s.trim()))))
                        .collect::<Result<_, _>>()?;
                }
                other => return Err(err(format!("unknown directive `{other}`"))),
            }
        }
        Ok(d)
    }

    /// `count` argument vectors drawn from the declared ranges.
    pub fn arg_vectors(&self, seed: u64, count: usize) -> Vec<Vec<Value>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| self.args.iter().map(|r| Value::Int(rng.gen_range(r.clone()))).collect())
            .collect()
    }
}

//! The forkable loop phases and the fixed pre-fork canonicalization.

mod canonicalize;
mod transforms;

pub use canonicalize::canonicalize;
pub use transforms::{peel, unroll};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{FunctionIR, LoopId};

pub const UNROLL_FACTORS: [u32; 5] = [2, 4, 8, 16, 32];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error("function has no loop {0}")]
    InvalidLoop(LoopId),
    #[error("loop {0} is not a counted loop")]
    NotCounted(LoopId),
    #[error("unroll factor {0} is not one of 1, 2, 4, 8, 16, 32")]
    InvalidFactor(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Peel,
    Unroll,
}

impl Phase {
    /// Parameter values explored by non-baseline forks.
    pub fn fork_params(self) -> &'static [u32] {
        match self {
            Phase::Peel => &[1],
            Phase::Unroll => &UNROLL_FACTORS,
        }
    }

    /// Parameter meaning "leave the loop alone".
    pub fn identity_param(self) -> u32 {
        match self {
            Phase::Peel => 0,
            Phase::Unroll => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::Peel => "peel",
            Phase::Unroll => "unroll",
        }
    }

    /// Applies the decision `param` for `loop_id`.
    pub fn apply(self, f: &FunctionIR, loop_id: LoopId, param: u32) -> Result<FunctionIR, TransformError> {
        match self {
            Phase::Peel => PeelDecision {
                loop_id,
                apply: param != 0,
            }
            .apply(f),
            Phase::Unroll => UnrollDecision { loop_id, factor: param }.apply(f),
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "peel" => Ok(Phase::Peel),
            "unroll" => Ok(Phase::Unroll),
            other => Err(format!("unknown phase `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PeelDecision {
    pub loop_id: LoopId,
    pub apply: bool,
}

impl PeelDecision {
    pub fn apply(&self, f: &FunctionIR) -> Result<FunctionIR, TransformError> {
        if self.apply {
            peel(f, self.loop_id)
        } else if f.find_loop(self.loop_id).is_none() {
            Err(TransformError::InvalidLoop(self.loop_id))
        } else {
            Ok(f.clone())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UnrollDecision {
    pub loop_id: LoopId,
    pub factor: u32,
}

impl UnrollDecision {
    pub fn apply(&self, f: &FunctionIR) -> Result<FunctionIR, TransformError> {
        unroll(f, self.loop_id, self.factor)
    }
}

use std::collections::BTreeMap;

use thiserror::Error;

use crate::lang::{LoopId, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProfileError {
    #[error("loop {0} has no profile")]
    NoProfile(LoopId),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoopProfile {
    pub entries: u64,
    pub total_iterations: u64,
    pub max_trip: u64,
}

impl LoopProfile {
    pub fn record_entry(&mut self, iterations: u64) {
        self.entries += 1;
        self.total_iterations += iterations;
        self.max_trip = self.max_trip.max(iterations);
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BranchProfile {
    pub taken: u64,
    pub not_taken: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FunctionProfile {
    pub invocations: u64,
    pub loops: BTreeMap<LoopId, LoopProfile>,
    pub branches: BTreeMap<NodeId, BranchProfile>,
}

impl FunctionProfile {
    /// Average iterations per loop entry.
    pub fn loop_frequency(&self, loop_id: LoopId) -> Result<f64, ProfileError> {
        match self.loops.get(&loop_id) {
            Some(p) if p.entries > 0 => Ok(p.total_iterations as f64 / p.entries as f64),
            _ => Err(ProfileError::NoProfile(loop_id)),
        }
    }
}

/// Profiling data gathered while interpreting, keyed by function name.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Profiles {
    pub functions: BTreeMap<String, FunctionProfile>,
}

impl Profiles {
    pub fn function(&self, name: &str) -> Option<&FunctionProfile> {
        self.functions.get(name)
    }

    pub fn function_mut(&mut self, name: &str) -> &mut FunctionProfile {
        self.functions.entry(name.to_string()).or_default()
    }

    pub fn invocations(&self, name: &str) -> u64 {
        self.function(name).map_or(0, |f| f.invocations)
    }

    pub fn loop_frequency(&self, function: &str, loop_id: LoopId) -> Result<f64, ProfileError> {
        self.function(function)
            .ok_or(ProfileError::NoProfile(loop_id))?
            .loop_frequency(loop_id)
    }
}

//! Self-time measurement of fork bodies.
//!
//! An instrumented function keeps one [`FrameTimer`] per activation. The
//! timer has a region open whenever the activation runs its own code: the
//! region closes before every call and safepoint and reopens afterwards, and
//! it closes for the last time right before the activation exits, when the
//! accumulated time is handed to [`PerfStorage::record_exit`]. Timestamps are
//! taken so that the bookkeeping itself falls outside every region.

mod persist;
mod storage;

pub use persist::{load, persist, ForkMeta, PersistError, RunMeta, UnitMeta, COST_TABLE_VERSION};
pub use storage::{
    fork_avg, fork_control_slot, invocations_slot, total_time_slot, unit_slots, PerfStorage,
    StorageError, DEFAULT_CAPACITY,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{FunctionIR, Node, NodeId, Op};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutlierConfig {
    pub factor: f64,
    pub warmup: u64,
    pub enabled: bool,
}

impl Default for OutlierConfig {
    fn default() -> Self {
        OutlierConfig {
            factor: 10.0,
            warmup: 30,
            enabled: true,
        }
    }
}

impl OutlierConfig {
    pub fn disabled() -> Self {
        OutlierConfig {
            enabled: false,
            ..OutlierConfig::default()
        }
    }

    /// `local > factor * (total / invocations)`, once `invocations` has
    /// reached the warmup count.
    pub fn rejects(&self, local_time: u64, invocations: u64, total_time: u64) -> bool {
        if !self.enabled || invocations == 0 || invocations < self.warmup {
            return false;
        }
        if self.factor.fract() == 0.0 && self.factor >= 0.0 && self.factor < 1e18 {
            // Integral factor: compare exactly.
            let lhs = local_time as u128 * invocations as u128;
            let rhs = self.factor as u128 * total_time as u128;
            lhs > rhs
        } else {
            local_time as f64 > self.factor * (total_time as f64 / invocations as f64)
        }
    }
}

/// Marks a fork body as instrumented and names the storage it reports to.
#[derive(Clone, Debug, PartialEq)]
pub struct Instrumentation {
    pub storage_base: usize,
    pub fork_index: usize,
    pub outlier: OutlierConfig,
}

/// Per-activation self-time accumulator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FrameTimer {
    pub accumulated: u64,
    open_since: Option<u64>,
}

impl FrameTimer {
    pub fn start(now: u64) -> Self {
        FrameTimer {
            accumulated: 0,
            open_since: Some(now),
        }
    }

    pub fn is_open(&self) -> bool {
        self.open_since.is_some()
    }

    pub fn open(&mut self, now: u64) {
        debug_assert!(self.open_since.is_none(), "region already open");
        self.open_since = Some(now);
    }

    pub fn close(&mut self, now: u64) {
        if let Some(start) = self.open_since.take() {
            self.accumulated += now.saturating_sub(start);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstrumentError {
    #[error("function `{0}` is already instrumented")]
    AlreadyInstrumented(String),
}

pub fn instrument(
    f: &FunctionIR,
    storage_base: usize,
    fork_index: usize,
    outlier: OutlierConfig,
) -> Result<FunctionIR, InstrumentError> {
    if f.instrumentation.is_some() {
        return Err(InstrumentError::AlreadyInstrumented(f.name.clone()));
    }
    let mut out = f.clone();
    out.instrumentation = Some(Instrumentation {
        storage_base,
        fork_index,
        outlier,
    });
    Ok(out)
}

/// A timestamp position in an instrumented function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Probe {
    /// Region opens at function entry.
    Entry,
    /// Region closes after the call's arguments are evaluated.
    BeforeCall(NodeId),
    AfterCall(NodeId),
    BeforePause(NodeId),
    AfterPause(NodeId),
    /// Region closes after the return value is computed, then the time is
    /// aggregated.
    BeforeReturn(NodeId),
    /// Falling off the end of the body.
    End,
}

/// Static list of probe sites, in program order.
pub fn probe_plan(f: &FunctionIR) -> Vec<Probe> {
    let mut probes = vec![Probe::Entry];
    fn visit(n: &Node, probes: &mut Vec<Probe>) {
        // Children first: arguments are evaluated before the call happens.
        for c in n.children() {
            visit(c, probes);
        }
        match &n.op {
            Op::Call { .. } => {
                probes.push(Probe::BeforeCall(n.id));
                probes.push(Probe::AfterCall(n.id));
            }
            Op::Pause(_) => {
                probes.push(Probe::BeforePause(n.id));
                probes.push(Probe::AfterPause(n.id));
            }
            Op::Return(_) => probes.push(Probe::BeforeReturn(n.id)),
            _ => {}
        }
    }
    visit(&f.body, &mut probes);
    probes.push(Probe::End);
    probes
}

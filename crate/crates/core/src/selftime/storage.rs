//! Flat performance storage.
//!
//! One pre-allocated array of 64-bit slots. A unit with `n` forks owns
//! `1 + 2n` contiguous slots:
//!
//! ```text
//! [forkControl][fork0.invocations][fork0.totalTime][fork1.invocations][fork1.totalTime]...
//! ```

use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use super::OutlierConfig;

pub const DEFAULT_CAPACITY: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StorageError {
    #[error("storage capacity exceeded: need {needed} slots, {available} available")]
    CapacityExceeded { needed: usize, available: usize },
}

pub fn unit_slots(n_forks: usize) -> usize {
    1 + 2 * n_forks
}

pub fn fork_control_slot(base: usize) -> usize {
    base
}

pub fn invocations_slot(base: usize, fork: usize) -> usize {
    base + 1 + 2 * fork
}

pub fn total_time_slot(base: usize, fork: usize) -> usize {
    base + 2 + 2 * fork
}

#[derive(Debug)]
pub struct PerfStorage {
    slots: Vec<AtomicU64>,
    cursor: usize,
}

impl Default for PerfStorage {
    fn default() -> Self {
        PerfStorage::with_capacity(DEFAULT_CAPACITY)
    }
}

impl PerfStorage {
    pub fn with_capacity(capacity: usize) -> Self {
        PerfStorage {
            slots: (0..capacity).map(|_| AtomicU64::new(0)).collect(),
            cursor: 0,
        }
    }

    /// Rebuilds a storage from persisted slots; the cursor sits at the end.
    pub fn from_slots(values: &[u64]) -> Self {
        PerfStorage {
            slots: values.iter().map(|v| AtomicU64::new(*v)).collect(),
            cursor: values.len(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn alloc_unit(&mut self, n_forks: usize) -> Result<usize, StorageError> {
        let needed = unit_slots(n_forks);
        let available = self.slots.len() - self.cursor;
        if needed > available {
            return Err(StorageError::CapacityExceeded { needed, available });
        }
        let base = self.cursor;
        for s in &self.slots[base..base + needed] {
            s.store(0, Ordering::Relaxed);
        }
        self.cursor += needed;
        Ok(base)
    }

    pub fn get(&self, slot: usize) -> u64 {
        self.slots[slot].load(Ordering::Relaxed)
    }

    pub fn fork_control(&self, base: usize) -> u64 {
        self.get(fork_control_slot(base))
    }

    /// Plain load-then-store; the dispatch counter is not synchronized.
    pub fn bump_fork_control(&self, base: usize) {
        let slot = &self.slots[fork_control_slot(base)];
        let v = slot.load(Ordering::Relaxed);
        slot.store(v.wrapping_add(1), Ordering::Relaxed);
    }

    pub fn invocations(&self, base: usize, fork: usize) -> u64 {
        self.get(invocations_slot(base, fork))
    }

    pub fn total_time(&self, base: usize, fork: usize) -> u64 {
        self.get(total_time_slot(base, fork))
    }

    /// Adds one activation's self time to a fork unless the outlier filter
    /// rejects it. A rejected sample leaves both slots untouched.
    pub fn record_exit(
        &self,
        base: usize,
        fork: usize,
        local_time: u64,
        outlier: &OutlierConfig,
    ) -> bool {
        let inv_slot = &self.slots[invocations_slot(base, fork)];
        let tot_slot = &self.slots[total_time_slot(base, fork)];
        let inv = inv_slot.load(Ordering::Relaxed);
        let tot = tot_slot.load(Ordering::Relaxed);
        if outlier.rejects(local_time, inv, tot) {
            return false;
        }
        // Each add is atomic; the pair is not.
        tot_slot.fetch_add(local_time, Ordering::Relaxed);
        inv_slot.fetch_add(1, Ordering::Relaxed);
        true
    }

    pub fn fork_avg(&self, base: usize, fork: usize) -> Option<f64> {
        fork_avg(self.invocations(base, fork), self.total_time(base, fork))
    }

    /// Allocated slots only.
    pub fn snapshot(&self) -> Vec<u64> {
        self.slots[..self.cursor]
            .iter()
            .map(|s| s.load(Ordering::Relaxed))
            .collect()
    }
}

pub fn fork_avg(invocations: u64, total_time: u64) -> Option<f64> {
    if invocations == 0 {
        None
    } else {
        Some(total_time as f64 / invocations as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alloc_layout_arithmetic() {
        let mut s = PerfStorage::with_capacity(64);
        assert_eq!(s.alloc_unit(2).unwrap(), 0);
        assert_eq!(s.cursor(), 5);
        assert_eq!(s.alloc_unit(3).unwrap(), 5);
        assert_eq!(s.cursor(), 12);
    }

    #[test]
    fn alloc_beyond_capacity_fails() {
        let mut s = PerfStorage::with_capacity(6);
        assert_eq!(
            s.alloc_unit(3),
            Err(StorageError::CapacityExceeded {
                needed: 7,
                available: 6
            })
        );
    }

    #[test]
    fn slot_indices() {
        assert_eq!(invocations_slot(5, 0), 6);
        assert_eq!(total_time_slot(5, 0), 7);
        assert_eq!(invocations_slot(5, 2), 10);
        assert_eq!(total_time_slot(5, 2), 11);
    }

    fn primed(inv: u64, tot: u64) -> PerfStorage {
        PerfStorage::from_slots(&[0, inv, tot])
    }

    #[test]
    fn outlier_above_threshold_is_rejected() {
        let s = primed(100, 10_000);
        let cfg = OutlierConfig::default();
        assert!(!s.record_exit(0, 0, 1001, &cfg));
        assert_eq!((s.invocations(0, 0), s.total_time(0, 0)), (100, 10_000));
    }

    #[test]
    fn sample_below_threshold_is_accepted() {
        let s = primed(100, 10_000);
        assert!(s.record_exit(0, 0, 999, &OutlierConfig::default()));
        assert_eq!((s.invocations(0, 0), s.total_time(0, 0)), (101, 10_999));
    }

    #[test]
    fn filter_inactive_during_warmup() {
        let s = primed(5, 500);
        assert!(s.record_exit(0, 0, 1_000_000_000, &OutlierConfig::default()));
        assert_eq!(s.invocations(0, 0), 6);
    }

    #[test]
    fn averages() {
        assert_eq!(fork_avg(3, 300), Some(100.0));
        assert_eq!(fork_avg(0, 0), None);
        let s = primed(1, 100);
        s.record_exit(0, 0, 50, &OutlierConfig::disabled());
        assert_eq!(s.fork_avg(0, 0), Some(75.0));
    }

    #[test]
    fn fork_control_increments() {
        let mut s = PerfStorage::with_capacity(8);
        let base = s.alloc_unit(2).unwrap();
        s.bump_fork_control(base);
        s.bump_fork_control(base);
        assert_eq!(s.fork_control(base), 2);
    }
}

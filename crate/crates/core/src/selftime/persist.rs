//! `storage.bin` + `meta.json` persistence.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::storage::unit_slots;
use crate::lang::LoopId;
use crate::loopopts::Phase;
use crate::runtime::ClockMode;

pub const COST_TABLE_VERSION: &str = "v1";
const STORAGE_FILE: &str = "storage.bin";
const META_FILE: &str = "meta.json";

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PersistError + '_ {
    move |source| PersistError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForkMeta {
    pub index: usize,
    pub loop_id: Option<LoopId>,
    /// Peel: 0 or 1. Unroll: the factor.
    pub param: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitMeta {
    pub unit_id: usize,
    pub function: String,
    pub phase: Phase,
    pub storage_base: usize,
    pub n_forks: usize,
    pub forks: Vec<ForkMeta>,
    /// Decisions whose transform failed and that were left out of the unit.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped: Vec<ForkMeta>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub units: Vec<UnitMeta>,
    pub clock: ClockMode,
    pub cost_table_version: String,
}

impl RunMeta {
    pub fn total_slots(&self) -> usize {
        self.units.iter().map(|u| unit_slots(u.n_forks)).sum()
    }

    /// Checks that units tile the storage contiguously from slot 0.
    pub fn validate(&self) -> Result<(), PersistError> {
        let mut expected_base = 0;
        for u in &self.units {
            if u.storage_base != expected_base {
                return Err(PersistError::Format(format!(
                    "unit {} starts at slot {}, expected {}",
                    u.unit_id, u.storage_base, expected_base
                )));
            }
            if u.forks.len() != u.n_forks || u.n_forks < 2 {
                return Err(PersistError::Format(format!(
                    "unit {} declares {} forks but lists {}",
                    u.unit_id,
                    u.n_forks,
                    u.forks.len()
                )));
            }
            expected_base += unit_slots(u.n_forks);
        }
        Ok(())
    }
}

pub fn persist(dir: &Path, slots: &[u64], meta: &RunMeta) -> Result<(), PersistError> {
    meta.validate()?;
    if slots.len() != meta.total_slots() {
        return Err(PersistError::Format(format!(
            "storage has {} slots, metadata describes {}",
            slots.len(),
            meta.total_slots()
        )));
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let bytes: Vec<u8> = slots.iter().flat_map(|s| s.to_le_bytes()).collect();
    let storage_path = dir.join(STORAGE_FILE);
    fs::write(&storage_path, bytes).map_err(io_err(&storage_path))?;
    let meta_path = dir.join(META_FILE);
    let json = serde_json::to_string_pretty(meta).expect("metadata serializes");
    fs::write(&meta_path, json + "\n").map_err(io_err(&meta_path))?;
    Ok(())
}

pub fn load(dir: &Path) -> Result<(Vec<u64>, RunMeta), PersistError> {
    let meta_path = dir.join(META_FILE);
    let text = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
    let meta: RunMeta = serde_json::from_str(&text)
        .map_err(|e| PersistError::Format(format!("{}: {e}", meta_path.display())))?;
    meta.validate()?;
    let storage_path = dir.join(STORAGE_FILE);
    let bytes = fs::read(&storage_path).map_err(io_err(&storage_path))?;
    let expected = meta.total_slots() * 8;
    if bytes.len() != expected {
        return Err(PersistError::Format(format!(
            "{} is {} bytes, metadata requires {}",
            storage_path.display(),
            bytes.len(),
            expected
        )));
    }
    let slots = bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((slots, meta))
}

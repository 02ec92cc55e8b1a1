//! Whole-program drivers: forking data generation, plain runs with built-in
//! or learned decisions, and run directories on disk.

use std::fs;
use std::path::Path;
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{heuristic_peel, heuristic_unroll, Model, ModelError};
use crate::corpus::Driver;
use crate::dataset::{self, Dataset, DatasetError, UnitFeatures};
use crate::features::{extract, schema};
use crate::forking::{finalize_unit, finalized_code, select_fork_targets, ForkError, ForkingConfig, ForkingJit};
use crate::lang::{FunctionIR, LoopId, Program, Value};
use crate::loopopts::{canonicalize, Phase};
use crate::runtime::{Clock, ClockMode, Code, Jit, Machine, Profiles, RuntimeError, DEFAULT_COMPILE_THRESHOLD};
use crate::selftime::{self, OutlierConfig, PerfStorage, PersistError, RunMeta, COST_TABLE_VERSION};

pub const RAW_CSV: &str = "raw.csv";

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("entry function `{0}` not found")]
    NoEntry(String),
    #[error("runtime error: {0}")]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub clock: ClockMode,
    pub compile_threshold: u64,
    pub max_loops: usize,
    /// Entry-point calls per run.
    pub invocations: u64,
    pub outlier: OutlierConfig,
    pub phase: Phase,
    pub seed: u64,
    /// Pick and install the fastest fork of each unit after the run.
    pub finalize: bool,
    pub min_invocations: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            clock: ClockMode::Virtual,
            compile_threshold: DEFAULT_COMPILE_THRESHOLD,
            max_loops: crate::forking::DEFAULT_MAX_LOOPS,
            invocations: 1000,
            outlier: OutlierConfig::default(),
            phase: Phase::Peel,
            seed: 0,
            finalize: false,
            min_invocations: dataset::FilterConfig::default().min_invocations,
        }
    }
}

impl RunConfig {
    /// Largest unit this configuration can create.
    pub fn max_forks(&self) -> u64 {
        1 + self.max_loops as u64 * self.phase.fork_params().len() as u64
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        if self.invocations == 0 {
            return Err(SessionError::Config("invocation budget must be positive".into()));
        }
        if self.max_loops == 0 {
            return Err(SessionError::Config("max_loops must be positive".into()));
        }
        if self.finalize && self.invocations < self.max_forks() * self.min_invocations {
            return Err(SessionError::Config(format!(
                "finalization needs at least {} invocations ({} forks x {})",
                self.max_forks() * self.min_invocations,
                self.max_forks(),
                self.min_invocations
            )));
        }
        Ok(())
    }

    fn forking(&self) -> ForkingConfig {
        ForkingConfig {
            phase: self.phase,
            max_loops: self.max_loops,
            outlier: self.outlier,
        }
    }
}

/// Observable behavior of a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOutcome {
    pub output: Vec<Value>,
    pub returns: Vec<Option<Value>>,
    /// First runtime error, which also ends the run.
    pub error: Option<String>,
    pub elapsed: u64,
}

fn drive<J: Jit>(machine: &mut Machine<J>, entry: &str, vectors: &[Vec<Value>]) -> RunOutcome {
    let start = machine.clock().now();
    let mut outcome = RunOutcome::default();
    for args in vectors {
        match machine.call(entry, args) {
            Ok(v) => outcome.returns.push(v),
            Err(e) => {
                outcome.error = Some(e.to_string());
                break;
            }
        }
    }
    outcome.output = machine.take_output();
    outcome.elapsed = machine.clock().now() - start;
    outcome
}

fn check_entry(program: &Program, driver: &Driver) -> Result<(), SessionError> {
    let f = program
        .function(&driver.entry)
        .ok_or_else(|| SessionError::NoEntry(driver.entry.clone()))?;
    if f.params.len() != driver.args.len() {
        return Err(SessionError::Config(format!(
            "`{}` takes {} arguments but the driver supplies {}",
            driver.entry,
            f.params.len(),
            driver.args.len()
        )));
    }
    Ok(())
}

/// Plain interpretation with profiling only.
pub fn interpret_run(program: &Program, driver: &Driver, cfg: &RunConfig) -> Result<RunOutcome, SessionError> {
    check_entry(program, driver)?;
    let vectors = driver.arg_vectors(cfg.seed, cfg.invocations as usize);
    let mut m = Machine::interpreter(program, Clock::new(cfg.clock));
    Ok(drive(&mut m, &driver.entry, &vectors))
}

#[derive(Debug)]
pub struct ForkRun {
    pub outcome: RunOutcome,
    pub slots: Vec<u64>,
    pub meta: RunMeta,
    pub dataset: Dataset,
    /// Per unit: the installed fork, if finalized.
    pub finalized: Vec<Option<usize>>,
    pub unforked: Vec<(String, ForkError)>,
}

/// Runs the entry point for the invocation budget with forking enabled.
pub fn forkgen(benchmark: &str, program: &Program, driver: &Driver, cfg: &RunConfig) -> Result<ForkRun, SessionError> {
    cfg.validate()?;
    check_entry(program, driver)?;
    let vectors = driver.arg_vectors(cfg.seed, cfg.invocations as usize);
    let mut m = Machine::new(program, Clock::new(cfg.clock), ForkingJit::new(cfg.forking()))
        .with_compile_threshold(cfg.compile_threshold);
    let outcome = drive(&mut m, &driver.entry, &vectors);

    let mut finalized = Vec::new();
    if cfg.finalize {
        let storage_snapshot = PerfStorage::from_slots(&m.storage().snapshot());
        let mut installs = Vec::new();
        for unit in &mut m.jit_mut().units {
            let chosen = finalize_unit(unit, &storage_snapshot, cfg.min_invocations).ok();
            if let Some(code) = finalized_code(unit) {
                installs.push((unit.meta.function.clone(), code));
            }
            finalized.push(chosen);
        }
        for (name, code) in installs {
            m.install(&name, code);
        }
    } else {
        finalized = vec![None; m.jit().units.len()];
    }

    let slots = m.storage().snapshot();
    let meta = RunMeta {
        units: m.jit().units.iter().map(|u| u.meta.clone()).collect(),
        clock: cfg.clock,
        cost_table_version: COST_TABLE_VERSION.to_string(),
    };
    let features: Vec<UnitFeatures> = m
        .jit()
        .units
        .iter()
        .map(|u| UnitFeatures {
            unit_id: u.meta.unit_id,
            per_fork: u.features.clone(),
        })
        .collect();
    let dataset = dataset::build(benchmark, &slots, &meta, &features, &schema().names())?;
    let unforked = std::mem::take(&mut m.jit_mut().unforked);
    Ok(ForkRun {
        outcome,
        slots,
        meta,
        dataset,
        finalized,
        unforked,
    })
}

/// Writes `storage.bin`, `meta.json` and `raw.csv` into `dir`.
pub fn write_run(dir: &Path, run: &ForkRun) -> Result<(), SessionError> {
    fs::create_dir_all(dir).map_err(|e| {
        SessionError::Dataset(DatasetError::Io {
            path: dir.display().to_string(),
            source: e,
        })
    })?;
    selftime::persist(dir, &run.slots, &run.meta)?;
    dataset::export_csv(&run.dataset, &dir.join(RAW_CSV))?;
    Ok(())
}

/// Loads a run directory and checks that `raw.csv` agrees with the storage.
pub fn read_run(dir: &Path) -> Result<(Vec<u64>, RunMeta, Dataset), SessionError> {
    let (slots, meta) = selftime::load(dir)?;
    let data = dataset::import_csv(&dir.join(RAW_CSV))?;
    for (i, r) in data.rows.iter().enumerate() {
        let unit = meta.units.iter().find(|u| u.unit_id == r.unit_id);
        let fork = unit.and_then(|u| {
            u.forks
                .iter()
                .find(|f| if r.is_baseline { f.index == 0 } else { f.loop_id == r.loop_id && f.param == r.param })
                .map(|f| (u.storage_base, f.index))
        });
        let consistent = fork.is_some_and(|(base, k)| {
            slots[selftime::invocations_slot(base, k)] == r.invocations
                && slots[selftime::total_time_slot(base, k)] == r.total_time
        });
        if !consistent {
            return Err(DatasetError::Format {
                row: i + 1,
                message: "row does not match storage.bin".into(),
            }
            .into());
        }
    }
    Ok((slots, meta, data))
}

/// Where per-loop decisions come from when not forking.
#[derive(Clone, Debug)]
pub enum DecisionSource {
    Heuristic,
    Model(Rc<Model>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AppliedDecision {
    pub function: String,
    pub loop_id: LoopId,
    pub param: u32,
}

/// Compiles hot functions with one decision per profiled loop.
#[derive(Debug)]
pub struct DecisionJit {
    pub phase: Phase,
    pub max_loops: usize,
    pub source: DecisionSource,
    pub decisions: Vec<AppliedDecision>,
    pub errors: Vec<(String, String)>,
}

impl DecisionJit {
    pub fn new(phase: Phase, max_loops: usize, source: DecisionSource) -> Self {
        DecisionJit {
            phase,
            max_loops,
            source,
            decisions: Vec::new(),
            errors: Vec::new(),
        }
    }

    fn optimize(&mut self, f: &FunctionIR, profiles: &Profiles) -> Result<FunctionIR, String> {
        let mut cur = canonicalize(f);
        let targets = match select_fork_targets(&cur, profiles, self.max_loops, self.phase) {
            Ok(t) => t,
            Err(ForkError::NoEligibleLoops) => return Ok(cur),
            Err(e) => return Err(e.to_string()),
        };
        for l in targets {
            let fv = extract(&cur, l, profiles).map_err(|e| e.to_string())?;
            let param = match &self.source {
                DecisionSource::Heuristic => match self.phase {
                    Phase::Peel => heuristic_peel(&fv) as u32,
                    Phase::Unroll => heuristic_unroll(&fv),
                },
                DecisionSource::Model(m) => m.predict(self.phase, &fv).map_err(|e| e.to_string())?,
            };
            self.decisions.push(AppliedDecision {
                function: f.name.clone(),
                loop_id: l,
                param,
            });
            if param != self.phase.identity_param() {
                if let Ok(next) = self.phase.apply(&cur, l, param) {
                    cur = canonicalize(&next);
                }
            }
        }
        Ok(cur)
    }
}

impl Jit for DecisionJit {
    fn compile(&mut self, f: &FunctionIR, profiles: &Profiles, _storage: &mut PerfStorage) -> Option<Code> {
        match self.optimize(f, profiles) {
            Ok(g) => Some(Code::Compiled(Rc::new(g))),
            Err(e) => {
                self.errors.push((f.name.clone(), e));
                None
            }
        }
    }
}

#[derive(Debug)]
pub struct DecisionRun {
    pub outcome: RunOutcome,
    pub decisions: Vec<AppliedDecision>,
    pub errors: Vec<(String, String)>,
}

/// Runs with tier-up and per-loop decisions from `source`, without forking.
pub fn decision_run(
    program: &Program,
    driver: &Driver,
    cfg: &RunConfig,
    source: DecisionSource,
) -> Result<DecisionRun, SessionError> {
    check_entry(program, driver)?;
    if let DecisionSource::Model(m) = &source {
        let expected = match cfg.phase {
            Phase::Peel => crate::analysis::ModelKind::PeelClassifier,
            Phase::Unroll => crate::analysis::ModelKind::UnrollRegressor,
        };
        if m.kind() != expected {
            return Err(ModelError::KindMismatch {
                expected,
                found: m.kind(),
            }
            .into());
        }
    }
    let vectors = driver.arg_vectors(cfg.seed, cfg.invocations as usize);
    let jit = DecisionJit::new(cfg.phase, cfg.max_loops, source);
    let mut m = Machine::new(program, Clock::new(cfg.clock), jit).with_compile_threshold(cfg.compile_threshold);
    let outcome = drive(&mut m, &driver.entry, &vectors);
    let jit = m.jit_mut();
    Ok(DecisionRun {
        outcome,
        decisions: std::mem::take(&mut jit.decisions),
        errors: std::mem::take(&mut jit.errors),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OverheadReport {
    pub interpreted: u64,
    pub compiled: u64,
    pub forked: u64,
}

impl std::fmt::Display for OverheadReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let rel = |x: u64| x as f64 / self.compiled.max(1) as f64;
        writeln!(f, "interpreted: {} ({:.3}x)", self.interpreted, rel(self.interpreted))?;
        writeln!(f, "compiled:    {} (1.000x)", self.compiled)?;
        write!(f, "forked:      {} ({:.3}x)", self.forked, rel(self.forked))
    }
}

/// Total clock for the same inputs without a compiler, with the built-in
/// heuristic, and with forking.
pub fn overhead(program: &Program, driver: &Driver, cfg: &RunConfig) -> Result<OverheadReport, SessionError> {
    let interpreted = interpret_run(program, driver, cfg)?.elapsed;
    let compiled = decision_run(program, driver, cfg, DecisionSource::Heuristic)?.outcome.elapsed;
    let forked = forkgen("overhead", program, driver, cfg)?.outcome.elapsed;
    Ok(OverheadReport {
        interpreted,
        compiled,
        forked,
    })
}

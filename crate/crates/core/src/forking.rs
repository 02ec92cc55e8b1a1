//! Compilation forking: fork creation at the loop phase, recombination into
//! an alternately dispatching unit, and finalization to the best fork.

use std::rc::Rc;

use thiserror::Error;

use crate::features::{extract, FeatureVector};
use crate::lang::{detect_counted, fingerprint, FunctionIR, LoopId};
use crate::loopopts::{canonicalize, Phase, TransformError};
use crate::runtime::{Code, Dispatcher, Jit, Profiles};
use crate::selftime::{instrument, ForkMeta, InstrumentError, OutlierConfig, PerfStorage, StorageError, UnitMeta};

pub const DEFAULT_MAX_LOOPS: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForkError {
    #[error("no loop is eligible for forking")]
    NoEligibleLoops,
    #[error("forks disagree on parameters: {0:?} vs {1:?}")]
    MismatchedArity(Vec<String>, Vec<String>),
    #[error("a dispatch unit needs at least 2 forks, got {0}")]
    TooFewForks(usize),
    #[error("fork {fork} has {invocations} invocations, fewer than {min}")]
    InsufficientData { fork: usize, invocations: u64, min: u64 },
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Instrument(#[from] InstrumentError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForkingConfig {
    pub phase: Phase,
    pub max_loops: usize,
    pub outlier: OutlierConfig,
}

impl ForkingConfig {
    pub fn new(phase: Phase) -> Self {
        ForkingConfig {
            phase,
            max_loops: DEFAULT_MAX_LOOPS,
            outlier: OutlierConfig::default(),
        }
    }
}

/// The most frequently executed profiled loops, best first. Ties go to the
/// smaller loop id; the unroll phase only considers counted loops.
pub fn select_fork_targets(
    f: &FunctionIR,
    profiles: &Profiles,
    max_loops: usize,
    phase: Phase,
) -> Result<Vec<LoopId>, ForkError> {
    let mut candidates: Vec<(f64, LoopId)> = f
        .loop_ids()
        .into_iter()
        .filter(|l| phase != Phase::Unroll || detect_counted(f, *l).is_some())
        .filter_map(|l| profiles.loop_frequency(&f.name, l).ok().map(|freq| (freq, l)))
        .collect();
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    candidates.truncate(max_loops);
    if candidates.is_empty() {
        return Err(ForkError::NoEligibleLoops);
    }
    Ok(candidates.into_iter().map(|(_, l)| l).collect())
}

/// One fork per decision; fork 0 is the untransformed baseline.
#[derive(Clone, Debug)]
pub struct ForkSet {
    pub phase: Phase,
    pub decisions: Vec<ForkMeta>,
    pub forks: Vec<FunctionIR>,
    /// Features of each fork's decision loop, taken on the intermediate.
    pub features: Vec<Option<FeatureVector>>,
    /// Fingerprint of the intermediate each fork was created from.
    pub history: Vec<String>,
    /// Decisions whose transform failed.
    pub dropped: Vec<(ForkMeta, TransformError)>,
}

pub fn create_forks(
    intermediate: &FunctionIR,
    phase: Phase,
    targets: &[LoopId],
    profiles: &Profiles,
) -> Result<ForkSet, ForkError> {
    if targets.is_empty() {
        return Err(ForkError::NoEligibleLoops);
    }
    let digest = fingerprint(intermediate);
    let mut set = ForkSet {
        phase,
        decisions: vec![ForkMeta {
            index: 0,
            loop_id: None,
            param: phase.identity_param(),
        }],
        forks: vec![intermediate.clone()],
        features: vec![None],
        history: vec![digest.clone()],
        dropped: Vec::new(),
    };
    let mut planned = 1;
    for &l in targets {
        for &param in phase.fork_params() {
            let meta = ForkMeta {
                index: planned,
                loop_id: Some(l),
                param,
            };
            planned += 1;
            let features = extract(intermediate, l, profiles).ok();
            match phase.apply(intermediate, l, param) {
                Ok(fork) => {
                    set.decisions.push(ForkMeta {
                        index: set.forks.len(),
                        ..meta
                    });
                    set.forks.push(fork);
                    set.features.push(features);
                    set.history.push(digest.clone());
                }
                Err(e) => set.dropped.push((meta, e)),
            }
        }
    }
    Ok(set)
}

pub fn recombine(unit_id: usize, forks: Vec<FunctionIR>, storage_base: usize) -> Result<Dispatcher, ForkError> {
    if forks.len() < 2 {
        return Err(ForkError::TooFewForks(forks.len()));
    }
    for f in &forks[1..] {
        if f.params != forks[0].params {
            return Err(ForkError::MismatchedArity(forks[0].params.clone(), f.params.clone()));
        }
    }
    Ok(Dispatcher {
        unit_id,
        storage_base,
        forks: forks.into_iter().map(Rc::new).collect(),
    })
}

#[derive(Clone, Debug)]
pub struct DispatchUnit {
    pub meta: UnitMeta,
    pub dispatcher: Rc<Dispatcher>,
    /// Uninstrumented forks, for installing the winner.
    pub plain: Vec<FunctionIR>,
    pub features: Vec<Option<FeatureVector>>,
    pub history: Vec<String>,
    pub finalized: Option<usize>,
}

impl DispatchUnit {
    pub fn n_forks(&self) -> usize {
        self.plain.len()
    }

    pub fn storage_base(&self) -> usize {
        self.meta.storage_base
    }
}

/// The pipeline for one hot function: canonicalize, fork at the loop phase,
/// canonicalize each fork, instrument, recombine.
pub fn fork_function(
    f: &FunctionIR,
    profiles: &Profiles,
    storage: &mut PerfStorage,
    config: &ForkingConfig,
    unit_id: usize,
) -> Result<DispatchUnit, ForkError> {
    let intermediate = canonicalize(f);
    let targets = select_fork_targets(&intermediate, profiles, config.max_loops, config.phase)?;
    let set = create_forks(&intermediate, config.phase, &targets, profiles)?;
    if set.forks.len() < 2 {
        return Err(ForkError::TooFewForks(set.forks.len()));
    }
    let plain: Vec<FunctionIR> = set.forks.iter().map(canonicalize).collect();
    let storage_base = storage.alloc_unit(plain.len())?;
    let instrumented = plain
        .iter()
        .enumerate()
        .map(|(i, fork)| instrument(fork, storage_base, i, config.outlier))
        .collect::<Result<Vec<_>, _>>()?;
    let dispatcher = recombine(unit_id, instrumented, storage_base)?;
    let meta = UnitMeta {
        unit_id,
        function: f.name.clone(),
        phase: config.phase,
        storage_base,
        n_forks: plain.len(),
        forks: set.decisions.clone(),
        dropped: set.dropped.iter().map(|(m, _)| m.clone()).collect(),
    };
    Ok(DispatchUnit {
        meta,
        dispatcher: Rc::new(dispatcher),
        plain,
        features: set.features,
        history: set.history,
        finalized: None,
    })
}

/// Tier-up hook that forks every hot function with an eligible loop and
/// compiles the rest plainly.
#[derive(Debug)]
pub struct ForkingJit {
    pub config: ForkingConfig,
    pub units: Vec<DispatchUnit>,
    /// Functions compiled without forking, with the reason.
    pub unforked: Vec<(String, ForkError)>,
}

impl ForkingJit {
    pub fn new(config: ForkingConfig) -> Self {
        ForkingJit {
            config,
            units: Vec::new(),
            unforked: Vec::new(),
        }
    }
}

impl Jit for ForkingJit {
    fn compile(&mut self, f: &FunctionIR, profiles: &Profiles, storage: &mut PerfStorage) -> Option<Code> {
        match fork_function(f, profiles, storage, &self.config, self.units.len()) {
            Ok(unit) => {
                let code = Code::Dispatch(unit.dispatcher.clone());
                self.units.push(unit);
                Some(code)
            }
            Err(e) => {
                self.unforked.push((f.name.clone(), e));
                Some(Code::Compiled(Rc::new(canonicalize(f))))
            }
        }
    }
}

/// Index of the fork with the lowest average self time. Ties go to the
/// baseline, then to the lowest index.
pub fn finalize_unit(unit: &mut DispatchUnit, storage: &PerfStorage, min_inv: u64) -> Result<usize, ForkError> {
    let base = unit.storage_base();
    let mut best: Option<(usize, f64)> = None;
    for k in 0..unit.n_forks() {
        let inv = storage.invocations(base, k);
        if inv < min_inv || inv == 0 {
            return Err(ForkError::InsufficientData {
                fork: k,
                invocations: inv,
                min: min_inv.max(1),
            });
        }
        let avg = storage.fork_avg(base, k).expect("invocations checked");
        if best.is_none_or(|(_, b)| avg < b) {
            best = Some((k, avg));
        }
    }
    let chosen = best.map(|(k, _)| k).unwrap_or(0);
    unit.finalized = Some(chosen);
    Ok(chosen)
}

/// Code to install once a unit is finalized.
pub fn finalized_code(unit: &DispatchUnit) -> Option<Code> {
    unit.finalized.map(|k| Code::Compiled(Rc::new(unit.plain[k].clone())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse, Value};
    use crate::runtime::{Clock, LoopProfile, Machine};

    fn profiles_with(f: &str, freqs: &[(u32, u64)]) -> Profiles {
        let mut p = Profiles::default();
        let fp = p.function_mut(f);
        for (l, iters) in freqs {
            fp.loops.insert(
                LoopId(*l),
                LoopProfile {
                    entries: 1,
                    total_iterations: *iters,
                    max_trip: *iters,
                },
            );
        }
        p
    }

    const THREE_LOOPS: &str = "fn f(n) { let i = 0; while (i < n) { i = i + 1; } \
        for (j = 0; j < n; j += 1) { out(j); } let k = n; while (k > 0) { k = k - 1; } }";

    #[test]
    fn top_k_by_frequency() {
        let f = parse(THREE_LOOPS).unwrap().functions.remove(0);
        let p = profiles_with("f", &[(0, 100), (1, 5), (2, 50)]);
        assert_eq!(
            select_fork_targets(&f, &p, 2, Phase::Peel).unwrap(),
            vec![LoopId(0), LoopId(2)]
        );
        let equal = profiles_with("f", &[(0, 7), (1, 7), (2, 7)]);
        assert_eq!(
            select_fork_targets(&f, &equal, 2, Phase::Peel).unwrap(),
            vec![LoopId(0), LoopId(1)]
        );
    }

    #[test]
    fn unroll_phase_needs_counted_loops() {
        let f = parse("fn f(n) { while (n > 0) { n = n - 1; } }").unwrap().functions.remove(0);
        let p = profiles_with("f", &[(0, 10)]);
        assert_eq!(
            select_fork_targets(&f, &p, 4, Phase::Unroll),
            Err(ForkError::NoEligibleLoops)
        );
    }

    #[test]
    fn fork_counts() {
        let f = parse(THREE_LOOPS).unwrap().functions.remove(0);
        let p = profiles_with("f", &[(0, 100), (1, 5), (2, 50)]);
        let set = create_forks(&f, Phase::Peel, &[LoopId(0), LoopId(2)], &p).unwrap();
        assert_eq!(set.forks.len(), 3);
        let set = create_forks(&f, Phase::Unroll, &[LoopId(1)], &p).unwrap();
        assert_eq!(set.forks.len(), 6);
        assert_eq!(
            set.decisions.iter().map(|d| d.param).collect::<Vec<_>>(),
            vec![1, 2, 4, 8, 16, 32]
        );
        assert!(set.history.iter().all(|h| *h == set.history[0]));
        assert_eq!(
            create_forks(&f, Phase::Peel, &[], &p).unwrap_err(),
            ForkError::NoEligibleLoops
        );
    }

    #[test]
    fn failed_transforms_are_dropped() {
        let f = parse(THREE_LOOPS).unwrap().functions.remove(0);
        let p = Profiles::default();
        // Loop 2 is not counted, so every unroll decision for it fails.
        let set = create_forks(&f, Phase::Unroll, &[LoopId(2), LoopId(1)], &p).unwrap();
        assert_eq!(set.forks.len(), 6);
        assert_eq!(set.dropped.len(), 5);
        assert_eq!(set.decisions[1].index, 1);
        assert_eq!(set.decisions[1].loop_id, Some(LoopId(1)));
    }

    #[test]
    fn recombine_checks_arity() {
        let a = parse("fn f(x) { }").unwrap().functions.remove(0);
        let b = parse("fn f(x, y) { }").unwrap().functions.remove(0);
        assert!(matches!(
            recombine(0, vec![a.clone(), b], 0),
            Err(ForkError::MismatchedArity(..))
        ));
        assert!(matches!(recombine(0, vec![a], 0), Err(ForkError::TooFewForks(1))));
    }

    fn unit_with(storage: &mut PerfStorage, stats: &[(u64, u64)]) -> DispatchUnit {
        let f = parse("fn f() { }").unwrap().functions.remove(0);
        let base = storage.alloc_unit(stats.len()).unwrap();
        let cfg = OutlierConfig::disabled();
        for (k, (inv, tot)) in stats.iter().enumerate() {
            for i in 0..*inv {
                let share = tot / inv + u64::from(i < tot % inv);
                storage.record_exit(base, k, share, &cfg);
            }
        }
        let plain = vec![f; stats.len()];
        DispatchUnit {
            meta: UnitMeta {
                unit_id: 0,
                function: "f".into(),
                phase: Phase::Peel,
                storage_base: base,
                n_forks: stats.len(),
                forks: Vec::new(),
                dropped: Vec::new(),
            },
            dispatcher: Rc::new(recombine(0, plain.clone(), base).unwrap()),
            plain,
            features: Vec::new(),
            history: Vec::new(),
            finalized: None,
        }
    }

    #[test]
    fn finalize_picks_fastest_with_baseline_ties() {
        let mut s = PerfStorage::with_capacity(64);
        let mut u = unit_with(&mut s, &[(10, 1000), (10, 900)]);
        assert_eq!(finalize_unit(&mut u, &s, 5), Ok(1));
        let mut u = unit_with(&mut s, &[(10, 1000), (10, 1000)]);
        assert_eq!(finalize_unit(&mut u, &s, 5), Ok(0));
        let mut u = unit_with(&mut s, &[(10, 1000), (3, 300)]);
        assert!(matches!(
            finalize_unit(&mut u, &s, 5),
            Err(ForkError::InsufficientData { fork: 1, .. })
        ));
    }

    #[test]
    fn dispatch_alternates() {
        let src = "fn f(n) { let s = 0; for (i = 0; i < n; i += 1) { s = s + i; } return s; } fn main() { return f(5); }";
        let p = parse(src).unwrap();
        let mut m = Machine::new(&p, Clock::virtual_clock(), ForkingJit::new(ForkingConfig::new(Phase::Unroll)));
        for _ in 0..10 + 7 * 6 {
            assert_eq!(m.call("f", &[Value::Int(5)]).unwrap(), Some(Value::Int(10)));
        }
        let unit = &m.jit().units[0];
        assert_eq!(unit.n_forks(), 6);
        let counts: Vec<u64> = (0..6).map(|k| m.storage().invocations(unit.storage_base(), k)).collect();
        assert_eq!(counts, vec![7; 6]);
    }

    #[test]
    fn function_without_loops_compiles_plain() {
        let p = parse("fn f(x) { return x + 1; }").unwrap();
        let mut m = Machine::new(&p, Clock::virtual_clock(), ForkingJit::new(ForkingConfig::new(Phase::Peel)));
        for _ in 0..12 {
            m.call("f", &[Value::Int(1)]).unwrap();
        }
        assert!(matches!(m.code("f"), Some(Code::Compiled(_))));
        assert_eq!(m.jit().unforked[0].1, ForkError::NoEligibleLoops);
    }
}

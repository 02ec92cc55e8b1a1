//! Decision-quality analytics: time estimation, classification, histograms,
//! summary statistics, built-in heuristics and linear model inference.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::dataset::{DataPoint, Dataset, Scaler};
use crate::features::{schema, FeatureVector};
use crate::lang::LoopId;
use crate::loopopts::{Phase, UNROLL_FACTORS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("decision {decision} has no measurement for parameter {param}")]
    MissingMeasurement { decision: usize, param: u32 },
    #[error("expected {expected} predicted parameters, got {got}")]
    PredictionCount { expected: usize, got: usize },
    #[error("speedup must be positive, got {0}")]
    NonPositiveSpeedup(f64),
    #[error("geometric mean needs positive values, got {0}")]
    NonPositive(f64),
    #[error("bins per decade must be at least 1")]
    InvalidBins,
}

/// Per-parameter averages measured for one loop decision.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionRecord {
    pub loop_id: Option<LoopId>,
    pub phase: Phase,
    pub averages: BTreeMap<u32, f64>,
}

/// All decisions of one compiled method, sharing its baseline.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodRecord {
    pub benchmark: String,
    pub function: String,
    pub unit_id: usize,
    /// Invocations over all forks of the unit.
    pub invocations: u64,
    pub baseline_avg: f64,
    pub decisions: Vec<DecisionRecord>,
}

/// Estimated total time of a method when decision `d` uses `predicted[d]`.
pub fn estimate_method(m: &MethodRecord, predicted: &[u32]) -> Result<f64, AnalysisError> {
    if predicted.len() != m.decisions.len() {
        return Err(AnalysisError::PredictionCount {
            expected: m.decisions.len(),
            got: predicted.len(),
        });
    }
    let mut delta = 0.0;
    for (d, (rec, &p)) in m.decisions.iter().zip(predicted).enumerate() {
        let t = rec
            .averages
            .get(&p)
            .ok_or(AnalysisError::MissingMeasurement { decision: d, param: p })?;
        delta += t - m.baseline_avg;
    }
    Ok(m.invocations as f64 * (delta + m.baseline_avg))
}

/// Parameter with the lowest average per decision; ties to the smaller parameter.
pub fn best_params(m: &MethodRecord) -> Vec<u32> {
    m.decisions
        .iter()
        .map(|d| {
            d.averages
                .iter()
                .fold(None::<(u32, f64)>, |best, (&p, &t)| match best {
                    Some((_, bt)) if bt <= t => best,
                    _ => Some((p, t)),
                })
                .map_or(d.phase.identity_param(), |(p, _)| p)
        })
        .collect()
}

pub fn estimate_best(m: &MethodRecord) -> Result<f64, AnalysisError> {
    estimate_method(m, &best_params(m))
}

pub fn estimate_benchmark<F>(methods: &[MethodRecord], mut source: F) -> Result<f64, AnalysisError>
where
    F: FnMut(&MethodRecord) -> Vec<u32>,
{
    methods.iter().map(|m| estimate_method(m, &source(m))).sum()
}

/// Groups dataset rows into method records. Rows with no positive average
/// contribute invocations but no measurement.
pub fn method_records(data: &Dataset) -> Vec<MethodRecord> {
    type Group<'a> = (Option<&'a DataPoint>, Vec<&'a DataPoint>);
    let mut units: BTreeMap<(String, String, usize), Group> = BTreeMap::new();
    for r in &data.rows {
        let e = units
            .entry((r.benchmark.clone(), r.function.clone(), r.unit_id))
            .or_default();
        if r.is_baseline {
            e.0.get_or_insert(r);
        } else {
            e.1.push(r);
        }
    }
    let mut out = Vec::new();
    for ((benchmark, function, unit_id), (base, forks)) in units {
        let Some(base) = base else { continue };
        let mut decisions: Vec<DecisionRecord> = Vec::new();
        for r in data.rows.iter().filter(|r| {
            r.is_baseline && r.benchmark == benchmark && r.function == function && r.unit_id == unit_id
        }) {
            if decisions.iter().all(|d| d.loop_id != r.loop_id) {
                decisions.push(DecisionRecord {
                    loop_id: r.loop_id,
                    phase: r.phase,
                    averages: BTreeMap::from([(r.phase.identity_param(), base.baseline_avg)]),
                });
            }
        }
        let mut invocations = base.invocations;
        for r in &forks {
            invocations += r.invocations;
            if r.avg_time <= 0.0 {
                continue;
            }
            let idx = match decisions.iter().position(|d| d.loop_id == r.loop_id) {
                Some(i) => i,
                None => {
                    decisions.push(DecisionRecord {
                        loop_id: r.loop_id,
                        phase: r.phase,
                        averages: BTreeMap::from([(r.phase.identity_param(), base.baseline_avg)]),
                    });
                    decisions.len() - 1
                }
            };
            decisions[idx].averages.insert(r.param, r.avg_time);
        }
        out.push(MethodRecord {
            benchmark,
            function,
            unit_id,
            invocations,
            baseline_avg: base.baseline_avg,
            decisions,
        });
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateRow {
    pub function: String,
    pub i: u64,
    pub baseline_estimate: f64,
    pub predicted_estimate: f64,
    pub best_estimate: f64,
    pub source: String,
}

pub fn write_estimates<W: io::Write>(rows: &[EstimateRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Class {
    TP,
    TN,
    FP,
    FN,
}

/// Speedup exactly 1 is a correct decision either way.
pub fn classify(applied: bool, speedup: f64) -> Class {
    match (applied, speedup < 1.0) {
        (true, false) => Class::TP,
        (true, true) => Class::FP,
        (false, _) if speedup > 1.0 => Class::FN,
        (false, _) => Class::TN,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ClassCounts {
    pub fn add(&mut self, c: Class) {
        match c {
            Class::TP => self.tp += 1,
            Class::TN => self.tn += 1,
            Class::FP => self.fp += 1,
            Class::FN => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub bins_per_decade: u32,
    /// Bins run from `-k_max` to `k_max`; the end bins also hold outliers.
    pub k_max: i32,
    pub counts: Vec<ClassCounts>,
}

impl Histogram {
    pub fn bin_of(&self, speedup: f64) -> i32 {
        let k = (speedup.log10() * self.bins_per_decade as f64 + 0.5).floor();
        k.clamp(-self.k_max as f64, self.k_max as f64) as i32
    }

    pub fn bin(&self, k: i32) -> &ClassCounts {
        &self.counts[(k + self.k_max) as usize]
    }

    pub fn center(&self, k: i32) -> f64 {
        10f64.powf(k as f64 / self.bins_per_decade as f64)
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_center", "tp", "tn", "fp", "fn", "total"])?;
        for k in -self.k_max..=self.k_max {
            let c = self.bin(k);
            w.write_record([
                format!("{}", self.center(k)),
                c.tp.to_string(),
                c.tn.to_string(),
                c.fp.to_string(),
                c.fn_.to_string(),
                c.total().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `rows` are `(applied, speedup)` pairs. `k_max` defaults to two decades.
pub fn histogram(rows: &[(bool, f64)], bins_per_decade: u32, k_max: Option<i32>) -> Result<Histogram, AnalysisError> {
    if bins_per_decade == 0 {
        return Err(AnalysisError::InvalidBins);
    }
    let k_max = k_max.unwrap_or(2 * bins_per_decade as i32).max(0);
    let mut h = Histogram {
        bins_per_decade,
        k_max,
        counts: vec![ClassCounts::default(); (2 * k_max + 1) as usize],
    };
    for &(applied, s) in rows {
        if s.is_nan() || s <= 0.0 {
            return Err(AnalysisError::NonPositiveSpeedup(s));
        }
        let k = h.bin_of(s);
        h.counts[(k + k_max) as usize].add(classify(applied, s));
    }
    Ok(h)
}

pub fn geomean(xs: &[f64]) -> Result<f64, AnalysisError> {
    if let Some(&x) = xs.iter().find(|x| x.is_nan() || **x <= 0.0) {
        return Err(AnalysisError::NonPositive(x));
    }
    Ok((xs.iter().map(|x| x.ln()).sum::<f64>() / xs.len() as f64).exp())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankSum {
    /// U of the first sample.
    pub u: f64,
    pub p: f64,
    pub exact: bool,
}

pub const EXACT_LIMIT: usize = 12;

fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn for_each_subset_sum(ranks: &[f64], n: usize, start: usize, acc: f64, f: &mut impl FnMut(f64)) {
    if n == 0 {
        f(acc);
        return;
    }
    for i in start..=ranks.len() - n {
        for_each_subset_sum(ranks, n - 1, i + 1, acc + ranks[i], f);
    }
}

fn u_statistic(a: &[f64], b: &[f64]) -> (Vec<f64>, f64) {
    assert!(!a.is_empty() && !b.is_empty(), "rank-sum test needs two non-empty samples");
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&all);
    let n = a.len();
    let u = ranks[..n].iter().sum::<f64>() - (n * (n + 1)) as f64 / 2.0;
    (ranks, u)
}

/// Exact two-sided p by enumerating every assignment of the pooled ranks.
pub fn ranksum_exact(a: &[f64], b: &[f64]) -> RankSum {
    let (ranks, u) = u_statistic(a, b);
    let n = a.len();
    let shift = (n * (n + 1)) as f64 / 2.0;
    let mean = (n * b.len()) as f64 / 2.0;
    let dev = (u - mean).abs();
    let (mut extreme, mut total) = (0u64, 0u64);
    for_each_subset_sum(&ranks, n, 0, 0.0, &mut |s| {
        total += 1;
        if (s - shift - mean).abs() >= dev - 1e-9 {
            extreme += 1;
        }
    });
    RankSum {
        u,
        p: extreme as f64 / total as f64,
        exact: true,
    }
}

/// Normal approximation with tie and continuity corrections.
pub fn ranksum_normal(a: &[f64], b: &[f64]) -> RankSum {
    let (_, u) = u_statistic(a, b);
    let (n, m) = (a.len(), b.len());
    let big_n = (n + m) as f64;
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for x in a.iter().chain(b) {
        *counts.entry(x.to_bits()).or_default() += 1;
    }
    let ties: f64 = counts.values().map(|&t| (t * t * t - t) as f64).sum();
    let var = (n * m) as f64 / 12.0 * ((big_n + 1.0) - ties / (big_n * (big_n - 1.0)));
    let dev = (u - (n * m) as f64 / 2.0).abs();
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = (dev - 0.5).max(0.0) / var.sqrt();
        let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
        (2.0 * (1.0 - std_normal.cdf(z))).min(1.0)
    };
    RankSum { u, p, exact: false }
}

/// Two-sided Mann-Whitney rank-sum test with midranks for ties: exact for
/// small samples, normal approximation otherwise.
pub fn ranksum_test(a: &[f64], b: &[f64]) -> RankSum {
    if a.len() + b.len() <= EXACT_LIMIT {
        ranksum_exact(a, b)
    } else {
        ranksum_normal(a, b)
    }
}

pub const PEEL_MAX_SIZE: f64 = 40.0;
pub const PEEL_MIN_FREQUENCY: f64 = 2.0;
pub const UNROLL_MAX_SIZE: f64 = 128.0;

/// Built-in peeling rule: small loops that run at least twice per entry.
pub fn heuristic_peel(fv: &FeatureVector) -> bool {
    let size = fv.get("size").unwrap_or(f64::INFINITY);
    let freq = fv.get("frequency").unwrap_or(0.0);
    size <= PEEL_MAX_SIZE && freq >= PEEL_MIN_FREQUENCY
}

/// Built-in unrolling rule: the largest factor keeping the body under budget.
pub fn heuristic_unroll(fv: &FeatureVector) -> u32 {
    let size = fv.get("size").unwrap_or(f64::INFINITY);
    if fv.get("has_exact_trip_count") != Some(1.0) {
        return 1;
    }
    UNROLL_FACTORS
        .iter()
        .rev()
        .copied()
        .find(|&f| size * f as f64 <= UNROLL_MAX_SIZE)
        .unwrap_or(1)
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model feature `{0}` is not in the feature schema")]
    SchemaMismatch(String),
    #[error("model feature `{0}` is not a column of the data; export with --keep-all-features")]
    MissingColumn(String),
    #[error("model kind is {found}, expected {expected}")]
    KindMismatch { expected: ModelKind, found: ModelKind },
    #[error("malformed model: {0}")]
    Format(String),
    #[error("cannot read model {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "peel-classifier")]
    PeelClassifier,
    #[serde(rename = "unroll-regressor")]
    UnrollRegressor,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::PeelClassifier => "peel-classifier",
            ModelKind::UnrollRegressor => "unroll-regressor",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Weights {
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bias {
    Scalar(f64),
    Vector(Vec<f64>),
}

fn default_threshold() -> f64 {
    0.5
}

fn default_factors() -> Vec<u32> {
    vec![1, 2, 4, 8, 16, 32]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub kind: ModelKind,
    pub feature_names: Vec<String>,
    pub scaler: ModelScaler,
    pub weights: Weights,
    pub bias: Bias,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_factors")]
    pub factors: Vec<u32>,
    #[serde(default)]
    pub version: u32,
}

/// A model with weights normalized to one row per output.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub file: ModelFile,
    /// One row per output (a single row for the classifier, one per factor).
    rows: Vec<Vec<f64>>,
    biases: Vec<f64>,
    /// Schema position of each model feature.
    columns: Vec<usize>,
}

fn format_err(msg: impl Into<String>) -> ModelError {
    ModelError::Format(msg.into())
}

impl Model {
    pub fn from_file(file: ModelFile) -> Result<Model, ModelError> {
        let k = file.feature_names.len();
        if file.scaler.mean.len() != k || file.scaler.std.len() != k {
            return Err(format_err("scaler length differs from feature_names"));
        }
        if file.scaler.std.iter().any(|s| s.is_nan() || *s <= 0.0) {
            return Err(format_err("scaler std must be positive"));
        }
        let schema = schema();
        let columns = file
            .feature_names
            .iter()
            .map(|n| schema.index_of(n).ok_or_else(|| ModelError::SchemaMismatch(n.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let (rows, biases) = match file.kind {
            ModelKind::PeelClassifier => {
                let Weights::Vector(w) = &file.weights else {
                    return Err(format_err("classifier weights must be a vector"));
                };
                let Bias::Scalar(b) = file.bias else {
                    return Err(format_err("classifier bias must be a number"));
                };
                if w.len() != k {
                    return Err(format_err("weight length differs from feature_names"));
                }
                (vec![w.clone()], vec![b])
            }
            ModelKind::UnrollRegressor => {
                let nf = file.factors.len();
                if !file.factors.contains(&1) {
                    return Err(format_err("factor 1 must be a candidate"));
                }
                let Weights::Matrix(w) = &file.weights else {
                    return Err(format_err("regressor weights must be a matrix"));
                };
                let per_factor = w.len() == nf && w.iter().all(|r| r.len() == k);
                let rows = if per_factor {
                    w.clone()
                } else if w.len() == k && w.iter().all(|r| r.len() == nf) {
                    (0..nf).map(|f| w.iter().map(|r| r[f]).collect()).collect()
                } else {
                    return Err(format_err("weight matrix shape matches neither factors x features nor features x factors"));
                };
                let biases = match &file.bias {
                    Bias::Scalar(b) => vec![*b; nf],
                    Bias::Vector(v) if v.len() == nf => v.clone(),
                    Bias::Vector(_) => return Err(format_err("bias length differs from factors")),
                };
                (rows, biases)
            }
        };
        Ok(Model {
            file,
            rows,
            biases,
            columns,
        })
    }

    pub fn load(path: &Path) -> Result<Model, ModelError> {
        let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Model, ModelError> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| format_err(e.to_string()))?;
        Model::from_file(file)
    }

    pub fn kind(&self) -> ModelKind {
        self.file.kind
    }

    /// Standardizes raw schema-ordered features into model order.
    pub fn standardize(&self, raw: &[f64]) -> Vec<f64> {
        self.columns
            .iter()
            .enumerate()
            .map(|(j, &c)| (raw[c] - self.file.scaler.mean[j]) / self.file.scaler.std[j])
            .collect()
    }

    /// Model-order inputs for a dataset row. With `scaler` the row holds
    /// z-scores from the dataset pipeline; matching scalers pass them through.
    pub fn standardize_row(
        &self,
        names: &[String],
        values: &[f64],
        scaler: Option<&Scaler>,
    ) -> Result<Vec<f64>, ModelError> {
        let (mean, std) = (&self.file.scaler.mean, &self.file.scaler.std);
        self.file
            .feature_names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let c = names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| ModelError::MissingColumn(name.clone()))?;
                let x = values[c];
                Ok(match scaler {
                    None => (x - mean[j]) / std[j],
                    Some(s) => {
                        let k = s
                            .feature_names
                            .iter()
                            .position(|n| n == name)
                            .ok_or_else(|| ModelError::MissingColumn(name.clone()))?;
                        if s.mean[k] == mean[j] && s.std[k] == std[j] {
                            x
                        } else {
                            (x * s.std[k] + s.mean[k] - mean[j]) / std[j]
                        }
                    }
                })
            })
            .collect()
    }

    /// Peel: 0 or 1. Unroll: the factor.
    pub fn predict_standardized(&self, phase: Phase, z: &[f64]) -> Result<u32, ModelError> {
        match phase {
            Phase::Peel => self.predict_peel_standardized(z).map(u32::from),
            Phase::Unroll => self.predict_unroll_standardized(z),
        }
    }

    fn expect(&self, kind: ModelKind) -> Result<(), ModelError> {
        if self.file.kind == kind {
            Ok(())
        } else {
            Err(ModelError::KindMismatch {
                expected: kind,
                found: self.file.kind,
            })
        }
    }

    fn outputs(&self, z: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.iter().zip(z).map(|(w, z)| w * z).sum::<f64>() + b)
            .collect()
    }

    /// Peel decision from standardized features in model order.
    pub fn predict_peel_standardized(&self, z: &[f64]) -> Result<bool, ModelError> {
        self.expect(ModelKind::PeelClassifier)?;
        let s = self.outputs(z)[0];
        Ok(1.0 / (1.0 + (-s).exp()) >= self.file.threshold)
    }

    /// Unroll factor from standardized features in model order.
    pub fn predict_unroll_standardized(&self, z: &[f64]) -> Result<u32, ModelError> {
        self.expect(ModelKind::UnrollRegressor)?;
        Ok(argmax_factor(&self.file.factors, &self.outputs(z)))
    }

    pub fn predict_peel(&self, fv: &FeatureVector) -> Result<bool, ModelError> {
        self.predict_peel_standardized(&self.standardize(&fv.values))
    }

    pub fn predict_unroll(&self, fv: &FeatureVector) -> Result<u32, ModelError> {
        self.predict_unroll_standardized(&self.standardize(&fv.values))
    }

    /// Peel: 0 or 1. Unroll: the factor.
    pub fn predict(&self, phase: Phase, fv: &FeatureVector) -> Result<u32, ModelError> {
        match phase {
            Phase::Peel => self.predict_peel(fv).map(u32::from),
            Phase::Unroll => self.predict_unroll(fv),
        }
    }
}

/// Factor with the highest prediction; ties go to the smallest factor.
pub fn argmax_factor(factors: &[u32], predictions: &[f64]) -> u32 {
    let mut best: Option<(u32, f64)> = None;
    for (&f, &p) in factors.iter().zip(predictions) {
        best = match best {
            Some((bf, bp)) if bp > p || (bp == p && bf < f) => Some((bf, bp)),
            _ => Some((f, p)),
        };
    }
    best.map_or(1, |(f, _)| f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn method(i: u64, tb: f64, decisions: &[&[(u32, f64)]]) -> MethodRecord {
        MethodRecord {
            benchmark: "b".into(),
            function: "m".into(),
            unit_id: 0,
            invocations: i,
            baseline_avg: tb,
            decisions: decisions
                .iter()
                .enumerate()
                .map(|(k, d)| DecisionRecord {
                    loop_id: Some(LoopId(k as u32)),
                    phase: Phase::Peel,
                    averages: d.iter().copied().chain([(0, tb)]).collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn estimate_substitution() {
        let m = method(10, 100.0, &[&[(1, 90.0)], &[(1, 120.0)]]);
        assert_eq!(estimate_method(&m, &[1, 1]).unwrap(), 1100.0);
        assert_eq!(estimate_method(&m, &[0, 0]).unwrap(), 1000.0);
        assert_eq!(
            estimate_method(&m, &[4, 0]),
            Err(AnalysisError::MissingMeasurement { decision: 0, param: 4 })
        );
        let single = method(2, 100.0, &[&[(1, 80.0)]]);
        assert_eq!(estimate_best(&single).unwrap(), 160.0);
        assert_eq!(estimate_benchmark(&[m.clone(), single], |r| vec![1; r.decisions.len()]).unwrap(), 1260.0);
        assert_eq!(best_params(&m), vec![1, 0]);
        assert_eq!(estimate_best(&m).unwrap(), estimate_method(&m, &best_params(&m)).unwrap());
    }

    #[test]
    fn classification_boundaries() {
        assert_eq!(classify(true, 1.2), Class::TP);
        assert_eq!(classify(true, 0.8), Class::FP);
        assert_eq!(classify(false, 1.5), Class::FN);
        assert_eq!(classify(false, 0.5), Class::TN);
        assert_eq!(classify(true, 1.0), Class::TP);
        assert_eq!(classify(false, 1.0), Class::TN);
    }

    #[test]
    fn histogram_bins() {
        let h = histogram(&[(true, 10.0), (false, 1.0), (true, 1e6), (true, 1e-9)], 1, None).unwrap();
        assert_eq!(h.bin_of(10.0), 1);
        assert_eq!(h.bin_of(1.0), 0);
        assert_eq!(h.bin(1).tp, 1);
        assert_eq!(h.bin(0).tn, 1);
        assert_eq!(h.bin(2).tp, 1);
        assert_eq!(h.bin(-2).fp, 1);
        assert_eq!(h.counts.iter().map(|c| c.total()).sum::<usize>(), 4);
        assert!(matches!(histogram(&[(true, 0.0)], 1, None), Err(AnalysisError::NonPositiveSpeedup(_))));
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("bin_center,tp,tn,fp,fn,total\n"));
        assert!(text.contains("\n10,1,0,0,0,1\n"));
    }

    #[test]
    fn geomean_cases() {
        assert!((geomean(&[1.0, 4.0]).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(geomean(&[3.5]).unwrap(), 3.5);
        assert!(geomean(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn ranksum_examples() {
        let r = ranksum_test(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]);
        assert_eq!(r.u, 0.0);
        assert!((r.p - 0.1).abs() < 1e-15);
        assert!(r.exact);
        let same = ranksum_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]);
        assert_eq!(same.p, 1.0);
        let big_a: Vec<f64> = (0..10).map(f64::from).collect();
        let big_b: Vec<f64> = (5..15).map(f64::from).collect();
        let (ab, ba) = (ranksum_test(&big_a, &big_b), ranksum_test(&big_b, &big_a));
        assert!(!ab.exact);
        assert_eq!(ab.p, ba.p);
        assert!(ab.p > 0.0 && ab.p < 0.2);
    }

    #[test]
    fn heuristics() {
        let s = schema();
        let fv = |size: f64, freq: f64, exact: f64| {
            let mut values = vec![0.0; s.len()];
            values[s.index_of("size").unwrap()] = size;
            values[s.index_of("frequency").unwrap()] = freq;
            values[s.index_of("has_exact_trip_count").unwrap()] = exact;
            FeatureVector {
                schema_version: s.version.to_string(),
                values,
            }
        };
        assert!(heuristic_peel(&fv(10.0, 100.0, 0.0)));
        assert!(!heuristic_peel(&fv(50.0, 100.0, 0.0)));
        assert!(!heuristic_peel(&fv(10.0, 1.0, 0.0)));
        assert_eq!(heuristic_unroll(&fv(20.0, 0.0, 1.0)), 4);
        assert_eq!(heuristic_unroll(&fv(20.0, 0.0, 0.0)), 1);
        assert_eq!(heuristic_unroll(&fv(200.0, 0.0, 1.0)), 1);
    }

    fn peel_model(threshold: f64) -> String {
        format!(
            r#"{{"kind":"peel-classifier","feature_names":["size","frequency"],
               "scaler":{{"mean":[0,0],"std":[1,1]}},"weights":[0,0],"bias":0,
               "threshold":{threshold},"factors":[1,2,4,8,16,32],"version":1}}"#
        )
    }

    #[test]
    fn model_boundaries_and_errors() {
        let m = Model::parse(&peel_model(0.5)).unwrap();
        assert!(m.predict_peel_standardized(&[3.0, -2.0]).unwrap());
        assert!(!Model::parse(&peel_model(0.6)).unwrap().predict_peel_standardized(&[0.0, 0.0]).unwrap());
        assert!(matches!(m.predict_unroll_standardized(&[0.0, 0.0]), Err(ModelError::KindMismatch { .. })));
        let bad = peel_model(0.5).replace("\"frequency\"", "\"bogus\"");
        assert!(matches!(Model::parse(&bad), Err(ModelError::SchemaMismatch(_))));
        assert!(matches!(Model::parse("{"), Err(ModelError::Format(_))));
        let zero_std = peel_model(0.5).replace("\"std\":[1,1]", "\"std\":[1,0]");
        assert!(matches!(Model::parse(&zero_std), Err(ModelError::Format(_))));
    }

    #[test]
    fn unroll_argmax_and_ties() {
        let fs = [1, 2, 4, 8, 16, 32];
        assert_eq!(argmax_factor(&fs, &[0.0, 0.2, 0.1, -0.3, -0.5, -0.9]), 2);
        assert_eq!(argmax_factor(&fs, &[0.7; 6]), 1);
        assert_eq!(argmax_factor(&[4, 2, 1], &[0.5, 0.5, 0.1]), 2);
        let text = r#"{"kind":"unroll-regressor","feature_names":["size"],
            "scaler":{"mean":[0],"std":[1]},
            "weights":[[0],[0],[0],[0],[0],[0]],"bias":[0.0,0.2,0.1,-0.3,-0.5,-0.9],
            "threshold":0.5,"factors":[1,2,4,8,16,32],"version":1}"#;
        let m = Model::parse(text).unwrap();
        assert_eq!(m.predict_unroll_standardized(&[5.0]).unwrap(), 2);
        // Features x factors layout is accepted too.
        let transposed = text.replace("[[0],[0],[0],[0],[0],[0]]", "[[0,0,0,0,0,0]]");
        assert_eq!(Model::parse(&transposed).unwrap().predict_unroll_standardized(&[5.0]).unwrap(), 2);
    }
}

//! Data points joining per-fork measurements with loop features and
//! decisions, plus the cleaning steps applied before training.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{heuristic_peel, heuristic_unroll};
use crate::features::FeatureVector;
use crate::lang::LoopId;
use crate::loopopts::Phase;
use crate::selftime::{fork_avg, invocations_slot, total_time_slot, RunMeta};

pub const META_COLUMNS: [&str; 13] = [
    "benchmark",
    "function",
    "unit_id",
    "loop_id",
    "phase",
    "param",
    "invocations",
    "total_time",
    "avg_time",
    "baseline_avg",
    "speedup",
    "heuristic_decision",
    "is_baseline",
];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("unit {unit_id} of `{function}` has no baseline invocations")]
    MissingBaseline { function: String, unit_id: usize },
    #[error("feature `{0}` has zero variance")]
    ZeroVariance(String),
    #[error("row {row}: {message}")]
    Format { row: usize, message: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataPoint {
    pub benchmark: String,
    pub function: String,
    pub unit_id: usize,
    pub loop_id: Option<LoopId>,
    pub phase: Phase,
    /// Peel: 0 or 1. Unroll: the factor.
    pub param: u32,
    pub invocations: u64,
    pub total_time: u64,
    pub avg_time: f64,
    pub baseline_avg: f64,
    /// `baseline_avg / avg_time`, or 0 when undefined.
    pub speedup: f64,
    pub heuristic_decision: u32,
    pub is_baseline: bool,
    pub features: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub rows: Vec<DataPoint>,
}

/// Features captured for each fork of a unit, indexed by fork.
#[derive(Clone, Debug, Default)]
pub struct UnitFeatures {
    pub unit_id: usize,
    pub per_fork: Vec<Option<FeatureVector>>,
}

fn heuristic_for(phase: Phase, fv: &FeatureVector) -> u32 {
    match phase {
        Phase::Peel => heuristic_peel(fv) as u32,
        Phase::Unroll => heuristic_unroll(fv),
    }
}

/// One row per non-baseline fork, plus one baseline row per decision loop
/// carrying that loop's features.
pub fn build(
    benchmark: &str,
    slots: &[u64],
    meta: &RunMeta,
    features: &[UnitFeatures],
    feature_names: &[String],
) -> Result<Dataset, DatasetError> {
    let mut rows = Vec::new();
    let width = feature_names.len();
    for unit in &meta.units {
        let base = unit.storage_base;
        let read = |k: usize| (slots[invocations_slot(base, k)], slots[total_time_slot(base, k)]);
        let (b_inv, b_tot) = read(0);
        let baseline_avg = fork_avg(b_inv, b_tot).ok_or_else(|| DatasetError::MissingBaseline {
            function: unit.function.clone(),
            unit_id: unit.unit_id,
        })?;
        let unit_features = features.iter().find(|u| u.unit_id == unit.unit_id);
        let fv_of = |k: usize| unit_features.and_then(|u| u.per_fork.get(k).cloned().flatten());
        let mut seen_loops = Vec::new();
        for fork in unit.forks.iter().skip(1) {
            let Some(l) = fork.loop_id else { continue };
            let fv = fv_of(fork.index);
            let values = fv.as_ref().map_or_else(|| vec![0.0; width], |f| f.values.clone());
            let heuristic = fv.as_ref().map_or(unit.phase.identity_param(), |f| heuristic_for(unit.phase, f));
            if !seen_loops.contains(&l) {
                seen_loops.push(l);
                rows.push(DataPoint {
                    benchmark: benchmark.to_string(),
                    function: unit.function.clone(),
                    unit_id: unit.unit_id,
                    loop_id: Some(l),
                    phase: unit.phase,
                    param: unit.phase.identity_param(),
                    invocations: b_inv,
                    total_time: b_tot,
                    avg_time: baseline_avg,
                    baseline_avg,
                    speedup: 1.0,
                    heuristic_decision: heuristic,
                    is_baseline: true,
                    features: values.clone(),
                });
            }
            let (inv, tot) = read(fork.index);
            let avg = fork_avg(inv, tot).unwrap_or(0.0);
            let speedup = if avg > 0.0 { baseline_avg / avg } else { 0.0 };
            rows.push(DataPoint {
                benchmark: benchmark.to_string(),
                function: unit.function.clone(),
                unit_id: unit.unit_id,
                loop_id: Some(l),
                phase: unit.phase,
                param: fork.param,
                invocations: inv,
                total_time: tot,
                avg_time: avg,
                baseline_avg,
                speedup,
                heuristic_decision: heuristic,
                is_baseline: false,
                features: values,
            });
        }
    }
    Ok(Dataset {
        feature_names: feature_names.to_vec(),
        rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub min_invocations: u64,
    pub min_avg_time: f64,
    pub eps_speedup: f64,
    pub sparsity_threshold: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_invocations: 100,
            min_avg_time: 50.0,
            eps_speedup: 0.01,
            sparsity_threshold: 0.05,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterStats {
    pub raw: usize,
    pub filtered: usize,
    /// Percentage of rows kept, one decimal.
    pub percent: f64,
}

impl FilterStats {
    pub fn new(raw: usize, filtered: usize) -> Self {
        let percent = if raw == 0 {
            100.0
        } else {
            (1000.0 * filtered as f64 / raw as f64).round() / 10.0
        };
        FilterStats { raw, filtered, percent }
    }
}

impl fmt::Display for FilterStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "raw={}, filtered={}, pct={:.1}%", self.raw, self.filtered, self.percent)
    }
}

type UnitKey = (String, String, usize);

fn unit_key(r: &DataPoint) -> UnitKey {
    (r.benchmark.clone(), r.function.clone(), r.unit_id)
}

/// Drops low-signal rows. Baseline rows are always kept and not counted.
pub fn filter(data: &Dataset, cfg: &FilterConfig) -> (Dataset, FilterStats) {
    let baseline_inv: BTreeMap<UnitKey, u64> = data
        .rows
        .iter()
        .filter(|r| r.is_baseline)
        .map(|r| (unit_key(r), r.invocations))
        .collect();
    let mut raw = 0;
    let mut kept = 0;
    let rows = data
        .rows
        .iter()
        .filter(|r| {
            if r.is_baseline {
                return true;
            }
            raw += 1;
            let b_inv = baseline_inv.get(&unit_key(r)).copied().unwrap_or(0);
            let keep = r.invocations >= cfg.min_invocations
                && b_inv >= cfg.min_invocations
                && r.avg_time >= cfg.min_avg_time
                && r.speedup > 0.0
                && r.speedup.ln().abs() >= cfg.eps_speedup;
            kept += keep as usize;
            keep
        })
        .cloned()
        .collect();
    (
        Dataset {
            feature_names: data.feature_names.clone(),
            rows,
        },
        FilterStats::new(raw, kept),
    )
}

/// Removes features that are mostly zero or constant over all rows.
pub fn sparsity_reduce(data: &Dataset, threshold: f64) -> Dataset {
    let n = data.rows.len();
    let keep: Vec<usize> = (0..data.feature_names.len())
        .filter(|&j| {
            if n == 0 {
                return false;
            }
            let col = data.rows.iter().map(|r| r.features[j]);
            let nonzero = col.clone().filter(|v| *v != 0.0).count();
            let first = data.rows[0].features[j];
            let constant = col.clone().all(|v| v == first);
            (nonzero as f64 / n as f64) >= threshold && !constant
        })
        .collect();
    project(data, &keep)
}

fn project(data: &Dataset, keep: &[usize]) -> Dataset {
    Dataset {
        feature_names: keep.iter().map(|&j| data.feature_names[j].clone()).collect(),
        rows: data
            .rows
            .iter()
            .map(|r| DataPoint {
                features: keep.iter().map(|&j| r.features[j]).collect(),
                ..r.clone()
            })
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub feature_names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn transform(&self, j: usize, x: f64) -> f64 {
        (x - self.mean[j]) / self.std[j]
    }

    pub fn write(&self, path: &Path) -> Result<(), DatasetError> {
        let json = serde_json::to_string_pretty(self).expect("scaler serializes");
        fs::write(path, json + "\n").map_err(io_err(path))
    }

    pub fn read(path: &Path) -> Result<Scaler, DatasetError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| DatasetError::Format {
            row: 0,
            message: format!("{}: {e}", path.display()),
        })
    }
}

/// Z-scores every feature with population mean and standard deviation.
pub fn standardize(data: &Dataset) -> Result<(Dataset, Scaler), DatasetError> {
    let n = data.rows.len() as f64;
    let mut mean = Vec::new();
    let mut std = Vec::new();
    for (j, name) in data.feature_names.iter().enumerate() {
        let m = data.rows.iter().map(|r| r.features[j]).sum::<f64>() / n;
        let var = data.rows.iter().map(|r| (r.features[j] - m).powi(2)).sum::<f64>() / n;
        let s = var.sqrt();
        if s.is_nan() || s <= 0.0 {
            return Err(DatasetError::ZeroVariance(name.clone()));
        }
        mean.push(m);
        std.push(s);
    }
    let scaler = Scaler {
        feature_names: data.feature_names.clone(),
        mean,
        std,
    };
    let rows = data
        .rows
        .iter()
        .map(|r| DataPoint {
            features: r.features.iter().enumerate().map(|(j, x)| scaler.transform(j, *x)).collect(),
            ..r.clone()
        })
        .collect();
    Ok((
        Dataset {
            feature_names: data.feature_names.clone(),
            rows,
        },
        scaler,
    ))
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: io::Write>(data: &Dataset, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<&str> = META_COLUMNS
        .iter()
        .copied()
        .chain(data.feature_names.iter().map(String::as_str))
        .collect();
    w.write_record(&header)?;
    for r in &data.rows {
        let mut rec = vec![
            r.benchmark.clone(),
            r.function.clone(),
            r.unit_id.to_string(),
            r.loop_id.map_or_else(String::new, |l| l.0.to_string()),
            r.phase.to_string(),
            r.param.to_string(),
            r.invocations.to_string(),
            r.total_time.to_string(),
            num(r.avg_time),
            num(r.baseline_avg),
            num(r.speedup),
            r.heuristic_decision.to_string(),
            (r.is_baseline as u8).to_string(),
        ];
        rec.extend(r.features.iter().map(|x| num(*x)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_csv(data: &Dataset, path: &Path) -> Result<(), DatasetError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    write_csv(data, io::BufWriter::new(file)).map_err(|e| DatasetError::Format {
        row: 0,
        message: e.to_string(),
    })
}

pub fn read_csv<R: io::Read>(input: R) -> Result<Dataset, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let fmt = |row: usize, message: String| DatasetError::Format { row, message };
    let header = rdr.headers().map_err(|e| fmt(0, e.to_string()))?.clone();
    if header.len() < META_COLUMNS.len() || header.iter().zip(META_COLUMNS).any(|(a, b)| a != b) {
        return Err(fmt(0, format!("header must start with {}", META_COLUMNS.join(","))));
    }
    let feature_names: Vec<String> = header.iter().skip(META_COLUMNS.len()).map(String::from).collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| fmt(row, e.to_string()))?;
        if rec.len() != header.len() {
            return Err(fmt(row, format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        let field = |j: usize| &rec[j];
        fn parse<T: std::str::FromStr>(s: &str, name: &str, row: usize) -> Result<T, DatasetError> {
            s.parse().map_err(|_| DatasetError::Format {
                row,
                message: format!("bad {name} `{s}`"),
            })
        }
        let loop_id = match field(3) {
            "" => None,
            s => Some(LoopId(parse(s, "loop_id", row)?)),
        };
        let is_baseline = match field(12) {
            "0" => false,
            "1" => true,
            s => return Err(fmt(row, format!("bad is_baseline `{s}`"))),
        };
        let features = (META_COLUMNS.len()..rec.len())
            .map(|j| parse::<f64>(field(j), &header[j], row))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(DataPoint {
            benchmark: field(0).to_string(),
            function: field(1).to_string(),
            unit_id: parse(field(2), "unit_id", row)?,
            loop_id,
            phase: field(4).parse().map_err(|e: String| fmt(row, e))?,
            param: parse(field(5), "param", row)?,
            invocations: parse(field(6), "invocations", row)?,
            total_time: parse(field(7), "total_time", row)?,
            avg_time: parse(field(8), "avg_time", row)?,
            baseline_avg: parse(field(9), "baseline_avg", row)?,
            speedup: parse(field(10), "speedup", row)?,
            heuristic_decision: parse(field(11), "heuristic_decision", row)?,
            is_baseline,
            features,
        });
    }
    Ok(Dataset { feature_names, rows })
}

pub fn import_csv(path: &Path) -> Result<Dataset, DatasetError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    read_csv(io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selftime::{ForkMeta, UnitMeta};

    fn row(param: u32, inv: u64, avg: f64, base_avg: f64, baseline: bool) -> DataPoint {
        DataPoint {
            benchmark: "b".into(),
            function: "f".into(),
            unit_id: 0,
            loop_id: Some(LoopId(0)),
            phase: Phase::Unroll,
            param,
            invocations: inv,
            total_time: (avg * inv as f64) as u64,
            avg_time: avg,
            baseline_avg: base_avg,
            speedup: if baseline { 1.0 } else { base_avg / avg },
            heuristic_decision: 1,
            is_baseline: baseline,
            features: vec![param as f64, 0.0, 7.0],
        }
    }

    fn data(rows: Vec<DataPoint>) -> Dataset {
        Dataset {
            feature_names: vec!["a".into(), "zero".into(), "seven".into()],
            rows,
        }
    }

    fn meta(forks: Vec<ForkMeta>) -> RunMeta {
        RunMeta {
            units: vec![UnitMeta {
                unit_id: 0,
                function: "f".into(),
                phase: Phase::Peel,
                storage_base: 0,
                n_forks: forks.len(),
                forks,
                dropped: Vec::new(),
            }],
            clock: crate::runtime::ClockMode::Virtual,
            cost_table_version: "v1".into(),
        }
    }

    fn two_forks() -> Vec<ForkMeta> {
        vec![
            ForkMeta {
                index: 0,
                loop_id: None,
                param: 0,
            },
            ForkMeta {
                index: 1,
                loop_id: Some(LoopId(0)),
                param: 1,
            },
        ]
    }

    #[test]
    fn build_speedups() {
        let names = vec!["x".to_string()];
        let d = build("b", &[0, 10, 1000, 10, 800], &meta(two_forks()), &[], &names).unwrap();
        assert_eq!(d.rows.len(), 2);
        assert!(d.rows[0].is_baseline && d.rows[0].speedup == 1.0);
        assert_eq!(d.rows[1].speedup, 1.25);
        let d = build("b", &[0, 10, 1000, 10, 1250], &meta(two_forks()), &[], &names).unwrap();
        assert_eq!(d.rows[1].speedup, 0.8);
        assert!(matches!(
            build("b", &[0, 0, 0, 10, 800], &meta(two_forks()), &[], &names),
            Err(DatasetError::MissingBaseline { .. })
        ));
    }

    #[test]
    fn table_two_percentage() {
        let s = FilterStats::new(28928, 23697);
        assert_eq!(s.percent, 81.9);
        assert_eq!(s.to_string(), "raw=28928, filtered=23697, pct=81.9%");
        assert_eq!(FilterStats::new(0, 0).percent, 100.0);
    }

    #[test]
    fn filter_rules() {
        let d = data(vec![
            row(1, 200, 100.0, 100.0, true),
            row(2, 200, 100.0 / 1.001, 100.0, false),
            row(4, 200, 80.0, 100.0, false),
            row(8, 50, 80.0, 100.0, false),
            row(16, 200, 10.0, 100.0, false),
        ]);
        let (out, stats) = filter(&d, &FilterConfig::default());
        assert_eq!(out.rows.iter().map(|r| r.param).collect::<Vec<_>>(), vec![1, 4]);
        assert_eq!((stats.raw, stats.filtered), (4, 1));
        let (again, _) = filter(&out, &FilterConfig::default());
        assert_eq!(again, out);
        let (empty, s) = filter(&data(vec![]), &FilterConfig::default());
        assert!(empty.rows.is_empty());
        assert_eq!(s.percent, 100.0);
    }

    #[test]
    fn sparsity_drops_zero_and_constant_columns() {
        let d = data(vec![row(1, 1, 1.0, 1.0, true), row(0, 1, 1.0, 1.0, false)]);
        let r = sparsity_reduce(&d, 0.05);
        assert_eq!(r.feature_names, vec!["a".to_string()]);
        assert_eq!(r.rows[0].features, vec![1.0]);
    }

    #[test]
    fn standardize_one_two_three() {
        let mut d = data(vec![row(1, 1, 1.0, 1.0, false), row(2, 1, 1.0, 1.0, false), row(3, 1, 1.0, 1.0, false)]);
        d.feature_names.truncate(1);
        for r in &mut d.rows {
            r.features.truncate(1);
        }
        let (z, s) = standardize(&d).unwrap();
        // Two-pass reference.
        let xs = [1.0f64, 2.0, 3.0];
        let m = xs.iter().sum::<f64>() / 3.0;
        let sd = (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 3.0).sqrt();
        assert_eq!(s.mean[0], m);
        assert!((s.std[0] - sd).abs() < 1e-15);
        assert!((s.std[0] - 0.81650).abs() < 1e-5);
        let vals: Vec<f64> = z.rows.iter().map(|r| r.features[0]).collect();
        for (v, e) in vals.iter().zip([-1.22474, 0.0, 1.22474]) {
            assert!((v - e).abs() < 1e-5);
        }
        let (zz, _) = standardize(&z).unwrap();
        for (a, b) in zz.rows.iter().zip(&z.rows) {
            assert!((a.features[0] - b.features[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_variance_is_an_error() {
        let d = data(vec![row(1, 1, 1.0, 1.0, false), row(1, 1, 1.0, 1.0, false)]);
        assert!(matches!(standardize(&d), Err(DatasetError::ZeroVariance(_))));
    }

    #[test]
    fn csv_round_trip() {
        let mut d = data(vec![row(1, 200, 100.0, 100.0, true), row(4, 200, 1.0 / 3.0, 100.0, false)]);
        d.rows[1].loop_id = None;
        d.rows[1].features[1] = 0.1 + 0.2;
        let mut buf = Vec::new();
        write_csv(&d, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("benchmark,function,"));
        assert!(text.lines().next().unwrap().ends_with("a,zero,seven"));
        assert_eq!(read_csv(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn csv_width_mismatch_names_the_row() {
        let mut buf = Vec::new();
        write_csv(&data(vec![row(1, 1, 1.0, 1.0, true)]), &mut buf).unwrap();
        let mut text = String::from_utf8(buf).unwrap();
        text.push_str("b,f,0,0,unroll,2\n");
        assert!(matches!(read_csv(text.as_bytes()), Err(DatasetError::Format { row: 2, .. })));
    }
}

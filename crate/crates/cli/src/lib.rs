//! The `forklab` command line.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::rc::Rc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use forklab_core::analysis::{
    classify, estimate_method, histogram, method_records, ranksum_test, write_estimates, Class, ClassCounts,
    EstimateRow, MethodRecord, Model, ModelError,
};
use forklab_core::corpus::{self, Driver};
use forklab_core::dataset::{self, DataPoint, Dataset, FilterConfig, Scaler};
use forklab_core::loopopts::Phase;
use forklab_core::selftime::OutlierConfig;
use forklab_core::session::{self, DecisionSource, RunConfig, SessionError};
use forklab_core::{parse, ClockMode, Program};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "forklab", version, about = "Compilation forking for MiniLang", args_override_self = true)]
struct Cli {
    /// JSON object supplying flag values; explicit flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run a program with the built-in heuristics.
    Run(ExecArgs),
    /// Run a program with forking and persist the measurements.
    Forkgen(ForkgenArgs),
    /// Turn run directories into a cleaned dataset.
    Export(ExportArgs),
    /// Decision-quality reports over a dataset.
    #[command(subcommand)]
    Analyze(AnalyzeCmd),
    /// Estimated method times under a decision source.
    Estimate(EstimateArgs),
    /// Rank-sum test between one column of two CSV files.
    Compare(CompareArgs),
    /// Run a program with a learned model making the decisions.
    Predict(PredictArgs),
}

#[derive(Args, Debug)]
struct ExecArgs {
    /// Program file, or the name of a bundled corpus program.
    program: String,
    #[arg(long, default_value = "peel")]
    opt: Phase,
    #[arg(long, default_value = "virtual")]
    clock: ClockMode,
    /// Entry-point calls.
    #[arg(long, default_value_t = 1000)]
    invocations: u64,
    /// Seed for the driver's argument vectors.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = forklab_core::runtime::DEFAULT_COMPILE_THRESHOLD)]
    compile_threshold: u64,
    #[arg(long, default_value_t = forklab_core::forking::DEFAULT_MAX_LOOPS)]
    max_loops: usize,
}

#[derive(Args, Debug)]
struct ForkgenArgs {
    #[command(flatten)]
    exec: ExecArgs,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long, default_value_t = OutlierConfig::default().factor)]
    outlier_factor: f64,
    #[arg(long, default_value_t = OutlierConfig::default().warmup)]
    outlier_warmup: u64,
    #[arg(long)]
    no_outlier: bool,
    /// Install the fastest fork of each unit at the end of the run.
    #[arg(long)]
    finalize: bool,
    #[arg(long, default_value_t = FilterConfig::default().min_invocations)]
    min_inv: u64,
    /// Also compare total cost without a compiler, with plain compilation
    /// and with forking.
    #[arg(long)]
    report_overhead: bool,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[arg(required = true, value_name = "RUN_DIR")]
    runs: Vec<PathBuf>,
    #[arg(long, default_value_t = FilterConfig::default().min_invocations)]
    min_inv: u64,
    #[arg(long, default_value_t = FilterConfig::default().min_avg_time)]
    min_avg: f64,
    #[arg(long, default_value_t = FilterConfig::default().eps_speedup)]
    eps_speedup: f64,
    #[arg(long, default_value_t = FilterConfig::default().sparsity_threshold)]
    sparsity: f64,
    /// Keep every row.
    #[arg(long)]
    no_filter: bool,
    /// Keep every feature column.
    #[arg(long)]
    keep_all_features: bool,
    /// Z-score the features and write a scaler sidecar.
    #[arg(long)]
    standardize: bool,
    #[arg(long, value_name = "FILE")]
    csv: PathBuf,
    /// Scaler output path; defaults to scaler.json beside the CSV.
    #[arg(long, value_name = "FILE")]
    scaler: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DataArgs {
    data: PathBuf,
    #[arg(long, default_value = "peel")]
    opt: Phase,
    /// Take decisions from a model instead of the built-in heuristic.
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Scaler the dataset was standardized with, if any.
    #[arg(long, value_name = "FILE")]
    scaler: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum AnalyzeCmd {
    /// Speedup histogram split by decision outcome.
    Histogram {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 4)]
        bins_per_decade: u32,
        /// Outermost bin index; defaults to two decades.
        #[arg(long)]
        k_max: Option<i32>,
    },
    /// Per-row TP/TN/FP/FN classification.
    Classify {
        #[command(flatten)]
        data: DataArgs,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Source {
    Heuristic,
    Model,
    Best,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "heuristic")]
    source: Source,
}

#[derive(Args, Debug)]
struct CompareArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(long, default_value = "predicted_estimate")]
    column: String,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[command(flatten)]
    exec: ExecArgs,
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
    Data(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Runtime(_) => EXIT_RUNTIME,
            Failure::Data(_) => EXIT_DATA,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) | Failure::Data(m) => m,
        }
    }
}

impl From<SessionError> for Failure {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Config(_) | SessionError::NoEntry(_) => Failure::Usage(e.to_string()),
            SessionError::Runtime(_) => Failure::Runtime(e.to_string()),
            SessionError::Persist(_) | SessionError::Dataset(_) | SessionError::Model(_) => {
                Failure::Data(e.to_string())
            }
        }
    }
}

impl From<dataset::DatasetError> for Failure {
    fn from(e: dataset::DatasetError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::Data(e.to_string())
    }
}

fn data_err(e: impl std::fmt::Display) -> Failure {
    Failure::Data(e.to_string())
}

type Res<T> = Result<T, Failure>;

/// Config entries become flags placed right after the subcommand, so that
/// explicit flags later on the line override them.
fn expand_config(args: Vec<String>) -> Res<Vec<String>> {
    let pos = args.iter().position(|a| a == "--config" || a.starts_with("--config="));
    let Some(pos) = pos else { return Ok(args) };
    let path = match args[pos].strip_prefix("--config=") {
        Some(p) => p.to_string(),
        None => args
            .get(pos + 1)
            .cloned()
            .ok_or_else(|| Failure::Usage("--config needs a file".into()))?,
    };
    let text = fs::read_to_string(&path).map_err(|e| Failure::Usage(format!("cannot read config {path}: {e}")))?;
    let map: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("config {path} must be a JSON object: {e}")))?;
    let mut flags = Vec::new();
    for (key, value) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            serde_json::Value::Bool(true) => flags.push(flag),
            serde_json::Value::Bool(false) | serde_json::Value::Null => {}
            serde_json::Value::String(s) => flags.extend([flag, s]),
            serde_json::Value::Number(n) => flags.extend([flag, n.to_string()]),
            _ => return Err(Failure::Usage(format!("config key `{key}` must be a scalar"))),
        }
    }
    let insert_at = match args.get(1).map(String::as_str) {
        Some("analyze") => 3,
        _ => 2,
    }
    .min(args.len());
    let mut out = args[..insert_at].to_vec();
    out.extend(flags);
    out.extend_from_slice(&args[insert_at..]);
    Ok(out)
}

fn load_program(name: &str) -> Res<(String, Program, Driver)> {
    let path = Path::new(name);
    let (bench, source) = if path.exists() {
        let text = fs::read_to_string(path).map_err(|e| Failure::Data(format!("cannot read {name}: {e}")))?;
        let stem = path.file_stem().map_or(name.to_string(), |s| s.to_string_lossy().into_owned());
        (stem, text)
    } else if let Some(p) = corpus::program(name) {
        (p.name.to_string(), p.source.to_string())
    } else {
        return Err(Failure::Usage(format!("no program file or corpus entry named `{name}`")));
    };
    let program = parse(&source).map_err(|e| Failure::Data(format!("{name}: {e}")))?;
    let driver = Driver::from_source(&source).map_err(|e| Failure::Data(format!("{name}: {e}")))?;
    Ok((bench, program, driver))
}

fn run_config(a: &ExecArgs) -> RunConfig {
    RunConfig {
        clock: a.clock,
        compile_threshold: a.compile_threshold,
        max_loops: a.max_loops,
        invocations: a.invocations,
        phase: a.opt,
        seed: a.seed,
        ..RunConfig::default()
    }
}

fn print_outcome(out: &mut dyn Write, outcome: &session::RunOutcome) -> Res<()> {
    for v in &outcome.output {
        writeln!(out, "{v}").map_err(data_err)?;
    }
    eprintln!("elapsed: {}", outcome.elapsed);
    match &outcome.error {
        Some(e) => Err(Failure::Runtime(e.clone())),
        None => Ok(()),
    }
}

fn cmd_run(a: &ExecArgs, out: &mut dyn Write) -> Res<()> {
    let (_, program, driver) = load_program(&a.program)?;
    let run = session::decision_run(&program, &driver, &run_config(a), DecisionSource::Heuristic)?;
    print_outcome(out, &run.outcome)
}

fn cmd_predict(a: &PredictArgs, out: &mut dyn Write) -> Res<()> {
    let (_, program, driver) = load_program(&a.exec.program)?;
    let model = Model::load(&a.model)?;
    let run = session::decision_run(&program, &driver, &run_config(&a.exec), DecisionSource::Model(Rc::new(model)))?;
    for d in &run.decisions {
        eprintln!("decision {} loop {} -> {}", d.function, d.loop_id.0, d.param);
    }
    for (f, e) in &run.errors {
        eprintln!("warning: {f} compiled without decisions: {e}");
    }
    print_outcome(out, &run.outcome)
}

fn cmd_forkgen(a: &ForkgenArgs, out: &mut dyn Write) -> Res<()> {
    let (bench, program, driver) = load_program(&a.exec.program)?;
    let cfg = RunConfig {
        outlier: OutlierConfig {
            factor: a.outlier_factor,
            warmup: a.outlier_warmup,
            enabled: !a.no_outlier,
        },
        finalize: a.finalize,
        min_invocations: a.min_inv,
        ..run_config(&a.exec)
    };
    let run = session::forkgen(&bench, &program, &driver, &cfg)?;
    if let Some(e) = &run.outcome.error {
        return Err(Failure::Runtime(e.clone()));
    }
    session::write_run(&a.out, &run)?;
    let w = |r: io::Result<()>| r.map_err(data_err);
    w(writeln!(
        out,
        "units={} rows={} elapsed={}",
        run.meta.units.len(),
        run.dataset.rows.len(),
        run.outcome.elapsed
    ))?;
    for (u, k) in run.meta.units.iter().zip(&run.finalized) {
        if let Some(k) = k {
            w(writeln!(out, "finalized {} -> fork {k}", u.function))?;
        }
    }
    if a.report_overhead {
        let report = session::overhead(&program, &driver, &cfg)?;
        w(writeln!(out, "{report}"))?;
    }
    Ok(())
}

fn cmd_export(a: &ExportArgs, out: &mut dyn Write) -> Res<()> {
    let mut data: Option<Dataset> = None;
    for dir in &a.runs {
        let (_, _, d) = session::read_run(dir)?;
        match &mut data {
            None => data = Some(d),
            Some(acc) if acc.feature_names == d.feature_names => acc.rows.extend(d.rows),
            Some(_) => return Err(Failure::Data(format!("{}: feature columns differ", dir.display()))),
        }
    }
    let mut data = data.expect("at least one run directory");
    let cfg = FilterConfig {
        min_invocations: a.min_inv,
        min_avg_time: a.min_avg,
        eps_speedup: a.eps_speedup,
        sparsity_threshold: a.sparsity,
    };
    if !a.no_filter {
        let (kept, stats) = dataset::filter(&data, &cfg);
        writeln!(out, "{stats}").map_err(data_err)?;
        data = kept;
    }
    if !a.keep_all_features {
        data = dataset::sparsity_reduce(&data, cfg.sparsity_threshold);
    }
    if a.standardize {
        let (z, scaler) = dataset::standardize(&data)?;
        let path = a
            .scaler
            .clone()
            .unwrap_or_else(|| a.csv.parent().unwrap_or(Path::new("")).join("scaler.json"));
        scaler.write(&path)?;
        data = z;
    }
    dataset::export_csv(&data, &a.csv)?;
    Ok(())
}

struct Decider {
    model: Option<Model>,
    scaler: Option<Scaler>,
}

impl Decider {
    fn new(a: &DataArgs) -> Res<Decider> {
        let model = a.model.as_deref().map(Model::load).transpose()?;
        let scaler = a.scaler.as_deref().map(Scaler::read).transpose()?;
        Ok(Decider { model, scaler })
    }

    fn decide(&self, names: &[String], r: &DataPoint) -> Res<u32> {
        match &self.model {
            None => Ok(r.heuristic_decision),
            Some(m) => {
                let z = m.standardize_row(names, &r.features, self.scaler.as_ref())?;
                Ok(m.predict_standardized(r.phase, &z)?)
            }
        }
    }
}

fn load_data(a: &DataArgs) -> Res<Dataset> {
    let mut d = dataset::import_csv(&a.data)?;
    d.rows.retain(|r| r.phase == a.opt);
    Ok(d)
}

fn open_out(path: &Option<PathBuf>) -> Res<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).map_err(|e| Failure::Data(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout()),
    })
}

/// Non-baseline rows with the decision taken for their loop.
fn decided_rows<'a>(d: &'a Dataset, decider: &Decider) -> Res<Vec<(&'a DataPoint, u32)>> {
    d.rows
        .iter()
        .filter(|r| !r.is_baseline)
        .map(|r| Ok((r, decider.decide(&d.feature_names, r)?)))
        .collect()
}

fn cmd_histogram(a: &DataArgs, bins: u32, k_max: Option<i32>, out: &mut dyn Write) -> Res<()> {
    let data = load_data(a)?;
    let decider = Decider::new(a)?;
    let rows: Vec<(bool, f64)> = decided_rows(&data, &decider)?
        .into_iter()
        .map(|(r, p)| (p == r.param, r.speedup))
        .collect();
    let h = histogram(&rows, bins, k_max).map_err(|e| match e {
        forklab_core::analysis::AnalysisError::InvalidBins => Failure::Usage(e.to_string()),
        _ => data_err(e),
    })?;
    h.write_csv(open_out(&a.out)?).map_err(data_err)?;
    if a.out.is_some() {
        writeln!(out, "rows={}", rows.len()).map_err(data_err)?;
    }
    Ok(())
}

fn class_name(c: Class) -> &'static str {
    match c {
        Class::TP => "TP",
        Class::TN => "TN",
        Class::FP => "FP",
        Class::FN => "FN",
    }
}

fn cmd_classify(a: &DataArgs, out: &mut dyn Write) -> Res<()> {
    let data = load_data(a)?;
    let decider = Decider::new(a)?;
    let mut w = csv::Writer::from_writer(open_out(&a.out)?);
    w.write_record(["benchmark", "function", "unit_id", "loop_id", "param", "decision", "applied", "speedup", "class"])
        .map_err(data_err)?;
    let mut counts = ClassCounts::default();
    for (r, p) in decided_rows(&data, &decider)? {
        if r.speedup.is_nan() || r.speedup <= 0.0 {
            return Err(Failure::Data(format!("non-positive speedup {} in {}", r.speedup, r.function)));
        }
        let applied = p == r.param;
        let c = classify(applied, r.speedup);
        counts.add(c);
        w.write_record([
            r.benchmark.clone(),
            r.function.clone(),
            r.unit_id.to_string(),
            r.loop_id.map_or_else(String::new, |l| l.0.to_string()),
            r.param.to_string(),
            p.to_string(),
            (applied as u8).to_string(),
            format!("{:.16e}", r.speedup),
            class_name(c).to_string(),
        ])
        .map_err(data_err)?;
    }
    w.flush().map_err(data_err)?;
    drop(w);
    let line = format!("TP={} TN={} FP={} FN={}", counts.tp, counts.tn, counts.fp, counts.fn_);
    if a.out.is_some() {
        writeln!(out, "{line}").map_err(data_err)?;
    } else {
        eprintln!("{line}");
    }
    Ok(())
}

fn predicted_params(m: &MethodRecord, data: &Dataset, decider: &Decider) -> Res<Vec<u32>> {
    m.decisions
        .iter()
        .map(|d| {
            let row = data
                .rows
                .iter()
                .filter(|r| r.benchmark == m.benchmark && r.function == m.function && r.unit_id == m.unit_id)
                .filter(|r| r.loop_id == d.loop_id)
                .min_by_key(|r| !r.is_baseline)
                .expect("decision comes from a row");
            decider.decide(&data.feature_names, row)
        })
        .collect()
}

fn cmd_estimate(a: &EstimateArgs, out: &mut dyn Write) -> Res<()> {
    let data = load_data(&a.data)?;
    if matches!(a.source, Source::Model) && a.data.model.is_none() {
        return Err(Failure::Usage("--source model needs --model".into()));
    }
    let decider = Decider::new(&a.data)?;
    let source = match a.source {
        Source::Heuristic => "heuristic",
        Source::Model => "model",
        Source::Best => "best",
    };
    let mut rows = Vec::new();
    let mut skipped = 0;
    for m in method_records(&data) {
        let predicted = match a.source {
            Source::Best => forklab_core::analysis::best_params(&m),
            _ => predicted_params(&m, &data, &decider)?,
        };
        let identity: Vec<u32> = m.decisions.iter().map(|d| d.phase.identity_param()).collect();
        let est = (|| {
            Ok::<_, forklab_core::analysis::AnalysisError>((
                estimate_method(&m, &identity)?,
                estimate_method(&m, &predicted)?,
                forklab_core::analysis::estimate_best(&m)?,
            ))
        })();
        match est {
            Ok((baseline_estimate, predicted_estimate, best_estimate)) => rows.push(EstimateRow {
                function: m.function.clone(),
                i: m.invocations,
                baseline_estimate,
                predicted_estimate,
                best_estimate,
                source: source.to_string(),
            }),
            Err(e) => {
                skipped += 1;
                eprintln!("warning: skipping {}: {e}", m.function);
            }
        }
    }
    write_estimates(&rows, open_out(&a.data.out)?).map_err(data_err)?;
    let total = |f: fn(&EstimateRow) -> f64| rows.iter().map(f).sum::<f64>();
    let line = format!(
        "methods={} skipped={} baseline={} predicted={} best={}",
        rows.len(),
        skipped,
        total(|r| r.baseline_estimate),
        total(|r| r.predicted_estimate),
        total(|r| r.best_estimate)
    );
    if a.data.out.is_some() {
        writeln!(out, "{line}").map_err(data_err)?;
    } else {
        eprintln!("{line}");
    }
    Ok(())
}

fn read_column(path: &Path, column: &str) -> Res<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(data_err)?.clone();
    let j = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Failure::Data(format!("{}: no column `{column}`", path.display())))?;
    rdr.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(data_err)?;
            rec.get(j)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Failure::Data(format!("{}: row {}: bad `{column}`", path.display(), i + 1)))
        })
        .collect()
}

fn cmd_compare(a: &CompareArgs, out: &mut dyn Write) -> Res<()> {
    let xs = read_column(&a.a, &a.column)?;
    let ys = read_column(&a.b, &a.column)?;
    if xs.is_empty() || ys.is_empty() {
        return Err(Failure::Data("both inputs need at least one row".into()));
    }
    let r = ranksum_test(&xs, &ys);
    writeln!(
        out,
        "n={} m={} U={} p={} method={}",
        xs.len(),
        ys.len(),
        r.u,
        r.p,
        if r.exact { "exact" } else { "normal" }
    )
    .map_err(data_err)
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Res<()> {
    match &cli.cmd {
        Cmd::Run(a) => cmd_run(a, out),
        Cmd::Forkgen(a) => cmd_forkgen(a, out),
        Cmd::Export(a) => cmd_export(a, out),
        Cmd::Analyze(AnalyzeCmd::Histogram {
            data,
            bins_per_decade,
            k_max,
        }) => cmd_histogram(data, *bins_per_decade, *k_max, out),
        Cmd::Analyze(AnalyzeCmd::Classify { data }) => cmd_classify(data, out),
        Cmd::Estimate(a) => cmd_estimate(a, out),
        Cmd::Compare(a) => cmd_compare(a, out),
        Cmd::Predict(a) => cmd_predict(a, out),
    }
}

/// Runs the command line and returns the process exit code.
pub fn main_with(args: Vec<String>, out: &mut dyn Write) -> i32 {
    let result = expand_config(args).and_then(|args| {
        let cli = match Cli::try_parse_from(args) {
            Ok(cli) => cli,
            Err(e) if !e.use_stderr() => {
                let _ = write!(out, "{e}");
                return Ok(());
            }
            Err(e) => {
                let msg = e.to_string();
                return Err(Failure::Usage(msg.strip_prefix("error: ").unwrap_or(&msg).to_string()));
            }
        };
        dispatch(&cli, out)
    });
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message().trim_end());
            f.code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn config_flags_precede_explicit_ones() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        fs::write(&cfg, r#"{"invocations": 7, "opt": "unroll", "no_outlier": true, "finalize": false}"#).unwrap();
        let line = format!("forklab forkgen loops --config {} --invocations 9 --out x", cfg.display());
        let expanded = expand_config(args(&line)).unwrap();
        let cli = Cli::try_parse_from(expanded).unwrap();
        let Cmd::Forkgen(a) = cli.cmd else { panic!() };
        assert_eq!(a.exec.invocations, 9);
        assert_eq!(a.exec.opt, Phase::Unroll);
        assert!(a.no_outlier && !a.finalize);
    }

    #[test]
    fn config_inserts_after_nested_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        fs::write(&cfg, r#"{"bins_per_decade": 2}"#).unwrap();
        let line = format!("forklab analyze histogram d.csv --config {}", cfg.display());
        let cli = Cli::try_parse_from(expand_config(args(&line)).unwrap()).unwrap();
        let Cmd::Analyze(AnalyzeCmd::Histogram { bins_per_decade, .. }) = cli.cmd else { panic!() };
        assert_eq!(bins_per_decade, 2);
    }

    #[test]
    fn usage_errors_exit_one() {
        let mut sink = Vec::new();
        assert_eq!(main_with(args("forklab frobnicate"), &mut sink), EXIT_USAGE);
        assert_eq!(main_with(args("forklab run nosuchprogram"), &mut sink), EXIT_USAGE);
        assert_eq!(main_with(args("forklab run fib --opt sideways"), &mut sink), EXIT_USAGE);
    }
}

//! Command-line front end.
//!
//! Every command writes into a scratch directory next to the output and
//! renames it into place only after all artifacts exist.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;

use crate::baseline::{impute_central, impute_knn, CentralTendency};
use crate::error::{Error, ErrorClass, Result};
use crate::metrics::{build_report, write_kdes};
use crate::optimize::{write_trace_file, CostBreakdown, Method};
use crate::pipeline::{
    finalize, optimize_angles, prepare, MethodRun, PipelineConfig, Prepared, ValidationReport,
};
use crate::tabular::{load_csv, save_csv, Dataset};

pub mod oracle;

#[derive(Debug, Parser)]
#[command(
    name = "qimpute",
    version,
    about = "Rotation-based imputation of zero-coded missing values"
)]
pub struct Cli {
    /// Cap on worker threads for rotation and cost evaluation.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Log stage progress to standard error.
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the pipeline and write the imputed table, candidates, stats and manifest.
    Impute(RunArgs),
    /// Compare saved tables against a reference table.
    Evaluate(EvaluateArgs),
    /// Baselines plus every optimizer, with the full metric report.
    Benchmark(RunArgs),
    /// Regenerate the derived test fixtures.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerChoice {
    De,
    Cobyla,
    Annealing,
    All,
}

impl OptimizerChoice {
    fn methods(self) -> Vec<Method> {
        match self {
            OptimizerChoice::De => vec![Method::DifferentialEvolution],
            OptimizerChoice::Cobyla => vec![Method::Cobyla],
            OptimizerChoice::Annealing => vec![Method::SimulatedAnnealing],
            OptimizerChoice::All => Method::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeasureChoice {
    Mean,
    Median,
    Mode,
}

impl From<MeasureChoice> for CentralTendency {
    fn from(m: MeasureChoice) -> Self {
        match m {
            MeasureChoice::Mean => CentralTendency::Mean,
            MeasureChoice::Median => CentralTendency::Median,
            MeasureChoice::Mode => CentralTendency::Mode,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML config; every field may be omitted except the seed.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerChoice>,
    #[arg(long, value_enum)]
    pub measure: Option<MeasureChoice>,
    /// Also write one line per cost evaluation to `trace.csv`.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Reference table.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// `NAME=PATH` of a table to compare; repeatable.
    #[arg(long = "dataset", required = true, value_parser = parse_named_path)]
    pub datasets: Vec<(String, PathBuf)>,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    /// Diabetes CSV used for the mask-count fixture.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

fn parse_named_path(s: &str) -> std::result::Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((n, p)) if !n.is_empty() && !p.is_empty() => Ok((n.to_string(), PathBuf::from(p))),
        _ => Err(format!("expected NAME=PATH, got {s:?}")),
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.class() {
        ErrorClass::Config => 1,
        ErrorClass::Data => 2,
        ErrorClass::Optimization => 3,
    }
}

/// Parses arguments, runs the command, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .try_init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::warn!("thread cap not applied: {e}");
        }
    }
    let result = match &cli.command {
        Command::Impute(a) => cmd_impute(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Oracle(a) => oracle::cmd_oracle(&a.input, &a.output),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn resolve_config(
    config: Option<&Path>,
    seed: Option<u64>,
    measure: Option<MeasureChoice>,
) -> Result<PipelineConfig> {
    let mut cfg = match config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if seed.is_some() {
        cfg.seed = seed;
    }
    if let Some(m) = measure {
        cfg.central_tendency = m.into();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Scratch directory that becomes `target` on [`Staging::commit`].
pub struct Staging {
    dir: PathBuf,
    target: PathBuf,
    committed: bool,
}

impl Staging {
    pub fn new(target: &Path) -> Result<Self> {
        let name = target
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".to_string());
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        let dir = parent.join(format!(".{name}.partial-{}", std::process::id()));
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(|source| Error::Io {
                path: dir.clone(),
                source,
            })?;
        }
        std::fs::create_dir_all(&dir).map_err(|source| Error::Io {
            path: dir.clone(),
            source,
        })?;
        Ok(Staging {
            dir,
            target: target.to_path_buf(),
            committed: false,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Moves staged files into place. A missing target is created by one
    /// directory rename; an existing one receives each file by rename.
    pub fn commit(mut self) -> Result<()> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| Error::Io { path, source }
        };
        if !self.target.exists() {
            std::fs::rename(&self.dir, &self.target).map_err(io(&self.target))?;
        } else {
            for entry in std::fs::read_dir(&self.dir).map_err(io(&self.dir))? {
                let entry = entry.map_err(io(&self.dir))?;
                let dest = self.target.join(entry.file_name());
                std::fs::rename(entry.path(), &dest).map_err(io(&dest))?;
            }
            std::fs::remove_dir(&self.dir).map_err(io(&self.dir))?;
        }
        self.committed = true;
        Ok(())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = std::fs::remove_dir_all(&self.dir);
        }
    }
}

#[derive(Debug, Serialize)]
pub struct AngleRecord {
    pub theta: f64,
    pub cost: CostBreakdown,
}

#[derive(Debug, Serialize)]
pub struct OptimizerRecord {
    pub method: Method,
    pub seed: u64,
    pub evaluations: usize,
    pub angles: Vec<AngleRecord>,
}

impl From<&MethodRun> for OptimizerRecord {
    fn from(r: &MethodRun) -> Self {
        OptimizerRecord {
            method: r.method,
            seed: r.seed,
            evaluations: r.history.len(),
            angles: r
                .candidates
                .iter()
                .map(|c| AngleRecord {
                    theta: c.theta,
                    cost: c.cost,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: &'static str,
    pub command: &'static str,
    pub input: PathBuf,
    pub config: PipelineConfig,
    pub master_seed: u64,
    pub seeds: BTreeMap<String, u64>,
    pub optimizers: Vec<OptimizerRecord>,
    pub timings_seconds: Vec<(String, f64)>,
    pub validation: BTreeMap<String, ValidationReport>,
    /// File names relative to the output directory.
    pub artifacts: Vec<String>,
}

impl RunManifest {
    fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn stem(input: &Path) -> String {
    input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".to_string())
}

fn write_traces(stage: &Staging, runs: &[MethodRun]) -> Result<String> {
    let path = stage.path("trace.csv");
    let traces: Vec<(Method, &[_])> = runs
        .iter()
        .map(|r| (r.method, r.history.as_slice()))
        .collect();
    write_trace_file(&path, &traces)?;
    Ok(file_name(&path))
}

pub fn cmd_impute(a: &RunArgs) -> Result<()> {
    let mut cfg = resolve_config(a.config.as_deref(), a.seed, a.measure)?;
    match a.optimizer.map(OptimizerChoice::methods).as_deref() {
        Some([m]) => cfg.optimizer.method = *m,
        Some(_) => {
            return Err(Error::Config(
                "impute runs one optimizer; use benchmark for all".into(),
            ))
        }
        None => {}
    }
    let d = load_csv(&a.input, cfg.target()).map_err(Error::in_stage("load"))?;
    info!("loaded {} rows x {} columns", d.n_rows(), d.n_cols());

    let mut prepared = prepare(&d, &cfg)?;
    let run = optimize_angles(&prepared, &cfg, cfg.optimizer.method)?;
    prepared
        .timings
        .push((format!("optimize.{}", run.method.label()), run.seconds));
    info!(
        "{} angles: {:?}",
        run.method.label(),
        run.candidates.iter().map(|c| c.theta).collect::<Vec<_>>()
    );
    let (final_data, report) = finalize(&prepared, &run).map_err(Error::in_stage("superimpose"))?;
    if !report.is_clean() {
        for v in report.violations.iter().take(20) {
            eprintln!("violation: {v:?}");
        }
        return Err(Error::Stage {
            stage: "validate",
            source: Box::new(Error::InvalidArgument(format!(
                "{} violations in the final table",
                report.violations.len()
            ))),
        });
    }

    let start = Instant::now();
    let stage = Staging::new(&a.output)?;
    let base = stem(&a.input);
    let mut artifacts = Vec::new();
    let p = stage.path(&format!("{base}_imputed.csv"));
    save_csv(&final_data, &p)?;
    artifacts.push(file_name(&p));
    for (i, c) in run.candidates.iter().enumerate() {
        let p = stage.path(&format!("{base}_imputed_angle{}.csv", i + 1));
        save_csv(&c.data, &p)?;
        artifacts.push(file_name(&p));
    }
    let p = stage.path("stats.csv");
    prepared.stats.write_csv(&p)?;
    artifacts.push(file_name(&p));
    if a.trace {
        artifacts.push(write_traces(&stage, std::slice::from_ref(&run))?);
    }
    artifacts.push("manifest.json".to_string());
    prepared
        .timings
        .push(("write".to_string(), start.elapsed().as_secs_f64()));
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        command: "impute",
        input: a.input.clone(),
        master_seed: cfg.master_seed()?,
        seeds: prepared.seeds.iter().cloned().collect(),
        optimizers: vec![OptimizerRecord::from(&run)],
        timings_seconds: prepared.timings.clone(),
        validation: BTreeMap::from([(run.method.label().to_string(), report)]),
        config: cfg,
        artifacts,
    };
    manifest.write(&stage.path("manifest.json"))?;
    stage.commit()
}

pub struct BenchmarkTables {
    pub prepared: Prepared,
    /// Baselines, then three candidates per optimizer, in report order.
    pub tables: Vec<(String, Dataset)>,
    pub runs: Vec<MethodRun>,
}

pub fn benchmark_tables(
    d: &Dataset,
    cfg: &PipelineConfig,
    methods: &[Method],
) -> Result<BenchmarkTables> {
    let mut prepared = prepare(d, cfg)?;
    let mut tables = Vec::new();
    for m in [
        CentralTendency::Mean,
        CentralTendency::Median,
        CentralTendency::Mode,
    ] {
        let t = impute_central(d, &prepared.mask, m).map_err(Error::in_stage("baseline"))?;
        let mut name = m.name().to_string();
        name[..1].make_ascii_uppercase();
        tables.push((name, t));
    }
    let knn = impute_knn(d, &prepared.mask, cfg.knn_k).map_err(Error::in_stage("baseline"))?;
    tables.push(("KNN".to_string(), knn));
    let mut runs = Vec::new();
    for &m in methods {
        let run = optimize_angles(&prepared, cfg, m)?;
        prepared
            .timings
            .push((format!("optimize.{}", m.label()), run.seconds));
        for (label, c) in run.labels().into_iter().zip(&run.candidates) {
            tables.push((label, c.data.clone()));
        }
        runs.push(run);
    }
    Ok(BenchmarkTables {
        prepared,
        tables,
        runs,
    })
}

pub fn cmd_benchmark(a: &RunArgs) -> Result<()> {
    let cfg = resolve_config(a.config.as_deref(), a.seed, a.measure)?;
    let methods = a.optimizer.unwrap_or(OptimizerChoice::All).methods();
    let d = load_csv(&a.input, cfg.target()).map_err(Error::in_stage("load"))?;
    let BenchmarkTables {
        mut prepared,
        tables,
        runs,
    } = benchmark_tables(&d, &cfg, &methods)?;

    let start = Instant::now();
    let reference = prepared.reference(cfg.reference).clone();
    let named: Vec<(String, &Dataset)> = tables.iter().map(|(n, t)| (n.clone(), t)).collect();
    let report = build_report(&reference, &named, &cfg.impute_columns)
        .map_err(Error::in_stage("metrics"))?;
    prepared
        .timings
        .push(("metrics".to_string(), start.elapsed().as_secs_f64()));

    let stage = Staging::new(&a.output)?;
    let mut artifacts: Vec<String> = report
        .write_csvs(&stage.dir)?
        .iter()
        .map(|p| file_name(p))
        .collect();
    let mut kde_sets = vec![("Reference".to_string(), &reference)];
    kde_sets.extend(named.iter().map(|(n, t)| (n.clone(), *t)));
    artifacts.extend(
        write_kdes(&stage.dir, &kde_sets, &cfg.impute_columns)?
            .iter()
            .map(|p| file_name(p)),
    );
    let mut validation = BTreeMap::new();
    for run in &runs {
        let (final_data, rep) = finalize(&prepared, run).map_err(Error::in_stage("superimpose"))?;
        let p = stage.path(&format!(
            "{}_imputed_{}.csv",
            stem(&a.input),
            run.method.label()
        ));
        save_csv(&final_data, &p)?;
        artifacts.push(file_name(&p));
        validation.insert(run.method.label().to_string(), rep);
    }
    if a.trace {
        artifacts.push(write_traces(&stage, &runs)?);
    }
    artifacts.push("manifest.json".to_string());
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        command: "benchmark",
        input: a.input.clone(),
        master_seed: cfg.master_seed()?,
        seeds: prepared.seeds.iter().cloned().collect(),
        optimizers: runs.iter().map(OptimizerRecord::from).collect(),
        timings_seconds: prepared.timings.clone(),
        validation,
        config: cfg,
        artifacts,
    };
    manifest.write(&stage.path("manifest.json"))?;
    stage.commit()
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let cfg = match &a.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let reference = load_csv(&a.input, cfg.target()).map_err(Error::in_stage("load"))?;
    let tables: Vec<(String, Dataset)> = a
        .datasets
        .iter()
        .map(|(n, p)| Ok((n.clone(), load_csv(p, cfg.target())?)))
        .collect::<Result<_>>()
        .map_err(Error::in_stage("load"))?;
    let named: Vec<(String, &Dataset)> = tables.iter().map(|(n, t)| (n.clone(), t)).collect();
    let report = build_report(&reference, &named, &cfg.impute_columns)
        .map_err(Error::in_stage("metrics"))?;
    let stage = Staging::new(&a.output)?;
    report.write_csvs(&stage.dir)?;
    write_kdes(&stage.dir, &named, &cfg.impute_columns)?;
    stage.commit()
}

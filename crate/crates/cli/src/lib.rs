//! `sojourn` command-line front end: configuration layering (defaults, then
//! config file, then `SOJOURN_*` environment, then flags), computation, and
//! CSV + manifest output.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use sojourn_core::lab::ScalingFamily;

use config::{ConstantConfig, ConvergenceConfig, DoubleSumCmdConfig, ExperimentCmdConfig, OracleConfig, RunConfig};
use output::{Manifest, OutputRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numeric(_) => EXIT_NUMERIC,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<sojourn_core::Error> for CliError {
    fn from(e: sojourn_core::Error) -> Self {
        use sojourn_core::Error as E;
        match e {
            E::InvalidParameter { .. } | E::TooFewBlocks { .. } => CliError::Config(e.to_string()),
            E::EmbeddingFailed { .. } | E::Factorization(_) | E::Numeric(_) => CliError::Numeric(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sojourn", version, about = "Sojourn-time constants and conditional-limit experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate a Berman-type constant (writes constant.csv).
    EstimateConstant(Invocation),
    /// Conditional sojourn curves over a level ladder, or the queue
    /// prediction check (writes experiment.csv + levels.csv, or
    /// queue_prediction.csv).
    RunExperiment(Invocation),
    /// Double-sum ratio over a schedule of block sizes (writes double_sum.csv).
    DoubleSum(Invocation),
    /// Deterministic reference values (writes oracle.csv or
    /// queue_closed_forms.csv).
    Oracle(Invocation),
    /// Two-dimensional constants along an increasing S schedule (writes
    /// convergence.csv).
    Convergence(Invocation),
}

#[derive(Debug, Clone, Args)]
pub struct Invocation {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML or JSON config, or a manifest.json from an earlier run.
    #[arg(long, env = "SOJOURN_CONFIG")]
    pub config: Option<PathBuf>,
    /// 64-bit seed; drawn at random (and recorded) when absent.
    #[arg(long, env = "SOJOURN_SEED")]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores); never changes results.
    #[arg(long, env = "SOJOURN_WORKERS")]
    pub workers: Option<usize>,
    /// Output directory (created if missing).
    #[arg(long, env = "SOJOURN_OUT", default_value = "sojourn-out")]
    pub out: PathBuf,
    /// Monte Carlo sample count of the command's main estimate.
    #[arg(long, env = "SOJOURN_SAMPLES")]
    pub samples: Option<usize>,
    /// Samples per RNG chunk; part of the reproducibility key.
    #[arg(long, env = "SOJOURN_CHUNK_SIZE")]
    pub chunk_size: Option<usize>,
}

/// Per-family parameters; each command reads the ones that apply to it.
#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    /// Constant, experiment, or oracle family (see README).
    #[arg(long)]
    pub family: Option<String>,
    /// Exponent α of axis 1 (or of the family).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Exponent of axis 2.
    #[arg(long)]
    pub alpha2: Option<f64>,
    /// Correlation scale `a` (experiment families).
    #[arg(long)]
    pub a: Option<f64>,
    /// Correlation scale of axis 2.
    #[arg(long)]
    pub a2: Option<f64>,
    /// Drift coefficient of axis 1.
    #[arg(long)]
    pub b: Option<f64>,
    /// Drift exponent of axis 1.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Drift coefficient of axis 2.
    #[arg(long)]
    pub b2: Option<f64>,
    /// Drift exponent of axis 2.
    #[arg(long)]
    pub beta2: Option<f64>,
    /// Chi degree.
    #[arg(long)]
    pub m: Option<usize>,
    /// Queue drift.
    #[arg(long)]
    pub c: Option<f64>,
    /// Sojourn lengths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub x: Option<Vec<f64>>,
    /// Interval `start,end`.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub interval: Option<Vec<f64>>,
    /// Domain size S (2-D constants) or a single oracle S.
    #[arg(long)]
    pub s: Option<f64>,
    /// Increasing S values for limit fits, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub schedule: Option<Vec<f64>>,
    /// Levels u, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    /// Grid points per unit length.
    #[arg(long)]
    pub ppu: Option<f64>,
    /// Per-level grid density in rescaled time (experiments).
    #[arg(long)]
    pub local_ppu: Option<f64>,
    /// Grid points on the interval (berman1d; overrides --ppu).
    #[arg(long)]
    pub n_grid: Option<usize>,
    /// Level u of the double-sum diagnostic.
    #[arg(long)]
    pub u: Option<f64>,
    /// Double-sum block sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub n_values: Option<Vec<f64>>,
    /// Queue window length in units of v(u).
    #[arg(long)]
    pub n: Option<f64>,
    /// Sojourn-axis length of the mixed constant.
    #[arg(long)]
    pub n1: Option<f64>,
    /// Side T of the simulated parameter set.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Half-width of the truncated whole line.
    #[arg(long)]
    pub half_width: Option<f64>,
    /// `crude` or `tilted`.
    #[arg(long)]
    pub estimator: Option<String>,
    /// Experiment kind: `conditional` or `queue-prediction`.
    #[arg(long)]
    pub kind: Option<String>,
    /// Conditioned replicates to collect per level.
    #[arg(long)]
    pub conditioned: Option<usize>,
    /// Repeat berman1d estimates at half the grid step.
    #[arg(long)]
    pub check_grid: bool,
}

fn parse_name<T: DeserializeOwned>(field: &str, s: &str) -> Result<T, CliError> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| CliError::Config(format!("`{field}`: unknown value {s:?}")))
}

fn set<T: Clone>(dst: &mut T, src: &Option<T>) {
    if let Some(v) = src {
        *dst = v.clone();
    }
}

/// Builds or adjusts an experiment family from flags: `--family` picks the
/// variant (parameters default to 1), the other flags then override fields.
fn family_from(current: ScalingFamily, p: &ParamArgs) -> Result<ScalingFamily, CliError> {
    let mut f = match p.family.as_deref() {
        None => current,
        Some("stationary1d" | "stationary_1d") => ScalingFamily::Stationary1D { a: 1.0, alpha: 1.0 },
        Some("stationary2d" | "stationary_2d") => ScalingFamily::Stationary2D { a1: 1.0, a2: 1.0, alpha1: 1.0, alpha2: 1.0 },
        Some("onepoint2d" | "one_point2_d" | "one-point") => {
            ScalingFamily::OnePoint2D { a: [1.0; 2], alpha: [1.0; 2], b: [1.0; 2], beta: [2.0; 2] }
        }
        Some("chi") => ScalingFamily::Chi { m: 1, a: 1.0, alpha: 1.0 },
        Some("queue") => ScalingFamily::Queue { alpha: 1.0, c: 1.0 },
        Some(other) => return Err(CliError::Config(format!("`family`: unknown experiment family {other:?}"))),
    };
    match &mut f {
        ScalingFamily::Stationary1D { a, alpha } => {
            set(a, &p.a);
            set(alpha, &p.alpha);
        }
        ScalingFamily::Stationary2D { a1, a2, alpha1, alpha2 } => {
            set(a1, &p.a);
            set(a2, &p.a2);
            set(alpha1, &p.alpha);
            set(alpha2, &p.alpha2);
        }
        ScalingFamily::OnePoint2D { a, alpha, b, beta } => {
            set(&mut a[0], &p.a);
            set(&mut a[1], &p.a2);
            set(&mut alpha[0], &p.alpha);
            set(&mut alpha[1], &p.alpha2);
            set(&mut b[0], &p.b);
            set(&mut b[1], &p.b2);
            set(&mut beta[0], &p.beta);
            set(&mut beta[1], &p.beta2);
        }
        ScalingFamily::Chi { m, a, alpha } => {
            set(m, &p.m);
            set(a, &p.a);
            set(alpha, &p.alpha);
        }
        ScalingFamily::Queue { alpha, c } => {
            set(alpha, &p.alpha);
            set(c, &p.c);
        }
    }
    Ok(f)
}

fn apply_constant(c: &mut ConstantConfig, p: &ParamArgs, samples: Option<usize>) -> Result<(), CliError> {
    if let Some(f) = &p.family {
        c.family = parse_name("family", f)?;
    }
    if let Some(e) = &p.estimator {
        c.estimator = parse_name("estimator", e)?;
    }
    set(&mut c.alpha, &p.alpha);
    set(&mut c.alpha2, &p.alpha2);
    set(&mut c.b, &p.b);
    set(&mut c.beta, &p.beta);
    set(&mut c.b2, &p.b2);
    set(&mut c.beta2, &p.beta2);
    set(&mut c.xs, &p.x);
    if let Some(iv) = &p.interval {
        let [a, b] = iv[..] else {
            return Err(CliError::Config("`interval`: expected start,end".into()));
        };
        c.interval = [a, b];
    }
    set(&mut c.s, &p.s);
    set(&mut c.schedule, &p.schedule);
    set(&mut c.n1, &p.n1);
    set(&mut c.points_per_unit, &p.ppu);
    if p.n_grid.is_some() {
        c.n_grid = p.n_grid;
    }
    if p.half_width.is_some() {
        c.half_width = p.half_width;
    }
    set(&mut c.samples, &samples);
    c.check_grid |= p.check_grid;
    Ok(())
}

fn apply_experiment(e: &mut ExperimentCmdConfig, p: &ParamArgs, samples: Option<usize>) -> Result<(), CliError> {
    e.family = family_from(e.family, p)?;
    if let Some(k) = &p.kind {
        e.kind = parse_name("kind", k)?;
    }
    set(&mut e.levels, &p.levels);
    set(&mut e.xs, &p.x);
    set(&mut e.points_per_unit, &p.ppu);
    if p.local_ppu.is_some() {
        e.local_points_per_unit = p.local_ppu;
    }
    set(&mut e.horizon, &p.horizon);
    set(&mut e.n_target_conditioned, &p.conditioned);
    set(&mut e.n, &p.n);
    if let Some(x) = p.x.as_ref().and_then(|v| v.first()) {
        e.x = *x;
    }
    set(&mut e.samples, &samples);
    Ok(())
}

fn apply_double_sum(d: &mut DoubleSumCmdConfig, p: &ParamArgs, samples: Option<usize>) -> Result<(), CliError> {
    d.family = family_from(d.family, p)?;
    set(&mut d.u, &p.u);
    set(&mut d.n_values, &p.n_values);
    set(&mut d.points_per_unit, &p.ppu);
    set(&mut d.horizon, &p.horizon);
    set(&mut d.samples, &samples);
    Ok(())
}

fn apply_oracle(o: &mut OracleConfig, p: &ParamArgs) -> Result<(), CliError> {
    if let Some(f) = &p.family {
        o.family = parse_name("family", f)?;
    }
    if p.alpha.is_some() {
        o.alpha = p.alpha;
    }
    set(&mut o.xs, &p.x);
    if let Some(s) = p.s {
        o.s_values = vec![s];
    }
    set(&mut o.s_values, &p.schedule);
    set(&mut o.c, &p.c);
    set(&mut o.levels, &p.levels);
    Ok(())
}

fn apply_convergence(c: &mut ConvergenceConfig, p: &ParamArgs, samples: Option<usize>) -> Result<(), CliError> {
    if let Some(e) = &p.estimator {
        c.estimator = parse_name("estimator", e)?;
    }
    set(&mut c.alpha, &p.alpha);
    set(&mut c.alpha2, &p.alpha2);
    set(&mut c.b, &p.b);
    set(&mut c.beta, &p.beta);
    set(&mut c.b2, &p.b2);
    set(&mut c.beta2, &p.beta2);
    if let Some(x) = p.x.as_ref().and_then(|v| v.first()) {
        c.x = *x;
    }
    set(&mut c.schedule, &p.schedule);
    set(&mut c.points_per_unit, &p.ppu);
    set(&mut c.samples, &samples);
    Ok(())
}

/// Resolves the effective configuration of one invocation: file, then
/// flags/environment; keeps only the section of the chosen command and
/// fixes the seed.
pub fn resolve(command: &Command) -> Result<(RunConfig, &'static str), CliError> {
    let (inv, name) = match command {
        Command::EstimateConstant(i) => (i, "estimate-constant"),
        Command::RunExperiment(i) => (i, "run-experiment"),
        Command::DoubleSum(i) => (i, "double-sum"),
        Command::Oracle(i) => (i, "oracle"),
        Command::Convergence(i) => (i, "convergence"),
    };
    let file = match &inv.common.config {
        Some(path) => config::load(path)?,
        None => RunConfig::default(),
    };
    let mut cfg = RunConfig {
        seed: file.seed,
        workers: file.workers,
        chunk_size: file.chunk_size,
        batches: file.batches,
        ..RunConfig::default()
    };
    set(&mut cfg.seed, &inv.common.seed.map(Some));
    set(&mut cfg.workers, &inv.common.workers);
    set(&mut cfg.chunk_size, &inv.common.chunk_size);
    let (p, samples) = (&inv.params, inv.common.samples);
    match command {
        Command::EstimateConstant(_) => {
            let mut c = file.constant.unwrap_or_default();
            apply_constant(&mut c, p, samples)?;
            cfg.constant = Some(c);
        }
        Command::RunExperiment(_) => {
            let mut e = file.experiment.unwrap_or_default();
            apply_experiment(&mut e, p, samples)?;
            cfg.experiment = Some(e);
        }
        Command::DoubleSum(_) => {
            let mut d = file.double_sum.unwrap_or_default();
            apply_double_sum(&mut d, p, samples)?;
            cfg.double_sum = Some(d);
        }
        Command::Oracle(_) => {
            let mut o = file.oracle.unwrap_or_default();
            apply_oracle(&mut o, p)?;
            cfg.oracle = Some(o);
            // deterministic: no seed needed
            cfg.seed = Some(cfg.seed.unwrap_or(0));
        }
        Command::Convergence(_) => {
            let mut c = file.convergence.unwrap_or_default();
            apply_convergence(&mut c, p, samples)?;
            cfg.convergence = Some(c);
        }
    }
    if cfg.seed.is_none() {
        cfg.seed = Some(rand::random());
    }
    cfg.validate_common()?;
    Ok((cfg, name))
}

/// Runs one resolved configuration and writes its CSV files and manifest
/// into `out`. Returns the manifest.
pub fn execute(cfg: &RunConfig, command: &str, out: &std::path::Path) -> Result<Manifest, CliError> {
    let start = Instant::now();
    let seed = cfg.seed.ok_or_else(|| CliError::Config("`seed` must be resolved before running".into()))?;
    let missing = |s: &str| CliError::Config(format!("`{s}` section missing"));
    let outcome = match command {
        "estimate-constant" => commands::estimate_constant(cfg, cfg.constant.as_ref().ok_or_else(|| missing("constant"))?, seed)?,
        "run-experiment" => commands::run_experiment(cfg, cfg.experiment.as_ref().ok_or_else(|| missing("experiment"))?, seed)?,
        "double-sum" => commands::double_sum(cfg, cfg.double_sum.as_ref().ok_or_else(|| missing("double_sum"))?, seed)?,
        "oracle" => commands::oracle(cfg.oracle.as_ref().ok_or_else(|| missing("oracle"))?)?,
        "convergence" => commands::convergence(cfg, cfg.convergence.as_ref().ok_or_else(|| missing("convergence"))?, seed)?,
        other => return Err(CliError::Config(format!("unknown command {other:?}"))),
    };
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let mut outputs = Vec::new();
    for t in &outcome.tables {
        output::write_table(out, t)?;
        outputs.push(OutputRecord { file: t.file.clone(), schema: t.schema.into(), rows: t.rows.len() });
    }
    let manifest = Manifest {
        tool: "sojourn",
        artifact_version: env!("CARGO_PKG_VERSION"),
        command: command.into(),
        config: cfg.clone(),
        generator: sojourn_core::rng::GENERATOR,
        streams: outcome.streams,
        outputs,
        flags: outcome.flags,
        wall_time_secs: start.elapsed().as_secs_f64(),
        result: outcome.result,
    };
    output::write_manifest(out, &manifest)?;
    Ok(manifest)
}

/// Parses arguments, runs, reports, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let out = match &cli.command {
        Command::EstimateConstant(i)
        | Command::RunExperiment(i)
        | Command::DoubleSum(i)
        | Command::Oracle(i)
        | Command::Convergence(i) => i.common.out.clone(),
    };
    let result = resolve(&cli.command).and_then(|(cfg, name)| execute(&cfg, name, &out));
    match result {
        Ok(m) => {
            for o in &m.outputs {
                println!("wrote {} ({} rows, schema {})", out.join(&o.file).display(), o.rows, o.schema);
            }
            println!("wrote {}", out.join(output::MANIFEST_FILE).display());
            for f in &m.flags {
                println!("flag {}: {}", f.name, f.detail);
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("sojourn: {e}");
            e.exit_code()
        }
    }
}

//! Command-line front end: single-point reports, parameter sweeps and
//! Monte Carlo experiments, written as CSV or JSON.
//!
//! Settings come from flags and, optionally, an INI file given with
//! `--config`. File entries are spliced in ahead of the command-line flags,
//! so flags win.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use serde_json::{json, Map, Value};

use crate::error::Error;
use crate::estimation::{self, EstimationReport};
use crate::hilbert::{DerivativeSpec, QuadratureSpec};
use crate::model::{Deformation, OscillatorConfig};
use crate::montecarlo;
use crate::states::{self, StateDescriptor, ThermalSpec};

/// Metric columns, in output order.
pub const METRICS: [&str; 7] = ["H", "F", "I_mu", "F_amended", "F_classical_full", "R", "Q"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Single-point estimation report.
    Report,
    /// Sweep over β (Fig. 1 style).
    SweepBeta,
    /// Sweep the qubit angle φ or the mixture angle θ.
    SweepAngle,
    /// Grid over the qutrit angles (θ, φ).
    SweepQutrit,
    /// Thermal states over a temperature grid.
    SweepTemperature,
    /// Sweep over mω at fixed β.
    SweepOmegam,
    /// Replicated sampling and maximum-likelihood experiment.
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Qubit,
    Mix,
}

/// A single value `x` or an evenly spaced grid `lo:hi:n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Grid {
    pub fn single(x: f64) -> Self {
        Grid { lo: x, hi: x, n: 1 }
    }

    pub fn points(&self, log: bool) -> Result<Vec<f64>, Error> {
        if self.n == 1 {
            return Ok(vec![self.lo]);
        }
        if log && !(self.lo > 0.0 && self.hi > 0.0) {
            return Err(Error::domain(format!("log spacing needs positive bounds, got {self}")));
        }
        let last = (self.n - 1) as f64;
        Ok((0..self.n)
            .map(|i| {
                let t = i as f64 / last;
                if i == 0 {
                    self.lo
                } else if i == self.n - 1 {
                    self.hi
                } else if log {
                    (self.lo.ln() + t * (self.hi.ln() - self.lo.ln())).exp()
                } else {
                    self.lo + t * (self.hi - self.lo)
                }
            })
            .collect())
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| states::parse_number(t).ok_or_else(|| format!("invalid number `{t}` in `{s}`"));
        let parts: Vec<&str> = s.split(':').collect();
        let grid = match parts.as_slice() {
            [x] => Grid::single(num(x)?),
            [lo, hi, n] => Grid {
                lo: num(lo)?,
                hi: num(hi)?,
                n: n.trim().parse().map_err(|_| format!("invalid point count `{n}` in `{s}`"))?,
            },
            _ => return Err(format!("expected `x` or `lo:hi:n`, got `{s}`")),
        };
        if grid.n == 0 || !grid.lo.is_finite() || !grid.hi.is_finite() {
            return Err(format!("empty or non-finite range `{s}`"));
        }
        Ok(grid)
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.n == 1 {
            write!(f, "{}", self.lo)
        } else {
            write!(f, "{}:{}:{}", self.lo, self.hi, self.n)
        }
    }
}

impl Serialize for Grid {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Everything one invocation needs.
#[derive(Debug, Clone, Parser, Serialize)]
#[command(name = "gupest", version, about = "Fisher-information bounds for the deformation β of [x,p] = i(1+βp²)")]
#[command(args_override_self = true)]
pub struct RunConfig {
    #[arg(value_enum)]
    pub command: Command,

    /// INI file of `key = value` settings; flags given on the command line win.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Probe state: n:K | qubit:phi=… | qutrit:phi=…,theta=… | mix:theta=… | thermal:T=…
    #[arg(long, default_value = "n:0")]
    pub state: String,

    /// Deformation β, or a grid lo:hi:n for sweep-beta.
    #[arg(long, default_value = "0.01")]
    pub beta: Grid,

    /// Logarithmic spacing of β and mω grids (default).
    #[arg(long, overrides_with = "linear")]
    #[serde(skip)]
    pub log: bool,

    /// Linear spacing of β and mω grids.
    #[arg(long, overrides_with = "log")]
    #[serde(skip)]
    pub linear: bool,

    #[arg(long, default_value_t = 1.0)]
    pub m: f64,

    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,

    /// Grid of m·ω for sweep-omegam (ω is held at --omega).
    #[arg(long, default_value = "0.01:10000:25")]
    pub mw: Grid,

    /// Temperature grid for sweep-temperature.
    #[arg(long = "T", default_value = "0.05:1:20")]
    #[serde(rename = "T")]
    pub temperature: Grid,

    /// φ grid for sweep-angle (qubit) and sweep-qutrit. A trailing `pi` multiplies by π.
    #[arg(long, default_value = "0:0.5pi:21")]
    pub phi: Grid,

    /// θ grid for sweep-angle (mix) and sweep-qutrit.
    #[arg(long, default_value = "0:0.5pi:21")]
    pub theta: Grid,

    /// Family swept by sweep-angle.
    #[arg(long, value_enum, default_value = "qubit")]
    pub family: Family,

    /// Output format; JSON for report and mc, CSV for sweeps unless given.
    #[arg(long, value_enum)]
    pub format: Option<Format>,

    /// Output file; standard output when absent.
    #[arg(long)]
    #[serde(skip)]
    pub output: Option<PathBuf>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, default_value_t = 100)]
    pub replicas: usize,

    /// Samples per replica.
    #[arg(long, default_value_t = 10_000)]
    pub count: usize,

    #[arg(long, default_value_t = 1e-10)]
    pub rel_tol: f64,

    #[arg(long, default_value_t = 1e-12)]
    pub abs_tol: f64,

    #[arg(long, default_value_t = 30)]
    pub max_refinements: u32,

    /// Initial quadrature half-width; chosen from the oscillator scale when absent.
    #[arg(long)]
    pub half_width: Option<f64>,

    #[arg(long, default_value_t = 1e-4)]
    pub rel_step: f64,

    #[arg(long, default_value_t = 2)]
    pub richardson_levels: u32,
}

impl RunConfig {
    fn log_spacing(&self) -> bool {
        !self.linear
    }

    fn format(&self) -> Format {
        self.format.unwrap_or(match self.command {
            Command::Report | Command::Mc => Format::Json,
            _ => Format::Csv,
        })
    }

    fn quadrature(&self) -> QuadratureSpec {
        QuadratureSpec {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_refinements: self.max_refinements,
            half_width: self.half_width,
        }
    }

    fn derivative(&self) -> DerivativeSpec {
        DerivativeSpec {
            rel_step: self.rel_step,
            richardson_levels: self.richardson_levels,
        }
    }
}

/// Failure of a run, with its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Help or version text was requested; not a failure.
    Help(String),
    Config(String),
    Run(Error),
    Io(io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Run(e) if e.is_numerical() => 3,
            CliError::Help(_) => 0,
            CliError::Io(_) => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Help(m) => write!(f, "{m}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Run(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

const FLAGS: [&str; 2] = ["log", "linear"];

/// Read `path` and turn its entries into `--key=value` arguments.
pub fn config_file_args(path: &str) -> Result<Vec<String>, CliError> {
    let ini = ini::Ini::load_from_file(path).map_err(|e| CliError::Config(format!("{path}: {e}")))?;
    let mut out = Vec::new();
    for (section, props) in ini.iter() {
        if let Some(name) = section {
            if name != "gupest" {
                return Err(CliError::Config(format!("{path}: unknown section [{name}]")));
            }
        }
        for (key, value) in props.iter() {
            let key = key.trim().replace('_', "-");
            let value = value.trim();
            if key == "config" || key == "output" || key == "command" {
                return Err(CliError::Config(format!("{path}: `{key}` is only accepted on the command line")));
            }
            if FLAGS.contains(&key.as_str()) {
                match value {
                    "true" | "yes" | "1" => out.push(format!("--{key}")),
                    "false" | "no" | "0" => {}
                    _ => return Err(CliError::Config(format!("{path}: `{key}` expects true or false"))),
                }
            } else {
                out.push(format!("--{key}={value}"));
            }
        }
    }
    Ok(out)
}

/// Parse `args` (program name first), splicing in `--config` entries.
pub fn parse_args(args: Vec<String>) -> Result<RunConfig, CliError> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else if a == "--config" {
            path = Some(args.get(i + 1).cloned().ok_or_else(|| CliError::Config("--config needs a path".into()))?);
        }
    }
    let mut full = args;
    if let Some(p) = path {
        let extra = config_file_args(&p)?;
        let at = 1.min(full.len());
        full.splice(at..at, extra);
    }
    RunConfig::try_parse_from(full).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => CliError::Help(e.to_string()),
        _ => CliError::Config(
            e.to_string()
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ")
                .to_string(),
        ),
    })
}

/// Rows of a result table: column names, then one value list per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

fn metric_values(r: &EstimationReport) -> [f64; 7] {
    [r.h, r.f, r.i_mu, r.f_amended, r.f_classical_full, r.r, r.q]
}

fn sweep_table(vars: &[&str], points: Vec<(Vec<f64>, Result<EstimationReport, Error>)>) -> Result<Table, Error> {
    let header = vars
        .iter()
        .copied()
        .chain(METRICS)
        .map(str::to_string)
        .collect();
    let mut rows = Vec::with_capacity(points.len());
    for (x, r) in points {
        let r = r?;
        rows.push(x.into_iter().chain(metric_values(&r)).map(Value::from).collect());
    }
    Ok(Table { header, rows })
}

fn grid_points(g: &Grid, log: bool, name: &str, sweep: bool) -> Result<Vec<f64>, CliError> {
    if sweep && g.n < 2 {
        return Err(CliError::Config(format!("--{name} needs a grid lo:hi:n with n >= 2")));
    }
    if !sweep && g.n != 1 {
        return Err(CliError::Config(format!("--{name} takes a single value for this command")));
    }
    Ok(g.points(log)?)
}

struct Point {
    vars: Vec<f64>,
    state: StateDescriptor,
    beta: f64,
    osc: OscillatorConfig,
}

fn evaluate(points: Vec<Point>, qspec: &QuadratureSpec, dspec: &DerivativeSpec) -> Vec<(Vec<f64>, Result<EstimationReport, Error>)> {
    points
        .into_par_iter()
        .map(|pt| {
            let r = Deformation::new(pt.beta).and_then(|d| {
                let s = pt.state.prepare(&d, &pt.osc)?;
                estimation::fi_momentum(&s, &d, &pt.osc, qspec, dspec)
            });
            (pt.vars, r)
        })
        .collect()
}

/// Run the command and return its table.
pub fn execute(cfg: &RunConfig) -> Result<Table, CliError> {
    execute_full(cfg).map(|(t, _)| t)
}

/// The table plus, for `mc`, the full experiment summary.
fn execute_full(cfg: &RunConfig) -> Result<(Table, Option<Value>), CliError> {
    let qspec = cfg.quadrature();
    let dspec = cfg.derivative();
    qspec.validate()?;
    dspec.validate()?;
    let osc = OscillatorConfig::new(cfg.m, cfg.omega)?;
    let state: StateDescriptor = cfg.state.parse()?;
    let log = cfg.log_spacing();
    let single_beta = || -> Result<f64, CliError> { Ok(grid_points(&cfg.beta, log, "beta", false)?[0]) };

    let (vars, points): (Vec<&str>, Vec<Point>) = match cfg.command {
        Command::Report => {
            let beta = single_beta()?;
            (vec!["beta"], vec![Point { vars: vec![beta], state, beta, osc }])
        }
        Command::SweepBeta => {
            let betas = grid_points(&cfg.beta, log, "beta", true)?;
            (
                vec!["beta"],
                betas
                    .into_iter()
                    .map(|beta| Point { vars: vec![beta], state, beta, osc })
                    .collect(),
            )
        }
        Command::SweepAngle => {
            let beta = single_beta()?;
            let (name, grid) = match cfg.family {
                Family::Qubit => ("phi", &cfg.phi),
                Family::Mix => ("theta", &cfg.theta),
            };
            let angles = grid_points(grid, false, name, true)?;
            let pts = angles
                .into_iter()
                .map(|a| Point {
                    vars: vec![a],
                    state: match cfg.family {
                        Family::Qubit => StateDescriptor::Qubit { phi: a },
                        Family::Mix => StateDescriptor::Mix { theta: a },
                    },
                    beta,
                    osc,
                })
                .collect();
            (vec![name], pts)
        }
        Command::SweepQutrit => {
            let beta = single_beta()?;
            let thetas = grid_points(&cfg.theta, false, "theta", true)?;
            let phis = grid_points(&cfg.phi, false, "phi", true)?;
            let mut pts = Vec::with_capacity(thetas.len() * phis.len());
            for &theta in &thetas {
                for &phi in &phis {
                    pts.push(Point {
                        vars: vec![theta, phi],
                        state: StateDescriptor::Qutrit { phi, theta },
                        beta,
                        osc,
                    });
                }
            }
            (vec!["theta", "phi"], pts)
        }
        Command::SweepTemperature => {
            let beta = single_beta()?;
            let ts = grid_points(&cfg.temperature, false, "T", true)?;
            let mut pts = Vec::with_capacity(ts.len());
            for t in ts {
                pts.push(Point {
                    vars: vec![t],
                    state: StateDescriptor::Thermal(ThermalSpec::new(t)?),
                    beta,
                    osc,
                });
            }
            (vec!["T"], pts)
        }
        Command::SweepOmegam => {
            let beta = single_beta()?;
            let mws = grid_points(&cfg.mw, log, "mw", true)?;
            let mut pts = Vec::with_capacity(mws.len());
            for mw in mws {
                pts.push(Point {
                    vars: vec![mw / beta],
                    state,
                    beta,
                    osc: OscillatorConfig::new(mw / cfg.omega, cfg.omega)?,
                });
            }
            (vec!["mw_over_beta"], pts)
        }
        Command::Mc => {
            let beta = Deformation::new(single_beta()?)?;
            let s = montecarlo::cr_experiment(&state, &beta, &osc, cfg.replicas, cfg.count, cfg.seed)?;
            let v = serde_json::to_value(&s).map_err(|e| CliError::Io(io::Error::other(e)))?;
            return Ok((mc_table(&s), Some(v)));
        }
    };
    Ok((sweep_table(&vars, evaluate(points, &qspec, &dspec))?, None))
}

fn mc_table(s: &montecarlo::CrSummary) -> Table {
    let header = [
        "prediction",
        "fisher",
        "predicted_variance",
        "empirical_mean",
        "empirical_variance",
        "variance_ratio",
    ]
    .map(str::to_string)
    .to_vec();
    let rows = s
        .predictions
        .iter()
        .map(|p| {
            vec![
                Value::from(p.label.clone()),
                Value::from(p.fisher),
                Value::from(p.variance),
                Value::from(s.mean),
                Value::from(s.variance),
                Value::from(s.variance / p.variance),
            ]
        })
        .collect();
    Table { header, rows }
}

fn fmt_cell(v: &Value) -> String {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(x) if x != 0.0 && (x.abs() < 1e-4 || x.abs() >= 1e15) => format!("{x:e}"),
            Some(x) => format!("{x}"),
            None => n.to_string(),
        },
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Write `table` as CSV.
pub fn write_csv<W: Write>(table: &Table, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let io_err = |e: csv::Error| CliError::Io(io::Error::other(e));
    w.write_record(&table.header).map_err(io_err)?;
    for row in &table.rows {
        w.write_record(row.iter().map(fmt_cell)).map_err(io_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Write `table` as one JSON object with `meta` and `rows`.
pub fn write_json<W: Write>(cfg: &RunConfig, table: &Table, extra: Option<Value>, mut out: W) -> Result<(), CliError> {
    let rows: Vec<Value> = match extra {
        Some(v) => vec![v],
        None => table
            .rows
            .iter()
            .map(|r| Value::Object(table.header.iter().cloned().zip(r.iter().cloned()).collect::<Map<_, _>>()))
            .collect(),
    };
    let doc = json!({
        "meta": {
            "toolkit": "gupest",
            "version": env!("CARGO_PKG_VERSION"),
            "command": cfg.command,
            "spacing": if cfg.log_spacing() { "log" } else { "linear" },
            "columns": table.header,
            "config": cfg,
        },
        "rows": rows,
    });
    serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| CliError::Io(io::Error::other(e)))?;
    writeln!(out)?;
    Ok(())
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("GUPEST_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("GUPEST_THREADS must be a positive integer, got `{v}`")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Config(e.to_string()))
}

/// Execute a parsed configuration and write its output.
pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let pool = thread_pool()?;
    let (table, extra) = pool.install(|| execute_full(cfg))?;
    let sink: Box<dyn Write> = match &cfg.output {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    };
    match cfg.format() {
        Format::Csv => write_csv(&table, sink),
        Format::Json => write_json(cfg, &table, extra, sink),
    }
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with_args(args: Vec<String>) -> i32 {
    let cfg = match parse_args(args) {
        Ok(c) => c,
        Err(CliError::Help(text)) => {
            print!("{text}");
            return 0;
        }
        Err(e) => {
            eprintln!("gupest: {e}");
            return e.exit_code();
        }
    };
    match run(&cfg) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("gupest: {e}");
            e.exit_code()
        }
    }
}

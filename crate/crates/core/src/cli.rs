//! Command-line front end and output files (CSV, metadata sidecar, plot
//! scripts).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::builder::TypedValueParser as _;
use clap::{CommandFactory, FromArgMatches, Parser, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiments::{
    self, audit_grid, run_audit, AuditReport, GridPoint, SweepResult, SweepRow,
};
use crate::oscillator::{sigma_numeric, OscillatorConfig};
use crate::propagation::{
    estimate_lambda, IntegrationParams, LambdaUnits, Metric, Xi0Policy,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SINGULAR: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_IO: i32 = 74;

pub const CSV_HEADER: &str =
    "n_osc,f,omega,sigma,sqrt_sigma,abs_variance,lambda,renorm_count,min_kinetic,diverged,runtime_s";
pub const AUDIT_CSV_HEADER: &str =
    "n_osc,f,omega,samples,skipped,i_block_dev,j_block_dev,k_block_dev,total_dev";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    /// Kinetic-energy fluctuation of one ensemble
    Sigma,
    /// Geometric Lyapunov exponent of one ensemble
    Lambda,
    /// σ versus phase fraction f (no integration)
    Fig1,
    /// Jacobi λ versus √σ over N = 2 + j², f = 0.05..0.45
    Fig2,
    /// Jacobi λ and absolute kinetic variance for two oscillators
    Fig3,
    /// Jacobi λ versus ω for N = 10, f = 1
    Fig4,
    /// Eisenhart λ over the fig2 grid
    EisenhartControl,
    /// Generic versus closed-form Jacobi right-hand-side comparison
    Audit,
}

impl Subcommand {
    fn name(&self) -> &'static str {
        match self {
            Self::Sigma => "sigma",
            Self::Lambda => "lambda",
            Self::Fig1 => "fig1",
            Self::Fig2 => "fig2",
            Self::Fig3 => "fig3",
            Self::Fig4 => "fig4",
            Self::EisenhartControl => "eisenhart-control",
            Self::Audit => "audit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
}

fn parse_fraction(s: &str) -> std::result::Result<f64, String> {
    let f: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&f) {
        Ok(f)
    } else {
        Err("must lie in [0, 1]".into())
    }
}

fn parse_positive(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err("must be finite and > 0".into())
    }
}

fn parse_count(s: &str) -> std::result::Result<usize, String> {
    let n: usize = s.parse().map_err(|e| format!("{e}"))?;
    if n >= 1 {
        Ok(n)
    } else {
        Err("must be at least 1".into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum StepArg {
    Auto,
    Periods(f64),
}

fn parse_dt(s: &str) -> std::result::Result<StepArg, String> {
    if s == "auto" {
        Ok(StepArg::Auto)
    } else {
        parse_positive(s).map(StepArg::Periods)
    }
}

/// Stability of an uncoupled harmonic-oscillator ensemble under the
/// Eisenhart and Jacobi geometrizations.
#[derive(Debug, Clone, Parser)]
#[command(name = "geospread", version)]
struct Args {
    #[arg(value_enum)]
    subcommand: Subcommand,

    /// Number of oscillators N [default: 2 for sigma/lambda/fig3, 10 for fig1/fig4]
    #[arg(long, value_parser = parse_count)]
    n: Option<usize>,

    /// Fraction f of the phase circle, in [0, 1] [default: 0.05; 1 for fig4]
    #[arg(long, value_parser = parse_fraction)]
    f: Option<f64>,

    /// Angular frequency ω [default: 2π]
    #[arg(long, value_parser = parse_positive)]
    omega: Option<f64>,

    /// Oscillation amplitude C
    #[arg(long, value_parser = parse_positive, default_value_t = 1.0)]
    amplitude: f64,

    /// Spread dynamics to integrate
    #[arg(long, default_value = "jacobi-generic", value_parser = clap::builder::PossibleValuesParser::new(Metric::NAMES).map(|s| s.parse::<Metric>().unwrap()))]
    metric: Metric,

    /// Time step as a fraction of the period 2π/ω, or `auto`: 1/200 for
    /// eisenhart, 1/400 shrunk by the kinetic-energy minimum T_min/⟨T⟩ for
    /// the Jacobi metrics
    #[arg(long = "dt-per-period", value_parser = parse_dt, default_value = "auto")]
    dt_per_period: StepArg,

    /// Integration length in periods
    #[arg(long = "t-max-periods", value_parser = parse_positive, default_value_t = 500.0)]
    t_max_periods: f64,

    /// Periods between renormalizations of the spread vector
    #[arg(long = "renorm-periods", value_parser = parse_positive, default_value_t = 1.0)]
    renorm_periods: f64,

    /// Kinetic-energy floor relative to ⟨T⟩; the Jacobi run aborts below it
    #[arg(long = "epsilon-t", value_parser = parse_positive, default_value_t = 1e-12)]
    epsilon_t: f64,

    /// Initial spread vector
    #[arg(long, default_value = "deterministic-basis", value_parser = clap::builder::PossibleValuesParser::new(Xi0Policy::NAMES).map(|s| s.parse::<Xi0Policy>().unwrap()))]
    xi0: Xi0Policy,

    /// RNG seed for random initial vectors and audit sampling
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Normalization of λ
    #[arg(long = "lambda-units", default_value = "per-time", value_parser = clap::builder::PossibleValuesParser::new(LambdaUnits::NAMES).map(|s| s.parse::<LambdaUnits>().unwrap()))]
    lambda_units: LambdaUnits,

    /// Output CSV path [default: <subcommand>.csv for sweeps and audit]
    #[arg(long)]
    out: Option<PathBuf>,

    /// Comma-separated f values for fig3 [default: 0.01,0.03,…,0.49]
    #[arg(long = "f-grid", value_delimiter = ',')]
    f_grid: Option<Vec<f64>>,

    /// Comma-separated ω values for fig4 [default: π,2π,…,10π]
    #[arg(long = "omega-grid", value_delimiter = ',')]
    omega_grid: Option<Vec<f64>>,

    /// Worker threads for sweeps [default: all cores]
    #[arg(long, value_parser = parse_count)]
    workers: Option<usize>,

    /// Sample instants per configuration for audit
    #[arg(long = "audit-times", value_parser = parse_count, default_value_t = 10)]
    audit_times: usize,

    /// Random states per instant for audit
    #[arg(long = "audit-trials", value_parser = parse_count, default_value_t = 10)]
    audit_trials: usize,

    /// Fill the runtime_s CSV column with wall times (output is then no
    /// longer byte-reproducible)
    #[arg(long = "record-runtime")]
    record_runtime: bool,

    /// Also write a matplotlib script next to the CSV (fig1..fig4)
    #[arg(long = "plot-script")]
    plot_script: bool,
}

/// Fully resolved command line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliConfig {
    pub subcommand: Subcommand,
    pub n_osc: usize,
    pub phase_fraction: f64,
    pub omega: f64,
    pub amplitude: f64,
    pub params: IntegrationParams,
    pub out: Option<PathBuf>,
    pub f_grid: Vec<f64>,
    pub omega_grid: Vec<f64>,
    pub workers: Option<usize>,
    pub audit_times: usize,
    pub audit_trials: usize,
    pub record_runtime: bool,
    pub plot_script: bool,
}

/// Usage error or an explicit help/version request.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError {
    pub message: String,
    pub exit_code: i32,
}

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

fn flag_for(param: &str) -> &str {
    match param {
        "dt" => "--dt-per-period",
        "t_max" => "--t-max-periods",
        "renorm_interval" => "--renorm-periods",
        "epsilon_t" => "--epsilon-t",
        "n_osc" => "--n",
        "phase_fraction" => "--f",
        "omega" => "--omega",
        "amplitude" => "--amplitude",
        other => other,
    }
}

fn usage(message: String) -> UsageError {
    UsageError {
        message,
        exit_code: EXIT_USAGE,
    }
}

/// Parses `argv` (including the program name) into a validated
/// configuration. `--help` and `--version` come back as a `UsageError` with
/// exit code 0.
pub fn parse_args<I, T>(argv: I) -> std::result::Result<CliConfig, UsageError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = Args::command().try_get_matches_from(argv).map_err(|e| {
        use clap::error::ErrorKind;
        let exit_code = match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
            _ => EXIT_USAGE,
        };
        UsageError {
            message: e.render().to_string(),
            exit_code,
        }
    })?;
    let args = Args::from_arg_matches(&matches).map_err(|e| usage(e.to_string()))?;

    let sub = args.subcommand;
    let default_n = match sub {
        Subcommand::Fig1 | Subcommand::Fig4 => 10,
        _ => 2,
    };
    let default_f = if sub == Subcommand::Fig4 { 1.0 } else { 0.05 };
    let params = IntegrationParams {
        dt_periods: match args.dt_per_period {
            StepArg::Auto => None,
            StepArg::Periods(p) => Some(p),
        },
        t_max_periods: args.t_max_periods,
        renorm_periods: args.renorm_periods,
        epsilon_t_rel: args.epsilon_t,
        xi0_policy: args.xi0,
        seed: args.seed,
        metric: args.metric,
        lambda_units: args.lambda_units,
    };
    params.validate().map_err(|e| match e {
        Error::InvalidParameter { name, reason } => {
            usage(format!("error: invalid value for '{}': {reason}", flag_for(name)))
        }
        other => usage(format!("error: {other}")),
    })?;

    let f_grid = args.f_grid.unwrap_or_else(experiments::fig3_fractions);
    if let Some(bad) = f_grid.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(usage(format!("error: invalid value for '--f-grid': {bad} not in [0, 1]")));
    }
    let omega_grid = args.omega_grid.unwrap_or_else(experiments::fig4_omegas);
    if let Some(bad) = omega_grid.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(usage(format!("error: invalid value for '--omega-grid': {bad} is not > 0")));
    }

    Ok(CliConfig {
        subcommand: sub,
        n_osc: args.n.unwrap_or(default_n),
        phase_fraction: args.f.unwrap_or(default_f),
        omega: args.omega.unwrap_or(std::f64::consts::TAU),
        amplitude: args.amplitude,
        params,
        out: args.out,
        f_grid,
        omega_grid,
        workers: args.workers,
        audit_times: args.audit_times,
        audit_trials: args.audit_trials,
        record_runtime: args.record_runtime,
        plot_script: args.plot_script,
    })
}

/// Shortest round-trip decimal (exponent form for very large or small
/// magnitudes).
fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

fn csv_row(row: &SweepRow, record_runtime: bool) -> String {
    [
        row.n_osc.to_string(),
        fmt_f64(row.f),
        fmt_f64(row.omega),
        fmt_f64(row.sigma),
        fmt_f64(row.sqrt_sigma),
        fmt_f64(row.abs_variance),
        opt(row.lambda, fmt_f64),
        opt(row.renorm_count, |c| c.to_string()),
        opt(row.min_kinetic, fmt_f64),
        opt(row.diverged, |d| d.to_string()),
        if record_runtime { opt(row.runtime, fmt_f64) } else { String::new() },
    ]
    .join(",")
}

/// CSV text for a sweep. `runtime_s` stays empty unless `record_runtime`.
pub fn sweep_csv(result: &SweepResult, record_runtime: bool) -> String {
    let mut out = String::with_capacity(64 * (result.rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in &result.rows {
        out.push_str(&csv_row(row, record_runtime));
        out.push('\n');
    }
    out
}

pub fn emit_csv(result: &SweepResult, path: &Path, record_runtime: bool) -> Result<()> {
    fs::write(path, sweep_csv(result, record_runtime))?;
    Ok(())
}

pub fn audit_csv(report: &AuditReport) -> String {
    let mut out = String::from(AUDIT_CSV_HEADER);
    out.push('\n');
    for r in &report.rows {
        let c = &r.comparison;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.point.n_osc,
            fmt_f64(r.point.phase_fraction),
            fmt_f64(r.point.omega),
            c.samples,
            c.skipped,
            fmt_f64(c.i_block),
            fmt_f64(c.j_block),
            fmt_f64(c.k_block),
            fmt_f64(c.total),
        );
    }
    out
}

pub fn emit_audit_csv(report: &AuditReport, path: &Path) -> Result<()> {
    fs::write(path, audit_csv(report))?;
    Ok(())
}

/// matplotlib script that reads `csv_name` (relative to the script) and
/// draws the figure for `kind`.
pub fn plot_script(kind: PlotKind, csv_name: &str) -> String {
    let body = match kind {
        PlotKind::Fig1 => {
            "fig = plt.figure()\n\
             ax = fig.add_subplot(projection=\"polar\")\n\
             ax.plot(2 * np.pi * d[\"f\"], d[\"sigma\"])\n\
             ax.set_title(\"sigma vs phase fraction f\")\n"
        }
        PlotKind::Fig2 => {
            "fig, ax = plt.subplots()\n\
             for n in np.unique(d[\"n_osc\"]):\n\
             \x20   m = d[\"n_osc\"] == n\n\
             \x20   ax.scatter(d[\"sqrt_sigma\"][m], d[\"lambda\"][m], s=10, label=f\"N={n}\")\n\
             ax.set_xlabel(\"sqrt(sigma)\")\n\
             ax.set_ylabel(\"lambda\")\n\
             ax.legend(fontsize=\"x-small\", ncol=2)\n"
        }
        PlotKind::Fig3 => {
            "fig, ax = plt.subplots()\n\
             ax.plot(d[\"f\"], d[\"lambda\"], \"o-\", color=\"C0\")\n\
             ax.set_xlabel(\"f\")\n\
             ax.set_ylabel(\"lambda\", color=\"C0\")\n\
             ax2 = ax.twinx()\n\
             ax2.plot(d[\"f\"], d[\"abs_variance\"], \"s--\", color=\"C1\")\n\
             ax2.set_ylabel(\"<T^2> - <T>^2\", color=\"C1\")\n"
        }
        PlotKind::Fig4 => {
            "fig, ax = plt.subplots()\n\
             ax.plot(d[\"omega\"], d[\"lambda\"], \"o-\")\n\
             ax.set_xlabel(\"omega\")\n\
             ax.set_ylabel(\"lambda\")\n"
        }
    };
    let stem = csv_name.strip_suffix(".csv").unwrap_or(csv_name);
    format!(
        "import pathlib\n\
         import numpy as np\n\
         import matplotlib.pyplot as plt\n\
         \n\
         here = pathlib.Path(__file__).resolve().parent\n\
         d = np.genfromtxt(here / \"{csv_name}\", delimiter=\",\", names=True)\n\
         \n\
         {body}\
         fig.tight_layout()\n\
         fig.savefig(here / \"{stem}.png\", dpi=150)\n"
    )
}

pub fn emit_plot_script(kind: PlotKind, csv_path: &Path, script_path: &Path) -> Result<()> {
    let name = csv_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    fs::write(script_path, plot_script(kind, &name))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    version: &'static str,
    subcommand: &'static str,
    config: &'a CliConfig,
    spread_norm: &'static str,
    wall_time_s: f64,
    points: usize,
    diverged: usize,
    failed: usize,
    /// per-point wall times, in row order
    point_runtimes_s: Vec<f64>,
}

fn meta_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn write_meta(out: &Path, cfg: &CliConfig, wall: f64, result: Option<&SweepResult>, points: usize) -> Result<()> {
    let meta = Metadata {
        version: env!("CARGO_PKG_VERSION"),
        subcommand: cfg.subcommand.name(),
        config: cfg,
        spread_norm: "composite ||(omega xi, dxi/dt)||",
        wall_time_s: wall,
        points,
        diverged: result.map_or(0, |r| r.diverged_count()),
        failed: result.map_or(0, |r| r.failed_count()),
        point_runtimes_s: result
            .map(|r| r.rows.iter().filter_map(|row| row.runtime).collect())
            .unwrap_or_default(),
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(meta_path(out), json + "\n")?;
    Ok(())
}

/// Outcome of a command: exit code plus text for stdout.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self {
            exit_code: EXIT_OK,
            stdout,
            stderr: String::new(),
        }
    }

    fn fail(exit_code: i32, stderr: String) -> Self {
        Self {
            exit_code,
            stdout: String::new(),
            stderr,
        }
    }
}

fn io_fail(e: Error) -> Outcome {
    Outcome::fail(EXIT_IO, format!("error: {e}\n"))
}

fn single_config(cfg: &CliConfig) -> std::result::Result<OscillatorConfig, Outcome> {
    OscillatorConfig::with_amplitude(cfg.n_osc, cfg.omega, cfg.amplitude, cfg.phase_fraction)
        .map_err(|e| Outcome::fail(EXIT_USAGE, format!("error: {e}\n")))
}

fn finish_sweep(cfg: &CliConfig, result: SweepResult, kind: Option<PlotKind>, start: Instant) -> Outcome {
    let out = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", cfg.subcommand.name())));
    if let Err(e) = emit_csv(&result, &out, cfg.record_runtime) {
        return io_fail(e);
    }
    if let Err(e) = write_meta(&out, cfg, start.elapsed().as_secs_f64(), Some(&result), result.rows.len()) {
        return io_fail(e);
    }
    let mut msg = format!(
        "{}: {} rows ({} diverged, {} failed) -> {}\n",
        result.label,
        result.rows.len(),
        result.diverged_count(),
        result.failed_count(),
        out.display()
    );
    if let (true, Some(kind)) = (cfg.plot_script, kind) {
        let script = out.with_extension("py");
        if let Err(e) = emit_plot_script(kind, &out, &script) {
            return io_fail(e);
        }
        let _ = writeln!(msg, "plot script -> {}", script.display());
    }
    Outcome::ok(msg)
}

/// Executes a parsed configuration.
pub fn execute(cfg: &CliConfig) -> Outcome {
    let start = Instant::now();
    let params = &cfg.params;
    let workers = cfg.workers;
    let sweep = |r: Result<SweepResult>| r.map_err(|e| Outcome::fail(EXIT_USAGE, format!("error: {e}\n")));
    let outcome = match cfg.subcommand {
        Subcommand::Sigma => {
            let config = match single_config(cfg) {
                Ok(c) => c,
                Err(o) => return o,
            };
            let stats = config.fluctuation_stats();
            let sampled = sigma_numeric(&config, 10_000).expect("sample count is valid");
            let mut s = String::new();
            let _ = writeln!(s, "n_osc={} f={} omega={}", cfg.n_osc, fmt_f64(cfg.phase_fraction), fmt_f64(cfg.omega));
            let _ = writeln!(s, "sigma={}", fmt_f64(stats.sigma));
            let _ = writeln!(s, "sqrt_sigma={}", fmt_f64(stats.sigma_sqrt));
            let _ = writeln!(s, "sigma_numeric={}", fmt_f64(sampled.sigma));
            let _ = writeln!(s, "abs_variance={}", fmt_f64(sampled.abs_variance));
            let _ = writeln!(s, "mean_kinetic={}", fmt_f64(stats.mean_kinetic));
            Outcome::ok(s)
        }
        Subcommand::Lambda => {
            let config = match single_config(cfg) {
                Ok(c) => c,
                Err(o) => return o,
            };
            let point = GridPoint::new(cfg.n_osc, cfg.phase_fraction, cfg.omega);
            let est = match estimate_lambda(&config, params) {
                Ok(est) => est,
                Err(e @ Error::SingularKineticEnergy { .. }) => {
                    return Outcome::fail(EXIT_SINGULAR, format!("error: {e}\n"));
                }
                Err(e) => return Outcome::fail(EXIT_USAGE, format!("error: {e}\n")),
            };
            let stats = config.fluctuation_stats();
            let mut s = String::new();
            let _ = writeln!(s, "n_osc={} f={} omega={} metric={}", point.n_osc, fmt_f64(point.phase_fraction), fmt_f64(point.omega), params.metric);
            let _ = writeln!(s, "lambda={} ({})", fmt_f64(est.lambda), est.units);
            let _ = writeln!(s, "sqrt_sigma={}", fmt_f64(stats.sigma_sqrt));
            let _ = writeln!(s, "renorm_count={}", est.renorm_count);
            let _ = writeln!(s, "min_kinetic={}", fmt_f64(est.min_kinetic));
            let _ = writeln!(s, "arc_length={}", fmt_f64(est.arc_length_total));
            let _ = writeln!(s, "dt_periods={}", fmt_f64(params.dt_periods(&config)));
            let _ = writeln!(s, "diverged={}", est.diverged);
            if let Some(out) = &cfg.out {
                let sampled = sigma_numeric(&config, experiments::VARIANCE_SAMPLES).expect("sample count is valid");
                let row = SweepRow {
                    n_osc: point.n_osc,
                    f: point.phase_fraction,
                    omega: point.omega,
                    sigma: stats.sigma,
                    sqrt_sigma: stats.sigma_sqrt,
                    abs_variance: sampled.abs_variance,
                    lambda: Some(est.lambda),
                    renorm_count: Some(est.renorm_count),
                    min_kinetic: Some(est.min_kinetic),
                    diverged: Some(est.diverged),
                    runtime: Some(start.elapsed().as_secs_f64()),
                    error: None,
                };
                let result = SweepResult { label: "lambda".into(), rows: vec![row] };
                if let Err(e) = emit_csv(&result, out, cfg.record_runtime)
                    .and_then(|_| write_meta(out, cfg, start.elapsed().as_secs_f64(), Some(&result), 1))
                {
                    return io_fail(e);
                }
                let _ = writeln!(s, "csv -> {}", out.display());
            }
            Outcome::ok(s)
        }
        Subcommand::Fig1 => match sweep(experiments::run_fig1(cfg.n_osc, cfg.omega)) {
            Ok(r) => finish_sweep(cfg, r, Some(PlotKind::Fig1), start),
            Err(o) => o,
        },
        Subcommand::Fig2 => match sweep(experiments::run_fig2(params, workers)) {
            Ok(r) => finish_sweep(cfg, r, Some(PlotKind::Fig2), start),
            Err(o) => o,
        },
        Subcommand::Fig3 => {
            let grid: Vec<GridPoint> = cfg
                .f_grid
                .iter()
                .map(|&f| GridPoint::new(cfg.n_osc, f, cfg.omega))
                .collect();
            let run = experiments::SweepSpec::new("fig3", grid, *params)
                .and_then(|spec| experiments::run_sweep(&spec, workers));
            match sweep(run) {
                Ok(r) => finish_sweep(cfg, r, Some(PlotKind::Fig3), start),
                Err(o) => o,
            }
        }
        Subcommand::Fig4 => {
            let grid: Vec<GridPoint> = cfg
                .omega_grid
                .iter()
                .map(|&w| GridPoint::new(cfg.n_osc, cfg.phase_fraction, w))
                .collect();
            let run = experiments::SweepSpec::new("fig4", grid, *params)
                .and_then(|spec| experiments::run_sweep(&spec, workers));
            match sweep(run) {
                Ok(r) => finish_sweep(cfg, r, Some(PlotKind::Fig4), start),
                Err(o) => o,
            }
        }
        Subcommand::EisenhartControl => {
            match sweep(experiments::run_eisenhart_control(params, workers)) {
                Ok(r) => finish_sweep(cfg, r, None, start),
                Err(o) => o,
            }
        }
        Subcommand::Audit => {
            let report = match run_audit(&audit_grid(), cfg.audit_times, cfg.audit_trials, cfg.params.seed) {
                Ok(r) => r,
                Err(e) => return Outcome::fail(EXIT_USAGE, format!("error: {e}\n")),
            };
            let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("audit.csv"));
            if let Err(e) = emit_audit_csv(&report, &out)
                .and_then(|_| write_meta(&out, cfg, start.elapsed().as_secs_f64(), None, report.rows.len()))
            {
                return io_fail(e);
            }
            Outcome::ok(format!(
                "audit: {} configs, max deviation I {:e}, J {:e}, K {:e} -> {}\n",
                report.rows.len(),
                report.max_i_block(),
                report.max_j_block(),
                report.max_k_block(),
                out.display()
            ))
        }
    };
    outcome
}

/// Parses and runs; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let outcome = match parse_args(argv) {
        Ok(cfg) => execute(&cfg),
        Err(e) if e.exit_code == EXIT_OK => Outcome::ok(e.message),
        Err(e) => Outcome::fail(e.exit_code, e.message),
    };
    print!("{}", outcome.stdout);
    let _ = std::io::stdout().flush();
    eprint!("{}", outcome.stderr);
    outcome.exit_code
}

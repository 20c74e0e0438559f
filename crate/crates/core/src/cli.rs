//! `feederopt` command line: solve, compare, export and verify.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use crate::bundled;
use crate::droop::{verify_on_curve, CurveDeviation, CURVE_TOL};
use crate::io::{load_feeder, load_feeder_str, FeederError, Strictness};
use crate::milp::{export_mps, parse_mps};
use crate::network::FeederModel;
use crate::opf::{build_program, solve_scheduling, DispatchSolution, Mode, OpfError, OperatingPoint, ScheduleConfig};
use crate::oracle::{droop_equilibrium, verify_dispatch, OracleError, VerifyReport, BAND_DELTA, RESIDUAL_TOL};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
/// Outer loop did not converge, or an oracle failed to run.
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_VERIFY_FAILED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "feederopt", version, about = "Unbalanced distribution OPF with Volt-VAr droop PV inverters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Schedule one feeder and write the result artifacts.
    Solve(SolveArgs),
    /// Schedule with and without the droop constraints and compare.
    Compare(CompareArgs),
    /// Write the first-iteration program as MPS.
    Export(ExportArgs),
    /// Check a written solution against the power-flow oracle.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct FeederArgs {
    /// Feeder file (`.feeder.json`) or the name of a bundled feeder.
    #[arg(long)]
    pub feeder: PathBuf,
    /// Warn about unknown fields instead of rejecting the file.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Polygon segments for the circle constraints.
    #[arg(long, default_value_t = 12)]
    pub segments: usize,
    /// Outer re-linearization iterations.
    #[arg(long = "max-iters", default_value_t = 10)]
    pub max_iters: usize,
    /// Convergence threshold on the voltage change, pu.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long = "v-min", default_value_t = 0.95)]
    pub v_min: f64,
    #[arg(long = "v-max", default_value_t = 1.05)]
    pub v_max: f64,
}

impl ModelArgs {
    pub fn config(&self) -> Result<ScheduleConfig, CliError> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(CliError::Usage(format!("--tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(CliError::Usage("--max-iters must be at least 1".into()));
        }
        if !(self.v_min < self.v_max) {
            return Err(CliError::Usage(format!("empty voltage window [{}, {}]", self.v_min, self.v_max)));
        }
        Ok(ScheduleConfig {
            segments: self.segments,
            max_iterations: self.max_iters,
            tolerance: self.tol,
            v_min: self.v_min,
            v_max: self.v_max,
            ..ScheduleConfig::default()
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct Tolerances {
    /// Largest accepted `|V_sweep - V_hat|`, pu.
    #[arg(long = "gap-tol", default_value_t = 5e-3)]
    pub gap: f64,
    /// Largest accepted nodal power residual, pu.
    #[arg(long = "residual-tol", default_value_t = RESIDUAL_TOL)]
    pub residual: f64,
    /// Largest accepted distance from the droop curve, pu.
    #[arg(long = "curve-tol", default_value_t = CURVE_TOL)]
    pub curve: f64,
    /// Largest accepted gap between schedule and local-controller equilibrium, pu.
    #[arg(long = "match-tol", default_value_t = 1e-3)]
    pub matching: f64,
    /// Damping of the local-controller fixed point.
    #[arg(long, default_value_t = 0.5)]
    pub damping: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub feeder: FeederArgs,
    #[arg(long, default_value_t = Mode::Droop)]
    pub mode: Mode,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output directory, created when missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Run the verification checks after solving.
    #[arg(long)]
    pub verify: bool,
    #[command(flatten)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub feeder: FeederArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub feeder: FeederArgs,
    #[arg(long, default_value_t = Mode::Droop)]
    pub mode: Mode,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub feeder: FeederArgs,
    /// `solution.json` written by `solve`; defaults to `<out>/solution.json`.
    #[arg(long)]
    pub solution: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long = "v-min", default_value_t = 0.95)]
    pub v_min: f64,
    #[arg(long = "v-max", default_value_t = 1.05)]
    pub v_max: f64,
    #[command(flatten)]
    pub tolerances: Tolerances,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Feeder(#[from] FeederError),
    #[error(transparent)]
    Opf(#[from] OpfError),
    #[error("oracle: {0}")]
    Oracle(#[from] OracleError),
    #[error("{0}")]
    Export(String),
    #[error("verification failed: {0}")]
    VerifyFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } | CliError::Feeder(_) | CliError::Export(_) => EXIT_USAGE,
            CliError::Opf(OpfError::Infeasible { .. }) => EXIT_INFEASIBLE,
            CliError::Opf(_) | CliError::Oracle(_) => EXIT_NOT_CONVERGED,
            CliError::VerifyFailed(_) => EXIT_VERIFY_FAILED,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Solve(a) => cmd_solve(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Export(a) => cmd_export(a),
        Command::Verify(a) => cmd_verify(a),
    }
}

/// Loads a feeder file; a path that does not exist but names a bundled
/// feeder (with or without `.feeder.json`) loads the bundled copy.
pub fn read_feeder(args: &FeederArgs) -> Result<FeederModel, CliError> {
    let strictness = if args.lenient {
        Strictness::Lenient
    } else {
        Strictness::Strict
    };
    let path = &args.feeder;
    if path.exists() {
        return Ok(load_feeder(path, strictness)?);
    }
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .map(|n| n.trim_end_matches(".feeder.json"))
        .unwrap_or_default();
    if let Some(text) = bundled::source(name) {
        info!("{} not found on disk, using the bundled feeder {name}", path.display());
        return Ok(load_feeder_str(text, strictness)?);
    }
    Err(CliError::Io {
        path: path.clone(),
        source: std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
    })
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(io_err(path))
}

/// Fixed float format of every CSV artifact, as C's `%.9e`.
pub fn fmt_float(v: f64) -> String {
    let s = format!("{v:.9e}");
    match s.split_once('e') {
        Some((mantissa, exp)) => {
            let e: i32 = exp.parse().expect("exponent of a formatted float");
            format!("{mantissa}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
        }
        // inf and NaN carry no exponent
        None => s,
    }
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

/// `voltages.csv`; `v_sweep` comes from the oracle run on the schedule.
pub fn voltages_csv(solution: &DispatchSolution, report: &VerifyReport) -> String {
    let rows = solution
        .buses
        .iter()
        .map(|b| {
            let sweep = report
                .buses
                .iter()
                .find(|c| c.bus == b.bus && c.phase == b.phase)
                .map(|c| fmt_float(c.v_sweep))
                .unwrap_or_default();
            vec![
                b.bus.clone(),
                b.phase.to_string(),
                fmt_float(b.v_re),
                fmt_float(b.v_im),
                fmt_float(b.v_hat),
                sweep,
            ]
        })
        .collect();
    csv_text(&["bus", "phase", "v_re", "v_im", "v_hat", "v_sweep"], rows)
}

/// `pv_dispatch.csv`; zone and curve deviation stay empty where they do not
/// apply.
pub fn pv_dispatch_csv(solution: &DispatchSolution, deviations: &[CurveDeviation]) -> String {
    let rows = solution
        .pvs
        .iter()
        .map(|p| {
            let dev = deviations
                .iter()
                .find(|d| d.pv == p.pv && d.phase == p.phase)
                .map(|d| fmt_float(d.deviation))
                .unwrap_or_default();
            vec![
                p.pv.clone(),
                p.phase.to_string(),
                fmt_float(p.p),
                fmt_float(p.q),
                fmt_float(p.v_local),
                p.zone.map(|z| z.to_string()).unwrap_or_default(),
                dev,
            ]
        })
        .collect();
    csv_text(&["pv", "phase", "p", "q", "v_local", "zone", "curve_deviation"], rows)
}

pub fn iterations_csv(solution: &DispatchSolution) -> String {
    let rows = solution
        .iterations
        .iter()
        .map(|l| {
            vec![
                l.iteration.to_string(),
                fmt_float(l.max_magnitude_error),
                fmt_float(l.max_voltage_change),
                fmt_float(l.objective),
                l.bb_nodes.to_string(),
            ]
        })
        .collect();
    csv_text(
        &["iteration", "max_magnitude_error", "max_voltage_change", "objective", "bb_nodes"],
        rows,
    )
}

fn max_deviation(deviations: &[CurveDeviation]) -> f64 {
    deviations.iter().map(|d| d.deviation).fold(0.0, f64::max)
}

/// Both modes on one feeder.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub droop: DispatchSolution,
    pub nodroop: DispatchSolution,
    pub droop_deviations: Vec<CurveDeviation>,
    pub nodroop_deviations: Vec<CurveDeviation>,
}

impl Comparison {
    pub fn run(feeder: &FeederModel, config: &ScheduleConfig) -> Result<Self, OpfError> {
        let droop = solve_scheduling(feeder, Mode::Droop, config)?;
        let nodroop = solve_scheduling(feeder, Mode::NoDroop, config)?;
        Ok(Comparison {
            droop_deviations: verify_on_curve(&droop, feeder, CURVE_TOL),
            nodroop_deviations: verify_on_curve(&nodroop, feeder, CURVE_TOL),
            droop,
            nodroop,
        })
    }

    pub fn max_deviation_droop(&self) -> f64 {
        max_deviation(&self.droop_deviations)
    }

    pub fn max_deviation_nodroop(&self) -> f64 {
        max_deviation(&self.nodroop_deviations)
    }

    /// `compare.csv`: one `objective` row, then one `deviation` row per
    /// droop PV phase.
    pub fn csv(&self) -> String {
        let mut rows = vec![vec![
            "objective".to_string(),
            String::new(),
            String::new(),
            fmt_float(self.droop.objective),
            fmt_float(self.nodroop.objective),
        ]];
        for d in &self.droop_deviations {
            let other = self
                .nodroop_deviations
                .iter()
                .find(|o| o.pv == d.pv && o.phase == d.phase)
                .map(|o| fmt_float(o.deviation))
                .unwrap_or_default();
            rows.push(vec![
                "deviation".to_string(),
                d.pv.clone(),
                d.phase.to_string(),
                fmt_float(d.deviation),
                other,
            ]);
        }
        csv_text(&["quantity", "pv", "phase", "droop", "nodroop"], rows)
    }

    pub fn summary(&self) -> String {
        format!(
            "max curve deviation: droop {:.3e} pu, nodroop {:.3e} pu; objective: droop {:.6}, nodroop {:.6}",
            self.max_deviation_droop(),
            self.max_deviation_nodroop(),
            self.droop.objective,
            self.nodroop.objective
        )
    }
}

/// One pass/fail line of `verify`.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub measured: f64,
    pub limit: f64,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: {:.3e} (limit {:.3e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.limit
        )?;
        if !self.detail.is_empty() {
            write!(f, " [{}]", self.detail)?;
        }
        Ok(())
    }
}

fn worst(items: impl Iterator<Item = (String, f64)>) -> (String, f64) {
    items.fold((String::new(), 0.0), |acc, (n, v)| if v > acc.1 { (n, v) } else { acc })
}

/// Runs the oracle checks on a solution. An equilibrium that fails to
/// settle is an oracle error.
pub fn verification_checks(
    feeder: &FeederModel,
    solution: &DispatchSolution,
    v_window: (f64, f64),
    tol: &Tolerances,
) -> Result<Vec<Check>, OracleError> {
    let report = verify_dispatch(feeder, solution, v_window)?;
    let mut checks = Vec::new();

    let (bus, residual) = worst(report.buses.iter().map(|b| (format!("{}.{}", b.bus, b.phase), b.residual)));
    checks.push(Check {
        name: "nodal power residual",
        measured: residual,
        limit: tol.residual,
        passed: residual <= tol.residual,
        detail: if residual > tol.residual { format!("worst at bus {bus}") } else { String::new() },
    });
    let (bus, gap) = worst(
        report
            .buses
            .iter()
            .map(|b| (format!("{}.{}", b.bus, b.phase), (b.v_sweep - b.v_hat).abs())),
    );
    checks.push(Check {
        name: "sweep voltage gap",
        measured: gap,
        limit: tol.gap,
        passed: gap <= tol.gap,
        detail: if gap > tol.gap { format!("worst at bus {bus}") } else { String::new() },
    });
    let excursion = (report.max_sweep_magnitude - v_window.1)
        .max(v_window.0 - report.min_sweep_magnitude)
        .max(0.0);
    checks.push(Check {
        name: "sweep voltage outside window",
        measured: excursion,
        limit: BAND_DELTA,
        passed: report.band_flags.is_empty(),
        detail: report.band_flags.join(", "),
    });

    let deviations = verify_on_curve(solution, feeder, tol.curve);
    if !deviations.is_empty() {
        let (pv, dev) = worst(deviations.iter().map(|d| (format!("{}.{}", d.pv, d.phase), d.deviation)));
        checks.push(Check {
            name: "droop curve deviation",
            measured: dev,
            limit: tol.curve,
            passed: dev <= tol.curve,
            detail: if dev > tol.curve { format!("worst at {pv}") } else { String::new() },
        });
        let eq = droop_equilibrium(feeder, solution, tol.damping)?;
        let gap = eq.max_schedule_gap();
        checks.push(Check {
            name: "local controller equilibrium match",
            measured: gap,
            limit: tol.matching,
            passed: gap <= tol.matching,
            detail: format!("{} fixed-point iterations", eq.iterations),
        });
    }
    Ok(checks)
}

fn report_checks(checks: &[Check]) -> Result<(), CliError> {
    for c in checks {
        println!("{c}");
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::VerifyFailed(failed.join(", ")))
    }
}

pub fn cmd_solve(args: &SolveArgs) -> Result<(), CliError> {
    let config = args.model.config()?;
    let feeder = read_feeder(&args.feeder)?;
    let solution = solve_scheduling(&feeder, args.mode, &config)?;
    let report = verify_dispatch(&feeder, &solution, config.v_window())?;
    let deviations = verify_on_curve(&solution, &feeder, args.tolerances.curve);

    create_dir(&args.out)?;
    let json = serde_json::to_string_pretty(&solution).expect("solution serializes");
    write_file(&args.out.join("solution.json"), &(json + "\n"))?;
    write_file(&args.out.join("voltages.csv"), &voltages_csv(&solution, &report))?;
    write_file(&args.out.join("pv_dispatch.csv"), &pv_dispatch_csv(&solution, &deviations))?;
    write_file(&args.out.join("iterations.csv"), &iterations_csv(&solution))?;

    println!(
        "{} ({}): objective {:.6}, total cost {:.6}, {} iterations",
        solution.feeder,
        solution.mode,
        solution.objective,
        solution.total_cost(),
        solution.iterations.len()
    );
    for l in &solution.iterations {
        println!(
            "  iteration {}: magnitude error {:.3e}, voltage change {:.3e}, {} nodes",
            l.iteration, l.max_magnitude_error, l.max_voltage_change, l.bb_nodes
        );
    }
    if args.verify {
        let checks = verification_checks(&feeder, &solution, config.v_window(), &args.tolerances)?;
        report_checks(&checks)?;
    }
    Ok(())
}

pub fn cmd_compare(args: &CompareArgs) -> Result<(), CliError> {
    let config = args.model.config()?;
    let feeder = read_feeder(&args.feeder)?;
    let cmp = Comparison::run(&feeder, &config)?;
    create_dir(&args.out)?;
    write_file(&args.out.join("compare.csv"), &cmp.csv())?;
    println!("{}", cmp.summary());
    Ok(())
}

pub fn cmd_export(args: &ExportArgs) -> Result<(), CliError> {
    let config = args.model.config()?;
    let feeder = read_feeder(&args.feeder)?;
    let op = OperatingPoint::flat_start(&feeder);
    let (program, _) = build_program(&feeder, &op, args.mode, config.segments, &config.big_m, config.v_window())?;
    let text = export_mps(&program);
    let back = parse_mps(&text).map_err(|e| CliError::Export(format!("written MPS does not parse: {e}")))?;
    if back != program {
        return Err(CliError::Export("written MPS does not reproduce the program".into()));
    }
    create_dir(&args.out)?;
    let path = args.out.join("model.mps");
    write_file(&path, &text)?;
    println!(
        "{}: {} variables ({} binary), {} rows",
        path.display(),
        program.num_vars(),
        program.binaries().len(),
        program.num_constraints()
    );
    Ok(())
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<(), CliError> {
    let path = match (&args.solution, &args.out) {
        (Some(p), _) => p.clone(),
        (None, Some(dir)) => dir.join("solution.json"),
        (None, None) => return Err(CliError::Usage("verify needs --solution or --out".into())),
    };
    let feeder = read_feeder(&args.feeder)?;
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let solution: DispatchSolution =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if solution.feeder != feeder.name {
        warn!("solution was computed for feeder {}, checking against {}", solution.feeder, feeder.name);
    }
    let checks = verification_checks(&feeder, &solution, (args.v_min, args.v_max), &args.tolerances)?;
    report_checks(&checks)
}

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gapflow::experiments::{
    default_geometries, load_report, residual_ratio_max, solve_case, write_outputs,
};
use gapflow::grid::write_field_csv;
use gapflow::{
    aux_field, invariant_suite, keller, run_sweep, Error, GapGeometry, PhysicsMode, RunConfig,
    SweepReport,
};

const PASS: u8 = 0;
const CRITERION_FAILED: u8 = 1;
const INVALID_INPUT: u8 = 2;
const SOLVER_FAILURE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "gapflow",
    version,
    about = "Gradient blow-up between two close rigid particles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Auxiliary gap fields on the quadratic neck.
    Asym {
        #[command(subcommand)]
        command: Asym,
    },
    /// Runs the invariant suite and prints it as JSON.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solves the first gap width of a config and exports the fields.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mode: Option<Mode>,
        /// Output directory; defaults to the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs a gap-width sweep and writes sweep.csv, sweep.json, checks.json.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        mode: Option<Mode>,
        /// Run the invariant suite with this seed and include it in checks.json.
        #[arg(long)]
        checks_seed: Option<u64>,
    },
    /// Re-fits a stored sweep.json and prints the verdicts.
    Rates {
        #[arg(long)]
        report: PathBuf,
    },
}

#[derive(Subcommand)]
enum Asym {
    /// Values, pressure, divergence and gradient of one field at one point, as CSV.
    Eval {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long)]
        eps: f64,
        /// Comma-separated coordinates, x' first and x_d last.
        #[arg(long, value_delimiter = ',', num_args = 1.., allow_hyphen_values = true)]
        at: Vec<f64>,
    },
    /// Maximum normalized Stokes residual for each gap width, as CSV.
    Residual {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        eps_list: Vec<f64>,
    },
}

#[derive(Args)]
struct FieldArgs {
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    i: u8,
    #[arg(long)]
    alpha: usize,
    /// Profile curvature; the fields are exact only for 1.
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Stokes,
    Ns,
}

impl From<Mode> for PhysicsMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Stokes => PhysicsMode::Stokes,
            Mode::Ns => PhysicsMode::NavierStokes,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        // a closed pipe (`gapflow ... | head`) is not an error
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::from(PASS),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_solver_failure() {
                SOLVER_FAILURE
            } else {
                INVALID_INPUT
            })
        }
    }
}

fn run(cmd: Command) -> gapflow::Result<u8> {
    match cmd {
        Command::Asym {
            command: Asym::Eval { field, eps, at },
        } => asym_eval(&field, eps, &at),
        Command::Asym {
            command: Asym::Residual { field, eps_list },
        } => asym_residual(&field, &eps_list),
        Command::Check { seed, out } => {
            let report = invariant_suite(&default_geometries(), seed);
            let text = serde_json::to_string_pretty(&report)?;
            say(format_args!("{text}"));
            if let Some(path) = out {
                std::fs::write(path, &text)?;
            }
            Ok(if report.passed() {
                PASS
            } else {
                CRITERION_FAILED
            })
        }
        Command::Solve { config, mode, out } => solve(&config, mode, out),
        Command::Sweep {
            config,
            out,
            mode,
            checks_seed,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(m) = mode {
                cfg.mode = m.into();
            }
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            let report = run_sweep(&cfg)?;
            let invariants = checks_seed.map(|s| invariant_suite(&default_geometries(), s));
            let inv_ok = invariants.as_ref().is_none_or(|c| c.passed());
            write_outputs(&report, invariants, &dir)?;
            print_verdicts(&report);
            eprintln!("wrote {}", dir.display());
            Ok(match sweep_code(&report) {
                PASS if !inv_ok => CRITERION_FAILED,
                c => c,
            })
        }
        Command::Rates { report } => {
            let report = load_report(&report)?;
            print_verdicts(&report);
            Ok(sweep_code(&report))
        }
    }
}

fn quadratic(field: &FieldArgs, eps: f64) -> gapflow::Result<GapGeometry> {
    GapGeometry::quadratic(field.dim, eps, field.kappa)
}

fn asym_eval(args: &FieldArgs, eps: f64, at: &[f64]) -> gapflow::Result<u8> {
    if at.len() != args.dim {
        return Err(Error::InvalidConfig(format!(
            "--at needs {} coordinates, got {}",
            args.dim,
            at.len()
        )));
    }
    let geom = quadratic(args, eps)?;
    let f = aux_field(&geom, args.i, args.alpha, 1.0)?;
    let mut rows: Vec<(String, f64)> = vec![("keller".into(), keller(&geom, at)?)];
    for (c, v) in f.value(at)?.into_iter().enumerate() {
        rows.push((format!("v{}", c + 1), v));
    }
    rows.push(("p".into(), f.pressure(at)?));
    rows.push(("div".into(), f.divergence(at)?));
    for (a, row) in f.gradient(at)?.into_iter().enumerate() {
        for (b, g) in row.into_iter().enumerate() {
            rows.push((format!("dv{}_dx{}", a + 1, b + 1), g));
        }
    }
    let mut out = std::io::stdout().lock();
    let coords: Vec<String> = (1..=args.dim).map(|c| format!("x{c}")).collect();
    writeln!(out, "dim,i,alpha,{},quantity,value", coords.join(","))?;
    let point: Vec<String> = at.iter().map(|x| format!("{x:.16e}")).collect();
    for (q, v) in rows {
        writeln!(
            out,
            "{},{},{},{},{q},{v:.16e}",
            args.dim,
            args.i,
            args.alpha,
            point.join(",")
        )?;
    }
    Ok(PASS)
}

fn asym_residual(args: &FieldArgs, eps_list: &[f64]) -> gapflow::Result<u8> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "dim,i,alpha,eps,quantity,value")?;
    for &eps in eps_list {
        let ratio = residual_ratio_max(&quadratic(args, eps)?, args.i, args.alpha)?;
        writeln!(
            out,
            "{},{},{},{eps:.16e},residual_ratio,{ratio:.16e}",
            args.dim, args.i, args.alpha
        )?;
    }
    Ok(PASS)
}

fn solve(config: &Path, mode: Option<Mode>, out: Option<PathBuf>) -> gapflow::Result<u8> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(m) = mode {
        cfg.mode = m.into();
    }
    let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
    let case = solve_case(&cfg, cfg.eps_list[0])?;
    std::fs::create_dir_all(&dir)?;
    let mut exports = vec![("field_stokes.csv", &case.stokes)];
    if let Some(ns) = &case.navier_stokes {
        exports.push(("field_ns.csv", ns));
    }
    for (name, field) in exports {
        let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join(name))?);
        write_field_csv(&case.grid, field, &mut w)?;
        w.flush()?;
    }
    let row = serde_json::to_string_pretty(&case.row)?;
    std::fs::write(dir.join("row.json"), &row)?;
    say(format_args!("{row}"));
    match case.ns_error {
        Some(e) => {
            eprintln!("navier-stokes: {e}");
            Ok(if e.is_solver_failure() {
                SOLVER_FAILURE
            } else {
                INVALID_INPUT
            })
        }
        None => Ok(PASS),
    }
}

/// Line to stdout; a reader that has gone away is ignored.
fn say(line: std::fmt::Arguments) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn print_verdicts(report: &SweepReport) {
    for f in &report.failures {
        say(format_args!(
            "case eps={:e} failed in {}: {}",
            f.eps, f.stage, f.message
        ));
    }
    for s in &report.skipped {
        say(format_args!("skipped {s}"));
    }
    for v in &report.verdicts {
        let tag = if v.passed { "PASS" } else { "FAIL" };
        say(format_args!(
            "criterion {} {tag} {}: {}",
            v.criterion, v.name, v.detail
        ));
    }
}

fn sweep_code(report: &SweepReport) -> u8 {
    if report.failures.iter().any(|f| f.solver_failure) {
        SOLVER_FAILURE
    } else if report.all_passed() {
        PASS
    } else {
        CRITERION_FAILED
    }
}

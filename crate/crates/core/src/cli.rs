//! Command-line front end. Exit codes: 0 success, 1 usage or input error,
//! 2 numerical failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bounds::{build_report, report_csv, report_json};
use crate::error::{Error, Result};
use crate::geometry::{analytic_volume, build_grid, DomainSpec};
use crate::hierarchy::{solve_hierarchy, MAX_ORDER};
use crate::montecarlo::{estimates_csv, estimates_json, simulate_exit_moments, ExitRule, McConfig, DEFAULT_MAX_STEPS};
use crate::operators::{assemble_laplacian, read_user_matrix, SparseOperator, DEFAULT_TOL};
use crate::report::{fmt_num, OutputFormat};
use crate::spectral::{full_spectrum, smallest_eigenpairs};
use crate::verify::{all_passed, render_csv, render_text, run_suite};

/// Relative tolerance of the in-process sandwich check of `bounds`.
pub const SANDWICH_TOL: f64 = 1e-7;
pub const OUT_DIR_ENV: &str = "EXIT_MOMENTS_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "exit-moments", version, about = "Exit-time moment spectra and Dirichlet eigenvalue bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the Poisson hierarchy and write the moment table.
    Moments(MomentsArgs),
    /// Eigenvalue bounds from the moment spectrum, checked against the
    /// discrete principal eigenvalue.
    Bounds(BoundsArgs),
    /// Run the identity checks.
    Verify(VerifyArgs),
    /// Monte Carlo exit-time moments from one starting point.
    Mc(McArgs),
}

#[derive(Debug, Args)]
struct OperatorArgs {
    /// Domain, e.g. `interval:1`, `rect:1x2`, `disk:1`, `annulus:0.5,1`, `lshape:1,0.5`.
    #[arg(long, conflicts_with = "matrix", required_unless_present = "matrix")]
    domain: Option<DomainSpec>,
    /// Operator in the user-matrix text format instead of a grid.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Grid spacing.
    #[arg(long, default_value_t = 0.01)]
    h: f64,
    /// Relative residual tolerance of the linear solves.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output file; relative paths resolve against $EXIT_MOMENTS_OUT_DIR when set.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
}

#[derive(Debug, Args)]
struct MomentsArgs {
    #[command(flatten)]
    op: OperatorArgs,
    /// Highest moment order.
    #[arg(long, default_value_t = 6)]
    kmax: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[command(flatten)]
    op: OperatorArgs,
    /// Highest bound order; the hierarchy is solved to twice this.
    #[arg(long, default_value_t = 3)]
    kmax: usize,
    /// Number of low eigenpairs computed for the reference eigenvalue.
    #[arg(long, default_value_t = 1)]
    eigs: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    op: OperatorArgs,
    /// Hierarchy depth used by the checks.
    #[arg(long, default_value_t = 6)]
    kmax: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct McArgs {
    /// Domain, as for the grid commands.
    #[arg(long)]
    domain: DomainSpec,
    /// Starting point, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    x0: Vec<f64>,
    /// Highest moment order.
    #[arg(long, default_value_t = 2)]
    kmax: usize,
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    /// Time step; each coordinate increment has variance 2·dt.
    #[arg(long, default_value_t = 1e-5)]
    dt: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Paths per independent RNG stream. Changing it changes the sample.
    #[arg(long, default_value_t = 1000)]
    batch_size: usize,
    /// Per-path step cap; capped paths count as censored.
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    max_steps: u64,
    #[arg(long, value_enum, default_value_t = ExitRule::Discrete)]
    exit_rule: ExitRule,
    /// Also solve the hierarchy at this spacing and report the value at the
    /// grid node nearest to the starting point on standard error.
    #[arg(long)]
    compare_h: Option<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let outcome = match cli.command {
        Command::Moments(a) => cmd_moments(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Mc(a) => cmd_mc(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn check_order(k: usize, what: &str) -> Result<()> {
    if k == 0 || k > MAX_ORDER {
        return Err(Error::InvalidArgument(format!("{what} {k} outside 1..={MAX_ORDER}")));
    }
    Ok(())
}

fn load_operator(args: &OperatorArgs) -> Result<SparseOperator> {
    if !(args.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", args.tol)));
    }
    match (&args.domain, &args.matrix) {
        (_, Some(path)) => read_user_matrix(path),
        (Some(spec), None) => Ok(assemble_laplacian(&build_grid(spec, args.h)?)),
        (None, None) => Err(Error::InvalidArgument("either --domain or --matrix is required".into())),
    }
}

fn resolve_out(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn emit(output: &OutputArgs, csv: impl FnOnce() -> String, json: impl FnOnce() -> serde_json::Value) -> Result<()> {
    let text = match output.format {
        OutputFormat::Csv => csv(),
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&json()).expect("values serialize");
            s.push('\n');
            s
        }
    };
    match &output.out {
        Some(path) => {
            let path = resolve_out(path);
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(&path, text)?;
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_moments(args: MomentsArgs) -> Result<i32> {
    check_order(args.kmax, "kmax")?;
    let op = load_operator(&args.op)?;
    let hier = solve_hierarchy(&op, args.kmax, args.op.tol)?;
    emit(&args.output, || hier.to_csv(), || hier.to_json())?;
    Ok(0)
}

fn cmd_bounds(args: BoundsArgs) -> Result<i32> {
    check_order(args.kmax, "kmax")?;
    check_order(2 * args.kmax, "hierarchy depth 2*kmax =")?;
    if args.eigs == 0 {
        return Err(Error::InvalidArgument("--eigs must be at least 1".into()));
    }
    let op = load_operator(&args.op)?;
    let hier = solve_hierarchy(&op, 2 * args.kmax, args.op.tol)?;
    let spectrum = if 2 * args.eigs > op.order() { full_spectrum(&op)? } else { smallest_eigenpairs(&op, args.eigs)? };
    let volume = match (&args.op.domain, &args.op.matrix) {
        (Some(spec), None) => analytic_volume(spec),
        _ => op.volume(),
    };
    let rows = build_report(&hier, &spectrum, volume, args.kmax)?;
    emit(&args.output, || report_csv(&rows), || report_json(&rows))?;
    let violations: Vec<String> = rows.iter().flat_map(|r| r.sandwich_violations(SANDWICH_TOL)).collect();
    if violations.is_empty() {
        Ok(0)
    } else {
        for v in &violations {
            eprintln!("sandwich violation: {v}");
        }
        Ok(2)
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<i32> {
    check_order(args.kmax, "kmax")?;
    let op = load_operator(&args.op)?;
    let checks = run_suite(&op, args.kmax, args.op.tol.min(1e-12))?;
    if args.output.out.is_none() && args.output.format == OutputFormat::Csv {
        print!("{}", render_text(&checks));
    } else {
        emit(&args.output, || render_csv(&checks), || serde_json::to_value(&checks).expect("checks serialize"))?;
    }
    Ok(if all_passed(&checks) { 0 } else { 2 })
}

fn cmd_mc(args: McArgs) -> Result<i32> {
    check_order(args.kmax, "kmax")?;
    let cfg = McConfig {
        dt: args.dt,
        n_paths: args.paths,
        max_steps: args.max_steps,
        seed: args.seed,
        batch_size: args.batch_size,
        exit_rule: args.exit_rule,
        lambda1_estimate: None,
    };
    let estimates = simulate_exit_moments(&args.domain, &args.x0, args.kmax, &cfg)?;
    emit(&args.output, || estimates_csv(&args.x0, &estimates), || estimates_json(&args.x0, &estimates))?;
    if let Some(h) = args.compare_h {
        let grid = build_grid(&args.domain, h)?;
        let hier = solve_hierarchy(&assemble_laplacian(&grid), args.kmax, DEFAULT_TOL)?;
        let node = (0..grid.len())
            .min_by(|&a, &b| {
                let d = |i: usize| grid.point(i).iter().zip(&args.x0).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
                d(a).total_cmp(&d(b))
            })
            .expect("grid is nonempty");
        for e in &estimates {
            let u = hier.u(e.k).expect("depth matches kmax")[node];
            eprintln!(
                "k={} mc={} hierarchy={} z={}",
                e.k,
                fmt_num(e.mean),
                fmt_num(u),
                fmt_num((e.mean - u) / e.std_error)
            );
        }
    }
    Ok(0)
}

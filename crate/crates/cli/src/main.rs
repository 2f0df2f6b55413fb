mod checks;
mod config;
mod plot;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use odeim_bd::bethe::{annotate_zeros, conformal_limit_study, scan_q, standard_shifts, QSource, ZeroWindow};
use odeim_bd::io::{read_q_table, write_limit_csv, write_q_csv, write_scan_csv, write_zeros_csv};
use odeim_bd::{
    solve_field, ConformalOptions, ConformalParams, ConformalSource, FieldConfig, FieldSolution, MassiveOptions, MassiveSource,
    ModelParams, QTriple, Which, C64,
};

use checks::{CheckContext, SUITES};
use config::{parse_grid, parse_range, parse_shifts, pick, require, usage, RunConfig, UsageError};

#[derive(Parser)]
#[command(name = "odeim-bd", version, about = "Massive ODE/IM correspondence for the Bullough-Dodd model")]
struct Cli {
    /// Worker threads for grid evaluations.
    #[arg(long, global = true, env = "ODEIM_BD_JOBS")]
    jobs: Option<usize>,
    /// JSON file with default settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct ModelArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    g: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
}

#[derive(Args, Clone, Default)]
struct GridArgs {
    #[arg(long)]
    rho_min: Option<f64>,
    #[arg(long)]
    rho_max: Option<f64>,
    /// Number of radial grid points.
    #[arg(long)]
    points: Option<usize>,
    /// Number of angular cosine modes.
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Args, Clone, Default)]
struct SourceArgs {
    /// Field JSON written by solve-field (massive source).
    #[arg(long, conflicts_with = "conformal")]
    field: Option<PathBuf>,
    /// Use the conformal third-order equation instead of a field.
    #[arg(long)]
    conformal: bool,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the modified Bullough-Dodd equation and write the field as JSON.
    SolveField {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Residual tolerance of the Newton iteration.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// SVG of eta against ln rho.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Evaluate Q-functions on a theta grid with imaginary shifts.
    Qscan {
        #[command(flatten)]
        source: SourceArgs,
        /// start:stop:count
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<String>,
        /// none, qq, bae, or a list such as 0,pi/3,-pi/3
        #[arg(long, allow_hyphen_values = true)]
        shifts: Option<String>,
        /// Transport tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Fail if any grid point fails.
        #[arg(long)]
        strict: bool,
    },
    /// Locate zeros of Q-functions and evaluate the Bethe equations at them.
    Zeros {
        #[command(flatten)]
        source: SourceArgs,
        /// Seeding grid start:stop:count
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<String>,
        /// Real-part window lo:hi (defaults to the grid range)
        #[arg(long, allow_hyphen_values = true)]
        window: Option<String>,
        #[arg(long)]
        im_max: Option<f64>,
        /// Comma-separated subset of plus, zero, minus
        #[arg(long)]
        which: Option<String>,
        /// Root tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write Q at every zero and its four shifts.
        #[arg(long)]
        q_out: Option<PathBuf>,
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Run identity checks and print a pass/fail table.
    Check {
        /// wronskian, zfun, ufun, qq, bae, conf-limit or all
        #[arg(long)]
        suite: Option<String>,
        #[arg(long)]
        field: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        /// Check QQ or BAE on a Q table instead of recomputing.
        #[arg(long)]
        q_file: Option<PathBuf>,
    },
    /// Compare massive and conformal Q at fixed theta along a decreasing sequence of s.
    ConfLimit {
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        g: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<f64>,
        /// Comma-separated decreasing values of s.
        #[arg(long, value_delimiter = ',')]
        s_seq: Option<Vec<f64>>,
        #[arg(long)]
        which: Option<String>,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn field_config(grid: &GridArgs, tol: Option<f64>, cfg: &RunConfig) -> FieldConfig {
    let mut f = cfg.field.clone().unwrap_or_default();
    f.rho_min = grid.rho_min.unwrap_or(f.rho_min);
    f.rho_max = grid.rho_max.unwrap_or(f.rho_max);
    f.n_rho = grid.points.unwrap_or(f.n_rho);
    f.n_modes = grid.modes.unwrap_or(f.n_modes);
    f.newton_max_iter = grid.max_iter.unwrap_or(f.newton_max_iter);
    f.residual_tol = tol.unwrap_or(f.residual_tol);
    f
}

fn model_params(m: &ModelArgs, cfg: &RunConfig) -> Result<ModelParams> {
    let alpha = require(pick(m.alpha, cfg.alpha), "alpha")?;
    let g = require(pick(m.g, cfg.g), "g")?;
    let s = require(pick(m.s, cfg.s), "s")?;
    ModelParams::new(alpha, g, s).map_err(|e| usage(e.to_string()))
}

fn conformal_params(m: &ModelArgs, cfg: &RunConfig, default: Option<(f64, f64)>) -> Result<ConformalParams> {
    let alpha = pick(m.alpha, cfg.alpha).or(default.map(|d| d.0));
    let g = pick(m.g, cfg.g).or(default.map(|d| d.1));
    ConformalParams::new(require(alpha, "alpha")?, require(g, "g")?).map_err(|e| usage(e.to_string()))
}

fn load_field(path: &Path) -> Result<FieldSolution> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(FieldSolution::from_json(&text)?)
}

enum Source {
    Massive(FieldSolution),
    Conformal(ConformalParams),
}

fn resolve_source(src: &SourceArgs, cfg: &RunConfig) -> Result<Source> {
    let field = src.field.clone().or_else(|| if src.conformal { None } else { cfg.field_file.clone() });
    if let Some(path) = field {
        return Ok(Source::Massive(load_field(&path)?));
    }
    if src.conformal || cfg.conformal == Some(true) {
        return Ok(Source::Conformal(conformal_params(&src.model, cfg, None)?));
    }
    Err(usage("choose a source: --field FILE or --conformal"))
}

fn with_source<T>(src: &Source, tol: Option<f64>, f: impl FnOnce(&dyn QSource) -> Result<T>) -> Result<T> {
    match src {
        Source::Massive(sol) => {
            let mut s = MassiveSource::new(sol);
            if let Some(t) = tol {
                s.opts.tol = t;
            }
            f(&s)
        }
        Source::Conformal(p) => {
            let mut s = ConformalSource::new(*p);
            if let Some(t) = tol {
                s.opts.tol = t;
            }
            f(&s)
        }
    }
}

fn parse_which_list(s: &str) -> Result<Vec<Which>> {
    s.split(',').map(|w| w.trim().parse::<Which>().map_err(|e| usage(e.to_string()))).collect()
}

fn cmd_solve_field(model: &ModelArgs, grid: &GridArgs, tol: Option<f64>, out: Option<PathBuf>, plot: Option<PathBuf>, cfg: &RunConfig) -> Result<()> {
    let out = require(pick(out, cfg.out.clone()), "out")?;
    let params = model_params(model, cfg)?;
    let fc = field_config(grid, tol, cfg);
    fc.validate().map_err(|e| usage(e.to_string()))?;
    let sol = solve_field(&params, &fc)?;
    std::fs::write(&out, sol.to_json()?).with_context(|| format!("writing {}", out.display()))?;
    println!("alpha = {}, g = {}, s = {}", params.alpha, params.g, params.s);
    println!("eta0 = {:.12}", sol.eta0);
    println!("residual = {:.3e}", sol.residual);
    println!("newton iterations = {}", sol.iterations);
    println!("gamma = {:?}", sol.gamma);
    for w in &sol.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(p) = pick(plot, cfg.plot.clone()) {
        plot::field_plot(&p, &sol)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_qscan(
    source: &SourceArgs,
    theta: Option<String>,
    shifts: Option<String>,
    tol: Option<f64>,
    out: Option<PathBuf>,
    plot: Option<PathBuf>,
    strict: bool,
    cfg: &RunConfig,
) -> Result<()> {
    let out = require(pick(out, cfg.out.clone()), "out")?;
    let grid = parse_grid(&require(pick(theta, cfg.theta.clone()), "theta")?)?;
    let shifts = match pick(shifts, cfg.shifts.clone()) {
        Some(s) => parse_shifts(&s)?,
        None => vec![0.0],
    };
    let strict = strict || cfg.strict == Some(true);
    let src = resolve_source(source, cfg)?;
    let scan = with_source(&src, pick(tol, cfg.tol), |s| Ok(scan_q(s, &grid, &shifts)?))?;
    let failures = scan.failures();
    for (t, e) in &failures {
        eprintln!("theta = {t}: {e}");
    }
    if strict && !failures.is_empty() {
        anyhow::bail!("{} grid points failed", failures.len());
    }
    write_scan_csv(create(&out)?, &scan)?;
    println!("wrote {} rows to {}", scan.points.len() - failures.len(), out.display());
    if let Some(p) = pick(plot, cfg.plot.clone()) {
        plot::q_plot(&p, &scan, &[])?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_zeros(
    source: &SourceArgs,
    theta: Option<String>,
    window: Option<String>,
    im_max: Option<f64>,
    which: Option<String>,
    tol: Option<f64>,
    out: Option<PathBuf>,
    q_out: Option<PathBuf>,
    plot: Option<PathBuf>,
    cfg: &RunConfig,
) -> Result<()> {
    let out = require(pick(out, cfg.out.clone()), "out")?;
    let grid = parse_grid(&require(pick(theta, cfg.theta.clone()), "theta")?)?;
    let (lo, hi) = match pick(window, cfg.window.clone()) {
        Some(w) => parse_range(&w)?,
        None => (grid[0].re, grid[grid.len() - 1].re),
    };
    let mut win = ZeroWindow::new(lo, hi);
    win.im_max = pick(im_max, cfg.im_max).unwrap_or(win.im_max);
    let which = match pick(which, cfg.which.clone()) {
        Some(w) => parse_which_list(&w)?,
        None => vec![Which::Plus, Which::Zero, Which::Minus],
    };
    let root_tol = pick(tol, cfg.tol).unwrap_or(1e-12);
    let q_out = pick(q_out, cfg.q_out.clone());
    let src = resolve_source(source, cfg)?;
    with_source(&src, None, |s| {
        let mut scan = scan_q(s, &grid, &[0.0])?;
        let skipped = annotate_zeros(&mut scan, s, &which, win, root_tol);
        for (t, e) in &skipped {
            eprintln!("seed {t}: {e}");
        }
        for z in &scan.zeros {
            if let Some(w) = &z.warning {
                eprintln!("warning: zero of Q {} at {}: {w}", z.which.as_str(), z.theta);
            }
        }
        write_zeros_csv(create(&out)?, &scan.zeros)?;
        println!("{} zeros written to {}", scan.zeros.len(), out.display());
        for z in &scan.zeros {
            let b = z.bae.map(|b| format!("{:.3e}", b.norm())).unwrap_or_else(|| "-".into());
            println!("  Q {:<5} theta = {:.10} {:+.3e}i  |Q| = {:.2e}  BAE = {b}", z.which.as_str(), z.theta.re, z.theta.im, z.abs_q);
        }
        if let Some(path) = &q_out {
            let thetas: Vec<C64> = scan
                .zeros
                .iter()
                .filter(|z| z.which != Which::Zero)
                .flat_map(|z| standard_shifts().into_iter().map(move |d| z.theta + C64::new(0.0, d)))
                .collect();
            let rows: Vec<QTriple> = thetas.iter().map(|&t| s.eval(t)).collect::<odeim_bd::Result<_>>()?;
            write_q_csv(create(path)?, &rows, s.kind(), s.alpha(), &[])?;
        }
        if let Some(p) = pick(plot.clone(), cfg.plot.clone()) {
            plot::q_plot(&p, &scan, &scan.zeros)?;
        }
        Ok(())
    })
}

fn cmd_check(suite: Option<String>, field: Option<PathBuf>, model: &ModelArgs, q_file: Option<PathBuf>, cfg: &RunConfig) -> Result<bool> {
    let suite = require(pick(suite, cfg.suite.clone()), "suite")?;
    if !SUITES.contains(&suite.as_str()) {
        return Err(usage(format!("unknown suite {suite:?}; expected one of {}", SUITES.join(", "))));
    }
    let conformal = conformal_params(model, cfg, Some((1.0, 0.1)))?;
    let rows = if let Some(path) = pick(q_file, cfg.q_file.clone()) {
        let (source, table) = read_q_table(File::open(&path).with_context(|| format!("reading {}", path.display()))?)?;
        match suite.as_str() {
            "qq" => checks::qq_from_table(source, &table, conformal.alpha, conformal.g),
            "bae" => checks::bae_from_table(source, &table, conformal.alpha, conformal.g),
            _ => return Err(usage("--q-file applies to the qq and bae suites")),
        }
    } else {
        let field_path = pick(field, cfg.field_file.clone());
        let want_massive = field_path.is_some() || pick(model.s, cfg.s).is_some() || checks::suite_needs_field(&suite);
        let mut fc = cfg.field.clone().unwrap_or_default();
        if fc.n_rho == 0 {
            fc = FieldConfig::default();
        }
        let sol = match (field_path, want_massive) {
            (Some(p), _) => Some(load_field(&p)?),
            (None, true) => {
                let s = pick(model.s, cfg.s).unwrap_or(1.0);
                let p = ModelParams::new(conformal.alpha, conformal.g, s).map_err(|e| usage(e.to_string()))?;
                Some(solve_field(&p, &fc)?)
            }
            (None, false) => None,
        };
        let ctx = CheckContext {
            conformal,
            field: sol.as_ref(),
            field_config: fc,
            s_sequence: cfg.s_sequence.clone().unwrap_or_else(|| vec![0.4, 0.2, 0.1]),
        };
        checks::run_suite(&suite, &ctx)?
    };
    checks::print_table(&rows);
    Ok(rows.iter().all(|r| r.pass()))
}

#[allow(clippy::too_many_arguments)]
fn cmd_conf_limit(
    alpha: Option<f64>,
    g: Option<f64>,
    theta: Option<f64>,
    s_seq: Option<Vec<f64>>,
    which: Option<String>,
    grid: &GridArgs,
    out: Option<PathBuf>,
    cfg: &RunConfig,
) -> Result<bool> {
    let alpha = require(pick(alpha, cfg.alpha), "alpha")?;
    let g = require(pick(g, cfg.g), "g")?;
    let theta = match theta {
        Some(t) => t,
        None => match &cfg.theta {
            Some(t) => t.parse().map_err(|_| usage(format!("theta must be a number, got {t:?}")))?,
            None => 0.3,
        },
    };
    let s_seq = pick(s_seq, cfg.s_sequence.clone()).unwrap_or_else(|| vec![0.4, 0.2, 0.1]);
    let which: Which = match pick(which, cfg.which.clone()) {
        Some(w) => w.parse().map_err(|e: odeim_bd::Error| usage(e.to_string()))?,
        None => Which::Plus,
    };
    let fc = field_config(grid, None, cfg);
    let table = conformal_limit_study(
        alpha,
        g,
        C64::new(theta, 0.0),
        &s_seq,
        which,
        &fc,
        &MassiveOptions::default(),
        &ConformalOptions::default(),
    )
    .map_err(|e| match e {
        odeim_bd::Error::InvalidParams(m) => usage(m),
        e => e.into(),
    })?;
    for r in &table.rows {
        println!("s = {:<8} E = {:.6e}  ratio = {:.10} {:+.3e}i", r.s, r.energy.re, r.ratio.re, r.ratio.im);
    }
    println!("drift = {:?}", table.drift);
    if let Some(out) = pick(out, cfg.out.clone()) {
        write_limit_csv(create(&out)?, &table)?;
    }
    let ok = table.strictly_decreasing();
    println!("{}", if ok { "drift strictly decreasing: PASS" } else { "drift strictly decreasing: FAIL" });
    Ok(ok)
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = RunConfig::load(cli.config.as_deref()).map_err(|e| usage(e.to_string()))?;
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(usage("--jobs must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok();
    }
    match cli.command {
        Command::SolveField { model, grid, tol, out, plot } => cmd_solve_field(&model, &grid, tol, out, plot, &cfg).map(|_| true),
        Command::Qscan { source, theta, shifts, tol, out, plot, strict } => {
            cmd_qscan(&source, theta, shifts, tol, out, plot, strict, &cfg).map(|_| true)
        }
        Command::Zeros { source, theta, window, im_max, which, tol, out, q_out, plot } => {
            cmd_zeros(&source, theta, window, im_max, which, tol, out, q_out, plot, &cfg).map(|_| true)
        }
        Command::Check { suite, field, model, q_file } => cmd_check(suite, field, &model, q_file, &cfg),
        Command::ConfLimit { alpha, g, theta, s_seq, which, grid, out } => {
            cmd_conf_limit(alpha, g, theta, s_seq, which, &grid, out, &cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

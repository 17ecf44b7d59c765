use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aggnash::config::RunConfig;
use aggnash::dynamics::{bound_warnings, simulate, sinusoid_harness, RunStatus, Simulation};
use aggnash::game::{compute_bounds, GameSpec};
use aggnash::oracle::{solve_extragradient, KktPoint};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

/// Distributed and centralized solvers for generalized Nash equilibria of
/// aggregative games.
#[derive(Debug, Parser)]
#[command(name = "gne", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the distributed dynamics; writes trajectory.csv and summary.json.
    Simulate(RunArgs),
    /// Solve the KKT system centrally; writes solution.json.
    Solve(RunArgs),
    /// Solve, then simulate against the solution; writes trajectory.csv
    /// (with the Lyapunov column) and compare.json.
    Compare(RunArgs),
    /// Print the sufficient lower bounds on the consensus gains.
    Bounds(RunArgs),
    /// Average tracking of five sinusoids over switching graphs.
    TrackingDemo(TrackingArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Configuration file (TOML).
    #[arg(value_name = "CONFIG", required_unless_present = "config")]
    path: Option<PathBuf>,
    #[arg(long, value_name = "PATH", conflicts_with = "path")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
}

#[derive(Debug, Args)]
struct TrackingArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    horizon: f64,
    #[arg(long, default_value_t = 1e-4)]
    step: f64,
    #[arg(long, default_value_t = 10.0)]
    alpha: f64,
}

struct Loaded {
    cfg: RunConfig,
    game: GameSpec,
    out: PathBuf,
}

impl RunArgs {
    fn load(&self) -> Result<Loaded> {
        let path = self.config.as_ref().or(self.path.as_ref()).expect("clap enforces a config");
        let mut cfg = RunConfig::from_path(path)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(h) = self.horizon {
            cfg.params.horizon = h;
        }
        if let Some(step) = self.step {
            cfg.params.step = step;
        }
        cfg.params = cfg.effective_params();
        cfg.params.validate()?;
        let game = cfg.build_game()?;
        let out = self.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
        Ok(Loaded { cfg, game, out })
    }
}

fn create_file(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_json(dir: &Path, name: &str, value: &impl serde::Serialize) -> Result<()> {
    let mut w = create_file(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_trajectory(dir: &Path, sim: &Simulation) -> Result<()> {
    let mut w = create_file(dir, "trajectory.csv")?;
    sim.log.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

fn status_code(status: RunStatus) -> ExitCode {
    if status.is_success() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn solve(l: &Loaded) -> Result<KktPoint> {
    Ok(solve_extragradient(&l.game, l.cfg.params.gamma, &l.cfg.oracle.options(l.cfg.seed))?)
}

fn run_simulation(l: &Loaded, oracle: Option<&KktPoint>) -> Result<Simulation> {
    let schedule = l.cfg.build_schedule(&l.game)?;
    let x0 = l.cfg.initial_blocks(&l.game)?;
    Ok(simulate(&l.game, &schedule, &l.cfg.params, x0.as_deref(), l.cfg.seed, oracle)?)
}

fn cmd_simulate(args: &RunArgs) -> Result<ExitCode> {
    let l = args.load()?;
    let sim = run_simulation(&l, None)?;
    write_trajectory(&l.out, &sim)?;
    write_json(&l.out, "summary.json", &sim.summary)?;
    let s = &sim.summary;
    println!("game: {}", s.game);
    println!("status: {}", serde_json::to_value(s.status)?.as_str().unwrap_or_default());
    println!("final time: {}", s.final_time);
    println!("final x: {}", fmt_vec(&s.final_x));
    println!("kkt residual: {:.3e}", s.kkt_residual);
    println!("consensus disagreement: {:.3e}", s.consensus_disagreement);
    println!("constraint norm: {:.3e}", s.constraint_norm);
    println!("wrote {}", l.out.display());
    Ok(status_code(s.status))
}

fn cmd_solve(args: &RunArgs) -> Result<ExitCode> {
    let l = args.load()?;
    let point = solve(&l)?;
    write_json(&l.out, "solution.json", &point)?;
    println!("{}", serde_json::to_string_pretty(&point)?);
    Ok(if point.converged { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_compare(args: &RunArgs) -> Result<ExitCode> {
    let l = args.load()?;
    let point = solve(&l)?;
    let sim = run_simulation(&l, Some(&point))?;
    let s = &sim.summary;
    let diff = s
        .final_x
        .iter()
        .zip(point.x_star.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    println!("{:>6} {:>14} {:>14} {:>12}", "coord", "x_sim", "x_oracle", "|diff|");
    for (k, (a, b)) in s.final_x.iter().zip(point.x_star.iter()).enumerate() {
        println!("{k:>6} {a:>14.6} {b:>14.6} {:>12.3e}", (a - b).abs());
    }
    println!("max |x_sim - x_oracle|: {diff:.3e}");
    println!("sim kkt residual: {:.3e}", s.kkt_residual);
    println!("oracle kkt residual: {:.3e}", point.residual);
    if let Some(v) = s.lyapunov {
        println!("final lyapunov: {v:.3e}");
    }

    write_trajectory(&l.out, &sim)?;
    write_json(
        &l.out,
        "compare.json",
        &json!({
            "game": s.game,
            "max_abs_diff": diff,
            "sim_status": s.status,
            "sim_kkt_residual": s.kkt_residual,
            "sim_final_x": s.final_x,
            "sim_final_lambda_bar": s.final_lambda_bar,
            "final_lyapunov": s.lyapunov,
            "oracle": point,
        }),
    )?;
    println!("wrote {}", l.out.display());
    Ok(if s.status.is_success() && point.converged { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_bounds(args: &RunArgs) -> Result<ExitCode> {
    let l = args.load()?;
    let p = &l.cfg.params;
    let b = compute_bounds(&l.game)?;
    println!("game: {}", l.game.name());
    println!("players: {}", b.players);
    println!("f1_bar: {:.6}", b.f1_bar);
    println!("f2_bar: {:.6}", b.f2_bar);
    println!("alpha_min: {:.6}", b.alpha_min());
    println!("beta_min: {:.6} (gamma = {})", b.beta_min(p.gamma), p.gamma);
    println!("alpha = {}: {}", p.alpha, if b.alpha_ok(p.alpha) { "ok" } else { "below bound" });
    println!("beta = {}: {}", p.beta, if b.beta_ok(p.beta, p.gamma) { "ok" } else { "below bound" });
    for w in bound_warnings(&b, p) {
        println!("warning: {w}");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_tracking(args: &TrackingArgs) -> Result<ExitCode> {
    if args.horizon <= 5.0 {
        bail!("horizon must exceed the 5 s settling window");
    }
    let log = sinusoid_harness(args.alpha, args.horizon, args.step, args.seed)?;
    let sup = log.sup_error_after(5.0);
    let slope = log.log_error_slope(0.0, 5.0);
    let mut w = create_file(&args.out, "tracking.csv")?;
    log.write_csv(&mut w)?;
    w.flush()?;
    println!("sup error after t = 5: {sup:.3e}");
    match slope {
        Some(s) => println!("log-error slope on [0, 5]: {s:.4}"),
        None => println!("log-error slope on [0, 5]: undefined"),
    }
    println!("wrote {}", args.out.join("tracking.csv").display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::TrackingDemo(a) => cmd_tracking(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

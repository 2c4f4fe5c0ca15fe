use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use clap::{Args, Parser, Subcommand};
use qudit_link::config::{validate_config, Provenance, ResolvedConfig};
use qudit_link::oracle::ORACLE_MAX_PAIRS;
use qudit_link::sweep::{compute_row, run_sweep, Engine, LinkCache, ResultRow, RunOptions};
use qudit_link::Error;

#[derive(Parser)]
#[command(name = "qudit-link", version, about = "Time-bin qudit entanglement distribution simulator")]
struct Cli {
    #[command(subcommand)]
    command: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Run the configured sweep with the trajectory engine.
    Run(Common),
    /// Run the configured sweep with the exact engine (m <= 3).
    Oracle(Common),
    /// Check a config file and report the resolved values.
    Validate(Common),
    /// Run both engines on every small point and report their agreement.
    Compare(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config file; missing keys take their defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, value_name = "N")]
    trajectories: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Print every resolved value with its provenance.
    #[arg(long)]
    explain: bool,
    /// Record wall time per row (makes output non-reproducible).
    #[arg(long)]
    timing: bool,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NoHeralds { .. } | Error::ZeroProbability | Error::Integration(_) => 2,
        Error::Io(_) => 3,
        _ => 1,
    }
}

fn load(args: &Common) -> Result<ResolvedConfig, Error> {
    let text = match &args.config {
        Some(p) => fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut cfg = validate_config(&text)?;
    if let Some(seed) = args.seed {
        cfg.protocol.seed = seed;
        cfg.sweep.seed = seed;
        cfg.sweep.base.seed = seed;
        cfg.entries.insert("seed".into(), (seed.to_string(), Provenance::User));
    }
    if let Some(n) = args.trajectories {
        if n == 0 {
            return Err(Error::config("--trajectories", "must be >= 1"));
        }
        cfg.protocol.n_trajectories = n;
        cfg.sweep.trajectories = n;
        cfg.sweep.base.n_trajectories = n;
        cfg.entries.insert("n_trajectories".into(), (n.to_string(), Provenance::User));
    }
    Ok(cfg)
}

fn revision() -> String {
    Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

fn summarize(rows: &[ResultRow], path: &Path) {
    println!("{:>2} {:>7} {:<15} {:>12} {:>12} {:>9} {:>9}", "m", "L_km", "strategy", "p_success", "attempts", "fidelity", "stderr");
    for r in rows {
        println!(
            "{:>2} {:>7} {:<15} {:>12.5e} {:>12.4} {:>9.5} {:>9.2e}",
            r.m,
            r.l_km,
            r.strategy.as_str(),
            r.success_probability,
            r.average_attempts,
            r.average_fidelity,
            r.fidelity_stderr
        );
    }
    println!("wrote {} rows to {}", rows.len(), path.display());
}

fn sweep(args: &Common, cfg: &mut ResolvedConfig, engine: Engine) -> Result<(), Error> {
    cfg.sweep.engine = engine;
    let opts = RunOptions { timing: args.timing, revision: revision(), stem: engine.as_str().to_string() };
    let rows = run_sweep(&cfg.sweep, &args.out, &opts)?;
    summarize(&rows, &qudit_link::sweep::csv_path(&args.out, &opts));
    Ok(())
}

const COMPARE_HEADER: [&str; 11] = [
    "m",
    "L_km",
    "strategy",
    "trajectory_success",
    "oracle_success",
    "success_rel_diff",
    "trajectory_fidelity",
    "oracle_fidelity",
    "fidelity_stderr",
    "fidelity_z",
    "n_trajectories",
];

fn compare(args: &Common, cfg: &ResolvedConfig) -> Result<(), Error> {
    let mut traj = cfg.sweep.clone();
    traj.engine = Engine::Trajectory;
    let mut exact = cfg.sweep.clone();
    exact.engine = Engine::Oracle;
    let points: Vec<_> = traj.points().into_iter().filter(|p| p.m <= ORACLE_MAX_PAIRS).collect();
    if points.is_empty() {
        return Err(Error::EngineLimit(format!("no sweep point with m <= {ORACLE_MAX_PAIRS}")));
    }
    fs::create_dir_all(&args.out).map_err(|e| Error::Io(format!("{}: {e}", args.out.display())))?;
    let path = args.out.join("compare.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(COMPARE_HEADER)?;
    let mut cache = LinkCache::default();
    let mut worst: f64 = 0.0;
    println!("{:>2} {:>7} {:<15} {:>12} {:>12} {:>9} {:>9} {:>7}", "m", "L_km", "strategy", "p_traj", "p_exact", "F_traj", "F_exact", "z");
    for pt in points {
        let t = compute_row(&traj, &pt, &mut cache, false)?;
        let o = compute_row(&exact, &pt, &mut cache, false)?;
        let rel = (t.success_probability - o.success_probability) / o.success_probability;
        let z = if t.fidelity_stderr > 0.0 { (t.average_fidelity - o.average_fidelity) / t.fidelity_stderr } else { 0.0 };
        worst = worst.max(z.abs());
        println!(
            "{:>2} {:>7} {:<15} {:>12.5e} {:>12.5e} {:>9.5} {:>9.5} {:>7.2}",
            pt.m,
            pt.distance_km,
            pt.strategy.as_str(),
            t.success_probability,
            o.success_probability,
            t.average_fidelity,
            o.average_fidelity,
            z
        );
        w.write_record([
            pt.m.to_string(),
            pt.distance_km.to_string(),
            pt.strategy.as_str().to_string(),
            t.success_probability.to_string(),
            o.success_probability.to_string(),
            rel.to_string(),
            t.average_fidelity.to_string(),
            o.average_fidelity.to_string(),
            t.fidelity_stderr.to_string(),
            z.to_string(),
            t.n_trajectories.to_string(),
        ])?;
    }
    w.flush()?;
    println!("max |z| = {worst:.2}; wrote {}", path.display());
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Error> {
    let (args, verb) = match &cli.command {
        Verb::Run(a) => (a, "run"),
        Verb::Oracle(a) => (a, "oracle"),
        Verb::Validate(a) => (a, "validate"),
        Verb::Compare(a) => (a, "compare"),
    };
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::config("--threads", e.to_string()))?;
    }
    let mut cfg = load(args)?;
    if args.explain {
        print!("{}", cfg.explain());
    }
    match verb {
        "run" => sweep(args, &mut cfg, Engine::Trajectory),
        "oracle" => sweep(args, &mut cfg, Engine::Oracle),
        "compare" => compare(args, &cfg),
        _ => {
            println!("config ok: {} sweep points", cfg.sweep.points().len());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mlsatnet::constellation::presets;
use mlsatnet_cli::config::{parse_k_range, Scenario};
use mlsatnet_cli::run::{compare, render_table, run_scenario};
use mlsatnet_cli::CliError;

#[derive(Parser)]
#[command(
    name = "mlsatnet-cli",
    version,
    about = "Runs multi-layer satellite network scenarios: link deployment, \
             maintenance scheduling, metric sweeps and algorithm comparisons."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario at a single deployment size (or the size range
    /// the config names).
    Run(RunArgs),
    /// Sweep a scenario over a deployment size range.
    Sweep(RunArgs),
    /// Run several algorithms on one scenario and tabulate them.
    Compare(CompareArgs),
    /// List the built-in constellation presets.
    Presets,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario TOML file.
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (falls back to out_dir in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the deployment algorithm.
    #[arg(long)]
    algorithm: Option<String>,
    /// Override with a single deployment size.
    #[arg(long)]
    k: Option<usize>,
    /// Override with a size range, "LO..HI" or "LO..HI:STEP".
    #[arg(long, value_name = "RANGE")]
    k_range: Option<String>,
    /// Override the number of time slots.
    #[arg(long)]
    slots: Option<usize>,
}

#[derive(Args)]
struct CompareArgs {
    /// Scenario TOML file.
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the comparison table and manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Algorithm to include; repeatable.
    #[arg(long = "algorithm", value_name = "NAME")]
    algorithms: Vec<String>,
    /// Override with a single deployment size.
    #[arg(long)]
    k: Option<usize>,
    /// Override with a size range, "LO..HI" or "LO..HI:STEP".
    #[arg(long, value_name = "RANGE")]
    k_range: Option<String>,
    /// Override the number of time slots.
    #[arg(long)]
    slots: Option<usize>,
}

fn init_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("MLSATNET_THREADS") {
        let n: usize = v.parse().map_err(|_| CliError::Config {
            field: "MLSATNET_THREADS".into(),
            msg: format!("expected a positive thread count, got {v:?}"),
        })?;
        if n == 0 {
            return Err(CliError::Config {
                field: "MLSATNET_THREADS".into(),
                msg: "expected a positive thread count, got 0".into(),
            });
        }
        // A second build_global in the same process is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn load(args: &RunArgs) -> Result<(Scenario, String, PathBuf), CliError> {
    let (mut scenario, raw) = Scenario::from_path(&args.config)?;
    let k_range = args.k_range.as_deref().map(parse_k_range).transpose()?;
    scenario.apply_overrides(
        args.seed,
        args.out.as_ref(),
        args.algorithm.as_deref(),
        args.k,
        k_range,
        args.slots,
    );
    let config_dir = args
        .config
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();
    Ok((scenario, raw, config_dir))
}

fn out_dir_of(args: &RunArgs, scenario: &Scenario) -> Result<PathBuf, CliError> {
    args.out
        .clone()
        .or_else(|| scenario.out_dir.as_ref().map(PathBuf::from))
        .ok_or_else(|| CliError::Config {
            field: "out_dir".into(),
            msg: "set out_dir in the scenario or pass --out".into(),
        })
}

fn run_cmd(args: &RunArgs, command: &str) -> Result<(), CliError> {
    let (scenario, raw, config_dir) = load(args)?;
    if command == "sweep" && scenario.optimizer.k_range.is_none() {
        return Err(CliError::Config {
            field: "optimizer.k_range".into(),
            msg: "sweep needs a size range; set k_range or pass --k-range".into(),
        });
    }
    let out_dir = out_dir_of(args, &scenario)?;
    let output = run_scenario(&scenario, &config_dir, &raw, &out_dir, command)?;
    let s = &output.summary;
    println!(
        "{} over {} ({} slots, snapshot at {})",
        s.algorithm,
        s.layers.join(" / "),
        s.n_slots,
        s.snapshot_slot
    );
    for kr in &s.results {
        println!(
            "  k={:<4} apl={:.4} coverage={:.3} gain={:+.2}% handovers={}",
            kr.k,
            kr.stack.apl,
            kr.stack.coverage,
            kr.stack.gain * 100.0,
            kr.stack.handovers
        );
    }
    if let Some(fit) = &s.log_fit {
        println!(
            "  fit: apl = {:.4} + {:.4} ln k  (r2 = {:.4})",
            fit.a, fit.b, fit.r2
        );
    }
    if let Some(t) = &s.traffic {
        println!(
            "  traffic (k={}): mean hops {:.3} vs baseline {:.3}; below baseline on {:.1}% of slots",
            t.k, t.mean_hops_avg, t.baseline_mean_hops_avg, t.slots_below_baseline_pct
        );
    }
    if let Some(note) = &s.truncated {
        println!("  note: {note}");
    }
    println!("wrote {} files to {}", output.files.len(), out_dir.display());
    Ok(())
}

fn compare_cmd(args: &CompareArgs) -> Result<(), CliError> {
    let run_args = RunArgs {
        config: args.config.clone(),
        seed: args.seed,
        out: args.out.clone(),
        algorithm: None,
        k: args.k,
        k_range: args.k_range.clone(),
        slots: args.slots,
    };
    let (scenario, raw, config_dir) = load(&run_args)?;
    let algorithms: Vec<String> = if args.algorithms.is_empty() {
        ["tpilcd", "greedy", "random"]
            .into_iter()
            .map(String::from)
            .collect()
    } else {
        args.algorithms.clone()
    };
    let out_dir = match (&args.out, &scenario.out_dir) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(p)) => Some(PathBuf::from(p)),
        (None, None) => None,
    };
    let (rows, files) = compare(&scenario, &config_dir, &algorithms, out_dir.as_deref(), &raw)?;
    print!("{}", render_table(&rows));
    if let Some(dir) = out_dir {
        println!("wrote {} files to {}", files.len(), dir.display());
    }
    Ok(())
}

fn presets_cmd() {
    println!(
        "{:<12} {:>6} {:>10} {:>7} {:>12} {:>12}",
        "name", "sats", "planes", "phase", "altitude_km", "incl_deg"
    );
    for p in presets() {
        println!(
            "{:<12} {:>6} {:>10} {:>7} {:>12.1} {:>12.2}",
            p.name, p.n_sats, p.planes, p.phase_factor, p.altitude_km, p.inclination_deg
        );
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match &cli.cmd {
        Cmd::Run(args) => run_cmd(args, "run"),
        Cmd::Sweep(args) => run_cmd(args, "sweep"),
        Cmd::Compare(args) => compare_cmd(args),
        Cmd::Presets => {
            presets_cmd();
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

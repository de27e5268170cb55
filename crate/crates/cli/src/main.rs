//! Command-line driver: loads a campaign config, runs seeded campaigns, and
//! writes reports and plot-ready data files.
//!
//! Exit codes: 0 ok, 1 usage/config error, 2 degenerate simulation outcome,
//! 3 acceptance-check failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use r3puf::campaign::{gate_checks, run_campaign, CampaignConfig};
use r3puf::cell::{run_cycle, CellState};
use r3puf::metrics::median_split_baseline;
use r3puf::population::build_cell;
use r3puf::report;
use r3puf::rng::substream;

const EXIT_USAGE: u8 = 1;
const EXIT_DEGENERATE: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "r3puf",
    about = "Monte-Carlo simulator and evaluation toolkit for a reconfigurable memristive-cell PUF",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a full campaign and write report and data files.
    Run(RunArgs),
    /// Simulate a single cell and export its cycle trace as CSV.
    Trace(TraceArgs),
    /// Median-split enrollment baseline over a sampled LRS population.
    Baseline(BaselineArgs),
    /// Run a campaign and gate it on the pinned quality thresholds.
    Check(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Campaign config file (TOML); built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report.json, responses.csv, vout_hist.csv, traces.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Gate the run on the pinned quality thresholds (exit 3 on failure).
    #[arg(long)]
    check: bool,
    /// Record a full trace for a cell, as chip:cell. Repeatable.
    #[arg(long = "trace", value_name = "CHIP:CELL")]
    trace: Vec<String>,
}

#[derive(Args, Debug)]
struct TraceArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the trace CSV.
    #[arg(long)]
    out: PathBuf,
    /// Cell to simulate, as chip:cell.
    #[arg(value_name = "CHIP:CELL")]
    cell: String,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of devices to sample; defaults to cells_per_chip.
    #[arg(long)]
    samples: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version requests are not errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args, false),
        Command::Check(args) => cmd_run(args, true),
        Command::Trace(args) => cmd_trace(args),
        Command::Baseline(args) => cmd_baseline(args),
    };

    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .downcast_ref::<r3puf::Error>()
                .map(|err| {
                    if err.is_degenerate_outcome() {
                        EXIT_DEGENERATE
                    } else {
                        EXIT_USAGE
                    }
                })
                .unwrap_or(EXIT_USAGE);
            ExitCode::from(code)
        }
    }
}

fn load_config(path: &Option<PathBuf>, seed: Option<u64>) -> anyhow::Result<CampaignConfig> {
    let mut config = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| anyhow::anyhow!("reading {}: {e}", p.display()))?;
            CampaignConfig::from_toml_str(&text)?
        }
        None => CampaignConfig::default(),
    };
    if let Some(seed) = seed {
        config.master_seed = seed;
    }
    Ok(config)
}

fn parse_cell_coord(text: &str) -> anyhow::Result<(u32, u32)> {
    let (chip, cell) = text
        .split_once(':')
        .ok_or_else(|| anyhow::anyhow!("expected CHIP:CELL, got {text:?}"))?;
    Ok((chip.trim().parse()?, cell.trim().parse()?))
}

fn install_pool(jobs: Option<usize>) -> anyhow::Result<()> {
    if let Some(n) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| anyhow::anyhow!("thread pool: {e}"))?;
    }
    Ok(())
}

fn cmd_run(args: RunArgs, gate: bool) -> anyhow::Result<ExitCode> {
    install_pool(args.jobs)?;
    let mut config = load_config(&args.config, args.seed)?;
    if let Some(out) = &args.out {
        config.output_dir = Some(out.clone());
    }
    for spec in &args.trace {
        config.trace_cells.push(parse_cell_coord(spec)?);
    }

    eprintln!(
        "running campaign: {} chip(s) x {} cell(s), {} epoch(s) x {} repetition(s), seed {}",
        config.chips,
        config.cells_per_chip,
        config.reconfig_epochs,
        config.readout_repetitions,
        config.master_seed
    );
    let result = run_campaign(&config)?;
    eprintln!(
        "done in {:.2} s (uniformity {:.4}, oracle agreement {:.5})",
        result.stats.elapsed_s, result.report.uniformity, result.stats.oracle_agreement
    );
    if let Some(dir) = &config.output_dir {
        eprintln!("outputs written to {}", dir.display());
    } else {
        println!("{}", report::report_json(&result, &config));
    }

    if gate || args.check {
        let checks = gate_checks(&result, &config);
        let mut all_passed = true;
        for c in &checks {
            println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            all_passed &= c.passed;
        }
        if !all_passed {
            return Ok(ExitCode::from(EXIT_CHECK_FAILED));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_trace(args: TraceArgs) -> anyhow::Result<ExitCode> {
    let mut config = load_config(&args.config, args.seed)?;
    let (chip, cell) = parse_cell_coord(&args.cell)?;
    config.trace_cells = vec![(chip, cell)];
    config.validate()?;

    // the substream scheme lets one cell be rebuilt without touching the rest
    let (cell_config, _) = build_cell(
        config.master_seed,
        chip,
        cell,
        &config.variation,
        &config.cell,
    )?;
    let mut cycle_rng = r3puf::rng::cell_stream(
        config.master_seed,
        chip,
        cell,
        r3puf::rng::StreamLane::Cycle,
    );
    let state = CellState::fresh(&cell_config);
    let out = run_cycle(
        &state,
        &cell_config,
        config.cell.integrator,
        &mut cycle_rng,
        true,
    )
    .map_err(|e| e.at_cell(chip, cell))?;

    std::fs::create_dir_all(&args.out)?;
    let path = args.out.join(format!("trace_{chip}_{cell}.csv"));
    report::write_trace_csv(&out.trace, &config.config_hash(), config.master_seed, &path)?;
    eprintln!(
        "cell {chip}:{cell}: bit {} (v_out {:.6} V), switched {}, trace -> {}",
        out.readout.bit,
        out.readout.v_out,
        out.switched,
        path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_baseline(args: BaselineArgs) -> anyhow::Result<ExitCode> {
    let config = load_config(&args.config, args.seed)?;
    config.variation.validate()?;
    let n = args.samples.unwrap_or(config.cells_per_chip as usize);
    let mut rng = substream(config.master_seed, &[0xBA5E_114E]);
    let draws: Vec<f64> = (0..n)
        .map(|_| config.variation.r_on.sample(&mut rng))
        .collect();
    let baseline = median_split_baseline(&draws)?;

    let ones = baseline.ones();
    let zeros = baseline.zeros();
    let doc = serde_json::json!({
        "samples": n,
        "median": baseline.median,
        "ones": ones,
        "zeros": zeros,
        "uniformity": ones as f64 / n as f64,
        "extra_ops": {
            "digitize": baseline.digitize_ops,
            "write_back": baseline.write_back_ops,
            "total": baseline.digitize_ops + baseline.write_back_ops,
        },
        "r3puf_extra_ops": 0,
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(ExitCode::SUCCESS)
}

use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use turbocc::fec::{compare, write_comparison, FecModel, OutcomeTrace};
use turbocc::harness::{self, ScenarioConfig, ScenarioReport};
use turbocc::units::{as_ms, MICROS_PER_SEC};
use turbocc::{Error, Micros, TurboPolicy};

/// Turbo-frequency covert channel laboratory.
#[derive(Parser)]
#[command(name = "turbocc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Args)]
struct Opts {
    /// Run only this seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for CSV and trace output.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Override the scenario's turbo policy.
    #[arg(long, global = true)]
    policy: Option<String>,
    /// Exit with status 3 if any transfer fails.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario at its bit time.
    Run { config: PathBuf },
    /// Run a scenario over its sweep range.
    Sweep { config: PathBuf },
    /// Histogram of involuntary frequency changes under the scenario's noise.
    NoiseHistogram { config: PathBuf },
    /// Compare retransmission and Reed-Solomon goodput on an outcome trace.
    FecAnalyze { trace: PathBuf },
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_TRANSFER: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(all_ok) if cli.opts.strict && !all_ok => {
            eprintln!("error: at least one transfer failed");
            ExitCode::from(EXIT_TRANSFER)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config_error = e.chain().any(|c| {
                matches!(
                    c.downcast_ref::<Error>(),
                    Some(
                        Error::Config(_)
                            | Error::InvalidPolicy(_)
                            | Error::InvalidModem(_)
                            | Error::InvalidNoise(_)
                            | Error::InvalidLink(_)
                            | Error::PayloadLength(_)
                            | Error::IdenticalLevels(_)
                    )
                )
            });
            ExitCode::from(if config_error { EXIT_CONFIG } else { EXIT_FAILURE })
        }
    }
}

fn load(path: &Path, opts: &Opts) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(seed) = opts.seed {
        cfg.scenario.seeds = vec![seed];
    }
    if let Some(name) = &opts.policy {
        cfg.scenario.policy = TurboPolicy::builtin(name).ok_or_else(|| {
            Error::Config(format!(
                "unknown policy {name:?} (built-in: {})",
                TurboPolicy::BUILTIN_NAMES.join(", ")
            ))
        })?;
    }
    Ok(cfg)
}

fn create(opts: &Opts, file: &str) -> Result<(PathBuf, File)> {
    fs::create_dir_all(&opts.out).with_context(|| format!("creating {}", opts.out.display()))?;
    let path = opts.out.join(file);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok((path, f))
}

/// Returns whether every transfer succeeded.
fn dispatch(cli: &Cli) -> Result<bool> {
    let opts = &cli.opts;
    match &cli.command {
        Command::Run { config } => {
            let mut cfg = load(config, opts)?;
            cfg.scenario.bit_times = cfg.run_bit_times()?;
            scenario(cfg, opts, "")
        }
        Command::Sweep { config } => {
            let mut cfg = load(config, opts)?;
            cfg.scenario.bit_times = cfg.sweep_bit_times()?;
            scenario(cfg, opts, "-sweep")
        }
        Command::NoiseHistogram { config } => {
            let cfg = load(config, opts)?;
            let h = harness::noise_histogram(&cfg.scenario, MICROS_PER_SEC)?;
            let (path, f) = create(opts, &format!("{}-noise.csv", cfg.scenario.name))?;
            harness::emit_histogram_csv(&cfg.scenario.name, &h, f)?;
            println!("{} seeds, events per second by dip length:", h.seeds);
            for (ms, rate) in &h.per_second {
                println!("  {ms:>4} ms  {rate:8.2}");
            }
            println!("  total    {:8.2}", h.total_per_second());
            println!("wrote {}", path.display());
            Ok(true)
        }
        Command::FecAnalyze { trace } => {
            let f = File::open(trace).with_context(|| format!("opening {}", trace.display()))?;
            let t = OutcomeTrace::read(BufReader::new(f))?;
            let rows = compare(&t, &FecModel::default())?;
            let stem = trace.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
            let (path, f) = create(opts, &format!("{stem}-fec.csv"))?;
            write_comparison(&rows, f)?;
            write_comparison(&rows, io::stdout().lock())?;
            println!("wrote {}", path.display());
            Ok(true)
        }
    }
}

fn scenario(cfg: ScenarioConfig, opts: &Opts, suffix: &str) -> Result<bool> {
    let s = cfg.scenario;
    let report = harness::run_scenario(&s)?;
    let (path, f) = create(opts, &format!("{}{suffix}.csv", s.name))?;
    harness::emit_csv(&report, f)?;
    print_summary(&report, &mut io::stdout().lock())?;
    println!("wrote {}", path.display());
    if let Some(trace) = report.outcome_trace() {
        let (path, f) = create(opts, &format!("{}-outcomes.tsv", s.name))?;
        trace.write(f)?;
        println!("wrote {}", path.display());
    }
    Ok(report.runs.iter().all(|r| r.success))
}

fn print_summary(report: &ScenarioReport, out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "{}: bit_time_ms  goodput_bps(mean/min/max)  retx/packet  success", report.scenario)?;
    for a in &report.aggregates {
        writeln!(
            out,
            "  {:>8}  {:>8.2} {:>8.2} {:>8.2}  {:>6.2}  {:>5.0}%",
            fmt_ms(a.bit_time),
            a.mean_goodput,
            a.min_goodput,
            a.max_goodput,
            a.mean_retransmissions,
            100.0 * a.success_rate
        )?;
    }
    Ok(())
}

fn fmt_ms(t: Micros) -> String {
    format!("{}", as_ms(t))
}

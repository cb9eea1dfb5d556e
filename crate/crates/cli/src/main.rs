use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stdlm_cli::config::{ConfigError, RunConfig};
use stdlm_cli::diagnostics::diagnostics_of;
use stdlm_cli::fixture::{simulate_fixture, write_fixture, FixtureSpec};
use stdlm_cli::ingest::ingest;
use stdlm_cli::study::{run_study, Outputs, StudyError};
use stdlm_cli::tables::{analytic_grid, write_grid, SweepParam};
use stdlm_core::analytic::PolyDlmParams;
use stdlm_core::gibbs::DrawRecord;
use stdlm_core::model::Phase;

#[derive(Parser)]
#[command(
    name = "stdlm",
    version,
    about = "Spatio-temporal DLM for hourly pollutant fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `model.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the study kind: single, weekly, full-span, fixed-lambda, tau-scaled.
    #[arg(long)]
    mode: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the station and observation files and summarise the panel.
    IngestCheck {
        #[arg(long, required_unless_present_all = ["stations", "observations"])]
        config: Option<PathBuf>,
        #[arg(long, requires = "observations")]
        stations: Option<PathBuf>,
        #[arg(long, requires = "stations")]
        observations: Option<PathBuf>,
    },
    /// Run the configured study and write the full bundle.
    Run(RunArgs),
    /// Run the configured study, writing only predictive and coverage files.
    Interpolate(RunArgs),
    /// Closed-form predictive variances of the two-site polynomial DLM over a grid.
    Analytic {
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long, default_value_t = 11)]
        points: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma_beta2: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma_delta2: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma_eps2: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 1.0)]
        d01: f64,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute ACF/PACF and quantiles from a `draws.jsonl` file.
    Diagnostics {
        draws: PathBuf,
        #[arg(long, default_value_t = 40)]
        max_lag: usize,
    },
    /// Write simulated `stations.csv` and `observations.csv`.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        sites: usize,
        #[arg(long, default_value_t = 336)]
        hours: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Probability that an entry is missing.
        #[arg(long, default_value_t = 0.05)]
        missing: f64,
        #[arg(long, default_value_t = 50.0)]
        extent: f64,
        #[arg(long, default_value_t = 0.05)]
        sigma2: f64,
        #[arg(long, default_value_t = 20.0)]
        lambda: f64,
        #[arg(long, default_value_t = 2.5)]
        a1: f64,
        #[arg(long, default_value_t = 9.8)]
        a2: f64,
    },
}

fn load(args: &RunArgs) -> Result<RunConfig, StudyError> {
    let mut cfg = RunConfig::load(&args.config)?;
    cfg.apply_overrides(args.seed, args.out.clone(), args.mode.as_deref())?;
    Ok(cfg)
}

fn run(args: &RunArgs, outputs: Outputs) -> Result<(), StudyError> {
    let cfg = load(args)?;
    let report = run_study(&cfg, outputs)?;
    for r in &report.manifest.runs {
        println!(
            "block {} chain {}: {} draws, acceptance {:.3}",
            r.block, r.chain, r.retained, r.acceptance_rate
        );
    }
    for c in &report.coverage {
        println!(
            "{} block {} level {}: {}/{} covered ({:.3})",
            c.site, c.block, c.level, c.covered, c.evaluated, c.coverage
        );
    }
    println!("wrote {}", cfg.output_dir.display());
    Ok(())
}

fn ingest_check(stations: &Path, observations: &Path) -> Result<(), StudyError> {
    let data = ingest(stations, observations)?;
    let p = &data.panel;
    let t = p.t_index();
    println!(
        "stations: {} ({})",
        data.stations.len(),
        data.stations.metric().name()
    );
    println!("hours: {} ({}..={})", p.n_times(), t[0], t[t.len() - 1]);
    println!("unit: {}", data.unit.tag());
    let total = p.n_sites() * p.n_times();
    println!(
        "missing: {} of {} ({:.2}%)",
        p.n_missing(),
        total,
        100.0 * p.n_missing() as f64 / total as f64
    );
    println!("fully missing hours: {}", p.fully_missing_columns().len());
    Ok(())
}

fn read_draws(path: &Path) -> Result<Vec<DrawRecord>, StudyError> {
    let f = std::io::BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (k, line) in f.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(&line)
            .map_err(|e| ConfigError::Parse(format!("{}:{}: {e}", path.display(), k + 1)))?;
        out.push(r);
    }
    Ok(out)
}

fn dispatch(cli: Cli) -> Result<(), StudyError> {
    match cli.command {
        Command::IngestCheck {
            config,
            stations,
            observations,
        } => match (config, stations, observations) {
            (_, Some(s), Some(o)) => ingest_check(&s, &o),
            (Some(c), _, _) => {
                let cfg = RunConfig::load(&c)?;
                ingest_check(&cfg.stations, &cfg.observations)
            }
            _ => unreachable!("clap enforces the argument groups"),
        },
        Command::Run(args) => run(&args, Outputs::ALL),
        Command::Interpolate(args) => run(&args, Outputs::PREDICTION),
        Command::Analytic {
            param,
            from,
            to,
            points,
            sigma_beta2,
            sigma_delta2,
            sigma_eps2,
            lambda,
            d01,
            out,
        } => {
            let base = PolyDlmParams::new(sigma_beta2, sigma_delta2, sigma_eps2, lambda, d01)?;
            let rows = analytic_grid(&base, param, from, to, points)?;
            match out {
                Some(path) => write_grid(fs::File::create(path)?, &rows)?,
                None => write_grid(std::io::stdout().lock(), &rows)?,
            }
            Ok(())
        }
        Command::Diagnostics { draws, max_lag } => {
            let records = read_draws(&draws)?;
            let rate =
                records.iter().filter(|r| r.accepted).count() as f64 / records.len().max(1) as f64;
            let d = diagnostics_of(&records, rate, max_lag)?;
            let text = serde_json::to_string_pretty(&d).expect("diagnostics serialize");
            writeln!(std::io::stdout().lock(), "{text}")?;
            Ok(())
        }
        Command::Simulate {
            out,
            sites,
            hours,
            seed,
            missing,
            extent,
            sigma2,
            lambda,
            a1,
            a2,
        } => {
            if !(0.0..1.0).contains(&missing) {
                return Err(ConfigError::Invalid(format!(
                    "missing fraction {missing} not in [0, 1)"
                ))
                .into());
            }
            let spec = FixtureSpec {
                sites,
                hours,
                extent,
                missing,
                seed,
                sigma2,
                lambda,
                phase: Phase::new(a1, a2),
                ..FixtureSpec::default()
            };
            let (stations, panel) = simulate_fixture(&spec)?;
            write_fixture(&out, &stations, &panel)?;
            println!(
                "wrote {} sites x {} hours to {}",
                sites,
                hours,
                out.display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        // reader went away, e.g. piped into `head`
        Err(StudyError::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

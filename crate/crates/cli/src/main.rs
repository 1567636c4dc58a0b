use anyhow::{bail, Result};
use clap::Parser;
use listfb_cli::config::{Mode, RunConfig};
use listfb_cli::{plan, runner, selftest, sweep};
use std::path::PathBuf;
use std::process::ExitCode;

/// Monte Carlo driver for the list-decoding feedback schemes.
#[derive(Parser, Debug)]
#[command(name = "listfb", version)]
struct Args {
    /// JSON run configuration (see docs/config.schema.json).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the mode in the configuration.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    trials: Option<u64>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Selftest only: run just these criteria.
    #[arg(long, value_delimiter = ',')]
    only: Vec<u32>,
}

fn selftest(only: &[u32], out: Option<&PathBuf>) -> Result<bool> {
    let ids: Vec<u32> = if only.is_empty() { selftest::ALL.to_vec() } else { only.to_vec() };
    let mut all = Vec::new();
    for id in ids {
        let r = selftest::run(id)?;
        println!("{}", r.line());
        all.push(r);
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("selftest.json"), serde_json::to_string_pretty(&all)?)?;
    }
    Ok(all.iter().all(|r| r.pass))
}

fn run(args: Args) -> Result<bool> {
    let mode = match (&args.config, args.mode) {
        (_, Some(m)) => Some(m),
        (None, None) => bail!("either --config or --mode component-selftest is required"),
        _ => None,
    };
    if mode == Some(Mode::ComponentSelftest) {
        return selftest(&args.only, args.out.as_ref());
    }
    let Some(path) = &args.config else { bail!("mode {mode:?} needs --config") };
    let mut cfg = RunConfig::load(path)?;
    cfg.mode = mode.unwrap_or(cfg.mode);
    cfg.trials = args.trials.unwrap_or(cfg.trials);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.out = args.out.or(cfg.out);
    cfg.validate()?;
    log::info!("mode {:?}, {} trials, seed {}", cfg.mode, cfg.trials, cfg.seed);
    match cfg.mode {
        Mode::ComponentSelftest => selftest(&args.only, cfg.out.as_ref()),
        Mode::Plan => {
            let t = plan::cli_plan(&cfg.params)?;
            let json = serde_json::to_string_pretty(&t)?;
            match &cfg.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    std::fs::write(dir.join("plan.json"), &json)?;
                    std::fs::write(dir.join("trajectory.csv"), plan::trajectory_csv(&t)?)?;
                }
                None => println!("{json}"),
            }
            Ok(true)
        }
        Mode::RunFullFb | Mode::RunPartialFb => {
            let r = runner::cli_run(&cfg)?;
            let a = &r.aggregates;
            eprintln!(
                "{} trials, {} failures (rate {:.4}, 95% Wilson {:.4}..{:.4}), mean list {:.2}, {} ms",
                a.trials, a.failures, a.failure_rate, a.wilson_lo, a.wilson_hi, a.mean_list_size, r.runtime_ms
            );
            match &cfg.out {
                Some(dir) => r.write(dir)?,
                None => print!("{}", r.rows_csv()?),
            }
            Ok(true)
        }
        Mode::Sweep => {
            let s = sweep::cli_sweep(&cfg)?;
            match &cfg.out {
                Some(dir) => s.write(dir)?,
                None => print!("{}", s.summary_csv()?),
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

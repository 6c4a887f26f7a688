//! `thor` — command-line front end for the TMUL timing-channel simulator.
//!
//! Every subcommand is a pure function of (config, seed): given the same
//! inputs it produces byte-identical output. Exit codes: 0 success,
//! 2 configuration/usage-value errors, 3 calibration failures, 64 bad
//! command-line syntax.

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use thor_sim::harness::{
    self, countermeasure_eval, derive_seed, leakage_comparison, run_trial, success_sweep,
    thor_leakage_bph, MINUTE_NS,
};
use thor_sim::tile::TilePattern;
use thor_sim::{report, FullConfig, ThorError, TimingModel};

#[derive(Parser)]
#[command(
    name = "thor",
    about = "Simulates the TMUL sparsity timing channel: victim, attack, countermeasure",
    version
)]
struct Cli {
    /// Key=value config file layered over the built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run seed; overrides THOR_SIM_SEED and the config's base seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Tsv,
}

#[derive(Subcommand)]
enum Command {
    /// Anchor timing distributions and cold-start frequency ramps.
    TimingDemo {
        /// Noisy repetitions per anchor.
        #[arg(long, default_value_t = 200)]
        repeats: u64,
    },
    /// Bisect the noise sigma that hits the configured target success rate.
    Calibrate,
    /// Attack success rate across simulated time budgets.
    Sweep,
    /// One end-to-end attack against an unprotected victim.
    Attack {
        /// Simulated budget in minutes (default: attack.time_budget_min).
        #[arg(long)]
        duration_min: Option<f64>,
        /// Secret mask as 16 hex digits (default: derived from the seed).
        #[arg(long)]
        mask: Option<String>,
    },
    /// Countermeasure evaluation: protected attack plus power overhead.
    Defend,
    /// Leakage-rate table against published attacks.
    Compare,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("thor: {e}");
            match e {
                ThorError::Calibration(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), ThorError> {
    let mut cfg = match &cli.config {
        Some(path) => FullConfig::load(path)?,
        None => FullConfig::default(),
    };
    let env_seed = std::env::var("THOR_SIM_SEED")
        .ok()
        .map(|v| {
            v.parse::<u64>()
                .map_err(|_| ThorError::Config(format!("THOR_SIM_SEED must be a u64, got '{v}'")))
        })
        .transpose()?;
    if let Some(seed) = cli.seed.or(env_seed) {
        cfg.sweep.base_seed = seed;
        cfg.defend.base_seed = seed;
        cfg.calibrate.base_seed = seed;
    }
    let sep = match cli.format {
        Format::Csv => ',',
        Format::Tsv => '\t',
    };
    let model = TimingModel::new(cfg.timing.clone())?;
    let hash = cfg.hash();

    let output = match cli.command {
        Command::TimingDemo { repeats } => {
            let demo = harness::timing_demo(&model, repeats, cfg.sweep.base_seed)?;
            report::timing_demo_csv(&demo, sep)
        }
        Command::Calibrate => {
            let sigma =
                harness::calibrate_noise(&cfg.timing, &cfg.victim, &cfg.attack, &cfg.calibrate)?;
            let c = &cfg.calibrate;
            format!(
                "noise_sigma{sep}target_duration_min{sep}target_success_rate\n\
                 {sigma:.6}{sep}{:.6}{sep}{:.6}\n",
                c.target_duration_min, c.target_success_rate
            )
        }
        Command::Sweep => {
            let rep = success_sweep(&model, &cfg.victim, &cfg.attack, &cfg.sweep, &hash)?;
            report::sweep_csv(&rep, sep)
        }
        Command::Attack { duration_min, mask } => {
            let mut params = cfg.attack.clone();
            if let Some(min) = duration_min {
                if !(min > 0.0) {
                    return Err(ThorError::Config("--duration-min must be positive".into()));
                }
                params.time_budget_ns = Some(min * MINUTE_NS);
            }
            let mask = mask
                .map(|m| {
                    u64::from_str_radix(&m, 16)
                        .map(TilePattern::from_bits)
                        .map_err(|_| {
                            ThorError::Config(format!("--mask must be up to 16 hex digits, got '{m}'"))
                        })
                })
                .transpose()?;
            let trial = run_trial(&model, &cfg.victim, &params, mask, cfg.sweep.base_seed)?;
            report::attack_csv(&trial, sep)
        }
        Command::Defend => {
            let rep = countermeasure_eval(
                &model,
                &cfg.victim,
                &cfg.attack,
                &cfg.keeper,
                &cfg.power,
                &cfg.defend,
            )?;
            report::defend_csv(&rep, sep)
        }
        Command::Compare => {
            // Measure the headline operating point, then rank it against
            // the published attack rates.
            let spec = harness::SweepSpec {
                durations_min: vec![50.0],
                trials_per_point: cfg.sweep.trials_per_point,
                base_seed: derive_seed(cfg.sweep.base_seed, 0xc0),
            };
            let rep = success_sweep(&model, &cfg.victim, &cfg.attack, &spec, &hash)?;
            let row = &rep.rows[0];
            let rows = leakage_comparison(thor_leakage_bph(row.success_rate, row.duration_min));
            report::leakage_csv(&rows, sep)
        }
    };

    match &cli.out {
        Some(path) => {
            let mut f = std::fs::File::create(path)
                .map_err(|e| ThorError::Io(format!("{}: {e}", path.display())))?;
            f.write_all(output.as_bytes())
                .map_err(|e| ThorError::Io(format!("{}: {e}", path.display())))?;
        }
        None => print!("{output}"),
    }
    Ok(())
}

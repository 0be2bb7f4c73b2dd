//! `mmwave-sim`: Monte Carlo campaigns for compressed-sensing mmWave channel
//! estimation with conjugate analog beamforming.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mmwave_cs_core::sim::{
    self, apply_key_value, config_echo, fmt_float, parse_config_file, ExperimentConfig,
    TrialContext,
};
use mmwave_cs_core::Error;

#[derive(Parser)]
#[command(
    name = "mmwave-sim",
    version,
    about = "Compressed-sensing channel estimation and beamforming sweeps for multi-user mmWave downlinks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Config file (flat `key = value` lines; see README).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Trials per sweep point override.
    #[arg(long, value_name = "N")]
    trials: Option<usize>,
    /// Output path; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Rate formula: sinr or indicator.
    #[arg(long, value_name = "MODE")]
    rate_mode: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Extra `key=value` config overrides, applied after --config.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Achievable rate vs. number of compressed-sensing measurements.
    SweepMeasurements {
        #[command(flatten)]
        common: CommonOpts,
        /// Measurement grid override, e.g. 8,16,32,64.
        #[arg(long, value_name = "LIST")]
        measurements: Option<String>,
    },
    /// Effective rate vs. channel coherence length.
    SweepCoherence {
        #[command(flatten)]
        common: CommonOpts,
        /// Measurement grid override.
        #[arg(long, value_name = "LIST")]
        measurements: Option<String>,
        /// Coherence lengths override, e.g. 600,1500,inf.
        #[arg(long, value_name = "LIST")]
        coherence: Option<String>,
    },
    /// Smallest measurement count reaching recovery probability 1 - eps.
    FindMEps {
        #[command(flatten)]
        common: CommonOpts,
        /// Failure budget (default: config epsilon).
        #[arg(long, value_name = "EPS")]
        eps: Option<f64>,
        /// Search grid override (ascending), e.g. 32,64,128,256.
        #[arg(long, value_name = "LIST")]
        m_grid: Option<String>,
        /// Require the lower Wilson bound (not the point estimate) to clear
        /// the target.
        #[arg(long)]
        wilson_lower: bool,
    },
    /// Run one trial and dump channel, estimates, and rates.
    Trial {
        #[command(flatten)]
        common: CommonOpts,
        /// Trial index.
        #[arg(long, default_value_t = 0)]
        trial_index: u64,
        /// Total measurements (default: first entry of the measurement
        /// grid).
        #[arg(long, value_name = "M")]
        m: Option<usize>,
    },
}

fn load_config(common: &CommonOpts) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => parse_config_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if let Some(trials) = common.trials {
        cfg.n_trials = trials;
    }
    if let Some(mode) = &common.rate_mode {
        apply_key_value(&mut cfg, "rate_mode", mode)?;
    }
    for assignment in &common.set {
        let Some((k, v)) = assignment.split_once('=') else {
            return Err(Error::Config(format!(
                "--set expects KEY=VALUE, got `{assignment}`"
            )));
        };
        apply_key_value(&mut cfg, k.trim(), v.trim())?;
    }
    sim::validate(&cfg)?;
    Ok(cfg)
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>, Error> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .map_err(|_| Error::Config(format!("cannot parse `{t}` as a count")))
        })
        .collect()
}

fn emit(common: &CommonOpts, text: &str) -> Result<(), Error> {
    match &common.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    let common = match &cli.command {
        Command::SweepMeasurements { common, .. }
        | Command::SweepCoherence { common, .. }
        | Command::FindMEps { common, .. }
        | Command::Trial { common, .. } => common.clone(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    match cli.command {
        Command::SweepMeasurements {
            common,
            measurements,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(list) = measurements {
                cfg.measurements = parse_usize_list(&list)?;
                sim::validate(&cfg)?;
            }
            let table = pool.install(|| sim::sweep_measurements(&cfg))?;
            emit(&common, &table.to_csv())
        }
        Command::SweepCoherence {
            common,
            measurements,
            coherence,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(list) = measurements {
                cfg.measurements = parse_usize_list(&list)?;
            }
            if let Some(list) = coherence {
                apply_key_value(&mut cfg, "coherence_lengths", &list)?;
            }
            sim::validate(&cfg)?;
            let table = pool.install(|| sim::sweep_coherence(&cfg))?;
            emit(&common, &table.to_csv())
        }
        Command::FindMEps {
            common,
            eps,
            m_grid,
            wilson_lower,
        } => {
            let cfg = load_config(&common)?;
            let eps = eps.unwrap_or(cfg.epsilon);
            let grid = match m_grid {
                Some(list) => parse_usize_list(&list)?,
                None => cfg.measurements.clone(),
            };
            let search = pool.install(|| {
                sim::find_m_epsilon(&cfg, eps, cfg.n_trials, &grid, wilson_lower)
            })?;
            if search.m_epsilon.is_none() {
                eprintln!(
                    "warning: no grid point reached recovery probability {}",
                    1.0 - eps
                );
            }
            emit(&common, &search.to_csv())
        }
        Command::Trial {
            common,
            trial_index,
            m,
        } => {
            let cfg = load_config(&common)?;
            let m_total = m.unwrap_or_else(|| {
                cfg.training
                    .fixed_split
                    .map(|(a, b)| a * b)
                    .unwrap_or(cfg.measurements[0])
            });
            let ctx = TrialContext::new(&cfg, m_total)?;
            let dump = pool.install(|| ctx.run_detailed(trial_index))?;
            let mut out = String::new();
            use std::fmt::Write as _;
            writeln!(out, "# mmwave-sim {}", env!("CARGO_PKG_VERSION")).unwrap();
            for (k, v) in config_echo(&cfg) {
                writeln!(out, "# {k} = {v}").unwrap();
            }
            writeln!(out, "trial_index = {trial_index}").unwrap();
            writeln!(out, "m_bs = {}", dump.m_bs).unwrap();
            writeln!(out, "m_ms = {}", dump.m_ms).unwrap();
            writeln!(out, "m_realized = {}", dump.m_bs * dump.m_ms).unwrap();
            for (u, truth) in dump.truths.iter().enumerate() {
                writeln!(
                    out,
                    "user{u}.truth = gain=({},{}) aoa={} aod={} aoa_index={} aod_index={}",
                    fmt_float(truth.gain.re),
                    fmt_float(truth.gain.im),
                    fmt_float(truth.aoa),
                    fmt_float(truth.aod),
                    truth
                        .aoa_grid_index
                        .map(|i| i.to_string())
                        .unwrap_or_else(|| "off-grid".into()),
                    truth
                        .aod_grid_index
                        .map(|i| i.to_string())
                        .unwrap_or_else(|| "off-grid".into()),
                )
                .unwrap();
                let est = &dump.estimates[u];
                let atom = est.atoms.first().expect("sparsity >= 1");
                writeln!(
                    out,
                    "user{u}.estimate = aoa_index={} aod_index={} gain=({},{}) residual={}",
                    atom.aoa_index,
                    atom.aod_index,
                    fmt_float(atom.gain_estimate.re),
                    fmt_float(atom.gain_estimate.im),
                    fmt_float(est.residual_norm),
                )
                .unwrap();
                writeln!(
                    out,
                    "user{u}.success = {}",
                    dump.result.per_user_success[u]
                )
                .unwrap();
                writeln!(
                    out,
                    "user{u}.rate = {}",
                    fmt_float(dump.result.per_user_rate[u])
                )
                .unwrap();
                writeln!(
                    out,
                    "user{u}.single_user_rate = {}",
                    fmt_float(dump.result.per_user_single_rate[u])
                )
                .unwrap();
                writeln!(
                    out,
                    "user{u}.perfect_csi_rate = {}",
                    fmt_float(dump.result.per_user_perfect_rate[u])
                )
                .unwrap();
            }
            emit(&common, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap help/version exits are successes; argument mistakes are
            // configuration errors.
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

//! Experiment configuration, defaults, and the flat `key = value` config
//! file format.
//!
//! Files are UTF-8 text, one `key = value` per line, `#` starts a comment
//! (full-line or trailing). Unknown keys are rejected. CLI flags are applied
//! on top of file values by re-using [`apply_key_value`].

use crate::array::ArrayGeometry;
use crate::channel::{AngleModel, ChannelConfig, GainModel, LinkBudget};
use crate::error::{Error, Result};

/// How the training matrices are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainingKind {
    /// Random quantized-phase beams and combiners.
    Random,
    /// P and Q span the virtual-grid dictionaries (the traditional
    /// N_BS * N_MS exhaustive baseline).
    Exhaustive,
}

/// Which rate formula the harness evaluates per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateMode {
    /// Physical SINR rate from the actual beamformers and channels.
    Sinr,
    /// Indicator-form rate; requires on-grid angles.
    Indicator,
}

/// Training-phase knobs before a concrete measurement count is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingSetup {
    pub kind: TrainingKind,
    pub nq_bs: u32,
    pub nq_ms: u32,
    /// Per-symbol training power; `None` follows the link's transmit power.
    pub training_power_dbm: Option<f64>,
    pub normalize_columns: bool,
    /// Explicit `(m_bs, m_ms)` override; when set, requested totals must
    /// match the product.
    pub fixed_split: Option<(usize, usize)>,
}

/// Full description of a simulation campaign.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub channel: ChannelConfig,
    pub training: TrainingSetup,
    pub n_trials: usize,
    pub master_seed: u64,
    pub rate_mode: RateMode,
    /// Measurement-count sweep grid (requested totals).
    pub measurements: Vec<usize>,
    /// Coherence lengths in symbols for the coherence sweep; `inf` allowed.
    pub coherence_lengths: Vec<f64>,
    /// Estimation-failure budget for M_eps searches and Eq.-13-style bounds.
    pub epsilon: f64,
    /// Disable measurement noise during the training phase.
    pub noiseless: bool,
    /// Re-quantize precoder phases to this many bits (None: exact
    /// virtual-grid phases).
    pub precoder_phase_bits: Option<u32>,
}

impl Default for ExperimentConfig {
    /// The evaluation setup used throughout: 64-antenna BS, 4 users with 32
    /// antennas each, 28 GHz / 50 MHz / 500 m LOS, 4-bit training phases,
    /// 37 dBm.
    fn default() -> Self {
        ExperimentConfig {
            channel: ChannelConfig {
                bs_geometry: ArrayGeometry::half_wavelength(64).expect("static"),
                ms_geometry: ArrayGeometry::half_wavelength(32).expect("static"),
                n_users: 4,
                rf_chains: 4,
                link: LinkBudget {
                    carrier_frequency_hz: 28e9,
                    bandwidth_hz: 50e6,
                    distance_m: 500.0,
                    tx_power_dbm: 37.0,
                    noise_figure_db: 0.0,
                },
                gain_model: GainModel::ConstantLos,
                angle_model: AngleModel::OnGrid,
            },
            training: TrainingSetup {
                kind: TrainingKind::Random,
                nq_bs: 4,
                nq_ms: 4,
                training_power_dbm: None,
                normalize_columns: true,
                fixed_split: None,
            },
            n_trials: 1000,
            master_seed: 1,
            rate_mode: RateMode::Sinr,
            measurements: vec![8, 16, 32, 64, 128, 256, 512, 1024, 2048],
            coherence_lengths: vec![600.0, 1500.0, 3000.0, 10000.0],
            epsilon: 0.05,
            noiseless: false,
            precoder_phase_bits: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got `{value}`"))),
    }
}

fn parse_list<T, F: Fn(&str) -> Result<T>>(value: &str, f: F) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(f)
        .collect()
}

/// Apply one configuration assignment. Shared by the file parser and CLI
/// overrides.
pub fn apply_key_value(cfg: &mut ExperimentConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "n_bs" => {
            let n = parse(key, value)?;
            cfg.channel.bs_geometry =
                ArrayGeometry::new(n, cfg.channel.bs_geometry.element_spacing_wavelengths())?;
        }
        "n_ms" => {
            let n = parse(key, value)?;
            cfg.channel.ms_geometry =
                ArrayGeometry::new(n, cfg.channel.ms_geometry.element_spacing_wavelengths())?;
        }
        "bs_spacing" => {
            cfg.channel.bs_geometry =
                ArrayGeometry::new(cfg.channel.bs_geometry.n_antennas(), parse(key, value)?)?;
        }
        "ms_spacing" => {
            cfg.channel.ms_geometry =
                ArrayGeometry::new(cfg.channel.ms_geometry.n_antennas(), parse(key, value)?)?;
        }
        "n_users" => {
            cfg.channel.n_users = parse(key, value)?;
            // Keep the default RF budget in step; an explicit `rf_chains`
            // line after this one still overrides.
            if cfg.channel.rf_chains < cfg.channel.n_users {
                cfg.channel.rf_chains = cfg.channel.n_users;
            }
        }
        "rf_chains" => cfg.channel.rf_chains = parse(key, value)?,
        "carrier_frequency_hz" => cfg.channel.link.carrier_frequency_hz = parse(key, value)?,
        "bandwidth_hz" => cfg.channel.link.bandwidth_hz = parse(key, value)?,
        "distance_m" => cfg.channel.link.distance_m = parse(key, value)?,
        "tx_power_dbm" => cfg.channel.link.tx_power_dbm = parse(key, value)?,
        "noise_figure_db" => cfg.channel.link.noise_figure_db = parse(key, value)?,
        "gain_model" => {
            cfg.channel.gain_model = match value {
                "constant-los" => GainModel::ConstantLos,
                "complex-gaussian" => GainModel::ComplexGaussian,
                _ => {
                    return Err(Error::Config(format!(
                        "gain_model: expected constant-los or complex-gaussian, got `{value}`"
                    )))
                }
            }
        }
        "angle_model" => {
            cfg.channel.angle_model = match value {
                "on-grid" => AngleModel::OnGrid,
                "continuous" => AngleModel::Continuous,
                _ => {
                    return Err(Error::Config(format!(
                        "angle_model: expected on-grid or continuous, got `{value}`"
                    )))
                }
            }
        }
        "training" => {
            cfg.training.kind = match value {
                "random" => TrainingKind::Random,
                "exhaustive" => TrainingKind::Exhaustive,
                _ => {
                    return Err(Error::Config(format!(
                        "training: expected random or exhaustive, got `{value}`"
                    )))
                }
            }
        }
        "nq_bs" => cfg.training.nq_bs = parse(key, value)?,
        "nq_ms" => cfg.training.nq_ms = parse(key, value)?,
        "training_power_dbm" => {
            cfg.training.training_power_dbm = Some(parse(key, value)?);
        }
        "normalize_training" => cfg.training.normalize_columns = parse_bool(key, value)?,
        "m_bs" => {
            let m = parse(key, value)?;
            cfg.training.fixed_split = Some(match cfg.training.fixed_split {
                Some((_, m_ms)) => (m, m_ms),
                None => (m, 0),
            });
        }
        "m_ms" => {
            let m = parse(key, value)?;
            cfg.training.fixed_split = Some(match cfg.training.fixed_split {
                Some((m_bs, _)) => (m_bs, m),
                None => (0, m),
            });
        }
        "noiseless" => cfg.noiseless = parse_bool(key, value)?,
        "n_trials" => cfg.n_trials = parse(key, value)?,
        "master_seed" => cfg.master_seed = parse(key, value)?,
        "rate_mode" => {
            cfg.rate_mode = match value {
                "sinr" => RateMode::Sinr,
                "indicator" => RateMode::Indicator,
                _ => {
                    return Err(Error::Config(format!(
                        "rate_mode: expected sinr or indicator, got `{value}`"
                    )))
                }
            }
        }
        "measurements" => cfg.measurements = parse_list(value, |s| parse("measurements", s))?,
        "coherence_lengths" => {
            cfg.coherence_lengths = parse_list(value, |s| {
                if s.eq_ignore_ascii_case("inf") {
                    Ok(f64::INFINITY)
                } else {
                    parse("coherence_lengths", s)
                }
            })?
        }
        "epsilon" => cfg.epsilon = parse(key, value)?,
        "precoder_phase_bits" => {
            cfg.precoder_phase_bits = if value.eq_ignore_ascii_case("none") {
                None
            } else {
                Some(parse(key, value)?)
            };
        }
        _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
    }
    Ok(())
}

/// Parse the flat key-value format on top of the default configuration.
pub fn parse_config_text(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected `key = value`, got `{raw}`",
                lineno + 1
            )));
        };
        apply_key_value(&mut cfg, key.trim(), value.trim())
            .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
    }
    validate(&cfg)?;
    Ok(cfg)
}

/// Read and parse a config file.
pub fn parse_config_file(path: &std::path::Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_text(&text)
}

/// Consistency checks beyond per-field parsing.
pub fn validate(cfg: &ExperimentConfig) -> Result<()> {
    cfg.channel.validate()?;
    if cfg.n_trials == 0 {
        return Err(Error::Config("n_trials must be at least 1".into()));
    }
    if cfg.measurements.is_empty() || cfg.measurements.iter().any(|&m| m == 0) {
        return Err(Error::Config(
            "measurements must be a non-empty list of positive counts".into(),
        ));
    }
    if cfg.coherence_lengths.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Config(
            "coherence_lengths must all be positive".into(),
        ));
    }
    if !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0) {
        return Err(Error::Config(format!(
            "epsilon must lie in (0, 1), got {}",
            cfg.epsilon
        )));
    }
    if let Some((m_bs, m_ms)) = cfg.training.fixed_split {
        if m_bs == 0 || m_ms == 0 {
            return Err(Error::Config(
                "m_bs and m_ms must both be set (and positive) when overriding the split".into(),
            ));
        }
    }
    if cfg.rate_mode == RateMode::Indicator && cfg.channel.angle_model != AngleModel::OnGrid {
        return Err(Error::Config(
            "indicator rate mode requires angle_model = on-grid".into(),
        ));
    }
    Ok(())
}

fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v}")
    }
}

/// Echo every field as `key = value` pairs, suitable for CSV preambles and
/// for re-parsing into the identical configuration.
pub fn config_echo(cfg: &ExperimentConfig) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = Vec::new();
    let mut push = |k: &str, v: String| out.push((k.to_string(), v));
    push("n_bs", cfg.channel.bs_geometry.n_antennas().to_string());
    push("n_ms", cfg.channel.ms_geometry.n_antennas().to_string());
    push(
        "bs_spacing",
        fmt_f64(cfg.channel.bs_geometry.element_spacing_wavelengths()),
    );
    push(
        "ms_spacing",
        fmt_f64(cfg.channel.ms_geometry.element_spacing_wavelengths()),
    );
    push("n_users", cfg.channel.n_users.to_string());
    push("rf_chains", cfg.channel.rf_chains.to_string());
    push(
        "carrier_frequency_hz",
        fmt_f64(cfg.channel.link.carrier_frequency_hz),
    );
    push("bandwidth_hz", fmt_f64(cfg.channel.link.bandwidth_hz));
    push("distance_m", fmt_f64(cfg.channel.link.distance_m));
    push("tx_power_dbm", fmt_f64(cfg.channel.link.tx_power_dbm));
    push(
        "noise_figure_db",
        fmt_f64(cfg.channel.link.noise_figure_db),
    );
    push(
        "gain_model",
        match cfg.channel.gain_model {
            GainModel::ConstantLos => "constant-los".into(),
            GainModel::ComplexGaussian => "complex-gaussian".into(),
        },
    );
    push(
        "angle_model",
        match cfg.channel.angle_model {
            AngleModel::OnGrid => "on-grid".into(),
            AngleModel::Continuous => "continuous".into(),
        },
    );
    push(
        "training",
        match cfg.training.kind {
            TrainingKind::Random => "random".into(),
            TrainingKind::Exhaustive => "exhaustive".into(),
        },
    );
    push("nq_bs", cfg.training.nq_bs.to_string());
    push("nq_ms", cfg.training.nq_ms.to_string());
    if let Some(p) = cfg.training.training_power_dbm {
        push("training_power_dbm", fmt_f64(p));
    }
    push(
        "normalize_training",
        cfg.training.normalize_columns.to_string(),
    );
    if let Some((m_bs, m_ms)) = cfg.training.fixed_split {
        push("m_bs", m_bs.to_string());
        push("m_ms", m_ms.to_string());
    }
    push("noiseless", cfg.noiseless.to_string());
    push("n_trials", cfg.n_trials.to_string());
    push("master_seed", cfg.master_seed.to_string());
    push(
        "rate_mode",
        match cfg.rate_mode {
            RateMode::Sinr => "sinr".into(),
            RateMode::Indicator => "indicator".into(),
        },
    );
    push(
        "measurements",
        cfg.measurements
            .iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    push(
        "coherence_lengths",
        cfg.coherence_lengths
            .iter()
            .map(|&l| fmt_f64(l))
            .collect::<Vec<_>>()
            .join(","),
    );
    push("epsilon", fmt_f64(cfg.epsilon));
    if let Some(bits) = cfg.precoder_phase_bits {
        push("precoder_phase_bits", bits.to_string());
    }
    out
}

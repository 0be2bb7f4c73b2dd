//! Seeded Monte Carlo engine and the two experiment campaigns: achievable
//! rate versus measurement count, and effective rate versus coherence length.
//!
//! Every trial is keyed by `(master_seed, trial_index)` through the stream
//! derivation in [`crate::seed`]; trials run on a rayon pool and are reduced
//! in trial-index order, so results are bit-identical for any worker count.
//! The BS training matrix is broadcast: one `P` is shared by every user of a
//! trial, which is what keeps the training overhead independent of the user
//! count.

mod config;
mod table;

pub use config::{
    apply_key_value, config_echo, parse_config_file, parse_config_text, validate,
    ExperimentConfig, RateMode, TrainingKind, TrainingSetup,
};
pub use table::{
    fmt_float, CoherenceRow, CoherenceSweepTable, MEpsilonPoint, MEpsilonSearch, MeasurementRow,
    MeasurementSweepTable, RunMetadata,
};

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::array::{dictionary, virtual_grid, AngleGrid, ArrayGeometry};
use crate::channel::{
    channel_matrix, noise_power, nominal_snr, sample_channel, AngleModel, ChannelRealization,
};
use crate::error::{Error, Result};
use crate::linalg::conj_transpose;
use crate::rates::{
    conjugate_beamformers, conjugate_beamformers_from_angles, indicator_rate, sinr_rate,
    single_user_rate,
};
use crate::recovery::{recover_support_omp, recovery_success, Atom, SupportEstimate};
use crate::seed::{stream_rng, Stream};
use crate::training::{
    gen_training_matrix, synthesize_measurements, SensingOperator, TrainingConfig,
};

/// Split a total measurement budget into BS beams and MS combiners,
/// proportionally to the square roots of the array sizes: `m_bs =
/// round(sqrt(M * N_BS / N_MS))` clamped to `[1, M]`, `m_ms = ceil(M /
/// m_bs)`. The realized total `m_bs * m_ms` is the smallest product at that
/// `m_bs` covering the request.
pub fn split_measurements(m_total: usize, n_bs: usize, n_ms: usize) -> Result<(usize, usize)> {
    if m_total == 0 {
        return Err(Error::Config("measurement total must be positive".into()));
    }
    if n_bs == 0 || n_ms == 0 {
        return Err(Error::Config("array sizes must be positive".into()));
    }
    let ideal = (m_total as f64 * n_bs as f64 / n_ms as f64).sqrt();
    let m_bs = (ideal.round() as usize).clamp(1, m_total);
    let m_ms = m_total.div_ceil(m_bs);
    Ok((m_bs, m_ms))
}

/// Result of one Monte Carlo trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub per_user_success: Vec<bool>,
    pub per_user_rate: Vec<f64>,
    pub per_user_single_rate: Vec<f64>,
    /// Rate with beamformers built from the true angles through the same
    /// pipeline (the perfect-CSI reference; true-AoD collisions included).
    pub per_user_perfect_rate: Vec<f64>,
}

/// Trial internals kept for the debug dump.
#[derive(Debug, Clone)]
pub struct TrialDump {
    pub result: TrialResult,
    pub truths: Vec<ChannelRealization>,
    pub estimates: Vec<SupportEstimate>,
    pub m_bs: usize,
    pub m_ms: usize,
}

/// Everything a trial needs, resolved once per sweep point.
pub struct TrialContext {
    cfg: ExperimentConfig,
    training: TrainingConfig,
    kind: TrainingKind,
    bs_grid: AngleGrid,
    ms_grid: AngleGrid,
    a_bs: Array2<Complex64>,
    a_ms: Array2<Complex64>,
    /// Measurement noise during training (0 when noiseless).
    train_noise_w: f64,
    /// Noise power entering the rate formulas (always physical).
    rate_noise_w: f64,
    tx_power_w: f64,
    snr: f64,
}

impl TrialContext {
    pub fn new(cfg: &ExperimentConfig, m_total: usize) -> Result<Self> {
        config::validate(cfg)?;
        let ch = &cfg.channel;
        let half = |g: &ArrayGeometry, side: &str| -> Result<()> {
            if (g.element_spacing_wavelengths() - 0.5).abs() > 1e-12 {
                return Err(Error::Config(format!(
                    "the harness uses virtual-grid dictionaries, which require \
                     half-wavelength spacing; {side} spacing is {}",
                    g.element_spacing_wavelengths()
                )));
            }
            Ok(())
        };
        half(&ch.bs_geometry, "bs")?;
        half(&ch.ms_geometry, "ms")?;
        let n_bs = ch.bs_geometry.n_antennas();
        let n_ms = ch.ms_geometry.n_antennas();

        let (m_bs, m_ms) = match cfg.training.kind {
            TrainingKind::Random => match cfg.training.fixed_split {
                Some((m_bs, m_ms)) => {
                    if m_bs * m_ms != m_total {
                        return Err(Error::Config(format!(
                            "fixed split {m_bs} x {m_ms} does not realize the requested \
                             total of {m_total} measurements"
                        )));
                    }
                    (m_bs, m_ms)
                }
                None => split_measurements(m_total, n_bs, n_ms)?,
            },
            TrainingKind::Exhaustive => {
                if m_total != n_bs * n_ms {
                    return Err(Error::Config(format!(
                        "exhaustive training spans the dictionaries: expected M = \
                         {} ({} x {}), got {m_total}",
                        n_bs * n_ms,
                        n_bs,
                        n_ms
                    )));
                }
                (n_bs, n_ms)
            }
        };

        let training_power_dbm = cfg
            .training
            .training_power_dbm
            .unwrap_or(ch.link.tx_power_dbm);
        let training = TrainingConfig {
            m_bs,
            m_ms,
            nq_bs: cfg.training.nq_bs,
            nq_ms: cfg.training.nq_ms,
            training_power_w: 10f64.powf((training_power_dbm - 30.0) / 10.0),
            normalize_columns: cfg.training.normalize_columns,
        };
        training.validate()?;

        let bs_grid = virtual_grid(&ch.bs_geometry)?;
        let ms_grid = virtual_grid(&ch.ms_geometry)?;
        let a_bs = dictionary(&ch.bs_geometry, &bs_grid);
        let a_ms = dictionary(&ch.ms_geometry, &ms_grid);
        let physical_noise = noise_power(&ch.link);
        Ok(TrialContext {
            cfg: cfg.clone(),
            training,
            kind: cfg.training.kind,
            bs_grid,
            ms_grid,
            a_bs,
            a_ms,
            train_noise_w: if cfg.noiseless { 0.0 } else { physical_noise },
            rate_noise_w: physical_noise,
            tx_power_w: ch.link.tx_power_w(),
            snr: nominal_snr(&ch.link),
        })
    }

    pub fn m_bs(&self) -> usize {
        self.training.m_bs
    }

    pub fn m_ms(&self) -> usize {
        self.training.m_ms
    }

    pub fn m_realized(&self) -> usize {
        self.training.total_measurements()
    }

    /// Run one trial; deterministic in `(master_seed, trial_index)`.
    pub fn run(&self, trial_index: u64) -> Result<TrialResult> {
        Ok(self.run_detailed(trial_index)?.result)
    }

    /// Run one trial keeping the intermediate channel and estimates.
    pub fn run_detailed(&self, trial_index: u64) -> Result<TrialDump> {
        let ch = &self.cfg.channel;
        let seed = self.cfg.master_seed;
        let n_users = ch.n_users;
        let n_bs = ch.bs_geometry.n_antennas();
        let n_ms = ch.ms_geometry.n_antennas();

        let truths = sample_channel(
            ch,
            &mut stream_rng(seed, trial_index, Stream::Channel, 0),
        )?;

        // Broadcast training: one P for all users.
        let p_mat = match self.kind {
            TrainingKind::Random => gen_training_matrix(
                n_bs,
                self.training.m_bs,
                self.training.nq_bs,
                self.training.normalize_columns,
                &mut stream_rng(seed, trial_index, Stream::TrainingBs, 0),
            )?,
            TrainingKind::Exhaustive => self.a_bs.clone(),
        };
        // The BS-side operator factor is shared by every user.
        let bs_factor = p_mat.t().dot(&self.a_bs.mapv(|z| z.conj()));

        let mut estimates = Vec::with_capacity(n_users);
        for (u, truth) in truths.iter().enumerate() {
            let q_mat = match self.kind {
                TrainingKind::Random => gen_training_matrix(
                    n_ms,
                    self.training.m_ms,
                    self.training.nq_ms,
                    self.training.normalize_columns,
                    &mut stream_rng(seed, trial_index, Stream::TrainingMs, u as u64),
                )?,
                TrainingKind::Exhaustive => self.a_ms.clone(),
            };
            let h = channel_matrix(truth, &ch.bs_geometry, &ch.ms_geometry);
            let y = synthesize_measurements(
                &h,
                &p_mat,
                &q_mat,
                self.training.training_power_w,
                self.train_noise_w,
                &mut stream_rng(seed, trial_index, Stream::Noise, u as u64),
            )?;
            let operator = SensingOperator {
                bs_factor: bs_factor.clone(),
                ms_factor: conj_transpose(&q_mat).dot(&self.a_ms),
            };
            estimates.push(recover_support_omp(&operator, &y, 1)?);
        }

        let per_user_success = truths
            .iter()
            .zip(estimates.iter())
            .map(|(t, e)| self.success(t, e))
            .collect::<Result<Vec<bool>>>()?;

        let per_user_single_rate: Vec<f64> = truths
            .iter()
            .map(|t| single_user_rate(t.gain, self.snr, n_users, n_bs, n_ms))
            .collect();

        let (per_user_rate, per_user_perfect_rate) = match self.cfg.rate_mode {
            RateMode::Sinr => self.sinr_rates(&truths, &estimates)?,
            RateMode::Indicator => self.indicator_rates(&truths, &estimates)?,
        };

        Ok(TrialDump {
            result: TrialResult {
                per_user_success,
                per_user_rate,
                per_user_single_rate,
                per_user_perfect_rate,
            },
            truths,
            estimates,
            m_bs: self.training.m_bs,
            m_ms: self.training.m_ms,
        })
    }

    fn success(&self, truth: &ChannelRealization, est: &SupportEstimate) -> Result<bool> {
        match self.cfg.channel.angle_model {
            AngleModel::OnGrid => recovery_success(est, truth),
            // Off-grid truth: score against the nearest virtual-grid pair in
            // spatial frequency, the finest resolution the dictionary offers.
            AngleModel::Continuous => {
                let atom = est
                    .atoms
                    .first()
                    .ok_or_else(|| Error::InvalidInput("estimate has no atoms".into()))?;
                let aoa_near = nearest_grid_index(&self.ms_grid, truth.aoa);
                let aod_near = nearest_grid_index(&self.bs_grid, truth.aod);
                Ok(atom.aoa_index == aoa_near && atom.aod_index == aod_near)
            }
        }
    }

    fn sinr_rates(
        &self,
        truths: &[ChannelRealization],
        estimates: &[SupportEstimate],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let ch = &self.cfg.channel;
        let sol_est = conjugate_beamformers(
            estimates,
            &self.bs_grid,
            &self.ms_grid,
            &ch.bs_geometry,
            &ch.ms_geometry,
            self.cfg.precoder_phase_bits,
        )?;
        let aoas: Vec<f64> = truths.iter().map(|t| t.aoa).collect();
        let aods: Vec<f64> = truths.iter().map(|t| t.aod).collect();
        let sol_true = conjugate_beamformers_from_angles(
            &aoas,
            &aods,
            &ch.bs_geometry,
            &ch.ms_geometry,
            self.bs_grid.size(),
            self.cfg.precoder_phase_bits,
        )?;
        let mut est_rates = Vec::with_capacity(truths.len());
        let mut perfect_rates = Vec::with_capacity(truths.len());
        for (u, truth) in truths.iter().enumerate() {
            let h = channel_matrix(truth, &ch.bs_geometry, &ch.ms_geometry);
            est_rates.push(sinr_rate(&h, &sol_est, u, self.tx_power_w, self.rate_noise_w)?);
            perfect_rates.push(sinr_rate(
                &h,
                &sol_true,
                u,
                self.tx_power_w,
                self.rate_noise_w,
            )?);
        }
        Ok((est_rates, perfect_rates))
    }

    fn indicator_rates(
        &self,
        truths: &[ChannelRealization],
        estimates: &[SupportEstimate],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let ch = &self.cfg.channel;
        let n_bs = ch.bs_geometry.n_antennas();
        let n_ms = ch.ms_geometry.n_antennas();
        // Perfect CSI in indicator form: estimates that equal the truth.
        let truth_estimates: Vec<SupportEstimate> = truths
            .iter()
            .map(|t| {
                Ok(SupportEstimate {
                    atoms: vec![Atom {
                        aoa_index: t.aoa_grid_index.ok_or_else(|| {
                            Error::Config("indicator mode requires on-grid truths".into())
                        })?,
                        aod_index: t.aod_grid_index.expect("checked with aoa"),
                        gain_estimate: t.gain,
                    }],
                    residual_norm: 0.0,
                })
            })
            .collect::<Result<_>>()?;
        let mut est_rates = Vec::with_capacity(truths.len());
        let mut perfect_rates = Vec::with_capacity(truths.len());
        for (u, truth) in truths.iter().enumerate() {
            est_rates.push(indicator_rate(truth, estimates, u, self.snr, n_bs, n_ms)?);
            perfect_rates.push(indicator_rate(
                truth,
                &truth_estimates,
                u,
                self.snr,
                n_bs,
                n_ms,
            )?);
        }
        Ok((est_rates, perfect_rates))
    }
}

/// Nearest virtual-grid index in wrap-around spatial-frequency distance.
fn nearest_grid_index(grid: &AngleGrid, angle: f64) -> usize {
    let f = angle.sin();
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, &p) in grid.points().iter().enumerate() {
        let d = (f - p.sin()).abs();
        let d = d.min(2.0 - d);
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    best
}

/// Run one trial of the configured experiment at a total measurement budget.
pub fn run_trial(
    cfg: &ExperimentConfig,
    m_total: usize,
    trial_index: u64,
) -> Result<TrialResult> {
    TrialContext::new(cfg, m_total)?.run(trial_index)
}

/// All trials of one sweep point, in trial-index order.
fn run_trials(ctx: &TrialContext, n_trials: usize) -> Result<Vec<TrialResult>> {
    (0..n_trials)
        .into_par_iter()
        .map(|t| ctx.run(t as u64))
        .collect()
}

/// 95% Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, samples: usize) -> (f64, f64) {
    if samples == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054f64;
    let n = samples as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Aggregated statistics of one sweep point.
#[derive(Debug, Clone)]
struct PointStats {
    m_requested: usize,
    m_bs: usize,
    m_ms: usize,
    n_trials: usize,
    mean_rate: f64,
    stderr: f64,
    mean_single: f64,
    mean_perfect: f64,
    p_hat: f64,
    wilson: (f64, f64),
}

fn aggregate(m_requested: usize, ctx: &TrialContext, results: &[TrialResult]) -> PointStats {
    let n_trials = results.len();
    let mut per_trial_mean = Vec::with_capacity(n_trials);
    let mut single_acc = 0.0;
    let mut perfect_acc = 0.0;
    let mut successes = 0usize;
    let mut samples = 0usize;
    for r in results {
        let u = r.per_user_rate.len() as f64;
        per_trial_mean.push(r.per_user_rate.iter().sum::<f64>() / u);
        single_acc += r.per_user_single_rate.iter().sum::<f64>() / u;
        perfect_acc += r.per_user_perfect_rate.iter().sum::<f64>() / u;
        successes += r.per_user_success.iter().filter(|&&s| s).count();
        samples += r.per_user_success.len();
    }
    let mean_rate = per_trial_mean.iter().sum::<f64>() / n_trials as f64;
    let stderr = if n_trials > 1 {
        let var = per_trial_mean
            .iter()
            .map(|x| (x - mean_rate).powi(2))
            .sum::<f64>()
            / (n_trials - 1) as f64;
        (var / n_trials as f64).sqrt()
    } else {
        0.0
    };
    let p_hat = successes as f64 / samples as f64;
    PointStats {
        m_requested,
        m_bs: ctx.m_bs(),
        m_ms: ctx.m_ms(),
        n_trials,
        mean_rate,
        stderr,
        mean_single: single_acc / n_trials as f64,
        mean_perfect: perfect_acc / n_trials as f64,
        p_hat,
        wilson: wilson_interval(successes, samples),
    }
}

fn simulate_points(cfg: &ExperimentConfig, m_values: &[usize]) -> Result<Vec<PointStats>> {
    m_values
        .iter()
        .map(|&m| {
            let ctx = TrialContext::new(cfg, m)?;
            let results = run_trials(&ctx, cfg.n_trials)?;
            Ok(aggregate(m, &ctx, &results))
        })
        .collect()
}

fn metadata(cfg: &ExperimentConfig) -> RunMetadata {
    RunMetadata {
        tool: format!("mmwave-sim {}", env!("CARGO_PKG_VERSION")),
        master_seed: cfg.master_seed,
        config: config_echo(cfg),
        extra: Vec::new(),
    }
}

/// Pooled support-recovery probability at one measurement budget, with a 95%
/// Wilson interval.
pub fn estimate_recovery_probability(
    cfg: &ExperimentConfig,
    m_total: usize,
    n_trials: usize,
) -> Result<(f64, (f64, f64))> {
    if n_trials == 0 {
        return Err(Error::Config("n_trials must be at least 1".into()));
    }
    let ctx = TrialContext::new(cfg, m_total)?;
    let results = run_trials(&ctx, n_trials)?;
    let stats = aggregate(m_total, &ctx, &results);
    Ok((stats.p_hat, stats.wilson))
}

/// Smallest grid entry whose pooled recovery probability reaches
/// `1 - epsilon`; evaluates (and reports) the whole curve.
///
/// With `require_wilson_lower` the lower confidence bound must clear the
/// target instead of the point estimate. A grid that never reaches the
/// target yields `m_epsilon: None` with the curve intact.
pub fn find_m_epsilon(
    cfg: &ExperimentConfig,
    epsilon: f64,
    n_trials: usize,
    m_grid: &[usize],
    require_wilson_lower: bool,
) -> Result<MEpsilonSearch> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Config(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    if m_grid.is_empty() {
        return Err(Error::Config("m_grid must be non-empty".into()));
    }
    if m_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("m_grid must be strictly ascending".into()));
    }
    let mut run_cfg = cfg.clone();
    run_cfg.n_trials = n_trials;
    let stats = simulate_points(&run_cfg, m_grid)?;
    let target = 1.0 - epsilon;
    let mut m_epsilon = None;
    let mut m_epsilon_requested = None;
    let curve: Vec<MEpsilonPoint> = stats
        .iter()
        .map(|s| {
            let achieved = if require_wilson_lower {
                s.wilson.0 >= target
            } else {
                s.p_hat >= target
            };
            if achieved && m_epsilon.is_none() {
                m_epsilon = Some(s.m_bs * s.m_ms);
                m_epsilon_requested = Some(s.m_requested);
            }
            MEpsilonPoint {
                m_requested: s.m_requested,
                m_bs: s.m_bs,
                m_ms: s.m_ms,
                m_realized: s.m_bs * s.m_ms,
                n_trials: s.n_trials,
                p_success: s.p_hat,
                wilson_low: s.wilson.0,
                wilson_high: s.wilson.1,
            }
        })
        .collect();
    Ok(MEpsilonSearch {
        metadata: metadata(cfg),
        epsilon,
        m_epsilon,
        m_epsilon_requested,
        curve,
    })
}

/// Achievable rate versus measurement count (one row per entry of
/// `cfg.measurements`).
pub fn sweep_measurements(cfg: &ExperimentConfig) -> Result<MeasurementSweepTable> {
    let stats = simulate_points(cfg, &cfg.measurements)?;
    let u = cfg.channel.n_users as f64;
    let n_bs = cfg.channel.bs_geometry.n_antennas() as f64;
    let rows = stats
        .iter()
        .map(|s| MeasurementRow {
            m_requested: s.m_requested,
            m_bs: s.m_bs,
            m_ms: s.m_ms,
            m_realized: s.m_bs * s.m_ms,
            n_trials: s.n_trials,
            p_success: s.p_hat,
            wilson_low: s.wilson.0,
            wilson_high: s.wilson.1,
            mean_rate_per_user: s.mean_rate,
            stderr_rate: s.stderr,
            sum_rate: s.mean_rate * u,
            mean_single_user_rate: s.mean_single,
            perfect_csi_rate: s.mean_perfect,
            lower_bound: s.mean_single * (1.0 - u / n_bs) * s.p_hat,
        })
        .collect();
    Ok(MeasurementSweepTable {
        metadata: metadata(cfg),
        rows,
    })
}

/// Effective rate versus coherence length: each measurement budget is
/// simulated once and discounted by the realized training overhead
/// `(1 - m_realized / L_C)` at every coherence length.
pub fn sweep_coherence(cfg: &ExperimentConfig) -> Result<CoherenceSweepTable> {
    if cfg.coherence_lengths.is_empty() {
        return Err(Error::Config("coherence_lengths must be non-empty".into()));
    }
    let stats = simulate_points(cfg, &cfg.measurements)?;
    let u = cfg.channel.n_users as f64;
    let n_bs = cfg.channel.bs_geometry.n_antennas() as f64;
    let target = 1.0 - cfg.epsilon;
    let mut rows = Vec::with_capacity(cfg.coherence_lengths.len() * stats.len());
    for &l_c in &cfg.coherence_lengths {
        let effective = |s: &PointStats| {
            let m_real = (s.m_bs * s.m_ms) as f64;
            let overhead = if l_c.is_infinite() { 0.0 } else { m_real / l_c };
            s.mean_rate * (1.0 - overhead).max(0.0)
        };
        let best = stats
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| {
                effective(a)
                    .partial_cmp(&effective(b))
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .map(|(i, _)| stats[i].m_requested)
            .expect("stats non-empty");
        for s in &stats {
            let m_real = (s.m_bs * s.m_ms) as f64;
            let overhead_factor = if l_c.is_infinite() {
                1.0
            } else {
                (1.0 - m_real / l_c).max(0.0)
            };
            let analytic = if s.p_hat >= target {
                s.mean_single * (1.0 - u / n_bs) * overhead_factor * (1.0 - cfg.epsilon)
            } else {
                f64::NAN
            };
            rows.push(CoherenceRow {
                coherence_symbols: l_c,
                m_requested: s.m_requested,
                m_bs: s.m_bs,
                m_ms: s.m_ms,
                m_realized: s.m_bs * s.m_ms,
                n_trials: s.n_trials,
                p_success: s.p_hat,
                mean_rate_per_user: s.mean_rate,
                stderr_rate: s.stderr,
                effective_rate: s.mean_rate * overhead_factor,
                analytic_bound: analytic,
                best_m_for_lc: best,
            });
        }
    }
    Ok(CoherenceSweepTable {
        metadata: metadata(cfg),
        rows,
    })
}

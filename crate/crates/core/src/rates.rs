//! Conjugate analog beamforming from estimated angles, exact SINR rates,
//! the indicator-form rate, and the analytical lower bounds.
//!
//! The indicator rate for user `u` is
//! `log2(1 + 1{aoa and aod correct} / (1{aoa correct} * sum_{r != u} 1{aod_u
//! == aod_hat_r} + 1/((SNR/U) N_BS N_MS |alpha_u|^2)))`, with the
//! interference sum over the *other* users; under on-grid angles and virtual
//! (DFT) dictionaries it coincides with the physical SINR rate.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::array::{steering_vector, AngleGrid, ArrayGeometry};
use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::recovery::SupportEstimate;

/// Analog precoder columns and per-user combiners.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingSolution {
    /// BS precoder columns, one unit-norm steering vector per user.
    pub precoder_columns: Vec<Array1<Complex64>>,
    /// MS combiners, one unit-norm steering vector per user.
    pub combiners: Vec<Array1<Complex64>>,
    /// AoD index feedback cost per user, `ceil(log2(G_BS))`.
    pub fed_back_bits_per_user: usize,
}

impl BeamformingSolution {
    pub fn n_users(&self) -> usize {
        self.precoder_columns.len()
    }
}

/// Per-user achievable rates for one channel draw.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub per_user_rate_bps_hz: Vec<f64>,
    pub single_user_rate_bps_hz: Vec<f64>,
    pub sum_rate_bps_hz: f64,
}

fn ceil_log2(n: usize) -> usize {
    n.next_power_of_two().trailing_zeros() as usize
}

/// Snap each entry's phase to the nearest of `2^bits` quantized angles,
/// keeping the constant modulus.
fn requantize_phases(v: &mut Array1<Complex64>, bits: u32) {
    let levels = (1u64 << bits) as f64;
    let step = std::f64::consts::TAU / levels;
    for z in v.iter_mut() {
        let mag = z.norm();
        let phase = (z.arg() / step).round() * step;
        *z = Complex64::from_polar(mag, phase);
    }
}

/// Build conjugate beamformers directly from angles: combiner `u` is the MS
/// steering vector at `aoas[u]`, precoder column `u` the BS steering vector
/// at `aods[u]`. `precoder_phase_bits` optionally re-quantizes the precoder
/// phases to model coarse phase shifters.
pub fn conjugate_beamformers_from_angles(
    aoas: &[f64],
    aods: &[f64],
    bs_geometry: &ArrayGeometry,
    ms_geometry: &ArrayGeometry,
    g_bs: usize,
    precoder_phase_bits: Option<u32>,
) -> Result<BeamformingSolution> {
    if aoas.len() != aods.len() || aoas.is_empty() {
        return Err(Error::InvalidInput(
            "need one AoA and one AoD per user".into(),
        ));
    }
    let combiners = aoas
        .iter()
        .map(|&a| steering_vector(ms_geometry, a).entries)
        .collect();
    let precoder_columns = aods
        .iter()
        .map(|&a| {
            let mut f = steering_vector(bs_geometry, a).entries;
            if let Some(bits) = precoder_phase_bits {
                requantize_phases(&mut f, bits);
            }
            f
        })
        .collect();
    Ok(BeamformingSolution {
        precoder_columns,
        combiners,
        fed_back_bits_per_user: ceil_log2(g_bs),
    })
}

/// Conjugate beamformers from support estimates: each user's combiner points
/// at its estimated AoA grid point and its precoder column at the estimated
/// (fed-back) AoD grid point.
pub fn conjugate_beamformers(
    estimates: &[SupportEstimate],
    bs_grid: &AngleGrid,
    ms_grid: &AngleGrid,
    bs_geometry: &ArrayGeometry,
    ms_geometry: &ArrayGeometry,
    precoder_phase_bits: Option<u32>,
) -> Result<BeamformingSolution> {
    let mut aoas = Vec::with_capacity(estimates.len());
    let mut aods = Vec::with_capacity(estimates.len());
    for (u, est) in estimates.iter().enumerate() {
        let Some(atom) = est.atoms.first() else {
            return Err(Error::InvalidInput(format!("user {u}: empty estimate")));
        };
        if atom.aoa_index >= ms_grid.size() || atom.aod_index >= bs_grid.size() {
            return Err(Error::InvalidInput(format!(
                "user {u}: atom ({}, {}) outside grids ({}, {})",
                atom.aoa_index,
                atom.aod_index,
                ms_grid.size(),
                bs_grid.size()
            )));
        }
        aoas.push(ms_grid.point(atom.aoa_index));
        aods.push(bs_grid.point(atom.aod_index));
    }
    conjugate_beamformers_from_angles(
        &aoas,
        &aods,
        bs_geometry,
        ms_geometry,
        bs_grid.size(),
        precoder_phase_bits,
    )
}

fn bilinear(w: &Array1<Complex64>, h: &Array2<Complex64>, f: &Array1<Complex64>) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..h.nrows() {
        let wc = w[i].conj();
        let mut row = Complex64::new(0.0, 0.0);
        for j in 0..h.ncols() {
            row += h[(i, j)] * f[j];
        }
        acc += wc * row;
    }
    acc
}

/// Exact Gaussian-signaling SINR rate of user `u` under the given solution:
/// `log2(1 + (P_T/U)|w^H H f_u|^2 / (sigma^2 ||w||^2 + (P_T/U) sum_{r!=u}
/// |w^H H f_r|^2))`.
pub fn sinr_rate(
    h_u: &Array2<Complex64>,
    solution: &BeamformingSolution,
    u: usize,
    total_power_w: f64,
    noise_power_w: f64,
) -> Result<f64> {
    let n_users = solution.n_users();
    if u >= n_users {
        return Err(Error::InvalidInput(format!(
            "user index {u} out of range for {n_users} users"
        )));
    }
    if !(noise_power_w > 0.0) {
        return Err(Error::InvalidInput(
            "sinr_rate needs positive noise power".into(),
        ));
    }
    let w = &solution.combiners[u];
    if w.len() != h_u.nrows() || solution.precoder_columns[u].len() != h_u.ncols() {
        return Err(Error::Dimension(format!(
            "channel is {}x{}, combiner has {} entries, precoder {}",
            h_u.nrows(),
            h_u.ncols(),
            w.len(),
            solution.precoder_columns[u].len()
        )));
    }
    let per_stream = total_power_w / n_users as f64;
    let desired = bilinear(w, h_u, &solution.precoder_columns[u]).norm_sqr();
    let mut interference = 0.0;
    for (r, f) in solution.precoder_columns.iter().enumerate() {
        if r != u {
            interference += bilinear(w, h_u, f).norm_sqr();
        }
    }
    let w_norm_sqr: f64 = w.iter().map(|z| z.norm_sqr()).sum();
    let sinr = per_stream * desired / (noise_power_w * w_norm_sqr + per_stream * interference);
    Ok((1.0 + sinr).log2())
}

/// Indicator-form rate of user `u` under on-grid angles and virtual
/// dictionaries; `estimates` must hold every user's dominant atom.
pub fn indicator_rate(
    truth_u: &ChannelRealization,
    estimates: &[SupportEstimate],
    u: usize,
    snr: f64,
    n_bs: usize,
    n_ms: usize,
) -> Result<f64> {
    let n_users = estimates.len();
    if u >= n_users {
        return Err(Error::InvalidInput(format!(
            "user index {u} out of range for {n_users} users"
        )));
    }
    let (Some(aoa_idx), Some(aod_idx)) = (truth_u.aoa_grid_index, truth_u.aod_grid_index) else {
        return Err(Error::InvalidInput(
            "indicator rate requires on-grid truth".into(),
        ));
    };
    let atom_of = |e: &SupportEstimate| -> Result<(usize, usize)> {
        e.atoms
            .first()
            .map(|a| (a.aoa_index, a.aod_index))
            .ok_or_else(|| Error::InvalidInput("empty estimate".into()))
    };
    let (est_aoa, est_aod) = atom_of(&estimates[u])?;
    let aoa_ok = est_aoa == aoa_idx;
    let both_ok = aoa_ok && est_aod == aod_idx;

    let mut collisions = 0usize;
    for (r, est) in estimates.iter().enumerate() {
        if r == u {
            continue;
        }
        let (_, aod_r) = atom_of(est)?;
        if aod_r == aod_idx {
            collisions += 1;
        }
    }
    let gain_sqr = truth_u.gain.norm_sqr();
    let effective = (snr / n_users as f64) * (n_bs * n_ms) as f64 * gain_sqr;
    if effective == 0.0 {
        return Ok(0.0);
    }
    let numerator = if both_ok { 1.0 } else { 0.0 };
    let denominator = if aoa_ok { collisions as f64 } else { 0.0 } + 1.0 / effective;
    Ok((1.0 + numerator / denominator).log2())
}

/// Interference-free single-user rate
/// `log2(1 + (SNR/U) N_BS N_MS |alpha|^2)`.
pub fn single_user_rate(
    gain: Complex64,
    snr: f64,
    n_users: usize,
    n_bs: usize,
    n_ms: usize,
) -> f64 {
    let effective = (snr / n_users as f64) * (n_bs * n_ms) as f64 * gain.norm_sqr();
    (1.0 + effective).log2()
}

/// Average-rate lower bound `R_single * (1 - U/N_BS) * p_success`.
pub fn rate_lower_bound(
    r_single: f64,
    n_users: usize,
    n_bs: usize,
    p_success: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_success) {
        return Err(Error::InvalidInput(format!(
            "p_success must lie in [0, 1], got {p_success}"
        )));
    }
    if n_users > n_bs {
        return Err(Error::InvalidInput(format!(
            "bound requires U <= N_BS, got U={n_users}, N_BS={n_bs}"
        )));
    }
    Ok(r_single * (1.0 - n_users as f64 / n_bs as f64) * p_success)
}

/// Effective-rate lower bound with training overhead:
/// `R_single * (1 - U/N_BS) * (1 - M_eps/L_C) * (1 - eps)`.
///
/// `l_c` may be `f64::INFINITY` (no overhead). With `clamp` set, an overhead
/// exceeding the coherence block yields 0 instead of an error.
pub fn effective_rate(
    r_single: f64,
    n_users: usize,
    n_bs: usize,
    m_eps: f64,
    l_c: f64,
    eps: f64,
    clamp: bool,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidInput(format!(
            "eps must lie in [0, 1], got {eps}"
        )));
    }
    if m_eps < 0.0 || l_c <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "need m_eps >= 0 and l_c > 0, got m_eps={m_eps}, l_c={l_c}"
        )));
    }
    if n_users > n_bs {
        return Err(Error::InvalidInput(format!(
            "bound requires U <= N_BS, got U={n_users}, N_BS={n_bs}"
        )));
    }
    let overhead = if l_c.is_infinite() { 0.0 } else { m_eps / l_c };
    if overhead > 1.0 && !clamp {
        return Err(Error::InvalidInput(format!(
            "training ({m_eps} symbols) exceeds the coherence block ({l_c}); pass clamp to floor at zero"
        )));
    }
    let factor = (1.0 - overhead).max(0.0);
    Ok(r_single * (1.0 - n_users as f64 / n_bs as f64) * factor * (1.0 - eps))
}

/// Evaluate SINR rates and single-user references for every user.
pub fn rate_report(
    channels: &[Array2<Complex64>],
    truths: &[ChannelRealization],
    solution: &BeamformingSolution,
    total_power_w: f64,
    noise_power_w: f64,
    snr: f64,
    n_bs: usize,
    n_ms: usize,
) -> Result<RateReport> {
    let n_users = solution.n_users();
    if channels.len() != n_users || truths.len() != n_users {
        return Err(Error::Dimension(format!(
            "expected {n_users} channels and truths, got {} and {}",
            channels.len(),
            truths.len()
        )));
    }
    let mut per_user = Vec::with_capacity(n_users);
    let mut single = Vec::with_capacity(n_users);
    for u in 0..n_users {
        per_user.push(sinr_rate(
            &channels[u],
            solution,
            u,
            total_power_w,
            noise_power_w,
        )?);
        single.push(single_user_rate(truths[u].gain, snr, n_users, n_bs, n_ms));
    }
    let sum = per_user.iter().sum();
    Ok(RateReport {
        per_user_rate_bps_hz: per_user,
        single_user_rate_bps_hz: single,
        sum_rate_bps_hz: sum,
    })
}

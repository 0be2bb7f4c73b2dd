//! Single-path geometric channel generation and link-budget bookkeeping.
//!
//! The channel between the BS and user `u` is the rank-1 matrix
//! `H_u = sqrt(N_BS * N_MS) * alpha_u * a_MS(theta_u) * a_BS(phi_u)^H`,
//! with the path loss carried inside `alpha_u`. SNR throughout the crate is
//! transmit SNR, `P_T / sigma^2`.

use std::f64::consts::{FRAC_PI_2, TAU};

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::array::{steering_vector, virtual_grid, ArrayGeometry};
use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

/// Carrier, bandwidth, geometry distance, and power figures for one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub carrier_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub distance_m: f64,
    pub tx_power_dbm: f64,
    pub noise_figure_db: f64,
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_frequency_hz", self.carrier_frequency_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("distance_m", self.distance_m),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.tx_power_dbm.is_finite() {
            return Err(Error::Config("tx_power_dbm must be finite".into()));
        }
        if self.noise_figure_db < 0.0 || !self.noise_figure_db.is_finite() {
            return Err(Error::Config(format!(
                "noise_figure_db must be non-negative, got {}",
                self.noise_figure_db
            )));
        }
        Ok(())
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT_M_S / self.carrier_frequency_hz
    }

    pub fn tx_power_w(&self) -> f64 {
        10f64.powf((self.tx_power_dbm - 30.0) / 10.0)
    }
}

/// Path-gain statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainModel {
    /// Constant-magnitude LOS gain with a uniformly random phase.
    ConstantLos,
    /// Circularly-symmetric complex Gaussian gain with `E[|alpha|^2]`
    /// matching the LOS path gain squared.
    ComplexGaussian,
}

/// How user angles are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngleModel {
    /// AoA/AoD drawn uniformly from the virtual grids; grid indices recorded.
    OnGrid,
    /// AoA/AoD drawn uniformly over the visible range `[-pi/2, pi/2)`.
    Continuous,
}

/// Channel-generation configuration for all users of one cell.
#[derive(Debug, Clone)]
pub struct ChannelConfig {
    pub bs_geometry: ArrayGeometry,
    pub ms_geometry: ArrayGeometry,
    pub n_users: usize,
    pub rf_chains: usize,
    pub link: LinkBudget,
    pub gain_model: GainModel,
    pub angle_model: AngleModel,
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        self.link.validate()?;
        if self.n_users == 0 {
            return Err(Error::Config("n_users must be at least 1".into()));
        }
        if self.n_users > self.rf_chains {
            return Err(Error::Config(format!(
                "n_users ({}) exceeds rf_chains ({}); the BS serves at most one user per RF chain",
                self.n_users, self.rf_chains
            )));
        }
        Ok(())
    }
}

/// One user's channel draw: complex gain (path loss included), AoA, AoD,
/// and grid indices when the angles were drawn on-grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRealization {
    pub gain: Complex64,
    pub aoa: f64,
    pub aod: f64,
    pub aoa_grid_index: Option<usize>,
    pub aod_grid_index: Option<usize>,
}

/// Thermal noise power in watts: `-174 dBm/Hz + 10*log10(BW) + NF`.
pub fn noise_power(link: &LinkBudget) -> f64 {
    let dbm = -174.0 + 10.0 * link.bandwidth_hz.log10() + link.noise_figure_db;
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Free-space LOS path-gain magnitude: `10^(-FSPL_dB/20)` with
/// `FSPL_dB = 20*log10(4*pi*d/lambda)`.
pub fn los_path_gain(link: &LinkBudget) -> f64 {
    let fspl_db = 20.0 * (4.0 * std::f64::consts::PI * link.distance_m / link.wavelength_m()).log10();
    10f64.powf(-fspl_db / 20.0)
}

/// Transmit SNR: total transmit power over noise power, linear.
pub fn nominal_snr(link: &LinkBudget) -> f64 {
    link.tx_power_w() / noise_power(link)
}

/// Draw one channel realization per user.
///
/// Draw order is fixed (per user: AoA, AoD, gain) so that identical seeds
/// give bit-identical realizations.
pub fn sample_channel<R: Rng>(
    config: &ChannelConfig,
    rng: &mut R,
) -> Result<Vec<ChannelRealization>> {
    config.validate()?;
    let magnitude = los_path_gain(&config.link);
    let (bs_grid, ms_grid) = match config.angle_model {
        AngleModel::OnGrid => (
            Some(virtual_grid(&config.bs_geometry)?),
            Some(virtual_grid(&config.ms_geometry)?),
        ),
        AngleModel::Continuous => (None, None),
    };

    let mut users = Vec::with_capacity(config.n_users);
    for _ in 0..config.n_users {
        let (aoa, aod, aoa_idx, aod_idx) = match config.angle_model {
            AngleModel::OnGrid => {
                let ms = ms_grid.as_ref().expect("grid built above");
                let bs = bs_grid.as_ref().expect("grid built above");
                let l = rng.random_range(0..ms.size());
                let k = rng.random_range(0..bs.size());
                (ms.point(l), bs.point(k), Some(l), Some(k))
            }
            AngleModel::Continuous => {
                let aoa = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
                let aod = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
                (aoa, aod, None, None)
            }
        };
        let gain = match config.gain_model {
            GainModel::ConstantLos => {
                let phase = rng.random_range(0.0..TAU);
                Complex64::from_polar(magnitude, phase)
            }
            GainModel::ComplexGaussian => {
                let s = magnitude / 2f64.sqrt();
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(s * re, s * im)
            }
        };
        users.push(ChannelRealization {
            gain,
            aoa,
            aod,
            aoa_grid_index: aoa_idx,
            aod_grid_index: aod_idx,
        });
    }
    Ok(users)
}

/// Rank-1 channel matrix `sqrt(N_BS*N_MS) * alpha * a_MS(aoa) * a_BS(aod)^H`,
/// shape `N_MS x N_BS`.
pub fn channel_matrix(
    real: &ChannelRealization,
    bs: &ArrayGeometry,
    ms: &ArrayGeometry,
) -> Array2<Complex64> {
    let a_ms = steering_vector(ms, real.aoa);
    let a_bs = steering_vector(bs, real.aod);
    let scale = ((bs.n_antennas() * ms.n_antennas()) as f64).sqrt() * real.gain;
    let mut h = Array2::zeros((ms.n_antennas(), bs.n_antennas()));
    for i in 0..ms.n_antennas() {
        for j in 0..bs.n_antennas() {
            h[(i, j)] = scale * a_ms.entries[i] * a_bs.entries[j].conj();
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn paper_link() -> LinkBudget {
        LinkBudget {
            carrier_frequency_hz: 28e9,
            bandwidth_hz: 50e6,
            distance_m: 500.0,
            tx_power_dbm: 37.0,
            noise_figure_db: 0.0,
        }
    }

    fn small_config(angle_model: AngleModel, gain_model: GainModel) -> ChannelConfig {
        ChannelConfig {
            bs_geometry: ArrayGeometry::half_wavelength(8).unwrap(),
            ms_geometry: ArrayGeometry::half_wavelength(4).unwrap(),
            n_users: 4,
            rf_chains: 4,
            link: paper_link(),
            gain_model,
            angle_model,
        }
    }

    #[test]
    fn noise_power_50mhz_matches_thermal_formula() {
        // Oracle: independent evaluation of the -174 dBm/Hz floor.
        let w = noise_power(&paper_link());
        let oracle_dbm = -174.0 + 10.0 * 5e7f64.log10();
        let oracle_w = 10f64.powf((oracle_dbm - 30.0) / 10.0);
        assert!((oracle_dbm + 97.0103).abs() < 1e-3);
        assert!(((w - oracle_w) / oracle_w).abs() < 1e-12);
        assert!((w - 1.9905e-13).abs() < 1e-16);
    }

    #[test]
    fn noise_power_1hz_is_thermal_floor() {
        let mut link = paper_link();
        link.bandwidth_hz = 1.0;
        let w = noise_power(&link);
        assert!(((w - 10f64.powf((-174.0 - 30.0) / 10.0)) / w).abs() < 1e-12);
    }

    #[test]
    fn noise_figure_is_additive() {
        let mut link = paper_link();
        link.noise_figure_db = 5.0;
        let ratio = noise_power(&link) / noise_power(&paper_link());
        assert!((10.0 * ratio.log10() - 5.0).abs() < 1e-9);
    }

    #[test]
    fn los_path_gain_paper_budget() {
        // Oracle: FSPL via the alternative 20*log10(4*pi*d*f/c) route.
        let link = paper_link();
        let g = los_path_gain(&link);
        let fspl_db =
            20.0 * (4.0 * std::f64::consts::PI * 500.0 * 28e9 / SPEED_OF_LIGHT_M_S).log10();
        assert!((fspl_db - 115.370344).abs() < 1e-5);
        let oracle = 10f64.powf(-fspl_db / 20.0);
        assert!(((g - oracle) / oracle).abs() < 1e-12);
        assert!((g - 1.70405e-6).abs() < 1e-10);
    }

    #[test]
    fn los_path_gain_zero_point_and_doubling() {
        let mut link = paper_link();
        link.distance_m = link.wavelength_m() / (4.0 * std::f64::consts::PI);
        assert!((los_path_gain(&link) - 1.0).abs() < 1e-12);
        link.distance_m *= 2.0;
        assert!((los_path_gain(&link) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn nominal_snr_paper_budget() {
        let link = paper_link();
        let snr = nominal_snr(&link);
        // Oracle: dB arithmetic, 37 dBm - (-97.0103 dBm).
        let db = 10.0 * snr.log10();
        assert!((db - 134.0103).abs() < 1e-3);
        assert!((snr - 2.51785e13).abs() / snr < 1e-4);
    }

    #[test]
    fn nominal_snr_unit_and_3db() {
        let mut link = paper_link();
        link.tx_power_dbm = 10.0 * noise_power(&link).log10() + 30.0;
        assert!((nominal_snr(&link) - 1.0).abs() < 1e-9);
        link.tx_power_dbm += 3.0;
        assert!((nominal_snr(&link) - 10f64.powf(0.3)).abs() < 1e-3);
    }

    #[test]
    fn sample_channel_on_grid_is_reproducible_and_in_range() {
        let cfg = small_config(AngleModel::OnGrid, GainModel::ConstantLos);
        let a = sample_channel(&cfg, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = sample_channel(&cfg, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        let bs_grid = virtual_grid(&cfg.bs_geometry).unwrap();
        let ms_grid = virtual_grid(&cfg.ms_geometry).unwrap();
        for r in &a {
            let l = r.aoa_grid_index.unwrap();
            let k = r.aod_grid_index.unwrap();
            assert!(l < 4 && k < 8);
            assert_eq!(r.aoa, ms_grid.point(l));
            assert_eq!(r.aod, bs_grid.point(k));
        }
    }

    #[test]
    fn constant_los_magnitude_is_exact() {
        let cfg = small_config(AngleModel::OnGrid, GainModel::ConstantLos);
        let users = sample_channel(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let expect = los_path_gain(&cfg.link);
        for u in &users {
            assert!((u.gain.norm() - expect).abs() < 1e-18);
        }
    }

    #[test]
    fn continuous_angles_have_no_indices() {
        let cfg = small_config(AngleModel::Continuous, GainModel::ConstantLos);
        let users = sample_channel(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        for u in &users {
            assert!(u.aoa_grid_index.is_none() && u.aod_grid_index.is_none());
            assert!(u.aoa.abs() <= FRAC_PI_2 && u.aod.abs() <= FRAC_PI_2);
        }
    }

    #[test]
    fn complex_gaussian_second_moment() {
        // Law-of-large-numbers check on E[|alpha|^2] = los_path_gain^2.
        let mut cfg = small_config(AngleModel::OnGrid, GainModel::ComplexGaussian);
        cfg.n_users = 1;
        let target = los_path_gain(&cfg.link).powi(2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let u = sample_channel(&cfg, &mut rng).unwrap();
            acc += u[0].gain.norm_sqr();
        }
        let mean = acc / n as f64;
        assert!(
            (mean - target).abs() / target < 0.03,
            "empirical {mean}, target {target}"
        );
    }

    #[test]
    fn channel_matrix_norm_identity_and_bilinear_gain() {
        let bs = ArrayGeometry::half_wavelength(64).unwrap();
        let ms = ArrayGeometry::half_wavelength(32).unwrap();
        let real = ChannelRealization {
            gain: Complex64::new(1.0, 0.0),
            aoa: 0.31,
            aod: -0.7,
            aoa_grid_index: None,
            aod_grid_index: None,
        };
        let h = channel_matrix(&real, &bs, &ms);
        let fro: f64 = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!((fro - 2048f64.sqrt()).abs() < 1e-9);

        // a_MS(aoa)^H H a_BS(aod) = sqrt(N_BS N_MS) alpha at the true angles.
        let a_ms = steering_vector(&ms, real.aoa);
        let a_bs = steering_vector(&bs, real.aod);
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..32 {
            for j in 0..64 {
                acc += a_ms.entries[i].conj() * h[(i, j)] * a_bs.entries[j];
            }
        }
        assert!((acc - Complex64::new(2048f64.sqrt(), 0.0)).norm() < 1e-9);
    }

    #[test]
    fn channel_matrix_zero_gain() {
        let bs = ArrayGeometry::half_wavelength(4).unwrap();
        let ms = ArrayGeometry::half_wavelength(2).unwrap();
        let real = ChannelRealization {
            gain: Complex64::new(0.0, 0.0),
            aoa: 0.1,
            aod: 0.2,
            aoa_grid_index: None,
            aod_grid_index: None,
        };
        let h = channel_matrix(&real, &bs, &ms);
        assert!(h.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn channel_matrix_is_numerically_rank_one() {
        // sigma_1 from power iteration; residual energy bounds sigma_2.
        let bs = ArrayGeometry::half_wavelength(16).unwrap();
        let ms = ArrayGeometry::half_wavelength(8).unwrap();
        let real = ChannelRealization {
            gain: Complex64::new(0.4, -0.9),
            aoa: 0.83,
            aod: -1.2,
            aoa_grid_index: None,
            aod_grid_index: None,
        };
        let h = channel_matrix(&real, &bs, &ms);
        let fro2: f64 = h.iter().map(|z| z.norm_sqr()).sum();
        // Power iteration on H^H H.
        let mut v: Vec<Complex64> = (0..16).map(|i| Complex64::new(1.0 + i as f64, 0.3)).collect();
        let mut sigma2_max = 0.0;
        for _ in 0..50 {
            // w = H v
            let mut w = vec![Complex64::new(0.0, 0.0); 8];
            for i in 0..8 {
                for j in 0..16 {
                    w[i] += h[(i, j)] * v[j];
                }
            }
            // v = H^H w
            let mut nv = vec![Complex64::new(0.0, 0.0); 16];
            for j in 0..16 {
                for i in 0..8 {
                    nv[j] += h[(i, j)].conj() * w[i];
                }
            }
            let norm: f64 = nv.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            sigma2_max = norm.sqrt();
            for z in nv.iter_mut() {
                *z /= norm;
            }
            v = nv;
        }
        let sigma1_sq = sigma2_max * sigma2_max;
        let residual = (fro2 - sigma1_sq).max(0.0).sqrt();
        assert!(residual < 1e-9 * sigma2_max, "sigma_2 bound {residual}");
    }

    #[test]
    fn rejects_more_users_than_rf_chains() {
        let mut cfg = small_config(AngleModel::OnGrid, GainModel::ConstantLos);
        cfg.n_users = 5;
        assert!(matches!(
            sample_channel(&cfg, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::Config(_))
        ));
    }
}

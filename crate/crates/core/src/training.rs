//! Random quantized-phase training, measurement synthesis, and the
//! Kronecker-factored sensing operator.
//!
//! The full sensing operator `Theta = (P^T A_BS^*) kron (Q^H A_MS)` is stored
//! as its two factors and never materialized densely; the mixed-product
//! identity `(P^T kron Q^H)(A_BS^* kron A_MS) = (P^T A_BS^*) kron (Q^H A_MS)`
//! makes the factors sufficient for correlation and column extraction.
//!
//! Vectorization is column-major throughout: `y[m*M_MS + n]` is the sample
//! taken with the `n`-th combiner during the `m`-th training beam, which is
//! the ordering under which `Phi = P^T kron Q^H` holds.

use std::f64::consts::TAU;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{conj_transpose, vec_col_major};

/// Training-phase shape and power knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingConfig {
    /// Number of BS training beams (M_BS).
    pub m_bs: usize,
    /// Number of MS combining vectors per beam (M_MS).
    pub m_ms: usize,
    /// BS phase-shifter resolution in bits.
    pub nq_bs: u32,
    /// MS phase-shifter resolution in bits.
    pub nq_ms: u32,
    /// Average power per training symbol, watts.
    pub training_power_w: f64,
    /// Scale training columns by 1/sqrt(N) so each radiates unit power.
    pub normalize_columns: bool,
}

impl TrainingConfig {
    pub fn total_measurements(&self) -> usize {
        self.m_bs * self.m_ms
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_bs == 0 || self.m_ms == 0 {
            return Err(Error::Config(
                "m_bs and m_ms must both be at least 1".into(),
            ));
        }
        if self.nq_bs == 0 || self.nq_ms == 0 {
            return Err(Error::Config(
                "phase quantization needs at least 1 bit".into(),
            ));
        }
        if !(self.training_power_w > 0.0) || !self.training_power_w.is_finite() {
            return Err(Error::Config(format!(
                "training_power_w must be positive, got {}",
                self.training_power_w
            )));
        }
        Ok(())
    }
}

/// The structured operator `Theta` stored as its Kronecker factors.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingOperator {
    /// `P^T A_BS^*`, shape M_BS x G_BS.
    pub bs_factor: Array2<Complex64>,
    /// `Q^H A_MS`, shape M_MS x G_MS.
    pub ms_factor: Array2<Complex64>,
}

impl SensingOperator {
    pub fn m_bs(&self) -> usize {
        self.bs_factor.nrows()
    }

    pub fn m_ms(&self) -> usize {
        self.ms_factor.nrows()
    }

    pub fn g_bs(&self) -> usize {
        self.bs_factor.ncols()
    }

    pub fn g_ms(&self) -> usize {
        self.ms_factor.ncols()
    }

    /// Rows of the implied dense operator (total measurements).
    pub fn n_measurements(&self) -> usize {
        self.m_bs() * self.m_ms()
    }

    /// Columns of the implied dense operator (dictionary atoms).
    pub fn n_atoms(&self) -> usize {
        self.g_bs() * self.g_ms()
    }

    /// Dense column for atom `(aoa_index, aod_index)`: the Kronecker product
    /// of BS column `aod_index` with MS column `aoa_index`.
    pub fn column(&self, aoa_index: usize, aod_index: usize) -> Array1<Complex64> {
        let m_ms = self.m_ms();
        let mut col = Array1::zeros(self.n_measurements());
        for m in 0..self.m_bs() {
            let b = self.bs_factor[(m, aod_index)];
            for n in 0..m_ms {
                col[m * m_ms + n] = b * self.ms_factor[(n, aoa_index)];
            }
        }
        col
    }

    pub fn is_zero(&self) -> bool {
        self.bs_factor.iter().all(|z| z.norm_sqr() == 0.0)
            || self.ms_factor.iter().all(|z| z.norm_sqr() == 0.0)
    }
}

/// One user's vectorized training observation paired with the operator that
/// explains it.
#[derive(Debug, Clone)]
pub struct MeasurementRecord {
    pub y: Array1<Complex64>,
    pub operator: SensingOperator,
    pub noise_power_w: f64,
}

impl MeasurementRecord {
    pub fn new(
        y: Array1<Complex64>,
        operator: SensingOperator,
        noise_power_w: f64,
    ) -> Result<Self> {
        if y.len() != operator.n_measurements() {
            return Err(Error::Dimension(format!(
                "measurement vector has length {}, operator implies {}",
                y.len(),
                operator.n_measurements()
            )));
        }
        if noise_power_w < 0.0 || !noise_power_w.is_finite() {
            return Err(Error::InvalidInput(format!(
                "noise power must be non-negative, got {noise_power_w}"
            )));
        }
        Ok(Self {
            y,
            operator,
            noise_power_w,
        })
    }
}

/// Random training matrix with entries `e^{j*zeta}`, `zeta` drawn uniformly
/// from the `2^nq_bits`-point quantized phase set; columns are scaled by
/// `1/sqrt(n_antennas)` when `normalize` is set.
///
/// Entries are drawn column by column.
pub fn gen_training_matrix<R: Rng>(
    n_antennas: usize,
    n_vectors: usize,
    nq_bits: u32,
    normalize: bool,
    rng: &mut R,
) -> Result<Array2<Complex64>> {
    if n_antennas == 0 || n_vectors == 0 {
        return Err(Error::Config("training matrix must be non-empty".into()));
    }
    if nq_bits == 0 || nq_bits > 31 {
        return Err(Error::Config(format!(
            "phase quantization bits must be in 1..=31, got {nq_bits}"
        )));
    }
    let levels = 1u32 << nq_bits;
    let scale = if normalize {
        1.0 / (n_antennas as f64).sqrt()
    } else {
        1.0
    };
    let mut out = Array2::zeros((n_antennas, n_vectors));
    for c in 0..n_vectors {
        for r in 0..n_antennas {
            let k = rng.random_range(0..levels);
            out[(r, c)] = Complex64::from_polar(scale, TAU * k as f64 / levels as f64);
        }
    }
    Ok(out)
}

/// Synthesize the vectorized training observation
/// `y = vec(sqrt(P) * Q^H H P + Q^H N_raw)` for one user.
///
/// `N_raw` is `N_MS x M_BS` with i.i.d. circularly-symmetric complex Gaussian
/// entries of variance `noise_power_w` (drawn column by column, real part
/// first); passing `noise_power_w == 0` skips noise generation entirely and
/// consumes no randomness.
pub fn synthesize_measurements<R: Rng>(
    h: &Array2<Complex64>,
    p_mat: &Array2<Complex64>,
    q_mat: &Array2<Complex64>,
    training_power_w: f64,
    noise_power_w: f64,
    rng: &mut R,
) -> Result<Array1<Complex64>> {
    let (n_ms, n_bs) = h.dim();
    if p_mat.nrows() != n_bs {
        return Err(Error::Dimension(format!(
            "P has {} rows, channel has {} BS antennas",
            p_mat.nrows(),
            n_bs
        )));
    }
    if q_mat.nrows() != n_ms {
        return Err(Error::Dimension(format!(
            "Q has {} rows, channel has {} MS antennas",
            q_mat.nrows(),
            n_ms
        )));
    }
    if !(training_power_w > 0.0) {
        return Err(Error::InvalidInput(format!(
            "training power must be positive, got {training_power_w}"
        )));
    }
    if noise_power_w < 0.0 {
        return Err(Error::InvalidInput(format!(
            "noise power must be non-negative, got {noise_power_w}"
        )));
    }
    let qh = conj_transpose(q_mat);
    let mut y_mat = qh.dot(h).dot(p_mat);
    let amp = Complex64::new(training_power_w.sqrt(), 0.0);
    y_mat.mapv_inplace(|z| amp * z);

    if noise_power_w > 0.0 {
        let m_bs = p_mat.ncols();
        let s = (noise_power_w / 2.0).sqrt();
        let mut n_raw = Array2::zeros((n_ms, m_bs));
        for c in 0..m_bs {
            for r in 0..n_ms {
                let re: f64 = rng.sample(rand_distr::StandardNormal);
                let im: f64 = rng.sample(rand_distr::StandardNormal);
                n_raw[(r, c)] = Complex64::new(s * re, s * im);
            }
        }
        y_mat = y_mat + qh.dot(&n_raw);
    }
    Ok(vec_col_major(&y_mat))
}

/// Build the Kronecker factors `P^T A_BS^*` and `Q^H A_MS` of the sensing
/// operator.
pub fn build_sensing_operator(
    p_mat: &Array2<Complex64>,
    q_mat: &Array2<Complex64>,
    a_bs: &Array2<Complex64>,
    a_ms: &Array2<Complex64>,
) -> Result<SensingOperator> {
    if p_mat.nrows() != a_bs.nrows() {
        return Err(Error::Dimension(format!(
            "P has {} rows but the BS dictionary has {}",
            p_mat.nrows(),
            a_bs.nrows()
        )));
    }
    if q_mat.nrows() != a_ms.nrows() {
        return Err(Error::Dimension(format!(
            "Q has {} rows but the MS dictionary has {}",
            q_mat.nrows(),
            a_ms.nrows()
        )));
    }
    let bs_factor = p_mat.t().dot(&a_bs.mapv(|z| z.conj()));
    let ms_factor = conj_transpose(q_mat).dot(a_ms);
    Ok(SensingOperator {
        bs_factor,
        ms_factor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{dictionary, steering_vector, virtual_grid, ArrayGeometry};
    use crate::channel::{channel_matrix, ChannelRealization};
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Dense Kronecker product, used as an independent oracle.
    fn kron(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
        let (ar, ac) = a.dim();
        let (br, bc) = b.dim();
        let mut out = Array2::zeros((ar * br, ac * bc));
        for i in 0..ar {
            for j in 0..ac {
                for k in 0..br {
                    for l in 0..bc {
                        out[(i * br + k, j * bc + l)] = a[(i, j)] * b[(k, l)];
                    }
                }
            }
        }
        out
    }

    #[test]
    fn training_entries_one_bit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = gen_training_matrix(5, 6, 1, false, &mut rng).unwrap();
        for &z in m.iter() {
            assert!(z.im.abs() < 1e-15);
            assert!((z.re.abs() - 1.0).abs() < 1e-15);
        }
        let normed = gen_training_matrix(5, 6, 1, true, &mut rng).unwrap();
        for &z in normed.iter() {
            assert!((z.norm() - 1.0 / 5f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn training_entries_two_bits_phase_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = gen_training_matrix(8, 8, 2, false, &mut rng).unwrap();
        for &z in m.iter() {
            let phase = z.arg().rem_euclid(TAU);
            // Nearest multiple of pi/2; round-to-TAU aliases back to 0.
            let nearest = (phase / (TAU / 4.0)).round() * (TAU / 4.0);
            assert!((phase - nearest).abs() < 1e-12);
            assert!((z.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn training_phase_histogram_uniform() {
        // Chi-square oracle over the 16-bin phase histogram of 1e5 draws:
        // the statistic must stay below the df=15 critical value at
        // alpha=0.001 (37.70), and no bin may stray past 5 sigma.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let m = gen_training_matrix(100, 1000, 4, false, &mut rng).unwrap();
        let mut counts = [0usize; 16];
        for &z in m.iter() {
            let bin = (z.arg().rem_euclid(TAU) / (TAU / 16.0)).round() as usize % 16;
            counts[bin] += 1;
        }
        let expect = 100_000.0 / 16.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expect).powi(2) / expect)
            .sum();
        assert!(chi2 < 37.70, "chi-square statistic {chi2}");
        let sigma = (expect * (1.0 - 1.0 / 16.0)).sqrt();
        for (b, &c) in counts.iter().enumerate() {
            assert!(
                (c as f64 - expect).abs() < 5.0 * sigma,
                "bin {b}: {c} vs {expect}"
            );
        }
    }

    #[test]
    fn noiseless_on_grid_measurement_is_kron_column() {
        // Eq.-6 structure: y = sqrt(P) alpha sqrt(N_BS N_MS)
        //                      (P^T a_BS^*) kron (Q^H a_MS).
        let bs = ArrayGeometry::half_wavelength(8).unwrap();
        let ms = ArrayGeometry::half_wavelength(4).unwrap();
        let bs_grid = virtual_grid(&bs).unwrap();
        let ms_grid = virtual_grid(&ms).unwrap();
        let real = ChannelRealization {
            gain: Complex64::new(0.3, -0.4),
            aoa: ms_grid.point(2),
            aod: bs_grid.point(5),
            aoa_grid_index: Some(2),
            aod_grid_index: Some(5),
        };
        let h = channel_matrix(&real, &bs, &ms);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = gen_training_matrix(8, 6, 3, true, &mut rng).unwrap();
        let q = gen_training_matrix(4, 3, 3, true, &mut rng).unwrap();
        let power = 2.0;
        let y = synthesize_measurements(&h, &p, &q, power, 0.0, &mut rng).unwrap();

        let a_bs = steering_vector(&bs, real.aod);
        let a_ms = steering_vector(&ms, real.aoa);
        let bsv: Vec<Complex64> = (0..6)
            .map(|m| (0..8).map(|i| p[(i, m)] * a_bs.entries[i].conj()).sum())
            .collect();
        let msv: Vec<Complex64> = (0..3)
            .map(|n| (0..4).map(|i| q[(i, n)].conj() * a_ms.entries[i]).sum())
            .collect();
        let scale = Complex64::new(power.sqrt() * 32f64.sqrt(), 0.0) * real.gain;
        for m in 0..6 {
            for n in 0..3 {
                let expect = scale * bsv[m] * msv[n];
                assert!((y[m * 3 + n] - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn vec_identity_matches_dense_kronecker() {
        // Dense oracle: vec(Q^H H P) == (P^T kron Q^H) vec(H).
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n_bs = 8;
        let n_ms = 4;
        let m_bs = 6;
        let m_ms = 3;
        let mut rand_mat = |r: usize, c: usize| {
            Array2::from_shape_fn((r, c), |_| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            })
        };
        let h = rand_mat(n_ms, n_bs);
        let p = rand_mat(n_bs, m_bs);
        let q = rand_mat(n_ms, m_ms);
        let y = synthesize_measurements(&h, &p, &q, 1.0, 0.0, &mut rng).unwrap();

        let phi = kron(&p.t().to_owned(), &conj_transpose(&q));
        let vec_h = vec_col_major(&h);
        for (row, want) in phi.rows().into_iter().zip(y.iter()) {
            let got: Complex64 = row.iter().zip(vec_h.iter()).map(|(a, b)| a * b).sum();
            assert!((got - want).norm() < 1e-10);
        }
    }

    #[test]
    fn zero_channel_noise_only_is_zero_mean() {
        let h = Array2::zeros((4, 8));
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let p = gen_training_matrix(8, 4, 2, true, &mut rng).unwrap();
        let q = gen_training_matrix(4, 2, 2, true, &mut rng).unwrap();
        let trials = 4000;
        let mut acc = Complex64::new(0.0, 0.0);
        let mut power = 0.0;
        for _ in 0..trials {
            let y = synthesize_measurements(&h, &p, &q, 1.0, 1.0, &mut rng).unwrap();
            acc += y.iter().sum::<Complex64>();
            power += y.iter().map(|z| z.norm_sqr()).sum::<f64>() / y.len() as f64;
        }
        let mean = acc / Complex64::new((trials * 8) as f64, 0.0);
        assert!(mean.norm() < 0.02, "mean {mean}");
        // Normalized Q columns give unit-variance combined noise.
        let avg_power = power / trials as f64;
        assert!((avg_power - 1.0).abs() < 0.05, "avg power {avg_power}");
    }

    #[test]
    fn combined_noise_covariance_matches_gram() {
        // Covariance of vec(Q^H N_raw) is I_{M_BS} kron (Q^H Q) * sigma^2.
        let h = Array2::zeros((4, 8));
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let p = gen_training_matrix(8, 2, 2, true, &mut rng).unwrap();
        let q = gen_training_matrix(4, 3, 4, false, &mut rng).unwrap(); // non-orthonormal
        let sigma2 = 0.7;
        let trials = 20_000;
        let dim = 6;
        let mut cov = Array2::<Complex64>::zeros((dim, dim));
        for _ in 0..trials {
            let y = synthesize_measurements(&h, &p, &q, 1.0, sigma2, &mut rng).unwrap();
            for i in 0..dim {
                for j in 0..dim {
                    cov[(i, j)] += y[i] * y[j].conj();
                }
            }
        }
        cov.mapv_inplace(|z| z / trials as f64);
        let gram = conj_transpose(&q).dot(&q);
        let eye2 = Array2::from_shape_fn((2, 2), |(i, j)| {
            Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0)
        });
        let expect = kron(&eye2, &gram).mapv(|z| z * sigma2);
        for i in 0..dim {
            for j in 0..dim {
                assert!(
                    (cov[(i, j)] - expect[(i, j)]).norm() < 0.15,
                    "cov[{i},{j}] = {} vs {}",
                    cov[(i, j)],
                    expect[(i, j)]
                );
            }
        }
    }

    #[test]
    fn sensing_operator_factors_match_dense_product() {
        // Dense oracle: bs_factor kron ms_factor == (P^T kron Q^H)(A_BS^* kron A_MS).
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let bs = ArrayGeometry::half_wavelength(4).unwrap();
        let ms = ArrayGeometry::half_wavelength(2).unwrap();
        let a_bs = dictionary(&bs, &virtual_grid(&bs).unwrap());
        let a_ms = dictionary(&ms, &virtual_grid(&ms).unwrap());
        let p = gen_training_matrix(4, 3, 4, true, &mut rng).unwrap();
        let q = gen_training_matrix(2, 2, 4, true, &mut rng).unwrap();
        let op = build_sensing_operator(&p, &q, &a_bs, &a_ms).unwrap();

        let phi = kron(&p.t().to_owned(), &conj_transpose(&q));
        let psi = kron(&a_bs.mapv(|z| z.conj()), &a_ms);
        let dense = phi.dot(&psi);
        let structured = kron(&op.bs_factor, &op.ms_factor);
        assert_eq!(dense.dim(), structured.dim());
        for (a, b) in dense.iter().zip(structured.iter()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn dictionary_training_gives_identity_factors() {
        // P = A_BS and Q = A_MS on virtual grids invert the dictionaries.
        let bs = ArrayGeometry::half_wavelength(8).unwrap();
        let ms = ArrayGeometry::half_wavelength(4).unwrap();
        let a_bs = dictionary(&bs, &virtual_grid(&bs).unwrap());
        let a_ms = dictionary(&ms, &virtual_grid(&ms).unwrap());
        let op = build_sensing_operator(&a_bs, &a_ms, &a_bs, &a_ms).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((op.bs_factor[(i, j)] - target).norm() < 1e-10);
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((op.ms_factor[(i, j)] - target).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn single_measurement_operator_shape() {
        let bs = ArrayGeometry::half_wavelength(4).unwrap();
        let ms = ArrayGeometry::half_wavelength(2).unwrap();
        let a_bs = dictionary(&bs, &virtual_grid(&bs).unwrap());
        let a_ms = dictionary(&ms, &virtual_grid(&ms).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = gen_training_matrix(4, 1, 2, true, &mut rng).unwrap();
        let q = gen_training_matrix(2, 1, 2, true, &mut rng).unwrap();
        let op = build_sensing_operator(&p, &q, &a_bs, &a_ms).unwrap();
        assert_eq!(op.bs_factor.dim(), (1, 4));
        assert_eq!(op.ms_factor.dim(), (1, 2));
        assert_eq!(op.n_measurements(), 1);
        assert_eq!(op.n_atoms(), 8);
    }

    #[test]
    fn measurement_record_checks_length() {
        let bs = ArrayGeometry::half_wavelength(4).unwrap();
        let ms = ArrayGeometry::half_wavelength(2).unwrap();
        let a_bs = dictionary(&bs, &virtual_grid(&bs).unwrap());
        let a_ms = dictionary(&ms, &virtual_grid(&ms).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = gen_training_matrix(4, 3, 2, true, &mut rng).unwrap();
        let q = gen_training_matrix(2, 2, 2, true, &mut rng).unwrap();
        let op = build_sensing_operator(&p, &q, &a_bs, &a_ms).unwrap();
        assert!(MeasurementRecord::new(Array1::zeros(6), op.clone(), 0.0).is_ok());
        assert!(matches!(
            MeasurementRecord::new(Array1::zeros(5), op, 0.0),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let h = Array2::<Complex64>::zeros((4, 8));
        let p = Array2::<Complex64>::zeros((7, 3)); // wrong row count
        let q = Array2::<Complex64>::zeros((4, 2));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            synthesize_measurements(&h, &p, &q, 1.0, 0.0, &mut rng),
            Err(Error::Dimension(_))
        ));
    }
}

//! Support recovery over the Kronecker-factored sensing operator.
//!
//! The matched-filter image `Theta^H y` is evaluated without materializing
//! `Theta`: reshape `y` back to an `M_MS x M_BS` matrix and sandwich it
//! between the two factors, at cost `O(M_MS*M_BS*(G_MS+G_BS))`. OMP selects
//! the atom of largest correlation magnitude, least-squares refits the gains
//! of everything selected so far, and iterates; with sparsity 1 this is a
//! single argmax plus one scalar least squares.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::linalg::{conj_transpose, solve_dense, unvec_col_major};
use crate::training::SensingOperator;

/// One recovered dictionary atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub aoa_index: usize,
    pub aod_index: usize,
    pub gain_estimate: Complex64,
}

/// Result of sparse support recovery.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportEstimate {
    /// Selected atoms in selection order; the first atom is the dominant one.
    pub atoms: Vec<Atom>,
    pub residual_norm: f64,
}

/// Correlation image `Theta^H y` arranged as a `G_MS x G_BS` matrix:
/// entry `(l, k)` is the correlation of `y` with the operator column for
/// AoA grid point `l` and AoD grid point `k` (linear atom index `k*G_MS + l`).
pub fn correlate(op: &SensingOperator, y: &Array1<Complex64>) -> Result<Array2<Complex64>> {
    if y.len() != op.n_measurements() {
        return Err(Error::Dimension(format!(
            "y has length {}, operator expects {}",
            y.len(),
            op.n_measurements()
        )));
    }
    let y_mat = unvec_col_major(y, op.m_ms(), op.m_bs());
    let left = conj_transpose(&op.ms_factor); // G_MS x M_MS
    let right = op.bs_factor.mapv(|z| z.conj()); // M_BS x G_BS
    Ok(left.dot(&y_mat).dot(&right))
}

/// Argmax of `|corr|` with deterministic tie-breaking: the lowest linear atom
/// index `k*G_MS + l` wins.
fn argmax_magnitude(corr: &Array2<Complex64>, skip: &[(usize, usize)]) -> (usize, usize) {
    let (g_ms, g_bs) = corr.dim();
    let mut best = (0usize, 0usize);
    let mut best_val = f64::NEG_INFINITY;
    for k in 0..g_bs {
        for l in 0..g_ms {
            if skip.contains(&(l, k)) {
                continue;
            }
            let v = corr[(l, k)].norm_sqr();
            if v > best_val {
                best_val = v;
                best = (l, k);
            }
        }
    }
    best
}

/// Greedy orthogonal matching pursuit over the structured operator.
///
/// Each iteration picks the atom whose column correlates most strongly (in
/// magnitude) with the current residual, refits the gains of all selected
/// atoms by least squares against the actual columns, and updates the
/// residual. Already-selected atoms are excluded from later selections.
pub fn recover_support_omp(
    op: &SensingOperator,
    y: &Array1<Complex64>,
    sparsity: usize,
) -> Result<SupportEstimate> {
    if sparsity == 0 {
        return Err(Error::InvalidInput("sparsity must be at least 1".into()));
    }
    if sparsity > op.n_atoms() {
        return Err(Error::InvalidInput(format!(
            "sparsity {} exceeds the {} dictionary atoms",
            sparsity,
            op.n_atoms()
        )));
    }
    if op.is_zero() {
        return Err(Error::InvalidInput(
            "sensing operator is identically zero".into(),
        ));
    }
    if y.len() != op.n_measurements() {
        return Err(Error::Dimension(format!(
            "y has length {}, operator expects {}",
            y.len(),
            op.n_measurements()
        )));
    }

    let mut residual = y.clone();
    let mut selected: Vec<(usize, usize)> = Vec::with_capacity(sparsity);
    let mut columns: Vec<Array1<Complex64>> = Vec::with_capacity(sparsity);
    let mut gains: Vec<Complex64> = Vec::new();

    for _ in 0..sparsity {
        let corr = correlate(op, &residual)?;
        let (l, k) = argmax_magnitude(&corr, &selected);
        selected.push((l, k));
        columns.push(op.column(l, k));

        // Normal equations over the selected columns.
        let s = columns.len();
        let mut gram = Array2::zeros((s, s));
        let mut rhs = Array1::zeros(s);
        for i in 0..s {
            for j in 0..s {
                gram[(i, j)] = columns[i]
                    .iter()
                    .zip(columns[j].iter())
                    .map(|(a, b)| a.conj() * b)
                    .sum();
            }
            rhs[i] = columns[i]
                .iter()
                .zip(y.iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
        }
        gains = match solve_dense(&gram, &rhs) {
            Some(g) => g.to_vec(),
            // Degenerate (e.g. y = 0 with a zero-correlation column set):
            // keep zero gains, residual stays y.
            None => vec![Complex64::new(0.0, 0.0); s],
        };

        residual = y.clone();
        for (g, col) in gains.iter().zip(columns.iter()) {
            for (r, c) in residual.iter_mut().zip(col.iter()) {
                *r -= g * c;
            }
        }
    }

    let atoms = selected
        .iter()
        .zip(gains.iter())
        .map(|(&(l, k), &g)| Atom {
            aoa_index: l,
            aod_index: k,
            gain_estimate: g,
        })
        .collect();
    let residual_norm = residual.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    Ok(SupportEstimate {
        atoms,
        residual_norm,
    })
}

/// Whether the dominant recovered atom matches the true on-grid AoA/AoD pair.
pub fn recovery_success(est: &SupportEstimate, truth: &ChannelRealization) -> Result<bool> {
    let (Some(aoa_idx), Some(aod_idx)) = (truth.aoa_grid_index, truth.aod_grid_index) else {
        return Err(Error::InvalidInput(
            "recovery_success requires an on-grid truth (grid indices missing)".into(),
        ));
    };
    let Some(first) = est.atoms.first() else {
        return Err(Error::InvalidInput("estimate has no atoms".into()));
    };
    Ok(first.aoa_index == aoa_idx && first.aod_index == aod_idx)
}

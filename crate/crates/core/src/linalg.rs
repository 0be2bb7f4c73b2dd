//! Small complex-matrix helpers shared across modules.

use ndarray::{Array1, Array2, ShapeBuilder};
use num_complex::Complex64;

/// Conjugate transpose of a complex matrix.
pub(crate) fn conj_transpose(a: &Array2<Complex64>) -> Array2<Complex64> {
    a.t().mapv(|z| z.conj())
}

/// Column-major vectorization: stacks the columns of `a` into one vector.
pub(crate) fn vec_col_major(a: &Array2<Complex64>) -> Array1<Complex64> {
    let (rows, cols) = a.dim();
    let mut out = Array1::zeros(rows * cols);
    for c in 0..cols {
        for r in 0..rows {
            out[c * rows + r] = a[(r, c)];
        }
    }
    out
}

/// Inverse of [`vec_col_major`]: reshapes `v` into a `rows x cols` matrix,
/// filling column by column.
pub(crate) fn unvec_col_major(
    v: &Array1<Complex64>,
    rows: usize,
    cols: usize,
) -> Array2<Complex64> {
    debug_assert_eq!(v.len(), rows * cols);
    Array2::from_shape_vec((rows, cols).f(), v.to_vec())
        .expect("length checked by caller")
}

/// Solve the square complex system `A x = b` by Gaussian elimination with
/// partial pivoting. Intended for the small normal-equation systems that
/// arise in least-squares refits (a handful of unknowns).
pub(crate) fn solve_dense(
    a: &Array2<Complex64>,
    b: &Array1<Complex64>,
) -> Option<Array1<Complex64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return None;
    }
    let mut m = a.clone();
    let mut rhs = b.clone();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            m[(i, col)]
                .norm_sqr()
                .partial_cmp(&m[(j, col)].norm_sqr())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[(pivot, col)].norm_sqr() == 0.0 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                let tmp = m[(col, k)];
                m[(col, k)] = m[(pivot, k)];
                m[(pivot, k)] = tmp;
            }
            rhs.swap(col, pivot);
        }
        for row in (col + 1)..n {
            let factor = m[(row, col)] / m[(col, col)];
            for k in col..n {
                let sub = factor * m[(col, k)];
                m[(row, k)] -= sub;
            }
            let sub = factor * rhs[col];
            rhs[row] -= sub;
        }
    }
    let mut x = Array1::zeros(n);
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in (row + 1)..n {
            acc -= m[(row, k)] * x[k];
        }
        x[row] = acc / m[(row, row)];
    }
    Some(x)
}

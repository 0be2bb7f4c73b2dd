//! Uniform linear arrays: steering vectors, virtual angle grids, and the
//! steering-vector dictionaries used by the sparse formulation.
//!
//! Phase convention: element `n` of a steering vector carries phase
//! `+2*pi*(d/lambda)*n*sin(angle)` with element 0 as the reference. All
//! conjugations elsewhere in the crate are defined relative to this choice.

use std::f64::consts::TAU;

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Uniform linear array described by its element count and spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    n_antennas: usize,
    element_spacing_wavelengths: f64,
}

impl ArrayGeometry {
    pub fn new(n_antennas: usize, element_spacing_wavelengths: f64) -> Result<Self> {
        if n_antennas == 0 {
            return Err(Error::Config("array needs at least one antenna".into()));
        }
        if !(element_spacing_wavelengths > 0.0) || !element_spacing_wavelengths.is_finite() {
            return Err(Error::Config(format!(
                "element spacing must be a positive finite number of wavelengths, got {element_spacing_wavelengths}"
            )));
        }
        Ok(Self {
            n_antennas,
            element_spacing_wavelengths,
        })
    }

    /// Half-wavelength spaced array, the default throughout.
    pub fn half_wavelength(n_antennas: usize) -> Result<Self> {
        Self::new(n_antennas, 0.5)
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn element_spacing_wavelengths(&self) -> f64 {
        self.element_spacing_wavelengths
    }
}

/// Ordered set of candidate directions, in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleGrid {
    points: Vec<f64>,
}

impl AngleGrid {
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config("angle grid must be non-empty".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, k: usize) -> f64 {
        self.points[k]
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }
}

/// Unit-norm, constant-modulus array response vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    pub entries: Array1<Complex64>,
}

impl SteeringVector {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Array response for a ULA: entry `n` is `exp(j*2*pi*(d/lambda)*n*sin(angle)) / sqrt(N)`.
///
/// Entry 0 is always the real positive reference `1/sqrt(N)`.
pub fn steering_vector(geometry: &ArrayGeometry, angle: f64) -> SteeringVector {
    let n = geometry.n_antennas;
    let scale = 1.0 / (n as f64).sqrt();
    let step = TAU * geometry.element_spacing_wavelengths * angle.sin();
    let entries = Array1::from_iter(
        (0..n).map(|i| Complex64::from_polar(scale, step * i as f64)),
    );
    SteeringVector { entries }
}

/// Virtual angle grid of a half-wavelength ULA: the `n_antennas` directions
/// whose spatial frequencies are `2k/N`, wrapped into `[-1, 1)` before the
/// arcsin mapping, in ascending `k` order. The steering vectors at these
/// points are the columns of an `N`-point DFT matrix scaled by `1/sqrt(N)`.
pub fn virtual_grid(geometry: &ArrayGeometry) -> Result<AngleGrid> {
    if (geometry.element_spacing_wavelengths - 0.5).abs() > 1e-12 {
        return Err(Error::Config(format!(
            "virtual grid requires half-wavelength spacing (d/lambda = 0.5); got {}. \
             The inversion sin(angle) = 2k/N only covers the full spatial-frequency \
             range for d/lambda = 0.5.",
            geometry.element_spacing_wavelengths
        )));
    }
    let n = geometry.n_antennas;
    let points = (0..n)
        .map(|k| {
            let mut freq = 2.0 * k as f64 / n as f64;
            if freq >= 1.0 {
                freq -= 2.0;
            }
            freq.asin()
        })
        .collect();
    AngleGrid::from_points(points)
}

/// Dictionary matrix whose column `k` is the steering vector at grid point `k`.
///
/// For the virtual grid of a half-wavelength ULA with `grid.size() == n_antennas`
/// the result is unitary.
pub fn dictionary(geometry: &ArrayGeometry, grid: &AngleGrid) -> Array2<Complex64> {
    let n = geometry.n_antennas;
    let mut out = Array2::zeros((n, grid.size()));
    for (k, &angle) in grid.points().iter().enumerate() {
        let sv = steering_vector(geometry, angle);
        out.column_mut(k).assign(&sv.entries);
    }
    out
}

//! Periodic pseudospectral plumbing: grid, real fields, Fourier spectra.
//!
//! Conventions, fixed once here and relied on everywhere else:
//! - domain `[0, L)`, samples at `x_j = j * dx`, `dx = L / n`;
//! - unnormalized forward DFT, inverse scaled by `1/n`;
//! - wavenumber of bin `j` is `2*pi*m/L` with `m = j` for `j <= n/2` and
//!   `m = j - n` above (the Nyquist bin carries `+n/2`);
//! - quadrature is `dx * sum(...)`, exact for band-limited integrands.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::{Error, Result};

/// Uniform periodic grid plus the transform plans for its size.
///
/// Grids are shared behind `Arc`; two grids are compatible when they agree
/// on sample count and length, not only when they are the same allocation.
pub struct Grid {
    n: usize,
    length: f64,
    dx: f64,
    wavenumbers: Vec<f64>,
    pub(crate) fft: Arc<dyn Fft<f64>>,
    pub(crate) ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n)
            .field("length", &self.length)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.length == other.length
    }
}

impl Grid {
    /// Sample counts are restricted to powers of two with at least 64 points;
    /// everything downstream assumes a comfortable dealiased band.
    pub fn new(n: usize, length: f64) -> Result<Arc<Grid>> {
        if !n.is_power_of_two() || n < 64 {
            return Err(Error::domain(format!(
                "grid size must be a power of two >= 64, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::domain(format!("grid length must be positive, got {length}")));
        }
        let half = n / 2;
        let fundamental = 2.0 * std::f64::consts::PI / length;
        let wavenumbers = (0..n)
            .map(|j| {
                let m = if j <= half { j as f64 } else { j as f64 - n as f64 };
                fundamental * m
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Arc::new(Grid {
            n,
            length,
            dx: length / n as f64,
            wavenumbers,
            fft: planner.plan_fft_forward(n),
            ifft: planner.plan_fft_inverse(n),
        }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Physical wavenumber per FFT bin, standard half-spectrum ordering.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    pub fn x(&self, j: usize) -> f64 {
        self.dx * j as f64
    }

    /// Largest represented wavenumber (the Nyquist bin).
    pub fn k_max(&self) -> f64 {
        std::f64::consts::PI * self.n as f64 / self.length
    }

    /// Bins with `|k|` above two thirds of Nyquist are considered aliased
    /// garbage for quadratic-and-up products.
    pub fn dealias_cutoff(&self) -> f64 {
         2.0 / 3.0 * self.k_max()
    }

    /// Signed displacement folded into `(-L/2, L/2]`: the representative of
    /// `d` on the circle closest to zero, used wherever profiles are built
    /// around an arbitrary center or shifts are compared across periods.
    pub fn wrap_displacement(&self, d: f64) -> f64 {
        let mut r = d.rem_euclid(self.length);
        if r > self.length / 2.0 {
            r -= self.length;
        }
        r
    }

    pub(crate) fn nyquist_bin(&self) -> usize {
        self.n / 2
    }
}

/// Real-valued samples on a [`Grid`]. Values are finite by construction.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.n() {
            return Err(Error::domain(format!(
                "field length {} does not match grid size {}",
                values.len(),
                grid.n()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("field values"));
        }
        Ok(Field { grid: grid.clone(), values })
    }

    pub fn zeros(grid: &Arc<Grid>) -> Field {
        Field { grid: grid.clone(), values: vec![0.0; grid.n()] }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> f64) -> Result<Field> {
        let values = (0..grid.n()).map(|j| f(grid.x(j))).collect();
        Field::new(grid, values)
    }

    pub(crate) fn from_vec_unchecked(grid: Arc<Grid>, values: Vec<f64>) -> Field {
        debug_assert_eq!(values.len(), grid.n());
        Field { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        self.grid.as_ref() == other.grid.as_ref()
    }

    pub fn to_spectrum(&self) -> Spectrum {
        let mut coeffs: Vec<Complex64> =
            self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.grid.fft.process(&mut coeffs);
        Spectrum { grid: self.grid.clone(), coeffs }
    }

    /// Spectral derivative of the given order (1..=3). Multiplies by
    /// `(ik)^order`; the Nyquist bin is zeroed for odd orders since its
    /// sign is ambiguous there.
    pub fn derivative(&self, order: u32) -> Result<Field> {
        if !(1..=3).contains(&order) {
            return Err(Error::domain(format!("derivative order must be 1..=3, got {order}")));
        }
        let mut spec = self.to_spectrum();
        let nyquist = self.grid.nyquist_bin();
        for (j, c) in spec.coeffs.iter_mut().enumerate() {
            let k = self.grid.wavenumbers[j];
            let factor = Complex64::new(0.0, k).powu(order);
            *c *= factor;
            if order % 2 == 1 && j == nyquist {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        Ok(spec.to_field())
    }

    /// Exact translation `u(x) -> u(x - tau)` for band-limited data, done as
    /// a phase shift per mode. The Nyquist bin is scaled by `cos(k tau)`
    /// (the part of the shifted cosine this grid can represent), which keeps
    /// the spectrum conjugate-symmetric and the output real.
    pub fn translate(&self, tau: f64) -> Field {
        if tau == 0.0 {
            return self.clone();
        }
        let mut spec = self.to_spectrum();
        let nyquist = self.grid.nyquist_bin();
        for (j, c) in spec.coeffs.iter_mut().enumerate() {
            let k = self.grid.wavenumbers[j];
            if j == nyquist {
                *c *= (k * tau).cos();
            } else {
                *c *= Complex64::from_polar(1.0, -k * tau);
            }
        }
        spec.to_field()
    }
}

/// Fourier coefficients of a real field, unnormalized forward transform.
#[derive(Debug, Clone)]
pub struct Spectrum {
    grid: Arc<Grid>,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    #[cfg(test)]
    pub(crate) fn from_coeffs(grid: Arc<Grid>, coeffs: Vec<Complex64>) -> Spectrum {
        debug_assert_eq!(coeffs.len(), grid.n());
        Spectrum { grid, coeffs }
    }

    /// Inverse transform; the imaginary residue (rounding noise for
    /// conjugate-symmetric input) is dropped.
    pub fn to_field(&self) -> Field {
        let mut buf = self.coeffs.clone();
        self.grid.ifft.process(&mut buf);
        let scale = 1.0 / self.grid.n() as f64;
        let values = buf.iter().map(|c| c.re * scale).collect();
        Field { grid: self.grid.clone(), values }
    }

    /// Multiplies each bin by a real symbol of its wavenumber, e.g.
    /// `1 / (1 + k^2)` for the smoothing inverse of `I - dxx`. Real symbols
    /// preserve conjugate symmetry, so the result still represents a real
    /// field.
    pub fn scale_by(&mut self, symbol: impl Fn(f64) -> f64) {
        for (c, &k) in self.coeffs.iter_mut().zip(&self.grid.wavenumbers) {
            *c *= symbol(k);
        }
    }

    /// Two-thirds-rule mask: zero every bin with `|k|` strictly above the
    /// cutoff. Spectra already supported inside the kept band are unchanged.
    pub fn dealias(&self) -> Spectrum {
        let cutoff = self.grid.dealias_cutoff();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                if self.grid.wavenumbers[j].abs() > cutoff {
                    Complex64::new(0.0, 0.0)
                } else {
                    c
                }
            })
            .collect();
        Spectrum { grid: self.grid.clone(), coeffs }
    }

    /// Largest coefficient magnitude in `|k| > fraction * k_max`, relative to
    /// the overall largest. Diagnostic for resolution checks.
    pub fn tail_fraction(&self, fraction: f64) -> f64 {
        let cut = fraction * self.grid.k_max();
        let mut peak: f64 = 0.0;
        let mut tail: f64 = 0.0;
        for (j, c) in self.coeffs.iter().enumerate() {
            let mag = c.norm();
            peak = peak.max(mag);
            if self.grid.wavenumbers[j].abs() > cut {
                tail = tail.max(mag);
            }
        }
        if peak == 0.0 {
            0.0
        } else {
            tail / peak
        }
    }
}

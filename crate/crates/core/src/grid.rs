//! Periodic square grids and complex fields sampled on them.
//!
//! The torus is `[-L/2, L/2)^2` sampled with `n` points per side. A field is
//! stored row-major: entry `i * n + j` holds the sample at
//! `(x1, x2) = (coord(i), coord(j))`.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{LabError, Result};

/// Geometry of the periodic box and its Fourier mode layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    box_length: f64,
    n: usize,
}

impl GridSpec {
    pub fn new(box_length: f64, n: usize) -> Result<Self> {
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(LabError::InvalidGrid(format!(
                "box length must be positive and finite, got {box_length}"
            )));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(LabError::InvalidGrid(format!(
                "points per dimension must be a power of two >= 8, got {n}"
            )));
        }
        Ok(Self { box_length, n })
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.box_length / self.n as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dx()
    }

    /// Spacing `2 pi / L` between neighbouring wavenumbers.
    pub fn mode_spacing(&self) -> f64 {
        2.0 * PI / self.box_length
    }

    /// Largest representable wavenumber magnitude per axis, `pi n / L`.
    pub fn nyquist(&self) -> f64 {
        PI * self.n as f64 / self.box_length
    }

    /// Physical coordinate of grid index `i` along either axis.
    pub fn coord(&self, i: usize) -> f64 {
        -0.5 * self.box_length + i as f64 * self.dx()
    }

    /// Signed integer mode number of FFT index `k`, in `-n/2 ..= n/2 - 1`.
    pub fn mode_index(&self, k: usize) -> i64 {
        let n = self.n as i64;
        let k = k as i64;
        if k < n / 2 {
            k
        } else {
            k - n
        }
    }

    /// Wavenumber `2 pi j / L` of FFT index `k`.
    pub fn wavenumber(&self, k: usize) -> f64 {
        self.mode_spacing() * self.mode_index(k) as f64
    }

    /// All wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.wavenumber(k)).collect()
    }

    /// The same lattice on a box scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.box_length * factor, self.n)
    }
}

/// Complex amplitude sampled on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    grid: GridSpec,
    values: Vec<Complex64>,
}

impl Field2D {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn constant(grid: GridSpec, value: Complex64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    /// Samples `f(x1, x2)` at every grid point.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..n {
            let x1 = grid.coord(i);
            for j in 0..n {
                values.push(f(x1, grid.coord(j)));
            }
        }
        Self { grid, values }
    }

    pub fn from_values(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::InvalidArgument(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        let field = Self { grid, values };
        if !field.is_finite() {
            return Err(LabError::NonFinite);
        }
        Ok(field)
    }

    /// Builds a field without the finiteness check; used by solvers that
    /// check finiteness themselves.
    pub(crate) fn from_raw(grid: GridSpec, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    /// Isotropic Gaussian `amplitude * exp(-|x - center|^2 / (2 width^2))`.
    pub fn gaussian(grid: GridSpec, amplitude: f64, width: f64, center: (f64, f64)) -> Self {
        Self::from_fn(grid, |x1, x2| {
            let r2 = (x1 - center.0).powi(2) + (x2 - center.1).powi(2);
            Complex64::new(amplitude * (-r2 / (2.0 * width * width)).exp(), 0.0)
        })
    }

    /// Plane wave `amplitude * exp(i (k1 x1 + k2 x2))` with integer mode numbers.
    pub fn plane_wave(grid: GridSpec, amplitude: Complex64, modes: (i64, i64)) -> Self {
        let dk = grid.mode_spacing();
        let (k1, k2) = (modes.0 as f64 * dk, modes.1 as f64 * dk);
        Self::from_fn(grid, |x1, x2| amplitude * Complex64::cis(k1 * x1 + k2 * x2))
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.grid.n() + j]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self::from_raw(self.grid, self.values.iter().map(|&z| f(z)).collect())
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        Self::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        self.map(|z| z * factor)
    }

    /// Discrete `L^2` inner product `<self, other> = dA * sum conj(self) other`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        s * self.grid.cell_area()
    }

    /// Discrete `L^p` norm `(dA * sum |v|^p)^(1/p)`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        self.lp_integral(p).powf(1.0 / p)
    }

    /// `dA * sum |v|^p`.
    pub fn lp_integral(&self, p: f64) -> f64 {
        let s: f64 = if p == 2.0 {
            self.values.iter().map(|z| z.norm_sqr()).sum()
        } else if p == 4.0 {
            self.values.iter().map(|z| z.norm_sqr().powi(2)).sum()
        } else {
            self.values.iter().map(|z| z.norm().powf(p)).sum()
        };
        s * self.grid.cell_area()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl Add for &Field2D {
    type Output = Field2D;
    fn add(self, rhs: &Field2D) -> Field2D {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Field2D {
    type Output = Field2D;
    fn sub(self, rhs: &Field2D) -> Field2D {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul<Complex64> for &Field2D {
    type Output = Field2D;
    fn mul(self, rhs: Complex64) -> Field2D {
        self.scale(rhs)
    }
}

impl Mul<f64> for &Field2D {
    type Output = Field2D;
    fn mul(self, rhs: f64) -> Field2D {
        self.map(|z| z * rhs)
    }
}

/// Periodic grid with `n` points on a side of length `box_length`.
pub fn make_grid(box_length: f64, n: usize) -> Result<GridSpec> {
    GridSpec::new(box_length, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_torus_has_integer_modes() {
        let g = make_grid(2.0 * PI, 16).unwrap();
        let modes: Vec<i64> = (0..16).map(|k| g.mode_index(k)).collect();
        let mut sorted = modes.clone();
        sorted.sort();
        assert_eq!(sorted, (-8..8).collect::<Vec<_>>());
        for k in 0..16 {
            assert!((g.wavenumber(k) - g.mode_index(k) as f64).abs() < 1e-15);
        }
        assert!((g.nyquist() - 8.0).abs() < 1e-14);
    }

    #[test]
    fn large_box_mode_spacing() {
        let g = make_grid(16.0 * PI, 256).unwrap();
        assert!((g.mode_spacing() - 0.125).abs() < 1e-15);
        assert!((g.cell_area() - (16.0 * PI / 256.0).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(make_grid(2.0 * PI, 12).is_err());
        assert!(make_grid(2.0 * PI, 4).is_err());
        assert!(make_grid(0.0, 16).is_err());
        assert!(make_grid(-1.0, 16).is_err());
        assert!(make_grid(f64::NAN, 16).is_err());
    }

    #[test]
    fn from_values_checks_length_and_finiteness() {
        let g = make_grid(1.0, 8).unwrap();
        assert!(Field2D::from_values(g, vec![Complex64::new(0.0, 0.0); 63]).is_err());
        let mut v = vec![Complex64::new(0.0, 0.0); 64];
        v[3].im = f64::INFINITY;
        assert!(matches!(
            Field2D::from_values(g, v),
            Err(LabError::NonFinite)
        ));
    }
}

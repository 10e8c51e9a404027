//! Fourier machinery on the periodic grid: transforms, multipliers, the free
//! Schrodinger propagator, derivatives and Littlewood-Paley projections.
//!
//! Forward transforms are unnormalized and the inverse carries `1/n^2`.
//! Spectral arrays use a transposed layout: entry `r * n + c` holds the
//! coefficient with `xi1 = wavenumber(c)` and `xi2 = wavenumber(r)`. Callers
//! outside this module go through [`Spectrum`], which hides the layout.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::{Field2D, GridSpec};

/// Cached FFT plans and wavenumber tables for one grid.
pub(crate) struct Kernel {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    xi: Vec<f64>,
    xi_sq: Vec<f64>,
}

/// Kernels keyed by grid size and the bit pattern of the box length.
type KernelCache = Mutex<HashMap<(usize, u64), Arc<Kernel>>>;

fn kernel_cache() -> &'static KernelCache {
    static CACHE: OnceLock<KernelCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

pub(crate) fn kernel(grid: &GridSpec) -> Arc<Kernel> {
    let key = (grid.n(), grid.box_length().to_bits());
    let mut cache = kernel_cache().lock().unwrap_or_else(|e| e.into_inner());
    cache
        .entry(key)
        .or_insert_with(|| Arc::new(Kernel::new(grid)))
        .clone()
}

thread_local! {
    static TRANSPOSE_BUF: RefCell<Vec<Complex64>> = const { RefCell::new(Vec::new()) };
}

/// Blocked transpose of a square `n x n` array. The result is swapped into
/// `buf`; the old allocation becomes the thread's scratch buffer.
fn transpose(buf: &mut Vec<Complex64>, n: usize) {
    let block = n.min(16);
    TRANSPOSE_BUF.with(|cell| {
        let mut tmp = cell.borrow_mut();
        tmp.resize(n * n, Complex64::new(0.0, 0.0));
        for bi in (0..n).step_by(block) {
            for bj in (0..n).step_by(block) {
                for j in bj..bj + block {
                    let out = &mut tmp[j * n + bi..j * n + bi + block];
                    for (di, z) in out.iter_mut().enumerate() {
                        *z = buf[(bi + di) * n + j];
                    }
                }
            }
        }
        std::mem::swap(buf, &mut *tmp);
    });
}

impl Kernel {
    fn new(grid: &GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.n();
        let xi = grid.wavenumbers();
        let xi_sq = xi.iter().map(|k| k * k).collect();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            xi,
            xi_sq,
        }
    }

    /// Physical row-major samples to (transposed) spectral coefficients.
    pub(crate) fn forward(&self, buf: &mut Vec<Complex64>) {
        let mut scratch =
            vec![Complex64::new(0.0, 0.0); self.forward.get_inplace_scratch_len()];
        self.forward.process_with_scratch(buf, &mut scratch);
        transpose(buf, self.n);
        self.forward.process_with_scratch(buf, &mut scratch);
    }

    /// Inverse of [`Kernel::forward`], including the `1/n^2` normalization.
    pub(crate) fn inverse(&self, buf: &mut Vec<Complex64>) {
        let mut scratch =
            vec![Complex64::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];
        self.inverse.process_with_scratch(buf, &mut scratch);
        transpose(buf, self.n);
        self.inverse.process_with_scratch(buf, &mut scratch);
        let norm = 1.0 / (self.n * self.n) as f64;
        for z in buf.iter_mut() {
            *z *= norm;
        }
    }

    /// Per-axis factors `exp(-i theta xi_k^2)` of the free propagator symbol.
    fn propagator_factors(&self, theta: f64) -> Vec<Complex64> {
        self.xi_sq
            .iter()
            .map(|&k2| Complex64::cis(-theta * k2))
            .collect()
    }

    /// Multiplies spectral coefficients by `exp(-i theta |xi|^2)`, i.e. applies
    /// `e^{i theta Delta}`.
    pub(crate) fn propagate(&self, spec: &mut [Complex64], theta: f64) {
        if theta == 0.0 {
            return;
        }
        let p = self.propagator_factors(theta);
        let n = self.n;
        for (r, row) in spec.chunks_exact_mut(n).enumerate() {
            let pr = p[r];
            for (z, &pc) in row.iter_mut().zip(&p) {
                *z *= pr * pc;
            }
        }
    }

    /// `acc += weight * exp(-i theta |xi|^2) * spec`.
    pub(crate) fn propagate_accumulate(
        &self,
        acc: &mut [Complex64],
        spec: &[Complex64],
        theta: f64,
        weight: f64,
    ) {
        let p = self.propagator_factors(theta);
        let n = self.n;
        for ((r, arow), srow) in acc.chunks_exact_mut(n).enumerate().zip(spec.chunks_exact(n)) {
            let pr = p[r] * weight;
            for ((a, &s), &pc) in arow.iter_mut().zip(srow).zip(&p) {
                *a += pr * pc * s;
            }
        }
    }

    /// Applies a real radial multiplier `m(|xi|)`.
    pub(crate) fn apply_radial(&self, spec: &mut [Complex64], m: impl Fn(f64) -> f64) {
        self.apply_symbol(spec, |xi1, xi2| {
            Complex64::new(m((xi1 * xi1 + xi2 * xi2).sqrt()), 0.0)
        });
    }

    /// Applies a general multiplier `m(xi1, xi2)`.
    pub(crate) fn apply_symbol(&self, spec: &mut [Complex64], m: impl Fn(f64, f64) -> Complex64) {
        let n = self.n;
        for (r, row) in spec.chunks_exact_mut(n).enumerate() {
            let xi2 = self.xi[r];
            for (c, z) in row.iter_mut().enumerate() {
                *z *= m(self.xi[c], xi2);
            }
        }
    }

    /// `|xi|^2` at spectral position `idx`.
    pub(crate) fn xi_sq_at(&self, idx: usize) -> f64 {
        self.xi_sq[idx / self.n] + self.xi_sq[idx % self.n]
    }

    /// `(xi1, xi2)` at spectral position `idx`.
    pub(crate) fn xi_at(&self, idx: usize) -> (f64, f64) {
        (self.xi[idx % self.n], self.xi[idx / self.n])
    }
}

/// Fourier coefficients of a field, in the unnormalized forward convention.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn index_of(&self, mode: i64) -> usize {
        let n = self.grid.n() as i64;
        assert!(
            (-n / 2..n / 2).contains(&mode),
            "mode {mode} outside the grid's mode set"
        );
        mode.rem_euclid(n) as usize
    }

    /// Coefficient of the integer mode `(j1, j2)`, i.e. of
    /// `xi = (2 pi / L) (j1, j2)`.
    pub fn coefficient(&self, j1: i64, j2: i64) -> Complex64 {
        let c = self.index_of(j1);
        let r = self.index_of(j2);
        self.coeffs[r * self.grid.n() + c]
    }

    /// Iterates `(xi1, xi2, coefficient)` over all modes.
    pub fn modes(&self) -> impl Iterator<Item = (f64, f64, Complex64)> + '_ {
        let k = kernel(&self.grid);
        self.coeffs.iter().enumerate().map(move |(idx, &z)| {
            let (a, b) = k.xi_at(idx);
            (a, b, z)
        })
    }

    pub fn to_field(&self) -> Field2D {
        let mut buf = self.coeffs.clone();
        kernel(&self.grid).inverse(&mut buf);
        Field2D::from_raw(self.grid, buf)
    }
}

/// Forward transform of `f`.
pub fn fourier(f: &Field2D) -> Spectrum {
    let mut coeffs = f.values().to_vec();
    kernel(f.grid()).forward(&mut coeffs);
    Spectrum {
        grid: *f.grid(),
        coeffs,
    }
}

/// Applies the spectral multiplier `m(xi1, xi2)` to `f`.
pub fn apply_multiplier(f: &Field2D, m: impl Fn(f64, f64) -> Complex64) -> Field2D {
    let k = kernel(f.grid());
    let mut buf = f.values().to_vec();
    k.forward(&mut buf);
    k.apply_symbol(&mut buf, m);
    k.inverse(&mut buf);
    Field2D::from_raw(*f.grid(), buf)
}

/// Free Schrodinger evolution `e^{i theta Delta} f`, symbol `exp(-i theta |xi|^2)`.
pub fn free_propagate(f: &Field2D, theta: f64) -> Field2D {
    if theta == 0.0 {
        return f.clone();
    }
    let k = kernel(f.grid());
    let mut buf = f.values().to_vec();
    k.forward(&mut buf);
    k.propagate(&mut buf, theta);
    k.inverse(&mut buf);
    Field2D::from_raw(*f.grid(), buf)
}

/// Littlewood-Paley profile: 1 on `[0, 1]`, 0 on `[2, inf)`, raised cosine between.
pub fn lp_cutoff(r: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        0.5 * (1.0 + (PI * (r - 1.0)).cos())
    }
}

/// `P_{<=N} f` for an arbitrary radial profile `chi(|xi| / N)`.
pub fn project_low_with(f: &Field2D, cutoff: f64, profile: impl Fn(f64) -> f64) -> Field2D {
    assert!(cutoff > 0.0, "frequency cutoff must be positive");
    let k = kernel(f.grid());
    let mut buf = f.values().to_vec();
    k.forward(&mut buf);
    k.apply_radial(&mut buf, |r| profile(r / cutoff));
    k.inverse(&mut buf);
    Field2D::from_raw(*f.grid(), buf)
}

/// `P_{<=N} f` with the standard [`lp_cutoff`] profile.
pub fn project_low(f: &Field2D, cutoff: f64) -> Field2D {
    project_low_with(f, cutoff, lp_cutoff)
}

/// `P_{>N} f = f - P_{<=N} f`.
pub fn project_high(f: &Field2D, cutoff: f64) -> Field2D {
    f - &project_low(f, cutoff)
}

/// Spectral gradient `(d/dx1 f, d/dx2 f)`.
pub fn gradient(f: &Field2D) -> (Field2D, Field2D) {
    let k = kernel(f.grid());
    let mut spec = f.values().to_vec();
    k.forward(&mut spec);
    let mut d1 = spec.clone();
    k.apply_symbol(&mut d1, |xi1, _| Complex64::new(0.0, xi1));
    k.inverse(&mut d1);
    k.apply_symbol(&mut spec, |_, xi2| Complex64::new(0.0, xi2));
    k.inverse(&mut spec);
    (
        Field2D::from_raw(*f.grid(), d1),
        Field2D::from_raw(*f.grid(), spec),
    )
}

/// Spectral Laplacian, symbol `-|xi|^2`.
pub fn laplacian(f: &Field2D) -> Field2D {
    let k = kernel(f.grid());
    let mut buf = f.values().to_vec();
    k.forward(&mut buf);
    for (idx, z) in buf.iter_mut().enumerate() {
        *z *= -k.xi_sq_at(idx);
    }
    k.inverse(&mut buf);
    Field2D::from_raw(*f.grid(), buf)
}

/// Discrete `L^2` norm `sqrt(dA * sum |f|^2)`.
pub fn mass(f: &Field2D) -> f64 {
    f.lp_norm(2.0)
}

/// The same `L^2` norm computed from Fourier coefficients (Parseval).
pub fn mass_fourier(f: &Field2D) -> f64 {
    let s = fourier(f);
    let n = f.grid().n() as f64;
    let l = f.grid().box_length();
    let total: f64 = s.coeffs.iter().map(|z| z.norm_sqr()).sum();
    (total * l * l / (n * n * n * n)).sqrt()
}

/// Fraction of `sum |f_hat|^2` carried by modes with `|xi| > nyquist / 3`.
pub fn spectral_tail_fraction(f: &Field2D) -> f64 {
    let s = fourier(f);
    let k = kernel(f.grid());
    let limit = f.grid().nyquist() / 3.0;
    let limit_sq = limit * limit;
    let (mut tail, mut total) = (0.0, 0.0);
    for (idx, z) in s.coeffs.iter().enumerate() {
        let e = z.norm_sqr();
        total += e;
        if k.xi_sq_at(idx) > limit_sq {
            tail += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

/// Fraction of `integral |f|^2` in the outer 10% annulus of the box, the
/// points with `max(|x1|, |x2|) > 0.45 L`.
pub fn boundary_mass_fraction(f: &Field2D) -> f64 {
    let g = f.grid();
    let n = g.n();
    let edge = 0.45 * g.box_length();
    let (mut outer, mut total) = (0.0, 0.0);
    for i in 0..n {
        let x1 = g.coord(i).abs();
        for j in 0..n {
            let e = f.at(i, j).norm_sqr();
            total += e;
            if x1 > edge || g.coord(j).abs() > edge {
                outer += e;
            }
        }
    }
    if total == 0.0 {
        0.0
    } else {
        outer / total
    }
}

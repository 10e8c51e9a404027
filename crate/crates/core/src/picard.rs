//! Fixed-point iteration of the Duhamel map for the dispersion-managed
//! equation,
//!
//! `Phi u(t) = e^{it Delta} phi - i int_0^t e^{i(t-s) Delta} F_DM(u(s)) ds`,
//!
//! used as an integrator-independent short-time oracle. The time integral is
//! a composite Gauss rule: on each step the integrand is represented by its
//! values at Gauss-Legendre stage points, and partial integrals to each stage
//! use the collocation weights of the interpolating polynomial. Iteration
//! happens in the interaction picture `w = e^{-it Delta} u`, where the map
//! reads `w(t) = phi - i int_0^t e^{-is Delta} F_DM(e^{is Delta} w(s)) ds`.

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::evolution::{Equation, Trace};
use crate::grid::Field2D;
use crate::nonlinearity::{averaged_cubic_spectral, weighted_nodes};
use crate::quadrature::QuadratureRule;
use crate::spectral::kernel;

/// Gauss stages per time step.
const STAGES: usize = 3;

#[derive(Debug, Clone)]
pub struct PicardSolution {
    /// The fixed point at the step grid `0, dt, ..., t_final`.
    pub trace: Trace,
    /// Number of applications of the map until the iterate moved by at most `tol`.
    pub sweeps: usize,
    /// `L^inf_t L^2` distance between successive iterates, one per sweep.
    pub distances: Vec<f64>,
}

/// Collocation data: stage nodes `c`, weights `b` and partial-integral matrix `a`.
struct Collocation {
    c: Vec<f64>,
    b: Vec<f64>,
    a: Vec<Vec<f64>>,
}

impl Collocation {
    fn gauss(stages: usize) -> Result<Self> {
        let rule = QuadratureRule::gauss_legendre(stages)?;
        let c = rule.nodes().to_vec();
        let b = rule.weights().to_vec();
        let lagrange = |j: usize, s: f64| {
            c.iter()
                .enumerate()
                .filter(|&(m, _)| m != j)
                .map(|(_, &cm)| (s - cm) / (c[j] - cm))
                .product::<f64>()
        };
        // int_0^{c_i} l_j(s) ds, exact since l_j has degree stages - 1
        let a = c
            .iter()
            .map(|&ci| {
                (0..stages)
                    .map(|j| {
                        rule.on_interval(0.0, ci)
                            .iter()
                            .map(|&(s, w)| w * lagrange(j, s))
                            .sum()
                    })
                    .collect()
            })
            .collect();
        Ok(Self { c, b, a })
    }
}

/// Iterates the Duhamel map on `[0, t_final]` with step `dt` until successive
/// iterates differ by at most `tol` in `L^inf_t L^2`.
///
/// Each sweep must shrink the iterate distance by at least a factor of two;
/// otherwise [`LabError::NonContraction`] is returned, which signals that the
/// data or the time window is too large for the map to contract.
pub fn picard_short_time(
    phi: &Field2D,
    t_final: f64,
    dt: f64,
    rule: &QuadratureRule,
    tol: f64,
    max_iter: usize,
) -> Result<PicardSolution> {
    if !(t_final > 0.0 && dt > 0.0 && dt <= t_final) {
        return Err(LabError::InvalidArgument(format!(
            "need 0 < dt <= t_final, got dt = {dt}, t_final = {t_final}"
        )));
    }
    if max_iter == 0 || !(tol > 0.0) {
        return Err(LabError::InvalidArgument("need tol > 0 and max_iter >= 1".into()));
    }
    if !phi.is_finite() {
        return Err(LabError::NonFinite);
    }
    let grid = *phi.grid();
    let k = kernel(&grid);
    let coll = Collocation::gauss(STAGES)?;
    let nodes = weighted_nodes(rule);
    let steps = ((t_final / dt) - 1e-9).ceil().max(1.0) as usize;
    let h = t_final / steps as f64;
    let len = grid.len();
    let zero = Complex64::new(0.0, 0.0);
    // L^2 norm from unnormalized coefficients
    let l = grid.box_length();
    let n2 = (grid.n() * grid.n()) as f64;
    let spec_norm = |v: &[Complex64]| (v.iter().map(|z| z.norm_sqr()).sum::<f64>() * l * l / (n2 * n2)).sqrt();

    let mut phi_hat = phi.values().to_vec();
    k.forward(&mut phi_hat);

    // stage values and step-point values of the current iterate
    let mut stages: Vec<Vec<Complex64>> = vec![phi_hat.clone(); steps * STAGES];
    let mut points: Vec<Vec<Complex64>> = vec![phi_hat.clone(); steps + 1];
    let mut g: Vec<Vec<Complex64>> = vec![vec![zero; len]; steps * STAGES];
    let mut work = Vec::with_capacity(len);
    let mut distances = Vec::new();

    for sweep in 1..=max_iter {
        for step in 0..steps {
            let t0 = step as f64 * h;
            for j in 0..STAGES {
                let idx = step * STAGES + j;
                averaged_cubic_spectral(&k, &stages[idx], t0 + coll.c[j] * h, &nodes, &mut g[idx], &mut work);
                for z in g[idx].iter_mut() {
                    *z = Complex64::new(z.im, -z.re);
                }
            }
        }

        let mut distance: f64 = 0.0;
        let mut start = phi_hat.clone();
        let mut next = vec![zero; len];
        for step in 0..steps {
            let gs = &g[step * STAGES..(step + 1) * STAGES];
            for i in 0..STAGES {
                for (p, z) in next.iter_mut().enumerate() {
                    let mut v = start[p];
                    for (j, gj) in gs.iter().enumerate() {
                        v += h * coll.a[i][j] * gj[p];
                    }
                    *z = v;
                }
                let old = &mut stages[step * STAGES + i];
                let diff: Vec<Complex64> = next.iter().zip(old.iter()).map(|(a, b)| a - b).collect();
                distance = distance.max(spec_norm(&diff));
                old.copy_from_slice(&next);
            }
            for (p, z) in next.iter_mut().enumerate() {
                let mut v = start[p];
                for (j, gj) in gs.iter().enumerate() {
                    v += h * coll.b[j] * gj[p];
                }
                *z = v;
            }
            start.copy_from_slice(&next);
            let old = &mut points[step + 1];
            let diff: Vec<Complex64> = start.iter().zip(old.iter()).map(|(a, b)| a - b).collect();
            distance = distance.max(spec_norm(&diff));
            old.copy_from_slice(&start);
        }

        let previous = distances.last().copied();
        distances.push(distance);
        if !distance.is_finite() {
            return Err(LabError::NonContraction {
                sweep,
                distance,
                previous: previous.unwrap_or(f64::NAN),
            });
        }
        if distance <= tol {
            let trace = assemble_trace(&points, h, t_final, phi)?;
            return Ok(PicardSolution {
                trace,
                sweeps: sweep,
                distances,
            });
        }
        if let Some(prev) = previous {
            if distance > 0.5 * prev {
                return Err(LabError::NonContraction {
                    sweep,
                    distance,
                    previous: prev,
                });
            }
        }
    }
    Err(LabError::NonContraction {
        sweep: max_iter,
        distance: *distances.last().unwrap(),
        previous: distances.iter().rev().nth(1).copied().unwrap_or(f64::NAN),
    })
}

fn assemble_trace(points: &[Vec<Complex64>], h: f64, t_final: f64, phi: &Field2D) -> Result<Trace> {
    let grid = *phi.grid();
    let k = kernel(&grid);
    let steps = points.len() - 1;
    let mut times = Vec::with_capacity(points.len());
    let mut snaps = Vec::with_capacity(points.len());
    for (step, w) in points.iter().enumerate() {
        let t = if step == steps { t_final } else { step as f64 * h };
        let mut u = w.clone();
        k.propagate(&mut u, t);
        k.inverse(&mut u);
        times.push(t);
        snaps.push(Field2D::from_raw(grid, u));
    }
    snaps[0] = phi.clone();
    Trace::new(times, snaps, Equation::Dmnls)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::f64::consts::PI;

    #[test]
    fn collocation_weights_are_exact() {
        let c = Collocation::gauss(3).unwrap();
        // partial integrals of 1 and s reproduce c_i and c_i^2 / 2
        for i in 0..3 {
            let ones: f64 = c.a[i].iter().sum();
            assert!((ones - c.c[i]).abs() < 1e-14);
            let lin: f64 = c.a[i].iter().zip(&c.c).map(|(a, cj)| a * cj).sum();
            assert!((lin - 0.5 * c.c[i] * c.c[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_data_converges_in_one_sweep() {
        let g = make_grid(2.0 * PI, 16).unwrap();
        let rule = QuadratureRule::gauss_legendre(4).unwrap();
        let sol = picard_short_time(&Field2D::zeros(g), 0.1, 0.01, &rule, 1e-10, 8).unwrap();
        assert_eq!(sol.sweeps, 1);
        assert!(sol.trace.snapshots().iter().all(|s| s.max_abs() == 0.0));
    }

    #[test]
    fn rejects_bad_arguments() {
        let g = make_grid(2.0 * PI, 8).unwrap();
        let rule = QuadratureRule::gauss_legendre(2).unwrap();
        let z = Field2D::zeros(g);
        assert!(picard_short_time(&z, 0.1, 0.2, &rule, 1e-10, 8).is_err());
        assert!(picard_short_time(&z, 0.1, 0.01, &rule, 0.0, 8).is_err());
        assert!(picard_short_time(&z, 0.1, 0.01, &rule, 1e-10, 0).is_err());
    }

    #[test]
    fn plane_wave_fixed_point_is_phase_rotation() {
        // the exact solution of both equations is a * e^{i k.x} e^{-i(|k|^2 + |a|^2) t}
        let g = make_grid(2.0 * PI, 16).unwrap();
        let a = Complex64::new(0.5, 0.0);
        let f = Field2D::plane_wave(g, a, (1, 0));
        let rule = QuadratureRule::gauss_legendre(4).unwrap();
        let sol = picard_short_time(&f, 0.2, 0.02, &rule, 1e-13, 20).unwrap();
        let t = 0.2;
        let expected = f.scale(Complex64::cis(-(1.0 + a.norm_sqr()) * t));
        assert!((sol.trace.last() - &expected).max_abs() < 1e-10);
    }
}

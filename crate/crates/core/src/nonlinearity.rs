//! The cubic nonlinearity, its dispersion average, and the shifted
//! nonlinearity `H(tau) = e^{-i tau Delta} F(e^{i tau Delta} f)` with its
//! tau-derivative.

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::grid::Field2D;
use crate::quadrature::QuadratureRule;
use crate::spectral::{free_propagate, gradient, kernel, laplacian, spectral_tail_fraction, Kernel};

/// Tail fraction above which [`dh_dtau`] refuses to differentiate.
pub const DERIVATIVE_TAIL_LIMIT: f64 = 1e-10;

/// Pointwise `|f|^2 f`.
pub fn cubic(f: &Field2D) -> Field2D {
    f.map(|z| z * z.norm_sqr())
}

/// `F_DM(f) = sum_m w_m e^{-i s_m Delta} F(e^{i s_m Delta} f)`.
pub fn dm_nonlinearity(f: &Field2D, rule: &QuadratureRule) -> Field2D {
    let k = kernel(f.grid());
    let mut spec = f.values().to_vec();
    k.forward(&mut spec);
    let nodes = weighted_nodes(rule);
    let mut out = vec![Complex64::new(0.0, 0.0); spec.len()];
    let mut work = Vec::new();
    averaged_cubic_spectral(&k, &spec, 0.0, &nodes, &mut out, &mut work);
    k.inverse(&mut out);
    Field2D::from_raw(*f.grid(), out)
}

/// `H(tau) = e^{-i tau Delta} F(e^{i tau Delta} f)`.
pub fn shifted_cubic(f: &Field2D, tau: f64) -> Field2D {
    free_propagate(&cubic(&free_propagate(f, tau)), -tau)
}

/// `dH/dtau = -2i e^{-i tau Delta}[conj(psi) (grad psi . grad psi)
/// + 2 |grad psi|^2 psi + psi^2 Delta conj(psi)]` with `psi = e^{i tau Delta} f`.
///
/// Fails if `f` carries significant energy near the Nyquist frequency, where
/// spectral differentiation amplifies aliasing.
pub fn dh_dtau(f: &Field2D, tau: f64) -> Result<Field2D> {
    let tail = spectral_tail_fraction(f);
    if tail > DERIVATIVE_TAIL_LIMIT {
        return Err(LabError::SpectralTail {
            fraction: tail,
            limit: DERIVATIVE_TAIL_LIMIT,
        });
    }
    let psi = free_propagate(f, tau);
    let (d1, d2) = gradient(&psi);
    let lap = laplacian(&psi);
    let bracket: Vec<Complex64> = psi
        .values()
        .iter()
        .zip(d1.values())
        .zip(d2.values())
        .zip(lap.values())
        .map(|(((&p, &a), &b), &l)| {
            let grad_dot = a * a + b * b;
            let grad_sq = a.norm_sqr() + b.norm_sqr();
            p.conj() * grad_dot + 2.0 * grad_sq * p + p * p * l.conj()
        })
        .collect();
    let bracket = Field2D::from_raw(*f.grid(), bracket);
    Ok(free_propagate(&bracket, -tau).scale(Complex64::new(0.0, -2.0)))
}

/// `G(f) = F(f) - F_DM(f)`.
pub fn defect(f: &Field2D, rule: &QuadratureRule) -> Field2D {
    &cubic(f) - &dm_nonlinearity(f, rule)
}

pub(crate) fn weighted_nodes(rule: &QuadratureRule) -> Vec<(f64, f64)> {
    rule.nodes()
        .iter()
        .copied()
        .zip(rule.weights().iter().copied())
        .collect()
}

/// Spectral kernel of the averaged nonlinearity, shifted by `shift`:
///
/// `out = sum_m w_m P(-(shift + s_m)) FFT[F(IFFT[P(shift + s_m) spec])]`
///
/// where `P(theta)` is the free propagator symbol. With the single node
/// `(0, 1)` this is the plain cubic term. Nodes are summed in order.
pub(crate) fn averaged_cubic_spectral(
    k: &Kernel,
    spec: &[Complex64],
    shift: f64,
    nodes: &[(f64, f64)],
    out: &mut [Complex64],
    work: &mut Vec<Complex64>,
) {
    out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
    for &(sigma, weight) in nodes {
        let theta = shift + sigma;
        work.clear();
        work.extend_from_slice(spec);
        k.propagate(work, theta);
        k.inverse(work);
        for z in work.iter_mut() {
            *z *= z.norm_sqr();
        }
        k.forward(work);
        k.propagate_accumulate(out, work, -theta, weight);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::f64::consts::PI;

    fn torus(n: usize) -> crate::grid::GridSpec {
        make_grid(2.0 * PI, n).unwrap()
    }

    #[test]
    fn cubic_examples() {
        let g = torus(16);
        assert_eq!(cubic(&Field2D::zeros(g)).max_abs(), 0.0);
        let two = Field2D::constant(g, Complex64::new(2.0, 0.0));
        assert!((&cubic(&two) - &Field2D::constant(g, Complex64::new(8.0, 0.0))).max_abs() < 1e-15);
        let pw = Field2D::plane_wave(g, Complex64::new(1.0, 0.0), (1, 0));
        assert!((&cubic(&pw) - &pw).max_abs() < 1e-14);
    }

    #[test]
    fn shifted_cubic_at_zero_is_cubic() {
        let g = torus(16);
        let f = Field2D::gaussian(g, 1.0, 0.8, (0.1, 0.0));
        assert!((&shifted_cubic(&f, 0.0) - &cubic(&f)).max_abs() < 1e-14);
    }

    #[test]
    fn zero_field_is_fixed_everywhere() {
        let g = torus(16);
        let z = Field2D::zeros(g);
        let rule = QuadratureRule::gauss_legendre(8).unwrap();
        assert_eq!(dm_nonlinearity(&z, &rule).max_abs(), 0.0);
        assert_eq!(defect(&z, &rule).max_abs(), 0.0);
        assert_eq!(dh_dtau(&z, 0.4).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn derivative_rejects_nyquist_energy() {
        let g = torus(16);
        let f = Field2D::plane_wave(g, Complex64::new(1.0, 0.0), (7, 0));
        assert!(matches!(dh_dtau(&f, 0.0), Err(LabError::SpectralTail { .. })));
    }

    #[test]
    fn plane_wave_derivative_cancels() {
        let g = torus(32);
        let f = Field2D::plane_wave(g, Complex64::new(0.7, 0.2), (2, -1));
        for tau in [0.0, 0.3, -1.1] {
            let d = dh_dtau(&f, tau).unwrap();
            assert!(d.max_abs() < 1e-11, "tau = {tau}: {}", d.max_abs());
        }
    }
}

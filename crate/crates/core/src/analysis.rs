//! Scaling, discrete space-time norms, the shifted Duhamel operator, the
//! low/high/dm-high split of the defect, and the scattering diagnostic.
//!
//! Time integrals use the trapezoid rule on stored snapshots. When a trace's
//! window extends past its last stored time, the last snapshot is held
//! constant to the window edge.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::evolution::{Equation, Trace};
use crate::grid::Field2D;
use crate::nonlinearity::{cubic, defect, dm_nonlinearity};
use crate::quadrature::QuadratureRule;
use crate::spectral::{free_propagate, kernel, mass, project_low};

/// `S_lambda f (x) = lambda f(lambda x)`, realized by shrinking the box to
/// `L / lambda` and scaling samples by `lambda`; no interpolation.
pub fn rescale(f: &Field2D, lambda: f64) -> Result<Field2D> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(LabError::InvalidArgument(format!(
            "scaling parameter must be positive, got {lambda}"
        )));
    }
    let grid = f.grid().scaled(1.0 / lambda)?;
    Ok(Field2D::from_raw(
        grid,
        f.values().iter().map(|z| z * lambda).collect(),
    ))
}

/// `S_lambda` applied to a whole trajectory: `lambda u(lambda^2 t, lambda x)`.
pub fn rescale_trace(tr: &Trace, lambda: f64) -> Result<Trace> {
    let snaps = tr
        .snapshots()
        .iter()
        .map(|s| rescale(s, lambda))
        .collect::<Result<Vec<_>>>()?;
    tr.with_scaled_times(1.0 / (lambda * lambda), snaps)
}

/// Trapezoid weights for the stored times, with constant extension to the
/// window edges.
pub fn time_weights(times: &[f64], window: (f64, f64)) -> Vec<f64> {
    let n = times.len();
    let mut w = vec![0.0; n];
    for i in 1..n {
        let h = times[i] - times[i - 1];
        w[i - 1] += 0.5 * h;
        w[i] += 0.5 * h;
    }
    if n > 0 {
        w[0] += (times[0] - window.0).max(0.0);
        w[n - 1] += (window.1 - times[n - 1]).max(0.0);
    }
    w
}

/// `L^p_{t,x}` norm of a trace over its window.
pub fn lp_spacetime(tr: &Trace, p: f64) -> f64 {
    let w = time_weights(tr.times(), tr.window());
    let s: f64 = tr
        .snapshots()
        .iter()
        .zip(&w)
        .map(|(f, wt)| wt * f.lp_integral(p))
        .sum();
    s.powf(1.0 / p)
}

/// Norms of a trajectory over its window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    /// `max_t ||u(t)||_{L^2}`.
    pub linf_l2: f64,
    /// `||u||_{L^4_{t,x}}`.
    pub l4_spacetime: f64,
    /// `max_theta ||e^{i theta Delta} u||_{L^4_{t,x}}` over the theta grid.
    pub shifted_sup_l4: f64,
    pub window: (f64, f64),
    pub theta_grid_size: usize,
    /// The scanned values, one per `theta = j / K`, `j = 0..=K`.
    pub theta_scan: Vec<f64>,
}

/// `L^inf_t L^2`, `L^4_{t,x}` and the theta-shifted `L^4_{t,x}` supremum over
/// `theta in {0, 1/K, ..., 1}`.
pub fn spacetime_norms(tr: &Trace, k_theta: usize) -> Result<NormReport> {
    if k_theta == 0 {
        return Err(LabError::InvalidArgument("theta grid needs K >= 1".into()));
    }
    let weights = time_weights(tr.times(), tr.window());
    let linf_l2 = tr.snapshots().iter().map(mass).fold(0.0, f64::max);
    let k = kernel(tr.grid());
    let area = tr.grid().cell_area();

    let mut integrals = vec![0.0; k_theta + 1];
    for (snap, &wt) in tr.snapshots().iter().zip(&weights) {
        let mut spec = snap.values().to_vec();
        k.forward(&mut spec);
        for (j, acc) in integrals.iter_mut().enumerate() {
            let value = if j == 0 {
                snap.lp_integral(4.0)
            } else {
                let mut buf = spec.clone();
                k.propagate(&mut buf, j as f64 / k_theta as f64);
                k.inverse(&mut buf);
                area * buf.iter().map(|z| z.norm_sqr().powi(2)).sum::<f64>()
            };
            *acc += wt * value;
        }
    }
    let theta_scan: Vec<f64> = integrals.iter().map(|s| s.powf(0.25)).collect();
    Ok(NormReport {
        linf_l2,
        l4_spacetime: theta_scan[0],
        shifted_sup_l4: theta_scan.iter().copied().fold(0.0, f64::max),
        window: tr.window(),
        theta_grid_size: k_theta,
        theta_scan,
    })
}

/// Ratio of `||int_0^t e^{i(t - s + theta - sigma) Delta} F(s) ds||_{L^4_{t,x}}`
/// to `||F||_{L^{4/3}_{t,x}}`, with the inner integral by the trapezoid rule
/// on the stored times.
pub fn shifted_duhamel_ratio(forcing: &Trace, theta: f64, sigma: f64) -> Result<f64> {
    let denom = lp_spacetime(forcing, 4.0 / 3.0);
    if denom == 0.0 {
        return Err(LabError::ZeroForcing);
    }
    let shift = theta - sigma;
    let k = kernel(forcing.grid());
    let times = forcing.times();
    let weights = time_weights(times, forcing.window());
    let area = forcing.grid().cell_area();
    let len = forcing.grid().len();

    let pulled_back = |i: usize| {
        let mut s = forcing.snapshots()[i].values().to_vec();
        k.forward(&mut s);
        k.propagate(&mut s, -times[i]);
        s
    };
    let mut acc = vec![Complex64::new(0.0, 0.0); len];
    let mut prev = pulled_back(0);
    let mut total = 0.0;
    for j in 1..times.len() {
        let cur = pulled_back(j);
        let half = 0.5 * (times[j] - times[j - 1]);
        for ((a, p), c) in acc.iter_mut().zip(&prev).zip(&cur) {
            *a += half * (p + c);
        }
        let mut out = acc.clone();
        k.propagate(&mut out, times[j] + shift);
        k.inverse(&mut out);
        total += weights[j] * area * out.iter().map(|z| z.norm_sqr().powi(2)).sum::<f64>();
        prev = cur;
    }
    Ok(total.powf(0.25) / denom)
}

/// The three pieces of `F(S u) - F_DM(S u)` split at frequency `N`.
#[derive(Debug, Clone)]
pub struct DecompositionFields {
    /// `F(S u_{<=N}) - F_DM(S u_{<=N})`.
    pub low: Field2D,
    /// `F(S u) - F(S u_{<=N})`.
    pub high: Field2D,
    /// `F_DM(S u) - F_DM(S u_{<=N})`.
    pub dm_high: Field2D,
    /// `F(S u)`.
    pub cubic: Field2D,
    /// `F_DM(S u)`.
    pub dm: Field2D,
}

impl DecompositionFields {
    /// `low + high - dm_high`, which equals the full defect of `S u`.
    pub fn recombined(&self) -> Field2D {
        &(&self.low + &self.high) - &self.dm_high
    }

    /// `F(S u) - F_DM(S u)` from the unsplit terms.
    pub fn defect(&self) -> Field2D {
        &self.cubic - &self.dm
    }
}

/// Splits the defect of `S_lambda u` for one snapshot `u` of the base run.
pub fn decomposition_fields(
    u: &Field2D,
    lambda: f64,
    cutoff: f64,
    rule: &QuadratureRule,
) -> Result<DecompositionFields> {
    check_cutoff(u, cutoff)?;
    let su = rescale(u, lambda)?;
    let sl = rescale(&project_low(u, cutoff), lambda)?;
    let f_su = cubic(&su);
    let f_sl = cubic(&sl);
    let dm_su = dm_nonlinearity(&su, rule);
    let dm_sl = dm_nonlinearity(&sl, rule);
    Ok(DecompositionFields {
        low: &f_sl - &dm_sl,
        high: &f_su - &f_sl,
        dm_high: &dm_su - &dm_sl,
        cubic: f_su,
        dm: dm_su,
    })
}

fn check_cutoff(u: &Field2D, cutoff: f64) -> Result<()> {
    let nyq = u.grid().nyquist();
    if !(cutoff > 0.0 && cutoff < nyq) {
        return Err(LabError::InvalidArgument(format!(
            "cutoff N = {cutoff} must lie in (0, nyquist = {nyq})"
        )));
    }
    Ok(())
}

/// `L^{4/3}_{t,x}` norms of the decomposition over the rescaled window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub low_term: f64,
    pub high_term: f64,
    pub dm_high_term: f64,
    /// `||F(S u) - F_DM(S u)||_{L^{4/3}_{t,x}}`.
    pub defect_term: f64,
    /// `||F(S u)||_{L^{4/3}_{t,x}}`.
    pub cubic_term: f64,
    pub lambda: f64,
    pub cutoff_n: f64,
    /// Largest pointwise gap between `low + high - dm_high` and the unsplit
    /// defect over the stored times.
    pub identity_residual: f64,
}

impl DecompositionReport {
    pub fn defect_rel(&self) -> f64 {
        if self.cubic_term == 0.0 {
            0.0
        } else {
            self.defect_term / self.cubic_term
        }
    }
}

/// Evaluates the split at every stored time of the NLS trace `base_u` and
/// integrates over `[0, T / lambda^2]`.
pub fn decomposition_terms(
    base_u: &Trace,
    lambda: f64,
    cutoff: f64,
    rule: &QuadratureRule,
) -> Result<DecompositionReport> {
    check_cutoff(&base_u.snapshots()[0], cutoff)?;
    let stretch = 1.0 / (lambda * lambda);
    let window = base_u.window();
    let times: Vec<f64> = base_u.times().iter().map(|t| t * stretch).collect();
    let weights = time_weights(&times, (window.0 * stretch, window.1 * stretch));
    let p = 4.0 / 3.0;
    let mut sums = [0.0; 5];
    let mut identity_residual: f64 = 0.0;
    for (u, wt) in base_u.snapshots().iter().zip(&weights) {
        let d = decomposition_fields(u, lambda, cutoff, rule)?;
        let full = d.recombined();
        identity_residual = identity_residual.max((&full - &d.defect()).max_abs());
        for (s, f) in sums.iter_mut().zip([&d.low, &d.high, &d.dm_high, &full, &d.cubic]) {
            *s += wt * f.lp_integral(p);
        }
    }
    let norm = |s: f64| s.powf(1.0 / p);
    Ok(DecompositionReport {
        low_term: norm(sums[0]),
        high_term: norm(sums[1]),
        dm_high_term: norm(sums[2]),
        defect_term: norm(sums[3]),
        cubic_term: norm(sums[4]),
        lambda,
        cutoff_n: cutoff,
        identity_residual,
    })
}

/// `||defect(f)||_{L^2} / ||cubic(f)||_{L^2}` at a single time.
pub fn relative_defect(f: &Field2D, rule: &QuadratureRule) -> f64 {
    let c = mass(&cubic(f));
    if c == 0.0 {
        0.0
    } else {
        mass(&defect(f, rule)) / c
    }
}

/// Distance between the free-flow profiles `e^{-i t Delta} v(t)` at two times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileDistance {
    pub t_a: f64,
    pub t_b: f64,
    pub distance: f64,
}

/// Pairwise `L^2` distances of the profiles `e^{-i t Delta} v(t)` over all
/// stored times. A solution that scatters has profiles forming a Cauchy net.
pub fn scattering_diagnostic(tr: &Trace) -> Result<Vec<ProfileDistance>> {
    if tr.len() < 3 {
        return Err(LabError::InvalidArgument(
            "scattering diagnostic needs at least three snapshots".into(),
        ));
    }
    let profiles: Vec<Field2D> = tr
        .times()
        .iter()
        .zip(tr.snapshots())
        .map(|(&t, v)| free_propagate(v, -t))
        .collect();
    let mut out = Vec::new();
    for i in 0..profiles.len() {
        for j in i + 1..profiles.len() {
            out.push(ProfileDistance {
                t_a: tr.times()[i],
                t_b: tr.times()[j],
                distance: mass(&(&profiles[i] - &profiles[j])),
            });
        }
    }
    Ok(out)
}

/// Largest profile distance among pairs with both times in `[start, end]`.
pub fn tail_diameter(pairs: &[ProfileDistance], start: f64, end: f64) -> f64 {
    pairs
        .iter()
        .filter(|p| p.t_a >= start && p.t_b <= end)
        .map(|p| p.distance)
        .fold(0.0, f64::max)
}

/// Free evolution `e^{i t Delta} phi` sampled at `times`.
pub fn free_trace(phi: &Field2D, times: &[f64]) -> Result<Trace> {
    let snaps = times.iter().map(|&t| free_propagate(phi, t)).collect();
    Trace::new(times.to_vec(), snaps, Equation::Other)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::f64::consts::PI;

    #[test]
    fn rescale_identity_and_inverse() {
        let g = make_grid(2.0 * PI, 16).unwrap();
        let f = Field2D::gaussian(g, 1.2, 0.6, (0.2, -0.1));
        assert_eq!(rescale(&f, 1.0).unwrap(), f);
        let s = rescale(&f, 0.25).unwrap();
        assert!((s.grid().box_length() - 8.0 * PI).abs() < 1e-12);
        assert!((mass(&s) - mass(&f)).abs() < 1e-13 * mass(&f));
        let back = rescale(&s, 4.0).unwrap();
        assert_eq!(back.grid(), f.grid());
        assert!((&back - &f).max_abs() < 1e-15);
        assert!(rescale(&f, 0.0).is_err());
    }

    #[test]
    fn time_weights_trapezoid_and_extension() {
        let w = time_weights(&[0.0, 1.0, 3.0], (0.0, 3.0));
        assert_eq!(w, vec![0.5, 1.5, 1.0]);
        let w = time_weights(&[0.0], (0.0, 2.5));
        assert_eq!(w, vec![2.5]);
    }

    #[test]
    fn norms_of_zero_and_constant() {
        let g = make_grid(2.0 * PI, 16).unwrap();
        let z = Trace::new(vec![0.0, 1.0], vec![Field2D::zeros(g), Field2D::zeros(g)], Equation::Other)
            .unwrap();
        let r = spacetime_norms(&z, 4).unwrap();
        assert_eq!((r.linf_l2, r.l4_spacetime, r.shifted_sup_l4), (0.0, 0.0, 0.0));

        let t_len = 3.0;
        let one = Field2D::constant(g, Complex64::new(1.0, 0.0));
        let tr = Trace::new(vec![0.0], vec![one], Equation::Other)
            .unwrap()
            .with_window(t_len)
            .unwrap();
        let r = spacetime_norms(&tr, 4).unwrap();
        let expected = (t_len * 4.0 * PI * PI).powf(0.25);
        assert!((r.l4_spacetime - expected).abs() < 1e-12 * expected);
        assert!((r.linf_l2 - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn k_zero_rejected_and_zero_forcing_guarded() {
        let g = make_grid(2.0 * PI, 8).unwrap();
        let z = Trace::new(vec![0.0, 1.0], vec![Field2D::zeros(g), Field2D::zeros(g)], Equation::Other)
            .unwrap();
        assert!(spacetime_norms(&z, 0).is_err());
        assert!(matches!(shifted_duhamel_ratio(&z, 0.1, 0.2), Err(LabError::ZeroForcing)));
    }

    #[test]
    fn cutoff_at_nyquist_rejected() {
        let g = make_grid(2.0 * PI, 16).unwrap();
        let f = Field2D::gaussian(g, 1.0, 1.0, (0.0, 0.0));
        let rule = QuadratureRule::gauss_legendre(4).unwrap();
        assert!(decomposition_fields(&f, 0.5, 8.0, &rule).is_err());
        assert!(decomposition_fields(&f, 0.5, 9.0, &rule).is_err());
        assert!(decomposition_fields(&f, 0.5, 4.0, &rule).is_ok());
    }

    #[test]
    fn scattering_needs_three_snapshots() {
        let g = make_grid(2.0 * PI, 8).unwrap();
        let f = Field2D::gaussian(g, 1.0, 1.0, (0.0, 0.0));
        let tr = free_trace(&f, &[0.0, 1.0]).unwrap();
        assert!(scattering_diagnostic(&tr).is_err());
    }

    #[test]
    fn free_flow_profiles_coincide() {
        let g = make_grid(8.0 * PI, 64).unwrap();
        let f = Field2D::gaussian(g, 1.0, 1.0, (0.5, 0.0));
        let tr = free_trace(&f, &[0.0, 0.5, 1.0, 2.0]).unwrap();
        let pairs = scattering_diagnostic(&tr).unwrap();
        assert_eq!(pairs.len(), 6);
        assert!(pairs.iter().all(|p| p.distance <= 1e-12));

        let z = free_trace(&Field2D::zeros(g), &[0.0, 0.5, 1.0]).unwrap();
        assert!(scattering_diagnostic(&z).unwrap().iter().all(|p| p.distance == 0.0));
    }
}

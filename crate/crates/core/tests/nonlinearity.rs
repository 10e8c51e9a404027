use std::f64::consts::PI;

use dmnls_lab::analysis::{relative_defect, rescale};
use dmnls_lab::experiments::random_band_limited;
use dmnls_lab::grid::{make_grid, Field2D, GridSpec};
use dmnls_lab::nonlinearity::{cubic, defect, dh_dtau, dm_nonlinearity, shifted_cubic};
use dmnls_lab::quadrature::QuadratureRule;
use dmnls_lab::spectral::{fourier, mass};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn torus(n: usize) -> GridSpec {
    make_grid(2.0 * PI, n).unwrap()
}

fn gl(m: usize) -> QuadratureRule {
    QuadratureRule::gauss_legendre(m).unwrap()
}

fn seeded(grid: &GridSpec, band: f64, seed: u64) -> Field2D {
    random_band_limited(grid, band, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn rel_l2(a: &Field2D, b: &Field2D) -> f64 {
    mass(&(a - b)) / mass(b)
}

#[test]
fn quadrature_integrates_polynomials_exactly() {
    let r = gl(8);
    let w: f64 = r.weights().iter().sum();
    assert!((w - 1.0).abs() < 1e-15);
    for k in 0..16 {
        let exact = 1.0 / (k as f64 + 1.0);
        assert!((r.integrate(|s| s.powi(k)) - exact).abs() < 1e-14, "degree {k}");
    }
    assert!(QuadratureRule::gauss_legendre(0).is_err());
}

#[test]
fn single_mode_is_fixed_by_averaging() {
    let g = torus(16);
    for (j, a) in [((1, 0), 1.0), ((2, -3), 0.7), ((0, 0), 1.3)] {
        let f = Field2D::plane_wave(g, Complex64::new(a, 0.0), j);
        let dm = dm_nonlinearity(&f, &gl(8));
        assert!((&dm - &cubic(&f)).max_abs() <= 1e-12);
        assert!(mass(&(&dm - &f.scale(Complex64::new(a * a, 0.0)))) <= 1e-12);
    }
}

/// `F_DM(sum_p a_p e^{ip.x})` by the trilinear sum over modes: the output
/// mode `q = p1 - p2 + p3` carries `a_p1 conj(a_p2) a_p3` times the sigma
/// average of `exp(i s Omega)`, `Omega = |q|^2 - |p1|^2 + |p2|^2 - |p3|^2`.
fn trilinear_oracle(grid: GridSpec, modes: &[((i64, i64), Complex64)]) -> Field2D {
    let mut out = Field2D::zeros(grid);
    for &(p1, a1) in modes {
        for &(p2, a2) in modes {
            for &(p3, a3) in modes {
                let q = (p1.0 - p2.0 + p3.0, p1.1 - p2.1 + p3.1);
                let sq = |p: (i64, i64)| (p.0 * p.0 + p.1 * p.1) as f64;
                let omega = sq(q) - sq(p1) + sq(p2) - sq(p3);
                let avg = if omega == 0.0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    (Complex64::cis(omega) - 1.0) / Complex64::new(0.0, omega)
                };
                out = &out + &Field2D::plane_wave(grid, a1 * a2.conj() * a3 * avg, q);
            }
        }
    }
    out
}

#[test]
fn two_mode_output_matches_trilinear_oracle() {
    let g = torus(16);
    let one = Complex64::new(1.0, 0.0);
    let modes = [((1, 0), one), ((0, 1), one)];
    let psi = &Field2D::plane_wave(g, one, (1, 0)) + &Field2D::plane_wave(g, one, (0, 1));
    let dm = fourier(&dm_nonlinearity(&psi, &gl(8)));
    let oracle = fourier(&trilinear_oracle(g, &modes));
    let scale = fourier(&cubic(&psi)).modes().map(|m| m.2.norm()).fold(0.0, f64::max);
    let worst = (-8..8)
        .flat_map(|a| (-8..8).map(move |b| (a, b)))
        .map(|(a, b)| (dm.coefficient(a, b) - oracle.coefficient(a, b)).norm())
        .fold(0.0, f64::max);
    assert!(worst / scale <= 1e-10, "{:e}", worst / scale);
}

#[test]
fn three_mode_output_matches_trilinear_oracle_with_many_nodes() {
    let g = torus(32);
    let modes = [
        ((1, 0), Complex64::new(0.5, 0.2)),
        ((-1, 2), Complex64::new(0.1, -0.4)),
        ((2, 1), Complex64::new(-0.3, 0.0)),
    ];
    let mut psi = Field2D::zeros(g);
    for &(p, a) in &modes {
        psi = &psi + &Field2D::plane_wave(g, a, p);
    }
    let dm = dm_nonlinearity(&psi, &gl(32));
    assert!(rel_l2(&dm, &trilinear_oracle(g, &modes)) <= 1e-12);
}

#[test]
fn derivative_matches_central_difference() {
    let g = torus(64);
    let h = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..10 {
        let f = random_band_limited(&g, 2.0, &mut rng);
        for tau in [0.0, 0.4, 0.9] {
            let d = dh_dtau(&f, tau).unwrap();
            let fd = &(&shifted_cubic(&f, tau + h) - &shifted_cubic(&f, tau - h)) * (0.5 / h);
            let err = rel_l2(&fd, &d);
            assert!(err <= 1e-6, "tau = {tau}: {err:e}");
        }
    }
}

#[test]
fn derivative_vanishes_on_plane_waves() {
    let g = torus(16);
    let f = Field2D::plane_wave(g, Complex64::new(0.9, 0.4), (2, 1));
    assert!(dh_dtau(&f, 0.3).unwrap().max_abs() <= 1e-11);
}

#[test]
fn derivative_refuses_unresolved_fields() {
    let g = torus(16);
    let f = Field2D::plane_wave(g, Complex64::new(1.0, 0.0), (7, 0));
    assert!(dh_dtau(&f, 0.0).is_err());
}

#[test]
fn defect_is_difference_of_averages_and_integrates_derivative() {
    // F_DM - F = int_0^1 int_0^s dH/dtau dtau ds
    let g = torus(32);
    let f = seeded(&g, 1.5, 10);
    let outer = gl(16);
    let mut integral = Field2D::zeros(g);
    for (&s, &w) in outer.nodes().iter().zip(outer.weights()) {
        for (tau, v) in outer.on_interval(0.0, s) {
            integral = &integral + &(&dh_dtau(&f, tau).unwrap() * (w * v));
        }
    }
    let lhs = &dm_nonlinearity(&f, &outer) - &cubic(&f);
    assert!(mass(&(&lhs - &integral)) <= 1e-9 * mass(&cubic(&f)));
    let d = defect(&f, &outer);
    assert!(mass(&(&d + &lhs)) <= 1e-14 * mass(&cubic(&f)));
}

#[test]
fn relative_defect_falls_quadratically_under_rescaling() {
    // a width-2 Gaussian sits in the small-lambda regime already at lambda = 1/2
    let g = make_grid(16.0 * PI, 256).unwrap();
    let phi = Field2D::gaussian(g, 1.0, 2.0, (0.0, 0.0));
    let rule = gl(8);
    let r: Vec<f64> = [0.5, 0.25]
        .iter()
        .map(|&l| relative_defect(&rescale(&phi, l).unwrap(), &rule))
        .collect();
    let ratio = r[0] / r[1];
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn node_doubling_converges_for_band_limited_data() {
    let g = torus(32);
    let f = seeded(&g, 1.5, 11);
    let a = dm_nonlinearity(&f, &gl(16));
    let b = dm_nonlinearity(&f, &gl(32));
    assert!(rel_l2(&a, &b) <= 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn averaged_nonlinearity_is_mass_orthogonal(seed in any::<u64>(), band in 1.0f64..5.0) {
        let f = seeded(&torus(32), band, seed);
        let g = dm_nonlinearity(&f, &gl(8));
        let ip = g.scale(Complex64::i()).inner(&f);
        prop_assert!(ip.re.abs() <= 1e-10 * mass(&g) * mass(&f));
    }

    #[test]
    fn averaged_nonlinearity_is_gauge_covariant(seed in any::<u64>(), band in 1.0f64..5.0, phase in 0.0f64..(2.0 * PI)) {
        let f = seeded(&torus(32), band, seed);
        let rot = Complex64::cis(phase);
        let a = dm_nonlinearity(&f.scale(rot), &gl(8));
        let b = dm_nonlinearity(&f, &gl(8)).scale(rot);
        prop_assert!(rel_l2(&a, &b) <= 1e-12);
    }

    #[test]
    fn cubic_is_gauge_covariant_and_odd(seed in any::<u64>(), phase in 0.0f64..(2.0 * PI)) {
        let f = seeded(&torus(16), 3.0, seed);
        let rot = Complex64::cis(phase);
        prop_assert!(rel_l2(&cubic(&f.scale(rot)), &cubic(&f).scale(rot)) <= 1e-14);
    }
}

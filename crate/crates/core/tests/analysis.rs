use std::f64::consts::PI;

use dmnls_lab::analysis::{
    decomposition_fields, decomposition_terms, free_trace, lp_spacetime, rescale, rescale_trace,
    scattering_diagnostic, shifted_duhamel_ratio, spacetime_norms, tail_diameter,
};
use dmnls_lab::evolution::{solve_dmnls, solve_nls, Equation, SolverParams, Trace};
use dmnls_lab::experiments::random_band_limited;
use dmnls_lab::grid::{make_grid, Field2D, GridSpec};
use dmnls_lab::nonlinearity::defect;
use dmnls_lab::quadrature::QuadratureRule;
use dmnls_lab::spectral::mass;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn torus(n: usize) -> GridSpec {
    make_grid(2.0 * PI, n).unwrap()
}

fn gl8() -> QuadratureRule {
    QuadratureRule::gauss_legendre(8).unwrap()
}

fn seeded(grid: &GridSpec, band: f64, seed: u64) -> Field2D {
    random_band_limited(grid, band, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn forcing_from(seed: u64, times: usize) -> Trace {
    let g = torus(16);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_band_limited(&g, 3.0, &mut rng);
    let b = random_band_limited(&g, 3.0, &mut rng);
    let ts: Vec<f64> = (0..times).map(|i| i as f64 / (times - 1) as f64).collect();
    let snaps = ts.iter().map(|&t| &a + &(&b * t)).collect();
    Trace::new(ts, snaps, Equation::Other).unwrap()
}

#[test]
fn rescaling_shrinks_the_box_and_keeps_mass() {
    let g = make_grid(16.0 * PI, 64).unwrap();
    let f = Field2D::gaussian(g, 1.0, 1.0, (0.0, 0.0));
    let s = rescale(&f, 0.5).unwrap();
    assert_eq!(s.grid().box_length(), 32.0 * PI);
    assert_eq!(s.grid().n(), 64);
    assert!((mass(&s) - mass(&f)).abs() <= 1e-13 * mass(&f));
    assert!(rescale(&f, 0.0).is_err());
    assert!(rescale(&f, -1.0).is_err());
}

#[test]
fn rescaled_trace_stretches_time() {
    let f = Field2D::gaussian(make_grid(8.0 * PI, 32).unwrap(), 1.0, 1.0, (0.0, 0.0));
    let tr = free_trace(&f, &[0.0, 0.5, 1.0]).unwrap();
    let s = rescale_trace(&tr, 0.5).unwrap();
    assert_eq!(s.times(), &[0.0, 2.0, 4.0]);
    assert_eq!(s.window(), (0.0, 4.0));
}

#[test]
fn plane_wave_norms_are_shift_invariant() {
    let g = torus(16);
    let f = Field2D::plane_wave(g, Complex64::new(1.0, 0.0), (1, 2));
    let tr = free_trace(&f, &[0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
    let r = spacetime_norms(&tr, 16).unwrap();
    assert_eq!(r.theta_scan.len(), 17);
    assert!((r.shifted_sup_l4 - r.l4_spacetime).abs() <= 1e-12 * r.l4_spacetime);
    // |e^{ix}| = 1 on a (2 pi)^2 box over a unit window
    assert!((r.l4_spacetime - (4.0 * PI * PI).powf(0.25)).abs() <= 1e-12);
    assert!((r.linf_l2 - 2.0 * PI).abs() <= 1e-12);
}

#[test]
fn theta_grid_doubling_changes_the_supremum_by_under_one_percent() {
    let g = make_grid(8.0 * PI, 64).unwrap();
    let phi = Field2D::gaussian(g, 1.0, 1.0, (0.5, 0.0));
    let tr = solve_nls(&phi, &SolverParams::new(1e-2, 1.0).with_stride(5)).unwrap();
    let k = spacetime_norms(&tr, 16).unwrap().shifted_sup_l4;
    let k2 = spacetime_norms(&tr, 32).unwrap().shifted_sup_l4;
    assert!((k - k2).abs() <= 0.01 * k2);
}

#[test]
fn stride_halving_changes_the_l4_norm_little() {
    let g = make_grid(8.0 * PI, 64).unwrap();
    let phi = Field2D::gaussian(g, 1.0, 1.0, (0.0, 0.0));
    let fine = solve_nls(&phi, &SolverParams::new(1e-2, 1.0).with_stride(2)).unwrap();
    let coarse = solve_nls(&phi, &SolverParams::new(1e-2, 1.0).with_stride(4)).unwrap();
    let (a, b) = (lp_spacetime(&fine, 4.0), lp_spacetime(&coarse, 4.0));
    assert!((a - b).abs() <= 1e-3 * a);
}

#[test]
fn decomposition_of_plane_waves_vanishes() {
    let g = torus(32);
    let f = Field2D::plane_wave(g, Complex64::new(0.8, 0.0), (1, 0));
    let tr = free_trace(&f, &[0.0, 0.5, 1.0]).unwrap();
    let r = decomposition_terms(&tr, 0.5, 4.0, &gl8()).unwrap();
    for v in [r.low_term, r.high_term, r.dm_high_term, r.defect_term, r.identity_residual] {
        assert!(v <= 1e-10, "{r:?}");
    }
}

#[test]
fn decomposition_recombines_to_the_defect() {
    let g = make_grid(8.0 * PI, 64).unwrap();
    let f = Field2D::gaussian(g, 1.0, 1.0, (0.3, -0.2));
    for (lambda, n) in [(1.0, 2.0), (0.5, 1.0), (0.25, 4.0)] {
        let d = decomposition_fields(&f, lambda, n, &gl8()).unwrap();
        let full = defect(&rescale(&f, lambda).unwrap(), &gl8());
        assert!((&d.recombined() - &full).max_abs() <= 1e-12);
        assert!((&d.defect() - &full).max_abs() <= 1e-14);
    }
}

#[test]
fn cutoff_above_the_data_leaves_no_high_terms() {
    let g = torus(64);
    let f = seeded(&g, 4.0, 3);
    let n = g.nyquist() / 3.0;
    let tr = free_trace(&f, &[0.0, 0.5]).unwrap();
    let r = decomposition_terms(&tr, 1.0, n, &gl8()).unwrap();
    assert!(r.high_term <= 1e-10 && r.dm_high_term <= 1e-10, "{r:?}");
    assert!((r.low_term - r.defect_term).abs() <= 1e-10 * r.defect_term);
}

#[test]
fn halving_the_cutoff_trades_low_for_high() {
    let g = make_grid(16.0 * PI, 128).unwrap();
    let phi = Field2D::gaussian(g, 1.0, 1.0, (0.0, 0.0));
    let u = solve_nls(&phi, &SolverParams::new(1e-2, 1.0).with_stride(10)).unwrap();
    let wide = decomposition_terms(&u, 0.25, 4.0, &gl8()).unwrap();
    let narrow = decomposition_terms(&u, 0.25, 2.0, &gl8()).unwrap();
    assert!(narrow.high_term > wide.high_term);
    assert!(narrow.low_term < wide.low_term);
    assert!(wide.identity_residual <= 1e-10 && narrow.identity_residual <= 1e-10);
}

#[test]
fn free_profiles_do_not_move() {
    let g = make_grid(8.0 * PI, 64).unwrap();
    let f = Field2D::gaussian(g, 1.0, 1.0, (0.3, -0.2));
    let tr = free_trace(&f, &[0.0, 0.5, 1.0, 3.0]).unwrap();
    let pairs = scattering_diagnostic(&tr).unwrap();
    assert_eq!(pairs.len(), 6);
    assert!(pairs.iter().all(|p| p.distance <= 1e-12));
}

#[test]
fn small_dispersion_managed_data_settles() {
    let g = make_grid(16.0 * PI, 128).unwrap();
    let phi = Field2D::gaussian(g, 0.3, 1.0, (0.0, 0.0));
    let tr = solve_dmnls(&phi, &SolverParams::new(1e-2, 4.0).with_stride(25)).unwrap();
    let pairs = scattering_diagnostic(&tr).unwrap();
    let early = tail_diameter(&pairs, 0.0, 2.0);
    let late = tail_diameter(&pairs, 2.0, 4.0);
    assert!(early >= 2.0 * late, "early {early:e}, late {late:e}");
}

#[test]
fn single_time_forcing_has_a_positive_ratio() {
    let g = torus(16);
    let a = seeded(&g, 3.0, 5);
    let times = vec![0.0, 0.25, 0.5, 0.75, 1.0];
    let snaps = (0..5).map(|i| if i == 2 { a.clone() } else { Field2D::zeros(g) }).collect();
    let tr = Trace::new(times, snaps, Equation::Other).unwrap();
    let r = shifted_duhamel_ratio(&tr, 0.2, 0.7).unwrap();
    assert!(r.is_finite() && r > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rescaling_is_an_isometry(seed in any::<u64>(), lambda in 0.05f64..20.0) {
        let f = seeded(&torus(16), 4.0, seed);
        let s = rescale(&f, lambda).unwrap();
        prop_assert!((mass(&s) - mass(&f)).abs() <= 1e-12 * mass(&f));
        let back = rescale(&s, 1.0 / lambda).unwrap();
        // the round trip may land on a box length one ulp away, so compare samples
        let gap = back.values().iter().zip(f.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(gap <= 1e-13 * f.max_abs());
    }

    #[test]
    fn duhamel_ratio_depends_on_the_shift_difference(seed in any::<u64>(), theta in 0.0f64..1.0, sigma in 0.0f64..1.0, c in -0.5f64..0.5) {
        let tr = forcing_from(seed, 5);
        let r1 = shifted_duhamel_ratio(&tr, theta, sigma).unwrap();
        let r2 = shifted_duhamel_ratio(&tr, theta + c, sigma + c).unwrap();
        prop_assert!((r1 - r2).abs() <= 1e-12 * r1);
    }

    #[test]
    fn longer_windows_never_shrink_norms(seed in any::<u64>(), extra in 0.0f64..3.0) {
        let tr = forcing_from(seed, 4);
        let short = spacetime_norms(&tr, 4).unwrap();
        let long = spacetime_norms(&tr.clone().with_window(1.0 + extra).unwrap(), 4).unwrap();
        prop_assert!(long.l4_spacetime >= short.l4_spacetime);
        prop_assert!(long.linf_l2 >= short.linf_l2);
        prop_assert!(long.shifted_sup_l4 >= short.shifted_sup_l4);
    }
}

//! Orchestrated studies: the lambda sweep comparing rescaled NLS with the
//! dispersion-managed equation, the defect-scaling scan, the stability
//! probe, the shifted Strichartz probe, a plain simulation, and the
//! self-test of module invariants.
//!
//! A row that fails (solver instability, bad grid) is recorded with its
//! identifying columns only and listed in `failures`; the sweep continues.

use std::collections::BTreeMap;
use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    decomposition_terms, lp_spacetime, rescale, rescale_trace, shifted_duhamel_ratio,
    spacetime_norms, time_weights,
};
use crate::config::{Experiment, RunConfig};
use crate::error::{LabError, Result};
use crate::evolution::{solve_dmnls_with_rule, solve_nls, Equation, SolverParams, Trace};
use crate::grid::{Field2D, GridSpec};
use crate::nonlinearity::{cubic, dm_nonlinearity, DERIVATIVE_TAIL_LIMIT};
use crate::quadrature::QuadratureRule;
use crate::spectral::{boundary_mass_fraction, kernel, mass, spectral_tail_fraction};

mod selftest;

pub use selftest::{selftest, selftest_with, SelfCheck, SelfTestFixture, SelfTestReport};

/// Rows whose boundary mass exceeds this fraction are flagged.
pub const BOUNDARY_MASS_LIMIT: f64 = 1e-8;

/// One line of `report.csv`. Columns an experiment does not measure stay empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub lambda: Option<f64>,
    pub eta: Option<f64>,
    pub grid_n: Option<usize>,
    pub box_length: Option<f64>,
    pub dt: Option<f64>,
    pub window: Option<f64>,
    pub err_linf_l2: Option<f64>,
    pub err_l4: Option<f64>,
    pub defect_rel: Option<f64>,
    pub low_term: Option<f64>,
    pub high_term: Option<f64>,
    pub dm_high_term: Option<f64>,
    pub mass_drift_nls: Option<f64>,
    pub mass_drift_dmnls: Option<f64>,
    pub boundary_mass: Option<f64>,
    pub runtime_sec: Option<f64>,
}

impl ReportRow {
    fn on_grid(grid: &GridSpec, dt: f64, window: f64) -> Self {
        Self {
            grid_n: Some(grid.n()),
            box_length: Some(grid.box_length()),
            dt: Some(dt),
            window: Some(window),
            ..Self::default()
        }
    }

    /// All present numeric entries.
    pub fn numbers(&self) -> Vec<f64> {
        [
            self.lambda,
            self.eta,
            self.grid_n.map(|n| n as f64),
            self.box_length,
            self.dt,
            self.window,
            self.err_linf_l2,
            self.err_l4,
            self.defect_rel,
            self.low_term,
            self.high_term,
            self.dm_high_term,
            self.mass_drift_nls,
            self.mass_drift_dmnls,
            self.boundary_mass,
            self.runtime_sec,
        ]
        .into_iter()
        .flatten()
        .collect()
    }
}

/// Per-forcing summary of the shifted Duhamel scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub forcing: usize,
    pub max_ratio: f64,
    pub min_ratio: f64,
    pub max_over_min: f64,
    /// Largest relative spread among grid points sharing `theta - sigma`.
    pub diagonal_spread: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub experiment: Experiment,
    pub rows: Vec<ReportRow>,
    pub fitted_slopes: BTreeMap<String, f64>,
    /// Named scalar diagnostics (cross-checks, residuals, ratios).
    pub checks: BTreeMap<String, f64>,
    /// Acceptance thresholds the study was judged against.
    pub thresholds: BTreeMap<String, f64>,
    pub flags: Vec<String>,
    pub failures: Vec<String>,
    pub probes: Vec<ProbeRow>,
    /// Wall-clock seconds per row, kept out of the CSV unless requested.
    pub runtimes: Vec<f64>,
    /// Named fields to be written as binary snapshots.
    pub snapshots: Vec<(String, Field2D)>,
}

impl ExperimentReport {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            rows: Vec::new(),
            fitted_slopes: BTreeMap::new(),
            checks: BTreeMap::new(),
            thresholds: BTreeMap::new(),
            flags: Vec::new(),
            failures: Vec::new(),
            probes: Vec::new(),
            runtimes: Vec::new(),
            snapshots: Vec::new(),
        }
    }

    /// The values of one column over the rows where it is present, paired
    /// with the row's `lambda` or `eta`.
    pub fn column(&self, name: &str) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter_map(|r| {
                let x = r.lambda.or(r.eta)?;
                let y = match name {
                    "err_linf_l2" => r.err_linf_l2,
                    "err_l4" => r.err_l4,
                    "defect_rel" => r.defect_rel,
                    "low_term" => r.low_term,
                    "high_term" => r.high_term,
                    "dm_high_term" => r.dm_high_term,
                    "mass_drift_nls" => r.mass_drift_nls,
                    "mass_drift_dmnls" => r.mass_drift_dmnls,
                    "boundary_mass" => r.boundary_mass,
                    _ => None,
                }?;
                Some((x, y))
            })
            .collect()
    }

    fn push_row(&mut self, row: ReportRow, started: Instant, record_runtime: bool) {
        let secs = started.elapsed().as_secs_f64();
        self.runtimes.push(secs);
        let row = ReportRow {
            runtime_sec: record_runtime.then_some(secs),
            ..row
        };
        if let Some(b) = row.boundary_mass {
            if b > BOUNDARY_MASS_LIMIT {
                self.flags.push(format!(
                    "{}: boundary mass {b:e} exceeds {BOUNDARY_MASS_LIMIT:e}",
                    row_label(&row)
                ));
            }
        }
        self.rows.push(row);
    }

    fn push_failure(&mut self, row: ReportRow, err: &LabError, started: Instant) {
        self.failures.push(format!("{}: {err}", row_label(&row)));
        self.runtimes.push(started.elapsed().as_secs_f64());
        self.rows.push(row);
    }

    fn fit(&mut self, name: &str, column: &str) {
        let pts = self.column(column);
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        if let Some(s) = fit_loglog_slope(&xs, &ys) {
            self.fitted_slopes.insert(name.to_string(), s);
        }
    }
}

/// Identifying columns of a rescaled row; geometry is left empty when the
/// rescaled box is not representable.
fn rescaled_ident(phi: &Field2D, lambda: f64, sp: &SolverParams) -> ReportRow {
    let geometry = match phi.grid().scaled(1.0 / lambda) {
        Ok(g) if sp.dt.is_finite() && sp.t_final.is_finite() => ReportRow::on_grid(&g, sp.dt, sp.t_final),
        _ => ReportRow::default(),
    };
    ReportRow {
        lambda: Some(lambda),
        ..geometry
    }
}

fn row_label(row: &ReportRow) -> String {
    match (row.lambda, row.eta) {
        (Some(l), _) => format!("lambda={l}"),
        (None, Some(e)) => format!("eta={e}"),
        _ => "row".to_string(),
    }
}

fn keyed(name: &str, param: &str, value: f64) -> String {
    format!("{name}@{param}={value}")
}

/// Least-squares slope of `log y` against `log x` over the points where
/// both are positive and finite. `None` with fewer than two distinct `x`.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Random field with independent complex normal Fourier coefficients on the
/// modes `|xi| <= band`, normalized to unit `L^2` norm.
pub fn random_band_limited(grid: &GridSpec, band: f64, rng: &mut ChaCha8Rng) -> Field2D {
    let k = kernel(grid);
    let n = grid.n();
    let xi = grid.wavenumbers();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
    // spectral layout: entry r * n + c carries (xi_1, xi_2) = (xi[c], xi[r])
    for (r, &b) in xi.iter().enumerate() {
        for (c, &a) in xi.iter().enumerate() {
            if a * a + b * b <= band * band {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                coeffs[r * n + c] = Complex64::new(re, im);
            }
        }
    }
    k.inverse(&mut coeffs);
    let f = Field2D::from_raw(*grid, coeffs);
    let m = mass(&f);
    if m == 0.0 {
        f
    } else {
        f.scale(Complex64::new(1.0 / m, 0.0))
    }
}

/// Discretization shared by the sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyParams {
    /// Base-box solver settings; rescaled runs stretch `dt` and `t_final` by `lambda^-2`.
    pub solver: SolverParams,
    pub theta_grid: usize,
    pub record_runtime: bool,
    pub richardson_check: bool,
    pub keep_snapshots: bool,
}

impl StudyParams {
    pub fn new(solver: SolverParams) -> Self {
        Self {
            solver,
            theta_grid: 16,
            record_runtime: false,
            richardson_check: false,
            keep_snapshots: false,
        }
    }

    pub fn from_config(cfg: &RunConfig) -> Self {
        Self {
            solver: SolverParams::new(cfg.dt, cfg.t_final)
                .with_stride(cfg.snapshot_stride)
                .with_quad_nodes(cfg.quad_nodes)
                .with_method(cfg.method),
            theta_grid: cfg.theta_grid,
            record_runtime: cfg.record_runtime,
            richardson_check: cfg.richardson_check,
            keep_snapshots: cfg.write_snapshots,
        }
    }

    fn rule(&self) -> Result<QuadratureRule> {
        QuadratureRule::gauss_legendre(self.solver.quad_nodes)
    }

    /// NLS settings; sweeps always use the interaction-picture integrator.
    fn nls_solver(&self) -> SolverParams {
        self.solver.clone().with_method(crate::evolution::Method::InteractionRk4)
    }
}

fn check_lambdas(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty()
        || lambdas.iter().any(|&l| !(l > 0.0 && l <= 1.0))
        || lambdas.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(LabError::InvalidArgument(format!(
            "lambdas must lie in (0, 1] and strictly decrease, got {lambdas:?}"
        )));
    }
    Ok(())
}

fn check_resolved(phi: &Field2D) -> Result<()> {
    let tail = spectral_tail_fraction(phi);
    if tail > DERIVATIVE_TAIL_LIMIT {
        return Err(LabError::SpectralTail {
            fraction: tail,
            limit: DERIVATIVE_TAIL_LIMIT,
        });
    }
    Ok(())
}

fn boundary_of(traces: &[&Trace]) -> f64 {
    traces
        .iter()
        .flat_map(|t| t.snapshots())
        .map(boundary_mass_fraction)
        .fold(0.0, f64::max)
}

/// `||F(u) - F_DM(u)||_{L^{4/3}_{t,x}} / ||F(u)||_{L^{4/3}_{t,x}}` over the trace window.
fn windowed_defect_ratio(u: &Trace, rule: &QuadratureRule) -> f64 {
    let p = 4.0 / 3.0;
    let w = time_weights(u.times(), u.window());
    let (mut num, mut den) = (0.0, 0.0);
    for (f, wt) in u.snapshots().iter().zip(&w) {
        let c = cubic(f);
        num += wt * (&c - &dm_nonlinearity(f, rule)).lp_integral(p);
        den += wt * c.lp_integral(p);
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).powf(1.0 / p)
    }
}

fn halved(params: &SolverParams) -> SolverParams {
    let mut p = params.clone();
    p.dt *= 0.5;
    p.snapshot_stride *= 2;
    p
}

/// Measurements of one row plus side products destined for the report.
struct RowOutput {
    row: ReportRow,
    checks: Vec<(String, f64)>,
    snapshots: Vec<(String, Field2D)>,
}

impl ExperimentReport {
    fn absorb(&mut self, out: RowOutput, started: Instant, record_runtime: bool) {
        self.checks.extend(out.checks);
        self.snapshots.extend(out.snapshots);
        self.push_row(out.row, started, record_runtime);
    }
}

/// For each `lambda`, solves NLS and the dispersion-managed equation from
/// `rescale(phi, lambda)` on the box `L / lambda` over `[0, T / lambda^2]`
/// and records their distance together with run diagnostics.
///
/// The NLS run is cross-checked against the exact rescaling of the base
/// (`lambda = 1`) NLS trajectory.
pub fn limit_study(phi: &Field2D, lambdas: &[f64], p: &StudyParams) -> Result<ExperimentReport> {
    check_lambdas(lambdas)?;
    check_resolved(phi)?;
    let rule = p.rule()?;
    let nls = p.nls_solver();
    nls.validate(Equation::Nls)?;
    let mut report = ExperimentReport::new(Experiment::LimitStudy);
    report.thresholds.insert("final_over_initial_max".into(), 0.1);
    report.thresholds.insert("scaling_crosscheck_max".into(), 1e-6);
    report.thresholds.insert("boundary_mass_max".into(), BOUNDARY_MASS_LIMIT);

    let mut base: Option<Trace> = None;
    if lambdas[0] != 1.0 {
        match solve_nls(phi, &nls) {
            Ok(t) => base = Some(t),
            Err(e) => report.flags.push(format!("base run failed, no scaling cross-check: {e}")),
        }
    }

    for &lambda in lambdas {
        let started = Instant::now();
        let sp = nls.rescaled(lambda);
        let ident = rescaled_ident(phi, lambda, &sp);
        match limit_row(phi, lambda, &sp, &rule, p, &ident, base.as_ref()) {
            Ok((out, u)) => {
                if lambda == 1.0 {
                    base = Some(u);
                }
                report.absorb(out, started, p.record_runtime);
            }
            Err(e) => report.push_failure(ident, &e, started),
        }
    }

    report.fit("err_linf_l2_vs_lambda", "err_linf_l2");
    report.fit("err_l4_vs_lambda", "err_l4");
    let errs: Vec<f64> = report.rows.iter().filter_map(|r| r.err_linf_l2).collect();
    if errs.len() >= 2 {
        let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
        report
            .checks
            .insert("err_linf_l2_strictly_decreasing".into(), if decreasing { 1.0 } else { 0.0 });
        if errs[0] > 0.0 {
            report.checks.insert("final_over_initial".into(), errs[errs.len() - 1] / errs[0]);
        }
    }
    Ok(report)
}

fn limit_row(
    phi: &Field2D,
    lambda: f64,
    sp: &SolverParams,
    rule: &QuadratureRule,
    p: &StudyParams,
    ident: &ReportRow,
    base: Option<&Trace>,
) -> Result<(RowOutput, Trace)> {
    let s = rescale(phi, lambda)?;
    let u = solve_nls(&s, sp)?;
    let v = solve_dmnls_with_rule(&s, sp, rule)?;
    let diff = u.difference(&v)?;
    let row = ReportRow {
        err_linf_l2: Some(diff.snapshots().iter().map(mass).fold(0.0, f64::max)),
        err_l4: Some(lp_spacetime(&diff, 4.0)),
        defect_rel: Some(windowed_defect_ratio(&u, rule)),
        mass_drift_nls: Some(u.mass_drift()),
        mass_drift_dmnls: Some(v.mass_drift()),
        boundary_mass: Some(boundary_of(&[&u, &v])),
        ..ident.clone()
    };
    let mut checks = Vec::new();
    // the lambda = 1 run is the base itself
    let cross = match base {
        Some(b) => Some(rescale_trace(b, lambda)?.linf_l2_distance(&u)?),
        None if lambda == 1.0 => Some(0.0),
        None => None,
    };
    if let Some(c) = cross {
        checks.push((keyed("scaling_crosscheck", "lambda", lambda), c));
    }
    if p.richardson_check {
        let sp2 = halved(sp);
        let u2 = solve_nls(&s, &sp2)?;
        let v2 = solve_dmnls_with_rule(&s, &sp2, rule)?;
        checks.push((keyed("richardson_nls", "lambda", lambda), u.linf_l2_distance(&u2)?));
        checks.push((keyed("richardson_dmnls", "lambda", lambda), v.linf_l2_distance(&v2)?));
    }
    let mut snapshots = Vec::new();
    if p.keep_snapshots {
        snapshots.push((format!("nls_lambda{lambda}_final"), u.last().clone()));
        snapshots.push((format!("dmnls_lambda{lambda}_final"), v.last().clone()));
    }
    Ok((RowOutput { row, checks, snapshots }, u))
}

/// Splits the defect of each rescaled NLS trajectory at frequency `cutoff`
/// and records the `L^{4/3}_{t,x}` size of the low, high and dm-high parts.
/// All rows share one base NLS run; rescaling is exact.
pub fn defect_scan(
    phi: &Field2D,
    lambdas: &[f64],
    cutoff: f64,
    rule: &QuadratureRule,
    p: &StudyParams,
) -> Result<ExperimentReport> {
    check_lambdas(lambdas)?;
    check_resolved(phi)?;
    let nyq = phi.grid().nyquist();
    if !(cutoff > 0.0 && cutoff < nyq) {
        return Err(LabError::InvalidArgument(format!(
            "cutoff N = {cutoff} must lie in (0, nyquist = {nyq})"
        )));
    }
    let mut report = ExperimentReport::new(Experiment::DefectScan);
    report.thresholds.insert("low_term_slope_min".into(), 1.8);
    report.thresholds.insert("low_term_slope_max".into(), 2.2);
    let nls = p.nls_solver();
    let base = solve_nls(phi, &nls)?;
    let drift = base.mass_drift();
    let boundary = boundary_of(&[&base]);
    for &lambda in lambdas {
        let started = Instant::now();
        let sp = nls.rescaled(lambda);
        let ident = rescaled_ident(phi, lambda, &sp);
        match decomposition_terms(&base, lambda, cutoff, rule) {
            Ok(d) => {
                let row = ReportRow {
                    defect_rel: Some(d.defect_rel()),
                    low_term: Some(d.low_term),
                    high_term: Some(d.high_term),
                    dm_high_term: Some(d.dm_high_term),
                    mass_drift_nls: Some(drift),
                    boundary_mass: Some(boundary),
                    ..ident
                };
                let out = RowOutput {
                    row,
                    checks: vec![
                        (keyed("identity_residual", "lambda", lambda), d.identity_residual),
                        (keyed("defect_term", "lambda", lambda), d.defect_term),
                        (keyed("cubic_term", "lambda", lambda), d.cubic_term),
                    ],
                    snapshots: Vec::new(),
                };
                report.absorb(out, started, p.record_runtime);
            }
            Err(e) => report.push_failure(ident, &e, started),
        }
    }
    report.checks.insert("cutoff_n".into(), cutoff);
    report.fit("low_term_vs_lambda", "low_term");
    report.fit("defect_rel_vs_lambda", "defect_rel");
    Ok(report)
}

/// Solves the dispersion-managed equation from `u0` and from
/// `u0 + eta * perturbation` for each `eta` and records the distance of the
/// two trajectories in `L^inf_t L^2` (`err_linf_l2`) and in the shifted
/// `L^4_{t,x}` supremum (`err_l4`).
pub fn stability_probe(
    u0: &Field2D,
    perturbation: &Field2D,
    etas: &[f64],
    p: &StudyParams,
) -> Result<ExperimentReport> {
    if u0.grid() != perturbation.grid() {
        return Err(LabError::GridMismatch("data and perturbation on different grids".into()));
    }
    let pm = mass(perturbation);
    if (pm - 1.0).abs() > 1e-10 {
        return Err(LabError::InvalidArgument(format!(
            "perturbation must have unit L^2 norm, got {pm}"
        )));
    }
    if etas.is_empty()
        || etas.iter().any(|&e| !(e.is_finite() && e >= 0.0))
        || etas.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(LabError::InvalidArgument(format!(
            "etas must be nonnegative and strictly decrease, got {etas:?}"
        )));
    }
    let rule = p.rule()?;
    let sp = p.solver.clone();
    let mut report = ExperimentReport::new(Experiment::Stability);
    report.thresholds.insert("linf_l2_slope_min".into(), 0.8);
    report.thresholds.insert("linf_l2_slope_max".into(), 1.2);
    let reference = solve_dmnls_with_rule(u0, &sp, &rule)?;
    for &eta in etas {
        let started = Instant::now();
        let ident = ReportRow {
            eta: Some(eta),
            ..ReportRow::on_grid(u0.grid(), sp.dt, sp.t_final)
        };
        let outcome = (|| -> Result<RowOutput> {
            let v = if eta == 0.0 {
                reference.clone()
            } else {
                let data = u0 + &(perturbation * eta);
                solve_dmnls_with_rule(&data, &sp, &rule)?
            };
            let diff = v.difference(&reference)?;
            let norms = spacetime_norms(&diff, p.theta_grid)?;
            Ok(RowOutput {
                row: ReportRow {
                    err_linf_l2: Some(norms.linf_l2),
                    err_l4: Some(norms.shifted_sup_l4),
                    mass_drift_dmnls: Some(v.mass_drift()),
                    boundary_mass: Some(boundary_of(&[&v])),
                    ..ident.clone()
                },
                checks: vec![(keyed("initial_distance", "eta", eta), mass(&diff.snapshots()[0]))],
                snapshots: Vec::new(),
            })
        })();
        match outcome {
            Ok(out) => report.absorb(out, started, p.record_runtime),
            Err(e) => report.push_failure(ident, &e, started),
        }
    }
    report.checks.insert("reference_mass_drift".into(), reference.mass_drift());
    report.fit("linf_l2_vs_eta", "err_linf_l2");
    report.fit("shifted_l4_vs_eta", "err_l4");
    Ok(report)
}

/// Unit-norm Gaussian bump off the origin, the default perturbation.
pub fn default_perturbation(grid: &GridSpec, width: f64) -> Field2D {
    let g = Field2D::gaussian(*grid, 1.0, width, (1.0, 0.5));
    let m = mass(&g);
    g.scale(Complex64::new(1.0 / m, 0.0))
}

/// Settings of the shifted Strichartz probe.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeParams {
    pub seed: u64,
    pub count: usize,
    pub grid: GridSpec,
    /// Forcings live on `[0, window]`.
    pub window: f64,
    /// Stored times per forcing.
    pub times: usize,
    /// Frequency radius of the random profiles.
    pub band: f64,
    /// Points per axis of the `(theta, sigma)` grid on `[0, 1]^2`.
    pub shift_grid: usize,
}

impl ProbeParams {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        Ok(Self {
            seed: cfg.seed,
            count: cfg.probe_count,
            grid: cfg.grid()?,
            window: cfg.t_final,
            times: cfg.probe_times,
            band: cfg.probe_band,
            shift_grid: cfg.shift_grid,
        })
    }
}

/// The random forcing `F(t) = a + (t / window) b` with seeded band-limited
/// profiles `a`, `b`.
pub fn random_forcing(p: &ProbeParams, rng: &mut ChaCha8Rng) -> Result<Trace> {
    let a = random_band_limited(&p.grid, p.band, rng);
    let b = random_band_limited(&p.grid, p.band, rng);
    let times: Vec<f64> = (0..p.times)
        .map(|i| p.window * i as f64 / (p.times - 1) as f64)
        .collect();
    let snaps = times
        .iter()
        .map(|&t| &a + &(&b * (t / p.window)))
        .collect();
    Trace::new(times, snaps, Equation::Other)
}

/// Ratios `shifted_duhamel_ratio(F, theta_a, sigma_b)` on the uniform grid,
/// indexed `[a][b]`.
pub fn shift_scan(forcing: &Trace, shift_grid: usize) -> Result<Vec<Vec<f64>>> {
    let pts: Vec<f64> = (0..shift_grid)
        .map(|i| i as f64 / (shift_grid - 1) as f64)
        .collect();
    pts.iter()
        .map(|&theta| {
            pts.iter()
                .map(|&sigma| shifted_duhamel_ratio(forcing, theta, sigma))
                .collect()
        })
        .collect()
}

fn summarize_scan(forcing: usize, scan: &[Vec<f64>]) -> ProbeRow {
    let all = scan.iter().flatten().copied();
    let max_ratio = all.clone().fold(f64::NEG_INFINITY, f64::max);
    let min_ratio = all.fold(f64::INFINITY, f64::min);
    let g = scan.len() as isize;
    let mut diagonal_spread: f64 = 0.0;
    for d in -(g - 1)..g {
        let vals: Vec<f64> = (0..g)
            .filter_map(|a| {
                let b = a - d;
                (0..g).contains(&b).then(|| scan[a as usize][b as usize])
            })
            .collect();
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        diagonal_spread = diagonal_spread.max((hi - lo) / hi);
    }
    ProbeRow {
        forcing,
        max_ratio,
        min_ratio,
        max_over_min: max_ratio / min_ratio,
        diagonal_spread,
    }
}

/// Scans the shifted Duhamel ratio over the `(theta, sigma)` grid for
/// `count` seeded random forcings.
pub fn strichartz_probe(p: &ProbeParams) -> Result<ExperimentReport> {
    if p.count == 0 || p.shift_grid < 2 || p.times < 2 || !(p.window > 0.0) {
        return Err(LabError::InvalidArgument(
            "probe needs count >= 1, shift_grid >= 2, times >= 2 and a positive window".into(),
        ));
    }
    let mut report = ExperimentReport::new(Experiment::StrichartzProbe);
    report.thresholds.insert("max_over_min_max".into(), 3.0);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let dt = p.window / (p.times - 1) as f64;
    for i in 0..p.count {
        let started = Instant::now();
        let ident = ReportRow::on_grid(&p.grid, dt, p.window);
        // forcings are drawn in order so each one depends only on the seed and its index
        let forcing = random_forcing(p, &mut rng);
        match forcing.and_then(|f| shift_scan(&f, p.shift_grid)) {
            Ok(scan) => {
                report.probes.push(summarize_scan(i, &scan));
                report.push_row(ident, started, false);
            }
            Err(e) => report.push_failure(ident, &e, started),
        }
    }
    if !report.probes.is_empty() {
        let worst = |f: fn(&ProbeRow) -> f64| report.probes.iter().map(f).fold(0.0, f64::max);
        let w_ratio = worst(|r| r.max_over_min);
        let w_diag = worst(|r| r.diagonal_spread);
        report.checks.insert("worst_max_over_min".into(), w_ratio);
        report.checks.insert("worst_diagonal_spread".into(), w_diag);
    }
    Ok(report)
}

/// A single run of either equation from `phi`.
pub fn simulate(
    phi: &Field2D,
    equation: Equation,
    params: &SolverParams,
    keep_snapshots: bool,
    record_runtime: bool,
) -> Result<ExperimentReport> {
    let started = Instant::now();
    let tr = match equation {
        Equation::Nls => solve_nls(phi, params)?,
        Equation::Dmnls => {
            solve_dmnls_with_rule(phi, params, &QuadratureRule::gauss_legendre(params.quad_nodes)?)?
        }
        Equation::Other => {
            return Err(LabError::InvalidArgument("simulate needs nls or dmnls".into()))
        }
    };
    let (steps, h) = params.steps();
    let mut report = ExperimentReport::new(Experiment::Simulate);
    let drift = Some(tr.mass_drift());
    let row = ReportRow {
        mass_drift_nls: drift.filter(|_| equation == Equation::Nls),
        mass_drift_dmnls: drift.filter(|_| equation == Equation::Dmnls),
        boundary_mass: Some(boundary_of(&[&tr])),
        ..ReportRow::on_grid(phi.grid(), h, params.t_final)
    };
    report.checks.insert("steps".into(), steps as f64);
    report.checks.insert("initial_mass".into(), mass(phi));
    report.checks.insert("final_mass".into(), mass(tr.last()));
    report.checks.insert("final_spectral_tail".into(), spectral_tail_fraction(tr.last()));
    if keep_snapshots {
        for (i, s) in tr.snapshots().iter().enumerate() {
            report.snapshots.push((format!("snapshot_{i:05}"), s.clone()));
        }
    }
    report.push_row(row, started, record_runtime);
    Ok(report)
}

/// Runs the experiment named by `cfg`. The self-test has its own entry point.
pub fn run(cfg: &RunConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let study = StudyParams::from_config(cfg);
    match cfg.experiment {
        Experiment::Simulate => simulate(
            &cfg.initial_field()?,
            cfg.equation,
            &study.solver,
            cfg.write_snapshots,
            cfg.record_runtime,
        ),
        Experiment::LimitStudy => limit_study(&cfg.initial_field()?, &cfg.lambda_list, &study),
        Experiment::DefectScan => defect_scan(
            &cfg.initial_field()?,
            &cfg.lambda_list,
            cfg.cutoff_n,
            &QuadratureRule::gauss_legendre(cfg.quad_nodes)?,
            &study,
        ),
        Experiment::Stability => {
            let grid = cfg.grid()?;
            stability_probe(
                &cfg.initial_field()?,
                &default_perturbation(&grid, cfg.width),
                &cfg.eta_list,
                &study,
            )
        }
        Experiment::StrichartzProbe => strichartz_probe(&ProbeParams::from_config(cfg)?),
        Experiment::Selftest => Err(LabError::InvalidArgument(
            "selftest does not produce a report; call selftest()".into(),
        )),
    }
}

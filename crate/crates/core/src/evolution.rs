//! Time integration of the cubic NLS `i u_t + Delta u = |u|^2 u` and of the
//! dispersion-managed equation `i v_t + Delta v = F_DM(v)`.
//!
//! The default integrator advances the interaction-picture variable
//! `w(t) = e^{-it Delta} u(t)`, which satisfies
//! `w' = -i e^{-it Delta} N(e^{it Delta} w)`, with classical RK4. The linear
//! flow is exact; only the nonlinear term is discretized. A Strang splitting
//! is kept as an independent cross-check for NLS.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{Field2D, GridSpec};
use crate::nonlinearity::{averaged_cubic_spectral, weighted_nodes};
use crate::quadrature::QuadratureRule;
use crate::spectral::{kernel, mass, Kernel};

/// Relative mass drift beyond which a run is reported unstable.
pub const MASS_DRIFT_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    InteractionRk4,
    StrangNlsOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    Nls,
    Dmnls,
    /// Traces that are not solutions of either equation (forcings, free flows).
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    pub dt: f64,
    pub t_final: f64,
    pub quad_nodes: usize,
    pub snapshot_stride: usize,
    pub method: Method,
}

impl SolverParams {
    /// Interaction-picture RK4 with eight quadrature nodes, storing every step.
    pub fn new(dt: f64, t_final: f64) -> Self {
        Self {
            dt,
            t_final,
            quad_nodes: 8,
            snapshot_stride: 1,
            method: Method::InteractionRk4,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.snapshot_stride = stride;
        self
    }

    pub fn with_quad_nodes(mut self, m: usize) -> Self {
        self.quad_nodes = m;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    /// Same discretization in variables rescaled by `lambda`: times and
    /// steps stretch by `lambda^-2`.
    pub fn rescaled(&self, lambda: f64) -> Self {
        let s = 1.0 / (lambda * lambda);
        Self {
            dt: self.dt * s,
            t_final: self.t_final * s,
            ..self.clone()
        }
    }

    pub fn validate(&self, equation: Equation) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(LabError::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final.is_finite() && self.t_final >= self.dt) {
            return Err(LabError::InvalidArgument(format!(
                "t_final = {} must be finite and at least dt = {}",
                self.t_final, self.dt
            )));
        }
        if self.snapshot_stride == 0 {
            return Err(LabError::InvalidArgument("snapshot_stride must be >= 1".into()));
        }
        if self.quad_nodes == 0 {
            return Err(LabError::InvalidArgument("quad_nodes must be >= 1".into()));
        }
        if equation == Equation::Dmnls && self.method == Method::StrangNlsOnly {
            return Err(LabError::InvalidArgument(
                "strang splitting does not apply to the dispersion-managed equation".into(),
            ));
        }
        Ok(())
    }

    /// Number of steps and the uniform step actually taken.
    pub fn steps(&self) -> (usize, f64) {
        let ratio = self.t_final / self.dt;
        let nearest = ratio.round();
        let steps = if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
            nearest as usize
        } else {
            ratio.ceil() as usize
        };
        let steps = steps.max(1);
        (steps, self.t_final / steps as f64)
    }
}

/// Time-sampled trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    times: Vec<f64>,
    snapshots: Vec<Field2D>,
    grid: GridSpec,
    equation: Equation,
    window: (f64, f64),
    mass_drift: f64,
}

impl Trace {
    pub fn new(times: Vec<f64>, snapshots: Vec<Field2D>, equation: Equation) -> Result<Self> {
        if times.is_empty() || times.len() != snapshots.len() {
            return Err(LabError::InvalidArgument(
                "trace needs matching nonempty times and snapshots".into(),
            ));
        }
        if times[0] != 0.0 {
            return Err(LabError::InvalidArgument("trace must start at t = 0".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(LabError::InvalidArgument(
                "trace times must be strictly increasing".into(),
            ));
        }
        let grid = *snapshots[0].grid();
        if snapshots.iter().any(|s| *s.grid() != grid) {
            return Err(LabError::GridMismatch("trace snapshots on different grids".into()));
        }
        let m0 = mass(&snapshots[0]);
        let mass_drift = snapshots
            .iter()
            .map(|s| relative_drift(m0, mass(s)))
            .fold(0.0, f64::max);
        let window = (times[0], *times.last().unwrap());
        Ok(Self {
            times,
            snapshots,
            grid,
            equation,
            window,
            mass_drift,
        })
    }

    /// Overrides the time window the trace represents. Snapshots are
    /// extended as constants to the window edges in time integrals.
    pub fn with_window(mut self, end: f64) -> Result<Self> {
        if end < *self.times.last().unwrap() {
            return Err(LabError::InvalidArgument(
                "window must contain every stored time".into(),
            ));
        }
        self.window = (self.times[0], end);
        Ok(self)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshots(&self) -> &[Field2D] {
        &self.snapshots
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn equation(&self) -> Equation {
        self.equation
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest relative deviation of the `L^2` norm from its initial value.
    pub fn mass_drift(&self) -> f64 {
        self.mass_drift
    }

    pub fn last(&self) -> &Field2D {
        self.snapshots.last().unwrap()
    }

    /// Pointwise difference of two traces sampled at the same times.
    pub fn difference(&self, other: &Trace) -> Result<Trace> {
        if self.len() != other.len() || self.grid != other.grid {
            return Err(LabError::GridMismatch(
                "traces differ in length or grid".into(),
            ));
        }
        for (a, b) in self.times.iter().zip(&other.times) {
            if (a - b).abs() > 1e-9 * a.abs().max(1.0) {
                return Err(LabError::InvalidArgument(format!(
                    "trace times differ: {a} vs {b}"
                )));
            }
        }
        let snaps = self
            .snapshots
            .iter()
            .zip(&other.snapshots)
            .map(|(a, b)| a - b)
            .collect();
        let mut tr = Trace::new(self.times.clone(), snaps, Equation::Other)?;
        tr.window = self.window;
        Ok(tr)
    }

    /// Applies `f` to every snapshot.
    pub fn map_snapshots(&self, f: impl Fn(&Field2D) -> Field2D) -> Result<Trace> {
        let snaps: Vec<Field2D> = self.snapshots.iter().map(f).collect();
        let mut tr = Trace::new(self.times.clone(), snaps, self.equation)?;
        tr.window = self.window;
        Ok(tr)
    }

    /// `max_t ||self(t) - other(t)||_{L^2}` over matching snapshots.
    pub fn linf_l2_distance(&self, other: &Trace) -> Result<f64> {
        let diff = self.difference(other)?;
        Ok(diff.snapshots.iter().map(mass).fold(0.0, f64::max))
    }

    /// The same trajectory with time stamps multiplied by `factor`.
    pub(crate) fn with_scaled_times(&self, factor: f64, snapshots: Vec<Field2D>) -> Result<Trace> {
        let times = self.times.iter().map(|t| t * factor).collect();
        let mut tr = Trace::new(times, snapshots, self.equation)?;
        tr.window = (self.window.0 * factor, self.window.1 * factor);
        Ok(tr)
    }
}

fn relative_drift(m0: f64, m: f64) -> f64 {
    if m0 == 0.0 {
        m.abs()
    } else {
        (m - m0).abs() / m0
    }
}

/// Solves the cubic NLS from `phi`.
pub fn solve_nls(phi: &Field2D, params: &SolverParams) -> Result<Trace> {
    solve(phi, params, Equation::Nls)
}

/// Solves the dispersion-managed NLS from `phi`, averaging with a
/// `params.quad_nodes`-point Gauss-Legendre rule.
pub fn solve_dmnls(phi: &Field2D, params: &SolverParams) -> Result<Trace> {
    solve(phi, params, Equation::Dmnls)
}

/// Solves the dispersion-managed NLS with an explicit quadrature rule.
pub fn solve_dmnls_with_rule(
    phi: &Field2D,
    params: &SolverParams,
    rule: &QuadratureRule,
) -> Result<Trace> {
    params.validate(Equation::Dmnls)?;
    integrate_rk4(phi, params, &weighted_nodes(rule), Equation::Dmnls)
}

fn solve(phi: &Field2D, params: &SolverParams, equation: Equation) -> Result<Trace> {
    params.validate(equation)?;
    if !phi.is_finite() {
        return Err(LabError::NonFinite);
    }
    match (equation, params.method) {
        (Equation::Nls, Method::StrangNlsOnly) => integrate_strang(phi, params),
        (Equation::Nls, Method::InteractionRk4) => {
            integrate_rk4(phi, params, &[(0.0, 1.0)], Equation::Nls)
        }
        (Equation::Dmnls, _) => {
            let rule = QuadratureRule::gauss_legendre(params.quad_nodes)?;
            integrate_rk4(phi, params, &weighted_nodes(&rule), Equation::Dmnls)
        }
        (Equation::Other, _) => Err(LabError::InvalidArgument(
            "no solver for this equation tag".into(),
        )),
    }
}

/// Collects snapshots and checks them as they are produced.
struct Recorder {
    grid: GridSpec,
    times: Vec<f64>,
    snapshots: Vec<Field2D>,
    initial_mass: f64,
}

impl Recorder {
    fn new(grid: GridSpec, phi: &Field2D) -> Self {
        Self {
            grid,
            times: vec![0.0],
            snapshots: vec![phi.clone()],
            initial_mass: mass(phi),
        }
    }

    fn push(&mut self, t: f64, values: Vec<Complex64>) -> Result<()> {
        let field = Field2D::from_raw(self.grid, values);
        if !field.is_finite() {
            return Err(LabError::Instability {
                time: t,
                reason: "non-finite snapshot".into(),
            });
        }
        let drift = relative_drift(self.initial_mass, mass(&field));
        if drift > MASS_DRIFT_LIMIT {
            return Err(LabError::Instability {
                time: t,
                reason: format!("relative mass drift {drift:e} exceeds {MASS_DRIFT_LIMIT:e}"),
            });
        }
        self.times.push(t);
        self.snapshots.push(field);
        Ok(())
    }

    fn finish(self, equation: Equation) -> Result<Trace> {
        Trace::new(self.times, self.snapshots, equation)
    }
}

fn store_step(step: usize, steps: usize, stride: usize) -> bool {
    step.is_multiple_of(stride) || step == steps
}

/// Right-hand side `-i e^{-it Delta} N(e^{it Delta} w)` in Fourier space.
struct InteractionRhs<'a> {
    kernel: &'a Kernel,
    nodes: &'a [(f64, f64)],
    work: Vec<Complex64>,
}

impl InteractionRhs<'_> {
    fn eval(&mut self, t: f64, w: &[Complex64], out: &mut [Complex64]) {
        averaged_cubic_spectral(self.kernel, w, t, self.nodes, out, &mut self.work);
        for z in out.iter_mut() {
            *z = Complex64::new(z.im, -z.re);
        }
    }
}

fn integrate_rk4(
    phi: &Field2D,
    params: &SolverParams,
    nodes: &[(f64, f64)],
    equation: Equation,
) -> Result<Trace> {
    let grid = *phi.grid();
    let k = kernel(&grid);
    let (steps, h) = params.steps();
    let len = grid.len();
    let zero = Complex64::new(0.0, 0.0);

    let mut w = phi.values().to_vec();
    k.forward(&mut w);
    let mut rhs = InteractionRhs {
        kernel: &k,
        nodes,
        work: Vec::with_capacity(len),
    };
    let (mut k1, mut k2, mut k3, mut k4) =
        (vec![zero; len], vec![zero; len], vec![zero; len], vec![zero; len]);
    let mut stage = vec![zero; len];
    let mut recorder = Recorder::new(grid, phi);

    for step in 1..=steps {
        let t = (step - 1) as f64 * h;
        rhs.eval(t, &w, &mut k1);
        axpy_into(&mut stage, &w, 0.5 * h, &k1);
        rhs.eval(t + 0.5 * h, &stage, &mut k2);
        axpy_into(&mut stage, &w, 0.5 * h, &k2);
        rhs.eval(t + 0.5 * h, &stage, &mut k3);
        axpy_into(&mut stage, &w, h, &k3);
        rhs.eval(t + h, &stage, &mut k4);
        let c = h / 6.0;
        for i in 0..len {
            w[i] += c * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }

        if store_step(step, steps, params.snapshot_stride) {
            let t_now = if step == steps { params.t_final } else { step as f64 * h };
            let mut u = w.clone();
            k.propagate(&mut u, t_now);
            k.inverse(&mut u);
            recorder.push(t_now, u)?;
        }
    }
    recorder.finish(equation)
}

/// `out = base + a * dir`.
fn axpy_into(out: &mut [Complex64], base: &[Complex64], a: f64, dir: &[Complex64]) {
    for ((o, &b), &d) in out.iter_mut().zip(base).zip(dir) {
        *o = b + a * d;
    }
}

/// Strang splitting: half free step, exact nonlinear phase rotation, half free step.
fn integrate_strang(phi: &Field2D, params: &SolverParams) -> Result<Trace> {
    let grid = *phi.grid();
    let k = kernel(&grid);
    let (steps, h) = params.steps();
    let mut recorder = Recorder::new(grid, phi);

    let mut spec = phi.values().to_vec();
    k.forward(&mut spec);
    k.propagate(&mut spec, 0.5 * h);
    for step in 1..=steps {
        k.inverse(&mut spec);
        for z in spec.iter_mut() {
            *z *= Complex64::cis(-z.norm_sqr() * h);
        }
        k.forward(&mut spec);
        if store_step(step, steps, params.snapshot_stride) {
            k.propagate(&mut spec, 0.5 * h);
            let mut u = spec.clone();
            k.inverse(&mut u);
            let t_now = if step == steps { params.t_final } else { step as f64 * h };
            recorder.push(t_now, u)?;
            k.propagate(&mut spec, 0.5 * h);
        } else {
            k.propagate(&mut spec, h);
        }
    }
    recorder.finish(Equation::Nls)
}

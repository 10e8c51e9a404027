//! Run configuration: defaults, `key=value` files, flag overrides and
//! manifest replay.
//!
//! Every knob is addressed by one snake_case key. Files use `key = value`
//! lines with `#` comments; command-line flags use the kebab-case spelling of
//! the same key. Unknown keys are rejected by name.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::evolution::{Equation, Method};
use crate::grid::{make_grid, Field2D, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Simulate,
    LimitStudy,
    DefectScan,
    Stability,
    StrichartzProbe,
    Selftest,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Simulate,
        Experiment::LimitStudy,
        Experiment::DefectScan,
        Experiment::Stability,
        Experiment::StrichartzProbe,
        Experiment::Selftest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::LimitStudy => "limit-study",
            Experiment::DefectScan => "defect-scan",
            Experiment::Stability => "stability",
            Experiment::StrichartzProbe => "strichartz-probe",
            Experiment::Selftest => "selftest",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().replace('_', "-");
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == norm)
            .ok_or_else(|| LabError::Config(format!("experiment: unknown value '{s}'")))
    }
}

/// Initial datum used by the studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialData {
    /// `amplitude * exp(-|x|^2 / (2 width^2))`.
    Gaussian,
    /// `amplitude * exp(i x1 * 2 pi / L)`.
    PlaneWave,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub grid_n: usize,
    pub box_length: f64,
    pub dt: f64,
    pub t_final: f64,
    pub lambda_list: Vec<f64>,
    pub eta_list: Vec<f64>,
    pub quad_nodes: usize,
    pub theta_grid: usize,
    pub cutoff_n: f64,
    pub seed: u64,
    pub snapshot_stride: usize,
    pub output_dir: PathBuf,
    /// Equation solved by `simulate`.
    pub equation: Equation,
    /// Integrator for NLS runs in `simulate`.
    pub method: Method,
    pub initial_data: InitialData,
    pub amplitude: f64,
    pub width: f64,
    /// Number of random forcings in the Strichartz probe.
    pub probe_count: usize,
    /// Points per axis of the `(theta, sigma)` grid on `[0, 1]^2`.
    pub shift_grid: usize,
    /// Stored times per forcing.
    pub probe_times: usize,
    /// Frequency radius of the random forcings.
    pub probe_band: f64,
    pub write_snapshots: bool,
    /// Fill the `runtime_sec` column. Off by default so that reports are
    /// reproducible byte for byte.
    pub record_runtime: bool,
    /// Repeat every rescaled run at half the step and record the difference.
    pub richardson_check: bool,
}

/// Every accepted key, in the order used for help and manifests.
pub const KEYS: [&str; 25] = [
    "experiment",
    "grid_n",
    "box_length",
    "dt",
    "t_final",
    "lambda_list",
    "eta_list",
    "quad_nodes",
    "theta_grid",
    "cutoff_n",
    "seed",
    "snapshot_stride",
    "output_dir",
    "equation",
    "method",
    "initial_data",
    "amplitude",
    "width",
    "probe_count",
    "shift_grid",
    "probe_times",
    "probe_band",
    "write_snapshots",
    "record_runtime",
    "richardson_check",
];

impl Default for RunConfig {
    fn default() -> Self {
        Self::defaults(Experiment::Selftest)
    }
}

impl RunConfig {
    /// The base configuration: unit Gaussian on a `16 pi` box with 256
    /// points, horizon 2, step `1e-3`.
    pub fn defaults(experiment: Experiment) -> Self {
        let lambda_list = match experiment {
            Experiment::DefectScan => vec![0.5, 0.25, 0.125],
            _ => vec![1.0, 0.5, 0.25],
        };
        Self {
            experiment,
            grid_n: 256,
            box_length: 16.0 * std::f64::consts::PI,
            dt: 1e-3,
            t_final: 2.0,
            lambda_list,
            eta_list: vec![1e-1, 1e-2, 1e-3],
            quad_nodes: 8,
            theta_grid: 16,
            cutoff_n: 4.0,
            seed: 20240611,
            snapshot_stride: 10,
            output_dir: PathBuf::from("out"),
            equation: Equation::Nls,
            method: Method::InteractionRk4,
            initial_data: InitialData::Gaussian,
            amplitude: 1.0,
            width: 1.0,
            probe_count: 20,
            shift_grid: 9,
            probe_times: 21,
            probe_band: 2.0,
            write_snapshots: false,
            record_runtime: false,
            richardson_check: false,
        }
    }

    /// Sets one knob from its textual value. Keys may use `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let bad = |what: &str| LabError::Config(format!("{key}: {what}, got '{value}'"));
        match key.as_str() {
            "experiment" => self.experiment = value.parse()?,
            "grid_n" => self.grid_n = value.parse().map_err(|_| bad("expected an integer"))?,
            "box_length" => self.box_length = parse_real(value).ok_or_else(|| bad("expected a number"))?,
            "dt" => self.dt = parse_real(value).ok_or_else(|| bad("expected a number"))?,
            "t_final" => self.t_final = parse_real(value).ok_or_else(|| bad("expected a number"))?,
            "lambda_list" => self.lambda_list = parse_list(value).ok_or_else(|| bad("expected comma-separated numbers"))?,
            "eta_list" => self.eta_list = parse_list(value).ok_or_else(|| bad("expected comma-separated numbers"))?,
            "quad_nodes" => self.quad_nodes = value.parse().map_err(|_| bad("expected an integer"))?,
            "theta_grid" => self.theta_grid = value.parse().map_err(|_| bad("expected an integer"))?,
            "cutoff_n" => self.cutoff_n = parse_real(value).ok_or_else(|| bad("expected a number"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("expected an unsigned integer"))?,
            "snapshot_stride" => self.snapshot_stride = value.parse().map_err(|_| bad("expected an integer"))?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "equation" => {
                self.equation = match value {
                    "nls" => Equation::Nls,
                    "dmnls" => Equation::Dmnls,
                    _ => return Err(bad("expected nls or dmnls")),
                }
            }
            "method" => {
                self.method = match value.replace('-', "_").as_str() {
                    "interaction_rk4" | "rk4" => Method::InteractionRk4,
                    "strang_nls_only" | "strang" => Method::StrangNlsOnly,
                    _ => return Err(bad("expected interaction_rk4 or strang_nls_only")),
                }
            }
            "initial_data" => {
                self.initial_data = match value.replace('-', "_").as_str() {
                    "gaussian" => InitialData::Gaussian,
                    "plane_wave" => InitialData::PlaneWave,
                    "zero" => InitialData::Zero,
                    _ => return Err(bad("expected gaussian, plane_wave or zero")),
                }
            }
            "amplitude" => self.amplitude = parse_real(value).ok_or_else(|| bad("expected a number"))?,
            "width" => self.width = parse_real(value).ok_or_else(|| bad("expected a number"))?,
            "probe_count" => self.probe_count = value.parse().map_err(|_| bad("expected an integer"))?,
            "shift_grid" => self.shift_grid = value.parse().map_err(|_| bad("expected an integer"))?,
            "probe_times" => self.probe_times = value.parse().map_err(|_| bad("expected an integer"))?,
            "probe_band" => self.probe_band = parse_real(value).ok_or_else(|| bad("expected a number"))?,
            "write_snapshots" => self.write_snapshots = parse_bool(value).ok_or_else(|| bad("expected true or false"))?,
            "record_runtime" => self.record_runtime = parse_bool(value).ok_or_else(|| bad("expected true or false"))?,
            "richardson_check" => self.richardson_check = parse_bool(value).ok_or_else(|| bad("expected true or false"))?,
            _ => return Err(LabError::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Applies a `key = value` file. Blank lines and `#` comments are skipped.
    pub fn apply_file_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                LabError::Config(format!("line {}: expected key = value, got '{line}'", lineno + 1))
            })?;
            if key.trim().replace('-', "_") == "config" {
                return Err(LabError::Config(format!(
                    "line {}: config files cannot include other files",
                    lineno + 1
                )));
            }
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpec> {
        make_grid(self.box_length, self.grid_n)
    }

    /// The configured initial datum on the configured grid.
    pub fn initial_field(&self) -> Result<Field2D> {
        let g = self.grid()?;
        Ok(match self.initial_data {
            InitialData::Gaussian => Field2D::gaussian(g, self.amplitude, self.width, (0.0, 0.0)),
            InitialData::PlaneWave => {
                Field2D::plane_wave(g, num_complex::Complex64::new(self.amplitude, 0.0), (1, 0))
            }
            InitialData::Zero => Field2D::zeros(g),
        })
    }

    /// Checks every knob against its documented bounds.
    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(LabError::Config(msg));
        if !(self.grid_n >= 8 && self.grid_n.is_power_of_two() && self.grid_n <= 4096) {
            return err(format!("grid_n: must be a power of two in [8, 4096], got {}", self.grid_n));
        }
        if !(self.box_length.is_finite() && self.box_length > 0.0) {
            return err(format!("box_length: must be positive, got {}", self.box_length));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return err(format!("dt: must be positive, got {}", self.dt));
        }
        if !(self.t_final.is_finite() && self.t_final >= self.dt) {
            return err(format!("t_final: must be at least dt, got {}", self.t_final));
        }
        if self.lambda_list.is_empty()
            || self.lambda_list.iter().any(|&l| !(l > 0.0 && l <= 1.0))
            || self.lambda_list.windows(2).any(|w| w[1] >= w[0])
        {
            return err(format!(
                "lambda_list: values must lie in (0, 1] and strictly decrease, got {:?}",
                self.lambda_list
            ));
        }
        if self.eta_list.is_empty()
            || self.eta_list.iter().any(|&e| !(e.is_finite() && e >= 0.0))
            || self.eta_list.windows(2).any(|w| w[1] >= w[0])
        {
            return err(format!(
                "eta_list: values must be nonnegative and strictly decrease, got {:?}",
                self.eta_list
            ));
        }
        if !(1..=64).contains(&self.quad_nodes) {
            return err(format!("quad_nodes: must lie in [1, 64], got {}", self.quad_nodes));
        }
        if self.theta_grid == 0 {
            return err("theta_grid: must be at least 1".into());
        }
        let nyquist = std::f64::consts::PI * self.grid_n as f64 / self.box_length;
        // the frequency knobs only need to fit under the grid for the experiment that uses them
        let limit = |used: bool| if used { nyquist } else { f64::INFINITY };
        let cutoff_limit = limit(self.experiment == Experiment::DefectScan);
        if !(self.cutoff_n > 0.0 && self.cutoff_n < cutoff_limit) {
            return err(format!("cutoff_n: must lie in (0, {cutoff_limit}), got {}", self.cutoff_n));
        }
        if self.snapshot_stride == 0 {
            return err("snapshot_stride: must be at least 1".into());
        }
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return err(format!("amplitude: must be nonnegative, got {}", self.amplitude));
        }
        if !(self.width.is_finite() && self.width > 0.0) {
            return err(format!("width: must be positive, got {}", self.width));
        }
        if self.probe_count == 0 {
            return err("probe_count: must be at least 1".into());
        }
        if self.shift_grid < 2 {
            return err("shift_grid: must be at least 2".into());
        }
        if self.probe_times < 2 {
            return err("probe_times: must be at least 2".into());
        }
        let band_limit = limit(self.experiment == Experiment::StrichartzProbe);
        if !(self.probe_band > 0.0 && self.probe_band < band_limit) {
            return err(format!("probe_band: must lie in (0, {band_limit}), got {}", self.probe_band));
        }
        if self.equation == Equation::Other {
            return err("equation: must be nls or dmnls".into());
        }
        if self.equation == Equation::Dmnls && self.method == Method::StrangNlsOnly {
            return err("method: strang_nls_only cannot solve the dispersion-managed equation".into());
        }
        Ok(())
    }

    /// Reads the `config` object of a manifest written by this tool.
    pub fn from_manifest(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        let format = |reason: String| LabError::Format {
            path: path.to_path_buf(),
            reason,
        };
        let mut value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| format(e.to_string()))?;
        let config = value
            .get_mut("config")
            .map(serde_json::Value::take)
            .ok_or_else(|| format("missing 'config' object".into()))?;
        let cfg: RunConfig = serde_json::from_value(config).map_err(|e| format(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Builds the effective configuration: defaults for `experiment`, then the
/// optional file, then `overrides` in order.
pub fn parse_config(
    experiment: Experiment,
    file: Option<&Path>,
    overrides: &[(String, String)],
) -> Result<RunConfig> {
    let mut cfg = RunConfig::defaults(experiment);
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("config: cannot read {}: {e}", path.display())))?;
        cfg.apply_file_text(&text)?;
        if cfg.experiment != experiment {
            return Err(LabError::Config(format!(
                "experiment: file asks for '{}' but the command is '{}'",
                cfg.experiment, experiment
            )));
        }
    }
    for (key, value) in overrides {
        if key.replace('-', "_") == "experiment" {
            return Err(LabError::Config("experiment: set by the subcommand".into()));
        }
        cfg.set(key, value)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Accepts plain reals and multiples of pi such as `16pi` or `0.5*pi`.
fn parse_real(s: &str) -> Option<f64> {
    let s = s.trim();
    let v = if let Some(head) = s.strip_suffix("pi") {
        let head = head.trim().trim_end_matches('*').trim();
        let factor = if head.is_empty() { 1.0 } else { head.parse::<f64>().ok()? };
        factor * std::f64::consts::PI
    } else {
        s.parse::<f64>().ok()?
    };
    v.is_finite().then_some(v)
}

fn parse_list(s: &str) -> Option<Vec<f64>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(parse_real)
        .collect()
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn defaults_are_valid() {
        for e in Experiment::ALL {
            RunConfig::defaults(e).validate().unwrap();
        }
        let d = RunConfig::default();
        assert_eq!(d.experiment, Experiment::Selftest);
        assert_eq!(d.grid_n, 256);
        assert_eq!(d.box_length, 16.0 * PI);
    }

    #[test]
    fn lambda_list_parsed_in_order() {
        let cfg = parse_config(
            Experiment::LimitStudy,
            None,
            &[("lambda-list".into(), "1,0.5,0.25".into())],
        )
        .unwrap();
        assert_eq!(cfg.lambda_list, vec![1.0, 0.5, 0.25]);

        let err = parse_config(
            Experiment::LimitStudy,
            None,
            &[("lambda-list".into(), "0.5,1".into())],
        )
        .unwrap_err();
        assert!(err.to_string().contains("lambda_list"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn grid_n_must_be_power_of_two() {
        let err = parse_config(Experiment::Simulate, None, &[("grid-n".into(), "100".into())])
            .unwrap_err();
        assert!(err.to_string().contains("grid_n"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_keys_are_named() {
        let mut cfg = RunConfig::default();
        let err = cfg.apply_file_text("grid_n = 64\ngird_n = 32\n").unwrap_err();
        assert!(err.to_string().contains("gird_n"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn file_then_flags() {
        let mut cfg = RunConfig::defaults(Experiment::Simulate);
        cfg.apply_file_text("# comment\n box_length = 2pi \n grid_n=32 # trailing\n dt = 0.01\n")
            .unwrap();
        assert_eq!(cfg.box_length, 2.0 * PI);
        assert_eq!(cfg.grid_n, 32);
        cfg.set("grid-n", "16").unwrap();
        assert_eq!(cfg.grid_n, 16);
        assert_eq!(cfg.dt, 0.01);
        cfg.validate().unwrap();
    }

    #[test]
    fn pi_multiples() {
        assert_eq!(parse_real("16pi"), Some(16.0 * PI));
        assert_eq!(parse_real("0.5*pi"), Some(0.5 * PI));
        assert_eq!(parse_real("pi"), Some(PI));
        assert_eq!(parse_real("abc"), None);
        assert_eq!(parse_real("inf"), None);
    }

    #[test]
    fn strang_rejected_for_dmnls() {
        let mut cfg = RunConfig::defaults(Experiment::Simulate);
        cfg.set("equation", "dmnls").unwrap();
        cfg.set("method", "strang").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn every_key_is_settable() {
        let samples = [
            ("experiment", "simulate"),
            ("grid_n", "64"),
            ("box_length", "8pi"),
            ("dt", "0.01"),
            ("t_final", "1"),
            ("lambda_list", "1,0.5"),
            ("eta_list", "0.1,0.01"),
            ("quad_nodes", "4"),
            ("theta_grid", "8"),
            ("cutoff_n", "2"),
            ("seed", "7"),
            ("snapshot_stride", "5"),
            ("output_dir", "elsewhere"),
            ("equation", "dmnls"),
            ("method", "interaction_rk4"),
            ("initial_data", "plane_wave"),
            ("amplitude", "0.5"),
            ("width", "2"),
            ("probe_count", "3"),
            ("shift_grid", "5"),
            ("probe_times", "11"),
            ("probe_band", "1.5"),
            ("write_snapshots", "true"),
            ("record_runtime", "yes"),
            ("richardson_check", "1"),
        ];
        let mut cfg = RunConfig::default();
        for (k, v) in samples {
            cfg.set(k, v).unwrap();
        }
        cfg.validate().unwrap();
        assert_eq!(samples.len(), KEYS.len());
        assert!(samples.iter().zip(KEYS).all(|((k, _), key)| *k == key));
        let json = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }
}

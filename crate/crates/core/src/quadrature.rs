//! Quadrature rules on `[0, 1]` for the dispersion average.

use crate::error::{LabError, Result};

/// Nodes in `[0, 1]` with positive weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    degree: usize,
}

impl QuadratureRule {
    /// Gauss-Legendre rule with `m` nodes, exact for polynomials of degree `2m - 1`.
    pub fn gauss_legendre(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(LabError::InvalidArgument(
                "quadrature needs at least one node".into(),
            ));
        }
        let (x, w) = gauss_legendre_symmetric(m);
        // map [-1, 1] -> [0, 1]
        let nodes = x.iter().map(|&t| 0.5 * (t + 1.0)).collect();
        let weights = w.iter().map(|&v| 0.5 * v).collect();
        Ok(Self {
            nodes,
            weights,
            degree: 2 * m - 1,
        })
    }

    /// Arbitrary rule. Weights need not sum to one here so that test
    /// fixtures can build deliberately broken rules.
    pub fn custom(nodes: Vec<f64>, weights: Vec<f64>, degree: usize) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(LabError::InvalidArgument(
                "nodes and weights must be nonempty and of equal length".into(),
            ));
        }
        if nodes.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(LabError::InvalidArgument("nodes must lie in [0, 1]".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(LabError::InvalidArgument("weights must be positive".into()));
        }
        Ok(Self {
            nodes,
            weights,
            degree,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Highest polynomial degree integrated exactly.
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Integral of `f` over `[0, 1]`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&s, &w)| w * f(s))
            .sum()
    }

    /// The rule mapped onto `[a, b]`, returned as `(node, weight)` pairs.
    pub fn on_interval(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let h = b - a;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&s, &w)| (a + h * s, h * w))
            .collect()
    }
}

/// Nodes and weights on `[-1, 1]` by Newton iteration on `P_m`.
fn gauss_legendre_symmetric(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    let mf = m as f64;
    for i in 0..m.div_ceil(2) {
        // Tricomi initial guess
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, z);
        if d != 0.0 {
            dp = d;
        }
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = weight;
        w[m - 1 - i] = weight;
    }
    if m % 2 == 1 {
        x[m / 2] = 0.0;
    }
    (x, w)
}

/// `(P_m(z), P_m'(z))` via the three-term recurrence.
fn legendre_with_derivative(m: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = m as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

//! Gradient oracles for α-strongly-convex, L-smooth potentials.
//!
//! A [`PotentialSpec`] bundles the gradient map with its convexity constants
//! and (optionally) the minimizer and the scalar value map. The oracle is a
//! pure function of the point: all stochasticity lives in the samplers, and
//! gradient-call counting is done by the caller.
//!
//! Two reference families ship with the crate:
//!
//! * anisotropic quadratics ([`make_quadratic`] / [`GaussianTarget`]) whose
//!   stationary law is an explicit Gaussian, giving closed-form diagnostics;
//! * a ridge-regularized logistic potential ([`make_logistic`]),
//!   F(x) = (α/2)‖x‖² + Σᵢ log(1 + exp(−yᵢ⟨aᵢ, x⟩)), a non-quadratic target
//!   whose smoothness constant is α + ‖AᵀA‖_op/4.

use crate::rng::{ChainRng, RngStream};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PotentialError {
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("invalid probe parameters: {0}")]
    InvalidProbe(String),
    #[error("data i/o failure: {0}")]
    DataIo(String),
}

type GradFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// An α-strongly-convex, L-smooth potential with its gradient oracle.
#[derive(Clone)]
pub struct PotentialSpec {
    alpha: f64,
    ell: f64,
    dim: usize,
    gradient: GradFn,
    value: Option<ValueFn>,
    optimum: Option<Vec<f64>>,
}

impl fmt::Debug for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialSpec")
            .field("alpha", &self.alpha)
            .field("ell", &self.ell)
            .field("dim", &self.dim)
            .field("has_value", &self.value.is_some())
            .field("optimum", &self.optimum)
            .finish()
    }
}

impl PotentialSpec {
    pub fn new(
        alpha: f64,
        ell: f64,
        dim: usize,
        gradient: GradFn,
        value: Option<ValueFn>,
        optimum: Option<Vec<f64>>,
    ) -> Result<Self, PotentialError> {
        if !(alpha > 0.0) {
            return Err(PotentialError::InvalidTarget(format!(
                "strong-convexity constant must be positive, got {alpha}"
            )));
        }
        if !(ell >= alpha) {
            return Err(PotentialError::InvalidTarget(format!(
                "smoothness constant {ell} below strong-convexity constant {alpha}"
            )));
        }
        if dim == 0 {
            return Err(PotentialError::InvalidTarget(
                "zero-dimensional target".into(),
            ));
        }
        if let Some(opt) = &optimum {
            if opt.len() != dim {
                return Err(PotentialError::InvalidTarget(
                    "optimum dimension mismatch".into(),
                ));
            }
        }
        Ok(PotentialSpec {
            alpha,
            ell,
            dim,
            gradient,
            value,
            optimum,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    /// Condition number L/α.
    pub fn kappa(&self) -> f64 {
        self.ell / self.alpha
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn optimum(&self) -> Option<&[f64]> {
        self.optimum.as_deref()
    }

    pub fn has_value(&self) -> bool {
        self.value.is_some()
    }

    /// Writes ∇F(x) into `out`.
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        (self.gradient)(x, out);
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.gradient_into(x, &mut out);
        out
    }

    /// F(x), when the value map is available.
    pub fn value(&self, x: &[f64]) -> Option<f64> {
        self.value.as_ref().map(|f| f(x))
    }
}

/// A diagonal-precision Gaussian target with its induced potential.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianTarget {
    pub mean: Vec<f64>,
    pub precision_diag: Vec<f64>,
}

impl GaussianTarget {
    pub fn new(precision_diag: Vec<f64>, mean: Vec<f64>) -> Result<Self, PotentialError> {
        if precision_diag.is_empty() {
            return Err(PotentialError::InvalidTarget(
                "empty precision vector".into(),
            ));
        }
        if precision_diag.len() != mean.len() {
            return Err(PotentialError::InvalidTarget(
                "precision/mean length mismatch".into(),
            ));
        }
        if precision_diag.iter().any(|&l| !(l > 0.0)) {
            return Err(PotentialError::InvalidTarget(
                "all precisions must be positive".into(),
            ));
        }
        Ok(GaussianTarget {
            mean,
            precision_diag,
        })
    }

    /// Per-coordinate stationary variances 1/λⱼ.
    pub fn variances(&self) -> Vec<f64> {
        self.precision_diag.iter().map(|l| 1.0 / l).collect()
    }

    pub fn spec(&self) -> PotentialSpec {
        let lam = self.precision_diag.clone();
        let mean = self.mean.clone();
        let lam_g = lam.clone();
        let mean_g = mean.clone();
        let gradient: GradFn = Arc::new(move |x, out| {
            for i in 0..x.len() {
                out[i] = lam_g[i] * (x[i] - mean_g[i]);
            }
        });
        let lam_v = lam.clone();
        let mean_v = mean.clone();
        let value: ValueFn = Arc::new(move |x| {
            x.iter()
                .zip(lam_v.iter().zip(mean_v.iter()))
                .map(|(xi, (li, mi))| 0.5 * li * (xi - mi) * (xi - mi))
                .sum()
        });
        let alpha = lam.iter().cloned().fold(f64::INFINITY, f64::min);
        let ell = lam.iter().cloned().fold(0.0f64, f64::max);
        PotentialSpec::new(alpha, ell, lam.len(), gradient, Some(value), Some(mean))
            .expect("validated above")
    }
}

/// Quadratic potential F(x) = ½ Σ λⱼ (xⱼ − mⱼ)² with exact value map and
/// minimizer.
pub fn make_quadratic(
    precision_diag: &[f64],
    mean: &[f64],
) -> Result<PotentialSpec, PotentialError> {
    Ok(GaussianTarget::new(precision_diag.to_vec(), mean.to_vec())?.spec())
}

/// Synthetic logistic-regression data: rows aᵢ with labels yᵢ ∈ {−1, +1}.
#[derive(Clone, Debug, PartialEq)]
pub struct LogisticData {
    pub labels: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl LogisticData {
    /// Draws `n` feature rows from N(0, I/d) with labels from a random
    /// planted direction.
    pub fn synthetic(n: usize, dim: usize, seed: u64) -> Result<Self, PotentialError> {
        if n == 0 || dim == 0 {
            return Err(PotentialError::InvalidTarget(
                "logistic data needs n >= 1 and dim >= 1".into(),
            ));
        }
        let mut rng = ChainRng::new(RngStream::new(seed, 0));
        let scale = 1.0 / (dim as f64).sqrt();
        let planted: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let row: Vec<f64> = (0..dim).map(|_| rng.normal() * scale).collect();
            let score: f64 = row.iter().zip(&planted).map(|(a, w)| a * w).sum();
            labels.push(if score >= 0.0 { 1.0 } else { -1.0 });
            rows.push(row);
        }
        Ok(LogisticData { labels, rows })
    }

    /// CSV with one row per observation: label first, then the d features.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (y, row) in self.labels.iter().zip(&self.rows) {
            out.push_str(&format!("{:.16e}", y));
            for a in row {
                out.push(',');
                out.push_str(&format!("{:.16e}", a));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, PotentialError> {
        let mut labels = Vec::new();
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',').map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| PotentialError::DataIo(format!("line {}: {e}", lineno + 1)))
            });
            let label = fields
                .next()
                .ok_or_else(|| PotentialError::DataIo(format!("line {}: empty", lineno + 1)))??;
            let row: Result<Vec<f64>, _> = fields.collect();
            labels.push(label);
            rows.push(row?);
        }
        if rows.is_empty() {
            return Err(PotentialError::DataIo("no data rows".into()));
        }
        let d = rows[0].len();
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(PotentialError::DataIo("ragged feature rows".into()));
        }
        Ok(LogisticData { labels, rows })
    }
}

/// Largest eigenvalue of AᵀA by power iteration.
pub fn gram_operator_norm(rows: &[Vec<f64>], iterations: usize, seed: u64) -> f64 {
    let d = rows[0].len();
    let mut rng = ChainRng::new(RngStream::new(seed, 1));
    let mut v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let mut lambda = 0.0;
    for _ in 0..iterations {
        // w = Aᵀ(Av)
        let mut w = vec![0.0; d];
        for row in rows {
            let s: f64 = row.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (wi, ai) in w.iter_mut().zip(row) {
                *wi += s * ai;
            }
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
    }
    lambda
}

/// Ridge-regularized logistic potential over the given data.
pub fn make_logistic(alpha: f64, data: &LogisticData) -> Result<PotentialSpec, PotentialError> {
    if !(alpha > 0.0) {
        return Err(PotentialError::InvalidTarget(
            "ridge parameter must be positive".into(),
        ));
    }
    let dim = data.rows[0].len();
    let opnorm = gram_operator_norm(&data.rows, 200, 0x5eed);
    let ell = alpha + opnorm / 4.0;
    let rows_g = data.rows.clone();
    let labels_g = data.labels.clone();
    let gradient: GradFn = Arc::new(move |x, out| {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = alpha * xi;
        }
        for (row, &y) in rows_g.iter().zip(&labels_g) {
            let margin: f64 = y * row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            // d/dx log(1 + e^{−m}) = −y·a·σ(−m)
            let sig = 1.0 / (1.0 + margin.exp());
            for (o, a) in out.iter_mut().zip(row) {
                *o -= y * a * sig;
            }
        }
    });
    let rows_v = data.rows.clone();
    let labels_v = data.labels.clone();
    let value: ValueFn = Arc::new(move |x| {
        let ridge: f64 = 0.5 * alpha * x.iter().map(|v| v * v).sum::<f64>();
        let loss: f64 = rows_v
            .iter()
            .zip(&labels_v)
            .map(|(row, &y)| {
                let margin: f64 = y * row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                // log(1 + e^{−m}), overflow-safe
                if margin > 35.0 {
                    (-margin).exp()
                } else if margin < -35.0 {
                    -margin
                } else {
                    (-margin).exp().ln_1p()
                }
            })
            .sum();
        ridge + loss
    });
    PotentialSpec::new(alpha, ell, dim, gradient, Some(value), None)
}

/// Result of randomized probing of the convexity/smoothness assumptions.
#[derive(Clone, Copy, Debug)]
pub struct ProbeReport {
    /// min over pairs of ⟨∇F(x)−∇F(y), x−y⟩ / ‖x−y‖².
    pub min_monotonicity_ratio: f64,
    /// max over pairs of ‖∇F(x)−∇F(y)‖ / ‖x−y‖.
    pub max_lipschitz_ratio: f64,
    pub n_pairs: usize,
}

/// Samples random pairs in a ball (centered at the optimum when known) and
/// reports the extreme monotonicity and Lipschitz ratios; for a compliant
/// potential both land in [α, L].
pub fn probe_assumption(
    spec: &PotentialSpec,
    n_pairs: usize,
    radius: f64,
    seed: u64,
) -> Result<ProbeReport, PotentialError> {
    if n_pairs == 0 {
        return Err(PotentialError::InvalidProbe(
            "need at least one pair".into(),
        ));
    }
    if !(radius > 0.0) {
        return Err(PotentialError::InvalidProbe(
            "radius must be positive".into(),
        ));
    }
    let d = spec.dim();
    let center = spec
        .optimum()
        .map(|o| o.to_vec())
        .unwrap_or_else(|| vec![0.0; d]);
    let mut rng = ChainRng::new(RngStream::new(seed, 0));
    let mut gx = vec![0.0; d];
    let mut gy = vec![0.0; d];
    let mut min_mono = f64::INFINITY;
    let mut max_lip = 0.0f64;
    let draw_point = |rng: &mut ChainRng| -> Vec<f64> {
        // Uniform direction, radius scaled by u^{1/d}: uniform in the ball.
        let mut v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let norm = v.iter().map(|t| t * t).sum::<f64>().sqrt().max(1e-300);
        let r = radius * rng.uniform_index_lane().powf(1.0 / d as f64);
        for (vi, ci) in v.iter_mut().zip(&center) {
            *vi = ci + *vi / norm * r;
        }
        v
    };
    let mut done = 0;
    while done < n_pairs {
        let x = draw_point(&mut rng);
        let y = draw_point(&mut rng);
        let diff_sq: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
        if diff_sq == 0.0 {
            continue; // degenerate pair, resample
        }
        spec.gradient_into(&x, &mut gx);
        spec.gradient_into(&y, &mut gy);
        let mut inner = 0.0;
        let mut grad_diff_sq = 0.0;
        for i in 0..d {
            let dg = gx[i] - gy[i];
            inner += dg * (x[i] - y[i]);
            grad_diff_sq += dg * dg;
        }
        min_mono = min_mono.min(inner / diff_sq);
        max_lip = max_lip.max((grad_diff_sq / diff_sq).sqrt());
        done += 1;
    }
    Ok(ProbeReport {
        min_monotonicity_ratio: min_mono,
        max_lipschitz_ratio: max_lip,
        n_pairs,
    })
}

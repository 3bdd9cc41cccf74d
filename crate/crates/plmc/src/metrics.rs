//! Wasserstein-2 estimators and streaming moment tracking.
//!
//! Three estimators, trading exactness for scalability:
//!
//! * [`w2_gaussian`] — closed form between Gaussians, used as the moment
//!   surrogate ("moment-W2") against analytically known targets;
//! * [`w2_exact_1d`] — the exact empirical distance in one dimension via
//!   order statistics;
//! * [`w2_sliced`] — the average of exact 1-D distances over random
//!   directions, a lower-bound-flavored surrogate for the true W₂ in
//!   dimension d, not the distance itself.

use crate::rng::ChainRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),
    #[error("estimator mismatch: {0}")]
    EstimatorMismatch(String),
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
}

/// Streaming mean/covariance accumulator with exact pairwise merging.
#[derive(Clone, Debug, Default)]
pub struct MomentEstimate {
    n: u64,
    mean: Vec<f64>,
    /// Centered co-moment matrix Σ (x−μ)(x−μ)ᵀ, row-major d×d.
    m2: Vec<f64>,
}

impl MomentEstimate {
    pub fn new(dim: usize) -> Self {
        MomentEstimate {
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn push(&mut self, x: &[f64]) {
        let d = self.dim();
        assert_eq!(x.len(), d);
        self.n += 1;
        let w = 1.0 / self.n as f64;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        for (m, dl) in self.mean.iter_mut().zip(&delta) {
            *m += dl * w;
        }
        // After-update deviation: (x − μ_new) ⊗ (x − μ_old).
        for i in 0..d {
            let post = x[i] - self.mean[i];
            for j in 0..d {
                self.m2[i * d + j] += post * delta[j];
            }
        }
    }

    /// Merges another accumulator; equals the accumulator of the
    /// concatenated samples exactly (Chan's pairwise update).
    pub fn merge(&mut self, other: &MomentEstimate) {
        assert_eq!(self.dim(), other.dim());
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other.clone();
            return;
        }
        let d = self.dim();
        let (na, nb) = (self.n as f64, other.n as f64);
        let nt = na + nb;
        let delta: Vec<f64> = other
            .mean
            .iter()
            .zip(&self.mean)
            .map(|(a, b)| a - b)
            .collect();
        for i in 0..d {
            for j in 0..d {
                self.m2[i * d + j] += other.m2[i * d + j] + delta[i] * delta[j] * na * nb / nt;
            }
        }
        for (m, dl) in self.mean.iter_mut().zip(&delta) {
            *m += dl * nb / nt;
        }
        self.n += other.n;
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased covariance diagonal.
    pub fn variance_diag(&self) -> Vec<f64> {
        let d = self.dim();
        if self.n < 2 {
            return vec![0.0; d];
        }
        let w = 1.0 / (self.n as f64 - 1.0);
        (0..d).map(|i| self.m2[i * d + i] * w).collect()
    }

    /// Unbiased covariance matrix, row-major.
    pub fn covariance(&self) -> Vec<f64> {
        if self.n < 2 {
            return vec![0.0; self.m2.len()];
        }
        let w = 1.0 / (self.n as f64 - 1.0);
        self.m2.iter().map(|v| v * w).collect()
    }

    /// Standard errors of the mean entries.
    pub fn mean_std_errors(&self) -> Vec<f64> {
        self.variance_diag()
            .iter()
            .map(|v| (v / self.n.max(1) as f64).sqrt())
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    GaussianMoment,
    Exact1d,
    Sliced,
}

/// A W₂² estimate with its provenance.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct W2Estimate {
    pub value_sq: f64,
    pub estimator: Estimator,
    pub std_error: Option<f64>,
}

fn check_diag_psd(v: &[f64]) -> Result<(), MetricsError> {
    for &x in v {
        if x < -1e-10 {
            return Err(MetricsError::InvalidCovariance(format!(
                "negative variance {x}"
            )));
        }
    }
    Ok(())
}

/// Closed-form W₂² between Gaussians with diagonal covariances:
/// ‖μ₁−μ₂‖² + Σⱼ (√σ₁ⱼ − √σ₂ⱼ)².
pub fn w2_gaussian_diag(
    mean1: &[f64],
    var1: &[f64],
    mean2: &[f64],
    var2: &[f64],
) -> Result<f64, MetricsError> {
    if mean1.len() != mean2.len() || var1.len() != var2.len() || mean1.len() != var1.len() {
        return Err(MetricsError::EstimatorMismatch("dimension mismatch".into()));
    }
    check_diag_psd(var1)?;
    check_diag_psd(var2)?;
    let mean_part: f64 = mean1
        .iter()
        .zip(mean2)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let var_part: f64 = var1
        .iter()
        .zip(var2)
        .map(|(a, b)| {
            let s = a.max(0.0).sqrt() - b.max(0.0).sqrt();
            s * s
        })
        .sum();
    Ok(mean_part + var_part)
}

/// Closed-form W₂² between Gaussians with full covariances:
/// ‖μ₁−μ₂‖² + tr(Σ₁ + Σ₂ − 2(Σ₂^{1/2} Σ₁ Σ₂^{1/2})^{1/2}). O(d³) via Jacobi
/// eigendecompositions.
pub fn w2_gaussian_full(
    mean1: &[f64],
    cov1: &[f64],
    mean2: &[f64],
    cov2: &[f64],
) -> Result<f64, MetricsError> {
    let d = mean1.len();
    if mean2.len() != d || cov1.len() != d * d || cov2.len() != d * d {
        return Err(MetricsError::EstimatorMismatch("dimension mismatch".into()));
    }
    let s2_sqrt = sym_sqrt(cov2, d)?;
    // M = Σ₂^{1/2} Σ₁ Σ₂^{1/2}
    let tmp = mat_mul(&s2_sqrt, cov1, d);
    let m = mat_mul(&tmp, &s2_sqrt, d);
    let m_sqrt = sym_sqrt(&m, d)?;
    let mean_part: f64 = mean1
        .iter()
        .zip(mean2)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let tr: f64 = (0..d)
        .map(|i| cov1[i * d + i] + cov2[i * d + i] - 2.0 * m_sqrt[i * d + i])
        .sum();
    Ok(mean_part + tr.max(0.0))
}

fn mat_mul(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..d {
                out[i * d + j] += aik * b[k * d + j];
            }
        }
    }
    out
}

/// Symmetric PSD square root by cyclic Jacobi. Rejects asymmetry beyond
/// 1e−10·scale or eigenvalues below −1e−10·scale.
fn sym_sqrt(a: &[f64], d: usize) -> Result<Vec<f64>, MetricsError> {
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    for i in 0..d {
        for j in (i + 1)..d {
            if (a[i * d + j] - a[j * d + i]).abs() > 1e-10 * scale {
                return Err(MetricsError::InvalidCovariance("asymmetric matrix".into()));
            }
        }
    }
    let mut m = a.to_vec();
    // Symmetrize before iterating.
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (m[i * d + j] + m[j * d + i]);
            m[i * d + j] = avg;
            m[j * d + i] = avg;
        }
    }
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    for _sweep in 0..64 {
        let mut off = 0.0f64;
        for i in 0..d {
            for j in (i + 1)..d {
                off = off.max(m[i * d + j].abs());
            }
        }
        if off <= 1e-14 * scale {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = m[p * d + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = 0.5 * (2.0 * apq).atan2(m[p * d + p] - m[q * d + q]);
                let (c, s) = (theta.cos(), theta.sin());
                for k in 0..d {
                    let (mkp, mkq) = (m[k * d + p], m[k * d + q]);
                    m[k * d + p] = c * mkp + s * mkq;
                    m[k * d + q] = -s * mkp + c * mkq;
                }
                for k in 0..d {
                    let (mpk, mqk) = (m[p * d + k], m[q * d + k]);
                    m[p * d + k] = c * mpk + s * mqk;
                    m[q * d + k] = -s * mpk + c * mqk;
                }
                for k in 0..d {
                    let (vkp, vkq) = (v[k * d + p], v[k * d + q]);
                    v[k * d + p] = c * vkp + s * vkq;
                    v[k * d + q] = -s * vkp + c * vkq;
                }
            }
        }
    }
    let mut out = vec![0.0; d * d];
    for k in 0..d {
        let ev = m[k * d + k];
        if ev < -1e-10 * scale {
            return Err(MetricsError::InvalidCovariance(format!(
                "eigenvalue {ev:e} below the PSD floor"
            )));
        }
        let r = ev.max(0.0).sqrt();
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] += r * v[i * d + k] * v[j * d + k];
            }
        }
    }
    Ok(out)
}

/// Exact empirical W₂² between two equally sized 1-D samples:
/// (1/n) Σᵢ (a₍ᵢ₎ − b₍ᵢ₎)² over order statistics. Inputs are sorted
/// internally.
pub fn w2_exact_1d(samples_a: &[f64], samples_b: &[f64]) -> Result<f64, MetricsError> {
    if samples_a.len() != samples_b.len() {
        return Err(MetricsError::EstimatorMismatch(format!(
            "sample counts differ: {} vs {}",
            samples_a.len(),
            samples_b.len()
        )));
    }
    if samples_a.is_empty() {
        return Err(MetricsError::EstimatorMismatch("empty samples".into()));
    }
    let mut a = samples_a.to_vec();
    let mut b = samples_b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let n = a.len() as f64;
    Ok(a.iter()
        .zip(&b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n)
}

/// Sliced W₂²: the average of exact 1-D distances of the projections onto
/// random unit directions, with the Monte-Carlo standard error across
/// directions.
pub fn w2_sliced(
    samples_a: &[Vec<f64>],
    samples_b: &[Vec<f64>],
    n_directions: usize,
    rng: &mut ChainRng,
) -> Result<W2Estimate, MetricsError> {
    if n_directions == 0 {
        return Err(MetricsError::EstimatorMismatch(
            "need at least one direction".into(),
        ));
    }
    let d = samples_a
        .first()
        .ok_or_else(|| MetricsError::EstimatorMismatch("empty samples".into()))?
        .len();
    let mut dirs = Vec::with_capacity(n_directions);
    for _ in 0..n_directions {
        let mut v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-12 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        dirs.push(v);
    }
    w2_sliced_with_directions(samples_a, samples_b, &dirs)
}

/// Deterministic-direction variant of [`w2_sliced`]; with a single coordinate
/// axis it reduces to [`w2_exact_1d`] on that marginal.
pub fn w2_sliced_with_directions(
    samples_a: &[Vec<f64>],
    samples_b: &[Vec<f64>],
    directions: &[Vec<f64>],
) -> Result<W2Estimate, MetricsError> {
    if samples_a.len() != samples_b.len() {
        return Err(MetricsError::EstimatorMismatch(
            "sample counts differ".into(),
        ));
    }
    if directions.is_empty() {
        return Err(MetricsError::EstimatorMismatch("no directions".into()));
    }
    let project = |points: &[Vec<f64>], e: &[f64]| -> Vec<f64> {
        points
            .iter()
            .map(|p| p.iter().zip(e).map(|(x, w)| x * w).sum())
            .collect()
    };
    let mut vals = Vec::with_capacity(directions.len());
    for e in directions {
        let pa = project(samples_a, e);
        let pb = project(samples_b, e);
        vals.push(w2_exact_1d(&pa, &pb)?);
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let std_error = if vals.len() > 1 {
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        Some((var / n).sqrt())
    } else {
        None
    };
    Ok(W2Estimate {
        value_sq: mean,
        estimator: Estimator::Sliced,
        std_error,
    })
}

/// Ordinary least-squares line fit in log-log space.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean squared residual of the fit.
    pub residual: f64,
}

/// Fits log(y) = slope·log(x) + intercept. Requires ≥ 3 points, all
/// positive, with at least three distinct abscissae.
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<LineFit, MetricsError> {
    if points.len() < 3 {
        return Err(MetricsError::InvalidCurve(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0) || !(y > 0.0)) {
        return Err(MetricsError::InvalidCurve(
            "curve points must be positive".into(),
        ));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mut xs: Vec<f64> = logs.iter().map(|&(x, _)| x).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if xs.len() < 3 {
        return Err(MetricsError::InvalidCurve(
            "degenerate design: fewer than 3 distinct abscissae".into(),
        ));
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|&(x, _)| x).sum::<f64>() / n;
    let my = logs.iter().map(|&(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|&(x, _)| (x - mx) * (x - mx)).sum();
    let sxy: f64 = logs.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (logs
        .iter()
        .map(|&(x, y)| {
            let e = y - slope * x - intercept;
            e * e
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(LineFit {
        slope,
        intercept,
        residual,
    })
}

/// Fit of W₂² against gradient cost in log-log space.
pub fn error_curve(points: &[(f64, W2Estimate)]) -> Result<LineFit, MetricsError> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .map(|&(calls, est)| (calls, est.value_sq))
        .collect();
    fit_loglog(&pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn gaussian_diag_closed_forms() {
        assert_eq!(
            w2_gaussian_diag(&[0.0], &[1.0], &[0.0], &[1.0]).unwrap(),
            0.0
        );
        // N(0,1) vs N(0,4): (1−2)² = 1.
        assert!((w2_gaussian_diag(&[0.0], &[1.0], &[0.0], &[4.0]).unwrap() - 1.0).abs() < 1e-14);
        // diag(1,1) vs diag(4,9), equal means: 1 + 4 = 5.
        let v = w2_gaussian_diag(&[0.0, 0.0], &[1.0, 1.0], &[0.0, 0.0], &[4.0, 9.0]).unwrap();
        assert!((v - 5.0).abs() < 1e-14);
        assert!(w2_gaussian_diag(&[0.0], &[-1.0], &[0.0], &[1.0]).is_err());
    }

    #[test]
    fn gaussian_full_reduces_to_diag_and_is_symmetric() {
        let m1 = [0.3, -0.2];
        let m2 = [-1.0, 0.4];
        let c1 = [1.0, 0.0, 0.0, 2.0];
        let c2 = [4.0, 0.0, 0.0, 9.0];
        let full = w2_gaussian_full(&m1, &c1, &m2, &c2).unwrap();
        let diag = w2_gaussian_diag(&m1, &[1.0, 2.0], &m2, &[4.0, 9.0]).unwrap();
        assert!((full - diag).abs() < 1e-12);
        let c3 = [1.5, 0.4, 0.4, 0.9];
        let ab = w2_gaussian_full(&m1, &c1, &m2, &c3).unwrap();
        let ba = w2_gaussian_full(&m2, &c3, &m1, &c1).unwrap();
        assert!((ab - ba).abs() < 1e-12);
        assert!(w2_gaussian_full(&m1, &[1.0, 0.5, -0.5, 1.0], &m2, &c1).is_err());
    }

    #[test]
    fn gaussian_scaling_and_triangle() {
        let c = 1.7;
        let a = w2_gaussian_diag(&[0.1], &[0.8], &[1.3], &[2.0]).unwrap();
        let b = w2_gaussian_diag(&[c * 0.1], &[c * c * 0.8], &[c * 1.3], &[c * c * 2.0]).unwrap();
        assert!((b - c * c * a).abs() < 1e-12);
        // Triangle inequality on the square roots for a Gaussian triple.
        let ab = w2_gaussian_diag(&[0.0], &[1.0], &[1.0], &[2.0])
            .unwrap()
            .sqrt();
        let bc = w2_gaussian_diag(&[1.0], &[2.0], &[-0.5], &[0.5])
            .unwrap()
            .sqrt();
        let ac = w2_gaussian_diag(&[0.0], &[1.0], &[-0.5], &[0.5])
            .unwrap()
            .sqrt();
        assert!(ac <= ab + bc + 1e-12);
    }

    #[test]
    fn exact_1d_cases() {
        assert_eq!(w2_exact_1d(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(w2_exact_1d(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(w2_exact_1d(&[0.0, 1.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert!(w2_exact_1d(&[0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn sliced_identity_and_axis_hook() {
        let a: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, -(i as f64)]).collect();
        let mut rng = ChainRng::new(RngStream::new(4, 0));
        let est = w2_sliced(&a, &a, 16, &mut rng).unwrap();
        assert_eq!(est.value_sq, 0.0);
        // A single coordinate axis reproduces the exact 1-D marginal value.
        let b: Vec<Vec<f64>> = a.iter().map(|p| vec![p[0] + 2.0, p[1]]).collect();
        let est = w2_sliced_with_directions(&a, &b, &[vec![1.0, 0.0]]).unwrap();
        let xa: Vec<f64> = a.iter().map(|p| p[0]).collect();
        let xb: Vec<f64> = b.iter().map(|p| p[0]).collect();
        assert!((est.value_sq - w2_exact_1d(&xa, &xb).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn sliced_mean_shift_expectation() {
        // Two isotropic Gaussian clouds with means 0 and μ, ‖μ‖ = 1, d = 2:
        // E[(eᵀμ)²] = 1/d = 1/2 for uniform unit e.
        let mut rng = ChainRng::new(RngStream::new(6, 0));
        let n = 20_000;
        let a: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.normal(), rng.normal()]).collect();
        let b: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.normal() + 1.0, rng.normal()])
            .collect();
        let est = w2_sliced(&a, &b, 400, &mut rng).unwrap();
        let se = est.std_error.unwrap();
        assert!(
            (est.value_sq - 0.5).abs() < 3.0 * se + 0.01,
            "sliced {} ± {se}",
            est.value_sq
        );
    }

    #[test]
    fn fit_recovers_exact_powerlaw() {
        let pts: Vec<(f64, f64)> = [10.0f64, 100.0, 1000.0, 5000.0]
            .iter()
            .map(|&x| (x, 7.0 * x.powf(-3.0)))
            .collect();
        let fit = fit_loglog(&pts).unwrap();
        assert!((fit.slope + 3.0).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn fit_rejects_degenerate_designs() {
        assert!(fit_loglog(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(fit_loglog(&[(1.0, 1.0), (1.0, 2.0), (2.0, 3.0)]).is_err());
        assert!(fit_loglog(&[(1.0, 1.0), (2.0, -2.0), (3.0, 3.0)]).is_err());
        assert!(fit_loglog(&[(1.0, 1.0), (1.0, 2.0), (2.0, 3.0), (3.0, 1.0)]).is_ok());
    }

    #[test]
    fn streaming_merge_equals_batch() {
        let mut rng = ChainRng::new(RngStream::new(7, 0));
        let data: Vec<Vec<f64>> = (0..500)
            .map(|_| vec![rng.normal() * 2.0 + 1.0, rng.normal()])
            .collect();
        let mut whole = MomentEstimate::new(2);
        data.iter().for_each(|x| whole.push(x));
        let mut left = MomentEstimate::new(2);
        let mut right = MomentEstimate::new(2);
        data[..123].iter().for_each(|x| left.push(x));
        data[123..].iter().for_each(|x| right.push(x));
        left.merge(&right);
        assert_eq!(left.count(), whole.count());
        for (a, b) in left.mean().iter().zip(whole.mean()) {
            assert!((a - b).abs() < 1e-12 * b.abs().max(1.0));
        }
        for (a, b) in left.covariance().iter().zip(whole.covariance()) {
            assert!((a - b).abs() < 1e-12 * b.abs().max(1.0));
        }
    }
}

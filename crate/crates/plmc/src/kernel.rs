//! Exact per-coordinate discretization kernels for underdamped Langevin
//! dynamics.
//!
//! One coordinate of the (position, velocity) pair evolves under the
//! linearized dynamics with friction γ over time h as
//!
//! ```text
//! x(h) = A_h x(0) + G_h b + Γ_h Z,   Z ~ N(0, I₂),
//! ```
//!
//! with
//!
//! ```text
//! A_h = [1  (1−e^{−γh})/γ]    G_h = [(h − (1−e^{−γh})/γ)/γ   0]
//!       [0       e^{−γh}  ]          [(1−e^{−γh})/γ           0]
//! ```
//!
//! and Γ_h² the exact Ornstein–Uhlenbeck transition covariance. The affine
//! change of coordinates M = [[1,0],[1,2/γ]] turns one step into a
//! contraction; the primed blocks A'_h = M A_h M⁻¹, G'_h = M G_h,
//! Γ'_h² = M Γ_h² Mᵀ are used by the convergence diagnostics.
//!
//! All blocks compose as a semigroup: A_{s}A_{t} = A_{s+t} and
//! A_{t}G_{s} + G_{t} = G_{s+t}, which is what allows a K-step batch to be
//! collapsed into closed form (see [`crate::samplers`]).

use crate::mat2::Mat2;
use thiserror::Error;

/// Beyond this value of γh, `exp(−γh)` is treated as exactly zero.
pub const EXP_CLAMP: f64 = 30.0;

/// Below this value of γh, the (0,0) covariance entry switches to its Taylor
/// series through (γh)⁸. The closed form subtracts nearly equal exponential
/// terms and loses roughly (γh)⁻² digits; at the switch point both branches
/// agree to better than 1e−13 relative.
pub const SERIES_SWITCH: f64 = 0.02;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("invalid kernel parameters: {0}")]
    InvalidKernel(String),
    #[error("invalid covariance block: {0}")]
    InvalidCovariance(String),
    #[error("conditioning failure: {0}")]
    Conditioning(String),
    #[error("parameters out of supported range: {0}")]
    OutOfRange(String),
}

/// Per-coordinate blocks of the step-h underdamped transition.
#[derive(Clone, Copy, Debug)]
pub struct KernelBlocks {
    /// Step size.
    pub h: f64,
    /// Friction coefficient.
    pub gamma: f64,
    /// Deterministic state propagator block of A_h.
    pub a: Mat2,
    /// First column of G_h (the second column is identically zero).
    pub g_col: [f64; 2],
    /// Symmetric covariance block Γ_h².
    pub c: Mat2,
}

/// Kernel blocks in the M-transformed coordinates, together with the block of
/// M itself.
#[derive(Clone, Copy, Debug)]
pub struct PrimedKernelBlocks {
    pub h: f64,
    pub gamma: f64,
    pub a: Mat2,
    pub g_col: [f64; 2],
    pub c: Mat2,
    /// Per-coordinate block of the transform M = [[1,0],[1,2/γ]].
    pub m: Mat2,
}

fn exp_neg(x: f64) -> f64 {
    if x > EXP_CLAMP {
        0.0
    } else {
        (-x).exp()
    }
}

/// 1 − e^{−x}, cancellation-free via `exp_m1`.
fn one_minus_exp_neg(x: f64) -> f64 {
    if x > EXP_CLAMP {
        1.0
    } else {
        -(-x).exp_m1()
    }
}

/// x − 2(1−e^{−x}) + (1−e^{−2x})/2, the scalar core of the (0,0) covariance
/// entry. Taylor series through x⁸ below the switch point.
fn position_cov_core(x: f64) -> f64 {
    if x < SERIES_SWITCH {
        // x³/3 − x⁴/4 + 7x⁵/60 − x⁶/24 + 31x⁷/2520 − x⁸/320
        let x3 = x * x * x;
        x3 * (1.0 / 3.0
            + x * (-0.25
                + x * (7.0 / 60.0 + x * (-1.0 / 24.0 + x * (31.0 / 2520.0 + x * (-1.0 / 320.0))))))
    } else {
        x - 2.0 * one_minus_exp_neg(x) + 0.5 * one_minus_exp_neg(2.0 * x)
    }
}

/// Kernel blocks with `h = 0` permitted (exact identity kernel); used where a
/// zero-length composition arises naturally.
pub(crate) fn blocks_allow_zero(h: f64, gamma: f64) -> Result<KernelBlocks, KernelError> {
    if !(h >= 0.0) || !(gamma > 0.0) {
        return Err(KernelError::InvalidKernel(format!(
            "need h >= 0 and gamma > 0, got h = {h}, gamma = {gamma}"
        )));
    }
    if h == 0.0 {
        return Ok(KernelBlocks {
            h,
            gamma,
            a: Mat2::IDENTITY,
            g_col: [0.0, 0.0],
            c: Mat2::ZERO,
        });
    }
    let x = gamma * h;
    let em = exp_neg(x);
    let omen = one_minus_exp_neg(x);
    let a = Mat2([[1.0, omen / gamma], [0.0, em]]);
    let g_col = [(h - omen / gamma) / gamma, omen / gamma];
    let c00 = 2.0 / (gamma * gamma) * position_cov_core(x);
    let c01 = omen * omen / gamma;
    let c11 = one_minus_exp_neg(2.0 * x);
    let c = Mat2([[c00, c01], [c01, c11]]);
    Ok(KernelBlocks {
        h,
        gamma,
        a,
        g_col,
        c,
    })
}

/// Builds the step-h kernel blocks A_h, G_h, Γ_h².
pub fn build_kernel(h: f64, gamma: f64) -> Result<KernelBlocks, KernelError> {
    if !(h > 0.0) {
        return Err(KernelError::InvalidKernel(format!(
            "step size must be positive, got {h}"
        )));
    }
    blocks_allow_zero(h, gamma)
}

/// Builds the M-transformed kernel blocks A'_h, G'_h, Γ'_h².
///
/// A'_h uses its symmetric closed form ((1 ± e^{−γh})/2 entries); G'_h and
/// Γ'_h² come from conjugating the unprimed blocks, which involves only sums
/// of nonnegative terms and is therefore cancellation-free.
pub fn build_primed_kernel(h: f64, gamma: f64) -> Result<PrimedKernelBlocks, KernelError> {
    let kb = build_kernel(h, gamma)?;
    Ok(prime_blocks(&kb))
}

pub(crate) fn prime_blocks(kb: &KernelBlocks) -> PrimedKernelBlocks {
    let gamma = kb.gamma;
    let m = Mat2([[1.0, 0.0], [1.0, 2.0 / gamma]]);
    let em = exp_neg(gamma * kb.h);
    let hi = 0.5 * (1.0 + em);
    let lo = 0.5 * (1.0 - em);
    let a = Mat2([[hi, lo], [lo, hi]]);
    let g_col = [kb.g_col[0], kb.g_col[0] + 2.0 / gamma * kb.g_col[1]];
    let c = m * kb.c * m.transpose();
    PrimedKernelBlocks {
        h: kb.h,
        gamma,
        a,
        g_col,
        c,
        m,
    }
}

/// Principal symmetric square root of a symmetric PSD 2×2 block, via the
/// trace/determinant closed form. Eigenvalues in [−1e−14·scale, 0) are
/// clamped to zero; anything lower or an asymmetric input is rejected.
pub fn sqrt_block(c: &Mat2) -> Result<Mat2, KernelError> {
    let scale = c.max_abs().max(1.0);
    let asym = (c.0[0][1] - c.0[1][0]).abs();
    if asym > 1e-10 * scale {
        return Err(KernelError::InvalidCovariance(format!(
            "asymmetry {asym:e} exceeds tolerance"
        )));
    }
    let off = 0.5 * (c.0[0][1] + c.0[1][0]);
    let sym = Mat2([[c.0[0][0], off], [off, c.0[1][1]]]);
    let eigs = sym.sym_eigenvalues();
    if eigs[0] < -1e-14 * eigs[1].abs().max(1.0) {
        return Err(KernelError::InvalidCovariance(format!(
            "eigenvalue {:e} below the PSD floor",
            eigs[0]
        )));
    }
    if eigs[0] < 0.0 {
        // Clamp the stray negative eigenvalue to zero: rank-1 reconstruction
        // from the positive one.
        let e2 = eigs[1].max(0.0);
        if e2 == 0.0 {
            return Ok(Mat2::ZERO);
        }
        let cand_a = [sym.0[0][1], e2 - sym.0[0][0]];
        let cand_b = [e2 - sym.0[1][1], sym.0[0][1]];
        let na = cand_a[0] * cand_a[0] + cand_a[1] * cand_a[1];
        let nb = cand_b[0] * cand_b[0] + cand_b[1] * cand_b[1];
        let (v, n2) = if na >= nb { (cand_a, na) } else { (cand_b, nb) };
        let scale = e2.sqrt() / n2;
        return Ok(Mat2([
            [scale * v[0] * v[0], scale * v[0] * v[1]],
            [scale * v[1] * v[0], scale * v[1] * v[1]],
        ]));
    }
    let tr = sym.trace();
    if tr <= 0.0 {
        return Ok(Mat2::ZERO);
    }
    let det = sym.det().max(0.0);
    let sdet = det.sqrt();
    let denom = (tr + 2.0 * sdet).sqrt();
    if denom == 0.0 {
        return Ok(Mat2::ZERO);
    }
    Ok(Mat2([
        [(sym.0[0][0] + sdet) / denom, sym.0[0][1] / denom],
        [sym.0[1][0] / denom, (sym.0[1][1] + sdet) / denom],
    ]))
}

/// Residuals of the composition identities A_{h2}A_{h1} = A_{h1+h2} and
/// A_{h2}G_{h1} + G_{h2} = G_{h1+h2} (first columns), in Frobenius and
/// Euclidean norm respectively.
pub fn semigroup_residual(h1: f64, h2: f64, gamma: f64) -> Result<(f64, f64), KernelError> {
    if h1 < 0.0 || h2 < 0.0 {
        return Err(KernelError::InvalidKernel(
            "negative step in composition".into(),
        ));
    }
    if h1 == 0.0 || h2 == 0.0 {
        return Ok((0.0, 0.0));
    }
    let k1 = build_kernel(h1, gamma)?;
    let k2 = build_kernel(h2, gamma)?;
    let k12 = build_kernel(h1 + h2, gamma)?;
    let res_a = (k2.a * k1.a - k12.a).frobenius_norm();
    let composed_g = k2.a.apply(k1.g_col);
    let res_g = ((composed_g[0] + k2.g_col[0] - k12.g_col[0]).powi(2)
        + (composed_g[1] + k2.g_col[1] - k12.g_col[1]).powi(2))
    .sqrt();
    Ok((res_a, res_g))
}

/// One row of the transformed-covariance eigenvalue check.
#[derive(Clone, Copy, Debug)]
pub struct EigenRow {
    pub h: f64,
    /// Smaller eigenvalue of Γ'_h² (order γh³).
    pub e1: f64,
    /// Larger eigenvalue of Γ'_h² (order h/γ).
    pub e2: f64,
    /// Third-order series for E₂.
    pub series: f64,
    /// |E₂ − series| / (γ²h⁴).
    pub scaled_residual: f64,
}

#[derive(Clone, Debug)]
pub struct EigenExpansionReport {
    pub rows: Vec<EigenRow>,
    pub max_scaled_residual: f64,
}

/// Third-order expansions of the two halves of the E₂ closed form; their sum
/// is the series E₂ is checked against.
pub fn eigen_series_halves(h: f64, gamma: f64) -> (f64, f64) {
    let a = 4.0 * h / gamma - 2.0 * h * h + 4.0 * gamma * h * h * h / 3.0;
    let b = 4.0 * h / gamma - 2.0 * h * h + 7.0 * gamma * h * h * h / 6.0;
    (a, b)
}

/// Exact closed-form eigenvalues of Γ'_h², ascending. Intended as a
/// cross-check oracle; accurate for γh ≳ 1e−3 (the radicand cancels below
/// that).
pub fn exact_primed_eigenvalues(h: f64, gamma: f64) -> (f64, f64) {
    let x = gamma * h;
    let a = -1.0 + (2.0 * x).exp() * (1.0 + 2.0 * x);
    let rad = 1.0 - 32.0 * (3.0 * x).exp()
        + 2.0 * (2.0 * x).exp() * (7.0 + 2.0 * x)
        + (4.0 * x).exp() * (17.0 - 4.0 * x + 4.0 * x * x);
    let b = rad.max(0.0).sqrt();
    let scale = (-2.0 * x).exp() / (gamma * gamma);
    (scale * (a - b), scale * (a + b))
}

/// Checks the numeric eigenvalues of Γ'_h² against their third-order series
/// over a grid of step sizes, returning the scaled remainder
/// max_h |E₂ − series| / (γ²h⁴). Grid points with γh ≥ 0.1 are rejected.
pub fn gamma_prime_eigen_expansion_check(
    gamma: f64,
    h_grid: &[f64],
) -> Result<EigenExpansionReport, KernelError> {
    let mut rows = Vec::with_capacity(h_grid.len());
    let mut max_scaled = 0.0f64;
    for &h in h_grid {
        if gamma * h >= 0.1 {
            return Err(KernelError::OutOfRange(format!(
                "gamma*h = {} not below 0.1",
                gamma * h
            )));
        }
        let pk = build_primed_kernel(h, gamma)?;
        let eigs = pk.c.sym_eigenvalues();
        let (sa, sb) = eigen_series_halves(h, gamma);
        let series = sa + sb;
        let scaled = (eigs[1] - series).abs() / (gamma * gamma * h.powi(4));
        max_scaled = max_scaled.max(scaled);
        rows.push(EigenRow {
            h,
            e1: eigs[0],
            e2: eigs[1],
            series,
            scaled_residual: scaled,
        });
    }
    Ok(EigenExpansionReport {
        rows,
        max_scaled_residual: max_scaled,
    })
}

/// G'_hᵀ (Γ'_h²)⁻¹ G'_h, computed numerically from the assembled blocks.
/// Algebraically this equals [[h/2γ, 0], [0, 0]].
pub fn whitened_drift_gram(h: f64, gamma: f64) -> Result<Mat2, KernelError> {
    if h < 1e-10 {
        return Err(KernelError::Conditioning(format!(
            "step {h:e} too small to invert the covariance"
        )));
    }
    if gamma * h >= 0.1 {
        return Err(KernelError::OutOfRange(format!(
            "gamma*h = {} not below 0.1",
            gamma * h
        )));
    }
    let pk = build_primed_kernel(h, gamma)?;
    let g = Mat2([[pk.g_col[0], 0.0], [pk.g_col[1], 0.0]]);
    Ok(g.transpose() * pk.c.inverse() * g)
}

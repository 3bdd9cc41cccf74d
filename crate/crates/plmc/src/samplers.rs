//! The four discretizations: overdamped/underdamped Euler–Maruyama steps and
//! their Poisson-midpoint batch versions.
//!
//! A Poisson batch advances K inner steps of size h = η/K at once. Unrolling
//! the inner recursion and collapsing the frozen-drift terms through the
//! kernel semigroup identities gives the skip-ahead updates
//!
//! ```text
//! overdamped:  x ← x − η∇F(x) + η Σ_{i∈S} (∇F(x) − ∇F(x̂ᵢ)) + S_K
//! underdamped: X ← A_η X + G_η b(X) + Σ_{i∈S} K·A_{(K−1−i)h} G_h (b(X̂ᵢ) − b(X)) + W_K
//! ```
//!
//! where x̂ᵢ / X̂ᵢ are the drift-frozen cheap interpolants built from the
//! bridge functionals of [`crate::bridge`], S is the Bernoulli(1/K) index
//! set, and S_K / W_K the batch-end noise. A batch costs 1 + |S| gradient
//! calls; E|S| = 1.
//!
//! The partial sums entering the interpolants are the sums over j < i
//! (empty at i = 0). Under that convention a K = 1 batch consumes randomness
//! in exactly the same order as a single Euler step and reproduces it
//! bit-for-bit on a shared stream; the i-inclusive variant of the overdamped
//! partial sum would shift every functional by one increment and break the
//! degeneracy (see the convention tests in this module).
//!
//! The O(K) inner-loop reference implementations live in [`naive`] and are
//! kept solely as test oracles for the skip-ahead path.

use crate::bridge::{
    sample_index_set, sample_overdamped_bridge, sample_underdamped_bridge, BatchPlan, BridgeError,
};
use crate::kernel::{blocks_allow_zero, sqrt_block, KernelBlocks, KernelError};
use crate::potential::PotentialSpec;
use crate::rng::ChainRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Frozen multiplier for the gradient-sum envelope
/// Σ_t ‖∇F(X̃_t)‖² ≤ C·[(F(X̃₀) − F(X̃_N))/η + L·d·N], calibrated once on the
/// isotropic quadratic at η = 1e−3.
pub const GRADIENT_SUM_CALIBRATION: f64 = 8.0;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid step: {0}")]
    InvalidStep(String),
    #[error("underdamped sampler needs a velocity component")]
    MissingVelocity,
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("diagnostic unavailable: {0}")]
    DiagnosticUnavailable(String),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dynamics {
    Overdamped,
    Underdamped,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Euler,
    Poisson,
}

/// One chain's mutable state.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub position: Vec<f64>,
    /// Present iff the dynamics are underdamped.
    pub velocity: Option<Vec<f64>>,
    pub batch_index: u64,
    pub gradient_calls: u64,
    pub rng: ChainRng,
}

impl ChainState {
    pub fn overdamped(position: Vec<f64>, rng: ChainRng) -> Self {
        ChainState {
            position,
            velocity: None,
            batch_index: 0,
            gradient_calls: 0,
            rng,
        }
    }

    pub fn underdamped(position: Vec<f64>, velocity: Vec<f64>, rng: ChainRng) -> Self {
        assert_eq!(position.len(), velocity.len());
        ChainState {
            position,
            velocity: Some(velocity),
            batch_index: 0,
            gradient_calls: 0,
            rng,
        }
    }
}

fn warn_once(flag: &std::sync::Once, msg: &str) {
    flag.call_once(|| log::warn!("{msg}"));
}

static OVERDAMPED_REGIME_WARN: std::sync::Once = std::sync::Once::new();
static UNDERDAMPED_REGIME_WARN: std::sync::Once = std::sync::Once::new();

/// One overdamped Euler–Maruyama step: x ← x − h∇F(x) + √(2h) Z.
pub fn olmc_step(state: &mut ChainState, spec: &PotentialSpec, h: f64) -> Result<(), SamplerError> {
    if !(h > 0.0) {
        return Err(SamplerError::InvalidStep(format!("step {h} not positive")));
    }
    let d = spec.dim();
    let mut g = vec![0.0; d];
    spec.gradient_into(&state.position, &mut g);
    state.gradient_calls += 1;
    let sd = (2.0 * h).sqrt();
    for j in 0..d {
        let z = state.rng.normal();
        state.position[j] = state.position[j] - h * g[j] + sd * z;
    }
    state.batch_index += 1;
    Ok(())
}

/// One overdamped Poisson-midpoint batch of K inner steps of size η/K.
pub fn oplmc_batch(
    state: &mut ChainState,
    spec: &PotentialSpec,
    eta: f64,
    k: usize,
) -> Result<(), SamplerError> {
    if !(eta > 0.0) {
        return Err(SamplerError::InvalidStep(format!("eta {eta} not positive")));
    }
    step_size_guards(eta, k, spec);
    let indices = sample_index_set(k, &mut state.rng)?;
    let plan = sample_overdamped_bridge(k, eta, spec.dim(), &indices, &mut state.rng)?;
    oplmc_batch_with_plan(state, spec, eta, &plan)
}

fn step_size_guards(eta: f64, k: usize, spec: &PotentialSpec) {
    if eta * spec.ell() / k as f64 > 1.0 {
        log::warn!(
            "inner step eta*L/K = {} exceeds 1; update is unstable",
            eta * spec.ell() / k as f64
        );
    }
    if eta * spec.ell() > 0.125 {
        warn_once(
            &OVERDAMPED_REGIME_WARN,
            "eta*L exceeds 1/8; running outside the analyzed regime",
        );
    }
}

/// Skip-ahead overdamped batch update from a realized noise plan.
pub fn oplmc_batch_with_plan(
    state: &mut ChainState,
    spec: &PotentialSpec,
    eta: f64,
    plan: &BatchPlan,
) -> Result<(), SamplerError> {
    let d = spec.dim();
    if plan.end_noise.len() != d {
        return Err(SamplerError::InvalidStep(
            "plan dimension does not match the target".into(),
        ));
    }
    let mut g0 = vec![0.0; d];
    spec.gradient_into(&state.position, &mut g0);
    state.gradient_calls += 1;
    let mut corr = vec![0.0; d];
    let mut xhat = vec![0.0; d];
    let mut ghat = vec![0.0; d];
    for (slot, &i) in plan.indices.iter().enumerate() {
        let drift_t = eta * i as f64 / plan.k as f64;
        let noise = &plan.interpolant_noise[slot];
        for j in 0..d {
            xhat[j] = state.position[j] - drift_t * g0[j] + noise[j];
        }
        spec.gradient_into(&xhat, &mut ghat);
        state.gradient_calls += 1;
        for j in 0..d {
            corr[j] += g0[j] - ghat[j];
        }
    }
    for j in 0..d {
        state.position[j] = state.position[j] - eta * g0[j] + eta * corr[j] + plan.end_noise[j];
    }
    state.batch_index += 1;
    Ok(())
}

/// One underdamped step with the exact transition kernel at the kernel's own
/// step size: X ← A_h X + G_h b(X) + Γ_h Z.
pub fn ulmc_step(
    state: &mut ChainState,
    spec: &PotentialSpec,
    kernel: &KernelBlocks,
) -> Result<(), SamplerError> {
    let d = spec.dim();
    let mut g = vec![0.0; d];
    spec.gradient_into(&state.position, &mut g);
    state.gradient_calls += 1;
    let s = sqrt_block(&kernel.c)?;
    let vel = state
        .velocity
        .as_mut()
        .ok_or(SamplerError::MissingVelocity)?;
    for j in 0..d {
        let z1 = state.rng.normal();
        let z2 = state.rng.normal();
        let drifted = kernel.a.apply([state.position[j], vel[j]]);
        let b = -g[j];
        state.position[j] = drifted[0] + kernel.g_col[0] * b + (s.0[0][0] * z1 + s.0[0][1] * z2);
        vel[j] = drifted[1] + kernel.g_col[1] * b + (s.0[1][0] * z1 + s.0[1][1] * z2);
    }
    state.batch_index += 1;
    Ok(())
}

/// One underdamped Poisson-midpoint batch of K inner steps of size η/K.
pub fn uplmc_batch(
    state: &mut ChainState,
    spec: &PotentialSpec,
    eta: f64,
    k: usize,
    gamma: f64,
) -> Result<(), SamplerError> {
    if !(eta > 0.0) {
        return Err(SamplerError::InvalidStep(format!("eta {eta} not positive")));
    }
    if gamma < 2.0 * spec.ell().sqrt() {
        warn_once(
            &UNDERDAMPED_REGIME_WARN,
            "friction below 2*sqrt(L); outside the schedule-compliant regime",
        );
    }
    let indices = sample_index_set(k, &mut state.rng)?;
    let plan = sample_underdamped_bridge(k, eta, gamma, spec.dim(), &indices, &mut state.rng)?;
    uplmc_batch_with_plan(state, spec, eta, gamma, &plan)
}

/// Skip-ahead underdamped batch update from a realized noise plan.
pub fn uplmc_batch_with_plan(
    state: &mut ChainState,
    spec: &PotentialSpec,
    eta: f64,
    gamma: f64,
    plan: &BatchPlan,
) -> Result<(), SamplerError> {
    let d = spec.dim();
    let k = plan.k;
    if plan.end_noise.len() != 2 * d {
        return Err(SamplerError::InvalidStep(
            "plan dimension does not match the target".into(),
        ));
    }
    let h = eta / k as f64;
    let outer = blocks_allow_zero(eta, gamma)?;
    let inner = blocks_allow_zero(h, gamma)?;
    let mut g0 = vec![0.0; d];
    spec.gradient_into(&state.position, &mut g0);
    state.gradient_calls += 1;
    let mut corr_pos = vec![0.0; d];
    let mut corr_vel = vec![0.0; d];
    let mut uhat = vec![0.0; d];
    let mut ghat = vec![0.0; d];
    {
        let vel = state
            .velocity
            .as_ref()
            .ok_or(SamplerError::MissingVelocity)?;
        for (slot, &i) in plan.indices.iter().enumerate() {
            let at_i = blocks_allow_zero(i as f64 * h, gamma)?;
            let noise = &plan.interpolant_noise[slot];
            for j in 0..d {
                let drifted = at_i.a.apply([state.position[j], vel[j]]);
                uhat[j] = drifted[0] + at_i.g_col[0] * (-g0[j]) + noise[j];
            }
            spec.gradient_into(&uhat, &mut ghat);
            state.gradient_calls += 1;
            let prop = blocks_allow_zero((k - 1 - i) as f64 * h, gamma)?.a;
            let weight = k as f64;
            for j in 0..d {
                // b(X̂) − b(X) in the position block is ∇F(x) − ∇F(û).
                let db = g0[j] - ghat[j];
                let pushed = prop.apply([inner.g_col[0] * db, inner.g_col[1] * db]);
                corr_pos[j] += weight * pushed[0];
                corr_vel[j] += weight * pushed[1];
            }
        }
    }
    let vel = state
        .velocity
        .as_mut()
        .ok_or(SamplerError::MissingVelocity)?;
    for j in 0..d {
        let drifted = outer.a.apply([state.position[j], vel[j]]);
        let b = -g0[j];
        state.position[j] = drifted[0] + outer.g_col[0] * b + corr_pos[j] + plan.end_noise[j];
        vel[j] = drifted[1] + outer.g_col[1] * b + corr_vel[j] + plan.end_noise[d + j];
    }
    state.batch_index += 1;
    Ok(())
}

/// Inputs for the accuracy-driven parameter schedules.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct ScheduleInputs {
    pub epsilon: f64,
    pub alpha: f64,
    pub ell: f64,
    pub dim: usize,
    /// Tuning exponent of the underdamped schedule.
    #[serde(default)]
    pub p: u32,
    #[serde(default = "one")]
    pub c1: f64,
    #[serde(default = "one")]
    pub c2: f64,
    #[serde(default = "one")]
    pub c3: f64,
    #[serde(default = "one")]
    pub c4: f64,
    /// γ = gamma_multiplier · √L; the contraction analysis needs ≥ 2.
    #[serde(default = "two")]
    pub gamma_multiplier: f64,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}

impl ScheduleInputs {
    pub fn new(epsilon: f64, alpha: f64, ell: f64, dim: usize) -> Self {
        ScheduleInputs {
            epsilon,
            alpha,
            ell,
            dim,
            p: 0,
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            c4: 1.0,
            gamma_multiplier: 2.0,
        }
    }

    pub fn with_p(mut self, p: u32) -> Self {
        self.p = p;
        self
    }

    pub fn kappa(&self) -> f64 {
        self.ell / self.alpha
    }
}

/// Resolved sampler parameters.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct SamplerConfig {
    pub dynamics: Dynamics,
    pub method: Method,
    /// Outer (batch) step size η.
    pub eta: f64,
    /// Batch size K; 1 for the Euler method.
    pub k: usize,
    /// Friction, underdamped only.
    pub gamma: Option<f64>,
    /// Number of batches N.
    pub n_batches: usize,
    /// Realized inner step η/K after rounding K up.
    pub inner_step: f64,
    /// The inner step the accuracy target asks for before rounding.
    pub requested_inner_step: f64,
}

fn validate_epsilon(inputs: &ScheduleInputs) -> Result<(), SamplerError> {
    if !(inputs.epsilon > 0.0) {
        return Err(SamplerError::InvalidSchedule(format!(
            "accuracy target must be positive, got {}",
            inputs.epsilon
        )));
    }
    Ok(())
}

/// Overdamped Poisson-midpoint schedule:
/// η = C₁ min(α^{1/3}ε^{2/3}/L^{4/3}, ε^{2/3}/(d^{1/3}L)), K = ⌈4ηL/ε²⌉,
/// N = ⌈C₂(κ^{4/3} + κd^{1/3})/ε^{2/3}⌉. The implied inner step is ε²/(4L).
pub fn overdamped_schedule(inputs: &ScheduleInputs) -> Result<SamplerConfig, SamplerError> {
    validate_epsilon(inputs)?;
    let eps = inputs.epsilon;
    let (alpha, ell, d) = (inputs.alpha, inputs.ell, inputs.dim as f64);
    let kappa = inputs.kappa();
    if eps > 1.0f64.min(kappa.powf(-0.25)).min(d.powf(-0.25)) {
        log::warn!("epsilon = {eps} above the schedule's validity range; proceeding anyway");
    }
    let eta = inputs.c1
        * (alpha.powf(1.0 / 3.0) * eps.powf(2.0 / 3.0) / ell.powf(4.0 / 3.0))
            .min(eps.powf(2.0 / 3.0) / (d.powf(1.0 / 3.0) * ell));
    if eta * ell > 0.125 {
        log::warn!("scheduled eta*L = {} exceeds 1/8", eta * ell);
    }
    let k = ((4.0 * eta * ell / (eps * eps)).ceil() as usize).max(1);
    let n =
        ((inputs.c2 * (kappa.powf(4.0 / 3.0) + kappa * d.powf(1.0 / 3.0)) / eps.powf(2.0 / 3.0))
            .ceil() as usize)
            .max(1);
    Ok(SamplerConfig {
        dynamics: Dynamics::Overdamped,
        method: Method::Poisson,
        eta,
        k,
        gamma: None,
        n_batches: n,
        inner_step: eta / k as f64,
        requested_inner_step: eps * eps / (4.0 * ell),
    })
}

/// Underdamped Poisson-midpoint schedule with tuning exponent p:
/// γ = 2√L, K = ⌈ηL√2/(0.94ε√α)⌉, η the minimum of the two accuracy-driven
/// expressions, N = ⌈C₄(κ^{7/6}d^{1/6}/ε^{1/3} +
/// κ^{(11p+6)/(8p+6)}d^{p/(4p+3)}/ε^{(p+2)/(4p+3)})⌉.
/// The implied inner step is 0.94ε√α/(L√2).
pub fn underdamped_schedule(inputs: &ScheduleInputs) -> Result<SamplerConfig, SamplerError> {
    validate_epsilon(inputs)?;
    let eps = inputs.epsilon;
    let (alpha, ell, d) = (inputs.alpha, inputs.ell, inputs.dim as f64);
    let kappa = inputs.kappa();
    let p = inputs.p as f64;
    if inputs.gamma_multiplier < 2.0 {
        log::warn!(
            "gamma multiplier {} below 2; contraction is not guaranteed",
            inputs.gamma_multiplier
        );
    }
    let gamma = inputs.gamma_multiplier * ell.sqrt();
    let validity = 1.0f64
        .min(kappa / d.sqrt())
        .min(kappa.powf((p + 3.0) / (2.0 * (3.0 * p + 1.0))) * d.powf(-p / (3.0 * p + 1.0)));
    if eps > validity {
        log::warn!("epsilon = {eps} above the schedule's validity range; proceeding anyway");
    }
    let eps_exp = (p + 2.0) / (4.0 * p + 3.0);
    let e1 = eps.powf(1.0 / 3.0) / (kappa.powf(1.0 / 6.0) * d.powf(1.0 / 6.0) * ell.sqrt());
    let e2 = eps.powf(eps_exp)
        / (kappa.powf(3.0 * p / (8.0 * p + 6.0)) * d.powf(p / (4.0 * p + 3.0)) * ell.sqrt());
    let eta = inputs.c3 * e1.min(e2);
    if gamma * eta > 1.0 {
        log::warn!("scheduled gamma*eta = {} above 1", gamma * eta);
    }
    let requested_inner = 0.94 * eps * alpha.sqrt() / (ell * 2.0f64.sqrt());
    let k = ((eta / requested_inner).ceil() as usize).max(1);
    let n = ((inputs.c4
        * (kappa.powf(7.0 / 6.0) * d.powf(1.0 / 6.0) / eps.powf(1.0 / 3.0)
            + kappa.powf((11.0 * p + 6.0) / (8.0 * p + 6.0)) * d.powf(p / (4.0 * p + 3.0))
                / eps.powf(eps_exp)))
    .ceil() as usize)
        .max(1);
    Ok(SamplerConfig {
        dynamics: Dynamics::Underdamped,
        method: Method::Poisson,
        eta,
        k,
        gamma: Some(gamma),
        n_batches: n,
        inner_step: eta / k as f64,
        requested_inner_step: requested_inner,
    })
}

/// Step size of the plain Euler baseline at accuracy ε: ε²/(4L) overdamped,
/// 0.94ε√α/(L√2) underdamped.
pub fn euler_step_size(dynamics: Dynamics, inputs: &ScheduleInputs) -> f64 {
    match dynamics {
        Dynamics::Overdamped => inputs.epsilon * inputs.epsilon / (4.0 * inputs.ell),
        Dynamics::Underdamped => {
            0.94 * inputs.epsilon * inputs.alpha.sqrt() / (inputs.ell * 2.0f64.sqrt())
        }
    }
}

/// Default chain initialization: the optimum (when known) for overdamped
/// chains; U ~ N(x*, I/L), V ~ N(0, I) for underdamped ones.
pub fn default_init(
    spec: &PotentialSpec,
    dynamics: Dynamics,
    rng: &mut ChainRng,
) -> (Vec<f64>, Option<Vec<f64>>) {
    let d = spec.dim();
    let center = spec
        .optimum()
        .map(|o| o.to_vec())
        .unwrap_or_else(|| vec![0.0; d]);
    match dynamics {
        Dynamics::Overdamped => (center, None),
        Dynamics::Underdamped => {
            let sd = (1.0 / spec.ell()).sqrt();
            let pos: Vec<f64> = center.iter().map(|c| c + sd * rng.normal()).collect();
            let vel: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            (pos, Some(vel))
        }
    }
}

/// Result of the gradient-sum envelope check.
#[derive(Clone, Copy, Debug)]
pub struct GradientSumReport {
    /// Σ_{t<N} ‖∇F(X̃_t)‖² along the trace.
    pub sum_sq_grad: f64,
    /// Calibrated envelope C·[(F(X̃₀) − F(X̃_N))/η + L·d·N].
    pub bound: f64,
    pub violated: bool,
}

/// Evaluates the gradient-sum envelope along a trace of batch-start
/// positions. Requires the potential's value map.
pub fn gradient_sum_diagnostic(
    trace: &[Vec<f64>],
    spec: &PotentialSpec,
    eta: f64,
) -> Result<GradientSumReport, SamplerError> {
    if trace.len() < 2 {
        return Err(SamplerError::DiagnosticUnavailable(
            "trace needs at least two snapshots".into(),
        ));
    }
    if !spec.has_value() {
        return Err(SamplerError::DiagnosticUnavailable(
            "potential lacks a value map".into(),
        ));
    }
    if eta * spec.ell() > 0.125 {
        log::warn!(
            "gradient-sum envelope used at eta*L = {} > 1/8",
            eta * spec.ell()
        );
    }
    let n = trace.len() - 1;
    let mut g = vec![0.0; spec.dim()];
    let mut sum = 0.0;
    for x in &trace[..n] {
        spec.gradient_into(x, &mut g);
        sum += g.iter().map(|v| v * v).sum::<f64>();
    }
    let drop = spec.value(&trace[0]).unwrap() - spec.value(&trace[n]).unwrap();
    let bound = GRADIENT_SUM_CALIBRATION * (drop / eta + spec.ell() * spec.dim() as f64 * n as f64);
    Ok(GradientSumReport {
        sum_sq_grad: sum,
        bound,
        violated: sum > bound,
    })
}

/// O(K) inner-loop reference implementations, retained as oracles for the
/// skip-ahead batch updates.
pub mod naive {
    use super::*;

    /// Raw randomness for one batch: per-step Bernoulli hits and standard
    /// normals (d per step overdamped, 2d per step underdamped, laid out as
    /// coordinate pairs).
    #[derive(Clone, Debug)]
    pub struct NoisePath {
        pub hits: Vec<bool>,
        pub gaussians: Vec<Vec<f64>>,
    }

    pub fn draw_path(k: usize, normals_per_step: usize, rng: &mut ChainRng) -> NoisePath {
        let hits = (0..k)
            .map(|_| rng.uniform_index_lane() < 1.0 / k as f64)
            .collect();
        let gaussians = (0..k)
            .map(|_| (0..normals_per_step).map(|_| rng.normal()).collect())
            .collect();
        NoisePath { hits, gaussians }
    }

    /// Overdamped batch by explicit inner loop. Returns the batch-end
    /// position and the gradient calls spent.
    pub fn oplmc_batch_naive(
        x0: &[f64],
        spec: &PotentialSpec,
        eta: f64,
        path: &NoisePath,
    ) -> (Vec<f64>, u64) {
        let k = path.hits.len();
        let d = x0.len();
        let h = eta / k as f64;
        let sd = (2.0 * h).sqrt();
        let g0 = spec.gradient(x0);
        let mut calls = 1;
        let mut x = x0.to_vec();
        let mut partial = vec![0.0; d];
        for i in 0..k {
            if path.hits[i] {
                let drift_t = eta * i as f64 / k as f64;
                let xhat: Vec<f64> = (0..d)
                    .map(|j| x0[j] - drift_t * g0[j] + partial[j])
                    .collect();
                let ghat = spec.gradient(&xhat);
                calls += 1;
                for j in 0..d {
                    x[j] += eta * (g0[j] - ghat[j]);
                }
            }
            for j in 0..d {
                let inc = sd * path.gaussians[i][j];
                x[j] += -h * g0[j] + inc;
                partial[j] += inc;
            }
        }
        (x, calls)
    }

    /// Underdamped batch by explicit inner loop.
    pub fn uplmc_batch_naive(
        u0: &[f64],
        v0: &[f64],
        spec: &PotentialSpec,
        eta: f64,
        gamma: f64,
        path: &NoisePath,
    ) -> (Vec<f64>, Vec<f64>, u64) {
        let k = path.hits.len();
        let d = u0.len();
        let h = eta / k as f64;
        let inner = blocks_allow_zero(h, gamma).unwrap();
        let s = sqrt_block(&inner.c).unwrap();
        let g0 = spec.gradient(u0);
        let mut calls = 1;
        let mut u = u0.to_vec();
        let mut v = v0.to_vec();
        // Running interpolant noise W_i, advanced as W ← A_h W + Γ_h Y.
        let mut w_pos = vec![0.0; d];
        let mut w_vel = vec![0.0; d];
        for i in 0..k {
            let mut corr = vec![0.0; d];
            if path.hits[i] {
                let at_i = blocks_allow_zero(i as f64 * h, gamma).unwrap();
                let uhat: Vec<f64> = (0..d)
                    .map(|j| at_i.a.apply([u0[j], v0[j]])[0] + at_i.g_col[0] * (-g0[j]) + w_pos[j])
                    .collect();
                let ghat = spec.gradient(&uhat);
                calls += 1;
                for j in 0..d {
                    corr[j] = k as f64 * (g0[j] - ghat[j]);
                }
            }
            for j in 0..d {
                let z1 = path.gaussians[i][2 * j];
                let z2 = path.gaussians[i][2 * j + 1];
                let n_pos = s.0[0][0] * z1 + s.0[0][1] * z2;
                let n_vel = s.0[1][0] * z1 + s.0[1][1] * z2;
                let drifted = inner.a.apply([u[j], v[j]]);
                u[j] = drifted[0] + inner.g_col[0] * (-g0[j] + corr[j]) + n_pos;
                v[j] = drifted[1] + inner.g_col[1] * (-g0[j] + corr[j]) + n_vel;
                let w_drift = inner.a.apply([w_pos[j], w_vel[j]]);
                w_pos[j] = w_drift[0] + n_pos;
                w_vel[j] = w_drift[1] + n_vel;
            }
        }
        (u, v, calls)
    }

    /// Batch plan carrying exactly the functionals of an explicit noise path
    /// (overdamped), for pathwise skip-ahead comparisons.
    pub fn oplmc_plan_from_path(k: usize, eta: f64, path: &NoisePath) -> BatchPlan {
        let d = path.gaussians[0].len();
        let sd = (2.0 * eta / k as f64).sqrt();
        let mut partial = vec![0.0; d];
        let mut indices = Vec::new();
        let mut interpolant_noise = Vec::new();
        for i in 0..k {
            if path.hits[i] {
                indices.push(i);
                interpolant_noise.push(partial.clone());
            }
            for j in 0..d {
                partial[j] += sd * path.gaussians[i][j];
            }
        }
        BatchPlan {
            k,
            indices,
            interpolant_noise,
            end_noise: partial,
        }
    }

    /// Underdamped analogue of [`oplmc_plan_from_path`].
    pub fn uplmc_plan_from_path(k: usize, eta: f64, gamma: f64, path: &NoisePath) -> BatchPlan {
        let d = path.gaussians[0].len() / 2;
        let h = eta / k as f64;
        let inner = blocks_allow_zero(h, gamma).unwrap();
        let s = sqrt_block(&inner.c).unwrap();
        let mut w_pos = vec![0.0; d];
        let mut w_vel = vec![0.0; d];
        let mut indices = Vec::new();
        let mut interpolant_noise = Vec::new();
        let pack = |p: &[f64], v: &[f64]| {
            let mut out = p.to_vec();
            out.extend_from_slice(v);
            out
        };
        for i in 0..k {
            if path.hits[i] {
                indices.push(i);
                interpolant_noise.push(pack(&w_pos, &w_vel));
            }
            for j in 0..d {
                let z1 = path.gaussians[i][2 * j];
                let z2 = path.gaussians[i][2 * j + 1];
                let n_pos = s.0[0][0] * z1 + s.0[0][1] * z2;
                let n_vel = s.0[1][0] * z1 + s.0[1][1] * z2;
                let drifted = inner.a.apply([w_pos[j], w_vel[j]]);
                w_pos[j] = drifted[0] + n_pos;
                w_vel[j] = drifted[1] + n_vel;
            }
        }
        BatchPlan {
            k,
            indices,
            interpolant_noise,
            end_noise: pack(&w_pos, &w_vel),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_kernel, build_primed_kernel};
    use crate::mat2::Mat2;
    use crate::potential::make_quadratic;
    use crate::rng::RngStream;

    fn quad(prec: &[f64]) -> PotentialSpec {
        make_quadratic(prec, &vec![0.0; prec.len()]).unwrap()
    }

    #[test]
    fn olmc_fixed_point_with_zero_noise() {
        // At the optimum the drift vanishes; with a plan carrying zero noise
        // the K = 1 batch (equivalent to one Euler step) leaves the state put.
        let spec = quad(&[2.0, 3.0]);
        let mut state = ChainState::overdamped(vec![0.0, 0.0], ChainRng::new(RngStream::new(0, 0)));
        let plan = BatchPlan {
            k: 1,
            indices: vec![0],
            interpolant_noise: vec![vec![0.0, 0.0]],
            end_noise: vec![0.0, 0.0],
        };
        oplmc_batch_with_plan(&mut state, &spec, 0.05, &plan).unwrap();
        assert_eq!(state.position, vec![0.0, 0.0]);
        assert_eq!(state.gradient_calls, 2);
    }

    #[test]
    fn olmc_newton_like_cancellation() {
        // h = 1/λ sends the drift map of the quadratic straight to the optimum.
        let spec = quad(&[4.0]);
        let mut state = ChainState::overdamped(vec![2.5], ChainRng::new(RngStream::new(1, 0)));
        let h = 0.25;
        let g = spec.gradient(&state.position);
        let drifted = state.position[0] - h * g[0];
        assert_eq!(drifted, 0.0);
        olmc_step(&mut state, &spec, h).unwrap();
        assert_eq!(state.gradient_calls, 1);
        assert!(olmc_step(&mut state, &spec, 0.0).is_err());
    }

    #[test]
    fn olmc_stationary_variance_matches_fixed_point() {
        // v* solves v = (1−hλ)²v + 2h, i.e. v* = 1/(λ(1−hλ/2)).
        let lam = 2.0;
        let h = 0.05;
        let spec = quad(&[lam]);
        let vstar = 1.0 / (lam * (1.0 - h * lam / 2.0));
        assert!((vstar - 2.0 * h / (1.0 - (1.0 - h * lam).powi(2))).abs() < 1e-15);
        let mut state = ChainState::overdamped(vec![0.0], ChainRng::new(RngStream::new(2, 0)));
        let (mut sum, mut count) = (0.0, 0u64);
        for t in 0..400_000 {
            olmc_step(&mut state, &spec, h).unwrap();
            if t > 1000 {
                sum += state.position[0] * state.position[0];
                count += 1;
            }
        }
        let emp = sum / count as f64;
        // Autocorrelated chain: effective sample size ≈ count·hλ.
        let se = vstar * (2.0 / (count as f64 * h * lam)).sqrt() * 2.0;
        assert!((emp - vstar).abs() < 3.0 * se, "emp {emp} vs {vstar}");
    }

    #[test]
    fn oplmc_k1_bit_identical_to_euler_step() {
        let spec = quad(&[1.0, 10.0]);
        let eta = 0.07;
        for trial in 0..64 {
            let stream = RngStream::new(77, trial);
            let mut init_rng = ChainRng::new(RngStream::new(500 + trial, 0));
            let x0: Vec<f64> = (0..2).map(|_| init_rng.normal()).collect();
            let mut a = ChainState::overdamped(x0.clone(), ChainRng::new(stream));
            let mut b = ChainState::overdamped(x0, ChainRng::new(stream));
            olmc_step(&mut a, &spec, eta).unwrap();
            oplmc_batch(&mut b, &spec, eta, 1).unwrap();
            assert_eq!(a.position, b.position, "trial {trial}");
        }
    }

    #[test]
    fn uplmc_k1_bit_identical_to_euler_step() {
        let spec = quad(&[1.0, 4.0]);
        let (eta, gamma) = (0.05, 4.0);
        let kernel = build_kernel(eta, gamma).unwrap();
        for trial in 0..64 {
            let stream = RngStream::new(99, trial);
            let mut init_rng = ChainRng::new(RngStream::new(900 + trial, 0));
            let x0: Vec<f64> = (0..2).map(|_| init_rng.normal()).collect();
            let v0: Vec<f64> = (0..2).map(|_| init_rng.normal()).collect();
            let mut a = ChainState::underdamped(x0.clone(), v0.clone(), ChainRng::new(stream));
            let mut b = ChainState::underdamped(x0, v0, ChainRng::new(stream));
            ulmc_step(&mut a, &spec, &kernel).unwrap();
            uplmc_batch(&mut b, &spec, eta, 1, gamma).unwrap();
            assert_eq!(a.position, b.position, "trial {trial}");
            assert_eq!(a.velocity, b.velocity, "trial {trial}");
        }
    }

    #[test]
    fn skip_ahead_matches_naive_pathwise() {
        // Same realized noise path through both routes: the unrolled batch
        // formula is an algebraic identity, so they agree to rounding.
        let spec = quad(&[1.0, 10.0]);
        let eta = 0.05;
        for k in [2usize, 4, 8, 16] {
            let mut rng = ChainRng::new(RngStream::new(1234 + k as u64, 0));
            for _ in 0..20 {
                let x0: Vec<f64> = (0..2).map(|_| rng.normal()).collect();
                let path = naive::draw_path(k, 2, &mut rng);
                let (x_naive, calls_naive) = naive::oplmc_batch_naive(&x0, &spec, eta, &path);
                let plan = naive::oplmc_plan_from_path(k, eta, &path);
                let mut state = ChainState::overdamped(x0, ChainRng::new(RngStream::new(0, 0)));
                oplmc_batch_with_plan(&mut state, &spec, eta, &plan).unwrap();
                assert_eq!(state.gradient_calls, calls_naive);
                for j in 0..2 {
                    assert!(
                        (state.position[j] - x_naive[j]).abs() < 1e-12,
                        "k={k}: {} vs {}",
                        state.position[j],
                        x_naive[j]
                    );
                }
            }
        }
    }

    #[test]
    fn skip_ahead_matches_naive_pathwise_underdamped() {
        let spec = quad(&[1.0, 4.0]);
        let (eta, gamma) = (0.06, 4.0);
        for k in [2usize, 4, 8] {
            let mut rng = ChainRng::new(RngStream::new(4321 + k as u64, 0));
            for _ in 0..20 {
                let u0: Vec<f64> = (0..2).map(|_| rng.normal()).collect();
                let v0: Vec<f64> = (0..2).map(|_| rng.normal()).collect();
                let path = naive::draw_path(k, 4, &mut rng);
                let (u_naive, v_naive, calls_naive) =
                    naive::uplmc_batch_naive(&u0, &v0, &spec, eta, gamma, &path);
                let plan = naive::uplmc_plan_from_path(k, eta, gamma, &path);
                let mut state =
                    ChainState::underdamped(u0, v0, ChainRng::new(RngStream::new(0, 0)));
                uplmc_batch_with_plan(&mut state, &spec, eta, gamma, &plan).unwrap();
                assert_eq!(state.gradient_calls, calls_naive);
                let vel = state.velocity.as_ref().unwrap();
                for j in 0..2 {
                    assert!((state.position[j] - u_naive[j]).abs() < 1e-11);
                    assert!((vel[j] - v_naive[j]).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn inclusive_partial_sum_convention_shifts_by_one_increment() {
        // The i-inclusive reading of the interpolant's partial sum equals the
        // j<i convention evaluated one index later; at i = 0 it would inject
        // fresh noise into the interpolant and destroy the K = 1 equivalence
        // with the Euler step.
        let k = 4;
        let eta = 0.4;
        let mut rng = ChainRng::new(RngStream::new(5, 0));
        let path = naive::draw_path(k, 1, &mut rng);
        let sd = (2.0 * eta / k as f64).sqrt();
        let mut exclusive = vec![0.0; k + 1];
        for i in 0..k {
            exclusive[i + 1] = exclusive[i] + sd * path.gaussians[i][0];
        }
        for i in 0..k {
            let inclusive_i: f64 = (0..=i).map(|j| sd * path.gaussians[j][0]).sum();
            assert!((inclusive_i - exclusive[i + 1]).abs() < 1e-12);
        }
        assert!(
            exclusive[1] != 0.0,
            "inclusive convention at i = 0 is nonzero noise"
        );
    }

    #[test]
    fn ulmc_momentum_reaches_unit_variance_under_clamp() {
        // With γh beyond the clamp the momentum block is a fresh N(0, 1)
        // draw; starting at the optimum the drift contributes nothing.
        let kb = build_kernel(40.0, 1.0).unwrap();
        assert_eq!(kb.a.0[1][1], 0.0);
        assert_eq!(kb.c.0[1][1], 1.0);
        let spec = quad(&[1.0]);
        let mut state =
            ChainState::underdamped(vec![0.0], vec![5.0], ChainRng::new(RngStream::new(8, 0)));
        let n = 100_000;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            state.position[0] = 0.0;
            state.velocity.as_mut().unwrap()[0] = 5.0;
            ulmc_step(&mut state, &spec, &kb).unwrap();
            sum_sq += state.velocity.as_ref().unwrap()[0].powi(2);
        }
        let emp = sum_sq / n as f64;
        assert!((emp - 1.0).abs() < 0.02, "momentum variance {emp}");
    }

    #[test]
    fn ulmc_fixed_point_and_mean_contraction() {
        let lam = 3.0;
        let spec = quad(&[lam]);
        let gamma = 2.0 * spec.ell().sqrt();
        let h = 0.05;
        let kb = build_kernel(h, gamma).unwrap();
        // Composed per-coordinate affine map on (u, v): A − g_col·(λ, 0).
        let map = Mat2([
            [kb.a.0[0][0] - kb.g_col[0] * lam, kb.a.0[0][1]],
            [kb.a.0[1][0] - kb.g_col[1] * lam, kb.a.0[1][1]],
        ]);
        let tr = map.trace();
        let det = map.det();
        let disc = tr * tr - 4.0 * det;
        let spectral_radius = if disc >= 0.0 {
            let r = disc.sqrt();
            ((tr + r) / 2.0).abs().max(((tr - r) / 2.0).abs())
        } else {
            det.abs().sqrt()
        };
        assert!(spectral_radius < 1.0, "radius {spectral_radius}");
        // (optimum, 0) is an exact fixed point of the drift-only update.
        let at_rest = map.apply([0.0, 0.0]);
        assert_eq!(at_rest, [0.0, 0.0]);
        // Iterated drift-only map sends any start to the optimum.
        let mut uv = [1.7, -0.4];
        for _ in 0..2000 {
            let g = lam * uv[0];
            uv = [
                kb.a.0[0][0] * uv[0] + kb.a.0[0][1] * uv[1] - kb.g_col[0] * g,
                kb.a.0[1][1] * uv[1] - kb.g_col[1] * g,
            ];
        }
        assert!(uv[0].abs() < 1e-10 && uv[1].abs() < 1e-10);
    }

    #[test]
    fn ulmc_stationary_covariance_matches_lyapunov_fixed_point() {
        // The quadratic-target chain is linear-Gaussian per coordinate:
        // its stationary covariance is the fixed point of S -> T S T' + c,
        // iterated here as an independent oracle.
        let lam = 2.0;
        let spec = quad(&[lam]);
        let gamma = 2.0 * spec.ell().sqrt();
        let h = 0.1;
        let kb = build_kernel(h, gamma).unwrap();
        let t = Mat2([
            [kb.a.0[0][0] - kb.g_col[0] * lam, kb.a.0[0][1]],
            [kb.a.0[1][0] - kb.g_col[1] * lam, kb.a.0[1][1]],
        ]);
        let mut sigma = Mat2::ZERO;
        for _ in 0..4000 {
            sigma = t * sigma * t.transpose() + kb.c;
        }
        let residual = (t * sigma * t.transpose() + kb.c - sigma).frobenius_norm();
        assert!(residual < 1e-14, "fixed point not reached: {residual:e}");

        let mut state =
            ChainState::underdamped(vec![0.0], vec![0.0], ChainRng::new(RngStream::new(61, 0)));
        let (mut suu, mut suv, mut svv) = (0.0, 0.0, 0.0);
        let (burn, keep) = (2000u64, 400_000u64);
        for step in 0..(burn + keep) {
            ulmc_step(&mut state, &spec, &kb).unwrap();
            if step >= burn {
                let u = state.position[0];
                let v = state.velocity.as_ref().unwrap()[0];
                suu += u * u;
                suv += u * v;
                svv += v * v;
            }
        }
        let n = keep as f64;
        // Correlation time of the chain is a few tens of steps (set by the
        // spectral radius; the map is non-normal, so the operator norm can
        // exceed 1 and is the wrong rate here). Four standard errors at the
        // effective sample size gives ~5% slack.
        let tr = t.trace();
        let det = t.det();
        let disc = tr * tr - 4.0 * det;
        let rho = if disc >= 0.0 {
            let r = disc.sqrt();
            ((tr + r) / 2.0).abs().max(((tr - r) / 2.0).abs())
        } else {
            det.abs().sqrt()
        };
        assert!(rho < 1.0);
        let ess = n * (1.0 - rho);
        for (emp, exact) in [
            (suu / n, sigma.0[0][0]),
            (suv / n, sigma.0[0][1]),
            (svv / n, sigma.0[1][1]),
        ] {
            let se = (sigma.0[0][0].max(sigma.0[1][1])) * (2.0 / ess).sqrt();
            assert!(
                (emp - exact).abs() < 4.0 * se,
                "empirical {emp} vs fixed point {exact} (se {se})"
            );
        }
    }

    #[test]
    fn overdamped_drift_map_contracts_exactly() {
        let spec = quad(&[1.0, 10.0]);
        let (eta, k) = (0.08, 8usize);
        let h = eta / k as f64;
        let factor = 1.0 - spec.alpha() * h;
        let mut rng = ChainRng::new(RngStream::new(15, 0));
        for _ in 0..200 {
            let x: Vec<f64> = (0..2).map(|_| 3.0 * rng.normal()).collect();
            let y: Vec<f64> = (0..2).map(|_| 3.0 * rng.normal()).collect();
            let tx: Vec<f64> = (0..2).map(|j| x[j] - h * spec.gradient(&x)[j]).collect();
            let ty: Vec<f64> = (0..2).map(|j| y[j] - h * spec.gradient(&y)[j]).collect();
            let before: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
            let after: f64 = tx.iter().zip(&ty).map(|(a, b)| (a - b) * (a - b)).sum();
            assert!(after.sqrt() <= factor * before.sqrt() + 1e-12);
        }
    }

    #[test]
    fn transformed_step_map_contracts_uniformly() {
        // In M-coordinates the drift map has operator norm ≤ 1 − c·αh/γ for a
        // grid-stable constant c; measured once over schedule-compliant grids
        // and pinned here.
        let mut c_min = f64::INFINITY;
        for &(alpha, ell) in &[(1.0f64, 1.0f64), (1.0, 4.0), (0.5, 8.0)] {
            let gamma = 2.0 * ell.sqrt();
            for &x in &[1e-3, 1e-2, 0.05, 0.1] {
                let h = x / gamma;
                for &lam in &[alpha, 0.5 * (alpha + ell), ell] {
                    let pk = build_primed_kernel(h, gamma).unwrap();
                    let map = Mat2([
                        [pk.a.0[0][0] - pk.g_col[0] * lam, pk.a.0[0][1]],
                        [pk.a.0[1][0] - pk.g_col[1] * lam, pk.a.0[1][1]],
                    ]);
                    let norm = map.operator_norm();
                    assert!(norm < 1.0, "norm {norm} at lam={lam}, h={h}");
                    let c = (1.0 - norm) * gamma / (alpha * h);
                    c_min = c_min.min(c);
                }
            }
        }
        assert!(c_min > 0.2, "contraction constant degraded: {c_min}");
    }

    #[test]
    fn expected_cost_is_two_calls_per_batch() {
        let spec = quad(&[1.0, 1.0]);
        let mut state =
            ChainState::overdamped(vec![0.0, 0.0], ChainRng::new(RngStream::new(31, 0)));
        let n = 20_000u64;
        for _ in 0..n {
            oplmc_batch(&mut state, &spec, 0.05, 16).unwrap();
        }
        let mean = state.gradient_calls as f64 / n as f64;
        let se = (1.0 / n as f64).sqrt();
        assert!((mean - 2.0).abs() < 4.0 * se, "mean calls {mean}");
    }

    #[test]
    fn overdamped_schedule_formulas() {
        // With C₁ chosen so η = 0.2, L = 5, ε = 0.1: K = 4·0.2·5/0.01 = 400.
        let mut inputs = ScheduleInputs::new(0.1, 1.0, 5.0, 1);
        let eta_unit = overdamped_schedule(&inputs).unwrap().eta;
        inputs.c1 = 0.2 / eta_unit;
        let cfg = overdamped_schedule(&inputs).unwrap();
        assert!((cfg.eta - 0.2).abs() < 1e-12);
        assert_eq!(cfg.k, 400);
        assert!((cfg.requested_inner_step - 5e-4).abs() < 1e-18);
        assert!((cfg.inner_step - 5e-4).abs() < 1e-6);
        assert!(overdamped_schedule(&ScheduleInputs::new(0.0, 1.0, 1.0, 1)).is_err());
    }

    #[test]
    fn overdamped_schedule_degenerates_to_single_step() {
        // Large ε rounds K to 1: the batch is then exactly one Euler step.
        let inputs = ScheduleInputs::new(4.0, 1.0, 1.0, 1);
        let cfg = overdamped_schedule(&inputs).unwrap();
        assert_eq!(cfg.k, 1);
        assert_eq!(cfg.inner_step, cfg.eta);
    }

    #[test]
    fn underdamped_schedule_formulas() {
        let inputs = ScheduleInputs::new(0.1, 1.0, 4.0, 1).with_p(0);
        let cfg = underdamped_schedule(&inputs).unwrap();
        assert_eq!(cfg.gamma, Some(4.0));
        let h = cfg.requested_inner_step;
        assert!((h - 0.94 * 0.1 / (4.0 * 2.0f64.sqrt())).abs() < 1e-15);
        assert!((h - 0.016617).abs() < 1e-6);
        // p = 3 makes the second accuracy exponent (p+2)/(4p+3) = 1/3.
        let p = 3.0f64;
        assert!(((p + 2.0) / (4.0 * p + 3.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!(underdamped_schedule(&ScheduleInputs::new(-1.0, 1.0, 1.0, 1)).is_err());
    }

    #[test]
    fn gradient_sum_diagnostic_trivial_cases() {
        let spec = quad(&[1.0, 1.0]);
        // Stationary-at-optimum trace: zero gradients, positive envelope.
        let trace = vec![vec![0.0, 0.0]; 101];
        let rep = gradient_sum_diagnostic(&trace, &spec, 0.01).unwrap();
        assert_eq!(rep.sum_sq_grad, 0.0);
        let expect_second_term = GRADIENT_SUM_CALIBRATION * 1.0 * 2.0 * 100.0;
        assert!((rep.bound - expect_second_term).abs() < 1e-9);
        assert!(!rep.violated);
        assert!(gradient_sum_diagnostic(&trace[..1], &spec, 0.01).is_err());
    }

    #[test]
    fn gradient_sum_diagnostic_monte_carlo() {
        let spec = quad(&[1.0, 1.0]);
        let (eta, k, n_batches) = (0.01, 8usize, 100usize);
        let n_chains = 300;
        let mut mean_sum = 0.0;
        let mut mean_bound = 0.0;
        for chain in 0..n_chains {
            let mut state = ChainState::overdamped(
                vec![0.0, 0.0],
                ChainRng::new(RngStream::new(2024, chain as u64)),
            );
            let mut trace = vec![state.position.clone()];
            for _ in 0..n_batches {
                oplmc_batch(&mut state, &spec, eta, k).unwrap();
                trace.push(state.position.clone());
            }
            let rep = gradient_sum_diagnostic(&trace, &spec, eta).unwrap();
            mean_sum += rep.sum_sq_grad;
            mean_bound += rep.bound;
        }
        mean_sum /= n_chains as f64;
        mean_bound /= n_chains as f64;
        assert!(
            mean_sum <= mean_bound,
            "gradient sum {mean_sum} above envelope {mean_bound}"
        );
    }

    #[test]
    fn total_cost_identity() {
        // Total calls = N + Σ_t |S_t| exactly.
        let spec = quad(&[1.0, 1.0]);
        let mut state =
            ChainState::overdamped(vec![0.1, 0.2], ChainRng::new(RngStream::new(55, 0)));
        let mut hits = 0u64;
        let n = 500u64;
        for _ in 0..n {
            let before = state.gradient_calls;
            oplmc_batch(&mut state, &spec, 0.05, 12).unwrap();
            hits += state.gradient_calls - before - 1;
        }
        assert_eq!(state.gradient_calls, n + hits);
    }
}

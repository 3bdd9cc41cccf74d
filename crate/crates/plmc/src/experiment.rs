//! Experiment orchestration: multi-chain runs, accuracy sweeps with
//! first-passage cost measurement, verification suites, and machine-readable
//! reports.
//!
//! Chains fan out over a worker pool with per-chain random streams and are
//! merged in chain order after all finish, so every output is a pure function
//! of (config, seed). Wall time is reported on stderr only; the emitted CSV
//! and JSON are byte-identical across repeated runs.

use crate::bridge::{
    assemble_underdamped_joint_covariance, brute_force_underdamped_joint_covariance,
};
use crate::config::{ConfigError, ExperimentConfig, TargetConfig};
use crate::coupling::{
    certify_additive_perturbation, certify_variance_matched_perturbation,
    certify_variance_replacement, PerturbationSpec, W2Certificate,
};
use crate::kernel::{
    build_kernel, build_primed_kernel, gamma_prime_eigen_expansion_check, semigroup_residual,
    whitened_drift_gram,
};
use crate::metrics::{
    fit_loglog, w2_gaussian_diag, Estimator, LineFit, MomentEstimate, W2Estimate,
};
use crate::potential::{probe_assumption, GaussianTarget, PotentialSpec};
use crate::rng::{ChainRng, RngStream};
use crate::samplers::{
    default_init, olmc_step, oplmc_batch, ulmc_step, uplmc_batch, ChainState, Dynamics, Method,
    SamplerConfig,
};
use rayon::prelude::*;
use serde::Serialize;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("sampler failure: {0}")]
    Sampler(String),
    #[error("estimator failure: {0}")]
    Estimator(String),
    #[error("verification failure: {0}")]
    Verify(String),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

impl From<crate::samplers::SamplerError> for ExperimentError {
    fn from(e: crate::samplers::SamplerError) -> Self {
        ExperimentError::Sampler(e.to_string())
    }
}

/// Formats a float with 17 significant digits, the fidelity all CSV and JSON
/// numbers are emitted at.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// One sweep (or sample) result row.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub eta: f64,
    pub k: usize,
    pub n_batches: usize,
    /// Mean gradient calls per chain at the recorded point.
    pub gradient_calls: f64,
    /// Mean correction-set size per batch.
    pub mean_hits: f64,
    pub w2_moment: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w2_sliced: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sliced_stderr: Option<f64>,
    /// Whether the accuracy threshold was reached within budget.
    pub attained: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub rows: Vec<SweepRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost_fit: Option<LineFit>,
    pub total_gradient_calls: u64,
    /// Seconds; excluded from serialized reports to keep outputs
    /// byte-deterministic.
    #[serde(skip)]
    pub wall_time: f64,
}

impl RunReport {
    /// CSV rows: epsilon,eta,k,n_batches,gradient_calls,w2_moment,w2_sliced,stderr
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("epsilon,eta,k,n_batches,gradient_calls,w2_moment,w2_sliced,stderr\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                fmt17(r.epsilon),
                fmt17(r.eta),
                r.k,
                r.n_batches,
                fmt17(r.gradient_calls),
                fmt17(r.w2_moment),
                fmt17(r.w2_sliced.unwrap_or(f64::NAN)),
                fmt17(r.sliced_stderr.unwrap_or(f64::NAN)),
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}

struct ChainOutcome {
    final_position: Vec<f64>,
    gradient_calls: u64,
    batches: u64,
    /// Positions recorded at checkpoint batch counts.
    checkpoints: Vec<Vec<f64>>,
    /// Gradient calls at each checkpoint.
    checkpoint_calls: Vec<u64>,
}

enum InitPlan {
    Default,
    /// Stationary draw plus a deterministic mean offset along e₁.
    StationaryShifted {
        offset: f64,
    },
}

fn init_chain(
    spec: &PotentialSpec,
    target: Option<&GaussianTarget>,
    dynamics: Dynamics,
    plan: &InitPlan,
    rng: &mut ChainRng,
) -> (Vec<f64>, Option<Vec<f64>>) {
    match plan {
        InitPlan::Default => default_init(spec, dynamics, rng),
        InitPlan::StationaryShifted { offset } => {
            let t = target.expect("stationary-shifted init needs a Gaussian target");
            let d = spec.dim();
            let mut pos: Vec<f64> = (0..d)
                .map(|j| t.mean[j] + rng.normal() / t.precision_diag[j].sqrt())
                .collect();
            pos[0] += offset;
            let vel = match dynamics {
                Dynamics::Overdamped => None,
                Dynamics::Underdamped => Some((0..d).map(|_| rng.normal()).collect()),
            };
            (pos, vel)
        }
    }
}

/// Runs one chain for `sampler.n_batches` batches, snapshotting positions
/// every `cadence` batches (0 = no checkpoints).
fn run_chain(
    spec: &PotentialSpec,
    target: Option<&GaussianTarget>,
    sampler: &SamplerConfig,
    stream: RngStream,
    init: &InitPlan,
    cadence: usize,
) -> Result<ChainOutcome, ExperimentError> {
    let mut rng = ChainRng::new(stream);
    let (pos, vel) = init_chain(spec, target, sampler.dynamics, init, &mut rng);
    let mut state = match sampler.dynamics {
        Dynamics::Overdamped => ChainState::overdamped(pos, rng),
        Dynamics::Underdamped => {
            ChainState::underdamped(pos, vel.expect("underdamped init provides a velocity"), rng)
        }
    };
    let kernel = match (sampler.dynamics, sampler.method) {
        (Dynamics::Underdamped, Method::Euler) => Some(
            build_kernel(sampler.eta, sampler.gamma.expect("underdamped needs gamma"))
                .map_err(|e| ExperimentError::Sampler(e.to_string()))?,
        ),
        _ => None,
    };
    let mut checkpoints = Vec::new();
    let mut checkpoint_calls = Vec::new();
    for b in 0..sampler.n_batches {
        match (sampler.dynamics, sampler.method) {
            (Dynamics::Overdamped, Method::Euler) => olmc_step(&mut state, spec, sampler.eta)?,
            (Dynamics::Overdamped, Method::Poisson) => {
                oplmc_batch(&mut state, spec, sampler.eta, sampler.k)?
            }
            (Dynamics::Underdamped, Method::Euler) => {
                ulmc_step(&mut state, spec, kernel.as_ref().unwrap())?
            }
            (Dynamics::Underdamped, Method::Poisson) => uplmc_batch(
                &mut state,
                spec,
                sampler.eta,
                sampler.k,
                sampler.gamma.expect("underdamped needs gamma"),
            )?,
        }
        if cadence > 0 && (b + 1) % cadence == 0 {
            checkpoints.push(state.position.clone());
            checkpoint_calls.push(state.gradient_calls);
        }
    }
    Ok(ChainOutcome {
        final_position: state.position,
        gradient_calls: state.gradient_calls,
        batches: sampler.n_batches as u64,
        checkpoints,
        checkpoint_calls,
    })
}

fn run_all_chains(
    spec: &PotentialSpec,
    target: Option<&GaussianTarget>,
    sampler: &SamplerConfig,
    n_chains: usize,
    seed: u64,
    init: &InitPlan,
    cadence: usize,
) -> Result<Vec<ChainOutcome>, ExperimentError> {
    (0..n_chains)
        .into_par_iter()
        .map(|c| {
            run_chain(
                spec,
                target,
                sampler,
                RngStream::new(seed, c as u64),
                init,
                cadence,
            )
        })
        .collect()
}

/// Moment-surrogate W₂² between a point cloud and the Gaussian target's
/// stationary law (diagonal mode).
fn moment_w2(positions: &[&[f64]], target: &GaussianTarget) -> Result<f64, ExperimentError> {
    let d = target.mean.len();
    let mut acc = MomentEstimate::new(d);
    for p in positions {
        acc.push(p);
    }
    w2_gaussian_diag(
        acc.mean(),
        &acc.variance_diag(),
        &target.mean,
        &target.variances(),
    )
    .map_err(|e| ExperimentError::Estimator(e.to_string()))
}

/// Runs the configured experiment at its scheduled accuracy and estimates the
/// distance to the target from the terminal samples.
pub fn run_sample(config: &ExperimentConfig) -> Result<RunReport, ExperimentError> {
    config.validate()?;
    let started = Instant::now();
    let (spec, target) = config.target.build()?;
    let sampler = config.resolve(&spec, None)?;
    let outcomes = run_all_chains(
        &spec,
        target.as_ref(),
        &sampler,
        config.n_chains,
        config.seed,
        &InitPlan::Default,
        0,
    )?;
    let total_calls: u64 = outcomes.iter().map(|o| o.gradient_calls).sum();
    let total_batches: u64 = outcomes.iter().map(|o| o.batches).sum();
    let positions: Vec<&[f64]> = outcomes
        .iter()
        .map(|o| o.final_position.as_slice())
        .collect();

    let w2_moment = match (
        &target,
        config.estimators.contains(&Estimator::GaussianMoment),
    ) {
        (Some(t), true) => moment_w2(&positions, t)?,
        _ => f64::NAN,
    };
    let (w2_sliced_val, sliced_stderr) =
        if config.estimators.contains(&Estimator::Sliced) {
            match &target {
                Some(t) => {
                    let est = sliced_against_target(config, t, &positions)?;
                    (Some(est.value_sq), est.std_error)
                }
                None => return Err(ExperimentError::Estimator(
                    "sliced estimator needs reference samples, available only for Gaussian targets"
                        .into(),
                )),
            }
        } else {
            (None, None)
        };

    let mean_hits = if total_batches == 0 {
        0.0
    } else {
        (total_calls as f64 - total_batches as f64) / total_batches as f64
    };
    let epsilon = config.schedule.map(|s| s.epsilon).unwrap_or(f64::NAN);
    let row = SweepRow {
        epsilon,
        eta: sampler.eta,
        k: sampler.k,
        n_batches: sampler.n_batches,
        gradient_calls: total_calls as f64 / config.n_chains as f64,
        mean_hits,
        w2_moment,
        w2_sliced: w2_sliced_val,
        sliced_stderr,
        attained: true,
    };
    Ok(RunReport {
        config: config.clone(),
        rows: vec![row],
        cost_fit: None,
        total_gradient_calls: total_calls,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

fn sliced_against_target(
    config: &ExperimentConfig,
    target: &GaussianTarget,
    positions: &[&[f64]],
) -> Result<W2Estimate, ExperimentError> {
    // Reference cloud drawn on a stream far outside the chain range.
    let mut rng = ChainRng::new(RngStream::new(config.seed, u64::MAX - 1));
    let d = target.mean.len();
    let reference: Vec<Vec<f64>> = (0..positions.len())
        .map(|_| {
            (0..d)
                .map(|j| target.mean[j] + rng.normal() / target.precision_diag[j].sqrt())
                .collect()
        })
        .collect();
    let cloud: Vec<Vec<f64>> = positions.iter().map(|p| p.to_vec()).collect();
    crate::metrics::w2_sliced(&cloud, &reference, config.sliced_directions, &mut rng)
        .map_err(|e| ExperimentError::Estimator(e.to_string()))
}

/// Accuracy sweep: for each ε, builds the schedule, measures the gradient
/// calls needed to first reach W₂² ≤ ε²d/α over checkpoints, and fits
/// log(calls) against log(1/ε).
pub fn run_sweep(
    config: &ExperimentConfig,
    epsilons: &[f64],
) -> Result<RunReport, ExperimentError> {
    config.validate()?;
    if epsilons.len() < 3 {
        return Err(ExperimentError::Estimator(
            "a sweep needs at least 3 accuracy targets".into(),
        ));
    }
    let started = Instant::now();
    let (spec, target) = config.target.build()?;
    let target = target.ok_or_else(|| {
        ExperimentError::Estimator(
            "sweeps need closed-form target moments; use a quadratic target".into(),
        )
    })?;
    let mut rows = Vec::new();
    let mut total_calls = 0u64;
    for (epsi, &eps) in epsilons.iter().enumerate() {
        let scheduled = config.resolve(&spec, Some(eps))?;
        let budget_batches = ((scheduled.n_batches as f64 * config.sweep.budget_multiplier).ceil()
            as usize)
            .max(scheduled.n_batches + 1);
        let cadence = scheduled.n_batches.div_ceil(20).max(1);
        let sampler = SamplerConfig {
            n_batches: budget_batches,
            ..scheduled
        };
        let threshold = eps * eps * spec.dim() as f64 / spec.alpha();
        let offset = (config.sweep.init_ratio * threshold).sqrt();
        let outcomes = run_all_chains(
            &spec,
            Some(&target),
            &sampler,
            config.n_chains,
            config.seed.wrapping_add(epsi as u64 * 0x9e37),
            &InitPlan::StationaryShifted { offset },
            cadence,
        )?;
        total_calls += outcomes.iter().map(|o| o.gradient_calls).sum::<u64>();
        let n_checkpoints = outcomes[0].checkpoints.len();
        let mut hit: Option<(f64, f64)> = None; // (mean calls, w2)
        for cp in 0..n_checkpoints {
            let positions: Vec<&[f64]> = outcomes
                .iter()
                .map(|o| o.checkpoints[cp].as_slice())
                .collect();
            let w2 = moment_w2(&positions, &target)?;
            if w2 <= threshold {
                let calls = outcomes
                    .iter()
                    .map(|o| o.checkpoint_calls[cp] as f64)
                    .sum::<f64>()
                    / outcomes.len() as f64;
                hit = Some((calls, w2));
                break;
            }
        }
        let total_batches: u64 = outcomes.iter().map(|o| o.batches).sum();
        let chain_calls: u64 = outcomes.iter().map(|o| o.gradient_calls).sum();
        let mean_hits = (chain_calls as f64 - total_batches as f64) / total_batches as f64;
        let (calls, w2, attained) = match hit {
            Some((calls, w2)) => (calls, w2, true),
            None => {
                let positions: Vec<&[f64]> = outcomes
                    .iter()
                    .map(|o| o.final_position.as_slice())
                    .collect();
                (
                    chain_calls as f64 / outcomes.len() as f64,
                    moment_w2(&positions, &target)?,
                    false,
                )
            }
        };
        rows.push(SweepRow {
            epsilon: eps,
            eta: sampler.eta,
            k: sampler.k,
            n_batches: scheduled.n_batches,
            gradient_calls: calls,
            mean_hits,
            w2_moment: w2,
            w2_sliced: None,
            sliced_stderr: None,
            attained,
        });
    }
    let fit_points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.attained)
        .map(|r| (1.0 / r.epsilon, r.gradient_calls))
        .collect();
    let cost_fit = fit_loglog(&fit_points).ok();
    Ok(RunReport {
        config: config.clone(),
        rows,
        cost_fit,
        total_gradient_calls: total_calls,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

/// Output of one verification suite: a CSV table and an overall pass flag.
#[derive(Clone, Debug, Serialize)]
pub struct VerifyOutcome {
    pub suite: String,
    pub csv: String,
    pub pass: bool,
}

/// Kernel identity residuals over a step grid:
/// columns (h, res_semigroup, res_conjugation, res_gram, eigen_residual_scaled).
pub fn verify_kernels(gamma: f64, h_grid: &[f64]) -> Result<VerifyOutcome, ExperimentError> {
    let mut csv = String::from("h,res_semigroup,res_conjugation,res_gram,eigen_residual_scaled\n");
    let mut pass = true;
    let mut eigen_scaled = Vec::new();
    for &h in h_grid {
        let (ra, rg) =
            semigroup_residual(h, h, gamma).map_err(|e| ExperimentError::Verify(e.to_string()))?;
        let res_semigroup = ra.max(rg);
        let kb = build_kernel(h, gamma).map_err(|e| ExperimentError::Verify(e.to_string()))?;
        let pk =
            build_primed_kernel(h, gamma).map_err(|e| ExperimentError::Verify(e.to_string()))?;
        let m = pk.m;
        let a_res = (m * kb.a * m.inverse() - pk.a).frobenius_norm();
        let c_res =
            (m * kb.c * m.transpose() - pk.c).frobenius_norm() / pk.c.frobenius_norm().max(1e-300);
        let gm = m.apply(kb.g_col);
        let g_res = ((gm[0] - pk.g_col[0]).powi(2) + (gm[1] - pk.g_col[1]).powi(2)).sqrt();
        let res_conj = a_res.max(c_res).max(g_res);
        let res_gram = if gamma * h < 0.1 {
            let w = whitened_drift_gram(h, gamma)
                .map_err(|e| ExperimentError::Verify(e.to_string()))?;
            let target = h / (2.0 * gamma);
            ((w.0[0][0] - target) / target)
                .abs()
                .max(w.0[0][1].abs())
                .max(w.0[1][0].abs())
                .max(w.0[1][1].abs())
        } else {
            f64::NAN
        };
        let eigen = if gamma * h < 0.1 {
            let rep = gamma_prime_eigen_expansion_check(gamma, &[h])
                .map_err(|e| ExperimentError::Verify(e.to_string()))?;
            eigen_scaled.push(rep.max_scaled_residual);
            rep.max_scaled_residual
        } else {
            f64::NAN
        };
        if gamma * 2.0 * h <= 1.0 && res_semigroup > 1e-12 {
            pass = false;
        }
        if res_conj > 1e-12 {
            pass = false;
        }
        if res_gram.is_finite() && res_gram > 1e-9 {
            pass = false;
        }
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt17(h),
            fmt17(res_semigroup),
            fmt17(res_conj),
            fmt17(res_gram),
            fmt17(eigen),
        ));
    }
    // Remainder boundedness: every scaled eigen residual within 10x of the
    // coarsest grid point's.
    if let Some(&coarse) = eigen_scaled.first() {
        if eigen_scaled.iter().any(|&r| r > 10.0 * coarse) {
            pass = false;
        }
    }
    Ok(VerifyOutcome {
        suite: "kernels".into(),
        csv,
        pass,
    })
}

/// Bridge covariance residuals: assembled closed form vs brute-force block
/// accumulation, for all correction sets at each batch size.
pub fn verify_bridge(gamma_eta: f64, k_max: usize) -> Result<VerifyOutcome, ExperimentError> {
    let gamma = 2.0;
    let eta = gamma_eta / gamma;
    let mut csv = String::from("k,n_sets,max_rel_residual\n");
    let mut pass = true;
    for k in 1..=k_max.min(8) {
        let mut worst = 0.0f64;
        let mut n_sets = 0u32;
        for mask in 0u32..(1 << k) {
            let indices: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
            let a = assemble_underdamped_joint_covariance(k, eta, gamma, &indices)
                .map_err(|e| ExperimentError::Verify(e.to_string()))?;
            let b = brute_force_underdamped_joint_covariance(k, eta, gamma, &indices)
                .map_err(|e| ExperimentError::Verify(e.to_string()))?;
            let scale = b
                .iter()
                .flatten()
                .fold(0.0f64, |m, x| m.max(x.abs()))
                .max(1e-300);
            let resid = a
                .iter()
                .flatten()
                .zip(b.iter().flatten())
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
                / scale;
            worst = worst.max(resid);
            n_sets += 1;
        }
        if worst > 1e-10 {
            pass = false;
        }
        csv.push_str(&format!("{k},{n_sets},{}\n", fmt17(worst)));
    }
    Ok(VerifyOutcome {
        suite: "bridge".into(),
        csv,
        pass,
    })
}

fn certificate_row(beta: f64, nu: f64, cert: &W2Certificate) -> String {
    format!(
        "{},{},{},{},{},{}\n",
        fmt17(beta),
        fmt17(nu),
        fmt17(cert.lhs),
        fmt17(cert.rhs),
        fmt17(cert.margin),
        cert.pass,
    )
}

/// Coupling-bound certificates over a β grid; per β three consecutive rows
/// (additive, variance-matched, variance-replacement), columns
/// (beta, nu, lhs, rhs, margin, pass).
pub fn verify_coupling(betas: &[f64], n_quad: usize) -> Result<VerifyOutcome, ExperimentError> {
    let mut csv = String::from("beta,nu,lhs,rhs,margin,pass\n");
    let mut pass = true;
    for &beta in betas {
        let spec = PerturbationSpec::two_point(beta)
            .map_err(|e| ExperimentError::Verify(e.to_string()))?;
        let c1 = certify_additive_perturbation(&spec, n_quad)
            .map_err(|e| ExperimentError::Verify(e.to_string()))?;
        let c2 = certify_variance_matched_perturbation(&spec, n_quad)
            .map_err(|e| ExperimentError::Verify(e.to_string()))?;
        let n = 10.0 * beta.max(1.0) * beta.max(1.0);
        let c3 = certify_variance_replacement(beta, n, n_quad)
            .map_err(|e| ExperimentError::Verify(e.to_string()))?;
        for cert in [&c1, &c2, &c3] {
            pass &= cert.pass;
            csv.push_str(&certificate_row(beta, spec.nu, cert));
        }
    }
    Ok(VerifyOutcome {
        suite: "coupling".into(),
        csv,
        pass,
    })
}

/// Randomized probing of the convexity/smoothness assumptions of a target.
pub fn verify_assumption(
    target: &TargetConfig,
    n_pairs: usize,
    radius: f64,
    seed: u64,
) -> Result<VerifyOutcome, ExperimentError> {
    let (spec, _) = target.build()?;
    let rep = probe_assumption(&spec, n_pairs, radius, seed)
        .map_err(|e| ExperimentError::Verify(e.to_string()))?;
    let tol = 1e-9 * spec.ell();
    let pass = rep.min_monotonicity_ratio >= spec.alpha() - tol
        && rep.max_lipschitz_ratio <= spec.ell() + tol;
    let mut csv =
        String::from("n_pairs,radius,min_monotonicity_ratio,max_lipschitz_ratio,alpha,ell,pass\n");
    csv.push_str(&format!(
        "{},{},{},{},{},{},{}\n",
        n_pairs,
        fmt17(radius),
        fmt17(rep.min_monotonicity_ratio),
        fmt17(rep.max_lipschitz_ratio),
        fmt17(spec.alpha()),
        fmt17(spec.ell()),
        pass,
    ));
    Ok(VerifyOutcome {
        suite: "assumption".into(),
        csv,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ExplicitConfig, ScheduleConfig, SweepSettings};

    fn quad_config(method: Method, dynamics: Dynamics) -> ExperimentConfig {
        ExperimentConfig {
            target: TargetConfig::Quadratic {
                precision: vec![1.0, 1.0],
                mean: vec![0.0, 0.0],
            },
            dynamics,
            method,
            schedule: Some(ScheduleConfig {
                epsilon: 0.3,
                p: 0,
                c1: 1.0,
                c2: 1.0,
                c3: 1.0,
                c4: 1.0,
                gamma_multiplier: 2.0,
            }),
            explicit: None,
            n_chains: 50,
            seed: 11,
            output_path: None,
            estimators: vec![Estimator::GaussianMoment, Estimator::Sliced],
            sliced_directions: 8,
            sweep: SweepSettings::default(),
        }
    }

    #[test]
    fn noop_run_reports_zero_calls() {
        let mut cfg = quad_config(Method::Euler, Dynamics::Overdamped);
        cfg.schedule = None;
        cfg.explicit = Some(ExplicitConfig {
            eta: 0.01,
            k: 1,
            gamma: None,
            n_batches: 0,
        });
        cfg.n_chains = 1;
        cfg.estimators = vec![Estimator::GaussianMoment];
        let report = run_sample(&cfg).unwrap();
        assert_eq!(report.total_gradient_calls, 0);
        // Terminal sample is the initialization (the optimum).
        assert!(report.rows[0].w2_moment.is_finite());
    }

    #[test]
    fn sample_run_is_deterministic() {
        let cfg = quad_config(Method::Poisson, Dynamics::Overdamped);
        let a = run_sample(&cfg).unwrap();
        let b = run_sample(&cfg).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.total_gradient_calls, b.total_gradient_calls);
    }

    #[test]
    fn underdamped_sample_runs() {
        let mut cfg = quad_config(Method::Poisson, Dynamics::Underdamped);
        cfg.n_chains = 20;
        cfg.estimators = vec![Estimator::GaussianMoment];
        let report = run_sample(&cfg).unwrap();
        assert!(report.rows[0].w2_moment.is_finite());
        assert!(report.total_gradient_calls > 0);
    }

    #[test]
    fn underdamped_euler_baseline_runs() {
        let mut cfg = quad_config(Method::Euler, Dynamics::Underdamped);
        cfg.n_chains = 20;
        cfg.estimators = vec![Estimator::GaussianMoment];
        let report = run_sample(&cfg).unwrap();
        let row = &report.rows[0];
        assert_eq!(row.k, 1);
        // One gradient call per step.
        assert_eq!(
            report.total_gradient_calls,
            row.n_batches as u64 * cfg.n_chains as u64
        );
        assert!(row.w2_moment.is_finite());
    }

    #[test]
    fn config_echo_roundtrips_through_report() {
        let cfg = quad_config(Method::Poisson, Dynamics::Overdamped);
        let report = run_sample(&cfg).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        let echoed: ExperimentConfig =
            serde_json::from_value(parsed.get("config").unwrap().clone()).unwrap();
        assert_eq!(echoed, cfg);
    }

    #[test]
    fn logistic_target_runs_without_closed_form_moments() {
        let mut cfg = quad_config(Method::Poisson, Dynamics::Overdamped);
        cfg.target = TargetConfig::Logistic {
            alpha: 0.5,
            n: 30,
            dim: 3,
            data_seed: 5,
            data_path: None,
        };
        cfg.n_chains = 10;
        cfg.estimators = vec![Estimator::GaussianMoment];
        let report = run_sample(&cfg).unwrap();
        // No closed-form stationary moments: the surrogate is reported as NaN.
        assert!(report.rows[0].w2_moment.is_nan());
        assert!(report.total_gradient_calls > 0);
        // The sliced estimator needs reference samples and must refuse.
        cfg.estimators = vec![Estimator::Sliced];
        assert!(run_sample(&cfg).is_err());
        // Sweeps need closed-form moments altogether.
        assert!(run_sweep(&cfg, &[0.4, 0.3, 0.2]).is_err());
    }

    #[test]
    fn verify_suites_pass_on_defaults() {
        let grid: Vec<f64> = (0..8).map(|i| 1e-4 * 2.0f64.powi(i)).collect();
        let out = verify_kernels(2.0, &grid).unwrap();
        assert!(out.pass, "kernels:\n{}", out.csv);
        let out = verify_bridge(0.1, 4).unwrap();
        assert!(out.pass, "bridge:\n{}", out.csv);
        let out = verify_coupling(&[0.0, 0.1], 2000).unwrap();
        assert!(out.pass, "coupling:\n{}", out.csv);
        let out = verify_assumption(
            &TargetConfig::Quadratic {
                precision: vec![1.0, 10.0],
                mean: vec![0.0, 0.0],
            },
            400,
            2.0,
            3,
        )
        .unwrap();
        assert!(out.pass, "assumption:\n{}", out.csv);
    }
}

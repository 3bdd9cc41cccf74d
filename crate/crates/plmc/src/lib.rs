//! Langevin Monte Carlo with Poisson-midpoint batching.
//!
//! This crate implements four discretizations of Langevin dynamics for
//! sampling strongly log-concave densities π(x) ∝ exp(−F(x)):
//!
//! * overdamped Euler–Maruyama (`olmc_step`),
//! * overdamped Poisson-midpoint batches (`oplmc_batch`),
//! * underdamped Euler–Maruyama with exact Ornstein–Uhlenbeck transition
//!   blocks (`ulmc_step`),
//! * underdamped Poisson-midpoint batches (`uplmc_batch`).
//!
//! A Poisson-midpoint batch compresses K fine steps of step size η/K into a
//! single coarse update costing 1 + |S| gradient evaluations, where S is a
//! Bernoulli(1/K) index set with E|S| = 1. The batch-end state is assembled
//! directly from jointly sampled Gaussian noise functionals (module
//! [`bridge`]), never by simulating the K inner steps.
//!
//! Supporting machinery:
//!
//! * [`kernel`] — per-coordinate 2×2 discretization kernels A_h, G_h, Γ_h²
//!   for the underdamped dynamics, their affine-transformed variants, square
//!   roots, semigroup identities, and eigenvalue expansions;
//! * [`potential`] — gradient oracles for α-strongly-convex, L-smooth
//!   targets with reference families (anisotropic quadratic, ridge-regularized
//!   logistic);
//! * [`metrics`] — Wasserstein-2 estimators (closed-form Gaussian, exact 1-D,
//!   sliced) and streaming moment accumulators;
//! * [`coupling`] — quadrature certification of perturbed-Gaussian W₂ bounds;
//! * [`config`] / [`experiment`] — experiment configuration, sweep
//!   orchestration, and machine-readable reports behind the `plmc` binary.

// Numeric-kernel idioms kept on purpose: `!(x > 0.0)` guards reject NaN,
// quadrature tables carry their published digits, and block math reads best
// with explicit indices.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::excessive_precision)]
#![allow(clippy::needless_range_loop)]

pub mod bridge;
pub mod config;
pub mod coupling;
pub mod experiment;
pub mod kernel;
pub mod mat2;
pub mod metrics;
pub mod potential;
pub mod rng;
pub mod samplers;

pub use bridge::{
    sample_index_set, sample_overdamped_bridge, sample_underdamped_bridge, BatchPlan,
};
pub use kernel::{build_kernel, build_primed_kernel, sqrt_block, KernelBlocks, PrimedKernelBlocks};
pub use mat2::Mat2;
pub use potential::{make_quadratic, GaussianTarget, PotentialSpec};
pub use rng::{ChainRng, RngStream};
pub use samplers::{olmc_step, oplmc_batch, ulmc_step, uplmc_batch, ChainState, SamplerConfig};

//! Command-line driver: sampling runs, accuracy sweeps, and verification
//! suites with CSV/JSON output.
//!
//! Exit codes: 0 success, 1 configuration or runtime error, 2 argument parse
//! error (clap), 3 verification failure, 4 sweep non-attainment.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use clap::{Parser, Subcommand};
use plmc::config::{ExperimentConfig, TargetConfig};
use plmc::experiment::{
    run_sample, run_sweep, verify_assumption, verify_bridge, verify_coupling, verify_kernels,
    RunReport, VerifyOutcome,
};
use plmc::samplers::{Dynamics, Method};
use std::path::{Path, PathBuf};

const EXIT_OK: i32 = 0;
const EXIT_ERROR: i32 = 1;
const EXIT_VERIFY_FAILED: i32 = 3;
const EXIT_NOT_ATTAINED: i32 = 4;

#[derive(Parser)]
#[command(
    name = "plmc",
    about = "Langevin Monte Carlo with Poisson-midpoint batching: sampling runs, cost sweeps, and numerical verification"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, clap::Args)]
struct Overrides {
    /// Base seed for the per-chain streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of independent chains.
    #[arg(long)]
    chains: Option<usize>,
    /// euler | poisson
    #[arg(long)]
    method: Option<String>,
    /// over | under
    #[arg(long)]
    dynamics: Option<String>,
    /// Tuning exponent of the underdamped schedule.
    #[arg(long)]
    p: Option<u32>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run chains at the configured accuracy and report W2 estimates.
    Sample {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// First-passage cost sweep over a list of accuracies.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated accuracy targets.
        #[arg(long, value_delimiter = ',', required = true)]
        epsilons: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Discretization-kernel identity residuals over a step grid.
    VerifyKernels {
        #[arg(long, default_value_t = 2.0)]
        gamma: f64,
        /// Geometric step grid start:stop:count.
        #[arg(long, default_value = "1e-4:5e-2:10")]
        h_grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Batch-noise joint covariance residuals for all correction sets.
    VerifyBridge {
        #[arg(long, default_value_t = 0.1)]
        gamma_eta: f64,
        #[arg(long, default_value_t = 8)]
        k_max: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Perturbed-Gaussian coupling-bound certificates over a magnitude grid.
    VerifyCoupling {
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.01, 0.05, 0.1, 0.3, 1.0, 2.0])]
        grid: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        n_quad: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Randomized convexity/smoothness probing of a configured target.
    VerifyAssumption {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 2000)]
        pairs: usize,
        #[arg(long, default_value_t = 2.0)]
        radius: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    env_logger::init();
    std::process::exit(run());
}

fn run() -> i32 {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_ERROR
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32, String> {
    match cli.cmd {
        Cmd::Sample {
            config,
            out,
            overrides,
        } => {
            let cfg = load_config(&config, &overrides)?;
            let report = run_sample(&cfg).map_err(|e| e.to_string())?;
            eprintln!("sample: {:.3}s wall time", report.wall_time);
            emit_report(&report, out.or(cfg.output_path.clone().map(PathBuf::from)))?;
            Ok(EXIT_OK)
        }
        Cmd::Sweep {
            config,
            epsilons,
            out,
            overrides,
        } => {
            let cfg = load_config(&config, &overrides)?;
            let report = run_sweep(&cfg, &epsilons).map_err(|e| e.to_string())?;
            eprintln!("sweep: {:.3}s wall time", report.wall_time);
            if let Some(fit) = &report.cost_fit {
                eprintln!(
                    "fitted exponent of gradient calls in 1/epsilon: {:.4}",
                    fit.slope
                );
            }
            let attained_all = report.rows.iter().all(|r| r.attained);
            emit_report(&report, out.or(cfg.output_path.clone().map(PathBuf::from)))?;
            Ok(if attained_all {
                EXIT_OK
            } else {
                EXIT_NOT_ATTAINED
            })
        }
        Cmd::VerifyKernels { gamma, h_grid, out } => {
            let grid = parse_grid(&h_grid)?;
            finish_verify(
                verify_kernels(gamma, &grid).map_err(|e| e.to_string())?,
                out,
            )
        }
        Cmd::VerifyBridge {
            gamma_eta,
            k_max,
            out,
        } => finish_verify(
            verify_bridge(gamma_eta, k_max).map_err(|e| e.to_string())?,
            out,
        ),
        Cmd::VerifyCoupling { grid, n_quad, out } => finish_verify(
            verify_coupling(&grid, n_quad).map_err(|e| e.to_string())?,
            out,
        ),
        Cmd::VerifyAssumption {
            config,
            pairs,
            radius,
            seed,
            out,
        } => {
            let text = std::fs::read_to_string(&config).map_err(|e| e.to_string())?;
            let cfg = ExperimentConfig::from_json(&text).map_err(|e| e.to_string())?;
            let target: &TargetConfig = &cfg.target;
            finish_verify(
                verify_assumption(target, pairs, radius, seed).map_err(|e| e.to_string())?,
                out,
            )
        }
    }
}

fn load_config(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut cfg = ExperimentConfig::from_json(&text).map_err(|e| e.to_string())?;
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(chains) = overrides.chains {
        cfg.n_chains = chains;
    }
    if let Some(method) = &overrides.method {
        cfg.method = match method.as_str() {
            "euler" => Method::Euler,
            "poisson" => Method::Poisson,
            other => return Err(format!("unknown method '{other}'")),
        };
    }
    if let Some(dynamics) = &overrides.dynamics {
        cfg.dynamics = match dynamics.as_str() {
            "over" | "overdamped" => Dynamics::Overdamped,
            "under" | "underdamped" => Dynamics::Underdamped,
            other => return Err(format!("unknown dynamics '{other}'")),
        };
    }
    if let Some(p) = overrides.p {
        if let Some(s) = cfg.schedule.as_mut() {
            s.p = p;
        }
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

/// Parses "start:stop:count" into a geometric grid.
fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("grid '{text}' is not start:stop:count"));
    }
    let start: f64 = parts[0].parse().map_err(|_| "bad grid start".to_string())?;
    let stop: f64 = parts[1].parse().map_err(|_| "bad grid stop".to_string())?;
    let count: usize = parts[2].parse().map_err(|_| "bad grid count".to_string())?;
    if !(start > 0.0) || !(stop >= start) || count == 0 {
        return Err("grid needs 0 < start <= stop and count >= 1".into());
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    let ratio = (stop / start).powf(1.0 / (count as f64 - 1.0));
    Ok((0..count).map(|i| start * ratio.powi(i as i32)).collect())
}

fn emit_report(report: &RunReport, out: Option<PathBuf>) -> Result<(), String> {
    let csv = report.to_csv();
    match out {
        Some(path) => {
            std::fs::write(&path, &csv).map_err(|e| format!("{}: {e}", path.display()))?;
            let json_path = path.with_extension("json");
            std::fs::write(&json_path, report.to_json())
                .map_err(|e| format!("{}: {e}", json_path.display()))?;
            eprintln!("wrote {} and {}", path.display(), json_path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn finish_verify(outcome: VerifyOutcome, out: Option<PathBuf>) -> Result<i32, String> {
    match out {
        Some(path) => {
            std::fs::write(&path, &outcome.csv).map_err(|e| format!("{}: {e}", path.display()))?;
        }
        None => print!("{}", outcome.csv),
    }
    eprintln!(
        "{}: {}",
        outcome.suite,
        if outcome.pass { "pass" } else { "FAIL" }
    );
    Ok(if outcome.pass {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAILED
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("1e-4:1e-2:3").unwrap();
        assert_eq!(g.len(), 3);
        assert!((g[0] - 1e-4).abs() < 1e-19);
        assert!((g[1] - 1e-3).abs() < 1e-12);
        assert!((g[2] - 1e-2).abs() < 1e-12);
        assert_eq!(parse_grid("0.5:0.5:1").unwrap(), vec![0.5]);
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("0:1:4").is_err());
        assert!(parse_grid("2:1:4").is_err());
    }

    #[test]
    fn verify_exit_codes_are_distinct_from_sweep_codes() {
        let pass = VerifyOutcome {
            suite: "t".into(),
            csv: String::new(),
            pass: true,
        };
        let fail = VerifyOutcome {
            suite: "t".into(),
            csv: String::new(),
            pass: false,
        };
        assert_eq!(finish_verify(pass, None).unwrap(), EXIT_OK);
        assert_eq!(finish_verify(fail, None).unwrap(), EXIT_VERIFY_FAILED);
        assert_ne!(EXIT_VERIFY_FAILED, EXIT_NOT_ATTAINED);
        assert_ne!(EXIT_VERIFY_FAILED, EXIT_ERROR);
        assert_ne!(EXIT_NOT_ATTAINED, EXIT_ERROR);
    }
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Empirical Bayes estimation of the segment prior by Monte Carlo EM.
//!
//! The E-step draws exact posterior segmentations of every training
//! sequence under the current hyperparameters. The complete-data log
//! likelihood then splits into a sum of single-segment log evidences (the
//! segmentation prior does not depend on Θ), which the M-step maximizes with
//! a simplex search over `(μ0, log k0, log ν0, log σ0²)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dp;
use crate::error::{Error, Result};
use crate::evidence::{ar1_log_evidence, segment_log_evidence, SegmentEvidence};
use crate::inference::{sample_segmentations, SampleSet};
use crate::model::{
    default_hyperparams, Ar1Stats, Hyperparams, ObservedSequence, SufficientStats, Variant,
};
use crate::segprior::SegPrior;
use crate::simplex::{self, SimplexOptions, SimplexStatus};
use crate::simulate::derive_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McemConfig {
    pub iterations: usize,
    pub samples_per_seq: usize,
    /// Relative objective tolerance of the M-step simplex.
    pub tolerance: f64,
    pub max_evals: usize,
    /// Stop early once the total log evidence changes by less than this
    /// (relative) between iterations.
    pub stop_tolerance: Option<f64>,
    /// Capped at each sequence's length.
    pub k_max: usize,
    pub bounds: Option<(usize, usize)>,
    pub seed: u64,
}

impl Default for McemConfig {
    fn default() -> Self {
        Self {
            iterations: 10,
            samples_per_seq: 100,
            tolerance: 1e-8,
            max_evals: 500,
            stop_tolerance: None,
            k_max: 20,
            bounds: None,
            seed: 0,
        }
    }
}

impl McemConfig {
    fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::config("MCEM needs at least one iteration"));
        }
        if self.samples_per_seq == 0 {
            return Err(Error::config("MCEM needs at least one sample per sequence"));
        }
        if self.k_max == 0 {
            return Err(Error::config("k_max must be >= 1"));
        }
        Ok(())
    }
}

/// Statistics of one sampled segment on one track.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SegmentStats {
    Iid(SufficientStats),
    Ar1(Ar1Stats),
}

impl SegmentStats {
    fn from_window(variant: Variant, window: &[Option<f64>]) -> Self {
        match variant {
            Variant::IidNormal => Self::Iid(SufficientStats::from_values(window)),
            Variant::Ar1 => Self::Ar1(Ar1Stats::from_values(window)),
        }
    }

    fn log_evidence(&self, theta: &Hyperparams) -> f64 {
        match self {
            Self::Iid(s) => segment_log_evidence(theta, s),
            Self::Ar1(s) => ar1_log_evidence(theta, s),
        }
    }
}

/// `Σ log p(y_seg | 1, Θ)` over the given segments; the Θ-free
/// segmentation prior is dropped.
pub fn m_step_objective(theta: &Hyperparams, stats: &[SegmentStats]) -> f64 {
    // fixed chunking keeps the float summation order independent of threads
    stats
        .par_chunks(1024)
        .map(|chunk| chunk.iter().map(|s| s.log_evidence(theta)).sum::<f64>())
        .collect::<Vec<_>>()
        .into_iter()
        .sum()
}

fn to_params(theta: &Hyperparams) -> Vec<f64> {
    vec![
        theta.mu0,
        theta.k0.ln(),
        theta.nu0.ln(),
        theta.sigma0_sq.ln(),
    ]
}

fn from_params(x: &[f64], variant: Variant) -> Hyperparams {
    Hyperparams {
        mu0: x[0],
        k0: x[1].exp(),
        nu0: x[2].exp(),
        sigma0_sq: x[3].exp(),
        variant,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MStep {
    pub theta: Hyperparams,
    pub objective: f64,
    pub status: SimplexStatus,
}

/// Maximizes [`m_step_objective`] from `start`.
pub fn m_step(
    start: &Hyperparams,
    stats: &[SegmentStats],
    tolerance: f64,
    max_evals: usize,
) -> MStep {
    let variant = start.variant;
    let x0 = to_params(start);
    let mu_step = (0.1 * start.mu0.abs())
        .max(0.5 * start.sigma0_sq.sqrt())
        .max(1e-3);
    let steps = [mu_step, 0.5, 0.5, 0.5];
    let result = simplex::minimize(
        |x| {
            let theta = from_params(x, variant);
            if theta.validate().is_err() {
                return f64::INFINITY;
            }
            -m_step_objective(&theta, stats)
        },
        &x0,
        &steps,
        SimplexOptions {
            rel_tol: tolerance,
            max_evals,
        },
    );
    MStep {
        theta: from_params(&result.x, variant),
        objective: -result.value,
        status: result.status,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McemStatus {
    Completed,
    /// Stopped early on the objective-change rule.
    Converged,
    /// Some M-step hit its evaluation budget; the best point found was kept.
    OptimizerWarning,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McemFit {
    pub theta: Hyperparams,
    /// `Σ_seq log p(y | Θ)` at the initial and every subsequent iterate.
    pub trace: Vec<f64>,
    /// M-step objective at each new iterate.
    pub objective_trace: Vec<f64>,
    /// Monte Carlo standard error of each E-step's objective estimate,
    /// evaluated at the iterate the E-step sampled under.
    pub objective_se: Vec<f64>,
    pub iterations: usize,
    pub status: McemStatus,
}

struct EStep {
    log_evidence: f64,
    stats: Vec<SegmentStats>,
    objective_se: f64,
}

/// Forward pass and `count` posterior draws for one sequence under `theta`.
/// Returns `log p(y | Θ)` with the draws.
pub fn e_step_samples(
    seq: &ObservedSequence,
    prior: &SegPrior,
    theta: &Hyperparams,
    count: usize,
    seed: u64,
) -> Result<(f64, SampleSet)> {
    let evidence = SegmentEvidence::new(seq, &[*theta])?;
    let table = dp::forward(&evidence, prior)?;
    let log_evidence = dp::log_marginal_evidence(&table, prior);
    let samples = sample_segmentations(&evidence, prior, &table, count, seed)?;
    Ok((log_evidence, samples))
}

fn e_step(
    sequences: &[ObservedSequence],
    priors: &[SegPrior],
    theta: &Hyperparams,
    cfg: &McemConfig,
    iteration: usize,
) -> Result<EStep> {
    let per_seq: Vec<(f64, Vec<SegmentStats>, f64)> = sequences
        .par_iter()
        .zip(priors)
        .enumerate()
        .map(|(idx, (seq, prior))| -> Result<_> {
            let seed = derive_seed(derive_seed(cfg.seed, iteration as u64), idx as u64);
            let (log_evidence, samples) =
                e_step_samples(seq, prior, theta, cfg.samples_per_seq, seed)?;
            let mut stats = Vec::new();
            let mut per_sample = Vec::with_capacity(samples.len());
            for sample in &samples.samples {
                let first = stats.len();
                for (start, end) in sample.segments() {
                    for track in seq.tracks() {
                        stats.push(SegmentStats::from_window(
                            theta.variant,
                            &track[start - 1..end],
                        ));
                    }
                }
                per_sample.push(
                    stats[first..]
                        .iter()
                        .map(|s| s.log_evidence(theta))
                        .sum::<f64>(),
                );
            }
            Ok((log_evidence, stats, mean_variance(&per_sample)))
        })
        .collect::<Result<_>>()?;

    let mut log_evidence = 0.0;
    let mut stats = Vec::new();
    let mut variance = 0.0;
    for (lp, s, v) in per_seq {
        log_evidence += lp;
        stats.extend(s);
        variance += v;
    }
    if !log_evidence.is_finite() {
        return Err(Error::model("training log evidence is not finite"));
    }
    Ok(EStep {
        log_evidence,
        stats,
        objective_se: variance.sqrt(),
    })
}

/// Variance of the sample mean.
fn mean_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    ss / ((n - 1) * n) as f64
}

fn total_log_evidence(
    sequences: &[ObservedSequence],
    priors: &[SegPrior],
    theta: &Hyperparams,
) -> Result<f64> {
    let parts: Vec<f64> = sequences
        .par_iter()
        .zip(priors)
        .map(|(seq, prior)| -> Result<f64> {
            let evidence = SegmentEvidence::new(seq, &[*theta])?;
            let table = dp::forward(&evidence, prior)?;
            Ok(dp::log_marginal_evidence(&table, prior))
        })
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().sum())
}

/// Fits one shared Θ to all training sequences.
pub fn mcem_fit(
    sequences: &[ObservedSequence],
    theta_init: Hyperparams,
    cfg: &McemConfig,
) -> Result<McemFit> {
    cfg.validate()?;
    theta_init.validate()?;
    if sequences.is_empty() {
        return Err(Error::InsufficientData(
            "MCEM needs at least one training sequence".into(),
        ));
    }
    let priors: Vec<SegPrior> = sequences
        .iter()
        .map(|seq| {
            let n = seq.len();
            let bounds = cfg.bounds.map(|(l, u)| (l.min(n), u.min(n)));
            SegPrior::build(n, cfg.k_max.min(n), bounds)
        })
        .collect::<Result<_>>()?;

    let mut theta = theta_init;
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    let mut objective_trace = Vec::with_capacity(cfg.iterations);
    let mut objective_se = Vec::with_capacity(cfg.iterations);
    let mut status = McemStatus::Completed;
    let mut iterations = 0;

    for iteration in 0..cfg.iterations {
        let estep = e_step(sequences, &priors, &theta, cfg, iteration)?;
        if let (Some(tol), Some(&last)) = (cfg.stop_tolerance, trace.last()) {
            let change: f64 = estep.log_evidence - last;
            if change.abs() <= tol * estep.log_evidence.abs().max(1.0) {
                trace.push(estep.log_evidence);
                status = McemStatus::Converged;
                return Ok(McemFit {
                    theta,
                    trace,
                    objective_trace,
                    objective_se,
                    iterations,
                    status,
                });
            }
        }
        trace.push(estep.log_evidence);
        objective_se.push(estep.objective_se);
        let step = m_step(&theta, &estep.stats, cfg.tolerance, cfg.max_evals);
        if step.status == SimplexStatus::MaxEvaluations {
            status = McemStatus::OptimizerWarning;
        }
        theta = step.theta;
        objective_trace.push(step.objective);
        iterations += 1;
    }
    trace.push(total_log_evidence(sequences, &priors, &theta)?);

    Ok(McemFit {
        theta,
        trace,
        objective_trace,
        objective_se,
        iterations,
        status,
    })
}

/// Single sequences shorter than this get the data-dependent default prior
/// instead of an MCEM fit.
pub const MIN_SINGLE_SEQUENCE_LEN: usize = 100;

/// MCEM when the training data can support it, otherwise the default prior
/// of the (single, short) training track.
pub fn fit_or_default(
    sequences: &[ObservedSequence],
    cfg: &McemConfig,
) -> Result<(Hyperparams, Option<McemFit>)> {
    let pooled = pooled_track(sequences)?;
    let init = default_hyperparams(&pooled)?;
    if sequences.len() == 1 && sequences[0].len() < MIN_SINGLE_SEQUENCE_LEN {
        return Ok((init, None));
    }
    let fit = mcem_fit(sequences, init, cfg)?;
    Ok((fit.theta, Some(fit)))
}

/// All observed values of all sequences and tracks, in order.
pub fn pooled_track(sequences: &[ObservedSequence]) -> Result<Vec<Option<f64>>> {
    if sequences.is_empty() {
        return Err(Error::InsufficientData("no training sequences".into()));
    }
    Ok(sequences
        .iter()
        .flat_map(|s| s.tracks().iter().flat_map(|t| t.iter().copied()))
        .collect())
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Log-domain forward recursion over segment counts.
//!
//! The table stores `log p̂(y_{1:i} | k) = log[S(i,k) p(y_{1:i} | k)]`, which
//! satisfies the count-free recursion
//!
//! ```text
//! p̂(y_{1:i} | k) = Σ_j p̂(y_{1:j} | k-1) · S(i-j, 1) · p(y_{j+1:i} | 1)
//! ```
//!
//! Each inner sum is a log-sum-exp over `j`, so nothing is ever
//! exponentiated outside `[-∞, 0]`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evidence::SegmentEvidence;
use crate::segprior::SegPrior;

/// `log Σ exp(t_i)`, factoring out the largest term. All `-∞` gives `-∞`.
pub fn log_sum_exp(terms: &[f64]) -> Result<f64> {
    if terms.is_empty() {
        return Err(Error::Domain("log_sum_exp of an empty list".into()));
    }
    Ok(log_sum_exp_iter(terms.iter().copied()))
}

/// Two-pass log-sum-exp over a cloneable iterator; empty input gives `-∞`.
pub fn log_sum_exp_iter<I>(terms: I) -> f64
where
    I: Iterator<Item = f64> + Clone,
{
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = terms.map(|t| (t - max).exp()).sum();
    max + sum.ln()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTable {
    n: usize,
    k_max: usize,
    // lp_hat[k - 1][i], i in 0..=n
    lp_hat: Vec<Vec<f64>>,
}

impl ForwardTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// `log p̂(y_{1:i} | k)`.
    #[inline]
    pub fn lp_hat(&self, i: usize, k: usize) -> f64 {
        self.lp_hat[k - 1][i]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.lp_hat[k - 1]
    }

    /// Iterates every stored entry, for numerical health checks.
    pub fn entries(&self) -> impl Iterator<Item = f64> + '_ {
        self.lp_hat.iter().flat_map(|row| row.iter().copied())
    }
}

/// Candidate positions `j` of the previous changepoint when segment `k`
/// ends at `i`: `k-1 <= j` and `i - j` a feasible length.
#[inline]
pub(crate) fn predecessor_range(
    prior: &SegPrior,
    i: usize,
    k: usize,
) -> std::ops::RangeInclusive<usize> {
    let (min_len, max_len) = prior.bounds();
    let lo = (k - 1).max(i.saturating_sub(max_len));
    let hi = i.saturating_sub(min_len);
    if i < min_len || lo > hi {
        #[allow(clippy::reversed_empty_ranges)]
        return 1..=0;
    }
    lo..=hi
}

pub fn forward(evidence: &SegmentEvidence, prior: &SegPrior) -> Result<ForwardTable> {
    let n = evidence.len();
    if prior.n() != n {
        return Err(Error::config(format!(
            "segmentation prior built for n={}, data has n={n}",
            prior.n()
        )));
    }
    let k_max = prior.k_max();
    let mut lp_hat: Vec<Vec<f64>> = Vec::with_capacity(k_max);

    let first: Vec<f64> = (0..=n)
        .map(|i| {
            let weight = prior.log_segment_weight(i);
            if i == 0 || weight == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                weight + evidence.log_evidence_unchecked(1, i)
            }
        })
        .collect();
    lp_hat.push(first);

    for k in 2..=k_max {
        let prev = &lp_hat[k - 2];
        let row: Vec<f64> = (0..=n)
            .into_par_iter()
            .map_init(Vec::new, |terms, i| {
                if i < k {
                    return f64::NEG_INFINITY;
                }
                terms.clear();
                for j in predecessor_range(prior, i, k) {
                    let head = prev[j];
                    if head == f64::NEG_INFINITY {
                        continue;
                    }
                    terms.push(head + evidence.log_evidence_unchecked(j + 1, i));
                }
                log_sum_exp_iter(terms.iter().copied())
            })
            .collect();
        lp_hat.push(row);
    }

    let table = ForwardTable { n, k_max, lp_hat };
    if table.entries().any(f64::is_nan) {
        return Err(Error::model("forward recursion produced NaN"));
    }
    Ok(table)
}

/// Unnormalized `log p(k) p(y | k)` for `k = 1..=k_max`.
fn log_joint_num_segments(table: &ForwardTable, prior: &SegPrior) -> Vec<f64> {
    let n = table.n();
    let log_pk = -(prior.k_max() as f64).ln();
    (1..=table.k_max())
        .map(|k| {
            let count = prior.log_count(n, k);
            if count == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                log_pk + table.lp_hat(n, k) - count
            }
        })
        .collect()
}

/// Normalized `log p(k | y)` for `k = 1..=k_max`.
pub fn log_posterior_num_segments(table: &ForwardTable, prior: &SegPrior) -> Result<Vec<f64>> {
    let joint = log_joint_num_segments(table, prior);
    let total = log_sum_exp_iter(joint.iter().copied());
    if !total.is_finite() {
        return Err(Error::model(
            "no segment count in 1..=k_max is feasible under the length bounds",
        ));
    }
    Ok(joint.into_iter().map(|v| v - total).collect())
}

/// `log p(y) = log Σ_k p(k) p(y | k)`.
pub fn log_marginal_evidence(table: &ForwardTable, prior: &SegPrior) -> f64 {
    log_sum_exp_iter(log_joint_num_segments(table, prior).into_iter())
}

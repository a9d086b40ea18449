// SPDX-License-Identifier: MIT OR Apache-2.0

//! Exhaustive enumeration of every segmentation of a short sequence.

use crate::error::{Error, Result};
use crate::evidence::window_log_evidence;
use crate::model::{Hyperparams, ObservedSequence};
use crate::segmentation::Segmentation;
use crate::segprior::SegPrior;

pub const MAX_ENUM_N: usize = 14;
pub const MAX_ENUM_K: usize = 4;

/// Log joints within this distance of the maximum count as tied for the MAP.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct EnumeratedPosterior {
    pub n: usize,
    pub k_max: usize,
    /// Every feasible segmentation with `log p(A) + log p(y | A)`.
    pub entries: Vec<(Segmentation, f64)>,
    /// `log p(A | y)`, aligned with `entries`.
    pub log_posterior: Vec<f64>,
    pub log_evidence: f64,
    /// `log p(k | y)` for `k = 1..=k_max`.
    pub log_posterior_k: Vec<f64>,
    /// `p(j ∈ A | y)` for `j = 1..n`.
    pub marginals: Vec<f64>,
    /// MAP segmentation and its log posterior.
    pub map: (Segmentation, f64),
    /// Number of feasible segmentations with `k` segments, `k = 1..=k_max`.
    pub counts: Vec<usize>,
}

impl EnumeratedPosterior {
    pub fn posterior_of(&self, seg: &Segmentation) -> f64 {
        self.entries
            .iter()
            .zip(&self.log_posterior)
            .find(|((s, _), _)| s == seg)
            .map_or(0.0, |(_, lp)| lp.exp())
    }
}

fn lse(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// All segmentations of `n` positions into at most `k_max` segments whose
/// lengths lie in `[l, u]`.
pub fn enumerate_segmentations(
    n: usize,
    k_max: usize,
    bounds: (usize, usize),
) -> Vec<Segmentation> {
    let (min_len, max_len) = bounds;
    let mut out = Vec::new();
    for mask in 0u32..(1u32 << (n - 1)) {
        let internal = mask.count_ones() as usize;
        if internal + 1 > k_max {
            continue;
        }
        let mut changepoints: Vec<usize> = (1..n).filter(|&j| mask & (1 << (j - 1)) != 0).collect();
        changepoints.push(n);
        let seg = Segmentation::new(changepoints, n).expect("mask yields increasing changepoints");
        if seg
            .segment_lengths()
            .all(|len| len >= min_len && len <= max_len)
        {
            out.push(seg);
        }
    }
    out
}

/// Exact posterior over segmentations by direct summation, using only raw
/// window evidences and counts obtained by enumeration. The prior supplies
/// `n`, `k_max` and the length bounds.
pub fn enumerate_posterior(
    seq: &ObservedSequence,
    thetas: &[Hyperparams],
    prior: &SegPrior,
) -> Result<EnumeratedPosterior> {
    let n = seq.len();
    let k_max = prior.k_max();
    if n > MAX_ENUM_N || k_max > MAX_ENUM_K {
        return Err(Error::OracleScale { n, k_max });
    }
    if prior.n() != n {
        return Err(Error::Config(format!(
            "prior built for n={}, data has n={n}",
            prior.n()
        )));
    }
    let thetas: Vec<Hyperparams> = if thetas.len() == 1 {
        vec![thetas[0]; seq.num_tracks()]
    } else {
        thetas.to_vec()
    };
    if thetas.len() != seq.num_tracks() {
        return Err(Error::Config(
            "one hyperparameter set per track required".into(),
        ));
    }

    let segmentations = enumerate_segmentations(n, k_max, prior.bounds());
    let mut counts = vec![0usize; k_max];
    for seg in &segmentations {
        counts[seg.num_segments() - 1] += 1;
    }

    let entries: Vec<(Segmentation, f64)> = segmentations
        .into_iter()
        .map(|seg| {
            let log_prior = -(k_max as f64).ln() - (counts[seg.num_segments() - 1] as f64).ln();
            let mut log_lik = 0.0;
            for (start, end) in seg.segments() {
                for (r, theta) in thetas.iter().enumerate() {
                    log_lik += window_log_evidence(theta, &seq.track(r)[start - 1..end]);
                }
            }
            (seg, log_prior + log_lik)
        })
        .collect();

    let log_evidence = lse(entries.iter().map(|(_, lj)| *lj));
    if !log_evidence.is_finite() {
        return Err(Error::Model("no feasible segmentation".into()));
    }
    let log_posterior: Vec<f64> = entries.iter().map(|(_, lj)| lj - log_evidence).collect();

    let log_posterior_k = (1..=k_max)
        .map(|k| {
            lse(entries
                .iter()
                .zip(&log_posterior)
                .filter(|((s, _), _)| s.num_segments() == k)
                .map(|(_, lp)| *lp))
        })
        .collect();

    let mut marginals = vec![0.0; n.saturating_sub(1)];
    for ((seg, _), lp) in entries.iter().zip(&log_posterior) {
        for &c in seg.internal() {
            marginals[c - 1] += lp.exp();
        }
    }

    let top = entries
        .iter()
        .map(|(_, lj)| *lj)
        .fold(f64::NEG_INFINITY, f64::max);
    let (map_seg, map_joint) = entries
        .iter()
        .filter(|(_, lj)| *lj >= top - TIE_TOLERANCE)
        .min_by(|(a, _), (b, _)| {
            a.num_segments().cmp(&b.num_segments()).then_with(|| {
                a.changepoints()
                    .iter()
                    .rev()
                    .cmp(b.changepoints().iter().rev())
            })
        })
        .cloned()
        .expect("at least one feasible segmentation");

    Ok(EnumeratedPosterior {
        n,
        k_max,
        map: (map_seg, map_joint - log_evidence),
        entries,
        log_posterior,
        log_evidence,
        log_posterior_k,
        marginals,
        counts,
    })
}

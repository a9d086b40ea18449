// SPDX-License-Identifier: MIT OR Apache-2.0

//! Quantities downstream of the forward table: exact backward sampling,
//! the MAP segmentation, changepoint marginals and per-position summaries
//! of the segment parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dp::{self, log_sum_exp_iter, predecessor_range, ForwardTable};
use crate::error::{Error, Result};
use crate::evidence::SegmentEvidence;
use crate::model::{posterior_update, Hyperparams, ObservedSequence, SufficientStats, Variant};
use crate::segmentation::Segmentation;
use crate::segprior::SegPrior;

/// Scores within this distance (in log) are treated as tied by the MAP
/// search.
pub const MAP_TIE_TOLERANCE: f64 = 1e-9;

/// Independent posterior draws of the segmentation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub seed: u64,
    pub samples: Vec<Segmentation>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Monte Carlo estimate of `E[k | y]`.
    pub fn mean_num_segments(&self) -> f64 {
        let total: usize = self.samples.iter().map(Segmentation::num_segments).sum();
        total as f64 / self.samples.len() as f64
    }

    /// Fraction of samples with exactly `k` segments.
    pub fn frequency_of(&self, k: usize) -> f64 {
        let hits = self
            .samples
            .iter()
            .filter(|s| s.num_segments() == k)
            .count();
        hits as f64 / self.samples.len() as f64
    }
}

/// Inverse-CDF draw from unnormalized log-weights.
fn draw_index<R: Rng>(rng: &mut R, log_weights: &[f64]) -> usize {
    let total = log_sum_exp_iter(log_weights.iter().copied());
    debug_assert!(total.is_finite());
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (idx, &w) in log_weights.iter().enumerate() {
        if w == f64::NEG_INFINITY {
            continue;
        }
        last_positive = idx;
        cumulative += (w - total).exp();
        if u < cumulative {
            return idx;
        }
    }
    last_positive
}

/// Draws `count` exact posterior segmentations: `k` from `p(k | y)`, then
/// changepoints right to left with `p(c_{t-1} = j | c_t = i) ∝
/// p̂(y_{1:j} | t-1) p̂(y_{j+1:i} | 1)`.
///
/// Sample `s` uses ChaCha stream `s` under `seed`, so the set is reproducible
/// and independent of thread scheduling.
pub fn sample_segmentations(
    evidence: &SegmentEvidence,
    prior: &SegPrior,
    table: &ForwardTable,
    count: usize,
    seed: u64,
) -> Result<SampleSet> {
    if count == 0 {
        return Err(Error::config("sample count must be >= 1"));
    }
    let log_pk = dp::log_posterior_num_segments(table, prior)?;
    let n = table.n();

    let samples = (0..count)
        .into_par_iter()
        .map_init(Vec::new, |weights, s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            let k = draw_index(&mut rng, &log_pk) + 1;
            let mut changepoints = vec![0usize; k];
            changepoints[k - 1] = n;
            let mut end = n;
            for t in (2..=k).rev() {
                let range = predecessor_range(prior, end, t);
                let offset = *range.start();
                weights.clear();
                weights.extend(range.map(|j| {
                    let head = table.lp_hat(j, t - 1);
                    if head == f64::NEG_INFINITY {
                        head
                    } else {
                        head + evidence.log_evidence_unchecked(j + 1, end)
                    }
                }));
                end = offset + draw_index(&mut rng, weights);
                changepoints[t - 2] = end;
            }
            Segmentation::from_sorted(changepoints)
        })
        .collect();

    Ok(SampleSet { seed, samples })
}

/// Exact maximizer of `p(A | y)` and its log posterior probability.
///
/// Ties (within [`MAP_TIE_TOLERANCE`]) go to the smallest number of
/// segments, then to the smallest previous changepoint at each backtrace
/// step.
pub fn map_segmentation(
    evidence: &SegmentEvidence,
    prior: &SegPrior,
    table: &ForwardTable,
) -> Result<(Segmentation, f64)> {
    let n = table.n();
    let k_max = table.k_max();

    let mut best: Vec<Vec<f64>> = Vec::with_capacity(k_max);
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(k_max);
    best.push(
        (0..=n)
            .map(|i| {
                let weight = prior.log_segment_weight(i);
                if i == 0 || weight == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    weight + evidence.log_evidence_unchecked(1, i)
                }
            })
            .collect(),
    );
    back.push(vec![0; n + 1]);

    for k in 2..=k_max {
        let prev = &best[k - 2];
        let (row, arg): (Vec<f64>, Vec<usize>) = (0..=n)
            .into_par_iter()
            .map(|i| {
                let mut top = (f64::NEG_INFINITY, 0usize);
                if i < k {
                    return top;
                }
                for j in predecessor_range(prior, i, k) {
                    if prev[j] == f64::NEG_INFINITY {
                        continue;
                    }
                    let value = prev[j] + evidence.log_evidence_unchecked(j + 1, i);
                    if top.0 == f64::NEG_INFINITY || value > top.0 + MAP_TIE_TOLERANCE {
                        top = (value, j);
                    }
                }
                top
            })
            .unzip();
        best.push(row);
        back.push(arg);
    }

    let log_pk = -(k_max as f64).ln();
    let mut choice: Option<(f64, usize)> = None;
    for k in 1..=k_max {
        let count = prior.log_count(n, k);
        if count == f64::NEG_INFINITY || best[k - 1][n] == f64::NEG_INFINITY {
            continue;
        }
        let score = log_pk - count + best[k - 1][n];
        match choice {
            Some((top, _)) if score <= top + MAP_TIE_TOLERANCE => {}
            _ => choice = Some((score, k)),
        }
    }
    let Some((score, k)) = choice else {
        return Err(Error::model(
            "no segmentation is feasible under the length bounds and k_max",
        ));
    };

    let mut changepoints = vec![0usize; k];
    changepoints[k - 1] = n;
    for t in (2..=k).rev() {
        changepoints[t - 2] = back[t - 1][changepoints[t - 1]];
    }
    let log_evidence = dp::log_marginal_evidence(table, prior);
    Ok((
        Segmentation::from_sorted(changepoints),
        score - log_evidence,
    ))
}

/// Fraction of samples with a changepoint at each position `1..n`.
/// Position `n` is excluded; index `j - 1` holds position `j`.
pub fn changepoint_marginals(samples: &SampleSet, n: usize) -> Vec<f64> {
    let mut hits = vec![0usize; n.saturating_sub(1)];
    for sample in &samples.samples {
        for &c in sample.internal() {
            hits[c - 1] += 1;
        }
    }
    let total = samples.len() as f64;
    hits.into_iter().map(|h| h as f64 / total).collect()
}

/// Exact changepoint marginals `p(j ∈ A | y)` for `j = 1..n`, from the
/// forward table and a mirrored backward recursion over suffixes.
pub fn exact_changepoint_marginals(
    evidence: &SegmentEvidence,
    prior: &SegPrior,
    table: &ForwardTable,
) -> Result<Vec<f64>> {
    let n = table.n();
    let k_max = table.k_max();
    if n < 2 {
        return Ok(Vec::new());
    }
    let log_evidence = dp::log_marginal_evidence(table, prior);
    if !log_evidence.is_finite() {
        return Err(Error::model("marginal evidence is not finite"));
    }

    // suffix[r - 1][j]: count-weighted evidence of positions j+1..=n split
    // into r segments
    let mut suffix: Vec<Vec<f64>> = Vec::with_capacity(k_max.saturating_sub(1));
    if k_max >= 2 {
        suffix.push(
            (0..=n)
                .map(|j| {
                    let weight = prior.log_segment_weight(n - j);
                    if j == n || weight == f64::NEG_INFINITY {
                        f64::NEG_INFINITY
                    } else {
                        weight + evidence.log_evidence_unchecked(j + 1, n)
                    }
                })
                .collect(),
        );
    }
    let (min_len, max_len) = prior.bounds();
    for r in 2..k_max {
        let next = &suffix[r - 2];
        let row: Vec<f64> = (0..=n)
            .into_par_iter()
            .map_init(Vec::new, |terms, j| {
                terms.clear();
                let lo = j + min_len;
                let hi = (j + max_len).min(n - 1);
                for (i, &tail) in next.iter().enumerate().take(hi + 1).skip(lo) {
                    if tail == f64::NEG_INFINITY {
                        continue;
                    }
                    terms.push(evidence.log_evidence_unchecked(j + 1, i) + tail);
                }
                log_sum_exp_iter(terms.iter().copied())
            })
            .collect();
        suffix.push(row);
    }

    let log_pk = -(k_max as f64).ln();
    let marginals = (1..n)
        .into_par_iter()
        .map_init(Vec::new, |terms, j| {
            terms.clear();
            for k in 2..=k_max {
                let count = prior.log_count(n, k);
                if count == f64::NEG_INFINITY {
                    continue;
                }
                for a in 1..k {
                    let head = table.lp_hat(j, a);
                    let tail = suffix[k - a - 1][j];
                    if head == f64::NEG_INFINITY || tail == f64::NEG_INFINITY {
                        continue;
                    }
                    terms.push(log_pk - count + head + tail - log_evidence);
                }
            }
            log_sum_exp_iter(terms.iter().copied())
                .exp()
                .clamp(0.0, 1.0)
        })
        .collect();
    Ok(marginals)
}

/// Mixture summary of one track's segment parameters at each position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionSummary {
    /// Average over samples of the posterior mean of μ for the segment
    /// containing each position.
    pub mean_mu: Vec<f64>,
    /// Average posterior mean of σ², `None` where some component has
    /// `ν_n <= 2`.
    pub mean_sigma_sq: Vec<Option<f64>>,
}

/// Per-track posterior summaries. Requires the iid normal model.
pub fn posterior_position_summary(
    samples: &SampleSet,
    seq: &ObservedSequence,
    thetas: &[Hyperparams],
) -> Result<Vec<PositionSummary>> {
    if samples.is_empty() {
        return Err(Error::config("position summary needs at least one sample"));
    }
    let n = seq.len();
    let thetas: Vec<Hyperparams> = match thetas.len() {
        1 => vec![thetas[0]; seq.num_tracks()],
        len if len == seq.num_tracks() => thetas.to_vec(),
        len => {
            return Err(Error::config(format!(
                "got {len} hyperparameter sets for {} tracks",
                seq.num_tracks()
            )))
        }
    };
    if thetas.iter().any(|t| t.variant != Variant::IidNormal) {
        return Err(Error::config(
            "position summaries are defined for the iid normal model only",
        ));
    }
    let total = samples.len() as f64;

    Ok(thetas
        .iter()
        .enumerate()
        .map(|(r, theta)| {
            let track = seq.track(r);
            let mut mu = vec![0.0; n];
            let mut sigma = vec![0.0; n];
            let mut defined = vec![true; n];
            for sample in &samples.samples {
                for (start, end) in sample.segments() {
                    let stats = SufficientStats::from_values(&track[start - 1..end]);
                    let post = posterior_update(theta, &stats);
                    let var = post.mean_sigma_sq();
                    for pos in start - 1..end {
                        mu[pos] += post.mu_n;
                        match var {
                            Some(v) => sigma[pos] += v,
                            None => defined[pos] = false,
                        }
                    }
                }
            }
            PositionSummary {
                mean_mu: mu.into_iter().map(|v| v / total).collect(),
                mean_sigma_sq: sigma
                    .into_iter()
                    .zip(defined)
                    .map(|(v, ok)| ok.then_some(v / total))
                    .collect(),
            }
        })
        .collect())
}

/// Evidence tables, prior and forward table for one sequence, bundled.
#[derive(Clone, Debug)]
pub struct Posterior {
    evidence: SegmentEvidence,
    prior: SegPrior,
    table: ForwardTable,
    log_evidence: f64,
}

impl Posterior {
    pub fn new(seq: &ObservedSequence, thetas: &[Hyperparams], prior: SegPrior) -> Result<Self> {
        let evidence = SegmentEvidence::new(seq, thetas)?;
        let table = dp::forward(&evidence, &prior)?;
        let log_evidence = dp::log_marginal_evidence(&table, &prior);
        Ok(Self {
            evidence,
            prior,
            table,
            log_evidence,
        })
    }

    pub fn evidence(&self) -> &SegmentEvidence {
        &self.evidence
    }

    pub fn prior(&self) -> &SegPrior {
        &self.prior
    }

    pub fn table(&self) -> &ForwardTable {
        &self.table
    }

    pub fn log_marginal_evidence(&self) -> f64 {
        self.log_evidence
    }

    pub fn log_posterior_num_segments(&self) -> Result<Vec<f64>> {
        dp::log_posterior_num_segments(&self.table, &self.prior)
    }

    pub fn sample(&self, count: usize, seed: u64) -> Result<SampleSet> {
        sample_segmentations(&self.evidence, &self.prior, &self.table, count, seed)
    }

    pub fn map(&self) -> Result<(Segmentation, f64)> {
        map_segmentation(&self.evidence, &self.prior, &self.table)
    }

    pub fn exact_marginals(&self) -> Result<Vec<f64>> {
        exact_changepoint_marginals(&self.evidence, &self.prior, &self.table)
    }
}

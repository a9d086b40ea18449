// SPDX-License-Identifier: MIT OR Apache-2.0

//! Prior over segmentations: `p(k) = 1/k_max` and, given `k`, uniform over
//! the feasible segmentations of `n` positions into `k` segments.
//!
//! `S(i, k)` counts segmentations of `i` positions into `k` segments whose
//! lengths all lie in `[l, u]`:
//!
//! ```text
//! S(i, 1) = 1 if l <= i <= u else 0
//! S(i, k) = Σ_{j<i} S(j, k-1) S(i-j, 1)
//! ```
//!
//! Without bounds this is the binomial `C(i-1, k-1)`. Counts are stored as
//! logarithms with `-∞` for zero.

use crate::dp::log_sum_exp_iter;
use crate::error::{Error, Result};
use crate::segmentation::Segmentation;

#[derive(Clone, Debug, PartialEq)]
pub struct SegPrior {
    n: usize,
    k_max: usize,
    min_len: usize,
    max_len: usize,
    // log_counts[k - 1][i] = log S(i, k), i in 0..=n
    log_counts: Vec<Vec<f64>>,
}

impl SegPrior {
    /// `bounds = Some((l, u))` restricts every segment length to `[l, u]`.
    pub fn build(n: usize, k_max: usize, bounds: Option<(usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("sequence length must be >= 1"));
        }
        if k_max == 0 || k_max > n {
            return Err(Error::config(format!(
                "k_max must satisfy 1 <= k_max <= n={n}; got {k_max}"
            )));
        }
        let (min_len, max_len) = bounds.unwrap_or((1, n));
        if min_len == 0 || min_len > max_len || max_len > n {
            return Err(Error::config(format!(
                "length bounds must satisfy 1 <= l <= u <= n={n}; got [{min_len}, {max_len}]"
            )));
        }

        let mut log_counts = Vec::with_capacity(k_max);
        let base: Vec<f64> = (0..=n)
            .map(|i| {
                if (min_len..=max_len).contains(&i) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        log_counts.push(base);
        for k in 2..=k_max {
            let prev = &log_counts[k - 2];
            let row: Vec<f64> = (0..=n)
                .map(|i| {
                    if i < k * min_len {
                        return f64::NEG_INFINITY;
                    }
                    // previous k-1 segments end at j, last segment has length i - j
                    let lo = (k - 1).max(i.saturating_sub(max_len));
                    let hi = i - min_len;
                    if lo > hi {
                        return f64::NEG_INFINITY;
                    }
                    log_sum_exp_iter(prev[lo..=hi].iter().copied())
                })
                .collect();
            log_counts.push(row);
        }

        Ok(Self {
            n,
            k_max,
            min_len,
            max_len,
            log_counts,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// `(l, u)`; `(1, n)` when unconstrained.
    pub fn bounds(&self) -> (usize, usize) {
        (self.min_len, self.max_len)
    }

    pub fn is_constrained(&self) -> bool {
        self.min_len > 1 || self.max_len < self.n
    }

    pub fn length_feasible(&self, len: usize) -> bool {
        (self.min_len..=self.max_len).contains(&len)
    }

    /// `log S(i, k)` for `0 <= i <= n`, `1 <= k <= k_max`.
    #[inline]
    pub fn log_count(&self, i: usize, k: usize) -> f64 {
        self.log_counts[k - 1][i]
    }

    /// `log S(len, 1)`: 0 for a feasible segment length, `-∞` otherwise.
    #[inline]
    pub fn log_segment_weight(&self, len: usize) -> f64 {
        self.log_counts[0][len]
    }

    pub fn log_prior_num_segments(&self, k: usize) -> Result<f64> {
        if k == 0 || k > self.k_max {
            return Err(Error::Domain(format!(
                "segment count {k} outside 1..={}",
                self.k_max
            )));
        }
        Ok(-(self.k_max as f64).ln())
    }

    /// `log p(A) = -log k_max - log S(n, |A|)` for feasible `A`, `-∞` otherwise.
    pub fn log_prior_segmentation(&self, seg: &Segmentation) -> f64 {
        let k = seg.num_segments();
        if seg.n() != self.n
            || k > self.k_max
            || !seg.segment_lengths().all(|len| self.length_feasible(len))
        {
            return f64::NEG_INFINITY;
        }
        -(self.k_max as f64).ln() - self.log_count(self.n, k)
    }
}

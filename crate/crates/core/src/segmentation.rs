// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Changepoints `c_1 < … < c_k = n`. Each changepoint is the last position
/// of its segment, so segment `t` covers `[c_{t-1} + 1, c_t]` with `c_0 = 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Segmentation {
    changepoints: Vec<usize>,
}

impl Segmentation {
    pub fn new(changepoints: Vec<usize>, n: usize) -> Result<Self> {
        match changepoints.last() {
            Some(&last) if last == n => {}
            _ => {
                return Err(Error::Domain(format!(
                    "last changepoint must equal n={n}; got {changepoints:?}"
                )))
            }
        }
        if changepoints[0] == 0 || changepoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain(format!(
                "changepoints must be strictly increasing and >= 1; got {changepoints:?}"
            )));
        }
        Ok(Self { changepoints })
    }

    /// The single-segment segmentation of `n` positions.
    pub fn whole(n: usize) -> Self {
        Self {
            changepoints: vec![n],
        }
    }

    pub(crate) fn from_sorted(changepoints: Vec<usize>) -> Self {
        debug_assert!(changepoints.windows(2).all(|w| w[0] < w[1]));
        Self { changepoints }
    }

    pub fn changepoints(&self) -> &[usize] {
        &self.changepoints
    }

    /// Changepoints strictly before `n`.
    pub fn internal(&self) -> &[usize] {
        &self.changepoints[..self.changepoints.len() - 1]
    }

    pub fn num_segments(&self) -> usize {
        self.changepoints.len()
    }

    pub fn n(&self) -> usize {
        *self
            .changepoints
            .last()
            .expect("segmentation is never empty")
    }

    /// Segments as 1-based inclusive `(start, end)` pairs.
    pub fn segments(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let starts = std::iter::once(0).chain(self.changepoints.iter().copied());
        starts
            .zip(self.changepoints.iter().copied())
            .map(|(prev, end)| (prev + 1, end))
    }

    pub fn segment_lengths(&self) -> impl Iterator<Item = usize> + '_ {
        self.segments().map(|(a, b)| b - a + 1)
    }
}

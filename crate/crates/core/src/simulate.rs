// SPDX-License-Identifier: MIT OR Apache-2.0

//! Draws from the generative model and the canned designs used to check
//! detection behaviour.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Hyperparams, ObservedSequence};
use crate::segmentation::Segmentation;

/// How many segments a hierarchical draw has.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentCount {
    Fixed(usize),
    /// Uniform on `1..=k_max`.
    Uniform(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Scenario {
    /// Segmentation uniform given `k`, segment parameters from the
    /// normal-inverse-χ² prior, iid normal observations.
    Hierarchical,
    /// `N(0, σ²)` on the first half, `N(μ, σ²)` on the second.
    SingleChangepoint { mu: f64, sigma: f64 },
    /// `N(-1,1)×100`, `N(-0.6,1)×50`, `N(1,1)×100`, with `gap_len` missing
    /// positions inserted after position 100.
    GapStudy { gap_len: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub n: usize,
    pub segments: SegmentCount,
    pub theta: Hyperparams,
    /// 1-based inclusive ranges to mark missing after drawing.
    pub gaps: Vec<(usize, usize)>,
    pub seed: u64,
    pub scenario: Scenario,
}

impl SimSpec {
    pub fn hierarchical(n: usize, segments: SegmentCount, theta: Hyperparams, seed: u64) -> Self {
        Self {
            n,
            segments,
            theta,
            gaps: Vec::new(),
            seed,
            scenario: Scenario::Hierarchical,
        }
    }

    pub fn single_changepoint(n: usize, mu: f64, sigma: f64, seed: u64) -> Self {
        Self {
            n,
            segments: SegmentCount::Fixed(2),
            theta: Hyperparams {
                mu0: 0.0,
                k0: 1.0,
                nu0: 1.0,
                sigma0_sq: 1.0,
                variant: Default::default(),
            },
            gaps: Vec::new(),
            seed,
            scenario: Scenario::SingleChangepoint { mu, sigma },
        }
    }

    pub fn gap_study(gap_len: usize, seed: u64) -> Self {
        Self {
            n: 250 + gap_len,
            segments: SegmentCount::Fixed(3),
            theta: Hyperparams {
                mu0: 0.0,
                k0: 1.0,
                nu0: 1.0,
                sigma0_sq: 1.0,
                variant: Default::default(),
            },
            gaps: Vec::new(),
            seed,
            scenario: Scenario::GapStudy { gap_len },
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("simulated length must be >= 1"));
        }
        let mut gaps = self.gaps.clone();
        gaps.sort_unstable();
        for &(a, b) in &gaps {
            if a == 0 || a > b || b > self.n {
                return Err(Error::config(format!(
                    "gap [{a}, {b}] outside 1..={}",
                    self.n
                )));
            }
        }
        if gaps.windows(2).any(|w| w[1].0 <= w[0].1) {
            return Err(Error::config("gaps overlap"));
        }
        match self.scenario {
            Scenario::Hierarchical => {
                self.theta.validate()?;
                let k = match self.segments {
                    SegmentCount::Fixed(k) | SegmentCount::Uniform(k) => k,
                };
                if k == 0 || k > self.n {
                    return Err(Error::config(format!(
                        "cannot place {k} segments in {} positions",
                        self.n
                    )));
                }
            }
            Scenario::SingleChangepoint { mu, sigma } => {
                if self.n < 2 {
                    return Err(Error::config("single changepoint design needs n >= 2"));
                }
                if !mu.is_finite() || !(sigma.is_finite() && sigma > 0.0) {
                    return Err(Error::config(
                        "single changepoint design needs finite mu and sigma > 0",
                    ));
                }
            }
            Scenario::GapStudy { gap_len } => {
                if self.n != 250 + gap_len {
                    return Err(Error::config(format!(
                        "gap study has n = 250 + gap_len = {}",
                        250 + gap_len
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A simulated sequence with its generating segmentation and per-segment
/// `(μ, σ²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Simulated {
    pub sequence: ObservedSequence,
    pub truth: Segmentation,
    pub params: Vec<(f64, f64)>,
}

fn normal(mean: f64, sd: f64) -> Normal<f64> {
    Normal::new(mean, sd).expect("standard deviation is positive and finite")
}

/// Draws `(μ, σ²)` from the normal-inverse-χ² prior.
pub fn draw_segment_params<R: Rng>(rng: &mut R, theta: &Hyperparams) -> (f64, f64) {
    let chi = ChiSquared::new(theta.nu0).expect("nu0 > 0");
    let sigma_sq = theta.nu0 * theta.sigma0_sq / chi.sample(rng);
    let mu = normal(theta.mu0, (sigma_sq / theta.k0).sqrt()).sample(rng);
    (mu, sigma_sq)
}

pub fn simulate(spec: &SimSpec) -> Result<Simulated> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n;

    let (mut values, truth, params) = match spec.scenario {
        Scenario::Hierarchical => {
            let k = match spec.segments {
                SegmentCount::Fixed(k) => k,
                SegmentCount::Uniform(k_max) => rng.random_range(1..=k_max),
            };
            let mut cuts: Vec<usize> = index::sample(&mut rng, n - 1, k - 1)
                .into_iter()
                .map(|c| c + 1)
                .collect();
            cuts.sort_unstable();
            cuts.push(n);
            let truth = Segmentation::from_sorted(cuts);
            let mut values = Vec::with_capacity(n);
            let mut params = Vec::with_capacity(k);
            for (start, end) in truth.segments() {
                let (mu, sigma_sq) = draw_segment_params(&mut rng, &spec.theta);
                params.push((mu, sigma_sq));
                let dist = normal(mu, sigma_sq.sqrt());
                values.extend((start..=end).map(|_| Some(dist.sample(&mut rng))));
            }
            (values, truth, params)
        }
        Scenario::SingleChangepoint { mu, sigma } => {
            let cut = n / 2;
            let before = normal(0.0, sigma);
            let after = normal(mu, sigma);
            let values = (1..=n)
                .map(|i| {
                    Some(if i <= cut {
                        before.sample(&mut rng)
                    } else {
                        after.sample(&mut rng)
                    })
                })
                .collect();
            let truth = Segmentation::from_sorted(vec![cut, n]);
            (
                values,
                truth,
                vec![(0.0, sigma * sigma), (mu, sigma * sigma)],
            )
        }
        Scenario::GapStudy { gap_len } => {
            let design = [(-1.0, 100usize), (-0.6, 50), (1.0, 100)];
            let mut values = Vec::with_capacity(n);
            for (idx, &(mean, len)) in design.iter().enumerate() {
                let dist = normal(mean, 1.0);
                values.extend((0..len).map(|_| Some(dist.sample(&mut rng))));
                if idx == 0 {
                    values.extend(std::iter::repeat_n(None, gap_len));
                }
            }
            let truth = Segmentation::from_sorted(vec![100, 150 + gap_len, n]);
            (
                values,
                truth,
                design.iter().map(|&(m, _)| (m, 1.0)).collect(),
            )
        }
    };

    for &(a, b) in &spec.gaps {
        values[a - 1..b].iter_mut().for_each(|v| *v = None);
    }
    let sequence = if values.iter().all(Option::is_none) {
        ObservedSequence::missing(n, 1)?
    } else {
        ObservedSequence::new(vec![values])?
    };
    Ok(Simulated {
        sequence,
        truth,
        params,
    })
}

/// Mixes a base seed with an index into an independent-looking seed
/// (SplitMix64 finalizer).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

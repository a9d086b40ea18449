// SPDX-License-Identifier: MIT OR Apache-2.0

//! Hyperparameters, observed data and conjugate normal-inverse-χ² updates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Within-segment observation model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Observations iid `N(μ, σ²)` within a segment.
    #[default]
    IidNormal,
    /// Zero-mean AR(1) within a segment; `mu0` is the prior location of the
    /// autoregressive coefficient.
    Ar1,
}

/// Prior constants of the normal-inverse-χ² segment prior.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub mu0: f64,
    pub k0: f64,
    pub nu0: f64,
    pub sigma0_sq: f64,
    #[serde(default)]
    pub variant: Variant,
}

impl Hyperparams {
    pub fn new(mu0: f64, k0: f64, nu0: f64, sigma0_sq: f64) -> Result<Self> {
        Self::with_variant(mu0, k0, nu0, sigma0_sq, Variant::IidNormal)
    }

    pub fn with_variant(
        mu0: f64,
        k0: f64,
        nu0: f64,
        sigma0_sq: f64,
        variant: Variant,
    ) -> Result<Self> {
        let theta = Self {
            mu0,
            k0,
            nu0,
            sigma0_sq,
            variant,
        };
        theta.validate()?;
        Ok(theta)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu0.is_finite() {
            return Err(Error::Domain(format!(
                "mu0 must be finite; got {}",
                self.mu0
            )));
        }
        for (name, value) in [
            ("k0", self.k0),
            ("nu0", self.nu0),
            ("sigma0_sq", self.sigma0_sq),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::Domain(format!(
                    "{name} must be finite and > 0; got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Same constants, different observation model.
    pub fn as_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }
}

/// One observation track; `None` marks a missing position.
pub type Track = Vec<Option<f64>>;

/// Values at positions `1..=n`, one or more replica tracks sharing the
/// same segmentation.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedSequence {
    n: usize,
    tracks: Vec<Track>,
}

impl ObservedSequence {
    pub fn new(tracks: Vec<Track>) -> Result<Self> {
        let seq = Self::build(tracks)?;
        for (r, track) in seq.tracks.iter().enumerate() {
            if track.iter().all(Option::is_none) {
                return Err(Error::InsufficientData(format!(
                    "track {r} has no observed values"
                )));
            }
        }
        Ok(seq)
    }

    pub fn single(values: &[f64]) -> Result<Self> {
        Self::new(vec![values.iter().map(|&v| Some(v)).collect()])
    }

    /// A sequence of `n` positions with nothing observed. Every evidence term
    /// is 1, so inference on it returns the prior.
    pub fn missing(n: usize, replicas: usize) -> Result<Self> {
        Self::build(vec![vec![None; n]; replicas.max(1)])
    }

    fn build(tracks: Vec<Track>) -> Result<Self> {
        let Some(first) = tracks.first() else {
            return Err(Error::InsufficientData("no observation tracks".into()));
        };
        let n = first.len();
        if n == 0 {
            return Err(Error::InsufficientData("sequence has length 0".into()));
        }
        for (r, track) in tracks.iter().enumerate() {
            if track.len() != n {
                return Err(Error::config(format!(
                    "track {r} has length {}, expected {n}",
                    track.len()
                )));
            }
            if let Some(pos) = track
                .iter()
                .position(|v| matches!(v, Some(x) if !x.is_finite()))
            {
                return Err(Error::Domain(format!(
                    "track {r} has a non-finite value at position {}",
                    pos + 1
                )));
            }
        }
        Ok(Self { n, tracks })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn num_tracks(&self) -> usize {
        self.tracks.len()
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn track(&self, r: usize) -> &[Option<f64>] {
        &self.tracks[r]
    }

    /// Raw values of track `r` on the 1-based inclusive window `[start, end]`.
    pub fn window(&self, r: usize, start: usize, end: usize) -> Result<&[Option<f64>]> {
        check_window(start, end, self.n)?;
        Ok(&self.tracks[r][start - 1..end])
    }

    /// Subtracts each track's observed mean. Used before AR(1) analysis,
    /// which assumes zero-mean data.
    pub fn centered(&self) -> Self {
        let tracks = self
            .tracks
            .iter()
            .map(|track| {
                let (count, sum) = track
                    .iter()
                    .flatten()
                    .fold((0usize, 0.0), |(c, s), &v| (c + 1, s + v));
                let mean = if count == 0 { 0.0 } else { sum / count as f64 };
                track.iter().map(|v| v.map(|x| x - mean)).collect()
            })
            .collect();
        Self { n: self.n, tracks }
    }

    /// Joins sequences end to end; all parts must carry the same number of
    /// tracks.
    pub fn concat(parts: &[ObservedSequence]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(Error::InsufficientData("nothing to concatenate".into()));
        };
        let replicas = first.num_tracks();
        let mut tracks = vec![Vec::new(); replicas];
        for part in parts {
            if part.num_tracks() != replicas {
                return Err(Error::config(format!(
                    "cannot concatenate sequences with {} and {} tracks",
                    replicas,
                    part.num_tracks()
                )));
            }
            for (dst, src) in tracks.iter_mut().zip(&part.tracks) {
                dst.extend_from_slice(src);
            }
        }
        Self::new(tracks)
    }
}

pub(crate) fn check_window(start: usize, end: usize, n: usize) -> Result<()> {
    if start == 0 || start > end || end > n {
        return Err(Error::Window { start, end, n });
    }
    Ok(())
}

/// Count, mean and centered sum of squares of the observed values in a
/// window. Missing positions contribute nothing.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SufficientStats {
    pub count: usize,
    pub mean: f64,
    /// `Σ (y - ȳ)²` over the observed values.
    pub scatter: f64,
}

impl SufficientStats {
    pub fn from_values<'a, I>(values: I) -> Self
    where
        I: IntoIterator<Item = &'a Option<f64>>,
    {
        // Welford
        let mut stats = Self::default();
        for &v in values.into_iter().flatten() {
            stats.count += 1;
            let delta = v - stats.mean;
            stats.mean += delta / stats.count as f64;
            stats.scatter += delta * (v - stats.mean);
        }
        stats
    }

    pub fn from_observed(values: &[f64]) -> Self {
        let mut stats = Self::default();
        for &v in values {
            stats.count += 1;
            let delta = v - stats.mean;
            stats.mean += delta / stats.count as f64;
            stats.scatter += delta * (v - stats.mean);
        }
        stats
    }

    /// Stats of the union of two disjoint windows.
    pub fn merge(&self, other: &Self) -> Self {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let count = self.count + other.count;
        let (na, nb, n) = (self.count as f64, other.count as f64, count as f64);
        let delta = other.mean - self.mean;
        Self {
            count,
            mean: self.mean + delta * nb / n,
            scatter: self.scatter + other.scatter + delta * delta * na * nb / n,
        }
    }

    pub fn sum(&self) -> f64 {
        self.mean * self.count as f64
    }

    pub fn sum_sq(&self) -> f64 {
        self.scatter + self.count as f64 * self.mean * self.mean
    }
}

/// Statistics of the zero-mean AR(1) likelihood on a window: the number of
/// observed values, `Σ y²` over them, and lag-one cross products over the
/// pairs `(y_{t-1}, y_t)` where both values are observed and adjacent.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Ar1Stats {
    pub count: usize,
    pub sum_yy: f64,
    /// `Σ y_{t-1}²` over valid pairs.
    pub sum_xx: f64,
    /// `Σ y_{t-1} y_t` over valid pairs.
    pub sum_xy: f64,
}

impl Ar1Stats {
    pub fn from_values(values: &[Option<f64>]) -> Self {
        let mut stats = Self::default();
        let mut prev: Option<f64> = None;
        for &v in values {
            if let Some(y) = v {
                stats.count += 1;
                stats.sum_yy += y * y;
                if let Some(x) = prev {
                    stats.sum_xx += x * x;
                    stats.sum_xy += x * y;
                }
            }
            prev = v;
        }
        stats
    }
}

/// Posterior normal-inverse-χ² parameters of one segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorParams {
    pub mu_n: f64,
    pub k_n: f64,
    pub nu_n: f64,
    /// `ν_n σ_n²`
    pub nu_sigma_sq_n: f64,
}

impl PosteriorParams {
    /// Posterior mean of σ², defined only for `ν_n > 2`.
    pub fn mean_sigma_sq(&self) -> Option<f64> {
        (self.nu_n > 2.0).then(|| self.nu_sigma_sq_n / (self.nu_n - 2.0))
    }

    /// Reads the posterior back as a prior for a further batch.
    pub fn as_prior(&self, variant: Variant) -> Hyperparams {
        Hyperparams {
            mu0: self.mu_n,
            k0: self.k_n,
            nu0: self.nu_n,
            sigma0_sq: self.nu_sigma_sq_n / self.nu_n,
            variant,
        }
    }
}

/// Conjugate update of the iid normal segment prior.
pub fn posterior_update(theta: &Hyperparams, stats: &SufficientStats) -> PosteriorParams {
    let m = stats.count as f64;
    let k_n = theta.k0 + m;
    let nu_n = theta.nu0 + m;
    if stats.count == 0 {
        return PosteriorParams {
            mu_n: theta.mu0,
            k_n,
            nu_n,
            nu_sigma_sq_n: theta.nu0 * theta.sigma0_sq,
        };
    }
    let diff = stats.mean - theta.mu0;
    PosteriorParams {
        mu_n: (theta.k0 * theta.mu0 + m * stats.mean) / k_n,
        k_n,
        nu_n,
        nu_sigma_sq_n: theta.nu0 * theta.sigma0_sq
            + stats.scatter
            + theta.k0 * m / k_n * diff * diff,
    }
}

/// Data-dependent default prior: observed mean, `k0 = 0.01`, `nu0 = 3`,
/// and the sample variance (denominator `m - 1`) as `sigma0_sq`.
pub fn default_hyperparams(track: &[Option<f64>]) -> Result<Hyperparams> {
    let stats = SufficientStats::from_values(track);
    if stats.count < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 observed values for default hyperparameters; got {}",
            stats.count
        )));
    }
    let variance = stats.scatter / (stats.count - 1) as f64;
    if variance <= 0.0 {
        return Err(Error::DegenerateVariance);
    }
    Hyperparams::new(stats.mean, 0.01, 3.0, variance)
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Single-segment marginal likelihoods with the segment parameters
//! integrated out against the normal-inverse-χ² prior.
//!
//! Both observation models reduce to the same closed form
//!
//! ```text
//! log p = -(m/2) log π + ½ log(k0 / k_n) + log Γ(ν_n/2) - log Γ(ν0/2)
//!         + (ν0/2) log(ν0 σ0²) - (ν_n/2) log(ν0 σ0² + R)
//! ```
//!
//! with `ν_n = ν0 + m` and model-specific `k_n` and residual `R`. For the
//! iid model `k_n = k0 + m` and `R = Σ(y-ȳ)² + k0 m/(k0+m) (ȳ-μ0)²`; for
//! AR(1) `k_n = k0 + Σx²` and `R` is the residual of the regularized
//! lag-one regression. Windows without observations have evidence 1.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::{
    check_window, Ar1Stats, Hyperparams, ObservedSequence, SufficientStats, Variant,
};

const LN_PI: f64 = 1.144_729_885_849_400_2;

/// `log Γ(a + b) - log Γ(a)` without the cancellation of the direct
/// difference when `a` is large.
pub(crate) fn ln_gamma_ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        return 0.0;
    }
    if a < 50.0 {
        return ln_gamma(a + b) - ln_gamma(a);
    }
    // Stirling series, differenced term by term
    let x = a + b;
    let series = |z: f64| {
        let z2 = z * z;
        (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * z2)) / z2) / z2) / z
    };
    (a - 0.5) * (b / a).ln_1p() + b * x.ln() - b + series(x) - series(a)
}

/// The closed form from its stable pieces. `ln_k_ratio` is `log(k0 / k_n)`
/// and `lgamma_ratio` is `log Γ(ν_n/2) - log Γ(ν0/2)`.
#[inline]
fn closed_form(
    theta: &Hyperparams,
    m: usize,
    ln_k_ratio: f64,
    residual: f64,
    lgamma_ratio: f64,
) -> f64 {
    let prior_ss = theta.nu0 * theta.sigma0_sq;
    let mf = m as f64;
    -0.5 * mf * LN_PI + 0.5 * ln_k_ratio + lgamma_ratio
        - 0.5 * theta.nu0 * (residual / prior_ss).ln_1p()
        - 0.5 * mf * (prior_ss + residual).ln()
}

fn iid_residual(theta: &Hyperparams, stats: &SufficientStats) -> f64 {
    let m = stats.count as f64;
    let diff = stats.mean - theta.mu0;
    stats.scatter.max(0.0) + theta.k0 * m / (theta.k0 + m) * diff * diff
}

fn ar1_terms(theta: &Hyperparams, stats: &Ar1Stats) -> (f64, f64) {
    let k_n = theta.k0 + stats.sum_xx;
    let beta_n = (stats.sum_xy + theta.k0 * theta.mu0) / k_n;
    let residual = stats.sum_yy + theta.k0 * theta.mu0 * theta.mu0 - k_n * beta_n * beta_n;
    (-(stats.sum_xx / theta.k0).ln_1p(), residual.max(0.0))
}

/// Log evidence of one segment under the iid normal model.
pub fn segment_log_evidence(theta: &Hyperparams, stats: &SufficientStats) -> f64 {
    if stats.count == 0 {
        return 0.0;
    }
    let m = stats.count as f64;
    closed_form(
        theta,
        stats.count,
        -(m / theta.k0).ln_1p(),
        iid_residual(theta, stats),
        ln_gamma_ratio(0.5 * theta.nu0, 0.5 * m),
    )
}

/// Log evidence of one segment under the zero-mean AR(1) model, from
/// precomputed statistics.
pub fn ar1_log_evidence(theta: &Hyperparams, stats: &Ar1Stats) -> f64 {
    if stats.count == 0 {
        return 0.0;
    }
    let (ln_k_ratio, residual) = ar1_terms(theta, stats);
    closed_form(
        theta,
        stats.count,
        ln_k_ratio,
        residual,
        ln_gamma_ratio(0.5 * theta.nu0, 0.5 * stats.count as f64),
    )
}

/// Log evidence of a raw AR(1) window. The first observed value of the
/// window, and the first value after any missing position, enter as pure
/// noise.
pub fn segment_log_evidence_ar1(theta: &Hyperparams, window: &[Option<f64>]) -> f64 {
    ar1_log_evidence(theta, &Ar1Stats::from_values(window))
}

/// Log evidence of a raw window under the model selected by `theta.variant`.
pub fn window_log_evidence(theta: &Hyperparams, window: &[Option<f64>]) -> f64 {
    match theta.variant {
        Variant::IidNormal => segment_log_evidence(theta, &SufficientStats::from_values(window)),
        Variant::Ar1 => segment_log_evidence_ar1(theta, window),
    }
}

/// Sum of per-replica log evidences on the 1-based window `[start, end]`.
pub fn segment_log_evidence_multi(
    seq: &ObservedSequence,
    thetas: &[Hyperparams],
    start: usize,
    end: usize,
) -> Result<f64> {
    check_window(start, end, seq.len())?;
    let thetas = broadcast(thetas, seq.num_tracks())?;
    Ok(thetas
        .iter()
        .enumerate()
        .map(|(r, theta)| window_log_evidence(theta, &seq.track(r)[start - 1..end]))
        .sum())
}

fn broadcast(thetas: &[Hyperparams], tracks: usize) -> Result<Vec<Hyperparams>> {
    match thetas.len() {
        1 => Ok(vec![thetas[0]; tracks]),
        len if len == tracks => Ok(thetas.to_vec()),
        len => Err(Error::config(format!(
            "got {len} hyperparameter sets for {tracks} tracks"
        ))),
    }
}

#[derive(Clone, Debug)]
enum Prefix {
    Iid {
        shift: f64,
        count: Vec<u32>,
        sum: Vec<f64>,
        sum_sq: Vec<f64>,
        // log(k0 / (k0 + m))
        ln_k_ratio: Vec<f64>,
    },
    Ar1 {
        count: Vec<u32>,
        yy: Vec<f64>,
        // pair statistics, indexed by the later position of the pair
        xx: Vec<f64>,
        xy: Vec<f64>,
    },
}

#[derive(Clone, Debug)]
struct TrackTables {
    theta: Hyperparams,
    prior_ss: f64,
    // log Γ((ν0 + m)/2) - log Γ(ν0/2) for m = 0..=n
    lgamma_ratio: Vec<f64>,
    prefix: Prefix,
}

impl TrackTables {
    fn new(theta: Hyperparams, track: &[Option<f64>]) -> Self {
        let n = track.len();
        let prior_ss = theta.nu0 * theta.sigma0_sq;
        let lgamma_ratio = (0..=n)
            .map(|m| ln_gamma_ratio(0.5 * theta.nu0, 0.5 * m as f64))
            .collect();
        let prefix = match theta.variant {
            Variant::IidNormal => {
                let observed = SufficientStats::from_values(track);
                let shift = observed.mean;
                let mut count = Vec::with_capacity(n + 1);
                let mut sum = Vec::with_capacity(n + 1);
                let mut sum_sq = Vec::with_capacity(n + 1);
                let (mut c, mut s, mut q) = (0u32, 0.0, 0.0);
                count.push(c);
                sum.push(s);
                sum_sq.push(q);
                for v in track {
                    if let Some(y) = v {
                        let d = y - shift;
                        c += 1;
                        s += d;
                        q += d * d;
                    }
                    count.push(c);
                    sum.push(s);
                    sum_sq.push(q);
                }
                let ln_k_ratio = (0..=n).map(|m| -(m as f64 / theta.k0).ln_1p()).collect();
                Prefix::Iid {
                    shift,
                    count,
                    sum,
                    sum_sq,
                    ln_k_ratio,
                }
            }
            Variant::Ar1 => {
                let mut count = vec![0u32; n + 1];
                let mut yy = vec![0.0; n + 1];
                let mut xx = vec![0.0; n + 1];
                let mut xy = vec![0.0; n + 1];
                for t in 1..=n {
                    count[t] = count[t - 1];
                    yy[t] = yy[t - 1];
                    xx[t] = xx[t - 1];
                    xy[t] = xy[t - 1];
                    if let Some(y) = track[t - 1] {
                        count[t] += 1;
                        yy[t] += y * y;
                        if t >= 2 {
                            if let Some(x) = track[t - 2] {
                                xx[t] += x * x;
                                xy[t] += x * y;
                            }
                        }
                    }
                }
                Prefix::Ar1 { count, yy, xx, xy }
            }
        };
        Self {
            theta,
            prior_ss,
            lgamma_ratio,
            prefix,
        }
    }

    #[inline]
    fn log_evidence(&self, start: usize, end: usize) -> f64 {
        let theta = &self.theta;
        let (m, ln_k_ratio, residual) = match &self.prefix {
            Prefix::Iid {
                shift,
                count,
                sum,
                sum_sq,
                ln_k_ratio,
            } => {
                let m = (count[end] - count[start - 1]) as usize;
                if m == 0 {
                    return 0.0;
                }
                let mf = m as f64;
                let s = sum[end] - sum[start - 1];
                let mean = s / mf;
                let scatter = (sum_sq[end] - sum_sq[start - 1] - s * mean).max(0.0);
                let diff = mean + shift - theta.mu0;
                (
                    m,
                    ln_k_ratio[m],
                    scatter + theta.k0 * mf / (theta.k0 + mf) * diff * diff,
                )
            }
            Prefix::Ar1 { count, yy, xx, xy } => {
                let m = (count[end] - count[start - 1]) as usize;
                if m == 0 {
                    return 0.0;
                }
                let stats = Ar1Stats {
                    count: m,
                    sum_yy: yy[end] - yy[start - 1],
                    sum_xx: xx[end] - xx[start],
                    sum_xy: xy[end] - xy[start],
                };
                let (ln_k_ratio, residual) = ar1_terms(theta, &stats);
                (m, ln_k_ratio, residual)
            }
        };
        let mf = m as f64;
        -0.5 * mf * LN_PI + 0.5 * ln_k_ratio + self.lgamma_ratio[m]
            - 0.5 * theta.nu0 * (residual / self.prior_ss).ln_1p()
            - 0.5 * mf * (self.prior_ss + residual).ln()
    }
}

/// Prefix-sum tables giving the log evidence of any window in O(1) per
/// replica. Replicas are independent given the segmentation, so window
/// evidences add across tracks.
#[derive(Clone, Debug)]
pub struct SegmentEvidence {
    n: usize,
    tracks: Vec<TrackTables>,
}

impl SegmentEvidence {
    /// `thetas` holds one set per track, or a single set shared by all.
    pub fn new(seq: &ObservedSequence, thetas: &[Hyperparams]) -> Result<Self> {
        let thetas = broadcast(thetas, seq.num_tracks())?;
        for theta in &thetas {
            theta.validate()?;
        }
        let tracks = thetas
            .into_iter()
            .zip(seq.tracks())
            .map(|(theta, track)| TrackTables::new(theta, track))
            .collect();
        Ok(Self {
            n: seq.len(),
            tracks,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn thetas(&self) -> Vec<Hyperparams> {
        self.tracks.iter().map(|t| t.theta).collect()
    }

    /// Log evidence of positions `[start, end]` (1-based, inclusive) as one
    /// segment.
    pub fn log_evidence(&self, start: usize, end: usize) -> Result<f64> {
        check_window(start, end, self.n)?;
        Ok(self.log_evidence_unchecked(start, end))
    }

    #[inline]
    pub(crate) fn log_evidence_unchecked(&self, start: usize, end: usize) -> f64 {
        debug_assert!(start >= 1 && start <= end && end <= self.n);
        match self.tracks.as_slice() {
            [only] => only.log_evidence(start, end),
            tracks => tracks.iter().map(|t| t.log_evidence(start, end)).sum(),
        }
    }
}

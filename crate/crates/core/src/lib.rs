// SPDX-License-Identifier: MIT OR Apache-2.0

//! Exact Bayesian inference for multiple-changepoint models on univariate
//! sequences.
//!
//! Segments carry their own mean and variance (or AR(1) coefficient and
//! variance) drawn from a normal-inverse-χ² prior, which integrates out in
//! closed form. A forward recursion over prefixes and segment counts then
//! gives the marginal evidence in `O(n² k_max)`, from which exact
//! independent posterior segmentations, the MAP segmentation and
//! changepoint marginals follow. Hyperparameters can be fit to training
//! sequences by Monte Carlo EM.
//!
//! ```
//! use bayescpd::{Hyperparams, ObservedSequence, Posterior, SegPrior};
//!
//! let seq = ObservedSequence::single(&[0.1, -0.2, 0.0, 3.1, 2.9, 3.2]).unwrap();
//! let theta = Hyperparams::new(1.5, 0.01, 3.0, 2.0).unwrap();
//! let prior = SegPrior::build(seq.len(), 3, None).unwrap();
//! let post = Posterior::new(&seq, &[theta], prior).unwrap();
//! let (map, _) = post.map().unwrap();
//! assert_eq!(map.changepoints(), &[3, 6]);
//! ```

#![forbid(unsafe_code)]

pub mod dp;
pub mod eb;
pub mod error;
pub mod evidence;
pub mod inference;
pub mod model;
pub mod oracle;
pub mod segmentation;
pub mod segprior;
pub mod simplex;
pub mod simulate;

pub use dp::{
    forward, log_marginal_evidence, log_posterior_num_segments, log_sum_exp, ForwardTable,
};
pub use eb::{
    e_step_samples, fit_or_default, m_step_objective, mcem_fit, McemConfig, McemFit, McemStatus,
    SegmentStats,
};
pub use error::{Error, Result};
pub use evidence::{
    segment_log_evidence, segment_log_evidence_ar1, segment_log_evidence_multi,
    window_log_evidence, SegmentEvidence,
};
pub use inference::{
    changepoint_marginals, exact_changepoint_marginals, map_segmentation,
    posterior_position_summary, sample_segmentations, PositionSummary, Posterior, SampleSet,
};
pub use model::{
    default_hyperparams, posterior_update, Ar1Stats, Hyperparams, ObservedSequence,
    PosteriorParams, SufficientStats, Track, Variant,
};
pub use segmentation::Segmentation;
pub use segprior::SegPrior;
pub use simulate::{simulate, Scenario, SegmentCount, SimSpec, Simulated};

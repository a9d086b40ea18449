// SPDX-License-Identifier: MIT OR Apache-2.0

use bayescpd::oracle::{enumerate_posterior, quadrature_evidence};
use bayescpd::simulate::derive_seed;
use bayescpd::{
    default_hyperparams, mcem_fit, window_log_evidence, Hyperparams, McemConfig, ObservedSequence,
    Posterior, SegPrior, SegmentCount, Segmentation, SimSpec, Variant,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::{cli_props, props, Verdict};

fn random_theta(rng: &mut ChaCha8Rng, variant: Variant) -> Hyperparams {
    let mu0 = match variant {
        Variant::IidNormal => rng.random_range(-1.0..1.0),
        Variant::Ar1 => rng.random_range(-0.8..0.8),
    };
    Hyperparams::with_variant(
        mu0,
        10f64.powf(rng.random_range(-1.5..1.0)),
        rng.random_range(0.5..10.0),
        10f64.powf(rng.random_range(-1.0..0.7)),
        variant,
    )
    .expect("valid draw")
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller keeps the harness free of extra distribution plumbing
    let u: f64 = rng.random_range(f64::EPSILON..1.0);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

fn piecewise_track(rng: &mut ChaCha8Rng, n: usize, missing_rate: f64) -> Vec<Option<f64>> {
    let mut level = gaussian(rng);
    (0..n)
        .map(|_| {
            if rng.random_bool(0.2) {
                level = 2.0 * gaussian(rng);
            }
            let y = level + 0.6 * gaussian(rng);
            (!rng.random_bool(missing_rate)).then_some(y)
        })
        .collect()
}

fn close_log(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() < tol
}

fn close_prob_log(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a > 0.0 && b > 0.0 && (a.ln() - b.ln()).abs() < tol)
}

struct Instance {
    seq: ObservedSequence,
    thetas: Vec<Hyperparams>,
    prior: SegPrior,
}

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    loop {
        let n = rng.random_range(4..=12);
        let k_max = rng.random_range(1..=4);
        let bounds = rng.random_bool(0.5).then(|| {
            let l = rng.random_range(1..=3);
            let u = rng.random_range(l..=n);
            (l, u)
        });
        let missing = if rng.random_bool(0.5) { 0.25 } else { 0.0 };
        let variant = if rng.random_bool(0.3) {
            Variant::Ar1
        } else {
            Variant::IidNormal
        };
        let replicas = rng.random_range(1..=2);
        let tracks: Vec<_> = (0..replicas)
            .map(|_| piecewise_track(rng, n, missing))
            .collect();
        let Ok(seq) = ObservedSequence::new(tracks) else {
            continue;
        };
        let thetas: Vec<_> = (0..replicas).map(|_| random_theta(rng, variant)).collect();
        let Ok(prior) = SegPrior::build(n, k_max, bounds) else {
            continue;
        };
        if (1..=k_max).all(|k| prior.log_count(n, k) == f64::NEG_INFINITY) {
            continue;
        }
        return Instance { seq, thetas, prior };
    }
}

pub fn oracle_equivalence(seed: u64) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let instances: Vec<Instance> = (0..100).map(|_| random_instance(&mut rng)).collect();
    let failures: Vec<String> = instances
        .par_iter()
        .enumerate()
        .filter_map(|(idx, inst)| {
            let check = || -> Result<Option<String>, bayescpd::Error> {
                let oracle = enumerate_posterior(&inst.seq, &inst.thetas, &inst.prior)?;
                let post = Posterior::new(&inst.seq, &inst.thetas, inst.prior.clone())?;
                if !close_log(post.log_marginal_evidence(), oracle.log_evidence, 1e-9) {
                    return Ok(Some(format!(
                        "evidence {} vs {}",
                        post.log_marginal_evidence(),
                        oracle.log_evidence
                    )));
                }
                let lpk = post.log_posterior_num_segments()?;
                if lpk
                    .iter()
                    .zip(&oracle.log_posterior_k)
                    .any(|(a, b)| !close_log(*a, *b, 1e-9))
                {
                    return Ok(Some(format!(
                        "p(k|y) {lpk:?} vs {:?}",
                        oracle.log_posterior_k
                    )));
                }
                let (map, map_lp) = post.map()?;
                if map != oracle.map.0 || !close_log(map_lp, oracle.map.1, 1e-9) {
                    return Ok(Some(format!("MAP {map:?} ({map_lp}) vs {:?}", oracle.map)));
                }
                let marginals = post.exact_marginals()?;
                if marginals.len() != oracle.marginals.len()
                    || marginals
                        .iter()
                        .zip(&oracle.marginals)
                        .any(|(a, b)| !close_prob_log(*a, *b, 1e-9))
                {
                    return Ok(Some(format!(
                        "marginals {marginals:?} vs {:?}",
                        oracle.marginals
                    )));
                }
                Ok(None)
            };
            match check() {
                Ok(None) => None,
                Ok(Some(msg)) => Some(format!("instance {idx}: {msg}")),
                Err(e) => Some(format!("instance {idx}: error {e}")),
            }
        })
        .collect();
    match failures.first() {
        None => Verdict::new(
            true,
            "100/100 instances match enumeration within 1e-9, MAP identical",
        ),
        Some(first) => Verdict::new(
            false,
            format!("{} mismatches; first: {first}", failures.len()),
        ),
    }
}

pub fn evidence_vs_quadrature(seed: u64) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2));
    let cases: Vec<(Hyperparams, Vec<Option<f64>>)> = (0..100)
        .map(|i| {
            let variant = if i % 2 == 0 {
                Variant::IidNormal
            } else {
                Variant::Ar1
            };
            let theta = random_theta(&mut rng, variant);
            let len = rng.random_range(1..=20);
            let shift = if i % 10 == 9 { 6.0 } else { 0.0 };
            let mut prev = 0.0;
            let window = (0..len)
                .map(|_| {
                    let y = match variant {
                        Variant::IidNormal => shift + theta.mu0 + gaussian(&mut rng),
                        Variant::Ar1 => 0.5 * prev + (1.0 + shift) * gaussian(&mut rng),
                    };
                    prev = y;
                    (!rng.random_bool(0.15)).then_some(y)
                })
                .collect();
            (theta, window)
        })
        .collect();
    let results: Vec<Result<f64, String>> = cases
        .par_iter()
        .map(|(theta, window)| {
            let closed = window_log_evidence(theta, window);
            quadrature_evidence(theta, window, theta.variant)
                .map(|q| (q - closed).abs())
                .map_err(|e| format!("{e} at theta {theta:?}, window {window:?}"))
        })
        .collect();
    let mut worst = 0.0f64;
    let mut bad = 0;
    let mut errors = Vec::new();
    for r in &results {
        match r {
            Ok(d) => {
                worst = worst.max(*d);
                if *d >= 1e-6 {
                    bad += 1;
                }
            }
            Err(e) => errors.push(e.clone()),
        }
    }
    let pass = bad == 0 && errors.is_empty();
    let mut detail =
        format!("100 cases (50 iid, 50 AR1), max |dlog| {worst:.2e}, {bad} above 1e-6");
    if let Some(e) = errors.first() {
        detail.push_str(&format!(", {} quadrature errors, first: {e}", errors.len()));
    }
    Verdict::new(pass, detail)
}

pub fn sampler_exactness(_seed: u64) -> Verdict {
    let values = [0.3, -0.1, 0.2, 1.4, 1.1, 1.6, 1.2, -0.4, 0.1, -0.2];
    let seq = ObservedSequence::single(&values).expect("finite data");
    let theta = Hyperparams::new(0.5, 0.2, 3.0, 0.3).expect("valid");
    let prior = SegPrior::build(values.len(), 3, None).expect("valid prior");
    let oracle = match enumerate_posterior(&seq, &[theta], &prior) {
        Ok(o) => o,
        Err(e) => return Verdict::new(false, format!("oracle failed: {e}")),
    };
    let post = Posterior::new(&seq, &[theta], prior).expect("posterior");
    let draws = post.sample(200_000, 20_240_601).expect("sampling");
    let index: std::collections::HashMap<&Segmentation, usize> = oracle
        .entries
        .iter()
        .enumerate()
        .map(|(i, (s, _))| (s, i))
        .collect();
    let mut counts = vec![0usize; oracle.entries.len()];
    for s in &draws.samples {
        match index.get(s) {
            Some(&i) => counts[i] += 1,
            None => {
                return Verdict::new(false, format!("sampled an infeasible segmentation {s:?}"))
            }
        }
    }
    let probs: Vec<f64> = oracle.log_posterior.iter().map(|lp| lp.exp()).collect();
    let (stat, df, tv) = props::goodness_of_fit(&probs, &counts);
    let critical = props::chi_square_critical(df, 1e-3);
    Verdict::new(
        stat < critical && tv < 0.01,
        format!(
            "{} segmentations, chi2 {stat:.2} on {df} df (critical {critical:.2} at alpha 0.001), TV {tv:.4}",
            probs.len()
        ),
    )
}

const TABLE_SEQUENCES: usize = 100;
const TABLE_SAMPLES: usize = 100;
const TABLE_K_MAX: usize = 10;

/// Mean number of 2-segment draws per 100 and median |c1 - 200| over all
/// 2-segment draws.
pub fn single_changepoint_design(mu: f64, seed: u64) -> Result<(f64, f64), bayescpd::Error> {
    let per_seq: Vec<(usize, Vec<usize>)> = (0..TABLE_SEQUENCES)
        .into_par_iter()
        .map(|i| -> Result<_, bayescpd::Error> {
            let sim = bayescpd::simulate(&SimSpec::single_changepoint(
                400,
                mu,
                1.0,
                derive_seed(seed, i as u64),
            ))?;
            let theta = default_hyperparams(sim.sequence.track(0))?;
            let prior = SegPrior::build(400, TABLE_K_MAX, None)?;
            let post = Posterior::new(&sim.sequence, &[theta], prior)?;
            let draws = post.sample(TABLE_SAMPLES, derive_seed(seed ^ 0xA5A5, i as u64))?;
            let truth = sim.truth.changepoints()[0];
            let two: Vec<usize> = draws
                .samples
                .iter()
                .filter(|s| s.num_segments() == 2)
                .map(|s| s.changepoints()[0].abs_diff(truth))
                .collect();
            Ok((two.len(), two))
        })
        .collect::<Result<_, _>>()?;
    let mean_two = per_seq.iter().map(|(c, _)| *c as f64).sum::<f64>() / TABLE_SEQUENCES as f64
        * (100.0 / TABLE_SAMPLES as f64);
    let mut errors: Vec<usize> = per_seq.into_iter().flat_map(|(_, e)| e).collect();
    errors.sort_unstable();
    let median = if errors.is_empty() {
        f64::INFINITY
    } else if errors.len() % 2 == 1 {
        errors[errors.len() / 2] as f64
    } else {
        0.5 * (errors[errors.len() / 2 - 1] + errors[errors.len() / 2]) as f64
    };
    Ok((mean_two, median))
}

pub fn single_changepoint_study(seed: u64) -> Verdict {
    let run = |mu: f64, salt: u64| single_changepoint_design(mu, derive_seed(seed, salt));
    match (run(2.0, 40), run(1.0, 41)) {
        (Ok((two2, err2)), Ok((two1, err1))) => {
            let pass = (90.0..=100.0).contains(&two2)
                && err2 <= 1.0
                && (60.0..=85.0).contains(&two1)
                && err1 <= 3.0;
            Verdict::new(
                pass,
                format!(
                    "mu=2: {two2:.1} two-segment draws per 100, median error {err2}; \
                     mu=1: {two1:.1}, median error {err1}"
                ),
            )
        }
        (Err(e), _) | (_, Err(e)) => Verdict::new(false, format!("pipeline error: {e}")),
    }
}

const GAP_K_MAX: usize = 10;
const GAP_SAMPLES: usize = 100;
const GAP_LEN: usize = 100;
/// A sequence counts as detected when more than this fraction of its
/// posterior draws has a changepoint within three observations of the
/// first true changepoint.
pub const GAP_DETECTION_FRACTION: f64 = 0.1;

/// Fraction of posterior draws with a changepoint within three observations
/// of the first true changepoint. Positions are converted to observation
/// indices (the number of observed values up to and including the
/// position), so a changepoint anywhere inside the gap counts as
/// observation 100.
pub fn gap_hit_fraction(
    gap_len: usize,
    seed: u64,
    sample_seed: u64,
) -> Result<f64, bayescpd::Error> {
    let sim = bayescpd::simulate(&SimSpec::gap_study(gap_len, seed))?;
    let track = sim.sequence.track(0);
    let mut obs_index = Vec::with_capacity(track.len());
    let mut seen = 0usize;
    for v in track {
        seen += usize::from(v.is_some());
        obs_index.push(seen);
    }
    let theta = default_hyperparams(track)?;
    let prior = SegPrior::build(track.len(), GAP_K_MAX, None)?;
    let post = Posterior::new(&sim.sequence, &[theta], prior)?;
    let draws = post.sample(GAP_SAMPLES, sample_seed)?;
    let hits = draws
        .samples
        .iter()
        .filter(|s| {
            s.internal()
                .iter()
                .any(|&c| obs_index[c - 1].abs_diff(100) <= 3)
        })
        .count();
    Ok(hits as f64 / draws.len() as f64)
}

pub fn missing_data_study(seed: u64) -> Verdict {
    let fractions = |gap: usize| -> Result<Vec<f64>, bayescpd::Error> {
        (0..100u64)
            .into_par_iter()
            .map(|i| gap_hit_fraction(gap, derive_seed(seed, 50 + i), derive_seed(seed, 500 + i)))
            .collect()
    };
    let count = |f: &[f64], level: f64| f.iter().filter(|&&x| x > level).count();
    match (fractions(0), fractions(GAP_LEN)) {
        (Ok(plain), Ok(gapped)) => {
            let (a, b) = (
                count(&plain, GAP_DETECTION_FRACTION),
                count(&gapped, GAP_DETECTION_FRACTION),
            );
            Verdict::new(
                b >= a + 20,
                format!(
                    "detected without gap {a}/100, with {GAP_LEN}-position gap {b}/100 \
                     (majority-of-draws rule: {} vs {})",
                    count(&plain, 0.5),
                    count(&gapped, 0.5)
                ),
            )
        }
        (Err(e), _) | (_, Err(e)) => Verdict::new(false, format!("pipeline error: {e}")),
    }
}

pub const MCEM_N: usize = 1000;
pub const MCEM_K_MAX: usize = 10;

/// Simulated design with 5 segments per sequence from θ = {0, 0.5, 5, 0.1}.
pub fn mcem_design(seed: u64, count: usize) -> Vec<ObservedSequence> {
    let theta = Hyperparams::new(0.0, 0.5, 5.0, 0.1).expect("valid");
    (0..count)
        .map(|i| {
            bayescpd::simulate(&SimSpec::hierarchical(
                MCEM_N,
                SegmentCount::Fixed(5),
                theta,
                derive_seed(seed, i as u64),
            ))
            .expect("valid design")
            .sequence
        })
        .collect()
}

fn map_counts(
    test: &[ObservedSequence],
    theta_of: impl Fn(&ObservedSequence) -> Hyperparams + Sync,
) -> Vec<usize> {
    test.par_iter()
        .map(|seq| {
            let prior = SegPrior::build(seq.len(), MCEM_K_MAX, None).expect("valid prior");
            let post = Posterior::new(seq, &[theta_of(seq)], prior).expect("posterior");
            post.map().expect("map").0.num_segments()
        })
        .collect()
}

fn histogram(counts: &[usize]) -> Vec<usize> {
    let mut h = vec![0; MCEM_K_MAX + 1];
    for &c in counts {
        h[c] += 1;
    }
    h
}

pub fn mcem_study(seed: u64) -> Verdict {
    let data = mcem_design(derive_seed(seed, 60), 200);
    let (train, test) = data.split_at(100);
    let init = match bayescpd::eb::pooled_track(train).and_then(|t| default_hyperparams(&t)) {
        Ok(t) => t,
        Err(e) => return Verdict::new(false, format!("init failed: {e}")),
    };
    let cfg = McemConfig {
        k_max: MCEM_K_MAX,
        seed: derive_seed(seed, 61),
        ..McemConfig::default()
    };
    let fit = match mcem_fit(train, init, &cfg) {
        Ok(f) => f,
        Err(e) => return Verdict::new(false, format!("MCEM failed: {e}")),
    };
    let fitted = fit.theta;
    let with_fit = histogram(&map_counts(test, |_| fitted));
    let with_default = histogram(&map_counts(test, |seq| {
        default_hyperparams(seq.track(0)).expect("default prior")
    }));
    let mode = (1..=MCEM_K_MAX)
        .max_by_key(|&k| (with_fit[k], std::cmp::Reverse(k)))
        .unwrap_or(0);
    let pass = mode == 5 && with_fit[5] >= with_default[5];
    let trace_gain = fit.trace.last().copied().unwrap_or(f64::NAN) - fit.trace[0];
    Verdict::new(
        pass,
        format!(
            "fitted theta ({:.3}, {:.3}, {:.3}, {:.4}); MAP count histogram 1..={MCEM_K_MAX} \
             fitted {:?}, default {:?}; modal count {mode}; 5-segment hits {} vs {}; trace gain {trace_gain:.2}",
            fitted.mu0,
            fitted.k0,
            fitted.nu0,
            fitted.sigma0_sq,
            &with_fit[1..],
            &with_default[1..],
            with_fit[5],
            with_default[5]
        ),
    )
}

pub fn numerics_at_scale(seed: u64) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 7));
    let track = piecewise_track(&mut rng, 2000, 0.0);
    let values: Vec<f64> = track.into_iter().flatten().collect();
    let run = || -> Result<usize, bayescpd::Error> {
        let seq = ObservedSequence::single(&values)?;
        let theta = default_hyperparams(seq.track(0))?;
        let prior = SegPrior::build(2000, 20, None)?;
        let post = Posterior::new(&seq, &[theta], prior)?;
        let mut violations = post
            .table()
            .entries()
            .filter(|v| v.is_nan() || *v == f64::INFINITY)
            .count();
        violations += usize::from(!post.log_marginal_evidence().is_finite());
        violations += post
            .log_posterior_num_segments()?
            .into_iter()
            .filter(|v| v.is_nan() || *v > 0.0)
            .count();
        let draws = post.sample(100, derive_seed(seed, 70))?;
        let (_, map_lp) = post.map()?;
        violations += usize::from(!map_lp.is_finite());
        let sampled = bayescpd::changepoint_marginals(&draws, 2000);
        let exact = post.exact_marginals()?;
        violations += sampled
            .iter()
            .chain(&exact)
            .filter(|p| !p.is_finite() || **p < 0.0 || **p > 1.0 + 1e-12)
            .count();
        Ok(violations)
    };
    match run() {
        Ok(0) => Verdict::new(
            true,
            "n=2000, k_max=20: forward, 100 draws, MAP, marginals with no NaN/inf",
        ),
        Ok(v) => Verdict::new(false, format!("{v} NaN/inf/range violations")),
        Err(e) => Verdict::new(false, format!("pipeline error: {e}")),
    }
}

pub fn property_suites(seed: u64) -> Verdict {
    let mut results = props::run_all(seed, props::ACCEPTANCE_CASES);
    results.extend(cli_props::run_all(seed, props::ACCEPTANCE_CASES));
    let failed: Vec<&(String, Result<(), String>)> =
        results.iter().filter(|(_, r)| r.is_err()).collect();
    for (name, result) in &results {
        if let Err(e) = result {
            println!("    property {name}: FAIL {e}");
        }
    }
    match failed.first() {
        None => Verdict::new(
            true,
            format!(
                "{} properties, at least {} cases each",
                results.len(),
                props::ACCEPTANCE_CASES
            ),
        ),
        Some((name, _)) => Verdict::new(
            false,
            format!(
                "{} of {} properties failed; first: {name}",
                failed.len(),
                results.len()
            ),
        ),
    }
}

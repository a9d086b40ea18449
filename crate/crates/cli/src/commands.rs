// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

use bayescpd::eb::MIN_SINGLE_SEQUENCE_LEN;
use bayescpd::simulate::{Scenario, SegmentCount, SimSpec};
use bayescpd::{
    changepoint_marginals, default_hyperparams, mcem_fit, posterior_position_summary, simulate,
    Hyperparams, McemConfig, McemFit, McemStatus, ObservedSequence, Posterior, SegPrior, Variant,
};
use serde::Serialize;

use crate::args::{
    Format, McemArgs, ModelArgs, ScenarioArg, SegmentArgs, SimulateArgs, ThetaSource,
};
use crate::error::{CliError, Result};
use crate::ingest::{load_sequence, read_tracks};
use crate::output::{emit, logs, num, to_csv, to_json, Log};

const DEFAULT_KMAX: usize = 20;

fn model_name(v: Variant) -> &'static str {
    match v {
        Variant::IidNormal => "iid",
        Variant::Ar1 => "ar1",
    }
}

/// Data-dependent prior for one track. For AR(1) the location is that of
/// the autoregressive coefficient, so it starts at zero.
fn auto_theta(track: &[Option<f64>], variant: Variant) -> Result<Hyperparams> {
    let theta = default_hyperparams(track)?;
    Ok(match variant {
        Variant::IidNormal => theta,
        Variant::Ar1 => Hyperparams { mu0: 0.0, ..theta }.as_variant(Variant::Ar1),
    })
}

fn bounds(model: &ModelArgs, n: usize) -> Option<(usize, usize)> {
    (model.min_len.is_some() || model.max_len.is_some())
        .then(|| (model.min_len.unwrap_or(1), model.max_len.unwrap_or(n)))
}

fn load_training(paths: &[PathBuf], model: &ModelArgs) -> Result<Vec<ObservedSequence>> {
    if paths.is_empty() {
        return Err(CliError::config(
            "--theta mcem needs at least one --train file",
        ));
    }
    let seqs: Vec<ObservedSequence> = if model.concat {
        vec![load_sequence(paths, true)?]
    } else {
        paths
            .iter()
            .map(|p| Ok(ObservedSequence::new(read_tracks(p)?)?))
            .collect::<Result<_>>()?
    };
    Ok(if model.center {
        seqs.iter().map(ObservedSequence::centered).collect()
    } else {
        seqs
    })
}

#[derive(Debug, Serialize)]
pub struct Training {
    pub sequences: usize,
    /// True when the training data was a single short sequence and its
    /// default prior was used without fitting.
    pub fallback: bool,
    pub iterations: usize,
    pub status: Option<McemStatus>,
}

struct Fitted {
    theta: Hyperparams,
    fit: Option<McemFit>,
    sequences: usize,
}

fn fit_hyperparams(
    seqs: &[ObservedSequence],
    start: Option<Hyperparams>,
    variant: Variant,
    cfg: &McemConfig,
) -> Result<Fitted> {
    let pooled = bayescpd::eb::pooled_track(seqs)?;
    let init = match start {
        Some(t) => t.as_variant(variant),
        None => auto_theta(&pooled, variant)?,
    };
    if seqs.len() == 1 && seqs[0].len() < MIN_SINGLE_SEQUENCE_LEN {
        return Ok(Fitted {
            theta: init,
            fit: None,
            sequences: 1,
        });
    }
    let fit = mcem_fit(seqs, init, cfg)?;
    Ok(Fitted {
        theta: fit.theta,
        fit: Some(fit),
        sequences: seqs.len(),
    })
}

fn mcem_config(
    model: &ModelArgs,
    iterations: usize,
    stop_tol: Option<f64>,
    max_len: usize,
) -> McemConfig {
    McemConfig {
        iterations,
        samples_per_seq: model.samples,
        stop_tolerance: stop_tol,
        k_max: model.kmax.unwrap_or(DEFAULT_KMAX),
        bounds: bounds(model, max_len),
        seed: model.seed,
        ..McemConfig::default()
    }
}

/// Everything `segment` and `marginals` share.
struct Prepared {
    seq: ObservedSequence,
    variant: Variant,
    thetas: Vec<Hyperparams>,
    theta_source: &'static str,
    training: Option<Training>,
    posterior: Posterior,
}

fn prepare(args: &SegmentArgs) -> Result<Prepared> {
    let model = &args.model;
    let variant: Variant = model.model.into();
    if model.samples == 0 {
        return Err(CliError::config("--samples must be >= 1"));
    }
    if !args.train.is_empty() && args.theta != ThetaSource::Mcem {
        return Err(CliError::config("--train is only used with --theta mcem"));
    }
    let mut seq = load_sequence(&args.data, model.concat)?;
    if model.center {
        seq = seq.centered();
    }
    let n = seq.len();

    let (thetas, theta_source, training) = match args.theta {
        ThetaSource::Explicit(t) => (vec![t.as_variant(variant)], "explicit", None),
        ThetaSource::Auto => {
            let thetas = seq
                .tracks()
                .iter()
                .map(|t| auto_theta(t, variant))
                .collect::<Result<_>>()?;
            (thetas, "auto", None)
        }
        ThetaSource::Mcem => {
            let train = load_training(&args.train, model)?;
            let longest = train.iter().map(ObservedSequence::len).max().unwrap_or(1);
            let cfg = mcem_config(model, args.iterations, None, longest);
            let fitted = fit_hyperparams(&train, None, variant, &cfg)?;
            let training = Training {
                sequences: fitted.sequences,
                fallback: fitted.fit.is_none(),
                iterations: fitted.fit.as_ref().map_or(0, |f| f.iterations),
                status: fitted.fit.as_ref().map(|f| f.status),
            };
            (vec![fitted.theta], "mcem", Some(training))
        }
    };

    let k_max = model.kmax.unwrap_or(DEFAULT_KMAX.min(n));
    let prior = SegPrior::build(n, k_max, bounds(model, n))?;
    let posterior = Posterior::new(&seq, &thetas, prior)?;
    Ok(Prepared {
        seq,
        variant,
        thetas,
        theta_source,
        training,
        posterior,
    })
}

#[derive(Debug, Serialize)]
pub struct Map {
    pub changepoints: Vec<usize>,
    pub num_segments: usize,
    pub log_posterior: Log,
}

#[derive(Debug, Serialize)]
pub struct TrackSummary {
    pub mean_mu: Vec<f64>,
    pub mean_sigma_sq: Vec<Option<f64>>,
}

#[derive(Debug, Serialize)]
pub struct SegmentDoc {
    pub n: usize,
    pub tracks: usize,
    pub model: &'static str,
    pub k_max: usize,
    pub bounds: (usize, usize),
    pub seed: u64,
    pub num_samples: usize,
    pub theta_source: &'static str,
    pub thetas: Vec<Hyperparams>,
    pub training: Option<Training>,
    pub log_evidence: Log,
    /// `p(k | y)` for `k = 1..=k_max`.
    pub posterior_num_segments: Vec<f64>,
    pub map: Map,
    pub samples: Vec<Vec<usize>>,
    /// Probability of a changepoint after each of positions `1..n`.
    pub changepoint_marginals: Vec<f64>,
    /// One entry per track; null for AR(1).
    pub position_summary: Option<Vec<TrackSummary>>,
}

pub fn segment_doc(args: &SegmentArgs) -> Result<SegmentDoc> {
    let p = prepare(args)?;
    let post = &p.posterior;
    let n = p.seq.len();
    let draws = post.sample(args.model.samples, args.model.seed)?;
    let (map, map_lp) = post.map()?;
    let summary = match p.variant {
        Variant::IidNormal => Some(
            posterior_position_summary(&draws, &p.seq, &p.thetas)?
                .into_iter()
                .map(|s| TrackSummary {
                    mean_mu: s.mean_mu,
                    mean_sigma_sq: s.mean_sigma_sq,
                })
                .collect(),
        ),
        Variant::Ar1 => None,
    };
    Ok(SegmentDoc {
        n,
        tracks: p.seq.num_tracks(),
        model: model_name(p.variant),
        k_max: post.prior().k_max(),
        bounds: post.prior().bounds(),
        seed: args.model.seed,
        num_samples: draws.len(),
        theta_source: p.theta_source,
        thetas: p.thetas.clone(),
        training: p.training,
        log_evidence: Log(post.log_marginal_evidence()),
        posterior_num_segments: post
            .log_posterior_num_segments()?
            .iter()
            .map(|l| l.exp())
            .collect(),
        map: Map {
            changepoints: map.changepoints().to_vec(),
            num_segments: map.num_segments(),
            log_posterior: Log(map_lp),
        },
        changepoint_marginals: changepoint_marginals(&draws, n),
        samples: draws
            .samples
            .iter()
            .map(|s| s.changepoints().to_vec())
            .collect(),
        position_summary: summary,
    })
}

fn segment_csv(doc: &SegmentDoc) -> Vec<u8> {
    let replicas = doc.position_summary.as_ref().map_or(0, Vec::len);
    let mut header = vec!["position".to_string(), "changepoint_marginal".to_string()];
    for r in 1..=replicas {
        let suffix = if replicas == 1 {
            String::new()
        } else {
            format!("_{r}")
        };
        header.push(format!("mean_mu{suffix}"));
        header.push(format!("mean_sigma_sq{suffix}"));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..doc.n).map(|i| {
        let mut row = vec![
            Some((i + 1).to_string()),
            doc.changepoint_marginals.get(i).and_then(|&v| num(v)),
        ];
        for s in doc.position_summary.iter().flatten() {
            row.push(num(s.mean_mu[i]));
            row.push(s.mean_sigma_sq[i].and_then(num));
        }
        row
    });
    to_csv(&header, rows)
}

pub fn cmd_segment(args: &SegmentArgs) -> Result<()> {
    let doc = segment_doc(args)?;
    let bytes = match args.output.format {
        Format::Json => to_json(&doc),
        Format::Csv => segment_csv(&doc),
    };
    emit(args.output.out.as_deref(), &bytes)
}

#[derive(Debug, Serialize)]
pub struct MarginalsDoc {
    pub n: usize,
    pub tracks: usize,
    pub model: &'static str,
    pub k_max: usize,
    pub bounds: (usize, usize),
    pub seed: u64,
    pub num_samples: usize,
    pub theta_source: &'static str,
    pub thetas: Vec<Hyperparams>,
    pub training: Option<Training>,
    pub sampled: Vec<f64>,
    pub exact: Vec<f64>,
}

pub fn marginals_doc(args: &SegmentArgs) -> Result<MarginalsDoc> {
    let p = prepare(args)?;
    let post = &p.posterior;
    let n = p.seq.len();
    let draws = post.sample(args.model.samples, args.model.seed)?;
    Ok(MarginalsDoc {
        n,
        tracks: p.seq.num_tracks(),
        model: model_name(p.variant),
        k_max: post.prior().k_max(),
        bounds: post.prior().bounds(),
        seed: args.model.seed,
        num_samples: draws.len(),
        theta_source: p.theta_source,
        thetas: p.thetas.clone(),
        training: p.training,
        sampled: changepoint_marginals(&draws, n),
        exact: post.exact_marginals()?,
    })
}

pub fn cmd_marginals(args: &SegmentArgs) -> Result<()> {
    let doc = marginals_doc(args)?;
    let bytes = match args.output.format {
        Format::Json => to_json(&doc),
        Format::Csv => to_csv(
            &["position", "sampled", "exact"],
            doc.sampled
                .iter()
                .zip(&doc.exact)
                .enumerate()
                .map(|(i, (&s, &e))| vec![Some((i + 1).to_string()), num(s), num(e)]),
        ),
    };
    emit(args.output.out.as_deref(), &bytes)
}

#[derive(Debug, Serialize)]
pub struct McemDoc {
    pub model: &'static str,
    pub sequences: usize,
    pub seed: u64,
    pub samples_per_sequence: usize,
    pub theta: Hyperparams,
    pub fallback: bool,
    /// Total log evidence at the start and after each iteration.
    pub trace: Vec<Log>,
    pub objective_trace: Vec<Log>,
    pub objective_se: Vec<f64>,
    pub iterations: usize,
    pub status: Option<McemStatus>,
}

pub fn mcem_doc(args: &McemArgs) -> Result<McemDoc> {
    let model = &args.model;
    let variant: Variant = model.model.into();
    let train = load_training(&args.train, model)?;
    let longest = train.iter().map(ObservedSequence::len).max().unwrap_or(1);
    let cfg = mcem_config(model, args.iterations, args.stop_tol, longest);
    let fitted = fit_hyperparams(&train, args.theta, variant, &cfg)?;
    let fit = fitted.fit.as_ref();
    Ok(McemDoc {
        model: model_name(variant),
        sequences: fitted.sequences,
        seed: model.seed,
        samples_per_sequence: model.samples,
        theta: fitted.theta,
        fallback: fit.is_none(),
        trace: fit.map_or_else(Vec::new, |f| logs(&f.trace)),
        objective_trace: fit.map_or_else(Vec::new, |f| logs(&f.objective_trace)),
        objective_se: fit.map_or_else(Vec::new, |f| f.objective_se.clone()),
        iterations: fit.map_or(0, |f| f.iterations),
        status: fit.map(|f| f.status),
    })
}

pub fn cmd_mcem(args: &McemArgs) -> Result<()> {
    let doc = mcem_doc(args)?;
    let bytes = match args.output.format {
        Format::Json => to_json(&doc),
        Format::Csv => to_csv(
            &["iteration", "log_evidence", "objective", "objective_se"],
            doc.trace.iter().enumerate().map(|(i, l)| {
                let later = |v: Option<f64>| if i == 0 { None } else { v.and_then(num) };
                vec![
                    Some(i.to_string()),
                    num(l.0),
                    later(doc.objective_trace.get(i.wrapping_sub(1)).map(|o| o.0)),
                    later(doc.objective_se.get(i.wrapping_sub(1)).copied()),
                ]
            }),
        ),
    };
    emit(args.output.out.as_deref(), &bytes)
}

#[derive(Debug, Serialize)]
pub struct Truth {
    pub n: usize,
    pub seed: u64,
    pub spec: SimSpec,
    /// Segment end positions, the last being `n`.
    pub changepoints: Vec<usize>,
    /// `(μ, σ²)` of each segment.
    pub params: Vec<(f64, f64)>,
}

pub fn sim_spec(args: &SimulateArgs) -> Result<SimSpec> {
    let n = args.n.unwrap_or(400);
    let mut spec = match args.scenario {
        ScenarioArg::Hierarchical => {
            let segments = match (args.segments, args.kmax) {
                (Some(k), _) => SegmentCount::Fixed(k),
                (None, Some(k)) => SegmentCount::Uniform(k),
                (None, None) => SegmentCount::Uniform(DEFAULT_KMAX.min(n)),
            };
            SimSpec::hierarchical(n, segments, args.theta, args.seed)
        }
        ScenarioArg::SingleCp => SimSpec::single_changepoint(n, args.mu, args.sigma, args.seed),
        ScenarioArg::GapStudy => {
            if args.n.is_some() {
                return Err(CliError::config(
                    "gap-study fixes its own length; use --gap-len",
                ));
            }
            SimSpec::gap_study(args.gap_len, args.seed)
        }
    };
    if args.scenario != ScenarioArg::Hierarchical
        && (args.segments.is_some() || args.kmax.is_some())
    {
        return Err(CliError::config(
            "--segments and --kmax apply to the hierarchical scenario only",
        ));
    }
    if !matches!(spec.scenario, Scenario::GapStudy { .. }) && args.gap_len != 0 {
        return Err(CliError::config(
            "--gap-len applies to the gap-study scenario only",
        ));
    }
    spec.gaps = args.gap.clone();
    Ok(spec)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let spec = sim_spec(args)?;
    let sim = simulate(&spec)?;
    let csv = to_csv(
        &["y"],
        sim.sequence.track(0).iter().map(|v| vec![v.and_then(num)]),
    );
    if let Some(path) = &args.truth {
        let truth = Truth {
            n: sim.sequence.len(),
            seed: spec.seed,
            changepoints: sim.truth.changepoints().to_vec(),
            params: sim.params.clone(),
            spec,
        };
        emit(Some(path), &to_json(&truth))?;
    }
    emit(args.out.as_deref(), &csv)
}

pub fn run(cli: &crate::args::Cli) -> Result<()> {
    use crate::args::Command;
    match &cli.command {
        Command::Segment(a) => cmd_segment(a),
        Command::Marginals(a) => cmd_marginals(a),
        Command::Mcem(a) => cmd_mcem(a),
        Command::Simulate(a) => cmd_simulate(a),
    }
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line invariants as seeded property checks. Shared by the
//! `cli_properties` test target and the acceptance gate.

#![allow(dead_code)]

use std::path::Path;

use bayescpd::simulate::derive_seed;
use bayescpd_cli::args::{Cli, Command};
use bayescpd_cli::commands::{cmd_simulate, marginals_doc, segment_doc};
use bayescpd_cli::ingest::read_tracks;
use clap::Parser;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use serde_json::Value;

pub type Property = fn(u64, u32) -> Result<(), String>;

pub const ALL: [(&str, Property); 2] = [
    ("simulated_output_round_trips", simulated_output_round_trips),
    ("documents_match_schema", documents_match_schema),
];

pub fn run_all(seed: u64, cases: u32) -> Vec<(String, Result<(), String>)> {
    ALL.iter()
        .enumerate()
        .map(|(idx, (name, prop))| {
            (
                name.to_string(),
                prop(derive_seed(seed ^ 0xC11, idx as u64), cases),
            )
        })
        .collect()
}

fn runner(seed: u64, cases: u32) -> TestRunner {
    let mut bytes = [0u8; 32];
    for (chunk, idx) in bytes.chunks_mut(8).zip(0u64..) {
        chunk.copy_from_slice(&derive_seed(seed, idx).to_le_bytes());
    }
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &bytes))
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if ok {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn fail(e: impl std::fmt::Display) -> TestCaseError {
    TestCaseError::fail(e.to_string())
}

fn parse(args: &[String]) -> Result<Command, TestCaseError> {
    let argv = std::iter::once("bayescpd".to_string()).chain(args.iter().cloned());
    Cli::try_parse_from(argv).map(|c| c.command).map_err(fail)
}

/// Hierarchical simulation settings: length, segment cap, optional gap.
#[derive(Clone, Debug)]
pub struct SimCase {
    n: usize,
    k_max: usize,
    gap: Option<(usize, usize)>,
    seed: u64,
}

impl SimCase {
    fn args(&self, dir: &Path) -> Vec<String> {
        let mut args = vec![
            "simulate".into(),
            "--n".into(),
            self.n.to_string(),
            "--kmax".into(),
            self.k_max.to_string(),
            "--seed".into(),
            self.seed.to_string(),
            "--out".into(),
            dir.join("data.csv").display().to_string(),
            "--truth".into(),
            dir.join("truth.json").display().to_string(),
        ];
        if let Some((a, b)) = self.gap {
            args.extend(["--gap".into(), format!("{a}-{b}")]);
        }
        args
    }
}

fn sim_case() -> impl Strategy<Value = SimCase> {
    (3usize..=60, 1usize..=5, any::<u64>(), any::<bool>())
        .prop_flat_map(|(n, k_max, seed, gapped)| {
            let gap = if gapped {
                (1..=n - 2)
                    .prop_flat_map(move |a| (Just(a), a..=(a + n / 3).min(n - 2)))
                    .prop_map(Some)
                    .boxed()
            } else {
                Just(None).boxed()
            };
            (Just(n), Just(k_max.min(n)), gap, Just(seed))
        })
        .prop_map(|(n, k_max, gap, seed)| SimCase {
            n,
            k_max,
            gap,
            seed,
        })
}

fn simulate_into(case: &SimCase, dir: &Path) -> Result<Value, TestCaseError> {
    let Command::Simulate(args) = parse(&case.args(dir))? else {
        unreachable!()
    };
    cmd_simulate(&args).map_err(fail)?;
    let text = std::fs::read_to_string(dir.join("truth.json")).map_err(fail)?;
    serde_json::from_str(&text).map_err(fail)
}

pub fn simulated_output_round_trips(seed: u64, cases: u32) -> Result<(), String> {
    runner(seed, cases)
        .run(&sim_case(), |case| {
            let dir = tempfile::tempdir().map_err(fail)?;
            let truth = simulate_into(&case, dir.path())?;
            let tracks = read_tracks(&dir.path().join("data.csv")).map_err(fail)?;
            check(tracks.len() == 1 && tracks[0].len() == case.n, || {
                format!("{} rows", tracks[0].len())
            })?;
            let missing: Vec<usize> = (1..=case.n)
                .filter(|&i| tracks[0][i - 1].is_none())
                .collect();
            let want: Vec<usize> = case.gap.map_or_else(Vec::new, |(a, b)| (a..=b).collect());
            check(missing == want, || {
                format!("missing {missing:?}, want {want:?}")
            })?;
            let cps: Vec<u64> = truth["changepoints"]
                .as_array()
                .ok_or_else(|| fail("no changepoints"))?
                .iter()
                .filter_map(Value::as_u64)
                .collect();
            check(truth["n"] == case.n, || "n mismatch".into())?;
            check(cps.last() == Some(&(case.n as u64)), || format!("{cps:?}"))?;
            check(cps[0] >= 1 && cps.windows(2).all(|w| w[0] < w[1]), || {
                format!("{cps:?}")
            })?;
            check(cps.len() <= case.k_max, || {
                format!("{} segments > {}", cps.len(), case.k_max)
            })
        })
        .map_err(|e| e.to_string())
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("schema/{name}.schema.json"));
    let text = std::fs::read_to_string(path).expect("schema file");
    jsonschema::validator_for(&serde_json::from_str(&text).expect("schema JSON"))
        .expect("schema compiles")
}

fn validate(validator: &jsonschema::Validator, doc: &Value) -> Result<(), TestCaseError> {
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| e.to_string()).collect();
    check(errors.is_empty(), || format!("{errors:?}"))
}

fn probabilities_in_unit_interval(v: &Value) -> Result<(), TestCaseError> {
    for p in v.as_array().into_iter().flatten() {
        let p = p.as_f64().ok_or_else(|| fail("non-numeric probability"))?;
        check((0.0..=1.0).contains(&p), || format!("probability {p}"))?;
    }
    Ok(())
}

pub fn documents_match_schema(seed: u64, cases: u32) -> Result<(), String> {
    let segment = schema("segment");
    let marginals = schema("marginals");
    let strategy = (
        sim_case(),
        1usize..=6,
        any::<bool>(),
        any::<bool>(),
        1usize..=30,
    );
    runner(seed, cases)
        .run(&strategy, |(case, k_max, ar1, bounded, samples)| {
            let dir = tempfile::tempdir().map_err(fail)?;
            simulate_into(&case, dir.path())?;
            let mut args = vec![
                "segment".to_string(),
                "--data".into(),
                dir.path().join("data.csv").display().to_string(),
                "--kmax".into(),
                k_max.min(case.n).to_string(),
                "--samples".into(),
                samples.to_string(),
                "--seed".into(),
                case.seed.to_string(),
            ];
            if ar1 {
                args.extend(["--model".into(), "ar1".into(), "--center".into()]);
            }
            if bounded {
                args.extend([
                    "--max-len".into(),
                    case.n.to_string(),
                    "--min-len".into(),
                    "1".into(),
                ]);
            }
            let Command::Segment(seg_args) = parse(&args)? else {
                unreachable!()
            };
            let doc = serde_json::to_value(segment_doc(&seg_args).map_err(fail)?).map_err(fail)?;
            validate(&segment, &doc)?;
            probabilities_in_unit_interval(&doc["posterior_num_segments"])?;
            probabilities_in_unit_interval(&doc["changepoint_marginals"])?;
            let doc =
                serde_json::to_value(marginals_doc(&seg_args).map_err(fail)?).map_err(fail)?;
            validate(&marginals, &doc)?;
            probabilities_in_unit_interval(&doc["sampled"])?;
            probabilities_in_unit_interval(&doc["exact"])
        })
        .map_err(|e| e.to_string())
}

//! Pipeline stages behind the subcommands: corpus generation, detection
//! reports, attacks, the benchmark grid, and trade-off surface dumps.
//!
//! Every stage is deterministic given the config seeds. Trials run in
//! parallel but collect in trial order, so output files are byte-stable.
//! The one exception is timings.json, which is wall-clock and lives in its
//! own file precisely so the metric files can be compared byte-for-byte.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use morphmark::detect::decide;
use morphmark::partition::golden_vector;
use morphmark::textgen::GenerationTrace;
use morphmark::{
    build_lm, delete, objective, optimal_r, paraphrase, roc_metrics, score_sequence, substitute,
    AttackKind, AttackSpec, GoldenVector, KgwConfig, ParaphraseEndpoint, QualityMetric, SplitMix64,
    SyntheticLM, TradeoffQuery, WatermarkMethod,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Method, DEFAULT_KGW_DELTA};
use crate::CliError;

/// One line of a trace file. `pg` and `r` describe generation and are
/// dropped by attacks; `r` is only present for adaptive watermarking; `z` is
/// absent when the sequence is too short to score.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceRecord {
    pub tokens: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pg: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    Ok(BufWriter::new(
        fs::File::create(path).map_err(|e| io_err(path, e))?,
    ))
}

fn read_trace_file(path: &Path) -> Result<Vec<TraceRecord>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: TraceRecord = serde_json::from_str(line)
            .map_err(|e| CliError::Io(format!("{}:{}: bad trace record: {e}", path.display(), i + 1)))?;
        records.push(record);
    }
    Ok(records)
}

/// Generate `count` sequences for trials `first_trial..first_trial+count`.
/// Each trial owns an RNG stream seeded by `rng_seed + trial`, which feeds
/// the prompt draw and then the generation seed, so corpora with different
/// methods stay token-aligned per trial until the watermark diverges them.
fn make_corpus(
    config: &ExperimentConfig,
    lm: &SyntheticLM,
    method: &WatermarkMethod,
    first_trial: usize,
    count: usize,
) -> Vec<GenerationTrace> {
    let gen = &config.generation;
    let vocab = config.lm.vocab_size as u64;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let trial = (first_trial + i) as u64;
            let mut stream = SplitMix64::new(gen.rng_seed.wrapping_add(trial));
            let prompt: Vec<u32> = (0..gen.prompt_length)
                .map(|_| stream.range(vocab) as u32)
                .collect();
            morphmark::generate_with(
                lm,
                &prompt,
                gen.length,
                config.watermark.key,
                config.watermark.gamma,
                method,
                &config.sampler,
                stream.next_u64(),
            )
        })
        .collect()
}

fn trace_z(config: &ExperimentConfig, tokens: &[u32]) -> f64 {
    score_sequence(
        tokens,
        config.watermark.key,
        config.watermark.gamma,
        config.lm.vocab_size,
    )
    .expect("validated length >= 2")
    .z
}

pub fn run_generate(config: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let lm = build_lm(
        config.lm.vocab_size,
        config.lm.order,
        config.lm.entropy_param,
        config.lm.seed,
    );
    let method = config.watermark_method();
    let adaptive = matches!(method, WatermarkMethod::MorphMark(_));
    let corpus = make_corpus(config, &lm, &method, 0, config.generation.num_sequences);

    let mut w = create(out)?;
    for trace in corpus {
        let record = TraceRecord {
            z: Some(trace_z(config, &trace.tokens)),
            tokens: trace.tokens,
            pg: Some(trace.pg_per_step),
            r: adaptive.then_some(trace.r_per_step),
        };
        let line = serde_json::to_string(&record).expect("trace records serialize");
        writeln!(w, "{line}").map_err(|e| io_err(out, e))?;
    }
    w.flush().map_err(|e| io_err(out, e))
}

pub fn run_detect(
    trace_path: &Path,
    out: &Path,
    key: u64,
    gamma: f64,
    vocab_size: usize,
    threshold: f64,
    condition: &str,
) -> Result<(), CliError> {
    let records = read_trace_file(trace_path)?;
    let mut w = create(out)?;
    writeln!(w, "id,condition,green_count,scored,z,decision").map_err(|e| io_err(out, e))?;
    for (i, record) in records.iter().enumerate() {
        let report = score_sequence(&record.tokens, key, gamma, vocab_size).map_err(|e| {
            CliError::Io(format!("{}:{}: {e}", trace_path.display(), i + 1))
        })?;
        writeln!(
            w,
            "{i},{condition},{},{},{},{}",
            report.green_count,
            report.total_scored,
            report.z,
            decide(&report, threshold)
        )
        .map_err(|e| io_err(out, e))?;
    }
    w.flush().map_err(|e| io_err(out, e))
}

fn apply_attack(
    tokens: &[u32],
    spec: &AttackSpec,
    trial: usize,
    vocab_size: usize,
    endpoint: Option<&ParaphraseEndpoint>,
) -> Result<Vec<u32>, CliError> {
    let seed = spec.rng_seed.wrapping_add(trial as u64);
    match spec.kind {
        AttackKind::Substitute => Ok(substitute(tokens, spec.rate, seed, vocab_size)),
        AttackKind::Delete => Ok(delete(tokens, spec.rate, seed)),
        AttackKind::Paraphrase => {
            let endpoint = endpoint.ok_or_else(|| {
                CliError::Config("paraphrase attack needs an endpoint".to_string())
            })?;
            paraphrase(tokens, endpoint).map_err(|e| CliError::AttackUnavailable(e.to_string()))
        }
    }
}

pub fn run_attack(
    trace_path: &Path,
    out: &Path,
    spec: &AttackSpec,
    vocab_size: usize,
    key: u64,
    gamma: f64,
    endpoint: Option<&ParaphraseEndpoint>,
) -> Result<(), CliError> {
    let records = read_trace_file(trace_path)?;
    let mut w = create(out)?;
    for (i, record) in records.iter().enumerate() {
        if let Some(&t) = record.tokens.iter().find(|&&t| t as usize >= vocab_size) {
            return Err(CliError::Io(format!(
                "{}:{}: token {t} out of range for vocab {vocab_size}",
                trace_path.display(),
                i + 1
            )));
        }
        let attacked = apply_attack(&record.tokens, spec, i, vocab_size, endpoint)?;
        let record = TraceRecord {
            z: score_sequence(&attacked, key, gamma, vocab_size)
                .ok()
                .map(|r| r.z),
            tokens: attacked,
            pg: None,
            r: None,
        };
        let line = serde_json::to_string(&record).expect("trace records serialize");
        writeln!(w, "{line}").map_err(|e| io_err(out, e))?;
    }
    w.flush().map_err(|e| io_err(out, e))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellMetrics {
    /// (fpr level, tpr at that level) pairs.
    pub tpr_at_fpr: Vec<(f64, f64)>,
    pub best_f1: f64,
    pub auroc: f64,
    pub mean_z: f64,
    /// Generation-side distortion; identical across attack cells of a method.
    pub mean_kl_per_token: f64,
    pub num_sequences: usize,
}

#[derive(Serialize)]
struct Timing {
    generation_s_per_800_tokens: f64,
    detection_ms_per_800_tokens: f64,
}

fn attack_label(spec: &AttackSpec) -> String {
    match spec.kind {
        AttackKind::Substitute => format!("substitute@{}", spec.rate),
        AttackKind::Delete => format!("delete@{}", spec.rate),
        AttackKind::Paraphrase => "paraphrase".to_string(),
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn mean_kl_per_token(corpus: &[GenerationTrace]) -> f64 {
    let (sum, steps) = corpus.iter().fold((0.0, 0usize), |(s, n), t| {
        (s + t.kl_per_step.iter().sum::<f64>(), n + t.kl_per_step.len())
    });
    if steps == 0 {
        0.0
    } else {
        sum / steps as f64
    }
}

/// The benchmark grid: the configured method plus a kgw baseline (when the
/// config is not already kgw), crossed with no-attack and every configured
/// attack, all scored against one shared clean corpus.
pub fn run_benchmark(config: &ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    let n = config.generation.num_sequences;
    if n == 0 {
        return Err(CliError::Config(
            "generation.num_sequences: benchmark needs at least 1".to_string(),
        ));
    }
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let lm = build_lm(
        config.lm.vocab_size,
        config.lm.order,
        config.lm.entropy_param,
        config.lm.seed,
    );
    let vocab = config.lm.vocab_size;
    let tokens_generated = (n * config.generation.length) as f64;
    let per800_s = |elapsed: f64| elapsed * 800.0 / tokens_generated;

    let kgw = WatermarkMethod::Kgw(KgwConfig {
        delta: config.watermark.delta.unwrap_or(DEFAULT_KGW_DELTA),
    });
    let method_cells: Vec<(&str, WatermarkMethod)> = match config.watermark.method {
        Method::Morphmark => vec![("morphmark", config.watermark_method()), ("kgw", kgw)],
        Method::Kgw => vec![("kgw", kgw)],
        Method::None => vec![("none", WatermarkMethod::None)],
    };

    let mut metrics: BTreeMap<String, CellMetrics> = BTreeMap::new();
    let mut timings: BTreeMap<String, Timing> = BTreeMap::new();
    let mut score_rows: Vec<(usize, String, f64)> = Vec::new();

    // Clean corpus on trials n..2n, shared by every cell as the null side.
    let t0 = Instant::now();
    let clean = make_corpus(config, &lm, &WatermarkMethod::None, n, n);
    let clean_gen = t0.elapsed().as_secs_f64();
    let t0 = Instant::now();
    let clean_z: Vec<f64> = clean.iter().map(|t| trace_z(config, &t.tokens)).collect();
    let clean_det = t0.elapsed().as_secs_f64();
    timings.insert(
        "clean".to_string(),
        Timing {
            generation_s_per_800_tokens: per800_s(clean_gen),
            detection_ms_per_800_tokens: per800_s(clean_det) * 1e3,
        },
    );
    for (trial, &z) in clean_z.iter().enumerate() {
        score_rows.push((n + trial, "clean".to_string(), z));
    }

    for (method_name, method) in &method_cells {
        let t0 = Instant::now();
        let corpus = make_corpus(config, &lm, method, 0, n);
        let gen_elapsed = t0.elapsed().as_secs_f64();
        let t0 = Instant::now();
        let base_z: Vec<f64> = corpus.iter().map(|t| trace_z(config, &t.tokens)).collect();
        let det_elapsed = t0.elapsed().as_secs_f64();
        timings.insert(
            method_name.to_string(),
            Timing {
                generation_s_per_800_tokens: per800_s(gen_elapsed),
                detection_ms_per_800_tokens: per800_s(det_elapsed) * 1e3,
            },
        );
        let distortion = mean_kl_per_token(&corpus);

        let mut cells: Vec<(String, Option<&AttackSpec>)> = vec![("none".to_string(), None)];
        for spec in &config.attacks {
            cells.push((attack_label(spec), Some(spec)));
        }
        for (attack_name, spec) in cells {
            let cell_z: Vec<f64> = match spec {
                None => base_z.clone(),
                Some(spec) => {
                    let mut zs = Vec::with_capacity(n);
                    for (trial, trace) in corpus.iter().enumerate() {
                        let attacked = apply_attack(
                            &trace.tokens,
                            spec,
                            trial,
                            vocab,
                            config.paraphrase_endpoint.as_ref(),
                        )?;
                        zs.push(trace_z(config, &attacked));
                    }
                    zs
                }
            };
            let roc = roc_metrics(&cell_z, &clean_z, &config.metrics.fpr_levels);
            let label = format!("{method_name}:{attack_name}");
            for (trial, &z) in cell_z.iter().enumerate() {
                score_rows.push((trial, label.clone(), z));
            }
            metrics.insert(
                label,
                CellMetrics {
                    tpr_at_fpr: roc.tpr_at_fpr,
                    best_f1: roc.best_f1,
                    auroc: roc.auroc,
                    mean_z: mean(&cell_z),
                    mean_kl_per_token: distortion,
                    num_sequences: n,
                },
            );
        }
    }

    let metrics_path = out_dir.join("metrics.json");
    let mut w = create(&metrics_path)?;
    let body = serde_json::to_string_pretty(&metrics).expect("metrics serialize");
    writeln!(w, "{body}").map_err(|e| io_err(&metrics_path, e))?;
    w.flush().map_err(|e| io_err(&metrics_path, e))?;

    let scores_path = out_dir.join("scores.csv");
    let mut w = create(&scores_path)?;
    writeln!(w, "trial_id,condition,z").map_err(|e| io_err(&scores_path, e))?;
    for (trial, condition, z) in score_rows {
        writeln!(w, "{trial},{condition},{z}").map_err(|e| io_err(&scores_path, e))?;
    }
    w.flush().map_err(|e| io_err(&scores_path, e))?;

    let timings_path = out_dir.join("timings.json");
    let mut w = create(&timings_path)?;
    let body = serde_json::to_string_pretty(&timings).expect("timings serialize");
    writeln!(w, "{body}").map_err(|e| io_err(&timings_path, e))?;
    w.flush().map_err(|e| io_err(&timings_path, e))
}

/// Dump the trade-off surface: F (and its parts) on an r grid per (pg, ω),
/// with the bisection optimum appended as the `is_optimal` row.
pub fn run_analyze(
    omegas: &[f64],
    pgs: &[f64],
    metric: QualityMetric,
    out: &Path,
) -> Result<(), CliError> {
    if omegas.is_empty() || pgs.is_empty() {
        return Err(CliError::Config("analyze needs non-empty grids".to_string()));
    }
    if let Some(bad) = omegas.iter().find(|&&w| !(w > 0.0 && w.is_finite())) {
        return Err(CliError::Config(format!("omega {bad} must be positive")));
    }
    if let Some(bad) = pgs.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
        return Err(CliError::Config(format!("pg {bad} must be inside (0, 1)")));
    }
    let metric_name = match metric {
        QualityMetric::Bc => "bc",
        QualityMetric::Kl => "kl",
    };
    let mut w = create(out)?;
    writeln!(w, "pg,omega,metric,r,t_value,w_value,f_value,s_value,is_optimal")
        .map_err(|e| io_err(out, e))?;
    let row = |w: &mut BufWriter<fs::File>, pg: f64, omega: f64, r: f64, optimal: bool| {
        let point = objective(&TradeoffQuery {
            pg,
            r,
            omega,
            quality_metric: metric,
        });
        writeln!(
            w,
            "{pg},{omega},{metric_name},{r},{},{},{},{},{optimal}",
            point.t_value, point.w_value, point.f_value, point.s_value
        )
        .map_err(|e| io_err(out, e))
    };
    for &omega in omegas {
        for &pg in pgs {
            for i in 1..=49 {
                row(&mut w, pg, omega, 0.02 * i as f64, false)?;
            }
            row(&mut w, pg, omega, optimal_r(pg, omega, metric, 1e-12), true)?;
        }
    }
    w.flush().map_err(|e| io_err(out, e))
}

/// Reference partition vectors for cross-implementation checks.
pub fn golden_cases() -> Vec<GoldenVector> {
    let cases: [(u64, u32, usize, f64); 8] = [
        (0x9e3779b97f4a7c15, 0, 1000, 0.5),
        (42, 0, 1000, 0.5),
        (42, 1, 1000, 0.5),
        (42, 999, 1000, 0.25),
        (0xdeadbeef, 7, 50000, 0.5),
        (0xdeadbeef, 7, 50000, 0.25),
        (1, 123456, 32, 0.5),
        (u64::MAX, u32::MAX, 4096, 0.5),
    ];
    cases
        .iter()
        .map(|&(key, prev, vocab, gamma)| golden_vector(key, prev, vocab, gamma))
        .collect()
}

pub fn emit_goldens(out: &Path) -> Result<(), CliError> {
    let body = serde_json::to_string_pretty(&golden_cases()).expect("goldens serialize");
    let mut w = create(out)?;
    writeln!(w, "{body}").map_err(|e| io_err(out, e))?;
    w.flush().map_err(|e| io_err(out, e))
}

//! `morphmark`: experiment runner for the green/red-list watermarking
//! toolkit. Subcommands cover corpus generation, detection, attacks, the
//! benchmark grid, trade-off surface dumps, and golden-vector emission.
//!
//! Exit codes: 0 success, 2 config error, 3 i/o error, 4 remote attack
//! unavailable.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use morphmark::detect::DEFAULT_Z_THRESHOLD;
use morphmark::{AttackKind, AttackSpec, ParaphraseEndpoint, PolicyKind, QualityMetric};
use morphmark_cli::config::{ExperimentConfig, Method, Overrides};
use morphmark_cli::{runner, CliError};

#[derive(Parser)]
#[command(name = "morphmark", version, about = "Green/red-list watermark experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Linear,
    Exp,
    Log,
    Fixed,
}

impl From<PolicyArg> for PolicyKind {
    fn from(arg: PolicyArg) -> Self {
        match arg {
            PolicyArg::Linear => PolicyKind::Linear,
            PolicyArg::Exp => PolicyKind::Exp,
            PolicyArg::Log => PolicyKind::Log,
            PolicyArg::Fixed => PolicyKind::Fixed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Bc,
    Kl,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Substitute,
    Delete,
    Paraphrase,
}

impl From<KindArg> for AttackKind {
    fn from(arg: KindArg) -> Self {
        match arg {
            KindArg::Substitute => AttackKind::Substitute,
            KindArg::Delete => AttackKind::Delete,
            KindArg::Paraphrase => AttackKind::Paraphrase,
        }
    }
}

/// Config fields that can be overridden from the command line.
#[derive(Args)]
struct OverrideArgs {
    /// Override generation.rng_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override watermark.method.
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Replace the strength policy with this kind's stock constants.
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    /// Override the policy growth rate k.
    #[arg(long)]
    k: Option<f64>,
    /// Override the policy threshold p0.
    #[arg(long)]
    p0: Option<f64>,
    /// Override the fixed policy strength.
    #[arg(long)]
    fixed_r: Option<f64>,
    /// Override watermark.gamma.
    #[arg(long)]
    gamma: Option<f64>,
    /// Override watermark.delta (kgw boost).
    #[arg(long)]
    delta: Option<f64>,
    /// Replace metrics.fpr_levels with this single level.
    #[arg(long)]
    fpr: Option<f64>,
}

impl OverrideArgs {
    fn to_overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            method: self.method,
            policy: self.policy.map(PolicyKind::from),
            k: self.k,
            p0: self.p0,
            fixed_r: self.fixed_r,
            gamma: self.gamma,
            delta: self.delta,
            fpr: self.fpr,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a corpus as a JSON-lines trace file.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Score a trace file against a key and write a detection CSV.
    Detect {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        key: u64,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long)]
        vocab_size: usize,
        #[arg(long, default_value_t = DEFAULT_Z_THRESHOLD)]
        threshold: f64,
        /// Label copied into the CSV's condition column.
        #[arg(long, default_value = "unlabeled")]
        condition: String,
    },
    /// Degrade a trace file with a token-level attack.
    Attack {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long, default_value_t = 0.3)]
        rate: f64,
        /// Attack RNG seed; sequence i uses seed + i.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        vocab_size: usize,
        /// Key used to re-score the attacked sequences.
        #[arg(long)]
        key: u64,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        /// Paraphrase endpoint URL (paraphrase kind only).
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long, default_value_t = 5000)]
        timeout_ms: u64,
        #[arg(long, default_value_t = 2)]
        retries: u32,
    },
    /// Run the benchmark grid: metrics.json, scores.csv, timings.json.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Dump the quality/effectiveness trade-off surface as CSV.
    Analyze {
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated ω list.
        #[arg(long, default_value = "0.2,0.4,1.0,5.0")]
        omega: String,
        /// Comma-separated pg list, or start:stop:step.
        #[arg(long, default_value = "0.05:0.95:0.05")]
        pg: String,
        #[arg(long, value_enum, default_value_t = MetricArg::Bc)]
        metric: MetricArg,
    },
    /// Emit the reference partition golden vectors as JSON.
    Goldens {
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_grid(text: &str, name: &str) -> Result<Vec<f64>, CliError> {
    let bad = |msg: String| CliError::Config(format!("--{name} {text:?}: {msg}"));
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("range syntax is start:stop:step".to_string()));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(e.to_string()))?;
        let (start, stop, step) = (nums[0], nums[1], nums[2]);
        if step.is_nan() || step <= 0.0 || stop < start {
            return Err(bad("need stop >= start and step > 0".to_string()));
        }
        let mut grid = Vec::new();
        let mut i = 0u32;
        loop {
            let v = start + step * i as f64;
            if v > stop + step * 1e-9 {
                break;
            }
            grid.push(v);
            i += 1;
        }
        Ok(grid)
    } else {
        text.split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| bad(e.to_string())))
            .collect()
    }
}

fn load_with_overrides(
    path: &std::path::Path,
    overrides: &OverrideArgs,
) -> Result<ExperimentConfig, CliError> {
    let mut config = ExperimentConfig::load(path)?;
    overrides.to_overrides().apply(&mut config);
    config.validate()?;
    Ok(config)
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Generate {
            config,
            out,
            overrides,
        } => runner::run_generate(&load_with_overrides(&config, &overrides)?, &out),
        Command::Detect {
            trace,
            out,
            key,
            gamma,
            vocab_size,
            threshold,
            condition,
        } => runner::run_detect(&trace, &out, key, gamma, vocab_size, threshold, &condition),
        Command::Attack {
            trace,
            out,
            kind,
            rate,
            seed,
            vocab_size,
            key,
            gamma,
            endpoint,
            timeout_ms,
            retries,
        } => {
            if !(0.0..=1.0).contains(&rate) {
                return Err(CliError::Config(format!("--rate {rate}: must be in [0, 1]")));
            }
            let kind = AttackKind::from(kind);
            if kind == AttackKind::Delete && rate >= 1.0 {
                return Err(CliError::Config("--rate: delete requires rate < 1".to_string()));
            }
            let spec = AttackSpec {
                kind,
                rate,
                rng_seed: seed,
            };
            let endpoint = endpoint.map(|url| ParaphraseEndpoint {
                url,
                timeout_ms,
                retries,
            });
            runner::run_attack(&trace, &out, &spec, vocab_size, key, gamma, endpoint.as_ref())
        }
        Command::Benchmark {
            config,
            out,
            overrides,
        } => runner::run_benchmark(&load_with_overrides(&config, &overrides)?, &out),
        Command::Analyze {
            out,
            omega,
            pg,
            metric,
        } => {
            let omegas = parse_grid(&omega, "omega")?;
            let pgs = parse_grid(&pg, "pg")?;
            let metric = match metric {
                MetricArg::Bc => QualityMetric::Bc,
                MetricArg::Kl => QualityMetric::Kl,
            };
            runner::run_analyze(&omegas, &pgs, metric, &out)
        }
        Command::Goldens { out } => runner::emit_goldens(&out),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

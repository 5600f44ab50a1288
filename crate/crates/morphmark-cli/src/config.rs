//! Experiment configuration: a versioned JSON schema covering the LM, the
//! sampler, the watermark, generation sizes, attacks, and metric levels.
//! Validation reports the offending field by path so config errors are
//! actionable from the shell.

use morphmark::{
    AttackKind, AttackSpec, KgwConfig, ParaphraseEndpoint, PolicyKind, SamplerConfig,
    StrengthPolicy, WatermarkMethod,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

pub const DEFAULT_KGW_DELTA: f64 = 1.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Morphmark,
    Kgw,
    None,
}

/// Sparse strength-policy spec: anything left out falls back to the stock
/// constants for the chosen kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_r: Option<f64>,
}

impl PolicySpec {
    pub fn of_kind(kind: PolicyKind) -> Self {
        PolicySpec {
            kind,
            k: None,
            p0: None,
            eps: None,
            fixed_r: None,
        }
    }

    pub fn lower(&self) -> StrengthPolicy {
        let mut policy = match self.kind {
            PolicyKind::Linear => StrengthPolicy::linear(),
            PolicyKind::Exp => StrengthPolicy::exp(),
            PolicyKind::Log => StrengthPolicy::log(),
            PolicyKind::Fixed => StrengthPolicy::fixed(self.fixed_r.unwrap_or(0.5)),
        };
        if let Some(k) = self.k {
            policy.k = k;
        }
        if let Some(p0) = self.p0 {
            policy.p0 = p0;
        }
        if let Some(eps) = self.eps {
            policy.eps = eps;
        }
        policy
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmConfig {
    pub vocab_size: usize,
    #[serde(default = "default_order")]
    pub order: u8,
    pub entropy_param: f64,
    pub seed: u64,
}

fn default_order() -> u8 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WatermarkConfig {
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicySpec>,
    /// Boost used by the kgw rule; also seeds the kgw baseline cell when
    /// benchmarking a morphmark config.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub key: u64,
}

fn default_gamma() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub num_sequences: usize,
    pub length: usize,
    #[serde(default = "default_prompt_length")]
    pub prompt_length: usize,
    pub rng_seed: u64,
}

fn default_prompt_length() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub fpr_levels: Vec<f64>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            fpr_levels: vec![0.01],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub lm: LmConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    pub watermark: WatermarkConfig,
    pub generation: GenerationConfig,
    #[serde(default)]
    pub attacks: Vec<AttackSpec>,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paraphrase_endpoint: Option<ParaphraseEndpoint>,
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    /// The reweighting rule this config asks generation to run.
    pub fn watermark_method(&self) -> WatermarkMethod {
        match self.watermark.method {
            Method::Morphmark => WatermarkMethod::MorphMark(
                self.watermark
                    .policy
                    .as_ref()
                    .map(PolicySpec::lower)
                    .unwrap_or_else(StrengthPolicy::exp),
            ),
            Method::Kgw => WatermarkMethod::Kgw(KgwConfig {
                delta: self.watermark.delta.unwrap_or(DEFAULT_KGW_DELTA),
            }),
            Method::None => WatermarkMethod::None,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |path: &str, msg: &str| Err(CliError::Config(format!("{path}: {msg}")));
        if self.schema_version != SCHEMA_VERSION {
            return fail(
                "schema_version",
                &format!(
                    "unsupported version {} (this build reads {SCHEMA_VERSION})",
                    self.schema_version
                ),
            );
        }
        if self.lm.vocab_size < 2 {
            return fail("lm.vocab_size", "must be at least 2");
        }
        if self.lm.order > 1 {
            return fail("lm.order", "must be 0 or 1");
        }
        if !(self.lm.entropy_param > 0.0 && self.lm.entropy_param.is_finite()) {
            return fail("lm.entropy_param", "must be positive and finite");
        }
        if !(self.sampler.temperature > 0.0 && self.sampler.temperature.is_finite()) {
            return fail("sampler.temperature", "must be positive and finite");
        }
        if !(self.sampler.top_p > 0.0 && self.sampler.top_p <= 1.0) {
            return fail("sampler.top_p", "must be in (0, 1]");
        }
        if !(self.watermark.gamma > 0.0 && self.watermark.gamma < 1.0) {
            return fail("watermark.gamma", "must be strictly inside (0, 1)");
        }
        if let Some(delta) = self.watermark.delta {
            if !(delta >= 0.0 && delta.is_finite()) {
                return fail("watermark.delta", "must be finite and non-negative");
            }
        }
        if let Some(policy) = &self.watermark.policy {
            if let Some(k) = policy.k {
                if !(k > 0.0 && k.is_finite()) {
                    return fail("watermark.policy.k", "must be positive and finite");
                }
            }
            if let Some(p0) = policy.p0 {
                if !(0.0..1.0).contains(&p0) {
                    return fail("watermark.policy.p0", "must be in [0, 1)");
                }
            }
            if let Some(eps) = policy.eps {
                if !(eps > 0.0 && eps < 0.5) {
                    return fail("watermark.policy.eps", "must be in (0, 0.5)");
                }
            }
            match policy.fixed_r {
                Some(r) if !(r > 0.0 && r < 1.0) => {
                    return fail("watermark.policy.fixed_r", "must be strictly inside (0, 1)");
                }
                None if policy.kind == PolicyKind::Fixed => {
                    return fail("watermark.policy.fixed_r", "required when kind is fixed");
                }
                _ => {}
            }
        }
        if self.generation.length < 2 {
            return fail(
                "generation.length",
                "must be at least 2 (z-scoring needs an adjacent pair)",
            );
        }
        if self.generation.prompt_length < 1 {
            return fail("generation.prompt_length", "must be at least 1");
        }
        for (i, level) in self.metrics.fpr_levels.iter().enumerate() {
            if !(*level > 0.0 && *level < 1.0) {
                return fail(&format!("metrics.fpr_levels[{i}]"), "must be in (0, 1)");
            }
        }
        for (i, attack) in self.attacks.iter().enumerate() {
            if !(0.0..=1.0).contains(&attack.rate) {
                return fail(&format!("attacks[{i}].rate"), "must be in [0, 1]");
            }
            if attack.kind == AttackKind::Delete && attack.rate >= 1.0 {
                return fail(&format!("attacks[{i}].rate"), "delete requires rate < 1");
            }
            if attack.kind == AttackKind::Paraphrase && self.paraphrase_endpoint.is_none() {
                return fail(
                    "paraphrase_endpoint",
                    &format!("required by attacks[{i}] (kind paraphrase)"),
                );
            }
        }
        Ok(())
    }
}

/// Flag-level overrides layered on top of a config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub method: Option<Method>,
    pub policy: Option<PolicyKind>,
    pub k: Option<f64>,
    pub p0: Option<f64>,
    pub fixed_r: Option<f64>,
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub fpr: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            config.generation.rng_seed = seed;
        }
        if let Some(method) = self.method {
            config.watermark.method = method;
        }
        if let Some(kind) = self.policy {
            // A new kind starts from that kind's stock constants.
            config.watermark.policy = Some(PolicySpec::of_kind(kind));
        }
        if self.k.is_some() || self.p0.is_some() || self.fixed_r.is_some() {
            let policy = config
                .watermark
                .policy
                .get_or_insert_with(|| PolicySpec::of_kind(PolicyKind::Exp));
            if self.k.is_some() {
                policy.k = self.k;
            }
            if self.p0.is_some() {
                policy.p0 = self.p0;
            }
            if self.fixed_r.is_some() {
                policy.fixed_r = self.fixed_r;
            }
        }
        if let Some(gamma) = self.gamma {
            config.watermark.gamma = gamma;
        }
        if let Some(delta) = self.delta {
            config.watermark.delta = Some(delta);
        }
        if let Some(fpr) = self.fpr {
            config.metrics.fpr_levels = vec![fpr];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            lm: LmConfig {
                vocab_size: 1000,
                order: 1,
                entropy_param: 1.0,
                seed: 7,
            },
            sampler: SamplerConfig::default(),
            watermark: WatermarkConfig {
                method: Method::Morphmark,
                policy: Some(PolicySpec::of_kind(PolicyKind::Exp)),
                delta: Some(1.25),
                gamma: 0.5,
                key: 0xfeed,
            },
            generation: GenerationConfig {
                num_sequences: 4,
                length: 50,
                prompt_length: 1,
                rng_seed: 99,
            },
            attacks: vec![AttackSpec {
                kind: AttackKind::Substitute,
                rate: 0.3,
                rng_seed: 11,
            }],
            metrics: MetricsConfig::default(),
            paraphrase_endpoint: None,
        }
    }

    #[test]
    fn round_trips_through_json() {
        let config = base();
        let text = serde_json::to_string_pretty(&config).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn sparse_policy_lowers_to_stock_constants() {
        let policy = PolicySpec::of_kind(PolicyKind::Exp).lower();
        assert_eq!(policy, StrengthPolicy::exp());

        let mut spec = PolicySpec::of_kind(PolicyKind::Log);
        spec.k = Some(3.0);
        let policy = spec.lower();
        assert_eq!(policy.k, 3.0);
        assert_eq!(policy.p0, StrengthPolicy::log().p0);
    }

    #[test]
    fn validation_names_the_field() {
        let mut config = base();
        config.watermark.gamma = 1.0;
        let err = config.validate().unwrap_err();
        assert!(err.to_string().contains("watermark.gamma"), "{err}");

        let mut config = base();
        config.generation.length = 1;
        let err = config.validate().unwrap_err();
        assert!(err.to_string().contains("generation.length"), "{err}");

        let mut config = base();
        config.attacks[0].kind = AttackKind::Paraphrase;
        let err = config.validate().unwrap_err();
        assert!(err.to_string().contains("paraphrase_endpoint"), "{err}");
    }

    #[test]
    fn fixed_policy_requires_a_strength() {
        let mut config = base();
        config.watermark.policy = Some(PolicySpec::of_kind(PolicyKind::Fixed));
        let err = config.validate().unwrap_err();
        assert!(err.to_string().contains("fixed_r"), "{err}");
    }

    #[test]
    fn overrides_layer_on_top() {
        let mut config = base();
        let overrides = Overrides {
            seed: Some(1),
            method: Some(Method::Kgw),
            delta: Some(2.0),
            k: Some(1.7),
            fpr: Some(0.05),
            ..Overrides::default()
        };
        overrides.apply(&mut config);
        assert_eq!(config.generation.rng_seed, 1);
        assert_eq!(config.watermark.method, Method::Kgw);
        assert_eq!(config.watermark.delta, Some(2.0));
        assert_eq!(config.watermark.policy.as_ref().unwrap().k, Some(1.7));
        assert_eq!(config.metrics.fpr_levels, vec![0.05]);
    }
}

//! Pipeline configuration: one JSON file with a section per stage.
//!
//! Environment variables override only paths and endpoints
//! (`IPFORGE_OUTPUT_DIR`, `IPFORGE_JUDGE_ENDPOINT`,
//! `IPFORGE_REWRITER_ENDPOINT`); everything else is file-anchored so a
//! config hash pins a run.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use ipforge_core::align::PpoConfig;
use ipforge_core::evalharness::JudgeSettings;
use ipforge_core::preprocess::{FilterRuleSet, MinHashConfig, RewriteStyle};
use ipforge_core::scheduler::{ScheduleProfile, StageConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathsConfig {
    pub documents: PathBuf,
    #[serde(default)]
    pub patents: Vec<PathBuf>,
    #[serde(default)]
    pub wrappers: Vec<PathBuf>,
    #[serde(default)]
    pub eval_instances: Option<PathBuf>,
    #[serde(default)]
    pub model_outputs: Option<PathBuf>,
    #[serde(default)]
    pub baseline_outputs: Option<PathBuf>,
    pub output_dir: PathBuf,
}

fn default_target_new_tokens() -> usize {
    256
}

fn default_compression_sample_chars() -> usize {
    4000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TokenizerConfig {
    #[serde(default = "default_target_new_tokens")]
    pub target_new_tokens: usize,
    /// Optional base vocabulary to merge the learned one into; the byte
    /// alphabet stands in when absent.
    #[serde(default)]
    pub base_tokens_file: Option<PathBuf>,
    #[serde(default)]
    pub base_merges_file: Option<PathBuf>,
    #[serde(default = "default_compression_sample_chars")]
    pub compression_sample_chars: usize,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        Self {
            target_new_tokens: default_target_new_tokens(),
            base_tokens_file: None,
            base_merges_file: None,
            compression_sample_chars: default_compression_sample_chars(),
        }
    }
}

fn default_template_id() -> String {
    "xfile-instruction-en".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesizeConfig {
    /// Built-in template id, or a template file path relative to the
    /// config directory.
    #[serde(default = "default_template_id")]
    pub template_id: String,
}

impl Default for SynthesizeConfig {
    fn default() -> Self {
        Self { template_id: default_template_id() }
    }
}

fn default_batch_budget() -> u64 {
    65_536
}

fn default_separator() -> u32 {
    2
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PackingConfig {
    #[serde(default = "default_batch_budget")]
    pub batch_token_budget: u64,
    #[serde(default = "default_separator")]
    pub separator_token: u32,
    #[serde(default = "default_true")]
    pub carryover: bool,
}

impl Default for PackingConfig {
    fn default() -> Self {
        Self {
            batch_token_budget: default_batch_budget(),
            separator_token: default_separator(),
            carryover: true,
        }
    }
}

fn default_judge_endpoint() -> String {
    "mock:consistent".to_string()
}

fn default_model_name() -> String {
    "candidate".to_string()
}

fn default_baseline_name() -> String {
    "baseline".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalConfig {
    #[serde(default)]
    pub judge: JudgeSettings,
    /// `mock:consistent`, `mock:position-bias`, or `cmd:<program>`.
    #[serde(default = "default_judge_endpoint")]
    pub judge_endpoint: String,
    #[serde(default = "default_model_name")]
    pub model_name: String,
    #[serde(default = "default_baseline_name")]
    pub baseline_name: String,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            judge: JudgeSettings::default(),
            judge_endpoint: default_judge_endpoint(),
            model_name: default_model_name(),
            baseline_name: default_baseline_name(),
        }
    }
}

fn default_seq_lens() -> Vec<u64> {
    vec![1024, 2048, 4096, 8192, 16384, 32768]
}

fn default_device_flops() -> f64 {
    3.0e14
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostConfig {
    #[serde(default)]
    pub presets: Vec<String>,
    #[serde(default = "default_seq_lens")]
    pub seq_lens: Vec<u64>,
    #[serde(default = "default_device_flops")]
    pub device_flops: f64,
    #[serde(default)]
    pub latency_model: ipforge_core::infercost::LatencyModel,
}

impl Default for CostConfig {
    fn default() -> Self {
        Self {
            presets: vec!["dense13B".into(), "dense70B".into(), "smoe47B".into()],
            seq_lens: default_seq_lens(),
            device_flops: default_device_flops(),
            latency_model: ipforge_core::infercost::LatencyModel::default(),
        }
    }
}

fn default_rewriter_endpoint() -> String {
    "template".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RewriteConfig {
    #[serde(default)]
    pub styles: Vec<RewriteStyle>,
    /// `template` for the built-in fallback or `cmd:<program>`.
    #[serde(default = "default_rewriter_endpoint")]
    pub endpoint: String,
}

impl Default for RewriteConfig {
    fn default() -> Self {
        Self {
            styles: vec![RewriteStyle::Summary, RewriteStyle::Conversation],
            endpoint: default_rewriter_endpoint(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: PathsConfig,
    #[serde(default)]
    pub filter: FilterRuleSet,
    #[serde(default)]
    pub minhash: MinHashConfig,
    #[serde(default)]
    pub rewrite: RewriteConfig,
    #[serde(default)]
    pub synthesize: SynthesizeConfig,
    #[serde(default)]
    pub tokenizer: TokenizerConfig,
    pub stage1: StageConfig,
    pub stage2: StageConfig,
    #[serde(default)]
    pub schedule_profile: ScheduleProfile,
    #[serde(default)]
    pub packing: PackingConfig,
    #[serde(default)]
    pub ppo: PpoConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub cost: CostConfig,
}

/// A loaded config together with the hash of its on-disk bytes.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: PipelineConfig,
    pub config_hash: String,
    pub base_dir: PathBuf,
}

impl PipelineConfig {
    /// Field-level validation of values and referenced input paths.
    pub fn validate(&self, base_dir: &Path) -> Result<()> {
        self.filter.validate().map_err(|e| anyhow::anyhow!("filter: {e}"))?;
        self.minhash.validate().map_err(|e| anyhow::anyhow!("minhash: {e}"))?;
        self.stage1.validate().map_err(|e| anyhow::anyhow!("stage1: {e}"))?;
        self.stage2.validate().map_err(|e| anyhow::anyhow!("stage2: {e}"))?;
        self.ppo.validate().map_err(|e| anyhow::anyhow!("ppo: {e}"))?;
        if self.packing.batch_token_budget == 0 {
            bail!("packing.batch_token_budget: must be > 0");
        }
        for (name, path) in self.input_paths() {
            let resolved = resolve(base_dir, &path);
            if !resolved.exists() {
                bail!("{name}: path {} does not exist", resolved.display());
            }
        }
        for preset in &self.cost.presets {
            ipforge_core::infercost::preset(preset)
                .map_err(|e| anyhow::anyhow!("cost.presets: {e}"))?;
        }
        Ok(())
    }

    fn input_paths(&self) -> Vec<(String, PathBuf)> {
        let mut out = vec![("paths.documents".to_string(), self.paths.documents.clone())];
        for (i, p) in self.paths.patents.iter().enumerate() {
            out.push((format!("paths.patents[{i}]"), p.clone()));
        }
        for (i, p) in self.paths.wrappers.iter().enumerate() {
            out.push((format!("paths.wrappers[{i}]"), p.clone()));
        }
        if let Some(p) = &self.paths.eval_instances {
            out.push(("paths.eval_instances".to_string(), p.clone()));
        }
        if let Some(p) = &self.paths.model_outputs {
            out.push(("paths.model_outputs".to_string(), p.clone()));
        }
        if let Some(p) = &self.paths.baseline_outputs {
            out.push(("paths.baseline_outputs".to_string(), p.clone()));
        }
        if let Some(p) = &self.tokenizer.base_tokens_file {
            out.push(("tokenizer.base_tokens_file".to_string(), p.clone()));
        }
        if let Some(p) = &self.tokenizer.base_merges_file {
            out.push(("tokenizer.base_merges_file".to_string(), p.clone()));
        }
        out
    }
}

/// Resolves a possibly-relative configured path against the config file's
/// directory.
pub fn resolve(base_dir: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base_dir.join(path)
    }
}

/// Loads, applies environment overrides, and validates a config file.
pub fn load_config(path: &Path, seed_override: Option<u64>) -> Result<LoadedConfig> {
    let bytes = fs::read(path).with_context(|| format!("cannot read config {}", path.display()))?;
    let mut config: PipelineConfig = serde_json::from_slice(&bytes)
        .with_context(|| format!("cannot parse config {}", path.display()))?;
    let config_hash = format!("{:016x}", ipforge_core::util::fnv1a64(&bytes));
    let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();

    if let Some(seed) = seed_override {
        config.seed = seed;
    }
    if let Ok(dir) = std::env::var("IPFORGE_OUTPUT_DIR") {
        config.paths.output_dir = PathBuf::from(dir);
    }
    if let Ok(endpoint) = std::env::var("IPFORGE_JUDGE_ENDPOINT") {
        config.eval.judge_endpoint = endpoint;
    }
    if let Ok(endpoint) = std::env::var("IPFORGE_REWRITER_ENDPOINT") {
        config.rewrite.endpoint = endpoint;
    }

    config.validate(&base_dir)?;
    Ok(LoadedConfig { config, config_hash, base_dir })
}

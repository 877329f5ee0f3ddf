//! Analytic inference-cost model: KV-cache and weight memory versus input
//! length, and a first-token latency proxy.
//!
//! This is a closed-form model, not a measurement harness. Absolute figures
//! from any real serving stack depend on its allocator and activation
//! overheads, so only per-architecture ordering and slope are meaningful;
//! a configured constant stands in for runtime overhead.

use serde::{Deserialize, Serialize};
use thiserror::Error;

fn default_weight_bits() -> u32 {
    4
}

fn default_kv_bits() -> u32 {
    16
}

fn one() -> u64 {
    1
}

/// Architecture descriptor for the cost model. `experts == 1` is a dense
/// transformer; sparse mixtures share attention (and thus KV cache) across
/// experts, so only the feed-forward parameters multiply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostModelConfig {
    pub name: String,
    pub layers: u64,
    pub hidden: u64,
    pub q_heads: u64,
    pub kv_heads: u64,
    pub head_dim: u64,
    pub total_params: u64,
    pub active_params_per_token: u64,
    #[serde(default = "one")]
    pub experts: u64,
    #[serde(default = "one")]
    pub active_experts: u64,
    #[serde(default = "default_weight_bits")]
    pub weight_bits: u32,
    #[serde(default = "default_kv_bits")]
    pub kv_bits: u32,
    #[serde(default)]
    pub runtime_overhead_bytes: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CostModelError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
}

impl CostModelConfig {
    pub fn validate(&self) -> Result<(), CostModelError> {
        if self.active_experts > self.experts {
            return Err(CostModelError::Invalid("active_experts > experts".to_string()));
        }
        if self.kv_heads > self.q_heads {
            return Err(CostModelError::Invalid("kv_heads > q_heads".to_string()));
        }
        if self.active_params_per_token > self.total_params {
            return Err(CostModelError::Invalid("active_params > total_params".to_string()));
        }
        if self.layers == 0 || self.head_dim == 0 || self.kv_heads == 0 {
            return Err(CostModelError::Invalid("layers, kv_heads, head_dim must be nonzero".to_string()));
        }
        Ok(())
    }

    /// Bytes of quantized weights: `total_params * weight_bits / 8`.
    pub fn weight_bytes(&self) -> u64 {
        (self.total_params as u128 * self.weight_bits as u128 / 8) as u64
    }
}

/// Bytes of KV cache for a prefix of `seq_len` tokens at `batch` sequences:
/// 2 (K and V) x layers x kv_heads x head_dim x seq_len x batch x bits/8.
/// Linear and strictly increasing in `seq_len`.
pub fn kv_cache_bytes(cfg: &CostModelConfig, seq_len: u64, batch: u64) -> u64 {
    let elems = 2u128
        * cfg.layers as u128
        * cfg.kv_heads as u128
        * cfg.head_dim as u128
        * seq_len as u128
        * batch as u128;
    (elems * cfg.kv_bits as u128 / 8) as u64
}

/// Total memory (weights + KV cache + runtime overhead) at each requested
/// sequence length. `seq_lens` must be nonempty and ascending.
pub fn total_memory_curve(cfg: &CostModelConfig, seq_lens: &[u64]) -> Vec<(u64, u64)> {
    debug_assert!(!seq_lens.is_empty());
    debug_assert!(seq_lens.windows(2).all(|w| w[0] < w[1]));
    seq_lens
        .iter()
        .map(|&s| (s, cfg.weight_bytes() + kv_cache_bytes(cfg, s, 1) + cfg.runtime_overhead_bytes))
        .collect()
}

/// Which latency formula the proxy uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LatencyModel {
    /// Prefill compute: 2 * active_params * seq_len / device_flops.
    #[default]
    ComputeBound,
    /// Bytes moved (weights + KV) over memory bandwidth.
    BandwidthBound,
}

/// First-token latency proxy in seconds. `device_rate` is FLOP/s for the
/// compute-bound model and bytes/s for the bandwidth-bound one.
pub fn first_token_latency_proxy(
    cfg: &CostModelConfig,
    seq_len: u64,
    device_rate: f64,
    model: LatencyModel,
) -> f64 {
    debug_assert!(device_rate > 0.0);
    match model {
        LatencyModel::ComputeBound => {
            2.0 * cfg.active_params_per_token as f64 * seq_len as f64 / device_rate
        }
        LatencyModel::BandwidthBound => {
            (cfg.weight_bytes() + kv_cache_bytes(cfg, seq_len, 1)) as f64 / device_rate
        }
    }
}

/// The three shipped architecture presets, parsed from the bundled config.
pub fn builtin_presets() -> Vec<CostModelConfig> {
    serde_json::from_str(include_str!("../../../configs/cost_presets.json"))
        .expect("bundled cost presets parse")
}

/// Looks up a preset by name, case-sensitively.
pub fn preset(name: &str) -> Result<CostModelConfig, CostModelError> {
    builtin_presets()
        .into_iter()
        .find(|c| c.name == name)
        .ok_or_else(|| CostModelError::UnknownPreset(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const GIB: u64 = 1 << 30;

    #[test]
    fn presets_parse_and_validate() {
        let presets = builtin_presets();
        assert_eq!(presets.len(), 3);
        for p in &presets {
            p.validate().unwrap();
        }
        assert!(preset("smoe47B").is_ok());
        assert!(matches!(preset("nope"), Err(CostModelError::UnknownPreset(_))));
    }

    #[test]
    fn kv_cache_matches_formula_arithmetic() {
        let smoe = preset("smoe47B").unwrap();
        // 2 x 32 layers x 8 kv heads x 128 dim x 16384 x 2 bytes
        assert_eq!(kv_cache_bytes(&smoe, 16_384, 1), 2 * GIB);
        let dense70 = preset("dense70B").unwrap();
        assert_eq!(kv_cache_bytes(&dense70, 16_384, 1), 5 * GIB);
    }

    #[test]
    fn kv_cache_is_linear_in_sequence_length() {
        let cfg = preset("dense13B").unwrap();
        let one = kv_cache_bytes(&cfg, 1, 1);
        assert!(one > 0);
        assert_eq!(kv_cache_bytes(&cfg, 1000, 1), 1000 * one);
        assert_eq!(kv_cache_bytes(&cfg, 2000, 1), 2 * kv_cache_bytes(&cfg, 1000, 1));
        assert_eq!(kv_cache_bytes(&cfg, 1000, 4), 4 * kv_cache_bytes(&cfg, 1000, 1));
    }

    #[test]
    fn four_bit_weights_are_half_a_byte_per_param() {
        let smoe = preset("smoe47B").unwrap();
        assert_eq!(smoe.weight_bytes(), 47_000_000_000 / 2);
    }

    #[test]
    fn memory_slope_ordering_matches_architecture() {
        let slope = |name: &str| {
            let cfg = preset(name).unwrap();
            let curve = total_memory_curve(&cfg, &[1024, 16_384]);
            (curve[1].1 - curve[0].1) as f64 / (16_384.0 - 1024.0)
        };
        let s_moe = slope("smoe47B");
        let s_70 = slope("dense70B");
        let s_13 = slope("dense13B");
        assert!(s_moe < s_70, "{s_moe} !< {s_70}");
        assert!(s_70 < s_13, "{s_70} !< {s_13}");
    }

    #[test]
    fn doubling_sequence_doubles_kv_component() {
        let cfg = preset("dense70B").unwrap();
        let curve = total_memory_curve(&cfg, &[4096, 8192]);
        let kv1 = curve[0].1 - cfg.weight_bytes() - cfg.runtime_overhead_bytes;
        let kv2 = curve[1].1 - cfg.weight_bytes() - cfg.runtime_overhead_bytes;
        assert_eq!(kv2, 2 * kv1);
    }

    #[test]
    fn halving_kv_bits_halves_kv_cache() {
        let mut cfg = preset("dense13B").unwrap();
        let full = kv_cache_bytes(&cfg, 8192, 1);
        cfg.kv_bits = 8;
        assert_eq!(kv_cache_bytes(&cfg, 8192, 1), full / 2);
    }

    #[test]
    fn latency_ratio_tracks_active_parameters() {
        let flops = 300e12;
        let smoe = preset("smoe47B").unwrap();
        let d70 = preset("dense70B").unwrap();
        let d13 = preset("dense13B").unwrap();
        let at = |cfg: &CostModelConfig| first_token_latency_proxy(cfg, 8192, flops, LatencyModel::ComputeBound);
        let ratio_moe_70 = at(&smoe) / at(&d70);
        assert!((ratio_moe_70 - 13.0 / 70.0).abs() < 0.02, "{ratio_moe_70}");
        let ratio_13_moe = at(&d13) / at(&smoe);
        assert!((ratio_13_moe - 1.0).abs() <= 0.1, "{ratio_13_moe}");
    }

    #[test]
    fn latency_is_linear_in_sequence_length() {
        let cfg = preset("smoe47B").unwrap();
        let a = first_token_latency_proxy(&cfg, 1000, 1e12, LatencyModel::ComputeBound);
        let b = first_token_latency_proxy(&cfg, 2000, 1e12, LatencyModel::ComputeBound);
        assert!((b / a - 2.0).abs() < 1e-12);
    }

    #[test]
    fn dense_special_case_reduces_to_plain_transformer() {
        let mut cfg = preset("smoe47B").unwrap();
        cfg.experts = 1;
        cfg.active_experts = 1;
        cfg.validate().unwrap();
        // KV formula never involved experts; identical either way.
        assert_eq!(kv_cache_bytes(&cfg, 4096, 1), kv_cache_bytes(&preset("smoe47B").unwrap(), 4096, 1));
    }

    #[test]
    fn bandwidth_bound_variant_uses_bytes_moved() {
        let cfg = preset("dense13B").unwrap();
        let bw = 2e12; // bytes/s
        let expected = (cfg.weight_bytes() + kv_cache_bytes(&cfg, 4096, 1)) as f64 / bw;
        let got = first_token_latency_proxy(&cfg, 4096, bw, LatencyModel::BandwidthBound);
        assert_eq!(got, expected);
    }
}

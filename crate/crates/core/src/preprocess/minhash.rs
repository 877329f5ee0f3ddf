//! MinHash signatures over character shingles.
//!
//! Shingles are character n-grams (not word n-grams) so the same machinery
//! covers Chinese text, which has no whitespace tokenization. Each shingle
//! is hashed once and then mixed per permutation; the per-permutation
//! minimum forms the signature, and the agreement rate between two
//! signatures estimates the Jaccard similarity of the shingle sets.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::{fnv1a64, mix64};

fn default_permutations() -> usize {
    256
}

fn default_shingle() -> usize {
    5
}

fn default_bands() -> usize {
    32
}

fn default_rows() -> usize {
    8
}

fn default_threshold() -> f64 {
    0.8
}

/// MinHash and LSH parameters. The 32x8 banding default puts the LSH
/// S-curve threshold near (1/32)^(1/8) ~= 0.65, which catches 0.8-similar
/// pairs with high probability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinHashConfig {
    #[serde(default = "default_permutations")]
    pub num_permutations: usize,
    #[serde(default = "default_shingle")]
    pub shingle_size_chars: usize,
    #[serde(default = "default_bands")]
    pub lsh_bands: usize,
    #[serde(default = "default_rows")]
    pub lsh_rows: usize,
    #[serde(default = "default_threshold")]
    pub jaccard_threshold: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for MinHashConfig {
    fn default() -> Self {
        Self {
            num_permutations: default_permutations(),
            shingle_size_chars: default_shingle(),
            lsh_bands: default_bands(),
            lsh_rows: default_rows(),
            jaccard_threshold: default_threshold(),
            seed: 0,
        }
    }
}

impl MinHashConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.num_permutations == 0 {
            return Err("num_permutations must be >= 1".to_string());
        }
        if self.lsh_bands * self.lsh_rows != self.num_permutations {
            return Err(format!(
                "lsh_bands ({}) x lsh_rows ({}) must equal num_permutations ({})",
                self.lsh_bands, self.lsh_rows, self.num_permutations
            ));
        }
        if !(self.jaccard_threshold > 0.0 && self.jaccard_threshold <= 1.0) {
            return Err("jaccard_threshold must be in (0, 1]".to_string());
        }
        if self.shingle_size_chars == 0 {
            return Err("shingle_size_chars must be >= 1".to_string());
        }
        Ok(())
    }

    /// Per-permutation mixing seeds, derived from the config seed.
    fn permutation_seeds(&self) -> Vec<u64> {
        (0..self.num_permutations as u64).map(|i| mix64(self.seed ^ mix64(i))).collect()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MinHashError {
    /// Caller should fall back to exact matching for such documents.
    #[error("text too short for shingles: {chars} chars < shingle size {shingle}")]
    TooShortForShingles { chars: usize, shingle: usize },
}

/// A MinHash signature; agreement rate with another signature from the same
/// config estimates shingle-set Jaccard similarity.
pub type Signature = Vec<u64>;

/// Hashed character shingles of `text`, deduplicated (a set, not a bag).
pub fn shingle_hashes(text: &str, shingle_chars: usize) -> Result<Vec<u64>, MinHashError> {
    let chars: Vec<char> = text.chars().collect();
    if chars.len() < shingle_chars {
        return Err(MinHashError::TooShortForShingles { chars: chars.len(), shingle: shingle_chars });
    }
    let mut set = HashSet::with_capacity(chars.len());
    let mut buf = String::with_capacity(shingle_chars * 4);
    for window in chars.windows(shingle_chars) {
        buf.clear();
        buf.extend(window.iter());
        set.insert(fnv1a64(buf.as_bytes()));
    }
    let mut out: Vec<u64> = set.into_iter().collect();
    out.sort_unstable();
    Ok(out)
}

/// Shingle set as strings, for oracle-style exact Jaccard computations.
pub fn shingle_set(text: &str, shingle_chars: usize) -> HashSet<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut set = HashSet::new();
    for window in chars.windows(shingle_chars) {
        set.insert(window.iter().collect::<String>());
    }
    set
}

/// Exact Jaccard similarity of the two texts' shingle sets. This is the
/// independent reference the estimator is checked against.
pub fn exact_jaccard(a: &str, b: &str, shingle_chars: usize) -> f64 {
    let sa = shingle_set(a, shingle_chars);
    let sb = shingle_set(b, shingle_chars);
    if sa.is_empty() && sb.is_empty() {
        return 1.0;
    }
    let inter = sa.intersection(&sb).count();
    let union = sa.len() + sb.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Computes the MinHash signature of `text`. Deterministic for a given
/// (text, seed); texts shorter than one shingle are an error so callers can
/// route them to the exact-match stage instead.
pub fn minhash_signature(text: &str, cfg: &MinHashConfig) -> Result<Signature, MinHashError> {
    let hashes = shingle_hashes(text, cfg.shingle_size_chars)?;
    Ok(signature_from_hashes(&hashes, &cfg.permutation_seeds()))
}

fn signature_from_hashes(shingles: &[u64], seeds: &[u64]) -> Signature {
    let mut sig = vec![u64::MAX; seeds.len()];
    for &h in shingles {
        for (slot, &seed) in sig.iter_mut().zip(seeds.iter()) {
            let mixed = mix64(h ^ seed);
            if mixed < *slot {
                *slot = mixed;
            }
        }
    }
    sig
}

/// Fraction of agreeing positions between two signatures: the Jaccard
/// estimate. Panics if lengths differ (signatures from different configs).
pub fn estimate_jaccard(a: &Signature, b: &Signature) -> f64 {
    assert_eq!(a.len(), b.len(), "signatures from different configurations");
    if a.is_empty() {
        return 0.0;
    }
    let matches = a.iter().zip(b.iter()).filter(|(x, y)| x == y).count();
    matches as f64 / a.len() as f64
}

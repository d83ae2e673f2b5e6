//! Pipeline configuration: the knobs that define one reproducible
//! experiment run, serialisable as JSON with defaults for every field.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Everything that parameterises a run. Two runs with equal configs (and
/// equal inputs) must produce byte-identical outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Explicit-feedback ratings at or above this become implicit positives.
    pub rating_threshold: f64,
    /// Ceiling on interactions after dedup; larger logs are sampled down.
    pub sample_cap: usize,
    /// Root seed; every stage derives its own stream from this.
    pub seed: u64,
    /// User-threshold core levels, strictly increasing, starting at 0.
    pub core_levels: Vec<u32>,
    /// Per-user fraction of interactions that goes to training.
    pub train_fraction: f64,
    /// Ranked lists are cut off at this depth.
    pub top_k: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            rating_threshold: 4.0,
            sample_cap: 3_000_000,
            seed: 42,
            core_levels: vec![0, 5, 10, 20, 50, 100],
            train_fraction: 0.8,
            top_k: 10,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.rating_threshold.is_finite() {
            return Err(Error::InvalidConfig(
                "rating_threshold must be finite".into(),
            ));
        }
        if self.sample_cap == 0 {
            return Err(Error::InvalidConfig("sample_cap must be positive".into()));
        }
        if self.core_levels.is_empty() {
            return Err(Error::InvalidConfig("core_levels must be non-empty".into()));
        }
        if self.core_levels[0] != 0 {
            return Err(Error::InvalidConfig(
                "core_levels must start at 0 (the unpruned reference)".into(),
            ));
        }
        if !self.core_levels.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig(
                "core_levels must be strictly increasing".into(),
            ));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(
                "train_fraction must lie strictly between 0 and 1".into(),
            ));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidConfig("top_k must be positive".into()));
        }
        Ok(())
    }

    /// Parse from JSON text; unknown fields are rejected so a typo cannot
    /// silently fall back to a default.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: PipelineConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Content hash of the effective configuration (after defaults and
    /// overrides are applied). Stable across runs on any platform because
    /// it hashes the canonical JSON serialisation.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialises");
        let digest = Sha256::digest(json.as_bytes());
        let mut out = String::with_capacity(64);
        for byte in digest {
            use std::fmt::Write;
            write!(out, "{byte:02x}").expect("hex into string");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn default_values_are_the_documented_ones() {
        let c = PipelineConfig::default();
        assert_eq!(c.rating_threshold, 4.0);
        assert_eq!(c.sample_cap, 3_000_000);
        assert_eq!(c.seed, 42);
        assert_eq!(c.core_levels, vec![0, 5, 10, 20, 50, 100]);
        assert_eq!(c.train_fraction, 0.8);
        assert_eq!(c.top_k, 10);
    }

    #[test]
    fn empty_json_gives_defaults() {
        let c = PipelineConfig::from_json("{}").unwrap();
        assert_eq!(c, PipelineConfig::default());
    }

    #[test]
    fn partial_json_overrides_only_named_fields() {
        let c = PipelineConfig::from_json(r#"{"seed": 7, "core_levels": [0, 3]}"#).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.core_levels, vec![0, 3]);
        assert_eq!(c.train_fraction, 0.8);
    }

    #[test]
    fn unknown_field_is_rejected() {
        assert!(PipelineConfig::from_json(r#"{"sede": 7}"#).is_err());
    }

    #[test]
    fn core_levels_must_start_at_zero_and_increase() {
        assert!(PipelineConfig::from_json(r#"{"core_levels": [5, 10]}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"core_levels": [0, 10, 5]}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"core_levels": [0, 5, 5]}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"core_levels": []}"#).is_err());
    }

    #[test]
    fn train_fraction_bounds_are_exclusive() {
        assert!(PipelineConfig::from_json(r#"{"train_fraction": 0.0}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"train_fraction": 1.0}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"train_fraction": 0.5}"#).is_ok());
    }

    #[test]
    fn hash_tracks_content_not_identity() {
        let a = PipelineConfig::default();
        let b = PipelineConfig::from_json("{}").unwrap();
        assert_eq!(a.config_hash(), b.config_hash());
        let c = PipelineConfig {
            seed: 43,
            ..PipelineConfig::default()
        };
        assert_ne!(a.config_hash(), c.config_hash());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let a = PipelineConfig {
            rating_threshold: 3.5,
            sample_cap: 10,
            seed: 9,
            core_levels: vec![0, 2, 4],
            train_fraction: 0.75,
            top_k: 5,
        };
        let text = serde_json::to_string(&a).unwrap();
        let b = PipelineConfig::from_json(&text).unwrap();
        assert_eq!(a, b);
    }
}

//! Pipeline configuration: JSON schema, mode-dependent defaults, and
//! validation. Command-line flags override file values; the resolved
//! configuration is echoed into every report so a run can be reproduced
//! from its report alone.

use serde::{Deserialize, Serialize};
use tinyblock_core::embed::svd::SvdBackend;
use tinyblock_core::embed::Variant;
use tinyblock_core::error::{Error, Result};
use tinyblock_core::flag::GroupThresholds;

/// Which defaults and transforms apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Synthetic,
    Real,
}

/// Feature weighting fed to the embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Binary,
    Counts,
    Tfidf,
}

/// What to do when the output directory already exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OnExisting {
    #[default]
    Fail,
    Overwrite,
    Suffix,
}

/// How to treat attribute records whose node is not in the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnknownNodes {
    #[default]
    Skip,
    Fail,
}

/// Either a fixed probability threshold or elbow-based selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PStarSetting {
    Value(f64),
    Auto(AutoTag),
}

/// The literal string "auto".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl PStarSetting {
    pub fn is_auto(&self) -> bool {
        matches!(self, PStarSetting::Auto(_))
    }
}

/// Threshold block of the pipeline configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSettings {
    pub p_star: PStarSetting,
    pub q_star: f64,
    pub size_bounds: Option<(usize, usize)>,
    pub attr_bounds: Option<(usize, usize)>,
    pub check_sizes: bool,
}

impl Default for ThresholdSettings {
    fn default() -> Self {
        ThresholdSettings {
            p_star: PStarSetting::Value(0.01),
            q_star: 0.01,
            size_bounds: Some((10, 80)),
            attr_bounds: Some((10, 80)),
            check_sizes: true,
        }
    }
}

impl ThresholdSettings {
    /// Group thresholds with `p_star` pinned (auto resolved elsewhere).
    pub fn to_group_thresholds(&self, p_star: f64) -> GroupThresholds {
        GroupThresholds {
            p_star,
            q_star: self.q_star,
            size_bounds: self.size_bounds,
            attr_bounds: self.attr_bounds,
        }
    }
}

fn default_top_k() -> usize {
    1000
}

fn default_batch() -> usize {
    1024
}

fn default_steps() -> usize {
    100
}

fn default_refine() -> usize {
    10
}

fn default_backend() -> SvdBackend {
    SvdBackend::Lanczos
}

fn default_threads() -> usize {
    1
}

/// Full pipeline configuration. Optional knobs default by mode; see
/// [`PipelineConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub edges: String,
    pub attributes: String,
    #[serde(default)]
    pub truth_labels: Option<String>,
    #[serde(default)]
    pub external_labels: Option<String>,
    #[serde(default)]
    pub variant: Option<Variant>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub weighting: Option<Weighting>,
    #[serde(default)]
    pub thresholds: ThresholdSettings,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_top_k")]
    pub top_k_significant: usize,
    #[serde(default)]
    pub seed_attributes: Option<String>,
    #[serde(default)]
    pub suspension: Option<String>,
    #[serde(default)]
    pub bot_scores: Option<String>,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_refine")]
    pub refine_epochs: usize,
    #[serde(default = "default_backend")]
    pub svd_backend: SvdBackend,
    #[serde(default)]
    pub unknown_nodes: UnknownNodes,
    #[serde(default)]
    pub symmetrize: bool,
    pub output: String,
    #[serde(default)]
    pub on_existing: OnExisting,
    #[serde(default = "default_threads")]
    pub threads: usize,
}

impl PipelineConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    /// Fill mode-dependent defaults and validate the result. The returned
    /// configuration has every optional knob pinned, so serializing it
    /// documents the run completely.
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = self.clone();
        let (variant, k, weighting) = match cfg.mode {
            Mode::Synthetic => (Variant::Original, 10, Weighting::Binary),
            Mode::Real => (Variant::DirectedConcat, 100, Weighting::Tfidf),
        };
        cfg.variant.get_or_insert(variant);
        cfg.k.get_or_insert(k);
        cfg.m.get_or_insert(9);
        cfg.weighting.get_or_insert(weighting);
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let k = self.k.expect("resolved");
        let m = self.m.expect("resolved");
        if k == 0 {
            return Err(Error::validation("k must be >= 1"));
        }
        if self.external_labels.is_none() {
            if m < 2 {
                return Err(Error::validation("m must be >= 2 for built-in clustering"));
            }
            if self.thresholds.p_star.is_auto() && m < 3 {
                return Err(Error::validation(
                    "auto threshold selection needs at least 3 clusters",
                ));
            }
        }
        if let PStarSetting::Value(v) = self.thresholds.p_star {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::validation(format!("p_star = {v} outside [0, 1]")));
            }
        }
        self.thresholds.to_group_thresholds(0.0).validate()?;
        if self.batch_size == 0 {
            return Err(Error::validation("batch_size must be >= 1"));
        }
        if self.top_k_significant == 0 {
            return Err(Error::validation("top_k_significant must be >= 1"));
        }
        if self.threads == 0 {
            return Err(Error::validation("threads must be >= 1"));
        }
        if self.edges.is_empty() || self.attributes.is_empty() || self.output.is_empty() {
            return Err(Error::validation(
                "edges, attributes, and output paths are required",
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> String {
        r#"{
            "mode": "synthetic",
            "edges": "data/edges.txt",
            "attributes": "data/attributes.txt",
            "output": "out"
        }"#
        .to_string()
    }

    #[test]
    fn synthetic_defaults() {
        let cfg = PipelineConfig::from_json(&minimal_json()).unwrap();
        let resolved = cfg.resolve().unwrap();
        assert_eq!(resolved.variant, Some(Variant::Original));
        assert_eq!(resolved.k, Some(10));
        assert_eq!(resolved.m, Some(9));
        assert_eq!(resolved.weighting, Some(Weighting::Binary));
        assert_eq!(resolved.thresholds, ThresholdSettings::default());
    }

    #[test]
    fn real_defaults() {
        let json = minimal_json().replace("synthetic", "real");
        let resolved = PipelineConfig::from_json(&json).unwrap().resolve().unwrap();
        assert_eq!(resolved.variant, Some(Variant::DirectedConcat));
        assert_eq!(resolved.k, Some(100));
        assert_eq!(resolved.weighting, Some(Weighting::Tfidf));
    }

    #[test]
    fn auto_threshold_parses() {
        let json = r#"{
            "mode": "synthetic",
            "edges": "e", "attributes": "a", "output": "o",
            "thresholds": {
                "p_star": "auto", "q_star": 0.01,
                "size_bounds": [10, 80], "attr_bounds": [10, 80],
                "check_sizes": true
            }
        }"#;
        let cfg = PipelineConfig::from_json(json).unwrap();
        assert!(cfg.thresholds.p_star.is_auto());
        cfg.resolve().unwrap();
    }

    #[test]
    fn auto_threshold_needs_three_clusters() {
        let json = r#"{
            "mode": "synthetic",
            "edges": "e", "attributes": "a", "output": "o",
            "m": 2,
            "thresholds": {
                "p_star": "auto", "q_star": 0.01,
                "size_bounds": null, "attr_bounds": null,
                "check_sizes": false
            }
        }"#;
        assert!(PipelineConfig::from_json(json).unwrap().resolve().is_err());
    }

    #[test]
    fn unknown_fields_rejected() {
        let json = minimal_json().replace("\"mode\"", "\"bogus\": 1, \"mode\"");
        assert!(PipelineConfig::from_json(&json).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let resolved = PipelineConfig::from_json(&minimal_json())
            .unwrap()
            .resolve()
            .unwrap();
        let echo = serde_json::to_string(&resolved).unwrap();
        let back = PipelineConfig::from_json(&echo).unwrap();
        assert_eq!(back, resolved);
    }
}

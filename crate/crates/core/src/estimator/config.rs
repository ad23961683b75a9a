use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::belief::DEFAULT_SIMILARITY_THRESHOLD;
use crate::error::EstimateError;
use crate::model::SourceId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct EstimatorConfig {
    /// Per-source weight; sources not listed weigh 1.0.
    pub source_weights: BTreeMap<SourceId, f64>,
    pub entity_sample_size: usize,
    pub tuple_sample_rows: usize,
    pub epsilon: f64,
    pub numeric_scope_k: usize,
    pub similarity_threshold: f64,
    pub beam_width: usize,
    pub seed: u64,
    /// Candidates kept per column before reporting.
    pub top_k: usize,
    pub smoothing: bool,
    pub belief_sharing: bool,
    pub tuple_validation: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            source_weights: BTreeMap::new(),
            entity_sample_size: 200,
            tuple_sample_rows: 10,
            epsilon: 0.1,
            numeric_scope_k: 25,
            similarity_threshold: DEFAULT_SIMILARITY_THRESHOLD,
            beam_width: 3,
            seed: 0,
            top_k: 10,
            smoothing: true,
            belief_sharing: true,
            tuple_validation: true,
        }
    }
}

impl EstimatorConfig {
    pub fn weight(&self, source: &SourceId) -> f64 {
        self.source_weights.get(source).copied().unwrap_or(1.0)
    }

    pub fn validate(&self) -> Result<(), EstimateError> {
        let bad = |m: String| Err(EstimateError::InvalidConfig(m));
        if !(0.0..1.0).contains(&self.epsilon) {
            return bad(format!("epsilon must be in [0, 1), got {}", self.epsilon));
        }
        if self.beam_width == 0 {
            return bad("beamWidth must be at least 1".into());
        }
        if self.top_k == 0 || self.entity_sample_size == 0 {
            return bad("topK and entitySampleSize must be positive".into());
        }
        if !self.similarity_threshold.is_finite() {
            return bad("similarityThreshold must be finite".into());
        }
        for (s, w) in &self.source_weights {
            if !(w.is_finite() && *w > 0.0) {
                return bad(format!("weight of {s} must be positive, got {w}"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_serde() {
        let c: EstimatorConfig = serde_json::from_str(r#"{"epsilon":0.2,"sourceWeights":{"kg":2.0}}"#).unwrap();
        assert_eq!(c.epsilon, 0.2);
        assert_eq!(c.beam_width, 3);
        assert_eq!(c.numeric_scope_k, 25);
        assert_eq!(c.weight(&SourceId::new("kg").unwrap()), 2.0);
        assert_eq!(c.weight(&SourceId::new("web").unwrap()), 1.0);
        assert!(c.validate().is_ok());
        let back: EstimatorConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn validation() {
        let mut c = EstimatorConfig::default();
        c.epsilon = 1.0;
        assert!(c.validate().is_err());
        c.epsilon = 0.0;
        c.beam_width = 0;
        assert!(c.validate().is_err());
        c.beam_width = 1;
        c.source_weights.insert(SourceId::new("x").unwrap(), 0.0);
        assert!(c.validate().is_err());
    }
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attention::AttentionMode;
use crate::data::{Dataset, DatasetHeader};
use crate::error::{Error, Result};
use crate::fcgru::{CandidateInput, Enrichment};
use crate::model::{ModelConfig, Sources};

/// Single-mechanism ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Ablation {
    #[default]
    #[serde(rename = "none")]
    None,
    /// Temporal mean pooling instead of attention.
    #[serde(rename = "noAtt")]
    NoAtt,
    /// Softmax-normalized attention weights.
    #[serde(rename = "softmaxAtt")]
    SoftmaxAtt,
    /// Train the target level only.
    #[serde(rename = "noHierPre")]
    NoHierPre,
    /// Plain GRU cells (identity enrichment).
    #[serde(rename = "noEnrich")]
    NoEnrich,
    /// Drop the NDVI optical channel.
    #[serde(rename = "noNDVI")]
    NoNdvi,
}

impl Ablation {
    pub const ALL: [Ablation; 6] = [
        Ablation::None,
        Ablation::NoAtt,
        Ablation::SoftmaxAtt,
        Ablation::NoHierPre,
        Ablation::NoEnrich,
        Ablation::NoNdvi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::None => "none",
            Ablation::NoAtt => "noAtt",
            Ablation::SoftmaxAtt => "softmaxAtt",
            Ablation::NoHierPre => "noHierPre",
            Ablation::NoEnrich => "noEnrich",
            Ablation::NoNdvi => "noNDVI",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ablation {
    type Err = Error;

    /// Case-insensitive match on the names printed by `Display`.
    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::input(format!("unknown ablation '{s}'")))
    }
}

/// Optimization, architecture and ablation settings of one run. Serialized as
/// TOML; missing fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs_per_level: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub seed: u64,
    pub ablation: Ablation,
    pub sources: Sources,
    pub hidden_units: usize,
    pub fc1_units: usize,
    pub fc2_units: usize,
    pub candidate_input: CandidateInput,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs_per_level: crate::hierarchy::DEFAULT_EPOCHS_PER_LEVEL,
            batch_size: 32,
            learning_rate: crate::numkernel::DEFAULT_LEARNING_RATE,
            dropout: 0.4,
            seed: 0,
            ablation: Ablation::None,
            sources: Sources::Both,
            hidden_units: 512,
            fc1_units: 64,
            fc2_units: 128,
            candidate_input: CandidateInput::Enriched,
        }
    }
}

impl TrainConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: TrainConfig = crate::error::from_toml(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 hex of the TOML serialization.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::input("batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::input("learning_rate must be positive and finite"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::input("dropout must lie in [0, 1)"));
        }
        if self.hidden_units == 0 || self.fc1_units == 0 || self.fc2_units == 0 {
            return Err(Error::input("layer widths must be positive"));
        }
        Ok(())
    }

    /// Applies data-side ablations (noNDVI) to a copy of `dataset`.
    pub fn prepare_dataset(&self, dataset: &Dataset) -> Result<Dataset> {
        let mut ds = dataset.clone();
        if self.ablation == Ablation::NoNdvi {
            ds.drop_optical_channel("NDVI")?;
        }
        Ok(ds)
    }

    /// Architecture for data shaped like `header` (after `prepare_dataset`).
    pub fn model_config(&self, header: &DatasetHeader) -> ModelConfig {
        ModelConfig {
            sources: self.sources,
            radar_channels: header.radar_channels.len(),
            optical_channels: header.optical_channels.len(),
            hidden_units: self.hidden_units,
            fc1_units: self.fc1_units,
            fc2_units: self.fc2_units,
            enrichment: match self.ablation {
                Ablation::NoEnrich => Enrichment::Identity,
                _ => Enrichment::FullyConnected,
            },
            candidate_input: match self.ablation {
                Ablation::NoEnrich => CandidateInput::Enriched,
                _ => self.candidate_input,
            },
            attention: match self.ablation {
                Ablation::NoAtt => AttentionMode::Mean,
                Ablation::SoftmaxAtt => AttentionMode::Softmax,
                _ => AttentionMode::Tanh,
            },
        }
    }

    pub fn hierarchical(&self) -> bool {
        self.ablation != Ablation::NoHierPre
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = TrainConfig::default();
        assert_eq!(c.epochs_per_level, 2000);
        assert_eq!(c.batch_size, 32);
        assert_eq!(c.learning_rate, 1e-4);
        assert_eq!(c.dropout, 0.4);
        assert_eq!(c.ablation, Ablation::None);
        assert_eq!(c.sources, Sources::Both);
        assert_eq!((c.hidden_units, c.fc1_units, c.fc2_units), (512, 64, 128));
    }

    #[test]
    fn toml_roundtrip_and_partial() {
        let c = TrainConfig {
            ablation: Ablation::NoNdvi,
            sources: Sources::Radar,
            seed: 9,
            ..TrainConfig::default()
        };
        assert_eq!(TrainConfig::parse(&c.to_toml()).unwrap(), c);
        let p = TrainConfig::parse("epochs_per_level = 3\nablation = \"noHierPre\"").unwrap();
        assert_eq!(p.epochs_per_level, 3);
        assert!(!p.hierarchical());
        assert!(matches!(TrainConfig::parse("\n\nbogus = 1").unwrap_err(), Error::Parse { line: 3, .. }));
        assert!(TrainConfig::parse("dropout = 1.0").is_err());
        assert!(TrainConfig::parse("batch_size = 0").is_err());
    }

    #[test]
    fn ablation_names() {
        for a in Ablation::ALL {
            assert_eq!(a.name().parse::<Ablation>().unwrap(), a);
        }
        assert_eq!("NOATT".parse::<Ablation>().unwrap(), Ablation::NoAtt);
        assert!("dropout".parse::<Ablation>().is_err());
    }

    #[test]
    fn ablations_map_to_architecture() {
        let h = DatasetHeader {
            radar_channels: vec!["VV".into(), "VH".into()],
            radar_dates: vec!["a".into()],
            optical_channels: vec!["R".into()],
            optical_dates: vec!["a".into()],
        };
        let cfg = |a| TrainConfig {
            ablation: a,
            ..TrainConfig::default()
        }
        .model_config(&h);
        assert_eq!(cfg(Ablation::NoAtt).attention, AttentionMode::Mean);
        assert_eq!(cfg(Ablation::SoftmaxAtt).attention, AttentionMode::Softmax);
        assert_eq!(cfg(Ablation::NoEnrich).enrichment, Enrichment::Identity);
        assert_eq!(cfg(Ablation::None), ModelConfig::standard(2, 1));
    }
}

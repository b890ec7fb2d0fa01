//! Dataset model, file formats, feature utilities, normalization, grouped
//! splitting and the synthetic generator.

mod features;
mod format;
mod normalize;
mod split;
mod synth;

pub use features::{gapfill_linear, ndvi};
pub use format::{load_dataset, parse_table, LoadOptions};
pub use normalize::{fit_normalize, BandRange, NormalizationStats};
pub use split::{split_grouped, Split, DEFAULT_FRACTIONS};
pub use synth::{synth_generate, SynthOutput, SynthSpec};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hierarchy::ClassHierarchy;
use crate::numkernel::Matrix;

/// One segment: aligned radar and optical series plus its leaf label.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSample {
    pub id: String,
    pub group: String,
    /// `T_r × C_r`, timestamp-major.
    pub radar: Matrix,
    /// `T_o × C_o`, timestamp-major.
    pub optical: Matrix,
    /// Class index at the hierarchy's target level.
    pub label: usize,
}

/// Shapes, channel names and acquisition dates shared by every sample.
///
/// Serialized as TOML; `T_r` and `T_o` are the lengths of the date lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub radar_channels: Vec<String>,
    pub radar_dates: Vec<String>,
    pub optical_channels: Vec<String>,
    pub optical_dates: Vec<String>,
}

fn valid_field(s: &str) -> bool {
    !s.is_empty() && s.trim() == s && !s.chars().any(|c| c == ',' || c.is_control())
}

impl DatasetHeader {
    pub fn radar_len(&self) -> usize {
        self.radar_dates.len()
    }

    pub fn optical_len(&self) -> usize {
        self.optical_dates.len()
    }

    /// Number of values per table row after the three metadata fields.
    pub fn values_per_row(&self) -> usize {
        self.radar_len() * self.radar_channels.len() + self.optical_len() * self.optical_channels.len()
    }

    pub fn validate(&self) -> Result<()> {
        let lists = [
            ("radar_channels", &self.radar_channels),
            ("radar_dates", &self.radar_dates),
            ("optical_channels", &self.optical_channels),
            ("optical_dates", &self.optical_dates),
        ];
        for (name, list) in lists {
            if list.is_empty() {
                return Err(Error::input(format!("header field {name} is empty")));
            }
            if let Some(bad) = list.iter().find(|s| !valid_field(s)) {
                return Err(Error::input(format!("header field {name} has invalid entry '{bad}'")));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let header: DatasetHeader = crate::error::from_toml(text)?;
        header.validate()?;
        Ok(header)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("header serializes")
    }
}

/// Samples sharing a header, labelled against a taxonomy.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub samples: Vec<SegmentSample>,
    pub hierarchy: ClassHierarchy,
}

impl Dataset {
    pub fn new(header: DatasetHeader, samples: Vec<SegmentSample>, hierarchy: ClassHierarchy) -> Result<Self> {
        header.validate()?;
        let ds = Dataset { header, samples, hierarchy };
        for (i, s) in ds.samples.iter().enumerate() {
            ds.check_sample(s).map_err(|e| Error::input(format!("sample {i}: {e}")))?;
        }
        Ok(ds)
    }

    fn check_sample(&self, s: &SegmentSample) -> Result<()> {
        let h = &self.header;
        if s.radar.shape() != (h.radar_len(), h.radar_channels.len()) {
            return Err(Error::Shape {
                op: "radar series",
                left: s.radar.shape(),
                right: (h.radar_len(), h.radar_channels.len()),
            });
        }
        if s.optical.shape() != (h.optical_len(), h.optical_channels.len()) {
            return Err(Error::Shape {
                op: "optical series",
                left: s.optical.shape(),
                right: (h.optical_len(), h.optical_channels.len()),
            });
        }
        if s.label >= self.hierarchy.class_count(self.hierarchy.target_level()) {
            return Err(Error::input(format!("label {} not in the target level", s.label)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Same header and taxonomy, samples picked by index.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            header: self.header.clone(),
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            hierarchy: self.hierarchy.clone(),
        }
    }

    /// Label of every sample at taxonomy `level`.
    pub fn labels_at(&self, level: usize) -> Result<Vec<usize>> {
        self.samples
            .iter()
            .map(|s| self.hierarchy.ancestor_label(s.label, level))
            .collect()
    }

    /// Removes the optical channel called `name` (case-insensitive).
    pub fn drop_optical_channel(&mut self, name: &str) -> Result<()> {
        let idx = self
            .header
            .optical_channels
            .iter()
            .position(|c| c.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::input(format!("no optical channel named {name}")))?;
        if self.header.optical_channels.len() == 1 {
            return Err(Error::input("cannot drop the only optical channel"));
        }
        self.header.optical_channels.remove(idx);
        let c = self.header.optical_channels.len() + 1;
        for s in &mut self.samples {
            let t = s.optical.rows();
            let data: Vec<f64> = s
                .optical
                .data()
                .iter()
                .enumerate()
                .filter(|(i, _)| i % c != idx)
                .map(|(_, v)| *v)
                .collect();
            s.optical = Matrix::new(t, c - 1, data)?;
        }
        Ok(())
    }

    /// Table rows in the on-disk format (see [`parse_table`]).
    pub fn to_table(&self) -> String {
        let names = self.hierarchy.names(self.hierarchy.target_level());
        let mut out = String::new();
        for s in &self.samples {
            out.push_str(&s.id);
            out.push(',');
            out.push_str(&s.group);
            out.push(',');
            out.push_str(&names[s.label]);
            for v in s.radar.data().iter().chain(s.optical.data()) {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    /// SHA-256 over header, taxonomy and table text.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.header.to_toml().as_bytes());
        h.update(self.hierarchy.to_text().as_bytes());
        h.update(self.to_table().as_bytes());
        hex::encode(h.finalize())
    }
}

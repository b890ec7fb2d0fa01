//! Plain-text checkpoint format.
//!
//! ```text
//! hob2srnn-checkpoint v1
//! seed <u64>
//! hierarchy <hex digest>
//! sources both|radar|optical
//! radar-channels <n>
//! optical-channels <n>
//! hidden-units <n>
//! fc1-units <n>
//! fc2-units <n>
//! enrichment fully-connected|identity
//! candidate-input enriched|raw
//! attention tanh|softmax|mean
//! classes <n_0> <n_1> ...
//! heads <level> ...
//! active-level <level>
//! norm radar <min> <max>          (one line per band, optional)
//! norm optical <min> <max>
//! tensor <name> <rows> <cols>
//! <rows*cols values, row-major, space separated>
//! ...
//! end
//! ```
//!
//! Fields are separated by single spaces. Values use the shortest decimal
//! form that round-trips to the same `f64`, so save/load is bit-exact.

use serde::de::{DeserializeOwned, IntoDeserializer};
use serde::Serialize;

use super::{Hob2srnnModel, ModelConfig};
use crate::data::{BandRange, NormalizationStats};
use crate::error::{Error, Result};
use crate::fcgru::Enrichment;
use crate::numkernel::{Matrix, SeededRng};

const MAGIC: &str = "hob2srnn-checkpoint v1";

/// A trained model with the context needed to apply it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Hob2srnnModel,
    pub normalization: Option<NormalizationStats>,
    pub seed: u64,
    pub hierarchy_digest: String,
}

fn enum_name<T: Serialize>(v: &T) -> String {
    match toml::Value::try_from(v) {
        Ok(toml::Value::String(s)) => s,
        _ => unreachable!("unit enum serializes to a string"),
    }
}

fn enum_parse<T: DeserializeOwned>(s: &str, line: usize) -> Result<T> {
    T::deserialize(IntoDeserializer::<serde::de::value::Error>::into_deserializer(s))
        .map_err(|e| Error::parse(line, e.to_string()))
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        let (i, l) = self
            .iter
            .next()
            .ok_or_else(|| Error::parse(self.line + 1, "unexpected end of checkpoint"))?;
        self.line = i + 1;
        Ok(l)
    }

    fn field(&mut self, key: &str) -> Result<&'a str> {
        let l = self.next()?;
        l.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| Error::parse(self.line, format!("expected '{key} ...'")))
    }

    fn number<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse().map_err(|_| Error::parse(self.line, format!("'{s}' is not a valid number")))
    }

    fn numbers<T: std::str::FromStr>(&self, s: &str) -> Result<Vec<T>> {
        s.split(' ').map(|t| self.number(t)).collect()
    }

    fn floats(&self, s: &str) -> Result<Vec<f64>> {
        let v: Vec<f64> = self.numbers(s)?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::parse(self.line, "values must be finite"));
        }
        Ok(v)
    }

    fn field_number<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let s = self.field(key)?;
        self.number(s)
    }

    fn field_numbers<T: std::str::FromStr>(&mut self, key: &str) -> Result<Vec<T>> {
        let s = self.field(key)?;
        self.numbers(s)
    }
}

fn join<T: ToString>(xs: impl IntoIterator<Item = T>) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

/// Lower bound on the parameter count: recurrent matrices, the second
/// enrichment layer and the output heads.
fn min_parameters(config: &ModelConfig, classes: &[usize], heads: &[usize]) -> u128 {
    let h = config.hidden_units as u128;
    let branches = config.sources.uses_radar() as u128 + config.sources.uses_optical() as u128;
    let mut n = branches * h * h;
    if config.enrichment == Enrichment::FullyConnected {
        n += branches * config.fc1_units as u128 * config.fc2_units as u128;
    }
    for &level in heads {
        n += h * classes.get(level).copied().unwrap_or(0) as u128;
    }
    n
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let m = &self.model;
        let c = m.config();
        let mut out = String::new();
        let mut line = |s: String| {
            out.push_str(&s);
            out.push('\n');
        };
        line(MAGIC.to_string());
        line(format!("seed {}", self.seed));
        line(format!("hierarchy {}", self.hierarchy_digest));
        line(format!("sources {}", enum_name(&c.sources)));
        line(format!("radar-channels {}", c.radar_channels));
        line(format!("optical-channels {}", c.optical_channels));
        line(format!("hidden-units {}", c.hidden_units));
        line(format!("fc1-units {}", c.fc1_units));
        line(format!("fc2-units {}", c.fc2_units));
        line(format!("enrichment {}", enum_name(&c.enrichment)));
        line(format!("candidate-input {}", enum_name(&c.candidate_input)));
        line(format!("attention {}", enum_name(&c.attention)));
        line(format!("classes {}", join(m.class_counts())));
        line(format!("heads {}", join((0..m.class_counts().len()).filter(|&l| m.has_heads(l)))));
        line(format!("active-level {}", m.active_level()));
        if let Some(norm) = &self.normalization {
            for (src, bands) in [("radar", &norm.radar), ("optical", &norm.optical)] {
                for b in bands {
                    line(format!("norm {src} {} {}", b.min, b.max));
                }
            }
        }
        for (name, t) in m.all_tensors() {
            line(format!("tensor {name} {} {}", t.rows(), t.cols()));
            line(join(t.data()));
        }
        line("end".to_string());
        out
    }

    pub fn parse(text: &str) -> Result<Checkpoint> {
        let mut ls = Lines {
            iter: text.lines().enumerate(),
            line: 0,
        };
        if ls.next()? != MAGIC {
            return Err(Error::parse(1, format!("expected '{MAGIC}'")));
        }
        let seed = ls.field_number("seed")?;
        let hierarchy_digest = ls.field("hierarchy")?.to_string();
        if hierarchy_digest.is_empty() || !hierarchy_digest.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(Error::parse(ls.line, "hierarchy digest must be hexadecimal"));
        }
        let sources = enum_parse(ls.field("sources")?, ls.line)?;
        let radar_channels = ls.field_number("radar-channels")?;
        let optical_channels = ls.field_number("optical-channels")?;
        let hidden_units = ls.field_number("hidden-units")?;
        let fc1_units = ls.field_number("fc1-units")?;
        let fc2_units = ls.field_number("fc2-units")?;
        let enrichment = enum_parse(ls.field("enrichment")?, ls.line)?;
        let candidate_input = enum_parse(ls.field("candidate-input")?, ls.line)?;
        let attention = enum_parse(ls.field("attention")?, ls.line)?;
        let config = ModelConfig {
            sources,
            radar_channels,
            optical_channels,
            hidden_units,
            fc1_units,
            fc2_units,
            enrichment,
            candidate_input,
            attention,
        };
        let classes: Vec<usize> = ls.field_numbers("classes")?;
        let heads: Vec<usize> = ls.field_numbers("heads")?;
        let active: usize = ls.field_number("active-level")?;
        let structure_line = ls.line;
        let first = *heads
            .first()
            .ok_or_else(|| Error::parse(structure_line, "checkpoint lists no heads"))?;
        if first >= classes.len() || !heads.contains(&active) {
            return Err(Error::parse(structure_line, "head levels do not match the class list"));
        }
        // Every parameter takes at least one byte of text, so a declared
        // architecture larger than the input cannot be complete.
        if min_parameters(&config, &classes, &heads) > text.len() as u128 {
            return Err(Error::parse(structure_line, "declared architecture exceeds the checkpoint size"));
        }
        // Weights drawn here are placeholders; every tensor is overwritten below.
        let mut rng = SeededRng::new(0);
        let structural = |e: Error| Error::parse(structure_line, e.to_string());
        let mut model = Hob2srnnModel::new(config, classes.clone(), first, &mut rng).map_err(structural)?;
        for &level in &heads[1..] {
            if level >= classes.len() || model.has_heads(level) {
                return Err(Error::parse(structure_line, format!("bad head level {level}")));
            }
            model.init_heads(level, classes[level], &mut rng).map_err(structural)?;
        }
        model.set_active_level(active).map_err(structural)?;

        let mut norm = NormalizationStats {
            radar: Vec::new(),
            optical: Vec::new(),
        };
        let mut line = ls.next()?;
        while let Some(rest) = line.strip_prefix("norm ") {
            let (src, range) = rest
                .split_once(' ')
                .ok_or_else(|| Error::parse(ls.line, "norm needs a source and a range"))?;
            let v = ls.floats(range)?;
            let [min, max] = v[..] else {
                return Err(Error::parse(ls.line, "norm needs exactly min and max"));
            };
            if !(min <= max) {
                return Err(Error::parse(ls.line, "norm min exceeds max"));
            }
            match src {
                "radar" => norm.radar.push(BandRange { min, max }),
                "optical" => norm.optical.push(BandRange { min, max }),
                _ => return Err(Error::parse(ls.line, format!("unknown source '{src}'"))),
            }
            line = ls.next()?;
        }
        let normalization = if norm.radar.is_empty() && norm.optical.is_empty() {
            None
        } else {
            if norm.radar.len() != config.radar_channels || norm.optical.len() != config.optical_channels {
                return Err(Error::parse(ls.line, "norm band count does not match the channel counts"));
            }
            Some(norm)
        };

        let mut slots = model.all_tensors_mut().into_iter();
        loop {
            if line == "end" {
                if let Some((name, _)) = slots.next() {
                    return Err(Error::parse(ls.line, format!("missing tensor {name}")));
                }
                break;
            }
            let header: Vec<&str> = line
                .strip_prefix("tensor ")
                .ok_or_else(|| Error::parse(ls.line, "expected 'tensor' or 'end'"))?
                .split(' ')
                .collect();
            let [name, rows, cols] = header[..] else {
                return Err(Error::parse(ls.line, "tensor needs name, rows and cols"));
            };
            let (rows, cols): (usize, usize) = (ls.number(rows)?, ls.number(cols)?);
            let (expected, slot) = slots
                .next()
                .ok_or_else(|| Error::parse(ls.line, format!("unexpected tensor {name}")))?;
            if expected != name || slot.shape() != (rows, cols) {
                return Err(Error::parse(
                    ls.line,
                    format!("expected tensor {expected} {:?}, found {name} ({rows}, {cols})", slot.shape()),
                ));
            }
            let values_line = ls.next()?;
            let values = ls.floats(values_line)?;
            *slot = Matrix::new(rows, cols, values).map_err(|e| Error::parse(ls.line, e.to_string()))?;
            line = ls.next()?;
        }
        Ok(Checkpoint {
            model,
            normalization,
            seed,
            hierarchy_digest,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_text())?)
    }

    pub fn load(path: &std::path::Path) -> Result<Checkpoint> {
        Checkpoint::parse(&std::fs::read_to_string(path)?)
    }
}

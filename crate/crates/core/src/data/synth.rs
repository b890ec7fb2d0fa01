use serde::{Deserialize, Serialize};

use super::{gapfill_linear, ndvi, Dataset, DatasetHeader, SegmentSample};
use crate::error::{Error, Result};
use crate::hierarchy::ClassHierarchy;
use crate::numkernel::{Matrix, SeededRng};

/// Shape and noise of a generated dataset. Serialized as TOML; every field
/// has a default, so an empty document describes the default fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    /// Class count per taxonomy level, coarsest first; must not decrease.
    pub levels: Vec<usize>,
    pub segments: usize,
    /// Consecutive segments sharing one group (polygon) id.
    pub segments_per_group: usize,
    pub radar_dates: usize,
    pub radar_channels: Vec<String>,
    pub optical_dates: usize,
    /// An `NDVI` channel is derived from `NIR` and `R` when all three exist.
    pub optical_channels: Vec<String>,
    /// Standard deviation of per-value noise in prototype units; half of it
    /// is also applied as a per-group, per-channel offset.
    pub noise: f64,
    /// Probability that an optical date is clouded and gap-filled.
    pub cloud_fraction: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            levels: vec![2, 4, 8],
            segments: 500,
            segments_per_group: 5,
            radar_dates: 16,
            radar_channels: vec!["VV".into(), "VH".into()],
            optical_dates: 19,
            optical_channels: ["B", "G", "R", "NIR", "NDVI"].map(String::from).to_vec(),
            noise: 0.1,
            cloud_fraction: 0.0,
            seed: 0,
        }
    }
}

const MAX_DATES: usize = 10_000;

impl SynthSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: SynthSpec = crate::error::from_toml(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn groups(&self) -> usize {
        self.segments.div_ceil(self.segments_per_group.max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() || self.levels.contains(&0) {
            return Err(Error::input("levels must list at least one nonzero class count"));
        }
        if self.levels.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::input("class counts must not decrease towards the leaves"));
        }
        if self.segments_per_group == 0 || self.radar_dates == 0 || self.optical_dates == 0 {
            return Err(Error::input("segments_per_group and date counts must be positive"));
        }
        if self.radar_dates.max(self.optical_dates) > MAX_DATES {
            return Err(Error::input(format!("date counts are limited to {MAX_DATES}")));
        }
        let leaves = *self.levels.last().expect("nonempty");
        if self.groups() < leaves {
            return Err(Error::input(format!(
                "{} groups cannot cover {leaves} leaf classes",
                self.groups()
            )));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::input("noise must be finite and nonnegative"));
        }
        if !(0.0..1.0).contains(&self.cloud_fraction) {
            return Err(Error::input("cloud_fraction must lie in [0, 1)"));
        }
        self.header().validate()
    }

    fn header(&self) -> DatasetHeader {
        DatasetHeader {
            radar_channels: self.radar_channels.clone(),
            radar_dates: (1..=self.radar_dates).map(|i| format!("r{i:02}")).collect(),
            optical_channels: self.optical_channels.clone(),
            optical_dates: (1..=self.optical_dates).map(|i| format!("o{i:02}")).collect(),
        }
    }

    fn hierarchy(&self) -> Result<ClassHierarchy> {
        let names = self
            .levels
            .iter()
            .enumerate()
            .map(|(k, &n)| (0..n).map(|j| format!("L{k}-C{j}")).collect())
            .collect();
        let parents = self
            .levels
            .windows(2)
            .map(|w| (0..w[1]).map(|j| j * w[0] / w[1]).collect())
            .collect();
        ClassHierarchy::from_parent_table(names, parents)
    }
}

/// Generated dataset plus the noiseless leaf prototypes it was drawn from.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: Dataset,
    /// `(radar, optical)` per leaf class, in output units.
    pub prototypes: Vec<(Matrix, Matrix)>,
}

/// Smooth curve `amp * sin(2π f t/T + phase)` per channel.
struct Wave {
    amp: f64,
    freq: f64,
    phase: f64,
}

impl Wave {
    fn draw(amp: f64, rng: &mut SeededRng) -> Wave {
        Wave {
            amp,
            freq: rng.uniform_range(0.5, 1.5),
            phase: rng.uniform_range(0.0, std::f64::consts::TAU),
        }
    }

    fn at(&self, t: usize, len: usize) -> f64 {
        let x = t as f64 / len as f64;
        self.amp * (std::f64::consts::TAU * self.freq * x + self.phase).sin()
    }
}

const LEVEL_AMPLITUDES: [f64; 3] = [1.0, 0.6, 0.4];

fn level_amplitude(level: usize) -> f64 {
    LEVEL_AMPLITUDES.get(level).copied().unwrap_or(0.4)
}

struct SourceLayout {
    dates: usize,
    channels: usize,
}

/// Latent curves of every leaf: the sum over levels of the ancestor's wave,
/// so siblings share the coarse shape and differ in finer detail.
fn latent_prototypes(spec: &SynthSpec, h: &ClassHierarchy, src: &SourceLayout, rng: &mut SeededRng) -> Result<Vec<Matrix>> {
    let waves: Vec<Vec<Vec<Wave>>> = spec
        .levels
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            (0..n)
                .map(|_| (0..src.channels).map(|_| Wave::draw(level_amplitude(k), rng)).collect())
                .collect()
        })
        .collect();
    let leaves = h.class_count(h.target_level());
    (0..leaves)
        .map(|leaf| {
            let mut m = Matrix::zeros(src.dates, src.channels);
            for (k, level_waves) in waves.iter().enumerate() {
                let c = h.ancestor_label(leaf, k)?;
                for ch in 0..src.channels {
                    for t in 0..src.dates {
                        let v = m.get(t, ch) + level_waves[c][ch].at(t, src.dates);
                        m.set(t, ch, v);
                    }
                }
            }
            Ok(m)
        })
        .collect()
}

fn radar_units(v: f64) -> f64 {
    -15.0 + 4.0 * v
}

fn optical_units(v: f64, ch: usize) -> f64 {
    (0.2 + 0.03 * ch as f64 + 0.08 * v).max(0.001)
}

struct NdviChannels {
    ndvi: usize,
    nir: usize,
    red: usize,
}

fn ndvi_channels(names: &[String]) -> Option<NdviChannels> {
    let find = |n: &str| names.iter().position(|c| c.eq_ignore_ascii_case(n));
    Some(NdviChannels {
        ndvi: find("NDVI")?,
        nir: find("NIR")?,
        red: find("R")?,
    })
}

fn to_radar(latent: &Matrix) -> Matrix {
    latent.map(radar_units)
}

fn to_optical(latent: &Matrix, derived: Option<&NdviChannels>) -> Matrix {
    let mut m = latent.clone();
    for t in 0..m.rows() {
        for ch in 0..m.cols() {
            m.set(t, ch, optical_units(latent.get(t, ch), ch));
        }
        if let Some(d) = derived {
            m.set(t, d.ndvi, ndvi(m.get(t, d.nir), m.get(t, d.red)));
        }
    }
    m
}

/// Draws a labelled dataset whose leaf classes follow smooth, hierarchically
/// related prototypes.
///
/// Group `g` holds segments `g*s .. (g+1)*s` and carries leaf class
/// `g * K / groups`, so groups are class-pure and classes receive near-equal
/// numbers of groups. Noise, group offsets and cloud gaps are all drawn from
/// `rng` after the prototypes.
pub fn synth_generate(spec: &SynthSpec, rng: &mut SeededRng) -> Result<SynthOutput> {
    spec.validate()?;
    let header = spec.header();
    let hierarchy = spec.hierarchy()?;
    let radar = SourceLayout {
        dates: spec.radar_dates,
        channels: spec.radar_channels.len(),
    };
    let optical = SourceLayout {
        dates: spec.optical_dates,
        channels: spec.optical_channels.len(),
    };
    let derived = ndvi_channels(&spec.optical_channels);
    let latent_r = latent_prototypes(spec, &hierarchy, &radar, rng)?;
    let latent_o = latent_prototypes(spec, &hierarchy, &optical, rng)?;
    let prototypes = latent_r
        .iter()
        .zip(&latent_o)
        .map(|(r, o)| (to_radar(r), to_optical(o, derived.as_ref())))
        .collect();

    let leaves = hierarchy.class_count(hierarchy.target_level());
    let groups = spec.groups();
    let id_width = spec.segments.to_string().len();
    let group_width = groups.to_string().len();
    let mut samples = Vec::with_capacity(spec.segments);
    let mut offsets = (Vec::new(), Vec::new());
    for i in 0..spec.segments {
        let g = i / spec.segments_per_group;
        let label = g * leaves / groups;
        if i % spec.segments_per_group == 0 {
            offsets.0 = (0..radar.channels).map(|_| 0.5 * spec.noise * rng.normal()).collect();
            offsets.1 = (0..optical.channels).map(|_| 0.5 * spec.noise * rng.normal()).collect();
        }
        let mut noisy = |latent: &Matrix, offs: &[f64]| {
            let mut m = latent.clone();
            for t in 0..m.rows() {
                for ch in 0..m.cols() {
                    let v = m.get(t, ch) + offs[ch] + spec.noise * rng.normal();
                    m.set(t, ch, v);
                }
            }
            m
        };
        let r = to_radar(&noisy(&latent_r[label], &offsets.0));
        let mut o = to_optical(&noisy(&latent_o[label], &offsets.1), derived.as_ref());
        if spec.cloud_fraction > 0.0 {
            let valid: Vec<bool> = (0..optical.dates).map(|_| rng.uniform() >= spec.cloud_fraction).collect();
            if valid.iter().any(|v| *v) {
                for ch in 0..optical.channels {
                    let col: Vec<f64> = (0..optical.dates).map(|t| o.get(t, ch)).collect();
                    for (t, v) in gapfill_linear(&col, &valid)?.into_iter().enumerate() {
                        o.set(t, ch, v);
                    }
                }
            }
        }
        samples.push(SegmentSample {
            id: format!("seg{i:0id_width$}"),
            group: format!("poly{g:0group_width$}"),
            radar: r,
            optical: o,
            label,
        });
    }
    Ok(SynthOutput {
        dataset: Dataset::new(header, samples, hierarchy)?,
        prototypes,
    })
}

use super::{Dataset, SegmentSample};
use crate::error::{Error, Result};
use crate::numkernel::Matrix;

/// Minimum and maximum of one band over all timestamps and fitting samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandRange {
    pub min: f64,
    pub max: f64,
}

impl BandRange {
    /// Maps into `[0, 1]` with clamping; a constant band maps to 0.
    pub fn apply(&self, v: f64) -> f64 {
        let span = self.max - self.min;
        if span <= 0.0 {
            0.0
        } else {
            ((v - self.min) / span).clamp(0.0, 1.0)
        }
    }
}

/// Per-band ranges for both sources.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationStats {
    pub radar: Vec<BandRange>,
    pub optical: Vec<BandRange>,
}

fn band_ranges<'a>(series: impl Iterator<Item = &'a Matrix>, channels: usize) -> Vec<BandRange> {
    let mut out = vec![
        BandRange {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY
        };
        channels
    ];
    for m in series {
        for t in 0..m.rows() {
            for (r, &v) in out.iter_mut().zip(m.row(t)) {
                r.min = r.min.min(v);
                r.max = r.max.max(v);
            }
        }
    }
    out
}

/// Fits per-band ranges on `samples` (the training partition).
pub fn fit_normalize(samples: &[SegmentSample]) -> Result<NormalizationStats> {
    let first = samples
        .first()
        .ok_or_else(|| Error::input("normalization needs at least one training sample"))?;
    Ok(NormalizationStats {
        radar: band_ranges(samples.iter().map(|s| &s.radar), first.radar.cols()),
        optical: band_ranges(samples.iter().map(|s| &s.optical), first.optical.cols()),
    })
}

fn apply_bands(m: &Matrix, ranges: &[BandRange]) -> Result<Matrix> {
    if m.cols() != ranges.len() {
        return Err(Error::Shape {
            op: "apply_normalize",
            left: m.shape(),
            right: (m.rows(), ranges.len()),
        });
    }
    let c = ranges.len();
    let data = m
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| ranges[i % c].apply(v))
        .collect();
    Matrix::new(m.rows(), c, data)
}

impl NormalizationStats {
    pub fn apply_normalize(&self, sample: &SegmentSample) -> Result<SegmentSample> {
        Ok(SegmentSample {
            radar: apply_bands(&sample.radar, &self.radar)?,
            optical: apply_bands(&sample.optical, &self.optical)?,
            ..sample.clone()
        })
    }

    pub fn apply_dataset(&self, ds: &Dataset) -> Result<Dataset> {
        Ok(Dataset {
            header: ds.header.clone(),
            samples: ds.samples.iter().map(|s| self.apply_normalize(s)).collect::<Result<_>>()?,
            hierarchy: ds.hierarchy.clone(),
        })
    }
}

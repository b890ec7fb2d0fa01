//! Delimited dataset table.
//!
//! ```text
//! table := (row | comment | blank)*       ; at least one row
//! row   := id ',' group ',' label (',' value){V} EOL
//! ```
//!
//! `V = T_r·C_r + T_o·C_o`. Radar values come first, then optical, each
//! timestamp-major (all channels of the first date, then the next date).
//! `label` is a class name of the taxonomy's target level. Values are
//! finite decimal floats. Lines starting with `#` and blank lines are
//! skipped; a trailing `\r` is stripped.

use std::collections::HashSet;
use std::path::Path;

use super::{Dataset, DatasetHeader, SegmentSample};
use crate::error::{Error, Result};
use crate::hierarchy::ClassHierarchy;
use crate::numkernel::Matrix;

/// Loader switches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Drop the optical `NDVI` channel after parsing.
    pub drop_ndvi: bool,
}

/// Parses table text against `header` and `hierarchy`.
pub fn parse_table(text: &str, header: &DatasetHeader, hierarchy: &ClassHierarchy) -> Result<Vec<SegmentSample>> {
    let (tr, cr) = (header.radar_len(), header.radar_channels.len());
    let (to, co) = (header.optical_len(), header.optical_channels.len());
    let expected = header.values_per_row();
    let mut samples = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.split('\n').enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(',');
        let mut meta = || {
            fields
                .next()
                .filter(|f| !f.is_empty())
                .ok_or_else(|| Error::parse(line_no, "row needs id, group and label"))
        };
        let id = meta()?.to_string();
        let group = meta()?.to_string();
        let label_name = meta()?;
        let label = hierarchy
            .leaf_index(label_name)
            .ok_or_else(|| Error::parse(line_no, format!("unknown label '{label_name}'")))?;
        let mut values = Vec::with_capacity(expected);
        for (k, f) in fields.enumerate() {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| Error::parse(line_no, format!("value {} is not a number: '{f}'", k + 1)))?;
            if !v.is_finite() {
                return Err(Error::parse(line_no, format!("value {} is not finite", k + 1)));
            }
            values.push(v);
        }
        if values.len() != expected {
            return Err(Error::parse(
                line_no,
                format!("expected {expected} values, found {}", values.len()),
            ));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::parse(line_no, format!("duplicate segment id '{id}'")));
        }
        let optical = values.split_off(tr * cr);
        samples.push(SegmentSample {
            id,
            group,
            radar: Matrix::new(tr, cr, values)?,
            optical: Matrix::new(to, co, optical)?,
            label,
        });
    }
    if samples.is_empty() {
        return Err(Error::parse(1, "dataset table has no rows"));
    }
    Ok(samples)
}

/// Reads and validates a dataset table.
pub fn load_dataset(
    table: &Path,
    header: &DatasetHeader,
    hierarchy: &ClassHierarchy,
    options: LoadOptions,
) -> Result<Dataset> {
    let text = std::fs::read_to_string(table)?;
    let samples = parse_table(&text, header, hierarchy)?;
    let mut ds = Dataset::new(header.clone(), samples, hierarchy.clone())?;
    if options.drop_ndvi {
        ds.drop_optical_channel("NDVI")?;
    }
    Ok(ds)
}

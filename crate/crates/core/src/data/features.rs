use crate::error::{Error, Result};

/// Normalized difference vegetation index, `(nir - red) / (nir + red)`;
/// 0 when the denominator vanishes.
pub fn ndvi(nir: f64, red: f64) -> f64 {
    let denom = nir + red;
    if denom == 0.0 {
        0.0
    } else {
        (nir - red) / denom
    }
}

/// Fills invalid entries by linear interpolation (by date index) between the
/// nearest valid neighbours; leading and trailing gaps copy the nearest valid
/// value. Valid entries are returned untouched.
pub fn gapfill_linear(values: &[f64], valid: &[bool]) -> Result<Vec<f64>> {
    if values.len() != valid.len() {
        return Err(Error::Shape {
            op: "gapfill_linear",
            left: (values.len(), 1),
            right: (valid.len(), 1),
        });
    }
    let anchors: Vec<usize> = (0..values.len()).filter(|&i| valid[i]).collect();
    let (Some(&first), Some(&last)) = (anchors.first(), anchors.last()) else {
        return Err(Error::input("gap filling needs at least one valid timestamp"));
    };
    let mut out = values.to_vec();
    for i in 0..first {
        out[i] = values[first];
    }
    for i in last + 1..values.len() {
        out[i] = values[last];
    }
    for pair in anchors.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let span = (b - a) as f64;
        for i in a + 1..b {
            let w = (i - a) as f64 / span;
            out[i] = values[a] * (1.0 - w) + values[b] * w;
        }
    }
    Ok(out)
}

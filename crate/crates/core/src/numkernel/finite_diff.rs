use super::{Matrix, Parameters};
use crate::error::{Error, Result};

/// Central finite-difference gradient of `loss` with respect to every
/// coordinate of `params`.
///
/// `loss` must be deterministic; it is evaluated twice at the base point and
/// any disagreement invalidates the oracle. Results are undefined at kinks of
/// non-smooth losses (e.g. `|p|` at 0), so callers keep away from them.
pub fn finite_diff_grad<P, F>(mut loss: F, params: &P, h: f64) -> Result<Vec<Matrix>>
where
    P: Parameters + Clone,
    F: FnMut(&P) -> f64,
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::input(format!("finite-difference step must be > 0, got {h}")));
    }
    let base = loss(params);
    let again = loss(params);
    if base.to_bits() != again.to_bits() {
        return Err(Error::OracleInvalid(format!(
            "loss is not deterministic under fixed inputs ({base} vs {again})"
        )));
    }

    let mut probe = params.clone();
    let shapes: Vec<(usize, usize)> = params.tensors().iter().map(|(_, m)| m.shape()).collect();
    let mut grads = Vec::with_capacity(shapes.len());
    for (t, &(rows, cols)) in shapes.iter().enumerate() {
        let mut g = Matrix::zeros(rows, cols);
        for i in 0..rows * cols {
            let orig = probe.tensors_mut()[t].data()[i];
            probe.tensors_mut()[t].set_flat(i, orig + h);
            let plus = loss(&probe);
            probe.tensors_mut()[t].set_flat(i, orig - h);
            let minus = loss(&probe);
            probe.tensors_mut()[t].set_flat(i, orig);
            g.set_flat(i, (plus - minus) / (2.0 * h));
        }
        grads.push(g);
    }
    Ok(grads)
}

/// Largest relative error between two gradient lists, with the denominator
/// floored at `floor` so that near-zero coordinates are compared absolutely.
pub fn max_relative_error(analytic: &[&Matrix], numeric: &[Matrix], floor: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, n) in analytic.iter().zip(numeric) {
        assert_eq!(a.shape(), n.shape(), "gradient shape mismatch");
        for (x, y) in a.data().iter().zip(n.data()) {
            let denom = x.abs().max(y.abs()).max(floor);
            worst = worst.max((x - y).abs() / denom);
        }
    }
    worst
}

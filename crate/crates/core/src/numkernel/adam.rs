use super::{Matrix, Parameters};
use crate::error::{Error, Result};

pub const DEFAULT_LEARNING_RATE: f64 = 1e-4;

/// Moment accumulators for the Adam optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl AdamState {
    /// Fresh state shaped after `params`, with beta1 = 0.9, beta2 = 0.999,
    /// epsilon = 1e-8.
    pub fn new<P: Parameters + ?Sized>(params: &P) -> Self {
        let first: Vec<Matrix> = params.tensors().iter().map(|(_, m)| m.zeros_like()).collect();
        AdamState {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            second: first.clone(),
            first,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn update<P, G>(&mut self, params: &mut P, grads: &G, lr: f64) -> Result<()>
    where
        P: Parameters + ?Sized,
        G: Parameters + ?Sized,
    {
        let grads = grads.tensors();
        let params = params.tensors_mut();
        if grads.len() != params.len() || params.len() != self.first.len() {
            return Err(Error::Shape {
                op: "adam_step",
                left: (params.len(), 0),
                right: (grads.len(), self.first.len()),
            });
        }
        for ((p, (_, g)), m) in params.iter().zip(&grads).zip(&self.first) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(Error::Shape {
                    op: "adam_step",
                    left: p.shape(),
                    right: g.shape(),
                });
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        for (((p, (_, g)), m), v) in params
            .into_iter()
            .zip(grads)
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            let pd = p.data_mut();
            let md = m.data_mut();
            let vd = v.data_mut();
            for (i, &gi) in g.data().iter().enumerate() {
                md[i] = b1 * md[i] + (1.0 - b1) * gi;
                vd[i] = b2 * vd[i] + (1.0 - b2) * gi * gi;
                let mhat = md[i] / c1;
                let vhat = vd[i] / c2;
                pd[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![Matrix::filled(2, 3, 0.7), Matrix::filled(1, 3, -0.2)];
        let before = p.clone();
        let g = vec![Matrix::zeros(2, 3), Matrix::zeros(1, 3)];
        let mut st = AdamState::new(&p);
        st.update(&mut p, &g, DEFAULT_LEARNING_RATE).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m̂ = g, v̂ = g², so the step is lr·g/(|g|+eps).
        for g in [0.5, -3.0, 1e-2] {
            let mut p = Matrix::filled(1, 1, 1.0);
            let mut st = AdamState::new(&p);
            st.update(&mut p, &Matrix::filled(1, 1, g), 1e-4).unwrap();
            let delta = 1.0 - p.get(0, 0);
            let expected = 1e-4 * g / (g.abs() + 1e-8);
            assert!((delta - expected).abs() < 1e-15, "g={g}: {delta} vs {expected}");
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut p = Matrix::zeros(2, 2);
        let mut st = AdamState::new(&p);
        let err = st.update(&mut p, &Matrix::zeros(2, 3), 1e-3).unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));
        assert_eq!(st.step_count(), 0);
    }

    #[test]
    fn step_increments() {
        let mut p = Matrix::zeros(1, 2);
        let mut st = AdamState::new(&p);
        for k in 1..=5 {
            st.update(&mut p, &Matrix::filled(1, 2, 1.0), 1e-3).unwrap();
            assert_eq!(st.step_count(), k);
        }
    }
}

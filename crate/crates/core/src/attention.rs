//! Temporal pooling of hidden-state sequences.
//!
//! The tanh variant scores each row of `H` (`N × d`) as
//! `score = tanh(H·W + b)·u`, squashes it with `λ = tanh(score)` so weights
//! live in `[-1, 1]` without a sum constraint, and pools `feat = Σ λ_i h_i`.
//! The softmax variant normalizes the same scores instead, and the
//! no-attention baseline takes the temporal mean.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{glorot_init, outer_acc, softmax, vec_mat_t_acc, Matrix, Parameters, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttentionMode {
    Tanh,
    Softmax,
    /// Column-wise mean of the hidden states.
    Mean,
}

/// `W` (`d × d`), `b` (`1 × d`) and `u` (`1 × d`, used as a column).
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub w: Matrix,
    pub b: Matrix,
    pub u: Matrix,
}

/// Scores, weights and pooled feature for one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    pub scores: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub feat: Vec<f64>,
}

/// Values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct AttentionTrace {
    mode: AttentionMode,
    h: Matrix,
    /// `tanh(H·W + b)`; absent for mean pooling.
    s: Option<Matrix>,
}

impl AttentionParams {
    pub fn new(d: usize, rng: &mut SeededRng) -> Self {
        AttentionParams {
            w: glorot_init(d, d, rng),
            b: Matrix::zeros(1, d),
            u: glorot_init(1, d, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        AttentionParams {
            w: self.w.zeros_like(),
            b: self.b.zeros_like(),
            u: self.u.zeros_like(),
        }
    }

    pub fn width(&self) -> usize {
        self.w.rows()
    }

    fn check(&self, h: &Matrix) -> Result<()> {
        if h.rows() == 0 {
            return Err(Error::input("attention over an empty sequence"));
        }
        if h.cols() != self.width() {
            return Err(Error::Shape {
                op: "attention",
                left: h.shape(),
                right: self.w.shape(),
            });
        }
        Ok(())
    }

    fn scores(&self, h: &Matrix) -> Result<(Matrix, Vec<f64>)> {
        let s = h.matmul(&self.w)?.add_row(&self.b)?.map(f64::tanh);
        let scores = (0..s.rows())
            .map(|i| s.row(i).iter().zip(self.u.data()).map(|(a, b)| a * b).sum())
            .collect();
        Ok((s, scores))
    }

    /// tanh attention.
    pub fn attend_tanh(&self, h: &Matrix) -> Result<AttentionOutput> {
        Ok(self.attend(AttentionMode::Tanh, h)?.0)
    }

    /// Conventional softmax attention over the same scores.
    pub fn attend_softmax(&self, h: &Matrix) -> Result<AttentionOutput> {
        Ok(self.attend(AttentionMode::Softmax, h)?.0)
    }

    pub fn attend(&self, mode: AttentionMode, h: &Matrix) -> Result<(AttentionOutput, AttentionTrace)> {
        if mode == AttentionMode::Mean {
            return pool_mean(h);
        }
        self.check(h)?;
        let (s, scores) = self.scores(h)?;
        let lambdas = match mode {
            AttentionMode::Tanh => scores.iter().map(|v| v.tanh()).collect(),
            AttentionMode::Softmax => softmax(&scores),
            AttentionMode::Mean => unreachable!(),
        };
        let feat = weighted_sum(h, &lambdas);
        let trace = AttentionTrace {
            mode,
            h: h.clone(),
            s: Some(s),
        };
        Ok((AttentionOutput { scores, lambdas, feat }, trace))
    }

    /// Gradients of the pooled feature's upstream `d_feat` with respect to
    /// the parameters and to `H`.
    pub fn backward(
        &self,
        out: &AttentionOutput,
        trace: &AttentionTrace,
        d_feat: &[f64],
    ) -> Result<(AttentionParams, Matrix)> {
        let mut grads = self.zeros_like();
        let d_h = pool_backward(out, trace, d_feat)?;
        let Some(s) = &trace.s else {
            return Ok((grads, d_h));
        };
        let h = &trace.h;
        let n = h.rows();
        let d_lambda: Vec<f64> = (0..n)
            .map(|i| h.row(i).iter().zip(d_feat).map(|(a, b)| a * b).sum())
            .collect();
        let d_score: Vec<f64> = match trace.mode {
            AttentionMode::Tanh => d_lambda
                .iter()
                .zip(&out.lambdas)
                .map(|(g, l)| g * (1.0 - l * l))
                .collect(),
            AttentionMode::Softmax => {
                let mean: f64 = d_lambda.iter().zip(&out.lambdas).map(|(g, l)| g * l).sum();
                d_lambda
                    .iter()
                    .zip(&out.lambdas)
                    .map(|(g, l)| l * (g - mean))
                    .collect()
            }
            AttentionMode::Mean => unreachable!(),
        };
        let mut d_h = d_h;
        let mut d_a = Matrix::zeros(n, self.width());
        for i in 0..n {
            for (j, (da, &sij)) in d_a.row_mut(i).iter_mut().zip(s.row(i)).enumerate() {
                *da = d_score[i] * self.u.data()[j] * (1.0 - sij * sij);
            }
            for (gu, &sij) in grads.u.data_mut().iter_mut().zip(s.row(i)) {
                *gu += d_score[i] * sij;
            }
            outer_acc(&mut grads.w, h.row(i), d_a.row(i));
            vec_mat_t_acc(d_a.row(i), &self.w, d_h.row_mut(i));
        }
        grads.b = d_a.col_sum();
        Ok((grads, d_h))
    }
}

fn weighted_sum(h: &Matrix, lambdas: &[f64]) -> Vec<f64> {
    let mut feat = vec![0.0; h.cols()];
    for (i, &l) in lambdas.iter().enumerate() {
        for (f, v) in feat.iter_mut().zip(h.row(i)) {
            *f += l * v;
        }
    }
    feat
}

/// Gradient w.r.t. `H` through the weighted sum, holding weights fixed.
fn pool_backward(out: &AttentionOutput, trace: &AttentionTrace, d_feat: &[f64]) -> Result<Matrix> {
    let h = &trace.h;
    if d_feat.len() != h.cols() || out.lambdas.len() != h.rows() {
        return Err(Error::Shape {
            op: "attention backward",
            left: h.shape(),
            right: (out.lambdas.len(), d_feat.len()),
        });
    }
    let mut d_h = Matrix::zeros(h.rows(), h.cols());
    for (i, &l) in out.lambdas.iter().enumerate() {
        for (g, &df) in d_h.row_mut(i).iter_mut().zip(d_feat) {
            *g = l * df;
        }
    }
    Ok(d_h)
}

fn pool_mean(h: &Matrix) -> Result<(AttentionOutput, AttentionTrace)> {
    if h.rows() == 0 {
        return Err(Error::input("pooling an empty sequence"));
    }
    let n = h.rows();
    let lambdas = vec![1.0 / n as f64; n];
    let feat = h.col_sum().data().iter().map(|v| v / n as f64).collect();
    let out = AttentionOutput {
        scores: vec![0.0; n],
        lambdas,
        feat,
    };
    let trace = AttentionTrace {
        mode: AttentionMode::Mean,
        h: h.clone(),
        s: None,
    };
    Ok((out, trace))
}

/// Temporal mean pooling used when attention is ablated.
pub fn pool_noatt(h: &Matrix) -> Result<Vec<f64>> {
    Ok(pool_mean(h)?.0.feat)
}

/// Pools `h` with `mode`, using `params` for the two attention variants.
pub fn attend(
    mode: AttentionMode,
    params: Option<&AttentionParams>,
    h: &Matrix,
) -> Result<(AttentionOutput, AttentionTrace)> {
    match (mode, params) {
        (AttentionMode::Mean, _) => pool_mean(h),
        (_, Some(p)) => p.attend(mode, h),
        (_, None) => Err(Error::State(format!("{mode:?} attention has no parameters"))),
    }
}

/// Backward counterpart of [`attend`]; parameter gradients are `None` for
/// mean pooling.
pub fn attend_backward(
    params: Option<&AttentionParams>,
    out: &AttentionOutput,
    trace: &AttentionTrace,
    d_feat: &[f64],
) -> Result<(Option<AttentionParams>, Matrix)> {
    match (trace.mode, params) {
        (AttentionMode::Mean, _) => Ok((None, pool_backward(out, trace, d_feat)?)),
        (_, Some(p)) => {
            let (g, d_h) = p.backward(out, trace, d_feat)?;
            Ok((Some(g), d_h))
        }
        (mode, None) => Err(Error::State(format!("{mode:?} attention has no parameters"))),
    }
}

impl Parameters for AttentionParams {
    fn tensors(&self) -> Vec<(String, &Matrix)> {
        vec![
            ("w".to_string(), &self.w),
            ("b".to_string(), &self.b),
            ("u".to_string(), &self.u),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.w, &mut self.b, &mut self.u]
    }
}

//! Minimal reverse-mode tape over whole matrices.
//!
//! The model's layers carry handwritten backward rules; this tape is the
//! generic route, used to cross-check those rules and for ad-hoc
//! computations.

use super::{Activation, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    AddRow(usize, usize),
    Hadamard(usize, usize),
    Act(Activation, usize),
    OneMinus(usize),
    Rows(usize, usize),
    VStack(usize, usize),
    TMatMul(usize, usize),
    Sum(usize),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Matrix,
}

/// Records a computation for a later reverse sweep.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Matrix) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn leaf(&mut self, m: Matrix) -> Var {
        self.push(Op::Leaf, m)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::MatMul(a.0, b.0), v))
    }

    /// `aᵀ · b`
    pub fn t_matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).t_matmul(self.value(b))?;
        Ok(self.push(Op::TMatMul(a.0, b.0), v))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).add(self.value(b))?;
        Ok(self.push(Op::Add(a.0, b.0), v))
    }

    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let v = self.value(a).add_row(self.value(bias))?;
        Ok(self.push(Op::AddRow(a.0, bias.0), v))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).hadamard(self.value(b))?;
        Ok(self.push(Op::Hadamard(a.0, b.0), v))
    }

    pub fn activate(&mut self, f: Activation, a: Var) -> Var {
        let v = self.value(a).map(|x| f.eval(x));
        self.push(Op::Act(f, a.0), v)
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| 1.0 - x);
        self.push(Op::OneMinus(a.0), v)
    }

    /// Single row `r` of `a`.
    pub fn row(&mut self, a: Var, r: usize) -> Var {
        let v = self.value(a).slice_rows(r, r + 1);
        self.push(Op::Rows(a.0, r), v)
    }

    pub fn vstack(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).vstack(self.value(b))?;
        Ok(self.push(Op::VStack(a.0, b.0), v))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.push(Op::Sum(a.0), Matrix::from_raw(1, 1, vec![s]))
    }

    /// Reverse sweep from `output`, seeded with `upstream` (same shape as the
    /// output). Returns one gradient per recorded node, indexable by `Var`.
    pub fn backward(&self, output: Var, upstream: &Matrix) -> Result<TapeGrads> {
        if self.nodes.is_empty() {
            return Err(Error::State("backward called before any forward computation".into()));
        }
        if output.0 >= self.nodes.len() {
            return Err(Error::State(format!("variable {} was not recorded", output.0)));
        }
        if upstream.shape() != self.value(output).shape() {
            return Err(Error::Shape {
                op: "Tape::backward",
                left: self.value(output).shape(),
                right: upstream.shape(),
            });
        }
        let mut grads: Vec<Matrix> = self.nodes.iter().map(|n| n.value.zeros_like()).collect();
        grads[output.0] = upstream.clone();

        for i in (0..=output.0).rev() {
            let g = std::mem::replace(&mut grads[i], Matrix::zeros(0, 0));
            match self.nodes[i].op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let ga = g.matmul_t(&self.nodes[b].value)?;
                    let gb = self.nodes[a].value.t_matmul(&g)?;
                    grads[a].add_assign(&ga)?;
                    grads[b].add_assign(&gb)?;
                }
                Op::TMatMul(a, b) => {
                    // y = aᵀb: dA = b·gᵀ, dB = a·g
                    let ga = self.nodes[b].value.matmul_t(&g)?;
                    let gb = self.nodes[a].value.matmul(&g)?;
                    grads[a].add_assign(&ga)?;
                    grads[b].add_assign(&gb)?;
                }
                Op::Add(a, b) => {
                    grads[a].add_assign(&g)?;
                    grads[b].add_assign(&g)?;
                }
                Op::AddRow(a, b) => {
                    grads[a].add_assign(&g)?;
                    grads[b].add_assign(&g.col_sum())?;
                }
                Op::Hadamard(a, b) => {
                    let ga = g.hadamard(&self.nodes[b].value)?;
                    let gb = g.hadamard(&self.nodes[a].value)?;
                    grads[a].add_assign(&ga)?;
                    grads[b].add_assign(&gb)?;
                }
                Op::Act(f, a) => {
                    let local = self.nodes[i].value.map(|y| f.derivative_from_output(y));
                    grads[a].add_assign(&g.hadamard(&local)?)?;
                }
                Op::OneMinus(a) => {
                    grads[a].add_assign(&g.scale(-1.0))?;
                }
                Op::Rows(a, r) => {
                    for (d, s) in grads[a].row_mut(r).iter_mut().zip(g.data()) {
                        *d += s;
                    }
                }
                Op::VStack(a, b) => {
                    let top = self.nodes[a].value.rows();
                    grads[a].add_assign(&g.slice_rows(0, top))?;
                    grads[b].add_assign(&g.slice_rows(top, g.rows()))?;
                }
                Op::Sum(a) => {
                    let s = g.get(0, 0);
                    let ga = self.nodes[a].value.map(|_| s);
                    grads[a].add_assign(&ga)?;
                }
            }
            grads[i] = g;
        }
        Ok(TapeGrads { grads })
    }
}

/// Gradients produced by [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct TapeGrads {
    grads: Vec<Matrix>,
}

impl TapeGrads {
    pub fn get(&self, v: Var) -> &Matrix {
        &self.grads[v.0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_tanh_at_zero_gives_ones() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::zeros(2, 3));
        let y = t.activate(Activation::Tanh, x);
        let s = t.sum(y);
        let g = t.backward(s, &Matrix::filled(1, 1, 1.0)).unwrap();
        assert_eq!(g.get(x), &Matrix::filled(2, 3, 1.0));
    }

    #[test]
    fn constant_output_gives_zero_gradients() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::filled(1, 2, 0.3));
        let c = t.leaf(Matrix::filled(1, 1, 5.0));
        let _unused = t.activate(Activation::Sigmoid, x);
        let g = t.backward(c, &Matrix::filled(1, 1, 1.0)).unwrap();
        assert_eq!(g.get(x), &Matrix::zeros(1, 2));
    }

    #[test]
    fn backward_before_forward_is_a_state_error() {
        let t = Tape::new();
        let err = t.backward(Var(0), &Matrix::filled(1, 1, 1.0)).unwrap_err();
        assert!(matches!(err, Error::State(_)));
    }

    #[test]
    fn matmul_gradient_matches_finite_differences() {
        use crate::numkernel::{finite_diff_grad, max_relative_error};
        let a0 = Matrix::from_rows(&[vec![0.3, -0.2, 0.5], vec![0.1, 0.4, -0.6]]).unwrap();
        let b0 = Matrix::from_rows(&[vec![0.2, 0.7], vec![-0.3, 0.1], vec![0.5, -0.4]]).unwrap();
        let loss = |p: &Vec<Matrix>| {
            let mut t = Tape::new();
            let a = t.leaf(p[0].clone());
            let b = t.leaf(p[1].clone());
            let c = t.matmul(a, b).unwrap();
            let d = t.activate(Activation::Tanh, c);
            let e = t.t_matmul(d, a).unwrap();
            let s = t.sum(e);
            t.value(s).get(0, 0)
        };
        let params = vec![a0.clone(), b0.clone()];
        let numeric = finite_diff_grad(loss, &params, 1e-5).unwrap();

        let mut t = Tape::new();
        let a = t.leaf(a0);
        let b = t.leaf(b0);
        let c = t.matmul(a, b).unwrap();
        let d = t.activate(Activation::Tanh, c);
        let e = t.t_matmul(d, a).unwrap();
        let s = t.sum(e);
        let g = t.backward(s, &Matrix::filled(1, 1, 1.0)).unwrap();
        let err = max_relative_error(&[g.get(a), g.get(b)], &numeric, 1e-8);
        assert!(err < 1e-6, "relative error {err}");
    }
}

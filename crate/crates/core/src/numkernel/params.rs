use super::Matrix;

/// A named, ordered collection of trainable matrices.
///
/// Order is stable: optimizers, gradient checks, digests and checkpoints all
/// rely on `tensors` and `tensors_mut` enumerating the same sequence.
pub trait Parameters {
    fn tensors(&self) -> Vec<(String, &Matrix)>;
    fn tensors_mut(&mut self) -> Vec<&mut Matrix>;

    fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, m)| m.len()).sum()
    }
}

impl Parameters for Matrix {
    fn tensors(&self) -> Vec<(String, &Matrix)> {
        vec![("m".to_string(), self)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![self]
    }
}

impl Parameters for Vec<Matrix> {
    fn tensors(&self) -> Vec<(String, &Matrix)> {
        self.iter().enumerate().map(|(i, m)| (i.to_string(), m)).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        self.iter_mut().collect()
    }
}

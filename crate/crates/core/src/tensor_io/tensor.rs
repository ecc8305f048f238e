use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("tensor shape must have at least one dimension")]
    EmptyShape,
    #[error("tensor dimension {axis} is zero")]
    ZeroDim { axis: usize },
    #[error("shape {shape:?} holds {expected} values but {actual} were given")]
    LengthMismatch { shape: Vec<usize>, expected: usize, actual: usize },
    #[error("element count of shape {0:?} overflows")]
    Overflow(Vec<usize>),
}

/// Dense row-major tensor of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

pub(crate) fn element_count(shape: &[usize]) -> Result<usize, TensorError> {
    if shape.is_empty() {
        return Err(TensorError::EmptyShape);
    }
    let mut n: usize = 1;
    for (axis, &d) in shape.iter().enumerate() {
        if d == 0 {
            return Err(TensorError::ZeroDim { axis });
        }
        n = n.checked_mul(d).ok_or_else(|| TensorError::Overflow(shape.to_vec()))?;
    }
    Ok(n)
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, TensorError> {
        let expected = element_count(&shape)?;
        if data.len() != expected {
            return Err(TensorError::LengthMismatch { shape, expected, actual: data.len() });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self, TensorError> {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: Vec<usize>, value: f64) -> Result<Self, TensorError> {
        let n = element_count(&shape)?;
        Ok(Self { shape, data: vec![value; n] })
    }

    /// Builds a tensor by evaluating `f` at every flat index.
    pub fn from_fn(shape: Vec<usize>, f: impl FnMut(usize) -> f64) -> Result<Self, TensorError> {
        let n = element_count(&shape)?;
        Ok(Self { shape, data: (0..n).map(f).collect() })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self, TensorError> {
        Self::new(shape, self.data)
    }

    /// Contiguous slice of the sub-tensor at `index` along axis 0.
    pub fn outer(&self, index: usize) -> &[f64] {
        let stride = self.data.len() / self.shape[0];
        &self.data[index * stride..(index + 1) * stride]
    }

    /// Sub-tensor at `index` along axis 0, as an owned tensor of rank − 1.
    pub fn outer_tensor(&self, index: usize) -> Tensor {
        let shape = if self.shape.len() > 1 { self.shape[1..].to_vec() } else { vec![1] };
        Tensor { shape, data: self.outer(index).to_vec() }
    }

    /// Stacks equally-shaped tensors along a new leading axis.
    pub fn stack(items: &[Tensor]) -> Result<Tensor, TensorError> {
        let first = items.first().ok_or(TensorError::EmptyShape)?;
        let mut shape = vec![items.len()];
        shape.extend_from_slice(&first.shape);
        let mut data = Vec::with_capacity(first.len() * items.len());
        for t in items {
            if t.shape != first.shape {
                return Err(TensorError::LengthMismatch {
                    shape: first.shape.clone(),
                    expected: first.len(),
                    actual: t.len(),
                });
            }
            data.extend_from_slice(&t.data);
        }
        Tensor::new(shape, data)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert_eq!(Tensor::zeros(vec![]), Err(TensorError::EmptyShape));
        assert_eq!(Tensor::zeros(vec![2, 0]), Err(TensorError::ZeroDim { axis: 1 }));
        assert!(matches!(
            Tensor::new(vec![2, 2], vec![0.0; 3]),
            Err(TensorError::LengthMismatch { expected: 4, actual: 3, .. })
        ));
        assert!(matches!(Tensor::zeros(vec![usize::MAX, 2]), Err(TensorError::Overflow(_))));
    }

    #[test]
    fn outer_slices_leading_axis() {
        let t = Tensor::from_fn(vec![3, 2], |i| i as f64).unwrap();
        assert_eq!(t.outer(1), &[2.0, 3.0]);
        assert_eq!(t.outer_tensor(2).shape(), &[2]);
        let s = Tensor::stack(&[t.outer_tensor(0), t.outer_tensor(2)]).unwrap();
        assert_eq!(s.data(), &[0.0, 1.0, 4.0, 5.0]);
    }
}

//! Row-major dense tensor with cheap (reference-counted) clones.

use super::real::Real;
use std::sync::Arc;

/// Dense real tensor. `shape` extents are positive; `data` is row-major and
/// its length always equals the product of the extents (1 for rank 0).
/// Values are immutable once produced by an operation; `data_mut` copies on
/// write when the buffer is shared.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Arc<Vec<T>>,
}

impl<T: Real> Tensor<T> {
    pub fn from_vec(shape: Vec<usize>, data: Vec<T>) -> Self {
        assert!(
            shape.iter().all(|&e| e > 0),
            "tensor extents must be positive, got {shape:?}"
        );
        let expect: usize = shape.iter().product();
        assert_eq!(
            expect,
            data.len(),
            "tensor data length {} does not match shape {:?}",
            data.len(),
            shape
        );
        Tensor {
            shape,
            data: Arc::new(data),
        }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        Self::from_vec(shape, vec![T::ZERO; n])
    }

    pub fn filled(shape: Vec<usize>, value: T) -> Self {
        let n: usize = shape.iter().product();
        Self::from_vec(shape, vec![value; n])
    }

    /// Tensor of independent draws from uniform(lo, hi). Values are drawn in
    /// f64 and narrowed, so 32- and 64-bit runs consume the generator
    /// identically.
    pub fn uniform(shape: Vec<usize>, lo: f64, hi: f64, rng: &mut impl rand::Rng) -> Self {
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| T::from_f64(rng.gen_range(lo..hi)))
            .collect();
        Self::from_vec(shape, data)
    }

    /// Rank-0 tensor holding a single value.
    pub fn scalar(value: T) -> Self {
        Self::from_vec(vec![], vec![value])
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
        false
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        if Arc::get_mut(&mut self.data).is_none() {
            self.data = Arc::new((*self.data).clone());
        }
        Arc::get_mut(&mut self.data).expect("unique after copy-on-write")
    }

    /// The single value of a rank-0 or one-element tensor.
    pub fn item(&self) -> T {
        assert_eq!(self.len(), 1, "item() on tensor of shape {:?}", self.shape);
        self.data[0]
    }

    /// (rows, cols) of a rank-2 tensor.
    pub fn dims2(&self) -> (usize, usize) {
        assert_eq!(self.rank(), 2, "dims2() on tensor of shape {:?}", self.shape);
        (self.shape[0], self.shape[1])
    }

    pub fn dim1(&self) -> usize {
        assert_eq!(self.rank(), 1, "dim1() on tensor of shape {:?}", self.shape);
        self.shape[0]
    }

    pub fn row(&self, i: usize) -> &[T] {
        let (rows, cols) = self.dims2();
        assert!(i < rows, "row {i} out of bounds for {rows} rows");
        &self.data[i * cols..(i + 1) * cols]
    }

    pub fn get2(&self, i: usize, j: usize) -> T {
        let (_, cols) = self.dims2();
        self.data[i * cols + j]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: Arc::new(self.data.iter().map(|&x| f(x)).collect()),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(
            self.shape, other.shape,
            "zip_map: shape {:?} vs {:?}",
            self.shape, other.shape
        );
        Tensor {
            shape: self.shape.clone(),
            data: Arc::new(
                self.data
                    .iter()
                    .zip(other.data.iter())
                    .map(|(&a, &b)| f(a, b))
                    .collect(),
            ),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Elementwise accumulate: `self += other`. Shapes must match.
    pub fn accumulate(&mut self, other: &Self) {
        assert_eq!(
            self.shape, other.shape,
            "accumulate: shape {:?} vs {:?}",
            self.shape, other.shape
        );
        let dst = self.data_mut();
        for (d, &s) in dst.iter_mut().zip(other.data.iter()) {
            *d += s;
        }
    }

    pub fn scale_values(&self, c: T) -> Self {
        self.map(|x| x * c)
    }

    /// Convert elementwise to another precision.
    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor::from_vec(
            self.shape.clone(),
            self.data.iter().map(|&x| U::from_f64(x.to_f64())).collect(),
        )
    }
}

//! Dense row-major tensors with an optional gradient slot.
//!
//! The element type is generic: the training pipeline runs in `f32`, gradient
//! verification instantiates the same code at `f64`.

use crate::error::{Error, Result};

/// Dtype tag stored in checkpoint files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32 = 0,
    F64 = 1,
}

impl Dtype {
    pub fn from_tag(tag: u8) -> Result<Dtype> {
        match tag {
            0 => Ok(Dtype::F32),
            1 => Ok(Dtype::F64),
            t => Err(Error::Corrupt {
                what: "checkpoint".into(),
                detail: format!("unknown dtype tag {t}"),
            }),
        }
    }
}

/// Scalar element of a tensor. Implemented for `f32` and `f64`.
pub trait Scalar:
    num_traits::Float + num_traits::NumAssign + Send + Sync + std::fmt::Debug + std::fmt::Display + 'static
{
    const DTYPE: Dtype;

    /// Convert an `f64` constant into this scalar type.
    fn c(v: f64) -> Self {
        num_traits::cast(v).unwrap()
    }

    fn f64(self) -> f64;

    fn to_le_bytes_vec(self) -> Vec<u8>;
    fn from_le_slice(bytes: &[u8]) -> Self;
    const BYTES: usize;
}

impl Scalar for f32 {
    const DTYPE: Dtype = Dtype::F32;
    const BYTES: usize = 4;

    fn f64(self) -> f64 {
        self as f64
    }

    fn to_le_bytes_vec(self) -> Vec<u8> {
        self.to_le_bytes().to_vec()
    }

    fn from_le_slice(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().unwrap())
    }
}

impl Scalar for f64 {
    const DTYPE: Dtype = Dtype::F64;
    const BYTES: usize = 8;

    fn f64(self) -> f64 {
        self
    }

    fn to_le_bytes_vec(self) -> Vec<u8> {
        self.to_le_bytes().to_vec()
    }

    fn from_le_slice(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().unwrap())
    }
}

/// Dense real-valued n-dimensional array in row-major order, with an optional
/// same-shape gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T: Scalar> {
    shape: Vec<usize>,
    data: Vec<T>,
    grad: Option<Vec<T>>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Self {
        let expected: usize = shape.iter().product();
        assert_eq!(
            data.len(),
            expected,
            "shape {:?} expects {} elements, got {}",
            shape,
            expected,
            data.len()
        );
        assert!(shape.iter().all(|&d| d > 0), "zero extent in shape {shape:?}");
        Tensor { shape, data, grad: None }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        Tensor::new(shape, vec![T::zero(); n])
    }

    pub fn scalar(v: T) -> Self {
        Tensor::new(vec![1], vec![v])
    }

    pub fn from_f64(shape: Vec<usize>, data: &[f64]) -> Self {
        Tensor::new(shape, data.iter().map(|&v| T::c(v)).collect())
    }

    pub fn from_f32(shape: Vec<usize>, data: &[f32]) -> Self {
        Tensor::new(shape, data.iter().map(|&v| T::c(v as f64)).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.f64()).collect()
    }

    /// Cast to another scalar type through f64.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor::new(
            self.shape.clone(),
            self.data.iter().map(|v| U::c(v.f64())).collect(),
        )
    }

    pub fn reshape(&self, shape: Vec<usize>) -> Tensor<T> {
        assert_eq!(
            self.len(),
            shape.iter().product::<usize>(),
            "reshape {:?} -> {:?} changes element count",
            self.shape,
            shape
        );
        Tensor::new(shape, self.data.clone())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Ensure the gradient slot exists (zero-filled) and return it.
    pub fn grad_mut(&mut self) -> &mut [T] {
        let n = self.data.len();
        self.grad.get_or_insert_with(|| vec![T::zero(); n])
    }

    pub fn grad(&self) -> Option<&[T]> {
        self.grad.as_deref()
    }

    pub fn has_grad(&self) -> bool {
        self.grad.is_some()
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = &mut self.grad {
            g.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    /// Accumulate `other` into this tensor's gradient slot.
    pub fn accumulate_grad(&mut self, other: &[T]) {
        let g = self.grad_mut();
        assert_eq!(g.len(), other.len(), "gradient length mismatch");
        for (a, b) in g.iter_mut().zip(other) {
            *a += *b;
        }
    }

    pub fn fill(&mut self, v: T) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn scale(&mut self, s: T) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.f64().abs()))
    }
}

/// Row-major matrix product: a is (m,k), b is (k,n), result (m,n).
/// Loop order keeps the inner access contiguous in both `a` and `b`.
pub fn matmul<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let o_row = &mut out[i * n..(i + 1) * n];
        for (p, &a_ip) in a_row.iter().enumerate() {
            let b_row = &b[p * n..(p + 1) * n];
            for (o, &bv) in o_row.iter_mut().zip(b_row) {
                *o += a_ip * bv;
            }
        }
    }
    out
}

/// a^T b where a is (k,m) and b is (k,n), result (m,n).
pub fn matmul_at_b<T: Scalar>(a: &[T], b: &[T], k: usize, m: usize, n: usize) -> Vec<T> {
    assert_eq!(a.len(), k * m);
    assert_eq!(b.len(), k * n);
    let mut out = vec![T::zero(); m * n];
    for p in 0..k {
        let a_row = &a[p * m..(p + 1) * m];
        let b_row = &b[p * n..(p + 1) * n];
        for (i, &a_pi) in a_row.iter().enumerate() {
            let o_row = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in o_row.iter_mut().zip(b_row) {
                *o += a_pi * bv;
            }
        }
    }
    out
}

/// a b^T where a is (m,k) and b is (n,k), result (m,n).
pub fn matmul_a_bt<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), n * k);
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let b_row = &b[j * k..(j + 1) * k];
            let mut s = T::zero();
            for (&av, &bv) in a_row.iter().zip(b_row) {
                s += av * bv;
            }
            out[i * n + j] = s;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_data_length_agree() {
        let t = Tensor::<f64>::zeros(vec![2, 3]);
        assert_eq!(t.len(), 6);
        assert_eq!(t.shape(), &[2, 3]);
    }

    #[test]
    #[should_panic]
    fn mismatched_length_panics() {
        let _ = Tensor::<f64>::new(vec![2, 2], vec![1.0; 3]);
    }

    #[test]
    fn grad_matches_shape() {
        let mut t = Tensor::<f32>::zeros(vec![4]);
        t.grad_mut()[2] = 1.5;
        assert_eq!(t.grad().unwrap().len(), t.len());
    }

    #[test]
    fn matmul_small() {
        // [1 2; 3 4] * [5 6; 7 8] = [19 22; 43 50]
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 7.0, 8.0];
        let c = matmul::<f64>(&a, &b, 2, 2, 2);
        assert_eq!(c, vec![19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn matmul_transpose_variants_agree() {
        let a = [1.0, -2.0, 0.5, 3.0, 4.0, -1.0]; // (2,3)
        let b = [2.0, 1.0, 0.0, -1.0, 1.0, 5.0]; // (3,2)
        let c = matmul::<f64>(&a, &b, 2, 3, 2);
        // a^T laid out as (3,2), use matmul_at_b with a^T stored row-major as original a read col-major
        let at = [1.0, 3.0, -2.0, 4.0, 0.5, -1.0]; // (3,2) = a^T
        let c2 = matmul_at_b::<f64>(&at, &b, 3, 2, 2);
        assert_eq!(c, c2);
        let bt = [2.0, 0.0, 1.0, 1.0, -1.0, 5.0]; // (2,3) = b^T
        let c3 = matmul_a_bt::<f64>(&a, &bt, 2, 3, 2);
        assert_eq!(c, c3);
    }
}

use nalgebra::DMatrix;

use crate::autodiff::Tensor;

pub(crate) fn to_na(t: &Tensor) -> DMatrix<f64> {
    DMatrix::from_row_slice(t.rows(), t.cols(), t.data())
}

pub(crate) fn from_na(m: &DMatrix<f64>) -> Tensor {
    let mut t = Tensor::zeros(&[m.nrows(), m.ncols()]);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            t.set(i, j, m[(i, j)]);
        }
    }
    t
}

/// Largest singular value.
pub fn spectral_norm(t: &Tensor) -> f64 {
    to_na(t).singular_values().iter().fold(0.0f64, |a, &s| a.max(s))
}

pub fn frobenius_sq(t: &Tensor) -> f64 {
    t.data().iter().map(|v| v * v).sum()
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

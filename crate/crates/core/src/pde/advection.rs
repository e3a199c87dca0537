//! First-order upwind advection `u_t = -c u_x` on a periodic line.

use super::grid::{wrap_next, wrap_prev};
use crate::autodiff::Tensor;

pub fn advection_tangent(u: &[f64], c: f64, h: f64) -> Vec<f64> {
    let n = u.len();
    let k = c / h;
    (0..n).map(|j| -k * u[j] + k * u[wrap_prev(j, n)]).collect()
}

/// Transpose of the upwind operator applied to `y`.
pub fn advection_tangent_transpose(y: &[f64], c: f64, h: f64) -> Vec<f64> {
    let n = y.len();
    let k = c / h;
    (0..n).map(|j| -k * y[j] + k * y[wrap_next(j, n)]).collect()
}

/// Dense upwind matrix `A` with `G(u) = A u`.
pub fn upwind_matrix(n: usize, c: f64, h: f64) -> Tensor {
    let mut a = Tensor::zeros(&[n, n]);
    for j in 0..n {
        a.set(j, j, -c / h);
        a.set(j, wrap_prev(j, n), a.get(j, wrap_prev(j, n)) + c / h);
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_is_steady() {
        assert!(advection_tangent(&[2.5; 7], 1.0, 0.1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_stencil() {
        assert_eq!(advection_tangent(&[1.0, 0.0, 0.0, 0.0], 1.0, 0.25), vec![-4.0, 4.0, 0.0, 0.0]);
    }

    #[test]
    fn matches_dense_matrix_exactly() {
        let u: Vec<f64> = (0..9).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.3).collect();
        let a = upwind_matrix(9, 1.3, 1.0 / 9.0);
        let dense = |m: &Tensor| -> Vec<f64> {
            (0..9).map(|r| (0..9).fold(0.0, |s, k| s + m.get(r, k) * u[k])).collect()
        };
        assert_eq!(dense(&a), advection_tangent(&u, 1.3, 1.0 / 9.0));
        assert_eq!(dense(&a.transpose()), advection_tangent_transpose(&u, 1.3, 1.0 / 9.0));
    }
}

//! Closed-form optimum of the one-step linear tangent fit.

use nalgebra::DMatrix;

use super::linalg::{from_na, to_na};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Singular values below this fraction of the largest count as zero.
pub const PINV_CUTOFF: f64 = 1e-10;

/// Centered snapshot matrix of initial states.
#[derive(Clone, Debug)]
pub struct SnapshotMatrix {
    /// `n x N`, states as columns.
    pub u0: Tensor,
    pub mean: Vec<f64>,
    pub centered: Tensor,
}

impl SnapshotMatrix {
    pub fn new(u0: Tensor) -> Result<Self> {
        if u0.rank() != 2 || u0.cols() == 0 {
            return Err(Error::dim("snapshot_matrix", format!("need an n x N matrix with N >= 1, got {:?}", u0.shape())));
        }
        let (n, m) = (u0.rows(), u0.cols());
        let mean: Vec<f64> = (0..n).map(|i| (0..m).map(|j| u0.get(i, j)).sum::<f64>() / m as f64).collect();
        let mut centered = u0.clone();
        for i in 0..n {
            for j in 0..m {
                centered.set(i, j, u0.get(i, j) - mean[i]);
            }
        }
        Ok(Self { u0, mean, centered })
    }

    /// Orthogonal projector onto the column space of the centered matrix.
    pub fn projector(&self) -> Tensor {
        let p = to_na(&self.centered);
        let n = p.nrows();
        let svd = p.svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let smax = svd.singular_values.iter().fold(0.0f64, |a, &s| a.max(s));
        let mut proj = DMatrix::<f64>::zeros(n, n);
        if smax > 0.0 {
            for (k, &s) in svd.singular_values.iter().enumerate() {
                if s > PINV_CUTOFF * smax {
                    let c = u.column(k);
                    proj += &c * c.transpose();
                }
            }
        }
        from_na(&proj)
    }
}

/// `W* = G P P^+`, `b* = G (I - P P^+) u_mean`.
pub fn linear_optimum(g: &Tensor, u0: &Tensor) -> Result<(Tensor, Vec<f64>)> {
    if g.rank() != 2 || g.rows() != g.cols() || g.cols() != u0.rows() {
        return Err(Error::dim("linear_optimum", format!("G {:?} with snapshots {:?}", g.shape(), u0.shape())));
    }
    let snaps = SnapshotMatrix::new(u0.clone())?;
    let proj = snaps.projector();
    let w = g.matmul(&proj)?;
    let resid = Tensor::identity(g.rows()).sub(&proj)?.matmul(&Tensor::vector(snaps.mean.clone()))?;
    let b = g.matmul(&resid)?.into_data();
    Ok((w, b))
}

//! 2D viscous Burgers right-hand side on a periodic square.
//!
//! Convection is first-order upwind, picking the stencil from the sign of the
//! local advecting velocity; diffusion is the central 5-point Laplacian.

use super::grid::{wrap_next, wrap_prev};

/// Which unknowns make up the state vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BurgersState {
    /// State is `u` only; the companion `v` is identically 1, which the
    /// system preserves exactly when `v0 = 1`.
    UOnly,
    /// State is `[u; v]`.
    Full,
}

impl BurgersState {
    pub fn len(self, n: usize) -> usize {
        match self {
            BurgersState::UOnly => n * n,
            BurgersState::Full => 2 * n * n,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Burgers {
    pub n: usize,
    pub nu: f64,
    pub state: BurgersState,
}

#[derive(Clone, Copy)]
enum Axis {
    X,
    Y,
}

#[inline]
fn neighbors(p: usize, n: usize, axis: Axis) -> (usize, usize) {
    let (i, j) = (p / n, p % n);
    match axis {
        Axis::X => (wrap_prev(i, n) * n + j, wrap_next(i, n) * n + j),
        Axis::Y => (i * n + wrap_prev(j, n), i * n + wrap_next(j, n)),
    }
}

/// Upwind difference of `w` at `p` for advecting velocity `a`.
#[inline]
fn upwind(w: &[f64], p: usize, n: usize, axis: Axis, a: f64, inv_h: f64) -> f64 {
    let (m, q) = neighbors(p, n, axis);
    if a > 0.0 {
        (w[p] - w[m]) * inv_h
    } else {
        (w[q] - w[p]) * inv_h
    }
}

/// Adds `z * D^s` transposed into `out` at node `p`.
#[inline]
fn upwind_transpose_add(out: &mut [f64], p: usize, n: usize, axis: Axis, a: f64, z: f64) {
    let (m, q) = neighbors(p, n, axis);
    if a > 0.0 {
        out[p] += z;
        out[m] -= z;
    } else {
        out[q] += z;
        out[p] -= z;
    }
}

fn laplacian_at(w: &[f64], p: usize, n: usize, inv_h2: f64) -> f64 {
    let (xm, xp) = neighbors(p, n, Axis::X);
    let (ym, yp) = neighbors(p, n, Axis::Y);
    (w[xm] + w[xp] + w[ym] + w[yp] - 4.0 * w[p]) * inv_h2
}

/// Central 5-point Laplacian on a periodic `n x n` grid.
pub fn laplacian(w: &[f64], n: usize) -> Vec<f64> {
    let inv_h2 = (n * n) as f64;
    (0..n * n).map(|p| laplacian_at(w, p, n, inv_h2)).collect()
}

impl Burgers {
    fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], Option<&'a [f64]>) {
        let m = self.n * self.n;
        match self.state {
            BurgersState::UOnly => (&x[..m], None),
            BurgersState::Full => (&x[..m], Some(&x[m..])),
        }
    }

    fn dim(&self) -> usize {
        self.state.len(self.n)
    }

    /// `-u D_x w - v D_y w + nu L w` for each field `w` of the state.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim(), "burgers state length");
        let n = self.n;
        let inv_h = n as f64;
        let inv_h2 = inv_h * inv_h;
        let (u, v) = self.split(x);
        let vel_v = |p: usize| v.map_or(1.0, |v| v[p]);
        let mut out = vec![0.0; x.len()];
        let fields: Vec<&[f64]> = std::iter::once(u).chain(v).collect();
        for (f, w) in fields.iter().enumerate() {
            let o = &mut out[f * n * n..(f + 1) * n * n];
            for p in 0..n * n {
                let (a, b) = (u[p], vel_v(p));
                o[p] = -a * upwind(w, p, n, Axis::X, a, inv_h) - b * upwind(w, p, n, Axis::Y, b, inv_h)
                    + self.nu * laplacian_at(w, p, n, inv_h2);
            }
        }
        out
    }

    /// Directional derivative along `d`, with the upwind choice frozen at `x`.
    pub fn jvp(&self, x: &[f64], d: &[f64]) -> Vec<f64> {
        let n = self.n;
        let inv_h = n as f64;
        let inv_h2 = inv_h * inv_h;
        let (u, v) = self.split(x);
        let (du, dv) = self.split(d);
        let mut out = vec![0.0; x.len()];
        let fields: Vec<(&[f64], &[f64])> = match (v, dv) {
            (Some(v), Some(dv)) => vec![(u, du), (v, dv)],
            _ => vec![(u, du)],
        };
        for (f, (w, dw)) in fields.iter().enumerate() {
            let o = &mut out[f * n * n..(f + 1) * n * n];
            for p in 0..n * n {
                let a = u[p];
                let b = v.map_or(1.0, |v| v[p]);
                let db = dv.map_or(0.0, |dv| dv[p]);
                let wx = upwind(w, p, n, Axis::X, a, inv_h);
                let wy = upwind(w, p, n, Axis::Y, b, inv_h);
                o[p] = -du[p] * wx - a * upwind(dw, p, n, Axis::X, a, inv_h) - db * wy
                    - b * upwind(dw, p, n, Axis::Y, b, inv_h)
                    + self.nu * laplacian_at(dw, p, n, inv_h2);
            }
        }
        out
    }

    /// Adjoint of [`Burgers::jvp`] applied to cotangent `y`.
    pub fn vjp(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let n = self.n;
        let m = n * n;
        let inv_h = n as f64;
        let (u, v) = self.split(x);
        let mut out = vec![0.0; x.len()];
        let nfields = if v.is_some() { 2 } else { 1 };
        for f in 0..nfields {
            let w = if f == 0 { u } else { v.unwrap() };
            let yf = &y[f * m..(f + 1) * m];
            for p in 0..m {
                let a = u[p];
                let b = v.map_or(1.0, |v| v[p]);
                let z = yf[p];
                out[p] -= z * upwind(w, p, n, Axis::X, a, inv_h);
                if v.is_some() {
                    out[m + p] -= z * upwind(w, p, n, Axis::Y, b, inv_h);
                }
                let wo = &mut out[f * m..(f + 1) * m];
                upwind_transpose_add(wo, p, n, Axis::X, a, -a * z * inv_h);
                upwind_transpose_add(wo, p, n, Axis::Y, b, -b * z * inv_h);
            }
            let lap = laplacian(yf, n);
            for (o, l) in out[f * m..(f + 1) * m].iter_mut().zip(lap) {
                *o += self.nu * l;
            }
        }
        out
    }
}

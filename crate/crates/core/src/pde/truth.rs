//! Truth tangent slopes `G(u)` behind a single interface.

use super::advection::{advection_tangent, advection_tangent_transpose, upwind_matrix};
use super::burgers::{Burgers, BurgersState};
use super::grid::Grid;
use super::navier_stokes::NavierStokes;
use crate::autodiff::{ColumnMap, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub enum TruthKind {
    Advection { c: f64 },
    Burgers(Burgers),
    NavierStokes(NavierStokes),
}

#[derive(Clone, Debug)]
pub struct TruthTangent {
    pub grid: Grid,
    pub kind: TruthKind,
}

impl TruthTangent {
    pub fn advection(grid: Grid, c: f64) -> Result<Self> {
        if grid.dim != 1 {
            return Err(Error::config("grid.dim", "advection runs on a 1D grid"));
        }
        if !(c > 0.0) {
            return Err(Error::config("advection.c", format!("wave speed must be positive, got {c}")));
        }
        Ok(Self { grid, kind: TruthKind::Advection { c } })
    }

    pub fn burgers(grid: Grid, nu: f64, state: BurgersState) -> Result<Self> {
        if grid.dim != 2 {
            return Err(Error::config("grid.dim", "burgers runs on a 2D grid"));
        }
        if !(nu > 0.0) {
            return Err(Error::config("burgers.nu", format!("viscosity must be positive, got {nu}")));
        }
        Ok(Self { grid, kind: TruthKind::Burgers(Burgers { n: grid.n, nu, state }) })
    }

    pub fn navier_stokes(grid: Grid, nu: f64, forcing: Vec<f64>) -> Result<Self> {
        if grid.dim != 2 {
            return Err(Error::config("grid.dim", "navier-stokes runs on a 2D grid"));
        }
        grid.require_pow2("grid.n")?;
        if !(nu > 0.0) {
            return Err(Error::config("ns.nu", format!("viscosity must be positive, got {nu}")));
        }
        if forcing.len() != grid.size() {
            return Err(Error::dim("navier_stokes", format!("forcing has {} entries for {} points", forcing.len(), grid.size())));
        }
        Ok(Self { grid, kind: TruthKind::NavierStokes(NavierStokes::new(grid.n, nu, forcing)) })
    }

    /// Length of the state vector.
    pub fn state_len(&self) -> usize {
        match &self.kind {
            TruthKind::Burgers(b) => b.state.len(self.grid.n),
            _ => self.grid.size(),
        }
    }

    /// Number of grid fields stacked in the state.
    pub fn fields(&self) -> usize {
        self.state_len() / self.grid.size()
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.kind, TruthKind::Advection { .. })
    }

    pub fn eval(&self, u: &[f64]) -> Vec<f64> {
        match &self.kind {
            TruthKind::Advection { c } => advection_tangent(u, *c, self.grid.h()),
            TruthKind::Burgers(b) => b.eval(u),
            TruthKind::NavierStokes(ns) => ns.eval(u),
        }
    }

    pub fn jvp(&self, u: &[f64], d: &[f64]) -> Vec<f64> {
        match &self.kind {
            TruthKind::Advection { c } => advection_tangent(d, *c, self.grid.h()),
            TruthKind::Burgers(b) => b.jvp(u, d),
            TruthKind::NavierStokes(ns) => ns.jvp(u, d),
        }
    }

    pub fn vjp(&self, u: &[f64], y: &[f64]) -> Vec<f64> {
        match &self.kind {
            TruthKind::Advection { c } => advection_tangent_transpose(y, *c, self.grid.h()),
            TruthKind::Burgers(b) => b.vjp(u, y),
            TruthKind::NavierStokes(ns) => ns.vjp(u, y),
        }
    }

    /// Dense Jacobian, assembled from exact directional derivatives.
    pub fn jacobian(&self, u: &[f64]) -> Tensor {
        let n = self.state_len();
        if let TruthKind::Advection { c } = self.kind {
            return upwind_matrix(n, c, self.grid.h());
        }
        let mut j = Tensor::zeros(&[n, n]);
        let mut e = vec![0.0; n];
        for col in 0..n {
            e[col] = 1.0;
            let jc = self.jvp(u, &e);
            for (row, v) in jc.into_iter().enumerate() {
                j.set(row, col, v);
            }
            e[col] = 0.0;
        }
        j
    }

    /// Largest forward-Euler step the explicit stability check allows at `u`,
    /// or `None` when no simple bound applies.
    pub fn explicit_step_limit(&self, u: &[f64]) -> Option<f64> {
        let h = self.grid.h();
        match &self.kind {
            TruthKind::Advection { c } => Some(h / c),
            TruthKind::Burgers(b) => {
                let m = self.grid.size();
                let umax = u[..m].iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let vmax = if u.len() > m { u[m..].iter().fold(0.0f64, |a, v| a.max(v.abs())) } else { 1.0 };
                Some(1.0 / ((umax + vmax) / h + 4.0 * b.nu / (h * h)))
            }
            TruthKind::NavierStokes(_) => None,
        }
    }
}

impl ColumnMap for TruthTangent {
    fn dim(&self) -> usize {
        self.state_len()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.eval(x)
    }

    fn vjp(&self, x: &[f64], cotangent: &[f64]) -> Vec<f64> {
        TruthTangent::vjp(self, x, cotangent)
    }
}

//! Time integration of a tangent slope: forward Euler, Adams-Bashforth 2,
//! Heun (RK2) and backward Euler with Newton.

use nalgebra::{DMatrix, DVector};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::model::{Mode, TangentNetwork};
use crate::pde::TruthTangent;

/// Right-hand side `f(u)` of `du/dt = f(u)`.
pub trait Slope {
    fn dim(&self) -> usize;
    fn slope(&self, u: &[f64]) -> Result<Vec<f64>>;
    fn slope_jacobian(&self, u: &[f64]) -> Result<Tensor>;
}

impl Slope for TruthTangent {
    fn dim(&self) -> usize {
        self.state_len()
    }
    fn slope(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(self.eval(u))
    }
    fn slope_jacobian(&self, u: &[f64]) -> Result<Tensor> {
        Ok(self.jacobian(u))
    }
}

impl Slope for TangentNetwork {
    fn dim(&self) -> usize {
        self.n()
    }
    fn slope(&self, u: &[f64]) -> Result<Vec<f64>> {
        if self.mode != Mode::Tangent {
            return Err(Error::Contract("a direct-mode network is not a slope".into()));
        }
        self.forward(u)
    }
    fn slope_jacobian(&self, u: &[f64]) -> Result<Tensor> {
        self.jacobian(u)
    }
}

/// Linear slope `A u + b`.
#[derive(Clone, Debug)]
pub struct AffineSlope {
    pub a: Tensor,
    pub b: Vec<f64>,
}

impl Slope for AffineSlope {
    fn dim(&self) -> usize {
        self.b.len()
    }
    fn slope(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.a.matmul(&Tensor::vector(u.to_vec()))?.into_data();
        y.iter_mut().zip(&self.b).for_each(|(y, b)| *y += b);
        Ok(y)
    }
    fn slope_jacobian(&self, _u: &[f64]) -> Result<Tensor> {
        Ok(self.a.clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { max_iterations: 50, tolerance: 1e-10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scheme {
    Fe,
    Ab2,
    Rk2,
    Be(NewtonOptions),
}

impl Scheme {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fe" => Ok(Scheme::Fe),
            "ab2" => Ok(Scheme::Ab2),
            "rk2" => Ok(Scheme::Rk2),
            "be" => Ok(Scheme::Be(NewtonOptions::default())),
            other => Err(Error::config("scheme", format!("unknown scheme '{other}' (fe, ab2, rk2, be)"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Fe => "fe",
            Scheme::Ab2 => "ab2",
            Scheme::Rk2 => "rk2",
            Scheme::Be(_) => "be",
        }
    }
}

fn axpy(u: &[f64], s: f64, d: &[f64]) -> Vec<f64> {
    u.iter().zip(d).map(|(a, b)| a + s * b).collect()
}

fn checked(f: Vec<f64>) -> Result<Vec<f64>> {
    if f.iter().all(|v| v.is_finite()) {
        Ok(f)
    } else {
        Err(Error::NonFinite("slope evaluation"))
    }
}

pub fn step_fe(f: &dyn Slope, u: &[f64], dt: f64) -> Result<Vec<f64>> {
    let g = checked(f.slope(u)?)?;
    Ok(axpy(u, dt, &g))
}

/// `u + dt (3/2 f(u) - 1/2 f(u_prev))`.
pub fn step_ab2(f: &dyn Slope, u_prev: &[f64], u: &[f64], dt: f64) -> Result<Vec<f64>> {
    let g = checked(f.slope(u)?)?;
    let gp = checked(f.slope(u_prev)?)?;
    Ok(u.iter().zip(g.iter().zip(&gp)).map(|(a, (g, gp))| a + 1.5 * dt * g - 0.5 * dt * gp).collect())
}

pub fn step_rk2(f: &dyn Slope, u: &[f64], dt: f64) -> Result<Vec<f64>> {
    let k1: Vec<f64> = checked(f.slope(u)?)?.iter().map(|g| dt * g).collect();
    let mid: Vec<f64> = u.iter().zip(&k1).map(|(a, b)| a + b).collect();
    let k2: Vec<f64> = checked(f.slope(&mid)?)?.iter().map(|g| dt * g).collect();
    Ok(u.iter().zip(k1.iter().zip(&k2)).map(|(a, (k1, k2))| a + (k1 + k2) / 2.0).collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual: f64,
}

/// Solves `w = u + dt f(w)` by Newton from `w = u`.
pub fn step_be(f: &dyn Slope, u: &[f64], dt: f64, opts: NewtonOptions) -> Result<(Vec<f64>, NewtonReport)> {
    let n = u.len();
    let mut w = u.to_vec();
    let mut iterations = 0;
    loop {
        let g = checked(f.slope(&w)?)?;
        let res: Vec<f64> = (0..n).map(|i| w[i] - u[i] - dt * g[i]).collect();
        let residual = res.iter().map(|r| r * r).sum::<f64>().sqrt();
        if residual <= opts.tolerance {
            return Ok((w, NewtonReport { iterations, residual }));
        }
        if iterations >= opts.max_iterations || !residual.is_finite() {
            return Err(Error::ImplicitSolve { iterations, residual });
        }
        let jf = f.slope_jacobian(&w)?;
        let mut jac = DMatrix::from_row_slice(n, n, jf.data());
        jac *= -dt;
        for i in 0..n {
            jac[(i, i)] += 1.0;
        }
        let rhs = DVector::from_iterator(n, res.iter().map(|r| -r));
        let delta = jac.lu().solve(&rhs).ok_or(Error::LinearSolve)?;
        w.iter_mut().zip(delta.iter()).for_each(|(w, d)| *w += d);
        iterations += 1;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutResult {
    /// `u^0 ..`, truncated before the first state that tripped the threshold.
    pub states: Vec<Vec<f64>>,
    pub diverged_at: Option<usize>,
    /// Final Newton residual per step (backward Euler only).
    pub residuals: Vec<f64>,
}

pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

fn blown_up(u: &[f64]) -> bool {
    u.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_THRESHOLD)
}

/// `n_steps` steps of `scheme` from `u0`; stops early on divergence.
pub fn rollout(scheme: Scheme, f: &dyn Slope, u0: &[f64], dt: f64, n_steps: usize) -> Result<RolloutResult> {
    if u0.len() != f.dim() {
        return Err(Error::dim("rollout", format!("state of length {} for slope of dim {}", u0.len(), f.dim())));
    }
    let mut states = vec![u0.to_vec()];
    let mut residuals = Vec::new();
    for k in 1..=n_steps {
        let u = &states[k - 1];
        let next = match scheme {
            Scheme::Fe => step_fe(f, u, dt),
            Scheme::Rk2 => step_rk2(f, u, dt),
            Scheme::Ab2 if k == 1 => step_fe(f, u, dt),
            Scheme::Ab2 => step_ab2(f, &states[k - 2], u, dt),
            Scheme::Be(opts) => step_be(f, u, dt, opts).map(|(w, rep)| {
                residuals.push(rep.residual);
                w
            }),
        };
        let next = match next {
            Err(Error::NonFinite(_)) => return Ok(RolloutResult { states, diverged_at: Some(k), residuals }),
            other => other?,
        };
        if blown_up(&next) {
            return Ok(RolloutResult { states, diverged_at: Some(k), residuals });
        }
        states.push(next);
    }
    Ok(RolloutResult { states, diverged_at: None, residuals })
}

/// Chained next-state predictions of a direct-mode network.
pub fn rollout_direct(net: &TangentNetwork, u0: &[f64], n_steps: usize) -> Result<RolloutResult> {
    let mut states = vec![u0.to_vec()];
    for k in 1..=n_steps {
        let next = net.direct_step(&states[k - 1])?;
        if blown_up(&next) {
            return Ok(RolloutResult { states, diverged_at: Some(k), residuals: vec![] });
        }
        states.push(next);
    }
    Ok(RolloutResult { states, diverged_at: None, residuals: vec![] })
}

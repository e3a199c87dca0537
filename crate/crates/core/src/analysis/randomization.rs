//! Monte-Carlo check of the small-noise expansion of the one-step losses.
//!
//! With `eps ~ N(0, sigma^2 I)` and mean-of-squares losses on `n` entries,
//! the second-order terms are `sigma^2 P1 / n` and `sigma^2 Q1 / n`.

use super::linalg::frobenius_sq;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::model::TangentNetwork;
use crate::pde::TruthTangent;
use crate::rng;
use crate::training::train::noise_vector;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TermEstimate {
    /// Loss at the clean input.
    pub clean: f64,
    /// Exact trace term (`P1` or `Q1`).
    pub trace: f64,
    /// Monte-Carlo mean of the loss at noisy inputs.
    pub mc_mean: f64,
    pub mc_stderr: f64,
    /// `mc_mean - clean - sigma^2 trace / n`.
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomizationDiagnostics {
    /// Absolute noise standard deviation.
    pub sigma: f64,
    pub samples: usize,
    pub ml: TermEstimate,
    pub mc: TermEstimate,
}

fn mse(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64
}

/// Data-term loss `MSE(target - (x + dt Psi(x)))`.
pub fn ml_loss(net: &TangentNetwork, x: &[f64], target: &[f64], dt: f64) -> Result<f64> {
    let p = net.forward(x)?;
    Ok(mse(&(0..x.len()).map(|k| target[k] - x[k] - dt * p[k]).collect::<Vec<_>>()))
}

/// Model-term loss `MSE(dt (G(x) - Psi(x)))` for one step from `x`.
pub fn mc_loss(net: &TangentNetwork, truth: &TruthTangent, x: &[f64], dt: f64) -> Result<f64> {
    let p = net.forward(x)?;
    let g = truth.eval(x);
    Ok(mse(&(0..x.len()).map(|k| dt * (g[k] - p[k])).collect::<Vec<_>>()))
}

/// `Tr[(I + dt J_Psi)^T (I + dt J_Psi)]` at `u`.
pub fn p1(net: &TangentNetwork, u: &[f64], dt: f64) -> Result<f64> {
    let j = net.jacobian(u)?;
    Ok(frobenius_sq(&Tensor::identity(u.len()).add(&j.scale(dt))?))
}

/// `dt^2 Tr[(J_G - J_Psi)^T (J_G - J_Psi)]` at `u`.
pub fn q1(net: &TangentNetwork, truth: &TruthTangent, u: &[f64], dt: f64) -> Result<f64> {
    let d = truth.jacobian(u).sub(&net.jacobian(u)?)?;
    Ok(dt * dt * frobenius_sq(&d))
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Compares Monte-Carlo noisy losses with their clean value plus the trace
/// term. The data-term target defaults to the truth forward-Euler step.
pub fn randomization_check(
    net: &TangentNetwork,
    truth: &TruthTangent,
    u: &[f64],
    target: Option<&[f64]>,
    sigma: f64,
    samples: usize,
    dt: f64,
    seed: u64,
) -> Result<RandomizationDiagnostics> {
    if samples == 0 {
        return Err(Error::config("diagnose.samples", "need at least one draw"));
    }
    let n = u.len();
    let fe_target: Vec<f64>;
    let target = match target {
        Some(t) => t,
        None => {
            let g = truth.eval(u);
            fe_target = u.iter().zip(&g).map(|(a, b)| a + dt * b).collect();
            &fe_target
        }
    };
    let mut ml = Vec::with_capacity(samples);
    let mut mc = Vec::with_capacity(samples);
    for k in 0..samples {
        let x: Vec<f64> = if sigma == 0.0 {
            u.to_vec()
        } else {
            let e = noise_vector(sigma, n, &mut rng::stream(seed, "randomization", k as u64));
            u.iter().zip(&e).map(|(a, b)| a + b).collect()
        };
        ml.push(ml_loss(net, &x, target, dt)?);
        mc.push(mc_loss(net, truth, &x, dt)?);
    }
    let term = |draws: &[f64], clean: f64, trace: f64| {
        let (mc_mean, mc_stderr) = mean_stderr(draws);
        let residual = if sigma == 0.0 { 0.0 } else { mc_mean - clean - sigma * sigma * trace / n as f64 };
        TermEstimate { clean, trace, mc_mean, mc_stderr, residual }
    };
    Ok(RandomizationDiagnostics {
        sigma,
        samples,
        ml: term(&ml, ml_loss(net, u, target, dt)?, p1(net, u, dt)?),
        mc: term(&mc, mc_loss(net, truth, u, dt)?, q1(net, truth, u, dt)?),
    })
}

//! Prediction error of a forward-Euler network rollout and its cumulative
//! (discrete Gronwall) bound.

use super::linalg::{norm2, spectral_norm};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::integrators::Slope;
use crate::pde::TruthTangent;

/// How the linearization remainder term `c^i` is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CPolicy {
    /// `c^i = 0`; exact for linear truth tangents.
    Zero,
    /// `c^i = dt |G(u^i) - G(v^i) - J_G(v^i)(u^i - v^i)| / e^i`, measured
    /// along the rollout.
    MeasuredRemainder,
}

impl CPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            CPolicy::Zero => "zero",
            CPolicy::MeasuredRemainder => "measured_remainder",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    /// `e^0 .. e^N`, with `e^0 = 0`.
    pub e: Vec<f64>,
    /// `f^1 .. f^N` stored at indices 1..; index 0 is 0.
    pub f: Vec<f64>,
    /// `g^1 .. g^N` stored at indices 1..; index 0 is 0.
    pub g: Vec<f64>,
    /// `B^0 .. B^N`.
    pub bound: Vec<f64>,
    pub policy: CPolicy,
}

fn fe(f: &dyn Slope, u: &[f64], dt: f64) -> Result<Vec<f64>> {
    crate::integrators::step_fe(f, u, dt)
}

/// Per-step `|u^n - v^n|_2` where `v` is the forward-Euler network rollout
/// from `u^0` and `u` the given reference states.
pub fn prediction_error_series(truth_states: &[Vec<f64>], net: &dyn Slope, dt: f64) -> Result<Vec<f64>> {
    let first = truth_states.first().ok_or_else(|| Error::Contract("empty reference trajectory".into()))?;
    let mut v = first.clone();
    let mut e = vec![0.0];
    for u in &truth_states[1..] {
        v = fe(net, &v, dt)?;
        e.push(norm2(&u.iter().zip(&v).map(|(a, b)| a - b).collect::<Vec<_>>()));
    }
    Ok(e)
}

/// `B^n = sum_k (prod_{i=k+1}^{n} g^i) f^k`, computed as `B^n = g^n B^{n-1} + f^n`.
pub fn gronwall_series(f: &[f64], g: &[f64]) -> Vec<f64> {
    let mut b = vec![0.0; f.len()];
    for k in 1..f.len() {
        b[k] = g[k] * b[k - 1] + f[k];
    }
    b
}

/// Error series and bound for `steps` forward-Euler steps from `u0`, with
/// the reference `u` produced by forward Euler on the truth tangent.
pub fn error_report(
    truth: &TruthTangent,
    net: &dyn Slope,
    u0: &[f64],
    dt: f64,
    steps: usize,
    policy: CPolicy,
) -> Result<ErrorReport> {
    let n = u0.len();
    let id = Tensor::identity(n);
    let (mut u, mut v) = (u0.to_vec(), u0.to_vec());
    let mut rep = ErrorReport { e: vec![0.0], f: vec![0.0], g: vec![0.0], bound: vec![], policy };
    for _ in 0..steps {
        let gv = truth.eval(&v);
        let pv = net.slope(&v)?;
        let jg = truth.jacobian(&v);
        let jp = net.slope_jacobian(&v)?;
        let f = dt * norm2(&gv.iter().zip(&pv).map(|(a, b)| a - b).collect::<Vec<_>>());
        let amp = spectral_norm(&id.add(&jp.scale(dt))?);
        let mismatch = dt * spectral_norm(&jg.sub(&jp)?);
        let e_i = *rep.e.last().expect("seeded");
        let c = match policy {
            CPolicy::Zero => 0.0,
            CPolicy::MeasuredRemainder if e_i == 0.0 => 0.0,
            CPolicy::MeasuredRemainder => {
                let gu = truth.eval(&u);
                let diff: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
                let lin = jg.matmul(&Tensor::vector(diff))?;
                let r: Vec<f64> = (0..n).map(|k| gu[k] - gv[k] - lin.data()[k]).collect();
                dt * norm2(&r) / e_i
            }
        };
        u = fe(truth, &u, dt)?;
        v = v.iter().zip(&pv).map(|(a, b)| a + dt * b).collect();
        rep.e.push(norm2(&u.iter().zip(&v).map(|(a, b)| a - b).collect::<Vec<_>>()));
        rep.f.push(f);
        rep.g.push(mismatch + amp + c);
    }
    rep.bound = gronwall_series(&rep.f, &rep.g);
    Ok(rep)
}

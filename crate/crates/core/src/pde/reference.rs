//! High-resolution reference solves used to generate training data.

use super::trajectory::Trajectory;
use super::truth::{TruthKind, TruthTangent};
use crate::error::{Error, Result};

fn finite(u: &[f64]) -> bool {
    u.iter().all(|v| v.is_finite())
}

/// Integrates `u0` for `n_steps` steps up to time `t_final`.
///
/// Advection and Burgers use forward Euler with the truth tangent and refuse
/// steps beyond the explicit stability limit. Navier-Stokes uses explicit
/// advection and forcing with Crank-Nicolson viscosity.
pub fn solve_reference(truth: &TruthTangent, u0: &[f64], n_steps: usize, t_final: f64) -> Result<Trajectory> {
    if u0.len() != truth.state_len() {
        return Err(Error::dim("solve_reference", format!("u0 has {} entries, expected {}", u0.len(), truth.state_len())));
    }
    if !(t_final > 0.0) {
        return Err(Error::config("data.t_final", format!("must be positive, got {t_final}")));
    }
    let dt = if n_steps == 0 { t_final } else { t_final / n_steps as f64 };
    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(u0.to_vec());
    match &truth.kind {
        TruthKind::NavierStokes(ns) => {
            let spec = ns.spectral();
            let fh = spec.forward(&ns.forcing);
            let mut wh = spec.forward(u0);
            for k in 1..=n_steps {
                wh = ns.cn_step_hat(&wh, &fh, dt);
                let w = spec.inverse(wh.clone());
                if !finite(&w) {
                    return Err(Error::Divergence { step: k });
                }
                states.push(w);
            }
        }
        _ => {
            let mut u = u0.to_vec();
            for k in 1..=n_steps {
                if let Some(limit) = truth.explicit_step_limit(&u) {
                    if dt > limit * (1.0 + 1e-12) {
                        return Err(Error::Stability(format!(
                            "step {k}: dt = {dt:e} exceeds the explicit limit {limit:e}"
                        )));
                    }
                }
                let g = truth.eval(&u);
                u.iter_mut().zip(&g).for_each(|(a, b)| *a += dt * b);
                if !finite(&u) {
                    return Err(Error::Divergence { step: k });
                }
                states.push(u.clone());
            }
        }
    }
    Trajectory::new(truth.grid, truth.fields(), dt, states)
}

//! Model-constrained window loss with sequential data (`S`) and sequential
//! model (`R`) rollouts.
//!
//! Windows are processed as columns of `n x B` matrices. For each rollout
//! state `x_i` (`i = 0..=S`) the data term compares the next network state
//! with the snapshot `u^{i+1}`, and the model term compares `R` forward-Euler
//! truth steps from `x_i` with `R` network steps from `x_i`.

use std::sync::Arc;

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::model::{Mode, TangentNetwork};
use crate::pde::TruthTangent;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig {
    pub alpha: f64,
    pub s: usize,
    pub r: usize,
    pub dt: f64,
    /// Backpropagate through the truth tangent in the model term. When false
    /// its evaluations enter the tape as constants.
    pub truth_gradient: bool,
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) {
            return Err(Error::config("train.alpha", "must be non-negative"));
        }
        if self.r < 1 {
            return Err(Error::config("train.r", "must be at least 1"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::config("train.dt", "must be positive"));
        }
        Ok(())
    }
}

/// Column-batched window data: noisy first states and the `S + 1` targets.
pub struct Batch {
    pub start: Tensor,
    pub targets: Vec<Tensor>,
}

impl Batch {
    /// Packs windows (each `S + 2` states) into columns; `noise[k]` is added
    /// to the first state of window `k` when given.
    pub fn from_windows(windows: &[&[Vec<f64>]], noise: Option<&[Vec<f64>]>) -> Result<Self> {
        let first = windows.first().ok_or_else(|| Error::Contract("empty batch".into()))?;
        let len = first.len();
        if len < 2 || windows.iter().any(|w| w.len() != len) {
            return Err(Error::dim("batch", "windows must share a length of at least 2"));
        }
        let column = |i: usize, add: Option<&[Vec<f64>]>| -> Result<Tensor> {
            let cols: Vec<Vec<f64>> = windows
                .iter()
                .enumerate()
                .map(|(k, w)| match add {
                    Some(e) => w[i].iter().zip(&e[k]).map(|(a, b)| a + b).collect(),
                    None => w[i].clone(),
                })
                .collect();
            let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
            Tensor::from_columns(&refs)
        };
        let start = column(0, noise)?;
        let targets = (1..len).map(|i| column(i, None)).collect::<Result<_>>()?;
        Ok(Self { start, targets })
    }

    pub fn size(&self) -> usize {
        self.start.cols()
    }
}

struct Builder<'a> {
    net: &'a TangentNetwork,
    truth: &'a Arc<TruthTangent>,
    cfg: &'a LossConfig,
}

impl Builder<'_> {
    fn net_step(&self, tape: &mut Tape, p: &crate::model::TapeParams, x: Var) -> Result<Var> {
        let y = self.net.forward_tape(tape, p, x)?;
        match self.net.mode {
            Mode::Direct => Ok(y),
            Mode::Tangent => {
                let dy = tape.scale(y, self.cfg.dt);
                tape.add(x, dy)
            }
        }
    }

    fn truth_step(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let g = if self.cfg.truth_gradient {
            tape.map_columns(x, self.truth.clone())?
        } else {
            let xv = tape.value(x);
            let gv = crate::autodiff::for_each_column(xv, |c| self.truth.eval(c));
            tape.constant(gv)
        };
        let dg = tape.scale(g, self.cfg.dt);
        tape.add(x, dg)
    }

    /// Records the batch loss on `tape`, returning the loss node and the
    /// parameter handles.
    fn build(&self, tape: &mut Tape, batch: &Batch) -> Result<(Var, crate::model::TapeParams)> {
        let cfg = self.cfg;
        if batch.targets.len() != cfg.s + 1 {
            return Err(Error::dim("window_loss", format!("{} targets for S = {}", batch.targets.len(), cfg.s)));
        }
        let p = self.net.register(tape);
        let mut x = tape.constant(batch.start.clone());
        let mut terms = Vec::new();
        for target in &batch.targets {
            let next = self.net_step(tape, &p, x)?;
            let u = tape.constant(target.clone());
            let diff = tape.sub(u, next)?;
            let mut term = tape.mse(diff)?;
            if cfg.alpha > 0.0 {
                let mut ubar = self.truth_step(tape, x)?;
                let mut unet = next;
                let mut mc = Vec::with_capacity(cfg.r);
                for r in 0..cfg.r {
                    if r > 0 {
                        ubar = self.truth_step(tape, ubar)?;
                        unet = self.net_step(tape, &p, unet)?;
                    }
                    let d = tape.sub(ubar, unet)?;
                    mc.push(tape.mse(d)?);
                }
                let mc = sum_vars(tape, &mc)?;
                let mc = tape.scale(mc, cfg.alpha / cfg.r as f64);
                term = tape.add(term, mc)?;
            }
            terms.push(term);
            x = next;
        }
        let total = sum_vars(tape, &terms)?;
        Ok((tape.scale(total, 1.0 / (cfg.s + 1) as f64), p))
    }
}

fn sum_vars(tape: &mut Tape, vars: &[Var]) -> Result<Var> {
    let mut acc = vars[0];
    for &v in &vars[1..] {
        acc = tape.add(acc, v)?;
    }
    Ok(acc)
}

/// Mean window loss over the batch columns.
pub fn batch_loss(net: &TangentNetwork, truth: &Arc<TruthTangent>, cfg: &LossConfig, batch: &Batch) -> Result<f64> {
    let mut tape = Tape::new();
    let (loss, _) = Builder { net, truth, cfg }.build(&mut tape, batch)?;
    finite_loss(tape.value(loss).data()[0])
}

/// Mean window loss and its gradient with respect to `net.params`.
pub fn batch_loss_grad(
    net: &TangentNetwork,
    truth: &Arc<TruthTangent>,
    cfg: &LossConfig,
    batch: &Batch,
) -> Result<(f64, Vec<Tensor>)> {
    let mut tape = Tape::new();
    let (loss, p) = Builder { net, truth, cfg }.build(&mut tape, batch)?;
    let value = finite_loss(tape.value(loss).data()[0])?;
    let grads = tape.backward(loss, &p.0)?.into_tensors();
    Ok((value, grads))
}

fn finite_loss(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::TrainingDiverged(format!("non-finite loss {v}")))
    }
}

/// Loss of a single window, with optional noise on its first state.
pub fn window_loss(
    net: &TangentNetwork,
    truth: &Arc<TruthTangent>,
    cfg: &LossConfig,
    window: &[Vec<f64>],
    noise: Option<&[f64]>,
) -> Result<f64> {
    let noise = noise.map(|e| vec![e.to_vec()]);
    let batch = Batch::from_windows(&[window], noise.as_deref())?;
    batch_loss(net, truth, cfg, &batch)
}

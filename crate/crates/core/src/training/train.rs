//! Mini-batch ADAM training with rollout-based checkpoint selection.

use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::adam::AdamState;
use super::loss::{batch_loss_grad, Batch, LossConfig};
use super::windows::{make_windows, WindowSet};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::integrators::{rollout, rollout_direct, Scheme};
use crate::model::{Mode, TangentNetwork};
use crate::pde::{Trajectory, TruthTangent};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub loss: LossConfig,
    /// Noise level relative to the RMS of the training states.
    pub delta: f64,
    pub lr: f64,
    /// Windows per optimizer step.
    pub batch_size: usize,
    pub epochs: usize,
    /// Rollout length used to score checkpoints.
    pub n_ckpt: usize,
    /// Score every this many epochs (the final epoch is always scored).
    pub ckpt_every: usize,
    /// When nonzero, the last this many training samples are held out and
    /// used for checkpoint scoring instead of the test set.
    pub validation_samples: usize,
    pub noise_seed: u64,
    pub shuffle_seed: u64,
    /// Windows per independent tape inside a batch.
    pub chunk_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossConfig { alpha: 0.0, s: 0, r: 1, dt: 1e-3, truth_gradient: true },
            delta: 0.0,
            lr: 1e-3,
            batch_size: 40,
            epochs: 10,
            n_ckpt: 100,
            ckpt_every: 1,
            validation_samples: 0,
            noise_seed: 1,
            shuffle_seed: 2,
            chunk_size: 16,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if !(self.delta >= 0.0) {
            return Err(Error::config("train.delta", "must be non-negative"));
        }
        if !(self.lr > 0.0) {
            return Err(Error::config("train.lr", "must be positive"));
        }
        if self.batch_size == 0 || self.chunk_size == 0 || self.ckpt_every == 0 {
            return Err(Error::config("train.batch_size", "batch, chunk and checkpoint interval must be positive"));
        }
        if self.n_ckpt == 0 {
            return Err(Error::config("train.n_ckpt", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// `None` when this epoch was not scored.
    pub ckpt_mse: Option<f64>,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub records: Vec<EpochRecord>,
    /// Epoch whose parameters were returned; 0 means the initialization.
    pub best_epoch: usize,
    pub best_metric: Option<f64>,
}

/// Root-mean-square of every entry of every training state.
pub fn data_rms(data: &[Trajectory]) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for t in data {
        for s in &t.states {
            sum += s.iter().map(|v| v * v).sum::<f64>();
            count += s.len();
        }
    }
    if count == 0 {
        0.0
    } else {
        (sum / count as f64).sqrt()
    }
}

/// Gaussian perturbation with per-entry standard deviation `sigma`.
pub fn noise_vector(sigma: f64, len: usize, rng: &mut rng::Rng) -> Vec<f64> {
    (0..len)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sigma * z
        })
        .collect()
}

/// `u + eps`, `eps ~ N(0, (delta * sigma_ref)^2 I)`.
pub fn randomize_input(u: &[f64], delta: f64, sigma_ref: f64, rng: &mut rng::Rng) -> Vec<f64> {
    if delta == 0.0 {
        return u.to_vec();
    }
    u.iter().zip(noise_vector(delta * sigma_ref, u.len(), rng)).map(|(a, e)| a + e).collect()
}

/// Mean over samples of the MSE at step `n_ckpt` of a network rollout
/// started from each sample's initial state. Diverged rollouts score infinity.
pub fn checkpoint_mse(net: &TangentNetwork, data: &[Trajectory], dt: f64, n_ckpt: usize) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Contract("checkpoint scoring needs at least one sample".into()));
    }
    let scores: Vec<Result<f64>> = data
        .par_iter()
        .enumerate()
        .map(|(k, t)| {
            if t.steps() < n_ckpt {
                return Err(Error::Contract(format!("scoring sample {k} has {} steps, need {n_ckpt}", t.steps())));
            }
            let r = match net.mode {
                Mode::Tangent => rollout(Scheme::Fe, net, &t.states[0], dt, n_ckpt)?,
                Mode::Direct => rollout_direct(net, &t.states[0], n_ckpt)?,
            };
            if r.diverged_at.is_some() {
                return Ok(f64::INFINITY);
            }
            let (p, q) = (&r.states[n_ckpt], &t.states[n_ckpt]);
            Ok(p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len() as f64)
        })
        .collect();
    let mut total = 0.0;
    for s in scores {
        total += s?;
    }
    Ok(total / data.len() as f64)
}

/// Sum of weighted parts, combined by a fixed pairwise tree.
fn tree_reduce(mut parts: Vec<(f64, Vec<Tensor>)>) -> (f64, Vec<Tensor>) {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some((la, mut ga)) = it.next() {
            if let Some((lb, gb)) = it.next() {
                for (a, b) in ga.iter_mut().zip(&gb) {
                    a.add_assign(b);
                }
                next.push((la + lb, ga));
            } else {
                next.push((la, ga));
            }
        }
        parts = next;
    }
    parts.pop().expect("at least one part")
}

struct Epoch<'a> {
    net: &'a TangentNetwork,
    truth: &'a Arc<TruthTangent>,
    cfg: &'a TrainConfig,
    data: &'a [Trajectory],
    windows: &'a WindowSet,
    sigma: f64,
    epoch: usize,
}

impl Epoch<'_> {
    /// Loss and gradient of one batch, chunked over independent tapes.
    fn batch(&self, ids: &[usize]) -> Result<(f64, Vec<Tensor>)> {
        let total = ids.len() as f64;
        let parts: Vec<Result<(f64, Vec<Tensor>)>> = ids
            .par_chunks(self.cfg.chunk_size)
            .map(|chunk| {
                let states: Vec<&[Vec<f64>]> =
                    chunk.iter().map(|&w| self.windows.states(self.data, self.windows.windows[w])).collect();
                let noise: Option<Vec<Vec<f64>>> = (self.cfg.delta > 0.0).then(|| {
                    chunk
                        .iter()
                        .map(|&w| {
                            let key = ((self.epoch as u64) << 32) | w as u64;
                            let mut r = rng::stream(self.cfg.noise_seed, "noise", key);
                            noise_vector(self.cfg.delta * self.sigma, states[0][0].len(), &mut r)
                        })
                        .collect()
                });
                let batch = Batch::from_windows(&states, noise.as_deref())?;
                let (l, g) = batch_loss_grad(self.net, self.truth, &self.cfg.loss, &batch)?;
                let w = chunk.len() as f64 / total;
                Ok((l * w, g.into_iter().map(|t| t.scale(w)).collect()))
            })
            .collect();
        Ok(tree_reduce(parts.into_iter().collect::<Result<_>>()?))
    }
}

/// Trains `init` and returns the best-scoring parameters.
pub fn train(
    train_data: &[Trajectory],
    test_data: &[Trajectory],
    truth: &Arc<TruthTangent>,
    cfg: &TrainConfig,
    init: TangentNetwork,
) -> Result<(TangentNetwork, TrainReport)> {
    train_with(train_data, test_data, truth, cfg, init, |_| Ok(()))
}

/// [`train`] with a callback after every epoch.
pub fn train_with(
    train_data: &[Trajectory],
    test_data: &[Trajectory],
    truth: &Arc<TruthTangent>,
    cfg: &TrainConfig,
    init: TangentNetwork,
    mut on_epoch: impl FnMut(&EpochRecord) -> Result<()>,
) -> Result<(TangentNetwork, TrainReport)> {
    cfg.validate()?;
    if cfg.validation_samples >= train_data.len() && cfg.validation_samples > 0 {
        return Err(Error::config("train.validation_samples", "must leave at least one training sample"));
    }
    let split = train_data.len() - cfg.validation_samples;
    let (fit, held) = train_data.split_at(split);
    let score_set = if cfg.validation_samples > 0 { held } else { test_data };
    if score_set.is_empty() {
        return Err(Error::Contract("checkpoint selection needs a nonempty test set".into()));
    }
    if let Some(t) = fit.iter().chain(score_set).find(|t| t.state_len() != init.n()) {
        return Err(Error::dim("train", format!("state length {} for a network of size {}", t.state_len(), init.n())));
    }
    let windows = make_windows(fit, cfg.loss.s)?;
    if windows.is_empty() {
        return Err(Error::Contract("no training windows".into()));
    }
    let sigma = data_rms(fit);

    let mut net = init.clone();
    let mut best = init;
    let mut report = TrainReport::default();
    let mut adam = AdamState::new(&net.params);
    let mut order: Vec<usize> = (0..windows.len()).collect();

    for epoch in 1..=cfg.epochs {
        let clock = Instant::now();
        order.sort_unstable();
        order.shuffle(&mut rng::stream(cfg.shuffle_seed, "shuffle", epoch as u64));
        let mut loss_sum = 0.0;
        let mut failed = None;
        for ids in order.chunks(cfg.batch_size) {
            let step = Epoch { net: &net, truth, cfg, data: fit, windows: &windows, sigma, epoch };
            match step.batch(ids) {
                Ok((l, g)) => {
                    loss_sum += l * ids.len() as f64;
                    adam.step(&mut net.params, &g, cfg.lr)?;
                }
                Err(Error::TrainingDiverged(msg)) => {
                    failed = Some(msg);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        let params_ok = net.params.iter().all(|p| p.is_finite());
        let diverged = failed.is_some() || !params_ok;
        let score = epoch % cfg.ckpt_every == 0 || epoch == cfg.epochs || diverged;
        let ckpt_mse = if !score {
            None
        } else if diverged {
            Some(f64::NAN)
        } else {
            Some(checkpoint_mse(&net, score_set, cfg.loss.dt, cfg.n_ckpt)?)
        };
        let record = EpochRecord {
            epoch,
            train_loss: if diverged { f64::NAN } else { loss_sum / windows.len() as f64 },
            ckpt_mse,
            wall_seconds: clock.elapsed().as_secs_f64(),
        };
        on_epoch(&record)?;
        report.records.push(record);
        if let Some(m) = ckpt_mse.filter(|m| m.is_finite()) {
            if report.best_metric.is_none_or(|b| m < b) {
                report.best_metric = Some(m);
                report.best_epoch = epoch;
                best = net.clone();
            }
        }
        if diverged {
            break;
        }
    }
    if cfg.epochs > 0 && report.best_metric.is_none() {
        return Err(Error::TrainingDiverged(format!(
            "no epoch produced a finite checkpoint score over {} epochs",
            report.records.len()
        )));
    }
    Ok((best, report))
}

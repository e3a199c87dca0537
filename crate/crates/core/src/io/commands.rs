//! Pipeline commands behind the CLI: data generation, training, prediction,
//! evaluation and diagnostics.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use toml::Value;

use super::array_file::ArrayFile;
use super::checkpoint::Checkpoint;
use super::config::{ExperimentConfig, FlatConfig};
use super::csv_out::{fmt_f64, write_csv, CsvAppender};
use crate::analysis::{error_report, linear_optimum, randomization_check, rollout_mse, summarize, CPolicy};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::integrators::{rollout, rollout_direct, RolloutResult, Scheme};
use crate::model::{Arch, InitSpec, Mode, TangentNetwork};
use crate::pde::navier_stokes::default_forcing;
use crate::pde::sampling::sample_initial_transport;
use crate::pde::{downsample, solve_reference, BurgersState, Grid, KlSampler, Trajectory, TruthTangent};
use crate::rng;
use crate::training::{train_with, LossConfig, TrainConfig, TrainReport};

pub fn data_dir(cfg: &ExperimentConfig) -> PathBuf {
    Path::new(&cfg.out_dir).join("data")
}

pub fn checkpoint_dir(cfg: &ExperimentConfig) -> PathBuf {
    Path::new(&cfg.out_dir).join("checkpoint")
}

fn burgers_state(cfg: &ExperimentConfig) -> BurgersState {
    if cfg.burgers_state == "uv" {
        BurgersState::Full
    } else {
        BurgersState::UOnly
    }
}

/// Grid of the reference solves.
pub fn fine_grid(cfg: &ExperimentConfig) -> Result<Grid> {
    match cfg.problem.as_str() {
        "transport" => Grid::line(cfg.fine_n),
        _ => Grid::square(cfg.fine_n),
    }
}

/// Truth tangent of the configured problem on `grid`.
pub fn build_truth(cfg: &ExperimentConfig, grid: Grid) -> Result<TruthTangent> {
    match cfg.problem.as_str() {
        "transport" => TruthTangent::advection(grid, cfg.transport_c),
        "burgers" => TruthTangent::burgers(grid, cfg.burgers_nu, burgers_state(cfg)),
        "navier_stokes" => TruthTangent::navier_stokes(grid, cfg.ns_nu, default_forcing(&grid)),
        p => Err(Error::config("problem", format!("unknown problem '{p}'"))),
    }
}

enum Sampler {
    Transport,
    Kl(KlSampler, bool),
}

impl Sampler {
    fn new(cfg: &ExperimentConfig, grid: &Grid) -> Result<Self> {
        Ok(match cfg.problem.as_str() {
            "transport" => Sampler::Transport,
            "burgers" => Sampler::Kl(KlSampler::new(grid, true)?, burgers_state(cfg) == BurgersState::Full),
            _ => Sampler::Kl(KlSampler::new(grid, false)?, false),
        })
    }

    fn draw(&self, grid: &Grid, r: &mut rng::Rng) -> Vec<f64> {
        match self {
            Sampler::Transport => sample_initial_transport(grid, r),
            Sampler::Kl(kl, with_v) => {
                let mut u = kl.sample(r);
                if *with_v {
                    u.extend(std::iter::repeat_n(1.0, grid.size()));
                }
                u
            }
        }
    }
}

fn traj_path(dir: &Path, split: &str, k: usize) -> PathBuf {
    dir.join(split).join(format!("traj_{k:04}.mct"))
}

/// Coarse-resolution description of a generated dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct DataManifest {
    pub grid: Grid,
    pub fields: usize,
    pub dt: f64,
    pub train_samples: usize,
    pub test_samples: usize,
}

impl DataManifest {
    fn to_flat(&self, cfg: &ExperimentConfig) -> FlatConfig {
        let mut m = FlatConfig::default();
        let mut put = |k: &str, v: Value| {
            m.0.insert(k.to_string(), v);
        };
        put("coarse.dim", Value::Integer(self.grid.dim as i64));
        put("coarse.n", Value::Integer(self.grid.n as i64));
        put("coarse.fields", Value::Integer(self.fields as i64));
        put("coarse.dt", Value::Float(self.dt));
        put("samples.train", Value::Integer(self.train_samples as i64));
        put("samples.test", Value::Integer(self.test_samples as i64));
        for (k, v) in cfg.to_flat().0 {
            if k.starts_with("data.") || k.starts_with("seed.") || k == "problem" || k.contains(".nu") || k == "transport.c" || k == "burgers.state" {
                put(&format!("config.{k}"), v);
            }
        }
        m
    }

    fn from_flat(m: &FlatConfig, path: &Path) -> Result<Self> {
        let bad = |msg: String| Error::Format { path: path.to_path_buf(), msg };
        let int = |k: &str| m.0.get(k).and_then(Value::as_integer).map(|v| v as usize).ok_or_else(|| bad(format!("missing {k}")));
        let dt = m.0.get("coarse.dt").and_then(Value::as_float).ok_or_else(|| bad("missing coarse.dt".into()))?;
        Ok(Self {
            grid: Grid::new(int("coarse.dim")?, int("coarse.n")?)?,
            fields: int("coarse.fields")?,
            dt,
            train_samples: int("samples.train")?,
            test_samples: int("samples.test")?,
        })
    }
}

/// Reference solve then downsampling for every train and test sample.
pub fn gen_data(cfg: &ExperimentConfig) -> Result<DataManifest> {
    let grid = fine_grid(cfg)?;
    let truth = build_truth(cfg, grid)?;
    let sampler = Sampler::new(cfg, &grid)?;
    let dir = data_dir(cfg);
    let dt = cfg.fine_dt();
    let jobs: Vec<(&str, usize, usize)> = (0..cfg.train_samples)
        .map(|k| ("train", k, cfg.fine_steps))
        .chain((0..cfg.test_samples).map(|k| ("test", k, cfg.test_fine_steps)))
        .collect();
    let coarse: Vec<Trajectory> = jobs
        .par_iter()
        .map(|&(split, k, steps)| {
            let u0 = sampler.draw(&grid, &mut rng::stream(cfg.data_seed, split, k as u64));
            let fine = solve_reference(&truth, &u0, steps, dt * steps as f64).map_err(|e| match e {
                Error::Stability(m) => Error::Stability(format!("{split} sample {k}: {m}")),
                other => other,
            })?;
            let c = downsample(&fine, cfg.space_stride, cfg.time_stride)?;
            ArrayFile::from_rows(&c.states)?.write(&traj_path(&dir, split, k))?;
            Ok(c)
        })
        .collect::<Result<_>>()?;
    let first = coarse.first().ok_or_else(|| Error::config("data.train_samples", "no samples requested"))?;
    let manifest = DataManifest {
        grid: first.grid,
        fields: first.fields,
        dt: first.dt,
        train_samples: cfg.train_samples,
        test_samples: cfg.test_samples,
    };
    let path = dir.join("manifest.cfg");
    std::fs::write(&path, manifest.to_flat(cfg).serialize()).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub struct Dataset {
    pub manifest: DataManifest,
    pub train: Vec<Trajectory>,
    pub test: Vec<Trajectory>,
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let mpath = dir.join("manifest.cfg");
    let manifest = DataManifest::from_flat(&FlatConfig::read(&mpath)?, &mpath)?;
    let load = |split: &str, count: usize| -> Result<Vec<Trajectory>> {
        (0..count)
            .map(|k| {
                let rows = ArrayFile::read(&traj_path(dir, split, k))?.rows()?;
                Trajectory::new(manifest.grid, manifest.fields, manifest.dt, rows)
            })
            .collect()
    };
    Ok(Dataset { train: load("train", manifest.train_samples)?, test: load("test", manifest.test_samples)?, manifest })
}

pub fn train_config(cfg: &ExperimentConfig, dt: f64) -> TrainConfig {
    TrainConfig {
        loss: LossConfig { alpha: cfg.alpha, s: cfg.s, r: cfg.r, dt, truth_gradient: cfg.truth_gradient },
        delta: cfg.delta,
        lr: cfg.lr,
        batch_size: cfg.batch_size,
        epochs: cfg.epochs,
        n_ckpt: cfg.n_ckpt,
        ckpt_every: cfg.ckpt_every,
        validation_samples: cfg.validation_samples,
        noise_seed: cfg.noise_seed,
        shuffle_seed: cfg.shuffle_seed,
        chunk_size: cfg.chunk_size,
    }
}

pub fn init_network(cfg: &ExperimentConfig, n: usize) -> Result<TangentNetwork> {
    let arch = if cfg.arch == "mlp" { Arch::Mlp { n, hidden: cfg.hidden } } else { Arch::Linear { n } };
    let mode = if cfg.mode == "direct" { Mode::Direct } else { Mode::Tangent };
    TangentNetwork::init(InitSpec { weight_std: cfg.init_std, bias: cfg.init_bias, seed: cfg.init_seed }, arch, mode, cfg.bias)
}

/// Trains on `<out>/data`, writing the checkpoint and report CSVs to `<out>`.
/// The report is streamed, so it survives a diverged run.
pub fn train_cmd(cfg: &ExperimentConfig) -> Result<TrainReport> {
    let data = load_dataset(&data_dir(cfg))?;
    let truth = Arc::new(build_truth(cfg, data.manifest.grid)?);
    if truth.state_len() != data.manifest.grid.size() * data.manifest.fields {
        return Err(Error::config("burgers.state", "does not match the generated data"));
    }
    let init = init_network(cfg, truth.state_len())?;
    let tcfg = train_config(cfg, data.manifest.dt);
    let out = Path::new(&cfg.out_dir);
    let mut report_csv = CsvAppender::create(&out.join("train_report.csv"), &["epoch", "train_loss", "ckpt_mse"])?;
    let mut timing_csv = CsvAppender::create(&out.join("train_timing.csv"), &["epoch", "wall_seconds"])?;
    let (net, report) = train_with(&data.train, &data.test, &truth, &tcfg, init, |r| {
        report_csv.row(&[r.epoch.to_string(), fmt_f64(Some(r.train_loss)), fmt_f64(r.ckpt_mse)])?;
        timing_csv.row(&[r.epoch.to_string(), format!("{:.6}", r.wall_seconds)])
    })?;
    let mut meta = FlatConfig::default();
    meta.0.insert("best_epoch".into(), Value::Integer(report.best_epoch as i64));
    meta.0.insert("problem".into(), Value::String(cfg.problem.clone()));
    for (k, v) in cfg.to_flat().0 {
        if k.starts_with("train.") || k.starts_with("model.") || k.starts_with("init.") || k.starts_with("seed.") {
            meta.0.insert(format!("config.{k}"), v);
        }
    }
    Checkpoint { net, dt: data.manifest.dt, meta }.save(&checkpoint_dir(cfg))?;
    Ok(report)
}

/// Rolls a checkpoint forward from the first state in `initial`.
pub fn predict_cmd(checkpoint: &Path, initial: &Path, scheme: Scheme, dt: f64, steps: usize, output: &Path) -> Result<RolloutResult> {
    let ck = Checkpoint::load(checkpoint)?;
    let arr = ArrayFile::read(initial)?;
    let u0: Vec<f64> = match arr.shape.as_slice() {
        [n] => arr.data[..*n].to_vec(),
        [_, n] if !arr.data.is_empty() => arr.data[..*n].to_vec(),
        _ => return Err(Error::dim("predict", format!("cannot read an initial state from shape {:?}", arr.shape))),
    };
    if u0.len() != ck.net.n() {
        return Err(Error::dim("predict", format!("initial state has {} entries, checkpoint expects {}", u0.len(), ck.net.n())));
    }
    let result = match ck.net.mode {
        Mode::Tangent => rollout(scheme, &ck.net, &u0, dt, steps)?,
        Mode::Direct => rollout_direct(&ck.net, &u0, steps)?,
    };
    ArrayFile::from_rows(&result.states)?.write(output)?;
    let mut m = FlatConfig::default();
    m.0.insert("rollout.scheme".into(), Value::String(scheme.name().into()));
    m.0.insert("rollout.dt".into(), Value::Float(dt));
    m.0.insert("rollout.steps".into(), Value::Integer(steps as i64));
    m.0.insert("rollout.states".into(), Value::Integer(result.states.len() as i64));
    if let Some(k) = result.diverged_at {
        m.0.insert("rollout.diverged_at".into(), Value::Integer(k as i64));
    }
    let mpath = output.with_extension("cfg");
    std::fs::write(&mpath, m.serialize()).map_err(|e| Error::io(&mpath, e))?;
    Ok(result)
}

/// Per-step MSE of `pred` against `truth`, plus a one-row summary CSV
/// next to `output`.
pub fn eval_cmd(pred: &Path, truth: &Path, output: &Path) -> Result<Vec<f64>> {
    let p = ArrayFile::read(pred)?.rows()?;
    let t = ArrayFile::read(truth)?.rows()?;
    let mse = rollout_mse(&p, &t)?;
    let rows: Vec<Vec<String>> = mse.iter().enumerate().map(|(k, v)| vec![k.to_string(), fmt_f64(Some(*v))]).collect();
    write_csv(output, &["step", "mse"], &rows)?;
    if let Some(s) = summarize(&mse) {
        let spath = output.with_file_name(format!(
            "{}_summary.csv",
            output.file_stem().and_then(|s| s.to_str()).unwrap_or("eval")
        ));
        write_csv(
            &spath,
            &["final_mse", "max_mse", "step_of_max"],
            &[vec![fmt_f64(Some(s.final_mse)), fmt_f64(Some(s.max_mse)), s.step_of_max.to_string()]],
        )?;
    }
    Ok(mse)
}

/// Writes `<out>/diagnose_<kind>.csv` and returns its path.
pub fn diagnose_cmd(cfg: &ExperimentConfig, checkpoint: &Path) -> Result<PathBuf> {
    let ck = Checkpoint::load(checkpoint)?;
    let data = load_dataset(&data_dir(cfg))?;
    let truth = build_truth(cfg, data.manifest.grid)?;
    let out = Path::new(&cfg.out_dir).join(format!("diagnose_{}.csv", cfg.diagnose_kind));
    let dt = ck.dt;
    match cfg.diagnose_kind.as_str() {
        "lemma" => {
            if !matches!(ck.net.arch, Arch::Linear { .. }) || !ck.net.use_bias || ck.net.mode != Mode::Tangent {
                return Err(Error::config("diagnose.kind", "lemma needs a linear tangent checkpoint with bias"));
            }
            if !truth.is_linear() {
                return Err(Error::config("diagnose.kind", "lemma needs a linear truth tangent"));
            }
            let n = truth.state_len();
            let g = truth.jacobian(&vec![0.0; n]);
            let cols: Vec<&[f64]> = data.train.iter().map(|t| t.states[0].as_slice()).collect();
            let (w, b) = linear_optimum(&g, &Tensor::from_columns(&cols)?)?;
            let wd = ck.net.params[0].sub(&w)?.max_abs();
            let bd = ck.net.params[1].sub(&Tensor::vector(b))?.max_abs();
            let gd = w.sub(&g)?.max_abs();
            write_csv(
                &out,
                &["metric", "value"],
                &[
                    vec!["max_abs_w_minus_wstar".into(), fmt_f64(Some(wd))],
                    vec!["max_abs_b_minus_bstar".into(), fmt_f64(Some(bd))],
                    vec!["max_abs_wstar_minus_g".into(), fmt_f64(Some(gd))],
                ],
            )?;
        }
        "randomization" => {
            let u = &data.test.first().ok_or_else(|| Error::config("data.test_samples", "need a test sample"))?.states[0];
            let sigma = cfg.diagnose_delta * crate::training::data_rms(&data.train);
            let d = randomization_check(&ck.net, &truth, u, None, sigma, cfg.diagnose_samples, dt, cfg.noise_seed)?;
            let row = |name: &str, t: &crate::analysis::TermEstimate| {
                vec![name.to_string(), fmt_f64(Some(t.trace)), fmt_f64(Some(t.clean)), fmt_f64(Some(t.mc_mean)), fmt_f64(Some(t.mc_stderr)), fmt_f64(Some(t.residual))]
            };
            write_csv(&out, &["term", "exact", "clean_loss", "mc_estimate", "stderr", "residual"], &[row("P1", &d.ml), row("Q1", &d.mc)])?;
        }
        _ => {
            let policy = if cfg.diagnose_c_policy == "measured_remainder" { CPolicy::MeasuredRemainder } else { CPolicy::Zero };
            let mut rows = Vec::new();
            for (k, t) in data.test.iter().take(cfg.diagnose_tests).enumerate() {
                let rep = error_report(&truth, &ck.net, &t.states[0], dt, cfg.diagnose_steps, policy)?;
                for s in 0..rep.e.len() {
                    rows.push(vec![
                        k.to_string(),
                        s.to_string(),
                        fmt_f64(Some(rep.e[s])),
                        fmt_f64(Some(rep.f[s])),
                        fmt_f64(Some(rep.g[s])),
                        fmt_f64(Some(rep.bound[s])),
                        policy.name().to_string(),
                    ]);
                }
            }
            write_csv(&out, &["sample", "step", "e", "f", "g", "B", "c_policy"], &rows)?;
        }
    }
    Ok(out)
}

//! End-to-end acceptance checks. Each test prints one PASS/FAIL line to
//! stderr (bypassing the test harness capture) before asserting.

use std::io::Write;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use mctangent::analysis::{error_report, linear_optimum, randomization_check, rollout_mse, CPolicy};
use mctangent::autodiff::Tensor;
use mctangent::integrators::{rollout, NewtonOptions, Scheme, Slope};
use mctangent::model::{Arch, InitSpec, Mode, TangentNetwork};
use mctangent::pde::advection::{advection_tangent, upwind_matrix};
use mctangent::pde::burgers::Burgers;
use mctangent::pde::navier_stokes::{default_forcing, NavierStokes};
use mctangent::pde::sampling::sample_initial_transport;
use mctangent::pde::{downsample, solve_reference, BurgersState, Grid, KlSampler, Trajectory, TruthTangent};
use mctangent::rng;
use mctangent::training::{batch_loss, batch_loss_grad, train, AdamState, Batch, LossConfig, TrainConfig};

fn report(id: u32, name: &str, pass: bool, started: Instant, detail: String) {
    let line = format!(
        "criterion {id:>2} {name:<28} {} ({:.1}s) {detail}\n",
        if pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn normal_vec(r: &mut rng::Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| scale * r.sample::<f64, _>(StandardNormal)).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// ---------------------------------------------------------------- 1

/// Smallest |pre-activation| seen by the hidden layer over every network
/// input of the loss: the chain states `x_0 .. x_{S+R-1}` of each window.
fn min_preactivation(net: &TangentNetwork, batch: &Batch, cfg: &LossConfig) -> f64 {
    if !matches!(net.arch, Arch::Mlp { .. }) {
        return f64::INFINITY;
    }
    let (w1, b1) = (&net.params[0], if net.use_bias { Some(&net.params[1]) } else { None });
    let mut min = f64::INFINITY;
    for col in 0..batch.size() {
        let mut x = batch.start.column(col);
        for _ in 0..cfg.s + cfg.r {
            let z = w1.matmul(&Tensor::vector(x.clone())).unwrap();
            for (h, zh) in z.data().iter().enumerate() {
                min = min.min((zh + b1.map_or(0.0, |b| b.data()[h])).abs());
            }
            let y = net.forward(&x).unwrap();
            x = x.iter().zip(&y).map(|(a, b)| a + cfg.dt * b).collect();
        }
    }
    min
}

#[test]
fn criterion_01_gradients_match_finite_differences() {
    let t0 = Instant::now();
    let mut r = rng::stream(11, "criterion1", 0);
    let (mut checked, mut worst, mut attempts) = (0, 0.0f64, 0);
    while checked < 20 {
        attempts += 1;
        assert!(attempts < 200, "could not draw kink-free configurations");
        let n = r.random_range(4..=8usize);
        let arch = if r.random_bool(0.5) { Arch::Linear { n } } else { Arch::Mlp { n, hidden: r.random_range(1..=16) } };
        let cfg = LossConfig {
            alpha: if r.random_bool(0.5) { 0.0 } else { 1e5 },
            s: r.random_range(0..=2),
            r: r.random_range(1..=2),
            dt: 0.01,
            truth_gradient: true,
        };
        let use_bias = r.random_bool(0.7);
        let spec = InitSpec { weight_std: 0.3, bias: 0.05, seed: attempts as u64 };
        let net = TangentNetwork::init(spec, arch, Mode::Tangent, use_bias).unwrap();
        let truth = Arc::new(TruthTangent::advection(Grid::line(n).unwrap(), 1.0).unwrap());
        let nb = r.random_range(1..=3);
        let windows: Vec<Vec<Vec<f64>>> =
            (0..nb).map(|_| (0..cfg.s + 2).map(|_| normal_vec(&mut r, n, 1.0)).collect()).collect();
        let refs: Vec<&[Vec<f64>]> = windows.iter().map(|w| w.as_slice()).collect();
        let batch = Batch::from_windows(&refs, None).unwrap();
        if min_preactivation(&net, &batch, &cfg) < 1e-3 {
            continue;
        }
        let (_, grads) = batch_loss_grad(&net, &truth, &cfg, &batch).unwrap();
        let h = 1e-6;
        let (mut diff, mut scale) = (0.0f64, 0.0f64);
        for (k, g) in grads.iter().enumerate() {
            for idx in 0..g.len() {
                let mut plus = net.clone();
                plus.params[k].data_mut()[idx] += h;
                let mut minus = net.clone();
                minus.params[k].data_mut()[idx] -= h;
                let fd = (batch_loss(&plus, &truth, &cfg, &batch).unwrap() - batch_loss(&minus, &truth, &cfg, &batch).unwrap())
                    / (2.0 * h);
                diff = diff.max((fd - g.data()[idx]).abs());
                scale = scale.max(g.data()[idx].abs());
            }
        }
        worst = worst.max(diff / scale.max(1e-300));
        checked += 1;
    }
    report(1, "autodiff vs finite diff", worst < 1e-6 && t0.elapsed().as_secs() < 10, t0, format!("worst rel err {worst:.2e} over {checked} configs"));
}

// ---------------------------------------------------------------- 3

/// Burgers right-hand side written out cell by cell on `u[i][j]` with the
/// companion velocity `v` (all ones in the u-only state).
fn burgers_brute(u: &[f64], v: Option<&[f64]>, n: usize, nu: f64) -> Vec<f64> {
    let h = 1.0 / n as f64;
    let at = |w: &[f64], i: isize, j: isize| w[(i.rem_euclid(n as isize) as usize) * n + j.rem_euclid(n as isize) as usize];
    let ones = vec![1.0; n * n];
    let vv = v.unwrap_or(&ones);
    let mut out = Vec::new();
    let fields: Vec<&[f64]> = match v {
        Some(v) => vec![u, v],
        None => vec![u],
    };
    for w in fields {
        for i in 0..n as isize {
            for j in 0..n as isize {
                let a = at(u, i, j);
                let b = at(vv, i, j);
                let wx = if a > 0.0 { (at(w, i, j) - at(w, i - 1, j)) / h } else { (at(w, i + 1, j) - at(w, i, j)) / h };
                let wy = if b > 0.0 { (at(w, i, j) - at(w, i, j - 1)) / h } else { (at(w, i, j + 1) - at(w, i, j)) / h };
                let lap = (at(w, i + 1, j) + at(w, i - 1, j) + at(w, i, j + 1) + at(w, i, j - 1) - 4.0 * at(w, i, j)) / (h * h);
                out.push(-a * wx - b * wy + nu * lap);
            }
        }
    }
    out
}

/// Navier-Stokes right-hand side through explicit O(n^4) Fourier sums.
fn ns_brute(w: &[f64], forcing: &[f64], n: usize, nu: f64) -> Vec<f64> {
    use std::f64::consts::PI;
    type C = (f64, f64);
    let kk = |m: usize| if m <= n / 2 { m as i64 } else { m as i64 - n as i64 };
    let dft = |x: &[C], sign: f64| -> Vec<C> {
        let mut out = vec![(0.0, 0.0); n * n];
        for a in 0..n {
            for b in 0..n {
                let mut s = (0.0, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        let th = sign * 2.0 * PI * ((a * i) as f64 + (b * j) as f64) / n as f64;
                        let (c, sn) = (th.cos(), th.sin());
                        let v = x[i * n + j];
                        s.0 += v.0 * c - v.1 * sn;
                        s.1 += v.0 * sn + v.1 * c;
                    }
                }
                out[a * n + b] = s;
            }
        }
        out
    };
    let real = |x: &[f64]| -> Vec<C> { x.iter().map(|&v| (v, 0.0)).collect() };
    let inv = |x: &[C]| -> Vec<f64> { dft(x, 1.0).iter().map(|c| c.0 / (n * n) as f64).collect() };
    let nyq = |k: i64| n % 2 == 0 && k.unsigned_abs() as usize == n / 2;
    let keep = |kx: i64, ky: i64| (kx.abs() as f64) <= n as f64 / 3.0 && (ky.abs() as f64) <= n as f64 / 3.0;
    let wh = dft(&real(w), -1.0);
    // multiply by i*2*pi*k on one axis (zero on Nyquist), optionally divide by 4 pi^2 |k|^2
    let field = |axis: usize, invert: bool, sign: f64| -> Vec<f64> {
        let mut hat = vec![(0.0, 0.0); n * n];
        for a in 0..n {
            for b in 0..n {
                let (kx, ky) = (kk(a), kk(b));
                let k = if axis == 0 { kx } else { ky };
                if nyq(k) {
                    continue;
                }
                let k2 = (kx * kx + ky * ky) as f64 * 4.0 * PI * PI;
                let mut s = sign * 2.0 * PI * k as f64;
                if invert {
                    if k2 == 0.0 {
                        continue;
                    }
                    s /= k2;
                }
                let v = wh[a * n + b];
                hat[a * n + b] = (-s * v.1, s * v.0);
            }
        }
        inv(&hat)
    };
    let (vel_u, wx, vel_v, wy) = (field(1, true, 1.0), field(0, false, 1.0), field(0, true, -1.0), field(1, false, 1.0));
    let prod: Vec<f64> = (0..n * n).map(|p| vel_u[p] * wx[p] + vel_v[p] * wy[p]).collect();
    let mut nh = dft(&real(&prod), -1.0);
    let mut g_hat = vec![(0.0, 0.0); n * n];
    for a in 0..n {
        for b in 0..n {
            let (kx, ky) = (kk(a), kk(b));
            if !keep(kx, ky) {
                nh[a * n + b] = (0.0, 0.0);
            }
            let lap = 4.0 * PI * PI * (kx * kx + ky * ky) as f64;
            let (x, y) = (nh[a * n + b], wh[a * n + b]);
            g_hat[a * n + b] = (-x.0 - nu * lap * y.0, -x.1 - nu * lap * y.1);
        }
    }
    inv(&g_hat).iter().zip(forcing).map(|(a, b)| a + b).collect()
}

#[test]
fn criterion_03_stencil_oracles() {
    let t0 = Instant::now();
    let mut r = rng::stream(13, "criterion3", 0);
    // advection against a dense product, evaluated with a plain loop
    let mut adv_exact = true;
    for &n in &[4usize, 7, 32, 100] {
        let h = 1.0 / n as f64;
        let u = normal_vec(&mut r, n, 1.0);
        let m = upwind_matrix(n, 1.3, h);
        let dense: Vec<f64> = (0..n).map(|i| (0..n).fold(0.0, |acc, j| acc + m.get(i, j) * u[j])).collect();
        adv_exact &= advection_tangent(&u, 1.3, h) == dense;
    }
    // Burgers, both state layouts, several sizes
    let mut burgers_err = 0.0f64;
    for &n in &[4usize, 8, 16] {
        let u = normal_vec(&mut r, n * n, 1.0);
        let v = normal_vec(&mut r, n * n, 1.0);
        let uonly = Burgers { n, nu: 0.01, state: BurgersState::UOnly };
        burgers_err = burgers_err.max(max_abs_diff(&uonly.eval(&u), &burgers_brute(&u, None, n, 0.01)));
        let full = Burgers { n, nu: 0.01, state: BurgersState::Full };
        let uv: Vec<f64> = u.iter().chain(&v).copied().collect();
        burgers_err = burgers_err.max(max_abs_diff(&full.eval(&uv), &burgers_brute(&u, Some(&v), n, 0.01)));
    }
    // Navier-Stokes on KL fields and on white noise
    let mut ns_err = 0.0f64;
    for &n in &[8usize, 16] {
        let g = Grid::square(n).unwrap();
        let ns = NavierStokes::new(n, 1e-3, default_forcing(&g));
        let kl = KlSampler::new(&g, false).unwrap();
        for w in [kl.sample(&mut r), normal_vec(&mut r, n * n, 1.0)] {
            ns_err = ns_err.max(max_abs_diff(&ns.eval(&w), &ns_brute(&w, &ns.forcing, n, 1e-3)));
        }
    }
    // single-mode viscous decay through the reference solver
    let nu = 1e-2;
    let g = Grid::square(32).unwrap();
    let truth = TruthTangent::navier_stokes(g, nu, vec![0.0; 32 * 32]).unwrap();
    let w0 = g.sample(|x, y| (2.0 * std::f64::consts::PI * x).sin() * (2.0 * std::f64::consts::PI * y).sin());
    let traj = solve_reference(&truth, &w0, 100, 0.1).unwrap();
    let expected = (-8.0 * std::f64::consts::PI.powi(2) * nu * 0.1).exp();
    let last = traj.states.last().unwrap();
    let ratio = last.iter().zip(&w0).map(|(a, b)| a * b).sum::<f64>() / w0.iter().map(|b| b * b).sum::<f64>();
    let decay_err = (ratio - expected).abs() / expected;
    let pass = adv_exact && burgers_err <= 1e-12 && ns_err <= 1e-12 && decay_err < 0.01;
    report(
        3,
        "stencil oracles",
        pass,
        t0,
        format!("advection exact {adv_exact}, burgers {burgers_err:.1e}, ns {ns_err:.1e}, decay rel err {decay_err:.1e}"),
    );
}

// ---------------------------------------------------------------- 4

#[test]
fn criterion_04_advection_conserves_mean() {
    let t0 = Instant::now();
    let n = 100;
    let grid = Grid::line(n).unwrap();
    let truth = TruthTangent::advection(grid, 1.0).unwrap();
    let u0 = sample_initial_transport(&grid, &mut rng::stream(14, "criterion4", 0));
    let shifted: Vec<f64> = u0.iter().map(|v| v + 0.7).collect();
    let mean = |u: &[f64]| u.iter().sum::<f64>() / u.len() as f64;
    let res = rollout(Scheme::Fe, &truth, &shifted, 0.5 * grid.h(), 10_000).unwrap();
    let m0 = mean(&shifted);
    let drift = res.states.iter().map(|u| (mean(u) - m0).abs()).fold(0.0, f64::max);
    report(4, "mean conservation", res.states.len() == 10_001 && drift <= 1e-12, t0, format!("max mean drift {drift:.1e} over 10^4 steps"));
}

// ---------------------------------------------------------------- 8

#[test]
fn criterion_08_randomization_expansion() {
    let t0 = Instant::now();
    let n = 8;
    let grid = Grid::line(n).unwrap();
    let truth = TruthTangent::advection(grid, 1.0).unwrap();
    let mut r = rng::stream(18, "criterion8", 0);
    let w = Tensor::matrix(n, n, upwind_matrix(n, 1.0, grid.h()).data().iter().map(|g| g + 0.5 * r.sample::<f64, _>(StandardNormal)).collect()).unwrap();
    let net = TangentNetwork::from_params(Arch::Linear { n }, Mode::Tangent, true, vec![w, Tensor::vector(normal_vec(&mut r, n, 0.1))]).unwrap();
    let u = sample_initial_transport(&grid, &mut r);
    let rms = (u.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    let dt = 0.02;
    let target: Vec<f64> = u.iter().zip(normal_vec(&mut r, n, 0.05)).zip(truth.eval(&u)).map(|((a, e), g)| a + dt * g + e).collect();
    let d = randomization_check(&net, &truth, &u, Some(&target), 0.02 * rms, 100_000, dt, 18).unwrap();
    let z_ml = d.ml.residual / d.ml.mc_stderr;
    let z_mc = d.mc.residual / d.mc.mc_stderr;
    report(
        8,
        "randomization expansion",
        z_ml.abs() <= 3.0 && z_mc.abs() <= 3.0 && t0.elapsed().as_secs() < 60,
        t0,
        format!("ML residual {:.2e} ({z_ml:+.2} se), MC residual {:.2e} ({z_mc:+.2} se)", d.ml.residual, d.mc.residual),
    );
}

// ---------------------------------------------------------------- 2

#[test]
fn criterion_02_linear_optimum_recovery() {
    let t0 = Instant::now();
    let n = 32;
    let grid = Grid::line(n).unwrap();
    let dt = grid.h();
    let truth = Arc::new(TruthTangent::advection(grid, 1.0).unwrap());
    let g = truth.jacobian(&vec![0.0; n]);
    let mut r = rng::stream(12, "criterion2", 0);
    let u0: Vec<Vec<f64>> = (0..64).map(|_| normal_vec(&mut r, n, 1.0)).collect();
    let cols: Vec<&[f64]> = u0.iter().map(|c| c.as_slice()).collect();
    let (w_star, b_star) = linear_optimum(&g, &Tensor::from_columns(&cols).unwrap()).unwrap();
    let closed_form_err = w_star.sub(&g).unwrap().max_abs().max(b_star.iter().fold(0.0, |m, b| m.max(b.abs())));

    let windows: Vec<Vec<Vec<f64>>> = u0
        .iter()
        .map(|u| {
            let gu = truth.eval(u);
            vec![u.clone(), u.iter().zip(&gu).map(|(a, b)| a + dt * b).collect()]
        })
        .collect();
    let refs: Vec<&[Vec<f64>]> = windows.iter().map(|w| w.as_slice()).collect();
    let batch = Batch::from_windows(&refs, None).unwrap();
    let cfg = LossConfig { alpha: 0.0, s: 0, r: 1, dt, truth_gradient: true };
    let mut net = TangentNetwork::init(InitSpec { seed: 12, ..Default::default() }, Arch::Linear { n }, Mode::Tangent, true).unwrap();
    let mut adam = AdamState::new(&net.params);
    let (mut steps, mut gap) = (0, f64::INFINITY);
    while steps < 50_000 {
        let (_, grads) = batch_loss_grad(&net, &truth, &cfg, &batch).unwrap();
        adam.step(&mut net.params, &grads, 1e-3).unwrap();
        steps += 1;
        if steps % 100 == 0 {
            gap = net.params[0].sub(&w_star).unwrap().max_abs();
            if gap < 1e-3 {
                break;
            }
        }
    }
    report(
        2,
        "linear optimum recovery",
        closed_form_err <= 1e-9 && gap < 1e-3 && t0.elapsed().as_secs() < 300,
        t0,
        format!("|W*-G| {closed_form_err:.1e}, |W-W*| {gap:.1e} after {steps} Adam steps"),
    );
}

// ------------------------------------------------------- transport runs

struct TransportRuns {
    truth: Arc<TruthTangent>,
    dt: f64,
    test: Vec<Trajectory>,
    noisy: TangentNetwork,
    clean: TangentNetwork,
    train_seconds: f64,
}

const TRANSPORT_FINE_DT: f64 = 5e-4;

/// Fine upwind solves on 400 cells, downsampled to 100 cells and `2 * fine_dt`.
fn transport_split(split: &str, count: usize, coarse_steps: usize) -> Vec<Trajectory> {
    let fine = Grid::line(400).unwrap();
    let truth = TruthTangent::advection(fine, 1.0).unwrap();
    (0..count)
        .map(|k| {
            let u0 = sample_initial_transport(&fine, &mut rng::stream(5, split, k as u64));
            let steps = 2 * coarse_steps;
            let traj = solve_reference(&truth, &u0, steps, TRANSPORT_FINE_DT * steps as f64).unwrap();
            downsample(&traj, 4, 2).unwrap()
        })
        .collect()
}

fn transport_runs() -> &'static TransportRuns {
    static RUNS: OnceLock<TransportRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let t0 = Instant::now();
        let train_set = transport_split("train", 100, 100);
        let validation = transport_split("validation", 4, 1000);
        let test = transport_split("test", 5, 2000);
        let truth = Arc::new(TruthTangent::advection(Grid::line(100).unwrap(), 1.0).unwrap());
        let dt = 2.0 * TRANSPORT_FINE_DT;
        let run = |delta: f64| {
            let cfg = TrainConfig {
                loss: LossConfig { alpha: 1e5, s: 1, r: 1, dt, truth_gradient: true },
                delta,
                lr: 1e-2,
                batch_size: 40,
                epochs: 2000,
                n_ckpt: 1000,
                ckpt_every: 50,
                validation_samples: 0,
                noise_seed: 51,
                shuffle_seed: 52,
                chunk_size: 40,
            };
            let init = TangentNetwork::init(InitSpec { seed: 50, ..Default::default() }, Arch::Linear { n: 100 }, Mode::Tangent, true).unwrap();
            train(&train_set, &validation, &truth, &cfg, init).unwrap().0
        };
        let noisy = run(0.01);
        let clean = run(0.0);
        TransportRuns { truth, dt, test, noisy, clean, train_seconds: t0.elapsed().as_secs_f64() }
    })
}

/// Mean over trajectories of the per-step MSE; steps past a divergence count
/// as infinite.
fn mean_mse(f: &dyn Slope, test: &[Trajectory], dt: f64, steps: usize) -> Vec<f64> {
    let mut acc = vec![0.0; steps + 1];
    for t in test {
        let r = rollout(Scheme::Fe, f, &t.states[0], dt, steps).unwrap();
        let m = rollout_mse(&r.states, &t.states[..r.states.len()]).unwrap();
        for (k, a) in acc.iter_mut().enumerate() {
            *a += m.get(k).copied().unwrap_or(f64::INFINITY) / test.len() as f64;
        }
    }
    acc
}

// ---------------------------------------------------------------- 5

#[test]
fn criterion_05_transport_long_rollout_ordering() {
    let t0 = Instant::now();
    let runs = transport_runs();
    let steps = 2000;
    let base = mean_mse(runs.truth.as_ref(), &runs.test, runs.dt, steps);
    let noisy = mean_mse(&runs.noisy, &runs.test, runs.dt, steps);
    let clean = mean_mse(&runs.clean, &runs.test, runs.dt, steps);
    let within = (0..=steps).all(|k| noisy[k] <= 2.0 * base[k]);
    let worst_noisy = (1..=steps).map(|k| noisy[k] / base[k]).fold(0.0, f64::max);
    let late_clean = (1000..=steps).map(|k| clean[k] / base[k]).fold(0.0, f64::max);
    report(
        5,
        "transport rollout ordering",
        within && late_clean > 10.0 && runs.train_seconds + t0.elapsed().as_secs_f64() < 1800.0,
        t0,
        format!(
            "max noisy/baseline {worst_noisy:.3}, max noise-free/baseline after step 1000 {late_clean:.3}, training {:.0}s",
            runs.train_seconds
        ),
    );
}

// ---------------------------------------------------------------- 6

/// Exponentiated KL fields on a 64² grid, fine steps of 5e-4, downsampled to
/// 16² and steps of 1e-3.
fn burgers_split(split: &str, count: usize, coarse_steps: usize) -> Vec<Trajectory> {
    let fine = Grid::square(64).unwrap();
    let truth = TruthTangent::burgers(fine, 0.01, BurgersState::UOnly).unwrap();
    let kl = KlSampler::new(&fine, true).unwrap();
    (0..count)
        .map(|k| {
            let u0 = kl.sample(&mut rng::stream(6, split, k as u64));
            let traj = solve_reference(&truth, &u0, 2 * coarse_steps, 1e-3 * coarse_steps as f64).unwrap();
            downsample(&traj, 4, 2).unwrap()
        })
        .collect()
}

#[test]
fn criterion_06_burgers_ordering() {
    let t0 = Instant::now();
    let train_set = burgers_split("train", 50, 60);
    let validation = burgers_split("validation", 3, 200);
    let test = burgers_split("test", 5, 200);
    let truth = Arc::new(TruthTangent::burgers(Grid::square(16).unwrap(), 0.01, BurgersState::UOnly).unwrap());
    let dt = 1e-3;
    let steps = 200;
    let run = |alpha: f64, delta: f64| {
        let cfg = TrainConfig {
            loss: LossConfig { alpha, s: 1, r: 1, dt, truth_gradient: true },
            delta,
            lr: 1e-4,
            batch_size: 40,
            epochs: 1000,
            n_ckpt: steps,
            ckpt_every: 50,
            validation_samples: 0,
            noise_seed: 61,
            shuffle_seed: 62,
            chunk_size: 40,
        };
        let init = TangentNetwork::init(InitSpec { seed: 60, ..Default::default() }, Arch::Mlp { n: 256, hidden: 256 }, Mode::Tangent, true).unwrap();
        let net = train(&train_set, &validation, &truth, &cfg, init).unwrap().0;
        mean_mse(&net, &test, dt, steps)
    };
    let mc2 = run(1e5, 0.02);
    let ml2 = run(0.0, 0.02);
    let mc0 = run(1e5, 0.0);
    let quarter = |m: &[f64]| m[3 * steps / 4..=steps].iter().sum::<f64>() / (steps / 4 + 1) as f64;
    let elapsed = t0.elapsed().as_secs_f64();
    report(
        6,
        "burgers ordering",
        mc2[steps] < ml2[steps] && quarter(&mc2) < quarter(&mc0) && elapsed < 7200.0,
        t0,
        format!(
            "final mc(2%) {:.3e} vs ml(2%) {:.3e}; final-quarter mc(2%) {:.3e} vs mc(0) {:.3e}",
            mc2[steps],
            ml2[steps],
            quarter(&mc2),
            quarter(&mc0)
        ),
    );
}

// ---------------------------------------------------------------- 7

#[test]
fn criterion_07_implicit_integration_stability() {
    let t0 = Instant::now();
    let runs = transport_runs();
    let net = &runs.noisy;
    let big = 50.0 / 3.0 * runs.dt;
    let n = net.n();
    let (w, b) = (&net.params[0], net.params[1].data());
    let lhs = nalgebra::DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - big * w.get(i, j)).lu();
    let max_norm = |u: &[f64]| u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (mut fe_steps, mut be_growth, mut be_gap) = (Vec::new(), 0.0f64, 0.0f64);
    for t in &runs.test {
        let u0 = &t.states[0];
        fe_steps.push(rollout(Scheme::Fe, net, u0, big, 20).unwrap().diverged_at);
        let be = rollout(Scheme::Be(NewtonOptions::default()), net, u0, big, 100).unwrap();
        be_growth = be_growth.max(be.states.iter().map(|u| max_norm(u)).fold(0.0, f64::max) / max_norm(u0));
        let mut u = u0.clone();
        for state in &be.states[1..] {
            let rhs = nalgebra::DVector::from_iterator(n, u.iter().zip(b).map(|(x, b)| x + big * b));
            u = lhs.solve(&rhs).unwrap().iter().copied().collect();
            be_gap = be_gap.max(max_abs_diff(&u, state));
        }
    }
    let fe_blows_up = fe_steps.iter().all(|d| d.is_some());
    report(
        7,
        "implicit integration",
        fe_blows_up && be_growth <= 2.0 && be_gap <= 1e-8,
        t0,
        format!("FE divergence steps {fe_steps:?}, BE max-norm growth {be_growth:.3}, BE vs linear solve {be_gap:.1e}"),
    );
}

// ---------------------------------------------------------------- 9

#[test]
fn criterion_09_gronwall_bound() {
    let t0 = Instant::now();
    let runs = transport_runs();
    let (mut worst, mut control) = (0.0f64, 0.0f64);
    for t in &runs.test {
        let rep = error_report(&runs.truth, &runs.noisy, &t.states[0], runs.dt, 50, CPolicy::Zero).unwrap();
        for (e, b) in rep.e.iter().zip(&rep.bound).skip(1) {
            worst = worst.max(e / b);
        }
        let exact = error_report(&runs.truth, runs.truth.as_ref(), &t.states[0], runs.dt, 50, CPolicy::Zero).unwrap();
        control = control.max(exact.e.iter().chain(&exact.bound).fold(0.0, |m, v| m.max(v.abs())));
    }
    report(
        9,
        "Gronwall bound",
        worst <= 1.05 && control == 0.0,
        t0,
        format!("max e/B {worst:.4} over 5 states x 50 steps (c = 0), exact-tangent max |e|,|B| {control:e}"),
    );
}

// ---------------------------------------------------------------- 10

#[test]
fn criterion_10_time_step_flexibility() {
    let t0 = Instant::now();
    let runs = transport_runs();
    let horizon = 100;
    let mut ratios = Vec::new();
    for t in &runs.test {
        let final_state = |refine: usize| {
            let r = rollout(Scheme::Fe, &runs.noisy, &t.states[0], runs.dt / refine as f64, horizon * refine).unwrap();
            assert!(r.diverged_at.is_none());
            r.states.last().unwrap().clone()
        };
        let (a, b, c) = (final_state(1), final_state(2), final_state(4));
        let norm = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        ratios.push(norm(&b, &a) / norm(&c, &b));
    }
    report(
        10,
        "time-step flexibility",
        ratios.iter().all(|r| (1.5..=2.5).contains(r)),
        t0,
        format!("halving ratios {:?}", ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>()),
    );
}

fn run_cli(dir: &std::path::Path, args: &[&str]) {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_mctangent"))
        .current_dir(dir)
        .env_remove("MCTANGENT_OUT")
        .args(args)
        .output()
        .expect("spawn mctangent");
    assert!(out.status.success(), "mctangent {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn pipeline(dir: &std::path::Path) {
    let common = [
        "--set", "data.train_samples=4",
        "--set", "data.test_samples=2",
        "--set", "train.epochs=3",
        "--set", "train.alpha=1e5",
        "--set", "train.delta=0.01",
        "--set", "train.s=1",
        "--set", "train.r=2",
        "--set", "train.batch_size=16",
        "--set", "train.n_ckpt=50",
        "--set", "diagnose.samples=500",
        "--set", "diagnose.tests=2",
        "--set", "diagnose.steps=20",
    ];
    let with = |extra: &[&str]| -> Vec<String> { extra.iter().chain(common.iter()).map(|s| s.to_string()).collect() };
    let call = |extra: &[&str]| {
        let v = with(extra);
        let refs: Vec<&str> = v.iter().map(|s| s.as_str()).collect();
        run_cli(dir, &refs);
    };
    call(&["gen-data"]);
    call(&["train"]);
    call(&["predict", "--initial", "out/data/test/traj_0000.mct", "--steps", "200", "--output", "out/pred.mct"]);
    call(&["predict", "--initial", "out/data/test/traj_0001.mct", "--scheme", "be", "--steps", "40", "--output", "out/pred_be.mct"]);
    call(&["eval", "--pred", "out/pred.mct", "--truth", "out/data/test/traj_0000.mct", "--output", "out/eval.csv"]);
    for kind in ["bound", "randomization", "lemma"] {
        call(&["diagnose", "--set", &format!("diagnose.kind={kind}")]);
    }
}

fn collect_files(root: &std::path::Path, rel: &std::path::Path, out: &mut Vec<std::path::PathBuf>) {
    let mut entries: Vec<_> = std::fs::read_dir(root.join(rel)).unwrap().map(|e| e.unwrap().file_name()).collect();
    entries.sort();
    for name in entries {
        let r = rel.join(&name);
        if root.join(&r).is_dir() {
            collect_files(root, &r, out);
        } else if name != "train_timing.csv" {
            out.push(r);
        }
    }
}

#[test]
fn criterion_11_pipeline_determinism() {
    let started = Instant::now();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path());
    pipeline(b.path());
    let (mut fa, mut fb) = (Vec::new(), Vec::new());
    collect_files(a.path(), std::path::Path::new(""), &mut fa);
    collect_files(b.path(), std::path::Path::new(""), &mut fb);
    let mut mismatched = Vec::new();
    for f in &fa {
        if std::fs::read(a.path().join(f)).unwrap() != std::fs::read(b.path().join(f)).unwrap_or_default() {
            mismatched.push(f.display().to_string());
        }
    }
    let kinds = |ext: &str| fa.iter().filter(|p| p.extension().is_some_and(|e| e == ext)).count();
    let pass = fa == fb && mismatched.is_empty() && kinds("mct") >= 8 && kinds("csv") >= 6;
    report(
        11,
        "pipeline determinism",
        pass,
        started,
        format!("{} files ({} arrays, {} csv) compared, mismatched {:?}", fa.len(), kinds("mct"), kinds("csv"), mismatched),
    );
}

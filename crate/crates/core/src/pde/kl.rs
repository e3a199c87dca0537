//! Truncated Karhunen-Loeve sampler for the periodic covariance
//! `7^{3/2} (-Delta + 49 I)^{-2.5}` on the unit square.

use std::cmp::Ordering;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use super::grid::Grid;
use crate::error::{Error, Result};

pub const KL_MODES: usize = 15;
const SCALE: f64 = 18.520259177452136; // 7^{1.5}
const SHIFT: f64 = 49.0;
const EXPONENT: f64 = 2.5;

/// Covariance eigenvalue for integer wavenumber `(kx, ky)`.
pub fn kl_eigenvalue(kx: i64, ky: i64) -> f64 {
    let k2 = (kx * kx + ky * ky) as f64;
    SCALE * (4.0 * PI * PI * k2 + SHIFT).powf(-EXPONENT)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    Constant,
    Sin,
    Cos,
}

#[derive(Clone, Debug)]
pub struct KlMode {
    pub k: (i64, i64),
    pub basis: Basis,
    pub lambda: f64,
    pub field: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct KlSampler {
    pub exponentiate: bool,
    pub modes: Vec<KlMode>,
}

impl KlSampler {
    pub fn new(grid: &Grid, exponentiate: bool) -> Result<Self> {
        Self::with_modes(grid, KL_MODES, exponentiate)
    }

    pub fn with_modes(grid: &Grid, count: usize, exponentiate: bool) -> Result<Self> {
        if grid.dim != 2 {
            return Err(Error::config("grid.dim", "KL sampling needs a 2D grid"));
        }
        // Wavenumbers must stay below Nyquist for the sin/cos pair to be orthonormal.
        let kmax = (grid.n as i64 - 1) / 2;
        let mut cands: Vec<((i64, i64), Basis)> = vec![((0, 0), Basis::Constant)];
        for kx in 0..=kmax {
            for ky in -kmax..=kmax {
                if kx > 0 || ky > 0 {
                    cands.push(((kx, ky), Basis::Sin));
                    cands.push(((kx, ky), Basis::Cos));
                }
            }
        }
        if cands.len() < count {
            return Err(Error::config("grid.n", format!("grid too coarse for {count} KL modes")));
        }
        let rank = |b: Basis| match b {
            Basis::Constant => 0,
            Basis::Sin => 1,
            Basis::Cos => 2,
        };
        cands.sort_by(|(ka, ba), (kb, bb)| {
            let (la, lb) = (ka.0 * ka.0 + ka.1 * ka.1, kb.0 * kb.0 + kb.1 * kb.1);
            la.cmp(&lb).then(ka.cmp(kb)).then(rank(*ba).cmp(&rank(*bb))).then(Ordering::Equal)
        });
        let modes = cands
            .into_iter()
            .take(count)
            .map(|(k, basis)| {
                let (kx, ky) = (k.0 as f64, k.1 as f64);
                let field = grid.sample(|x, y| {
                    let th = 2.0 * PI * (kx * x + ky * y);
                    match basis {
                        Basis::Constant => 1.0,
                        Basis::Sin => 2f64.sqrt() * th.sin(),
                        Basis::Cos => 2f64.sqrt() * th.cos(),
                    }
                });
                KlMode { k, basis, lambda: kl_eigenvalue(k.0, k.1), field }
            })
            .collect();
        Ok(Self { exponentiate, modes })
    }

    pub fn field(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.modes.len() {
            return Err(Error::dim("kl_field", format!("{} coefficients for {} modes", z.len(), self.modes.len())));
        }
        let len = self.modes[0].field.len();
        let mut out = vec![0.0; len];
        for (m, &zi) in self.modes.iter().zip(z) {
            let s = m.lambda.sqrt() * zi;
            out.iter_mut().zip(&m.field).for_each(|(o, f)| *o += s * f);
        }
        if self.exponentiate {
            out.iter_mut().for_each(|v| *v = v.exp());
        }
        Ok(out)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.modes.len()).map(|_| rng.sample(StandardNormal)).collect();
        self.field(&z).expect("coefficient count matches")
    }
}

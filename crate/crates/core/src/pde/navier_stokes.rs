//! Vorticity-form incompressible Navier-Stokes on the periodic unit square,
//! evaluated pseudospectrally.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::grid::Grid;
use super::spectral::Spectral2;


#[derive(Clone, Debug)]
pub struct NavierStokes {
    pub nu: f64,
    pub forcing: Vec<f64>,
    spec: Spectral2,
}

/// `0.1 (sin 2pi(x+y) + cos 2pi(x+y))`.
pub fn default_forcing(grid: &Grid) -> Vec<f64> {
    grid.sample(|x, y| 0.1 * ((2.0 * PI * (x + y)).sin() + (2.0 * PI * (x + y)).cos()))
}

/// Physical-space ingredients of the advection term.
struct Parts {
    /// `u = d_y psi`
    a: Vec<f64>,
    /// `omega_x`
    b: Vec<f64>,
    /// `v = -d_x psi`
    c: Vec<f64>,
    /// `omega_y`
    d: Vec<f64>,
}

impl NavierStokes {
    pub fn new(n: usize, nu: f64, forcing: Vec<f64>) -> Self {
        assert_eq!(forcing.len(), n * n, "forcing shape");
        Self { nu, forcing, spec: Spectral2::new(n) }
    }

    pub fn n(&self) -> usize {
        self.spec.n()
    }

    pub fn spectral(&self) -> &Spectral2 {
        &self.spec
    }

    fn inv_neg_lap(&self, p: usize) -> f64 {
        let l = self.spec.neg_lap_symbol(p);
        if l == 0.0 {
            0.0
        } else {
            1.0 / l
        }
    }

    fn parts_hat(&self, wh: &[Complex64]) -> Parts {
        let s = &self.spec;
        let field = |sym: &dyn Fn(usize) -> Complex64| -> Vec<f64> {
            s.inverse(wh.iter().enumerate().map(|(p, &w)| w * sym(p)).collect())
        };
        Parts {
            a: field(&|p| s.deriv_symbol(p, 1) * self.inv_neg_lap(p)),
            b: field(&|p| s.deriv_symbol(p, 0)),
            c: field(&|p| -s.deriv_symbol(p, 0) * self.inv_neg_lap(p)),
            d: field(&|p| s.deriv_symbol(p, 1)),
        }
    }

    /// Dealiased spectrum of `u omega_x + v omega_y`.
    pub fn advection_hat(&self, wh: &[Complex64]) -> Vec<Complex64> {
        let pt = self.parts_hat(wh);
        let prod: Vec<f64> = (0..wh.len()).map(|p| pt.a[p] * pt.b[p] + pt.c[p] * pt.d[p]).collect();
        self.masked(self.spec.forward(&prod))
    }

    fn masked(&self, mut h: Vec<Complex64>) -> Vec<Complex64> {
        for (p, v) in h.iter_mut().enumerate() {
            if !self.spec.dealias(p) {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        h
    }

    pub fn eval(&self, w: &[f64]) -> Vec<f64> {
        let wh = self.spec.forward(w);
        let nh = self.advection_hat(&wh);
        let gh = (0..wh.len()).map(|p| -nh[p] - self.nu * self.spec.neg_lap_symbol(p) * wh[p]).collect();
        let mut g = self.spec.inverse(gh);
        for (gi, fi) in g.iter_mut().zip(&self.forcing) {
            *gi += fi;
        }
        g
    }

    pub fn jvp(&self, w: &[f64], dw: &[f64]) -> Vec<f64> {
        let pt = self.parts_hat(&self.spec.forward(w));
        let dh = self.spec.forward(dw);
        let dp = self.parts_hat(&dh);
        let dn: Vec<f64> = (0..w.len())
            .map(|p| dp.a[p] * pt.b[p] + pt.a[p] * dp.b[p] + dp.c[p] * pt.d[p] + pt.c[p] * dp.d[p])
            .collect();
        let nh = self.masked(self.spec.forward(&dn));
        let gh = (0..w.len()).map(|p| -nh[p] - self.nu * self.spec.neg_lap_symbol(p) * dh[p]).collect();
        self.spec.inverse(gh)
    }

    pub fn vjp(&self, w: &[f64], g: &[f64]) -> Vec<f64> {
        let s = &self.spec;
        let pt = self.parts_hat(&s.forward(w));
        let gh = s.forward(g);
        let h = s.inverse(self.masked(gh.iter().map(|v| -v).collect()));
        let prod = |x: &[f64]| -> Vec<Complex64> {
            s.forward(&h.iter().zip(x).map(|(a, b)| a * b).collect::<Vec<_>>())
        };
        let (hb, ha, hd, hc) = (prod(&pt.b), prod(&pt.a), prod(&pt.d), prod(&pt.c));
        let out = (0..w.len())
            .map(|p| {
                let (dx, dy, l) = (s.deriv_symbol(p, 0), s.deriv_symbol(p, 1), self.inv_neg_lap(p));
                -dy * l * hb[p] - dx * ha[p] + dx * l * hd[p] - dy * hc[p]
                    - self.nu * s.neg_lap_symbol(p) * gh[p]
            })
            .collect();
        s.inverse(out)
    }

    /// One step of the reference scheme: explicit advection and forcing,
    /// Crank-Nicolson viscosity, all in Fourier space.
    pub fn cn_step_hat(&self, wh: &[Complex64], fh: &[Complex64], dt: f64) -> Vec<Complex64> {
        let nh = self.advection_hat(wh);
        (0..wh.len())
            .map(|p| {
                let half = 0.5 * dt * self.nu * self.spec.neg_lap_symbol(p);
                (dt * (fh[p] - nh[p]) + (1.0 - half) * wh[p]) / (1.0 + half)
            })
            .collect()
    }
}

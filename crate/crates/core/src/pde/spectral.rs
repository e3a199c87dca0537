//! 2D periodic Fourier transforms and spectral multipliers on an `n x n` grid.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct Spectral2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral2").field("n", &self.n).finish()
    }
}

/// Signed integer wavenumber of FFT bin `m`.
pub fn wavenumber(m: usize, n: usize) -> i64 {
    if m <= n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

impl Spectral2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn transform(&self, buf: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        fft.process(buf);
        transpose(buf, n);
        fft.process(buf);
        transpose(buf, n);
    }

    pub fn forward(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, &self.fwd);
        buf
    }

    /// Inverse transform, normalized, keeping the real part.
    pub fn inverse(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut buf, &self.inv);
        let s = 1.0 / (self.n * self.n) as f64;
        buf.into_iter().map(|c| c.re * s).collect()
    }

    /// `(kx, ky)` for the flattened bin index `p`.
    pub fn k(&self, p: usize) -> (i64, i64) {
        (wavenumber(p / self.n, self.n), wavenumber(p % self.n, self.n))
    }

    fn is_nyquist(&self, k: i64) -> bool {
        self.n % 2 == 0 && k.unsigned_abs() as usize == self.n / 2
    }

    /// Symbol of d/dx (`axis = 0`) or d/dy (`axis = 1`); zero on the Nyquist bin.
    pub fn deriv_symbol(&self, p: usize, axis: usize) -> Complex64 {
        let (kx, ky) = self.k(p);
        let k = if axis == 0 { kx } else { ky };
        if self.is_nyquist(k) {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, 2.0 * PI * k as f64)
        }
    }

    /// `4 pi^2 |k|^2`, the symbol of `-Delta`.
    pub fn neg_lap_symbol(&self, p: usize) -> f64 {
        let (kx, ky) = self.k(p);
        4.0 * PI * PI * (kx * kx + ky * ky) as f64
    }

    /// Two-thirds rule: keep modes with `|kx|, |ky| <= n/3`.
    pub fn dealias(&self, p: usize) -> bool {
        let (kx, ky) = self.k(p);
        let cut = self.n as f64 / 3.0;
        (kx.abs() as f64) <= cut && (ky.abs() as f64) <= cut
    }

    /// Applies a spectral multiplier to a real field.
    pub fn apply(&self, x: &[f64], symbol: impl Fn(usize) -> Complex64) -> Vec<f64> {
        let mut xh = self.forward(x);
        for (p, v) in xh.iter_mut().enumerate() {
            *v *= symbol(p);
        }
        self.inverse(xh)
    }
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

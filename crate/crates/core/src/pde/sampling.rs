//! Random initial conditions.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use super::grid::Grid;

/// `sum_{i=1}^{5} a_i sin(2 pi i x) + b_i cos(2 pi i x)` on a 1D grid.
pub fn transport_from_coeffs(grid: &Grid, a: &[f64; 5], b: &[f64; 5]) -> Vec<f64> {
    grid.sample(|x, _| {
        (0..5)
            .map(|i| {
                let th = 2.0 * PI * (i + 1) as f64 * x;
                a[i] * th.sin() + b[i] * th.cos()
            })
            .sum()
    })
}

/// Trig sum with standard normal coefficients.
pub fn sample_initial_transport<R: Rng + ?Sized>(grid: &Grid, rng: &mut R) -> Vec<f64> {
    let mut a = [0.0; 5];
    let mut b = [0.0; 5];
    for i in 0..5 {
        a[i] = rng.sample(StandardNormal);
        b[i] = rng.sample(StandardNormal);
    }
    transport_from_coeffs(grid, &a, &b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_and_single_mode() {
        let g = Grid::line(32).unwrap();
        assert!(transport_from_coeffs(&g, &[0.0; 5], &[0.0; 5]).iter().all(|&v| v == 0.0));
        let mut a = [0.0; 5];
        a[0] = 1.0;
        let u = transport_from_coeffs(&g, &a, &[0.0; 5]);
        for (i, v) in u.iter().enumerate() {
            assert!((v - (2.0 * PI * i as f64 / 32.0).sin()).abs() < 1e-15);
        }
    }

    #[test]
    fn sampled_field_has_zero_mean() {
        let g = Grid::line(64).unwrap();
        let u = sample_initial_transport(&g, &mut crate::rng::stream(3, "data", 0));
        assert!(u.iter().sum::<f64>().abs() / 64.0 < 1e-13);
    }
}

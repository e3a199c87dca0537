use crate::error::{Error, Result};

/// Uniform periodic grid on the unit interval or unit square.
///
/// 2D fields are flattened with index `i * n + j`, `i` the x index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grid {
    pub dim: usize,
    pub n: usize,
}

impl Grid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::config("grid.dim", format!("must be 1 or 2, got {dim}")));
        }
        if n < 4 {
            return Err(Error::config("grid.n", format!("need at least 4 points, got {n}")));
        }
        Ok(Self { dim, n })
    }

    pub fn line(n: usize) -> Result<Self> {
        Self::new(1, n)
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(2, n)
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Number of grid points.
    pub fn size(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn coord(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    /// Samples `f(x)` (1D) or `f(x, y)` (2D; `y` ignored in 1D).
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        match self.dim {
            1 => (0..self.n).map(|i| f(self.coord(i), 0.0)).collect(),
            _ => (0..self.n)
                .flat_map(|i| (0..self.n).map(move |j| (i, j)))
                .map(|(i, j)| f(self.coord(i), self.coord(j)))
                .collect(),
        }
    }

    pub fn require_pow2(&self, what: &str) -> Result<()> {
        if self.n.is_power_of_two() {
            Ok(())
        } else {
            Err(Error::config(what.to_string(), format!("grid size {} is not a power of two", self.n)))
        }
    }
}

#[inline]
pub(crate) fn wrap_prev(i: usize, n: usize) -> usize {
    if i == 0 {
        n - 1
    } else {
        i - 1
    }
}

#[inline]
pub(crate) fn wrap_next(i: usize, n: usize) -> usize {
    if i + 1 == n {
        0
    } else {
        i + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_grids() {
        assert!(Grid::line(3).is_err());
        assert!(Grid::new(3, 8).is_err());
        assert_eq!(Grid::square(8).unwrap().size(), 64);
    }

    #[test]
    fn sample_layout_is_x_major() {
        let g = Grid::square(4).unwrap();
        let f = g.sample(|x, y| 10.0 * x + y);
        assert_eq!(f[1 * 4 + 2], 10.0 * 0.25 + 0.5);
    }
}

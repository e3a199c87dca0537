use super::grid::Grid;
use crate::error::{Error, Result};

/// States `u^0 .. u^{N_t}` at uniform spacing `dt`.
///
/// A state holds `fields` stacked grid fields.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub grid: Grid,
    pub fields: usize,
    pub dt: f64,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(grid: Grid, fields: usize, dt: f64, states: Vec<Vec<f64>>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Contract(format!("trajectory step must be positive, got {dt}")));
        }
        let len = grid.size() * fields;
        if let Some(bad) = states.iter().position(|s| s.len() != len) {
            return Err(Error::dim("trajectory", format!("state {bad} has {} entries, expected {len}", states[bad].len())));
        }
        Ok(Self { grid, fields, dt, states })
    }

    pub fn steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn state_len(&self) -> usize {
        self.grid.size() * self.fields
    }

    /// Keeps only the first `field`.
    pub fn field(&self, field: usize) -> Trajectory {
        let m = self.grid.size();
        Trajectory {
            grid: self.grid,
            fields: 1,
            dt: self.dt,
            states: self.states.iter().map(|s| s[field * m..(field + 1) * m].to_vec()).collect(),
        }
    }
}

/// Pointwise subsampling in space and time, starting at index 0.
pub fn downsample(fine: &Trajectory, space_stride: usize, time_stride: usize) -> Result<Trajectory> {
    if space_stride == 0 || fine.grid.n % space_stride != 0 {
        return Err(Error::config("data.space_stride", format!("{space_stride} does not divide grid size {}", fine.grid.n)));
    }
    if time_stride == 0 || fine.steps() % time_stride != 0 {
        return Err(Error::config("data.time_stride", format!("{time_stride} does not divide step count {}", fine.steps())));
    }
    let grid = Grid::new(fine.grid.dim, fine.grid.n / space_stride)?;
    let (nf, nc, m) = (fine.grid.n, grid.n, fine.grid.size());
    let keep: Vec<usize> = match grid.dim {
        1 => (0..nc).map(|i| i * space_stride).collect(),
        _ => (0..nc)
            .flat_map(|i| (0..nc).map(move |j| (i * space_stride) * nf + j * space_stride))
            .collect(),
    };
    let states = fine
        .states
        .iter()
        .step_by(time_stride)
        .map(|s| (0..fine.fields).flat_map(|f| keep.iter().map(move |&p| s[f * m + p])).collect())
        .collect();
    Trajectory::new(grid, fine.fields, fine.dt * time_stride as f64, states)
}

//! Overlapping training windows of `S + 2` consecutive snapshots.

use crate::error::{Error, Result};
use crate::pde::Trajectory;

/// Window `(u^{k,0}, .., u^{k,S+1})` = states `start ..= start + S + 1` of a sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub sample: usize,
    pub start: usize,
}

#[derive(Clone, Debug)]
pub struct WindowSet {
    pub s: usize,
    pub windows: Vec<Window>,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// States of window `w`.
    pub fn states<'a>(&self, data: &'a [Trajectory], w: Window) -> &'a [Vec<f64>] {
        &data[w.sample].states[w.start..w.start + self.s + 2]
    }
}

/// Sliding windows with stride 1: `N_t - S` per trajectory.
pub fn make_windows(data: &[Trajectory], s: usize) -> Result<WindowSet> {
    let mut windows = Vec::new();
    for (k, t) in data.iter().enumerate() {
        if t.states.len() < s + 2 {
            return Err(Error::Contract(format!(
                "sample {k} has {} states, windows with S = {s} need at least {}",
                t.states.len(),
                s + 2
            )));
        }
        windows.extend((0..t.steps() - s).map(|start| Window { sample: k, start }));
    }
    Ok(WindowSet { s, windows })
}

use crate::error::{Error, Result};

/// Per-step MSE between two aligned state sequences.
pub fn rollout_mse(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<Vec<f64>> {
    if pred.len() != truth.len() {
        return Err(Error::dim("rollout_mse", format!("{} predicted vs {} reference states", pred.len(), truth.len())));
    }
    pred.iter()
        .zip(truth)
        .enumerate()
        .map(|(k, (p, t))| {
            if p.len() != t.len() || p.is_empty() {
                return Err(Error::dim("rollout_mse", format!("step {k}: {} vs {} entries", p.len(), t.len())));
            }
            Ok(p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len() as f64)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MseSummary {
    pub final_mse: f64,
    pub max_mse: f64,
    pub step_of_max: usize,
}

pub fn summarize(series: &[f64]) -> Option<MseSummary> {
    let final_mse = *series.last()?;
    let (step_of_max, max_mse) = series
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, v)| if v > bv { (i, v) } else { (bi, bv) });
    Some(MseSummary { final_mse, max_mse, step_of_max })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let a = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        assert_eq!(rollout_mse(&a, &a).unwrap(), vec![0.0, 0.0]);
        let b: Vec<Vec<f64>> = a.iter().map(|s| s.iter().map(|v| v + 0.5).collect()).collect();
        assert_eq!(rollout_mse(&b, &a).unwrap(), vec![0.25, 0.25]);
        let c = vec![vec![0.0, 0.0, 0.0, 3.0]];
        assert_eq!(rollout_mse(&c, &[vec![0.0; 4]]).unwrap(), vec![9.0 / 4.0]);
        assert!(rollout_mse(&a, &a[..1]).is_err());
        let s = summarize(&[0.1, 0.5, 0.2]).unwrap();
        assert_eq!((s.final_mse, s.max_mse, s.step_of_max), (0.2, 0.5, 1));
    }
}

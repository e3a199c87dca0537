//! Learnable tangent networks and the direct next-step baseline.

use rand_distr::{Distribution, Normal};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arch {
    /// `W u + b`
    Linear { n: usize },
    /// `W2 relu(W1 u + b1) + b2`
    Mlp { n: usize, hidden: usize },
}

impl Arch {
    pub fn n(&self) -> usize {
        match *self {
            Arch::Linear { n } | Arch::Mlp { n, .. } => n,
        }
    }
}

/// Whether the output is a slope `Psi(u)` or the next state itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Tangent,
    Direct,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitSpec {
    pub weight_std: f64,
    pub bias: f64,
    pub seed: u64,
}

impl Default for InitSpec {
    fn default() -> Self {
        Self { weight_std: 0.1, bias: 0.0, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TangentNetwork {
    pub arch: Arch,
    pub mode: Mode,
    pub use_bias: bool,
    /// Linear: `[W, b?]`. Mlp: `[W1, b1?, W2, b2?]`.
    pub params: Vec<Tensor>,
}

/// Parameter handles on a tape, in the same order as `TangentNetwork::params`.
pub struct TapeParams(pub Vec<Var>);

impl TangentNetwork {
    pub fn init(spec: InitSpec, arch: Arch, mode: Mode, use_bias: bool) -> Result<Self> {
        if !(spec.weight_std >= 0.0) {
            return Err(Error::config("init.weight_std", "must be non-negative"));
        }
        let shapes = Self::shapes(arch, use_bias);
        if shapes.iter().any(|s| s.contains(&0)) {
            return Err(Error::config("model", "network dimensions must be at least 1"));
        }
        let normal = Normal::new(0.0, spec.weight_std).map_err(|e| Error::config("init.weight_std", e.to_string()))?;
        let params = shapes
            .iter()
            .enumerate()
            .map(|(k, shape)| {
                if shape.len() == 1 {
                    Tensor::filled(shape, spec.bias)
                } else {
                    let mut r = rng::stream(spec.seed, "init", k as u64);
                    let data = (0..shape.iter().product()).map(|_| normal.sample(&mut r)).collect();
                    Tensor::new(shape.clone(), data).expect("shape from arch")
                }
            })
            .collect();
        Ok(Self { arch, mode, use_bias, params })
    }

    pub fn from_params(arch: Arch, mode: Mode, use_bias: bool, params: Vec<Tensor>) -> Result<Self> {
        let shapes = Self::shapes(arch, use_bias);
        if shapes.len() != params.len() || shapes.iter().zip(&params).any(|(s, p)| s.as_slice() != p.shape()) {
            return Err(Error::dim("network", format!("parameters do not fit {arch:?} (bias: {use_bias})")));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("network parameters"));
        }
        Ok(Self { arch, mode, use_bias, params })
    }

    pub fn shapes(arch: Arch, use_bias: bool) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut layer = |rows: usize, cols: usize| {
            out.push(vec![rows, cols]);
            if use_bias {
                out.push(vec![rows]);
            }
        };
        match arch {
            Arch::Linear { n } => layer(n, n),
            Arch::Mlp { n, hidden } => {
                layer(hidden, n);
                layer(n, hidden);
            }
        }
        out
    }

    pub fn n(&self) -> usize {
        self.arch.n()
    }

    /// Layers as `(weight, bias)` pairs.
    fn layers(&self) -> Vec<(&Tensor, Option<&Tensor>)> {
        let step = if self.use_bias { 2 } else { 1 };
        self.params
            .chunks(step)
            .map(|c| (&c[0], if self.use_bias { Some(&c[1]) } else { None }))
            .collect()
    }

    fn affine(w: &Tensor, b: Option<&Tensor>, x: &Tensor) -> Tensor {
        let mut y = w.matmul(x).expect("shape checked");
        if let Some(b) = b {
            let cols = y.cols();
            for (row, &bi) in y.data_mut().chunks_mut(cols).zip(b.data()) {
                row.iter_mut().for_each(|v| *v += bi);
            }
        }
        y
    }

    /// Evaluates the network on a vector or on the columns of an `n x B` matrix.
    pub fn forward_tensor(&self, x: &Tensor) -> Result<Tensor> {
        if x.rows() != self.n() || x.rank() == 0 || x.rank() > 2 {
            return Err(Error::dim("forward", format!("input {:?} for n = {}", x.shape(), self.n())));
        }
        let layers = self.layers();
        let mut y = Self::affine(layers[0].0, layers[0].1, x);
        for (w, b) in &layers[1..] {
            y = y.map(|v| v.max(0.0));
            y = Self::affine(w, *b, &y);
        }
        Ok(y)
    }

    pub fn forward(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_tensor(&Tensor::vector(u.to_vec()))?.into_data())
    }

    /// Registers parameters on `tape` as trainable leaves.
    pub fn register(&self, tape: &mut Tape) -> TapeParams {
        TapeParams(self.params.iter().map(|p| tape.param(p.clone())).collect())
    }

    /// Tape-recorded forward pass.
    pub fn forward_tape(&self, tape: &mut Tape, p: &TapeParams, x: Var) -> Result<Var> {
        let step = if self.use_bias { 2 } else { 1 };
        let layer = |tape: &mut Tape, k: usize, x: Var| -> Result<Var> {
            let y = tape.matmul(p.0[k * step], x)?;
            if self.use_bias {
                tape.add_bias(y, p.0[k * step + 1])
            } else {
                Ok(y)
            }
        };
        match self.arch {
            Arch::Linear { .. } => layer(tape, 0, x),
            Arch::Mlp { .. } => {
                let z = layer(tape, 0, x)?;
                let a = tape.relu(z);
                layer(tape, 1, a)
            }
        }
    }

    /// Exact Jacobian of the network output with respect to its input.
    pub fn jacobian(&self, u: &[f64]) -> Result<Tensor> {
        if u.len() != self.n() {
            return Err(Error::dim("jacobian", format!("input of length {} for n = {}", u.len(), self.n())));
        }
        let layers = self.layers();
        match self.arch {
            Arch::Linear { .. } => Ok(layers[0].0.clone()),
            Arch::Mlp { n, hidden } => {
                let (w1, b1) = layers[0];
                let (w2, _) = layers[1];
                let z = Self::affine(w1, b1, &Tensor::vector(u.to_vec()));
                let mut masked = w1.clone();
                for (h, row) in masked.data_mut().chunks_mut(n).enumerate() {
                    if z.data()[h] <= 0.0 {
                        row.iter_mut().for_each(|v| *v = 0.0);
                    }
                }
                debug_assert_eq!(masked.rows(), hidden);
                w2.matmul(&masked)
            }
        }
    }

    /// Next state from a direct-mode network.
    pub fn direct_step(&self, u: &[f64]) -> Result<Vec<f64>> {
        if self.mode != Mode::Direct {
            return Err(Error::Contract("direct_step needs a direct-mode network".into()));
        }
        self.forward(u)
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.len()).sum()
    }
}

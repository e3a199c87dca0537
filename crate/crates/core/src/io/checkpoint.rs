//! Network checkpoints: a manifest plus one array file per parameter.

use std::path::Path;

use toml::Value;

use super::array_file::ArrayFile;
use super::config::FlatConfig;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::model::{Arch, Mode, TangentNetwork};

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub net: TangentNetwork,
    /// Time step the network was trained at.
    pub dt: f64,
    /// Free-form metadata, written under `meta.`.
    pub meta: FlatConfig,
}

fn param_file(k: usize) -> String {
    format!("param_{k}.mct")
}

impl Checkpoint {
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut m = FlatConfig::default();
        let (arch, hidden) = match self.net.arch {
            Arch::Linear { .. } => ("linear", 0),
            Arch::Mlp { hidden, .. } => ("mlp", hidden),
        };
        m.0.insert("model.arch".into(), Value::String(arch.into()));
        m.0.insert("model.n".into(), Value::Integer(self.net.n() as i64));
        m.0.insert("model.hidden".into(), Value::Integer(hidden as i64));
        let mode = if self.net.mode == Mode::Direct { "direct" } else { "tangent" };
        m.0.insert("model.mode".into(), Value::String(mode.into()));
        m.0.insert("model.bias".into(), Value::Boolean(self.net.use_bias));
        m.0.insert("model.params".into(), Value::Integer(self.net.params.len() as i64));
        m.0.insert("train.dt".into(), Value::Float(self.dt));
        for (k, v) in &self.meta.0 {
            m.0.insert(format!("meta.{k}"), v.clone());
        }
        let path = dir.join("manifest.cfg");
        std::fs::write(&path, m.serialize()).map_err(|e| Error::io(&path, e))?;
        for (k, p) in self.net.params.iter().enumerate() {
            ArrayFile::new(p.shape().to_vec(), p.data().to_vec())?.write(&dir.join(param_file(k)))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.cfg");
        let m = FlatConfig::read(&path)?;
        let bad = |msg: &str| Error::Format { path: path.clone(), msg: msg.to_string() };
        let get = |k: &str| m.0.get(k).ok_or_else(|| bad(&format!("missing {k}")));
        let int = |k: &str| get(k)?.as_integer().map(|i| i as usize).ok_or_else(|| bad(&format!("{k} is not an integer")));
        let n = int("model.n")?;
        let arch = match get("model.arch")?.as_str() {
            Some("linear") => Arch::Linear { n },
            Some("mlp") => Arch::Mlp { n, hidden: int("model.hidden")? },
            _ => return Err(bad("unknown model.arch")),
        };
        let mode = match get("model.mode")?.as_str() {
            Some("tangent") => Mode::Tangent,
            Some("direct") => Mode::Direct,
            _ => return Err(bad("unknown model.mode")),
        };
        let use_bias = get("model.bias")?.as_bool().ok_or_else(|| bad("model.bias is not a boolean"))?;
        let dt = get("train.dt")?.as_float().ok_or_else(|| bad("train.dt is not a number"))?;
        let params = (0..int("model.params")?)
            .map(|k| {
                let a = ArrayFile::read(&dir.join(param_file(k)))?;
                Tensor::new(a.shape, a.data)
            })
            .collect::<Result<Vec<_>>>()?;
        let meta = FlatConfig(
            m.0.iter().filter_map(|(k, v)| k.strip_prefix("meta.").map(|s| (s.to_string(), v.clone()))).collect(),
        );
        Ok(Self { net: TangentNetwork::from_params(arch, mode, use_bias, params)?, dt, meta })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InitSpec;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let net = TangentNetwork::init(InitSpec::default(), Arch::Mlp { n: 4, hidden: 3 }, Mode::Tangent, true).unwrap();
        let mut meta = FlatConfig::default();
        meta.0.insert("problem".into(), Value::String("transport".into()));
        let ck = Checkpoint { net, dt: 1e-3, meta };
        ck.save(dir.path()).unwrap();
        assert_eq!(Checkpoint::load(dir.path()).unwrap(), ck);
    }
}

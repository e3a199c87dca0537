//! Flat `key = value` configuration with dotted section names.
//!
//! Files are parsed as TOML, flattened to dotted keys and mapped onto
//! [`ExperimentConfig`]. Serialization writes one sorted `key = value` line
//! per entry, so parse-then-serialize is idempotent.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use toml::Value;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlatConfig(pub BTreeMap<String, Value>);

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

impl FlatConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let table: toml::Table =
            toml::from_str(text).map_err(|e| Error::Format { path: origin.to_path_buf(), msg: e.to_string() })?;
        let mut map = BTreeMap::new();
        flatten("", &table, &mut map);
        Ok(Self(map))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn serialize(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Applies `key=value`; the value is read as a TOML literal, falling back
    /// to a bare string.
    pub fn set_str(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(assignment.to_string(), "override must look like key=value"))?;
        let (k, v) = (k.trim(), v.trim());
        let value = toml::from_str::<toml::Table>(&format!("x = {v}"))
            .ok()
            .and_then(|mut t| t.remove("x"))
            .unwrap_or_else(|| Value::String(v.to_string()));
        self.0.insert(k.to_string(), value);
        Ok(())
    }
}

trait FromValue: Sized {
    fn from_value(key: &str, v: &Value) -> Result<Self>;
}

impl FromValue for f64 {
    fn from_value(key: &str, v: &Value) -> Result<Self> {
        match v {
            Value::Float(f) => Ok(*f),
            Value::Integer(i) => Ok(*i as f64),
            _ => Err(Error::config(key, format!("expected a number, got {v}"))),
        }
    }
}

impl FromValue for usize {
    fn from_value(key: &str, v: &Value) -> Result<Self> {
        match v {
            Value::Integer(i) if *i >= 0 => Ok(*i as usize),
            _ => Err(Error::config(key, format!("expected a non-negative integer, got {v}"))),
        }
    }
}

impl FromValue for u64 {
    fn from_value(key: &str, v: &Value) -> Result<Self> {
        usize::from_value(key, v).map(|u| u as u64)
    }
}

impl FromValue for bool {
    fn from_value(key: &str, v: &Value) -> Result<Self> {
        v.as_bool().ok_or_else(|| Error::config(key, format!("expected true or false, got {v}")))
    }
}

impl FromValue for String {
    fn from_value(key: &str, v: &Value) -> Result<Self> {
        v.as_str().map(str::to_string).ok_or_else(|| Error::config(key, format!("expected a string, got {v}")))
    }
}

trait ToValue {
    fn to_value(&self) -> Value;
}

impl ToValue for f64 {
    fn to_value(&self) -> Value {
        Value::Float(*self)
    }
}

impl ToValue for usize {
    fn to_value(&self) -> Value {
        Value::Integer(*self as i64)
    }
}

impl ToValue for u64 {
    fn to_value(&self) -> Value {
        Value::Integer(*self as i64)
    }
}

impl ToValue for bool {
    fn to_value(&self) -> Value {
        Value::Boolean(*self)
    }
}

impl ToValue for String {
    fn to_value(&self) -> Value {
        Value::String(self.clone())
    }
}

macro_rules! schema {
    ($( $key:literal => $field:ident : $ty:ty = $default:expr ),* $(,)?) => {
        /// Every knob of an experiment. See [`ExperimentConfig::KEYS`].
        #[derive(Clone, Debug, PartialEq)]
        pub struct ExperimentConfig {
            $( pub $field: $ty, )*
        }

        impl Default for ExperimentConfig {
            fn default() -> Self {
                Self { $( $field: $default, )* }
            }
        }

        impl ExperimentConfig {
            pub const KEYS: &'static [&'static str] = &[$($key),*];

            fn set(&mut self, key: &str, v: &Value) -> Result<()> {
                match key {
                    $( $key => self.$field = <$ty as FromValue>::from_value(key, v)?, )*
                    _ => return Err(Error::config(key, "unknown configuration key")),
                }
                Ok(())
            }

            pub fn to_flat(&self) -> FlatConfig {
                FlatConfig([$( ($key.to_string(), ToValue::to_value(&self.$field)) ),*].into_iter().collect())
            }
        }
    };
}

schema! {
    "problem" => problem: String = "transport".into(),
    "out_dir" => out_dir: String = "out".into(),
    "seed.data" => data_seed: u64 = 1,
    "seed.init" => init_seed: u64 = 2,
    "seed.noise" => noise_seed: u64 = 3,
    "seed.shuffle" => shuffle_seed: u64 = 4,
    "transport.c" => transport_c: f64 = 1.0,
    "burgers.nu" => burgers_nu: f64 = 0.01,
    "burgers.state" => burgers_state: String = "u".into(),
    "ns.nu" => ns_nu: f64 = 1e-3,
    "data.fine_n" => fine_n: usize = 400,
    "data.fine_steps" => fine_steps: usize = 200,
    "data.t_final" => t_final: f64 = 0.1,
    "data.test_fine_steps" => test_fine_steps: usize = 400,
    "data.space_stride" => space_stride: usize = 4,
    "data.time_stride" => time_stride: usize = 2,
    "data.train_samples" => train_samples: usize = 10,
    "data.test_samples" => test_samples: usize = 2,
    "model.arch" => arch: String = "linear".into(),
    "model.hidden" => hidden: usize = 256,
    "model.bias" => bias: bool = true,
    "model.mode" => mode: String = "tangent".into(),
    "init.std" => init_std: f64 = 0.1,
    "init.bias" => init_bias: f64 = 0.0,
    "train.alpha" => alpha: f64 = 0.0,
    "train.delta" => delta: f64 = 0.0,
    "train.s" => s: usize = 0,
    "train.r" => r: usize = 1,
    "train.lr" => lr: f64 = 1e-3,
    "train.batch_size" => batch_size: usize = 40,
    "train.epochs" => epochs: usize = 10,
    "train.n_ckpt" => n_ckpt: usize = 100,
    "train.ckpt_every" => ckpt_every: usize = 1,
    "train.validation_samples" => validation_samples: usize = 0,
    "train.chunk_size" => chunk_size: usize = 16,
    "train.truth_gradient" => truth_gradient: bool = true,
    "predict.scheme" => predict_scheme: String = "fe".into(),
    "predict.steps" => predict_steps: usize = 100,
    "predict.dt_factor" => predict_dt_factor: f64 = 1.0,
    "diagnose.kind" => diagnose_kind: String = "bound".into(),
    "diagnose.samples" => diagnose_samples: usize = 100_000,
    "diagnose.steps" => diagnose_steps: usize = 50,
    "diagnose.tests" => diagnose_tests: usize = 5,
    "diagnose.c_policy" => diagnose_c_policy: String = "zero".into(),
    "diagnose.delta" => diagnose_delta: f64 = 0.02,
}

impl ExperimentConfig {
    pub fn from_flat(flat: &FlatConfig) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in &flat.0 {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    /// Builds a config from an optional file and `key=value` overrides.
    /// `env_out_dir` replaces the built-in output directory when the file
    /// and overrides leave it unset.
    pub fn load(path: Option<&Path>, overrides: &[String], env_out_dir: Option<String>) -> Result<Self> {
        let mut flat = match path {
            Some(p) => FlatConfig::read(p)?,
            None => FlatConfig::default(),
        };
        for o in overrides {
            flat.set_str(o)?;
        }
        if let Some(dir) = env_out_dir {
            flat.0.entry("out_dir".into()).or_insert(Value::String(dir));
        }
        let cfg = Self::from_flat(&flat)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let one_of = |key: &str, v: &str, allowed: &[&str]| {
            if allowed.contains(&v) {
                Ok(())
            } else {
                Err(Error::config(key, format!("'{v}' is not one of {allowed:?}")))
            }
        };
        one_of("problem", &self.problem, &["transport", "burgers", "navier_stokes"])?;
        one_of("burgers.state", &self.burgers_state, &["u", "uv"])?;
        one_of("model.arch", &self.arch, &["linear", "mlp"])?;
        one_of("model.mode", &self.mode, &["tangent", "direct"])?;
        one_of("predict.scheme", &self.predict_scheme, &["fe", "ab2", "rk2", "be"])?;
        one_of("diagnose.kind", &self.diagnose_kind, &["lemma", "randomization", "bound"])?;
        one_of("diagnose.c_policy", &self.diagnose_c_policy, &["zero", "measured_remainder"])?;
        if self.space_stride == 0 || self.fine_n % self.space_stride != 0 {
            return Err(Error::config("data.space_stride", format!("{} does not divide data.fine_n = {}", self.space_stride, self.fine_n)));
        }
        for (key, steps) in [("data.fine_steps", self.fine_steps), ("data.test_fine_steps", self.test_fine_steps)] {
            if self.time_stride == 0 || steps % self.time_stride != 0 {
                return Err(Error::config("data.time_stride", format!("{} does not divide {key} = {steps}", self.time_stride)));
            }
        }
        if self.fine_steps == 0 || self.test_fine_steps == 0 {
            return Err(Error::config("data.fine_steps", "horizons must be at least one step"));
        }
        if !(self.t_final > 0.0) {
            return Err(Error::config("data.t_final", "must be positive"));
        }
        if self.r == 0 {
            return Err(Error::config("train.r", "must be at least 1"));
        }
        if self.hidden == 0 {
            return Err(Error::config("model.hidden", "must be at least 1"));
        }
        Ok(())
    }

    /// Fine-grid time step shared by training and test solves.
    pub fn fine_dt(&self) -> f64 {
        self.t_final / self.fine_steps as f64
    }
}

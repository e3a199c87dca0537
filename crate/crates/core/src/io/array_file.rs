//! Binary array files: `"MCT1"`, dtype byte (0 = f64, 1 = f32), rank byte,
//! `rank` little-endian u64 dims, then the row-major little-endian payload.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"MCT1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DType {
    F64,
    F32,
}

impl DType {
    fn code(self) -> u8 {
        match self {
            DType::F64 => 0,
            DType::F32 => 1,
        }
    }

    fn size(self) -> usize {
        match self {
            DType::F64 => 8,
            DType::F32 => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArrayFile {
    pub dtype: DType,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl ArrayFile {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        Self::with_dtype(DType::F64, shape, data)
    }

    pub fn with_dtype(dtype: DType, shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.len() > u8::MAX as usize {
            return Err(Error::dim("array_file", "rank exceeds 255"));
        }
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::dim("array_file", format!("shape {shape:?} with {} values", data.len())));
        }
        Ok(Self { dtype, shape, data })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(6 + 8 * self.shape.len() + self.dtype.size() * self.data.len());
        out.extend_from_slice(MAGIC);
        out.push(self.dtype.code());
        out.push(self.shape.len() as u8);
        for &d in &self.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        match self.dtype {
            DType::F64 => self.data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
            DType::F32 => self.data.iter().for_each(|&v| out.extend_from_slice(&(v as f32).to_le_bytes())),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let bad = |msg: String| Error::Format { path: origin.to_path_buf(), msg };
        if bytes.len() < 6 || &bytes[..4] != MAGIC {
            return Err(bad("missing MCT1 header".into()));
        }
        let dtype = match bytes[4] {
            0 => DType::F64,
            1 => DType::F32,
            c => return Err(bad(format!("unknown dtype code {c}"))),
        };
        let rank = bytes[5] as usize;
        let body = 6 + 8 * rank;
        if bytes.len() < body {
            return Err(bad("truncated dimensions".into()));
        }
        let shape: Vec<usize> = bytes[6..body]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")) as usize)
            .collect();
        let count = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| bad("dimension overflow".into()))?;
        let payload = &bytes[body..];
        if payload.len() != count * dtype.size() {
            return Err(bad(format!("payload has {} bytes, expected {}", payload.len(), count * dtype.size())));
        }
        let data = match dtype {
            DType::F64 => payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect(),
            DType::F32 => payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64).collect(),
        };
        Ok(Self { dtype, shape, data })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    /// Rows of a rank-2 array.
    pub fn rows(&self) -> Result<Vec<Vec<f64>>> {
        match self.shape.as_slice() {
            [_, cols] if *cols > 0 => Ok(self.data.chunks(*cols).map(|c| c.to_vec()).collect()),
            [0, _] => Ok(vec![]),
            _ => Err(Error::dim("array_file", format!("expected a rank-2 array, got shape {:?}", self.shape))),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::dim("array_file", "ragged rows"));
        }
        Self::new(vec![rows.len(), cols], rows.concat())
    }
}

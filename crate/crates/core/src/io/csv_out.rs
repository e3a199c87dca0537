//! CSV writers: header row always present, `.` decimals, `\n` endings.

use std::path::Path;

use crate::error::{Error, Result};

/// Shortest round-trip formatting; empty for missing values.
pub fn fmt_f64(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:?}"),
        None => String::new(),
    }
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| Error::Format { path: path.to_path_buf(), msg: e.to_string() })?;
    let fail = |e: csv::Error| Error::Format { path: path.to_path_buf(), msg: e.to_string() };
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(r).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Appends rows to an existing CSV, creating it with `header` first if needed.
pub struct CsvAppender {
    writer: csv::Writer<std::fs::File>,
    path: std::path::PathBuf,
}

impl CsvAppender {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file);
        writer.write_record(header).map_err(|e| Error::Format { path: path.to_path_buf(), msg: e.to_string() })?;
        Ok(Self { writer, path: path.to_path_buf() })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        self.writer.write_record(fields).map_err(|e| Error::Format { path: self.path.clone(), msg: e.to_string() })?;
        self.writer.flush().map_err(|e| Error::io(&self.path, e))
    }
}

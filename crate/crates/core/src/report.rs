//! Serializable report types and deterministic CSV/JSON writers. Floats are
//! printed with 17 significant digits so reruns are byte-identical.

use crate::error::Result;
use std::io::Write;
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

/// Format a float with 17 significant digits (round-trip exact).
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub struct CsvWriter {
    out: Vec<u8>,
    columns: usize,
}

impl CsvWriter {
    pub fn new(header: &[&str]) -> Self {
        let mut out = Vec::new();
        writeln!(out, "{}", header.join(",")).unwrap();
        Self {
            out,
            columns: header.len(),
        }
    }

    pub fn row(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.columns, "csv row width mismatch");
        let cells: Vec<String> = values.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(self.out, "{}", cells.join(",")).unwrap();
    }

    pub fn row_mixed(&mut self, values: &[String]) {
        assert_eq!(values.len(), self.columns, "csv row width mismatch");
        writeln!(self.out, "{}", values.join(",")).unwrap();
    }

    pub fn bytes(&self) -> &[u8] {
        &self.out
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        std::fs::write(path, &self.out)?;
        Ok(())
    }
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_is_deterministic() {
        let mut a = CsvWriter::new(&["x", "y"]);
        a.row(&[1.0 / 3.0, 2.0e-17]);
        let mut b = CsvWriter::new(&["x", "y"]);
        b.row(&[1.0 / 3.0, 2.0e-17]);
        assert_eq!(a.bytes(), b.bytes());
        let text = String::from_utf8(a.bytes().to_vec()).unwrap();
        assert!(text.contains("3.3333333333333331e-1"));
    }
}

//! Artifact writing: fixed-precision CSV and pretty JSON.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        // Rust spells these "NaN", "inf", "-inf"; keep them as is.
        format!("{v}")
    }
}

/// In-memory CSV table with a header row.
#[derive(Debug, Clone)]
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text, columns: header.len() }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        assert_eq!(cells.len(), self.columns, "row width must match the header");
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            match *c {
                Cell::Real(v) => self.text.push_str(&fmt_real(v)),
                Cell::Int(v) => {
                    let _ = write!(self.text, "{v}");
                }
                Cell::Bool(b) => self.text.push_str(if b { "true" } else { "false" }),
                Cell::Empty => {}
            }
        }
        self.text.push('\n');
    }

    pub fn reals(&mut self, values: &[f64]) {
        let cells: Vec<Cell> = values.iter().map(|&v| Cell::Real(v)).collect();
        self.row(&cells);
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Cell {
    Real(f64),
    Int(u64),
    Bool(bool),
    Empty,
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Real)
    }
}

/// An output directory that remembers what was written into it.
#[derive(Debug)]
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> io::Result<()> {
        fs::write(self.root.join(name), text)?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_csv(&mut self, name: &str, csv: &Csv) -> io::Result<()> {
        self.write_text(name, csv.as_str())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    /// Files written so far, in order.
    pub fn written(&self) -> &[String] {
        &self.written
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip_exactly() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.0] {
            let s = fmt_real(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(fmt_real(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn csv_layout() {
        let mut c = Csv::new(&["t", "k", "flag", "r"]);
        c.row(&[Cell::Real(0.5), Cell::Int(3), Cell::Bool(true), Cell::from(None)]);
        assert_eq!(c.as_str(), "t,k,flag,r\n5.0000000000000000e-1,3,true,\n");
    }
}

//! CSV and JSON artifact writers with fixed float formatting.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

/// 17 significant digits, enough to round-trip any double.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// A table of named real columns sharing one row count.
#[derive(Debug, Default, Clone)]
pub struct Table {
    columns: Vec<(String, Vec<f64>)>,
    text: Vec<(String, Vec<String>)>,
}

impl Table {
    pub fn push(&mut self, name: impl Into<String>, values: Vec<f64>) {
        self.columns.push((name.into(), values));
    }

    /// A free-text column, quoted and appended after the numeric ones.
    pub fn push_text(&mut self, name: impl Into<String>, values: Vec<String>) {
        self.text.push((name.into(), values));
    }

    fn rows(&self) -> usize {
        self.columns
            .iter()
            .map(|(_, v)| v.len())
            .chain(self.text.iter().map(|(_, v)| v.len()))
            .max()
            .unwrap_or(0)
    }

    pub fn to_csv(&self) -> String {
        let mut header: Vec<&str> = self.columns.iter().map(|(n, _)| n.as_str()).collect();
        header.extend(self.text.iter().map(|(n, _)| n.as_str()));
        let mut out = header.join(",");
        out.push('\n');
        for r in 0..self.rows() {
            let mut cells: Vec<String> = self
                .columns
                .iter()
                .map(|(_, v)| v.get(r).map_or_else(String::new, |x| fmt_float(*x)))
                .collect();
            cells.extend(self.text.iter().map(|(_, v)| quote(v.get(r).map_or("", String::as_str))));
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn quote(s: &str) -> String {
    if s.is_empty() {
        String::new()
    } else {
        format!("\"{}\"", s.replace('"', "\"\""))
    }
}

/// Writes artifacts into one directory and remembers what was written.
#[derive(Debug)]
pub struct ArtifactDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl ArtifactDir {
    pub fn create(root: impl AsRef<Path>) -> std::io::Result<Self> {
        fs::create_dir_all(root.as_ref())?;
        Ok(Self {
            root: root.as_ref().to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write_text(&mut self, name: &str, contents: &str) -> std::io::Result<()> {
        let path = self.root.join(name);
        fs::write(&path, contents)?;
        self.written.push(path);
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format() {
        assert_eq!(fmt_float(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_float(-0.1), "-1.0000000000000001e-1");
        assert_eq!(fmt_float(f64::NAN), "NaN");
        let x = 0.1 + 0.2;
        assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::default();
        t.push("t", vec![0.0, 1.0]);
        t.push("trace", vec![1.0, 0.5]);
        t.push_text("error", vec![String::new(), "bad, \"x\"".into()]);
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,trace,error");
        assert_eq!(lines[1], "0.0000000000000000e0,1.0000000000000000e0,");
        assert_eq!(lines[2], "1.0000000000000000e0,5.0000000000000000e-1,\"bad, \"\"x\"\"\"");
    }

    #[test]
    fn artifact_dir_tracks_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = ArtifactDir::create(dir.path().join("nested")).unwrap();
        out.write_json("a.json", &[1, 2]).unwrap();
        out.write_text("b.csv", "x\n").unwrap();
        assert_eq!(out.written().len(), 2);
        let text = fs::read_to_string(dir.path().join("nested/a.json")).unwrap();
        assert!(text.ends_with('\n'));
    }
}

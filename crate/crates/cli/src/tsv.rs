//! Tab-separated output tables.

use std::fmt::Write as _;
use std::path::Path;

use boostkit::BoostError;

/// Shortest representation that parses back to the same value.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Default)]
pub struct Table {
    text: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut t = Table::default();
        t.row(header.iter().map(|s| s.to_string()));
        t
    }

    pub fn row(&mut self, cells: impl IntoIterator<Item = String>) {
        let cells: Vec<String> = cells.into_iter().collect();
        let _ = writeln!(self.text, "{}", cells.join("\t"));
    }

    pub fn write(self, path: &Path) -> Result<(), BoostError> {
        write_file(path, &self.text)
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<(), BoostError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| BoostError::Io { path: dir.display().to_string(), source })?;
    }
    std::fs::write(path, text).map_err(|source| BoostError::Io { path: path.display().to_string(), source })
}

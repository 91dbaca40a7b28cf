use std::io::Write;
use std::path::Path;

use crate::CliError;

/// Six significant digits in scientific notation, independent of locale.
pub fn sci(x: f64) -> String {
    format!("{x:.5e}")
}

pub fn opt_sci(x: Option<f64>) -> String {
    x.map(sci).unwrap_or_default()
}

#[derive(Debug, Clone)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    /// Writes to `path` through a temporary sibling and a rename, or to
    /// stdout when no path is given.
    pub fn write(&self, path: Option<&Path>) -> Result<(), CliError> {
        match path {
            Some(p) => write_atomic(p, &self.render()),
            None => std::io::stdout()
                .write_all(self.render().as_bytes())
                .map_err(|e| CliError::Validation(format!("cannot write to stdout: {e}"))),
        }
    }
}

pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Validation(format!("cannot write {}: {e}", path.display()));
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io)?;
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Validation(format!("output path {} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = std::fs::File::create(&tmp)
        .and_then(|mut f| f.write_all(contents.as_bytes()).and_then(|_| f.sync_all()))
        .and_then(|_| std::fs::rename(&tmp, path));
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scientific_format() {
        assert_eq!(sci(1.0), "1.00000e0");
        assert_eq!(sci(-2.5e-13), "-2.50000e-13");
        assert_eq!(opt_sci(None), "");
    }

    #[test]
    fn render_and_atomic_write() {
        let mut t = Table::new(&["N", "error_max"]);
        t.push(vec!["20".into(), sci(0.5)]);
        assert_eq!(t.render(), "N,error_max\n20,5.00000e-1\n");
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.csv");
        t.write(Some(&p)).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), t.render());
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Fixed float format for every CSV cell.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Directory that receives one experiment's files.
#[derive(Debug, Clone)]
pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(CliError::io(root))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_csv<I, R>(&self, name: &str, header: &[&str], rows: I) -> CliResult<PathBuf>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let path = self.path(name);
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)
            .map_err(|e| csv_err(&path, e))?;
        w.write_record(header).map_err(|e| csv_err(&path, e))?;
        for row in rows {
            w.write_record(row).map_err(|e| csv_err(&path, e))?;
        }
        w.flush().map_err(CliError::io(&path))?;
        Ok(path)
    }

    pub fn write_json<S: Serialize>(&self, name: &str, value: &S) -> CliResult<PathBuf> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Runtime(format!("cannot serialise {name}: {e}")))?;
        text.push('\n');
        let mut f = fs::File::create(&path).map_err(CliError::io(&path))?;
        f.write_all(text.as_bytes()).map_err(CliError::io(&path))?;
        Ok(path)
    }
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    let source = match e.into_kind() {
        csv::ErrorKind::Io(io) => io,
        other => std::io::Error::other(format!("{other:?}")),
    };
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

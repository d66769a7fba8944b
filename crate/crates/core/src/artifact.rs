//! Helpers for CSV artifacts. Every emitted file starts with a comment line
//! naming the toolkit version and the hash of the producing configuration.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Result, TrajkitError};

pub fn header_line(config_hash: &str) -> String {
    format!("# {} config={config_hash}", crate::toolkit_id())
}

pub fn csv_writer(path: &Path, config_hash: &str) -> Result<csv::Writer<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| TrajkitError::io(dir, e))?;
    }
    let mut f = File::create(path).map_err(|e| TrajkitError::io(path, e))?;
    writeln!(f, "{}", header_line(config_hash)).map_err(|e| TrajkitError::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

pub fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let f = File::open(path).map_err(|e| TrajkitError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(f))
}

pub fn csv_error(path: &Path, e: csv::Error) -> TrajkitError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    TrajkitError::Parse {
        path: path.to_path_buf(),
        line,
        msg: e.to_string(),
    }
}

/// Reads the config hash from an artifact's first line, if present.
pub fn read_config_hash(path: &Path) -> Result<Option<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| TrajkitError::io(path, e))?;
    Ok(text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# "))
        .and_then(|l| l.split_once(" config="))
        .map(|(_, h)| h.trim().to_string()))
}

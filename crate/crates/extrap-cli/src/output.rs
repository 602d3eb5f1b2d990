//! Error classification and atomic output writing.

use std::path::{Path, PathBuf};

/// Usage errors exit with status 2 and a plain message; domain errors
/// exit with status 1 and a structured JSON object on standard error.
pub enum CliError {
    Usage(String),
    Domain(Box<dyn std::error::Error>),
}

impl From<extrap::Error> for CliError {
    fn from(e: extrap::Error) -> Self {
        CliError::Domain(Box::new(e))
    }
}

impl From<extrap_sim::Error> for CliError {
    fn from(e: extrap_sim::Error) -> Self {
        CliError::Domain(Box::new(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Domain(Box::new(e))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Domain(Box::new(e))
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Referenced input files must exist at invocation; a missing path is a
/// usage error naming the file.
pub fn require_file(path: &Path) -> CliResult<()> {
    if !path.is_file() {
        return Err(CliError::Usage(format!(
            "input file does not exist: {}",
            path.display()
        )));
    }
    Ok(())
}

/// Write to `--out` atomically (temp file in the target directory, then
/// rename), or to standard output when no path was given. Interrupted
/// runs can never leave a truncated file at the target path.
pub fn emit(out: &Option<PathBuf>, content: &str) -> CliResult<()> {
    match out {
        None => {
            print!("{content}");
            if !content.ends_with('\n') {
                println!();
            }
            Ok(())
        }
        Some(path) => {
            let dir = path
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .unwrap_or_else(|| Path::new("."));
            std::fs::create_dir_all(dir)?;
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            use std::io::Write;
            tmp.write_all(content.as_bytes())?;
            tmp.flush()?;
            tmp.persist(path)
                .map_err(|e| CliError::Domain(Box::new(e.error)))?;
            Ok(())
        }
    }
}

pub fn to_pretty_json<T: serde::Serialize>(value: &T) -> CliResult<String> {
    Ok(format!("{}\n", serde_json::to_string_pretty(value)?))
}

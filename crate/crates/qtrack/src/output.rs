//! Output locations and atomic writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Where a command puts its files.
///
/// An `-o` path with an extension names the primary output and siblings go
/// next to it under the same stem. A path without one is a directory that
/// receives files under their default names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutTarget {
    pub primary: PathBuf,
}

impl OutTarget {
    pub fn resolve(out: Option<&Path>, default_name: &str) -> Self {
        let primary = match out {
            Some(p) if p.extension().is_some() => p.to_path_buf(),
            Some(dir) => dir.join(default_name),
            None => PathBuf::from(default_name),
        };
        Self { primary }
    }

    fn dir(&self) -> &Path {
        self.primary.parent().unwrap_or(Path::new(""))
    }

    pub fn stem(&self) -> String {
        self.primary
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    }

    /// `<stem><suffix>` beside the primary file.
    pub fn sibling(&self, suffix: &str) -> PathBuf {
        self.dir().join(format!("{}{suffix}", self.stem()))
    }

    /// The resolved configuration file, `<stem>.cfg`.
    pub fn config_path(&self) -> PathBuf {
        self.sibling(".cfg")
    }
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| CliError::io(path, e))?;
    tmp.as_file()
        .sync_all()
        .map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// Reads an input file. A missing or unreadable input is a usage error.
pub fn read_input(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

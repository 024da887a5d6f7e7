//! Filesystem helpers shared by trace and report writers.

use crate::error::{Error, Result};
use std::path::Path;

/// Write a file atomically: temp file in the same directory, then
/// rename over the target.
pub fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    if !dir.as_os_str().is_empty() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.to_string_lossy(), e))?;
    }
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default()
    ));
    std::fs::write(&tmp, contents).map_err(|e| Error::io(tmp.to_string_lossy(), e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path.to_string_lossy(), e))
}

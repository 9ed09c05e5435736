// SPDX-License-Identifier: Apache-2.0

//! Atomic file output.

use std::io::Write;
use std::path::Path;

use crate::corpus::CorpusError;

/// Writes `data` to a temporary file next to `path`, then renames it over
/// `path`. Readers never observe a partial file.
pub fn write_atomic(path: &Path, data: &[u8]) -> Result<(), CorpusError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CorpusError::io(dir, e))?;
    tmp.write_all(data).map_err(|e| CorpusError::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| CorpusError::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| CorpusError::io(path, e.error))?;
    Ok(())
}

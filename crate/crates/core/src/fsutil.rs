//! Small filesystem helpers shared by exporters and the CLI.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Write a file atomically: stream into a sibling temp file, then rename.
///
/// The rename is atomic on POSIX filesystems, so readers never observe a
/// partially written artifact. The closure receives a buffered writer.
pub fn atomic_write<F>(path: impl AsRef<Path>, write: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let path = path.as_ref();
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a writable file path: {}", path.display())))?;
    let tmp_name = format!(
        ".{}.{}.tmp",
        file_name.to_string_lossy(),
        std::process::id()
    );
    let tmp_path = match dir {
        Some(d) => d.join(&tmp_name),
        None => tmp_name.clone().into(),
    };

    let result = (|| {
        let file = File::create(&tmp_path).map_err(|e| Error::io(&tmp_path, e))?;
        let mut writer = BufWriter::new(file);
        write(&mut writer)?;
        writer.flush().map_err(|e| Error::io(&tmp_path, e))?;
        writer
            .into_inner()
            .map_err(|e| Error::io(&tmp_path, e.into_error()))?
            .sync_all()
            .map_err(|e| Error::io(&tmp_path, e))?;
        std::fs::rename(&tmp_path, path).map_err(|e| Error::io(path, e))
    })();

    if result.is_err() {
        let _ = std::fs::remove_file(&tmp_path);
    }
    result
}

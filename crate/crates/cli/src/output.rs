//! Output files: atomic writes and commented CSV grids.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, Result};

/// Coordinate convention stamped on every emitted grid.
pub const GRID_HEADER: &str = "# coordinates: cell centres, degrees; x = longitude, y = latitude (planar, unprojected)";

/// Write `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp: PathBuf = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| CliError::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Schema(e.to_string())
}

/// CSV text with leading `#` comment lines.
pub fn csv_bytes<T: Serialize>(comments: &[&str], rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for c in comments {
        buf.extend_from_slice(c.as_bytes());
        buf.push(b'\n');
    }
    let mut w = csv::Writer::from_writer(buf);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::Schema(e.to_string()))
}

pub fn write_csv<T: Serialize>(path: &Path, comments: &[&str], rows: impl IntoIterator<Item = T>) -> Result<()> {
    write_atomic(path, &csv_bytes(comments, rows)?)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_vec_pretty(value).map_err(|e| CliError::Schema(e.to_string()))?;
    s.push(b'\n');
    write_atomic(path, &s)
}

/// Read a CSV written by [`write_csv`], skipping comment lines.
pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(f)
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(csv_err)
}

/// Leading `#` comment lines of a text file.
pub fn read_comments(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(text.lines().take_while(|l| l.starts_with('#')).map(str::to_string).collect())
}

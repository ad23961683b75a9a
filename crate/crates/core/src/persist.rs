//! File helpers shared by the index writers and loaders.

use std::fs;
use std::io::ErrorKind;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::IndexError;
use crate::util;

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IndexError + '_ {
    move |source| IndexError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), IndexError> {
    if let Some(parent) = path.parent() {
        util::ensure_dir(parent).map_err(io_err(parent))?;
    }
    util::write_atomic(path, bytes).map_err(io_err(path))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IndexError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("index metadata serializes");
    bytes.push(b'\n');
    write_file(path, &bytes)
}

/// Reads a file that must exist; absence means the index is incomplete.
pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>, IndexError> {
    fs::read(path).map_err(|e| {
        if e.kind() == ErrorKind::NotFound {
            IndexError::corrupt(path, "missing file")
        } else {
            IndexError::Io {
                path: path.to_path_buf(),
                source: e,
            }
        }
    })
}

pub(crate) fn read_verified(path: &Path, sha256: &str) -> Result<Vec<u8>, IndexError> {
    let bytes = read_file(path)?;
    let actual = util::checksum(&bytes);
    if actual != sha256 {
        return Err(IndexError::corrupt(
            path,
            format!("checksum mismatch (expected {sha256}, found {actual})"),
        ));
    }
    Ok(bytes)
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IndexError> {
    let bytes = read_file(path)?;
    serde_json::from_slice(&bytes).map_err(|e| IndexError::corrupt(path, e.to_string()))
}

pub(crate) fn utf8(path: &Path, bytes: Vec<u8>) -> Result<String, IndexError> {
    String::from_utf8(bytes).map_err(|e| IndexError::corrupt(path, e.to_string()))
}

pub mod combine;
pub mod meta;
pub mod simulate;
pub mod slope;
pub mod synth;
pub mod table;

use std::path::{Path, PathBuf};

/// Directory that receives the manifest of a run writing to `file`.
pub fn parent_dir(file: &Path) -> PathBuf {
    match file.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

pub fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

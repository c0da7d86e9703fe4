use std::path::{Path, PathBuf};

use walkdir::WalkDir;

use super::{load_wav, prepare, write_wav, PrepConfig};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PrepReport {
    pub written: Vec<PathBuf>,
    pub skipped: Vec<(PathBuf, String)>,
}

fn is_wav(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

/// Standardizes every `.wav` under `input` into the same relative path under
/// `output`. Unreadable files are logged and skipped; failing every file is
/// an error, as is finding none.
pub fn prep_tree(input: &Path, output: &Path, config: &PrepConfig) -> Result<PrepReport> {
    let mut files: Vec<PathBuf> = Vec::new();
    for entry in WalkDir::new(input).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(input).to_path_buf();
            Error::io(path, e.into())
        })?;
        if entry.file_type().is_file() && is_wav(entry.path()) {
            files.push(entry.into_path());
        }
    }
    if files.is_empty() {
        return Err(Error::InvalidArgument(format!("no input: no .wav files under {}", input.display())));
    }
    let mut report = PrepReport::default();
    for src in files {
        let rel = src.strip_prefix(input).expect("walked from input");
        let dst = output.join(rel);
        match load_wav(&src).and_then(|c| prepare(&c, config)).and_then(|c| write_wav(&dst, &c)) {
            Ok(()) => {
                log::info!("{} -> {}", src.display(), dst.display());
                report.written.push(dst);
            }
            Err(e) => {
                log::warn!("skipping {}: {e}", src.display());
                report.skipped.push((src, e.to_string()));
            }
        }
    }
    if report.written.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "all {} input files failed to process",
            report.skipped.len()
        )));
    }
    Ok(report)
}

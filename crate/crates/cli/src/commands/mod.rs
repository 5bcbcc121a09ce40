pub mod benchmark;
pub mod correlate;
pub mod fingerprint;
pub mod fit;
pub mod residue;
pub mod simulate;

use std::path::{Path, PathBuf};

use dsnprint::frame_io::{load_frame, Frame};

use crate::error::{CliError, CliResult, Context};

pub(crate) fn load_frames(paths: &[PathBuf]) -> CliResult<Vec<Frame>> {
    paths
        .iter()
        .map(|p| load_frame(p).context(|| format!("loading {}", p.display())))
        .collect()
}

pub(crate) fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// `dir/<stem of input><ext>`.
pub(crate) fn output_for(dir: &Path, input: &Path, ext: &str) -> CliResult<PathBuf> {
    let stem = input
        .file_stem()
        .ok_or_else(|| CliError::Usage(format!("{} has no file name", input.display())))?;
    let mut name = stem.to_owned();
    name.push(ext);
    Ok(dir.join(name))
}

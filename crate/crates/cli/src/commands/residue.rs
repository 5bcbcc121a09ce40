use rayon::prelude::*;

use dsnprint::frame_io::{format_meta, load_frame, save_pattern, ReferencePattern};

use super::{create_dir, output_for};
use crate::error::{CliError, CliResult, Context};
use crate::{Extractor, Outcome, ResidueArgs};

/// Each residue is stored as a single-frame pattern with an empty mask; the
/// source frame's metadata is copied to a `.res.meta` sidecar.
pub fn run(a: &ResidueArgs) -> CliResult<Outcome> {
    create_dir(&a.out)?;
    let targets = a
        .inputs
        .iter()
        .map(|p| output_for(&a.out, p, ".res"))
        .collect::<CliResult<Vec<_>>>()?;
    let mut seen = std::collections::BTreeSet::new();
    if let Some(dup) = targets.iter().find(|t| !seen.insert(*t)) {
        return Err(CliError::Usage(format!(
            "two inputs map to {}",
            dup.display()
        )));
    }
    a.inputs
        .par_iter()
        .zip(&targets)
        .map(|(input, target)| {
            let ctx = || format!("{}", input.display());
            let frame = load_frame(input).context(ctx)?;
            let residue = Extractor::for_frame(&a.filter, &frame)?
                .residue(&frame)
                .context(ctx)?;
            let (w, h) = residue.dims();
            let pattern = ReferencePattern::new(
                w,
                h,
                residue.into_data(),
                vec![false; w * h],
                1,
                frame.meta.temperature_c.unwrap_or(0.0),
            )
            .context(ctx)?;
            save_pattern(&pattern, target).context(|| format!("writing {}", target.display()))?;
            if !frame.meta.is_empty() {
                let sidecar = dsnprint::frame_io::meta_path(target);
                std::fs::write(&sidecar, format_meta(&frame.meta))
                    .map_err(|e| CliError::io(&sidecar, e))?;
            }
            Ok(())
        })
        .collect::<CliResult<()>>()?;
    Ok(Outcome {
        written: targets,
        stdout: String::new(),
    })
}

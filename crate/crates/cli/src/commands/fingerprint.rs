use rayon::prelude::*;

use dsnprint::fingerprint::{saturation_mask, ReferenceAccumulator};
use dsnprint::frame_io::save_pattern;

use super::load_frames;
use crate::error::{CliError, CliResult, Context};
use crate::{Extractor, FingerprintArgs, Outcome};

/// Residues are computed in parallel batches and summed in input order.
const BATCH: usize = 32;

pub fn run(a: &FingerprintArgs) -> CliResult<Outcome> {
    let frames = load_frames(&a.inputs)?;
    let first = &frames[0];
    let temperature = match a.temperature {
        Some(t) => t,
        None => {
            let t = first.meta.temperature_c.ok_or_else(|| {
                CliError::Usage(format!(
                    "{} has no temperature metadata; pass --temperature",
                    a.inputs[0].display()
                ))
            })?;
            if let Some((p, _)) = a
                .inputs
                .iter()
                .zip(&frames)
                .find(|(_, f)| f.meta.temperature_c != Some(t))
            {
                return Err(CliError::data(
                    format!("{}", p.display()),
                    dsnprint::Error::InvalidParam(format!(
                        "temperature differs from {t} °C of {}",
                        a.inputs[0].display()
                    )),
                ));
            }
            t
        }
    };
    for (p, f) in a.inputs.iter().zip(&frames) {
        if f.dims() != first.dims() || f.bit_depth() != first.bit_depth() {
            return Err(CliError::data(
                format!("{} vs {}", a.inputs[0].display(), p.display()),
                dsnprint::Error::DimensionMismatch {
                    left: format!(
                        "{}x{} {}-bit",
                        first.width(),
                        first.height(),
                        first.bit_depth()
                    ),
                    right: format!("{}x{} {}-bit", f.width(), f.height(), f.bit_depth()),
                },
            ));
        }
    }
    if !(a.sat_threshold > 0.0 && a.sat_threshold < 1.0) {
        return Err(CliError::Usage(format!(
            "--sat-threshold must lie in (0, 1), got {}",
            a.sat_threshold
        )));
    }
    let mask = saturation_mask(&frames, a.sat_threshold).context(|| "saturation mask".into())?;
    let extractor = Extractor::for_frame(&a.filter, first)?;
    let mut acc = ReferenceAccumulator::new(first.width(), first.height());
    for (chunk, paths) in frames.chunks(BATCH).zip(a.inputs.chunks(BATCH)) {
        let residues = chunk
            .par_iter()
            .zip(paths)
            .map(|(f, p)| extractor.residue(f).context(|| format!("{}", p.display())))
            .collect::<CliResult<Vec<_>>>()?;
        for r in &residues {
            acc.add(r).context(|| "accumulating residues".into())?;
        }
    }
    let pattern = acc
        .finish(&mask, temperature)
        .context(|| format!("building pattern {}", a.out.display()))?;
    let mut out = Outcome::default();
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        super::create_dir(dir)?;
    }
    save_pattern(&pattern, &a.out).context(|| format!("writing {}", a.out.display()))?;
    out.written.push(a.out.clone());
    out.stdout = format!(
        "{}: {} frames at {temperature} °C, {} masked pixels\n",
        a.out.display(),
        frames.len(),
        pattern.masked_count()
    );
    Ok(out)
}

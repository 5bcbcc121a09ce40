use std::path::{Path, PathBuf};

use rayon::prelude::*;

use dsnprint::correlate::{masked_corr_counted, CorrelationRecord};
use dsnprint::filter::{Plane, ResiduePlane};
use dsnprint::fingerprint::{saturation_mask, SaturationMask};
use dsnprint::frame_io::{
    load_frame, load_pattern, meta_path, parse_meta, FrameMeta, ReferencePattern,
};

use crate::error::{CliError, CliResult, Context};
use crate::{CorrelateArgs, Extractor, Outcome};

pub(crate) const UNKNOWN_CAMERA: &str = "unknown";

struct Query {
    residue: ResiduePlane,
    mask: Option<SaturationMask>,
    meta: FrameMeta,
}

fn is_pgm(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

fn load_query(path: &Path, a: &CorrelateArgs) -> CliResult<Query> {
    let ctx = || format!("{}", path.display());
    if is_pgm(path) {
        let frame = load_frame(path).context(ctx)?;
        let residue = Extractor::for_frame(&a.filter, &frame)?
            .residue(&frame)
            .context(ctx)?;
        let mask = saturation_mask(std::slice::from_ref(&frame), a.sat_threshold)
            .map_err(|e| CliError::Usage(format!("--sat-threshold: {e}")))?;
        return Ok(Query {
            residue,
            mask: Some(mask),
            meta: frame.meta,
        });
    }
    let stored = load_pattern(path).context(ctx)?;
    let sidecar = meta_path(path);
    let meta = if sidecar.exists() {
        let text = std::fs::read_to_string(&sidecar).map_err(|e| CliError::io(&sidecar, e))?;
        parse_meta(&text)
            .context(|| format!("{}", sidecar.display()))?
            .0
    } else {
        FrameMeta::default()
    };
    let (w, h) = stored.dims();
    let mask = stored
        .mask()
        .iter()
        .any(|&m| m)
        .then(|| SaturationMask::from_bits(w, h, stored.mask().to_vec()))
        .transpose()
        .context(ctx)?;
    let residue = Plane::new(w, h, stored.data().to_vec()).context(ctx)?;
    Ok(Query {
        residue,
        mask,
        meta,
    })
}

fn load_patterns(paths: &[PathBuf]) -> CliResult<Vec<ReferencePattern>> {
    paths
        .iter()
        .map(|p| load_pattern(p).context(|| format!("{}", p.display())))
        .collect()
}

/// Scores every query against every pattern; rows are ordered by query,
/// then pattern, as given on the command line.
pub fn run(a: &CorrelateArgs) -> CliResult<Outcome> {
    let patterns = load_patterns(&a.patterns)?;
    let rows: Vec<Vec<CorrelationRecord>> = a
        .queries
        .par_iter()
        .map(|qp| {
            let q = load_query(qp, a)?;
            patterns
                .iter()
                .zip(&a.patterns)
                .map(|(pattern, pp)| {
                    let (rho, n_pixels) = masked_corr_counted(&q.residue, pattern, q.mask.as_ref())
                        .context(|| {
                            format!("query {} vs pattern {}", qp.display(), pp.display())
                        })?;
                    Ok(CorrelationRecord {
                        camera_id: q
                            .meta
                            .camera_id
                            .clone()
                            .unwrap_or_else(|| UNKNOWN_CAMERA.into()),
                        lens_id: q.meta.lens_id.clone().unwrap_or_default(),
                        pattern_temperature_c: pattern.temperature_c(),
                        rho,
                        n_pixels,
                    })
                })
                .collect()
        })
        .collect::<CliResult<_>>()?;

    let sink = a.out.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows.iter().flatten() {
        w.serialize(r).map_err(|e| CliError::Csv {
            path: sink.clone(),
            source: e,
        })?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::io(&sink, e.into_error()))?;
    let mut out = Outcome::default();
    out.emit(a.out.as_deref(), bytes)?;
    Ok(out)
}

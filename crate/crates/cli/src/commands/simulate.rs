//! Output layout:
//!
//! ```text
//! <out>/sensor.profile, sensor.dark.f32, sensor.prnu.f32
//! <out>/darks/<T>C/dark_0000.pgm (+ .meta)
//! <out>/queries/flat_0000.pgm (+ .meta)
//! ```

use rayon::prelude::*;

use dsnprint::frame_io::{save_frame, Frame};
use dsnprint::simulate::{
    capture_dark, capture_flat, capture_index, profile_paths, save_profile, SensorParams,
    SensorProfile,
};

use super::create_dir;
use crate::error::{CliError, CliResult, Context};
use crate::{Outcome, SimulateArgs};

/// Capture set used for the flat-field queries; dark sets use their
/// temperature index.
const QUERY_SET: u32 = u32::MAX;

pub(crate) fn params_from(a: &SimulateArgs) -> SensorParams {
    SensorParams {
        width: a.width,
        height: a.height,
        bit_depth: a.bit_depth,
        n_max: a.n_max,
        delta_e_ev: a.delta_e,
        read_noise_e: a.read_noise,
        hot_pixel_fraction: a.hot_fraction,
        seed: a.seed,
        camera_id: a.camera_id.clone(),
        ..SensorParams::default()
    }
    .with_dark_rate_at(a.dark_rate, 30.0)
}

pub fn run(a: &SimulateArgs) -> CliResult<Outcome> {
    if a.temps.is_empty() {
        return Err(CliError::Usage("--temps is empty".into()));
    }
    if !(a.flat_level >= 0.0 && a.flat_level.is_finite()) {
        return Err(CliError::Usage(format!(
            "--flat-level must be non-negative, got {}",
            a.flat_level
        )));
    }
    let profile = SensorProfile::generate(params_from(a))
        .map_err(|e| CliError::Usage(format!("sensor parameters: {e}")))?;
    let mut out = Outcome::default();
    create_dir(&a.out)?;
    let stem = a.out.join("sensor");
    save_profile(&profile, &stem).context(|| format!("writing profile {}", stem.display()))?;
    let (p, d, k) = profile_paths(&stem);
    out.written.extend([p, d, k]);

    for (set, &t) in a.temps.iter().enumerate() {
        let dir = a.out.join("darks").join(format!("{t}C"));
        create_dir(&dir)?;
        let frames: Vec<Frame> = (0..a.frames)
            .into_par_iter()
            .map(|i| capture_dark(&profile, t, a.exposure, capture_index(set as u32, i as u32)))
            .collect::<dsnprint::Result<_>>()
            .map_err(|e| CliError::Usage(format!("dark capture at {t} °C: {e}")))?;
        for (i, f) in frames.iter().enumerate() {
            let path = dir.join(format!("dark_{i:04}.pgm"));
            save_frame(f, &path).context(|| format!("writing {}", path.display()))?;
            out.written.push(path);
        }
    }

    let dir = a.out.join("queries");
    create_dir(&dir)?;
    let illuminance = a.flat_level * a.n_max / a.exposure;
    let frames: Vec<Frame> = (0..a.queries)
        .into_par_iter()
        .map(|i| {
            capture_flat(
                &profile,
                a.query_temp,
                a.exposure,
                illuminance,
                capture_index(QUERY_SET, i as u32),
            )
            .map(|mut f| {
                f.meta.lens_id = a.lens_id.clone();
                f
            })
        })
        .collect::<dsnprint::Result<_>>()
        .map_err(|e| CliError::Usage(format!("flat capture: {e}")))?;
    for (i, f) in frames.iter().enumerate() {
        let path = dir.join(format!("flat_{i:04}.pgm"));
        save_frame(f, &path).context(|| format!("writing {}", path.display()))?;
        out.written.push(path);
    }
    out.stdout = format!(
        "simulated {} dark sets of {} frames and {} queries in {}\n",
        a.temps.len(),
        a.frames,
        a.queries,
        a.out.display()
    );
    Ok(out)
}

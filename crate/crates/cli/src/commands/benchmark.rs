use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use dsnprint::filter::{DctFilter, WaveletFilter};
use dsnprint::frame_io::Frame;

use super::load_frames;
use crate::error::{CliError, CliResult};
use crate::{BenchmarkArgs, FilterParams, Outcome};

/// One line of the filter timing table. Deltas are relative to the wavelet
/// baseline of the same mode, so the baseline rows carry zeros.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub filter: String,
    pub frames: usize,
    pub total_s: f64,
    pub delta_s: f64,
    pub delta_pct: f64,
}

fn time_wavelet(
    frames: &[Frame],
    reps: usize,
    p: &FilterParams,
    parallel: bool,
) -> CliResult<Duration> {
    let filters = frames
        .iter()
        .map(|f| p.wavelet(f.bit_depth()))
        .collect::<CliResult<Vec<WaveletFilter>>>()?;
    let start = Instant::now();
    for _ in 0..reps {
        if parallel {
            frames.par_iter().zip(&filters).for_each(|(f, w)| {
                std::hint::black_box(w.residue(f));
            });
        } else {
            for (f, w) in frames.iter().zip(&filters) {
                std::hint::black_box(w.residue(f));
            }
        }
    }
    Ok(start.elapsed())
}

fn time_dct(
    frames: &[Frame],
    reps: usize,
    p: &FilterParams,
    parallel: bool,
) -> CliResult<Duration> {
    let spec = p.dct_spec()?;
    let start = Instant::now();
    // plans are built inside the timed region, once per frame size
    let mut plans: Vec<DctFilter> = Vec::new();
    let filters: Vec<usize> = frames
        .iter()
        .map(|f| {
            plans
                .iter()
                .position(|d| d.gain().dims() == f.dims())
                .unwrap_or_else(|| {
                    plans.push(DctFilter::new(spec, f.width(), f.height()));
                    plans.len() - 1
                })
        })
        .collect();
    let run = |f: &Frame, i: &usize| {
        std::hint::black_box(plans[*i].residue(f).expect("plan matches frame"));
    };
    for _ in 0..reps {
        if parallel {
            frames.par_iter().zip(&filters).for_each(|(f, i)| run(f, i));
        } else {
            frames.iter().zip(&filters).for_each(|(f, i)| run(f, i));
        }
    }
    Ok(start.elapsed())
}

/// Times both filters over preloaded frames. The sequential pair always runs
/// on the calling thread; `parallel` adds a second pair spread over the
/// current rayon pool.
pub fn run_benchmark(
    frames: &[Frame],
    repetitions: usize,
    params: &FilterParams,
    parallel: bool,
) -> CliResult<Vec<BenchmarkRow>> {
    if frames.is_empty() {
        return Err(CliError::data("benchmark", dsnprint::Error::EmptySet));
    }
    if repetitions == 0 {
        return Err(CliError::Usage("--repetitions must be at least 1".into()));
    }
    let modes: &[(bool, &str)] = if parallel {
        &[(false, ""), (true, "_parallel")]
    } else {
        &[(false, "")]
    };
    let mut rows = Vec::new();
    for &(par, suffix) in modes {
        let wavelet = time_wavelet(frames, repetitions, params, par)?.as_secs_f64();
        let dct = time_dct(frames, repetitions, params, par)?.as_secs_f64();
        let n = frames.len() * repetitions;
        rows.push(BenchmarkRow {
            filter: format!("wavelet{suffix}"),
            frames: n,
            total_s: wavelet,
            delta_s: 0.0,
            delta_pct: 0.0,
        });
        rows.push(BenchmarkRow {
            filter: format!("dct{suffix}"),
            frames: n,
            total_s: dct,
            delta_s: dct - wavelet,
            delta_pct: 100.0 * (dct - wavelet) / wavelet,
        });
    }
    Ok(rows)
}

pub fn run(a: &BenchmarkArgs) -> CliResult<Outcome> {
    let dir = std::fs::read_dir(&a.frames).map_err(|e| CliError::io(&a.frames, e))?;
    let mut paths = Vec::new();
    for entry in dir {
        let path = entry.map_err(|e| CliError::io(&a.frames, e))?.path();
        if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
        {
            paths.push(path);
        }
    }
    paths.sort();
    let frames = load_frames(&paths)?;
    let rows = run_benchmark(&frames, a.repetitions, &a.params, a.parallel)?;
    let sink = a.out.clone().unwrap_or_else(|| "<stdout>".into());
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
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

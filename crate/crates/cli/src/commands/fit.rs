use std::path::Path;

use serde::Serialize;

use dsnprint::correlate::{correlation_series, CorrelationRecord, SeriesPoint};
use dsnprint::thermal::{
    activation_energy, fit_exponential, identify_temperature, ExpFit, IdentifyOptions,
};

use crate::error::{CliError, CliResult, Context};
use crate::{EstimateArgs, FitArgs, Outcome};

pub(crate) fn read_records(path: &Path, camera: Option<&str>) -> CliResult<Vec<CorrelationRecord>> {
    let csv_err = |e| CliError::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut out = Vec::new();
    for row in reader.deserialize() {
        let r: CorrelationRecord = row.map_err(csv_err)?;
        if camera.is_none_or(|c| c == r.camera_id) {
            out.push(r);
        }
    }
    Ok(out)
}

fn series_of(path: &Path, camera: Option<&str>) -> CliResult<Vec<SeriesPoint>> {
    let records = read_records(path, camera)?;
    correlation_series(&records).context(|| match camera {
        Some(c) => format!("{} (camera {c})", path.display()),
        None => format!("{}", path.display()),
    })
}

fn json_bytes<T: Serialize>(value: &T, sink: Option<&Path>) -> CliResult<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Json {
        path: sink.map_or_else(|| "<stdout>".into(), Path::to_path_buf),
        source: e,
    })?;
    bytes.push(b'\n');
    Ok(bytes)
}

#[derive(Serialize)]
struct FitReport {
    series: Vec<SeriesPoint>,
    fit: ExpFit,
    delta_e_ev: f64,
    t_ref_k: f64,
}

/// Fits `a·e^{b·t}` to the whole per-temperature mean series.
pub fn run_fit(a: &FitArgs) -> CliResult<Outcome> {
    let series = series_of(&a.input, a.camera.as_deref())?;
    let pts: Vec<(f64, f64)> = series
        .iter()
        .map(|s| (s.temperature_c, s.mean_rho))
        .collect();
    let fit = fit_exponential(&pts).context(|| format!("fitting {}", a.input.display()))?;
    let delta_e_ev = activation_energy(fit.b, a.t_ref_k)
        .map_err(|e| CliError::Usage(format!("--t-ref-k: {e}")))?;
    let report = FitReport {
        series,
        fit,
        delta_e_ev,
        t_ref_k: a.t_ref_k,
    };
    let mut out = Outcome::default();
    out.emit(a.out.as_deref(), json_bytes(&report, a.out.as_deref())?)?;
    Ok(out)
}

/// Locates the plateau onset of the per-temperature mean series.
pub fn run_estimate(a: &EstimateArgs) -> CliResult<Outcome> {
    let opts = IdentifyOptions {
        grid_step_c: a.grid_step,
        forensic_half_width_c: a.forensic_halfwidth,
        t_ref_k: a.t_ref_k,
    };
    opts.validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let series = series_of(&a.input, a.camera.as_deref())?;
    let pts: Vec<(f64, f64)> = series
        .iter()
        .map(|s| (s.temperature_c, s.mean_rho))
        .collect();
    let fit = identify_temperature(&pts, &opts)
        .context(|| format!("estimating temperature from {}", a.input.display()))?;
    let mut out = Outcome::default();
    out.emit(a.out.as_deref(), json_bytes(&fit, a.out.as_deref())?)?;
    Ok(out)
}

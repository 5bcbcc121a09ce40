//! Masked Pearson correlation and per-temperature aggregation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::ResiduePlane;
use crate::fingerprint::SaturationMask;
use crate::frame_io::ReferencePattern;

/// One query residue scored against one reference pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRecord {
    pub camera_id: String,
    pub lens_id: String,
    #[serde(rename = "pattern_temp_c")]
    pub pattern_temperature_c: f64,
    pub rho: f64,
    pub n_pixels: usize,
}

/// Mean correlation at one pattern temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub temperature_c: f64,
    pub mean_rho: f64,
    pub count: usize,
}

/// Pearson correlation over the pixels unmasked in both the pattern and
/// `extra_mask`.
pub fn masked_corr(
    residue: &ResiduePlane,
    pattern: &ReferencePattern,
    extra_mask: Option<&SaturationMask>,
) -> Result<f64> {
    masked_corr_counted(residue, pattern, extra_mask).map(|(rho, _)| rho)
}

/// As [`masked_corr`], also returning the number of pixels used.
pub fn masked_corr_counted(
    residue: &ResiduePlane,
    pattern: &ReferencePattern,
    extra_mask: Option<&SaturationMask>,
) -> Result<(f64, usize)> {
    if residue.dims() != pattern.dims() {
        return Err(Error::dims(residue.dims(), pattern.dims()));
    }
    if let Some(m) = extra_mask {
        if m.dims() != pattern.dims() {
            return Err(Error::dims(pattern.dims(), m.dims()));
        }
    }
    let extra = extra_mask.map(SaturationMask::bits);
    let include: Vec<bool> = pattern
        .mask()
        .iter()
        .enumerate()
        .map(|(i, &m)| !m && !extra.is_some_and(|e| e[i]))
        .collect();
    pearson(residue.data(), pattern.data(), &include)
}

/// Two-pass Pearson correlation over the indices where `include` is set.
pub fn pearson(x: &[f64], y: &[f64], include: &[bool]) -> Result<(f64, usize)> {
    assert_eq!(x.len(), y.len());
    assert_eq!(x.len(), include.len());
    let mut n = 0usize;
    let (mut sx, mut sy) = (0.0, 0.0);
    for ((&a, &b), _) in x.iter().zip(y).zip(include).filter(|(_, &k)| k) {
        sx += a;
        sy += b;
        n += 1;
    }
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "{n} jointly unmasked pixels, need at least 2"
        )));
    }
    let (mx, my) = (sx / n as f64, sy / n as f64);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for ((&a, &b), _) in x.iter().zip(y).zip(include).filter(|(_, &k)| k) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateInput("residue has zero variance".into()));
    }
    if syy == 0.0 {
        return Err(Error::DegenerateInput("pattern has zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt()), n))
}

/// Groups records by exact pattern temperature and averages rho, ascending.
pub fn correlation_series(records: &[CorrelationRecord]) -> Result<Vec<SeriesPoint>> {
    if records.is_empty() {
        return Err(Error::EmptySet);
    }
    if let Some(r) = records
        .iter()
        .find(|r| !r.pattern_temperature_c.is_finite())
    {
        return Err(Error::InvalidParam(format!(
            "non-finite pattern temperature {}",
            r.pattern_temperature_c
        )));
    }
    let mut sorted: Vec<&CorrelationRecord> = records.iter().collect();
    // -0.0 and 0.0 are one group
    sorted.sort_by(|a, b| {
        (a.pattern_temperature_c + 0.0).total_cmp(&(b.pattern_temperature_c + 0.0))
    });
    let mut out: Vec<SeriesPoint> = Vec::new();
    let mut sum = 0.0;
    for r in sorted {
        match out.last_mut() {
            Some(p) if p.temperature_c == r.pattern_temperature_c => {
                sum += r.rho;
                p.count += 1;
            }
            _ => {
                if let Some(p) = out.last_mut() {
                    p.mean_rho = sum / p.count as f64;
                }
                sum = r.rho;
                out.push(SeriesPoint {
                    temperature_c: r.pattern_temperature_c + 0.0,
                    mean_rho: 0.0,
                    count: 1,
                });
            }
        }
    }
    if let Some(p) = out.last_mut() {
        p.mean_rho = sum / p.count as f64;
    }
    Ok(out)
}

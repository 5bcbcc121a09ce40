//! Exponential thermal model, plateau-based temperature identification and
//! activation energy.
//!
//! Correlation against a pattern recorded at temperature `t` rises as
//! `y = a·e^{b·t}` until `t` reaches the capture temperature of the query and
//! then levels off. [`identify_temperature`] locates that knee by a grid
//! search over breakpoints.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boltzmann constant, eV/K.
pub const BOLTZMANN_EV: f64 = 8.617333e-5;
/// Reference temperature for the slope-to-energy conversion (30 °C).
pub const DEFAULT_T_REF_K: f64 = 303.15;
/// Half width of the reported forensic temperature range, °C.
pub const FORENSIC_HALF_WIDTH_C: f64 = 4.5;
pub const DEFAULT_GRID_STEP_C: f64 = 0.05;
pub const MAX_ITERATIONS: usize = 200;
pub const REL_SSE_TOL: f64 = 1e-12;

const ZERO_C_IN_K: f64 = 273.15;

/// Least-squares fit of `y = a·e^{b·t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub a: f64,
    pub b: f64,
    pub r2: f64,
    /// Adjusted R² with two predictors; equals `r2` when `n ≤ 3`.
    pub adj_r2: f64,
    pub sse: f64,
    /// Points used in the linear-domain refinement.
    pub n: usize,
    /// Non-positive points left out of the log-domain initialization.
    pub dropped: usize,
    pub iterations: usize,
    /// False when the iteration cap was reached first.
    pub converged: bool,
}

impl ExpFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.a * (self.b * t).exp()
    }
}

/// Result of [`identify_temperature`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalFit {
    pub a: f64,
    pub b: f64,
    pub adj_r2: f64,
    pub t_star_c: f64,
    pub forensic_range_c: (f64, f64),
    pub delta_e_ev: f64,
    pub t_ref_k: f64,
    /// Total SSE of the saturating model at `t_star_c`.
    pub sse: f64,
    /// Points on the rising segment.
    pub n_rising: usize,
    pub converged: bool,
}

/// Tunables for [`identify_temperature`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentifyOptions {
    pub grid_step_c: f64,
    pub forensic_half_width_c: f64,
    pub t_ref_k: f64,
}

impl Default for IdentifyOptions {
    fn default() -> Self {
        IdentifyOptions {
            grid_step_c: DEFAULT_GRID_STEP_C,
            forensic_half_width_c: FORENSIC_HALF_WIDTH_C,
            t_ref_k: DEFAULT_T_REF_K,
        }
    }
}

impl IdentifyOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.grid_step_c > 0.0 && self.grid_step_c.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "grid step must be positive, got {}",
                self.grid_step_c
            )));
        }
        if !(self.forensic_half_width_c >= 0.0 && self.forensic_half_width_c.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "forensic half width must be non-negative, got {}",
                self.forensic_half_width_c
            )));
        }
        check_t_ref(self.t_ref_k)
    }
}

fn check_t_ref(t_ref_k: f64) -> Result<()> {
    if t_ref_k > 0.0 && t_ref_k.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!(
            "reference temperature must be positive kelvin, got {t_ref_k}"
        )))
    }
}

fn distinct_count(mut ts: Vec<f64>) -> usize {
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts.len()
}

fn check_finite(points: &[(f64, f64)]) -> Result<()> {
    match points
        .iter()
        .find(|(t, y)| !t.is_finite() || !y.is_finite())
    {
        Some(p) => Err(Error::InvalidParam(format!("non-finite point {p:?}"))),
        None => Ok(()),
    }
}

/// Sum of squared residuals of `A·e^{b(t−t0)}`.
fn sse_centered(points: &[(f64, f64)], t0: f64, amp: f64, b: f64) -> f64 {
    points
        .iter()
        .map(|&(t, y)| {
            let r = y - amp * (b * (t - t0)).exp();
            r * r
        })
        .sum()
}

/// Fits `y = a·e^{b·t}` by least squares in the linear domain.
///
/// Starts from a straight-line fit of `ln y` against `t` over the positive
/// points, then refines on all points with damped Gauss–Newton
/// (Levenberg–Marquardt) until the relative SSE change drops below `1e-12`
/// or [`MAX_ITERATIONS`] is reached.
pub fn fit_exponential(points: &[(f64, f64)]) -> Result<ExpFit> {
    check_finite(points)?;
    let distinct = distinct_count(points.iter().map(|p| p.0).collect());
    if distinct < 3 {
        return Err(Error::InsufficientData(format!(
            "{distinct} distinct temperatures, need at least 3"
        )));
    }
    let positive: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.1 > 0.0).collect();
    if positive.is_empty() {
        return Err(Error::AllNonPositive);
    }
    if distinct_count(positive.iter().map(|p| p.0).collect()) < 2 {
        return Err(Error::InsufficientData(
            "fewer than 2 distinct temperatures with positive values".into(),
        ));
    }
    let dropped = points.len() - positive.len();

    // centering keeps the amplitude and slope well conditioned
    let n = points.len();
    let t0 = points.iter().map(|p| p.0).sum::<f64>() / n as f64;

    let np = positive.len() as f64;
    let mt = positive.iter().map(|p| p.0 - t0).sum::<f64>() / np;
    let ml = positive.iter().map(|p| p.1.ln()).sum::<f64>() / np;
    let (mut stt, mut stl) = (0.0, 0.0);
    for &(t, y) in &positive {
        let dt = t - t0 - mt;
        stt += dt * dt;
        stl += dt * (y.ln() - ml);
    }
    let mut b = stl / stt;
    let mut amp = (ml - b * mt).exp();

    let scale_sq: f64 = points.iter().map(|p| p.1 * p.1).sum();
    let negligible = 1e-30 * scale_sq;
    let mut sse = sse_centered(points, t0, amp, b);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = sse <= negligible;

    while !converged && iterations < MAX_ITERATIONS {
        iterations += 1;
        let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(t, y) in points {
            let dt = t - t0;
            let e = (b * dt).exp();
            let r = y - amp * e;
            let da = e;
            let db = amp * dt * e;
            jaa += da * da;
            jab += da * db;
            jbb += db * db;
            ga += da * r;
            gb += db * r;
        }
        // retry with heavier damping until the step reduces SSE
        loop {
            let (maa, mbb) = (jaa * (1.0 + lambda), jbb * (1.0 + lambda));
            let det = maa * mbb - jab * jab;
            let step = if det > 0.0 && det.is_finite() {
                Some(((mbb * ga - jab * gb) / det, (maa * gb - jab * ga) / det))
            } else {
                None
            };
            if let Some((d_amp, d_b)) = step {
                let (na, nb) = (amp + d_amp, b + d_b);
                let new_sse = sse_centered(points, t0, na, nb);
                if new_sse.is_finite() && new_sse <= sse {
                    let rel = (sse - new_sse) / sse;
                    amp = na;
                    b = nb;
                    sse = new_sse;
                    lambda = (lambda / 10.0).max(1e-12);
                    converged = rel < REL_SSE_TOL || sse <= negligible;
                    break;
                }
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                // no descent direction left at working precision
                converged = true;
                break;
            }
        }
    }

    let a = amp * (-b * t0).exp();
    let my = points.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let sst: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r2 = if sst > 0.0 {
        1.0 - sse / sst
    } else if sse <= negligible {
        1.0
    } else {
        0.0
    };
    let adj_r2 = if n > 3 {
        1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n as f64 - 3.0)
    } else {
        r2
    };
    Ok(ExpFit {
        a,
        b,
        r2,
        adj_r2,
        sse,
        n,
        dropped,
        iterations,
        converged,
    })
}

/// Locates the capture temperature as the breakpoint of
/// `y(t) = a·e^{b·min(t, t*)}`.
///
/// Every candidate `t*` on a grid over `[min t, max t]` is scored by the SSE
/// of an exponential fitted to the points at or below `t*` plus the SSE of
/// the remaining points against the plateau `a·e^{b·t*}`. Candidates need
/// three distinct temperatures on the rising side and a positive slope. The
/// lowest `t*` with minimal SSE wins.
pub fn identify_temperature(points: &[(f64, f64)], opts: &IdentifyOptions) -> Result<ThermalFit> {
    opts.validate()?;
    check_finite(points)?;
    if points.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "{} points, need at least 4",
            points.len()
        )));
    }
    let distinct = distinct_count(points.iter().map(|p| p.0).collect());
    if distinct < 3 {
        return Err(Error::InsufficientData(format!(
            "{distinct} distinct temperatures, need at least 3"
        )));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|p, q| p.0.total_cmp(&q.0));
    let (t_min, t_max) = (pts[0].0, pts[pts.len() - 1].0);

    // breakpoints within this distance of a sample count that sample as rising
    let eps = 1e-9 * opts.grid_step_c;
    let steps = ((t_max - t_min) / opts.grid_step_c + 1e-9).floor() as usize;
    let mut cache: Vec<Option<Option<ExpFit>>> = vec![None; pts.len() + 1];
    let mut best: Option<(f64, f64, usize, ExpFit)> = None;

    for k in 0..=steps {
        let t_star = t_min + k as f64 * opts.grid_step_c;
        let split = pts.partition_point(|p| p.0 <= t_star + eps);
        let fit = *cache[split].get_or_insert_with(|| {
            let rising = &pts[..split];
            if distinct_count(rising.iter().map(|p| p.0).collect()) < 3 {
                return None;
            }
            fit_exponential(rising).ok().filter(|f| f.b > 0.0)
        });
        let Some(fit) = fit else { continue };
        let level = fit.eval(t_star);
        let plateau: f64 = pts[split..].iter().map(|p| (p.1 - level).powi(2)).sum();
        let total = fit.sse + plateau;
        if best.as_ref().is_none_or(|b| total < b.1) {
            best = Some((t_star, total, split, fit));
        }
    }

    let (t_star, sse, n_rising, fit) = best.ok_or(Error::MonotoneDecreasing)?;
    Ok(ThermalFit {
        a: fit.a,
        b: fit.b,
        adj_r2: fit.adj_r2,
        t_star_c: t_star,
        forensic_range_c: (
            t_star - opts.forensic_half_width_c,
            t_star + opts.forensic_half_width_c,
        ),
        delta_e_ev: activation_energy(fit.b, opts.t_ref_k)?,
        t_ref_k: opts.t_ref_k,
        sse,
        n_rising,
        converged: fit.converged,
    })
}

/// Activation energy (eV) whose `T²·e^{−ΔE/kT}` law has logarithmic slope
/// `b` per degree at `t_ref_k`: `ΔE = k·T²·b − 2·k·T`.
pub fn activation_energy(b: f64, t_ref_k: f64) -> Result<f64> {
    check_t_ref(t_ref_k)?;
    Ok(BOLTZMANN_EV * t_ref_k * t_ref_k * b - 2.0 * BOLTZMANN_EV * t_ref_k)
}

/// Inverse of [`activation_energy`]: `b = 2/T + ΔE/(k·T²)`.
pub fn slope_for_activation_energy(delta_e_ev: f64, t_ref_k: f64) -> Result<f64> {
    check_t_ref(t_ref_k)?;
    Ok(2.0 / t_ref_k + delta_e_ev / (BOLTZMANN_EV * t_ref_k * t_ref_k))
}

pub fn celsius_to_kelvin(t_c: f64) -> f64 {
    t_c + ZERO_C_IN_K
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        (0..9).map(|i| 10.0 + 5.0 * i as f64).collect()
    }

    #[test]
    fn recovers_noiseless_exponential() {
        let pts: Vec<_> = grid()
            .into_iter()
            .map(|t| (t, 2.0 * (0.03 * t).exp()))
            .collect();
        let f = fit_exponential(&pts).unwrap();
        assert!((f.a - 2.0).abs() < 1e-9, "{f:?}");
        assert!((f.b - 0.03).abs() < 1e-9);
        assert!((f.adj_r2 - 1.0).abs() < 1e-12);
        assert!(f.converged);
        assert_eq!(f.dropped, 0);
    }

    #[test]
    fn constant_data_gives_flat_fit() {
        let pts: Vec<_> = grid().into_iter().map(|t| (t, 0.37)).collect();
        let f = fit_exponential(&pts).unwrap();
        assert!(f.b.abs() < 1e-9);
        assert!((f.a - 0.37).abs() < 1e-9);
        assert!(f.adj_r2 <= 1.0);
    }

    #[test]
    fn non_positive_points_are_dropped_for_init_only() {
        let mut pts: Vec<_> = grid()
            .into_iter()
            .map(|t| (t, (0.05 * t).exp() - 2.0))
            .collect();
        pts[0].1 = -0.01;
        let f = fit_exponential(&pts).unwrap();
        assert_eq!(f.dropped, 1);
        assert_eq!(f.n, 9);
    }

    #[test]
    fn fit_errors() {
        assert!(matches!(
            fit_exponential(&[(1.0, 1.0), (2.0, 2.0), (2.0, 3.0)]),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            fit_exponential(&[(1.0, 0.0), (2.0, -1.0), (3.0, -0.5)]),
            Err(Error::AllNonPositive)
        ));
        assert!(fit_exponential(&[(1.0, f64::NAN), (2.0, 1.0), (3.0, 1.0)]).is_err());
    }

    #[test]
    fn three_point_fit_reports_plain_r2() {
        let f = fit_exponential(&[(0.0, 1.0), (1.0, 2.1), (2.0, 3.9)]).unwrap();
        assert_eq!(f.adj_r2, f.r2);
    }

    #[test]
    fn piecewise_exact_breakpoint() {
        let pts: Vec<_> = grid()
            .into_iter()
            .map(|t| (t, (0.03 * t.min(30.0)).exp()))
            .collect();
        let fit = identify_temperature(&pts, &IdentifyOptions::default()).unwrap();
        assert!((fit.t_star_c - 30.0).abs() <= 0.05, "{fit:?}");
        assert!((fit.b - 0.03).abs() < 1e-6);
        assert_eq!(
            fit.forensic_range_c,
            (fit.t_star_c - 4.5, fit.t_star_c + 4.5)
        );
        assert_eq!(fit.t_ref_k, DEFAULT_T_REF_K);
    }

    #[test]
    fn decreasing_series_is_rejected() {
        let pts: Vec<_> = grid().into_iter().map(|t| (t, (-0.03 * t).exp())).collect();
        assert!(matches!(
            identify_temperature(&pts, &IdentifyOptions::default()),
            Err(Error::MonotoneDecreasing)
        ));
    }

    #[test]
    fn identify_needs_enough_points() {
        let pts = [(10.0, 1.0), (15.0, 2.0), (20.0, 3.0)];
        assert!(matches!(
            identify_temperature(&pts, &IdentifyOptions::default()),
            Err(Error::InsufficientData(_))
        ));
        let pts = [(10.0, 1.0), (10.0, 1.1), (15.0, 2.0), (15.0, 3.0)];
        assert!(matches!(
            identify_temperature(&pts, &IdentifyOptions::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn energy_of_pure_prefactor_slope_is_zero() {
        let t = DEFAULT_T_REF_K;
        assert!(activation_energy(2.0 / t, t).unwrap().abs() < 1e-15);
        assert!(activation_energy(0.03, 0.0).is_err());
        assert!(slope_for_activation_energy(0.19, -1.0).is_err());
    }

    #[test]
    fn energy_round_trip() {
        for b in [0.0, 0.01, 0.0312, 0.08, -0.02] {
            let de = activation_energy(b, DEFAULT_T_REF_K).unwrap();
            let back = slope_for_activation_energy(de, DEFAULT_T_REF_K).unwrap();
            assert!((back - b).abs() < 1e-12);
        }
    }
}

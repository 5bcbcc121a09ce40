//! Noise residue extraction, `Y = I - f(I)`.
//!
//! Two filters are provided. [`DctFilter`] is the fast path: a single global
//! Gaussian high-pass mask applied to the orthonormal 2-D DCT of the whole
//! frame. [`WaveletFilter`] is the slower wavelet-coring baseline, a
//! multi-level orthogonal wavelet decomposition with locally adaptive Wiener
//! shrinkage of the detail bands.

mod dct;
mod wavelet;

pub use dct::{dct2, idct2, DctPlan};
pub use wavelet::{wavelet_residue, WaveletFilter, DAUBECHIES_8_TAP};

use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};
use crate::frame_io::Frame;

/// Row-major 2-D plane of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

/// Noise residue of a single frame.
pub type ResiduePlane = Plane;

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParam(format!(
                "plane dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidParam(format!(
                "{} values for a {width}x{height} plane",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParam(format!("non-finite value at {i}")));
        }
        Ok(Plane {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "plane dimensions must be positive");
        Plane {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_frame(frame: &Frame) -> Self {
        Plane {
            width: frame.width(),
            height: frame.height(),
            data: frame.to_reals(),
        }
    }

    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Plane {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Sum of squares.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// Gaussian high-pass specification for the DCT filter.
///
/// The gain reaches one half at `cutoff_radians`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DctFilterSpec {
    cutoff_radians: f64,
}

impl DctFilterSpec {
    /// Default cutoff, `150π/1136` rad/sample.
    pub const DEFAULT_CUTOFF: f64 = 150.0 * PI / 1136.0;
    pub const HALF_GAIN_AT_CUTOFF: f64 = 0.5;

    pub fn new(cutoff_radians: f64) -> Result<Self> {
        if !(cutoff_radians > 0.0 && cutoff_radians < PI) {
            return Err(Error::InvalidParam(format!(
                "cutoff must lie in (0, π), got {cutoff_radians}"
            )));
        }
        Ok(DctFilterSpec { cutoff_radians })
    }

    pub fn cutoff_radians(&self) -> f64 {
        self.cutoff_radians
    }

    /// Gaussian width with `G(cutoff) = 1/2`: `σ² = r_c² / (2 ln 2)`.
    pub fn sigma_sq(&self) -> f64 {
        self.cutoff_radians * self.cutoff_radians / (2.0 * LN_2)
    }

    /// Gain at radial frequency `r` (radians/sample).
    pub fn gain(&self, r: f64) -> f64 {
        -(-r * r / (2.0 * self.sigma_sq())).exp_m1()
    }
}

impl Default for DctFilterSpec {
    fn default() -> Self {
        DctFilterSpec {
            cutoff_radians: Self::DEFAULT_CUTOFF,
        }
    }
}

/// Radial frequency of DCT bin `(u, v)` in a `width`×`height` transform.
pub fn bin_radius(u: usize, v: usize, width: usize, height: usize) -> f64 {
    let fu = u as f64 * PI / width as f64;
    let fv = v as f64 * PI / height as f64;
    fu.hypot(fv)
}

/// Gain plane `G(u, v) = 1 - exp(-r²/(2σ²))`, indexed `[v * width + u]`.
pub fn build_hp_mask(spec: &DctFilterSpec, width: usize, height: usize) -> Plane {
    let mut data = Vec::with_capacity(width * height);
    for v in 0..height {
        for u in 0..width {
            data.push(spec.gain(bin_radius(u, v, width, height)));
        }
    }
    Plane::from_raw(width, height, data)
}

/// DCT-domain high-pass residue extractor prepared for one frame size.
///
/// Holds immutable transform plans and the gain mask, so one instance can be
/// shared across threads.
#[derive(Clone)]
pub struct DctFilter {
    spec: DctFilterSpec,
    plan: DctPlan,
    gain: Plane,
}

impl DctFilter {
    pub fn new(spec: DctFilterSpec, width: usize, height: usize) -> Self {
        DctFilter {
            spec,
            plan: DctPlan::new(width, height),
            gain: build_hp_mask(&spec, width, height),
        }
    }

    pub fn spec(&self) -> &DctFilterSpec {
        &self.spec
    }

    pub fn gain(&self) -> &Plane {
        &self.gain
    }

    pub fn residue(&self, frame: &Frame) -> Result<ResiduePlane> {
        self.residue_of_plane(&Plane::from_frame(frame))
    }

    /// `idct2(G ⊙ dct2(I))`.
    pub fn residue_of_plane(&self, plane: &Plane) -> Result<ResiduePlane> {
        if plane.dims() != self.gain.dims() {
            return Err(Error::dims(plane.dims(), self.gain.dims()));
        }
        let mut coeffs = plane.data.clone();
        self.plan.forward(&mut coeffs);
        for (c, g) in coeffs.iter_mut().zip(&self.gain.data) {
            *c *= g;
        }
        self.plan.inverse(&mut coeffs);
        Ok(Plane::from_raw(plane.width, plane.height, coeffs))
    }
}

/// Residue of `frame` under the DCT Gaussian high-pass filter.
pub fn dct_residue(frame: &Frame, spec: &DctFilterSpec) -> ResiduePlane {
    DctFilter::new(*spec, frame.width(), frame.height())
        .residue(frame)
        .expect("filter built for this frame size")
}

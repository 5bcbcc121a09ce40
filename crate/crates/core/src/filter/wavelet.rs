//! Wavelet-coring baseline residue extractor.
//!
//! The frame is reflected out to a multiple of `2^levels`, decomposed with a
//! periodized orthonormal Daubechies filter bank, and every detail
//! coefficient `c` is shrunk to `c·v/(v + σ0²)`. The local signal variance
//! `v` is the smallest windowed mean of `c²` over square windows of side
//! 3, 5, 7 and 9, minus `σ0²`, floored at zero. Windows are truncated at
//! subband edges. The coarsest approximation band passes through unchanged.

use super::{Plane, ResiduePlane};
use crate::error::{Error, Result};
use crate::frame_io::Frame;

/// Orthonormal 8-tap Daubechies low-pass (four vanishing moments).
pub const DAUBECHIES_8_TAP: [f64; 8] = [
    -0.010_597_401_785_069_032,
    0.032_883_011_666_885_2,
    0.030_841_381_835_560_764,
    -0.187_034_811_719_093_09,
    -0.027_983_769_416_859_854,
    0.630_880_767_929_858_9,
    0.714_846_570_552_915_7,
    0.230_377_813_308_896_5,
];

const TAPS: usize = DAUBECHIES_8_TAP.len();
const WINDOWS: [usize; 4] = [3, 5, 7, 9];

const fn high_pass() -> [f64; TAPS] {
    let mut g = [0.0; TAPS];
    let mut j = 0;
    while j < TAPS {
        let h = DAUBECHIES_8_TAP[TAPS - 1 - j];
        g[j] = if j % 2 == 0 { h } else { -h };
        j += 1;
    }
    g
}

const HIGH_PASS: [f64; TAPS] = high_pass();

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveletFilter {
    sigma0_sq: f64,
    levels: usize,
}

impl WaveletFilter {
    pub const DEFAULT_LEVELS: usize = 4;
    /// Noise variance for 8-bit data; deeper rasters scale by `4^(depth-8)`.
    pub const DEFAULT_SIGMA0_SQ_8BIT: f64 = 9.0;

    pub fn new(sigma0_sq: f64, levels: usize) -> Result<Self> {
        if !(sigma0_sq > 0.0 && sigma0_sq.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "sigma0_sq must be positive and finite, got {sigma0_sq}"
            )));
        }
        if levels < 1 {
            return Err(Error::InvalidParam("levels must be >= 1".into()));
        }
        Ok(WaveletFilter { sigma0_sq, levels })
    }

    /// Default parameters for a raster of the given bit depth.
    pub fn for_bit_depth(bit_depth: u8) -> Self {
        let scale = f64::from(1u32 << bit_depth.saturating_sub(8));
        WaveletFilter {
            sigma0_sq: Self::DEFAULT_SIGMA0_SQ_8BIT * scale * scale,
            levels: Self::DEFAULT_LEVELS,
        }
    }

    pub fn sigma0_sq(&self) -> f64 {
        self.sigma0_sq
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn residue(&self, frame: &Frame) -> ResiduePlane {
        self.residue_of_plane(&Plane::from_frame(frame))
    }

    pub fn residue_of_plane(&self, plane: &Plane) -> ResiduePlane {
        let denoised = self.denoise(plane);
        let data = plane
            .data()
            .iter()
            .zip(denoised.data())
            .map(|(i, d)| i - d)
            .collect();
        Plane::from_raw(plane.width(), plane.height(), data)
    }

    /// Wiener-shrunk reconstruction of `plane`.
    pub fn denoise(&self, plane: &Plane) -> Plane {
        let (w, h) = plane.dims();
        let block = 1usize << self.levels;
        let (pw, ph) = (w.div_ceil(block) * block, h.div_ceil(block) * block);
        let mut buf = reflect_pad(plane, pw, ph);

        let mut line = vec![0.0; pw.max(ph)];
        let mut out = vec![0.0; pw.max(ph)];
        let (mut rw, mut rh) = (pw, ph);
        for _ in 0..self.levels {
            forward_level(&mut buf, pw, rw, rh, &mut line, &mut out);
            let (hw, hh) = (rw / 2, rh / 2);
            shrink_band(&mut buf, pw, (hw, 0), (rw - hw, hh), self.sigma0_sq);
            shrink_band(&mut buf, pw, (0, hh), (hw, rh - hh), self.sigma0_sq);
            shrink_band(&mut buf, pw, (hw, hh), (rw - hw, rh - hh), self.sigma0_sq);
            rw = hw;
            rh = hh;
        }
        for _ in 0..self.levels {
            rw *= 2;
            rh *= 2;
            inverse_level(&mut buf, pw, rw, rh, &mut line, &mut out);
        }

        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            data.extend_from_slice(&buf[y * pw..y * pw + w]);
        }
        Plane::from_raw(w, h, data)
    }
}

/// Residue `I - denoised(I)` with the given noise variance and level count.
pub fn wavelet_residue(frame: &Frame, sigma0_sq: f64, levels: usize) -> Result<ResiduePlane> {
    Ok(WaveletFilter::new(sigma0_sq, levels)?.residue(frame))
}

/// Symmetric (edge-repeating) reflection of index `i` into `0..n`.
fn reflect(i: usize, n: usize) -> usize {
    let i = i % (2 * n);
    if i < n {
        i
    } else {
        2 * n - 1 - i
    }
}

fn reflect_pad(plane: &Plane, pw: usize, ph: usize) -> Vec<f64> {
    let (w, h) = plane.dims();
    let src = plane.data();
    let mut buf = Vec::with_capacity(pw * ph);
    for y in 0..ph {
        let row = &src[reflect(y, h) * w..][..w];
        buf.extend_from_slice(row);
        buf.extend((w..pw).map(|x| row[reflect(x, w)]));
    }
    buf
}

fn analyze(line: &[f64], out: &mut [f64]) {
    let n = line.len();
    let half = n / 2;
    for k in 0..half {
        let (mut a, mut d) = (0.0, 0.0);
        for j in 0..TAPS {
            let x = line[(2 * k + j) % n];
            a += DAUBECHIES_8_TAP[j] * x;
            d += HIGH_PASS[j] * x;
        }
        out[k] = a;
        out[half + k] = d;
    }
}

fn synthesize(coeffs: &[f64], out: &mut [f64]) {
    let n = coeffs.len();
    let half = n / 2;
    out.fill(0.0);
    for k in 0..half {
        let (a, d) = (coeffs[k], coeffs[half + k]);
        for j in 0..TAPS {
            out[(2 * k + j) % n] += DAUBECHIES_8_TAP[j] * a + HIGH_PASS[j] * d;
        }
    }
}

fn forward_level(
    buf: &mut [f64],
    stride: usize,
    rw: usize,
    rh: usize,
    line: &mut [f64],
    out: &mut [f64],
) {
    for y in 0..rh {
        let row = &mut buf[y * stride..y * stride + rw];
        analyze(row, &mut out[..rw]);
        row.copy_from_slice(&out[..rw]);
    }
    for x in 0..rw {
        for y in 0..rh {
            line[y] = buf[y * stride + x];
        }
        analyze(&line[..rh], &mut out[..rh]);
        for y in 0..rh {
            buf[y * stride + x] = out[y];
        }
    }
}

fn inverse_level(
    buf: &mut [f64],
    stride: usize,
    rw: usize,
    rh: usize,
    line: &mut [f64],
    out: &mut [f64],
) {
    for x in 0..rw {
        for y in 0..rh {
            line[y] = buf[y * stride + x];
        }
        synthesize(&line[..rh], &mut out[..rh]);
        for y in 0..rh {
            buf[y * stride + x] = out[y];
        }
    }
    for y in 0..rh {
        let row = &mut buf[y * stride..y * stride + rw];
        synthesize(row, &mut out[..rw]);
        row.copy_from_slice(&out[..rw]);
    }
}

fn shrink_band(
    buf: &mut [f64],
    stride: usize,
    (x0, y0): (usize, usize),
    (bw, bh): (usize, usize),
    sigma0_sq: f64,
) {
    if bw == 0 || bh == 0 {
        return;
    }
    // integral image of squared coefficients, (bw+1) x (bh+1)
    let iw = bw + 1;
    let mut integral = vec![0.0; iw * (bh + 1)];
    for y in 0..bh {
        let mut row_sum = 0.0;
        for x in 0..bw {
            let c = buf[(y0 + y) * stride + x0 + x];
            row_sum += c * c;
            integral[(y + 1) * iw + x + 1] = integral[y * iw + x + 1] + row_sum;
        }
    }
    for y in 0..bh {
        for x in 0..bw {
            let mut min_moment = f64::INFINITY;
            for &win in &WINDOWS {
                let r = win / 2;
                let (xa, xb) = (x.saturating_sub(r), (x + r + 1).min(bw));
                let (ya, yb) = (y.saturating_sub(r), (y + r + 1).min(bh));
                let sum = integral[yb * iw + xb] - integral[ya * iw + xb] - integral[yb * iw + xa]
                    + integral[ya * iw + xa];
                let count = ((xb - xa) * (yb - ya)) as f64;
                min_moment = min_moment.min(sum / count);
            }
            let v = (min_moment - sigma0_sq).max(0.0);
            let c = &mut buf[(y0 + y) * stride + x0 + x];
            *c *= v / (v + sigma0_sq);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_bank_is_orthonormal() {
        let h = DAUBECHIES_8_TAP;
        let g = HIGH_PASS;
        assert!((h.iter().sum::<f64>() - std::f64::consts::SQRT_2).abs() < 1e-14);
        assert!(g.iter().sum::<f64>().abs() < 1e-14);
        for shift in (0..TAPS).step_by(2) {
            let hh: f64 = (0..TAPS - shift).map(|j| h[j] * h[j + shift]).sum();
            let gg: f64 = (0..TAPS - shift).map(|j| g[j] * g[j + shift]).sum();
            let hg: f64 = (0..TAPS - shift).map(|j| h[j] * g[j + shift]).sum();
            let gh: f64 = (0..TAPS - shift).map(|j| g[j] * h[j + shift]).sum();
            let want = if shift == 0 { 1.0 } else { 0.0 };
            assert!((hh - want).abs() < 1e-14, "hh shift {shift}");
            assert!((gg - want).abs() < 1e-14, "gg shift {shift}");
            assert!(hg.abs() < 1e-14 && gh.abs() < 1e-14, "hg shift {shift}");
        }
    }

    #[test]
    fn one_dimensional_perfect_reconstruction() {
        for n in [2usize, 4, 6, 8, 16, 30] {
            let x: Vec<f64> = (0..n).map(|i| ((i * 37 + 11) % 17) as f64 - 8.0).collect();
            let mut c = vec![0.0; n];
            let mut back = vec![0.0; n];
            analyze(&x, &mut c);
            synthesize(&c, &mut back);
            for i in 0..n {
                assert!((back[i] - x[i]).abs() < 1e-12, "n={n} i={i}");
            }
            let ex: f64 = x.iter().map(|v| v * v).sum();
            let ec: f64 = c.iter().map(|v| v * v).sum();
            assert!((ex - ec).abs() < 1e-10 * ex.max(1.0));
        }
    }

    #[test]
    fn reflection_indices() {
        assert_eq!(
            (0..8).map(|i| reflect(i, 3)).collect::<Vec<_>>(),
            vec![0, 1, 2, 2, 1, 0, 0, 1]
        );
        assert_eq!(reflect(5, 1), 0);
    }

    #[test]
    fn parameter_validation() {
        assert!(WaveletFilter::new(0.0, 4).is_err());
        assert!(WaveletFilter::new(-1.0, 4).is_err());
        assert!(WaveletFilter::new(f64::NAN, 4).is_err());
        assert!(WaveletFilter::new(9.0, 0).is_err());
        assert_eq!(WaveletFilter::for_bit_depth(8).sigma0_sq(), 9.0);
        assert_eq!(WaveletFilter::for_bit_depth(10).sigma0_sq(), 144.0);
        assert_eq!(WaveletFilter::for_bit_depth(16).sigma0_sq(), 9.0 * 65536.0);
    }

    #[test]
    fn constant_frame_has_zero_residue() {
        for (w, h) in [(64, 64), (37, 21), (3, 5)] {
            let f = Frame::new(w, h, 16, vec![40000; w * h]).unwrap();
            let r = WaveletFilter::for_bit_depth(16).residue(&f);
            assert!(r.data().iter().all(|v| v.abs() <= 1e-9), "{w}x{h}");
        }
    }
}

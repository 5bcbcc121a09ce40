//! Orthonormal 2-D DCT-II / DCT-III for arbitrary plane sizes.
//!
//! Each 1-D transform of length `n` is computed with one complex FFT of
//! length `n` after the even/odd reordering `v[k] = x[2k]`,
//! `v[n-1-k] = x[2k+1]`. Two real rows share one complex FFT.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::Plane;

#[derive(Clone)]
struct Dct1d {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// `exp(-iπk/2n)`
    twiddle: Vec<Complex64>,
    /// orthonormal scale per coefficient
    scale: Vec<f64>,
}

impl Dct1d {
    fn new(n: usize, planner: &mut FftPlanner<f64>) -> Self {
        let twiddle = (0..n)
            .map(|k| {
                let (s, c) = (PI * k as f64 / (2 * n) as f64).sin_cos();
                Complex64::new(c, -s)
            })
            .collect();
        let dc = (1.0 / n as f64).sqrt();
        let ac = (2.0 / n as f64).sqrt();
        let scale = (0..n).map(|k| if k == 0 { dc } else { ac }).collect();
        Dct1d {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            twiddle,
            scale,
        }
    }

    #[inline]
    fn reorder_index(&self, m: usize) -> usize {
        // position in x of v[m]
        if 2 * m < self.n {
            2 * m
        } else {
            2 * (self.n - 1 - m) + 1
        }
    }

    /// In-place DCT-II of every length-`n` row in `data`.
    fn forward_rows(&self, data: &mut [f64]) {
        let n = self.n;
        let rows = data.len() / n;
        let pairs = rows.div_ceil(2);
        let mut buf = vec![Complex64::default(); pairs * n];
        for (p, chunk) in buf.chunks_exact_mut(n).enumerate() {
            let r1 = &data[2 * p * n..(2 * p + 1) * n];
            let r2 = (2 * p + 1 < rows).then(|| &data[(2 * p + 1) * n..(2 * p + 2) * n]);
            for (m, z) in chunk.iter_mut().enumerate() {
                let src = self.reorder_index(m);
                *z = Complex64::new(r1[src], r2.map_or(0.0, |r| r[src]));
            }
        }
        self.fwd.process(&mut buf);
        for (p, chunk) in buf.chunks_exact(n).enumerate() {
            let has_second = 2 * p + 1 < rows;
            for k in 0..n {
                let zk = chunk[k];
                let zc = chunk[(n - k) % n].conj();
                let tw = self.twiddle[k];
                let v1 = (zk + zc) * 0.5;
                data[2 * p * n + k] = (v1 * tw).re * self.scale[k];
                if has_second {
                    let d = zk - zc;
                    // (zk - zc) / 2i
                    let v2 = Complex64::new(d.im * 0.5, -d.re * 0.5);
                    data[(2 * p + 1) * n + k] = (v2 * tw).re * self.scale[k];
                }
            }
        }
    }

    /// In-place DCT-III (inverse of the orthonormal DCT-II) of every row.
    fn inverse_rows(&self, data: &mut [f64]) {
        let n = self.n;
        let rows = data.len() / n;
        let pairs = rows.div_ceil(2);
        let mut buf = vec![Complex64::default(); pairs * n];
        let spectrum = |row: &[f64], k: usize| -> Complex64 {
            let y = row[k] / self.scale[k];
            let y_mirror = if k == 0 {
                0.0
            } else {
                row[n - k] / self.scale[n - k]
            };
            Complex64::new(y, -y_mirror) * self.twiddle[k].conj()
        };
        for (p, chunk) in buf.chunks_exact_mut(n).enumerate() {
            let r1 = &data[2 * p * n..(2 * p + 1) * n];
            let r2 = (2 * p + 1 < rows).then(|| &data[(2 * p + 1) * n..(2 * p + 2) * n]);
            for (k, z) in chunk.iter_mut().enumerate() {
                let v1 = spectrum(r1, k);
                let v2 = r2.map_or(Complex64::default(), |r| spectrum(r, k));
                // v1 + i·v2
                *z = Complex64::new(v1.re - v2.im, v1.im + v2.re);
            }
        }
        self.inv.process(&mut buf);
        let norm = 1.0 / n as f64;
        for (p, chunk) in buf.chunks_exact(n).enumerate() {
            let has_second = 2 * p + 1 < rows;
            for (m, z) in chunk.iter().enumerate() {
                let dst = self.reorder_index(m);
                data[2 * p * n + dst] = z.re * norm;
                if has_second {
                    data[(2 * p + 1) * n + dst] = z.im * norm;
                }
            }
        }
    }
}

/// Precomputed separable transform for one plane size. Immutable once built
/// and safe to share between threads.
#[derive(Clone)]
pub struct DctPlan {
    width: usize,
    height: usize,
    rows: Dct1d,
    cols: Dct1d,
}

impl DctPlan {
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "plane dimensions must be positive");
        let mut planner = FftPlanner::new();
        let rows = Dct1d::new(width, &mut planner);
        let cols = Dct1d::new(height, &mut planner);
        DctPlan {
            width,
            height,
            rows,
            cols,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Orthonormal 2-D DCT-II in place: rows first, then columns.
    pub fn forward(&self, data: &mut [f64]) {
        assert_eq!(data.len(), self.width * self.height);
        self.rows.forward_rows(data);
        let mut t = transpose(data, self.width, self.height);
        self.cols.forward_rows(&mut t);
        transpose_into(&t, self.height, self.width, data);
    }

    /// Orthonormal 2-D DCT-III in place.
    pub fn inverse(&self, data: &mut [f64]) {
        assert_eq!(data.len(), self.width * self.height);
        let mut t = transpose(data, self.width, self.height);
        self.cols.inverse_rows(&mut t);
        transpose_into(&t, self.height, self.width, data);
        self.rows.inverse_rows(data);
    }
}

const BLOCK: usize = 32;

fn transpose(src: &[f64], width: usize, height: usize) -> Vec<f64> {
    let mut dst = vec![0.0; src.len()];
    transpose_into(src, width, height, &mut dst);
    dst
}

/// `src` is `height` rows of `width`; `dst` becomes `width` rows of `height`.
fn transpose_into(src: &[f64], width: usize, height: usize, dst: &mut [f64]) {
    for by in (0..height).step_by(BLOCK) {
        for bx in (0..width).step_by(BLOCK) {
            for y in by..(by + BLOCK).min(height) {
                for x in bx..(bx + BLOCK).min(width) {
                    dst[x * height + y] = src[y * width + x];
                }
            }
        }
    }
}

/// Orthonormal 2-D DCT-II of a plane.
pub fn dct2(plane: &Plane) -> Plane {
    let mut data = plane.data().to_vec();
    DctPlan::new(plane.width(), plane.height()).forward(&mut data);
    Plane::from_raw(plane.width(), plane.height(), data)
}

/// Inverse of [`dct2`] (orthonormal 2-D DCT-III).
pub fn idct2(plane: &Plane) -> Plane {
    let mut data = plane.data().to_vec();
    DctPlan::new(plane.width(), plane.height()).inverse(&mut data);
    Plane::from_raw(plane.width(), plane.height(), data)
}

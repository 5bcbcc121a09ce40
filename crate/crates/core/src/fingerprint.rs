//! Saturation masks and per-temperature reference patterns.

use crate::error::{Error, Result};
use crate::filter::ResiduePlane;
use crate::frame_io::{Frame, ReferencePattern};

/// Pixels excluded from fingerprinting because they came close to full
/// scale in at least one frame of a set.
#[derive(Debug, Clone, PartialEq)]
pub struct SaturationMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
    threshold_fraction: f64,
}

impl SaturationMask {
    pub const DEFAULT_THRESHOLD: f64 = 0.95;

    /// A mask with no excluded pixels.
    pub fn empty(width: usize, height: usize, threshold_fraction: f64) -> Result<Self> {
        check_threshold(threshold_fraction)?;
        Ok(SaturationMask {
            width,
            height,
            bits: vec![false; width * height],
            threshold_fraction,
        })
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::InvalidParam(format!(
                "{} mask bits for a {width}x{height} frame",
                bits.len()
            )));
        }
        Ok(SaturationMask {
            width,
            height,
            bits,
            threshold_fraction: Self::DEFAULT_THRESHOLD,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn threshold_fraction(&self) -> f64 {
        self.threshold_fraction
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Marks every pixel of `frame` that strictly exceeds the threshold.
    pub fn accumulate(&mut self, frame: &Frame) -> Result<()> {
        if frame.dims() != self.dims() {
            return Err(Error::dims(self.dims(), frame.dims()));
        }
        let limit = self.threshold_fraction * f64::from(frame.full_scale());
        for (bit, &v) in self.bits.iter_mut().zip(frame.data()) {
            *bit |= f64::from(v) > limit;
        }
        Ok(())
    }

    /// Union of exclusions.
    pub fn union(&self, other: &SaturationMask) -> Result<SaturationMask> {
        if self.dims() != other.dims() {
            return Err(Error::dims(self.dims(), other.dims()));
        }
        Ok(SaturationMask {
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(a, b)| a | b)
                .collect(),
            ..self.clone()
        })
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!(
            "threshold fraction must lie in (0, 1), got {t}"
        )))
    }
}

/// Union-over-frames saturation mask: a pixel is excluded when its sample
/// exceeds `threshold_fraction × (2^bit_depth − 1)` in any frame.
pub fn saturation_mask(frames: &[Frame], threshold_fraction: f64) -> Result<SaturationMask> {
    let first = frames.first().ok_or(Error::EmptySet)?;
    let (w, h) = first.dims();
    let mut mask = SaturationMask::empty(w, h, threshold_fraction)?;
    for f in frames {
        if f.bit_depth() != first.bit_depth() {
            return Err(Error::DimensionMismatch {
                left: format!("{}-bit", first.bit_depth()),
                right: format!("{}-bit", f.bit_depth()),
            });
        }
        mask.accumulate(f)?;
    }
    Ok(mask)
}

/// Streaming per-pixel sum of residues, added in a fixed order.
#[derive(Debug, Clone)]
pub struct ReferenceAccumulator {
    width: usize,
    height: usize,
    sum: Vec<f64>,
    count: u32,
}

impl ReferenceAccumulator {
    pub fn new(width: usize, height: usize) -> Self {
        ReferenceAccumulator {
            width,
            height,
            sum: vec![0.0; width * height],
            count: 0,
        }
    }

    pub fn add(&mut self, residue: &ResiduePlane) -> Result<()> {
        if residue.dims() != (self.width, self.height) {
            return Err(Error::dims((self.width, self.height), residue.dims()));
        }
        for (s, v) in self.sum.iter_mut().zip(residue.data()) {
            *s += v;
        }
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> u32 {
        self.count
    }

    /// Mean residue with masked pixels zeroed, then zero-meaned over the
    /// unmasked pixels.
    pub fn finish(self, mask: &SaturationMask, temperature_c: f64) -> Result<ReferencePattern> {
        if self.count == 0 {
            return Err(Error::EmptySet);
        }
        if mask.dims() != (self.width, self.height) {
            return Err(Error::dims((self.width, self.height), mask.dims()));
        }
        let n = f64::from(self.count);
        let mut data: Vec<f64> = self
            .sum
            .iter()
            .zip(mask.bits())
            .map(|(&s, &m)| if m { 0.0 } else { s / n })
            .collect();
        let kept = mask.bits().iter().filter(|&&m| !m).count();
        if kept > 0 {
            let mean = data
                .iter()
                .zip(mask.bits())
                .filter(|(_, &m)| !m)
                .map(|(v, _)| v)
                .sum::<f64>()
                / kept as f64;
            for (v, &m) in data.iter_mut().zip(mask.bits()) {
                if !m {
                    *v -= mean;
                }
            }
        }
        ReferencePattern::new(
            self.width,
            self.height,
            data,
            mask.bits().to_vec(),
            self.count,
            temperature_c,
        )
    }
}

/// Averages residues into a zero-mean reference pattern.
pub fn build_reference(
    residues: &[ResiduePlane],
    mask: &SaturationMask,
    temperature_c: f64,
) -> Result<ReferencePattern> {
    let first = residues.first().ok_or(Error::EmptySet)?;
    let mut acc = ReferenceAccumulator::new(first.width(), first.height());
    for r in residues {
        acc.add(r)?;
    }
    acc.finish(mask, temperature_c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::Plane;

    #[test]
    fn full_scale_pixel_is_saturated() {
        let mut data = vec![0u16; 9];
        data[4] = 1023;
        data[5] = 971; // below 0.95 × 1023 = 971.85
        data[6] = 972;
        let f = Frame::new(3, 3, 10, data).unwrap();
        let m = saturation_mask(&[f], 0.95).unwrap();
        assert!(m.bits()[4]);
        assert!(!m.bits()[5]);
        assert!(m.bits()[6]);
        assert_eq!(m.count(), 2);
    }

    #[test]
    fn all_zero_frames_mask_nothing() {
        let frames = vec![Frame::new(4, 4, 12, vec![0; 16]).unwrap(); 3];
        assert_eq!(saturation_mask(&frames, 0.95).unwrap().count(), 0);
    }

    #[test]
    fn union_rule_over_frames() {
        // brute force over a 3×3 set: pixel saturated in frame 2 only
        let a = Frame::new(3, 3, 8, vec![10, 20, 30, 40, 50, 60, 70, 80, 90]).unwrap();
        let b = Frame::new(3, 3, 8, vec![10, 20, 30, 40, 250, 60, 70, 80, 90]).unwrap();
        let m = saturation_mask(&[a.clone(), b.clone()], 0.95).unwrap();
        let limit = 0.95 * 255.0;
        for i in 0..9 {
            let expect = [&a, &b].iter().any(|f| f64::from(f.data()[i]) > limit);
            assert_eq!(m.bits()[i], expect);
        }
        assert!(m.bits()[4]);
    }

    #[test]
    fn mask_errors() {
        assert!(matches!(saturation_mask(&[], 0.95), Err(Error::EmptySet)));
        let a = Frame::new(2, 2, 8, vec![0; 4]).unwrap();
        let b = Frame::new(2, 1, 8, vec![0; 2]).unwrap();
        let c = Frame::new(2, 2, 10, vec![0; 4]).unwrap();
        assert!(matches!(
            saturation_mask(&[a.clone(), b], 0.95),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            saturation_mask(&[a.clone(), c], 0.95),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(saturation_mask(std::slice::from_ref(&a), 1.0).is_err());
        assert!(saturation_mask(&[a], 0.0).is_err());
    }

    #[test]
    fn single_residue_is_zero_meaned() {
        let r = Plane::new(2, 2, vec![1.0, 2.0, 3.0, 6.0]).unwrap();
        let m = SaturationMask::empty(2, 2, 0.95).unwrap();
        let p = build_reference(&[r], &m, 30.0).unwrap();
        assert_eq!(p.data(), &[-2.0, -1.0, 0.0, 3.0]);
        assert_eq!(p.frame_count(), 1);
        assert_eq!(p.temperature_c(), 30.0);
    }

    #[test]
    fn symmetric_residues_cancel() {
        let r = Plane::new(3, 1, vec![1.5, -4.0, 0.25]).unwrap();
        let neg = Plane::new(3, 1, r.data().iter().map(|v| -v).collect()).unwrap();
        let m = SaturationMask::empty(3, 1, 0.95).unwrap();
        let p = build_reference(&[r, neg], &m, 10.0).unwrap();
        assert!(p.data().iter().all(|&v| v == 0.0));
        assert_eq!(p.frame_count(), 2);
    }

    #[test]
    fn masked_pixels_are_zero_and_excluded_from_mean() {
        let r = Plane::new(3, 1, vec![100.0, 1.0, 3.0]).unwrap();
        let m = SaturationMask::from_bits(3, 1, vec![true, false, false]).unwrap();
        let p = build_reference(&[r], &m, 0.0).unwrap();
        assert_eq!(p.data(), &[0.0, -1.0, 1.0]);
        assert_eq!(p.mask(), &[true, false, false]);
    }

    #[test]
    fn reference_errors() {
        let m = SaturationMask::empty(2, 2, 0.95).unwrap();
        assert!(matches!(
            build_reference(&[], &m, 0.0),
            Err(Error::EmptySet)
        ));
        let a = Plane::zeros(2, 2);
        let b = Plane::zeros(1, 2);
        assert!(matches!(
            build_reference(&[a.clone(), b], &m, 0.0),
            Err(Error::DimensionMismatch { .. })
        ));
        let m3 = SaturationMask::empty(3, 3, 0.95).unwrap();
        assert!(matches!(
            build_reference(&[a], &m3, 0.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}

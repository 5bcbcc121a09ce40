//! Raw frame loading and reference pattern persistence.
//!
//! Frames are read from binary PGM (`P5`) rasters. A frame may carry capture
//! metadata in a sidecar file next to it, named `<frame path>.meta`, holding
//! one `key=value` pair per line:
//!
//! ```text
//! # comment lines and blank lines are ignored
//! temperature_c=30.0
//! exposure_s=0.000992063
//! camera_id=cam01
//! lens_id=lens3
//! ```
//!
//! An optional `bit_depth` key narrows the depth inferred from the PGM
//! maxval, which is useful for 10- or 12-bit sensor data stored in 16-bit
//! containers.
//!
//! Reference patterns use the little-endian `DSNF` container:
//!
//! | offset | size | field |
//! |--------|------|-------|
//! | 0 | 4 | magic `DSNF` |
//! | 4 | 2 | version (u16, = 1) |
//! | 6 | 4 | width (u32) |
//! | 10 | 4 | height (u32) |
//! | 14 | 4 | frame count (u32) |
//! | 18 | 4 | temperature, centi-degrees Celsius (i32) |
//! | 22 | 4·w·h | pattern values, f32, row-major |
//! | … | ⌈w·h/8⌉ | mask bits, row-major, LSB first |

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const PATTERN_MAGIC: [u8; 4] = *b"DSNF";
pub const PATTERN_VERSION: u16 = 1;
pub const PATTERN_HEADER_LEN: usize = 22;

/// Optional capture metadata attached to a frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameMeta {
    pub temperature_c: Option<f64>,
    pub exposure_s: Option<f64>,
    pub camera_id: Option<String>,
    pub lens_id: Option<String>,
}

impl FrameMeta {
    pub fn is_empty(&self) -> bool {
        self == &FrameMeta::default()
    }
}

/// A single-plane integer raster with bit depth in `8..=16`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    bit_depth: u8,
    data: Vec<u16>,
    pub meta: FrameMeta,
}

impl Frame {
    pub fn new(width: usize, height: usize, bit_depth: u8, data: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if !(8..=16).contains(&bit_depth) {
            return Err(Error::InvalidFrame(format!(
                "bit depth {bit_depth} outside 8..=16"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidFrame(format!(
                "{} samples for a {width}x{height} frame",
                data.len()
            )));
        }
        let full = full_scale(bit_depth);
        if let Some(pos) = data.iter().position(|&v| u32::from(v) > full) {
            return Err(Error::InvalidFrame(format!(
                "sample {} at index {pos} exceeds {full} for {bit_depth}-bit data",
                data[pos]
            )));
        }
        Ok(Frame {
            width,
            height,
            bit_depth,
            data,
            meta: FrameMeta::default(),
        })
    }

    pub fn with_meta(mut self, meta: FrameMeta) -> Self {
        self.meta = meta;
        self
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

    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    /// Largest representable sample, `2^bit_depth - 1`.
    pub fn full_scale(&self) -> u32 {
        full_scale(self.bit_depth)
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.data[y * self.width + x]
    }

    /// Samples converted to `f64`, row-major.
    pub fn to_reals(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v)).collect()
    }
}

pub(crate) fn full_scale(bit_depth: u8) -> u32 {
    (1u32 << bit_depth) - 1
}

/// Path of the metadata sidecar for a frame file.
pub fn meta_path(frame_path: &Path) -> PathBuf {
    let mut s = frame_path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// Loads a binary PGM frame and its optional `.meta` sidecar.
pub fn load_frame(path: impl AsRef<Path>) -> Result<Frame> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut frame = decode_pgm(&bytes)?;
    let sidecar = meta_path(path);
    if sidecar.exists() {
        let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let (meta, depth) = parse_meta(&text)?;
        frame.meta = meta;
        if let Some(depth) = depth {
            frame = narrow_bit_depth(frame, depth)?;
        }
    }
    Ok(frame)
}

/// Writes a frame as binary PGM (maxval `2^bit_depth - 1`) plus a sidecar
/// when the frame carries metadata.
pub fn save_frame(frame: &Frame, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(frame)).map_err(|e| Error::io(path, e))?;
    if !frame.meta.is_empty() {
        let sidecar = meta_path(path);
        fs::write(&sidecar, format_meta(&frame.meta)).map_err(|e| Error::io(&sidecar, e))?;
    }
    Ok(())
}

pub fn encode_pgm(frame: &Frame) -> Vec<u8> {
    let full = frame.full_scale();
    let mut out = format!("P5\n{} {}\n{}\n", frame.width, frame.height, full).into_bytes();
    if full <= 255 {
        out.extend(frame.data.iter().map(|&v| v as u8));
    } else {
        out.reserve(frame.data.len() * 2);
        for &v in &frame.data {
            out.extend_from_slice(&v.to_be_bytes());
        }
    }
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Frame> {
    let mut cursor = HeaderCursor { bytes, pos: 0 };
    let magic = cursor.token()?;
    if magic != b"P5" {
        return Err(Error::MalformedHeader(format!(
            "expected P5 magic, found {:?}",
            String::from_utf8_lossy(magic)
        )));
    }
    let width = cursor.number("width")?;
    let height = cursor.number("height")?;
    let maxval = cursor.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(cursor.pos) {
        Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
        _ => return Err(Error::MalformedHeader("missing raster separator".into())),
    }
    let bit_depth = (8..=16u8)
        .find(|&b| full_scale(b) == maxval as u32)
        .ok_or(Error::UnsupportedMaxval(maxval as u32))?;
    let (width, height) = (width as usize, height as usize);
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::MalformedHeader("dimensions overflow".into()))?;
    let bytes_per_sample = if maxval <= 255 { 1 } else { 2 };
    let expected = n * bytes_per_sample;
    let raster = &bytes[cursor.pos..];
    if raster.len() < expected {
        return Err(Error::TruncatedData {
            expected,
            found: raster.len(),
        });
    }
    let data: Vec<u16> = if bytes_per_sample == 1 {
        raster[..n].iter().map(|&b| u16::from(b)).collect()
    } else {
        raster[..expected]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    if let Some(&v) = data.iter().find(|&&v| u64::from(v) > maxval) {
        return Err(Error::InvalidFrame(format!(
            "sample {v} exceeds maxval {maxval}"
        )));
    }
    Frame::new(width, height, bit_depth, data)
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() || b == b'#' {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::MalformedHeader("unexpected end of header".into()));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<u64> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .filter(|s| s.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|s| s.parse::<u64>().ok())
            .filter(|&v| v <= u64::from(u32::MAX))
            .ok_or_else(|| {
                Error::MalformedHeader(format!(
                    "bad {what} token {:?}",
                    String::from_utf8_lossy(tok)
                ))
            })
    }
}

/// Parses sidecar metadata, returning the optional `bit_depth` override
/// separately.
pub fn parse_meta(text: &str) -> Result<(FrameMeta, Option<u8>)> {
    let mut meta = FrameMeta::default();
    let mut depth = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| Error::MalformedMeta {
            line: i + 1,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("expected key=value, found {line:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        let real = |v: &str| {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| bad(format!("{key}: not a finite number: {v:?}")))
        };
        match key {
            "temperature_c" => meta.temperature_c = Some(real(value)?),
            "exposure_s" => meta.exposure_s = Some(real(value)?),
            "camera_id" => meta.camera_id = Some(value.to_string()),
            "lens_id" => meta.lens_id = Some(value.to_string()),
            "bit_depth" => {
                depth = Some(
                    value
                        .parse::<u8>()
                        .ok()
                        .filter(|d| (8..=16).contains(d))
                        .ok_or_else(|| bad(format!("bit_depth must be 8..=16, got {value:?}")))?,
                )
            }
            _ => {}
        }
    }
    Ok((meta, depth))
}

pub fn format_meta(meta: &FrameMeta) -> String {
    let mut out = String::new();
    if let Some(t) = meta.temperature_c {
        out.push_str(&format!("temperature_c={t}\n"));
    }
    if let Some(e) = meta.exposure_s {
        out.push_str(&format!("exposure_s={e}\n"));
    }
    if let Some(c) = &meta.camera_id {
        out.push_str(&format!("camera_id={c}\n"));
    }
    if let Some(l) = &meta.lens_id {
        out.push_str(&format!("lens_id={l}\n"));
    }
    out
}

fn narrow_bit_depth(frame: Frame, depth: u8) -> Result<Frame> {
    if depth > frame.bit_depth {
        return Err(Error::InvalidFrame(format!(
            "sidecar bit_depth {depth} exceeds container depth {}",
            frame.bit_depth
        )));
    }
    let meta = frame.meta.clone();
    Ok(Frame::new(frame.width, frame.height, depth, frame.data)?.with_meta(meta))
}

/// An averaged dark-current residue with its exclusion mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePattern {
    width: usize,
    height: usize,
    data: Vec<f64>,
    mask: Vec<bool>,
    frame_count: u32,
    temperature_c: f64,
}

impl ReferencePattern {
    /// Validates the invariants: matching lengths, finite values, zero at
    /// every masked position, and at least one averaged frame.
    pub fn new(
        width: usize,
        height: usize,
        data: Vec<f64>,
        mask: Vec<bool>,
        frame_count: u32,
        temperature_c: f64,
    ) -> Result<Self> {
        let n = width * height;
        if width == 0 || height == 0 {
            return Err(Error::InvalidPattern(format!(
                "zero dimension {width}x{height}"
            )));
        }
        if data.len() != n || mask.len() != n {
            return Err(Error::InvalidPattern(format!(
                "expected {n} values and mask bits, got {} and {}",
                data.len(),
                mask.len()
            )));
        }
        if frame_count == 0 {
            return Err(Error::InvalidPattern("frame_count must be >= 1".into()));
        }
        if !temperature_c.is_finite() {
            return Err(Error::InvalidPattern("temperature must be finite".into()));
        }
        for (i, (&v, &m)) in data.iter().zip(&mask).enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidPattern(format!("non-finite value at {i}")));
            }
            if m && v != 0.0 {
                return Err(Error::InvalidPattern(format!(
                    "masked position {i} carries nonzero value {v}"
                )));
            }
        }
        Ok(ReferencePattern {
            width,
            height,
            data,
            mask,
            frame_count,
            temperature_c,
        })
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

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn frame_count(&self) -> u32 {
        self.frame_count
    }

    pub fn temperature_c(&self) -> f64 {
        self.temperature_c
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Serializes into the `DSNF` container. Values are narrowed to `f32`
    /// and the temperature to centi-degrees.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let dim = |v: usize, what: &str| {
            u32::try_from(v).map_err(|_| Error::InvalidPattern(format!("{what} {v} exceeds u32")))
        };
        let centi = (self.temperature_c * 100.0).round();
        if !(f64::from(i32::MIN)..=f64::from(i32::MAX)).contains(&centi) {
            return Err(Error::InvalidPattern(format!(
                "temperature {} out of range",
                self.temperature_c
            )));
        }
        let n = self.data.len();
        let mut out = Vec::with_capacity(PATTERN_HEADER_LEN + 4 * n + n.div_ceil(8));
        out.extend_from_slice(&PATTERN_MAGIC);
        out.extend_from_slice(&PATTERN_VERSION.to_le_bytes());
        out.extend_from_slice(&dim(self.width, "width")?.to_le_bytes());
        out.extend_from_slice(&dim(self.height, "height")?.to_le_bytes());
        out.extend_from_slice(&self.frame_count.to_le_bytes());
        out.extend_from_slice(&(centi as i32).to_le_bytes());
        for &v in &self.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out.extend(pack_bits(&self.mask));
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::TruncatedData {
                expected: PATTERN_HEADER_LEN,
                found: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if magic != PATTERN_MAGIC {
            return Err(Error::BadMagic(magic));
        }
        if bytes.len() < PATTERN_HEADER_LEN {
            return Err(Error::TruncatedData {
                expected: PATTERN_HEADER_LEN,
                found: bytes.len(),
            });
        }
        let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != PATTERN_VERSION {
            return Err(Error::VersionMismatch(version));
        }
        let width = u32_at(6) as usize;
        let height = u32_at(10) as usize;
        let frame_count = u32_at(14);
        let centi = i32::from_le_bytes(bytes[18..22].try_into().unwrap());
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Error::InvalidPattern("dimensions overflow".into()))?;
        let expected = PATTERN_HEADER_LEN + 4 * n + n.div_ceil(8);
        if bytes.len() < expected {
            return Err(Error::TruncatedData {
                expected,
                found: bytes.len(),
            });
        }
        if bytes.len() > expected {
            return Err(Error::InvalidPattern(format!(
                "{} trailing bytes",
                bytes.len() - expected
            )));
        }
        let body = &bytes[PATTERN_HEADER_LEN..PATTERN_HEADER_LEN + 4 * n];
        let data = body
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        let mask = unpack_bits(&bytes[PATTERN_HEADER_LEN + 4 * n..], n);
        ReferencePattern::new(
            width,
            height,
            data,
            mask,
            frame_count,
            f64::from(centi) / 100.0,
        )
    }
}

fn pack_bits(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
        out[i / 8] |= 1 << (i % 8);
    }
    out
}

fn unpack_bits(bytes: &[u8], n: usize) -> Vec<bool> {
    (0..n).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect()
}

pub fn save_pattern(pattern: &ReferencePattern, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, pattern.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn load_pattern(path: impl AsRef<Path>) -> Result<ReferencePattern> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    ReferencePattern::from_bytes(&bytes)
}

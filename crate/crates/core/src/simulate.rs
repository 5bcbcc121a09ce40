//! Seeded physical sensor model producing dark frames and flat fields.
//!
//! Each pixel collects dark electrons at `d(x,y)·j0·T²·e^{−ΔE/kT}` per second
//! and, under illumination, photo-electrons at `K(x,y)·L`. The sum is
//! shot-noise sampled, read noise is added, the well clips at `n_max` and the
//! result is quantized to `bit_depth` bits with no black-level offset.
//!
//! Randomness is ChaCha8 throughout. The fixed-pattern maps come from one
//! stream derived from the seed. Temporal noise for a capture comes from one
//! stream per image row, keyed by `(seed, frame_index, row)`, so frames are
//! reproducible and independent of how rows are scheduled across threads.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame_io::{Frame, FrameMeta};
use crate::thermal::{celsius_to_kelvin, BOLTZMANN_EV};

/// Exposure used for every capture in the reference protocol, seconds.
pub const DEFAULT_EXPOSURE_S: f64 = 1.0 / 1008.0;
/// Pattern temperatures of the reference protocol, °C.
pub const PROTOCOL_TEMPERATURES_C: [f64; 9] =
    [10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0];
/// Dark frames per pattern in the reference protocol.
pub const PROTOCOL_FRAMES_PER_SET: usize = 100;
/// Above this mean, shot noise is drawn from a normal approximation.
pub const POISSON_GAUSSIAN_CUTOVER: f64 = 1000.0;

pub const MIN_TEMPERATURE_C: f64 = -50.0;
pub const MAX_TEMPERATURE_C: f64 = 120.0;
pub const MAX_HOT_PIXEL_FRACTION: f64 = 0.05;

const PROFILE_VERSION: u32 = 1;
const MAP_DOMAIN: u64 = 0x6d61_7073;
const FRAME_DOMAIN: u64 = 0x6672_616d;

/// Generation parameters for a [`SensorProfile`].
#[derive(Debug, Clone, PartialEq)]
pub struct SensorParams {
    pub width: usize,
    pub height: usize,
    pub bit_depth: u8,
    /// Well capacity, electrons.
    pub n_max: f64,
    /// Dark generation prefactor, electrons/(s·K²).
    pub j0: f64,
    pub delta_e_ev: f64,
    /// Log-domain spread of the dark-rate multipliers.
    pub dark_sigma_ln: f64,
    /// Relative spread of the photo-response gain.
    pub prnu_sigma: f64,
    pub hot_pixel_fraction: f64,
    /// Read noise, electrons RMS.
    pub read_noise_e: f64,
    pub seed: u64,
    pub camera_id: String,
}

impl Default for SensorParams {
    /// A small-pixel 10-bit sensor: 4000 e⁻ well, 2.2 e⁻ read noise,
    /// 0.19 eV activation energy and 1000 e⁻/s median dark rate at 30 °C.
    fn default() -> Self {
        SensorParams {
            width: 256,
            height: 256,
            bit_depth: 10,
            n_max: 4000.0,
            j0: 0.0,
            delta_e_ev: 0.19,
            dark_sigma_ln: 0.4,
            prnu_sigma: 0.01,
            hot_pixel_fraction: 0.001,
            read_noise_e: 2.2,
            seed: 0,
            camera_id: "sim".into(),
        }
        .with_dark_rate_at(1000.0, 30.0)
    }
}

impl SensorParams {
    /// Sets `j0` so the median pixel generates `rate_e_per_s` at `temperature_c`
    /// under the current activation energy.
    pub fn with_dark_rate_at(mut self, rate_e_per_s: f64, temperature_c: f64) -> Self {
        let t = celsius_to_kelvin(temperature_c);
        self.j0 = rate_e_per_s / (t * t * (-self.delta_e_ev / (BOLTZMANN_EV * t)).exp());
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_size(mut self, width: usize, height: usize) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(m));
        if self.width == 0 || self.height == 0 {
            return bad(format!("sensor size {}x{}", self.width, self.height));
        }
        if !(8..=16).contains(&self.bit_depth) {
            return bad(format!("bit depth {} outside 8..=16", self.bit_depth));
        }
        for (name, v) in [("n_max", self.n_max), ("j0", self.j0)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("delta_e_ev", self.delta_e_ev),
            ("dark_sigma_ln", self.dark_sigma_ln),
            ("prnu_sigma", self.prnu_sigma),
            ("read_noise_e", self.read_noise_e),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(0.0..=MAX_HOT_PIXEL_FRACTION).contains(&self.hot_pixel_fraction) {
            return bad(format!(
                "hot pixel fraction {} outside [0, {MAX_HOT_PIXEL_FRACTION}]",
                self.hot_pixel_fraction
            ));
        }
        if self.camera_id.contains(['\n', '\r']) {
            return bad("camera id must be a single line".into());
        }
        Ok(())
    }
}

/// A simulated sensor: parameters plus its fixed-pattern maps.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorProfile {
    params: SensorParams,
    dark_map: Vec<f32>,
    prnu_map: Vec<f32>,
    hot: Vec<bool>,
}

impl SensorProfile {
    /// Draws the fixed-pattern maps from the parameter seed.
    pub fn generate(params: SensorParams) -> Result<Self> {
        params.validate()?;
        let n = params.width * params.height;
        let mut rng = ChaCha8Rng::from_seed(derive_key(&[params.seed, MAP_DOMAIN]));
        let dark_map = (0..n)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                (params.dark_sigma_ln * z).exp() as f32
            })
            .collect();
        let prnu_map = (0..n)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                // keeps K > 0 for absurd spreads
                (1.0 + params.prnu_sigma * z).max(1e-3) as f32
            })
            .collect();
        let hot = (0..n)
            .map(|_| rng.random::<f64>() < params.hot_pixel_fraction)
            .collect();
        Ok(SensorProfile {
            params,
            dark_map,
            prnu_map,
            hot,
        })
    }

    pub fn params(&self) -> &SensorParams {
        &self.params
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.params.width, self.params.height)
    }

    /// Per-pixel dark-rate multipliers `d(x, y)`.
    pub fn dark_map(&self) -> &[f32] {
        &self.dark_map
    }

    /// Per-pixel photo-response gains `K(x, y)`.
    pub fn prnu_map(&self) -> &[f32] {
        &self.prnu_map
    }

    pub fn hot_pixels(&self) -> &[bool] {
        &self.hot
    }

    /// Median-pixel dark generation rate, electrons/s.
    pub fn dark_rate(&self, temperature_c: f64) -> f64 {
        let t = celsius_to_kelvin(temperature_c);
        self.params.j0 * t * t * (-self.params.delta_e_ev / (BOLTZMANN_EV * t)).exp()
    }

    /// Expected pre-noise electrons of pixel `i`, before clipping.
    pub fn expected_electrons(
        &self,
        i: usize,
        temperature_c: f64,
        exposure_s: f64,
        illuminance: f64,
    ) -> f64 {
        let dark = f64::from(self.dark_map[i]) * self.dark_rate(temperature_c) * exposure_s;
        let photo = f64::from(self.prnu_map[i]) * illuminance * exposure_s;
        photo + dark
    }

    /// DN per electron.
    pub fn conversion_gain(&self) -> f64 {
        f64::from(full_scale(self.params.bit_depth)) / self.params.n_max
    }
}

fn full_scale(bit_depth: u8) -> u32 {
    (1u32 << bit_depth) - 1
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 256-bit ChaCha key from a list of words.
fn derive_key(words: &[u64]) -> [u8; 32] {
    let mut state = 0u64;
    for &w in words {
        state ^= w;
        splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// Shot-noise sample of a pixel with expected count `mean`.
pub fn sample_electrons<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    if mean <= 0.0 {
        0.0
    } else if mean > POISSON_GAUSSIAN_CUTOVER {
        let z: f64 = rng.sample(StandardNormal);
        (mean + mean.sqrt() * z).round().max(0.0)
    } else {
        Poisson::new(mean)
            .expect("positive finite mean")
            .sample(rng)
    }
}

fn check_capture(temperature_c: f64, exposure_s: f64, illuminance: f64) -> Result<()> {
    if !(MIN_TEMPERATURE_C..=MAX_TEMPERATURE_C).contains(&temperature_c) {
        return Err(Error::InvalidParam(format!(
            "temperature {temperature_c} °C outside [{MIN_TEMPERATURE_C}, {MAX_TEMPERATURE_C}]"
        )));
    }
    if !(exposure_s > 0.0 && exposure_s.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "exposure must be positive, got {exposure_s}"
        )));
    }
    if !(illuminance >= 0.0 && illuminance.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "illuminance must be non-negative, got {illuminance}"
        )));
    }
    Ok(())
}

fn capture(
    p: &SensorProfile,
    temperature_c: f64,
    exposure_s: f64,
    illuminance: f64,
    frame_index: u64,
) -> Result<Frame> {
    check_capture(temperature_c, exposure_s, illuminance)?;
    let params = &p.params;
    let (w, h) = p.dims();
    let fs = full_scale(params.bit_depth);
    let gain = p.conversion_gain();
    let dark_e = p.dark_rate(temperature_c) * exposure_s;
    let photo_e = illuminance * exposure_s;
    let read = Normal::new(0.0, params.read_noise_e).expect("validated read noise");
    let key = derive_key(&[params.seed, FRAME_DOMAIN, frame_index]);

    let mut data = vec![0u16; w * h];
    data.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(y as u64);
        for (x, out) in row.iter_mut().enumerate() {
            let i = y * w + x;
            let mean = f64::from(p.prnu_map[i]) * photo_e + f64::from(p.dark_map[i]) * dark_e;
            let mut e = sample_electrons(mean, &mut rng);
            if params.read_noise_e > 0.0 {
                e += read.sample(&mut rng);
            }
            let e = if p.hot[i] {
                params.n_max
            } else {
                e.clamp(0.0, params.n_max)
            };
            *out = (e * gain).round().min(f64::from(fs)) as u16;
        }
    });

    let meta = FrameMeta {
        temperature_c: Some(temperature_c),
        exposure_s: Some(exposure_s),
        camera_id: Some(params.camera_id.clone()),
        lens_id: None,
    };
    Ok(Frame::new(w, h, params.bit_depth, data)?.with_meta(meta))
}

/// A dark frame. `frame_index` selects the temporal-noise stream; use a
/// distinct index for every capture that should have independent noise.
pub fn capture_dark(
    p: &SensorProfile,
    temperature_c: f64,
    exposure_s: f64,
    frame_index: u64,
) -> Result<Frame> {
    capture(p, temperature_c, exposure_s, 0.0, frame_index)
}

/// A uniformly illuminated frame; `illuminance` is photons per pixel per
/// second reaching a unit-gain pixel.
pub fn capture_flat(
    p: &SensorProfile,
    temperature_c: f64,
    exposure_s: f64,
    illuminance: f64,
    frame_index: u64,
) -> Result<Frame> {
    capture(p, temperature_c, exposure_s, illuminance, frame_index)
}

/// Frame index for capture `frame` of capture set `set`.
pub fn capture_index(set: u32, frame: u32) -> u64 {
    (u64::from(set) << 32) | u64::from(frame)
}

/// Paths written by [`save_profile`] for a given stem.
pub fn profile_paths(stem: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let with = |ext: &str| {
        let mut s = stem.as_os_str().to_owned();
        s.push(ext);
        PathBuf::from(s)
    };
    (with(".profile"), with(".dark.f32"), with(".prnu.f32"))
}

/// Writes `<stem>.profile` (key=value text) plus the two maps as raw
/// little-endian float32 in row-major order.
pub fn save_profile(p: &SensorProfile, stem: impl AsRef<Path>) -> Result<()> {
    let (text_path, dark_path, prnu_path) = profile_paths(stem.as_ref());
    let file_name = |path: &Path| {
        path.file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    };
    let q = &p.params;
    let mut text = String::new();
    let hot: Vec<String> = p
        .hot
        .iter()
        .enumerate()
        .filter(|(_, &h)| h)
        .map(|(i, _)| i.to_string())
        .collect();
    let _ = writeln!(text, "version={PROFILE_VERSION}");
    let _ = writeln!(text, "width={}", q.width);
    let _ = writeln!(text, "height={}", q.height);
    let _ = writeln!(text, "bit_depth={}", q.bit_depth);
    let _ = writeln!(text, "n_max={}", q.n_max);
    let _ = writeln!(text, "j0={}", q.j0);
    let _ = writeln!(text, "delta_e_ev={}", q.delta_e_ev);
    let _ = writeln!(text, "dark_sigma_ln={}", q.dark_sigma_ln);
    let _ = writeln!(text, "prnu_sigma={}", q.prnu_sigma);
    let _ = writeln!(text, "hot_pixel_fraction={}", q.hot_pixel_fraction);
    let _ = writeln!(text, "read_noise_e={}", q.read_noise_e);
    let _ = writeln!(text, "seed={}", q.seed);
    let _ = writeln!(text, "camera_id={}", q.camera_id);
    let _ = writeln!(text, "hot_pixels={}", hot.join(","));
    let _ = writeln!(text, "dark_map={}", file_name(&dark_path));
    let _ = writeln!(text, "prnu_map={}", file_name(&prnu_path));
    fs::write(&text_path, text).map_err(|e| Error::io(&text_path, e))?;
    fs::write(&dark_path, f32_bytes(&p.dark_map)).map_err(|e| Error::io(&dark_path, e))?;
    fs::write(&prnu_path, f32_bytes(&p.prnu_map)).map_err(|e| Error::io(&prnu_path, e))?;
    Ok(())
}

fn f32_bytes(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn read_f32_map(path: &Path, n: usize) -> Result<Vec<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != 4 * n {
        return Err(Error::TruncatedData {
            expected: 4 * n,
            found: bytes.len(),
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Reads a profile written by [`save_profile`]. Map file names are
/// resolved relative to the profile text file.
pub fn load_profile(profile_path: impl AsRef<Path>) -> Result<SensorProfile> {
    let path = profile_path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut kv = std::collections::BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::MalformedMeta {
            line: i + 1,
            message: format!("expected key=value, got {line:?}"),
        })?;
        kv.insert(k.trim().to_string(), (i + 1, v.trim().to_string()));
    }
    fn field<T: std::str::FromStr>(
        kv: &std::collections::BTreeMap<String, (usize, String)>,
        key: &str,
    ) -> Result<T> {
        let (line, v) = kv.get(key).ok_or_else(|| Error::MalformedMeta {
            line: 0,
            message: format!("missing key {key}"),
        })?;
        v.parse().map_err(|_| Error::MalformedMeta {
            line: *line,
            message: format!("bad value {v:?} for {key}"),
        })
    }
    let version: u32 = field(&kv, "version")?;
    if version != PROFILE_VERSION {
        return Err(Error::MalformedMeta {
            line: kv["version"].0,
            message: format!("unsupported profile version {version}"),
        });
    }
    let params = SensorParams {
        width: field(&kv, "width")?,
        height: field(&kv, "height")?,
        bit_depth: field(&kv, "bit_depth")?,
        n_max: field(&kv, "n_max")?,
        j0: field(&kv, "j0")?,
        delta_e_ev: field(&kv, "delta_e_ev")?,
        dark_sigma_ln: field(&kv, "dark_sigma_ln")?,
        prnu_sigma: field(&kv, "prnu_sigma")?,
        hot_pixel_fraction: field(&kv, "hot_pixel_fraction")?,
        read_noise_e: field(&kv, "read_noise_e")?,
        seed: field(&kv, "seed")?,
        camera_id: field(&kv, "camera_id")?,
    };
    params.validate()?;
    let n = params.width * params.height;
    let dir = path.parent().unwrap_or(Path::new(""));
    let dark_map = read_f32_map(&dir.join(field::<String>(&kv, "dark_map")?), n)?;
    let prnu_map = read_f32_map(&dir.join(field::<String>(&kv, "prnu_map")?), n)?;
    if dark_map
        .iter()
        .chain(&prnu_map)
        .any(|v| !(*v > 0.0 && v.is_finite()))
    {
        return Err(Error::InvalidParam(
            "maps must be positive and finite".into(),
        ));
    }
    let mut hot = vec![false; n];
    let hot_line = kv.get("hot_pixels").map(|(l, v)| (*l, v.as_str()));
    if let Some((line, list)) = hot_line.filter(|(_, v)| !v.is_empty()) {
        for item in list.split(',') {
            let i: usize = item.trim().parse().ok().filter(|&i| i < n).ok_or_else(|| {
                Error::MalformedMeta {
                    line,
                    message: format!("bad hot pixel index {item:?}"),
                }
            })?;
            hot[i] = true;
        }
    }
    Ok(SensorProfile {
        params,
        dark_map,
        prnu_map,
        hot,
    })
}

//! Command-line driver for the dsnprint pipeline.
//!
//! Every subcommand reads its inputs from disk and writes deterministic
//! artifacts: PGM frames, `DSNF` residue and pattern files, CSV tables and
//! JSON fits. Parallel stages run on a rayon pool sized by `--threads`; the
//! bytes written do not depend on the pool size.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use dsnprint::filter::{DctFilter, DctFilterSpec, ResiduePlane, WaveletFilter};
use dsnprint::frame_io::Frame;

mod commands;
pub mod error;

pub use commands::benchmark::{run_benchmark, BenchmarkRow};
pub use error::{CliError, CliResult, EXIT_DATA, EXIT_USAGE};

/// A fully specified invocation.
#[derive(Debug, Clone, Parser)]
#[command(
    name = "dsnprint",
    version,
    about = "Dark-current sensor fingerprinting"
)]
pub struct RunManifest {
    #[command(subcommand)]
    pub command: Command,

    /// Worker threads for parallel stages (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Generate a simulated sensor with dark-frame sets and flat-field queries.
    #[command(allow_negative_numbers = true)]
    Simulate(SimulateArgs),
    /// Extract noise residues from PGM frames.
    #[command(allow_negative_numbers = true)]
    Residue(ResidueArgs),
    /// Average dark-frame residues into a reference pattern.
    #[command(allow_negative_numbers = true)]
    Fingerprint(FingerprintArgs),
    /// Correlate query residues against reference patterns.
    #[command(allow_negative_numbers = true)]
    Correlate(CorrelateArgs),
    /// Fit the exponential thermal model to a correlation table.
    #[command(allow_negative_numbers = true)]
    Fit(FitArgs),
    /// Identify the capture temperature from a correlation table.
    #[command(allow_negative_numbers = true)]
    EstimateTemp(EstimateArgs),
    /// Time the wavelet and DCT filters on a directory of frames.
    #[command(allow_negative_numbers = true)]
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FilterChoice {
    Dct,
    Wavelet,
}

/// Parameters of both residue filters.
#[derive(Debug, Clone, Args)]
pub struct FilterParams {
    /// DCT high-pass cutoff as a multiple of π radians/sample.
    #[arg(long, default_value_t = 150.0 / 1136.0)]
    pub cutoff: f64,
    /// Wavelet noise variance (default scales 9 at 8 bits by 4 per extra bit).
    #[arg(long)]
    pub sigma0_sq: Option<f64>,
    /// Wavelet decomposition levels.
    #[arg(long, default_value_t = WaveletFilter::DEFAULT_LEVELS)]
    pub levels: usize,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams {
            cutoff: 150.0 / 1136.0,
            sigma0_sq: None,
            levels: WaveletFilter::DEFAULT_LEVELS,
        }
    }
}

impl FilterParams {
    pub fn dct_spec(&self) -> CliResult<DctFilterSpec> {
        DctFilterSpec::new(self.cutoff * std::f64::consts::PI)
            .map_err(|e| CliError::Usage(format!("--cutoff: {e}")))
    }

    pub fn wavelet(&self, bit_depth: u8) -> CliResult<WaveletFilter> {
        let default = WaveletFilter::for_bit_depth(bit_depth).sigma0_sq();
        WaveletFilter::new(self.sigma0_sq.unwrap_or(default), self.levels)
            .map_err(|e| CliError::Usage(format!("wavelet parameters: {e}")))
    }
}

#[derive(Debug, Clone, Args)]
pub struct FilterArgs {
    /// Residue filter.
    #[arg(long, value_enum, default_value_t = FilterChoice::Dct)]
    pub filter: FilterChoice,
    #[command(flatten)]
    pub params: FilterParams,
}

impl Default for FilterArgs {
    fn default() -> Self {
        FilterArgs {
            filter: FilterChoice::Dct,
            params: FilterParams::default(),
        }
    }
}

/// A residue filter prepared for one frame geometry.
pub enum Extractor {
    Dct(Box<DctFilter>),
    Wavelet(WaveletFilter),
}

impl Extractor {
    pub fn for_frame(args: &FilterArgs, frame: &Frame) -> CliResult<Self> {
        Ok(match args.filter {
            FilterChoice::Dct => Extractor::Dct(Box::new(DctFilter::new(
                args.params.dct_spec()?,
                frame.width(),
                frame.height(),
            ))),
            FilterChoice::Wavelet => Extractor::Wavelet(args.params.wavelet(frame.bit_depth())?),
        })
    }

    pub fn residue(&self, frame: &Frame) -> dsnprint::Result<ResiduePlane> {
        match self {
            Extractor::Dct(f) => f.residue(frame),
            Extractor::Wavelet(f) => Ok(f.residue(frame)),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 256)]
    pub width: usize,
    #[arg(long, default_value_t = 256)]
    pub height: usize,
    #[arg(long, default_value_t = 10)]
    pub bit_depth: u8,
    /// Activation energy, eV.
    #[arg(long, default_value_t = 0.19)]
    pub delta_e: f64,
    /// Median dark generation at 30 °C, electrons/s.
    #[arg(long, default_value_t = 1000.0)]
    pub dark_rate: f64,
    /// Well capacity, electrons.
    #[arg(long, default_value_t = 4000.0)]
    pub n_max: f64,
    /// Read noise, electrons RMS.
    #[arg(long, default_value_t = 2.2)]
    pub read_noise: f64,
    #[arg(long, default_value_t = 0.001)]
    pub hot_fraction: f64,
    /// Dark-set temperatures, °C.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = dsnprint::simulate::PROTOCOL_TEMPERATURES_C)]
    pub temps: Vec<f64>,
    /// Dark frames per temperature.
    #[arg(long, default_value_t = dsnprint::simulate::PROTOCOL_FRAMES_PER_SET)]
    pub frames: usize,
    /// Exposure, seconds.
    #[arg(long, default_value_t = dsnprint::simulate::DEFAULT_EXPOSURE_S)]
    pub exposure: f64,
    /// Capture temperature of the flat-field queries, °C.
    #[arg(long, default_value_t = 30.0)]
    pub query_temp: f64,
    /// Number of flat-field queries.
    #[arg(long, default_value_t = 100)]
    pub queries: usize,
    /// Mean photo-signal of the flat fields as a fraction of the well.
    #[arg(long, default_value_t = 0.5)]
    pub flat_level: f64,
    #[arg(long, default_value = "sim")]
    pub camera_id: String,
    /// Lens identifier recorded in query metadata.
    #[arg(long)]
    pub lens_id: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ResidueArgs {
    /// PGM frames.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Output directory; each input `x.pgm` becomes `x.res`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub filter: FilterArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FingerprintArgs {
    /// Dark PGM frames from one camera at one temperature.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Output pattern file.
    #[arg(long)]
    pub out: PathBuf,
    /// Pattern temperature, °C (default: from frame metadata).
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Saturation threshold as a fraction of full scale.
    #[arg(long, default_value_t = 0.95)]
    pub sat_threshold: f64,
    #[command(flatten)]
    pub filter: FilterArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CorrelateArgs {
    /// Query residue files (`.res`) or PGM frames.
    #[arg(required = true)]
    pub queries: Vec<PathBuf>,
    /// Reference pattern files.
    #[arg(long = "pattern", required = true)]
    pub patterns: Vec<PathBuf>,
    /// Output CSV (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Saturation threshold applied to PGM queries.
    #[arg(long, default_value_t = 0.95)]
    pub sat_threshold: f64,
    #[command(flatten)]
    pub filter: FilterArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Correlation CSV written by `correlate`.
    pub input: PathBuf,
    /// Output JSON (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Only use rows with this camera id.
    #[arg(long)]
    pub camera: Option<String>,
    /// Reference temperature for the activation energy, kelvin.
    #[arg(long, default_value_t = dsnprint::thermal::DEFAULT_T_REF_K)]
    pub t_ref_k: f64,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    /// Correlation CSV written by `correlate`.
    pub input: PathBuf,
    /// Output JSON (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Only use rows with this camera id.
    #[arg(long)]
    pub camera: Option<String>,
    /// Breakpoint grid step, °C.
    #[arg(long, default_value_t = dsnprint::thermal::DEFAULT_GRID_STEP_C)]
    pub grid_step: f64,
    #[arg(long, default_value_t = dsnprint::thermal::DEFAULT_T_REF_K)]
    pub t_ref_k: f64,
    /// Half width of the reported temperature range, °C.
    #[arg(long, default_value_t = dsnprint::thermal::FORENSIC_HALF_WIDTH_C)]
    pub forensic_halfwidth: f64,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    /// Directory of PGM frames.
    pub frames: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub repetitions: usize,
    /// Also time both filters across the thread pool.
    #[arg(long)]
    pub parallel: bool,
    /// Output CSV (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub params: FilterParams,
}

/// What a successful command produced.
#[derive(Debug, Default)]
pub struct Outcome {
    /// Files written, in creation order.
    pub written: Vec<PathBuf>,
    /// Text destined for standard output.
    pub stdout: String,
}

impl Outcome {
    /// Writes `bytes` to `out`, or keeps them for stdout when `out` is `None`.
    pub(crate) fn emit(&mut self, out: Option<&Path>, bytes: Vec<u8>) -> CliResult<()> {
        match out {
            Some(path) => {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
                }
                std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))?;
                self.written.push(path.to_path_buf());
            }
            None => self.stdout.push_str(&String::from_utf8_lossy(&bytes)),
        }
        Ok(())
    }
}

/// Runs one command on a thread pool of the requested size.
pub fn dispatch(manifest: &RunManifest) -> CliResult<Outcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(manifest.threads)
        .build()
        .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    pool.install(|| match &manifest.command {
        Command::Simulate(a) => commands::simulate::run(a),
        Command::Residue(a) => commands::residue::run(a),
        Command::Fingerprint(a) => commands::fingerprint::run(a),
        Command::Correlate(a) => commands::correlate::run(a),
        Command::Fit(a) => commands::fit::run_fit(a),
        Command::EstimateTemp(a) => commands::fit::run_estimate(a),
        Command::Benchmark(a) => commands::benchmark::run(a),
    })
}

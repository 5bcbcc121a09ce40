//! Dark-current sensor fingerprinting.
//!
//! The pipeline extracts high-frequency noise residues from raw frames,
//! averages dark-frame residues into per-temperature reference patterns,
//! correlates query images against those patterns, fits an exponential
//! thermal model to the correlation series and reads the capture temperature
//! off the plateau of that model. A seeded sensor simulator supplies frames
//! with known ground truth.
//!
//! ```
//! use dsnprint::filter::{dct_residue, DctFilterSpec};
//! use dsnprint::frame_io::Frame;
//!
//! let flat = Frame::new(16, 16, 10, vec![512; 256]).unwrap();
//! let residue = dct_residue(&flat, &DctFilterSpec::default());
//! assert!(residue.data().iter().all(|v| v.abs() < 1e-9));
//! ```

pub mod correlate;
pub mod error;
pub mod filter;
pub mod fingerprint;
pub mod frame_io;
pub mod simulate;
pub mod thermal;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/filtering.md")]
    mod filtering {}
    #[doc = include_str!("../../../book/src/fingerprints.md")]
    mod fingerprints {}
    #[doc = include_str!("../../../book/src/correlation.md")]
    mod correlation {}
    #[doc = include_str!("../../../book/src/thermal.md")]
    mod thermal {}
    #[doc = include_str!("../../../book/src/simulator.md")]
    mod simulator {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

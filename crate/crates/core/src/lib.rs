//! Capture-bias tooling for image corpora.
//!
//! The crate is split along the life cycle of an exposure-robustness study:
//!
//! - [`exif`] reads capture metadata straight from JPEG/TIFF bytes and can
//!   author minimal Exif fixtures.
//! - [`exposure`] does EV arithmetic, EV-offset re-indexing and sweep grids.
//! - [`audit`] ingests corpora and aggregates camera-setting histograms.
//! - [`sweep`] plans tethered capture sweeps and simulates them on rasters.
//! - [`eval`] scores prediction logs (top-1, oLRP, AP, VQA accuracy and
//!   parameter sensitivity).

pub mod audit;
pub mod eval;
pub mod exif;
pub mod exposure;
pub mod rational;
pub mod svg;
pub mod sweep;

pub use exif::{parse_exif, ByteOrder, ExifRecord, ExposureMode};
pub use exposure::{compute_ev, quantize_ev, CameraSettings, LuxAnchors, SweepGrid};
pub use rational::ExifRational;

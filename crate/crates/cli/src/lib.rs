//! IO, file formats and the experiment runner for instance-adaptive
//! adversarial training. The algorithms live in `iaat-core`; this crate
//! adds configs, checkpoints, IDX ingestion, CSV/JSON reports, SVG figures
//! and the `iaat` binary.

pub mod checkpoint;
pub mod config;
pub mod data_io;
pub mod error;
pub mod memcsv;
pub mod report_io;
pub mod runner;
pub mod svg;

//! Multi-label wireless interference identification in the 2.4 GHz ISM band.
//!
//! The crate covers the whole pipeline for one 10 MHz sensing sub-band:
//!
//! * [`signal`] synthesizes complex-baseband bursts for the 15 channel classes
//!   (ten IEEE 802.15.1, three IEEE 802.11 b/g, two IEEE 802.15.4 channels);
//! * [`dataset`] builds single-label SNR sweeps and multi-label mixtures of a
//!   utilized signal plus up to six interferers, with a binary file format;
//! * [`preprocess`] turns a 128-sample snapshot into the 128 x 2 spectrum
//!   feature matrix;
//! * [`nn`] is a small explicit-backprop CNN engine (conv, dense, dropout,
//!   sigmoid/softmax heads, cross-entropy losses, Adam);
//! * [`eval`] thresholds multi-label scores and computes per-class true
//!   positive rates grouped by interferer count and utilized class;
//! * [`cli`] wires everything into the `wii` command-line tool.

pub mod cli;
pub mod config;
pub mod dataset;
mod error;
pub mod eval;
pub mod nn;
pub mod preprocess;
pub mod seed;
pub mod signal;

pub use error::{Error, FormatError, Result};
pub use signal::{ClassId, IqSnapshot, Technology, NUM_CLASSES, SAMPLE_RATE_HZ, SNAPSHOT_LEN};

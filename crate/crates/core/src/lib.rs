//! Desk-scale ECG beat classification pipeline.
//!
//! The crate is organized along the processing chain:
//!
//! - [`record_io`] — on-disk formats (beat CSV, raw record + annotations) and
//!   deterministic stratified splits.
//! - [`dsp`] — signal conditioning: Chebyshev-II band-pass, wavelet denoising,
//!   QRS detection, delineation, and beat segmentation.
//! - [`nn`] — a small dense-tensor autodiff engine with the layer zoo and Adam.
//! - [`model`] — the classifier: dual bidirectional RNN fusion, dilated
//!   convolution stack, dynamic routing, and attention aggregation.
//! - [`cgan`] — conditional GAN used to synthesize minority-class beats.
//! - [`metrics`] — confusion matrices, classification metrics, reports.
//! - [`checkpoint`] — binary tensor blobs and model checkpoints.
//!
//! Batch-level data parallelism (prediction, preprocessing, evaluation) goes
//! through [`parallel`] and is controlled by the `parallel` cargo feature;
//! training is always sequential so that runs are bit-reproducible.

pub mod cgan;
pub mod checkpoint;
pub mod dsp;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod parallel;
pub mod record_io;
pub mod selftest;
pub mod synthetic;

pub use record_io::{BeatDataset, ClassLabel, RawRecord, Signal};

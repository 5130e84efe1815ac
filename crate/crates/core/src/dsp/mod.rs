//! Signal conditioning: band-pass filtering, wavelet denoising, QRS
//! detection, delineation, and beat segmentation.
//!
//! The preprocessing chain applied by [`preprocess_pipeline`] is, in order:
//! zero-phase Chebyshev-II band-pass, wavelet denoise, QRS detection,
//! delineation, peak-centered segmentation, and per-segment z-scoring.

mod filter;
mod qrs;
mod wavelet;

pub use filter::{design_cheby2_bandpass, filtfilt, lfilter, FilterCoeffs, FilterKind};
pub use qrs::{lpd_delineate, pan_tompkins, segment_beats, BeatBoundaries, Delineation, SegmentedBeats};
pub use wavelet::{dwt_denoise, dwt_forward, dwt_inverse, ThresholdRule, WaveletFamily, WaveletSpec};

use crate::record_io::{BeatDataset, ClassLabel, RawRecord, Signal};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DspError {
    #[error("signal is constant; standard deviation is zero")]
    ConstantSignal,
    #[error("invalid band: {0}")]
    InvalidBand(String),
    #[error("filter design is unstable in transfer-function form")]
    UnstableDesign,
    #[error("signal too short: need more than {needed} samples, got {got}")]
    SignalTooShort { needed: usize, got: usize },
}

/// A pipeline failure tagged with the stage that produced it.
#[derive(Debug, Error, PartialEq)]
#[error("{stage}: {source}")]
pub struct PipelineError {
    pub stage: &'static str,
    #[source]
    pub source: DspError,
}

fn stage(stage: &'static str) -> impl Fn(DspError) -> PipelineError {
    move |source| PipelineError { stage, source }
}

/// Standardizes a signal to zero mean and unit population standard deviation.
pub fn zscore(x: &Signal) -> Result<Signal, DspError> {
    if x.len() < 2 {
        return Err(DspError::SignalTooShort {
            needed: 1,
            got: x.len(),
        });
    }
    let out = zscore_slice(&x.samples)?;
    Ok(Signal::new(out, x.fs))
}

pub(crate) fn zscore_slice(xs: &[f64]) -> Result<Vec<f64>, DspError> {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var <= 0.0 {
        return Err(DspError::ConstantSignal);
    }
    let std = var.sqrt();
    Ok(xs.iter().map(|v| (v - mean) / std).collect())
}

/// Tunable parameters of the preprocessing chain.
///
/// Field names double as the recognized `key = value` config keys.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Default sampling rate (Hz) for generated data; records carry their own.
    pub fs: f64,
    /// Band-pass lower edge in Hz.
    pub band_lo: f64,
    /// Band-pass upper edge in Hz.
    pub band_hi: f64,
    /// Chebyshev-II design order (doubles for the band-pass realization).
    pub filter_order: usize,
    /// Stopband attenuation in dB.
    pub stop_atten_db: f64,
    /// Daubechies vanishing moments (1..=10).
    pub wavelet_moments: usize,
    /// Wavelet decomposition depth.
    pub wavelet_levels: usize,
    /// Detail-coefficient thresholding rule.
    pub threshold_rule: ThresholdRule,
    /// Beat segment width in samples (even).
    pub segment_width: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            fs: 360.0,
            band_lo: 0.5,
            band_hi: 48.0,
            filter_order: 4,
            stop_atten_db: 40.0,
            wavelet_moments: 6,
            wavelet_levels: 9,
            threshold_rule: ThresholdRule::SoftUniversal,
            segment_width: 360,
        }
    }
}

/// Everything the preprocessing chain produces for one record.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// Labeled, z-scored beat segments.
    pub dataset: BeatDataset,
    /// QRS boundaries for the detected beats (peaks without a clean
    /// delineation are omitted).
    pub delineation: Delineation,
    /// All detected R-peak indices, including unlabeled ones.
    pub peaks: Vec<usize>,
}

/// Runs the full conditioning chain on one record.
///
/// Labels are taken from the nearest annotation within ±0.2 s of each
/// detected peak; beats without a label, beats whose window crosses the
/// record boundary, and constant segments are dropped.
pub fn preprocess_pipeline(
    rec: &RawRecord,
    cfg: &PipelineConfig,
) -> Result<PipelineOutput, PipelineError> {
    let fs = rec.signal.fs;
    let coeffs = design_cheby2_bandpass(
        fs,
        cfg.band_lo,
        cfg.band_hi,
        cfg.filter_order,
        cfg.stop_atten_db,
    )
    .map_err(stage("filter design"))?;
    let filtered = filtfilt(&coeffs, &rec.signal).map_err(stage("filtering"))?;

    let wavelet = WaveletSpec {
        family: WaveletFamily::Daubechies,
        vanishing_moments: cfg.wavelet_moments,
        levels: cfg.wavelet_levels,
        threshold_rule: cfg.threshold_rule,
    };
    let denoised = dwt_denoise(&filtered, &wavelet).map_err(stage("denoising"))?;

    let peaks = pan_tompkins(&denoised).map_err(stage("peak detection"))?;
    let delineation = lpd_delineate(&denoised, &peaks);

    let segments = segment_beats(&denoised, &peaks, cfg.segment_width);

    let max_gap = (0.2 * fs).round() as i64;
    let mut dataset = BeatDataset::empty(cfg.segment_width);
    for (row, &peak) in segments.rows.iter().zip(&segments.peaks) {
        let Some(label) = nearest_annotation(&rec.annotations, peak, max_gap) else {
            continue;
        };
        match zscore_slice(row) {
            Ok(z) => dataset.push(&z, label),
            Err(DspError::ConstantSignal) => continue,
            Err(e) => return Err(stage("normalization")(e)),
        }
    }

    Ok(PipelineOutput {
        dataset,
        delineation,
        peaks,
    })
}

fn nearest_annotation(
    annotations: &[(usize, ClassLabel)],
    peak: usize,
    max_gap: i64,
) -> Option<ClassLabel> {
    // annotations are sorted by index; binary-search the insertion point
    let pos = annotations.partition_point(|&(idx, _)| idx < peak);
    let mut best: Option<(i64, ClassLabel)> = None;
    for &(idx, label) in annotations[pos.saturating_sub(1)..(pos + 1).min(annotations.len())].iter()
    {
        let gap = (idx as i64 - peak as i64).abs();
        if gap <= max_gap && best.is_none_or(|(g, _)| gap < g) {
            best = Some((gap, label));
        }
    }
    best.map(|(_, l)| l)
}

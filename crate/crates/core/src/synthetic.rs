//! Deterministic synthetic signals and datasets.
//!
//! These generators back the self-test suite, the examples in the docs, and
//! any workflow that needs runnable data without a recording on hand. Beats
//! are built from Gaussian bumps (a sharp R spike plus gentler P/T waves),
//! which is enough structure for the detector and classifier to bite on.

use crate::record_io::{BeatDataset, ClassLabel, RawRecord, Signal};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn gaussian(t: f64, center: f64, sigma: f64) -> f64 {
    let d = (t - center) / sigma;
    (-0.5 * d * d).exp()
}

/// A train of Gaussian R-spikes at a fixed heart rate.
///
/// Returns the signal and the exact sample index of every spike center.
pub fn pulse_train(fs: f64, bpm: f64, n_beats: usize) -> (Signal, Vec<usize>) {
    let rr = 60.0 / bpm; // seconds between beats
    let lead_in = 1.0;
    let total = lead_in + rr * n_beats as f64 + 1.0;
    let n = (total * fs).round() as usize;
    let sigma = 0.012;
    let mut samples = vec![0.0; n];
    let mut peaks = Vec::with_capacity(n_beats);
    for b in 0..n_beats {
        let center = lead_in + b as f64 * rr;
        let c_idx = (center * fs).round() as usize;
        peaks.push(c_idx);
        let span = (4.0 * sigma * fs).ceil() as usize;
        for i in c_idx.saturating_sub(span)..(c_idx + span).min(n) {
            samples[i] += gaussian(i as f64 / fs, c_idx as f64 / fs, sigma);
        }
    }
    (Signal::new(samples, fs), peaks)
}

/// One beat template with analytically known QRS support.
///
/// The R wave is a Gaussian truncated at ±3σ, so its onset and offset are the
/// truncation points themselves. P and T waves are small and slow enough to
/// stay below any slope threshold tied to the R wave.
pub struct BeatTemplate {
    pub samples: Vec<f64>,
    pub qrs_onset: usize,
    pub r_peak: usize,
    pub qrs_offset: usize,
}

pub fn truncated_beat(fs: f64) -> BeatTemplate {
    let sigma_r = 0.015;
    let beat_len = (1.2 * fs).round() as usize;
    let center = beat_len / 2;
    let half_support = (3.0 * sigma_r * fs).round() as usize;
    let mut samples = vec![0.0; beat_len];
    for i in 0..beat_len {
        let t = i as f64 / fs;
        let tc = center as f64 / fs;
        // truncated R wave
        if i.abs_diff(center) <= half_support {
            samples[i] += gaussian(t, tc, sigma_r);
        }
        // P wave 180 ms before, T wave 280 ms after
        samples[i] += 0.15 * gaussian(t, tc - 0.18, 0.035);
        samples[i] += 0.30 * gaussian(t, tc + 0.28, 0.060);
    }
    BeatTemplate {
        samples,
        qrs_onset: center - half_support,
        r_peak: center,
        qrs_offset: center + half_support,
    }
}

/// A record of repeated truncated beats with per-beat annotations.
///
/// Labels cycle through all five classes; annotation indices sit exactly on
/// the R peaks. A small seeded noise floor keeps the data honest without
/// disturbing detection.
pub fn labeled_pulse_record(fs: f64, bpm: f64, n_beats: usize, seed: u64) -> RawRecord {
    let template = truncated_beat(fs);
    let rr = (60.0 / bpm * fs).round() as usize;
    let lead_in = fs.round() as usize;
    let n = lead_in + rr * n_beats + fs.round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples: Vec<f64> = (0..n).map(|_| rng.random_range(-0.005..0.005)).collect();
    let mut annotations = Vec::with_capacity(n_beats);
    let t_center = template.r_peak;
    for b in 0..n_beats {
        let peak = lead_in + b * rr;
        let label = ClassLabel::ALL[b % ClassLabel::COUNT];
        annotations.push((peak, label));
        for (j, v) in template.samples.iter().enumerate() {
            let idx = peak as i64 + j as i64 - t_center as i64;
            if idx >= 0 && (idx as usize) < n {
                samples[idx as usize] += v;
            }
        }
    }
    RawRecord {
        signal: Signal::new(samples, fs),
        annotations,
    }
}

/// A linearly separable five-class beat set.
///
/// Each class is a tone at its own frequency with a class-specific envelope;
/// beats are z-scored. A nearest-centroid rule classifies this set perfectly,
/// which keeps training benchmarks meaningful.
pub fn toy_beat_dataset(n_beats: usize, segment_len: usize, seed: u64) -> BeatDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ds = BeatDataset::empty(segment_len);
    let freqs = [1.0, 2.0, 3.0, 4.0, 5.0];
    for i in 0..n_beats {
        let class = ClassLabel::ALL[i % ClassLabel::COUNT];
        let f = freqs[class.code() as usize];
        let phase: f64 = rng.random_range(-0.3..0.3);
        let mut row: Vec<f64> = (0..segment_len)
            .map(|j| {
                let t = j as f64 / segment_len as f64;
                (2.0 * PI * f * t + phase).sin() + 0.05 * rng.random_range(-1.0..1.0)
            })
            .collect();
        let mean = row.iter().sum::<f64>() / row.len() as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / row.len() as f64;
        let std = var.sqrt().max(1e-12);
        for v in &mut row {
            *v = (*v - mean) / std;
        }
        ds.push(&row, class);
    }
    ds
}

/// Nearest-centroid accuracy on a dataset; the separability baseline.
pub fn centroid_baseline_accuracy(ds: &BeatDataset) -> f64 {
    let k = ClassLabel::COUNT;
    let len = ds.segment_len();
    let mut centroids = vec![vec![0.0; len]; k];
    let mut counts = vec![0usize; k];
    for (beat, label) in ds.iter() {
        let c = label.code() as usize;
        counts[c] += 1;
        for (acc, v) in centroids[c].iter_mut().zip(beat) {
            *acc += v;
        }
    }
    for (c, count) in counts.iter().enumerate() {
        if *count > 0 {
            for v in &mut centroids[c] {
                *v /= *count as f64;
            }
        }
    }
    let mut hits = 0usize;
    for (beat, label) in ds.iter() {
        let mut best = (f64::INFINITY, 0usize);
        for (c, centroid) in centroids.iter().enumerate() {
            if counts[c] == 0 {
                continue;
            }
            let d: f64 = beat.iter().zip(centroid).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.0 {
                best = (d, c);
            }
        }
        if best.1 == label.code() as usize {
            hits += 1;
        }
    }
    hits as f64 / ds.n_beats().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pulse_train_peak_spacing() {
        let (sig, peaks) = pulse_train(360.0, 72.0, 10);
        assert_eq!(peaks.len(), 10);
        for pair in peaks.windows(2) {
            assert_eq!(pair[1] - pair[0], 300); // 60/72 s at 360 Hz
        }
        assert!(sig.samples[peaks[0]] > 0.99);
    }

    #[test]
    fn truncated_beat_is_zero_outside_support() {
        let b = truncated_beat(360.0);
        assert!(b.qrs_onset < b.r_peak && b.r_peak < b.qrs_offset);
        // the R contribution vanishes outside [onset, offset]; only the slow
        // P/T tails remain there
        let at_edge = b.samples[b.qrs_onset];
        assert!(at_edge > 0.005, "truncation edge should be nonzero: {at_edge}");
    }

    #[test]
    fn toy_dataset_is_centroid_separable() {
        let ds = toy_beat_dataset(500, 64, 3);
        assert_eq!(ds.n_beats(), 500);
        let acc = centroid_baseline_accuracy(&ds);
        assert!(acc >= 0.99, "baseline accuracy {acc}");
    }
}

//! R-peak detection, QRS delineation, and beat segmentation.
//!
//! Detection is the classic derivative/square/integrate chain with adaptive
//! dual thresholds: a five-point derivative, squaring, a 150 ms moving-window
//! integration, running signal/noise peak estimates with a 200 ms refractory,
//! and a half-threshold searchback for long RR gaps. Detected positions are
//! refined to the local maximum of the input signal.
//!
//! Delineation differentiates the signal with a zero-delay low-pass
//! differentiator and walks outward from each peak's slope extrema until the
//! slope magnitude drops under an adaptive fraction of the local maximum.

use super::DspError;
use crate::record_io::Signal;

const REFRACTORY_S: f64 = 0.2;
const INTEGRATION_WINDOW_S: f64 = 0.15;

/// QRS boundaries for one beat; P/T boundaries are present only when the
/// waves were found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeatBoundaries {
    pub qrs_onset: usize,
    pub r_peak: usize,
    pub qrs_offset: usize,
    pub p_onset: Option<usize>,
    pub p_offset: Option<usize>,
    pub t_onset: Option<usize>,
    pub t_offset: Option<usize>,
}

/// Per-beat boundaries for a whole record.
#[derive(Debug, Clone, Default)]
pub struct Delineation {
    pub beats: Vec<BeatBoundaries>,
}

/// Five-point derivative, causal form (two-sample group delay).
fn derivative(x: &[f64]) -> Vec<f64> {
    let at = |i: i64| -> f64 {
        if i < 0 {
            x[0]
        } else {
            x[i as usize]
        }
    };
    (0..x.len() as i64)
        .map(|n| (2.0 * at(n) + at(n - 1) - at(n - 3) - 2.0 * at(n - 4)) / 8.0)
        .collect()
}

/// Causal moving-window integrator.
fn integrate(x: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    for i in 0..x.len() {
        acc += x[i];
        if i >= window {
            acc -= x[i - window];
        }
        out.push(acc / window as f64);
    }
    out
}

/// Detects R-peak sample indices.
///
/// Returned indices are strictly increasing, in bounds, and never closer than
/// the 200 ms refractory window.
pub fn pan_tompkins(x: &Signal) -> Result<Vec<usize>, DspError> {
    if x.fs < 100.0 {
        return Err(DspError::InvalidBand(format!(
            "QRS detection needs fs >= 100 Hz, got {}",
            x.fs
        )));
    }
    let min_len = (2.0 * x.fs).ceil() as usize;
    if x.len() < min_len {
        return Err(DspError::SignalTooShort {
            needed: min_len - 1,
            got: x.len(),
        });
    }

    let fs = x.fs;
    let window = (INTEGRATION_WINDOW_S * fs).round().max(1.0) as usize;
    let refractory = (REFRACTORY_S * fs).round() as usize;
    let squared: Vec<f64> = derivative(&x.samples).iter().map(|v| v * v).collect();
    let mwi = integrate(&squared, window);

    // candidate peaks: strict local maxima of the integrated signal
    let mut candidates = Vec::new();
    for i in 1..mwi.len() - 1 {
        if mwi[i] > mwi[i - 1] && mwi[i] >= mwi[i + 1] && mwi[i] > 0.0 {
            candidates.push(i);
        }
    }

    // learning phase over the first two seconds
    let learn = &mwi[..min_len.min(mwi.len())];
    let learn_max = learn.iter().cloned().fold(0.0f64, f64::max);
    let learn_mean = learn.iter().sum::<f64>() / learn.len() as f64;
    let mut signal_level = 0.25 * learn_max;
    let mut noise_level = 0.5 * learn_mean;

    let threshold = |sig: f64, noise: f64| noise + 0.25 * (sig - noise);

    let mut detections: Vec<usize> = Vec::new();
    let mut rr_avg = fs; // prior: 60 bpm
    let mut pending_noise: Vec<usize> = Vec::new();

    for &p in &candidates {
        if let Some(&last) = detections.last() {
            if p - last < refractory {
                continue;
            }
            // searchback when the gap grows past 1.66 RR intervals
            if (p - last) as f64 > 1.66 * rr_avg {
                let t2 = 0.5 * threshold(signal_level, noise_level);
                if let Some(&back) = pending_noise
                    .iter()
                    .filter(|&&q| q > last + refractory && q + refractory <= p && mwi[q] > t2)
                    .max_by(|&&a, &&b| mwi[a].total_cmp(&mwi[b]))
                {
                    signal_level = 0.25 * mwi[back] + 0.75 * signal_level;
                    if let Some(&prev) = detections.last() {
                        rr_avg = 0.875 * rr_avg + 0.125 * (back - prev) as f64;
                    }
                    detections.push(back);
                    pending_noise.clear();
                }
            }
        }
        let last_ok = detections.last().is_none_or(|&last| p - last >= refractory);
        if !last_ok {
            continue;
        }
        if mwi[p] > threshold(signal_level, noise_level) {
            if let Some(&prev) = detections.last() {
                rr_avg = 0.875 * rr_avg + 0.125 * (p - prev) as f64;
            }
            signal_level = 0.125 * mwi[p] + 0.875 * signal_level;
            detections.push(p);
            pending_noise.clear();
        } else {
            noise_level = 0.125 * mwi[p] + 0.875 * noise_level;
            pending_noise.push(p);
        }
    }

    // refine each integration peak to the local maximum of the input; the
    // integrator output trails the QRS by up to its window plus the
    // derivative delay
    let mut peaks: Vec<usize> = Vec::with_capacity(detections.len());
    for &p in &detections {
        let lo = p.saturating_sub(window + 4);
        let hi = (p + 3).min(x.len());
        let best = (lo..hi)
            .max_by(|&i, &j| x.samples[i].total_cmp(&x.samples[j]))
            .unwrap_or(p);
        if peaks.last().is_none_or(|&prev| best > prev && best - prev >= refractory) {
            peaks.push(best);
        }
    }
    Ok(peaks)
}

/// Zero-delay low-pass differentiator (symmetric five-point).
fn lpd_signal(x: &[f64]) -> Vec<f64> {
    let n = x.len() as i64;
    let at = |i: i64| -> f64 { x[i.clamp(0, n - 1) as usize] };
    (0..n)
        .map(|i| (2.0 * at(i + 2) + at(i + 1) - at(i - 1) - 2.0 * at(i - 2)) / 8.0)
        .collect()
}

/// Scans outward from `from` while the slope magnitude stays at or above
/// `theta`; returns the first index past the sustained-slope region.
fn scan_to_quiet(lpd: &[f64], from: usize, theta: f64, step: i64, quiet_run: usize) -> Option<usize> {
    let n = lpd.len() as i64;
    let mut i = from as i64;
    let mut quiet = 0usize;
    let mut last_active = from as i64;
    loop {
        i += step;
        if i < 0 || i >= n {
            return None;
        }
        if lpd[i as usize].abs() < theta {
            quiet += 1;
            if quiet >= quiet_run {
                return Some((last_active + step).clamp(0, n - 1) as usize);
            }
        } else {
            quiet = 0;
            last_active = i;
        }
    }
}

fn delineate_one(
    x: &[f64],
    lpd: &[f64],
    peak: usize,
    fs: f64,
) -> Option<(usize, usize, usize)> {
    let n = x.len();
    let half = (0.08 * fs).round() as usize;
    let lo = peak.saturating_sub(half);
    let hi = (peak + half + 1).min(n);
    if hi <= lo + 2 {
        return None;
    }

    // refine the peak onto the local extremum of x
    let refine_lo = peak.saturating_sub(4);
    let refine_hi = (peak + 5).min(n);
    let r_peak = (refine_lo..refine_hi).max_by(|&i, &j| x[i].total_cmp(&x[j]))?;

    // steepest up-slope left of the peak, steepest down-slope right of it
    let up = (lo..r_peak).max_by(|&i, &j| lpd[i].total_cmp(&lpd[j]))?;
    let down = (r_peak..hi).min_by(|&i, &j| lpd[i].total_cmp(&lpd[j]))?;
    let smax = lpd[up].abs().max(lpd[down].abs());
    if smax <= 0.0 {
        return None;
    }
    let theta = 0.05 * smax;

    let onset = scan_to_quiet(lpd, up, theta, -1, 3)?;
    let offset = scan_to_quiet(lpd, down, theta, 1, 3)?;
    (onset < r_peak && r_peak < offset).then_some((onset, r_peak, offset))
}

/// Finds a slow wave (P or T) inside `[lo, hi)` and returns its bounds.
fn delineate_wave(lpd: &[f64], lo: usize, hi: usize, qrs_smax: f64) -> Option<(usize, usize)> {
    if hi <= lo + 4 {
        return None;
    }
    let seg = &lpd[lo..hi];
    let rel = seg
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))?
        .0;
    let smax = seg[rel].abs();
    // too flat to be a wave
    if smax < 0.01 * qrs_smax {
        return None;
    }
    let theta = 0.25 * smax;
    let onset = scan_to_quiet(lpd, lo + rel, theta, -1, 3)?;
    let offset = scan_to_quiet(lpd, lo + rel, theta, 1, 3)?;
    (onset >= lo.saturating_sub(1) && offset < hi + 8).then_some((onset, offset))
}

/// Delineates QRS (and, when visible, P/T) boundaries around each peak.
///
/// Beats whose slope scan fails inherit the previous beat's onset/offset
/// geometry; a failed first beat is omitted.
pub fn lpd_delineate(x: &Signal, peaks: &[usize]) -> Delineation {
    let mut out = Delineation::default();
    if peaks.is_empty() || x.is_empty() {
        return out;
    }
    let lpd = lpd_signal(&x.samples);
    let fs = x.fs;
    let mut prev_geometry: Option<(i64, i64)> = None;

    for &peak in peaks {
        if peak >= x.len() {
            continue;
        }
        let bounds = match delineate_one(&x.samples, &lpd, peak, fs) {
            Some(b) => Some(b),
            // carry rule: reuse the previous beat's onset/offset deltas
            None => prev_geometry.and_then(|(don, doff)| {
                let onset = peak as i64 + don;
                let offset = peak as i64 + doff;
                (onset >= 0 && (offset as usize) < x.len())
                    .then_some((onset as usize, peak, offset as usize))
            }),
        };
        let Some((qrs_onset, r_peak, qrs_offset)) = bounds else {
            continue;
        };
        prev_geometry = Some((
            qrs_onset as i64 - r_peak as i64,
            qrs_offset as i64 - r_peak as i64,
        ));

        let half = (0.08 * fs).round() as usize;
        let up = qrs_onset.max(r_peak.saturating_sub(half));
        let smax = lpd[up..(r_peak + half + 1).min(x.len())]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));

        // P search window: 250..40 ms before QRS onset
        let p_lo = qrs_onset.saturating_sub((0.25 * fs) as usize);
        let p_hi = qrs_onset.saturating_sub((0.04 * fs) as usize);
        let p = delineate_wave(&lpd, p_lo, p_hi.max(p_lo), smax);
        // T search window: 80..450 ms after QRS offset
        let t_lo = (qrs_offset + (0.08 * fs) as usize).min(x.len());
        let t_hi = (qrs_offset + (0.45 * fs) as usize).min(x.len());
        let t = delineate_wave(&lpd, t_lo, t_hi, smax);

        out.beats.push(BeatBoundaries {
            qrs_onset,
            r_peak,
            qrs_offset,
            p_onset: p.map(|(a, _)| a),
            p_offset: p.map(|(_, b)| b),
            t_onset: t.map(|(a, _)| a),
            t_offset: t.map(|(_, b)| b),
        });
    }
    out
}

/// Fixed-width windows centered on peaks; the unlabeled precursor of a
/// beat dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedBeats {
    /// One row per kept peak, each of length `width`.
    pub rows: Vec<Vec<f64>>,
    /// The peak each row was cut around.
    pub peaks: Vec<usize>,
    pub width: usize,
}

/// Cuts the window `[p - width/2, p + width/2)` around every peak.
///
/// Peaks whose window would cross the record boundary are skipped.
pub fn segment_beats(x: &Signal, peaks: &[usize], width: usize) -> SegmentedBeats {
    assert!(width >= 2 && width % 2 == 0, "segment width must be even");
    let half = width / 2;
    let mut rows = Vec::new();
    let mut kept = Vec::new();
    for &p in peaks {
        if p < half || p + half > x.len() {
            continue;
        }
        rows.push(x.samples[p - half..p + half].to_vec());
        kept.push(p);
    }
    SegmentedBeats {
        rows,
        peaks: kept,
        width,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    #[test]
    fn flat_signal_yields_no_peaks() {
        let x = Signal::new(vec![0.0; 2000], 360.0);
        assert!(pan_tompkins(&x).unwrap().is_empty());
    }

    #[test]
    fn short_or_slow_signals_are_rejected() {
        assert!(matches!(
            pan_tompkins(&Signal::new(vec![0.0; 500], 360.0)),
            Err(DspError::SignalTooShort { .. })
        ));
        assert!(pan_tompkins(&Signal::new(vec![0.0; 500], 50.0)).is_err());
    }

    #[test]
    fn pulse_train_is_detected_exactly() {
        let (sig, truth) = synthetic::pulse_train(360.0, 72.0, 60);
        let found = pan_tompkins(&sig).unwrap();
        assert_eq!(found.len(), truth.len(), "found {found:?}");
        for (f, t) in found.iter().zip(&truth) {
            assert!(
                f.abs_diff(*t) <= 2,
                "peak {f} vs truth {t} off by {}",
                f.abs_diff(*t)
            );
        }
    }

    #[test]
    fn detections_respect_refractory() {
        let (sig, _) = synthetic::pulse_train(360.0, 150.0, 40);
        let found = pan_tompkins(&sig).unwrap();
        let refractory = (0.2 * 360.0) as usize;
        for pair in found.windows(2) {
            assert!(pair[1] - pair[0] >= refractory);
        }
        assert!(found.iter().all(|&p| p < sig.len()));
    }

    #[test]
    fn empty_peaks_give_empty_delineation() {
        let x = Signal::new(vec![0.0; 1000], 360.0);
        assert!(lpd_delineate(&x, &[]).beats.is_empty());
    }

    #[test]
    fn truncated_beat_boundaries_within_10ms() {
        let fs = 360.0;
        let beat = synthetic::truncated_beat(fs);
        let x = Signal::new(beat.samples.clone(), fs);
        let del = lpd_delineate(&x, &[beat.r_peak]);
        assert_eq!(del.beats.len(), 1);
        let b = del.beats[0];
        let tol = 0.010 * fs; // ±10 ms
        assert!(
            (b.qrs_onset as f64 - beat.qrs_onset as f64).abs() <= tol,
            "onset {} vs {}",
            b.qrs_onset,
            beat.qrs_onset
        );
        assert!(
            (b.qrs_offset as f64 - beat.qrs_offset as f64).abs() <= tol,
            "offset {} vs {}",
            b.qrs_offset,
            beat.qrs_offset
        );
        assert_eq!(b.r_peak, beat.r_peak);
        // the slow waves around the QRS are picked up too
        assert!(b.p_onset.is_some() && b.t_onset.is_some());
    }

    #[test]
    fn ordering_invariant_holds_for_every_beat() {
        let rec = synthetic::labeled_pulse_record(360.0, 72.0, 20, 5);
        let peaks: Vec<usize> = rec.annotations.iter().map(|&(i, _)| i).collect();
        let del = lpd_delineate(&rec.signal, &peaks);
        assert!(!del.beats.is_empty());
        for b in &del.beats {
            assert!(b.qrs_onset < b.r_peak && b.r_peak < b.qrs_offset);
        }
    }

    #[test]
    fn segment_window_arithmetic() {
        let x = Signal::new((0..2000).map(|i| i as f64).collect(), 360.0);
        let seg = segment_beats(&x, &[1000], 360);
        assert_eq!(seg.rows.len(), 1);
        assert_eq!(seg.rows[0][0], 820.0);
        assert_eq!(*seg.rows[0].last().unwrap(), 1179.0);
    }

    #[test]
    fn segment_skips_boundary_peaks() {
        let x = Signal::new(vec![0.0; 500], 360.0);
        let seg = segment_beats(&x, &[10, 250, 495], 360);
        assert_eq!(seg.peaks, vec![250]);
        assert!(seg.rows.iter().all(|r| r.len() == 360));
    }
}

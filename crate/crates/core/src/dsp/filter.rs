//! IIR band-pass design and zero-phase filtering.
//!
//! The Chebyshev-II design follows the classic analog-prototype path:
//! prototype zeros/poles/gain, low-pass→band-pass transform, bilinear
//! transform with frequency prewarping, then expansion to transfer-function
//! coefficients. All intermediate math is done on complex zeros/poles so the
//! expansion is the only rounding step.

use super::DspError;
use crate::record_io::Signal;
use num_complex::Complex64;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Cheby2Bandpass,
}

/// Transfer-function coefficients with `a[0] == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterCoeffs {
    /// Feed-forward (numerator) coefficients.
    pub b: Vec<f64>,
    /// Feedback (denominator) coefficients, `a[0] == 1`.
    pub a: Vec<f64>,
    /// Realized filter order, `len(a) - 1` (twice the design order for a
    /// band-pass).
    pub order: usize,
    pub kind: FilterKind,
}

impl FilterCoeffs {
    /// Magnitude response |H(e^{j2πf/fs})|.
    pub fn magnitude_at(&self, f_hz: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * f_hz / fs;
        let z = Complex64::new(0.0, -w).exp();
        let eval = |c: &[f64]| {
            // Horner in z^-1
            c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &ck| acc * z + ck)
        };
        (eval(&self.b) / eval(&self.a)).norm()
    }

    pub fn magnitude_db_at(&self, f_hz: f64, fs: f64) -> f64 {
        20.0 * self.magnitude_at(f_hz, fs).max(1e-300).log10()
    }
}

/// Chebyshev-II analog low-pass prototype with unit stopband edge.
fn cheby2_prototype(n: usize, stop_atten_db: f64) -> (Vec<Complex64>, Vec<Complex64>, f64) {
    let de = 1.0 / (10f64.powf(0.1 * stop_atten_db) - 1.0).sqrt();
    let mu = (1.0 / de).asinh() / n as f64;

    // zero angles skip the one that would land at infinity for odd n
    let mut zeros = Vec::new();
    let m_vals: Vec<i64> = if n % 2 == 1 {
        ((-(n as i64) + 1)..0)
            .step_by(2)
            .chain((2..n as i64).step_by(2))
            .collect()
    } else {
        ((-(n as i64) + 1)..n as i64).step_by(2).collect()
    };
    for m in &m_vals {
        let s = (*m as f64 * PI / (2.0 * n as f64)).sin();
        // -conj(i/sin) = i/sin for the purely imaginary zero
        zeros.push(Complex64::new(0.0, 1.0 / s));
    }

    let mut poles = Vec::new();
    let mut m = -(n as i64) + 1;
    while m < n as i64 {
        let theta = PI * m as f64 / (2.0 * n as f64);
        let p = -Complex64::new(0.0, theta).exp();
        let p = Complex64::new(mu.sinh() * p.re, mu.cosh() * p.im);
        poles.push(1.0 / p);
        m += 2;
    }

    let num: Complex64 = poles.iter().map(|p| -p).product();
    let den: Complex64 = zeros.iter().map(|z| -z).product();
    (zeros, poles, (num / den).re)
}

fn lp2bp_zpk(
    zeros: &[Complex64],
    poles: &[Complex64],
    gain: f64,
    wo: f64,
    bw: f64,
) -> (Vec<Complex64>, Vec<Complex64>, f64) {
    let degree = poles.len() - zeros.len();
    let transform = |roots: &[Complex64]| -> Vec<Complex64> {
        let scaled: Vec<Complex64> = roots.iter().map(|r| r * bw / 2.0).collect();
        let mut out = Vec::with_capacity(2 * scaled.len());
        for r in &scaled {
            out.push(r + (r * r - wo * wo).sqrt());
        }
        for r in &scaled {
            out.push(r - (r * r - wo * wo).sqrt());
        }
        out
    };
    let mut z_bp = transform(zeros);
    let p_bp = transform(poles);
    z_bp.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), degree));
    (z_bp, p_bp, gain * bw.powi(degree as i32))
}

fn bilinear_zpk(
    zeros: &[Complex64],
    poles: &[Complex64],
    gain: f64,
    fs: f64,
) -> (Vec<Complex64>, Vec<Complex64>, f64) {
    let degree = poles.len() - zeros.len();
    let fs2 = Complex64::new(2.0 * fs, 0.0);
    let z_d: Vec<Complex64> = zeros.iter().map(|z| (fs2 + z) / (fs2 - z)).collect();
    let p_d: Vec<Complex64> = poles.iter().map(|p| (fs2 + p) / (fs2 - p)).collect();
    let num: Complex64 = zeros.iter().map(|z| fs2 - z).product();
    let den: Complex64 = poles.iter().map(|p| fs2 - p).product();
    let mut z_d = z_d;
    z_d.extend(std::iter::repeat_n(Complex64::new(-1.0, 0.0), degree));
    (z_d, p_d, gain * (num / den).re)
}

/// Expands a monic polynomial from its roots; returns real coefficients.
fn poly_from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
        for (i, c) in coeffs.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * r;
        }
        coeffs = next;
    }
    coeffs.iter().map(|c| c.re).collect()
}

/// Designs a Chebyshev type-II band-pass filter.
///
/// `order` is the analog prototype order (the realized band-pass order is
/// `2·order`). The magnitude is within 3 dB of unity at the band's geometric
/// center and at or below `-stop_atten_db` dB at and beyond both stopband
/// edges.
pub fn design_cheby2_bandpass(
    fs: f64,
    f_lo: f64,
    f_hi: f64,
    order: usize,
    stop_atten_db: f64,
) -> Result<FilterCoeffs, DspError> {
    if !(f_lo > 0.0 && f_lo < f_hi && f_hi < fs / 2.0) {
        return Err(DspError::InvalidBand(format!(
            "need 0 < {f_lo} < {f_hi} < {}",
            fs / 2.0
        )));
    }
    if order < 2 || order % 2 != 0 {
        return Err(DspError::InvalidBand(format!(
            "order must be even and >= 2, got {order}"
        )));
    }
    if stop_atten_db <= 0.0 {
        return Err(DspError::InvalidBand(format!(
            "stopband attenuation must be positive, got {stop_atten_db} dB"
        )));
    }

    let (z, p, k) = cheby2_prototype(order, stop_atten_db);

    // prewarp the band edges (internal rate 2.0, normalized frequencies)
    let fs_i = 2.0;
    let warp = |f: f64| 2.0 * fs_i * (PI * (2.0 * f / fs) / fs_i).tan();
    let (w1, w2) = (warp(f_lo), warp(f_hi));
    let (bw, wo) = (w2 - w1, (w1 * w2).sqrt());

    let (z, p, k) = lp2bp_zpk(&z, &p, k, wo, bw);
    let (z, p, k) = bilinear_zpk(&z, &p, k, fs_i);

    if p.iter().any(|pole| pole.norm() >= 1.0 - 1e-12) {
        return Err(DspError::UnstableDesign);
    }

    let b: Vec<f64> = poly_from_roots(&z).iter().map(|c| c * k).collect();
    let a = poly_from_roots(&p);
    let coeffs = FilterCoeffs {
        order: a.len() - 1,
        b,
        a,
        kind: FilterKind::Cheby2Bandpass,
    };

    // Polynomial expansion can destabilize what the pole set promised; probe
    // the realized recursion with an impulse.
    if !impulse_response_bounded(&coeffs) {
        return Err(DspError::UnstableDesign);
    }
    Ok(coeffs)
}

fn impulse_response_bounded(c: &FilterCoeffs) -> bool {
    let mut state = vec![0.0; c.order];
    let mut peak: f64 = 0.0;
    let mut tail: f64 = 0.0;
    let steps = 20_000;
    for n in 0..steps {
        let x = if n == 0 { 1.0 } else { 0.0 };
        let y = step_df2t(&c.b, &c.a, &mut state, x);
        if !y.is_finite() {
            return false;
        }
        peak = peak.max(y.abs());
        if n >= steps - steps / 10 {
            tail = tail.max(y.abs());
        }
    }
    tail <= peak && tail < 1e3 * peak.max(1.0) && peak.is_finite()
}

#[inline]
fn step_df2t(b: &[f64], a: &[f64], state: &mut [f64], x: f64) -> f64 {
    // direct form II transposed; a[0] assumed 1
    let y = b[0] * x + state.first().copied().unwrap_or(0.0);
    let n = state.len();
    for i in 0..n {
        let next = if i + 1 < n { state[i + 1] } else { 0.0 };
        state[i] = b.get(i + 1).copied().unwrap_or(0.0) * x + next - a[i + 1] * y;
    }
    y
}

/// Causal IIR filtering with explicit initial state.
pub fn lfilter(b: &[f64], a: &[f64], x: &[f64], zi: Option<&[f64]>) -> Vec<f64> {
    assert!((a[0] - 1.0).abs() < 1e-12, "a must be normalized");
    let order = a.len().max(b.len()) - 1;
    let mut state = match zi {
        Some(z) => {
            assert_eq!(z.len(), order);
            z.to_vec()
        }
        None => vec![0.0; order],
    };
    let mut a_pad = a.to_vec();
    let mut b_pad = b.to_vec();
    a_pad.resize(order + 1, 0.0);
    b_pad.resize(order + 1, 0.0);
    x.iter()
        .map(|&xi| step_df2t(&b_pad, &a_pad, &mut state, xi))
        .collect()
}

/// Steady-state filter state for a unit-step input.
///
/// Scaling this vector by the first sample of a signal suppresses the
/// start-up transient of [`lfilter`].
fn lfilter_zi(b: &[f64], a: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    let mut a_pad = a.to_vec();
    let mut b_pad = b.to_vec();
    a_pad.resize(n, 0.0);
    b_pad.resize(n, 0.0);
    let m = n - 1;

    // (I - companion(a)^T) zi = b[1:] - a[1:] * b[0]
    let companion = |j: usize, i: usize| -> f64 {
        if j == 0 {
            -a_pad[i + 1]
        } else if i + 1 == j {
            1.0
        } else {
            0.0
        }
    };
    let mut mat = vec![vec![0.0; m]; m];
    let mut rhs = vec![0.0; m];
    for i in 0..m {
        for j in 0..m {
            mat[i][j] = if i == j { 1.0 } else { 0.0 } - companion(j, i);
        }
        rhs[i] = b_pad[i + 1] - a_pad[i + 1] * b_pad[0];
    }
    solve_dense(&mut mat, &mut rhs);
    rhs
}

/// Gaussian elimination with partial pivoting; solution replaces `rhs`.
fn solve_dense(mat: &mut [Vec<f64>], rhs: &mut [f64]) {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| mat[i][col].abs().total_cmp(&mat[j][col].abs()))
            .expect("non-empty system");
        mat.swap(col, pivot);
        rhs.swap(col, pivot);
        let diag = mat[col][col];
        assert!(diag.abs() > 1e-300, "singular steady-state system");
        for row in col + 1..n {
            let factor = mat[row][col] / diag;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                mat[row][k] -= factor * mat[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = rhs[col];
        for k in col + 1..n {
            acc -= mat[col][k] * rhs[k];
        }
        rhs[col] = acc / mat[col][col];
    }
}

/// Zero-phase filtering: forward pass, backward pass, transient-matched
/// initial conditions, and odd-symmetric edge padding of `3·order` samples.
pub fn filtfilt(c: &FilterCoeffs, x: &Signal) -> Result<Signal, DspError> {
    let padlen = 3 * c.order;
    if x.len() <= padlen {
        return Err(DspError::SignalTooShort {
            needed: padlen,
            got: x.len(),
        });
    }
    let n = x.len();
    let xs = &x.samples;

    let mut ext = Vec::with_capacity(n + 2 * padlen);
    for i in (1..=padlen).rev() {
        ext.push(2.0 * xs[0] - xs[i]);
    }
    ext.extend_from_slice(xs);
    for i in (1..=padlen).rev() {
        ext.push(2.0 * xs[n - 1] - xs[n - 1 - i]);
    }

    let zi = lfilter_zi(&c.b, &c.a);
    let scaled: Vec<f64> = zi.iter().map(|z| z * ext[0]).collect();
    let mut y = lfilter(&c.b, &c.a, &ext, Some(&scaled));
    y.reverse();
    let scaled: Vec<f64> = zi.iter().map(|z| z * y[0]).collect();
    let mut y = lfilter(&c.b, &c.a, &y, Some(&scaled));
    y.reverse();

    Ok(Signal::new(y[padlen..padlen + n].to_vec(), x.fs))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Reference order-4 design for fs=360, band 0.5-48 Hz, 40 dB, produced
    /// once by a trusted filter-design routine and frozen here.
    const GOLDEN_B: [f64; 9] = [
        0.01577651454383348,
        -0.07831047029616044,
        0.1814389285166658,
        -0.2733836399402175,
        0.3089573343717945,
        -0.27338363994021747,
        0.18143892851666577,
        -0.07831047029616041,
        0.015776514543833473,
    ];
    const GOLDEN_A: [f64; 9] = [
        1.0,
        -6.806228104884394,
        20.331196790075417,
        -34.834815844008624,
        37.46001339993862,
        -25.896583961802204,
        11.240693975639802,
        -2.80119413658042,
        0.30691788362553446,
    ];

    fn default_design() -> FilterCoeffs {
        design_cheby2_bandpass(360.0, 0.5, 48.0, 4, 40.0).unwrap()
    }

    #[test]
    fn matches_golden_reference_design() {
        let c = default_design();
        assert_eq!(c.b.len(), 9);
        assert_eq!(c.a.len(), 9);
        assert_eq!(c.order, 8);
        for (got, want) in c.b.iter().zip(GOLDEN_B) {
            assert!((got - want).abs() < 1e-9, "b: {got} vs {want}");
        }
        for (got, want) in c.a.iter().zip(GOLDEN_A) {
            assert!((got - want).abs() < 1e-9, "a: {got} vs {want}");
        }
    }

    #[test]
    fn midband_and_stopband_response() {
        let c = default_design();
        // geometric midband
        let mid = (0.5f64 * 48.0).sqrt();
        let g = c.magnitude_at(mid, 360.0);
        assert!((g - 1.0).abs() < 0.05, "midband gain {g}");
        assert!(c.magnitude_db_at(mid, 360.0).abs() < 3.0);
        // at and beyond the stopband edges
        for f in [0.05, 0.3, 0.5, 48.0, 60.0, 120.0, 179.0] {
            let db = c.magnitude_db_at(f, 360.0);
            assert!(db <= -40.0 + 1e-6, "{f} Hz is at {db} dB");
        }
    }

    #[test]
    fn dc_gain_is_deeply_attenuated() {
        for (lo, hi) in [(0.5, 48.0), (1.0, 30.0), (5.0, 40.0)] {
            let c = design_cheby2_bandpass(360.0, lo, hi, 4, 40.0).unwrap();
            assert!(c.magnitude_db_at(0.0, 360.0) <= -40.0);
        }
    }

    #[test]
    fn rejects_invalid_bands() {
        assert!(matches!(
            design_cheby2_bandpass(360.0, 48.0, 0.5, 4, 40.0),
            Err(DspError::InvalidBand(_))
        ));
        assert!(matches!(
            design_cheby2_bandpass(360.0, 0.5, 200.0, 4, 40.0),
            Err(DspError::InvalidBand(_))
        ));
        assert!(matches!(
            design_cheby2_bandpass(360.0, 0.5, 48.0, 3, 40.0),
            Err(DspError::InvalidBand(_))
        ));
        assert!(matches!(
            design_cheby2_bandpass(360.0, 0.5, 48.0, 4, -3.0),
            Err(DspError::InvalidBand(_))
        ));
    }

    #[test]
    fn high_order_narrow_band_reports_instability() {
        // order 8 against a 0.5 Hz edge is fine as a pole set but is not
        // realizable as expanded transfer-function coefficients
        let r = design_cheby2_bandpass(360.0, 0.5, 48.0, 8, 40.0);
        assert_eq!(r.unwrap_err(), DspError::UnstableDesign);
    }

    #[test]
    fn filtfilt_zeros_stay_zero() {
        let c = default_design();
        let y = filtfilt(&c, &Signal::new(vec![0.0; 500], 360.0)).unwrap();
        assert!(y.samples.iter().all(|v| v.abs() < 1e-300));
        assert_eq!(y.len(), 500);
    }

    #[test]
    fn filtfilt_is_linear() {
        let c = default_design();
        let x: Vec<f64> = (0..600).map(|i| (i as f64 * 0.21).sin() * (i as f64 * 0.013).cos()).collect();
        let y1 = filtfilt(&c, &Signal::new(x.clone(), 360.0)).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| v * 3.5).collect();
        let y2 = filtfilt(&c, &Signal::new(scaled, 360.0)).unwrap();
        for (a, b) in y1.samples.iter().zip(&y2.samples) {
            assert!((a * 3.5 - b).abs() < 1e-9);
        }
    }

    #[test]
    fn filtfilt_symmetric_impulse_stays_symmetric() {
        // a moderate band keeps the pole radii small enough that the
        // response decays fully inside the window
        let c = design_cheby2_bandpass(360.0, 8.0, 40.0, 4, 40.0).unwrap();
        let n = 4001;
        let mut x = vec![0.0; n];
        x[n / 2] = 1.0;
        let y = filtfilt(&c, &Signal::new(x, 360.0)).unwrap();
        for i in 0..n / 2 {
            let (l, r) = (y.samples[i], y.samples[n - 1 - i]);
            assert!((l - r).abs() < 1e-9, "asymmetry at {i}: {l} vs {r}");
        }
    }

    #[test]
    fn filtfilt_gain_matches_analytic_squared_response() {
        // the analytic |H|^2 is the oracle for the measured RMS ratio
        let c = default_design();
        let fs = 360.0;
        let n = 7200; // 20 s
        let measure = |f_hz: f64| {
            let x: Vec<f64> = (0..n)
                .map(|i| (2.0 * PI * f_hz * i as f64 / fs).sin())
                .collect();
            let y = filtfilt(&c, &Signal::new(x.clone(), fs)).unwrap();
            // interior RMS to exclude edge effects
            let lo = n / 10;
            let hi = n - n / 10;
            let rms = |s: &[f64]| (s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64).sqrt();
            rms(&y.samples[lo..hi]) / rms(&x[lo..hi])
        };
        // a mid-passband tone passes at unit RMS
        let ratio10 = measure(10.0);
        assert!((ratio10 - 1.0).abs() < 0.05, "10 Hz ratio {ratio10}");
        // 30 Hz sits on the transition slope of the order-4 design: the
        // measured ratio must match |H(30)|^2, not unity
        let expect30 = c.magnitude_at(30.0, fs).powi(2);
        let ratio30 = measure(30.0);
        assert!(
            (ratio30 - expect30).abs() < 0.05 * expect30.max(0.01),
            "30 Hz ratio {ratio30} vs analytic {expect30}"
        );
    }

    #[test]
    fn filtfilt_kills_baseline_drift() {
        let c = default_design();
        let fs = 360.0;
        let n = 14400; // 40 s to resolve 0.05 Hz
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * PI * 0.05 * i as f64 / fs).sin())
            .collect();
        let y = filtfilt(&c, &Signal::new(x.clone(), fs)).unwrap();
        let rms = |s: &[f64]| (s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64).sqrt();
        let atten_db = 20.0 * (rms(&y.samples) / rms(&x)).log10();
        assert!(atten_db <= -40.0, "drift attenuated only {atten_db} dB");
    }

    #[test]
    fn filtfilt_has_zero_phase_lag_in_band() {
        let c = default_design();
        let fs = 360.0;
        let n = 3600;
        for f_hz in [2.0, 5.0, 10.0, 15.0, 20.0] {
            let x: Vec<f64> = (0..n)
                .map(|i| (2.0 * PI * f_hz * i as f64 / fs).sin())
                .collect();
            let y = filtfilt(&c, &Signal::new(x.clone(), fs)).unwrap();
            // cross-correlation over interior lags; the peak must sit at 0
            let max_lag = 40i64;
            let lo = 200usize;
            let hi = n - 200;
            let mut best = (0i64, f64::MIN);
            for lag in -max_lag..=max_lag {
                let mut acc = 0.0;
                for i in lo..hi {
                    acc += x[i] * y.samples[(i as i64 + lag) as usize];
                }
                if acc > best.1 {
                    best = (lag, acc);
                }
            }
            assert_eq!(best.0, 0, "phase lag at {f_hz} Hz");
        }
    }

    #[test]
    fn filtfilt_rejects_short_signals() {
        let c = default_design();
        let err = filtfilt(&c, &Signal::new(vec![0.0; 24], 360.0)).unwrap_err();
        assert_eq!(err, DspError::SignalTooShort { needed: 24, got: 24 });
    }

    #[test]
    fn lfilter_runs_moving_average() {
        let y = lfilter(&[0.5, 0.5], &[1.0], &[1.0, 1.0, 1.0, 1.0], None);
        assert_eq!(y, vec![0.5, 1.0, 1.0, 1.0]);
    }
}

use std::fmt::Write as _;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{require_positive, Error, Result};
use crate::num::Real;

pub const PSD_CSV_HEADER: &str = "f_hz,psd_m2_per_hz";

/// Segment length in correlation times used by [`default_segment_length`].
pub const SEGMENT_CORRELATION_TIMES: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    #[default]
    Hann,
    Rectangular,
}

impl Window {
    pub fn name(self) -> &'static str {
        match self {
            Window::Hann => "hann",
            Window::Rectangular => "rectangular",
        }
    }

    fn coefficients<T: Real>(self, n: usize) -> Vec<T> {
        match self {
            Window::Rectangular => vec![T::one(); n],
            // periodic Hann, the usual choice for spectral averaging
            Window::Hann => (0..n)
                .map(|i| {
                    let phase = T::two_pi() * T::from_count(i) / T::from_count(n);
                    T::lit(0.5) * (T::one() - phase.cos())
                })
                .collect(),
        }
    }
}

/// One-sided displacement PSD. Integrating `values` over `frequencies`
/// gives the series variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct PsdEstimate<T: Real = f64> {
    /// Hz, from 0 to Nyquist.
    pub frequencies: Vec<T>,
    /// m²/Hz.
    pub values: Vec<T>,
    pub segment_length: usize,
    pub segments: usize,
    pub window: Window,
    pub overlap: T,
}

impl<T: Real> PsdEstimate<T> {
    /// Frequency bin width, Hz.
    pub fn resolution(&self) -> T {
        self.frequencies[1] - self.frequencies[0]
    }

    /// Rectangle-rule integral of the PSD, m².
    pub fn integral(&self) -> T {
        self.values.iter().copied().sum::<T>() * self.resolution()
    }

    /// Index range of bins with `lo <= f <= hi`.
    pub fn band(&self, lo: T, hi: T) -> std::ops::Range<usize> {
        let start = self.frequencies.partition_point(|f| *f < lo);
        let end = self.frequencies.partition_point(|f| *f <= hi);
        start..end.max(start)
    }

    /// Index of the largest value within `[lo, hi]`.
    pub fn peak_index(&self, lo: T, hi: T) -> Option<usize> {
        let band = self.band(lo, hi);
        let start = band.start;
        self.values[band]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(i, _)| start + i)
    }

    /// CSV with header `f_hz,psd_m2_per_hz`, preceded by `# ` comment lines.
    pub fn to_csv(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            let _ = writeln!(out, "# {c}");
        }
        let _ = writeln!(
            out,
            "# window={} segment_length={} segments={} overlap={}",
            self.window.name(),
            self.segment_length,
            self.segments,
            self.overlap
        );
        out.push_str(PSD_CSV_HEADER);
        out.push('\n');
        for (f, v) in self.frequencies.iter().zip(&self.values) {
            let _ = writeln!(out, "{:e},{:e}", f.as_f64(), v.as_f64());
        }
        out
    }
}

/// Power-of-two segment length spanning about 16 amplitude correlation times
/// (`2/γ` each), capped at the largest power of two not exceeding `len`.
pub fn default_segment_length<T: Real>(len: usize, dt: T, gamma: T) -> usize {
    let wanted = (T::lit(SEGMENT_CORRELATION_TIMES) * T::lit(2.0) / (gamma * dt))
        .to_usize()
        .unwrap_or(usize::MAX)
        .max(2);
    let cap = if len < 2 { 2 } else { 1usize << (usize::BITS - 1 - len.leading_zeros()) };
    wanted.checked_next_power_of_two().unwrap_or(cap).min(cap)
}

/// Welch estimate of the one-sided PSD of `series` sampled at interval `dt`.
///
/// Each segment is mean-detrended and windowed; the window power is
/// compensated so the integral over frequency equals the variance.
pub fn psd_welch_series<T: Real>(
    series: &[T],
    dt: T,
    segment_length: usize,
    overlap: T,
    window: Window,
) -> Result<PsdEstimate<T>> {
    require_positive("dt", dt)?;
    if !(overlap >= T::zero() && overlap <= T::lit(0.9)) {
        return Err(Error::Config(format!("overlap {overlap} outside [0, 0.9]")));
    }
    if segment_length < 4 || segment_length > series.len() {
        return Err(Error::Size {
            needed: segment_length.max(4),
            got: series.len(),
        });
    }
    let n = segment_length;
    let step = (T::from_count(n) * (T::one() - overlap))
        .round()
        .to_usize()
        .unwrap_or(n)
        .max(1);
    let segments = (series.len() - n) / step + 1;
    let w: Vec<T> = window.coefficients(n);
    let w_power: T = w.iter().map(|c| *c * *c).sum();
    let fft = FftPlanner::<T>::new().plan_fft_forward(n);
    let bins = n / 2 + 1;
    let mut acc = vec![T::zero(); bins];
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
    for s in 0..segments {
        let seg = &series[s * step..s * step + n];
        let mean = seg.iter().copied().sum::<T>() / T::from_count(n);
        for ((b, x), c) in buf.iter_mut().zip(seg).zip(&w) {
            *b = Complex::new((*x - mean) * *c, T::zero());
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a = *a + b.norm_sqr();
        }
    }
    let scale = dt / (w_power * T::from_count(segments));
    let two = T::lit(2.0);
    let values: Vec<T> = acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            // fold negative frequencies onto positive ones; DC and Nyquist are unpaired
            let fold = if k == 0 || (n.is_multiple_of(2) && k == n / 2) { T::one() } else { two };
            *a * scale * fold
        })
        .collect();
    let df = T::one() / (T::from_count(n) * dt);
    let frequencies = (0..bins).map(|k| df * T::from_count(k)).collect();
    Ok(PsdEstimate {
        frequencies,
        values,
        segment_length: n,
        segments,
        window,
        overlap,
    })
}

/// Welch PSD of mode `mode` of a trajectory.
pub fn psd_welch<T: Real>(
    traj: &Trajectory<T>,
    mode: usize,
    segment_length: usize,
    overlap: T,
    window: Window,
) -> Result<PsdEstimate<T>> {
    let series = traj
        .samples
        .get(mode)
        .ok_or_else(|| Error::Config(format!("trajectory has no mode {mode}")))?;
    psd_welch_series(series, traj.dt, segment_length, overlap, window)
}

/// Lorentzian line `S(f) = A / ((f - f_c)² + (w/2)²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct LorentzianFit<T: Real = f64> {
    /// Hz.
    pub center: T,
    /// Full width at half maximum, Hz.
    pub fwhm: T,
    pub amplitude: T,
}

/// Fits a Lorentzian to the bins of `psd` within `[lo, hi]` by weighted
/// least squares on `1/S`, which is quadratic in `f`.
pub fn fit_lorentzian<T: Real>(psd: &PsdEstimate<T>, lo: T, hi: T) -> Result<LorentzianFit<T>> {
    let band = psd.band(lo, hi);
    if band.len() < 3 {
        return Err(Error::Size {
            needed: 3,
            got: band.len(),
        });
    }
    let f_ref = psd.frequencies[band.start];
    // normal equations for y = c0 + c1 u + c2 u², u = f - f_ref, weight S²
    let mut m = [[T::zero(); 3]; 3];
    let mut v = [T::zero(); 3];
    let s_max = psd.values[band.clone()].iter().copied().fold(T::zero(), T::max);
    if !(s_max > T::zero()) {
        return Err(Error::Fit("empty spectrum in fit band".into()));
    }
    for k in band {
        let s = psd.values[k] / s_max;
        if !(s > T::zero()) {
            continue;
        }
        let u = psd.frequencies[k] - f_ref;
        let basis = [T::one(), u, u * u];
        let w = s * s;
        let y = T::one() / s;
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = m[i][j] + w * basis[i] * basis[j];
            }
            v[i] = v[i] + w * basis[i] * y;
        }
    }
    let c = solve3(m, v).ok_or_else(|| Error::Fit("singular Lorentzian normal equations".into()))?;
    if !(c[2] > T::zero()) {
        return Err(Error::Fit("fitted 1/S has no minimum".into()));
    }
    let u0 = -c[1] / (T::lit(2.0) * c[2]);
    let half_sq = c[0] / c[2] - u0 * u0;
    if !(half_sq > T::zero()) {
        return Err(Error::Fit("fitted Lorentzian width is not positive".into()));
    }
    Ok(LorentzianFit {
        center: f_ref + u0,
        fwhm: T::lit(2.0) * half_sq.sqrt(),
        amplitude: s_max / c[2],
    })
}

#[allow(clippy::needless_range_loop)]
fn solve3<T: Real>(mut m: [[T; 3]; 3], mut v: [T; 3]) -> Option<[T; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&a, &b| {
            m[a][col]
                .abs()
                .partial_cmp(&m[b][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[pivot][col] == T::zero() {
            return None;
        }
        m.swap(col, pivot);
        v.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] = m[row][k] - f * m[col][k];
            }
            v[row] = v[row] - f * v[col];
        }
    }
    let mut x = [T::zero(); 3];
    for row in (0..3).rev() {
        let mut s = v[row];
        for k in row + 1..3 {
            s = s - m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    Some(x)
}

/// Model-free description of a spectral peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct PeakShape<T: Real = f64> {
    /// Hz.
    pub peak_frequency: T,
    /// Full width at half maximum by linear interpolation, Hz.
    pub fwhm: T,
    /// Third standardized moment of the PSD treated as a distribution over
    /// frequency within the analysis band. Negative means a low-frequency tail.
    pub skewness: T,
}

/// Measures the peak of `psd` within `[lo, hi]`.
pub fn peak_shape<T: Real>(psd: &PsdEstimate<T>, lo: T, hi: T) -> Result<PeakShape<T>> {
    let band = psd.band(lo, hi);
    if band.len() < 3 {
        return Err(Error::Size {
            needed: 3,
            got: band.len(),
        });
    }
    let peak = psd.peak_index(lo, hi).expect("non-empty band");
    let half = psd.values[peak] * T::lit(0.5);
    let crossing = |k_in: usize, k_out: usize| {
        let (s_in, s_out) = (psd.values[k_in], psd.values[k_out]);
        let frac = (s_in - half) / (s_in - s_out);
        psd.frequencies[k_in] + (psd.frequencies[k_out] - psd.frequencies[k_in]) * frac
    };
    let mut left = None;
    for k in (band.start..peak).rev() {
        if psd.values[k] < half {
            left = Some(crossing(k + 1, k));
            break;
        }
    }
    let mut right = None;
    for k in peak + 1..band.end {
        if psd.values[k] < half {
            right = Some(crossing(k - 1, k));
            break;
        }
    }
    let (Some(l), Some(r)) = (left, right) else {
        return Err(Error::Fit("peak does not fall to half maximum inside the band".into()));
    };
    let (mut w0, mut w1) = (T::zero(), T::zero());
    for k in band.clone() {
        w0 = w0 + psd.values[k];
        w1 = w1 + psd.values[k] * psd.frequencies[k];
    }
    let mean = w1 / w0;
    let (mut m2, mut m3) = (T::zero(), T::zero());
    for k in band {
        let d = psd.frequencies[k] - mean;
        m2 = m2 + psd.values[k] * d * d;
        m3 = m3 + psd.values[k] * d * d * d;
    }
    m2 = m2 / w0;
    m3 = m3 / w0;
    Ok(PeakShape {
        peak_frequency: psd.frequencies[peak],
        fwhm: r - l,
        skewness: m3 / m2.powf(T::lit(1.5)),
    })
}

//! Lock-in style envelope extraction.
//!
//! The displacement is mixed with `√2 cos` and `-√2 sin` references at the
//! centre frequency, low-passed by a fourth-order Butterworth filter at half
//! the bandwidth, and decimated to an interval of `1/(4b)`. For
//! `x = A cos(2π f_c t + φ)` the complex amplitude `I + iQ` is `A e^{iφ}/√2`
//! and `X² = 2(I² + Q²) = A²`.

use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{require_positive, Error, Result};
use crate::num::Real;

/// Filter settling time in units of `1/b`. The slowest filter pole decays at
/// `0.38·π b`, so this leaves a transient below 1e-5.
pub const SETTLING_BANDWIDTHS: f64 = 10.0;

/// Largest allowed `bandwidth / center_frequency`.
pub const MAX_RELATIVE_BANDWIDTH: f64 = 0.2;

/// Default `bandwidth / center_frequency`: as wide as the ceiling allows with
/// some margin, so the filter shapes as few lags as possible.
pub const DEFAULT_RELATIVE_BANDWIDTH: f64 = 1.0 / 6.0;

/// Default demodulation bandwidth for a mode at `center_frequency`, Hz.
pub fn default_bandwidth<T: Real>(center_frequency: T) -> T {
    center_frequency * T::lit(DEFAULT_RELATIVE_BANDWIDTH)
}

/// Checks `γ/2π < b < f_c/5`.
pub fn check_bandwidth<T: Real>(gamma: T, center_frequency: T, bandwidth: T) -> Result<()> {
    require_positive("center_frequency", center_frequency)?;
    require_positive("bandwidth", bandwidth)?;
    if !(bandwidth * T::two_pi() > gamma) {
        return Err(Error::Config(format!(
            "bandwidth {bandwidth} Hz must exceed the linewidth gamma/2pi = {} Hz",
            gamma / T::two_pi()
        )));
    }
    if !(bandwidth < center_frequency * T::lit(MAX_RELATIVE_BANDWIDTH)) {
        return Err(Error::Config(format!(
            "bandwidth {bandwidth} Hz must stay below center_frequency/5 = {} Hz",
            center_frequency * T::lit(MAX_RELATIVE_BANDWIDTH)
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
struct Biquad<T> {
    b0: T,
    b1: T,
    b2: T,
    a1: T,
    a2: T,
    z1: T,
    z2: T,
}

impl<T: Real> Biquad<T> {
    fn low_pass(cutoff: T, sample_rate: T, q: T) -> Self {
        let w0 = T::two_pi() * cutoff / sample_rate;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (T::lit(2.0) * q);
        let a0 = T::one() + alpha;
        // 1 - cos w0 computed without cancellation
        let one_minus_cos = T::lit(2.0) * (w0 * T::lit(0.5)).sin().powi(2);
        let b0 = one_minus_cos * T::lit(0.5) / a0;
        Self {
            b0,
            b1: one_minus_cos / a0,
            b2: b0,
            a1: -T::lit(2.0) * cos / a0,
            a2: (T::one() - alpha) / a0,
            z1: T::zero(),
            z2: T::zero(),
        }
    }

    #[inline]
    fn process(&mut self, x: T) -> T {
        let y = self.b0 * x + self.z1;
        self.z1 = self.b1 * x - self.a1 * y + self.z2;
        self.z2 = self.b2 * x - self.a2 * y;
        y
    }
}

#[derive(Debug, Clone, Copy)]
struct Butterworth4<T> {
    stages: [Biquad<T>; 2],
}

impl<T: Real> Butterworth4<T> {
    fn new(cutoff: T, sample_rate: T) -> Self {
        // pole-pair quality factors 1/(2 cos(π/8)) and 1/(2 cos(3π/8))
        let q1 = T::one() / (T::lit(2.0) * (T::PI() / T::lit(8.0)).cos());
        let q2 = T::one() / (T::lit(2.0) * (T::lit(3.0) * T::PI() / T::lit(8.0)).cos());
        Self {
            stages: [
                Biquad::low_pass(cutoff, sample_rate, q1),
                Biquad::low_pass(cutoff, sample_rate, q2),
            ],
        }
    }

    #[inline]
    fn process(&mut self, x: T) -> T {
        let y = self.stages[0].process(x);
        self.stages[1].process(y)
    }
}

/// One decimated output sample of the detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeSample<T> {
    /// In-phase amplitude, m.
    pub i: T,
    /// Quadrature amplitude, m.
    pub q: T,
}

impl<T: Real> EnvelopeSample<T> {
    /// `X² = 2(I² + Q²)`, m².
    pub fn x_squared(&self) -> T {
        T::lit(2.0) * (self.i * self.i + self.q * self.q)
    }

    /// Phase of `I + iQ`, rad.
    pub fn phase(&self) -> T {
        self.q.atan2(self.i)
    }
}

/// Streaming demodulator: feed displacement samples one at a time and
/// receive decimated I/Q samples once the filter has settled.
#[derive(Debug, Clone)]
pub struct EnvelopeDetector<T: Real> {
    center_frequency: T,
    dt: T,
    filters: [Butterworth4<T>; 2],
    decimation: usize,
    settle: usize,
    index: u64,
}

impl<T: Real> EnvelopeDetector<T> {
    pub fn new(dt: T, center_frequency: T, bandwidth: T) -> Result<Self> {
        require_positive("dt", dt)?;
        require_positive("center_frequency", center_frequency)?;
        require_positive("bandwidth", bandwidth)?;
        if !(bandwidth < center_frequency * T::lit(MAX_RELATIVE_BANDWIDTH)) {
            return Err(Error::Config(format!(
                "bandwidth {bandwidth} Hz must stay below center_frequency/5 = {} Hz",
                center_frequency * T::lit(MAX_RELATIVE_BANDWIDTH)
            )));
        }
        let nyquist = T::lit(0.5) / dt;
        if !(center_frequency + bandwidth < nyquist) {
            return Err(Error::Config(format!(
                "center frequency {center_frequency} Hz too close to the Nyquist frequency {nyquist} Hz"
            )));
        }
        let rate = T::one() / dt;
        let cutoff = bandwidth * T::lit(0.5);
        let decimation = (T::one() / (T::lit(4.0) * bandwidth * dt))
            .round()
            .to_usize()
            .unwrap_or(1)
            .max(1);
        let settle = (T::lit(SETTLING_BANDWIDTHS) / (bandwidth * dt))
            .ceil()
            .to_usize()
            .unwrap_or(0);
        Ok(Self {
            center_frequency,
            dt,
            filters: [Butterworth4::new(cutoff, rate), Butterworth4::new(cutoff, rate)],
            decimation,
            settle,
            index: 0,
        })
    }

    /// Output sample interval, s.
    pub fn output_interval(&self) -> T {
        self.dt * T::from_count(self.decimation)
    }

    /// Input samples discarded while the filter settles.
    pub fn settling_samples(&self) -> usize {
        self.settle
    }

    /// Feeds one displacement sample.
    #[inline]
    pub fn push(&mut self, x: T) -> Option<EnvelopeSample<T>> {
        // reduce f·t modulo 1 in f64 so long runs keep full phase accuracy
        let cycles = (self.center_frequency.as_f64() * self.dt.as_f64() * self.index as f64).fract();
        let (s, c) = (T::two_pi() * T::lit(cycles)).sin_cos();
        let root2 = T::SQRT_2();
        let i = self.filters[0].process(root2 * c * x);
        let q = self.filters[1].process(-root2 * s * x);
        let k = self.index;
        self.index += 1;
        if k >= self.settle as u64 && (k - self.settle as u64).is_multiple_of(self.decimation as u64) {
            Some(EnvelopeSample { i, q })
        } else {
            None
        }
    }
}

/// Decimated complex amplitude of one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Demodulated<T: Real = f64> {
    /// Output sample interval, s.
    pub dt: T,
    /// Time of the first output sample relative to the input start, s.
    pub start_time: T,
    pub center_frequency: T,
    pub i: Vec<T>,
    pub q: Vec<T>,
}

impl<T: Real> Demodulated<T> {
    /// `X²(t)`, m².
    pub fn x_squared(&self) -> Vec<T> {
        self.i
            .iter()
            .zip(&self.q)
            .map(|(i, q)| T::lit(2.0) * (*i * *i + *q * *q))
            .collect()
    }

    /// Instantaneous frequency, Hz, from central differences of the
    /// unwrapped I/Q phase. One value per interior output sample.
    pub fn instantaneous_frequency(&self) -> Vec<T> {
        let n = self.i.len();
        if n < 3 {
            return Vec::new();
        }
        let mut phase = Vec::with_capacity(n);
        let mut offset = T::zero();
        let mut prev = T::zero();
        for (k, (i, q)) in self.i.iter().zip(&self.q).enumerate() {
            let p = q.atan2(*i);
            if k > 0 {
                let d = p - prev;
                if d > T::PI() {
                    offset = offset - T::two_pi();
                } else if d < -T::PI() {
                    offset = offset + T::two_pi();
                }
            }
            prev = p;
            phase.push(p + offset);
        }
        (1..n - 1)
            .map(|k| self.center_frequency + (phase[k + 1] - phase[k - 1]) / (T::lit(2.0) * self.dt * T::two_pi()))
            .collect()
    }
}

/// Demodulates `series` (sample interval `dt`) around `center_frequency`.
pub fn demodulate<T: Real>(series: &[T], dt: T, center_frequency: T, bandwidth: T) -> Result<Demodulated<T>> {
    let mut det = EnvelopeDetector::new(dt, center_frequency, bandwidth)?;
    let mut i = Vec::new();
    let mut q = Vec::new();
    for x in series {
        if let Some(s) = det.push(*x) {
            i.push(s.i);
            q.push(s.q);
        }
    }
    if i.is_empty() {
        return Err(Error::Size {
            needed: det.settling_samples() + 1,
            got: series.len(),
        });
    }
    Ok(Demodulated {
        dt: det.output_interval(),
        start_time: dt * T::from_count(det.settling_samples()),
        center_frequency,
        i,
        q,
    })
}

/// Squared envelope `X²(t)` of mode `mode`, decimated to `1/(4b)` with the
/// filter transient removed.
pub fn envelope_squared<T: Real>(
    traj: &Trajectory<T>,
    mode: usize,
    center_frequency: T,
    bandwidth: T,
) -> Result<Envelope<T>> {
    let series = traj
        .samples
        .get(mode)
        .ok_or_else(|| Error::Config(format!("trajectory has no mode {mode}")))?;
    let d = demodulate(series, traj.dt, center_frequency, bandwidth)?;
    Ok(Envelope {
        dt: d.dt,
        start_time: d.start_time,
        bandwidth,
        values: d.x_squared(),
    })
}

/// Uniformly sampled `X²(t)` series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Envelope<T: Real = f64> {
    /// s.
    pub dt: T,
    /// s.
    pub start_time: T,
    /// Demodulation bandwidth, Hz.
    pub bandwidth: T,
    /// m².
    pub values: Vec<T>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate, InitialState, SimulationConfig};
    use crate::model::{OscillatorMode, SphereParams};
    use std::f64::consts::PI;

    #[test]
    fn pure_tone_gives_constant_envelope() {
        let dt = 1.0 / 2580.0;
        let a = 3e-6;
        let x: Vec<f64> = (0..200_000).map(|k| a * (2.0 * PI * 12.9 * k as f64 * dt + 0.3).cos()).collect();
        let d = demodulate(&x, dt, 12.9, 2.0).unwrap();
        for v in d.x_squared() {
            assert!((v / (a * a) - 1.0).abs() < 1e-3, "{v:e}");
        }
        assert!((d.dt - 0.125).abs() < 1e-3);
        for f in d.instantaneous_frequency() {
            assert!((f - 12.9).abs() < 1e-4, "{f}");
        }
    }

    #[test]
    fn detuned_tone_reports_its_frequency() {
        let dt = 1e-3;
        let x: Vec<f64> = (0..100_000).map(|k| (2.0 * PI * 13.05 * k as f64 * dt).cos()).collect();
        let d = demodulate(&x, dt, 12.9, 2.0).unwrap();
        let f = d.instantaneous_frequency();
        assert!((f[f.len() / 2] - 13.05).abs() < 1e-4);
    }

    #[test]
    fn bandwidth_ordering_is_enforced() {
        assert!(check_bandwidth(2.0 * PI * 0.4, 12.9, 2.0).is_ok());
        assert!(check_bandwidth(2.0 * PI * 0.4, 12.9, 0.3).unwrap_err().is_config());
        assert!(check_bandwidth(2.0 * PI * 0.4, 12.9, 3.0).unwrap_err().is_config());
        assert!(EnvelopeDetector::new(1e-3, 12.9, 5.0).is_err());
    }

    #[test]
    fn ring_down_envelope_decays_exponentially() {
        let gamma = 0.5;
        let sphere = SphereParams::from_mass_and_radius(4.7e-15, 1e-6).unwrap();
        let config = SimulationConfig::new(sphere, vec![OscillatorMode::linear("x1", 12.9).unwrap()], gamma, 20.0)
            .with_initial_state(vec![InitialState { x0: 1e-5, p0: 0.0 }]);
        let traj = simulate(&config).unwrap();
        let env = envelope_squared(&traj, 0, 12.9, 2.0).unwrap();
        // the filter delays the envelope by a constant; compare ratios
        let v0 = env.values[0];
        for (k, v) in env.values.iter().enumerate() {
            let predicted = v0 * (-gamma * k as f64 * env.dt).exp();
            assert!((v / predicted - 1.0).abs() < 0.01, "sample {k}: {v:e} vs {predicted:e}");
        }
    }
}

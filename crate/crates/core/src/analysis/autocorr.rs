use std::fmt::Write as _;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::analysis::envelope::Envelope;
use crate::error::{require_positive, Error, Result};
use crate::num::Real;

pub const AUTOCORR_CSV_HEADER: &str = "lag_s,r";

/// Default fit window edge: the lag where `R` first falls below
/// `c + WINDOW_FRACTION·(1 - c)`.
pub const WINDOW_FRACTION: f64 = 0.05;

/// Normalized raw product moment `R(t) = ⟨X²(t)X²(0)⟩ / ⟨X⁴⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Autocorrelation<T: Real = f64> {
    /// Lag spacing, s.
    pub dt: T,
    /// `values[k]` is `R(k·dt)`; `values[0] == 1`.
    pub values: Vec<T>,
    /// `⟨X²⟩² / ⟨X⁴⟩`, the value `R` approaches once `X²` decorrelates.
    pub floor: T,
}

impl<T: Real> Autocorrelation<T> {
    pub fn lag(&self, k: usize) -> T {
        self.dt * T::from_count(k)
    }

    /// CSV with header `lag_s,r`, preceded by `# ` comment lines.
    pub fn to_csv(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            let _ = writeln!(out, "# {c}");
        }
        out.push_str(AUTOCORR_CSV_HEADER);
        out.push('\n');
        for (k, r) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{:e},{:e}", self.lag(k).as_f64(), r.as_f64());
        }
        out
    }
}

/// Autocorrelation of `x_squared` (sample interval `dt`) up to `max_lag`.
///
/// Each lag averages the available products (`N - k` of them), so a
/// constant series gives `R ≡ 1`; the series is not mean-subtracted.
pub fn normalized_energy_autocorrelation<T: Real>(
    x_squared: &[T],
    dt: T,
    max_lag: T,
) -> Result<Autocorrelation<T>> {
    require_positive("dt", dt)?;
    require_positive("max_lag", max_lag)?;
    let lags = (max_lag / dt).floor().to_usize().unwrap_or(usize::MAX);
    let n = x_squared.len();
    let needed = lags.saturating_mul(10).max(10);
    if n < needed {
        return Err(Error::Size { needed, got: n });
    }
    let size = (n + lags + 1).next_power_of_two();
    let mut planner = FftPlanner::<T>::new();
    let forward = planner.plan_fft_forward(size);
    let inverse = planner.plan_fft_inverse(size);
    let mut buf: Vec<Complex<T>> = x_squared
        .iter()
        .map(|x| Complex::new(*x, T::zero()))
        .chain(std::iter::repeat(Complex::new(T::zero(), T::zero())))
        .take(size)
        .collect();
    forward.process(&mut buf);
    for b in &mut buf {
        *b = Complex::new(b.norm_sqr(), T::zero());
    }
    inverse.process(&mut buf);
    let g: Vec<T> = (0..=lags)
        .map(|k| buf[k].re / T::from_count(n - k))
        .collect();
    if !(g[0] > T::zero()) {
        return Err(Error::domain("x_squared", g[0].as_f64(), "series has no energy"));
    }
    let mut values: Vec<T> = g.iter().map(|v| *v / g[0]).collect();
    values[0] = T::one();
    let count = T::from_count(n);
    let mean = x_squared.iter().copied().sum::<T>() / count;
    let mean_square = x_squared.iter().map(|x| *x * *x).sum::<T>() / count;
    Ok(Autocorrelation {
        dt,
        values,
        floor: mean * mean / mean_square,
    })
}

/// Decay model fitted by [`fit_exponential_decay`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayModel {
    /// `R = c + (1 - c) e^{-t/τ}`, pinned to `R(0) = 1`.
    Anchored,
    /// `R = c + a e^{-t/τ}` with free amplitude, for envelopes whose first
    /// lags are shaped by the demodulation filter.
    FreeAmplitude,
    /// `R = c + a e^{-t/τ}` with `c` fixed at the moment floor
    /// `⟨X²⟩²/⟨X⁴⟩` and free amplitude.
    Floor,
    /// `R = c + (1 - c) e^{-t/τ}` with `c` fixed at the moment floor; only
    /// `τ` is fitted.
    #[default]
    Pinned,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct DecayFitOptions<T: Real = f64> {
    /// Upper end of the fit range, s. `None` selects the default window.
    pub window: Option<T>,
    /// Lags below this are excluded from the fit, s.
    pub skip: T,
    pub model: DecayModel,
    /// Demodulation bandwidth `b` of the envelope, Hz. When set, the decaying
    /// component is the squared coherence of a Lorentzian line seen through
    /// the envelope filter instead of a bare exponential.
    pub bandwidth: Option<T>,
}

impl<T: Real> Default for DecayFitOptions<T> {
    fn default() -> Self {
        Self {
            window: None,
            skip: T::zero(),
            model: DecayModel::default(),
            bandwidth: None,
        }
    }
}

/// Damping rate from an energy autocorrelation fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct DampingEstimate<T: Real = f64> {
    /// Angular rate, s⁻¹.
    pub gamma: T,
    /// `1/γ`, s.
    pub tau: T,
    /// RMS residual relative to the decaying amplitude.
    pub fit_residual: T,
    /// Upper end of the fit range, s.
    pub fit_window: T,
    /// Fitted asymptote `c`.
    pub asymptote: T,
    /// Fitted amplitude of the decaying component.
    pub amplitude: T,
}

struct LinearFit<T> {
    c: T,
    a: T,
    rss: T,
}

/// Best asymptote and amplitude for fixed `tau` over lags `lo..=hi`.
fn profile<T: Real>(
    r: &Autocorrelation<T>,
    lo: usize,
    hi: usize,
    tau: T,
    model: DecayModel,
    bandwidth: Option<T>,
) -> LinearFit<T> {
    let shape: Vec<T> = (lo..=hi).map(|k| decay_shape(r.lag(k), tau, bandwidth)).collect();
    let pts = || shape.iter().copied().zip(r.values[lo..=hi].iter().copied());
    match model {
        DecayModel::Anchored => {
            // r - e = c (1 - e)
            let (mut num, mut den) = (T::zero(), T::zero());
            for (e, y) in pts() {
                num = num + (y - e) * (T::one() - e);
                den = den + (T::one() - e) * (T::one() - e);
            }
            let c = if den > T::zero() { num / den } else { T::zero() };
            let rss = pts()
                .map(|(e, y)| {
                    let d = y - c - (T::one() - c) * e;
                    d * d
                })
                .sum();
            LinearFit { c, a: T::one() - c, rss }
        }
        DecayModel::FreeAmplitude => {
            let n = T::from_count(hi - lo + 1);
            let (mut se, mut sy, mut see, mut sey) = (T::zero(), T::zero(), T::zero(), T::zero());
            for (e, y) in pts() {
                se = se + e;
                sy = sy + y;
                see = see + e * e;
                sey = sey + e * y;
            }
            let det = n * see - se * se;
            let (c, a) = if det > T::zero() {
                ((sy * see - se * sey) / det, (n * sey - se * sy) / det)
            } else {
                (sy / n, T::zero())
            };
            let rss = pts()
                .map(|(e, y)| {
                    let d = y - c - a * e;
                    d * d
                })
                .sum();
            LinearFit { c, a, rss }
        }
        DecayModel::Floor => {
            let c = r.floor;
            let (mut num, mut den) = (T::zero(), T::zero());
            for (e, y) in pts() {
                num = num + e * (y - c);
                den = den + e * e;
            }
            let a = if den > T::zero() { num / den } else { T::zero() };
            let rss = pts()
                .map(|(e, y)| {
                    let d = y - c - a * e;
                    d * d
                })
                .sum();
            LinearFit { c, a, rss }
        }
        DecayModel::Pinned => {
            let c = r.floor;
            let a = T::one() - c;
            let rss = pts()
                .map(|(e, y)| {
                    let d = y - c - a * e;
                    d * d
                })
                .sum();
            LinearFit { c, a, rss }
        }
    }
}

/// Normalized decaying component at lag `t`: `e^{-t/τ}`, or with a
/// demodulation bandwidth `b` the squared coherence `|ρ(t)|²` of a complex
/// envelope with Lorentzian spectrum `1/(ν² + h²)`, `h = 1/(4πτ)`, passed
/// through a fourth-order Butterworth low-pass at `b/2`.
pub fn decay_shape<T: Real>(t: T, tau: T, bandwidth: Option<T>) -> T {
    let Some(b) = bandwidth else {
        return (-t / tau).exp();
    };
    let coherence = |t: T| -> T {
        // ∫ e^{2πiνt} / ((ν² + h²)(1 + (ν/f_c)⁸)) dν by residues in the upper half plane
        let fc = b * T::lit(0.5);
        let h = T::one() / (T::lit(4.0) * T::PI() * tau);
        let lorentz = T::PI() * (-t / (T::lit(2.0) * tau)).exp() / (h * (T::one() + (h / fc).powi(8)));
        let mut poles = Complex::new(T::zero(), T::zero());
        for k in 0..4 {
            let angle = T::PI() * T::from_count(2 * k + 1) / T::lit(8.0);
            let p = Complex::from_polar(fc, angle);
            // residue of 1/(1 + (ν/f_c)⁸) at p is -p/8
            let phase = (Complex::new(T::zero(), T::two_pi() * t) * p).exp();
            poles = poles - p * phase / ((p * p + h * h) * T::lit(8.0));
        }
        lorentz + (Complex::new(T::zero(), T::two_pi()) * poles).re
    };
    let rho = coherence(t) / coherence(T::zero());
    rho * rho
}

/// Golden-section search for the `tau` minimizing the profiled residual.
fn fit_tau<T: Real>(
    r: &Autocorrelation<T>,
    lo: usize,
    hi: usize,
    model: DecayModel,
    bandwidth: Option<T>,
) -> (T, LinearFit<T>) {
    let span = r.lag(hi.max(1));
    let (mut a, mut b) = ((r.dt * T::lit(0.1)).ln(), (span * T::lit(1e3)).ln());
    let g = T::lit(0.618_033_988_749_894_8);
    let cost = |log_tau: T| profile(r, lo, hi, log_tau.exp(), model, bandwidth).rss;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (cost(x1), cost(x2));
    for _ in 0..200 {
        if (b - a).abs() < T::lit(1e-10) {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = cost(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = cost(x2);
        }
    }
    let tau = (T::lit(0.5) * (a + b)).exp();
    (tau, profile(r, lo, hi, tau, model, bandwidth))
}

/// Index of the first lag with `R < c + WINDOW_FRACTION (1 - c)`.
fn default_window_index<T: Real>(r: &Autocorrelation<T>, c: T) -> Option<usize> {
    let level = c + T::lit(WINDOW_FRACTION) * (T::one() - c);
    r.values.iter().position(|v| *v < level)
}

/// Least-squares fit of the decaying component of `r`; `γ = 1/τ`.
pub fn fit_exponential_decay<T: Real>(r: &Autocorrelation<T>, options: DecayFitOptions<T>) -> Result<DampingEstimate<T>> {
    let n = r.values.len();
    if n < 4 {
        return Err(Error::Size { needed: 4, got: n });
    }
    let lo = (options.skip / r.dt).ceil().to_usize().unwrap_or(0);
    let hi = match options.window {
        Some(w) => {
            require_positive("fit_window", w)?;
            let k = (w / r.dt).floor().to_usize().unwrap_or(usize::MAX);
            if k >= n {
                return Err(Error::Config(format!(
                    "fit window {w} s exceeds the autocorrelation support {} s",
                    r.lag(n - 1)
                )));
            }
            k
        }
        None if matches!(options.model, DecayModel::Floor | DecayModel::Pinned) => default_window_index(r, r.floor)
            .ok_or_else(|| Error::Fit("autocorrelation never reaches its floor; increase max_lag".into()))?
            .max(lo + 3)
            .min(n - 1),
        None => {
            // asymptote guess from the last quarter of the lags, refined once
            let tail = &r.values[3 * n / 4..];
            let c0 = tail.iter().copied().sum::<T>() / T::from_count(tail.len());
            let k0 = default_window_index(r, c0).ok_or_else(|| {
                Error::Fit("autocorrelation never reaches its asymptote; increase max_lag".into())
            })?;
            let hi0 = k0.max(lo + 3).min(n - 1);
            let (_, first) = fit_tau(r, lo, hi0, options.model, options.bandwidth);
            default_window_index(r, first.c)
                .unwrap_or(hi0)
                .max(lo + 3)
                .min(n - 1)
        }
    };
    if hi < lo + 3 {
        return Err(Error::Size {
            needed: lo + 4,
            got: hi + 1,
        });
    }
    let (tau, fit) = fit_tau(r, lo, hi, options.model, options.bandwidth);
    let span = r.lag(hi);
    if !(tau.is_finite() && tau > T::zero()) || tau > span * T::lit(100.0) || !(fit.a > T::zero()) {
        return Err(Error::Fit(format!(
            "no decaying component (tau = {tau}, amplitude = {})",
            fit.a
        )));
    }
    let rms = (fit.rss / T::from_count(hi - lo + 1)).sqrt();
    Ok(DampingEstimate {
        gamma: T::one() / tau,
        tau,
        fit_residual: rms / fit.a,
        fit_window: span,
        asymptote: fit.c,
        amplitude: fit.a,
    })
}

/// Lags kept by [`damping_from_envelope`], as a fraction of the record.
pub const MAX_LAG_FRACTION: f64 = 0.1;

/// Damping rate of an envelope record: the energy autocorrelation over the
/// first tenth of the record, fitted with the default options and the
/// envelope's own bandwidth.
pub fn damping_from_envelope<T: Real>(envelope: &Envelope<T>) -> Result<DampingEstimate<T>> {
    let span = envelope.dt * T::from_count(envelope.values.len());
    let r = normalized_energy_autocorrelation(&envelope.values, envelope.dt, span * T::lit(MAX_LAG_FRACTION))?;
    fit_exponential_decay(
        &r,
        DecayFitOptions {
            bandwidth: Some(envelope.bandwidth),
            ..Default::default()
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(dt: f64, tau: f64, c: f64, n: usize) -> Autocorrelation {
        Autocorrelation {
            dt,
            values: (0..n).map(|k| c + (1.0 - c) * (-(k as f64) * dt / tau).exp()).collect(),
            floor: c,
        }
    }

    #[test]
    fn r_zero_is_one_and_constant_series_is_flat() {
        let r = normalized_energy_autocorrelation(&vec![2.5_f64; 1000], 0.1, 5.0).unwrap();
        assert_eq!(r.values[0], 1.0);
        for v in &r.values {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_direct_sum() {
        let x: Vec<f64> = (0..500).map(|k| 1.0 + (k as f64 * 0.37).sin().powi(2)).collect();
        let r = normalized_energy_autocorrelation(&x, 1.0, 40.0).unwrap();
        let g = |k: usize| (0..x.len() - k).map(|i| x[i] * x[i + k]).sum::<f64>() / (x.len() - k) as f64;
        for k in [0, 1, 7, 40] {
            assert!((r.values[k] - g(k) / g(0)).abs() < 1e-12);
        }
    }

    #[test]
    fn short_series_is_a_size_error() {
        assert!(matches!(
            normalized_energy_autocorrelation(&[1.0; 50], 1.0, 10.0),
            Err(Error::Size { .. })
        ));
    }

    #[test]
    fn recovers_long_decay_time() {
        // τ = 4700 s, i.e. γ/2π ≈ 34 μHz
        let r = synthetic(50.0, 4700.0, 0.0, 2000);
        for model in [
            DecayModel::Anchored,
            DecayModel::FreeAmplitude,
            DecayModel::Floor,
            DecayModel::Pinned,
        ] {
            let fit = fit_exponential_decay(
                &r,
                DecayFitOptions {
                    window: Some(30_000.0),
                    model,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!((fit.tau / 4700.0 - 1.0).abs() < 1e-3, "{model:?}: {}", fit.tau);
            let f = fit.gamma / (2.0 * std::f64::consts::PI);
            assert!((f / 34e-6 - 1.0).abs() < 0.01, "{f}");
            assert!((fit.tau * fit.gamma - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn default_window_with_floor() {
        let r = synthetic(0.05, 0.4, 0.5, 400);
        let fit = fit_exponential_decay(&r, DecayFitOptions::default()).unwrap();
        assert!((fit.tau / 0.4 - 1.0).abs() < 1e-6);
        assert!((fit.asymptote - 0.5).abs() < 1e-6);
        // c + 0.05 (1 - c) is reached at τ ln 20
        assert!((fit.fit_window - 0.4 * 20f64.ln()).abs() < 0.06, "{}", fit.fit_window);
    }

    #[test]
    fn flat_input_is_a_fit_error() {
        let r = Autocorrelation {
            dt: 1.0,
            values: (0..100).map(|k| if k == 0 { 1.0 } else { 1.0 + 1e-3 * (k as f64) }).collect(),
            floor: 0.5,
        };
        let err = fit_exponential_decay(
            &r,
            DecayFitOptions {
                window: Some(50.0),
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Fit(_)), "{err}");
    }

    #[test]
    fn floor_of_exponential_energy_is_one_half() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Exp1};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..400_000).map(|_| Exp1.sample(&mut rng)).collect();
        let r = normalized_energy_autocorrelation(&x, 1.0, 100.0).unwrap();
        assert!((r.floor - 0.5).abs() < 0.01, "{}", r.floor);
        // uncorrelated draws sit on the floor at every non-zero lag
        assert!((r.values[5] - r.floor).abs() < 0.01);
    }

    #[test]
    fn filtered_shape_reduces_to_exponential_for_wide_filters() {
        for t in [0.0, 0.3, 1.0, 2.5] {
            let bare = decay_shape(t, 0.4, None);
            let wide: f64 = decay_shape(t, 0.4, Some(1e6));
            assert!((wide - bare).abs() < 1e-6, "{t}: {wide} vs {bare}");
        }
        assert_eq!(decay_shape(0.0, 0.4, Some(2.15)), 1.0);
    }

    #[test]
    fn filtered_shape_matches_direct_quadrature() {
        use crate::quad::{integrate, QuadOptions};
        let (tau, b) = (0.4_f64, 2.15);
        let (h, fc) = (1.0 / (4.0 * std::f64::consts::PI * tau), b / 2.0);
        let coherence = |t: f64| {
            let f = |nu: f64| (2.0 * std::f64::consts::PI * nu * t).cos() / ((nu * nu + h * h) * (1.0 + (nu / fc).powi(8)));
            let opts = QuadOptions {
                rel_tol: 1e-11,
                abs_tol: 1e-14,
                max_intervals: 20_000,
            };
            2.0 * integrate(f, 0.0, 40.0 * fc, opts).unwrap().value
        };
        let c0 = coherence(0.0);
        for t in [0.1, 0.4, 1.0, 2.0] {
            let rho = coherence(t) / c0;
            let want = rho * rho;
            let got = decay_shape(t, tau, Some(b));
            assert!((got - want).abs() < 1e-6, "{t}: {got} vs {want}");
        }
        // the filter slows the early decay relative to e^{-t/τ}
        assert!(decay_shape(0.1, tau, Some(b)) > decay_shape(0.1, tau, None));
    }

    #[test]
    fn filtered_fit_recovers_tau_from_filtered_shape() {
        let (tau, b, c) = (0.4, 2.15, 0.5);
        let r = Autocorrelation {
            dt: 1.0 / (4.0 * b),
            values: (0..200).map(|k| c + (1.0 - c) * decay_shape(k as f64 / (4.0 * b), tau, Some(b))).collect(),
            floor: c,
        };
        let fit = fit_exponential_decay(
            &r,
            DecayFitOptions {
                bandwidth: Some(b),
                ..Default::default()
            },
        )
        .unwrap();
        assert!((fit.tau / tau - 1.0).abs() < 1e-6, "{}", fit.tau);
        let naive = fit_exponential_decay(&r, DecayFitOptions::default()).unwrap();
        assert!((naive.tau / tau - 1.0).abs() > 0.02, "{}", naive.tau);
    }
}

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{require_non_negative, require_positive, Error, Result};
use crate::model::{k_b, OscillatorMode};
use crate::num::Real;

/// Minimum sample count accepted by [`fit_gaussian`].
pub const MIN_GAUSSIAN_SAMPLES: usize = 100;

/// Name of the excess-temperature convention, embedded in bound reports.
pub const EXCESS_CONVENTION: &str =
    "one-sigma inputs; bound = max(dT, 0) + z * sqrt(sigma_hv^2 + sigma_mv^2), z two-sided gaussian quantile";

/// Maximum-likelihood Gaussian fit of a position histogram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct GaussianFit<T: Real = f64> {
    /// m.
    pub mean: T,
    /// m.
    pub sigma: T,
    /// Standard error of `sigma`, m.
    pub sigma_stderr: T,
    pub samples: usize,
    /// Number of independent samples assumed for `sigma_stderr`.
    pub effective_samples: T,
}

pub fn fit_gaussian<T: Real>(samples: &[T]) -> Result<GaussianFit<T>> {
    let mut acc = MomentAccumulator::new();
    for x in samples {
        acc.push(*x);
    }
    acc.fit()
}

/// Running mean and variance (Welford), for fitting streamed samples without
/// storing them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentAccumulator<T> {
    count: usize,
    mean: T,
    m2: T,
}

impl<T: Real> Default for MomentAccumulator<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> MomentAccumulator<T> {
    pub fn new() -> Self {
        Self {
            count: 0,
            mean: T::zero(),
            m2: T::zero(),
        }
    }

    #[inline]
    pub fn push(&mut self, x: T) {
        self.count += 1;
        let d = x - self.mean;
        self.mean = self.mean + d / T::from_count(self.count);
        self.m2 = self.m2 + d * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Maximum-likelihood Gaussian fit of the samples pushed so far, with the
    /// i.i.d. standard error.
    pub fn fit(&self) -> Result<GaussianFit<T>> {
        if self.count < MIN_GAUSSIAN_SAMPLES {
            return Err(Error::Size {
                needed: MIN_GAUSSIAN_SAMPLES,
                got: self.count,
            });
        }
        let n = T::from_count(self.count);
        let var = self.m2 / n;
        if !(var > T::zero()) {
            return Err(Error::domain("sigma", var.as_f64(), "degenerate sample (zero variance)"));
        }
        let sigma = var.sqrt();
        Ok(GaussianFit {
            mean: self.mean,
            sigma,
            sigma_stderr: sigma / (T::lit(2.0) * n).sqrt(),
            samples: self.count,
            effective_samples: n,
        })
    }
}

impl<T: Real> GaussianFit<T> {
    /// Re-scales the standard error for samples of an oscillator with damping
    /// rate `gamma` taken every `dt`: `N_eff = N·dt·γ` (capped at `N`), the
    /// count for which `σ_T/T = sqrt(2/(γ t))`.
    pub fn correlated(mut self, dt: T, gamma: T) -> Result<Self> {
        require_positive("dt", dt)?;
        require_positive("gamma", gamma)?;
        let n = T::from_count(self.samples);
        let n_eff = (n * dt * gamma).min(n);
        self.effective_samples = n_eff;
        self.sigma_stderr = self.sigma / (T::lit(2.0) * n_eff).sqrt();
        Ok(self)
    }
}

/// Effective temperature of one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct TemperatureEstimate<T: Real = f64> {
    /// K.
    pub t_eff: T,
    /// One-standard-deviation uncertainty, K.
    pub sigma_1s: Option<T>,
    /// Measurement duration, s.
    pub t_mea: T,
    pub mode_label: String,
}

impl<T: Real> TemperatureEstimate<T> {
    /// Estimate supplied directly, e.g. a published value.
    pub fn new(t_eff: T, sigma_1s: T, t_mea: T, mode_label: impl Into<String>) -> Result<Self> {
        require_positive("t_eff", t_eff)?;
        require_non_negative("sigma_1s", sigma_1s)?;
        require_non_negative("t_mea", t_mea)?;
        Ok(Self {
            t_eff,
            sigma_1s: Some(sigma_1s),
            t_mea,
            mode_label: mode_label.into(),
        })
    }

    /// Attaches the statistical uncertainty for a run of length `t_mea`
    /// at damping rate `gamma`.
    pub fn with_measurement(mut self, gamma: T, t_mea: T) -> Result<Self> {
        self.sigma_1s = Some(temperature_uncertainty(self.t_eff, gamma, t_mea)?);
        self.t_mea = t_mea;
        Ok(self)
    }
}

/// `T_eff = m ω₀² σ² / k_B`; the uncertainty is left unset.
pub fn effective_temperature<T: Real>(
    sigma: T,
    mode: &OscillatorMode<T>,
    mass: T,
) -> Result<TemperatureEstimate<T>> {
    require_positive("sigma", sigma)?;
    require_positive("mass", mass)?;
    Ok(TemperatureEstimate {
        t_eff: mode.spring_constant(mass) * sigma * sigma / k_b::<T>(),
        sigma_1s: None,
        t_mea: T::zero(),
        mode_label: mode.label.clone(),
    })
}

/// One-sigma uncertainty of an equipartition temperature measured over
/// `t_mea`: `T_eff sqrt(2/(γ t_mea))`.
pub fn temperature_uncertainty<T: Real>(t_eff: T, gamma: T, t_mea: T) -> Result<T> {
    require_positive("t_eff", t_eff)?;
    require_positive("gamma", gamma)?;
    require_positive("t_mea", t_mea)?;
    Ok(t_eff * (T::lit(2.0) / (gamma * t_mea)).sqrt())
}

/// Two-sided Gaussian quantile: `z(0.95) = 1.96`.
pub fn two_sided_z(confidence: f64) -> Result<f64> {
    if !(confidence > 0.5 && confidence < 1.0) {
        return Err(Error::domain("confidence", confidence, "must lie in (0.5, 1)"));
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(0.5 * (1.0 + confidence)))
}

/// Excess temperature of the high-vacuum run over the calibration run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ExcessTemperature<T: Real = f64> {
    /// Central value `T_hv - T_mv`, K (may be negative).
    pub delta_t: T,
    /// Upper bound at `confidence`, K.
    pub sigma_delta_t: T,
    pub confidence: T,
    pub z: T,
    /// Set when the central value was negative and clamped to zero.
    pub clamped: bool,
}

pub fn excess_temperature_bound<T: Real>(
    hv: &TemperatureEstimate<T>,
    mv: &TemperatureEstimate<T>,
    confidence: T,
) -> Result<ExcessTemperature<T>> {
    let (Some(s_hv), Some(s_mv)) = (hv.sigma_1s, mv.sigma_1s) else {
        return Err(Error::Config(
            "both temperature estimates need an uncertainty".into(),
        ));
    };
    let z = T::lit(two_sided_z(confidence.as_f64())?);
    let delta_t = hv.t_eff - mv.t_eff;
    let clamped = delta_t < T::zero();
    let sigma_delta_t = delta_t.max(T::zero()) + z * (s_hv * s_hv + s_mv * s_mv).sqrt();
    Ok(ExcessTemperature {
        delta_t,
        sigma_delta_t,
        confidence,
        z,
        clamped,
    })
}

/// Force PSD corresponding to a temperature excess.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ExcessPsd<T: Real = f64> {
    /// N²/Hz.
    pub psd: T,
    /// The temperature excess was negative and mapped to zero.
    pub negative_clamped: bool,
}

/// `δS = 2 γ m k_B δT`, with negative `δT` mapped to zero and flagged.
pub fn excess_force_psd<T: Real>(delta_t: T, mass: T, gamma: T) -> Result<ExcessPsd<T>> {
    require_positive("mass", mass)?;
    require_positive("gamma", gamma)?;
    if !delta_t.is_finite() {
        return Err(Error::domain("delta_t", delta_t.as_f64(), "must be finite"));
    }
    let negative_clamped = delta_t < T::zero();
    Ok(ExcessPsd {
        psd: T::lit(2.0) * gamma * mass * k_b::<T>() * delta_t.max(T::zero()),
        negative_clamped,
    })
}

//! Stochastic integration of the trapped sphere's centre-of-mass motion.
//!
//! Each mode obeys
//!
//! ```text
//! m ẍᵢ + m γ ẋᵢ + m ωᵢ² xᵢ + αᵢ xᵢ³ + β xⱼ² xᵢ + m ωᵢ² ζᵢ(t) xᵢ = fᵢ(t)
//! ```
//!
//! with `fᵢ` white of PSD `S_th + S_CSL + S_extra` and `ζᵢ` white of
//! intensity `ς²`, all independent. The z axis is not modelled.

mod integrator;
pub mod io;
mod stationary;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use integrator::{Scheme, Simulator};
pub use stationary::{stationary_position_density, StationaryDensity, StationaryForm};

use crate::error::{require_positive, Error, Result};
use crate::model::{thermal_force_psd, NoiseConfig, OscillatorMode, SphereParams};
use crate::num::Real;

/// Default integration step as a fraction of the fastest mode period.
pub const STEPS_PER_PERIOD: f64 = 200.0;
/// Largest allowed step, in fractions of the fastest mode period.
pub const MIN_STEPS_PER_PERIOD: f64 = 50.0;
/// Noisy runs discard this many damping times before recording.
pub const BURN_IN_DAMPING_TIMES: f64 = 5.0;

/// Initial displacement and momentum of one mode.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct InitialState<T: Real = f64> {
    pub x0: T,
    pub p0: T,
}

/// Everything needed to reproduce one stochastic run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct SimulationConfig<T: Real = f64> {
    pub sphere: SphereParams<T>,
    /// One or two modes.
    pub modes: Vec<OscillatorMode<T>>,
    /// Cross-mode cubic coupling β, kg·m⁻²·s⁻².
    pub coupling_beta: T,
    /// Isotropic angular damping rate γ, s⁻¹.
    pub gamma: T,
    /// Noise acting on each mode.
    pub noise: Vec<NoiseConfig<T>>,
    /// Recorded duration, s (burn-in excluded).
    pub duration: T,
    /// Integration step, s.
    pub dt: T,
    pub seed: u64,
    pub initial_state: Vec<InitialState<T>>,
    /// Keep every n-th integration step.
    pub record_every: usize,
    pub scheme: Scheme,
    /// Discarded lead-in, s. `None` selects 5/γ for noisy runs and 0 otherwise.
    pub burn_in: Option<T>,
}

impl<T: Real> SimulationConfig<T> {
    /// Noise-free configuration with the default step and integrator.
    pub fn new(sphere: SphereParams<T>, modes: Vec<OscillatorMode<T>>, gamma: T, duration: T) -> Self {
        let f_max = modes
            .iter()
            .map(|m| m.frequency)
            .fold(T::zero(), T::max);
        let n = modes.len();
        Self {
            sphere,
            modes,
            coupling_beta: T::zero(),
            gamma,
            noise: vec![NoiseConfig::default(); n],
            duration,
            dt: T::one() / (T::lit(STEPS_PER_PERIOD) * f_max),
            seed: 0,
            initial_state: vec![InitialState::default(); n],
            record_every: 1,
            scheme: Scheme::default(),
            burn_in: None,
        }
    }

    /// Thermal drive `2 γ m k_B T` on every mode, other noise untouched.
    pub fn with_thermal_bath(mut self, temperature: T) -> Result<Self> {
        let psd = thermal_force_psd(self.gamma, self.sphere.mass(), temperature)?;
        for n in &mut self.noise {
            n.thermal_psd = psd;
        }
        Ok(self)
    }

    pub fn with_noise(mut self, noise: NoiseConfig<T>) -> Self {
        self.noise = vec![noise; self.modes.len()];
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_dt(mut self, dt: T) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_coupling(mut self, beta: T) -> Self {
        self.coupling_beta = beta;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_initial_state(mut self, states: Vec<InitialState<T>>) -> Self {
        self.initial_state = states;
        self
    }

    pub fn with_burn_in(mut self, burn_in: T) -> Self {
        self.burn_in = Some(burn_in);
        self
    }

    /// Records roughly `rate` samples per second (never more than one per step).
    pub fn with_sample_rate(mut self, rate: T) -> Self {
        let every = (T::one() / (rate * self.dt)).floor().to_usize().unwrap_or(1);
        self.record_every = every.max(1);
        self
    }

    pub fn is_noisy(&self) -> bool {
        self.noise.iter().any(|n| !n.is_silent())
    }

    pub fn sample_interval(&self) -> T {
        self.dt * T::from_count(self.record_every)
    }

    /// Number of recorded samples per mode.
    pub fn sample_count(&self) -> usize {
        (self.duration / self.sample_interval())
            .floor()
            .to_usize()
            .unwrap_or(0)
    }

    pub fn effective_burn_in(&self) -> T {
        match self.burn_in {
            Some(b) => b,
            None if self.is_noisy() => T::lit(BURN_IN_DAMPING_TIMES) / self.gamma,
            None => T::zero(),
        }
    }

    pub fn max_frequency(&self) -> T {
        self.modes.iter().map(|m| m.frequency).fold(T::zero(), T::max)
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() || self.modes.len() > 2 {
            return Err(Error::Config(format!(
                "expected 1 or 2 modes, got {}",
                self.modes.len()
            )));
        }
        if self.noise.len() != self.modes.len() || self.initial_state.len() != self.modes.len() {
            return Err(Error::Config(
                "noise and initial_state need one entry per mode".into(),
            ));
        }
        require_positive("gamma", self.gamma)?;
        require_positive("dt", self.dt)?;
        if !(self.duration >= self.dt) {
            return Err(Error::Config(format!(
                "duration {} shorter than dt {}",
                self.duration, self.dt
            )));
        }
        let limit = T::one() / (T::lit(MIN_STEPS_PER_PERIOD) * self.max_frequency());
        if self.dt > limit {
            return Err(Error::Config(format!(
                "dt {} exceeds stability limit {} (1/(50 f_max))",
                self.dt, limit
            )));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        if let Some(b) = self.burn_in {
            crate::error::require_non_negative("burn_in", b)?;
        }
        if self.modes.len() == 1 && self.coupling_beta != T::zero() {
            return Err(Error::Config("coupling_beta requires two modes".into()));
        }
        for n in &self.noise {
            n.validate()?;
        }
        for s in &self.initial_state {
            if !s.x0.is_finite() || !s.p0.is_finite() {
                return Err(Error::Config("initial state must be finite".into()));
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON encoding, hex encoded.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Uniformly sampled displacement record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Trajectory<T: Real = f64> {
    /// Sample interval, s.
    pub dt: T,
    /// One displacement series per mode, m.
    pub samples: Vec<Vec<T>>,
    pub seed: u64,
    pub config_digest: String,
    /// Discarded lead-in before the first sample, s.
    pub burn_in: T,
    pub mode_labels: Vec<String>,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration(&self) -> T {
        self.dt * T::from_count(self.len())
    }

    pub fn mode(&self, i: usize) -> &[T] {
        &self.samples[i]
    }

    /// Single-mode trajectory wrapping an arbitrary series, for analysis of
    /// external or synthetic data.
    pub fn from_series(dt: T, series: Vec<T>) -> Self {
        Self {
            dt,
            samples: vec![series],
            seed: 0,
            config_digest: String::new(),
            burn_in: T::zero(),
            mode_labels: vec!["x1".into()],
        }
    }
}

/// Summary of a streamed run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunInfo<T> {
    pub sample_interval: T,
    pub samples: usize,
    pub burn_in: T,
    pub config_digest: String,
}

/// Runs the simulation and hands every recorded sample (one displacement per
/// mode) to `sink`, without storing the trajectory.
pub fn simulate_stream<T, F>(config: &SimulationConfig<T>, mut sink: F) -> Result<RunInfo<T>>
where
    T: Real,
    StandardNormal: Distribution<T>,
    F: FnMut(&[T]),
{
    config.validate()?;
    let mut sim = Simulator::new(config);
    let burn_steps = (config.effective_burn_in() / config.dt)
        .ceil()
        .to_u64()
        .unwrap_or(0);
    for _ in 0..burn_steps {
        sim.step()?;
    }
    let n = config.sample_count();
    let mut buf = vec![T::zero(); config.modes.len()];
    for _ in 0..n {
        for _ in 0..config.record_every {
            sim.step()?;
        }
        for (b, x) in buf.iter_mut().zip(sim.positions()) {
            *b = *x;
        }
        sink(&buf);
    }
    Ok(RunInfo {
        sample_interval: config.sample_interval(),
        samples: n,
        burn_in: T::from_count(burn_steps as usize) * config.dt,
        config_digest: config.digest(),
    })
}

/// Integrates `config` and returns the recorded trajectory. Identical
/// configurations (seed included) give bit-identical output.
pub fn simulate<T>(config: &SimulationConfig<T>) -> Result<Trajectory<T>>
where
    T: Real,
    StandardNormal: Distribution<T>,
{
    let n = config.sample_count();
    let mut samples: Vec<Vec<T>> = config.modes.iter().map(|_| Vec::with_capacity(n)).collect();
    let info = simulate_stream(config, |xs| {
        for (s, x) in samples.iter_mut().zip(xs) {
            s.push(*x);
        }
    })?;
    Ok(Trajectory {
        dt: info.sample_interval,
        samples,
        seed: config.seed,
        config_digest: info.config_digest,
        burn_in: info.burn_in,
        mode_labels: config.modes.iter().map(|m| m.label.clone()).collect(),
    })
}

#[cfg(test)]
mod tests;

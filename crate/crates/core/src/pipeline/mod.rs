//! The full virtual experiment: a gas-damped calibration run fixes `T_env`,
//! a low-damping run measures `T_eff`, and the excess budget is turned into
//! an exclusion curve. Also replays published inputs and reproduces the
//! published tables.

pub mod presets;
pub mod published;
mod tables;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use tables::{reproduce_tables, DeviationKind, Fidelity, Table, TableCell, TableReport, Target};

use crate::analysis::{
    check_bandwidth, damping_from_envelope, damping_from_radius, default_bandwidth, effective_temperature,
    excess_force_psd, excess_temperature_bound, radius_from_damping, radius_from_equipartition, DampingEstimate,
    Envelope, EnvelopeDetector, MomentAccumulator, TemperatureEstimate, DEFAULT_RELATIVE_BANDWIDTH,
    EXCESS_CONVENTION, MAX_LAG_FRACTION, SETTLING_BANDWIDTHS, WINDOW_FRACTION,
};
use crate::csl::{exclusion_curve, ExclusionCurve, RADIAL_CUTOFF, SERIES_THRESHOLD};
use crate::dynamics::io::tool_tag;
use crate::dynamics::{simulate_stream, SimulationConfig, BURN_IN_DAMPING_TIMES};
use crate::error::{require_positive, Error, Result};
use crate::model::{Environment, OscillatorMode, SphereParams, CONSTANTS, MEAN_SPEED_MODEL};

/// Smallest allowed `γ_MV / γ_HV`.
pub const MIN_DAMPING_RATIO: f64 = 100.0;

/// Label of curves produced by [`run_virtual_experiment`] and [`replay_bound`].
pub const CURVE_SOURCE: &str = "this_experiment";

/// One vacuum regime: the stochastic run and the gas it represents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub label: String,
    pub simulation: SimulationConfig,
    pub environment: Environment,
}

impl Regime {
    /// Regime whose damping is the kinetic gas damping
    /// `γ = (16/π) P/(ν R ρ)` and whose only noise is the matching thermal
    /// bath at the environment temperature.
    pub fn gas_damped(
        label: impl Into<String>,
        sphere: SphereParams,
        modes: Vec<OscillatorMode>,
        environment: Environment,
        duration: f64,
    ) -> Result<Self> {
        let nu = environment.mean_gas_speed()?;
        let gamma = damping_from_radius(sphere.radius(), environment.pressure, nu, sphere.density())?;
        let simulation =
            SimulationConfig::new(sphere, modes, gamma, duration).with_thermal_bath(environment.temperature)?;
        Ok(Self {
            label: label.into(),
            simulation,
            environment,
        })
    }
}

/// Gas pressure that produces damping `gamma` on `sphere`, Pa.
pub fn pressure_for_damping(gamma: f64, sphere: &SphereParams, mean_speed: f64) -> Result<f64> {
    require_positive("gamma", gamma)?;
    require_positive("mean_speed", mean_speed)?;
    Ok(gamma * std::f64::consts::PI * mean_speed * sphere.radius() * sphere.density() / 16.0)
}

/// Analysis results for one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeMeasurement {
    pub label: String,
    pub frequency_hz: f64,
    /// Position standard deviation, m.
    pub sigma_m: f64,
    pub damping: DampingEstimate,
    /// Envelope bandwidth, Hz.
    pub bandwidth_hz: f64,
    pub temperature: TemperatureEstimate,
    /// Equipartition radius at the environment temperature, m.
    pub radius_equipartition_m: f64,
}

/// Analysis results for one regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeMeasurement {
    pub label: String,
    pub config_digest: String,
    pub seed: u64,
    /// Damping rate used by the simulation, s⁻¹.
    pub input_gamma: f64,
    /// Mean of the per-mode fits, s⁻¹.
    pub gamma: f64,
    /// Inverse-variance combination of the per-mode temperatures, with the
    /// uncertainty from the fitted damping rate.
    pub temperature: TemperatureEstimate,
    pub modes: Vec<ModeMeasurement>,
    /// Recorded duration, s.
    pub duration_s: f64,
    pub samples: usize,
    pub pressure_pa: f64,
    pub pressure_mbar: f64,
    /// Radius from the fitted damping and the gas kinetics, m; absent at
    /// zero pressure.
    pub radius_damping_m: Option<f64>,
    /// Mean of the per-mode equipartition radii, m.
    pub radius_equipartition_m: f64,
}

impl RegimeMeasurement {
    pub fn gamma_hz(&self) -> f64 {
        self.gamma / std::f64::consts::TAU
    }
}

/// Simulates `regime` and runs the estimation chain on every mode while
/// streaming: envelope detection at the default bandwidth, energy
/// autocorrelation fit, position moments and equipartition temperature.
pub fn measure_regime(regime: &Regime) -> Result<RegimeMeasurement> {
    let cfg = &regime.simulation;
    cfg.validate()?;
    let dt = cfg.sample_interval();
    let mut detectors = Vec::with_capacity(cfg.modes.len());
    for mode in &cfg.modes {
        let b = default_bandwidth(mode.frequency);
        check_bandwidth(cfg.gamma, mode.frequency, b)?;
        detectors.push(EnvelopeDetector::new(dt, mode.frequency, b)?);
    }
    let mut moments = vec![MomentAccumulator::<f64>::new(); cfg.modes.len()];
    let mut energies: Vec<Vec<f64>> = vec![Vec::new(); cfg.modes.len()];
    let info = simulate_stream(cfg, |xs| {
        for (i, x) in xs.iter().enumerate() {
            moments[i].push(*x);
            if let Some(s) = detectors[i].push(*x) {
                energies[i].push(s.x_squared());
            }
        }
    })?;
    let duration = info.sample_interval * info.samples as f64;
    let mass = cfg.sphere.mass();
    let t_env = regime.environment.temperature;

    let mut fits = Vec::with_capacity(cfg.modes.len());
    for ((mode, det), values) in cfg.modes.iter().zip(&detectors).zip(energies) {
        let bandwidth = default_bandwidth(mode.frequency);
        let envelope = Envelope {
            dt: det.output_interval(),
            start_time: dt * det.settling_samples() as f64,
            bandwidth,
            values,
        };
        fits.push((damping_from_envelope(&envelope)?, bandwidth));
    }
    let gamma = fits.iter().map(|(d, _)| d.gamma).sum::<f64>() / fits.len() as f64;

    let mut modes = Vec::with_capacity(cfg.modes.len());
    for ((mode, acc), (damping, bandwidth)) in cfg.modes.iter().zip(&moments).zip(fits) {
        let fit = acc.fit()?;
        let temperature = effective_temperature(fit.sigma, mode, mass)?.with_measurement(gamma, duration)?;
        modes.push(ModeMeasurement {
            label: mode.label.clone(),
            frequency_hz: mode.frequency,
            sigma_m: fit.sigma,
            damping,
            bandwidth_hz: bandwidth,
            temperature,
            radius_equipartition_m: radius_from_equipartition(fit.sigma, mode.frequency, cfg.sphere.density(), t_env)?,
        });
    }
    let temperature = combine_temperatures(&modes, duration)?;
    let radius_damping_m = if regime.environment.pressure > 0.0 {
        Some(radius_from_damping(
            gamma,
            regime.environment.pressure,
            regime.environment.mean_gas_speed()?,
            cfg.sphere.density(),
        )?)
    } else {
        None
    };
    let radius_equipartition_m = modes.iter().map(|m| m.radius_equipartition_m).sum::<f64>() / modes.len() as f64;
    Ok(RegimeMeasurement {
        label: regime.label.clone(),
        config_digest: info.config_digest,
        seed: cfg.seed,
        input_gamma: cfg.gamma,
        gamma,
        temperature,
        modes,
        duration_s: duration,
        samples: info.samples,
        pressure_pa: regime.environment.pressure,
        pressure_mbar: regime.environment.pressure_mbar(),
        radius_damping_m,
        radius_equipartition_m,
    })
}

fn combine_temperatures(modes: &[ModeMeasurement], duration: f64) -> Result<TemperatureEstimate> {
    let mut weight = 0.0;
    let mut sum = 0.0;
    for m in modes {
        let s = m
            .temperature
            .sigma_1s
            .ok_or_else(|| Error::Fit("mode temperature without uncertainty".into()))?;
        let w = 1.0 / (s * s);
        weight += w;
        sum += w * m.temperature.t_eff;
    }
    let label = modes.iter().map(|m| m.label.as_str()).collect::<Vec<_>>().join("+");
    TemperatureEstimate::new(sum / weight, weight.recip().sqrt(), duration, label)
}

/// Constants and conventions that fix every reported number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConstants {
    pub hbar: f64,
    pub k_b: f64,
    pub m0: f64,
    pub gas_constant: f64,
    pub mean_speed_model: String,
    pub psd_convention: String,
    pub excess_convention: String,
    pub effective_samples: String,
    pub decay_model: String,
    pub fit_window_fraction: f64,
    pub max_lag_fraction: f64,
    pub relative_bandwidth: f64,
    pub settling_bandwidths: f64,
    pub burn_in_damping_times: f64,
    pub sphere_series_threshold: f64,
    pub radial_cutoff: f64,
    pub nonlinear_scale: f64,
}

impl Default for ReportConstants {
    fn default() -> Self {
        Self {
            hbar: CONSTANTS.hbar,
            k_b: CONSTANTS.k_b,
            m0: CONSTANTS.m0,
            gas_constant: CONSTANTS.gas_constant,
            mean_speed_model: MEAN_SPEED_MODEL.into(),
            psd_convention: "two-sided white, <f(t)f(s)> = S delta(t-s)".into(),
            excess_convention: EXCESS_CONVENTION.into(),
            effective_samples: "N_eff = N dt gamma".into(),
            decay_model: "R = c + (1-c) |rho(t)|^2, c = <X2>^2/<X4>, Lorentzian line through the envelope filter".into(),
            fit_window_fraction: WINDOW_FRACTION,
            max_lag_fraction: MAX_LAG_FRACTION,
            relative_bandwidth: DEFAULT_RELATIVE_BANDWIDTH,
            settling_bandwidths: SETTLING_BANDWIDTHS,
            burn_in_damping_times: BURN_IN_DAMPING_TIMES,
            sphere_series_threshold: SERIES_THRESHOLD,
            radial_cutoff: RADIAL_CUTOFF,
            nonlinear_scale: presets::NONLINEAR_SCALE,
        }
    }
}

/// Conditions attached to a bound report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flag {
    /// The central excess temperature was negative and clamped to zero.
    NegativeDeltaTClamped,
    /// The excess is more than `z` combined standard deviations above zero.
    ExcessDetected,
    /// The bound budget is zero, so no curve could be computed.
    NoExcessBudget,
}

/// Measurements behind a simulated bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regimes {
    pub medium_vacuum: RegimeMeasurement,
    pub high_vacuum: RegimeMeasurement,
}

/// Excess budget, force-noise bound and the resulting exclusion curve.
/// Serialized with a fixed key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// K.
    pub delta_t: f64,
    /// Upper bound on δT at `confidence`, K.
    pub sigma_delta_t: f64,
    /// `2 γ m k_B max(δT, 0)`, N²/Hz.
    pub excess_psd: f64,
    /// `2 γ m k_B σ_δT`, N²/Hz.
    pub excess_psd_bound: f64,
    /// N/√Hz.
    pub sqrt_excess_psd: f64,
    /// N/√Hz.
    pub sqrt_excess_psd_bound: f64,
    pub curve: Option<ExclusionCurve>,
    pub convention: String,
    pub confidence: f64,
    pub z: f64,
    pub mass_kg: f64,
    pub radius_m: f64,
    /// Damping rate entering the force budget, s⁻¹.
    pub gamma_per_s: f64,
    pub constants: ReportConstants,
    pub flags: Vec<Flag>,
    pub inputs_digest: String,
    pub regimes: Option<Regimes>,
    pub tool: String,
}

impl BoundReport {
    pub fn has_flag(&self, flag: Flag) -> bool {
        self.flags.contains(&flag)
    }

    /// Pretty JSON, keys in declaration order.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn digest_of<S: Serialize>(value: &S) -> String {
    let bytes = serde_json::to_vec(value).expect("inputs serialize");
    hex::encode(Sha256::digest(&bytes))
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    hv: &TemperatureEstimate,
    mv: &TemperatureEstimate,
    sphere: &SphereParams,
    gamma: f64,
    r_c_grid: &[f64],
    confidence: f64,
    inputs_digest: String,
    regimes: Option<Regimes>,
) -> Result<BoundReport> {
    let excess = excess_temperature_bound(hv, mv, confidence)?;
    let mass = sphere.mass();
    let psd = excess_force_psd(excess.delta_t, mass, gamma)?;
    let bound = excess_force_psd(excess.sigma_delta_t, mass, gamma)?;
    let mut flags = Vec::new();
    if excess.clamped {
        flags.push(Flag::NegativeDeltaTClamped);
    }
    let spread = excess.sigma_delta_t - excess.delta_t.max(0.0);
    if excess.delta_t > spread {
        flags.push(Flag::ExcessDetected);
    }
    let curve = if bound.psd > 0.0 {
        Some(exclusion_curve(bound.psd, sphere, r_c_grid, confidence, CURVE_SOURCE)?)
    } else {
        flags.push(Flag::NoExcessBudget);
        None
    };
    Ok(BoundReport {
        delta_t: excess.delta_t,
        sigma_delta_t: excess.sigma_delta_t,
        excess_psd: psd.psd,
        excess_psd_bound: bound.psd,
        sqrt_excess_psd: psd.psd.sqrt(),
        sqrt_excess_psd_bound: bound.psd.sqrt(),
        curve,
        convention: EXCESS_CONVENTION.into(),
        confidence,
        z: excess.z,
        mass_kg: mass,
        radius_m: sphere.radius(),
        gamma_per_s: gamma,
        constants: ReportConstants::default(),
        flags,
        inputs_digest,
        regimes,
        tool: tool_tag(),
    })
}

fn check_pairing(mv: &Regime, hv: &Regime) -> Result<()> {
    let (a, b) = (&mv.simulation, &hv.simulation);
    if a.sphere != b.sphere {
        return Err(Error::Config("medium- and high-vacuum runs use different spheres".into()));
    }
    if a.modes != b.modes || a.coupling_beta != b.coupling_beta {
        return Err(Error::Config("medium- and high-vacuum runs use different modes".into()));
    }
    // allow for rounding in presets that sit exactly at the ratio
    if a.gamma < MIN_DAMPING_RATIO * b.gamma * (1.0 - 1e-9) {
        return Err(Error::Config(format!(
            "medium-vacuum damping {} s^-1 must be at least {MIN_DAMPING_RATIO} times the high-vacuum damping {} s^-1",
            a.gamma, b.gamma
        )));
    }
    Ok(())
}

/// Simulates and analyses both regimes (in parallel), takes
/// `T_env = T_eff^MV`, and converts the excess budget into λ bounds on
/// `r_c_grid`. The force budget uses the fitted high-vacuum damping rate.
pub fn run_virtual_experiment(mv: &Regime, hv: &Regime, r_c_grid: &[f64], confidence: f64) -> Result<BoundReport> {
    check_pairing(mv, hv)?;
    let inputs_digest = digest_of(&(mv, hv, r_c_grid, confidence));
    let (m, h) = rayon::join(|| measure_regime(mv), || measure_regime(hv));
    let (m, h) = (m?, h?);
    let (hv_t, mv_t) = (h.temperature.clone(), m.temperature.clone());
    assemble(
        &hv_t,
        &mv_t,
        &hv.simulation.sphere,
        h.gamma,
        r_c_grid,
        confidence,
        inputs_digest,
        Some(Regimes {
            medium_vacuum: m,
            high_vacuum: h,
        }),
    )
}

/// Excess temperature supplied to [`replay_bound`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExcessInput {
    /// Both effective temperatures with one-sigma uncertainties.
    Temperatures {
        hv_t_eff_k: f64,
        hv_sigma_k: f64,
        mv_t_eff_k: f64,
        mv_sigma_k: f64,
    },
    /// A finished budget: central δT and its bound.
    Budget { delta_t_k: f64, sigma_delta_t_k: f64 },
}

/// Analysis-only inputs for a bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayInputs {
    pub mass_kg: f64,
    pub radius_m: f64,
    pub gamma_per_s: f64,
    pub excess: ExcessInput,
    pub confidence: f64,
    pub r_c_grid_m: Vec<f64>,
}

impl ReplayInputs {
    /// The published high-vacuum run: temperatures as measured.
    pub fn published() -> Self {
        use published::*;
        Self {
            mass_kg: MASS,
            radius_m: RADIUS,
            gamma_per_s: std::f64::consts::TAU * GAMMA_HV_HZ,
            excess: ExcessInput::Temperatures {
                hv_t_eff_k: T_EFF_HV,
                hv_sigma_k: SIGMA_T_EFF_HV,
                mv_t_eff_k: T_EFF_MV,
                mv_sigma_k: SIGMA_T_EFF_MV,
            },
            confidence: CONFIDENCE,
            r_c_grid_m: default_r_c_grid(),
        }
    }
}

/// Log-spaced r_C grid from 1e-9 m to 1e-3 m, including 1e-7 and 1e-6.
pub fn default_r_c_grid() -> Vec<f64> {
    (0..=60).map(|k| 10f64.powf(-9.0 + 0.1 * k as f64)).collect()
}

/// Bound from analysis-only inputs. Byte-identical output for identical
/// inputs.
pub fn replay_bound(inputs: &ReplayInputs) -> Result<BoundReport> {
    let sphere = SphereParams::from_mass_and_radius(inputs.mass_kg, inputs.radius_m)?;
    require_positive("gamma_per_s", inputs.gamma_per_s)?;
    let digest = digest_of(inputs);
    match inputs.excess {
        ExcessInput::Temperatures {
            hv_t_eff_k,
            hv_sigma_k,
            mv_t_eff_k,
            mv_sigma_k,
        } => {
            let hv = TemperatureEstimate::new(hv_t_eff_k, hv_sigma_k, 0.0, "high vacuum")?;
            let mv = TemperatureEstimate::new(mv_t_eff_k, mv_sigma_k, 0.0, "medium vacuum")?;
            assemble(&hv, &mv, &sphere, inputs.gamma_per_s, &inputs.r_c_grid_m, inputs.confidence, digest, None)
        }
        ExcessInput::Budget {
            delta_t_k,
            sigma_delta_t_k,
        } => budget_report(&sphere, inputs, delta_t_k, sigma_delta_t_k, digest),
    }
}

fn budget_report(
    sphere: &SphereParams,
    inputs: &ReplayInputs,
    delta_t: f64,
    sigma_delta_t: f64,
    inputs_digest: String,
) -> Result<BoundReport> {
    if !delta_t.is_finite() {
        return Err(Error::Config(format!("delta_t_k must be finite, got {delta_t}")));
    }
    crate::error::require_non_negative("sigma_delta_t_k", sigma_delta_t)?;
    let z = crate::analysis::two_sided_z(inputs.confidence)?;
    let mass = sphere.mass();
    let gamma = inputs.gamma_per_s;
    let psd = excess_force_psd(delta_t, mass, gamma)?;
    let bound = excess_force_psd(sigma_delta_t, mass, gamma)?;
    let mut flags = Vec::new();
    if psd.negative_clamped {
        flags.push(Flag::NegativeDeltaTClamped);
    }
    let curve = if bound.psd > 0.0 {
        Some(exclusion_curve(bound.psd, sphere, &inputs.r_c_grid_m, inputs.confidence, CURVE_SOURCE)?)
    } else {
        flags.push(Flag::NoExcessBudget);
        None
    };
    Ok(BoundReport {
        delta_t,
        sigma_delta_t,
        excess_psd: psd.psd,
        excess_psd_bound: bound.psd,
        sqrt_excess_psd: psd.psd.sqrt(),
        sqrt_excess_psd_bound: bound.psd.sqrt(),
        curve,
        convention: EXCESS_CONVENTION.into(),
        confidence: inputs.confidence,
        z,
        mass_kg: mass,
        radius_m: sphere.radius(),
        gamma_per_s: gamma,
        constants: ReportConstants::default(),
        flags,
        inputs_digest,
        regimes: None,
        tool: tool_tag(),
    })
}

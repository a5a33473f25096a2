//! Ready-made regimes for the damping comparison and the virtual experiment.

use std::f64::consts::TAU;

use super::{pressure_for_damping, published, Regime};
use crate::csl::eta_for_temperature_rise;
use crate::error::Result;
use crate::model::{mean_gas_speed, Environment, NoiseConfig, OscillatorMode, SphereParams, AIR_MOLAR_MASS};

/// Scale applied to the quoted cubic coefficients (N·m⁻³ per quoted unit).
/// Taken literally the quoted values put the potential barrier inside the
/// thermal motion; at this scale the barrier is ~75 k_BT while the thermal
/// frequency pull still far exceeds the high-vacuum linewidth.
pub const NONLINEAR_SCALE: f64 = 1e-4;

/// Integration steps per period of the fastest mode in the presets. The
/// splitting integrator samples a harmonic mode's position variance exactly,
/// so this coarser step costs no accuracy in the temperature.
pub const PRESET_STEPS_PER_PERIOD: f64 = 100.0;

/// Sphere with the published radius and density.
pub fn reference_sphere() -> SphereParams {
    SphereParams::new(published::RADIUS, published::DENSITY, 0.0).expect("published sphere is valid")
}

/// The two horizontal modes, with the scaled cubic stiffness when
/// `nonlinear`.
pub fn reference_modes(nonlinear: bool) -> Vec<OscillatorMode> {
    let scale = if nonlinear { NONLINEAR_SCALE } else { 0.0 };
    published::MODE_FREQUENCIES
        .iter()
        .zip(published::DUFFING_ALPHAS)
        .enumerate()
        .map(|(i, (f, a))| OscillatorMode::new(format!("x{}", i + 1), *f, a * scale).expect("published mode is valid"))
        .collect()
}

/// Scaled cross coupling, zero for the linear variant.
pub fn reference_coupling(nonlinear: bool) -> f64 {
    if nonlinear {
        published::COUPLING_BETA * NONLINEAR_SCALE
    } else {
        0.0
    }
}

/// Air at the published set point, at the pressure that gas-damps `sphere`
/// at rate `gamma`.
pub fn environment_for_damping(gamma: f64, sphere: &SphereParams) -> Result<Environment> {
    let nu = mean_gas_speed(published::ENV_TEMPERATURE, AIR_MOLAR_MASS)?;
    let p = pressure_for_damping(gamma, sphere, nu)?;
    Environment::new(published::ENV_TEMPERATURE, p, AIR_MOLAR_MASS)
}

/// Seed of the `stream`-th run derived from a base seed (SplitMix64 mixing).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Two-mode thermal run at damping `gamma_hz` (γ/2π) lasting
/// `damping_times` decay times.
pub fn damping_case(gamma_hz: f64, damping_times: f64, nonlinear: bool, seed: u64) -> Result<Regime> {
    let sphere = reference_sphere();
    let gamma = TAU * gamma_hz;
    let env = environment_for_damping(gamma, &sphere)?;
    let mut regime = Regime::gas_damped(
        format!("gamma/2pi = {gamma_hz} Hz, {}", if nonlinear { "nonlinear" } else { "linear" }),
        sphere,
        reference_modes(nonlinear),
        env,
        damping_times / gamma,
    )?;
    let f_max = published::MODE_FREQUENCIES[0];
    regime.simulation = regime
        .simulation
        .with_coupling(reference_coupling(nonlinear))
        .with_dt(1.0 / (PRESET_STEPS_PER_PERIOD * f_max))
        .with_seed(seed);
    Ok(regime)
}

/// One row of the damping comparison: γ/2π (Hz) and duration in decay times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingRow {
    pub label: &'static str,
    pub gamma_hz: f64,
    pub damping_times: f64,
}

/// Desk-scale rows: the medium-vacuum rate, and a high-vacuum stand-in at
/// 0.04 Hz.
pub const DAMPING_ROWS_CI: [DampingRow; 2] = [
    DampingRow {
        label: "medium vacuum",
        gamma_hz: 0.4,
        damping_times: 20_000.0,
    },
    DampingRow {
        label: "high vacuum (reduced Q)",
        gamma_hz: 0.04,
        damping_times: 10_000.0,
    },
];

/// Full-fidelity rows: the published rates.
pub const DAMPING_ROWS_FULL: [DampingRow; 2] = [
    DampingRow {
        label: "medium vacuum",
        gamma_hz: 0.4,
        damping_times: 20_000.0,
    },
    DampingRow {
        label: "high vacuum",
        gamma_hz: 4e-4,
        damping_times: 5_000.0,
    },
];

/// Desk-scale medium-vacuum damping (γ/2π, Hz) and duration (decay times)
/// of the virtual experiment.
pub const VIRTUAL_MV: (f64, f64) = (0.4, 4_000.0);
/// Same for the high-vacuum run.
pub const VIRTUAL_HV: (f64, f64) = (4e-3, 1_000.0);

/// Single linear 12.9 Hz mode in a medium/high vacuum pair. A CSL force
/// noise that would heat the high-vacuum run by `csl_heating` K (against its
/// own damping) acts in both regimes.
pub fn virtual_experiment(seed: u64, csl_heating: f64) -> Result<(Regime, Regime)> {
    let sphere = reference_sphere();
    let mode = vec![OscillatorMode::linear("x1", published::MODE_FREQUENCIES[0])?];
    let gamma_hv = TAU * VIRTUAL_HV.0;
    let eta = eta_for_temperature_rise(csl_heating, sphere.mass(), gamma_hv)?;
    let csl_psd = crate::csl::csl_force_psd(crate::csl::DiffusionConstant {
        eta,
        provenance: crate::csl::Provenance::ClosedForm,
    });
    let build = |label: &str, (gamma_hz, times): (f64, f64), stream: u64| -> Result<Regime> {
        let gamma = TAU * gamma_hz;
        let env = environment_for_damping(gamma, &sphere)?;
        let mut r = Regime::gas_damped(label, sphere, mode.clone(), env, times / gamma)?;
        let noise = NoiseConfig {
            csl_psd,
            ..r.simulation.noise[0]
        };
        r.simulation = r
            .simulation
            .with_noise(noise)
            .with_dt(1.0 / (PRESET_STEPS_PER_PERIOD * published::MODE_FREQUENCIES[0]))
            .with_seed(derive_seed(seed, stream));
        Ok(r)
    };
    Ok((build("medium vacuum", VIRTUAL_MV, 0)?, build("high vacuum", VIRTUAL_HV, 1)?))
}

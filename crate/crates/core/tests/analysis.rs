//! End-to-end checks of the estimation chain on simulated trajectories.

use std::f64::consts::TAU;

use levicsl::analysis::{
    default_bandwidth, default_segment_length, demodulate, effective_temperature, envelope_squared,
    fit_exponential_decay, fit_gaussian, fit_lorentzian, normalized_energy_autocorrelation, peak_shape,
    psd_welch, temperature_uncertainty, DecayFitOptions, Window, MAX_LAG_FRACTION,
};
use levicsl::csl::{csl_force_psd, csl_temperature_rise, eta_for_temperature_rise, DiffusionConstant, Provenance};
use levicsl::dynamics::{simulate, InitialState};
use levicsl::model::{thermal_force_psd, CONSTANTS};
use levicsl::pipeline::measure_regime;
use levicsl::pipeline::presets::{damping_case, environment_for_damping, reference_modes, reference_sphere};
use levicsl::{NoiseConfig, OscillatorMode, Regime, SimulationConfig};

const T_ENV: f64 = 298.0;
const F1: f64 = 12.9;
const F2: f64 = 9.3;

fn thermal(modes: Vec<OscillatorMode>, gamma: f64, damping_times: f64, seed: u64) -> SimulationConfig {
    SimulationConfig::new(reference_sphere(), modes, gamma, damping_times / gamma)
        .with_thermal_bath(T_ENV)
        .unwrap()
        .with_dt(1.0 / (100.0 * F1))
        .with_seed(seed)
}

fn linear_mode(label: &str, f: f64) -> OscillatorMode {
    OscillatorMode::linear(label, f).unwrap()
}

#[test]
fn trajectory_pipeline_recovers_temperature_and_damping() {
    let gamma = TAU * 0.4;
    let traj = simulate(&thermal(vec![linear_mode("x1", F1)], gamma, 2000.0, 31)).unwrap();
    let mode = linear_mode("x1", F1);
    let m = reference_sphere().mass();

    let sigma = fit_gaussian(traj.mode(0)).unwrap().sigma;
    let t = effective_temperature(sigma, &mode, m).unwrap().t_eff;
    let sigma_t = temperature_uncertainty(T_ENV, gamma, traj.duration()).unwrap();
    assert!((t - T_ENV).abs() < 3.0 * sigma_t, "T = {t} +- {sigma_t}");

    let b = default_bandwidth(F1);
    let env = envelope_squared(&traj, 0, F1, b).unwrap();
    let span = env.dt * env.values.len() as f64;
    let r = normalized_energy_autocorrelation(&env.values, env.dt, span * MAX_LAG_FRACTION).unwrap();
    let fit = fit_exponential_decay(
        &r,
        DecayFitOptions {
            bandwidth: Some(b),
            ..Default::default()
        },
    )
    .unwrap();
    assert!((fit.gamma / gamma - 1.0).abs() < 0.10, "gamma {} vs {gamma}", fit.gamma);
}

#[test]
fn duffing_ring_down_follows_the_amplitude_dependent_frequency() {
    let sphere = reference_sphere();
    let mode = OscillatorMode::new("x1", F1, -6.4e-4).unwrap();
    let kappa = mode.frequency_pull(sphere.mass());
    let config = SimulationConfig::new(sphere, vec![mode], 0.05, 20.0)
        .with_dt(1.0 / (200.0 * F1))
        .with_initial_state(vec![InitialState { x0: 5e-5, p0: 0.0 }]);
    let traj = simulate(&config).unwrap();
    let d = demodulate(traj.mode(0), traj.dt, F1, default_bandwidth(F1)).unwrap();
    let freq = d.instantaneous_frequency();
    let x2 = d.x_squared();
    let mut checked = 0;
    for k in (0..freq.len()).step_by(freq.len() / 10) {
        let expected_shift = F1 * kappa * x2[k + 1];
        let shift = freq[k] - F1;
        assert!(
            (shift / expected_shift - 1.0).abs() < 0.05,
            "t = {:.2} s: shift {shift:.4} Hz, expected {expected_shift:.4} Hz",
            d.start_time + (k + 1) as f64 * d.dt
        );
        checked += 1;
    }
    assert!(checked >= 10);
    // amplitude has visibly decayed, so the frequency moved with it
    assert!(freq.last().unwrap() - freq[0] > 0.1 * (F1 * kappa * x2[1]).abs());
}

#[test]
fn high_q_nonlinear_line_is_broadened_and_skewed() {
    let regime = damping_case(4e-4, 50.0, true, 17).unwrap();
    let gamma = regime.simulation.gamma;
    let config = regime.simulation.with_sample_rate(64.0);
    let traj = simulate(&config).unwrap();
    let psd = psd_welch(&traj, 0, 1 << 14, 0.5, Window::Hann).unwrap();
    let shape = peak_shape(&psd, F1 - 2.0, F1 + 1.0).unwrap();
    let natural = gamma / TAU;
    assert!(shape.fwhm >= 10.0 * natural, "fwhm {} vs natural {natural}", shape.fwhm);
    // softening springs pull hot oscillations to lower frequency
    assert!(shape.skewness < 0.0, "skewness {}", shape.skewness);
    assert!(shape.peak_frequency < F1);
}

#[test]
fn nonlinear_damping_recovered_from_energy_autocorrelation() {
    let m = measure_regime(&damping_case(0.4, 5000.0, true, 23).unwrap()).unwrap();
    assert!((m.gamma / m.input_gamma - 1.0).abs() < 0.10, "{} vs {}", m.gamma, m.input_gamma);
}

#[test]
fn two_modes_share_one_temperature() {
    let gamma = TAU * 0.4;
    let config = thermal(vec![linear_mode("x1", F1), linear_mode("x2", F2)], gamma, 4000.0, 5);
    let traj = simulate(&config).unwrap();
    let m = reference_sphere().mass();
    let s1 = fit_gaussian(traj.mode(0)).unwrap().sigma;
    let s2 = fit_gaussian(traj.mode(1)).unwrap().sigma;
    let t1 = effective_temperature(s1, &config.modes[0], m).unwrap().t_eff;
    let t2 = effective_temperature(s2, &config.modes[1], m).unwrap().t_eff;
    let sigma_law = temperature_uncertainty(T_ENV, gamma, traj.duration()).unwrap();
    assert!((t1 - t2).abs() < 3.0 * sigma_law * 2f64.sqrt(), "{t1} vs {t2}");
    let ratio = s1 / s2;
    let expected = F2 / F1;
    // relative spread of σ is half that of σ²
    let tol = 3.0 * 0.5 * (2.0 * 2.0 / (gamma * traj.duration())).sqrt();
    assert!((ratio / expected - 1.0).abs() < tol, "{ratio} vs {expected}");
}

#[test]
fn radius_from_damping_and_equipartition_agree() {
    let sphere = reference_sphere();
    let gamma = TAU * 0.4;
    let regime = Regime::gas_damped(
        "mv",
        sphere,
        reference_modes(false),
        environment_for_damping(gamma, &sphere).unwrap(),
        2000.0 / gamma,
    )
    .unwrap();
    let mut regime = regime;
    regime.simulation = regime.simulation.with_dt(1.0 / (100.0 * F1)).with_seed(2);
    let m = measure_regime(&regime).unwrap();
    let rd = m.radius_damping_m.unwrap();
    let re = m.radius_equipartition_m;
    assert!((rd / re - 1.0).abs() < 0.15, "{rd:e} vs {re:e}");
    assert!((re / sphere.radius() - 1.0).abs() < 0.15);
}

#[test]
fn psd_integrates_to_variance_and_peaks_at_the_mode() {
    let gamma = TAU * 0.4;
    let traj = simulate(&thermal(vec![linear_mode("x1", F1)], gamma, 1000.0, 8)).unwrap();
    let seg = default_segment_length(traj.len(), traj.dt, gamma);
    let psd = psd_welch(&traj, 0, seg, 0.5, Window::Hann).unwrap();
    let fit = fit_gaussian(traj.mode(0)).unwrap();
    let var = fit.sigma * fit.sigma + fit.mean * fit.mean;
    assert!((psd.integral() / var - 1.0).abs() < 0.02, "{} vs {var}", psd.integral());
    let half = 10.0 * gamma / TAU;
    let l = fit_lorentzian(&psd, F1 - half, F1 + half).unwrap();
    // the centre scatters by ~linewidth/sqrt(linewidth * duration), about 0.03 Hz here
    assert!((l.center - F1).abs() < 0.25 * gamma / TAU, "center {}", l.center);
    assert!((l.fwhm / (gamma / TAU) - 1.0).abs() < 0.25, "fwhm {}", l.fwhm);
}

#[test]
fn injected_csl_noise_heats_by_the_predicted_amount() {
    let sphere = reference_sphere();
    let gamma = TAU * 0.4;
    let m = sphere.mass();
    let eta = eta_for_temperature_rise(60.0, m, gamma).unwrap();
    let d = DiffusionConstant {
        eta,
        provenance: Provenance::ClosedForm,
    };
    let rise = csl_temperature_rise(d, m, gamma).unwrap();
    let config = SimulationConfig::new(sphere, vec![linear_mode("x1", F1)], gamma, 2000.0 / gamma)
        .with_noise(NoiseConfig::thermal(thermal_force_psd(gamma, m, T_ENV).unwrap()).with_csl(csl_force_psd(d)))
        .with_dt(1.0 / (100.0 * F1))
        .with_seed(12);
    let traj = simulate(&config).unwrap();
    let sigma = fit_gaussian(traj.mode(0)).unwrap().sigma;
    let t = effective_temperature(sigma, &config.modes[0], m).unwrap().t_eff;
    let expected = T_ENV + rise;
    let sigma_law = temperature_uncertainty(expected, gamma, traj.duration()).unwrap();
    assert!((t - expected).abs() < 3.0 * sigma_law, "{t} vs {expected} +- {sigma_law}");
    assert!((t - T_ENV) > 3.0 * sigma_law);
    assert!((rise / 60.0 - 1.0).abs() < 1e-12);
}

#[test]
fn one_sigma_law_matches_the_spread_of_repeated_measurements() {
    let gamma = 4.0;
    let window = 100.0 / gamma;
    let mode = linear_mode("x1", F1);
    let m = reference_sphere().mass();
    let traj = simulate(&thermal(vec![mode.clone()], gamma, 100.0 * 300.0, 4).with_sample_rate(100.0)).unwrap();
    let per = (window / traj.dt).round() as usize;
    let temps: Vec<f64> = traj
        .mode(0)
        .chunks_exact(per)
        .map(|c| {
            let x2 = c.iter().map(|x| x * x).sum::<f64>() / c.len() as f64;
            mode.spring_constant(m) * x2 / CONSTANTS.k_b
        })
        .collect();
    let fit = fit_gaussian(&temps).unwrap();
    let sigma_law = temperature_uncertainty(fit.mean, gamma, per as f64 * traj.dt).unwrap();
    assert!(temps.len() >= 290);
    assert!((fit.sigma / sigma_law - 1.0).abs() < 0.15, "{} vs {sigma_law}", fit.sigma);
}

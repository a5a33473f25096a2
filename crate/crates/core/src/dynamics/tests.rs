use super::*;
use crate::model::CONSTANTS;
use std::f64::consts::PI;

const M: f64 = 4.7e-15;
const T_ENV: f64 = 298.0;
const F1: f64 = 12.9;

fn sphere() -> SphereParams {
    SphereParams::from_mass_and_radius(M, 1e-6).unwrap()
}

fn linear(gamma: f64, duration: f64) -> SimulationConfig {
    SimulationConfig::new(sphere(), vec![OscillatorMode::linear("x1", F1).unwrap()], gamma, duration)
}

fn equipartition_variance(f: f64, t: f64) -> f64 {
    CONSTANTS.k_b * t / (M * (2.0 * PI * f).powi(2))
}

/// Mean of x² per mode over a streamed run.
fn streamed_second_moments(config: &SimulationConfig) -> Vec<f64> {
    let mut acc = vec![0.0; config.modes.len()];
    let info = simulate_stream(config, |xs| {
        for (a, x) in acc.iter_mut().zip(xs) {
            *a += x * x;
        }
    })
    .unwrap();
    acc.iter().map(|a| a / info.samples as f64).collect()
}

/// Energy averaged over consecutive whole periods, with the period midpoints.
fn period_averaged_energy(config: &SimulationConfig) -> Vec<(f64, f64)> {
    config.validate().unwrap();
    let mut sim = Simulator::new(config);
    let per_period = (1.0 / (F1 * config.dt)).round() as usize;
    let periods = (config.duration * F1).floor() as usize;
    let mut out = Vec::with_capacity(periods);
    for k in 0..periods {
        let mut e = 0.0;
        for _ in 0..per_period {
            sim.step().unwrap();
            e += sim.energy();
        }
        let t_mid = (k as f64 + 0.5) * per_period as f64 * config.dt;
        out.push((t_mid, e / per_period as f64));
    }
    out
}

fn ring_down(gamma: f64, duration: f64, scheme: Scheme) -> SimulationConfig {
    // dt chosen so a period is an integer number of steps
    linear(gamma, duration)
        .with_dt(1.0 / (STEPS_PER_PERIOD * F1))
        .with_scheme(scheme)
        .with_initial_state(vec![InitialState { x0: 1e-5, p0: 0.0 }])
}

/// Decay rate from a log-linear least-squares fit of period-averaged energy.
fn fitted_energy_decay_rate(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), (t, e)| (a + t, b + e.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, e) in points {
        sxy += (t - mx) * (e.ln() - my);
        sxx += (t - mx) * (t - mx);
    }
    -sxy / sxx
}

#[test]
fn noiseless_ring_down_follows_exponential_energy_decay() {
    let gamma = 0.2;
    let config = ring_down(gamma, 5.0 / gamma, Scheme::Baoab);
    let pts = period_averaged_energy(&config);
    let (t0, e0) = pts[0];
    let mut worst: f64 = 0.0;
    for &(t, e) in &pts {
        let predicted = e0 * (-gamma * (t - t0)).exp();
        worst = worst.max((e / predicted - 1.0).abs());
    }
    assert!(worst < 1e-3, "max relative deviation {worst}");
}

#[test]
fn thermal_variance_matches_equipartition() {
    let gamma = 2.0 * PI * 0.4;
    let duration = 2000.0 / gamma;
    let config = linear(gamma, duration).with_thermal_bath(T_ENV).unwrap().with_seed(11);
    let var = streamed_second_moments(&config)[0];
    let expected = equipartition_variance(F1, T_ENV);
    let stderr = expected * (2.0 / (gamma * duration)).sqrt();
    assert!(
        (var - expected).abs() < 3.0 * stderr,
        "variance {var:e} vs {expected:e} (stderr {stderr:e})"
    );
    // about 11.5 μm rms at room temperature
    assert!((expected.sqrt() / 11.5e-6 - 1.0).abs() < 0.01);
}

#[test]
fn identical_seed_gives_bit_identical_output() {
    let config = linear(5.0, 4.0).with_thermal_bath(T_ENV).unwrap().with_seed(42);
    let a = simulate(&config).unwrap();
    let b = simulate(&config).unwrap();
    assert_eq!(a, b);
    let c = simulate(&config.clone().with_seed(43)).unwrap();
    assert_ne!(a.samples, c.samples);
    assert_eq!(a.len(), config.sample_count());
    assert_eq!(a.config_digest, config.digest());
    assert_ne!(config.digest(), config.clone().with_seed(43).digest());
}

#[test]
fn burn_in_defaults_to_five_damping_times_for_noisy_runs() {
    let quiet = linear(2.0, 1.0);
    assert_eq!(quiet.effective_burn_in(), 0.0);
    let noisy = quiet.clone().with_thermal_bath(T_ENV).unwrap();
    assert_eq!(noisy.effective_burn_in(), 2.5);
    let traj = simulate(&noisy.with_sample_rate(100.0)).unwrap();
    assert!((traj.burn_in - 2.5).abs() < 1e-3);
}

#[test]
fn halving_dt_changes_variance_by_less_than_one_percent() {
    let gamma = 50.0;
    let duration = 1.28e6 / gamma;
    let base = linear(gamma, duration).with_thermal_bath(T_ENV).unwrap().with_sample_rate(400.0);
    let coarse = base.clone().with_seed(1);
    let fine = base.clone().with_dt(base.dt / 2.0).with_sample_rate(400.0).with_seed(2);
    let v1 = streamed_second_moments(&coarse)[0];
    let v2 = streamed_second_moments(&fine)[0];
    let rel = (v1 / v2 - 1.0).abs();
    assert!(rel < 0.01, "relative change {rel}");
}

#[test]
fn uncoupled_modes_are_uncorrelated() {
    let gamma = 2.0 * PI * 0.4;
    let duration = 1000.0 / gamma;
    let modes = vec![
        OscillatorMode::linear("x1", F1).unwrap(),
        OscillatorMode::linear("x2", 9.3).unwrap(),
    ];
    let config = SimulationConfig::new(sphere(), modes, gamma, duration)
        .with_thermal_bath(T_ENV)
        .unwrap()
        .with_seed(5);
    let (mut s11, mut s22, mut s12) = (0.0, 0.0, 0.0);
    simulate_stream(&config, |xs| {
        s11 += xs[0] * xs[0];
        s22 += xs[1] * xs[1];
        s12 += xs[0] * xs[1];
    })
    .unwrap();
    let rho = s12 / (s11 * s22).sqrt();
    // conservative: treats the product as correlated over a full energy time
    let stderr = (2.0 / (gamma * duration)).sqrt();
    assert!(rho.abs() < 3.0 * stderr, "rho {rho}");
}

#[test]
fn csl_drive_at_thermal_level_doubles_variance() {
    let gamma = 2.0 * PI * 0.4;
    let duration = 2000.0 / gamma;
    let s_th = thermal_force_psd(gamma, M, T_ENV).unwrap();
    let config = linear(gamma, duration)
        .with_noise(NoiseConfig::thermal(s_th).with_csl(s_th))
        .with_seed(21);
    let var = streamed_second_moments(&config)[0];
    let expected = 2.0 * equipartition_variance(F1, T_ENV);
    let stderr = expected * (2.0 / (gamma * duration)).sqrt();
    assert!((var - expected).abs() < 3.0 * stderr, "{var:e} vs {expected:e}");
}

#[test]
fn parametric_noise_heats_as_predicted() {
    // stationary energy is k_B T / (1 - ω²ς²/(2γ))
    let gamma = 5.0;
    let w2 = (2.0 * PI * F1).powi(2);
    let heating = 0.2;
    let s = (2.0 * gamma * heating / w2).sqrt();
    let duration = 4000.0 / gamma;
    let s_th = thermal_force_psd(gamma, M, T_ENV).unwrap();
    let config = linear(gamma, duration)
        .with_noise(NoiseConfig::thermal(s_th).with_parametric(s))
        .with_seed(8);
    let var = streamed_second_moments(&config)[0];
    let expected = equipartition_variance(F1, T_ENV) / (1.0 - heating);
    let stderr = expected * (2.0 / ((1.0 - heating) * gamma * duration)).sqrt();
    assert!((var - expected).abs() < 3.0 * stderr, "{var:e} vs {expected:e}");
}

#[test]
fn heun_anti_damps_high_q_modes() {
    let gamma = 1e-3;
    let duration = 400.0;
    let dt = 1.0 / (STEPS_PER_PERIOD * F1);
    let anti = (2.0 * PI * F1 * dt).powi(4) / (4.0 * dt);
    let heun = fitted_energy_decay_rate(&period_averaged_energy(&ring_down(gamma, duration, Scheme::Heun)));
    let baoab = fitted_energy_decay_rate(&period_averaged_energy(&ring_down(gamma, duration, Scheme::Baoab)));
    assert!((baoab / gamma - 1.0).abs() < 0.01, "splitting rate {baoab}");
    assert!(((gamma - heun) / anti - 1.0).abs() < 0.05, "heun rate {heun}, expected {}", gamma - anti);
}

#[test]
fn heun_agrees_with_splitting_for_damped_modes() {
    let gamma = 2.0 * PI * 0.4;
    let duration = 2000.0 / gamma;
    let config = linear(gamma, duration)
        .with_thermal_bath(T_ENV)
        .unwrap()
        .with_scheme(Scheme::Heun)
        .with_seed(3);
    let var = streamed_second_moments(&config)[0];
    let expected = equipartition_variance(F1, T_ENV);
    let stderr = expected * (2.0 / (gamma * duration)).sqrt();
    assert!((var - expected).abs() < 3.0 * stderr, "{var:e} vs {expected:e}");
}

#[test]
fn invalid_configurations_are_rejected() {
    let ok = linear(1.0, 1.0);
    ok.validate().unwrap();
    let mut none = ok.clone();
    none.modes.clear();
    assert!(matches!(none.validate(), Err(Error::Config(_))));
    assert!(matches!(ok.clone().with_dt(1.0 / (40.0 * F1)).validate(), Err(Error::Config(_))));
    assert!(matches!(ok.clone().with_coupling(6.4).validate(), Err(Error::Config(_))));
    let mut short = ok.clone();
    short.duration = short.dt / 2.0;
    assert!(matches!(short.validate(), Err(Error::Config(_))));
    let mut bad_gamma = ok.clone();
    bad_gamma.gamma = 0.0;
    assert!(bad_gamma.validate().unwrap_err().is_config());
    let mut three = ok.clone();
    three.modes = vec![three.modes[0].clone(); 3];
    assert!(three.validate().is_err());
}

#[test]
fn runaway_state_reports_the_step() {
    // a strongly negative Duffing term pushes a large excursion over the barrier
    let mode = OscillatorMode::new("x1", F1, -1e6).unwrap();
    let config = SimulationConfig::new(sphere(), vec![mode], 1.0, 100.0)
        .with_initial_state(vec![InitialState { x0: 1e-3, p0: 0.0 }]);
    match simulate(&config) {
        Err(Error::NonFinite { step, mode }) => {
            assert!(step > 0);
            assert_eq!(mode, 0);
        }
        other => panic!("expected a non-finite error, got {other:?}"),
    }
}

#[test]
fn f32_linear_ring_down_runs() {
    let sphere = SphereParams::<f32>::from_mass_and_radius(4.7e-15, 1e-6).unwrap();
    let config = SimulationConfig::new(sphere, vec![OscillatorMode::linear("x1", 12.9_f32).unwrap()], 1.0, 2.0)
        .with_initial_state(vec![InitialState { x0: 1e-5, p0: 0.0 }]);
    let traj = simulate(&config).unwrap();
    let n = traj.len();
    let peak = traj.mode(0)[n - 200..].iter().fold(0.0_f32, |a, x| a.max(x.abs()));
    // amplitude decays as e^{-γt/2}; the last 200 samples span one period
    let t_end = n as f32 * traj.dt;
    let t_start = t_end - 200.0 * traj.dt;
    assert!(peak > 1e-5 * (-t_end / 2.0).exp() * 0.995, "{peak}");
    assert!(peak < 1e-5 * (-t_start / 2.0).exp() * 1.005, "{peak}");
}

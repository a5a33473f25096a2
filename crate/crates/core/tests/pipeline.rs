use std::f64::consts::TAU;

use levicsl::pipeline::presets::{derive_seed, virtual_experiment};
use levicsl::pipeline::{
    default_r_c_grid, replay_bound, reproduce_tables, run_virtual_experiment, ExcessInput, Fidelity, Flag,
    ReplayInputs, Table,
};
use levicsl::Regime;

/// The virtual-experiment preset cut to a fraction of its length.
fn short_pair(seed: u64, heating: f64, fraction: f64) -> (Regime, Regime) {
    let (mut mv, mut hv) = virtual_experiment(seed, heating).unwrap();
    mv.simulation.duration *= fraction;
    hv.simulation.duration *= fraction;
    (mv, hv)
}

fn with_budget(delta_t: f64, sigma_delta_t: f64) -> ReplayInputs {
    ReplayInputs {
        excess: ExcessInput::Budget {
            delta_t_k: delta_t,
            sigma_delta_t_k: sigma_delta_t,
        },
        ..ReplayInputs::published()
    }
}

#[test]
fn virtual_experiment_is_deterministic() {
    let (mv, hv) = short_pair(3, 0.0, 0.1);
    let grid = [1e-7, 1e-6];
    let a = run_virtual_experiment(&mv, &hv, &grid, 0.95).unwrap();
    let b = run_virtual_experiment(&mv, &hv, &grid, 0.95).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    let (mv2, hv2) = short_pair(4, 0.0, 0.1);
    let c = run_virtual_experiment(&mv2, &hv2, &grid, 0.95).unwrap();
    assert_ne!(a.delta_t, c.delta_t);
    assert_ne!(a.inputs_digest, c.inputs_digest);
}

#[test]
fn report_carries_regime_measurements_and_constants() {
    let (mv, hv) = short_pair(9, 0.0, 0.1);
    let r = run_virtual_experiment(&mv, &hv, &[1e-7], 0.95).unwrap();
    let regimes = r.regimes.as_ref().unwrap();
    assert!(regimes.medium_vacuum.pressure_pa > 100.0 * regimes.high_vacuum.pressure_pa * 0.99);
    assert!((regimes.medium_vacuum.pressure_mbar / regimes.medium_vacuum.pressure_pa - 0.01).abs() < 1e-15);
    assert_eq!(r.gamma_per_s, regimes.high_vacuum.gamma);
    let json = r.to_json();
    for key in ["convention", "nonlinear_scale", "relative_bandwidth", "mean_speed_model", "inputs_digest", "tool"] {
        assert!(json.contains(key), "missing {key}");
    }
}

#[test]
fn mismatched_regimes_are_rejected() {
    let (mv, hv) = short_pair(1, 0.0, 0.1);
    // swapped roles violate the damping ratio
    let err = run_virtual_experiment(&hv, &mv, &[1e-7], 0.95).unwrap_err();
    assert!(err.is_config(), "{err}");
}

#[test]
fn replay_is_byte_identical() {
    let a = replay_bound(&ReplayInputs::published()).unwrap().to_json();
    let b = replay_bound(&ReplayInputs::published()).unwrap().to_json();
    assert_eq!(a, b);
}

#[test]
fn wider_budget_raises_every_bound() {
    let tight = replay_bound(&with_budget(6.5, 40.0)).unwrap();
    let loose = replay_bound(&with_budget(6.5, 41.0)).unwrap();
    let (t, l) = (tight.curve.unwrap(), loose.curve.unwrap());
    assert_eq!(t.points.len(), default_r_c_grid().len());
    for (a, b) in t.points.iter().zip(&l.points) {
        assert_eq!(a.r_c, b.r_c);
        assert!(b.lambda_upper > a.lambda_upper, "r_C = {}", a.r_c);
    }
}

#[test]
fn zero_budget_has_no_curve_but_is_not_an_error() {
    let r = replay_bound(&with_budget(-2.0, 0.0)).unwrap();
    assert!(r.curve.is_none());
    assert!(r.has_flag(Flag::NegativeDeltaTClamped));
    assert!(r.has_flag(Flag::NoExcessBudget));
    assert_eq!(r.excess_psd, 0.0);
}

#[test]
fn replay_of_measured_temperatures_gives_the_published_budget() {
    let r = replay_bound(&ReplayInputs::published()).unwrap();
    assert!((r.delta_t - 6.5).abs() < 1e-9);
    assert!((r.sigma_delta_t / 40.0 - 1.0).abs() < 0.05);
    assert!((r.gamma_per_s - TAU * 34e-6).abs() < 1e-12);
    assert!(!r.has_flag(Flag::ExcessDetected));
}

#[test]
fn table_reports_meet_their_targets() {
    for table in [Table::One, Table::Three, Table::Projection] {
        let r = reproduce_tables(table, Fidelity::Ci, 0).unwrap();
        assert!(r.passes(), "{}", r.to_text());
        assert!(r.cells.iter().all(|c| c.published.is_some()));
    }
    let one = reproduce_tables(Table::One, Fidelity::Ci, 0).unwrap();
    assert!(one.to_text().contains("lambda bound at r_C = 1e-7 m"));
}

#[test]
fn derived_seeds_decorrelate_the_regimes() {
    let (mv, hv) = virtual_experiment(11, 0.0).unwrap();
    assert_eq!(mv.simulation.seed, derive_seed(11, 0));
    assert_eq!(hv.simulation.seed, derive_seed(11, 1));
}

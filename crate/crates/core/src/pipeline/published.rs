//! Published experimental parameters and table entries, used as fixed
//! inputs for replay and as comparison values in table reports.

/// Sphere radius, m.
pub const RADIUS: f64 = 1.0e-6;
/// Sphere density, kg/m³.
pub const DENSITY: f64 = 1100.0;
/// Sphere mass, kg (quoted independently of radius and density).
pub const MASS: f64 = 4.7e-15;
/// Environmental temperature set point, K.
pub const ENV_TEMPERATURE: f64 = 298.0;
/// High-vacuum damping rate γ/2π, Hz.
pub const GAMMA_HV_HZ: f64 = 34e-6;
/// High-vacuum decay time, s.
pub const TAU_HV: f64 = 4700.0;
/// High-vacuum acquisition time, s.
pub const T_MEA_HV: f64 = 9.5e5;

/// Mode frequencies ω/2π, Hz.
pub const MODE_FREQUENCIES: [f64; 2] = [12.9, 9.3];
/// Cubic stiffness α₁, α₂ as quoted (kg·m⁻²·s⁻²).
pub const DUFFING_ALPHAS: [f64; 2] = [-6.4, -2.1];
/// Cross coupling β as quoted (kg·m⁻²·s⁻²).
pub const COUPLING_BETA: f64 = 6.4;

/// Measured effective temperatures and their uncertainties, K.
pub const T_EFF_HV: f64 = 297.9;
pub const SIGMA_T_EFF_HV: f64 = 16.2;
pub const T_EFF_MV: f64 = 291.4;
pub const SIGMA_T_EFF_MV: f64 = 4.1;

/// Excess temperature and its 95% bound, K.
pub const DELTA_T: f64 = 6.5;
pub const SIGMA_DELTA_T: f64 = 40.0;
/// Excess force noise and its 95% bound, N/√Hz.
pub const SQRT_EXCESS_PSD: f64 = 1.3e-20;
pub const SQRT_EXCESS_PSD_BOUND: f64 = 3.3e-20;
/// log10 of the λ bounds (s⁻¹) at r_C = 1e-7 m and 1e-6 m.
pub const LOG10_LAMBDA_BOUNDS: [(f64, f64); 2] = [(1e-7, -6.4), (1e-6, -7.4)];
/// Quoted force sensitivity, N/√Hz.
pub const FORCE_SENSITIVITY: f64 = 9.6e-20;
pub const CONFIDENCE: f64 = 0.95;

/// Damping-rate comparison: input γ/2π and fitted values (nonlinear,
/// linear), Hz, for the medium- and high-vacuum rows.
pub const DAMPING_ROWS: [(&str, f64, f64, f64); 2] = [
    ("medium vacuum", 0.4, 0.39, 0.38),
    ("high vacuum", 4e-4, 3.7e-4, 3.8e-4),
];
/// Accepted range for the full-fidelity high-vacuum fit, Hz.
pub const HV_FIT_RANGE_HZ: (f64, f64) = (3.7e-4, 4.2e-4);

/// Projected improvement: radius (m), γ/2π (Hz), δT (K) and the resulting
/// log10 λ at r_C = 1e-7 m.
pub const PROJECTION_RADIUS: f64 = 0.3e-6;
pub const PROJECTION_GAMMA_HZ: f64 = 1e-6;
pub const PROJECTION_DELTA_T: f64 = 0.01;
pub const PROJECTION_LOG10_LAMBDA: f64 = -11.9;

use crate::error::{require_positive, Result};
use crate::model::k_b;
use crate::num::Real;

/// Radius from the gas damping rate, inverting `γ = (16/π) P / (ν R ρ)`.
pub fn radius_from_damping<T: Real>(gamma: T, pressure: T, mean_speed: T, density: T) -> Result<T> {
    require_positive("gamma", gamma)?;
    require_positive("pressure", pressure)?;
    require_positive("mean_speed", mean_speed)?;
    require_positive("density", density)?;
    Ok(T::lit(16.0) / T::PI() * pressure / (mean_speed * gamma * density))
}

/// Gas damping rate of a sphere of radius `radius`, the inverse of
/// [`radius_from_damping`].
pub fn damping_from_radius<T: Real>(radius: T, pressure: T, mean_speed: T, density: T) -> Result<T> {
    require_positive("radius", radius)?;
    require_positive("pressure", pressure)?;
    require_positive("mean_speed", mean_speed)?;
    require_positive("density", density)?;
    Ok(T::lit(16.0) / T::PI() * pressure / (mean_speed * radius * density))
}

/// Radius from the equipartition relation `4π σ² ρ R³ ω₀² = 3 k_B T`.
pub fn radius_from_equipartition<T: Real>(sigma: T, frequency: T, density: T, temperature: T) -> Result<T> {
    require_positive("sigma", sigma)?;
    require_positive("frequency", frequency)?;
    require_positive("density", density)?;
    require_positive("temperature", temperature)?;
    let omega = T::two_pi() * frequency;
    let r3 = T::lit(3.0) * k_b::<T>() * temperature / (T::lit(4.0) * T::PI() * sigma * sigma * density * omega * omega);
    Ok(r3.cbrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{mean_gas_speed, sphere_mass, AIR_MOLAR_MASS, CONSTANTS};
    use proptest::prelude::*;

    #[test]
    fn calibration_pressure_gives_one_micron() {
        let nu = mean_gas_speed(298.0, AIR_MOLAR_MASS).unwrap();
        let r: f64 = radius_from_damping(0.992, 0.1, nu, 1100.0).unwrap();
        assert!((r / 1e-6 - 1.0).abs() < 0.01, "{r:e}");
    }

    #[test]
    fn equipartition_gives_one_micron() {
        let r: f64 = radius_from_equipartition(1.15e-5, 12.9, 1100.0, 296.0).unwrap();
        assert!((r / 1e-6 - 1.0).abs() < 0.01, "{r:e}");
        let m = sphere_mass(r, 1100.0);
        let omega = 2.0 * std::f64::consts::PI * 12.9;
        let kt = m * omega * omega * 1.15e-5_f64.powi(2);
        assert!((kt / (CONSTANTS.k_b * 296.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn halving_pressure_halves_damping() {
        let g1: f64 = damping_from_radius(1e-6, 0.1, 466.7, 1100.0).unwrap();
        let g2 = damping_from_radius(1e-6, 0.05, 466.7, 1100.0).unwrap();
        assert!((g1 / g2 - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_positive_input() {
        assert!(radius_from_damping(0.0, 0.1, 466.7, 1100.0).is_err());
        assert!(radius_from_equipartition(1e-5, 12.9, -1.0, 296.0).is_err());
    }

    proptest! {
        #[test]
        fn damping_round_trip(r in 1e-8f64..1e-4, p in 1e-6f64..1e3, nu in 100.0f64..2000.0, rho in 100.0f64..2e4) {
            let g = damping_from_radius(r, p, nu, rho).unwrap();
            let back = radius_from_damping(g, p, nu, rho).unwrap();
            prop_assert!((back / r - 1.0).abs() < 1e-12);
        }
    }
}

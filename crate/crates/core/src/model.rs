//! Physical constants, configuration types and closed-form relations shared
//! by the rest of the crate.
//!
//! Force spectral densities follow the two-sided white convention
//! `<f(t) f(s)> = S δ(t - s)`; one-sided displays carry an extra factor 2.

use serde::{Deserialize, Serialize};

use crate::error::{require_non_negative, require_positive, Error, Result};
use crate::num::Real;

/// CODATA values, fixed and not configurable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Reduced Planck constant, J·s.
    pub hbar: f64,
    /// Boltzmann constant, J/K.
    pub k_b: f64,
    /// Atomic mass unit, kg.
    pub m0: f64,
    /// Molar gas constant, J/(mol·K).
    pub gas_constant: f64,
}

pub const CONSTANTS: PhysicalConstants = PhysicalConstants {
    hbar: 1.054_571_817e-34,
    k_b: 1.380_649e-23,
    m0: 1.660_539_067e-27,
    gas_constant: 8.314_462_618,
};

/// Which definition of the gas speed enters the kinetic damping formula.
/// Written into reports so radius estimates can be audited.
pub const MEAN_SPEED_MODEL: &str = "maxwell-boltzmann mean speed sqrt(8RT/(pi M))";

pub(crate) fn hbar<T: Real>() -> T {
    T::lit(CONSTANTS.hbar)
}

pub(crate) fn k_b<T: Real>() -> T {
    T::lit(CONSTANTS.k_b)
}

pub(crate) fn m0<T: Real>() -> T {
    T::lit(CONSTANTS.m0)
}

/// Mass of a homogeneous sphere.
pub fn sphere_mass<T: Real>(radius: T, density: T) -> T {
    T::lit(4.0 / 3.0) * T::PI() * density * radius.powi(3)
}

/// Homogeneous sphere. The mass is always derived from radius and density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SphereRaw<T>", into = "SphereRaw<T>")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct SphereParams<T: Real = f64> {
    radius: T,
    density: T,
    mass: T,
    susceptibility: T,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SphereRaw<T> {
    radius_m: T,
    density_kg_m3: T,
    mass_kg: T,
    susceptibility: T,
}

impl<T: Real> TryFrom<SphereRaw<T>> for SphereParams<T> {
    type Error = Error;

    fn try_from(raw: SphereRaw<T>) -> Result<Self> {
        let s = SphereParams::new(raw.radius_m, raw.density_kg_m3, raw.susceptibility)?;
        if crate::num::rel_diff(s.mass, raw.mass_kg) > T::lit(1e-9) {
            return Err(Error::Config(format!(
                "sphere mass {} inconsistent with radius and density ({})",
                raw.mass_kg, s.mass
            )));
        }
        Ok(s)
    }
}

impl<T: Real> From<SphereParams<T>> for SphereRaw<T> {
    fn from(s: SphereParams<T>) -> Self {
        SphereRaw {
            radius_m: s.radius,
            density_kg_m3: s.density,
            mass_kg: s.mass,
            susceptibility: s.susceptibility,
        }
    }
}

impl<T: Real> SphereParams<T> {
    pub fn new(radius: T, density: T, susceptibility: T) -> Result<Self> {
        require_positive("radius", radius)?;
        require_positive("density", density)?;
        Ok(Self {
            radius,
            density,
            mass: sphere_mass(radius, density),
            susceptibility,
        })
    }

    /// Sphere with a given mass and radius; the density is back-computed.
    pub fn from_mass_and_radius(mass: T, radius: T) -> Result<Self> {
        require_positive("mass", mass)?;
        require_positive("radius", radius)?;
        let density = mass / sphere_mass(radius, T::one());
        Self::new(radius, density, T::zero())
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn density(&self) -> T {
        self.density
    }

    pub fn mass(&self) -> T {
        self.mass
    }

    /// Magnetic susceptibility; metadata only.
    pub fn susceptibility(&self) -> T {
        self.susceptibility
    }

    pub fn with_susceptibility(mut self, chi: T) -> Self {
        self.susceptibility = chi;
        self
    }
}

/// One oscillation mode of the trapped sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct OscillatorMode<T: Real = f64> {
    /// Resonance frequency ω₀/2π in Hz.
    pub frequency: T,
    /// Cubic stiffness α of the `α x³` restoring term, kg·m⁻²·s⁻².
    pub duffing_alpha: T,
    pub label: String,
}

impl<T: Real> OscillatorMode<T> {
    pub fn new(label: impl Into<String>, frequency: T, duffing_alpha: T) -> Result<Self> {
        require_positive("frequency", frequency)?;
        if !duffing_alpha.is_finite() {
            return Err(Error::domain("duffing_alpha", duffing_alpha.as_f64(), "must be finite"));
        }
        Ok(Self {
            frequency,
            duffing_alpha,
            label: label.into(),
        })
    }

    pub fn linear(label: impl Into<String>, frequency: T) -> Result<Self> {
        Self::new(label, frequency, T::zero())
    }

    pub fn angular_frequency(&self) -> T {
        T::two_pi() * self.frequency
    }

    /// `k = m ω₀²`.
    pub fn spring_constant(&self, mass: T) -> T {
        mass * self.angular_frequency().powi(2)
    }

    /// Coefficient κ of the amplitude-dependent frequency `ω = ω₀(1 + κX²)`.
    pub fn frequency_pull(&self, mass: T) -> T {
        T::lit(3.0) * self.duffing_alpha / (T::lit(8.0) * self.spring_constant(mass))
    }
}

/// Thermal environment of the trap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Environment<T: Real = f64> {
    /// Environmental temperature, K.
    pub temperature: T,
    /// Gas pressure, Pa.
    pub pressure: T,
    /// Molar mass of the residual gas, kg/mol.
    pub gas_molar_mass: T,
}

/// Molar mass of dry air, kg/mol.
pub const AIR_MOLAR_MASS: f64 = 0.028_97;

impl<T: Real> Environment<T> {
    pub fn new(temperature: T, pressure: T, gas_molar_mass: T) -> Result<Self> {
        require_positive("temperature", temperature)?;
        require_non_negative("pressure", pressure)?;
        require_positive("gas_molar_mass", gas_molar_mass)?;
        Ok(Self {
            temperature,
            pressure,
            gas_molar_mass,
        })
    }

    pub fn pressure_mbar(&self) -> T {
        self.pressure / T::lit(100.0)
    }

    pub fn mean_gas_speed(&self) -> Result<T> {
        mean_gas_speed(self.temperature, self.gas_molar_mass)
    }
}

/// White noise intensities acting on one mode.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct NoiseConfig<T: Real = f64> {
    /// Thermal force PSD, N²/Hz (two-sided).
    pub thermal_psd: T,
    /// CSL force PSD ħ²η, N²/Hz.
    pub csl_psd: T,
    /// Any further additive force noise, N²/Hz.
    pub extra_additive_psd: T,
    /// Parametric noise strength ς in s^(1/2): `<ζ(t)ζ(s)> = ς² δ(t - s)`.
    pub parametric_strength: T,
}

impl<T: Real> NoiseConfig<T> {
    pub fn thermal(psd: T) -> Self {
        Self {
            thermal_psd: psd,
            ..Self::default()
        }
    }

    pub fn with_csl(mut self, psd: T) -> Self {
        self.csl_psd = psd;
        self
    }

    pub fn with_parametric(mut self, strength: T) -> Self {
        self.parametric_strength = strength;
        self
    }

    pub fn total_additive_psd(&self) -> T {
        self.thermal_psd + self.csl_psd + self.extra_additive_psd
    }

    pub fn is_silent(&self) -> bool {
        self.total_additive_psd() == T::zero() && self.parametric_strength == T::zero()
    }

    pub fn validate(&self) -> Result<()> {
        require_non_negative("thermal_psd", self.thermal_psd)?;
        require_non_negative("csl_psd", self.csl_psd)?;
        require_non_negative("extra_additive_psd", self.extra_additive_psd)?;
        require_non_negative("parametric_strength", self.parametric_strength)
    }
}

/// Thermal force PSD `S_th = 2 γ m k_B T`.
///
/// `temperature = 0` is accepted and yields zero.
pub fn thermal_force_psd<T: Real>(gamma: T, mass: T, temperature: T) -> Result<T> {
    require_positive("gamma", gamma)?;
    require_positive("mass", mass)?;
    require_non_negative("temperature", temperature)?;
    Ok(T::lit(2.0) * gamma * mass * k_b::<T>() * temperature)
}

/// Maxwell–Boltzmann mean molecular speed `sqrt(8 R T / (π M))`.
pub fn mean_gas_speed<T: Real>(temperature: T, gas_molar_mass: T) -> Result<T> {
    require_positive("temperature", temperature)?;
    require_positive("gas_molar_mass", gas_molar_mass)?;
    let r = T::lit(CONSTANTS.gas_constant);
    Ok((T::lit(8.0) * r * temperature / (T::PI() * gas_molar_mass)).sqrt())
}

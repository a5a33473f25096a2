//! Continuous Spontaneous Localization: diffusion constants, force noise,
//! heating and collapse-rate bounds.
//!
//! For a rigid body the CSL noise acts on the centre of mass as a white
//! stochastic force of PSD `ħ² η`, where `η` is linear in the collapse rate
//! λ. Every upper bound on an excess force PSD therefore maps to an upper
//! bound on λ through a single evaluation of `η(λ = 1)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{require_non_negative, require_positive, Error, Result};
use crate::model::{hbar, k_b, m0, SphereParams};
use crate::num::Real;
use crate::quad::{integrate, QuadOptions};

/// Below this value of `x = R²/r_C²` the sphere bracket is evaluated by its
/// Taylor series; the closed form loses digits to cancellation there.
pub const SERIES_THRESHOLD: f64 = 0.5;

/// Upper limit of the radial integral in units of `1/r_C`; the Gaussian
/// factor is `e^{-400}` there.
pub const RADIAL_CUTOFF: f64 = 20.0;

/// Collapse rate and correlation length under test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct CslParams<T: Real = f64> {
    /// λ, s⁻¹.
    pub lambda: T,
    /// r_C, m.
    pub r_c: T,
}

impl<T: Real> CslParams<T> {
    pub fn new(lambda: T, r_c: T) -> Result<Self> {
        require_non_negative("lambda", lambda)?;
        require_positive("r_c", r_c)?;
        Ok(Self { lambda, r_c })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ClosedForm,
    NumericIntegral,
}

/// CSL momentum-diffusion constant η in m⁻²·s⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct DiffusionConstant<T: Real = f64> {
    pub eta: T,
    pub provenance: Provenance,
}

/// `e^{-x} - 1 + (x/2)(e^{-x} + 1)`, the geometric bracket of the sphere
/// diffusion constant. Behaves as `x³/12` for small `x` and `x/2` for large.
pub fn sphere_bracket<T: Real>(x: T) -> T {
    if x < T::lit(SERIES_THRESHOLD) {
        // coefficient of xⁿ is (-1)ⁿ (2 - n) / (2 n!)
        let mut term = x.powi(3) / T::lit(6.0); // xⁿ/n! at n = 3
        let mut sum = T::zero();
        for n in 3..40 {
            let nn = T::from_count(n);
            let c = (T::lit(2.0) - nn) / T::lit(2.0);
            let sign = if n % 2 == 0 { T::one() } else { -T::one() };
            let contrib = sign * c * term;
            sum = sum + contrib;
            if contrib.abs() <= T::epsilon() * sum.abs() * T::lit(1e-2) {
                break;
            }
            term = term * x / T::from_count(n + 1);
        }
        sum
    } else {
        let e = (-x).exp();
        e - T::one() + x / T::lit(2.0) * (e + T::one())
    }
}

/// Closed-form diffusion constant of a homogeneous sphere.
pub fn diffusion_constant_sphere<T: Real>(
    csl: CslParams<T>,
    sphere: &SphereParams<T>,
) -> DiffusionConstant<T> {
    let r = sphere.radius();
    let x = (r / csl.r_c).powi(2);
    let mass_ratio = sphere.mass() / m0::<T>();
    // 6 r_C⁴ / R⁶ · bracket, regrouped to keep intermediate values in range
    let geometric = T::lit(6.0) * (csl.r_c / r).powi(4) / (r * r) * sphere_bracket(x);
    DiffusionConstant {
        eta: csl.lambda * mass_ratio * mass_ratio * geometric,
        provenance: Provenance::ClosedForm,
    }
}

/// Small-sphere limit `λ m² / (2 m₀² r_C²)`, also the point-mass value.
pub fn diffusion_constant_point_mass<T: Real>(csl: CslParams<T>, mass: T) -> T {
    let q = mass / m0::<T>();
    csl.lambda * q * q / (T::lit(2.0) * csl.r_c * csl.r_c)
}

/// Large-sphere limit `3 λ m² r_C² / (m₀² R⁴)`.
pub fn diffusion_constant_large_sphere<T: Real>(csl: CslParams<T>, sphere: &SphereParams<T>) -> T {
    let q = sphere.mass() / m0::<T>();
    T::lit(3.0) * csl.lambda * q * q * csl.r_c * csl.r_c / sphere.radius().powi(4)
}

/// Fourier transform of a homogeneous sphere's mass density,
/// `3m [sin(kR) - kR cos(kR)] / (kR)³`.
pub fn sphere_form_factor<T: Real>(k: T, radius: T, mass: T) -> T {
    let u = k * radius;
    if u.abs() < T::lit(0.1) {
        let u2 = u * u;
        mass * (T::one() - u2 / T::lit(10.0) + u2 * u2 / T::lit(280.0)
            - u2 * u2 * u2 / T::lit(15120.0))
    } else {
        T::lit(3.0) * mass * (u.sin() - u * u.cos()) / u.powi(3)
    }
}

/// Diffusion constant from an arbitrary spherically symmetric mass
/// distribution, given `|μ̃(k)|²` as a function of `|k|`.
///
/// Under spherical symmetry `k_i² → k²/3`, reducing the three-dimensional
/// integral to a radial one which is integrated adaptively over
/// `[0, RADIAL_CUTOFF / r_C]` to 1e-10 relative.
pub fn diffusion_constant_numeric<T: Real, F>(
    form_factor_sq: F,
    csl: CslParams<T>,
) -> Result<DiffusionConstant<T>>
where
    F: Fn(T) -> T,
{
    diffusion_constant_numeric_with_cutoff(form_factor_sq, csl, T::lit(RADIAL_CUTOFF))
}

pub fn diffusion_constant_numeric_with_cutoff<T: Real, F>(
    form_factor_sq: F,
    csl: CslParams<T>,
    cutoff: T,
) -> Result<DiffusionConstant<T>>
where
    F: Fn(T) -> T,
{
    let at_zero = form_factor_sq(T::zero());
    if !at_zero.is_finite() || at_zero < T::zero() {
        return Err(Error::domain(
            "form_factor_sq(0)",
            at_zero.as_f64(),
            "must be finite and non-negative",
        ));
    }
    let r_c = csl.r_c;
    // dimensionless variable u = k r_C
    let integrand = |u: T| {
        let u2 = u * u;
        u2 * u2 * form_factor_sq(u / r_c) * (-u2).exp()
    };
    let opts = QuadOptions {
        rel_tol: T::lit(1e-10),
        abs_tol: T::zero(),
        max_intervals: 20_000,
    };
    let radial = integrate(integrand, T::zero(), cutoff, opts)?;
    // η = r_C³ λ / (π^{3/2} m₀²) · (4π/3) ∫ k⁴ |μ̃|² e^{-k² r_C²} dk
    let m0 = m0::<T>();
    let eta = T::lit(4.0) * csl.lambda * (radial.value / (m0 * m0))
        / (T::lit(3.0) * T::PI().sqrt() * r_c * r_c);
    Ok(DiffusionConstant {
        eta,
        provenance: Provenance::NumericIntegral,
    })
}

/// CSL force PSD `ħ² η`, N²/Hz.
pub fn csl_force_psd<T: Real>(eta: DiffusionConstant<T>) -> T {
    let h = hbar::<T>();
    h * h * eta.eta
}

/// Temperature rise `ħ² η / (2 γ m k_B)` produced by CSL heating against
/// damping γ.
pub fn csl_temperature_rise<T: Real>(eta: DiffusionConstant<T>, mass: T, gamma: T) -> Result<T> {
    require_positive("mass", mass)?;
    require_positive("gamma", gamma)?;
    require_non_negative("eta", eta.eta)?;
    Ok(csl_force_psd(eta) / (T::lit(2.0) * gamma * mass * k_b::<T>()))
}

/// Diffusion constant that heats a mass by `temperature_rise` against γ.
pub fn eta_for_temperature_rise<T: Real>(temperature_rise: T, mass: T, gamma: T) -> Result<T> {
    require_non_negative("temperature_rise", temperature_rise)?;
    require_positive("mass", mass)?;
    require_positive("gamma", gamma)?;
    let h = hbar::<T>();
    Ok(T::lit(2.0) * gamma * mass * k_b::<T>() * temperature_rise / (h * h))
}

/// Largest λ compatible with `ħ² η(λ) ≤ excess_force_psd` at correlation
/// length `r_c`.
pub fn collapse_rate_upper_bound<T: Real>(
    excess_force_psd: T,
    r_c: T,
    sphere: &SphereParams<T>,
) -> Result<T> {
    if !(excess_force_psd > T::zero()) {
        return Err(Error::domain(
            "excess_force_psd",
            excess_force_psd.as_f64(),
            "no positive excess budget; bound undefined",
        ));
    }
    let unit = diffusion_constant_sphere(CslParams::new(T::one(), r_c)?, sphere);
    let h = hbar::<T>();
    Ok(excess_force_psd / h / h / unit.eta)
}

/// One point of an exclusion curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct CurvePoint<T: Real = f64> {
    pub r_c: T,
    pub lambda_upper: T,
}

/// Upper bounds on λ along a grid of correlation lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ExclusionCurve<T: Real = f64> {
    pub points: Vec<CurvePoint<T>>,
    pub confidence_level: T,
    pub source: String,
}

impl<T: Real> ExclusionCurve<T> {
    pub fn new(points: Vec<CurvePoint<T>>, confidence_level: T, source: impl Into<String>) -> Result<Self> {
        check_grid(points.iter().map(|p| p.r_c))?;
        for p in &points {
            if !(p.lambda_upper > T::zero()) || !p.lambda_upper.is_finite() {
                return Err(Error::domain(
                    "lambda_upper",
                    p.lambda_upper.as_f64(),
                    "curve points must be positive",
                ));
            }
        }
        Ok(Self {
            points,
            confidence_level,
            source: source.into(),
        })
    }

    /// Bound at `r_c`, log-log interpolated; `None` outside the grid.
    pub fn lambda_at(&self, r_c: T) -> Option<T> {
        let pts = &self.points;
        let idx = pts.iter().position(|p| p.r_c >= r_c)?;
        if pts[idx].r_c == r_c {
            return Some(pts[idx].lambda_upper);
        }
        if idx == 0 {
            return None;
        }
        let (a, b) = (pts[idx - 1], pts[idx]);
        let w = (r_c.ln() - a.r_c.ln()) / (b.r_c.ln() - a.r_c.ln());
        Some((a.lambda_upper.ln() * (T::one() - w) + b.lambda_upper.ln() * w).exp())
    }
}

fn check_grid<T: Real>(grid: impl Iterator<Item = T>) -> Result<()> {
    let mut prev: Option<T> = None;
    for r in grid {
        require_positive("r_c", r)?;
        if let Some(p) = prev {
            if r <= p {
                return Err(Error::Config(format!(
                    "r_c grid must be strictly increasing ({p} followed by {r})"
                )));
            }
        }
        prev = Some(r);
    }
    Ok(())
}

/// Exclusion curve over `r_c_grid` for a fixed excess force PSD.
pub fn exclusion_curve<T: Real>(
    excess_force_psd: T,
    sphere: &SphereParams<T>,
    r_c_grid: &[T],
    confidence: T,
    source: impl Into<String>,
) -> Result<ExclusionCurve<T>> {
    check_grid(r_c_grid.iter().copied())?;
    let points = r_c_grid
        .par_iter()
        .map(|&r_c| {
            collapse_rate_upper_bound(excess_force_psd, r_c, sphere)
                .map(|lambda_upper| CurvePoint { r_c, lambda_upper })
        })
        .collect::<Result<Vec<_>>>()?;
    ExclusionCurve::new(points, confidence, source)
}

pub mod reference;

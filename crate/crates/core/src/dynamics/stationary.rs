//! Stationary position density of a linear mode under additive and
//! parametric white noise, from the energy Fokker–Planck equation.
//!
//! The density has the form `p(x) ∝ (1 + a x²)^(-ν)`. Two parametrizations
//! are provided:
//!
//! * [`StationaryForm::ItoConsistent`] keeps the noise-induced drift
//!   `ω²ς²ε/2` of the energy (parametric heating) that the simulated
//!   equations of motion produce, and marginalizes the energy density over
//!   the oscillation phase: `a = mω⁴ς²/(8γk_BT)`, `ν = 4γ/(ω²ς²) - 1/2`.
//!   Its `ς → 0` limit is the equipartition Gaussian of variance
//!   `k_B T/(m ω²)`.
//! * [`StationaryForm::AsPrinted`] is the commonly quoted closed form
//!   `a = mω⁴ς²/(2γk_BT)`, `ν = 2(γ + ω²ς²)/(ω²ς²)`, evaluated as a
//!   function of `x`. Its `ς → 0` limit has variance `k_B T/(2 m ω²)`, half
//!   the equipartition value.

use serde::{Deserialize, Serialize};

use crate::error::{require_non_negative, require_positive, Error, Result};
use crate::model::{k_b, OscillatorMode};
use crate::num::Real;
use crate::quad::{integrate, QuadOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StationaryForm {
    #[default]
    ItoConsistent,
    AsPrinted,
}

/// Normalized stationary density, ready for repeated evaluation.
#[derive(Debug, Clone, Copy)]
pub struct StationaryDensity<T> {
    shape: Shape<T>,
}

#[derive(Debug, Clone, Copy)]
enum Shape<T> {
    Gaussian { variance: T },
    PowerLaw { a: T, nu: T, norm: T },
}

impl<T: Real> StationaryDensity<T> {
    pub fn new(
        mode: &OscillatorMode<T>,
        mass: T,
        gamma: T,
        parametric_strength: T,
        t_eff: T,
        form: StationaryForm,
    ) -> Result<Self> {
        require_positive("mass", mass)?;
        require_positive("gamma", gamma)?;
        require_positive("t_eff", t_eff)?;
        require_non_negative("parametric_strength", parametric_strength)?;
        let omega2 = mode.angular_frequency().powi(2);
        let kt = k_b::<T>() * t_eff;
        let s2 = parametric_strength * parametric_strength;
        if s2 == T::zero() {
            let variance = match form {
                StationaryForm::ItoConsistent => kt / (mass * omega2),
                StationaryForm::AsPrinted => kt / (T::lit(2.0) * mass * omega2),
            };
            return Ok(Self {
                shape: Shape::Gaussian { variance },
            });
        }
        let w2s2 = omega2 * s2;
        let (a, nu) = match form {
            StationaryForm::ItoConsistent => (
                mass * omega2 * w2s2 / (T::lit(8.0) * gamma * kt),
                T::lit(4.0) * gamma / w2s2 - T::lit(0.5),
            ),
            StationaryForm::AsPrinted => (
                mass * omega2 * w2s2 / (T::lit(2.0) * gamma * kt),
                T::lit(2.0) * (gamma + w2s2) / w2s2,
            ),
        };
        if !(nu > T::lit(0.5)) {
            return Err(Error::domain(
                "exponent",
                nu.as_f64(),
                "density is not normalizable (needs exponent > 1/2; parametric noise too strong for the damping)",
            ));
        }
        let norm = T::one() / power_law_integral(a, nu)?;
        Ok(Self {
            shape: Shape::PowerLaw { a, nu, norm },
        })
    }

    /// Probability density at `x`, 1/m.
    pub fn eval(&self, x: T) -> T {
        match self.shape {
            Shape::Gaussian { variance } => {
                (-(x * x) / (T::lit(2.0) * variance)).exp() / (T::two_pi() * variance).sqrt()
            }
            Shape::PowerLaw { a, nu, norm } => norm * (-nu * (a * x * x).ln_1p()).exp(),
        }
    }

    /// Cumulative distribution, by quadrature of [`Self::eval`].
    pub fn cdf(&self, x: T) -> Result<T> {
        let half = T::lit(0.5);
        if x == T::zero() {
            return Ok(half);
        }
        let scale = self.scale();
        let upper = x.abs();
        let mut acc = T::zero();
        let mut lo = T::zero();
        // split at multiples of the width so a narrow peak is never stepped over
        let mut hi = scale.min(upper);
        loop {
            acc = acc + integrate(|u| self.eval(u), lo, hi, QuadOptions::default())?.value;
            if hi >= upper {
                break;
            }
            lo = hi;
            hi = (hi * T::lit(4.0)).min(upper);
        }
        Ok(if x > T::zero() { half + acc } else { half - acc })
    }

    /// Characteristic width (standard deviation of the Gaussian core), m.
    pub fn scale(&self) -> T {
        match self.shape {
            Shape::Gaussian { variance } => variance.sqrt(),
            Shape::PowerLaw { a, nu, .. } => (T::one() / (T::lit(2.0) * a * nu)).sqrt(),
        }
    }
}

/// `∫ (1 + a x²)^(-ν) dx` over the real line, by quadrature in `θ` with
/// `x = tan θ / √a`, where the integrand becomes `cos^(2ν-2) θ`.
fn power_law_integral<T: Real>(a: T, nu: T) -> Result<T> {
    let half_pi = T::FRAC_PI_2();
    let power = T::lit(2.0) * nu - T::lit(2.0);
    let opts = QuadOptions {
        rel_tol: T::lit(1e-11),
        abs_tol: T::zero(),
        max_intervals: 4000,
    };
    let total = if power < T::zero() {
        // integrable singularity at θ = π/2; with φ = π/2 - θ = w^q, q = 1/(p+1),
        // the integrand q w^(q-1) sin^p(w^q) stays bounded
        let q = T::one() / (power + T::one());
        let top = half_pi.powf(power + T::one());
        integrate(
            |w: T| {
                if w == T::zero() {
                    return q;
                }
                let phi = w.powf(q);
                q * w.powf(q - T::one()) * phi.sin().powf(power)
            },
            T::zero(),
            top,
            opts,
        )?
        .value
    } else {
        // split at multiples of the peak width so the quadrature resolves it
        let width = if power > T::one() {
            (T::one() / power).sqrt()
        } else {
            half_pi
        };
        let mut total = T::zero();
        let mut lo = T::zero();
        let mut hi = width.min(half_pi);
        loop {
            // cos^p θ = exp((p/2) ln(1 - sin²θ)), accurate near θ = 0 for large p
            let half_power = T::lit(0.5) * power;
            let piece = integrate(
                |t: T| (half_power * (-t.sin().powi(2)).ln_1p()).exp(),
                lo,
                hi,
                opts,
            )?;
            total = total + piece.value;
            if hi >= half_pi || piece.value < total * T::epsilon() {
                break;
            }
            lo = hi;
            hi = (hi * T::lit(4.0)).min(half_pi);
        }
        total
    };
    Ok(T::lit(2.0) * total / a.sqrt())
}

/// Stationary position density at `x` (1/m) with the default
/// [`StationaryForm::ItoConsistent`] parametrization.
pub fn stationary_position_density<T: Real>(
    x: T,
    mode: &OscillatorMode<T>,
    mass: T,
    gamma: T,
    parametric_strength: T,
    t_eff: T,
) -> Result<T> {
    Ok(StationaryDensity::new(
        mode,
        mass,
        gamma,
        parametric_strength,
        t_eff,
        StationaryForm::ItoConsistent,
    )?
    .eval(x))
}

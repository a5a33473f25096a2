//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.

// node and weight tables keep their full printed precision
#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};
use crate::num::Real;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the 7-point rule, attached to XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral<T> {
    pub value: T,
    pub abs_error: T,
    pub intervals: usize,
}

/// Integration tolerances and work limit.
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_intervals: usize,
}

impl<T: Real> Default for QuadOptions<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::lit(1e-10),
            abs_tol: T::zero(),
            max_intervals: 2000,
        }
    }
}

struct Segment<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

fn kronrod<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> Segment<T> {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let fc = f(center);
    let mut kron = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = half_len * T::lit(XGK[j]);
        let pair = f(center - dx) + f(center + dx);
        kron = kron + T::lit(WGK[j]) * pair;
        if j % 2 == 1 {
            gauss = gauss + T::lit(WG[j / 2]) * pair;
        }
    }
    let value = kron * half_len;
    let error = ((kron - gauss) * half_len).abs();
    Segment { a, b, value, error }
}

/// Integrates `f` over `[a, b]`.
///
/// Subdivides the interval with the largest error estimate until the summed
/// error is below `max(abs_tol, rel_tol * |value|)`. Exhausting
/// `max_intervals` yields [`Error::Quadrature`] with the achieved residual.
pub fn integrate<T: Real, F: Fn(T) -> T>(
    f: F,
    a: T,
    b: T,
    opts: QuadOptions<T>,
) -> Result<Integral<T>> {
    if a == b {
        return Ok(Integral {
            value: T::zero(),
            abs_error: T::zero(),
            intervals: 0,
        });
    }
    let mut segments = vec![kronrod(&f, a, b)];
    loop {
        let value: T = segments.iter().map(|s| s.value).sum();
        let error: T = segments.iter().map(|s| s.error).sum();
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::Quadrature {
                estimate: value.as_f64(),
                residual: error.as_f64(),
            });
        }
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= target {
            return Ok(Integral {
                value,
                abs_error: error,
                intervals: segments.len(),
            });
        }
        if segments.len() >= opts.max_intervals {
            return Err(Error::Quadrature {
                estimate: value.as_f64(),
                residual: error.as_f64(),
            });
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.partial_cmp(&y.1.error).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let s = segments.swap_remove(worst);
        let mid = T::lit(0.5) * (s.a + s.b);
        if mid <= s.a || mid >= s.b {
            // interval cannot be split further in this precision
            return Err(Error::Quadrature {
                estimate: value.as_f64(),
                residual: error.as_f64(),
            });
        }
        segments.push(kronrod(&f, s.a, mid));
        segments.push(kronrod(&f, mid, s.b));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomials_exact() {
        let r = integrate(|x: f64| x.powi(5) - 2.0 * x, 0.0, 2.0, QuadOptions::default()).unwrap();
        assert!((r.value - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
        assert_eq!(r.intervals, 1);
    }

    #[test]
    fn oscillatory_and_peaked() {
        let r = integrate(|x: f64| (50.0 * x).sin().powi(2), 0.0, PI, QuadOptions::default()).unwrap();
        assert!((r.value - PI / 2.0).abs() < 1e-10);
        let r = integrate(|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, QuadOptions::default()).unwrap();
        let exact = 2.0 / 1e-2 * (1.0_f64 / 1e-2).atan();
        assert!((r.value / exact - 1.0).abs() < 1e-10);
    }

    #[test]
    fn reports_non_convergence() {
        let opts = QuadOptions {
            max_intervals: 3,
            ..QuadOptions::default()
        };
        match integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, opts) {
            Err(Error::Quadrature { residual, .. }) => assert!(residual > 0.0),
            other => panic!("expected quadrature error, got {other:?}"),
        }
    }

    #[test]
    fn single_precision() {
        let r = integrate(
            |x: f32| x.exp(),
            0.0,
            1.0,
            QuadOptions {
                rel_tol: 1e-6,
                ..QuadOptions::default()
            },
        )
        .unwrap();
        assert!((r.value - (std::f32::consts::E - 1.0)).abs() < 1e-5);
    }
}

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod csl;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod num;
pub mod pipeline;
pub mod quad;

pub use error::{Error, Result};

// f64 instantiations of the main types. The generic forms live in their
// modules; CSL force spectra underflow f32, so end-to-end work uses these.
pub type SphereParams = model::SphereParams<f64>;
pub type OscillatorMode = model::OscillatorMode<f64>;
pub type Environment = model::Environment<f64>;
pub type NoiseConfig = model::NoiseConfig<f64>;
pub type CslParams = csl::CslParams<f64>;
pub type ExclusionCurve = csl::ExclusionCurve<f64>;
pub type SimulationConfig = dynamics::SimulationConfig<f64>;
pub type Trajectory = dynamics::Trajectory<f64>;
pub type TemperatureEstimate = analysis::TemperatureEstimate<f64>;
pub type DampingEstimate = analysis::DampingEstimate<f64>;

pub use pipeline::{BoundReport, Regime};

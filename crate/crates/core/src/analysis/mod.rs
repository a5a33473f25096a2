//! Measurement pipeline applied to trajectories: spectra, position
//! statistics, effective temperature, envelope extraction, energy
//! autocorrelation, damping and radius estimates.

mod autocorr;
mod envelope;
mod radius;
mod spectral;
mod stats;

pub use autocorr::{
    damping_from_envelope, decay_shape, fit_exponential_decay, normalized_energy_autocorrelation,
    Autocorrelation, DampingEstimate, DecayFitOptions, DecayModel, AUTOCORR_CSV_HEADER,
    MAX_LAG_FRACTION, WINDOW_FRACTION,
};
pub use envelope::{
    check_bandwidth, default_bandwidth, demodulate, envelope_squared, Demodulated, Envelope,
    EnvelopeDetector, EnvelopeSample, DEFAULT_RELATIVE_BANDWIDTH, MAX_RELATIVE_BANDWIDTH,
    SETTLING_BANDWIDTHS,
};
pub use radius::{damping_from_radius, radius_from_damping, radius_from_equipartition};
pub use spectral::{
    default_segment_length, fit_lorentzian, peak_shape, psd_welch, psd_welch_series,
    LorentzianFit, PeakShape, PsdEstimate, Window, PSD_CSV_HEADER, SEGMENT_CORRELATION_TIMES,
};
pub use stats::{
    effective_temperature, excess_force_psd, excess_temperature_bound, fit_gaussian,
    temperature_uncertainty, two_sided_z, ExcessPsd, ExcessTemperature, GaussianFit, MomentAccumulator,
    TemperatureEstimate, EXCESS_CONVENTION, MIN_GAUSSIAN_SAMPLES,
};

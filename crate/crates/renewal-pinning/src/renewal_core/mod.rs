//! Inter-arrival laws, renewal mass functions, sampling and Tauberian helpers.

mod law;
mod mass;
mod sampling;
mod tauberian;

pub use law::{
    exp_nonlinear, normalize_power_law, one_minus_exp, tilt_law, DampedLaw, GeometricLaw, InterArrival,
    PowerLawRenewal, TabulatedLaw,
};
pub use mass::{covariance_decay, mass_function, mass_function_of, MassFunctionTable, Regime};
pub use sampling::{
    rng_stream, sample_path, DisorderPath, InterArrivalSampler, StationaryDelay,
    stationary_delay,
};
pub use tauberian::{first_negative_moment, negative_moment_tau_k, series_asymptotics, SeriesReport, SeriesVariant};

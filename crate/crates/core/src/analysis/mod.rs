//! Measurement pipeline: envelopes, curve fits and coherence-time estimates.

mod coherence;
mod envelope;
mod fit;

pub use coherence::{
    coherence_time_from_two_contrasts, one_over_e_time, predict_coherence_time, predict_coherence_time_with,
    CoherencePrediction, DEFAULT_REGIME_FACTOR,
};
pub use envelope::{rolling_std, rolling_std_envelope, Envelope, DEFAULT_WINDOW};
pub use fit::{fit_curve, r_squared, FitModel, FitResult, ModelKind};

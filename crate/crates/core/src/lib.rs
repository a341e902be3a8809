//! Reduced-order LTI models from noisy input-output records.
//!
//! Impulse responses are estimated by least squares or by the signal matrix
//! model (SMM), then turned into low-order descriptor models through Hankel
//! (Ho-Kalman) or Loewner pencils. The numerical core is generic over `f32`
//! and `f64`; the aliases below fix `f64`.

pub mod error;
pub mod lti;
pub mod scalar;
pub mod signal;
pub mod dataio;
pub mod estimation;
pub mod spectral;
pub mod pencils;
pub mod metrics;
pub mod systems;
pub mod modelfile;
pub mod pipeline;
pub mod benchmark;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub type Model = lti::DescriptorModel<f64>;
pub type ComplexModel = lti::DescriptorModel<Complex64>;
pub type Signal = signal::SignalSequence<f64>;
pub type Markov = signal::MarkovSequence<f64>;
pub type Data = dataio::Dataset<f64>;
pub type Frequency = spectral::FrequencySamples<f64>;
pub type Loewner = pencils::LoewnerPencil<f64>;
pub type Hankel = pencils::HankelPencil<f64>;

pub type Model32 = lti::DescriptorModel<f32>;
pub type Markov32 = signal::MarkovSequence<f32>;
pub type Data32 = dataio::Dataset<f32>;

//! Contrastive chain-of-thought direction extraction, spectral low-pass
//! resampling across hidden widths, and norm-preserving latent injection.
//!
//! The numeric modules are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix binary64, which is what file IO and the CLI use.

pub mod error;
pub mod latrep;
pub mod linalg;
pub mod presets;
pub mod scalar;
pub mod spectral;
pub mod steering;
pub mod tensor_store;
pub mod toymodel;

pub use error::{Error, ErrorClass, Result};
pub use scalar::Scalar;

pub type Matrix = tensor_store::ActivationMatrix<f64>;
pub type Directions = latrep::DirectionSet<f64>;
pub type Pattern = latrep::PatternVector<f64>;
pub type Pca = latrep::PcaModel<f64>;
pub type Spectrum = spectral::Spectrum<f64>;
pub type Bands = spectral::BandProfile<f64>;
pub type Steering = steering::SteeringVector<f64>;
pub type Hook = steering::SteeringHook<f64>;

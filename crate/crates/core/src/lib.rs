//! Sound masking against audio inference attacks.
//!
//! The crate generates masking noise (seeded white noise and a 1-D
//! convolutional GAN trained to imitate it), measures signal randomness
//! with the Wald–Wolfowitz and Cox–Stuart runs tests, trains log-mel
//! CNN/RNN/CRNN inference attacks, and reports how much each noise
//! reduces attack accuracy while keeping speech content recognizable.

pub mod attacks;
pub mod audio;
pub mod datasets;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod maskgan;
pub mod nn;
pub mod noise;
pub mod randomness;

pub use error::{Error, Result};

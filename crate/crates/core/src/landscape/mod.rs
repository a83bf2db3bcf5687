//! Post-training sharpness probes: adversarial weight corruption and the
//! empirical Fisher spectrum.

mod attack;
pub mod eigen;
mod fisher;

pub use attack::{corruption_attack, AttackConfig, AttackReport};
pub use fisher::{fisher_spectrum, sample_gradients, spectrum_from_gradients, SpectrumConfig, SpectrumReport};

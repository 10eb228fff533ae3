//! emomask: obfuscate emotional content in speech audio via pitch/tempo
//! transformation, and evaluate the defense against simulated attackers
//! (a trainable 1-D CNN emotion classifier and a pluggable remote
//! multimodal-LLM client).

pub mod audio_io;
pub mod dsp_transform;
pub mod features;
pub mod attacker_cnn;
pub mod llm_attacker;
pub mod datasets;
pub mod experiments;
pub mod cli;

pub use attacker_cnn::{AttackVerdict, EmotionLabel};
pub use audio_io::AudioClip;
pub use dsp_transform::{TransformSpec, WsolaConfig};
pub use features::{FeatureMatrix, MfccConfig};

#[cfg(test)]
pub(crate) mod test_util;

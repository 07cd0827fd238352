//! Thermal residue, keystroke acoustics and their fusion into ranked
//! password guesses.

pub mod acoustic;
pub mod classify;
pub mod error;
pub mod fusion;
pub mod keys;
pub mod physics;
pub mod synth;
pub mod thermal;

pub use acoustic::{AudioClip, FeatureVector, KeystrokeBoundary, KeystrokeSegment, PipelineConfig};
pub use classify::{KeyModel, ModelStyle, PredictionList, TrainingCorpus};
pub use error::{Error, Result};
pub use fusion::{Dictionary, LayeredGraph, Ranking, ScoredPassword, ScoringMethod, SearchSpaceSpec};
pub use keys::{KeySet, KeyboardLayout};
pub use physics::{EnvironmentSpec, KeycapSpec};
pub use thermal::{CameraModel, ThermalState, TypingSession, TypingStyle};

use serde::{Deserialize, Serialize};

use keyheat_core::acoustic::DetectorConfig;
use keyheat_core::classify::{KeyProbability, PredictionList};
use keyheat_core::fusion::{RankedEntry, Ranking, ScoredPassword, ScoringMethod, SpaceMode};
use keyheat_core::physics::{conduct, time_to_threshold};
use keyheat_core::{CameraModel, EnvironmentSpec, KeycapSpec};

use crate::scenario::ScenarioConfig;

/// Physical and detection constants behind a result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub conductivity: f64,
    pub contact_area: f64,
    pub keycap_thickness: f64,
    pub keycap_mass: f64,
    pub specific_heat: f64,
    pub skin_temp: f64,
    pub ambient_temp: f64,
    pub press_duration: f64,
    pub cooling_constant: f64,
    pub detectability_threshold: f64,
    /// Heat of one press, J.
    pub conduction_heat: f64,
    /// Keycap warming from one press, K.
    pub temperature_rise: f64,
    /// Seconds until one press cools below the detectability threshold.
    pub detectability_window: f64,
    pub camera: String,
    pub camera_sensitivity: f64,
    pub camera_window: f64,
    pub same_key_threshold: f64,
    pub press_threshold: f64,
    pub refractory: f64,
    pub release_threshold: f64,
}

impl Constants {
    pub fn new(
        keycap: &KeycapSpec,
        env: &EnvironmentSpec,
        camera: &CameraModel,
        detector: &DetectorConfig,
        same_key_threshold: f64,
    ) -> anyhow::Result<Self> {
        let c = conduct(keycap, env)?;
        Ok(Self {
            conductivity: keycap.conductivity,
            contact_area: keycap.contact_area,
            keycap_thickness: keycap.thickness,
            keycap_mass: keycap.mass,
            specific_heat: keycap.specific_heat,
            skin_temp: env.skin_temp,
            ambient_temp: env.ambient_temp,
            press_duration: env.press_duration,
            cooling_constant: env.cooling_constant,
            detectability_threshold: env.detectability_threshold,
            conduction_heat: c.heat,
            temperature_rise: c.delta_t,
            detectability_window: time_to_threshold(c.delta_t, env.detectability_threshold, env.cooling_constant)?,
            camera: camera.name.clone(),
            camera_sensitivity: camera.sensitivity,
            camera_window: camera.observability_window(c.delta_t, env.cooling_constant)?,
            same_key_threshold,
            press_threshold: detector.press_threshold,
            refractory: detector.refractory,
            release_threshold: detector.release_rel_threshold,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSummary {
    pub position: usize,
    pub top: Vec<KeyProbability>,
}

pub fn summarize(predictions: &[PredictionList], keep: usize) -> Vec<PredictionSummary> {
    predictions
        .iter()
        .enumerate()
        .map(|(position, list)| PredictionSummary {
            position,
            top: list.entries().iter().take(keep).copied().collect(),
        })
        .collect()
}

/// Ranking file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingOutput {
    pub rank: Option<u128>,
    pub space_size: u128,
    pub reduction: Option<f64>,
    pub top_k: Vec<ScoredPassword>,
}

impl From<Ranking> for RankingOutput {
    fn from(r: Ranking) -> Self {
        Self {
            rank: r.rank,
            space_size: r.space_size,
            reduction: r.reduction,
            top_k: r.top_k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BonusSummary {
    pub threshold: f64,
    pub ldv_increment: f64,
    pub probability_increment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopN {
    pub n: usize,
    pub hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryOutput {
    pub entries_considered: usize,
    pub target_key_set: String,
    /// 1-based position of the truth, if it was in the dictionary.
    pub truth_position: Option<usize>,
    pub top_n: Vec<TopN>,
    pub top_k: Vec<RankedEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub scenario: Option<ScenarioConfig>,
    pub constants: Constants,
    pub thermal_key_set: String,
    pub acoustic_length: usize,
    pub predictions: Vec<PredictionSummary>,
    /// Gaps between consecutive presses, s.
    pub timings: Vec<f64>,
    pub method: ScoringMethod,
    pub bonus: Option<BonusSummary>,
    pub space_mode: SpaceMode,
    pub truth: Option<String>,
    pub truth_in_space: Option<bool>,
    pub ranking: Option<RankingOutput>,
    pub dictionary: Option<DictionaryOutput>,
}

impl Report {
    pub fn to_json(&self) -> anyhow::Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }
}

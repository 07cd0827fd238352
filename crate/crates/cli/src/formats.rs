//! On-disk formats shared between subcommands.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use keyheat_core::acoustic::{process_recording, AudioClip, KeystrokeBoundary, PipelineConfig, ProcessedKeystroke};
use keyheat_core::classify::{LabelledFeatures, ModelStyle, PredictionList, TrainingCorpus};
use keyheat_core::keys::parse_key_name;

/// Output of `segment`, input of `predict` and `fuse`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentsFile {
    pub sample_rate: u32,
    pub pipeline: PipelineConfig,
    pub segments: Vec<ProcessedKeystroke>,
    /// Gaps between consecutive presses, s.
    pub timings: Vec<f64>,
}

impl SegmentsFile {
    pub fn new(sample_rate: u32, pipeline: PipelineConfig, segments: Vec<ProcessedKeystroke>) -> Self {
        let timings = segments.windows(2).map(|w| w[1].press_time - w[0].press_time).collect();
        Self {
            sample_rate,
            pipeline,
            segments,
            timings,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    #[serde(default)]
    pub label: Option<char>,
    pub features: Vec<f64>,
}

/// Feature vectors to classify: a segments file or a bare array.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum FeatureInput {
    Segments(SegmentsFile),
    Rows(Vec<FeatureRow>),
}

impl FeatureInput {
    pub fn rows(self) -> Vec<FeatureRow> {
        match self {
            Self::Segments(s) => s
                .segments
                .into_iter()
                .map(|k| FeatureRow {
                    label: None,
                    features: k.features,
                })
                .collect(),
            Self::Rows(r) => r,
        }
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_predictions(path: &Path) -> anyhow::Result<Vec<PredictionList>> {
    read_json(path)
}

/// Hand-corrected boundaries: `press_time,release_time` per row, release optional.
pub fn read_overrides(path: &Path) -> anyhow::Result<Vec<KeystrokeBoundary>> {
    #[derive(Deserialize)]
    struct Row {
        press_time: f64,
        release_time: Option<f64>,
    }
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for row in reader.deserialize::<Row>() {
        let row = row.with_context(|| format!("parsing {}", path.display()))?;
        if !(row.press_time >= 0.0) {
            bail!("{}: press_time must be non-negative", path.display());
        }
        out.push(KeystrokeBoundary {
            press_time: row.press_time,
            release_time: row.release_time,
        });
    }
    out.sort_by(|a, b| a.press_time.total_cmp(&b.press_time));
    Ok(out)
}

/// Labelled samples from a JSON file of `{label, features}` rows, or from a
/// directory of WAV files named `<key>.wav` or `<key>_<anything>.wav`.
pub fn load_samples(source: &Path, pipeline: &PipelineConfig) -> anyhow::Result<Vec<LabelledFeatures>> {
    if source.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(source)
            .with_context(|| format!("listing {}", source.display()))?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        files.retain(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")));
        files.sort();
        if files.is_empty() {
            bail!("{} contains no WAV files", source.display());
        }
        let mut samples = Vec::new();
        for file in files {
            let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            let name = stem.split('_').next().unwrap_or_default();
            let label = parse_key_name(name)
                .with_context(|| format!("{}: file name does not name a key", file.display()))?;
            let clip = AudioClip::read_wav(&file).with_context(|| format!("reading {}", file.display()))?;
            for k in process_recording(&clip, pipeline)? {
                samples.push(LabelledFeatures {
                    label,
                    features: k.features,
                });
            }
        }
        Ok(samples)
    } else {
        let rows: Vec<FeatureRow> = read_json(source)?;
        rows.into_iter()
            .enumerate()
            .map(|(i, r)| {
                let label = r.label.with_context(|| format!("{}: row {i} has no label", source.display()))?;
                Ok(LabelledFeatures {
                    label,
                    features: r.features,
                })
            })
            .collect()
    }
}

pub fn load_corpus(
    corpus: &Path,
    tt_corpus: Option<&Path>,
    style: ModelStyle,
    keyboard: &str,
    pipeline: &PipelineConfig,
) -> anyhow::Result<TrainingCorpus> {
    match style {
        ModelStyle::Combined => {
            let tt = tt_corpus.context("the HPTT style needs --tt-corpus alongside --corpus")?;
            let hp = TrainingCorpus::new(load_samples(corpus, pipeline)?, ModelStyle::HuntAndPeck, keyboard)?;
            let tt = TrainingCorpus::new(load_samples(tt, pipeline)?, ModelStyle::TouchTyping, keyboard)?;
            Ok(TrainingCorpus::combined(hp, tt)?)
        }
        _ => {
            if tt_corpus.is_some() {
                bail!("--tt-corpus is only used with the HPTT style");
            }
            Ok(TrainingCorpus::new(load_samples(corpus, pipeline)?, style, keyboard)?)
        }
    }
}

//! Multinomial logistic regression over keystroke features.
//!
//! Features are standardized per dimension, then the model minimizes
//! `C·Σ cross-entropy + ½‖W‖²` (intercepts unpenalized) by accelerated
//! full-batch gradient descent with a fixed step of `1/L`, where `L` bounds the
//! curvature of the averaged objective.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keys::alphabet;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Typing style a model was trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelStyle {
    #[serde(rename = "HP", alias = "hp")]
    HuntAndPeck,
    #[serde(rename = "TT", alias = "tt")]
    TouchTyping,
    /// Union of hunt-and-peck and touch-typing samples.
    #[serde(rename = "HPTT", alias = "hptt")]
    Combined,
}

impl std::str::FromStr for ModelStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hp" => Ok(Self::HuntAndPeck),
            "tt" => Ok(Self::TouchTyping),
            "hptt" => Ok(Self::Combined),
            other => Err(Error::invalid(format!("unknown model style {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledFeatures {
    pub label: char,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingCorpus {
    samples: Vec<LabelledFeatures>,
    style: ModelStyle,
    keyboard_id: String,
}

impl TrainingCorpus {
    pub fn new(samples: Vec<LabelledFeatures>, style: ModelStyle, keyboard_id: impl Into<String>) -> Result<Self> {
        let keys = alphabet();
        let dim = samples.first().map(|s| s.features.len()).unwrap_or(0);
        for s in &samples {
            if keys.binary_search(&s.label).is_err() {
                return Err(Error::UnknownKey(s.label));
            }
            if s.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: s.features.len(),
                });
            }
            if s.features.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid("features must be finite"));
            }
        }
        Ok(Self {
            samples,
            style,
            keyboard_id: keyboard_id.into(),
        })
    }

    /// Merges a hunt-and-peck and a touch-typing corpus of one keyboard.
    pub fn combined(hp: TrainingCorpus, tt: TrainingCorpus) -> Result<Self> {
        if hp.style != ModelStyle::HuntAndPeck || tt.style != ModelStyle::TouchTyping {
            return Err(Error::invalid("combined corpus needs one HP and one TT corpus"));
        }
        if hp.keyboard_id != tt.keyboard_id {
            return Err(Error::invalid(format!(
                "keyboards differ: {:?} vs {:?}",
                hp.keyboard_id, tt.keyboard_id
            )));
        }
        let mut samples = hp.samples;
        samples.extend(tt.samples);
        Self::new(samples, ModelStyle::Combined, hp.keyboard_id)
    }

    pub fn samples(&self) -> &[LabelledFeatures] {
        &self.samples
    }

    pub fn style(&self) -> ModelStyle {
        self.style
    }

    pub fn keyboard_id(&self) -> &str {
        &self.keyboard_id
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map(|s| s.features.len()).unwrap_or(0)
    }

    pub fn classes(&self) -> Vec<char> {
        let mut classes: Vec<char> = self.samples.iter().map(|s| s.label).collect();
        classes.sort_unstable();
        classes.dedup();
        classes
    }

    fn subset(&self, indices: &[usize]) -> Self {
        Self {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            style: self.style,
            keyboard_id: self.keyboard_id.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparameters {
    /// Inverse regularization strength `C`.
    pub l2_inverse_strength: f64,
    pub max_iterations: usize,
    /// Seeds fold assignment; the optimizer itself starts from zero weights.
    pub seed: u64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            l2_inverse_strength: 1.0,
            max_iterations: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyModel {
    pub version: u32,
    pub classes: Vec<char>,
    /// One row per class over standardized features.
    pub weights: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    pub hyper: Hyperparameters,
    pub style: ModelStyle,
    pub keyboard_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyProbability {
    pub key: char,
    pub probability: f64,
}

/// Candidate keys for one keystroke, most probable first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PredictionList(Vec<KeyProbability>);

impl PredictionList {
    /// Sorts by descending probability, ties by key.
    pub fn new(mut entries: Vec<KeyProbability>) -> Result<Self> {
        for e in &entries {
            if !(0.0..=1.0).contains(&e.probability) {
                return Err(Error::invalid(format!(
                    "probability {} for {:?} outside [0, 1]",
                    e.probability, e.key
                )));
            }
        }
        entries.sort_by(|a, b| b.probability.total_cmp(&a.probability).then(a.key.cmp(&b.key)));
        if entries.windows(2).any(|w| w[0].key == w[1].key) {
            return Err(Error::invalid("duplicate key in prediction list"));
        }
        Ok(Self(entries))
    }

    pub fn uniform(keys: &[char]) -> Self {
        let p = 1.0 / keys.len() as f64;
        Self::new(keys.iter().map(|&key| KeyProbability { key, probability: p }).collect())
            .expect("uniform probabilities are valid")
    }

    /// All mass on `hit`, zero on the other `keys`.
    pub fn one_hot(keys: &[char], hit: char) -> Self {
        let mut entries: Vec<KeyProbability> = keys
            .iter()
            .filter(|&&k| k != hit)
            .map(|&key| KeyProbability { key, probability: 0.0 })
            .collect();
        entries.push(KeyProbability {
            key: hit,
            probability: 1.0,
        });
        Self::new(entries).expect("one-hot probabilities are valid")
    }

    pub fn entries(&self) -> &[KeyProbability] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn top(&self) -> Option<char> {
        self.0.first().map(|e| e.key)
    }

    /// 0-based position of `key` in the ranking.
    pub fn rank_of(&self, key: char) -> Option<usize> {
        self.0.iter().position(|e| e.key == key)
    }

    pub fn probability_of(&self, key: char) -> Option<f64> {
        self.0.iter().find(|e| e.key == key).map(|e| e.probability)
    }
}

struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(samples: &[LabelledFeatures], dim: usize) -> Self {
        let n = samples.len() as f64;
        let mut mean = vec![0.0; dim];
        for s in samples {
            for (m, x) in mean.iter_mut().zip(&s.features) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for s in samples {
            for ((v, x), m) in var.iter_mut().zip(&s.features).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > 1e-12 { sd } else { 1.0 }
            })
            .collect();
        Self { mean, scale }
    }
}

fn standardize(x: &[f64], mean: &[f64], scale: &[f64]) -> Vec<f64> {
    x.iter().zip(mean).zip(scale).map(|((x, m), s)| (x - m) / s).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn softmax_in_place(scores: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    scores.iter_mut().for_each(|s| *s /= sum);
}

/// Largest eigenvalue of `ZᵀZ / n` by power iteration.
fn gram_spectral_norm(rows: &[Vec<f64>], dim: usize) -> f64 {
    let n = rows.len() as f64;
    let mut v = vec![1.0 / (dim as f64).sqrt(); dim];
    let mut lambda = 0.0;
    for _ in 0..100 {
        let mut next = vec![0.0; dim];
        for r in rows {
            let proj = dot(r, &v);
            for (acc, x) in next.iter_mut().zip(r) {
                *acc += proj * x;
            }
        }
        next.iter_mut().for_each(|x| *x /= n);
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        next.iter_mut().for_each(|x| *x /= norm);
        let converged = (norm - lambda).abs() <= 1e-9 * norm;
        lambda = norm;
        v = next;
        if converged {
            break;
        }
    }
    lambda
}

/// Fits the classifier.
pub fn train(corpus: &TrainingCorpus, hyper: &Hyperparameters) -> Result<KeyModel> {
    let classes = corpus.classes();
    if classes.len() < 2 {
        return Err(Error::invalid("training needs at least two classes"));
    }
    if !(hyper.l2_inverse_strength > 0.0) {
        return Err(Error::domain("l2_inverse_strength must be positive"));
    }
    let dim = corpus.dim();
    let samples = corpus.samples();
    let n = samples.len();
    let k = classes.len();
    let standardizer = Standardizer::fit(samples, dim);
    let rows: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| standardize(&s.features, &standardizer.mean, &standardizer.scale))
        .collect();
    let targets: Vec<usize> = samples
        .iter()
        .map(|s| classes.binary_search(&s.label).expect("label is a class"))
        .collect();

    let c = hyper.l2_inverse_strength;
    let nf = n as f64;
    // Softmax cross-entropy curvature is bounded by ½·λmax of the
    // intercept-augmented Gram matrix; standardized columns are centred, so
    // the intercept direction contributes an eigenvalue of exactly 1.
    let lipschitz = c * 0.5 * gram_spectral_norm(&rows, dim).max(1.0) + 1.0 / nf;
    let step = 1.0 / lipschitz;

    let width = dim + 1;
    let mut theta = vec![0.0; k * width];
    let mut previous = theta.clone();
    let mut momentum_t = 1.0f64;
    let mut grad = vec![0.0; k * width];
    let mut scores = vec![0.0; k];

    for _ in 0..hyper.max_iterations {
        let next_t = (1.0 + (1.0 + 4.0 * momentum_t * momentum_t).sqrt()) / 2.0;
        let beta = (momentum_t - 1.0) / next_t;
        let lookahead: Vec<f64> = theta
            .iter()
            .zip(&previous)
            .map(|(w, p)| w + beta * (w - p))
            .collect();

        grad.iter_mut().for_each(|g| *g = 0.0);
        for (row, &target) in rows.iter().zip(&targets) {
            for (class, s) in scores.iter_mut().enumerate() {
                let w = &lookahead[class * width..(class + 1) * width];
                *s = dot(&w[..dim], row) + w[dim];
            }
            softmax_in_place(&mut scores);
            for (class, &p) in scores.iter().enumerate() {
                let err = p - if class == target { 1.0 } else { 0.0 };
                if err == 0.0 {
                    continue;
                }
                let g = &mut grad[class * width..(class + 1) * width];
                for (gi, x) in g[..dim].iter_mut().zip(row) {
                    *gi += err * x;
                }
                g[dim] += err;
            }
        }
        for class in 0..k {
            let base = class * width;
            for j in 0..width {
                let mut g = c * grad[base + j] / nf;
                if j < dim {
                    g += lookahead[base + j] / nf;
                }
                grad[base + j] = g;
            }
        }

        previous = std::mem::replace(
            &mut theta,
            lookahead.iter().zip(&grad).map(|(w, g)| w - step * g).collect(),
        );
        momentum_t = next_t;
    }

    let weights = (0..k)
        .map(|class| theta[class * width..class * width + dim].to_vec())
        .collect();
    let intercepts = (0..k).map(|class| theta[class * width + dim]).collect();
    Ok(KeyModel {
        version: MODEL_FORMAT_VERSION,
        classes,
        weights,
        intercepts,
        feature_mean: standardizer.mean,
        feature_scale: standardizer.scale,
        hyper: *hyper,
        style: corpus.style,
        keyboard_id: corpus.keyboard_id.clone(),
    })
}

impl KeyModel {
    pub fn dim(&self) -> usize {
        self.feature_mean.len()
    }

    pub fn probabilities(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: features.len(),
            });
        }
        let z = standardize(features, &self.feature_mean, &self.feature_scale);
        let mut scores: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.intercepts)
            .map(|(w, b)| dot(w, &z) + b)
            .collect();
        softmax_in_place(&mut scores);
        Ok(scores)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        if model.version != MODEL_FORMAT_VERSION {
            return Err(Error::invalid(format!("unsupported model version {}", model.version)));
        }
        let dim = model.feature_mean.len();
        let k = model.classes.len();
        if model.weights.len() != k
            || model.intercepts.len() != k
            || model.feature_scale.len() != dim
            || model.weights.iter().any(|w| w.len() != dim)
        {
            return Err(Error::invalid("model arrays have inconsistent shapes"));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Ranked key probabilities for one feature vector.
pub fn predict(model: &KeyModel, features: &[f64]) -> Result<PredictionList> {
    let probs = model.probabilities(features)?;
    PredictionList::new(
        model
            .classes
            .iter()
            .zip(probs)
            .map(|(&key, probability)| KeyProbability { key, probability })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: usize,
    pub per_fold: Vec<f64>,
    pub mean: f64,
}

/// Stratified k-fold cross-validation of top-1 accuracy.
pub fn cross_validate(corpus: &TrainingCorpus, folds: usize, hyper: &Hyperparameters) -> Result<CvReport> {
    if folds < 2 {
        return Err(Error::invalid("cross-validation needs at least 2 folds"));
    }
    let mut by_class: BTreeMap<char, Vec<usize>> = BTreeMap::new();
    for (i, s) in corpus.samples().iter().enumerate() {
        by_class.entry(s.label).or_default().push(i);
    }
    if let Some((&label, members)) = by_class.iter().find(|(_, m)| m.len() < folds) {
        return Err(Error::InsufficientSamples {
            label,
            count: members.len(),
            required: folds,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut assignment = vec![0usize; corpus.samples().len()];
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        for (j, &i) in members.iter().enumerate() {
            assignment[i] = j % folds;
        }
    }
    let mut per_fold = Vec::with_capacity(folds);
    for fold in 0..folds {
        let (test, train_idx): (Vec<usize>, Vec<usize>) =
            (0..assignment.len()).partition(|&i| assignment[i] == fold);
        let model = train(&corpus.subset(&train_idx), hyper)?;
        per_fold.push(top_n_accuracy(&model, &corpus.subset(&test).samples, 1)?);
    }
    let mean = per_fold.iter().sum::<f64>() / folds as f64;
    Ok(CvReport { folds, per_fold, mean })
}

/// Fraction of samples whose label is among the model's `n` best guesses.
pub fn top_n_accuracy(model: &KeyModel, samples: &[LabelledFeatures], n: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("top-N accuracy of an empty set"));
    }
    if n == 0 || n > model.classes.len() {
        return Err(Error::invalid(format!(
            "N must lie in [1, {}], got {n}",
            model.classes.len()
        )));
    }
    let mut hits = 0usize;
    for s in samples {
        let list = predict(model, &s.features)?;
        if list.entries()[..n].iter().any(|e| e.key == s.label) {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples.len() as f64)
}

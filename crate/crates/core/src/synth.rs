//! Synthetic keystroke audio for testing and benchmarking.
//!
//! Each key rings at three fixed frequencies of its own; every keystroke
//! perturbs gain and pitch slightly so no two recordings are identical.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::acoustic::{process_recording, AudioClip, PipelineConfig};
use crate::classify::{LabelledFeatures, ModelStyle, TrainingCorpus};
use crate::error::{Error, Result};
use crate::keys::alphabet;
use crate::thermal::TypingStyle;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Partial {
    pub frequency: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub sample_rate: u32,
    pub press_gain: f64,
    /// Release click gain relative to the press.
    pub release_ratio: f64,
    /// Press-to-release delay, s.
    pub release_delay: f64,
    /// Ring-down time constant, s.
    pub decay: f64,
    /// Relative standard deviation of per-keystroke gain.
    pub gain_jitter: f64,
    /// Relative standard deviation of per-keystroke pitch.
    pub pitch_jitter: f64,
    /// Silence before the first and after the last keystroke, s.
    pub margin: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            sample_rate: 44_100,
            press_gain: 0.4,
            release_ratio: 0.5,
            release_delay: 0.08,
            decay: 0.004,
            gain_jitter: 0.1,
            pitch_jitter: 0.01,
            margin: 0.2,
        }
    }
}

/// The three resonances of a key, spread over 1–9.5 kHz by a low-discrepancy
/// sequence on the key's alphabet index.
pub fn key_signature(key: char) -> Result<[Partial; 3]> {
    let index = alphabet().binary_search(&key).map_err(|_| Error::UnknownKey(key))? as f64;
    let spread = |step: f64, offset: f64| 1_000.0 + 8_500.0 * (offset + index * step).fract();
    Ok([
        Partial {
            frequency: spread(0.618_033_988_749_895, 0.1),
            amplitude: 1.0,
        },
        Partial {
            frequency: spread(0.414_213_562_373_095, 0.35),
            amplitude: 0.7,
        },
        Partial {
            frequency: spread(0.732_050_807_568_877, 0.6),
            amplitude: 0.5,
        },
    ])
}

// Touch typists strike with less force and a softer fingertip, which damps
// the upper partials.
fn style_shape(style: TypingStyle) -> (f64, [f64; 3]) {
    match style {
        TypingStyle::HuntAndPeck => (1.0, [1.0, 1.0, 1.0]),
        TypingStyle::TouchTyping => (0.8, [1.0, 0.85, 0.7]),
    }
}

fn ring(out: &mut [f64], start: usize, partials: &[Partial; 3], gain: f64, config: &SynthConfig, rng: &mut impl Rng) {
    let fs = f64::from(config.sample_rate);
    let length = ((8.0 * config.decay) * fs) as usize;
    let phases: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..TAU));
    for i in 0..length.min(out.len().saturating_sub(start)) {
        let t = i as f64 / fs;
        let envelope = (-t / config.decay).exp();
        let tone: f64 = partials
            .iter()
            .zip(&phases)
            .map(|(p, ph)| p.amplitude * (2.0 * PI * p.frequency * t + ph).sin())
            .sum();
        out[start + i] += gain * envelope * tone;
    }
}

/// Adds one keystroke (press and release click) of `key` at `press_time`.
pub fn add_keystroke(
    out: &mut [f64],
    key: char,
    press_time: f64,
    style: TypingStyle,
    config: &SynthConfig,
    rng: &mut impl Rng,
) -> Result<()> {
    let base = key_signature(key)?;
    let (style_gain, tilt) = style_shape(style);
    let pitch = 1.0 + config.pitch_jitter * rng.sample::<f64, _>(rand_distr::StandardNormal);
    let partials: [Partial; 3] = std::array::from_fn(|j| Partial {
        frequency: base[j].frequency * pitch,
        amplitude: base[j].amplitude * tilt[j],
    });
    let gain = config.press_gain
        * style_gain
        * (1.0 + config.gain_jitter * rng.sample::<f64, _>(rand_distr::StandardNormal)).max(0.2);
    let fs = f64::from(config.sample_rate);
    let at = (press_time * fs).round() as usize;
    ring(out, at, &partials, gain, config, rng);
    let release_at = ((press_time + config.release_delay) * fs).round() as usize;
    ring(out, release_at, &partials, gain * config.release_ratio, config, rng);
    Ok(())
}

/// RMS of a noise-free press over its first 10 ms, used as the signal level
/// when adding noise at a given SNR.
pub fn reference_level(config: &SynthConfig) -> f64 {
    let fs = f64::from(config.sample_rate);
    let n = (0.01 * fs) as usize;
    let power: f64 = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            let envelope = config.press_gain * (-t / config.decay).exp();
            // Mean power of three unit-phase-randomized partials.
            envelope * envelope * (1.0 + 0.49 + 0.25) / 2.0
        })
        .sum::<f64>()
        / n as f64;
    power.sqrt()
}

pub fn add_noise(clip: &mut AudioClip, snr_db: f64, signal_rms: f64, rng: &mut impl Rng) {
    let sigma = signal_rms / 10f64.powf(snr_db / 20.0);
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    for s in clip.samples_mut() {
        *s += normal.sample(rng);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub clip: AudioClip,
    pub press_times: Vec<f64>,
}

/// `text` typed with a fixed gap between presses, optionally with white noise.
pub fn typing_recording(
    text: &str,
    style: TypingStyle,
    interval: f64,
    snr_db: Option<f64>,
    config: &SynthConfig,
    rng: &mut impl Rng,
) -> Result<Recording> {
    let n = text.chars().count();
    let fs = f64::from(config.sample_rate);
    let last = config.margin + interval * n.saturating_sub(1) as f64;
    let duration = last + config.release_delay + config.margin.max(0.15);
    let mut samples = vec![0.0; (duration * fs).ceil() as usize];
    let mut press_times = Vec::with_capacity(n);
    for (i, key) in text.chars().enumerate() {
        let t = config.margin + interval * i as f64;
        add_keystroke(&mut samples, key, t, style, config, rng)?;
        press_times.push(t);
    }
    let mut clip = AudioClip::new(samples, config.sample_rate)?;
    if let Some(snr) = snr_db {
        add_noise(&mut clip, snr, reference_level(config), rng);
    }
    Ok(Recording { clip, press_times })
}

/// Training samples for `keys`: each key typed `per_key` times in one
/// recording, then run through the acoustic pipeline. Keystrokes whose count
/// does not match are an error rather than silently mislabelled.
#[allow(clippy::too_many_arguments)]
pub fn keystroke_corpus(
    keys: &[char],
    per_key: usize,
    style: TypingStyle,
    snr_db: Option<f64>,
    config: &SynthConfig,
    pipeline: &PipelineConfig,
    keyboard_id: &str,
    rng: &mut impl Rng,
) -> Result<TrainingCorpus> {
    let mut samples = Vec::with_capacity(keys.len() * per_key);
    for &key in keys {
        let text: String = std::iter::repeat_n(key, per_key).collect();
        let rec = typing_recording(&text, style, 0.3, snr_db, config, rng)?;
        let strokes = process_recording(&rec.clip, pipeline)?;
        if strokes.len() != per_key {
            return Err(Error::invalid(format!(
                "detected {} keystrokes of {key:?}, typed {per_key}",
                strokes.len()
            )));
        }
        samples.extend(strokes.into_iter().map(|s| LabelledFeatures {
            label: key,
            features: s.features,
        }));
    }
    let model_style = match style {
        TypingStyle::HuntAndPeck => ModelStyle::HuntAndPeck,
        TypingStyle::TouchTyping => ModelStyle::TouchTyping,
    };
    TrainingCorpus::new(samples, model_style, keyboard_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustic::{bandpass, detect_keystrokes, energy_vector, DetectorConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn signatures_differ_and_stay_in_band() {
        let sigs: Vec<[Partial; 3]> = alphabet().iter().map(|&k| key_signature(k).unwrap()).collect();
        for (i, a) in sigs.iter().enumerate() {
            assert!(a.iter().all(|p| (1_000.0..9_500.0).contains(&p.frequency)));
            for b in &sigs[i + 1..] {
                let gap = a.iter().zip(b).map(|(x, y)| (x.frequency - y.frequency).abs()).fold(0.0, f64::max);
                assert!(gap > 100.0);
            }
        }
        assert!(key_signature('A').is_err());
    }

    #[test]
    fn presses_are_detected_at_their_times() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rec = typing_recording("hunter2", TypingStyle::HuntAndPeck, 0.3, Some(20.0), &SynthConfig::default(), &mut rng)
            .unwrap();
        let filtered = bandpass(&rec.clip, 400.0, 12_000.0).unwrap();
        let found = detect_keystrokes(&energy_vector(&filtered).unwrap(), &DetectorConfig::default()).unwrap();
        assert_eq!(found.len(), 7);
        for (b, t) in found.iter().zip(&rec.press_times) {
            assert!((b.press_time - t).abs() < 0.005, "{} vs {t}", b.press_time);
            let release = b.release_time.expect("release click present");
            assert!((release - t - 0.08).abs() < 0.006);
        }
    }

    #[test]
    fn reference_level_matches_rendered_press() {
        let config = SynthConfig {
            gain_jitter: 0.0,
            pitch_jitter: 0.0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut levels = Vec::new();
        for _ in 0..20 {
            let mut out = vec![0.0; 441];
            add_keystroke(&mut out, 'k', 0.0, TypingStyle::HuntAndPeck, &config, &mut rng).unwrap();
            levels.push(AudioClip::new(out, 44_100).unwrap().rms());
        }
        let mean = levels.iter().sum::<f64>() / levels.len() as f64;
        assert!((mean / reference_level(&config) - 1.0).abs() < 0.1);
    }

    #[test]
    fn corpus_has_labelled_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = keystroke_corpus(
            &['a', 'z'],
            3,
            TypingStyle::TouchTyping,
            Some(25.0),
            &SynthConfig::default(),
            &PipelineConfig::default(),
            "synthetic",
            &mut rng,
        )
        .unwrap();
        assert_eq!(c.samples().len(), 6);
        assert_eq!(c.dim(), 37 * 32);
        assert_eq!(c.style(), ModelStyle::TouchTyping);
    }
}

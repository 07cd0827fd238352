//! Keystroke audio: band-pass filtering, press detection, segmentation and
//! MFCC features.

mod filter;
mod mfcc;
mod segment;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use filter::{bandpass, Biquad};
pub use mfcc::{mfcc, mfcc_with, FeatureVector, MfccConfig};
pub use segment::{
    detect_keystrokes, energy_vector, interkeystroke_timings, split_segments, DetectorConfig,
    EnergySeries, KeystrokeBoundary, KeystrokeSegment,
};

/// Settings for turning a recording into per-keystroke features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub band_low: f64,
    pub band_high: f64,
    pub detector: DetectorConfig,
    /// Audio kept per keystroke, s.
    pub segment_duration: f64,
    pub mfcc: MfccConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            band_low: 400.0,
            band_high: 12_000.0,
            detector: DetectorConfig::default(),
            segment_duration: 0.1,
            mfcc: MfccConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessedKeystroke {
    pub press_time: f64,
    pub release_time: Option<f64>,
    pub features: Vec<f64>,
}

/// Band-pass, detect presses, cut segments and compute their MFCCs.
pub fn process_recording(clip: &AudioClip, config: &PipelineConfig) -> Result<Vec<ProcessedKeystroke>> {
    let filtered = bandpass(clip, config.band_low, config.band_high)?;
    let energy = energy_vector(&filtered)?;
    let boundaries = detect_keystrokes(&energy, &config.detector)?;
    features_at(&filtered, &boundaries, config)
}

/// Features for given boundaries, e.g. hand-corrected press times.
/// `clip` must already be band-passed.
pub fn features_at(
    filtered: &AudioClip,
    boundaries: &[KeystrokeBoundary],
    config: &PipelineConfig,
) -> Result<Vec<ProcessedKeystroke>> {
    split_segments(filtered, boundaries, config.segment_duration)
        .into_iter()
        .map(|s| {
            Ok(ProcessedKeystroke {
                press_time: s.press_time,
                release_time: s.release_time,
                features: mfcc_with(&s.clip, &config.mfcc)?.coefficients,
            })
        })
        .collect()
}

/// Mono audio at a fixed sample rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("audio samples must be finite"));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn silence(duration: f64, sample_rate: u32) -> Self {
        let n = (duration * f64::from(sample_rate)).round() as usize;
        Self {
            samples: vec![0.0; n],
            sample_rate,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Samples `[start, start + len)`, zero-padded past the end.
    pub fn slice_padded(&self, start: usize, len: usize) -> Self {
        let mut samples = vec![0.0; len];
        if start < self.samples.len() {
            let end = (start + len).min(self.samples.len());
            samples[..end - start].copy_from_slice(&self.samples[start..end]);
        }
        Self {
            samples,
            sample_rate: self.sample_rate,
        }
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64).sqrt()
    }

    /// Reads a PCM or float WAV file; multi-channel audio is averaged to mono.
    pub fn read_wav(path: impl AsRef<Path>) -> Result<Self> {
        let reader = hound::WavReader::open(path.as_ref())?;
        Self::from_wav_reader(reader)
    }

    pub fn from_wav_bytes(bytes: &[u8]) -> Result<Self> {
        Self::from_wav_reader(hound::WavReader::new(std::io::Cursor::new(bytes))?)
    }

    fn from_wav_reader<R: std::io::Read>(reader: hound::WavReader<R>) -> Result<Self> {
        let spec = reader.spec();
        let channels = usize::from(spec.channels.max(1));
        let interleaved: Vec<f64> = match spec.sample_format {
            hound::SampleFormat::Int => {
                let scale = (1i64 << (spec.bits_per_sample - 1)) as f64;
                reader
                    .into_samples::<i32>()
                    .map(|s| s.map(|v| f64::from(v) / scale))
                    .collect::<std::result::Result<_, _>>()?
            }
            hound::SampleFormat::Float => reader
                .into_samples::<f32>()
                .map(|s| s.map(f64::from))
                .collect::<std::result::Result<_, _>>()?,
        };
        let samples = interleaved
            .chunks(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect();
        Self::new(samples, spec.sample_rate)
    }

    /// Writes 16-bit mono PCM, clipping to [-1, 1].
    pub fn write_wav(&self, path: impl AsRef<Path>) -> Result<()> {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: self.sample_rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut writer = hound::WavWriter::create(path.as_ref(), spec)?;
        for s in &self.samples {
            writer.write_sample((s.clamp(-1.0, 1.0) * 32767.0).round() as i16)?;
        }
        writer.finalize()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slice_pads_past_end() {
        let clip = AudioClip::new(vec![1.0, 2.0, 3.0], 10).unwrap();
        assert_eq!(clip.slice_padded(1, 4).samples(), &[2.0, 3.0, 0.0, 0.0]);
        assert_eq!(clip.slice_padded(5, 2).samples(), &[0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_audio() {
        assert!(AudioClip::new(vec![f64::NAN], 100).is_err());
        assert!(AudioClip::new(vec![], 0).is_err());
    }

    #[test]
    fn wav_round_trip_and_downmix() {
        let dir = std::env::temp_dir().join(format!("keyheat-wav-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("mono.wav");
        let clip = AudioClip::new(vec![0.0, 0.5, -0.5, 0.25], 8000).unwrap();
        clip.write_wav(&path).unwrap();
        let back = AudioClip::read_wav(&path).unwrap();
        assert_eq!(back.sample_rate(), 8000);
        for (a, b) in clip.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() < 1e-4);
        }

        let stereo = dir.join("stereo.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&stereo, spec).unwrap();
        for s in [16384i16, 0, -16384, -16384] {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
        let mixed = AudioClip::read_wav(&stereo).unwrap();
        assert_eq!(mixed.samples(), &[0.25, -0.5]);

        assert!(AudioClip::from_wav_bytes(b"RIFF0000WAVEjunk").is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::AudioClip;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MfccConfig {
    /// Analysis frame, s.
    pub frame_duration: f64,
    /// Hop between frames, s.
    pub step_duration: f64,
    pub filters: usize,
    /// Cepstral coefficients kept per frame.
    pub coefficients: usize,
    pub low_hz: f64,
    /// Upper filterbank edge; Nyquist when absent.
    pub high_hz: Option<f64>,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            frame_duration: 0.010,
            step_duration: 0.0025,
            filters: 32,
            coefficients: 32,
            low_hz: 0.0,
            high_hz: None,
        }
    }
}

impl MfccConfig {
    pub fn frame_len(&self, sample_rate: u32) -> usize {
        (self.frame_duration * f64::from(sample_rate)).round() as usize
    }

    pub fn step_len(&self, sample_rate: u32) -> usize {
        ((self.step_duration * f64::from(sample_rate)).round() as usize).max(1)
    }

    /// Frames that fit into `samples` samples.
    pub fn frame_count(&self, samples: usize, sample_rate: u32) -> usize {
        let frame = self.frame_len(sample_rate);
        if samples < frame || frame == 0 {
            0
        } else {
            (samples - frame) / self.step_len(sample_rate) + 1
        }
    }
}

/// MFCC frames of one keystroke, concatenated in time order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub coefficients: Vec<f64>,
    pub frames: usize,
    pub coefficients_per_frame: usize,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn frame(&self, index: usize) -> &[f64] {
        let n = self.coefficients_per_frame;
        &self.coefficients[index * n..(index + 1) * n]
    }
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters spaced evenly on the mel scale, sampled at FFT bins.
fn mel_filterbank(filters: usize, fft_len: usize, sample_rate: f64, low: f64, high: f64) -> Vec<Vec<f64>> {
    let bins = fft_len / 2 + 1;
    let (lo, hi) = (hz_to_mel(low), hz_to_mel(high));
    let edges: Vec<f64> = (0..filters + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (filters + 1) as f64))
        .collect();
    (0..filters)
        .map(|m| {
            let (left, centre, right) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * sample_rate / fft_len as f64;
                    if f <= left || f >= right {
                        0.0
                    } else if f <= centre {
                        (f - left) / (centre - left)
                    } else {
                        (right - f) / (right - centre)
                    }
                })
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II, first `keep` outputs.
fn dct2(input: &[f64], keep: usize) -> Vec<f64> {
    let n = input.len() as f64;
    (0..keep)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            scale
                * input
                    .iter()
                    .enumerate()
                    .map(|(i, x)| x * (PI * k as f64 * (2.0 * i as f64 + 1.0) / (2.0 * n)).cos())
                    .sum::<f64>()
        })
        .collect()
}

/// Default-configuration MFCC of a keystroke segment.
pub fn mfcc(segment: &AudioClip) -> Result<FeatureVector> {
    mfcc_with(segment, &MfccConfig::default())
}

pub fn mfcc_with(segment: &AudioClip, config: &MfccConfig) -> Result<FeatureVector> {
    let fs = segment.sample_rate();
    let frame_len = config.frame_len(fs);
    let step = config.step_len(fs);
    let frames = config.frame_count(segment.len(), fs);
    if frames == 0 {
        return Err(Error::invalid(format!(
            "segment of {} samples is shorter than one {frame_len}-sample frame",
            segment.len()
        )));
    }
    if config.coefficients > config.filters || config.filters == 0 {
        return Err(Error::invalid("need 0 < coefficients <= filters"));
    }
    let high = config.high_hz.unwrap_or(f64::from(fs) / 2.0);
    if !(config.low_hz >= 0.0 && config.low_hz < high && high <= f64::from(fs) / 2.0) {
        return Err(Error::domain("filterbank edges must satisfy 0 <= low < high <= Nyquist"));
    }

    // Zero-padding to 4× keeps every low mel filter populated with bins.
    let fft_len = (frame_len * 4).next_power_of_two();
    let bank = mel_filterbank(config.filters, fft_len, f64::from(fs), config.low_hz, high);
    let hamming: Vec<f64> = (0..frame_len)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (frame_len as f64 - 1.0).max(1.0)).cos())
        .collect();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(fft_len);
    let mut buf = vec![Complex::default(); fft_len];
    let mut coefficients = Vec::with_capacity(frames * config.coefficients);
    let samples = segment.samples();

    for f in 0..frames {
        let frame = &samples[f * step..f * step + frame_len];
        buf.iter_mut().for_each(|c| *c = Complex::default());
        for ((slot, &s), &w) in buf.iter_mut().zip(frame).zip(&hamming) {
            slot.re = s * w;
        }
        fft.process(&mut buf);
        let power: Vec<f64> = buf[..fft_len / 2 + 1].iter().map(|c| c.norm_sqr()).collect();
        let log_energies: Vec<f64> = bank
            .iter()
            .map(|filter| {
                let e: f64 = filter.iter().zip(&power).map(|(w, p)| w * p).sum();
                e.max(f64::MIN_POSITIVE).ln()
            })
            .collect();
        coefficients.extend(dct2(&log_energies, config.coefficients));
    }

    Ok(FeatureVector {
        coefficients,
        frames,
        coefficients_per_frame: config.coefficients,
    })
}

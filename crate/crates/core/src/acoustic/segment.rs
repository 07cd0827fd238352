use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::AudioClip;
use crate::error::{Error, Result};

/// Energy analysis window length.
pub const ENERGY_WINDOW_SECONDS: f64 = 0.002;

/// Normalized per-window spectral energy of a recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySeries {
    pub values: Vec<f64>,
    pub window_len: usize,
    /// Seconds per window.
    pub window_duration: f64,
}

impl EnergySeries {
    pub fn window_start(&self, index: usize) -> f64 {
        index as f64 * self.window_duration
    }
}

/// Sums FFT magnitudes over consecutive 2 ms windows and scales the series so
/// its maximum is 1. A silent clip yields all zeros.
pub fn energy_vector(clip: &AudioClip) -> Result<EnergySeries> {
    let fs = f64::from(clip.sample_rate());
    let window_len = ((ENERGY_WINDOW_SECONDS * fs).round() as usize).max(1);
    if clip.len() < window_len {
        return Err(Error::invalid(format!(
            "clip of {} samples is shorter than one {window_len}-sample window",
            clip.len()
        )));
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(window_len);
    let mut scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex::default(); window_len];
    let mut values: Vec<f64> = clip
        .samples()
        .chunks_exact(window_len)
        .map(|window| {
            for (slot, &s) in buf.iter_mut().zip(window) {
                *slot = Complex::new(s, 0.0);
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            buf.iter().map(|c| c.norm()).sum::<f64>()
        })
        .collect();
    let max = values.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        values.iter_mut().for_each(|v| *v /= max);
    }
    Ok(EnergySeries {
        values,
        window_len,
        window_duration: window_len as f64 / fs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Rise in normalized energy between adjacent windows that marks a press.
    pub press_threshold: f64,
    /// Dead time after a press, s.
    pub refractory: f64,
    /// Release energy relative to the press peak.
    pub release_rel_threshold: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            press_threshold: 0.15,
            refractory: 0.125,
            release_rel_threshold: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeystrokeBoundary {
    pub press_time: f64,
    pub release_time: Option<f64>,
}

/// Finds key presses (and releases, where visible) in an energy series.
///
/// A press starts in the window whose energy rises by more than the press
/// threshold over its predecessor; further presses are ignored for the
/// refractory period. After the press transient decays below
/// `release_rel_threshold × peak`, the next rising window reaching that level
/// before the following press is its release.
pub fn detect_keystrokes(energy: &EnergySeries, config: &DetectorConfig) -> Result<Vec<KeystrokeBoundary>> {
    let unit = |x: f64| x > 0.0 && x < 1.0;
    if !unit(config.press_threshold) || !unit(config.release_rel_threshold) {
        return Err(Error::domain("detector thresholds must lie in (0, 1)"));
    }
    if !(config.refractory > 0.0) {
        return Err(Error::domain("refractory interval must be positive"));
    }
    let v = &energy.values;
    let dead = (config.refractory / energy.window_duration - 1e-9).ceil().max(1.0) as usize;

    let mut presses = Vec::new();
    let mut next_allowed = 1;
    for i in 1..v.len() {
        if i >= next_allowed && v[i] - v[i - 1] > config.press_threshold {
            presses.push(i);
            next_allowed = i + dead;
        }
    }

    let boundaries = presses
        .iter()
        .enumerate()
        .map(|(n, &p)| {
            let limit = presses.get(n + 1).copied().unwrap_or(v.len());
            let peak_end = (p + dead).min(limit);
            let (peak_at, peak) = v[p..peak_end]
                .iter()
                .enumerate()
                .fold((p, 0.0), |best, (j, &x)| if x > best.1 { (p + j, x) } else { best });
            let level = config.release_rel_threshold * peak;
            let release = v[peak_at..limit]
                .iter()
                .position(|&x| x < level)
                .map(|off| peak_at + off)
                .and_then(|quiet| (quiet + 1..limit).find(|&j| v[j] > v[j - 1] && v[j] >= level));
            KeystrokeBoundary {
                press_time: energy.window_start(p),
                release_time: release.map(|j| energy.window_start(j)),
            }
        })
        .collect();
    Ok(boundaries)
}

/// One keystroke's audio, starting at the press.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeystrokeSegment {
    pub press_time: f64,
    pub release_time: Option<f64>,
    pub clip: AudioClip,
}

/// Cuts a fixed-length clip at each press, zero-padded at the end of the recording.
pub fn split_segments(
    clip: &AudioClip,
    boundaries: &[KeystrokeBoundary],
    segment_len: f64,
) -> Vec<KeystrokeSegment> {
    let fs = f64::from(clip.sample_rate());
    let len = (segment_len * fs).round() as usize;
    boundaries
        .iter()
        .map(|b| KeystrokeSegment {
            press_time: b.press_time,
            release_time: b.release_time,
            clip: clip.slice_padded((b.press_time * fs).round().max(0.0) as usize, len),
        })
        .collect()
}

/// Gaps between consecutive presses as `(index of the first press, Δt)`.
pub fn interkeystroke_timings(segments: &[KeystrokeSegment]) -> Vec<(usize, f64)> {
    segments
        .windows(2)
        .enumerate()
        .map(|(i, w)| (i, w[1].press_time - w[0].press_time))
        .collect()
}

use std::f64::consts::PI;

use super::AudioClip;
use crate::error::{Error, Result};

// Pole-pair quality factors of a 4th-order Butterworth prototype.
const BUTTERWORTH4_Q: [f64; 2] = [0.541_196_100_146_197, 1.306_562_964_876_376_6];

/// Second-order IIR section in direct form I, normalized so `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    pub fn lowpass(cutoff: f64, sample_rate: f64, q: f64) -> Self {
        let (cos, alpha) = Self::prewarp(cutoff, sample_rate, q);
        Self::normalized(
            [(1.0 - cos) / 2.0, 1.0 - cos, (1.0 - cos) / 2.0],
            [1.0 + alpha, -2.0 * cos, 1.0 - alpha],
        )
    }

    pub fn highpass(cutoff: f64, sample_rate: f64, q: f64) -> Self {
        let (cos, alpha) = Self::prewarp(cutoff, sample_rate, q);
        Self::normalized(
            [(1.0 + cos) / 2.0, -(1.0 + cos), (1.0 + cos) / 2.0],
            [1.0 + alpha, -2.0 * cos, 1.0 - alpha],
        )
    }

    fn prewarp(cutoff: f64, sample_rate: f64, q: f64) -> (f64, f64) {
        let w0 = 2.0 * PI * cutoff / sample_rate;
        (w0.cos(), w0.sin() / (2.0 * q))
    }

    fn normalized(b: [f64; 3], a: [f64; 3]) -> Self {
        Self {
            b: [b[0] / a[0], b[1] / a[0], b[2] / a[0]],
            a: [a[1] / a[0], a[2] / a[0]],
        }
    }

    pub fn process(&self, signal: &mut [f64]) {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        for s in signal.iter_mut() {
            let x = *s;
            let y = self.b[0] * x + self.b[1] * x1 + self.b[2] * x2 - self.a[0] * y1 - self.a[1] * y2;
            x2 = x1;
            x1 = x;
            y2 = y1;
            y1 = y;
            *s = y;
        }
    }

    /// Magnitude response at `freq`.
    pub fn gain(&self, freq: f64, sample_rate: f64) -> f64 {
        let w = 2.0 * PI * freq / sample_rate;
        let eval = |c0: f64, c1: f64, c2: f64| {
            let re = c0 + c1 * w.cos() + c2 * (2.0 * w).cos();
            let im = -c1 * w.sin() - c2 * (2.0 * w).sin();
            (re * re + im * im).sqrt()
        };
        eval(self.b[0], self.b[1], self.b[2]) / eval(1.0, self.a[0], self.a[1])
    }
}

fn sections(low: f64, high: f64, sample_rate: f64) -> Vec<Biquad> {
    BUTTERWORTH4_Q
        .iter()
        .map(|&q| Biquad::highpass(low, sample_rate, q))
        .chain(BUTTERWORTH4_Q.iter().map(|&q| Biquad::lowpass(high, sample_rate, q)))
        .collect()
}

/// Keeps `low..high` Hz with a 4th-order Butterworth high-pass and low-pass
/// pair, run forward then backward so the output has zero phase shift.
pub fn bandpass(clip: &AudioClip, low: f64, high: f64) -> Result<AudioClip> {
    let fs = f64::from(clip.sample_rate());
    if !(low > 0.0 && low < high) {
        return Err(Error::domain(format!("band edges must satisfy 0 < low < high, got {low}..{high}")));
    }
    if high >= fs / 2.0 {
        return Err(Error::domain(format!(
            "upper edge {high} Hz is not below the Nyquist frequency {} Hz",
            fs / 2.0
        )));
    }
    let n = clip.len();
    if n == 0 {
        return Ok(clip.clone());
    }

    // Odd reflection at both ends absorbs the start-up transient.
    let pad = ((3.0 * fs / low).ceil() as usize).min(n - 1);
    let x = clip.samples();
    let mut buf = Vec::with_capacity(n + 2 * pad);
    buf.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    buf.extend_from_slice(x);
    buf.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    let filters = sections(low, high, fs);
    for f in &filters {
        f.process(&mut buf);
    }
    buf.reverse();
    for f in &filters {
        f.process(&mut buf);
    }
    buf.reverse();
    AudioClip::new(buf[pad..pad + n].to_vec(), clip.sample_rate())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, seconds: f64, fs: u32) -> AudioClip {
        let n = (seconds * f64::from(fs)) as usize;
        let samples = (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / f64::from(fs)).sin())
            .collect();
        AudioClip::new(samples, fs).unwrap()
    }

    fn middle_rms(clip: &AudioClip) -> f64 {
        let n = clip.len();
        clip.slice_padded(n / 4, n / 2).rms()
    }

    fn db(ratio: f64) -> f64 {
        20.0 * ratio.log10()
    }

    // Response oracle: the analytic magnitude of the cascade, squared for the
    // forward-backward pass.
    fn analytic_db(freq: f64, fs: f64) -> f64 {
        let g: f64 = sections(400.0, 12_000.0, fs).iter().map(|s| s.gain(freq, fs)).product();
        db(g * g)
    }

    #[test]
    fn analytic_response_meets_band_edges() {
        let fs = 44_100.0;
        assert!(analytic_db(5_000.0, fs).abs() < 0.1);
        assert!(analytic_db(200.0, fs) <= -24.0);
        assert!(analytic_db(50.0, fs) <= -24.0);
        // The octave above 12 kHz lies past Nyquist at 44.1 kHz; check at 96 kHz.
        assert!(analytic_db(24_000.0, 96_000.0) <= -24.0);
        assert!(analytic_db(400.0, fs) < -5.0 && analytic_db(400.0, fs) > -7.0);
    }

    #[test]
    fn passband_tone_is_preserved() {
        let clip = tone(5_000.0, 0.5, 44_100);
        let out = bandpass(&clip, 400.0, 12_000.0).unwrap();
        let change = db(middle_rms(&out) / middle_rms(&clip));
        assert!(change.abs() < 1.0, "{change} dB");
    }

    #[test]
    fn hum_is_rejected() {
        let clip = tone(50.0, 1.0, 44_100);
        let out = bandpass(&clip, 400.0, 12_000.0).unwrap();
        let change = db(middle_rms(&out) / middle_rms(&clip));
        assert!(change <= -24.0, "{change} dB");
    }

    #[test]
    fn zero_phase_keeps_impulse_position() {
        let mut clip = AudioClip::silence(0.2, 44_100);
        clip.samples_mut()[4410] = 1.0;
        let out = bandpass(&clip, 400.0, 12_000.0).unwrap();
        let peak = out
            .samples()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap()
            .0;
        assert!((peak as i64 - 4410).abs() <= 1, "{peak}");
    }

    #[test]
    fn silence_stays_silent() {
        let clip = AudioClip::silence(0.1, 44_100);
        assert!(bandpass(&clip, 400.0, 12_000.0).unwrap().samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn band_limited_signal_is_a_fixed_point() {
        let a = tone(1_000.0, 0.5, 44_100);
        let b = tone(7_300.0, 0.5, 44_100);
        let mix: Vec<f64> = a.samples().iter().zip(b.samples()).map(|(x, y)| x + 0.5 * y).collect();
        let clip = AudioClip::new(mix, 44_100).unwrap();
        let once = bandpass(&clip, 400.0, 12_000.0).unwrap();
        let twice = bandpass(&once, 400.0, 12_000.0).unwrap();
        assert!(db(middle_rms(&twice) / middle_rms(&once)).abs() < 1.0);
    }

    #[test]
    fn nyquist_is_enforced() {
        let clip = tone(1_000.0, 0.1, 16_000);
        assert!(bandpass(&clip, 400.0, 12_000.0).is_err());
        assert!(bandpass(&clip, 500.0, 400.0).is_err());
        assert!(bandpass(&clip, 400.0, 7_000.0).is_ok());
    }
}

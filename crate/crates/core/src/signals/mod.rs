//! Mono audio signals, test-signal synthesis, WAV I/O and spectral analysis.

use std::f64::consts::TAU;

use crate::{Error, Result};

mod spectrum;
pub mod wav;

pub use spectrum::{
    linear_fit, magnitude_spectrum, spectrogram, total_harmonic_distortion, LinearFit, Spectrogram,
};

/// Default sample rate used throughout the toolkit.
pub const DEFAULT_SAMPLE_RATE: u32 = 48_000;

/// Uniformly sampled mono audio.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioSignal {
    /// Wraps `samples`, rejecting a zero sample rate or non-finite values.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::range("sample_rate", "must be positive"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::range(
                "sample",
                format!("sample {i} is not finite"),
            ));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn silence(len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
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
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// True when every sample lies in [-1, 1].
    pub fn is_normalized(&self) -> bool {
        self.peak() <= 1.0
    }

    /// Mean of the squared samples.
    pub fn energy(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64
    }

    pub fn rms(&self) -> f64 {
        self.energy().sqrt()
    }

    /// Multiplies every sample by `gain`.
    pub fn scaled(&self, gain: f64) -> Result<Self> {
        Self::new(
            self.samples.iter().map(|s| s * gain).collect(),
            self.sample_rate,
        )
    }
}

fn check_below_nyquist(what: &'static str, frequency: f64, sample_rate: u32) -> Result<()> {
    let nyquist = sample_rate as f64 / 2.0;
    if !(frequency >= 0.0 && frequency < nyquist) {
        return Err(Error::range(
            what,
            format!("{frequency} Hz is outside [0, {nyquist}) for a {sample_rate} Hz rate"),
        ));
    }
    Ok(())
}

fn sample_count(duration: f64, sample_rate: u32) -> Result<usize> {
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::range("duration", format!("{duration} s must be positive")));
    }
    Ok((duration * sample_rate as f64).round() as usize)
}

/// `amplitude * sin(2π f i / sample_rate)` for `round(duration * sample_rate)` samples.
pub fn generate_tone(
    frequency: f64,
    duration: f64,
    sample_rate: u32,
    amplitude: f64,
) -> Result<AudioSignal> {
    if sample_rate == 0 {
        return Err(Error::range("sample_rate", "must be positive"));
    }
    check_below_nyquist("frequency", frequency, sample_rate)?;
    if frequency == 0.0 {
        return Err(Error::range("frequency", "a tone needs a positive frequency"));
    }
    if !(amplitude > 0.0 && amplitude <= 1.0) {
        return Err(Error::range("amplitude", format!("{amplitude} not in (0, 1]")));
    }
    let n = sample_count(duration, sample_rate)?;
    let rate = sample_rate as f64;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            amplitude * (TAU * (frequency * t)).sin()
        })
        .collect();
    AudioSignal::new(samples, sample_rate)
}

/// Unit-amplitude linear sweep from `f_start` to `f_end` over `duration`.
///
/// Phase is `2π (f_start t + k t² / 2)` with `k = (f_end - f_start) / duration`,
/// so with `f_start == f_end` the output is bit-identical to [`generate_tone`].
pub fn generate_chirp(
    f_start: f64,
    f_end: f64,
    duration: f64,
    sample_rate: u32,
) -> Result<AudioSignal> {
    if sample_rate == 0 {
        return Err(Error::range("sample_rate", "must be positive"));
    }
    check_below_nyquist("f_start", f_start, sample_rate)?;
    check_below_nyquist("f_end", f_end, sample_rate)?;
    let n = sample_count(duration, sample_rate)?;
    let sweep_rate = (f_end - f_start) / duration;
    let rate = sample_rate as f64;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            (TAU * (f_start * t + 0.5 * sweep_rate * t * t)).sin()
        })
        .collect();
    AudioSignal::new(samples, sample_rate)
}

/// Analytic instantaneous frequency of [`generate_chirp`] at time `t`.
pub fn chirp_instantaneous_frequency(f_start: f64, f_end: f64, duration: f64, t: f64) -> f64 {
    f_start + (f_end - f_start) * t / duration
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tone_basics() {
        let tone = generate_tone(1000.0, 1.0, 48_000, 1.0).unwrap();
        assert_eq!(tone.len(), 48_000);
        assert_eq!(tone.samples()[0], 0.0);
        assert!((tone.samples()[12] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tone_rejects_nyquist() {
        assert!(matches!(
            generate_tone(30_000.0, 1.0, 48_000, 1.0),
            Err(Error::Range { .. })
        ));
        assert!(generate_tone(24_000.0, 1.0, 48_000, 1.0).is_err());
        assert!(generate_tone(1000.0, 0.0, 48_000, 1.0).is_err());
        assert!(generate_tone(1000.0, 1.0, 48_000, 1.5).is_err());
    }

    #[test]
    fn chirp_length_and_frequency() {
        let chirp = generate_chirp(0.0, 10_000.0, 5.0, 48_000).unwrap();
        assert_eq!(chirp.len(), 240_000);
        assert_eq!(chirp_instantaneous_frequency(0.0, 10_000.0, 5.0, 2.5), 5000.0);
        assert!(chirp.peak() <= 1.0);
    }

    #[test]
    fn degenerate_chirp_is_tone() {
        let chirp = generate_chirp(440.0, 440.0, 1.0, 48_000).unwrap();
        let tone = generate_tone(440.0, 1.0, 48_000, 1.0).unwrap();
        assert_eq!(chirp, tone);
    }

    #[test]
    fn chirp_rejects_nyquist() {
        assert!(generate_chirp(0.0, 10_000.0, 5.0, 8_000).is_err());
        assert!(generate_chirp(-1.0, 100.0, 1.0, 8_000).is_err());
    }

    #[test]
    fn generators_are_deterministic() {
        let a = generate_chirp(100.0, 3000.0, 0.5, 16_000).unwrap();
        let b = generate_chirp(100.0, 3000.0, 0.5, 16_000).unwrap();
        assert!(a
            .samples()
            .iter()
            .zip(b.samples())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn rejects_non_finite() {
        assert!(AudioSignal::new(vec![0.0, f64::NAN], 8000).is_err());
        assert!(AudioSignal::new(vec![0.0], 0).is_err());
    }
}

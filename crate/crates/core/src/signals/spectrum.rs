use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::AudioSignal;
use crate::{Error, Result};

/// Magnitude STFT of a mono signal.
///
/// `magnitudes[t][k]` is the Hann-windowed DFT magnitude of frame `t` at bin
/// `k`, with `frame_length / 2 + 1` bins per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub magnitudes: Vec<Vec<f64>>,
    pub frame_length: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl Spectrogram {
    pub fn time_bins(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn freq_bins(&self) -> usize {
        self.frame_length / 2 + 1
    }

    pub fn bin_width(&self) -> f64 {
        self.sample_rate as f64 / self.frame_length as f64
    }

    pub fn bin_frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_width()
    }

    /// Centre time of frame `t` in seconds.
    pub fn frame_time(&self, t: usize) -> f64 {
        (t * self.hop) as f64 / self.sample_rate as f64
            + self.frame_length as f64 / (2.0 * self.sample_rate as f64)
    }

    /// Argmax frequency bin of every frame.
    pub fn ridge_bins(&self) -> Vec<usize> {
        self.magnitudes
            .iter()
            .map(|frame| {
                frame
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (k, &m)| {
                        if m > best.1 {
                            (k, m)
                        } else {
                            best
                        }
                    })
                    .0
            })
            .collect()
    }

    /// `(frame time, ridge frequency)` pairs.
    pub fn ridge(&self) -> Vec<(f64, f64)> {
        self.ridge_bins()
            .into_iter()
            .enumerate()
            .map(|(t, k)| (self.frame_time(t), self.bin_frequency(k)))
            .collect()
    }

    /// Sum of squared magnitudes over every cell.
    pub fn total_energy(&self) -> f64 {
        self.magnitudes
            .iter()
            .flat_map(|f| f.iter())
            .map(|m| m * m)
            .sum()
    }

    /// Writes `time_s,freq_hz,magnitude`, one row per cell.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "time_s,freq_hz,magnitude")?;
        for (t, frame) in self.magnitudes.iter().enumerate() {
            let time = self.frame_time(t);
            for (k, m) in frame.iter().enumerate() {
                writeln!(out, "{:.6},{:.3},{:.9e}", time, self.bin_frequency(k), m)?;
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }
}

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Hann-windowed magnitude STFT.
pub fn spectrogram(signal: &AudioSignal, frame_length: usize, hop: usize) -> Result<Spectrogram> {
    if frame_length < 16 || !frame_length.is_power_of_two() {
        return Err(Error::range(
            "frame_length",
            format!("{frame_length} must be a power of two >= 16"),
        ));
    }
    if hop == 0 || hop > frame_length {
        return Err(Error::range("hop", format!("{hop} not in (0, {frame_length}]")));
    }
    let x = signal.samples();
    if x.len() < frame_length {
        return Err(Error::Size(format!(
            "signal has {} samples, one frame needs {frame_length}",
            x.len()
        )));
    }
    let window = hann(frame_length);
    let fft = FftPlanner::new().plan_fft_forward(frame_length);
    let frames = 1 + (x.len() - frame_length) / hop;
    let bins = frame_length / 2 + 1;
    let mut buf = vec![Complex::new(0.0, 0.0); frame_length];
    let mut magnitudes = Vec::with_capacity(frames);
    for t in 0..frames {
        let start = t * hop;
        for (i, c) in buf.iter_mut().enumerate() {
            *c = Complex::new(x[start + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        magnitudes.push(buf[..bins].iter().map(|c| c.norm()).collect());
    }
    Ok(Spectrogram {
        magnitudes,
        frame_length,
        hop,
        sample_rate: signal.sample_rate(),
    })
}

/// Rectangular-window DFT magnitudes for bins `0..=n/2`.
pub fn magnitude_spectrum(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&s| Complex::new(s, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf[..n / 2 + 1].iter().map(|c| c.norm()).collect()
}

/// THD of `samples` for a tone at `fundamental` Hz, as a ratio (not percent).
///
/// Power is read from a Hann-windowed spectrum, summing three bins either side
/// of each harmonic up to Nyquist.
pub fn total_harmonic_distortion(samples: &[f64], sample_rate: u32, fundamental: f64) -> f64 {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let w = hann(n);
    let windowed: Vec<f64> = samples
        .iter()
        .zip(&w)
        .map(|(s, w)| (s - mean) * w)
        .collect();
    let spec = magnitude_spectrum(&windowed);
    let bin_width = sample_rate as f64 / n as f64;
    let band_power = |f: f64| -> f64 {
        let centre = (f / bin_width).round() as isize;
        (centre - 3..=centre + 3)
            .filter(|&k| k > 0 && (k as usize) < spec.len())
            .map(|k| spec[k as usize].powi(2))
            .sum()
    };
    let fundamental_power = band_power(fundamental);
    let nyquist = sample_rate as f64 / 2.0;
    let harmonic_power: f64 = (2..)
        .map(|h| h as f64 * fundamental)
        .take_while(|&f| f < nyquist - 3.0 * bin_width)
        .map(band_power)
        .sum();
    (harmonic_power / fundamental_power).sqrt()
}

/// Ordinary least-squares line `y = slope x + intercept` with its R².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(points: &[(f64, f64)]) -> Option<LinearFit> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - (slope * p.0 + intercept)).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

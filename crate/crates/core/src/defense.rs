//! Multi-microphone injection detector.
//!
//! Sound from a real talker reaches every microphone port of a device within
//! a fraction of a millisecond, so the channels are strongly correlated. A
//! single laser lights up one port only: that channel carries a loud signal
//! the others do not share.

use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::signals::{wav, AudioSignal};
use crate::{Error, Result};

pub const DEFAULT_FRAME: usize = 1024;
pub const MIN_FRAME: usize = 256;
pub const DEFAULT_THRESHOLD: f64 = 0.5;
/// Maximum inter-port skew searched, seconds.
pub const MAX_LAG_S: f64 = 0.001;
/// Loudness margin over the noise floor, dB.
pub const FLOOR_MARGIN_DB: f64 = 6.0;

/// Energy floor 6 dB above a noise floor with the given RMS.
pub fn default_energy_floor(noise_rms: f64) -> f64 {
    noise_rms * noise_rms * 10f64.powf(FLOOR_MARGIN_DB / 10.0)
}

/// Two or more equal-length channels at one sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    channels: Vec<AudioSignal>,
}

impl ChannelSet {
    pub fn new(channels: Vec<AudioSignal>) -> Result<Self> {
        if channels.len() < 2 {
            return Err(Error::Size(format!(
                "need at least 2 channels, got {}",
                channels.len()
            )));
        }
        let (len, rate) = (channels[0].len(), channels[0].sample_rate());
        for (i, c) in channels.iter().enumerate().skip(1) {
            if c.sample_rate() != rate {
                return Err(Error::Rate(format!(
                    "channel {i} is at {} Hz, channel 0 at {rate} Hz",
                    c.sample_rate()
                )));
            }
            if c.len() != len {
                return Err(Error::Size(format!(
                    "channel {i} has {} samples, channel 0 has {len}",
                    c.len()
                )));
            }
        }
        Ok(Self { channels })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(wav::load_multichannel(path)?)
    }

    pub fn channels(&self) -> &[AudioSignal] {
        &self.channels
    }

    pub fn count(&self) -> usize {
        self.channels.len()
    }

    pub fn sample_rate(&self) -> u32 {
        self.channels[0].sample_rate()
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn max_lag(sample_rate: u32) -> usize {
    (MAX_LAG_S * sample_rate as f64).round() as usize
}

fn ncc(dot: f64, xx: f64, yy: f64) -> f64 {
    match (xx == 0.0, yy == 0.0) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => (dot / (xx.sqrt() * yy.sqrt())).clamp(-1.0, 1.0),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Best normalized correlation of `x` against `y` over lags in
/// `[-lag, lag]`. Both slices hold `frame + lag` samples starting at the
/// frame start. `norms[k]` is the squared norm of the window at offset `k`.
fn frame_similarity(
    x: &[f64],
    y: &[f64],
    x_norms: &[f64],
    y_norms: &[f64],
    frame: usize,
    lag: usize,
) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for k in 0..=lag {
        // y delayed by k
        let a = ncc(dot(&x[..frame], &y[k..k + frame]), x_norms[0], y_norms[k]);
        best = best.max(a);
        if k > 0 {
            // x delayed by k
            let b = ncc(dot(&x[k..k + frame], &y[..frame]), x_norms[k], y_norms[0]);
            best = best.max(b);
        }
    }
    best
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Clean,
    InjectionSuspected,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Clean => "clean",
            Status::InjectionSuspected => "injection_suspected",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub status: Status,
    /// Sorted channel indices.
    pub implicated: Vec<usize>,
    pub scores: Vec<Vec<f64>>,
    /// Per-channel mean square after DC removal.
    pub energies: Vec<f64>,
    pub notes: Vec<String>,
}

impl Verdict {
    /// Median of channel `i`'s similarities to the other channels.
    pub fn median_similarity(&self, i: usize) -> f64 {
        let mut others: Vec<f64> = (0..self.scores.len())
            .filter(|&j| j != i)
            .map(|j| self.scores[i][j])
            .collect();
        median(&mut others)
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "status: {}", self.status)?;
        let list: Vec<String> = self.implicated.iter().map(usize::to_string).collect();
        writeln!(out, "implicated: [{}]", list.join(", "))?;
        writeln!(out, "similarity:")?;
        for row in &self.scores {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:6.3}")).collect();
            writeln!(out, "  {}", cells.join(" "))?;
        }
        for (i, e) in self.energies.iter().enumerate() {
            writeln!(out, "channel {i}: energy {e:.3e}")?;
        }
        for note in &self.notes {
            writeln!(out, "note: {note}")?;
        }
        Ok(())
    }

    /// `channel,energy,median_similarity,implicated`, one row per channel.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "channel,energy,median_similarity,implicated")?;
        for (i, e) in self.energies.iter().enumerate() {
            writeln!(
                out,
                "{i},{e},{},{}",
                self.median_similarity(i),
                self.implicated.contains(&i)
            )?;
        }
        Ok(())
    }
}

fn check_frame(frame: usize) -> Result<()> {
    if frame < MIN_FRAME {
        return Err(Error::range(
            "frame",
            format!("{frame} samples; at least {MIN_FRAME} required"),
        ));
    }
    Ok(())
}

fn check_threshold(threshold: f64, energy_floor: f64) -> Result<()> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::range("threshold", format!("{threshold} not in (0, 1)")));
    }
    if !(energy_floor >= 0.0 && energy_floor.is_finite()) {
        return Err(Error::range("energy_floor", format!("{energy_floor}")));
    }
    Ok(())
}

/// Frame-by-frame analyzer. Feed samples in chunks of any size; the result
/// does not depend on how the input was split.
#[derive(Debug, Clone)]
pub struct StreamingDetector {
    frame: usize,
    lag: usize,
    /// Pending samples per channel, starting at the next frame start.
    buffers: Vec<Vec<f64>>,
    /// Per-frame best similarity for each pair `i < j`, pair-major.
    pair_frames: Vec<Vec<f64>>,
    sums: Vec<f64>,
    squares: Vec<f64>,
    seen: usize,
}

impl StreamingDetector {
    pub fn new(channels: usize, sample_rate: u32, frame: usize) -> Result<Self> {
        if channels < 2 {
            return Err(Error::Size(format!("need at least 2 channels, got {channels}")));
        }
        if sample_rate == 0 {
            return Err(Error::range("sample_rate", "must be positive"));
        }
        check_frame(frame)?;
        Ok(Self {
            frame,
            lag: max_lag(sample_rate),
            buffers: vec![Vec::new(); channels],
            pair_frames: vec![Vec::new(); channels * (channels - 1) / 2],
            sums: vec![0.0; channels],
            squares: vec![0.0; channels],
            seen: 0,
        })
    }

    pub fn frames_analyzed(&self) -> usize {
        self.pair_frames[0].len()
    }

    /// Appends one chunk per channel; all chunks must have equal length.
    pub fn push(&mut self, chunk: &[&[f64]]) -> Result<()> {
        if chunk.len() != self.buffers.len() {
            return Err(Error::Size(format!(
                "expected {} channels, got {}",
                self.buffers.len(),
                chunk.len()
            )));
        }
        let n = chunk[0].len();
        if chunk.iter().any(|c| c.len() != n) {
            return Err(Error::Size("channel chunks differ in length".into()));
        }
        for (c, samples) in chunk.iter().enumerate() {
            for &s in *samples {
                self.sums[c] += s;
                self.squares[c] += s * s;
            }
            self.buffers[c].extend_from_slice(samples);
        }
        self.seen += n;
        self.drain_frames();
        Ok(())
    }

    fn drain_frames(&mut self) {
        let (frame, lag) = (self.frame, self.lag);
        let width = frame + lag;
        let mut start = 0;
        while start + width <= self.buffers[0].len() {
            let norms: Vec<Vec<f64>> = self
                .buffers
                .iter()
                .map(|b| {
                    (0..=lag)
                        .map(|k| {
                            let w = &b[start + k..start + k + frame];
                            dot(w, w)
                        })
                        .collect()
                })
                .collect();
            let n = self.buffers.len();
            let mut pair = 0;
            for i in 0..n {
                for j in i + 1..n {
                    let s = frame_similarity(
                        &self.buffers[i][start..start + width],
                        &self.buffers[j][start..start + width],
                        &norms[i],
                        &norms[j],
                        frame,
                        lag,
                    );
                    self.pair_frames[pair].push(s);
                    pair += 1;
                }
            }
            start += frame;
        }
        for b in &mut self.buffers {
            b.drain(..start);
        }
    }

    /// Pairwise similarity matrix over all frames seen so far.
    pub fn similarity(&self) -> Result<Vec<Vec<f64>>> {
        if self.frames_analyzed() == 0 {
            return Err(Error::Size(format!(
                "{} samples per channel; need at least {} (one frame plus the lag window)",
                self.seen,
                self.frame + self.lag
            )));
        }
        let n = self.buffers.len();
        let mut m = vec![vec![1.0; n]; n];
        let mut pair = 0;
        for i in 0..n {
            for j in i + 1..n {
                let v = median(&mut self.pair_frames[pair].clone());
                m[i][j] = v;
                m[j][i] = v;
                pair += 1;
            }
        }
        Ok(m)
    }

    pub fn energies(&self) -> Vec<f64> {
        let n = self.seen.max(1) as f64;
        self.sums
            .iter()
            .zip(&self.squares)
            .map(|(s, q)| {
                let mean = s / n;
                (q / n - mean * mean).max(0.0)
            })
            .collect()
    }

    pub fn verdict(&self, threshold: f64, energy_floor: f64) -> Result<Verdict> {
        check_threshold(threshold, energy_floor)?;
        Ok(judge(self.similarity()?, self.energies(), threshold, energy_floor))
    }
}

fn judge(scores: Vec<Vec<f64>>, energies: Vec<f64>, threshold: f64, energy_floor: f64) -> Verdict {
    let n = scores.len();
    let loud: Vec<bool> = energies.iter().map(|&e| e > energy_floor).collect();
    let isolated = |i: usize| (0..n).filter(|&j| j != i).all(|j| scores[i][j] < threshold);
    let implicated: Vec<usize> = (0..n).filter(|&i| loud[i] && isolated(i)).collect();
    let status = if implicated.is_empty() {
        Status::Clean
    } else {
        Status::InjectionSuspected
    };

    let mut notes = Vec::new();
    let agreeing: Vec<usize> = (0..n).filter(|&i| loud[i] && !isolated(i)).collect();
    if status == Status::Clean && agreeing.len() >= 2 {
        notes.push(format!(
            "{} loud channels agree; a wide beam covering every port would look the same",
            agreeing.len()
        ));
    }
    if !loud.iter().any(|&l| l) {
        notes.push("no channel rises above the energy floor".into());
    }
    Verdict {
        status,
        implicated,
        scores,
        energies,
        notes,
    }
}

/// N x N matrix of median lag-tolerant normalized cross-correlation.
pub fn channel_similarity(set: &ChannelSet, frame: usize) -> Result<Vec<Vec<f64>>> {
    run(set, frame)?.similarity()
}

fn run(set: &ChannelSet, frame: usize) -> Result<StreamingDetector> {
    let mut det = StreamingDetector::new(set.count(), set.sample_rate(), frame)?;
    let slices: Vec<&[f64]> = set.channels().iter().map(AudioSignal::samples).collect();
    det.push(&slices)?;
    Ok(det)
}

pub fn detect_injection(set: &ChannelSet, threshold: f64, energy_floor: f64) -> Result<Verdict> {
    detect_injection_framed(set, DEFAULT_FRAME, threshold, energy_floor)
}

pub fn detect_injection_framed(
    set: &ChannelSet,
    frame: usize,
    threshold: f64,
    energy_floor: f64,
) -> Result<Verdict> {
    check_threshold(threshold, energy_floor)?;
    run(set, frame)?.verdict(threshold, energy_floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::TAU;

    const RATE: u32 = 16_000;
    const LEN: usize = 8_000;
    const NOISE: f64 = 0.01;

    /// Harmonic stack under a syllable-rate envelope, RMS about 0.1.
    fn speech(rng: &mut ChaCha8Rng) -> Vec<f64> {
        let f0 = rng.random_range(100.0..220.0);
        let syllable = rng.random_range(3.0..6.0);
        let phases: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..TAU)).collect();
        (0..LEN)
            .map(|i| {
                let t = i as f64 / RATE as f64;
                let env = 0.6 + 0.4 * (TAU * syllable * t).sin();
                let v: f64 = phases
                    .iter()
                    .enumerate()
                    .map(|(h, p)| (TAU * f0 * (h + 1) as f64 * t + p).sin() / (h + 1) as f64)
                    .sum();
                0.08 * env * v
            })
            .collect()
    }

    fn noise(rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n = Normal::new(0.0, NOISE).unwrap();
        (0..LEN).map(|_| n.sample(rng)).collect()
    }

    fn set(chans: Vec<Vec<f64>>) -> ChannelSet {
        ChannelSet::new(
            chans
                .into_iter()
                .map(|c| AudioSignal::new(c, RATE).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + y).collect()
    }

    fn floor() -> f64 {
        default_energy_floor(NOISE)
    }

    #[test]
    fn identical_channels_are_fully_similar() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = speech(&mut rng);
        let m = channel_similarity(&set(vec![s.clone(); 4]), DEFAULT_FRAME).unwrap();
        for row in &m {
            for &v in row {
                assert!((v - 1.0).abs() < 1e-12);
            }
        }
        let v = detect_injection(&set(vec![s; 4]), DEFAULT_THRESHOLD, floor()).unwrap();
        assert_eq!(v.status, Status::Clean);
        assert!(v.notes.iter().any(|n| n.contains("wide beam")));
    }

    #[test]
    fn tone_against_noise_stays_low() {
        // Highest tone-vs-noise entry across 100 seeds at 20 dB SNR.
        let mut worst: f64 = 0.0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let tone: Vec<f64> = (0..LEN)
                .map(|i| 0.1 * (TAU * 1000.0 * i as f64 / RATE as f64).sin())
                .collect();
            let c0 = add(&tone, &noise(&mut rng));
            let chans = vec![c0, noise(&mut rng), noise(&mut rng)];
            let m = channel_similarity(&set(chans), DEFAULT_FRAME).unwrap();
            worst = worst.max(m[0][1].abs()).max(m[0][2].abs());
        }
        assert!(worst <= 0.2, "worst {worst}");
    }

    #[test]
    fn single_port_injection_flagged() {
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let target = (seed % 4) as usize;
            let cmd = speech(&mut rng);
            let chans: Vec<Vec<f64>> = (0..4)
                .map(|c| {
                    let n = noise(&mut rng);
                    if c == target {
                        add(&cmd, &n)
                    } else {
                        n
                    }
                })
                .collect();
            let v = detect_injection(&set(chans), DEFAULT_THRESHOLD, floor()).unwrap();
            assert_eq!(v.status, Status::InjectionSuspected, "seed {seed}");
            assert_eq!(v.implicated, vec![target], "seed {seed}");
        }
    }

    #[test]
    fn acoustic_mixes_not_flagged() {
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let src = speech(&mut rng);
            let chans: Vec<Vec<f64>> = (0..4)
                .map(|_| {
                    let gain = rng.random_range(0.5..=1.0);
                    let delay = rng.random_range(0..=8usize);
                    let n = noise(&mut rng);
                    (0..LEN)
                        .map(|i| gain * if i >= delay { src[i - delay] } else { 0.0 } + n[i])
                        .collect()
                })
                .collect();
            let v = detect_injection(&set(chans), DEFAULT_THRESHOLD, floor()).unwrap();
            assert_eq!(v.status, Status::Clean, "seed {seed}");
        }
    }

    #[test]
    fn streaming_matches_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cmd = speech(&mut rng);
        let chans = vec![add(&cmd, &noise(&mut rng)), noise(&mut rng), noise(&mut rng)];
        let s = set(chans.clone());
        let batch = detect_injection(&s, DEFAULT_THRESHOLD, floor()).unwrap();
        let mut det = StreamingDetector::new(3, RATE, DEFAULT_FRAME).unwrap();
        let mut pos = 0;
        while pos < LEN {
            let step = rng.random_range(1..700).min(LEN - pos);
            let chunk: Vec<&[f64]> = chans.iter().map(|c| &c[pos..pos + step]).collect();
            det.push(&chunk).unwrap();
            pos += step;
        }
        assert_eq!(det.verdict(DEFAULT_THRESHOLD, floor()).unwrap(), batch);
    }

    #[test]
    fn precondition_errors() {
        let short = set(vec![vec![0.1; 270]; 2]);
        assert!(matches!(channel_similarity(&short, 256), Err(Error::Size(_))));
        let ok = set(vec![vec![0.1; 4000]; 2]);
        assert!(channel_similarity(&ok, 128).is_err());
        assert!(detect_injection(&ok, 0.0, 0.0).is_err());
        assert!(detect_injection(&ok, 1.0, 0.0).is_err());
        let one = vec![AudioSignal::new(vec![0.0; 10], RATE).unwrap()];
        assert!(ChannelSet::new(one).is_err());
        let mixed = vec![
            AudioSignal::new(vec![0.0; 10], RATE).unwrap(),
            AudioSignal::new(vec![0.0; 11], RATE).unwrap(),
        ];
        assert!(ChannelSet::new(mixed).is_err());
    }

    #[test]
    fn csv_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cmd = speech(&mut rng);
        let v = detect_injection(
            &set(vec![noise(&mut rng), add(&cmd, &noise(&mut rng)), noise(&mut rng)]),
            DEFAULT_THRESHOLD,
            floor(),
        )
        .unwrap();
        let mut out = Vec::new();
        v.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "channel,energy,median_similarity,implicated");
        assert_eq!(lines.len(), 4);
        assert!(lines[2].ends_with(",true"));
        assert!(lines[1].ends_with(",false"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn permutation_equivariance(seed in any::<u64>(), target in 0usize..4, rot in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cmd = speech(&mut rng);
            let chans: Vec<Vec<f64>> = (0..4)
                .map(|c| {
                    let n = noise(&mut rng);
                    if c == target { add(&cmd, &n) } else { n }
                })
                .collect();
            let perm: Vec<usize> = (0..4).map(|i| (i + rot) % 4).collect();
            let permuted: Vec<Vec<f64>> = perm.iter().map(|&p| chans[p].clone()).collect();
            let a = detect_injection(&set(chans), DEFAULT_THRESHOLD, floor()).unwrap();
            let b = detect_injection(&set(permuted), DEFAULT_THRESHOLD, floor()).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    prop_assert_eq!(b.scores[i][j], a.scores[perm[i]][perm[j]]);
                }
            }
            let mut mapped: Vec<usize> = b.implicated.iter().map(|&i| perm[i]).collect();
            mapped.sort_unstable();
            prop_assert_eq!(mapped, a.implicated);
        }

        #[test]
        fn amplitude_invariance(seed in any::<u64>(), c in 0.01f64..100.0, ch in 0usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let src = speech(&mut rng);
            let chans: Vec<Vec<f64>> = (0..3).map(|_| add(&src, &noise(&mut rng))).collect();
            let mut scaled = chans.clone();
            scaled[ch].iter_mut().for_each(|v| *v *= c);
            let a = channel_similarity(&set(chans), DEFAULT_FRAME).unwrap();
            let b = channel_similarity(&set(scaled), DEFAULT_FRAME).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert!((a[i][j] - b[i][j]).abs() <= 1e-6);
                }
            }
        }
    }
}

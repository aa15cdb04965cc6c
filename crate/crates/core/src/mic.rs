//! Light-to-audio transduction at a microphone port.
//!
//! The microphone responds linearly to the AC part of the light reaching its
//! port, clips at a saturation power, passes only its audio band and adds
//! ambient noise.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::diode::LightWaveform;
use crate::signals::AudioSignal;
use crate::{Error, Result};

/// Butterworth order of each band edge.
const FILTER_ORDER: usize = 10;
/// Cutoff placement relative to the band edge; keeps the edge within 0.2 dB.
const EDGE_MARGIN: f64 = 0.85;

#[derive(Debug, Clone, PartialEq)]
pub struct MicProfile {
    pub name: String,
    /// Normalized output amplitude per mW of AC optical power at the port.
    pub responsivity: f64,
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    /// AC optical power (mW) at which the output clips.
    pub saturation_mw: f64,
    /// RMS of the ambient acoustic noise floor, normalized amplitude.
    pub noise_rms: f64,
}

impl MicProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.responsivity > 0.0 && self.responsivity.is_finite()) {
            return Err(Error::range("responsivity", format!("{}", self.responsivity)));
        }
        if !(self.band_low_hz > 0.0 && self.band_low_hz < self.band_high_hz) {
            return Err(Error::range(
                "band",
                format!("need 0 < {} < {}", self.band_low_hz, self.band_high_hz),
            ));
        }
        if !(self.saturation_mw > 0.0 && self.saturation_mw.is_finite()) {
            return Err(Error::range("saturation_mw", format!("{}", self.saturation_mw)));
        }
        if !(self.noise_rms >= 0.0 && self.noise_rms.is_finite()) {
            return Err(Error::range("noise_rms", format!("{}", self.noise_rms)));
        }
        Ok(())
    }

    /// Bottom-port MEMS microphone. Saturation at 0.1 mW of port-level AC
    /// power; full-scale output 0.5 and a noise floor 20 dB under a
    /// saturated sine, standing in for 46 dB(A) ambient against spoken
    /// commands around 66 dB(A).
    pub fn mems_default() -> Self {
        Self {
            name: "mems-default".into(),
            responsivity: 5.0,
            band_low_hz: 20.0,
            band_high_hz: 20_000.0,
            saturation_mw: 0.1,
            noise_rms: 0.0354,
        }
    }

    /// Electret condenser capsule; less sensitive, higher clipping point.
    pub fn electret() -> Self {
        Self {
            name: "electret".into(),
            responsivity: 2.0,
            band_low_hz: 20.0,
            band_high_hz: 20_000.0,
            saturation_mw: 0.25,
            noise_rms: 0.0354,
        }
    }

    /// Output clip level in normalized amplitude.
    pub fn clip_level(&self) -> f64 {
        self.responsivity * self.saturation_mw
    }
}

/// Direct-form-I biquad section.
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    /// Bilinear-transform section prewarped at `fc`, RBJ cookbook form.
    fn new(kind: Edge, fc: f64, q: f64, rate: f64) -> Self {
        let w0 = 2.0 * PI * fc / rate;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        let b = match kind {
            Edge::HighPass => [(1.0 + cos) / 2.0, -(1.0 + cos), (1.0 + cos) / 2.0],
            Edge::LowPass => [(1.0 - cos) / 2.0, 1.0 - cos, (1.0 - cos) / 2.0],
        };
        Self {
            b: [b[0] / a0, b[1] / a0, b[2] / a0],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        }
    }

    fn run(&self, x: &mut [f64]) {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        for s in x.iter_mut() {
            let y = self.b[0] * *s + self.b[1] * x1 + self.b[2] * x2 - self.a[0] * y1 - self.a[1] * y2;
            x2 = x1;
            x1 = *s;
            y2 = y1;
            y1 = y;
            *s = y;
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Edge {
    HighPass,
    LowPass,
}

fn butterworth(kind: Edge, fc: f64, rate: f64) -> Vec<Biquad> {
    (0..FILTER_ORDER / 2)
        .map(|k| {
            let theta = PI * (2 * k + 1) as f64 / (2 * FILTER_ORDER) as f64;
            Biquad::new(kind, fc, 1.0 / (2.0 * theta.cos()), rate)
        })
        .collect()
}

/// Band-pass over `[low, high]`: order-10 Butterworth edges placed just
/// outside the band. The low-pass edge is omitted when it would sit within
/// 10% of Nyquist, where nothing an octave above the band is representable.
fn band_pass(samples: &mut [f64], low: f64, high: f64, rate: f64) {
    let mut sections = butterworth(Edge::HighPass, low * EDGE_MARGIN, rate);
    let lp_cut = high / EDGE_MARGIN;
    if lp_cut < 0.45 * rate {
        sections.extend(butterworth(Edge::LowPass, lp_cut, rate));
    }
    for s in &sections {
        s.run(samples);
    }
}

/// Converts the light arriving at the port into the microphone's audio output.
pub fn transduce(
    profile: &MicProfile,
    light_at_port: &LightWaveform,
    rng_seed: u64,
) -> Result<AudioSignal> {
    profile.validate()?;
    let rate = light_at_port.sample_rate() as f64;
    if rate < 2.0 * profile.band_high_hz {
        return Err(Error::Rate(format!(
            "{rate} Hz cannot carry a band up to {} Hz",
            profile.band_high_hz
        )));
    }
    let mean = light_at_port.mean();
    let clip = profile.clip_level();
    let mut out: Vec<f64> = light_at_port
        .powers()
        .iter()
        .map(|p| ((p - mean) * profile.responsivity).clamp(-clip, clip))
        .collect();
    band_pass(&mut out, profile.band_low_hz, profile.band_high_hz, rate);
    if profile.noise_rms > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let normal = Normal::new(0.0, profile.noise_rms)
            .map_err(|e| Error::range("noise_rms", e.to_string()))?;
        for s in out.iter_mut() {
            *s += normal.sample(&mut rng);
        }
    }
    AudioSignal::new(out, light_at_port.sample_rate())
}

/// Closed-form output amplitude for `ac_power_mw` of AC light at the port.
pub fn output_vpp(profile: &MicProfile, ac_power_mw: f64) -> Result<f64> {
    if !(ac_power_mw >= 0.0) {
        return Err(Error::range("ac power", format!("{ac_power_mw} mW")));
    }
    Ok(profile.responsivity * ac_power_mw.min(profile.saturation_mw))
}

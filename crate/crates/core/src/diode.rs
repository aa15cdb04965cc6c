//! Laser diode electro-optical model.
//!
//! The I-L curve is ideal piecewise-linear: no light below the lasing
//! threshold, `slope * (I - I_th)` above it, up to the damage limit `I_max`.
//! Audio is carried as amplitude modulation of the drive current around a DC
//! bias, `I(t) = I_DC + (I_pp / 2) s(t)` with `|s| <= 1`.

use std::io::Write;
use std::path::Path;

use crate::signals::{wav, AudioSignal};
use crate::{Error, Result};

/// Electro-optical transfer parameters of one laser diode.
#[derive(Debug, Clone, PartialEq)]
pub struct DiodeProfile {
    pub name: String,
    /// Lasing threshold `I_th` in mA.
    pub threshold_ma: f64,
    /// Slope efficiency in mW per mA above threshold.
    pub slope_mw_per_ma: f64,
    /// Damage limit in mA.
    pub max_ma: f64,
    pub wavelength_nm: f64,
}

impl DiodeProfile {
    pub fn new(
        name: impl Into<String>,
        threshold_ma: f64,
        slope_mw_per_ma: f64,
        max_ma: f64,
        wavelength_nm: f64,
    ) -> Result<Self> {
        let profile = Self {
            name: name.into(),
            threshold_ma,
            slope_mw_per_ma,
            max_ma,
            wavelength_nm,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.threshold_ma,
            self.slope_mw_per_ma,
            self.max_ma,
            self.wavelength_nm,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::range("diode profile", format!("{}: non-finite field", self.name)));
        }
        if self.threshold_ma < 0.0 {
            return Err(Error::range("threshold_ma", format!("{} < 0", self.threshold_ma)));
        }
        if self.slope_mw_per_ma <= 0.0 {
            return Err(Error::range("slope_mw_per_ma", format!("{} <= 0", self.slope_mw_per_ma)));
        }
        if self.max_ma <= self.threshold_ma {
            return Err(Error::range(
                "max_ma",
                format!("{} must exceed threshold {}", self.max_ma, self.threshold_ma),
            ));
        }
        if self.wavelength_nm <= 0.0 {
            return Err(Error::range("wavelength_nm", format!("{} <= 0", self.wavelength_nm)));
        }
        Ok(())
    }

    /// 450 nm blue diode. Threshold and slope are fitted so that 26.2 mA
    /// yields 5 mW; 300 mA is the highest current characterised.
    pub fn blue_450() -> Self {
        Self {
            name: "blue-450".into(),
            threshold_ma: 22.0,
            slope_mw_per_ma: 5.0 / 4.2,
            max_ma: 300.0,
            wavelength_nm: 450.0,
        }
    }

    /// 638 nm red diode, characterised up to 200 mA.
    pub fn red_638() -> Self {
        Self {
            name: "red-638".into(),
            threshold_ma: 50.0,
            slope_mw_per_ma: 1.0,
            max_ma: 200.0,
            wavelength_nm: 638.0,
        }
    }

    /// Largest average power reachable while keeping full modulation depth.
    pub fn max_average_power(&self) -> f64 {
        self.slope_mw_per_ma * (self.max_ma - self.threshold_ma) / 2.0
    }

    /// Average emitted power of the operating point chosen for `budget`.
    pub fn planned_average_power(&self, budget_mw: f64) -> f64 {
        budget_mw.min(self.max_average_power())
    }

    /// Mean optical power for zero-mean modulation at `op`.
    pub fn average_power(&self, op: &OperatingPoint) -> f64 {
        self.slope_mw_per_ma * (op.bias_ma - self.threshold_ma).max(0.0)
    }
}

/// Rounding allowance when checking a swing against the diode limits.
const CURRENT_SLACK_MA: f64 = 1e-9;

/// DC bias and peak-to-peak modulation amplitude, both in mA.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub bias_ma: f64,
    pub peak_to_peak_ma: f64,
}

impl OperatingPoint {
    pub fn new(bias_ma: f64, peak_to_peak_ma: f64) -> Self {
        Self {
            bias_ma,
            peak_to_peak_ma,
        }
    }

    pub fn min_current(&self) -> f64 {
        self.bias_ma - self.peak_to_peak_ma / 2.0
    }

    pub fn max_current(&self) -> f64 {
        self.bias_ma + self.peak_to_peak_ma / 2.0
    }

    /// Checks the swing stays within `[I_th, I_max]`.
    pub fn validate_for(&self, profile: &DiodeProfile) -> Result<()> {
        if !(self.bias_ma.is_finite() && self.peak_to_peak_ma.is_finite()) {
            return Err(Error::Validation("non-finite operating point".into()));
        }
        if self.peak_to_peak_ma < 0.0 {
            return Err(Error::Validation(format!(
                "I_pp = {} mA is negative",
                self.peak_to_peak_ma
            )));
        }
        if self.min_current() < profile.threshold_ma - CURRENT_SLACK_MA {
            return Err(Error::Validation(format!(
                "I_DC - I_pp/2 = {} mA is below threshold {} mA of {}",
                self.min_current(),
                profile.threshold_ma,
                profile.name
            )));
        }
        if self.max_current() > profile.max_ma + CURRENT_SLACK_MA {
            return Err(Error::Validation(format!(
                "I_DC + I_pp/2 = {} mA exceeds I_max {} mA of {}",
                self.max_current(),
                profile.max_ma,
                profile.name
            )));
        }
        Ok(())
    }
}

/// Diode drive current over time, in mA.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveWaveform {
    currents: Vec<f64>,
    sample_rate: u32,
}

impl DriveWaveform {
    pub fn new(currents: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::range("sample_rate", "must be positive"));
        }
        if let Some(i) = currents.iter().position(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::range(
                "current",
                format!("sample {i} = {} mA", currents[i]),
            ));
        }
        Ok(Self {
            currents,
            sample_rate,
        })
    }

    pub fn currents(&self) -> &[f64] {
        &self.currents
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Writes `time_s,current_ma` with 9 and 6 decimal places.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "time_s,current_ma")?;
        let rate = self.sample_rate as f64;
        for (i, c) in self.currents.iter().enumerate() {
            writeln!(out, "{:.9},{:.6}", i as f64 / rate, c)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    /// Stores the waveform as PCM where sample `v` encodes
    /// `I_DC + (I_pp/2) (v / 32768)`, plus a `param,value` sidecar with the
    /// operating point.
    pub fn save_wav(
        &self,
        op: &OperatingPoint,
        wav_path: impl AsRef<Path>,
        sidecar_path: impl AsRef<Path>,
    ) -> Result<()> {
        let half = op.peak_to_peak_ma / 2.0;
        let samples = self
            .currents
            .iter()
            .map(|c| if half > 0.0 { (c - op.bias_ma) / half } else { 0.0 })
            .collect();
        wav::save_wav(&AudioSignal::new(samples, self.sample_rate)?, wav_path)?;
        let sidecar = sidecar_path.as_ref();
        let text = format!(
            "param,value\ni_dc_ma,{}\ni_pp_ma,{}\nsample_rate_hz,{}\n",
            op.bias_ma, op.peak_to_peak_ma, self.sample_rate
        );
        std::fs::write(sidecar, text).map_err(|e| Error::io(sidecar, e))
    }

    /// Inverse of [`DriveWaveform::save_wav`].
    pub fn load_wav(
        wav_path: impl AsRef<Path>,
        sidecar_path: impl AsRef<Path>,
    ) -> Result<(Self, OperatingPoint)> {
        let sidecar = sidecar_path.as_ref();
        let text = std::fs::read_to_string(sidecar).map_err(|e| Error::io(sidecar, e))?;
        let mut bias = None;
        let mut pp = None;
        for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            let (key, value) = line
                .split_once(',')
                .ok_or_else(|| Error::format("sidecar", format!("bad row {line:?}")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::format("sidecar", format!("bad value in {line:?}")))?;
            match key.trim() {
                "i_dc_ma" => bias = Some(value),
                "i_pp_ma" => pp = Some(value),
                _ => {}
            }
        }
        let op = OperatingPoint::new(
            bias.ok_or_else(|| Error::format("sidecar", "missing i_dc_ma"))?,
            pp.ok_or_else(|| Error::format("sidecar", "missing i_pp_ma"))?,
        );
        let audio = wav::load_wav(wav_path)?;
        let half = op.peak_to_peak_ma / 2.0;
        let currents = audio.samples().iter().map(|v| op.bias_ma + half * v).collect();
        Ok((Self::new(currents, audio.sample_rate())?, op))
    }
}

/// Emitted optical power over time, in mW.
#[derive(Debug, Clone, PartialEq)]
pub struct LightWaveform {
    powers: Vec<f64>,
    sample_rate: u32,
}

impl LightWaveform {
    pub fn new(powers: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::range("sample_rate", "must be positive"));
        }
        if let Some(i) = powers.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::range("power", format!("sample {i} = {} mW", powers[i])));
        }
        Ok(Self {
            powers,
            sample_rate,
        })
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn mean(&self) -> f64 {
        if self.powers.is_empty() {
            return 0.0;
        }
        self.powers.iter().sum::<f64>() / self.powers.len() as f64
    }

    /// Applies a link gain (capture fraction times transmissions).
    pub fn attenuated(&self, gain: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gain) {
            return Err(Error::range("link gain", format!("{gain} not in [0, 1]")));
        }
        Ok(Self {
            powers: self.powers.iter().map(|p| p * gain).collect(),
            sample_rate: self.sample_rate,
        })
    }
}

/// Optical power in mW at drive `current_ma`.
pub fn optical_power(profile: &DiodeProfile, current_ma: f64) -> Result<f64> {
    if !(current_ma >= 0.0 && current_ma <= profile.max_ma) {
        return Err(Error::range(
            "current",
            format!("{current_ma} mA outside [0, {}] for {}", profile.max_ma, profile.name),
        ));
    }
    if current_ma <= profile.threshold_ma {
        Ok(0.0)
    } else {
        Ok(profile.slope_mw_per_ma * (current_ma - profile.threshold_ma))
    }
}

/// Encodes normalized audio onto the drive current around `op`.
pub fn modulate(
    profile: &DiodeProfile,
    op: &OperatingPoint,
    audio: &AudioSignal,
) -> Result<DriveWaveform> {
    op.validate_for(profile)?;
    if !audio.is_normalized() {
        return Err(Error::range(
            "audio",
            format!("peak {} exceeds 1.0; normalize before modulating", audio.peak()),
        ));
    }
    let half = op.peak_to_peak_ma / 2.0;
    let currents = audio
        .samples()
        .iter()
        .map(|s| (op.bias_ma + half * s).min(profile.max_ma))
        .collect();
    DriveWaveform::new(currents, audio.sample_rate())
}

/// Strongest modulation whose average power stays within `budget_mw`.
///
/// The bias is set so the diode emits the budget on average, then the swing
/// is widened until its trough touches threshold (`I_pp/2 = I_DC - I_th`).
/// When that peak would exceed `I_max` the pair is pulled down so the peak
/// lands exactly on `I_max` with the same trough condition.
pub fn optimize_operating_point(profile: &DiodeProfile, budget_mw: f64) -> Result<OperatingPoint> {
    if !(budget_mw > 0.0 && budget_mw.is_finite()) {
        return Err(Error::range("budget", format!("{budget_mw} mW must be positive")));
    }
    let half_swing = budget_mw / profile.slope_mw_per_ma;
    if profile.threshold_ma + half_swing > profile.max_ma {
        return Err(Error::Budget(format!(
            "{budget_mw} mW needs a bias of {} mA, above I_max {} mA of {}",
            profile.threshold_ma + half_swing,
            profile.max_ma,
            profile.name
        )));
    }
    if profile.threshold_ma + 2.0 * half_swing > profile.max_ma {
        return Ok(OperatingPoint::new(
            (profile.max_ma + profile.threshold_ma) / 2.0,
            profile.max_ma - profile.threshold_ma,
        ));
    }
    Ok(OperatingPoint::new(
        profile.threshold_ma + half_swing,
        2.0 * half_swing,
    ))
}

/// Pointwise I-L conversion of a drive waveform.
pub fn emitted_light(profile: &DiodeProfile, drive: &DriveWaveform) -> Result<LightWaveform> {
    let powers = drive
        .currents()
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            optical_power(profile, c).map_err(|e| match e {
                Error::Range { what, detail } => Error::Range {
                    what,
                    detail: format!("drive sample {i}: {detail}"),
                },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    LightWaveform::new(powers, drive.sample_rate())
}

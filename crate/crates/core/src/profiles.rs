//! Built-in and user-supplied profile data.
//!
//! Each dataset is a small CSV file. The built-in copies are compiled into the
//! binary; setting `PHOTONINJECT_PROFILE_DIR` points the loader at a directory
//! whose `diodes.csv`, `mics.csv`, `devices.csv` and `calibration.csv` replace
//! the corresponding built-ins (missing files fall back).

use std::path::Path;

use crate::diode::DiodeProfile;
use crate::injection::{DeviceDb, RecognitionEdge};
use crate::mic::MicProfile;
use crate::{Error, Result};

pub const PROFILE_DIR_ENV: &str = "PHOTONINJECT_PROFILE_DIR";

const DIODES_CSV: &str = include_str!("../data/diodes.csv");
const MICS_CSV: &str = include_str!("../data/mics.csv");
const DEVICES_CSV: &str = include_str!("../data/devices.csv");
const CALIBRATION_CSV: &str = include_str!("../data/calibration.csv");

const DIODES_HEADER: &str = "name,i_th_ma,slope_mw_per_ma,i_max_ma,wavelength_nm";
const MICS_HEADER: &str = "name,responsivity,band_low_hz,band_high_hz,saturation_mw,noise_rms";
const CALIBRATION_HEADER: &str = "param,value";

/// Non-blank, non-comment lines with their 1-based line numbers.
pub(crate) fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn rows<'a>(text: &'a str, file: &str, header: &str, width: usize) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut lines = data_lines(text);
    match lines.next() {
        Some((_, h)) if h == header => {}
        other => {
            return Err(Error::format(
                file,
                format!("expected header {header:?}, found {:?}", other.map(|o| o.1)),
            ))
        }
    }
    lines
        .map(|(no, l)| {
            let f: Vec<&str> = l.split(',').map(str::trim).collect();
            if f.len() != width {
                return Err(Error::format(
                    file,
                    format!("line {no}: expected {width} fields, found {}", f.len()),
                ));
            }
            Ok((no, f))
        })
        .collect()
}

fn num(file: &str, no: usize, s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::format(file, format!("line {no}: bad number {s:?}")))
}

pub fn parse_diodes_csv(text: &str) -> Result<Vec<DiodeProfile>> {
    rows(text, "diodes.csv", DIODES_HEADER, 5)?
        .into_iter()
        .map(|(no, f)| {
            let n = |i: usize| num("diodes.csv", no, f[i]);
            DiodeProfile::new(f[0], n(1)?, n(2)?, n(3)?, n(4)?)
        })
        .collect()
}

pub fn parse_mics_csv(text: &str) -> Result<Vec<MicProfile>> {
    rows(text, "mics.csv", MICS_HEADER, 6)?
        .into_iter()
        .map(|(no, f)| {
            let n = |i: usize| num("mics.csv", no, f[i]);
            let mic = MicProfile {
                name: f[0].to_string(),
                responsivity: n(1)?,
                band_low_hz: n(2)?,
                band_high_hz: n(3)?,
                saturation_mw: n(4)?,
                noise_rms: n(5)?,
            };
            mic.validate()?;
            Ok(mic)
        })
        .collect()
}

pub fn parse_calibration_csv(text: &str) -> Result<RecognitionEdge> {
    let mut width = None;
    for (no, f) in rows(text, "calibration.csv", CALIBRATION_HEADER, 2)? {
        if f[0] == "edge_width" {
            width = Some(num("calibration.csv", no, f[1])?);
        }
    }
    RecognitionEdge::new(
        width.ok_or_else(|| Error::format("calibration.csv", "missing edge_width"))?,
    )
}

/// The full set of profiles a run works with.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    pub diodes: Vec<DiodeProfile>,
    pub mics: Vec<MicProfile>,
    pub devices: DeviceDb,
    pub edge: RecognitionEdge,
}

impl ProfileSet {
    pub fn builtin() -> Self {
        Self {
            diodes: parse_diodes_csv(DIODES_CSV).expect("embedded diodes.csv"),
            mics: parse_mics_csv(MICS_CSV).expect("embedded mics.csv"),
            devices: DeviceDb::parse_csv(DEVICES_CSV).expect("embedded devices.csv"),
            edge: parse_calibration_csv(CALIBRATION_CSV).expect("embedded calibration.csv"),
        }
    }

    /// Overlays whichever dataset files exist in `dir` on the built-ins.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(Error::io(
                dir,
                std::io::Error::new(std::io::ErrorKind::NotFound, "profile directory not found"),
            ));
        }
        let read = |name: &str| -> Result<Option<String>> {
            let p = dir.join(name);
            if p.exists() {
                std::fs::read_to_string(&p).map(Some).map_err(|e| Error::io(&p, e))
            } else {
                Ok(None)
            }
        };
        let mut set = Self::builtin();
        if let Some(t) = read("diodes.csv")? {
            set.diodes = parse_diodes_csv(&t)?;
        }
        if let Some(t) = read("mics.csv")? {
            set.mics = parse_mics_csv(&t)?;
        }
        if let Some(t) = read("devices.csv")? {
            set.devices = DeviceDb::parse_csv(&t)?;
        }
        if let Some(t) = read("calibration.csv")? {
            set.edge = parse_calibration_csv(&t)?;
        }
        Ok(set)
    }

    /// Built-ins, or the directory named by `PHOTONINJECT_PROFILE_DIR`.
    pub fn from_env() -> Result<Self> {
        match std::env::var_os(PROFILE_DIR_ENV) {
            Some(dir) if !dir.is_empty() => Self::from_dir(dir),
            _ => Ok(Self::builtin()),
        }
    }

    pub fn diode(&self, name: &str) -> Result<&DiodeProfile> {
        self.diodes
            .iter()
            .find(|d| d.name.eq_ignore_ascii_case(name.trim()))
            .ok_or_else(|| {
                Error::Input(format!(
                    "unknown diode {name:?}; available: {}",
                    self.diodes.iter().map(|d| d.name.as_str()).collect::<Vec<_>>().join(", ")
                ))
            })
    }

    pub fn mic(&self, name: &str) -> Result<&MicProfile> {
        self.mics
            .iter()
            .find(|m| m.name.eq_ignore_ascii_case(name.trim()))
            .ok_or_else(|| {
                Error::Input(format!(
                    "unknown microphone {name:?}; available: {}",
                    self.mics.iter().map(|m| m.name.as_str()).collect::<Vec<_>>().join(", ")
                ))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_matches_code_defaults() {
        let set = ProfileSet::builtin();
        assert_eq!(set.diode("blue-450").unwrap(), &DiodeProfile::blue_450());
        assert_eq!(set.diode("RED-638").unwrap(), &DiodeProfile::red_638());
        assert_eq!(set.mic("mems-default").unwrap(), &MicProfile::mems_default());
        assert_eq!(set.mic("electret").unwrap(), &MicProfile::electret());
        assert_eq!(set.devices.len(), 18);
        assert!(set.diode("green-520").is_err());
    }

    #[test]
    fn directory_overrides_only_present_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("diodes.csv"),
            "# custom\nname,i_th_ma,slope_mw_per_ma,i_max_ma,wavelength_nm\nir-905,30,0.8,150,905\n",
        )
        .unwrap();
        let set = ProfileSet::from_dir(dir.path()).unwrap();
        assert_eq!(set.diodes.len(), 1);
        assert_eq!(set.diodes[0].wavelength_nm, 905.0);
        assert_eq!(set.devices.len(), 18);
        assert!(ProfileSet::from_dir(dir.path().join("missing")).is_err());
    }

    #[test]
    fn malformed_files_are_format_errors() {
        assert!(matches!(parse_diodes_csv("name,x\n"), Err(Error::Format { .. })));
        assert!(parse_diodes_csv(&format!("{DIODES_HEADER}\nbad,1,2\n")).is_err());
        assert!(parse_diodes_csv(&format!("{DIODES_HEADER}\nbad,10,1,5,450\n")).is_err());
        assert!(parse_mics_csv(&format!("{MICS_HEADER}\nm,1,30,20,0.1,0\n")).is_err());
        assert!(parse_calibration_csv("param,value\nother,1\n").is_err());
    }
}

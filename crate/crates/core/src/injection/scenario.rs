//! Flat `key = value` scenario files.
//!
//! ```text
//! # cross-building attack
//! device.name = Google Home
//! budget_mw = 5
//! distance_m = 75
//! path.incidence_angle_deg = 21.8
//! trials = 10
//! seed = 42
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use super::{AttackScenario, RecognitionEdge};
use crate::optics::{Aperture, Focus};
use crate::profiles::ProfileSet;
use crate::{Error, Result};

const KEYS: &[&str] = &[
    "device.name",
    "device.backend",
    "diode.name",
    "path.lens_diameter_m",
    "path.focus_distance_m",
    "path.wavelength_nm",
    "path.pointing_jitter_m",
    "path.window_transmission",
    "path.mesh_transmission",
    "path.incidence_angle_deg",
    "aperture.port_diameter_m",
    "aperture.offset_m",
    "budget_mw",
    "distance_m",
    "trials",
    "seed",
    "command_text",
    "wake_word_matched",
    "edge.width",
];

/// A parsed scenario plus run settings that live alongside it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub scenario: AttackScenario,
    pub trials: Option<usize>,
}

impl ScenarioFile {
    pub fn load(path: impl AsRef<Path>, profiles: &ProfileSet) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_scenario(&text, profiles)
    }
}

fn number(map: &BTreeMap<String, String>, key: &str) -> Result<Option<f64>> {
    map.get(key)
        .map(|v| {
            v.parse::<f64>()
                .map_err(|_| Error::Input(format!("{key} = {v:?} is not a number")))
        })
        .transpose()
}

fn required(map: &BTreeMap<String, String>, key: &str) -> Result<f64> {
    number(map, key)?.ok_or_else(|| Error::Input(format!("missing required key {key}")))
}

pub fn parse_scenario(text: &str, profiles: &ProfileSet) -> Result<ScenarioFile> {
    let mut map = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Input(format!("line {}: expected `key = value`", no + 1)))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(Error::Input(format!("line {}: unknown key {key:?}", no + 1)));
        }
        if map.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(Error::Input(format!("line {}: duplicate key {key:?}", no + 1)));
        }
    }

    let name = map
        .get("device.name")
        .ok_or_else(|| Error::Input("missing required key device.name".into()))?;
    let device = match map.get("device.backend") {
        Some(b) => profiles.devices.lookup_with_backend(name, b)?,
        None => profiles.devices.lookup(name)?,
    }
    .clone();
    let edge = match number(&map, "edge.width")? {
        Some(w) => RecognitionEdge::new(w)?,
        None => profiles.edge,
    };
    let mut s = AttackScenario::new(
        device,
        required(&map, "budget_mw")?,
        required(&map, "distance_m")?,
        edge,
    )?;
    if let Some(d) = map.get("diode.name") {
        s.diode = profiles.diode(d)?.clone();
    }
    if let Some(v) = number(&map, "path.lens_diameter_m")? {
        s.path.lens_diameter_m = v;
    }
    if let Some(v) = map.get("path.focus_distance_m") {
        s.path.focus = if v.eq_ignore_ascii_case("track") {
            Focus::Tracking
        } else {
            Focus::Fixed(
                number(&map, "path.focus_distance_m")?
                    .expect("key present"),
            )
        };
    }
    if let Some(v) = number(&map, "path.wavelength_nm")? {
        s.path.wavelength_nm = v;
    }
    if let Some(v) = number(&map, "path.pointing_jitter_m")? {
        s.path.pointing_jitter_m = v;
    }
    if let Some(v) = number(&map, "path.window_transmission")? {
        s.path.window_transmission = v;
    }
    if let Some(v) = number(&map, "path.mesh_transmission")? {
        s.path.mesh_transmission = v;
    }
    if let Some(v) = number(&map, "path.incidence_angle_deg")? {
        s.path.incidence_angle_deg = v;
    }
    let port = number(&map, "aperture.port_diameter_m")?.unwrap_or(s.device.port_diameter_m);
    let offset = number(&map, "aperture.offset_m")?.unwrap_or(0.0);
    s.aperture = Aperture::new(port, offset)?;
    if let Some(t) = map.get("command_text") {
        s.command_text = t.clone();
    }
    if let Some(v) = map.get("wake_word_matched") {
        s.wake_word_matched = match v.to_ascii_lowercase().as_str() {
            "true" | "yes" | "1" => true,
            "false" | "no" | "0" => false,
            _ => return Err(Error::Input(format!("wake_word_matched = {v:?} is not a boolean"))),
        };
    }
    if let Some(v) = map.get("seed") {
        s.rng_seed = v
            .parse()
            .map_err(|_| Error::Input(format!("seed = {v:?} is not an unsigned integer")))?;
    }
    let trials = map
        .get("trials")
        .map(|v| {
            v.parse::<usize>()
                .map_err(|_| Error::Input(format!("trials = {v:?} is not an unsigned integer")))
        })
        .transpose()?;
    s.validate()?;
    Ok(ScenarioFile { scenario: s, trials })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_cross_building_scenario() {
        let text = "\
# bell tower to fourth floor
device.name = google home
budget_mw = 5
distance_m = 75
path.incidence_angle_deg = 21.8
path.window_transmission = 1.0
trials = 10
seed = 42
command_text = open the garage door
";
        let f = parse_scenario(text, &ProfileSet::builtin()).unwrap();
        assert_eq!(f.trials, Some(10));
        assert_eq!(f.scenario.device.name, "Google Home");
        assert_eq!(f.scenario.path.incidence_angle_deg, 21.8);
        assert_eq!(f.scenario.rng_seed, 42);
        assert_eq!(f.scenario.aperture.port_diameter_m, 1.0e-3);
        assert_eq!(f.scenario.path.focus, Focus::Tracking);
        assert_eq!(f.scenario.command_text, "open the garage door");
    }

    #[test]
    fn backend_and_overrides() {
        let text = "device.name = Facebook Portal Mini\ndevice.backend = Portal\nbudget_mw = 60\ndistance_m = 1\ndiode.name = red-638\npath.focus_distance_m = 2\naperture.offset_m = 1e-4\nwake_word_matched = yes\nedge.width = 0.5\n";
        let f = parse_scenario(text, &ProfileSet::builtin()).unwrap();
        assert_eq!(f.scenario.device.min_power_mw, 6.0);
        assert_eq!(f.scenario.diode.name, "red-638");
        assert_eq!(f.scenario.path.focus, Focus::Fixed(2.0));
        assert_eq!(f.scenario.aperture.offset_m, 1e-4);
        assert!(f.scenario.wake_word_matched);
        assert_eq!(f.scenario.edge.width, 0.5);
    }

    #[test]
    fn rejects_bad_files() {
        let p = ProfileSet::builtin();
        assert!(parse_scenario("budget_mw = 5\ndistance_m = 1\n", &p).is_err());
        assert!(parse_scenario("device.name = Echo\nbudget_mw = 5\n", &p).is_err());
        assert!(parse_scenario("device.name = Echo\nbudget_mw = 5\ndistance_m = 1\nfoo = 1\n", &p).is_err());
        assert!(parse_scenario("device.name = Echo\nbudget_mw = five\ndistance_m = 1\n", &p).is_err());
        assert!(parse_scenario("device.name = Echo\nbudget_mw = 5\ndistance_m = 1\nbudget_mw = 6\n", &p).is_err());
        assert!(parse_scenario("device.name = Echo\nbudget_mw = 5\ndistance_m = 1\npath.mesh_transmission = 2\n", &p).is_err());
        assert!(matches!(
            parse_scenario("device.name = Galaxy Note\nbudget_mw = 5\ndistance_m = 1\n", &p),
            Err(Error::NotFound { .. })
        ));
    }
}

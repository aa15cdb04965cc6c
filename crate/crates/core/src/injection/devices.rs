use crate::{Error, Result};

/// A tested voice-controllable device.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceProfile {
    pub name: String,
    pub backend: String,
    pub category: String,
    pub requires_auth: bool,
    /// Minimum activation power at 30 cm, mW.
    pub min_power_mw: f64,
    pub port_diameter_m: f64,
    pub port_count: u32,
    pub wake_word: String,
    /// Reported maximum distance at 60 mW, verbatim ("50+", "20", "---").
    pub range_60mw: String,
    /// Reported maximum distance at 5 mW, verbatim.
    pub range_5mw: String,
    pub note: String,
}

impl DeviceProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_power_mw > 0.0 && self.min_power_mw.is_finite()) {
            return Err(Error::range(
                "min_power_mw",
                format!("{}: {}", self.name, self.min_power_mw),
            ));
        }
        if self.port_count < 1 {
            return Err(Error::range("port_count", format!("{}: 0", self.name)));
        }
        if !(self.port_diameter_m > 0.0 && self.port_diameter_m.is_finite()) {
            return Err(Error::range(
                "port_diameter_m",
                format!("{}: {}", self.name, self.port_diameter_m),
            ));
        }
        Ok(())
    }

    /// Name without a trailing parenthetical such as "(Front Mic)".
    pub fn base_name(&self) -> &str {
        match self.name.find(" (") {
            Some(i) if self.name.ends_with(')') => &self.name[..i],
            _ => &self.name,
        }
    }
}

/// Immutable device dataset with case-insensitive lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceDb {
    devices: Vec<DeviceProfile>,
}

pub(crate) const DEVICES_HEADER: &str = "name,backend,category,requires_auth,min_power_mw,port_diameter_m,port_count,wake_word,range_60mw,range_5mw,note";

impl DeviceDb {
    pub fn new(devices: Vec<DeviceProfile>) -> Result<Self> {
        for d in &devices {
            d.validate()?;
        }
        Ok(Self { devices })
    }

    pub fn builtin() -> Self {
        Self::parse_csv(include_str!("../../data/devices.csv"))
            .expect("embedded device dataset is well-formed")
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut rows = crate::profiles::data_lines(text);
        match rows.next() {
            Some((_, h)) if h == DEVICES_HEADER => {}
            other => {
                return Err(Error::format(
                    "devices.csv",
                    format!("expected header {DEVICES_HEADER:?}, found {:?}", other.map(|o| o.1)),
                ))
            }
        }
        let mut devices = Vec::new();
        for (line_no, line) in rows {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 11 {
                return Err(Error::format(
                    "devices.csv",
                    format!("line {line_no}: expected 11 fields, found {}", f.len()),
                ));
            }
            let num = |i: usize| -> Result<f64> {
                f[i].parse().map_err(|_| {
                    Error::format("devices.csv", format!("line {line_no}: bad number {:?}", f[i]))
                })
            };
            let requires_auth = match f[3].to_ascii_lowercase().as_str() {
                "yes" | "true" => true,
                "no" | "false" => false,
                other => {
                    return Err(Error::format(
                        "devices.csv",
                        format!("line {line_no}: authentication {other:?} is not yes/no"),
                    ))
                }
            };
            devices.push(DeviceProfile {
                name: f[0].to_string(),
                backend: f[1].to_string(),
                category: f[2].to_string(),
                requires_auth,
                min_power_mw: num(4)?,
                port_diameter_m: num(5)?,
                port_count: f[6].parse().map_err(|_| {
                    Error::format("devices.csv", format!("line {line_no}: bad port count"))
                })?,
                wake_word: f[7].to_string(),
                range_60mw: f[8].to_string(),
                range_5mw: f[9].to_string(),
                note: f[10].to_string(),
            });
        }
        Self::new(devices)
    }

    pub fn devices(&self) -> &[DeviceProfile] {
        &self.devices
    }

    pub fn len(&self) -> usize {
        self.devices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }

    fn matches(d: &DeviceProfile, name: &str) -> bool {
        d.name.eq_ignore_ascii_case(name) || d.base_name().eq_ignore_ascii_case(name)
    }

    /// Case-insensitive match on the full name or the name without its
    /// parenthetical microphone position. Duplicate names resolve to the
    /// first row; use [`DeviceDb::lookup_with_backend`] to pick another.
    /// A fragment such as "galaxy s9" resolves when it names exactly one
    /// device.
    pub fn lookup(&self, name: &str) -> Result<&DeviceProfile> {
        let name = name.trim();
        if let Some(d) = self.devices.iter().find(|d| Self::matches(d, name)) {
            return Ok(d);
        }
        let needle = name.to_lowercase();
        let mut hits = self
            .devices
            .iter()
            .filter(|d| !needle.is_empty() && d.name.to_lowercase().contains(&needle));
        match (hits.next(), hits.next()) {
            (Some(d), None) => Ok(d),
            _ => Err(self.not_found(name)),
        }
    }

    pub fn lookup_with_backend(&self, name: &str, backend: &str) -> Result<&DeviceProfile> {
        let name = name.trim();
        self.devices
            .iter()
            .find(|d| Self::matches(d, name) && d.backend.eq_ignore_ascii_case(backend.trim()))
            .ok_or_else(|| self.not_found(&format!("{name} [{backend}]")))
    }

    fn not_found(&self, name: &str) -> Error {
        let needle = name.to_lowercase();
        let mut scored: Vec<(f64, &str)> = self
            .devices
            .iter()
            .map(|d| {
                let full = strsim::normalized_levenshtein(&needle, &d.name.to_lowercase());
                let base = strsim::normalized_levenshtein(&needle, &d.base_name().to_lowercase());
                (full.max(base), d.name.as_str())
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut suggestions: Vec<String> = Vec::new();
        for (_, n) in scored {
            if !suggestions.iter().any(|s| s == n) {
                suggestions.push(n.to_string());
            }
            if suggestions.len() == 3 {
                break;
            }
        }
        Error::NotFound {
            name: name.to_string(),
            suggestions,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookups() {
        let db = DeviceDb::builtin();
        let gh = db.lookup("Google Home").unwrap();
        assert_eq!(gh.min_power_mw, 0.5);
        assert_eq!(gh.backend, "Google Assistant");
        assert!(!gh.requires_auth);
        assert_eq!(db.lookup("echo spot").unwrap().min_power_mw, 29.0);
        assert_eq!(db.lookup("iPhone XR").unwrap().name, "iPhone XR (Front Mic)");
        assert!(db.lookup("iphone xr (front mic)").unwrap().requires_auth);
        assert_eq!(db.lookup("galaxy s9").unwrap().min_power_mw, 60.0);
        // "Echo" names a device exactly; "Echo Dot" is ambiguous.
        assert_eq!(db.lookup("echo").unwrap().min_power_mw, 25.0);
        assert!(db.lookup("echo dot").is_err());
    }

    #[test]
    fn unknown_device_lists_neighbours() {
        match DeviceDb::builtin().lookup("Galaxy Note") {
            Err(Error::NotFound { suggestions, .. }) => {
                assert!(!suggestions.is_empty() && suggestions.len() <= 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn portal_rows_disambiguate_by_backend() {
        let db = DeviceDb::builtin();
        let alexa = db.lookup("Facebook Portal Mini").unwrap();
        assert_eq!(alexa.backend, "Alexa");
        assert_eq!(alexa.min_power_mw, 1.0);
        let portal = db
            .lookup_with_backend("Facebook Portal Mini (Front Mic)", "portal")
            .unwrap();
        assert_eq!(portal.min_power_mw, 6.0);
        assert!(portal.note.contains("first 3 commands"));
    }

    #[test]
    fn rejects_malformed_rows() {
        let bad = format!("{DEVICES_HEADER}\nX,Alexa,Speaker,Maybe,1,1e-3,1,Alexa,,,\n");
        assert!(DeviceDb::parse_csv(&bad).is_err());
        let zero = format!("{DEVICES_HEADER}\nX,Alexa,Speaker,No,0,1e-3,1,Alexa,,,\n");
        assert!(DeviceDb::parse_csv(&zero).is_err());
        assert!(DeviceDb::parse_csv("name,foo\n").is_err());
    }
}

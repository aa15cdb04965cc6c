//! Free-space link budget between the laser optics and a microphone port.
//!
//! The spot at the target is a uniform-intensity disk whose diameter is the
//! larger of the diffraction limit and the geometric defocus blur, widened by
//! twice the RMS pointing jitter. The fraction of power entering the port is
//! the two-disk overlap area over the spot area.

use std::f64::consts::PI;
use std::io::Write;

use crate::{Error, Result};

/// Lower end of the range search, in metres.
pub const MIN_RANGE_M: f64 = 0.01;
/// Upper end of the range search; ranges at this value are unbounded at model scale.
pub const MODEL_RANGE_LIMIT_M: f64 = 10_000.0;
const RANGE_RESOLUTION_M: f64 = 0.01;

/// Where the attacker's optics are focused.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Focus {
    /// Refocused on the target at whatever distance it sits.
    Tracking,
    /// Fixed focus distance in metres.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpticalPath {
    pub lens_diameter_m: f64,
    pub focus: Focus,
    pub wavelength_nm: f64,
    /// RMS lateral spot wander at the target, metres.
    pub pointing_jitter_m: f64,
    pub window_transmission: f64,
    pub mesh_transmission: f64,
    pub incidence_angle_deg: f64,
}

impl Default for OpticalPath {
    /// 86 mm telephoto lens with a 450 nm source, refocused per target,
    /// 0.1 mm of manual-aiming jitter and a 0.9 dust mesh.
    fn default() -> Self {
        Self {
            lens_diameter_m: 0.086,
            focus: Focus::Tracking,
            wavelength_nm: 450.0,
            pointing_jitter_m: 1e-4,
            window_transmission: 1.0,
            mesh_transmission: 0.9,
            incidence_angle_deg: 0.0,
        }
    }
}

impl OpticalPath {
    /// Lossless, jitter-free variant of the default path (scanning-mirror
    /// aiming at short range).
    pub fn ideal() -> Self {
        Self {
            pointing_jitter_m: 0.0,
            mesh_transmission: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lens_diameter_m > 0.0 && self.lens_diameter_m.is_finite()) {
            return Err(Error::range("lens_diameter_m", format!("{}", self.lens_diameter_m)));
        }
        if let Focus::Fixed(f) = self.focus {
            if !(f > 0.0 && f.is_finite()) {
                return Err(Error::range("focus_distance_m", format!("{f}")));
            }
        }
        if !(self.wavelength_nm > 0.0 && self.wavelength_nm.is_finite()) {
            return Err(Error::range("wavelength_nm", format!("{}", self.wavelength_nm)));
        }
        if !(self.pointing_jitter_m >= 0.0 && self.pointing_jitter_m.is_finite()) {
            return Err(Error::range("pointing_jitter_m", format!("{}", self.pointing_jitter_m)));
        }
        for (what, t) in [
            ("window_transmission", self.window_transmission),
            ("mesh_transmission", self.mesh_transmission),
        ] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::range(what, format!("{t} not in [0, 1]")));
            }
        }
        if !(0.0..90.0).contains(&self.incidence_angle_deg) {
            return Err(Error::range(
                "incidence_angle_deg",
                format!("{} not in [0, 90)", self.incidence_angle_deg),
            ));
        }
        Ok(())
    }

    /// Visible-band sources (roughly 380-750 nm) are seen by the victim.
    pub fn is_visible(&self) -> bool {
        (380.0..=750.0).contains(&self.wavelength_nm)
    }

    pub fn transmission(&self) -> f64 {
        self.window_transmission
            * self.mesh_transmission
            * self.incidence_angle_deg.to_radians().cos()
    }
}

/// Microphone port geometry as seen by the beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aperture {
    pub port_diameter_m: f64,
    /// Lateral aiming error between spot centre and port centre.
    pub offset_m: f64,
}

impl Aperture {
    pub fn new(port_diameter_m: f64, offset_m: f64) -> Result<Self> {
        if !(port_diameter_m > 0.0 && port_diameter_m.is_finite()) {
            return Err(Error::range("port_diameter_m", format!("{port_diameter_m}")));
        }
        if !(offset_m >= 0.0 && offset_m.is_finite()) {
            return Err(Error::range("offset_m", format!("{offset_m}")));
        }
        Ok(Self {
            port_diameter_m,
            offset_m,
        })
    }

    pub fn centred(port_diameter_m: f64) -> Result<Self> {
        Self::new(port_diameter_m, 0.0)
    }
}

fn check_distance(distance_m: f64) -> Result<()> {
    if !(distance_m > 0.0 && distance_m.is_finite()) {
        return Err(Error::range("distance", format!("{distance_m} m must be positive")));
    }
    Ok(())
}

/// Diffraction-limited spot diameter `2.44 λ d / D`.
pub fn diffraction_limit(path: &OpticalPath, distance_m: f64) -> f64 {
    2.44 * path.wavelength_nm * 1e-9 * distance_m / path.lens_diameter_m
}

/// Spot diameter at the target in metres.
pub fn spot_diameter(path: &OpticalPath, distance_m: f64) -> Result<f64> {
    check_distance(distance_m)?;
    path.validate()?;
    let diffraction = diffraction_limit(path, distance_m);
    let defocus = match path.focus {
        Focus::Tracking => 0.0,
        Focus::Fixed(f) => path.lens_diameter_m * (distance_m - f).abs() / f,
    };
    Ok(diffraction.max(defocus) + 2.0 * path.pointing_jitter_m)
}

/// Intersection area of two disks with radii `r1`, `r2` whose centres are
/// `d` apart.
pub fn disk_overlap_area(r1: f64, r2: f64, d: f64) -> f64 {
    if d >= r1 + r2 {
        return 0.0;
    }
    let small = r1.min(r2);
    if d <= (r1 - r2).abs() {
        return PI * small * small;
    }
    let a1 = ((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1)).clamp(-1.0, 1.0).acos();
    let a2 = ((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2)).clamp(-1.0, 1.0).acos();
    let k = ((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)).max(0.0);
    r1 * r1 * a1 + r2 * r2 * a2 - 0.5 * k.sqrt()
}

/// Fraction of a uniform spot of diameter `spot_m` falling inside the port.
pub fn capture_fraction(spot_m: f64, aperture: &Aperture) -> f64 {
    let r_spot = spot_m / 2.0;
    let overlap = disk_overlap_area(r_spot, aperture.port_diameter_m / 2.0, aperture.offset_m);
    (overlap / (PI * r_spot * r_spot)).clamp(0.0, 1.0)
}

/// Fraction of emitted power that reaches the port at `distance_m`.
pub fn link_gain(path: &OpticalPath, aperture: &Aperture, distance_m: f64) -> Result<f64> {
    let spot = spot_diameter(path, distance_m)?;
    Ok(capture_fraction(spot, aperture) * path.transmission())
}

/// Average optical power delivered into the port, in mW.
pub fn received_power(
    path: &OpticalPath,
    aperture: &Aperture,
    distance_m: f64,
    emitted_avg_mw: f64,
) -> Result<f64> {
    if !(emitted_avg_mw >= 0.0 && emitted_avg_mw.is_finite()) {
        return Err(Error::range("emitted power", format!("{emitted_avg_mw} mW")));
    }
    Ok(emitted_avg_mw * link_gain(path, aperture, distance_m)?)
}

/// Largest distance at which the port still receives `required_mw`, with the
/// optics refocused at every candidate distance.
///
/// Returns 0 when even [`MIN_RANGE_M`] fails and [`MODEL_RANGE_LIMIT_M`] when
/// the limit itself succeeds.
pub fn max_range(
    path: &OpticalPath,
    aperture: &Aperture,
    emitted_avg_mw: f64,
    required_mw: f64,
) -> Result<f64> {
    let tracking = OpticalPath {
        focus: Focus::Tracking,
        ..path.clone()
    };
    tracking.validate()?;
    let reaches = |d: f64| -> Result<bool> {
        Ok(received_power(&tracking, aperture, d, emitted_avg_mw)? >= required_mw)
    };
    if !reaches(MIN_RANGE_M)? {
        return Ok(0.0);
    }
    if reaches(MODEL_RANGE_LIMIT_M)? {
        return Ok(MODEL_RANGE_LIMIT_M);
    }
    let (mut lo, mut hi) = (MIN_RANGE_M, MODEL_RANGE_LIMIT_M);
    while hi - lo > RANGE_RESOLUTION_M {
        let mid = 0.5 * (lo + hi);
        if reaches(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// One row of a link-budget report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudgetRow {
    pub distance_m: f64,
    pub spot_m: f64,
    pub capture_fraction: f64,
    pub received_mw: f64,
}

pub fn link_budget(
    path: &OpticalPath,
    aperture: &Aperture,
    emitted_avg_mw: f64,
    distances_m: &[f64],
) -> Result<Vec<LinkBudgetRow>> {
    distances_m
        .iter()
        .map(|&d| {
            let spot = spot_diameter(path, d)?;
            Ok(LinkBudgetRow {
                distance_m: d,
                spot_m: spot,
                capture_fraction: capture_fraction(spot, aperture),
                received_mw: received_power(path, aperture, d, emitted_avg_mw)?,
            })
        })
        .collect()
}

/// Writes `distance_m,spot_m,capture_fraction,received_mw`.
pub fn write_link_budget_csv<W: Write>(rows: &[LinkBudgetRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "distance_m,spot_m,capture_fraction,received_mw")?;
    for r in rows {
        writeln!(
            out,
            "{},{:.9e},{:.6},{:.9e}",
            r.distance_m, r.spot_m, r.capture_fraction, r.received_mw
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn focused_ideal() -> OpticalPath {
        OpticalPath::ideal()
    }

    #[test]
    fn diffraction_spot_at_110_m() {
        // 2.44 * 450e-9 * 110 / 0.086 = 1.4044 mm
        let spot = spot_diameter(&focused_ideal(), 110.0).unwrap();
        assert!((spot - 1.40442e-3).abs() < 1e-7, "{spot}");
        let fixed = OpticalPath {
            focus: Focus::Fixed(110.0),
            ..focused_ideal()
        };
        assert_eq!(spot_diameter(&fixed, 110.0).unwrap(), spot);
    }

    #[test]
    fn jitter_adds_linearly() {
        let a = OpticalPath {
            pointing_jitter_m: 1e-4,
            ..focused_ideal()
        };
        let b = OpticalPath {
            pointing_jitter_m: 3e-4,
            ..focused_ideal()
        };
        let da = spot_diameter(&a, 50.0).unwrap();
        let db = spot_diameter(&b, 50.0).unwrap();
        assert!((db - da - 4e-4).abs() < 1e-15);
    }

    #[test]
    fn defocus_dominates_when_far_off() {
        let path = OpticalPath {
            focus: Focus::Fixed(10.0),
            ..focused_ideal()
        };
        let spot = spot_diameter(&path, 20.0).unwrap();
        assert!((spot - 0.086).abs() < 1e-12);
    }

    #[test]
    fn capture_cases() {
        let path = focused_ideal();
        let port = Aperture::centred(1e-3).unwrap();
        assert_eq!(received_power(&path, &port, 1.0, 5.0).unwrap(), 5.0);

        // Spot with four times the port area, concentric.
        let spot = 2e-3;
        assert!((capture_fraction(spot, &port) - 0.25).abs() < 1e-15);

        let far = Aperture::new(1e-3, 1.0).unwrap();
        assert_eq!(received_power(&path, &far, 1.0, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn losses_multiply() {
        let path = OpticalPath {
            window_transmission: 0.8,
            mesh_transmission: 0.5,
            incidence_angle_deg: 60.0,
            ..focused_ideal()
        };
        let port = Aperture::centred(1e-3).unwrap();
        let p = received_power(&path, &port, 1.0, 10.0).unwrap();
        assert!((p - 10.0 * 0.8 * 0.5 * 0.5).abs() < 1e-12);
        let blocked = OpticalPath {
            mesh_transmission: 0.0,
            ..focused_ideal()
        };
        assert_eq!(received_power(&blocked, &port, 1.0, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(spot_diameter(&focused_ideal(), 0.0).is_err());
        let bad = OpticalPath {
            incidence_angle_deg: 90.0,
            ..focused_ideal()
        };
        assert!(spot_diameter(&bad, 1.0).is_err());
        assert!(Aperture::new(0.0, 0.0).is_err());
        assert!(Aperture::new(1e-3, -1.0).is_err());
    }

    #[test]
    fn range_edges() {
        let port = Aperture::centred(1e-3).unwrap();
        assert_eq!(max_range(&focused_ideal(), &port, 5.0, 6.0).unwrap(), 0.0);
        let r = max_range(&focused_ideal(), &port, 5.0, 0.5).unwrap();
        assert!(r >= 110.0, "{r}");
        let huge = Aperture::centred(1.0).unwrap();
        assert_eq!(
            max_range(&focused_ideal(), &huge, 5.0, 1.0).unwrap(),
            MODEL_RANGE_LIMIT_M
        );
    }

    #[test]
    fn range_search_lands_within_resolution() {
        let path = focused_ideal();
        let port = Aperture::centred(1e-3).unwrap();
        let r = max_range(&path, &port, 5.0, 0.5).unwrap();
        assert!(received_power(&path, &port, r, 5.0).unwrap() >= 0.5);
        assert!(received_power(&path, &port, r + 0.011, 5.0).unwrap() < 0.5);
    }

    #[test]
    fn link_budget_csv_shape() {
        let port = Aperture::centred(1e-3).unwrap();
        let rows = link_budget(&OpticalPath::default(), &port, 5.0, &[1.0, 10.0, 100.0]).unwrap();
        let mut out = Vec::new();
        write_link_budget_csv(&rows, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("distance_m,spot_m,capture_fraction,received_mw\n"));
        assert_eq!(text.lines().count(), 4);
    }

    proptest! {
        #[test]
        fn received_monotone_in_distance(d1 in 0.1f64..500.0, d2 in 0.1f64..500.0, port in 1e-4f64..3e-3) {
            let path = OpticalPath::default();
            let ap = Aperture::centred(port).unwrap();
            let (near, far) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let pn = received_power(&path, &ap, near, 5.0).unwrap();
            let pf = received_power(&path, &ap, far, 5.0).unwrap();
            prop_assert!(pf <= pn * (1.0 + 1e-12));
            prop_assert!(pn <= 5.0);
        }

        #[test]
        fn received_monotone_in_offset_and_angle(o1 in 0.0f64..3e-3, o2 in 0.0f64..3e-3, a1 in 0.0f64..89.0, a2 in 0.0f64..89.0) {
            let (lo, hi) = if o1 <= o2 { (o1, o2) } else { (o2, o1) };
            let path = OpticalPath::default();
            let near = received_power(&path, &Aperture::new(1e-3, lo).unwrap(), 30.0, 5.0).unwrap();
            let far = received_power(&path, &Aperture::new(1e-3, hi).unwrap(), 30.0, 5.0).unwrap();
            prop_assert!(far <= near * (1.0 + 1e-12) + 1e-15);
            let (alo, ahi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            let ap = Aperture::centred(1e-3).unwrap();
            let p_lo = received_power(&OpticalPath { incidence_angle_deg: alo, ..path.clone() }, &ap, 30.0, 5.0).unwrap();
            let p_hi = received_power(&OpticalPath { incidence_angle_deg: ahi, ..path }, &ap, 30.0, 5.0).unwrap();
            prop_assert!(p_hi <= p_lo);
        }

        #[test]
        fn spot_never_below_diffraction(d in 0.01f64..5000.0, f in 0.01f64..5000.0, j in 0.0f64..1e-2) {
            let path = OpticalPath { focus: Focus::Fixed(f), pointing_jitter_m: j, ..OpticalPath::default() };
            prop_assert!(spot_diameter(&path, d).unwrap() >= diffraction_limit(&path, d));
        }

        #[test]
        fn range_monotone_in_power(p1 in 0.5f64..100.0, p2 in 0.5f64..100.0) {
            let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
            let ap = Aperture::centred(1e-3).unwrap();
            let path = OpticalPath::default();
            prop_assert!(max_range(&path, &ap, lo, 0.5).unwrap() <= max_range(&path, &ap, hi, 0.5).unwrap());
        }

        #[test]
        fn smaller_port_never_reaches_further(port in 2e-4f64..3e-3) {
            let path = OpticalPath::default();
            let big = max_range(&path, &Aperture::centred(port).unwrap(), 5.0, 0.5).unwrap();
            let small = max_range(&path, &Aperture::centred(port / 2.0).unwrap(), 5.0, 0.5).unwrap();
            prop_assert!(small <= big);
        }
    }
}

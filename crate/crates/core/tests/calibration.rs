use photoninject::injection::{calibrate_edge, success_probability, AttackScenario};
use photoninject::optics::{max_range, Aperture, OpticalPath};
use photoninject::profiles::ProfileSet;

const SWEEP: [(f64, f64); 3] = [(20.0, 0.975), (25.0, 0.675), (27.0, 0.0)];

fn mini_at_60mw() -> (ProfileSet, AttackScenario) {
    let p = ProfileSet::builtin();
    let dev = p.devices.lookup("Google Home Mini").unwrap().clone();
    let s = AttackScenario::new(dev, 60.0, 20.0, p.edge).unwrap();
    (p, s)
}

#[test]
fn shipped_edge_is_the_fit() {
    let (p, s) = mini_at_60mw();
    let fit = calibrate_edge(&SWEEP, &s).unwrap();
    assert!((fit.width - p.edge.width).abs() <= 1e-12 * p.edge.width);
}

#[test]
fn fitted_sweep_tracks_observations() {
    let (_, s) = mini_at_60mw();
    let edge = calibrate_edge(&SWEEP, &s).unwrap();
    let rate = |d: f64| {
        success_probability(&s.device, s.at_distance(d).received_power().unwrap(), &edge)
    };
    assert!((rate(20.0) - 0.975).abs() <= 0.10);
    assert!((rate(25.0) - 0.675).abs() <= 0.15);
    assert!(rate(27.0) <= 0.01);
}

#[test]
fn table_ranges_hold_under_default_optics() {
    let p = ProfileSet::builtin();
    let gh = p.devices.lookup("Google Home").unwrap();
    let diode = p.diode("blue-450").unwrap();
    let path = OpticalPath::default();
    let r = max_range(
        &path,
        &Aperture::centred(gh.port_diameter_m).unwrap(),
        diode.planned_average_power(5.0),
        gh.min_power_mw,
    )
    .unwrap();
    assert!(r >= 110.0, "Google Home reaches {r} m");
    let s9 = p.devices.lookup("Samsung Galaxy S9").unwrap();
    let r = max_range(
        &path,
        &Aperture::centred(s9.port_diameter_m).unwrap(),
        diode.planned_average_power(60.0),
        s9.min_power_mw,
    )
    .unwrap();
    assert!(r <= 10.0, "Galaxy S9 reaches {r} m");
}

use photoninject::injection::{AttackScenario, RecognitionEdge};
use photoninject::mic::MicProfile;
use photoninject::profiles::ProfileSet;
use photoninject::signals::{
    generate_chirp, generate_tone, linear_fit, magnitude_spectrum, spectrogram,
    total_harmonic_distortion,
};

const RATE: u32 = 48_000;

fn quiet_mic() -> MicProfile {
    MicProfile {
        noise_rms: 0.0,
        ..MicProfile::mems_default()
    }
}

fn short_link() -> AttackScenario {
    let profiles = ProfileSet::builtin();
    let device = profiles.devices.lookup("Google Home").unwrap().clone();
    AttackScenario::new(device, 0.05, 1.0, RecognitionEdge::new(0.1).unwrap()).unwrap()
}

#[test]
fn tone_survives_the_chain() {
    let tone = generate_tone(1000.0, 1.0, RATE, 1.0).unwrap();
    let out = short_link().deliver(&quiet_mic(), &tone).unwrap();
    // Skip the filter start-up transient.
    let settled = &out.samples()[4800..4800 + 32768];
    let spectrum = magnitude_spectrum(settled);
    let peak = spectrum
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    let bin = RATE as f64 / 32768.0;
    assert!((peak as f64 * bin - 1000.0).abs() <= bin);
    let thd = total_harmonic_distortion(settled, RATE, 1000.0);
    assert!(thd <= 0.01, "THD {thd}");
}

#[test]
fn chirp_ridge_is_linear() {
    let chirp = generate_chirp(0.0, 10_000.0, 5.0, RATE).unwrap();
    let out = short_link().deliver(&quiet_mic(), &chirp).unwrap();
    let spec = spectrogram(&out, 2048, 512).unwrap();
    let fit = linear_fit(&spec.ridge()).unwrap();
    assert!((fit.slope - 2000.0).abs() < 20.0, "slope {}", fit.slope);
    assert!(fit.r_squared >= 0.99);
}

#[test]
fn clipping_shows_up_as_harmonics() {
    let tone = generate_tone(1000.0, 1.0, RATE, 1.0).unwrap();
    let mut hot = short_link();
    hot.budget_mw = 5.0;
    let out = hot.deliver(&quiet_mic(), &tone).unwrap();
    let thd = total_harmonic_distortion(&out.samples()[4800..4800 + 32768], RATE, 1000.0);
    assert!(thd > 0.05, "THD {thd}");
}

#[test]
fn seeded_delivery_is_reproducible() {
    let tone = generate_tone(440.0, 0.2, RATE, 0.8).unwrap();
    let mut s = short_link();
    s.rng_seed = 17;
    let mic = MicProfile::mems_default();
    let a = s.deliver(&mic, &tone).unwrap();
    let b = s.deliver(&mic, &tone).unwrap();
    assert_eq!(a, b);
    s.rng_seed = 18;
    assert_ne!(a, s.deliver(&mic, &tone).unwrap());
}

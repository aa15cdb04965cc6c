//! End-to-end attack planning: device dataset, recognition-edge model and
//! seeded attack simulation.
//!
//! A device accepts an injected command with a probability that is logistic
//! in the log ratio of received port power to the device's minimum activation
//! power. The edge width is shared by every device and calibrated on
//! distance-sweep observations.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diode::{emitted_light, modulate, optimize_operating_point, DiodeProfile, OperatingPoint};
use crate::mic::{transduce, MicProfile};
use crate::optics::{link_gain, received_power, spot_diameter, Aperture, OpticalPath};
use crate::signals::AudioSignal;
use crate::{Error, Result};

mod devices;
mod scenario;

pub use devices::{DeviceDb, DeviceProfile};
pub use scenario::{parse_scenario, ScenarioFile};

/// Number of consecutive recognitions required to call an attack successful.
pub const CONSECUTIVE_SUCCESSES: usize = 3;

const CLAMP_LOW: f64 = 0.01;
const CLAMP_HIGH: f64 = 0.99;
const EDGE_SEARCH: (f64, f64) = (0.01, 10.0);

/// Logistic width of the recognition edge, in units of natural-log power ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecognitionEdge {
    pub width: f64,
}

impl RecognitionEdge {
    pub fn new(width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::range("edge width", format!("{width} must be positive")));
        }
        Ok(Self { width })
    }
}

/// Probability that `device` recognises a command delivered with `received_mw`
/// at its port. Values under 1% report as 0 and over 99% as 1.
pub fn success_probability(device: &DeviceProfile, received_mw: f64, edge: &RecognitionEdge) -> f64 {
    if !(received_mw > 0.0) {
        return 0.0;
    }
    let x = (received_mw / device.min_power_mw).ln() / edge.width;
    let p = 1.0 / (1.0 + (-x).exp());
    if p < CLAMP_LOW {
        0.0
    } else if p > CLAMP_HIGH {
        1.0
    } else {
        p
    }
}

/// Everything needed to simulate one attack.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackScenario {
    pub device: DeviceProfile,
    pub diode: DiodeProfile,
    pub path: OpticalPath,
    pub aperture: Aperture,
    /// Average optical power budget at the laser, mW.
    pub budget_mw: f64,
    pub distance_m: f64,
    pub command_text: String,
    pub wake_word_matched: bool,
    pub rng_seed: u64,
    pub edge: RecognitionEdge,
}

impl AttackScenario {
    /// Blue diode, default optics aimed at the centre of the device's port,
    /// no wake-word recording, seed 0.
    pub fn new(
        device: DeviceProfile,
        budget_mw: f64,
        distance_m: f64,
        edge: RecognitionEdge,
    ) -> Result<Self> {
        let aperture = Aperture::centred(device.port_diameter_m)?;
        Ok(Self {
            device,
            diode: DiodeProfile::blue_450(),
            path: OpticalPath::default(),
            aperture,
            budget_mw,
            distance_m,
            command_text: String::new(),
            wake_word_matched: false,
            rng_seed: 0,
            edge,
        })
    }

    pub fn at_distance(&self, distance_m: f64) -> Self {
        Self {
            distance_m,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.budget_mw > 0.0 && self.budget_mw.is_finite()) {
            return Err(Error::range("budget_mw", format!("{}", self.budget_mw)));
        }
        if !(self.distance_m > 0.0 && self.distance_m.is_finite()) {
            return Err(Error::range("distance_m", format!("{}", self.distance_m)));
        }
        self.device.validate()?;
        self.diode.validate()?;
        self.path.validate()
    }

    /// Average power the diode emits for this budget.
    pub fn emitted_power(&self) -> f64 {
        self.diode.planned_average_power(self.budget_mw)
    }

    pub fn received_power(&self) -> Result<f64> {
        received_power(&self.path, &self.aperture, self.distance_m, self.emitted_power())
    }

    /// Runs `audio` through the whole chain: operating point, modulation,
    /// diode, free-space link and microphone. The scenario seed drives the
    /// microphone noise.
    pub fn deliver(&self, mic: &MicProfile, audio: &AudioSignal) -> Result<AudioSignal> {
        self.validate()?;
        let op = optimize_operating_point(&self.diode, self.budget_mw)?;
        let drive = modulate(&self.diode, &op, audio)?;
        let light = emitted_light(&self.diode, &drive)?;
        let gain = link_gain(&self.path, &self.aperture, self.distance_m)?;
        transduce(mic, &light.attenuated(gain)?, self.rng_seed)
    }

    fn gated(&self) -> bool {
        self.device.requires_auth && !self.wake_word_matched
    }
}

/// Fits the recognition-edge width to observed `(distance, success rate)`
/// pairs by least squares, holding every other scenario parameter fixed.
///
/// The width is searched over [0.01, 10]: a log-spaced scan picks the best
/// bracket (first minimum wins) and a golden-section search refines it,
/// keeping the lower half on ties.
pub fn calibrate_edge(
    observations: &[(f64, f64)],
    template: &AttackScenario,
) -> Result<RecognitionEdge> {
    if observations.len() < 2 {
        return Err(Error::Fit(format!(
            "{} observation(s); need at least 2",
            observations.len()
        )));
    }
    let first = observations[0].0;
    if observations.iter().all(|o| o.0 == first) {
        return Err(Error::Fit("all observations share one distance".into()));
    }
    if let Some(o) = observations
        .iter()
        .find(|o| !(o.0 > 0.0) || !(0.0..=1.0).contains(&o.1))
    {
        return Err(Error::Fit(format!("invalid observation {o:?}")));
    }
    let received = observations
        .iter()
        .map(|&(d, _)| template.at_distance(d).received_power())
        .collect::<Result<Vec<f64>>>()?;
    let sse = |width: f64| -> f64 {
        let edge = RecognitionEdge { width };
        observations
            .iter()
            .zip(&received)
            .map(|(&(_, rate), &r)| (success_probability(&template.device, r, &edge) - rate).powi(2))
            .sum()
    };

    const SCAN: usize = 241;
    let (lo, hi) = (EDGE_SEARCH.0.ln(), EDGE_SEARCH.1.ln());
    let grid: Vec<f64> = (0..SCAN)
        .map(|i| (lo + (hi - lo) * i as f64 / (SCAN - 1) as f64).exp())
        .collect();
    let mut best = 0;
    let mut best_err = f64::INFINITY;
    for (i, &w) in grid.iter().enumerate() {
        let e = sse(w);
        if e < best_err {
            best = i;
            best_err = e;
        }
    }
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(SCAN - 1)];
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (sse(c), sse(d));
    while b - a > 1e-10 * (1.0 + a) {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = sse(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = sse(d);
        }
    }
    let mut width = 0.5 * (a + b);
    if sse(grid[best]) < sse(width) {
        width = grid[best];
    }
    RecognitionEdge::new(width)
}

/// Outcome of [`simulate_attack`].
#[derive(Debug, Clone, PartialEq)]
pub struct AttackReport {
    pub device: String,
    pub distance_m: f64,
    pub budget_mw: f64,
    pub emitted_mw: f64,
    pub received_mw: f64,
    pub spot_m: f64,
    pub operating_point: OperatingPoint,
    pub feasible: bool,
    pub success_probability: f64,
    pub trial_outcomes: Vec<bool>,
    pub notes: Vec<String>,
}

impl AttackReport {
    pub fn successes(&self) -> usize {
        self.trial_outcomes.iter().filter(|&&t| t).count()
    }

    /// Whether the trials contain the required run of consecutive successes.
    pub fn criterion_met(&self) -> bool {
        consecutive_success_criterion(&self.trial_outcomes, CONSECUTIVE_SUCCESSES)
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "device:              {}", self.device)?;
        writeln!(out, "distance:            {} m", self.distance_m)?;
        writeln!(out, "budget:              {} mW", self.budget_mw)?;
        writeln!(
            out,
            "operating point:     I_DC = {:.3} mA, I_pp = {:.3} mA",
            self.operating_point.bias_ma, self.operating_point.peak_to_peak_ma
        )?;
        writeln!(out, "emitted (avg):       {:.4} mW", self.emitted_mw)?;
        writeln!(out, "spot diameter:       {:.4} mm", self.spot_m * 1e3)?;
        writeln!(out, "received at port:    {:.4} mW", self.received_mw)?;
        writeln!(out, "success probability: {:.4}", self.success_probability)?;
        writeln!(
            out,
            "feasible:            {}",
            if self.feasible { "yes" } else { "no" }
        )?;
        writeln!(
            out,
            "trials:              {}/{} recognised; {} consecutive: {}",
            self.successes(),
            self.trial_outcomes.len(),
            CONSECUTIVE_SUCCESSES,
            if self.criterion_met() { "met" } else { "not met" }
        )?;
        for n in &self.notes {
            writeln!(out, "note: {n}")?;
        }
        Ok(())
    }

    /// Writes `field,value` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "field,value")?;
        writeln!(out, "device,{}", self.device)?;
        writeln!(out, "distance_m,{}", self.distance_m)?;
        writeln!(out, "budget_mw,{}", self.budget_mw)?;
        writeln!(out, "i_dc_ma,{}", self.operating_point.bias_ma)?;
        writeln!(out, "i_pp_ma,{}", self.operating_point.peak_to_peak_ma)?;
        writeln!(out, "emitted_mw,{}", self.emitted_mw)?;
        writeln!(out, "spot_m,{}", self.spot_m)?;
        writeln!(out, "received_mw,{}", self.received_mw)?;
        writeln!(out, "success_probability,{}", self.success_probability)?;
        writeln!(out, "feasible,{}", self.feasible)?;
        writeln!(out, "trials,{}", self.trial_outcomes.len())?;
        writeln!(out, "successes,{}", self.successes())?;
        writeln!(out, "criterion_met,{}", self.criterion_met())?;
        for n in &self.notes {
            writeln!(out, "note,\"{}\"", n.replace('"', "'"))?;
        }
        Ok(())
    }
}

/// Plans the operating point, propagates the link budget and draws `trials`
/// seeded Bernoulli recognition outcomes.
pub fn simulate_attack(scenario: &AttackScenario, trials: usize) -> Result<AttackReport> {
    if trials < 1 {
        return Err(Error::range("trials", "need at least one trial"));
    }
    scenario.validate()?;
    let op = optimize_operating_point(&scenario.diode, scenario.budget_mw)?;
    let emitted = scenario.emitted_power();
    let spot = spot_diameter(&scenario.path, scenario.distance_m)?;
    let received = scenario.received_power()?;
    let mut notes = Vec::new();
    if emitted < scenario.budget_mw {
        notes.push(format!(
            "{} cannot reach {} mW at full modulation depth; average power limited to {:.3} mW",
            scenario.diode.name, scenario.budget_mw, emitted
        ));
    }
    let mut p = success_probability(&scenario.device, received, &scenario.edge);
    if scenario.gated() {
        p = 0.0;
        notes.push(format!(
            "{} requires voice authentication; without a matching \"{}\" recording the command is rejected",
            scenario.device.name, scenario.device.wake_word
        ));
    }
    if !scenario.device.note.is_empty() {
        notes.push(format!("dataset: {}", scenario.device.note));
    }
    if scenario.path.is_visible() {
        notes.push(format!(
            "{} nm beam is visible to anyone near the target",
            scenario.path.wavelength_nm
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.rng_seed);
    let trial_outcomes = (0..trials).map(|_| rng.random::<f64>() < p).collect();
    Ok(AttackReport {
        device: scenario.device.name.clone(),
        distance_m: scenario.distance_m,
        budget_mw: scenario.budget_mw,
        emitted_mw: emitted,
        received_mw: received,
        spot_m: spot,
        operating_point: op,
        feasible: p >= 0.5,
        success_probability: p,
        trial_outcomes,
        notes,
    })
}

/// True iff `outcomes` contains `k` consecutive successes.
pub fn consecutive_success_criterion(outcomes: &[bool], k: usize) -> bool {
    let k = k.max(1);
    let mut run = 0;
    for &o in outcomes {
        run = if o { run + 1 } else { 0 };
        if run >= k {
            return true;
        }
    }
    false
}

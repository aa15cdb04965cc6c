use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use photoninject::authsim::{
    enumerate_pins, expected_time, write_summary_csv, GuessOrder, LockPolicy, Outcome, PolicyKind,
    DEFAULT_ATTEMPT_SECONDS,
};
use photoninject::defense::{
    default_energy_floor, detect_injection_framed, ChannelSet, Status, DEFAULT_FRAME,
    DEFAULT_THRESHOLD,
};
use photoninject::diode::{modulate, optimize_operating_point};
use photoninject::injection::{
    simulate_attack, success_probability, AttackScenario, DeviceProfile, ScenarioFile,
};
use photoninject::optics::{
    capture_fraction, max_range, spot_diameter, OpticalPath, MODEL_RANGE_LIMIT_M,
};
use photoninject::profiles::ProfileSet;
use photoninject::signals::{generate_chirp, linear_fit, spectrogram, wav};
use photoninject::Error;

const EXIT_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "photoninject", version, about = "Laser audio-injection planner, simulator and detector")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the device dataset (or the diode / microphone profiles).
    Profiles {
        #[arg(value_enum, default_value_t = ProfileKind::Devices)]
        kind: ProfileKind,
    },
    /// Operating point, link budget and recognition probability for one shot.
    Plan(PlanArgs),
    /// Turn an audio file into a diode drive waveform.
    Modulate(ModulateArgs),
    /// Run seeded recognition trials for a scenario file.
    Simulate(SimulateArgs),
    /// Maximum attack distance with default optics.
    Range(RangeArgs),
    /// Spoken-PIN brute force timing.
    Bruteforce(BruteforceArgs),
    /// Look for single-microphone injection in a multichannel recording.
    Detect(DetectArgs),
    /// Send a linear chirp through the whole chain and check the spectrogram ridge.
    ChirpTest(ChirpArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProfileKind {
    Devices,
    Diodes,
    Mics,
}

#[derive(Debug, Args)]
struct DeviceArgs {
    #[arg(long)]
    device: Option<String>,
    /// Pick between dataset rows that share a name.
    #[arg(long)]
    backend: Option<String>,
    /// Average optical power budget, mW.
    #[arg(long)]
    budget_mw: Option<f64>,
    #[arg(long)]
    diode: Option<String>,
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[command(flatten)]
    target: DeviceArgs,
    #[arg(long)]
    distance_m: Option<f64>,
    /// Scenario file; the flags above override its values.
    #[arg(long)]
    scenario: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ModulateArgs {
    /// Mono or stereo 16-bit PCM WAV.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    budget_mw: f64,
    #[arg(long, default_value = "blue-450")]
    diode: String,
    /// `.csv` for `time_s,current_ma`, `.wav` for PCM plus a `.params.csv` sidecar.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Defaults to the scenario's `trials`, else 10.
    #[arg(long)]
    trials: Option<usize>,
    /// Overrides the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct RangeArgs {
    #[arg(long)]
    device: String,
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    budget_mw: f64,
    #[arg(long, default_value = "blue-450")]
    diode: String,
}

#[derive(Debug, Args)]
struct BruteforceArgs {
    #[arg(long, default_value_t = 4)]
    digits: u32,
    /// unlimited, max-attempts:N or delay-after:N:SECONDS
    #[arg(long, default_value = "unlimited")]
    policy: String,
    #[arg(long, default_value_t = DEFAULT_ATTEMPT_SECONDS)]
    per_attempt_s: f64,
    /// Run the enumeration against this PIN.
    #[arg(long)]
    secret: Option<String>,
    /// Guess in a seeded shuffled order instead of ascending.
    #[arg(long)]
    shuffle_seed: Option<u64>,
}

#[derive(Debug, Args)]
struct DetectArgs {
    /// Multichannel 16-bit PCM WAV, one channel per microphone.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Microphone profile whose noise floor sets the default energy floor.
    #[arg(long, default_value = "mems-default")]
    mic: String,
    /// Explicit energy floor (mean square); overrides --mic.
    #[arg(long)]
    energy_floor: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_FRAME)]
    frame: usize,
}

#[derive(Debug, Args)]
struct ChirpArgs {
    #[arg(long, default_value_t = 0.0)]
    f_start: f64,
    #[arg(long, default_value_t = 10_000.0)]
    f_end: f64,
    #[arg(long, default_value_t = 5.0)]
    duration_s: f64,
    #[arg(long, default_value_t = 48_000)]
    sample_rate: u32,
    #[arg(long, default_value = "Google Home")]
    device: String,
    /// Kept small so the microphone stays out of saturation.
    #[arg(long, default_value_t = 0.05)]
    budget_mw: f64,
    #[arg(long, default_value_t = 1.0)]
    distance_m: f64,
    #[arg(long, default_value = "mems-default")]
    mic: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Drop the microphone noise floor.
    #[arg(long)]
    noiseless: bool,
    #[arg(long, default_value = "chirp-spectrogram.csv")]
    out: PathBuf,
}

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. } | Error::Format { .. } => EXIT_IO,
            Error::Budget(_) => EXIT_FAILED,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure {
            code: EXIT_IO,
            message: format!("write failed: {e}"),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    let profiles = ProfileSet::from_env()?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let csv = cli.format == Format::Csv;
    match cli.command {
        Command::Profiles { kind } => profiles_cmd(&profiles, kind, csv, &mut out),
        Command::Plan(a) => plan_cmd(&profiles, a, csv, &mut out),
        Command::Modulate(a) => modulate_cmd(&profiles, a, csv, &mut out),
        Command::Simulate(a) => simulate_cmd(&profiles, a, csv, &mut out),
        Command::Range(a) => range_cmd(&profiles, a, csv, &mut out),
        Command::Bruteforce(a) => bruteforce_cmd(a, csv, &mut out),
        Command::Detect(a) => detect_cmd(&profiles, a, csv, &mut out),
        Command::ChirpTest(a) => chirp_cmd(&profiles, a, csv, &mut out),
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "Yes"
    } else {
        "No"
    }
}

fn profiles_cmd(p: &ProfileSet, kind: ProfileKind, csv: bool, out: &mut impl Write) -> CmdResult {
    match (kind, csv) {
        (ProfileKind::Devices, true) => {
            writeln!(out, "name,backend,category,authentication,min_power_mw,range_60mw,range_5mw")?;
            for d in p.devices.devices() {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    d.name,
                    d.backend,
                    d.category,
                    yes_no(d.requires_auth),
                    d.min_power_mw,
                    d.range_60mw,
                    d.range_5mw
                )?;
            }
        }
        (ProfileKind::Devices, false) => {
            writeln!(
                out,
                "{:<34} {:<17} {:<10} {:<5} {:>7} {:>6} {:>5}",
                "device", "backend", "category", "auth", "min mW", "60 mW", "5 mW"
            )?;
            for d in p.devices.devices() {
                writeln!(
                    out,
                    "{:<34} {:<17} {:<10} {:<5} {:>7} {:>6} {:>5}",
                    d.name,
                    d.backend,
                    d.category,
                    yes_no(d.requires_auth),
                    d.min_power_mw,
                    d.range_60mw,
                    d.range_5mw
                )?;
            }
        }
        (ProfileKind::Diodes, _) => {
            let sep = if csv { "," } else { "  " };
            writeln!(
                out,
                "{}",
                ["name", "i_th_ma", "slope_mw_per_ma", "i_max_ma", "wavelength_nm"].join(sep)
            )?;
            for d in &p.diodes {
                writeln!(
                    out,
                    "{}",
                    [
                        d.name.clone(),
                        d.threshold_ma.to_string(),
                        d.slope_mw_per_ma.to_string(),
                        d.max_ma.to_string(),
                        d.wavelength_nm.to_string(),
                    ]
                    .join(sep)
                )?;
            }
        }
        (ProfileKind::Mics, _) => {
            let sep = if csv { "," } else { "  " };
            writeln!(
                out,
                "{}",
                [
                    "name",
                    "responsivity",
                    "band_low_hz",
                    "band_high_hz",
                    "saturation_mw",
                    "noise_rms"
                ]
                .join(sep)
            )?;
            for m in &p.mics {
                writeln!(
                    out,
                    "{}",
                    [
                        m.name.clone(),
                        m.responsivity.to_string(),
                        m.band_low_hz.to_string(),
                        m.band_high_hz.to_string(),
                        m.saturation_mw.to_string(),
                        m.noise_rms.to_string(),
                    ]
                    .join(sep)
                )?;
            }
        }
    }
    Ok(0)
}

fn find_device<'a>(
    p: &'a ProfileSet,
    name: &str,
    backend: Option<&str>,
) -> Result<&'a DeviceProfile, Error> {
    match backend {
        Some(b) => p.devices.lookup_with_backend(name, b),
        None => p.devices.lookup(name),
    }
}

fn plan_cmd(p: &ProfileSet, a: PlanArgs, csv: bool, out: &mut impl Write) -> CmdResult {
    let mut s = match &a.scenario {
        Some(path) => ScenarioFile::load(path, p)?.scenario,
        None => {
            let name = a
                .target
                .device
                .as_deref()
                .ok_or_else(|| usage("--device is required without --scenario"))?;
            let budget = a
                .target
                .budget_mw
                .ok_or_else(|| usage("--budget-mw is required without --scenario"))?;
            let distance = a
                .distance_m
                .ok_or_else(|| usage("--distance-m is required without --scenario"))?;
            let dev = find_device(p, name, a.target.backend.as_deref())?.clone();
            AttackScenario::new(dev, budget, distance, p.edge)?
        }
    };
    if a.scenario.is_some() {
        if let Some(name) = &a.target.device {
            s.device = find_device(p, name, a.target.backend.as_deref())?.clone();
            s.aperture.port_diameter_m = s.device.port_diameter_m;
        }
        if let Some(b) = a.target.budget_mw {
            s.budget_mw = b;
        }
        if let Some(d) = a.distance_m {
            s.distance_m = d;
        }
    }
    if let Some(d) = &a.target.diode {
        s.diode = p.diode(d)?.clone();
    }
    s.validate()?;

    let op = optimize_operating_point(&s.diode, s.budget_mw)?;
    let emitted = s.emitted_power();
    let spot = spot_diameter(&s.path, s.distance_m)?;
    let capture = capture_fraction(spot, &s.aperture);
    let received = s.received_power()?;
    let gated = s.device.requires_auth && !s.wake_word_matched;
    let p_success = if gated {
        0.0
    } else {
        success_probability(&s.device, received, &s.edge)
    };
    let feasible = p_success >= 0.5;

    if csv {
        writeln!(out, "field,value")?;
        writeln!(out, "device,{}", s.device.name)?;
        writeln!(out, "diode,{}", s.diode.name)?;
        writeln!(out, "budget_mw,{}", s.budget_mw)?;
        writeln!(out, "distance_m,{}", s.distance_m)?;
        writeln!(out, "i_dc_ma,{}", op.bias_ma)?;
        writeln!(out, "i_pp_ma,{}", op.peak_to_peak_ma)?;
        writeln!(out, "emitted_mw,{emitted}")?;
        writeln!(out, "spot_m,{spot}")?;
        writeln!(out, "capture_fraction,{capture}")?;
        writeln!(out, "transmission,{}", s.path.transmission())?;
        writeln!(out, "received_mw,{received}")?;
        writeln!(out, "min_power_mw,{}", s.device.min_power_mw)?;
        writeln!(out, "success_probability,{p_success}")?;
        writeln!(out, "feasible,{feasible}")?;
    } else {
        writeln!(out, "device:              {} ({})", s.device.name, s.device.backend)?;
        writeln!(out, "diode:               {}", s.diode.name)?;
        writeln!(
            out,
            "operating point:     I_DC = {:.3} mA, I_pp = {:.3} mA",
            op.bias_ma, op.peak_to_peak_ma
        )?;
        writeln!(out, "emitted (avg):       {emitted:.4} mW")?;
        writeln!(out, "distance:            {} m", s.distance_m)?;
        writeln!(out, "spot diameter:       {:.4} mm", spot * 1e3)?;
        writeln!(out, "capture fraction:    {capture:.4}")?;
        writeln!(out, "path transmission:   {:.4}", s.path.transmission())?;
        writeln!(
            out,
            "received at port:    {received:.4} mW (device needs {} mW)",
            s.device.min_power_mw
        )?;
        writeln!(out, "success probability: {p_success:.4}")?;
        writeln!(out, "feasible:            {}", if feasible { "yes" } else { "no" })?;
        if gated {
            writeln!(
                out,
                "note: {} requires voice authentication on \"{}\"",
                s.device.name, s.device.wake_word
            )?;
        }
    }
    Ok(if feasible { 0 } else { EXIT_FAILED })
}

fn sidecar_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
    out.with_file_name(format!("{stem}.params.csv"))
}

fn modulate_cmd(p: &ProfileSet, a: ModulateArgs, csv: bool, out: &mut impl Write) -> CmdResult {
    let diode = p.diode(&a.diode)?;
    let ext = a
        .out
        .extension()
        .map(|e| e.to_string_lossy().to_ascii_lowercase())
        .unwrap_or_default();
    if ext != "csv" && ext != "wav" {
        return Err(usage(format!(
            "--out {} must end in .csv or .wav",
            a.out.display()
        )));
    }
    let audio = wav::load_wav(&a.input)?;
    let op = optimize_operating_point(diode, a.budget_mw)?;
    let drive = modulate(diode, &op, &audio)?;
    let mut written = vec![a.out.clone()];
    if ext == "wav" {
        let sidecar = sidecar_path(&a.out);
        drive.save_wav(&op, &a.out, &sidecar)?;
        written.push(sidecar);
    } else {
        drive.save_csv(&a.out)?;
    }
    if csv {
        writeln!(out, "param,value")?;
        writeln!(out, "diode,{}", diode.name)?;
        writeln!(out, "i_dc_ma,{}", op.bias_ma)?;
        writeln!(out, "i_pp_ma,{}", op.peak_to_peak_ma)?;
        writeln!(out, "samples,{}", drive.currents().len())?;
        writeln!(out, "sample_rate_hz,{}", drive.sample_rate())?;
    } else {
        writeln!(
            out,
            "{}: I_DC = {:.3} mA, I_pp = {:.3} mA, {} samples at {} Hz",
            diode.name,
            op.bias_ma,
            op.peak_to_peak_ma,
            drive.currents().len(),
            drive.sample_rate()
        )?;
        for w in written {
            writeln!(out, "wrote {}", w.display())?;
        }
    }
    Ok(0)
}

fn simulate_cmd(p: &ProfileSet, a: SimulateArgs, csv: bool, out: &mut impl Write) -> CmdResult {
    let file = ScenarioFile::load(&a.scenario, p)?;
    let mut s = file.scenario;
    if let Some(seed) = a.seed {
        s.rng_seed = seed;
    }
    let trials = a.trials.or(file.trials).unwrap_or(10);
    let report = simulate_attack(&s, trials)?;
    if csv {
        report.write_csv(&mut *out)?;
    } else {
        report.write_text(&mut *out)?;
    }
    Ok(if report.criterion_met() { 0 } else { EXIT_FAILED })
}

fn range_cmd(p: &ProfileSet, a: RangeArgs, csv: bool, out: &mut impl Write) -> CmdResult {
    let dev = find_device(p, &a.device, a.backend.as_deref())?;
    let diode = p.diode(&a.diode)?;
    if !(a.budget_mw > 0.0 && a.budget_mw.is_finite()) {
        return Err(usage(format!("--budget-mw {} must be positive", a.budget_mw)));
    }
    let s = AttackScenario::new(dev.clone(), a.budget_mw, 1.0, p.edge)?;
    let emitted = diode.planned_average_power(a.budget_mw);
    let range = max_range(&OpticalPath::default(), &s.aperture, emitted, dev.min_power_mw)?;
    if csv {
        writeln!(out, "device,budget_mw,emitted_mw,min_power_mw,max_range_m")?;
        writeln!(
            out,
            "{},{},{},{},{}",
            dev.name, a.budget_mw, emitted, dev.min_power_mw, range
        )?;
    } else {
        let bound = if range >= MODEL_RANGE_LIMIT_M { ">= " } else { "" };
        writeln!(
            out,
            "{}: max range {bound}{range:.2} m at {} mW (needs {} mW at the port)",
            dev.name, a.budget_mw, dev.min_power_mw
        )?;
        if range == 0.0 {
            writeln!(out, "not reachable even at point-blank range")?;
        }
    }
    Ok(if range > 0.0 { 0 } else { EXIT_FAILED })
}

fn hours(s: f64) -> String {
    format!("{:.1} h", s / 3600.0)
}

fn bruteforce_cmd(a: BruteforceArgs, csv: bool, out: &mut impl Write) -> CmdResult {
    let kind: PolicyKind = a.policy.parse()?;
    let policy = LockPolicy::with_kind(kind)?;
    let e = expected_time(&policy, a.digits, a.per_attempt_s)?;
    let order = match a.shuffle_seed {
        Some(seed) => GuessOrder::SeededShuffle(seed),
        None => GuessOrder::Ascending,
    };
    let run = a
        .secret
        .as_deref()
        .map(|secret| enumerate_pins(&policy, a.digits, a.per_attempt_s, secret, order))
        .transpose()?;
    if csv {
        write_summary_csv(&[(policy, a.digits, a.per_attempt_s, e)], &mut *out)?;
        if let Some(r) = &run {
            writeln!(out)?;
            writeln!(out, "attempts_made,elapsed_s,outcome")?;
            writeln!(out, "{},{},{}", r.attempts_made, r.elapsed_s, r.outcome)?;
        }
    } else {
        writeln!(
            out,
            "policy {}, {} digits, {} s per attempt",
            policy.kind, a.digits, a.per_attempt_s
        )?;
        writeln!(out, "worst case:   {} s ({})", e.worst_s, hours(e.worst_s))?;
        writeln!(out, "mean:         {} s ({})", e.mean_s, hours(e.mean_s))?;
        writeln!(out, "success prob: {}", e.success_prob)?;
        if let Some(r) = &run {
            writeln!(
                out,
                "enumeration:  {} after {} attempts, {} s ({})",
                r.outcome,
                r.attempts_made,
                r.elapsed_s,
                hours(r.elapsed_s)
            )?;
        }
    }
    Ok(match run {
        Some(r) if r.outcome != Outcome::Unlocked => EXIT_FAILED,
        _ => 0,
    })
}

fn detect_cmd(p: &ProfileSet, a: DetectArgs, csv: bool, out: &mut impl Write) -> CmdResult {
    let floor = match a.energy_floor {
        Some(f) => f,
        None => default_energy_floor(p.mic(&a.mic)?.noise_rms),
    };
    let set = ChannelSet::load(&a.input)?;
    let verdict = detect_injection_framed(&set, a.frame, a.threshold, floor)?;
    if csv {
        verdict.write_csv(&mut *out)?;
    } else {
        writeln!(
            out,
            "{} channels, {} samples at {} Hz",
            set.count(),
            set.len(),
            set.sample_rate()
        )?;
        verdict.write_text(&mut *out)?;
        if verdict.status == Status::InjectionSuspected {
            writeln!(out, "signal present on isolated channel(s) only; likely light injection")?;
        }
    }
    Ok(0)
}

fn chirp_cmd(p: &ProfileSet, a: ChirpArgs, csv: bool, out: &mut impl Write) -> CmdResult {
    let dev = p.devices.lookup(&a.device)?.clone();
    let mut mic = p.mic(&a.mic)?.clone();
    if a.noiseless {
        mic.noise_rms = 0.0;
    }
    let mut s = AttackScenario::new(dev, a.budget_mw, a.distance_m, p.edge)?;
    s.rng_seed = a.seed;
    let chirp = generate_chirp(a.f_start, a.f_end, a.duration_s, a.sample_rate)?;
    let recorded = s.deliver(&mic, &chirp)?;
    let spec = spectrogram(&recorded, 2048, 512)?;
    spec.save_csv(&a.out)?;
    let expected = (a.f_end - a.f_start) / a.duration_s;
    let fit = linear_fit(&spec.ridge())
        .ok_or_else(|| usage("chirp too short for a ridge fit"))?;
    let pass = fit.r_squared >= 0.99;
    if csv {
        writeln!(out, "expected_slope_hz_per_s,slope_hz_per_s,intercept_hz,r_squared,pass")?;
        writeln!(
            out,
            "{expected},{},{},{},{pass}",
            fit.slope, fit.intercept, fit.r_squared
        )?;
    } else {
        writeln!(out, "expected slope: {expected:.1} Hz/s")?;
        writeln!(out, "ridge slope:    {:.1} Hz/s", fit.slope)?;
        writeln!(out, "R^2:            {:.5}", fit.r_squared)?;
        writeln!(out, "spectrogram:    {}", a.out.display())?;
        writeln!(out, "{}", if pass { "PASS" } else { "FAIL" })?;
    }
    Ok(if pass { 0 } else { EXIT_FAILED })
}

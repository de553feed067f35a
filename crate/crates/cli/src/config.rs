//! Line-oriented `key = value` configuration with SI unit suffixes.
//!
//! Angular rates are stored in rad/s; a value given in Hz, kHz or MHz is
//! multiplied by 2π. Decay rates are stored in 1/s, times in s, lengths in m
//! and magnetic fields in mG. [`Config::render`] writes every key in base
//! units, and parsing the rendered text gives back the same configuration.

use std::collections::HashSet;
use std::f64::consts::TAU;
use std::fmt::Write as _;

use nucspin_core::experiments::{ ApparatusParams, PrepState };
use nucspin_core::tomography::LikelihoodMode;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{}{kind}", if *.line > 0 { format!("line {}: ", .line) } else { String::new() })]
pub struct ConfigError {
    /// 1-based; 0 when the problem is not tied to a single line.
    pub line: usize,
    pub key: Option<String>,
    pub kind: ConfigErrorKind,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigErrorKind {
    #[error("expected `key = value`")]
    Syntax,
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("`{0}` is set twice")]
    Duplicate(String),
    #[error("malformed value for `{key}`: {reason}")]
    Malformed { key: String, reason: String },
    #[error("`{key}` = {value} is out of range: {reason}")]
    Range { key: String, value: String, reason: &'static str },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl ConfigErrorKind {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Syntax => "syntax",
            Self::UnknownKey(_) => "unknown_key",
            Self::Duplicate(_) => "duplicate_key",
            Self::Malformed { .. } => "malformed_value",
            Self::Range { .. } => "range",
            Self::Invalid(_) => "invalid",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Mode {
    Sampled,
    Analytic,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Sampled => "sampled",
            Self::Analytic => "analytic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sampled" => Some(Self::Sampled),
            "analytic" => Some(Self::Analytic),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RabiConfig {
    pub t_max: f64,
    pub points: usize,
    pub shots: u64,
    pub atoms: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RamseyConfig {
    pub delay_max: f64,
    pub points: usize,
    pub shots: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TomoConfig {
    pub state: PrepState,
    pub shots: u64,
    pub resamples: usize,
    pub likelihood: LikelihoodMode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct T1Config {
    pub t_max: f64,
    pub points: usize,
    pub shots: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct T2Config {
    pub hold_max: f64,
    pub holds: usize,
    pub shots: u64,
    pub fringe_periods: f64,
    pub fringe_points: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub apparatus: ApparatusParams,
    /// rms field fluctuation (mG); carried into reports, not used by the model.
    pub field_noise: f64,
    /// None falls back to the environment, then to 0.
    pub seed: Option<u64>,
    pub mode: Mode,
    pub output: Option<String>,
    pub rabi: RabiConfig,
    pub ramsey: RamseyConfig,
    pub tomo: TomoConfig,
    pub t1: T1Config,
    pub t2: T2Config,
    pub transport_points: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            apparatus: ApparatusParams::default(),
            field_noise: 9.0,
            seed: None,
            mode: Mode::Sampled,
            output: None,
            rabi: RabiConfig { t_max: 25.6e-3, points: 20, shots: 500, atoms: 1 },
            ramsey: RamseyConfig { delay_max: 0.8e-3, points: 20, shots: 1000 },
            tomo: TomoConfig { state: PrepState::A, shots: 200, resamples: 1000, likelihood: LikelihoodMode::Raw },
            t1: T1Config { t_max: 1.5, points: 16, shots: 500 },
            t2: T2Config { hold_max: 0.2, holds: 9, shots: 500, fringe_periods: 5.0, fringe_points: 12 },
            transport_points: 101,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
enum Unit {
    Angular,
    Rate,
    Time,
    Length,
    Field,
    Plain,
}

impl Unit {
    fn scale(self, suffix: &str) -> Option<f64> {
        let s = match (self, suffix) {
            (_, "") => 1.0,
            (Self::Angular, "rad/s") => 1.0,
            (Self::Angular, "Hz") => TAU,
            (Self::Angular, "kHz") => TAU * 1e3,
            (Self::Angular, "MHz") => TAU * 1e6,
            (Self::Angular, "GHz") => TAU * 1e9,
            (Self::Rate, "/s" | "1/s" | "s^-1" | "Hz") => 1.0,
            (Self::Rate, "kHz") => 1e3,
            (Self::Time, "s") => 1.0,
            (Self::Time, "ms") => 1e-3,
            (Self::Time, "us" | "µs") => 1e-6,
            (Self::Time, "ns") => 1e-9,
            (Self::Length, "m") => 1.0,
            (Self::Length, "mm") => 1e-3,
            (Self::Length, "um" | "µm") => 1e-6,
            (Self::Length, "nm") => 1e-9,
            (Self::Field, "mG") => 1.0,
            (Self::Field, "G") => 1e3,
            _ => return None,
        };
        Some(s)
    }

    fn suffix(self) -> &'static str {
        match self {
            Self::Angular => " rad/s",
            Self::Rate => " /s",
            Self::Time => " s",
            Self::Length => " m",
            Self::Field => " mG",
            Self::Plain => "",
        }
    }
}

#[derive(Copy, Clone, Debug)]
enum Range {
    Any,
    Positive,
    NonNegative,
    Probability,
    Symmetric,
}

impl Range {
    fn check(self, v: f64) -> Result<(), &'static str> {
        let ok = match self {
            Self::Any => v.is_finite(),
            Self::Positive => v > 0.0,
            Self::NonNegative => v >= 0.0 && v.is_finite(),
            Self::Probability => (0.0..=1.0).contains(&v),
            Self::Symmetric => (-1.0..=1.0).contains(&v),
        };
        if ok {
            return Ok(());
        }
        Err(match self {
            Self::Any => "must be finite",
            Self::Positive => "must be positive",
            Self::NonNegative => "must be finite and non-negative",
            Self::Probability => "must lie in [0, 1]",
            Self::Symmetric => "must lie in [-1, 1]",
        })
    }
}

/// Split `8 /s`, `3.2ms` or `2.5 kHz` into the number and its unit suffix.
fn split_number(raw: &str) -> (&str, &str) {
    let b = raw.as_bytes();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        let exponent = (c == b'e' || c == b'E')
            && i > 0
            && b.get(i + 1).is_some_and(|n| n.is_ascii_digit() || *n == b'-' || *n == b'+');
        if c.is_ascii_digit() || c == b'.' || c == b'-' || c == b'+' || exponent {
            i += 1;
            if exponent {
                i += 1;
            }
        } else {
            break;
        }
    }
    // "inf" and "NaN" have no leading digits; let the float parser see them whole.
    if i == 0 {
        let end = raw.find(char::is_whitespace).unwrap_or(raw.len());
        return (&raw[..end], raw[end..].trim());
    }
    (&raw[..i], raw[i..].trim())
}

type FieldResult<T> = Result<T, ConfigErrorKind>;

fn malformed(key: &str, reason: impl Into<String>) -> ConfigErrorKind {
    ConfigErrorKind::Malformed { key: key.to_string(), reason: reason.into() }
}

fn real(key: &str, raw: &str, unit: Unit, range: Range) -> FieldResult<f64> {
    let (num, suffix) = split_number(raw);
    let v: f64 = num.parse().map_err(|_| malformed(key, format!("`{raw}` is not a number")))?;
    let scale = unit.scale(suffix).ok_or_else(|| malformed(key, format!("unsupported unit `{suffix}`")))?;
    let v = v * scale;
    range.check(v).map_err(|reason| ConfigErrorKind::Range { key: key.to_string(), value: raw.to_string(), reason })?;
    Ok(v)
}

fn integer(key: &str, raw: &str, min: u64, max: u64) -> FieldResult<u64> {
    let v: u64 = raw.parse().map_err(|_| malformed(key, format!("`{raw}` is not a non-negative integer")))?;
    if v < min || v > max {
        let reason = if min == 0 { "too large" } else { "below the minimum or too large" };
        return Err(ConfigErrorKind::Range { key: key.to_string(), value: raw.to_string(), reason });
    }
    Ok(v)
}

fn boolean(key: &str, raw: &str) -> FieldResult<bool> {
    match raw {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(malformed(key, format!("`{raw}` is not a boolean"))),
    }
}

fn likelihood_str(mode: LikelihoodMode) -> &'static str {
    match mode {
        LikelihoodMode::Raw => "raw",
        LikelihoodMode::Unfolded => "unfolded",
    }
}

pub fn parse_likelihood(s: &str) -> Option<LikelihoodMode> {
    match s {
        "raw" => Some(LikelihoodMode::Raw),
        "unfolded" => Some(LikelihoodMode::Unfolded),
        _ => None,
    }
}

const U32: u64 = u32::MAX as u64;
const USIZE: u64 = 1 << 32;

impl Config {
    /// Set one key from its textual value.
    pub fn set(&mut self, key: &str, raw: &str) -> FieldResult<()> {
        use Range::*;
        use Unit::*;
        let a = &mut self.apparatus;
        match key {
            "cavity.g" => a.cavity.g = real(key, raw, Angular, NonNegative)?,
            "cavity.kappa" => a.cavity.kappa = real(key, raw, Angular, Positive)?,
            "cavity.gamma" => a.cavity.gamma = real(key, raw, Angular, Positive)?,
            "readout.n_emit" => a.readout.n_emit = integer(key, raw, 0, U32)? as u32,
            "readout.p_det" => a.readout.p_det = real(key, raw, Plain, Probability)?,
            "readout.threshold" => a.readout.threshold = integer(key, raw, 1, U32)? as u32,
            "readout.eps_up" => a.readout.eps_up = real(key, raw, Plain, Probability)?,
            "readout.window" => a.readout.window = real(key, raw, Time, Positive)?,
            "relax.gamma_p" => a.relax.gamma_p = real(key, raw, Rate, NonNegative)?,
            "relax.gamma_m" => a.relax.gamma_m = real(key, raw, Rate, NonNegative)?,
            "relax.larmor" => a.relax.larmor = real(key, raw, Angular, Any)?,
            "relax.equilibrium_rz" => a.relax.equilibrium_rz = real(key, raw, Plain, Symmetric)?,
            "rabi_freq" => a.rabi_freq = real(key, raw, Angular, Positive)?,
            "delta_e" => a.delta_e = real(key, raw, Angular, NonNegative)?,
            "atom_lifetime" => a.atom_lifetime = real(key, raw, Time, Positive)?,
            "lattice.wavelength" => a.lattice.wavelength = real(key, raw, Length, Positive)?,
            "lattice.delta0" => a.lattice.delta0 = real(key, raw, Angular, NonNegative)?,
            "lattice.tau_transport" => a.lattice.tau_transport = real(key, raw, Time, Positive)?,
            "polarization_fidelity" => a.polarization_fidelity = real(key, raw, Plain, Probability)?,
            "pulse_relaxation" => a.pulse_relaxation = boolean(key, raw)?,
            "field_noise" => self.field_noise = real(key, raw, Field, NonNegative)?,
            "seed" => self.seed = Some(integer(key, raw, 0, u64::MAX)?),
            "mode" => self.mode = Mode::parse(raw).ok_or_else(|| malformed(key, "expected `sampled` or `analytic`"))?,
            "output" => self.output = Some(raw.to_string()),
            "rabi.t_max" => self.rabi.t_max = real(key, raw, Time, Positive)?,
            "rabi.points" => self.rabi.points = integer(key, raw, 8, USIZE)? as usize,
            "rabi.shots" => self.rabi.shots = integer(key, raw, 1, u64::MAX)?,
            "rabi.atoms" => self.rabi.atoms = integer(key, raw, 1, 2)? as u32,
            "ramsey.delay_max" => self.ramsey.delay_max = real(key, raw, Time, Positive)?,
            "ramsey.points" => self.ramsey.points = integer(key, raw, 8, USIZE)? as usize,
            "ramsey.shots" => self.ramsey.shots = integer(key, raw, 1, u64::MAX)?,
            "tomo.state" => {
                self.tomo.state = raw.parse().map_err(|_| malformed(key, "expected `a`, `b` or `c`"))?
            }
            "tomo.shots" => self.tomo.shots = integer(key, raw, 1, u64::MAX)?,
            "tomo.resamples" => {
                let n = integer(key, raw, 0, USIZE)?;
                if n == 1 {
                    return Err(ConfigErrorKind::Range {
                        key: key.to_string(),
                        value: raw.to_string(),
                        reason: "must be 0 (no bootstrap) or at least 2",
                    });
                }
                self.tomo.resamples = n as usize;
            }
            "tomo.likelihood" => {
                self.tomo.likelihood =
                    parse_likelihood(raw).ok_or_else(|| malformed(key, "expected `raw` or `unfolded`"))?
            }
            "t1.t_max" => self.t1.t_max = real(key, raw, Time, Positive)?,
            "t1.points" => self.t1.points = integer(key, raw, 4, USIZE)? as usize,
            "t1.shots" => self.t1.shots = integer(key, raw, 1, u64::MAX)?,
            "t2.hold_max" => self.t2.hold_max = real(key, raw, Time, Positive)?,
            "t2.holds" => self.t2.holds = integer(key, raw, 4, USIZE)? as usize,
            "t2.shots" => self.t2.shots = integer(key, raw, 1, u64::MAX)?,
            "t2.fringe_periods" => self.t2.fringe_periods = real(key, raw, Plain, Positive)?,
            "t2.fringe_points" => self.t2.fringe_points = integer(key, raw, 8, USIZE)? as usize,
            "transport.points" => self.transport_points = integer(key, raw, 2, USIZE)? as usize,
            _ => return Err(ConfigErrorKind::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Every key with its value in base units, in canonical order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let a = &self.apparatus;
        let real = |v: f64, unit: Unit| format!("{v:?}{}", unit.suffix());
        let mut out = vec![
            ("cavity.g", real(a.cavity.g, Unit::Angular)),
            ("cavity.kappa", real(a.cavity.kappa, Unit::Angular)),
            ("cavity.gamma", real(a.cavity.gamma, Unit::Angular)),
            ("readout.n_emit", a.readout.n_emit.to_string()),
            ("readout.p_det", real(a.readout.p_det, Unit::Plain)),
            ("readout.threshold", a.readout.threshold.to_string()),
            ("readout.eps_up", real(a.readout.eps_up, Unit::Plain)),
            ("readout.window", real(a.readout.window, Unit::Time)),
            ("relax.gamma_p", real(a.relax.gamma_p, Unit::Rate)),
            ("relax.gamma_m", real(a.relax.gamma_m, Unit::Rate)),
            ("relax.larmor", real(a.relax.larmor, Unit::Angular)),
            ("relax.equilibrium_rz", real(a.relax.equilibrium_rz, Unit::Plain)),
            ("rabi_freq", real(a.rabi_freq, Unit::Angular)),
            ("delta_e", real(a.delta_e, Unit::Angular)),
            ("atom_lifetime", real(a.atom_lifetime, Unit::Time)),
            ("lattice.wavelength", real(a.lattice.wavelength, Unit::Length)),
            ("lattice.delta0", real(a.lattice.delta0, Unit::Angular)),
            ("lattice.tau_transport", real(a.lattice.tau_transport, Unit::Time)),
            ("polarization_fidelity", real(a.polarization_fidelity, Unit::Plain)),
            ("pulse_relaxation", a.pulse_relaxation.to_string()),
            ("field_noise", real(self.field_noise, Unit::Field)),
        ];
        if let Some(seed) = self.seed {
            out.push(("seed", seed.to_string()));
        }
        out.push(("mode", self.mode.as_str().to_string()));
        if let Some(path) = &self.output {
            out.push(("output", path.clone()));
        }
        out.extend([
            ("rabi.t_max", real(self.rabi.t_max, Unit::Time)),
            ("rabi.points", self.rabi.points.to_string()),
            ("rabi.shots", self.rabi.shots.to_string()),
            ("rabi.atoms", self.rabi.atoms.to_string()),
            ("ramsey.delay_max", real(self.ramsey.delay_max, Unit::Time)),
            ("ramsey.points", self.ramsey.points.to_string()),
            ("ramsey.shots", self.ramsey.shots.to_string()),
            ("tomo.state", self.tomo.state.label().to_string()),
            ("tomo.shots", self.tomo.shots.to_string()),
            ("tomo.resamples", self.tomo.resamples.to_string()),
            ("tomo.likelihood", likelihood_str(self.tomo.likelihood).to_string()),
            ("t1.t_max", real(self.t1.t_max, Unit::Time)),
            ("t1.points", self.t1.points.to_string()),
            ("t1.shots", self.t1.shots.to_string()),
            ("t2.hold_max", real(self.t2.hold_max, Unit::Time)),
            ("t2.holds", self.t2.holds.to_string()),
            ("t2.shots", self.t2.shots.to_string()),
            ("t2.fringe_periods", real(self.t2.fringe_periods, Unit::Plain)),
            ("t2.fringe_points", self.t2.fringe_points.to_string()),
            ("transport.points", self.transport_points.to_string()),
        ]);
        out
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Cross-field checks that need the whole configuration.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.apparatus.validate().map(|_| ()).map_err(|e| ConfigError {
            line: 0,
            key: None,
            kind: ConfigErrorKind::Invalid(e.to_string()),
        })
    }
}

/// Parse configuration text. Missing keys keep their defaults.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let mut cfg = Config::default();
    let mut seen = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |key: Option<&str>, kind| ConfigError { line: line_no, key: key.map(str::to_string), kind };
        let (key, value) = content.split_once('=').ok_or_else(|| err(None, ConfigErrorKind::Syntax))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(err(Some(key).filter(|k| !k.is_empty()), ConfigErrorKind::Syntax));
        }
        if !seen.insert(key.to_string()) {
            return Err(err(Some(key), ConfigErrorKind::Duplicate(key.to_string())));
        }
        cfg.set(key, value).map_err(|kind| err(Some(key), kind))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

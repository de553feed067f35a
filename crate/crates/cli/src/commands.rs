use std::fs;
use std::io::Write as _;
use std::path::{ Path, PathBuf };
use std::str::FromStr;

use nucspin_core::experiments::{
    gamma_m_from, operation_budget, peak_velocity, run_rabi, run_ramsey, run_state_prep_tomography, run_t1,
    run_t2, t2_relation, transport_displacement, transport_profile, FringeDesign, ParamWarning, Sampling,
};
use nucspin_core::readout::{ cavity_enhanced_linewidth, detection_efficiency };
use nucspin_core::tomography::TomographyOptions;
use serde::Serialize;
use serde_json::{ json, Value };
use sha2::{ Digest, Sha256 };

use crate::config::{ Config, Mode };
use crate::format::{ series_csv, transport_csv };
use crate::CliError;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Command {
    Rabi,
    Ramsey,
    Tomo,
    T1,
    T2,
    Transport,
    Report,
}

impl Command {
    pub const ALL: [Command; 7] =
        [Command::Rabi, Command::Ramsey, Command::Tomo, Command::T1, Command::T2, Command::Transport, Command::Report];

    pub fn name(self) -> &'static str {
        match self {
            Self::Rabi => "rabi",
            Self::Ramsey => "ramsey",
            Self::Tomo => "tomo",
            Self::T1 => "t1",
            Self::T2 => "t2",
            Self::Transport => "transport",
            Self::Report => "report",
        }
    }

    /// Config key that `--shots` overrides.
    pub fn shots_key(self) -> Option<&'static str> {
        match self {
            Self::Rabi => Some("rabi.shots"),
            Self::Ramsey => Some("ramsey.shots"),
            Self::Tomo => Some("tomo.shots"),
            Self::T1 => Some("t1.shots"),
            Self::T2 => Some("t2.shots"),
            _ => None,
        }
    }

    /// Config key that `--points` overrides.
    pub fn points_key(self) -> Option<&'static str> {
        match self {
            Self::Rabi => Some("rabi.points"),
            Self::Ramsey => Some("ramsey.points"),
            Self::T1 => Some("t1.points"),
            Self::T2 => Some("t2.holds"),
            Self::Transport => Some("transport.points"),
            _ => None,
        }
    }
}

impl FromStr for Command {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Self::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| CliError::UnknownCommand(s.to_string()))
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

/// Finished output files, primary first.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifacts {
    pub files: Vec<(Format, String)>,
}

fn linspace(max: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| if k + 1 == n { max } else { max * k as f64 / (n - 1) as f64 }).collect()
}

/// Seed actually used: the config value, or 0.
pub fn effective_seed(cfg: &Config) -> u64 { cfg.seed.unwrap_or(0) }

/// The config hash leaves out the output path, so the same run written to two
/// places reports the same provenance.
pub fn provenance(command: Command, cfg: &Config) -> Value {
    let hashed = Config { output: None, ..cfg.clone() };
    let hash = Sha256::digest(hashed.render().as_bytes());
    let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
    json!({
        "tool": "nucspin-lab",
        "command": command.name(),
        "mode": cfg.mode.as_str(),
        "seed": effective_seed(cfg),
        "config_sha256": hex,
        "versions": {
            "nucspin-core": nucspin_core::VERSION,
            "nucspin-cli": env!("CARGO_PKG_VERSION"),
        },
    })
}

fn report<T: Serialize>(command: Command, cfg: &Config, result: &T) -> Result<String, CliError> {
    let doc = json!({ "provenance": provenance(command, cfg), "result": result });
    let mut s = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Serialize(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn sampling(cfg: &Config, shots: u64) -> Sampling {
    match cfg.mode {
        Mode::Sampled => Sampling::Shots(shots),
        Mode::Analytic => Sampling::Analytic,
    }
}

#[derive(Serialize)]
struct Calculators {
    linewidth: f64,
    state_selectivity: f64,
    warnings: Vec<ParamWarning>,
    detection_efficiency: f64,
    t1_from_gamma_p: Option<f64>,
    t2_from_rates: Option<f64>,
    gamma_m_recovered: Option<f64>,
    operation_budget: Option<f64>,
    transport_displacement: f64,
    peak_velocity: f64,
    field_noise_mg: f64,
}

fn calculators(cfg: &Config) -> Result<Calculators, CliError> {
    let a = &cfg.apparatus;
    let warnings = a.validate()?;
    let linewidth = cavity_enhanced_linewidth(&a.cavity);
    let t1 = (a.relax.gamma_p > 0.0).then(|| 1.0 / a.relax.gamma_p);
    let t2 = t1.map(|t1| t2_relation(t1, a.relax.gamma_m)).transpose()?;
    let gamma_m = match (t1, t2) {
        (Some(t1), Some(t2)) => Some(gamma_m_from(t1, t2)?.gamma_m),
        _ => None,
    };
    let budget = t2.map(|t2| operation_budget(t2, a.readout.window)).transpose()?;
    Ok(Calculators {
        linewidth,
        state_selectivity: a.delta_e / linewidth,
        warnings,
        detection_efficiency: detection_efficiency(a.readout.n_emit, a.readout.p_det, a.readout.threshold),
        t1_from_gamma_p: t1,
        t2_from_rates: t2,
        gamma_m_recovered: gamma_m,
        operation_budget: budget,
        transport_displacement: transport_displacement(&a.lattice),
        peak_velocity: peak_velocity(&a.lattice),
        field_noise_mg: cfg.field_noise,
    })
}

/// Run one command in memory. Parallel work runs on the current rayon pool.
pub fn execute(command: Command, cfg: &Config) -> Result<Artifacts, CliError> {
    let a = &cfg.apparatus;
    let seed = effective_seed(cfg);
    let files = match command {
        Command::Rabi => {
            let grid = linspace(cfg.rabi.t_max, cfg.rabi.points);
            let run = run_rabi(a, &grid, sampling(cfg, cfg.rabi.shots), seed, cfg.rabi.atoms)?;
            vec![(Format::Csv, series_csv(&run.series)), (Format::Json, report(command, cfg, &run)?)]
        }
        Command::Ramsey => {
            let grid = linspace(cfg.ramsey.delay_max, cfg.ramsey.points);
            let run = run_ramsey(a, &grid, sampling(cfg, cfg.ramsey.shots), seed)?;
            vec![(Format::Csv, series_csv(&run.series)), (Format::Json, report(command, cfg, &run)?)]
        }
        Command::T1 => {
            let grid = linspace(cfg.t1.t_max, cfg.t1.points);
            let run = run_t1(a, &grid, sampling(cfg, cfg.t1.shots), seed)?;
            vec![(Format::Csv, series_csv(&run.run.series)), (Format::Json, report(command, cfg, &run)?)]
        }
        Command::T2 => {
            let holds = linspace(cfg.t2.hold_max, cfg.t2.holds);
            let design = FringeDesign { periods: cfg.t2.fringe_periods, points: cfg.t2.fringe_points };
            let run = run_t2(a, &holds, design, sampling(cfg, cfg.t2.shots), seed)?;
            vec![(Format::Csv, series_csv(&run.run.series)), (Format::Json, report(command, cfg, &run)?)]
        }
        Command::Tomo => {
            if cfg.mode == Mode::Analytic {
                return Err(CliError::Usage("tomo has no analytic mode; counts are always sampled".into()));
            }
            let opts = TomographyOptions { mode: cfg.tomo.likelihood, n_resamples: cfg.tomo.resamples, ..Default::default() };
            let run = run_state_prep_tomography(a, cfg.tomo.state, cfg.tomo.shots, seed, &opts)?;
            vec![(Format::Json, report(command, cfg, &run)?)]
        }
        Command::Transport => {
            let profile = transport_profile(&a.lattice, cfg.transport_points)?;
            vec![(Format::Csv, transport_csv(&profile))]
        }
        Command::Report => vec![(Format::Json, report(command, cfg, &calculators(cfg)?)?)],
    };
    Ok(Artifacts { files })
}

/// Path for each artifact: the primary goes to `out`, the others beside it
/// with their own extension.
pub fn artifact_paths(out: &Path, artifacts: &Artifacts) -> Vec<PathBuf> {
    artifacts
        .files
        .iter()
        .enumerate()
        .map(|(i, (fmt, _))| if i == 0 { out.to_path_buf() } else { out.with_extension(fmt.extension()) })
        .collect()
}

/// Run `command` and write its outputs. Without an output path only the
/// primary artifact is written, to stdout. Returns the files written.
pub fn dispatch(command: Command, cfg: &Config) -> Result<Vec<PathBuf>, CliError> {
    let artifacts = execute(command, cfg)?;
    match &cfg.output {
        Some(out) => {
            let paths = artifact_paths(Path::new(out), &artifacts);
            for (path, (_, body)) in paths.iter().zip(&artifacts.files) {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
                }
                fs::write(path, body).map_err(|e| CliError::io(path, e))?;
            }
            Ok(paths)
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(artifacts.files[0].1.as_bytes()).map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
            Ok(Vec::new())
        }
    }
}

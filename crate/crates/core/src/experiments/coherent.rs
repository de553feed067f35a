use std::f64::consts::{ FRAC_1_SQRT_2, FRAC_PI_2, TAU };
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{ Deserialize, Serialize };

use super::*;
use crate::rng::label;
use crate::tomography::{ standard_bases, tomography_report, MeasurementRecord, TomographyOptions, TomographyResult };

/// Rabi flopping from the pumped state: drive for each t in `t_grid`, read out
/// `n_atoms` atoms and fit a sinusoid.
pub fn run_rabi(
    params: &ApparatusParams,
    t_grid: &[f64],
    sampling: Sampling,
    seed: u64,
    n_atoms: u32,
) -> ExperimentResult<ExperimentRun> {
    params.validate()?;
    sampling.validate()?;
    check_grid(t_grid)?;
    if !(1..=2).contains(&n_atoms) {
        return Err(ExperimentError::InvalidInput("n_atoms must be 1 or 2"));
    }
    let rho0 = params.prepared()?;
    let points = t_grid.par_iter()
        .enumerate()
        .map(|(i, &t)| {
            let pulse = PulseSegment::RfPulse { rabi_freq: params.rabi_freq, phase: 0.0, detuning: 0.0, duration: t };
            let rho = params.evolve(&rho0, &pulse)?;
            measure(params, &rho, n_atoms, 1.0, sampling, seed, &[label::RABI, i as u64], t)
        })
        .collect::<ExperimentResult<Vec<_>>>()?;

    let mut run = ExperimentRun::new(Experiment::Rabi, seed, sampling);
    let fringe = analyze_fringe(&points, None, sampling)?;
    let f = fringe.fit.param("f")?;
    run.derived.insert("visibility".into(), fringe.visibility);
    run.derived.insert("frequency".into(), Quantity { value: f, std_error: fringe.fit.std_error("f")? });
    run.derived.insert("rabi_freq".into(), Quantity {
        value: TAU * f,
        std_error: fringe.fit.std_error("f")?.map(|s| TAU * s),
    });
    finish_fringe(&mut run, fringe);
    run.series.push(Series::new("clicks", points));
    Ok(run)
}

/// π/2 – delay – π/2 with both pulses about x; the fringe oscillates at the
/// Larmor frequency.
pub fn run_ramsey(
    params: &ApparatusParams,
    delay_grid: &[f64],
    sampling: Sampling,
    seed: u64,
) -> ExperimentResult<ExperimentRun> {
    params.validate()?;
    sampling.validate()?;
    check_grid(delay_grid)?;
    if !(params.rabi_freq > 0.0) {
        return Err(ExperimentError::InvalidParam { name: "rabi_freq", value: params.rabi_freq });
    }
    let rho0 = params.prepared()?;
    let half = PulseSegment::rotation(params.rabi_freq, 0.0, FRAC_PI_2);
    let points = delay_grid.par_iter()
        .enumerate()
        .map(|(i, &delay)| {
            let seq = [half, PulseSegment::FreeEvolution { duration: delay }, half];
            let rho = params.evolve_sequence(&rho0, &seq)?;
            measure(params, &rho, 1, 1.0, sampling, seed, &[label::RAMSEY, i as u64], delay)
        })
        .collect::<ExperimentResult<Vec<_>>>()?;

    let mut run = ExperimentRun::new(Experiment::Ramsey, seed, sampling);
    let hint = params.relax.larmor.abs() / TAU;
    let fringe = analyze_fringe(&points, (hint > 0.0).then_some(hint), sampling)?;
    run.derived.insert("visibility".into(), fringe.visibility);
    run.derived.insert("frequency".into(), Quantity {
        value: fringe.fit.param("f")?,
        std_error: fringe.fit.std_error("f")?,
    });
    finish_fringe(&mut run, fringe);
    run.series.push(Series::new("clicks", points));
    Ok(run)
}

fn finish_fringe(run: &mut ExperimentRun, fringe: FringeAnalysis) {
    run.derived.insert("residual_rms".into(), Quantity::exact(fringe.residual_rms));
    if let Some(chi2) = fringe.reduced_chi2 {
        run.derived.insert("reduced_chi2".into(), Quantity::exact(chi2));
    }
    if !fringe.is_sinusoidal() {
        run.flag(RunFlag::NonSinusoidal);
    }
    if !fringe.is_significant() {
        run.flag(RunFlag::InsignificantFringe);
    }
    run.fits.insert("sinusoid".into(), fringe.fit);
}

/// Free precession between the π/2 pulse and tomography for state (b).
pub const STATE_B_DELAY: f64 = 0.1e-3;

/// The three states reconstructed by tomography.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrepState {
    /// π/2 pulse about −y: (|↑⟩ + |↓⟩)/√2.
    A,
    /// As (a), then a quarter Larmor turn: (|↑⟩ + i|↓⟩)/√2.
    B,
    /// No pulse: |↓⟩.
    C,
}

impl PrepState {
    pub const ALL: [PrepState; 3] = [PrepState::A, PrepState::B, PrepState::C];

    pub fn target(self) -> PureState {
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        match self {
            Self::A => PureState { up: h, down: h },
            Self::B => PureState { up: h, down: C64::new(0.0, FRAC_1_SQRT_2) },
            Self::C => PureState::down(),
        }
    }

    pub fn sequence(self, rabi_freq: f64) -> Vec<PulseSegment> {
        let half = PulseSegment::rotation(rabi_freq, -FRAC_PI_2, FRAC_PI_2);
        match self {
            Self::A => vec![half],
            Self::B => vec![half, PulseSegment::FreeEvolution { duration: STATE_B_DELAY }],
            Self::C => Vec::new(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::A => "a",
            Self::B => "b",
            Self::C => "c",
        }
    }
}

impl FromStr for PrepState {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(Self::A),
            "b" => Ok(Self::B),
            "c" => Ok(Self::C),
            _ => Err(ExperimentError::InvalidInput("state must be one of a, b, c")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatePrepRun {
    pub state: PrepState,
    pub seed: u64,
    pub shots_per_basis: u64,
    pub target: PureState,
    /// The state handed to the measurement stage.
    pub prepared: DensityMatrix,
    pub result: TomographyResult,
}

/// Prepare one of the states (a), (b), (c), measure it along x, y and z and
/// reconstruct it. The bootstrap seed in `opts` is replaced by `seed`.
pub fn run_state_prep_tomography(
    params: &ApparatusParams,
    state: PrepState,
    shots_per_basis: u64,
    seed: u64,
    opts: &TomographyOptions,
) -> ExperimentResult<StatePrepRun> {
    params.validate()?;
    Sampling::Shots(shots_per_basis).validate()?;
    if !(params.rabi_freq > 0.0) {
        return Err(ExperimentError::InvalidParam { name: "rabi_freq", value: params.rabi_freq });
    }
    let prepared = params.evolve_sequence(&params.prepared()?, &state.sequence(params.rabi_freq))?;
    let records = standard_bases(params.rabi_freq)
        .iter()
        .map(|basis| {
            let rho = params.evolve_sequence(&prepared, &basis.prefix)?;
            let path = [label::TOMOGRAPHY, basis.label.index() as u64];
            let mut rng = point_stream(seed, &path);
            let (_, clicks) = sample_point(&rho, &params.readout, 1, 1.0, shots_per_basis, &mut rng);
            Ok(MeasurementRecord::new(basis.label, shots_per_basis, clicks)?)
        })
        .collect::<ExperimentResult<Vec<_>>>()?;
    let target = state.target();
    let opts = TomographyOptions { seed, ..*opts };
    let result = tomography_report(&records, &params.readout, &target, &opts)?;
    Ok(StatePrepRun { state, seed, shots_per_basis, target, prepared, result })
}

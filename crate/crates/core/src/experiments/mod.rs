//! Scripted virtual experiments built from the spin, readout, tomography and
//! fitting modules, plus closed-form calculators for rate relations and
//! lattice transport.

use std::collections::BTreeMap;
use std::f64::consts::{ PI, TAU };

use rand::Rng;
use serde::{ Deserialize, Serialize };
use thiserror::Error;

use crate::fitting::{ FitError, FitResult };
use crate::readout::{
    self, cavity_enhanced_linewidth, simulate_multi_atom_readout, CavityParams, ReadoutError, ReadoutParams,
};
use crate::rng::Stream;
use crate::spin::{
    self, apply_rotation, free_evolve, rf_pulse_propagate, DensityMatrix, IntegratorOptions, PulseSegment,
    PureState, RelaxationParams, SpinError,
};
use crate::tomography::TomographyError;

mod coherent;
mod relations;
mod relaxation;
mod transport;

pub use coherent::{ run_rabi, run_ramsey, run_state_prep_tomography, PrepState, StatePrepRun, STATE_B_DELAY };
pub use relations::{ gamma_m_from, operation_budget, t2_relation, DephasingEstimate };
pub use relaxation::{ run_t1, run_t2, FringeDesign, T1Run, T2Run };
pub use transport::{ peak_velocity, transport_displacement, transport_profile, TransportPoint };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),

    #[error("invalid parameter {name}: {value}")]
    InvalidParam { name: &'static str, value: f64 },

    #[error(transparent)]
    Spin(#[from] SpinError),

    #[error(transparent)]
    Readout(#[from] ReadoutError),

    #[error(transparent)]
    Tomography(#[from] TomographyError),

    #[error(transparent)]
    Fit(#[from] FitError),
}

pub type ExperimentResult<T> = Result<T, ExperimentError>;

/// Moving-lattice transport settings.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    /// Lattice wavelength λ (m).
    pub wavelength: f64,
    /// Peak frequency offset δ₀ between the beams (rad/s).
    pub delta0: f64,
    /// Transport duration τ (s).
    pub tau_transport: f64,
}

impl Default for LatticeParams {
    fn default() -> Self {
        Self { wavelength: 532e-9, delta0: TAU * 700e3, tau_transport: 0.1 }
    }
}

impl LatticeParams {
    pub fn validate(&self) -> ExperimentResult<()> {
        positive("lattice.wavelength", self.wavelength)?;
        non_negative("lattice.delta0", self.delta0)?;
        positive("lattice.tau_transport", self.tau_transport)
    }
}

/// Everything needed to run the virtual apparatus.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApparatusParams {
    pub cavity: CavityParams,
    pub readout: ReadoutParams,
    pub relax: RelaxationParams,
    /// Ω (rad/s).
    pub rabi_freq: f64,
    /// Excited-state Zeeman splitting (rad/s); only used for validation.
    pub delta_e: f64,
    /// Trap lifetime τ of the atom in the cavity (s).
    pub atom_lifetime: f64,
    pub lattice: LatticeParams,
    /// Probability that optical pumping leaves the spin in |↓⟩.
    pub polarization_fidelity: f64,
    /// Apply relaxation during RF pulses as well as during free evolution.
    #[serde(default)]
    pub pulse_relaxation: bool,
}

impl Default for ApparatusParams {
    fn default() -> Self {
        Self {
            cavity: CavityParams::default(),
            readout: ReadoutParams::default(),
            relax: RelaxationParams::default(),
            rabi_freq: PI / (2.0 * 3.2e-3),
            delta_e: TAU * 60e6,
            atom_lifetime: 0.44,
            lattice: LatticeParams::default(),
            polarization_fidelity: 1.0,
            pulse_relaxation: false,
        }
    }
}

/// Minimum δe/Γ below which readout is no longer considered state selective.
pub const STATE_SELECTIVITY_RATIO: f64 = 10.0;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ParamWarning {
    /// δe is not much larger than the cavity-enhanced linewidth.
    WeakStateSelectivity { ratio: f64 },
}

impl ApparatusParams {
    /// Check every range invariant; soft problems come back as warnings.
    pub fn validate(&self) -> ExperimentResult<Vec<ParamWarning>> {
        self.cavity.validate()?;
        self.readout.validate()?;
        self.relax.validate()?;
        self.lattice.validate()?;
        non_negative("rabi_freq", self.rabi_freq)?;
        non_negative("delta_e", self.delta_e)?;
        positive("atom_lifetime", self.atom_lifetime)?;
        if !(0.0..=1.0).contains(&self.polarization_fidelity) {
            return Err(ExperimentError::InvalidParam {
                name: "polarization_fidelity",
                value: self.polarization_fidelity,
            });
        }
        let mut warnings = Vec::new();
        let ratio = self.delta_e / cavity_enhanced_linewidth(&self.cavity);
        if !(ratio >= STATE_SELECTIVITY_RATIO) {
            warnings.push(ParamWarning::WeakStateSelectivity { ratio });
        }
        Ok(warnings)
    }

    /// Probability that the atom is still trapped after `t` seconds.
    pub fn survival(&self, t: f64) -> f64 {
        if self.atom_lifetime.is_infinite() { 1.0 } else { (-t / self.atom_lifetime).exp() }
    }

    fn pulse_relax(&self) -> RelaxationParams {
        if self.pulse_relaxation { self.relax } else { RelaxationParams::coherent(self.relax.larmor) }
    }

    /// Apply one segment. Resonant pulses without relaxation are exact
    /// rotations; everything else goes through the integrator or the exact
    /// free-evolution propagator.
    pub fn evolve(&self, rho: &DensityMatrix, seg: &PulseSegment) -> ExperimentResult<DensityMatrix> {
        seg.validate()?;
        let out = match *seg {
            PulseSegment::RfPulse { rabi_freq, phase, detuning, duration } if detuning == 0.0 && !self.pulse_relaxation => {
                apply_rotation(rho, [phase.cos(), phase.sin(), 0.0], rabi_freq * duration)?
            }
            PulseSegment::RfPulse { .. } => {
                rf_pulse_propagate(rho, seg, &self.pulse_relax(), &IntegratorOptions::default())?
            }
            PulseSegment::FreeEvolution { duration } => free_evolve(rho, duration, &self.relax)?,
        };
        Ok(out)
    }

    pub fn evolve_sequence(&self, rho: &DensityMatrix, seq: &[PulseSegment]) -> ExperimentResult<DensityMatrix> {
        seq.iter().try_fold(*rho, |r, seg| self.evolve(&r, seg))
    }

    pub(crate) fn prepared(&self) -> ExperimentResult<DensityMatrix> {
        Ok(spin::initialize_state(self.polarization_fidelity)?)
    }
}

fn positive(name: &'static str, value: f64) -> ExperimentResult<()> {
    if value > 0.0 && !value.is_nan() {
        Ok(())
    } else {
        Err(ExperimentError::InvalidParam { name, value })
    }
}

fn non_negative(name: &'static str, value: f64) -> ExperimentResult<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ExperimentError::InvalidParam { name, value })
    }
}

/// Sampled shots per grid point, or exact expectation values.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    Shots(u64),
    Analytic,
}

impl Sampling {
    fn validate(self) -> ExperimentResult<()> {
        match self {
            Sampling::Shots(0) => Err(ExperimentError::InvalidInput("shots must be at least 1")),
            _ => Ok(()),
        }
    }
}

/// One grid point. In analytic mode the counts are zero and `value` is the
/// expectation.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub shots: u64,
    /// Shots in which the atom was still trapped at readout.
    pub survivors: u64,
    pub clicks: u64,
    pub value: f64,
    pub error: Option<f64>,
}

impl Point {
    fn expected(x: f64, value: f64) -> Self {
        Self { x, shots: 0, survivors: 0, clicks: 0, value, error: None }
    }

    fn derived(x: f64, value: f64, error: Option<f64>) -> Self {
        Self { x, shots: 0, survivors: 0, clicks: 0, value, error }
    }

    /// Click fraction over all shots.
    fn counted(x: f64, shots: u64, survivors: u64, clicks: u64) -> Self {
        let value = clicks as f64 / shots as f64;
        Self { x, shots, survivors, clicks, value, error: Some(binomial_sigma(value, shots)) }
    }
}

fn binomial_sigma(p: f64, n: u64) -> f64 {
    let n = n as f64;
    (p * (1.0 - p) / n).sqrt().max(0.5 / n)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub points: Vec<Point>,
}

impl Series {
    fn new(name: impl Into<String>, points: Vec<Point>) -> Self { Self { name: name.into(), points } }

    pub fn x(&self) -> Vec<f64> { self.points.iter().map(|p| p.x).collect() }

    pub fn values(&self) -> Vec<f64> { self.points.iter().map(|p| p.value).collect() }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub value: f64,
    pub std_error: Option<f64>,
}

impl Quantity {
    pub fn exact(value: f64) -> Self { Self { value, std_error: None } }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Rabi,
    Ramsey,
    T1,
    T2,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunFlag {
    /// The fringe is not described by a single sinusoid.
    NonSinusoidal,
    /// A fringe amplitude is not significant against its error.
    InsignificantFringe,
    /// The population does not decay, so T1 cannot be determined.
    T1Unidentifiable,
    /// The visibility does not decay, so T2 cannot be determined.
    T2Unidentifiable,
}

/// Full record of one virtual experiment: raw series, fits and derived numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRun {
    pub experiment: Experiment,
    pub seed: u64,
    pub sampling: Sampling,
    pub series: Vec<Series>,
    pub fits: BTreeMap<String, FitResult>,
    pub derived: BTreeMap<String, Quantity>,
    pub flags: Vec<RunFlag>,
}

impl ExperimentRun {
    fn new(experiment: Experiment, seed: u64, sampling: Sampling) -> Self {
        Self {
            experiment,
            seed,
            sampling,
            series: Vec::new(),
            fits: BTreeMap::new(),
            derived: BTreeMap::new(),
            flags: Vec::new(),
        }
    }

    pub fn series(&self, name: &str) -> Option<&Series> { self.series.iter().find(|s| s.name == name) }

    pub fn derived(&self, name: &str) -> Option<Quantity> { self.derived.get(name).copied() }

    pub fn has_flag(&self, flag: RunFlag) -> bool { self.flags.contains(&flag) }

    fn flag(&mut self, flag: RunFlag) {
        if !self.flags.contains(&flag) {
            self.flags.push(flag);
        }
    }
}

/// Click count for `shots` readouts of `k` atoms in state `rho`, each atom
/// surviving independently with probability `survival`. Lost atoms never
/// click. Returns (survivors, clicks); survivors counts shots in which every
/// atom was still present.
fn sample_point<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    rp: &ReadoutParams,
    k: u32,
    survival: f64,
    shots: u64,
    rng: &mut R,
) -> (u64, u64) {
    let (mut survivors, mut clicks) = (0, 0);
    for _ in 0..shots {
        if survival < 1.0 && !(rng.random::<f64>() < survival) {
            continue;
        }
        survivors += 1;
        if simulate_multi_atom_readout(rho, k, rp, rng) {
            clicks += 1;
        }
    }
    (survivors, clicks)
}

fn expected_clicks(rho: &DensityMatrix, rp: &ReadoutParams, k: u32) -> ExperimentResult<f64> {
    Ok(readout::multi_atom_click_probability(k, rho.p_down().clamp(0.0, 1.0), rp)?)
}

fn check_grid(grid: &[f64]) -> ExperimentResult<()> {
    if grid.is_empty() {
        return Err(ExperimentError::InvalidInput("grid is empty"));
    }
    if grid.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(ExperimentError::InvalidInput("grid values must be finite and non-negative"));
    }
    Ok(())
}

fn point_stream(seed: u64, path: &[u64]) -> Stream { crate::rng::stream(seed, path) }

/// Read out `k` atoms in `rho` at one grid point, either by sampling on the
/// stream `(seed, path)` or exactly.
#[allow(clippy::too_many_arguments)]
fn measure(
    params: &ApparatusParams,
    rho: &DensityMatrix,
    k: u32,
    survival: f64,
    sampling: Sampling,
    seed: u64,
    path: &[u64],
    x: f64,
) -> ExperimentResult<Point> {
    match sampling {
        Sampling::Analytic => Ok(Point::expected(x, survival * expected_clicks(rho, &params.readout, k)?)),
        Sampling::Shots(n) => {
            let mut rng = point_stream(seed, path);
            let (survivors, clicks) = sample_point(rho, &params.readout, k, survival, n, &mut rng);
            Ok(Point::counted(x, n, survivors, clicks))
        }
    }
}

/// Reduced χ² above which a sampled fringe counts as non-sinusoidal.
pub const SINUSOID_GATE_CHI2: f64 = 3.0;
/// RMS residual above which an analytic fringe counts as non-sinusoidal.
pub const SINUSOID_GATE_RMS: f64 = 1e-6;

struct FringeAnalysis {
    fit: FitResult,
    visibility: Quantity,
    residual_rms: f64,
    reduced_chi2: Option<f64>,
}

fn sinusoid_at(fit: &FitResult, t: f64) -> f64 {
    let p = &fit.params;
    p[3] + p[0] * (TAU * p[1] * t + p[2]).cos()
}

/// Sinusoid fit of a fringe, its visibility and goodness of fit.
fn analyze_fringe(points: &[Point], hint: Option<f64>, sampling: Sampling) -> ExperimentResult<FringeAnalysis> {
    let t: Vec<f64> = points.iter().map(|p| p.x).collect();
    let y: Vec<f64> = points.iter().map(|p| p.value).collect();
    let data = crate::fitting::Dataset::new(t, y)?;
    let mut fit = crate::fitting::fit_sinusoid(&data, hint)?;
    if let Sampling::Shots(_) = sampling {
        // Refit with binomial sigmas of the first model so the fit and the χ²
        // gate below weight points the same way.
        let sigma = points.iter().map(|p| binomial_sigma(sinusoid_at(&fit, p.x).clamp(0.0, 1.0), p.survivors.max(1))).collect();
        let f = fit.param("f")?;
        fit = crate::fitting::fit_sinusoid(&data.with_sigma(sigma)?, Some(f))?;
    }
    let vis = crate::fitting::visibility(&fit)?;
    let residuals: Vec<f64> = points.iter().map(|p| p.value - sinusoid_at(&fit, p.x)).collect();
    let residual_rms = (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt();
    let dof = points.len().saturating_sub(4);
    let reduced_chi2 = match sampling {
        Sampling::Shots(_) if dof > 0 => {
            let chi2: f64 = points.iter()
                .zip(&residuals)
                .map(|(p, r)| {
                    let model = sinusoid_at(&fit, p.x).clamp(0.0, 1.0);
                    (r / binomial_sigma(model, p.survivors.max(1))).powi(2)
                })
                .sum();
            Some(chi2 / dof as f64)
        }
        _ => None,
    };
    Ok(FringeAnalysis {
        visibility: Quantity { value: vis.value, std_error: vis.std_error },
        fit,
        residual_rms,
        reduced_chi2,
    })
}

impl FringeAnalysis {
    fn is_sinusoidal(&self) -> bool {
        match self.reduced_chi2 {
            Some(chi2) => chi2 <= SINUSOID_GATE_CHI2,
            None => self.residual_rms <= SINUSOID_GATE_RMS,
        }
    }

    fn is_significant(&self) -> bool {
        !self.fit.has_warning(crate::fitting::FitWarning::LowSignificance)
    }
}

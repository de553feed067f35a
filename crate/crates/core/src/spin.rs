//! Qubit state representation and evolution under RF drive, Larmor precession
//! and phenomenological Bloch relaxation.
//!
//! Conventions: basis ordering is (|↑⟩, |↓⟩), and the Bloch vector is defined
//! through ρ = (I + r·σ)/2, so |↑⟩ sits at rz = +1 and |↓⟩ at rz = −1. All
//! rotations are right-handed about their axis.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{ Deserialize, Serialize };
use thiserror::Error;

/// Slack allowed on |r| ≤ 1 before a Bloch vector is considered unphysical.
pub const POSITIVITY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpinError {
    #[error("probability {0} is outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("rotation axis is not a unit vector (|n| = {0})")]
    NonUnitAxis(f64),

    #[error("target state is not normalized (⟨ψ|ψ⟩ = {0})")]
    Unnormalized(f64),

    #[error("Bloch vector has length {0} > 1")]
    Unphysical(f64),

    #[error("invalid pulse segment: {0}")]
    InvalidSegment(&'static str),

    #[error("invalid relaxation parameters: {0}")]
    InvalidRelaxation(&'static str),

    #[error("segment of {duration} s needs {needed} integrator steps (limit {limit})")]
    StepUnderflow { duration: f64, needed: u64, limit: u64 },
}

pub type SpinResult<T> = Result<T, SpinError>;

/// A 2×2 Hermitian, unit-trace, positive semidefinite matrix, stored as its
/// Bloch vector.
///
/// Storing only `r` keeps Hermiticity and unit trace exact; positivity is the
/// single constraint checked at construction.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 3]", try_from = "[f64; 3]")]
pub struct DensityMatrix {
    r: [f64; 3],
}

impl From<DensityMatrix> for [f64; 3] {
    fn from(rho: DensityMatrix) -> Self { rho.r }
}

impl TryFrom<[f64; 3]> for DensityMatrix {
    type Error = SpinError;

    fn try_from(r: [f64; 3]) -> SpinResult<Self> { Self::from_bloch(r) }
}

impl DensityMatrix {
    pub fn from_bloch(r: [f64; 3]) -> SpinResult<Self> {
        let len = norm(r);
        if !len.is_finite() || len > 1.0 + POSITIVITY_TOL {
            return Err(SpinError::Unphysical(len));
        }
        Ok(Self { r })
    }

    /// Build from the matrix elements ρ↑↑, ρ↓↓ and the coherence ρ↑↓.
    pub fn from_elements(p_up: f64, p_down: f64, coherence: C64) -> SpinResult<Self> {
        let trace = p_up + p_down;
        if (trace - 1.0).abs() > 1e-12 {
            return Err(SpinError::InvalidSegment("density matrix trace must be 1"));
        }
        Self::from_bloch([2.0 * coherence.re, -2.0 * coherence.im, p_up - p_down])
    }

    pub fn up() -> Self { Self { r: [0.0, 0.0, 1.0] } }

    pub fn down() -> Self { Self { r: [0.0, 0.0, -1.0] } }

    pub fn maximally_mixed() -> Self { Self { r: [0.0; 3] } }

    pub fn bloch(&self) -> [f64; 3] { self.r }

    pub fn p_up(&self) -> f64 { 0.5 * (1.0 + self.r[2]) }

    pub fn p_down(&self) -> f64 { 0.5 * (1.0 - self.r[2]) }

    /// The off-diagonal element ρ↑↓ = ⟨↑|ρ|↓⟩.
    pub fn coherence(&self) -> C64 { C64::new(0.5 * self.r[0], -0.5 * self.r[1]) }

    pub fn trace(&self) -> f64 { self.p_up() + self.p_down() }

    /// Matrix elements in (|↑⟩, |↓⟩) ordering.
    pub fn matrix(&self) -> [[C64; 2]; 2] {
        let c = self.coherence();
        [
            [C64::from(self.p_up()), c],
            [c.conj(), C64::from(self.p_down())],
        ]
    }

    /// Eigenvalues (1 ∓ |r|)/2 in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let len = norm(self.r);
        [0.5 * (1.0 - len), 0.5 * (1.0 + len)]
    }

    pub fn purity(&self) -> f64 { purity(self) }

    /// Trace distance ½‖ρ − σ‖₁, which for qubits is half the Bloch distance.
    pub fn trace_distance(&self, other: &Self) -> f64 {
        0.5 * norm(sub(self.r, other.r))
    }

    /// Rescale onto the Bloch ball if rounding pushed |r| past 1.
    pub(crate) fn from_bloch_clamped(r: [f64; 3]) -> Self {
        let len = norm(r);
        if len > 1.0 {
            Self { r: scale(r, 1.0 / len) }
        } else {
            Self { r }
        }
    }
}

/// A normalized pure state cos(θ/2)|↑⟩ + e^{iφ} sin(θ/2)|↓⟩, up to global
/// phase.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PureState {
    pub up: C64,
    pub down: C64,
}

impl PureState {
    pub fn new(up: C64, down: C64) -> SpinResult<Self> {
        let n2 = up.norm_sqr() + down.norm_sqr();
        if !((n2 - 1.0).abs() <= 1e-9) {
            return Err(SpinError::Unnormalized(n2));
        }
        Ok(Self { up, down })
    }

    pub fn from_angles(theta: f64, phi: f64) -> Self {
        Self {
            up: C64::from((0.5 * theta).cos()),
            down: C64::from_polar((0.5 * theta).sin(), phi),
        }
    }

    pub fn up() -> Self { Self::from_angles(0.0, 0.0) }

    pub fn down() -> Self { Self::from_angles(PI, 0.0) }

    pub fn density_matrix(&self) -> DensityMatrix {
        let c = self.up * self.down.conj();
        DensityMatrix::from_bloch_clamped([
            2.0 * c.re,
            -2.0 * c.im,
            self.up.norm_sqr() - self.down.norm_sqr(),
        ])
    }
}

/// One piece of a pulse sequence, in the frame rotating with the RF drive.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PulseSegment {
    /// Square RF pulse driving rotations about (cos φ, sin φ, 0) at
    /// `rabi_freq` (rad/s), with detuning `detuning` (rad/s) about z.
    RfPulse { rabi_freq: f64, phase: f64, detuning: f64, duration: f64 },
    /// Larmor precession at δg about z, with relaxation.
    FreeEvolution { duration: f64 },
}

impl PulseSegment {
    /// A resonant pulse of rotation angle `angle` at Rabi frequency `rabi_freq`.
    pub fn rotation(rabi_freq: f64, phase: f64, angle: f64) -> Self {
        Self::RfPulse { rabi_freq, phase, detuning: 0.0, duration: angle / rabi_freq }
    }

    pub fn duration(&self) -> f64 {
        match *self {
            Self::RfPulse { duration, .. } | Self::FreeEvolution { duration } => duration,
        }
    }

    pub fn validate(&self) -> SpinResult<()> {
        let d = self.duration();
        if !(d >= 0.0) || !d.is_finite() {
            return Err(SpinError::InvalidSegment("duration must be finite and non-negative"));
        }
        if let Self::RfPulse { rabi_freq, phase, detuning, .. } = *self {
            if !(rabi_freq >= 0.0) || !rabi_freq.is_finite() {
                return Err(SpinError::InvalidSegment("Rabi frequency must be finite and non-negative"));
            }
            if !phase.is_finite() || !detuning.is_finite() {
                return Err(SpinError::InvalidSegment("phase and detuning must be finite"));
            }
        }
        Ok(())
    }
}

pub type PulseSequence = Vec<PulseSegment>;

/// Longitudinal and transverse relaxation plus the Larmor frequency.
///
/// 1/T1 = `gamma_p`, 1/T2 = `gamma_p + gamma_m`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxationParams {
    /// Longitudinal rate Γp (1/s).
    pub gamma_p: f64,
    /// Pure-dephasing rate Γm (1/s).
    pub gamma_m: f64,
    /// Larmor frequency δg (rad/s).
    pub larmor: f64,
    /// z-component of the Bloch vector the populations relax toward.
    pub equilibrium_rz: f64,
}

impl Default for RelaxationParams {
    fn default() -> Self {
        Self { gamma_p: 2.0, gamma_m: 8.0, larmor: 2.0 * PI * 2.5e3, equilibrium_rz: 0.0 }
    }
}

impl RelaxationParams {
    /// No damping, precession at `larmor`.
    pub fn coherent(larmor: f64) -> Self {
        Self { gamma_p: 0.0, gamma_m: 0.0, larmor, equilibrium_rz: 0.0 }
    }

    pub fn t1(&self) -> f64 { 1.0 / self.gamma_p }

    pub fn t2(&self) -> f64 { 1.0 / self.transverse_rate() }

    pub fn transverse_rate(&self) -> f64 { self.gamma_p + self.gamma_m }

    pub fn validate(&self) -> SpinResult<()> {
        if !(self.gamma_p >= 0.0) || !self.gamma_p.is_finite() {
            return Err(SpinError::InvalidRelaxation("gamma_p must be finite and non-negative"));
        }
        if !(self.gamma_m >= 0.0) || !self.gamma_m.is_finite() {
            return Err(SpinError::InvalidRelaxation("gamma_m must be finite and non-negative"));
        }
        if !self.larmor.is_finite() {
            return Err(SpinError::InvalidRelaxation("larmor must be finite"));
        }
        if !(self.equilibrium_rz.abs() <= 1.0) {
            return Err(SpinError::InvalidRelaxation("equilibrium_rz must lie in [-1, 1]"));
        }
        Ok(())
    }

    fn is_damped(&self) -> bool { self.gamma_p > 0.0 || self.gamma_m > 0.0 }
}

/// Step control for the fixed-step RK4 integrator used during RF pulses.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    /// Minimum number of steps per period of the fastest rate in the problem.
    pub steps_per_period: u64,
    /// Minimum number of steps for any nonzero duration.
    pub min_steps: u64,
    pub max_steps: u64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { steps_per_period: 1000, min_steps: 10, max_steps: 50_000_000 }
    }
}

/// |ψ⟩⟨ψ| for |ψ⟩ = cos(θ/2)|↑⟩ + e^{iφ} sin(θ/2)|↓⟩.
pub fn pure_state(theta: f64, phi: f64) -> DensityMatrix {
    PureState::from_angles(theta, phi).density_matrix()
}

/// diag(1 − P, P): the spin pumped into |↓⟩ with probability P.
pub fn initialize_state(polarization_fidelity: f64) -> SpinResult<DensityMatrix> {
    if !(0.0..=1.0).contains(&polarization_fidelity) {
        return Err(SpinError::ProbabilityOutOfRange(polarization_fidelity));
    }
    DensityMatrix::from_bloch([0.0, 0.0, 1.0 - 2.0 * polarization_fidelity])
}

/// Ideal rotation of the Bloch vector by `angle` about the unit vector `axis`.
pub fn apply_rotation(rho: &DensityMatrix, axis: [f64; 3], angle: f64) -> SpinResult<DensityMatrix> {
    let len = norm(axis);
    if !((len - 1.0).abs() <= 1e-9) {
        return Err(SpinError::NonUnitAxis(len));
    }
    let r = rotate(rho.r, axis, angle);
    Ok(DensityMatrix::from_bloch_clamped(r))
}

/// Integrate the rotating-frame Bloch equation over one RF pulse.
///
/// Any `FreeEvolution` passed here is forwarded to [`free_evolve`].
pub fn rf_pulse_propagate(
    rho: &DensityMatrix,
    seg: &PulseSegment,
    relax: &RelaxationParams,
    opts: &IntegratorOptions,
) -> SpinResult<DensityMatrix> {
    seg.validate()?;
    relax.validate()?;
    let (rabi_freq, phase, detuning, duration) = match *seg {
        PulseSegment::RfPulse { rabi_freq, phase, detuning, duration } =>
            (rabi_freq, phase, detuning, duration),
        PulseSegment::FreeEvolution { duration } => return free_evolve(rho, duration, relax),
    };
    if duration == 0.0 {
        return Ok(*rho);
    }

    let omega = [rabi_freq * phase.cos(), rabi_freq * phase.sin(), detuning];
    let g1 = relax.gamma_p;
    let g2 = relax.transverse_rate();
    let req = [0.0, 0.0, relax.equilibrium_rz];

    let fastest = rabi_freq.max(detuning.abs()).max(relax.larmor.abs()).max(g1).max(g2);
    let mut steps = opts.min_steps.max(1);
    if fastest > 0.0 {
        let period = 2.0 * PI / fastest;
        let needed = (duration / period * opts.steps_per_period as f64).ceil();
        if needed > opts.max_steps as f64 {
            return Err(SpinError::StepUnderflow {
                duration,
                needed: needed as u64,
                limit: opts.max_steps,
            });
        }
        steps = steps.max(needed as u64);
    }
    let h = duration / steps as f64;

    let deriv = |r: [f64; 3]| -> [f64; 3] {
        let c = cross(omega, r);
        [
            c[0] - g2 * (r[0] - req[0]),
            c[1] - g2 * (r[1] - req[1]),
            c[2] - g1 * (r[2] - req[2]),
        ]
    };

    let mut r = rho.r;
    for _ in 0..steps {
        let k1 = deriv(r);
        let k2 = deriv(axpy(0.5 * h, k1, r));
        let k3 = deriv(axpy(0.5 * h, k2, r));
        let k4 = deriv(axpy(h, k3, r));
        for i in 0..3 {
            r[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    Ok(DensityMatrix::from_bloch_clamped(r))
}

/// Exact free evolution: precession at δg about z with T1/T2 damping.
pub fn free_evolve(rho: &DensityMatrix, duration: f64, relax: &RelaxationParams) -> SpinResult<DensityMatrix> {
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(SpinError::InvalidSegment("duration must be finite and non-negative"));
    }
    relax.validate()?;
    if duration == 0.0 {
        return Ok(*rho);
    }
    let [x, y, z] = rho.r;
    let (s, c) = (relax.larmor * duration).sin_cos();
    let (transverse, longitudinal) = if relax.is_damped() {
        (
            (-relax.transverse_rate() * duration).exp(),
            (-relax.gamma_p * duration).exp(),
        )
    } else {
        (1.0, 1.0)
    };
    let req = relax.equilibrium_rz;
    let r = [
        transverse * (x * c - y * s),
        transverse * (x * s + y * c),
        req + (z - req) * longitudinal,
    ];
    Ok(DensityMatrix::from_bloch_clamped(r))
}

/// Apply a sequence of segments left to right.
pub fn run_sequence(
    rho0: &DensityMatrix,
    seq: &[PulseSegment],
    relax: &RelaxationParams,
    opts: &IntegratorOptions,
) -> SpinResult<DensityMatrix> {
    seq.iter().try_fold(*rho0, |rho, seg| match seg {
        PulseSegment::FreeEvolution { duration } => free_evolve(&rho, *duration, relax),
        pulse => rf_pulse_propagate(&rho, pulse, relax, opts),
    })
}

/// Tr ρ² = (1 + |r|²)/2.
pub fn purity(rho: &DensityMatrix) -> f64 {
    0.5 * (1.0 + dot(rho.r, rho.r))
}

/// ⟨ψ|ρ|ψ⟩.
pub fn fidelity(rho: &DensityMatrix, psi: &PureState) -> SpinResult<f64> {
    let psi = PureState::new(psi.up, psi.down)?;
    let m = rho.matrix();
    let v = [psi.up, psi.down];
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..2 {
        for j in 0..2 {
            acc += v[i].conj() * m[i][j] * v[j];
        }
    }
    Ok(acc.re)
}

pub(crate) fn norm(v: [f64; 3]) -> f64 { dot(v, v).sqrt() }

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 { a[0] * b[0] + a[1] * b[1] + a[2] * b[2] }

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] { [a[0] - b[0], a[1] - b[1], a[2] - b[2]] }

fn scale(a: [f64; 3], s: f64) -> [f64; 3] { [a[0] * s, a[1] * s, a[2] * s] }

fn axpy(a: f64, x: [f64; 3], y: [f64; 3]) -> [f64; 3] {
    [a * x[0] + y[0], a * x[1] + y[1], a * x[2] + y[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

// Rodrigues' formula.
fn rotate(v: [f64; 3], k: [f64; 3], angle: f64) -> [f64; 3] {
    let (s, c) = angle.sin_cos();
    let kxv = cross(k, v);
    let kv = dot(k, v);
    [
        v[0] * c + kxv[0] * s + k[0] * kv * (1.0 - c),
        v[1] * c + kxv[1] * s + k[1] * kv * (1.0 - c),
        v[2] * c + kxv[2] * s + k[2] * kv * (1.0 - c),
    ]
}

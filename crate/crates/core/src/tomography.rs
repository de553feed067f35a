//! Three-axis qubit tomography from click counts: linear inversion,
//! maximum-likelihood reconstruction and parametric-bootstrap error bars.

use std::f64::consts::FRAC_PI_2;

use nalgebra::Matrix2;
use num_complex::Complex64 as C64;
use rand_distr::{ Binomial, Distribution };
use rayon::prelude::*;
use serde::{ Deserialize, Serialize };
use thiserror::Error;

use crate::readout::ReadoutParams;
use crate::rng;
use crate::spin::{ self, DensityMatrix, PulseSegment, PulseSequence, PureState };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TomographyError {
    #[error("no record for basis {0:?}")]
    MissingBasis(BasisLabel),

    #[error("invalid record: {0}")]
    InvalidRecord(&'static str),

    #[error("readout map is not invertible (η = ε↑ = {0})")]
    SingularReadout(f64),

    #[error("likelihood maximization did not converge within {0} iterations")]
    NonConvergence(usize),

    #[error("{skipped} of {total} bootstrap resamples failed")]
    TooManySkipped { skipped: usize, total: usize },

    #[error("bootstrap needs at least 2 resamples")]
    TooFewResamples,

    #[error(transparent)]
    Spin(#[from] spin::SpinError),
}

pub type TomographyResultT<T> = Result<T, TomographyError>;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BasisLabel {
    X,
    Y,
    Z,
}

impl BasisLabel {
    pub const ALL: [BasisLabel; 3] = [BasisLabel::X, BasisLabel::Y, BasisLabel::Z];

    pub fn index(self) -> usize {
        match self {
            Self::X => 0,
            Self::Y => 1,
            Self::Z => 2,
        }
    }

    /// The click (|↓⟩-like) projector for this axis, (I − σ_b)/2.
    fn projector(self) -> Matrix2<C64> {
        let half = C64::new(0.5, 0.0);
        let (z, i) = (C64::new(0.0, 0.0), C64::new(0.0, 0.5));
        match self {
            Self::X => Matrix2::new(half, -half, -half, half),
            Self::Y => Matrix2::new(half, i, -i, half),
            Self::Z => Matrix2::new(z, z, z, C64::new(1.0, 0.0)),
        }
    }
}

/// A measurement axis and the pulses that rotate it onto the readout axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementBasis {
    pub label: BasisLabel,
    pub prefix: PulseSequence,
}

/// Z needs no prefix. X uses a π/2 pulse about −y and Y a π/2 pulse about +x,
/// which carry r_x and r_y respectively onto r_z before readout.
pub fn standard_bases(rabi_freq: f64) -> [MeasurementBasis; 3] {
    [
        MeasurementBasis {
            label: BasisLabel::X,
            prefix: vec![PulseSegment::rotation(rabi_freq, -FRAC_PI_2, FRAC_PI_2)],
        },
        MeasurementBasis {
            label: BasisLabel::Y,
            prefix: vec![PulseSegment::rotation(rabi_freq, 0.0, FRAC_PI_2)],
        },
        MeasurementBasis { label: BasisLabel::Z, prefix: Vec::new() },
    ]
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub basis: BasisLabel,
    pub shots: u64,
    pub clicks: u64,
}

impl MeasurementRecord {
    pub fn new(basis: BasisLabel, shots: u64, clicks: u64) -> TomographyResultT<Self> {
        if clicks > shots {
            return Err(TomographyError::InvalidRecord("clicks exceed shots"));
        }
        if shots == 0 {
            return Err(TomographyError::InvalidRecord("zero shots"));
        }
        Ok(Self { basis, shots, clicks })
    }

    pub fn frequency(&self) -> f64 { self.clicks as f64 / self.shots as f64 }
}

/// How readout errors enter the likelihood.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LikelihoodMode {
    /// Click frequencies are taken as populations; assignment errors stay in
    /// the reconstructed state.
    Raw,
    /// Clicks are modeled through (η, ε↑) of the readout.
    Unfolded,
}

impl LikelihoodMode {
    /// The readout parameters the likelihood should use.
    pub fn effective_readout(self, rp: &ReadoutParams) -> ReadoutParams {
        match self {
            Self::Raw => ReadoutParams::ideal(),
            Self::Unfolded => *rp,
        }
    }
}

/// Affine map from population to click probability, f = ε↑ + (η − ε↑)·p.
#[derive(Copy, Clone, Debug, PartialEq)]
struct ReadoutMap {
    eta: f64,
    eps: f64,
}

impl ReadoutMap {
    fn from_params(rp: &ReadoutParams) -> Self { Self { eta: rp.efficiency(), eps: rp.eps_up } }

    fn click_effect(&self, basis: BasisLabel) -> Matrix2<C64> {
        let p = basis.projector();
        p * C64::from(self.eta - self.eps) + Matrix2::identity() * C64::from(self.eps)
    }
}

fn check_complete(records: &[MeasurementRecord]) -> TomographyResultT<()> {
    for b in BasisLabel::ALL {
        if !records.iter().any(|r| r.basis == b) {
            return Err(TomographyError::MissingBasis(b));
        }
    }
    for r in records {
        MeasurementRecord::new(r.basis, r.shots, r.clicks)?;
    }
    Ok(())
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearEstimate {
    pub bloch: [f64; 3],
    /// |r| ≤ 1.
    pub physical: bool,
}

impl LinearEstimate {
    pub fn state(&self) -> Option<DensityMatrix> {
        if self.physical { DensityMatrix::from_bloch(self.bloch).ok() } else { None }
    }
}

/// Invert pooled click frequencies through the readout map.
pub fn linear_inversion(records: &[MeasurementRecord], rp: &ReadoutParams) -> TomographyResultT<LinearEstimate> {
    check_complete(records)?;
    let map = ReadoutMap::from_params(rp);
    let slope = map.eta - map.eps;
    if slope.abs() < 1e-15 {
        return Err(TomographyError::SingularReadout(map.eta));
    }
    let mut bloch = [0.0; 3];
    for b in BasisLabel::ALL {
        let (shots, clicks) = records.iter()
            .filter(|r| r.basis == b)
            .fold((0u64, 0u64), |(s, c), r| (s + r.shots, c + r.clicks));
        let f = clicks as f64 / shots as f64;
        let p = (f - map.eps) / slope;
        bloch[b.index()] = 1.0 - 2.0 * p;
    }
    let physical = spin::norm(bloch) <= 1.0;
    Ok(LinearEstimate { bloch, physical })
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    pub max_iterations: usize,
    /// Stop once a step improves the log-likelihood by less than this.
    pub tolerance: f64,
    /// Initial (and largest) dilution parameter ε in ρ ← (I+εR)ρ(I+εR).
    pub max_dilution: f64,
}

impl Default for MleOptions {
    fn default() -> Self { Self { max_iterations: 100_000, tolerance: 1e-12, max_dilution: 1e3 } }
}

fn to_matrix(rho: &DensityMatrix) -> Matrix2<C64> {
    let m = rho.matrix();
    Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1])
}

fn from_matrix(m: &Matrix2<C64>) -> DensityMatrix {
    let tr = (m[(0, 0)] + m[(1, 1)]).re;
    let c = m[(0, 1)] / tr;
    let dz = ((m[(0, 0)] - m[(1, 1)]).re) / tr;
    DensityMatrix::from_bloch_clamped([2.0 * c.re, -2.0 * c.im, dz])
}

struct Likelihood {
    terms: Vec<(Matrix2<C64>, f64, f64)>,
    total: f64,
}

impl Likelihood {
    fn new(records: &[MeasurementRecord], rp: &ReadoutParams) -> Self {
        let map = ReadoutMap::from_params(rp);
        let terms: Vec<_> = records.iter()
            .map(|r| (map.click_effect(r.basis), r.clicks as f64, (r.shots - r.clicks) as f64))
            .collect();
        let total = records.iter().map(|r| r.shots as f64).sum();
        Self { terms, total }
    }

    fn click_prob(effect: &Matrix2<C64>, rho: &Matrix2<C64>) -> f64 {
        (effect * rho).trace().re.clamp(0.0, 1.0)
    }

    fn log_likelihood(&self, rho: &Matrix2<C64>) -> f64 {
        self.terms.iter().map(|(e, n1, n0)| {
            let f = Self::click_prob(e, rho);
            xlny(*n1, f) + xlny(*n0, 1.0 - f)
        }).sum()
    }

    fn r_operator(&self, rho: &Matrix2<C64>) -> Matrix2<C64> {
        let id = Matrix2::<C64>::identity();
        let mut r = Matrix2::<C64>::zeros();
        for (e, n1, n0) in &self.terms {
            let f = Self::click_prob(e, rho);
            if *n1 > 0.0 && f > 0.0 {
                r += e * C64::from(n1 / f);
            }
            if *n0 > 0.0 && f < 1.0 {
                r += (id - e) * C64::from(n0 / (1.0 - f));
            }
        }
        r / C64::from(self.total)
    }
}

/// x·ln y with 0·ln 0 = 0.
fn xlny(x: f64, y: f64) -> f64 {
    if x == 0.0 { 0.0 } else { x * y.ln() }
}

/// Log-likelihood of `rho` given the records, clicks modeled through `rp`.
pub fn log_likelihood(records: &[MeasurementRecord], rp: &ReadoutParams, rho: &DensityMatrix) -> f64 {
    Likelihood::new(records, rp).log_likelihood(&to_matrix(rho))
}

/// Diluted RρR iteration for the maximum-likelihood state.
pub fn mle_reconstruct(
    records: &[MeasurementRecord],
    rp: &ReadoutParams,
    opts: &MleOptions,
) -> TomographyResultT<(DensityMatrix, f64)> {
    check_complete(records)?;
    let lik = Likelihood::new(records, rp);
    let id = Matrix2::<C64>::identity();
    let mut rho = to_matrix(&DensityMatrix::maximally_mixed());
    let mut ll = lik.log_likelihood(&rho);
    let mut eps = opts.max_dilution;

    for _ in 0..opts.max_iterations {
        let r = lik.r_operator(&rho);
        let step = id + r * C64::from(eps);
        let mut next = step * rho * step.adjoint();
        let tr = next.trace();
        next /= tr;
        // Keep exact Hermiticity against rounding.
        next = (next + next.adjoint()) * C64::from(0.5);
        let ll_next = lik.log_likelihood(&next);
        if ll_next > ll {
            let gain = ll_next - ll;
            rho = next;
            ll = ll_next;
            if gain < opts.tolerance {
                return Ok((from_matrix(&rho), ll));
            }
            eps = (eps * 2.0).min(opts.max_dilution);
        } else {
            eps *= 0.5;
            if eps < 1e-14 {
                return Ok((from_matrix(&rho), ll));
            }
        }
    }
    Err(TomographyError::NonConvergence(opts.max_iterations))
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapErrors {
    pub sigma_purity: f64,
    pub sigma_fidelity: f64,
    pub n_resamples: usize,
    pub skipped: usize,
}

fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Parametric bootstrap: redraw every record from Binomial(N, n/N), rerun the
/// reconstruction and take the spread of purity and fidelity.
pub fn bootstrap_errors(
    records: &[MeasurementRecord],
    rp: &ReadoutParams,
    target: &PureState,
    n_resamples: usize,
    seed: u64,
    opts: &MleOptions,
) -> TomographyResultT<BootstrapErrors> {
    if n_resamples < 2 {
        return Err(TomographyError::TooFewResamples);
    }
    check_complete(records)?;
    let target = PureState::new(target.up, target.down)?;

    let outcomes: Vec<Option<(f64, f64)>> = (0..n_resamples)
        .into_par_iter()
        .map(|i| {
            let mut stream = rng::stream(seed, &[rng::label::BOOTSTRAP, i as u64]);
            let resampled: Vec<MeasurementRecord> = records.iter()
                .map(|r| {
                    let clicks = Binomial::new(r.shots, r.frequency())
                        .expect("frequency lies in [0, 1]")
                        .sample(&mut stream);
                    MeasurementRecord { clicks, ..*r }
                })
                .collect();
            let (rho, _) = mle_reconstruct(&resampled, rp, opts).ok()?;
            let f = spin::fidelity(&rho, &target).ok()?;
            Some((rho.purity(), f))
        })
        .collect();

    let kept: Vec<(f64, f64)> = outcomes.iter().flatten().copied().collect();
    let skipped = n_resamples - kept.len();
    if skipped * 100 > n_resamples || kept.len() < 2 {
        return Err(TomographyError::TooManySkipped { skipped, total: n_resamples });
    }
    let purities: Vec<f64> = kept.iter().map(|k| k.0).collect();
    let fidelities: Vec<f64> = kept.iter().map(|k| k.1).collect();
    Ok(BootstrapErrors {
        sigma_purity: sample_std(&purities),
        sigma_fidelity: sample_std(&fidelities),
        n_resamples,
        skipped,
    })
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TomographyOptions {
    pub mode: LikelihoodMode,
    pub n_resamples: usize,
    pub seed: u64,
    pub mle: MleOptions,
}

impl Default for TomographyOptions {
    fn default() -> Self {
        Self { mode: LikelihoodMode::Raw, n_resamples: 1000, seed: 0, mle: MleOptions::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TomographyResult {
    pub mode: LikelihoodMode,
    pub records: Vec<MeasurementRecord>,
    pub rho_linear: LinearEstimate,
    pub rho_mle: DensityMatrix,
    pub log_likelihood: f64,
    pub purity: f64,
    pub fidelity: f64,
    pub sigma_purity: f64,
    pub sigma_fidelity: f64,
    pub n_resamples: usize,
    pub skipped_resamples: usize,
}

/// Linear inversion, MLE, purity and fidelity against `target`, and bootstrap
/// sigmas. With `n_resamples == 0` the bootstrap is skipped and the sigmas are
/// reported as zero.
pub fn tomography_report(
    records: &[MeasurementRecord],
    rp: &ReadoutParams,
    target: &PureState,
    opts: &TomographyOptions,
) -> TomographyResultT<TomographyResult> {
    let eff = opts.mode.effective_readout(rp);
    let rho_linear = linear_inversion(records, &eff)?;
    let (rho_mle, log_likelihood) = mle_reconstruct(records, &eff, &opts.mle)?;
    let fidelity = spin::fidelity(&rho_mle, target)?;
    let boot = if opts.n_resamples > 0 {
        Some(bootstrap_errors(records, &eff, target, opts.n_resamples, opts.seed, &opts.mle)?)
    } else {
        None
    };
    Ok(TomographyResult {
        mode: opts.mode,
        records: records.to_vec(),
        rho_linear,
        rho_mle,
        log_likelihood,
        purity: rho_mle.purity(),
        fidelity,
        sigma_purity: boot.map_or(0.0, |b| b.sigma_purity),
        sigma_fidelity: boot.map_or(0.0, |b| b.sigma_fidelity),
        n_resamples: opts.n_resamples,
        skipped_resamples: boot.map_or(0, |b| b.skipped),
    })
}

//! Cavity-QED projective readout: only |↓⟩ cycles on the probe transition and
//! scatters photons into the cavity mode, so a photon "click" heralds |↓⟩.

use rand::Rng;
use rand_distr::{ Binomial, Distribution };
use serde::{ Deserialize, Serialize };
use thiserror::Error;

use crate::spin::DensityMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReadoutError {
    #[error("invalid readout parameter {name}: {value}")]
    InvalidParam { name: &'static str, value: f64 },

    #[error("probability {0} is outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("atom number must be at least 1")]
    NoAtoms,
}

pub type ReadoutResult<T> = Result<T, ReadoutError>;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutParams {
    /// Photons scattered into the cavity per |↓⟩ atom during one window.
    pub n_emit: u32,
    /// Detection probability per emitted photon.
    pub p_det: f64,
    /// Minimum number of detected photons that counts as a click.
    pub threshold: u32,
    /// Click probability for |↑⟩ (dark counts plus off-resonant excitation).
    pub eps_up: f64,
    /// Readout window (s).
    pub window: f64,
}

impl Default for ReadoutParams {
    fn default() -> Self {
        Self { n_emit: 40, p_det: 0.1, threshold: 1, eps_up: 0.02, window: 500e-6 }
    }
}

impl ReadoutParams {
    /// Perfect assignment: every |↓⟩ clicks, no |↑⟩ does.
    pub fn ideal() -> Self {
        Self { n_emit: 40, p_det: 1.0, threshold: 1, eps_up: 0.0, window: 500e-6 }
    }

    /// Default photon budget and threshold, with `p_det` chosen so that the
    /// assignment error is symmetric: η = 1 − ε↑.
    pub fn symmetric(eps: f64) -> ReadoutResult<Self> {
        if !(0.0..1.0).contains(&eps) {
            return Err(ReadoutError::InvalidParam { name: "eps_up", value: eps });
        }
        let base = Self::default();
        let p_det = if eps == 0.0 { 1.0 } else { 1.0 - eps.powf(1.0 / base.n_emit as f64) };
        Ok(Self { p_det, eps_up: eps, threshold: 1, ..base })
    }

    pub fn validate(&self) -> ReadoutResult<()> {
        let bad = |name, value| Err(ReadoutError::InvalidParam { name, value });
        if !(0.0..=1.0).contains(&self.p_det) {
            return bad("p_det", self.p_det);
        }
        if !(0.0..=1.0).contains(&self.eps_up) {
            return bad("eps_up", self.eps_up);
        }
        if self.threshold < 1 {
            return bad("threshold", self.threshold as f64);
        }
        if !(self.window > 0.0) || !self.window.is_finite() {
            return bad("window", self.window);
        }
        Ok(())
    }

    /// η, the click probability for |↓⟩.
    pub fn efficiency(&self) -> f64 {
        detection_efficiency(self.n_emit, self.p_det, self.threshold)
    }

    /// Mean number of detected photons per |↓⟩ atom.
    pub fn mean_detected(&self) -> f64 { self.n_emit as f64 * self.p_det }
}

/// Atom–cavity parameters, all angular rates (rad/s).
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    pub g: f64,
    pub kappa: f64,
    pub gamma: f64,
}

impl Default for CavityParams {
    fn default() -> Self {
        use std::f64::consts::TAU;
        Self { g: TAU * 2.8e6, kappa: TAU * 4.8e6, gamma: TAU * 91e3 }
    }
}

impl CavityParams {
    pub fn validate(&self) -> ReadoutResult<()> {
        for (name, value) in [("g", self.g), ("kappa", self.kappa), ("gamma", self.gamma)] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ReadoutError::InvalidParam { name, value });
            }
        }
        Ok(())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutOutcome {
    pub click: bool,
    pub detected_photons: u32,
    pub collapsed_state: DensityMatrix,
}

/// Γ = γ[1 + 2g²/(κγ)].
pub fn cavity_enhanced_linewidth(c: &CavityParams) -> f64 {
    c.gamma * (1.0 + 2.0 * c.g * c.g / (c.kappa * c.gamma))
}

/// P(X ≥ threshold) for X ~ Binomial(n_emit, p_det), by exact summation.
pub fn detection_efficiency(n_emit: u32, p_det: f64, threshold: u32) -> f64 {
    if threshold == 0 {
        return 1.0;
    }
    if threshold > n_emit {
        return 0.0;
    }
    if p_det <= 0.0 {
        return 0.0;
    }
    if p_det >= 1.0 {
        return 1.0;
    }
    // Sum whichever tail is shorter.
    if threshold <= n_emit / 2 {
        1.0 - (0..threshold).map(|j| binomial_pmf(n_emit, p_det, j)).sum::<f64>()
    } else {
        (threshold..=n_emit).map(|j| binomial_pmf(n_emit, p_det, j)).sum()
    }
}

fn binomial_pmf(n: u32, p: f64, j: u32) -> f64 {
    let ln_choose: f64 = (0..j).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum();
    (ln_choose + j as f64 * p.ln() + (n - j) as f64 * (-p).ln_1p()).exp()
}

/// p↓·η + (1 − p↓)·ε↑.
pub fn click_probability(p_down: f64, rp: &ReadoutParams) -> ReadoutResult<f64> {
    if !(0.0..=1.0).contains(&p_down) {
        return Err(ReadoutError::ProbabilityOutOfRange(p_down));
    }
    Ok(p_down * rp.efficiency() + (1.0 - p_down) * rp.eps_up)
}

/// Probability that at least one of `k` independent atoms, each with
/// population `p_down`, produces a click.
pub fn multi_atom_click_probability(k: u32, p_down: f64, rp: &ReadoutParams) -> ReadoutResult<f64> {
    if k == 0 {
        return Err(ReadoutError::NoAtoms);
    }
    let single = click_probability(p_down, rp)?;
    Ok(1.0 - (1.0 - single).powi(k as i32))
}

/// One projective readout: collapse the spin, then draw detected photons.
pub fn simulate_readout<R: Rng + ?Sized>(rho: &DensityMatrix, rp: &ReadoutParams, rng: &mut R) -> ReadoutOutcome {
    let down = rng.random::<f64>() < rho.p_down();
    if down {
        let detected = if rp.n_emit == 0 || rp.p_det <= 0.0 {
            0
        } else {
            Binomial::new(rp.n_emit as u64, rp.p_det.min(1.0))
                .expect("p_det validated to lie in [0, 1]")
                .sample(rng) as u32
        };
        ReadoutOutcome {
            click: detected >= rp.threshold,
            detected_photons: detected,
            collapsed_state: DensityMatrix::down(),
        }
    } else {
        let error_click = rp.eps_up > 0.0 && rng.random::<f64>() < rp.eps_up;
        ReadoutOutcome {
            click: error_click,
            detected_photons: if error_click { rp.threshold } else { 0 },
            collapsed_state: DensityMatrix::up(),
        }
    }
}

/// Readout of `k` atoms sharing the same state: a click if any of them clicks.
pub fn simulate_multi_atom_readout<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    k: u32,
    rp: &ReadoutParams,
    rng: &mut R,
) -> bool {
    // Every atom is sampled so the number of draws does not depend on outcomes.
    (0..k).fold(false, |any, _| simulate_readout(rho, rp, rng).click | any)
}

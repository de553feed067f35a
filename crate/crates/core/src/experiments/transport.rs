use std::f64::consts::{ PI, TAU };

use serde::{ Deserialize, Serialize };

use super::{ ExperimentError, ExperimentResult, LatticeParams };

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportPoint {
    pub t: f64,
    /// Beam frequency offset δ(t) (rad/s).
    pub delta: f64,
    /// Lattice velocity (m/s).
    pub velocity: f64,
    /// Distance travelled since t = 0 (m).
    pub position: f64,
}

/// δ(t) = δ₀ sin(πt/τ), v = (λ/2)·δ/2π and its exact antiderivative, sampled
/// at `n_points` evenly spaced times over [0, τ].
pub fn transport_profile(lattice: &LatticeParams, n_points: usize) -> ExperimentResult<Vec<TransportPoint>> {
    lattice.validate()?;
    if n_points < 2 {
        return Err(ExperimentError::InvalidInput("transport profile needs at least 2 points"));
    }
    let tau = lattice.tau_transport;
    let v_peak = peak_velocity(lattice);
    Ok((0..n_points)
        .map(|i| {
            let t = if i + 1 == n_points { tau } else { tau * i as f64 / (n_points - 1) as f64 };
            let (s, c) = (PI * t / tau).sin_cos();
            TransportPoint {
                t,
                delta: lattice.delta0 * s,
                velocity: v_peak * s,
                position: v_peak * tau / PI * (1.0 - c),
            }
        })
        .collect())
}

/// λδ₀/4π.
pub fn peak_velocity(lattice: &LatticeParams) -> f64 { 0.5 * lattice.wavelength * lattice.delta0 / TAU }

/// Total distance λδ₀τ/(2π²).
pub fn transport_displacement(lattice: &LatticeParams) -> f64 {
    lattice.wavelength * lattice.delta0 * lattice.tau_transport / (2.0 * PI * PI)
}

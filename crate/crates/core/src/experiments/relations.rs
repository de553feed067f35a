use serde::{ Deserialize, Serialize };

use super::{ positive, ExperimentError, ExperimentResult };

/// T2 from T1 and the pure-dephasing rate: 1/T2 = 1/T1 + Γm.
pub fn t2_relation(t1: f64, gamma_m: f64) -> ExperimentResult<f64> {
    positive("t1", t1)?;
    if !(gamma_m >= 0.0) || gamma_m.is_infinite() {
        return Err(ExperimentError::InvalidParam { name: "gamma_m", value: gamma_m });
    }
    Ok(1.0 / (1.0 / t1 + gamma_m))
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DephasingEstimate {
    pub gamma_m: f64,
    /// T2 ≥ T1, so the implied dephasing rate is not positive.
    pub unphysical: bool,
}

/// Γm = 1/T2 − 1/T1.
pub fn gamma_m_from(t1: f64, t2: f64) -> ExperimentResult<DephasingEstimate> {
    positive("t1", t1)?;
    positive("t2", t2)?;
    let gamma_m = 1.0 / t2 - 1.0 / t1;
    Ok(DephasingEstimate { gamma_m, unphysical: t2 >= t1 })
}

/// Number of projective measurements that fit into one coherence time.
pub fn operation_budget(t2: f64, t_readout: f64) -> ExperimentResult<f64> {
    positive("t2", t2)?;
    positive("t_readout", t_readout)?;
    Ok(t2 / t_readout)
}

use std::f64::consts::{ FRAC_PI_2, PI, TAU };

use rayon::prelude::*;
use serde::{ Deserialize, Serialize };

use super::*;
use crate::fitting::{ fit_exponential, Dataset, ExponentialModel, ExponentialVariant, Model };
use crate::rng::label;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct T1Run {
    /// None when the population does not decay.
    pub t1: Option<Quantity>,
    pub lifetime: Quantity,
    pub run: ExperimentRun,
}

/// Population decay of |↓⟩ and |↑⟩ during trapping, with atom loss.
///
/// The two click curves are summed to get the survival curve and the trap
/// lifetime. The |↓⟩ curve divided by the fitted survival is then fitted with
/// an offset exponential whose time constant is T1.
pub fn run_t1(
    params: &ApparatusParams,
    time_grid: &[f64],
    sampling: Sampling,
    seed: u64,
) -> ExperimentResult<T1Run> {
    params.validate()?;
    sampling.validate()?;
    check_grid(time_grid)?;
    let span = time_grid.iter().cloned().fold(0.0, f64::max) - time_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    if params.relax.gamma_p > 0.0 && span < params.relax.t1() {
        return Err(ExperimentError::InvalidInput("time grid must span at least T1"));
    }
    let down = params.prepared()?;
    let up = params.evolve(&down, &PulseSegment::rotation(params.rabi_freq, 0.0, PI))?;

    let measure_curve = |start: DensityMatrix, lbl: u64| {
        time_grid.par_iter()
            .enumerate()
            .map(|(i, &t)| {
                let rho = params.evolve(&start, &PulseSegment::FreeEvolution { duration: t })?;
                measure(params, &rho, 1, params.survival(t), sampling, seed, &[lbl, i as u64], t)
            })
            .collect::<ExperimentResult<Vec<_>>>()
    };
    let from_down = measure_curve(down, label::T1_DOWN)?;
    let from_up = measure_curve(up, label::T1_UP)?;

    let summed: Vec<Point> = from_down.iter()
        .zip(&from_up)
        .map(|(d, u)| {
            let error = d.error.zip(u.error).map(|(a, b)| a.hypot(b));
            Point { value: d.value + u.value, error, ..Point::derived(d.x, 0.0, None) }
        })
        .collect();
    let (survival_fit, _) = reweighted_fit(&summed, sampling, ExponentialVariant::Plain, |p, model| {
        let n = p.shots as f64;
        // Half the summed signal comes from each preparation.
        let half = (0.5 * model).clamp(0.0, 1.0);
        (2.0 * half * (1.0 - half) / n).sqrt().max(0.5 / n)
    })?;
    let (y0, lifetime) = (survival_fit.param("y0")?, survival_fit.param("tau")?);
    let lifetime = Quantity { value: lifetime, std_error: survival_fit.std_error("tau")? };
    let survival_at = |t: f64| y0 * (-t / lifetime.value).exp();

    let mut normalized: Vec<Point> = from_down.iter()
        .map(|p| {
            let s = survival_at(p.x);
            let mut q = Point::derived(p.x, p.value / s, p.error.map(|e| e / s));
            q.shots = p.shots;
            q
        })
        .collect();
    let (population_fit, model_sigma) = reweighted_fit(&normalized, sampling, ExponentialVariant::Offset, |p, model| {
        let s = survival_at(p.x);
        let n = p.shots as f64;
        let f = (model * s).clamp(0.0, 1.0);
        (f * (1.0 - f) / n).sqrt().max(0.5 / n) / s
    })?;
    // Report the binomial errors implied by the fitted curve, which stay
    // honest where only a handful of clicks were recorded.
    for (p, s) in normalized.iter_mut().zip(model_sigma.iter().flatten()) {
        p.error = Some(*s);
    }
    let tau = population_fit.param("tau")?;
    let tau_se = population_fit.std_error("tau")?;

    let mut run = ExperimentRun::new(Experiment::T1, seed, sampling);
    let t1 = match tau_se {
        Some(se) if !population_fit.is_singular() && se < tau => Some(Quantity { value: tau, std_error: Some(se) }),
        None if sampling == Sampling::Analytic && !population_fit.is_singular() => Some(Quantity::exact(tau)),
        _ => None,
    };
    if t1.is_none() {
        run.flag(RunFlag::T1Unidentifiable);
    }
    run.derived.insert("lifetime".into(), lifetime);
    if let Some(t1) = t1 {
        run.derived.insert("t1".into(), t1);
    }
    run.fits.insert("survival".into(), survival_fit);
    run.fits.insert("population".into(), population_fit);
    run.series.push(Series::new("prepared_down", from_down));
    run.series.push(Series::new("prepared_up", from_up));
    run.series.push(Series::new("survival", summed));
    run.series.push(Series::new("normalized_down", normalized));
    Ok(T1Run { t1, lifetime, run })
}

/// Exponential fit weighted first by the observed errors, then refitted with
/// errors recomputed from the fitted curve through `sigma(point, model)`.
fn reweighted_fit(
    points: &[Point],
    sampling: Sampling,
    variant: ExponentialVariant,
    sigma: impl Fn(&Point, f64) -> f64,
) -> ExperimentResult<(FitResult, Option<Vec<f64>>)> {
    let first = fit_exponential(&weighted(points, sampling)?, variant)?;
    if sampling == Sampling::Analytic {
        return Ok((first, None));
    }
    let model = ExponentialModel(variant);
    let mut theta = first.params.clone();
    theta[1] = theta[1].ln();
    let sig: Vec<f64> = points.iter().map(|p| sigma(p, model.eval(p.x, &theta))).collect();
    if sig.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Ok((first, None));
    }
    let data = Dataset::new(points.iter().map(|p| p.x).collect(), points.iter().map(|p| p.value).collect())?
        .with_sigma(sig.clone())?;
    Ok((fit_exponential(&data, variant)?, Some(sig)))
}

/// Dataset from derived points, weighted by their errors when sampled.
fn weighted(points: &[Point], sampling: Sampling) -> ExperimentResult<Dataset> {
    let data = Dataset::new(points.iter().map(|p| p.x).collect(), points.iter().map(|p| p.value).collect())?;
    let sigma: Option<Vec<f64>> = points.iter().map(|p| p.error.filter(|e| *e > 0.0)).collect();
    match (sampling, sigma) {
        (Sampling::Shots(_), Some(sigma)) => Ok(data.with_sigma(sigma)?),
        _ => Ok(data),
    }
}

/// Layout of the local Ramsey fringe taken at every trapping time.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringeDesign {
    /// Fringe span in Larmor periods.
    pub periods: f64,
    pub points: usize,
}

impl Default for FringeDesign {
    fn default() -> Self { Self { periods: 5.0, points: 12 } }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct T2Run {
    /// None when the visibility does not decay.
    pub t2: Option<Quantity>,
    pub run: ExperimentRun,
}

/// Ramsey visibility against trapping time.
///
/// At each hold time a fringe of `design.points` delays spaced by
/// `design.periods / design.points` Larmor periods is recorded, starting at the
/// hold time. Shots in which the atom was lost are discarded. Each fringe gives
/// a visibility and an amplitude; the amplitudes are fitted with a plain
/// exponential to give T2.
pub fn run_t2(
    params: &ApparatusParams,
    holds: &[f64],
    design: FringeDesign,
    sampling: Sampling,
    seed: u64,
) -> ExperimentResult<T2Run> {
    params.validate()?;
    sampling.validate()?;
    check_grid(holds)?;
    if holds.len() < 4 {
        return Err(ExperimentError::InvalidInput("need at least 4 trapping times"));
    }
    if design.points < 8 || !(design.periods > 0.0) {
        return Err(ExperimentError::InvalidInput("fringe needs at least 8 points and a positive span"));
    }
    if params.relax.larmor == 0.0 {
        return Err(ExperimentError::InvalidParam { name: "relax.larmor", value: 0.0 });
    }
    if !(params.rabi_freq > 0.0) {
        return Err(ExperimentError::InvalidParam { name: "rabi_freq", value: params.rabi_freq });
    }
    let larmor_hz = params.relax.larmor.abs() / TAU;
    let step = design.periods / larmor_hz / design.points as f64;
    let rho0 = params.prepared()?;
    let half = PulseSegment::rotation(params.rabi_freq, 0.0, FRAC_PI_2);

    let fringes = holds.par_iter()
        .enumerate()
        .map(|(j, &hold)| {
            (0..design.points)
                .map(|k| {
                    let offset = k as f64 * step;
                    let delay = hold + offset;
                    let seq = [half, PulseSegment::FreeEvolution { duration: delay }, half];
                    let rho = params.evolve_sequence(&rho0, &seq)?;
                    let path = [label::T2, j as u64, k as u64];
                    // Lost atoms are discarded, so the analytic curve carries no survival factor.
                    let survival = match sampling {
                        Sampling::Analytic => 1.0,
                        Sampling::Shots(_) => params.survival(delay),
                    };
                    let p = measure(params, &rho, 1, survival, sampling, seed, &path, offset)?;
                    Ok(post_select(p))
                })
                .filter(|p| !matches!(p, Ok(p) if p.survivors == 0 && p.shots > 0))
                .collect::<ExperimentResult<Vec<_>>>()
        })
        .collect::<ExperimentResult<Vec<_>>>()?;

    let mut run = ExperimentRun::new(Experiment::T2, seed, sampling);
    let mut visibilities = Vec::with_capacity(holds.len());
    let mut amplitudes = Vec::with_capacity(holds.len());
    for (j, (fringe, &hold)) in fringes.into_iter().zip(holds).enumerate() {
        let analysis = analyze_fringe(&fringe, Some(larmor_hz), sampling)?;
        if !analysis.is_significant() {
            run.flag(RunFlag::InsignificantFringe);
        }
        let v = analysis.visibility;
        visibilities.push(Point::derived(hold, v.value, v.std_error));
        amplitudes.push(Point::derived(hold, analysis.fit.param("A")?, analysis.fit.std_error("A")?));
        run.fits.insert(format!("fringe_{j:03}"), analysis.fit);
        run.series.push(Series::new(format!("fringe_{j:03}"), fringe));
    }

    // The fitted offset picks up part of the envelope misfit with a sign that
    // follows the fringe phase, so A/C wobbles from hold to hold; A does not.
    let decay = fit_exponential(&weighted(&amplitudes, sampling)?, ExponentialVariant::Plain)?;
    let tau = decay.param("tau")?;
    let tau_se = decay.std_error("tau")?;
    let t2 = match tau_se {
        Some(se) if !decay.is_singular() && se < tau => Some(Quantity { value: tau, std_error: Some(se) }),
        None if sampling == Sampling::Analytic && !decay.is_singular() => Some(Quantity::exact(tau)),
        _ => None,
    };
    if t2.is_none() {
        run.flag(RunFlag::T2Unidentifiable);
    }
    if let Some(t2) = t2 {
        run.derived.insert("t2".into(), t2);
    }
    run.fits.insert("amplitude".into(), decay);
    run.series.push(Series::new("visibility", visibilities));
    run.series.push(Series::new("amplitude", amplitudes));
    Ok(T2Run { t2, run })
}

/// Click fraction among the shots in which the atom survived.
fn post_select(p: Point) -> Point {
    if p.shots == 0 || p.survivors == 0 {
        return p;
    }
    let value = p.clicks as f64 / p.survivors as f64;
    Point { value, error: Some(binomial_sigma(value, p.survivors)), ..p }
}

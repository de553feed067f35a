//! Damped nonlinear least squares and the two curve families used by the
//! experiments: sinusoidal fringes and exponential decays.

use std::f64::consts::TAU;

use nalgebra::{ DMatrix, DVector, SymmetricEigen };
use serde::{ Deserialize, Serialize };
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("invalid dataset: {0}")]
    InvalidData(&'static str),

    #[error("model is not finite at the initial parameters")]
    NonFiniteStart,

    #[error("frequency scan found no minimum")]
    NoMinimum,

    #[error("fit does not carry parameter '{0}'")]
    MissingParam(&'static str),
}

pub type FitResultT<T> = Result<T, FitError>;

/// Ordered (t, y) samples with optional per-point standard deviations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    t: Vec<f64>,
    y: Vec<f64>,
    sigma: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(t: Vec<f64>, y: Vec<f64>) -> FitResultT<Self> {
        if t.len() != y.len() {
            return Err(FitError::InvalidData("t and y differ in length"));
        }
        if t.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(FitError::InvalidData("non-finite sample"));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(FitError::InvalidData("t must be strictly increasing"));
        }
        Ok(Self { t, y, sigma: None })
    }

    /// Like [`Dataset::new`], additionally requiring every y in [0, 1].
    pub fn probabilities(t: Vec<f64>, y: Vec<f64>) -> FitResultT<Self> {
        if y.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(FitError::InvalidData("probability outside [0, 1]"));
        }
        Self::new(t, y)
    }

    pub fn with_sigma(mut self, sigma: Vec<f64>) -> FitResultT<Self> {
        if sigma.len() != self.t.len() {
            return Err(FitError::InvalidData("sigma differs in length"));
        }
        if sigma.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(FitError::InvalidData("sigma must be positive"));
        }
        self.sigma = Some(sigma);
        Ok(self)
    }

    /// Binomial weights σ = √(y(1−y)/N), floored at 1/(2N) so that points at
    /// 0 or 1 keep a finite weight.
    pub fn with_binomial_weights(self, shots: u64) -> FitResultT<Self> {
        let n = shots as f64;
        let sigma = self.y.iter()
            .map(|&y| (y * (1.0 - y) / n).sqrt().max(0.5 / n))
            .collect();
        self.with_sigma(sigma)
    }

    pub fn t(&self) -> &[f64] { &self.t }

    pub fn y(&self) -> &[f64] { &self.y }

    pub fn sigma(&self) -> Option<&[f64]> { self.sigma.as_deref() }

    pub fn len(&self) -> usize { self.t.len() }

    pub fn is_empty(&self) -> bool { self.t.is_empty() }

    pub fn span(&self) -> f64 {
        match (self.t.first(), self.t.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    fn weight(&self, i: usize) -> f64 {
        self.sigma.as_ref().map_or(1.0, |s| 1.0 / s[i])
    }
}

/// A parametric curve y = f(t; θ).
pub trait Model {
    fn n_params(&self) -> usize;

    fn eval(&self, t: f64, theta: &[f64]) -> f64;
}

/// A model given by a closure.
pub struct FnModel<F> {
    n_params: usize,
    f: F,
}

impl<F: Fn(f64, &[f64]) -> f64> FnModel<F> {
    pub fn new(n_params: usize, f: F) -> Self { Self { n_params, f } }
}

impl<F: Fn(f64, &[f64]) -> f64> Model for FnModel<F> {
    fn n_params(&self) -> usize { self.n_params }

    fn eval(&self, t: f64, theta: &[f64]) -> f64 { (self.f)(t, theta) }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitWarning {
    /// The curvature matrix is singular at the optimum; some parameter is
    /// unidentifiable and no standard errors are reported.
    SingularCurvature,
    /// The fitted amplitude is indistinguishable from zero.
    LowSignificance,
    /// The iteration cap was reached before convergence.
    IterationCap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub params: Vec<f64>,
    pub std_errors: Option<Vec<f64>>,
    pub covariance: Option<Vec<Vec<f64>>>,
    /// √(Σ wᵢ² rᵢ²) at the returned parameters.
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    pub warnings: Vec<FitWarning>,
    /// Cost after each accepted step, starting with the initial cost.
    #[serde(skip)]
    pub cost_trace: Vec<f64>,
}

impl FitResult {
    fn index(&self, name: &'static str) -> FitResultT<usize> {
        self.names.iter().position(|n| n == name).ok_or(FitError::MissingParam(name))
    }

    pub fn param(&self, name: &'static str) -> FitResultT<f64> {
        Ok(self.params[self.index(name)?])
    }

    pub fn std_error(&self, name: &'static str) -> FitResultT<Option<f64>> {
        let i = self.index(name)?;
        Ok(self.std_errors.as_ref().map(|s| s[i]))
    }

    pub fn has_warning(&self, w: FitWarning) -> bool { self.warnings.contains(&w) }

    pub fn is_singular(&self) -> bool { self.has_warning(FitWarning::SingularCurvature) }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeastSquaresOptions {
    pub max_iterations: usize,
    pub rel_cost_tol: f64,
    pub grad_tol: f64,
    pub initial_damping: f64,
}

impl Default for LeastSquaresOptions {
    fn default() -> Self {
        Self { max_iterations: 500, rel_cost_tol: 1e-12, grad_tol: 1e-10, initial_damping: 1e-8 }
    }
}

/// Central-difference step for parameter value `x`.
pub fn fd_step(x: f64) -> f64 { 1e-7_f64.max(1e-7 * x.abs()) }

/// ∂f(tᵢ; θ)/∂θⱼ by central differences, one row per sample time.
pub fn numeric_jacobian<M: Model + ?Sized>(model: &M, t: &[f64], theta: &[f64]) -> Vec<Vec<f64>> {
    let p = theta.len();
    let mut rows = vec![vec![0.0; p]; t.len()];
    let mut th = theta.to_vec();
    for j in 0..p {
        let h = fd_step(theta[j]);
        th[j] = theta[j] + h;
        let plus: Vec<f64> = t.iter().map(|&ti| model.eval(ti, &th)).collect();
        th[j] = theta[j] - h;
        let minus: Vec<f64> = t.iter().map(|&ti| model.eval(ti, &th)).collect();
        th[j] = theta[j];
        for i in 0..t.len() {
            rows[i][j] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    rows
}

fn weighted_residuals<M: Model + ?Sized>(model: &M, data: &Dataset, theta: &[f64]) -> DVector<f64> {
    DVector::from_iterator(
        data.len(),
        (0..data.len()).map(|i| (data.y[i] - model.eval(data.t[i], theta)) * data.weight(i)),
    )
}

fn weighted_jacobian<M: Model + ?Sized>(model: &M, data: &Dataset, theta: &[f64]) -> DMatrix<f64> {
    let rows = numeric_jacobian(model, &data.t, theta);
    DMatrix::from_fn(data.len(), theta.len(), |i, j| rows[i][j] * data.weight(i))
}

struct Curvature {
    singular: bool,
    inverse: Option<DMatrix<f64>>,
}

fn analyze_curvature(jtj: &DMatrix<f64>) -> Curvature {
    let p = jtj.nrows();
    let diag: Vec<f64> = (0..p).map(|i| jtj[(i, i)]).collect();
    let max_diag = diag.iter().cloned().fold(0.0, f64::max);
    if !(max_diag > 0.0) || diag.iter().any(|&d| !(d > 1e-300) || d < 1e-24 * max_diag) {
        return Curvature { singular: true, inverse: None };
    }
    let scale: Vec<f64> = diag.iter().map(|d| 1.0 / d.sqrt()).collect();
    let corr = DMatrix::from_fn(p, p, |i, j| jtj[(i, j)] * scale[i] * scale[j]);
    let eig = SymmetricEigen::new(corr.clone());
    let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min_eig > 1e-12) {
        return Curvature { singular: true, inverse: None };
    }
    let inv_corr = corr.try_inverse();
    let inverse = inv_corr.map(|m| DMatrix::from_fn(p, p, |i, j| m[(i, j)] * scale[i] * scale[j]));
    Curvature { singular: inverse.is_none(), inverse }
}

/// Levenberg–Marquardt with Marquardt diagonal scaling and numeric
/// derivatives.
pub fn least_squares<M: Model + ?Sized>(
    model: &M,
    data: &Dataset,
    theta0: &[f64],
    opts: &LeastSquaresOptions,
) -> FitResultT<FitResult> {
    let p = model.n_params();
    if theta0.len() != p {
        return Err(FitError::InvalidData("initial parameter vector has wrong length"));
    }
    if data.len() < p {
        return Err(FitError::TooFewPoints { needed: p, got: data.len() });
    }

    let mut theta = theta0.to_vec();
    let mut r = weighted_residuals(model, data, &theta);
    let mut cost = r.norm_squared();
    if !cost.is_finite() {
        return Err(FitError::NonFiniteStart);
    }
    let mut cost_trace = vec![cost];
    let mut lambda = opts.initial_damping;
    let mut converged = false;
    let mut iterations = 0;

    let mut jac = weighted_jacobian(model, data, &theta);
    'outer: while iterations < opts.max_iterations {
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        if jtr.norm() < opts.grad_tol || cost == 0.0 {
            converged = true;
            break;
        }
        let max_diag = (0..p).map(|i| jtj[(i, i)]).fold(0.0, f64::max);
        loop {
            let mut a = jtj.clone();
            for i in 0..p {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-12 * max_diag).max(1e-300);
            }
            let step = a.clone().cholesky().map(|c| c.solve(&jtr)).or_else(|| a.lu().solve(&jtr));
            if let Some(step) = step.filter(|s| s.iter().all(|v| v.is_finite())) {
                let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t + s).collect();
                let r_trial = weighted_residuals(model, data, &trial);
                let cost_trial = r_trial.norm_squared();
                if cost_trial.is_finite() && cost_trial < cost {
                    let rel = (cost - cost_trial) / cost;
                    theta = trial;
                    r = r_trial;
                    cost = cost_trial;
                    cost_trace.push(cost);
                    iterations += 1;
                    lambda = (lambda * 0.1).max(1e-15);
                    if rel < opts.rel_cost_tol {
                        converged = true;
                        break 'outer;
                    }
                    jac = weighted_jacobian(model, data, &theta);
                    continue 'outer;
                }
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                // No downhill step exists at working precision.
                converged = true;
                break 'outer;
            }
        }
    }

    let mut warnings = Vec::new();
    if !converged {
        warnings.push(FitWarning::IterationCap);
    }
    let jac = weighted_jacobian(model, data, &theta);
    let curvature = analyze_curvature(&(jac.transpose() * &jac));
    let dof = data.len().saturating_sub(p);
    let (std_errors, covariance) = match (&curvature.inverse, dof) {
        (Some(inv), dof) if dof > 0 => {
            let s2 = cost / dof as f64;
            let cov = inv * s2;
            let se = (0..p).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
            let rows = (0..p).map(|i| (0..p).map(|j| cov[(i, j)]).collect()).collect();
            (Some(se), Some(rows))
        }
        _ => (None, None),
    };
    if curvature.singular {
        warnings.push(FitWarning::SingularCurvature);
    }

    Ok(FitResult {
        names: (0..p).map(|i| format!("p{i}")).collect(),
        params: theta,
        std_errors,
        covariance,
        residual_norm: cost.sqrt(),
        converged,
        iterations,
        warnings,
        cost_trace,
    })
}

/// y = C + a·cos(2πft) + b·sin(2πft); θ = (C, a, b, f).
pub struct SinusoidModel;

impl Model for SinusoidModel {
    fn n_params(&self) -> usize { 4 }

    fn eval(&self, t: f64, th: &[f64]) -> f64 {
        let (s, c) = (TAU * th[3] * t).sin_cos();
        th[0] + th[1] * c + th[2] * s
    }
}

/// Plain: y = y0·e^{−t/τ}, θ = (y0, ln τ).
/// Offset: y = y∞ + (y0 − y∞)e^{−t/τ}, θ = (y0, ln τ, y∞).
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExponentialVariant {
    Plain,
    Offset,
}

pub struct ExponentialModel(pub ExponentialVariant);

impl Model for ExponentialModel {
    fn n_params(&self) -> usize {
        match self.0 {
            ExponentialVariant::Plain => 2,
            ExponentialVariant::Offset => 3,
        }
    }

    fn eval(&self, t: f64, th: &[f64]) -> f64 {
        let decay = (-t * (-th[1]).exp()).exp();
        match self.0 {
            ExponentialVariant::Plain => th[0] * decay,
            ExponentialVariant::Offset => th[2] + (th[0] - th[2]) * decay,
        }
    }
}

/// Ordinary linear least squares; returns (coefficients, residual sum of
/// squares).
fn linear_fit(columns: &[Vec<f64>], data: &Dataset) -> Option<(Vec<f64>, f64)> {
    let n = data.len();
    let p = columns.len();
    let x = DMatrix::from_fn(n, p, |i, j| columns[j][i] * data.weight(i));
    let y = DVector::from_iterator(n, (0..n).map(|i| data.y[i] * data.weight(i)));
    let beta = x.clone().svd(true, true).solve(&y, 1e-14).ok()?;
    let rss = (y - x * &beta).norm_squared();
    let beta: Vec<f64> = beta.iter().cloned().collect();
    Some((beta, rss)).filter(|(b, r)| r.is_finite() && b.iter().all(|v| v.is_finite()))
}

fn sinusoid_linear_at(data: &Dataset, f: f64) -> Option<(Vec<f64>, f64)> {
    let ones = vec![1.0; data.len()];
    let cos = data.t.iter().map(|&t| (TAU * f * t).cos()).collect();
    let sin = data.t.iter().map(|&t| (TAU * f * t).sin()).collect();
    linear_fit(&[ones, cos, sin], data)
}

/// Number of frequency grid points used when no hint is given.
pub const FREQUENCY_GRID_POINTS: usize = 200;

/// Fit y = C + A·cos(2πft + φ) with A ≥ 0. Reported parameters are
/// (A, f, phi, C); `f` is in cycles per unit of t.
pub fn fit_sinusoid(data: &Dataset, freq_hint: Option<f64>) -> FitResultT<FitResult> {
    if data.len() < 8 {
        return Err(FitError::TooFewPoints { needed: 8, got: data.len() });
    }
    let span = data.span();
    let f0 = match freq_hint {
        Some(f) if f.is_finite() && f > 0.0 => f,
        _ => {
            let (lo, hi) = (0.25 / span, 4.0 / span);
            let step = (hi - lo) / (FREQUENCY_GRID_POINTS - 1) as f64;
            (0..FREQUENCY_GRID_POINTS)
                .map(|k| lo + k as f64 * step)
                .filter_map(|f| sinusoid_linear_at(data, f).map(|(_, rss)| (f, rss)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .ok_or(FitError::NoMinimum)?
                .0
        }
    };
    let (lin, _) = sinusoid_linear_at(data, f0).ok_or(FitError::NoMinimum)?;
    let theta0 = [lin[0], lin[1], lin[2], f0];
    let raw = least_squares(&SinusoidModel, data, &theta0, &LeastSquaresOptions::default())?;

    let [c, a, b, f] = [raw.params[0], raw.params[1], raw.params[2], raw.params[3]];
    let amp = a.hypot(b);
    let phi = (-b).atan2(a);
    // Jacobian of (A, f, φ, C) with respect to (C, a, b, f).
    let transform = if amp > 0.0 {
        Some([
            [0.0, a / amp, b / amp, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [0.0, b / (amp * amp), -a / (amp * amp), 0.0],
            [1.0, 0.0, 0.0, 0.0],
        ])
    } else {
        None
    };
    let covariance = match (&raw.covariance, transform) {
        (Some(cov), Some(tr)) => Some(
            (0..4)
                .map(|i| {
                    (0..4)
                        .map(|j| {
                            let mut acc = 0.0;
                            for k in 0..4 {
                                for l in 0..4 {
                                    acc += tr[i][k] * cov[k][l] * tr[j][l];
                                }
                            }
                            acc
                        })
                        .collect::<Vec<f64>>()
                })
                .collect::<Vec<_>>(),
        ),
        _ => None,
    };
    let std_errors = covariance.as_ref().map(|c| (0..4).map(|i| c[i][i].max(0.0).sqrt()).collect::<Vec<_>>());

    let mut warnings = raw.warnings.clone();
    let noise_floor = 1e-9 * (1.0 + c.abs());
    let insignificant = amp <= noise_floor
        || std_errors.as_ref().is_some_and(|se| amp < 2.0 * se[0]);
    if insignificant {
        warnings.push(FitWarning::LowSignificance);
    }
    Ok(FitResult {
        names: ["A", "f", "phi", "C"].iter().map(|s| s.to_string()).collect(),
        params: vec![amp, f, phi, c],
        std_errors,
        covariance,
        warnings,
        ..raw
    })
}

/// Fringe contrast A/C of a fitted sinusoid.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Visibility {
    pub value: f64,
    pub std_error: Option<f64>,
    /// C ≤ A: the fitted curve reaches zero and the contrast is pinned to 1.
    pub saturated: bool,
}

pub fn visibility(fit: &FitResult) -> FitResultT<Visibility> {
    let ia = fit.index("A")?;
    let ic = fit.index("C")?;
    let (amp, offset) = (fit.params[ia], fit.params[ic]);
    if offset <= amp {
        return Ok(Visibility { value: 1.0, std_error: None, saturated: true });
    }
    let value = amp / offset;
    // Delta method on A/C.
    let std_error = fit.covariance.as_ref().map(|cov| {
        let (da, dc) = (1.0 / offset, -amp / (offset * offset));
        (da * da * cov[ia][ia] + 2.0 * da * dc * cov[ia][ic] + dc * dc * cov[ic][ic]).max(0.0).sqrt()
    });
    Ok(Visibility { value, std_error, saturated: false })
}

fn exponential_linear_at(data: &Dataset, variant: ExponentialVariant, tau: f64) -> Option<(Vec<f64>, f64)> {
    let decay: Vec<f64> = data.t.iter().map(|&t| (-t / tau).exp()).collect();
    match variant {
        ExponentialVariant::Plain => linear_fit(&[decay], data),
        ExponentialVariant::Offset => {
            let rest = decay.iter().map(|d| 1.0 - d).collect();
            linear_fit(&[decay, rest], data)
        }
    }
}

fn log_linear_tau(data: &Dataset, variant: ExponentialVariant) -> Option<f64> {
    let y = &data.y;
    let transformed: Vec<(f64, f64)> = match variant {
        ExponentialVariant::Plain => data.t.iter().zip(y).map(|(&t, &v)| (t, v)).collect(),
        ExponentialVariant::Offset => {
            let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let margin = 0.05 * (hi - lo);
            if !(margin > 0.0) {
                return None;
            }
            let decreasing = y.first()? > y.last()?;
            data.t.iter().zip(y).map(|(&t, &v)| {
                (t, if decreasing { v - (lo - margin) } else { hi + margin - v })
            }).collect()
        }
    };
    if transformed.iter().any(|&(_, z)| !(z > 0.0)) {
        return None;
    }
    let n = transformed.len() as f64;
    let (st, sz) = transformed.iter().fold((0.0, 0.0), |(a, b), &(t, z)| (a + t, b + z.ln()));
    let (mt, mz) = (st / n, sz / n);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, z) in &transformed {
        sxy += (t - mt) * (z.ln() - mz);
        sxx += (t - mt) * (t - mt);
    }
    let slope = sxy / sxx;
    (slope < 0.0 && slope.is_finite()).then(|| -1.0 / slope)
}

fn grid_tau(data: &Dataset, variant: ExponentialVariant) -> Option<f64> {
    let span = data.span();
    let (lo, hi) = ((span / 100.0).ln(), (10.0 * span).ln());
    (0..200)
        .map(|k| (lo + (hi - lo) * k as f64 / 199.0).exp())
        .filter_map(|tau| exponential_linear_at(data, variant, tau).map(|(_, rss)| (tau, rss)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(tau, _)| tau)
}

/// Fit an exponential decay; reported parameters are (y0, tau) or
/// (y0, tau, y_inf).
pub fn fit_exponential(data: &Dataset, variant: ExponentialVariant) -> FitResultT<FitResult> {
    if data.len() < 4 {
        return Err(FitError::TooFewPoints { needed: 4, got: data.len() });
    }
    if !(data.span() > 0.0) {
        return Err(FitError::InvalidData("zero time span"));
    }
    let tau0 = log_linear_tau(data, variant)
        .filter(|tau| tau.is_finite() && *tau > 0.0)
        .or_else(|| grid_tau(data, variant))
        .ok_or(FitError::NoMinimum)?;
    let (lin, _) = exponential_linear_at(data, variant, tau0).ok_or(FitError::NoMinimum)?;
    let theta0: Vec<f64> = match variant {
        ExponentialVariant::Plain => vec![lin[0], tau0.ln()],
        ExponentialVariant::Offset => vec![lin[0], tau0.ln(), lin[1]],
    };
    let raw = least_squares(&ExponentialModel(variant), data, &theta0, &LeastSquaresOptions::default())?;

    let tau = raw.params[1].exp();
    let mut params = raw.params.clone();
    params[1] = tau;
    // d tau / d ln tau = tau.
    let covariance = raw.covariance.as_ref().map(|cov| {
        let p = cov.len();
        (0..p)
            .map(|i| {
                (0..p)
                    .map(|j| {
                        let si = if i == 1 { tau } else { 1.0 };
                        let sj = if j == 1 { tau } else { 1.0 };
                        cov[i][j] * si * sj
                    })
                    .collect::<Vec<f64>>()
            })
            .collect::<Vec<_>>()
    });
    let std_errors = covariance.as_ref().map(|c| (0..c.len()).map(|i| c[i][i].max(0.0).sqrt()).collect());
    let names: &[&str] = match variant {
        ExponentialVariant::Plain => &["y0", "tau"],
        ExponentialVariant::Offset => &["y0", "tau", "y_inf"],
    };
    Ok(FitResult {
        names: names.iter().map(|s| s.to_string()).collect(),
        params,
        std_errors,
        covariance,
        ..raw
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand_distr::{ Distribution, Normal };

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(Dataset::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(Dataset::probabilities(vec![0.0, 1.0], vec![0.5, 1.2]).is_err());
        let d = Dataset::new(vec![0.0, 1.0], vec![0.5, 0.6]).unwrap();
        assert!(d.clone().with_sigma(vec![0.1, 0.0]).is_err());
        assert!(d.with_sigma(vec![0.1, 0.2]).is_ok());
    }

    #[test]
    fn exact_line() {
        let t = linspace(0.0, 3.0, 10);
        let y = t.iter().map(|t| 2.5 * t - 0.75).collect();
        let data = Dataset::new(t, y).unwrap();
        let model = FnModel::new(2, |t, th: &[f64]| th[0] * t + th[1]);
        let fit = least_squares(&model, &data, &[1.0, 0.0], &Default::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.params[0] - 2.5).abs() < 1e-12);
        assert!((fit.params[1] + 0.75).abs() < 1e-12);
        assert!(fit.residual_norm < 1e-12);
        assert!(fit.iterations <= 2, "{}", fit.iterations);
    }

    #[test]
    fn rabi_frequency_recovered() {
        let omega = 2.0 * std::f64::consts::PI * 78.125;
        let t = linspace(0.0, 0.03, 50);
        let y = t.iter().map(|t| (0.5 * omega * t).cos().powi(2)).collect();
        let data = Dataset::new(t, y).unwrap();
        let model = FnModel::new(1, |t, th: &[f64]| (0.5 * th[0] * t).cos().powi(2));
        for start in [0.8, 1.2] {
            let fit = least_squares(&model, &data, &[start * omega], &Default::default()).unwrap();
            assert!(((fit.params[0] - omega) / omega).abs() < 1e-6);
        }
    }

    #[test]
    fn exponential_examples() {
        let t = linspace(0.0, 1.5, 16);
        let y = t.iter().map(|t| (-t / 0.44).exp()).collect();
        let fit = fit_exponential(&Dataset::new(t.clone(), y).unwrap(), ExponentialVariant::Plain).unwrap();
        assert!((fit.param("tau").unwrap() / 0.44 - 1.0).abs() < 1e-6);

        let y = t.iter().map(|t| 0.5 + 0.5 * (-t / 0.49).exp()).collect();
        let fit = fit_exponential(&Dataset::new(t.clone(), y).unwrap(), ExponentialVariant::Offset).unwrap();
        assert!((fit.param("tau").unwrap() / 0.49 - 1.0).abs() < 1e-6);
        assert!((fit.param("y_inf").unwrap() - 0.5).abs() < 1e-7);

        // Rising toward the asymptote.
        let y = t.iter().map(|t| 0.5 - 0.45 * (-t / 0.3).exp()).collect();
        let fit = fit_exponential(&Dataset::new(t.clone(), y).unwrap(), ExponentialVariant::Offset).unwrap();
        assert!((fit.param("tau").unwrap() / 0.3 - 1.0).abs() < 1e-6);

        let y = vec![0.5; t.len()];
        let fit = fit_exponential(&Dataset::new(t, y).unwrap(), ExponentialVariant::Offset).unwrap();
        assert!(fit.is_singular());
        assert!(fit.std_errors.is_none());
    }

    #[test]
    fn exponential_grid_fallback_on_negative_data() {
        let t = linspace(0.0, 2.0, 12);
        let y = t.iter().map(|t| -0.3 * (-t / 0.7).exp()).collect();
        let fit = fit_exponential(&Dataset::new(t, y).unwrap(), ExponentialVariant::Plain).unwrap();
        assert!((fit.param("tau").unwrap() / 0.7 - 1.0).abs() < 1e-6);
        assert!((fit.param("y0").unwrap() + 0.3).abs() < 1e-8);
    }

    #[test]
    fn sinusoid_examples() {
        let f = 61.0;
        let t = linspace(0.0, 0.05, 30);
        let y = t.iter().map(|t| 0.5 + 0.48 * (TAU * f * t).cos()).collect();
        let fit = fit_sinusoid(&Dataset::new(t.clone(), y).unwrap(), None).unwrap();
        assert!((fit.param("A").unwrap() - 0.48).abs() < 1e-9);
        assert!((fit.param("C").unwrap() - 0.5).abs() < 1e-9);
        assert!((fit.param("f").unwrap() / f - 1.0).abs() < 1e-9);
        assert!(fit.param("phi").unwrap().abs() < 1e-7);
        let v = visibility(&fit).unwrap();
        assert!((v.value - 0.96).abs() < 1e-9);

        let y = vec![0.5; t.len()];
        let fit = fit_sinusoid(&Dataset::new(t.clone(), y).unwrap(), None).unwrap();
        assert!(fit.param("A").unwrap() < 1e-9);
        assert!(fit.has_warning(FitWarning::LowSignificance));
        assert_eq!(visibility(&fit).unwrap().value, fit.param("A").unwrap() / fit.param("C").unwrap());

        assert!(matches!(
            fit_sinusoid(&Dataset::new(linspace(0.0, 1.0, 5), vec![0.0; 5]).unwrap(), None),
            Err(FitError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn visibility_examples() {
        let make = |a: f64, c: f64| FitResult {
            names: ["A", "f", "phi", "C"].iter().map(|s| s.to_string()).collect(),
            params: vec![a, 1.0, 0.0, c],
            std_errors: None,
            covariance: None,
            residual_norm: 0.0,
            converged: true,
            iterations: 0,
            warnings: vec![],
            cost_trace: vec![],
        };
        let v = visibility(&make(0.5, 0.5)).unwrap();
        assert_eq!(v.value, 1.0);
        assert!(v.saturated);
        assert!((visibility(&make(0.48, 0.5)).unwrap().value - 0.96).abs() < 1e-15);
        assert_eq!(visibility(&make(0.0, 0.3)).unwrap().value, 0.0);
    }

    #[test]
    fn jacobian_matches_analytic_derivatives() {
        let mut rng = stream(5, &[]);
        use rand::Rng;
        let t: Vec<f64> = linspace(0.0, 0.9, 7);
        for _ in 0..10 {
            let th = [
                rng.random_range(0.0..1.0),
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(1.0..5.0),
            ];
            let jac = numeric_jacobian(&SinusoidModel, &t, &th);
            for (i, &ti) in t.iter().enumerate() {
                let (s, c) = (TAU * th[3] * ti).sin_cos();
                let exact = [1.0, c, s, TAU * ti * (-th[1] * s + th[2] * c)];
                for j in 0..4 {
                    let scale = exact[j].abs().max(1.0);
                    assert!((jac[i][j] - exact[j]).abs() / scale < 1e-5);
                }
            }

            let th = [rng.random_range(0.2..1.0), rng.random_range(-2.0..0.5), rng.random_range(0.0..0.5)];
            let jac = numeric_jacobian(&ExponentialModel(ExponentialVariant::Offset), &t, &th);
            for (i, &ti) in t.iter().enumerate() {
                let tau = th[1].exp();
                let e = (-ti / tau).exp();
                let exact = [e, (th[0] - th[2]) * e * ti / tau, 1.0 - e];
                for j in 0..3 {
                    let scale = exact[j].abs().max(1.0);
                    assert!((jac[i][j] - exact[j]).abs() / scale < 1e-5);
                }
            }
        }
    }

    #[test]
    fn accepted_steps_never_increase_cost() {
        let t = linspace(0.0, 0.05, 25);
        let mut rng = stream(9, &[]);
        let noise = Normal::new(0.0, 0.03).unwrap();
        let y = t.iter().map(|t| 0.5 + 0.4 * (TAU * 40.0 * t + 0.3).cos() + noise.sample(&mut rng)).collect();
        let fit = fit_sinusoid(&Dataset::new(t, y).unwrap(), None).unwrap();
        assert!(fit.cost_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(fit.cost_trace.len() >= 2);
    }

    #[test]
    fn error_bars_are_calibrated() {
        let t = linspace(0.0, 1.5, 30);
        let noise = Normal::new(0.0, 0.02).unwrap();
        let mut covered = [0usize; 3];
        let truth = [0.9, 0.49, 0.5];
        let n = 200;
        for seed in 0..n {
            let mut rng = stream(1234, &[seed]);
            let y = t.iter()
                .map(|t| truth[2] + (truth[0] - truth[2]) * (-t / truth[1]).exp() + noise.sample(&mut rng))
                .collect();
            let fit = fit_exponential(&Dataset::new(t.clone(), y).unwrap(), ExponentialVariant::Offset).unwrap();
            let se = fit.std_errors.clone().unwrap();
            for j in 0..3 {
                if (fit.params[j] - truth[j]).abs() <= se[j] {
                    covered[j] += 1;
                }
            }
        }
        for c in covered {
            let frac = c as f64 / n as f64;
            assert!((0.55..=0.80).contains(&frac), "coverage {frac}");
        }
    }

    #[test]
    fn singular_data_reported() {
        let data = Dataset::new(vec![0.0, 1.0, 2.0], vec![1.0, 1.0, 1.0]).unwrap();
        let model = FnModel::new(2, |_t, th: &[f64]| th[0] + th[1]);
        let fit = least_squares(&model, &data, &[0.0, 0.0], &Default::default()).unwrap();
        assert!(fit.is_singular());
        assert!(fit.std_errors.is_none());
    }
}

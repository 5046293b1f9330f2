//! Effective dimension, eigenvalue-decay bounds, parameter rules and rate
//! curves.
//!
//! The empirical spectrum convention throughout is `eig(K_n) / n`, which
//! puts effective dimensions, leverage scores and the λ rules on a single
//! scale: `d_eff(eig(K_n)/n, λ) = Σ_i ℓ_λ(i)`.

use crate::error::{Error, Result};
use crate::kernels::GramMatrix;
use crate::numerics::eig_sym;
use crate::sampling::{LeverageScores, ScoreMode};

/// Eigenvalue decay assumption on the covariance spectrum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DecayModel {
    /// `σ_i ≤ a_γ i^{-1/γ}`, `γ ∈ (0, 1]`.
    Polynomial { gamma: f64, a_gamma: f64 },
    /// `σ_i ≤ a_β e^{-βi}`.
    Exponential { beta: f64, a_beta: f64 },
}

impl DecayModel {
    pub fn polynomial(gamma: f64, a_gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::invalid(format!("gamma must lie in (0,1], got {gamma}")));
        }
        if !(a_gamma > 0.0 && a_gamma.is_finite()) {
            return Err(Error::invalid("a_gamma must be positive"));
        }
        Ok(DecayModel::Polynomial { gamma, a_gamma })
    }

    pub fn exponential(beta: f64, a_beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) || !(a_beta > 0.0 && a_beta.is_finite()) {
            return Err(Error::invalid("beta and a_beta must be positive"));
        }
        Ok(DecayModel::Exponential { beta, a_beta })
    }

    /// Upper bound on the `i`-th eigenvalue, `i ≥ 1`.
    pub fn eigenvalue_bound(&self, i: usize) -> f64 {
        let i = i as f64;
        match *self {
            DecayModel::Polynomial { gamma, a_gamma } => a_gamma * i.powf(-1.0 / gamma),
            DecayModel::Exponential { beta, a_beta } => a_beta * (-beta * i).exp(),
        }
    }
}

/// Predicted error values for a range of node counts.
#[derive(Clone, Debug, PartialEq)]
pub struct RatePrediction {
    pub m_values: Vec<usize>,
    pub predicted_error: Vec<f64>,
    pub label: String,
}

/// `Σ_j σ_j / (σ_j + λ)`.
pub fn effective_dimension(spectrum: &[f64], lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    let mut total = 0.0;
    for (i, &s) in spectrum.iter().enumerate() {
        if s < -1e-12 || !s.is_finite() {
            return Err(Error::invalid(format!("spectrum entry {i} is {s}")));
        }
        let s = s.max(0.0);
        total += s / (s + lambda);
    }
    Ok(total)
}

/// Eigenvalues of `K_n / n`, descending.
pub fn empirical_spectrum(k: &GramMatrix) -> Result<Vec<f64>> {
    let n = k.nrows() as f64;
    Ok(eig_sym(&k.entries)?.eigenvalues.into_iter().map(|s| s / n).collect())
}

/// `n · max_i ℓ_λ(i)`, the empirical counterpart of `d_∞(λ)`.
pub fn d_infinity_empirical(scores: &LeverageScores) -> Result<f64> {
    if scores.mode != ScoreMode::Exact {
        return Err(Error::invalid("d_infinity needs exact leverage scores"));
    }
    let max = scores.values.iter().copied().fold(0.0, f64::max);
    Ok(scores.values.len() as f64 * max)
}

/// Outcome of checking the effective-dimension bound at one λ.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundCheck {
    pub lambda: f64,
    pub d_eff: f64,
    pub bound: f64,
    /// `bound - d_eff`; nonnegative when the bound holds.
    pub margin: f64,
}

/// Checks `d_eff(λ) ≤ c_γ λ^{-γ}` (polynomial) or `≤ log(1 + a_β/λ)/β`
/// (exponential) at every λ, after verifying the spectrum obeys the model.
///
/// For `γ = 1` the constant is the trace of the spectrum, which never
/// exceeds `K²`.
pub fn check_decay_bounds(model: &DecayModel, spectrum: &[f64], lambdas: &[f64]) -> Result<Vec<BoundCheck>> {
    for (i, &s) in spectrum.iter().enumerate() {
        let cap = model.eigenvalue_bound(i + 1);
        if s > cap * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "spectrum violates the decay model at index {}: {s:e} > {cap:e}",
                i + 1
            )));
        }
    }
    lambdas
        .iter()
        .map(|&lambda| {
            let d_eff = effective_dimension(spectrum, lambda)?;
            let bound = match *model {
                DecayModel::Polynomial { gamma, a_gamma } => {
                    let c = if gamma < 1.0 {
                        a_gamma / (1.0 - gamma)
                    } else {
                        spectrum.iter().map(|s| s.max(0.0)).sum()
                    };
                    c * lambda.powf(-gamma)
                }
                DecayModel::Exponential { beta, a_beta } => (1.0 + a_beta / lambda).ln() / beta,
            };
            Ok(BoundCheck { lambda, d_eff, bound, margin: bound - d_eff })
        })
        .collect()
}

/// Which proof the regularization rule comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LambdaStrategy {
    /// `12K² log(m/δ)/m`, with `size = m`.
    Uniform,
    /// `19K² log(32n/δ)/n`, with `size = n`.
    Arls,
}

pub fn lambda_rule(strategy: LambdaStrategy, size: usize, k_bound: f64, delta: f64) -> f64 {
    let s = size as f64;
    let k2 = k_bound * k_bound;
    match strategy {
        LambdaStrategy::Uniform => 12.0 * k2 * (s / delta).ln() / s,
        LambdaStrategy::Arls => 19.0 * k2 * (32.0 * s / delta).ln() / s,
    }
}

/// Number of ARLS nodes prescribed for `n` samples.
///
/// Polynomial decay: `n^γ (log(32n/δ))^{1-γ} 78 c_γ z² / (19K²)^γ` with
/// `c_γ = a_γ/(1-γ)`, or `K²` when `γ = 1`. Exponential decay:
/// `max(334, 78z²/β) log(max(2a_β/(19K²), 48/δ) n)²`.
pub fn subsample_size_rule(n: usize, model: &DecayModel, z: f64, delta: f64, k_bound: f64) -> usize {
    let nf = n as f64;
    let k2 = k_bound * k_bound;
    let m = match *model {
        DecayModel::Polynomial { gamma, a_gamma } => {
            let c = if gamma < 1.0 { a_gamma / (1.0 - gamma) } else { k2 };
            nf.powf(gamma) * (32.0 * nf / delta).ln().powf(1.0 - gamma) * 78.0 * c * z * z
                / (19.0 * k2).powf(gamma)
        }
        DecayModel::Exponential { beta, a_beta } => {
            let lead = f64::max(334.0, 78.0 * z * z / beta);
            let inner = f64::max(2.0 * a_beta / (19.0 * k2), 48.0 / delta) * nf;
            lead * inner.ln().powi(2)
        }
    };
    m.ceil() as usize
}

/// Shape of a theoretical convergence curve in `m`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RateCurve {
    /// `m^{-1/2}`.
    MonteCarlo,
    /// `(log m / m)^{s/d}`.
    Sobolev { order: u32, dim: usize },
    /// Uniform sampling, polynomial decay: `(log m / m)^{1-γ/2}`.
    UniformPolynomial { gamma: f64 },
    /// Uniform sampling, exponential decay: `log m / m`.
    UniformExponential,
    /// Leverage-score sampling, polynomial decay: `(log m / m)^{1/(2γ)}`.
    ArlsPolynomial { gamma: f64 },
    /// Leverage-score sampling, exponential decay: `m^{1/4} / exp(√m / c)`.
    ArlsExponential { c: f64 },
}

impl RateCurve {
    pub fn value(&self, m: f64) -> f64 {
        let lm = m.ln();
        match *self {
            RateCurve::MonteCarlo => m.powf(-0.5),
            RateCurve::Sobolev { order, dim } => (lm / m).powf(order as f64 / dim as f64),
            RateCurve::UniformPolynomial { gamma } => (lm / m).powf(1.0 - gamma / 2.0),
            RateCurve::UniformExponential => lm / m,
            RateCurve::ArlsPolynomial { gamma } => (lm / m).powf(1.0 / (2.0 * gamma)),
            RateCurve::ArlsExponential { c } => m.powf(0.25) / (m.sqrt() / c).exp(),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            RateCurve::MonteCarlo => "monte-carlo m^-1/2".into(),
            RateCurve::Sobolev { order, dim } => format!("sobolev (log m/m)^({order}/{dim})"),
            RateCurve::UniformPolynomial { gamma } => format!("uniform poly gamma={gamma}"),
            RateCurve::UniformExponential => "uniform exp log m/m".into(),
            RateCurve::ArlsPolynomial { gamma } => format!("arls poly gamma={gamma}"),
            RateCurve::ArlsExponential { c } => format!("arls exp c={c}"),
        }
    }
}

pub fn theoretical_rate_curve(curve: &RateCurve, m_values: &[usize], constant: f64) -> Result<RatePrediction> {
    if let Some(&bad) = m_values.iter().find(|&&m| m < 2) {
        return Err(Error::invalid(format!("rate curves need m >= 2, got {bad}")));
    }
    if let RateCurve::ArlsExponential { c } = curve {
        if !(*c > 0.0) {
            return Err(Error::invalid("exponential rate constant must be positive"));
        }
    }
    Ok(RatePrediction {
        m_values: m_values.to_vec(),
        predicted_error: m_values.iter().map(|&m| constant * curve.value(m as f64)).collect(),
        label: curve.label(),
    })
}

/// Least-squares line through `(log m, log error)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination; reported as 0 when the errors are
    /// constant, where it is otherwise undefined.
    pub r_squared: f64,
}

pub fn rate_slope(m_values: &[f64], errors: &[f64]) -> Result<SlopeFit> {
    if m_values.len() != errors.len() {
        return Err(Error::DimensionMismatch { expected: m_values.len(), found: errors.len() });
    }
    if m_values.len() < 3 {
        return Err(Error::invalid("rate fit needs at least three points"));
    }
    if let Some(e) = errors.iter().find(|&&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::invalid(format!("rate fit needs positive errors, got {e}")));
    }
    if let Some(m) = m_values.iter().find(|&&m| !(m > 0.0 && m.is_finite())) {
        return Err(Error::invalid(format!("rate fit needs positive m, got {m}")));
    }
    let xs: Vec<f64> = m_values.iter().map(|m| m.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    linear_fit(&xs, &ys)
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("rate fit needs at least two distinct m values"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 0.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(SlopeFit { slope, intercept, r_squared })
}

/// Fits a decay model to an empirical spectrum.
///
/// Uses the eigenvalues above `1e-12 σ₁`, keeps the top half of them, and
/// regresses `log σ_i` on `log i` (polynomial, giving `γ = -1/slope`) or on
/// `i` (exponential, giving `β = -slope`). Diagnostic only.
pub fn decay_fit(spectrum: &[f64], exponential: bool) -> Result<DecayModel> {
    let top = spectrum.first().copied().unwrap_or(0.0);
    if !(top > 0.0) {
        return Err(Error::invalid("spectrum has no positive eigenvalue"));
    }
    let kept = spectrum.iter().take_while(|&&s| s > 1e-12 * top).count();
    let half = kept.div_ceil(2);
    if half < 2 {
        return Err(Error::invalid("too few eigenvalues above threshold to fit a decay"));
    }
    let idx: Vec<f64> = (1..=half).map(|i| i as f64).collect();
    let vals = &spectrum[..half];
    let logs: Vec<f64> = vals.iter().map(|v| v.ln()).collect();
    if exponential {
        let fit = linear_fit(&idx, &logs)?;
        DecayModel::exponential((-fit.slope).max(f64::MIN_POSITIVE), fit.intercept.exp())
    } else {
        let log_idx: Vec<f64> = idx.iter().map(|i| i.ln()).collect();
        let fit = linear_fit(&log_idx, &logs)?;
        let gamma = (-1.0 / fit.slope).clamp(f64::MIN_POSITIVE, 1.0);
        DecayModel::polynomial(gamma, fit.intercept.exp())
    }
}

//! Fitted convergence slopes against a theoretical curve.

use std::io::Write;

use kquad_core::kernels::{parse_value, split_spec};
use kquad_core::spectral::{rate_slope, theoretical_rate_curve, RateCurve, SlopeFit};

use crate::error::{BenchError, Result};
use crate::summary::SummaryRow;

/// Parses `monte-carlo`, `sobolev:s=<int>,d=<int>`, `uniform-poly:gamma=<g>`,
/// `uniform-exp`, `arls-poly:gamma=<g>` or `arls-exp:c=<c>`.
pub fn parse_rate_model(s: &str) -> Result<RateCurve> {
    let (name, params) = split_spec(s)?;
    let mut order = None;
    let mut dim = 1;
    let mut gamma = None;
    let mut c = None;
    for (k, v) in params {
        match (name, k) {
            ("sobolev", "s") => order = Some(parse_value::<u32>(k, v)?),
            ("sobolev", "d") => dim = parse_value(k, v)?,
            ("uniform-poly" | "arls-poly", "gamma") => gamma = Some(parse_value::<f64>(k, v)?),
            ("arls-exp", "c") => c = Some(parse_value::<f64>(k, v)?),
            _ => return Err(BenchError::input(format!("unknown parameter `{k}` for rate model `{name}`"))),
        }
    }
    let need = |v: Option<f64>, what: &str| {
        v.filter(|x| *x > 0.0 && x.is_finite())
            .ok_or_else(|| BenchError::input(format!("rate model `{name}` needs a positive {what}")))
    };
    Ok(match name {
        "monte-carlo" => RateCurve::MonteCarlo,
        "sobolev" => {
            let order = order.filter(|&s| s >= 1).ok_or_else(|| BenchError::input("sobolev rate needs s >= 1"))?;
            if dim == 0 {
                return Err(BenchError::input("sobolev rate needs d >= 1"));
            }
            RateCurve::Sobolev { order, dim }
        }
        "uniform-poly" => RateCurve::UniformPolynomial { gamma: need(gamma, "gamma")? },
        "uniform-exp" => RateCurve::UniformExponential,
        "arls-poly" => RateCurve::ArlsPolynomial { gamma: need(gamma, "gamma")? },
        "arls-exp" => RateCurve::ArlsExponential { c: need(c, "c")? },
        other => return Err(BenchError::input(format!("unknown rate model `{other}`"))),
    })
}

/// Observed and predicted log-log slopes for one method.
#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    pub method: String,
    pub points: usize,
    pub fitted: SlopeFit,
    /// Slope of the least-squares line through the model curve on the same
    /// grid.
    pub predicted_slope: f64,
}

pub const RATES_HEADER: &str = "method,points,fitted_slope,r_squared,predicted_slope";

/// One report per method with at least three grid points, in summary order.
pub fn rate_reports(summary: &[SummaryRow], model: &RateCurve) -> Result<Vec<RateReport>> {
    let mut methods: Vec<&str> = Vec::new();
    for r in summary {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let mut reports = Vec::new();
    for method in methods {
        let rows: Vec<&SummaryRow> = summary.iter().filter(|r| r.method == method).collect();
        if rows.len() < 3 {
            continue;
        }
        let ms: Vec<usize> = rows.iter().map(|r| r.m).collect();
        let errors: Vec<f64> = rows.iter().map(|r| r.error_median).collect();
        let m_f: Vec<f64> = ms.iter().map(|&m| m as f64).collect();
        let fitted = rate_slope(&m_f, &errors)?;
        let curve = theoretical_rate_curve(model, &ms, 1.0)?;
        let predicted_slope = rate_slope(&m_f, &curve.predicted_error)?.slope;
        reports.push(RateReport { method: method.to_string(), points: ms.len(), fitted, predicted_slope });
    }
    if reports.is_empty() {
        return Err(BenchError::input("no method has three or more grid points"));
    }
    Ok(reports)
}

pub fn write_reports<W: Write>(reports: &[RateReport], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{RATES_HEADER}")?;
    for r in reports {
        writeln!(
            out,
            "{},{},{:.4},{:.4},{:.4}",
            r.method, r.points, r.fitted.slope, r.fitted.r_squared, r.predicted_slope
        )?;
    }
    Ok(())
}

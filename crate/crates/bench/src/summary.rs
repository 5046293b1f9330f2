//! Per-(method, m) medians and deviations.

use std::io::Write;

use crate::error::{BenchError, Result};
use crate::experiment::ExperimentResult;

pub const SUMMARY_HEADER: &str = "method,m,error_median,error_std,time_median,time_std";

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub m: usize,
    pub error_median: f64,
    pub error_std: f64,
    pub time_median: f64,
    pub time_std: f64,
}

/// Median with the midpoint convention for even counts.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty sample");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = v.len() / 2;
    if v.len() % 2 == 1 {
        v[h]
    } else {
        0.5 * (v[h - 1] + v[h])
    }
}

/// Sample standard deviation (`n − 1` denominator); 0 for a single value.
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    // shifted by the first value so that identical samples give exactly 0
    let d: Vec<f64> = values.iter().map(|v| v - values[0]).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// Groups consecutive rows with equal (method, m); the result is in row order.
pub fn summarize(result: &ExperimentResult) -> Result<Vec<SummaryRow>> {
    if result.rows.is_empty() {
        return Err(BenchError::input("nothing to summarize"));
    }
    Ok(result
        .rows
        .chunk_by(|a, b| a.method == b.method && a.m == b.m)
        .map(|g| {
            let errors: Vec<f64> = g.iter().map(|r| r.error).collect();
            let times: Vec<f64> = g.iter().map(|r| r.total_time_s).collect();
            SummaryRow {
                method: g[0].method.clone(),
                m: g[0].m,
                error_median: median(&errors),
                error_std: sample_std(&errors),
                time_median: median(&times),
                time_std: sample_std(&times),
            }
        })
        .collect())
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{:e},{:e},{:e},{:e}",
            r.method, r.m, r.error_median, r.error_std, r.time_median, r.time_std
        )?;
    }
    Ok(())
}

/// Reads a summary CSV. Only `method`, `m` and `error_median` are required;
/// missing statistics read as 0.
pub fn read_summary(text: &str) -> Result<Vec<SummaryRow>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| BenchError::input("summary file is empty"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |name: &str| cols.iter().position(|c| *c == name);
    let need = |name: &str| find(name).ok_or_else(|| BenchError::input(format!("summary lacks a `{name}` column")));
    let (c_method, c_m, c_err) = (need("method")?, need("m")?, need("error_median")?);
    let optional = ["error_std", "time_median", "time_std"].map(find);
    let mut rows = Vec::new();
    for (i, line) in lines {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != cols.len() {
            return Err(BenchError::input(format!("row {}: expected {} columns", i + 1, cols.len())));
        }
        let num = |c: usize| -> Result<f64> {
            cells[c]
                .parse()
                .map_err(|_| BenchError::input(format!("row {}, column {}: not a number", i + 1, c + 1)))
        };
        let m = cells[c_m]
            .parse()
            .map_err(|_| BenchError::input(format!("row {}, column {}: not a count", i + 1, c_m + 1)))?;
        let opt = |c: Option<usize>| c.map(num).transpose().map(|v| v.unwrap_or(0.0));
        rows.push(SummaryRow {
            method: cells[c_method].to_string(),
            m,
            error_median: num(c_err)?,
            error_std: opt(optional[0])?,
            time_median: opt(optional[1])?,
            time_std: opt(optional[2])?,
        });
    }
    Ok(rows)
}

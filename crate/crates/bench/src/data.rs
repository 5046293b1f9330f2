//! Dataset ingestion and synthetic generators.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use kquad_core::kernels::{parse_value, split_spec};
use kquad_core::rng::{derive_seed, stream};
use kquad_core::{Dataset, Points};
use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{BenchError, Result};

/// Reads a numeric CSV file, one point per row.
///
/// A first row that does not parse as numbers is taken as a header. Blank
/// lines are ignored.
pub fn load_csv(path: &Path, standardize: bool, delimiter: char) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_csv(&text, &name, standardize, delimiter)
        .map_err(|e| BenchError::input(format!("{}: {e}", path.display())))
}

pub fn parse_csv(text: &str, name: &str, standardize: bool, delimiter: char) -> Result<Dataset> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
        .peekable();
    let parse_row = |line: &str| -> Vec<std::result::Result<f64, usize>> {
        line.split(delimiter)
            .enumerate()
            .map(|(j, c)| c.trim().parse::<f64>().map_err(|_| j + 1))
            .collect()
    };
    if let Some(&(_, first)) = lines.peek() {
        if parse_row(first).iter().any(|c| c.is_err()) {
            lines.next();
        }
    }
    let mut coords = Vec::new();
    let mut dim = None;
    for (row, line) in lines {
        let cells = parse_row(line);
        match dim {
            None => dim = Some(cells.len()),
            Some(d) if d != cells.len() => {
                return Err(BenchError::input(format!(
                    "row {row} has {} columns, expected {d}",
                    cells.len()
                )))
            }
            _ => {}
        }
        for cell in cells {
            match cell {
                Ok(v) if v.is_finite() => coords.push(v),
                Ok(v) => return Err(BenchError::input(format!("row {row}: non-finite value {v}"))),
                Err(col) => {
                    return Err(BenchError::input(format!("row {row}, column {col}: not a number")))
                }
            }
        }
    }
    let dim = dim.ok_or_else(|| BenchError::input("no data rows"))?;
    let data = Dataset::new(Points::new(coords, dim)?, name);
    Ok(if standardize { data.standardize()? } else { data })
}

/// Synthetic data families.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SyntheticSpec {
    /// Uniform on `[0,1)^d`.
    UniformCube { dim: usize },
    /// `k` unit-variance Gaussian clusters whose centers sit at distance
    /// `separation` from the origin, evenly spaced on a circle in the first
    /// two coordinates (on a line when `d = 1`). Cluster `j` has mass
    /// proportional to `2^{-j}`.
    GaussianMixture { dim: usize, k: usize, separation: f64 },
}

impl SyntheticSpec {
    pub fn dim(&self) -> usize {
        match *self {
            SyntheticSpec::UniformCube { dim } | SyntheticSpec::GaussianMixture { dim, .. } => dim,
        }
    }

    /// Cluster centers of a mixture; empty for the cube.
    pub fn centers(&self) -> Vec<Vec<f64>> {
        let SyntheticSpec::GaussianMixture { dim, k, separation } = *self else {
            return Vec::new();
        };
        (0..k)
            .map(|j| {
                let mut c = vec![0.0; dim];
                if dim == 1 {
                    c[0] = separation * j as f64;
                } else {
                    let angle = std::f64::consts::TAU * j as f64 / k as f64;
                    c[0] = separation * angle.cos();
                    c[1] = separation * angle.sin();
                }
                c
            })
            .collect()
    }
}

impl fmt::Display for SyntheticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SyntheticSpec::UniformCube { dim } => write!(f, "uniform_cube:d={dim}"),
            SyntheticSpec::GaussianMixture { dim, k, separation } => {
                write!(f, "gaussian_mixture:d={dim},k={k},sep={separation}")
            }
        }
    }
}

impl FromStr for SyntheticSpec {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        let (name, params) = split_spec(s)?;
        let mut dim = 1;
        let mut k = 3;
        let mut separation: f64 = 5.0;
        for (key, v) in params {
            match key {
                "d" => dim = parse_value(key, v)?,
                "k" if name == "gaussian_mixture" => k = parse_value(key, v)?,
                "sep" if name == "gaussian_mixture" => separation = parse_value(key, v)?,
                _ => return Err(BenchError::input(format!("unknown parameter `{key}` for `{name}`"))),
            }
        }
        if dim == 0 {
            return Err(BenchError::input("dimension must be at least 1"));
        }
        match name {
            "uniform_cube" => Ok(SyntheticSpec::UniformCube { dim }),
            "gaussian_mixture" => {
                if k == 0 || !(separation >= 0.0 && separation.is_finite()) {
                    return Err(BenchError::input("mixture needs k >= 1 and a finite sep >= 0"));
                }
                Ok(SyntheticSpec::GaussianMixture { dim, k, separation })
            }
            other => Err(BenchError::input(format!("unknown synthetic dataset `{other}`"))),
        }
    }
}

/// Draws `n` points; the same `(spec, n, seed)` always gives the same data.
pub fn gen_synthetic(spec: &SyntheticSpec, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(BenchError::input("n must be at least 1"));
    }
    let d = spec.dim();
    let mut rng = stream(derive_seed(seed, &[n as u64]));
    let mut coords = Vec::with_capacity(n * d);
    match *spec {
        SyntheticSpec::UniformCube { .. } => coords.extend((0..n * d).map(|_| rng.random::<f64>())),
        SyntheticSpec::GaussianMixture { k, .. } => {
            let centers = spec.centers();
            let pick = WeightedIndex::new((0..k).map(|j| 0.5f64.powi(j as i32)))
                .expect("geometric weights are positive");
            for _ in 0..n {
                let c = &centers[pick.sample(&mut rng)];
                coords.extend(c.iter().map(|ci| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    ci + z
                }));
            }
        }
    }
    Ok(Dataset::new(Points::new(coords, d)?, spec.to_string()))
}

//! Optimal quadrature weights, worst-case error and MMD.
//!
//! For nodes `X̃` and a target measure `ρ`, the optimal weights are
//! `w = K_m⁺ v` with `v_j = ∫ κ(X̃_j, x) dρ(x)`: the minimum-norm solution of
//! the least-squares problem that projects the kernel mean embedding of `ρ`
//! onto `span{φ(X̃_j)}`. The worst-case integration error over the RKHS unit
//! ball is the RKHS distance between the two embeddings,
//!
//! ```text
//! E² = ∬κ dρ dρ − 2 Σ_j w_j ∫κ(·, X̃_j) dρ + wᵀ K_m w.
//! ```

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{gram, KernelSpec};
use crate::numerics::{compensated_sum, default_rel_tol, eig_sym, CompensatedSum};
use crate::points::{Dataset, Points};
use crate::sampling::SamplerConfig;

/// Rows per block in the quadratic error sums.
pub const CHUNK_ROWS: usize = 1024;

/// Largest negative squared error attributed to cancellation, relative to
/// `max(1, ∬κ)`.
const NEGATIVE_SQUARE_TOL: f64 = 1e-8;

/// A finitely supported probability measure.
#[derive(Debug)]
pub struct DiscreteMeasure {
    points: Points,
    masses: Vec<f64>,
    // ∬κ is Θ(n²); remembered for the last kernel it was computed with
    self_energy: Mutex<Option<(KernelSpec, f64)>>,
}

impl Clone for DiscreteMeasure {
    fn clone(&self) -> Self {
        Self {
            points: self.points.clone(),
            masses: self.masses.clone(),
            self_energy: Mutex::new(*self.self_energy.lock().unwrap()),
        }
    }
}

impl DiscreteMeasure {
    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }
}

/// Measure to integrate against.
#[derive(Clone, Debug)]
pub enum TargetMeasure {
    Discrete(DiscreteMeasure),
    /// Uniform measure on `[0,1)^dim`; only periodic Sobolev kernels have the
    /// closed-form moments this needs.
    UniformUnitCube { dim: usize },
}

impl TargetMeasure {
    /// Uniform masses `1/n` on the given points.
    pub fn empirical(points: Points) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::invalid("empirical measure needs at least one point"));
        }
        Self::discrete(points, vec![1.0 / n as f64; n])
    }

    pub fn discrete(points: Points, masses: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("discrete measure needs at least one point"));
        }
        if masses.len() != points.len() {
            return Err(Error::DimensionMismatch { expected: points.len(), found: masses.len() });
        }
        if masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::invalid("masses must be finite and nonnegative"));
        }
        let total = compensated_sum(masses.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("masses sum to {total}, not 1")));
        }
        Ok(TargetMeasure::Discrete(DiscreteMeasure { points, masses, self_energy: Mutex::new(None) }))
    }

    pub fn dim(&self) -> usize {
        match self {
            TargetMeasure::Discrete(d) => d.points.dim(),
            TargetMeasure::UniformUnitCube { dim } => *dim,
        }
    }

    fn check_kernel(&self, kernel: &KernelSpec) -> Result<()> {
        kernel.check_dim(self.dim())?;
        if let TargetMeasure::UniformUnitCube { .. } = self {
            if !matches!(kernel, KernelSpec::PeriodicSobolev { .. }) {
                return Err(Error::invalid(
                    "the uniform unit-cube target needs a periodic Sobolev kernel",
                ));
            }
        }
        Ok(())
    }

    /// `∬ κ(x, y) dρ(x) dρ(y)`.
    pub fn self_energy(&self, kernel: &KernelSpec) -> Result<f64> {
        self.check_kernel(kernel)?;
        match self {
            TargetMeasure::UniformUnitCube { .. } => Ok(1.0),
            TargetMeasure::Discrete(d) => {
                let mut cache = d.self_energy.lock().unwrap();
                if let Some((k, v)) = *cache {
                    if k == *kernel {
                        return Ok(v);
                    }
                }
                let v = weighted_self_energy(kernel, &d.points, &d.masses);
                *cache = Some((*kernel, v));
                Ok(v)
            }
        }
    }

    /// `v_j = ∫ κ(nodes_j, x) dρ(x)` for every node.
    pub fn kernel_mean(&self, kernel: &KernelSpec, nodes: &Points) -> Result<Vec<f64>> {
        self.check_kernel(kernel)?;
        if nodes.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: nodes.dim() });
        }
        Ok(match self {
            TargetMeasure::UniformUnitCube { .. } => vec![1.0; nodes.len()],
            TargetMeasure::Discrete(d) => (0..nodes.len())
                .into_par_iter()
                .map(|j| {
                    let node = nodes.row(j);
                    d.points
                        .rows()
                        .zip(&d.masses)
                        .map(|(x, &a)| a * kernel.value(node, x))
                        .collect::<CompensatedSum>()
                        .value()
                })
                .collect(),
        })
    }
}

/// `Σ_i Σ_j a_i a_j κ(x_i, x_j)` over blocks of rows, each block summed with
/// compensation and the block sums combined in order.
fn weighted_self_energy(kernel: &KernelSpec, points: &Points, masses: &[f64]) -> f64 {
    let n = points.len();
    let blocks: Vec<f64> = (0..n.div_ceil(CHUNK_ROWS))
        .into_par_iter()
        .map(|b| {
            let mut acc = CompensatedSum::new();
            for i in b * CHUNK_ROWS..((b + 1) * CHUNK_ROWS).min(n) {
                let xi = points.row(i);
                let mut row = CompensatedSum::new();
                for j in i + 1..n {
                    row.add(masses[j] * kernel.value(xi, points.row(j)));
                }
                acc.add(masses[i] * (masses[i] * kernel.value(xi, xi) + 2.0 * row.value()));
            }
            acc.value()
        })
        .collect();
    compensated_sum(blocks)
}

/// Nodes with real weights, `I(f) ≈ Σ_j w_j f(X̃_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Points,
    pub weights: Vec<f64>,
    /// Row of each node in the dataset it was drawn from.
    pub source: Option<Vec<usize>>,
}

impl QuadratureRule {
    pub fn new(nodes: Points, weights: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(Error::DimensionMismatch { expected: nodes.len(), found: weights.len() });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::numerical("quadrature weights are not finite"));
        }
        Ok(Self { nodes, weights, source: None })
    }

    pub fn with_source(mut self, source: Vec<usize>) -> Result<Self> {
        if source.len() != self.weights.len() {
            return Err(Error::DimensionMismatch { expected: self.weights.len(), found: source.len() });
        }
        self.source = Some(source);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Writes `index,x_1,...,x_d,weight` rows with shortest round-trip floats.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let d = self.nodes.dim();
        let mut header = String::from("index");
        for k in 1..=d {
            header.push_str(&format!(",x_{k}"));
        }
        header.push_str(",weight\n");
        out.write_all(header.as_bytes())?;
        for (j, (x, w)) in self.nodes.rows().zip(&self.weights).enumerate() {
            let idx = self.source.as_ref().map_or(j, |s| s[j]);
            let mut line = idx.to_string();
            for v in x {
                line.push(',');
                line.push_str(&v.to_string());
            }
            line.push(',');
            line.push_str(&w.to_string());
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::invalid("empty quadrature file"))?
            .map_err(|e| Error::invalid(e.to_string()))?;
        let cols: Vec<&str> = header.trim_end().split(',').collect();
        if cols.len() < 3 || cols[0] != "index" || cols[cols.len() - 1] != "weight" {
            return Err(Error::invalid(format!("unexpected quadrature header `{header}`")));
        }
        let d = cols.len() - 2;
        let (mut coords, mut weights, mut source) = (Vec::new(), Vec::new(), Vec::new());
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::invalid(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != d + 2 {
                return Err(Error::invalid(format!("row {} has {} fields, expected {}", lineno + 2, fields.len(), d + 2)));
            }
            let bad = |c: usize| Error::invalid(format!("row {}, column {}: cannot parse `{}`", lineno + 2, c + 1, fields[c]));
            source.push(fields[0].trim().parse::<usize>().map_err(|_| bad(0))?);
            for c in 1..=d {
                coords.push(fields[c].trim().parse::<f64>().map_err(|_| bad(c))?);
            }
            weights.push(fields[d + 1].trim().parse::<f64>().map_err(|_| bad(d + 1))?);
        }
        QuadratureRule::new(Points::new(coords, d)?, weights)?.with_source(source)
    }
}

/// `w = K_m⁺ v` for the given nodes.
pub fn optimal_weights(kernel: &KernelSpec, nodes: &Points, target: &TargetMeasure) -> Result<QuadratureRule> {
    if nodes.is_empty() {
        return Err(Error::invalid("optimal weights need at least one node"));
    }
    let v = DVector::from_vec(target.kernel_mean(kernel, nodes)?);
    let k_m = gram(kernel, nodes, None)?;
    let w = eig_sym(&k_m.entries)?.pinv_apply(&v, default_rel_tol(nodes.len()));
    QuadratureRule::new(nodes.clone(), w.iter().copied().collect())
}

/// `Σ_j w_j f(X̃_j)`.
pub fn integrate(rule: &QuadratureRule, f_at_nodes: &[f64]) -> Result<f64> {
    if f_at_nodes.len() != rule.len() {
        return Err(Error::DimensionMismatch { expected: rule.len(), found: f_at_nodes.len() });
    }
    Ok(compensated_sum(rule.weights.iter().zip(f_at_nodes).map(|(w, f)| w * f)))
}

/// `wᵀ K_m w` without forming `K_m`.
fn weighted_gram_form(kernel: &KernelSpec, nodes: &Points, w: &[f64]) -> f64 {
    weighted_self_energy(kernel, nodes, w)
}

/// Worst-case integration error of `rule` for `target` over the RKHS unit ball.
pub fn worst_case_error(rule: &QuadratureRule, target: &TargetMeasure, kernel: &KernelSpec) -> Result<f64> {
    if rule.nodes.dim() != target.dim() {
        return Err(Error::DimensionMismatch { expected: target.dim(), found: rule.nodes.dim() });
    }
    let energy = target.self_energy(kernel)?;
    let v = target.kernel_mean(kernel, &rule.nodes)?;
    let cross = compensated_sum(rule.weights.iter().zip(&v).map(|(w, v)| w * v));
    let quad = weighted_gram_form(kernel, &rule.nodes, &rule.weights);
    let mut sq = compensated_sum([energy, -2.0 * cross, quad]);
    if sq <= CANCELLATION_GUARD * energy.max(1.0) {
        if let TargetMeasure::Discrete(d) = target {
            // most digits cancelled: recompute with coincident atoms merged
            let (atoms, coefs) = signed_atoms(d, rule);
            sq = weighted_self_energy(kernel, &atoms, &coefs);
        }
    }
    if sq < -NEGATIVE_SQUARE_TOL * energy.max(1.0) {
        return Err(Error::numerical(format!("squared worst-case error is negative: {sq:e}")));
    }
    Ok(sq.max(0.0).sqrt())
}

/// Below `CANCELLATION_GUARD · max(1, ∬κ)` rounding in the expanded squared
/// error, about `1e-16 · ∬κ`, could move `E` by more than `1e-10`.
const CANCELLATION_GUARD: f64 = 1e-12;

/// The signed measure `ρ̂ − Σ_j w_j δ_{X̃_j}` on the set union of the target
/// support and the nodes, with the coefficients of coincident points summed.
fn signed_atoms(target: &DiscreteMeasure, rule: &QuadratureRule) -> (Points, Vec<f64>) {
    let mut slot: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut coords = Vec::new();
    let mut coefs: Vec<f64> = Vec::new();
    let items = target
        .points
        .rows()
        .zip(target.masses.iter().copied())
        .chain(rule.nodes.rows().zip(rule.weights.iter().map(|w| -w)));
    for (x, c) in items {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        match slot.get(&key) {
            Some(&k) => coefs[k] += c,
            None => {
                slot.insert(key, coefs.len());
                coords.extend_from_slice(x);
                coefs.push(c);
            }
        }
    }
    let atoms = Points::new(coords, target.points.dim()).expect("coordinates come from valid point sets");
    (atoms, coefs)
}

/// Unit-norm function achieving the worst-case error, as a kernel expansion.
#[derive(Clone, Debug)]
pub struct Witness {
    /// Distinct points of the target support and the rule's nodes.
    pub support: Points,
    pub coefficients: Vec<f64>,
    /// `|I(f*) − I_rule(f*)|`.
    pub gap: f64,
}

/// Builds `f* = (μ̂ − μ̃)/‖μ̂ − μ̃‖` over the union of the target support and
/// the nodes, then measures its integration error by evaluating it at the
/// target support and at the nodes.
pub fn worst_case_witness(rule: &QuadratureRule, target: &TargetMeasure, kernel: &KernelSpec) -> Result<Witness> {
    let TargetMeasure::Discrete(d) = target else {
        return Err(Error::invalid("the witness construction needs a discrete target"));
    };
    if rule.nodes.dim() != d.points.dim() {
        return Err(Error::DimensionMismatch { expected: d.points.dim(), found: rule.nodes.dim() });
    }
    kernel.check_dim(d.points.dim())?;
    let (support, raw) = signed_atoms(d, rule);
    let g = gram(kernel, &support, None)?.entries;
    let c = DVector::from_column_slice(&raw);
    let norm_sq = c.dot(&(&g * &c));
    if !(norm_sq > 0.0) {
        return Ok(Witness { coefficients: vec![0.0; raw.len()], support, gap: 0.0 });
    }
    let coefficients: Vec<f64> = raw.iter().map(|v| v / norm_sq.sqrt()).collect();
    let f_star = |x: &[f64]| {
        compensated_sum(support.rows().zip(&coefficients).map(|(z, c)| c * kernel.value(z, x)))
    };
    let exact = compensated_sum(d.points.rows().zip(&d.masses).map(|(x, a)| a * f_star(x)));
    let approx = compensated_sum(rule.nodes.rows().zip(&rule.weights).map(|(x, w)| w * f_star(x)));
    Ok(Witness { support, coefficients, gap: (exact - approx).abs() })
}

/// Point set with real weights.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedPoints {
    pub points: Points,
    pub weights: Vec<f64>,
}

impl WeightedPoints {
    pub fn new(points: Points, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch { expected: points.len(), found: weights.len() });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("weights must be finite"));
        }
        Ok(Self { points, weights })
    }
}

impl From<&QuadratureRule> for WeightedPoints {
    fn from(rule: &QuadratureRule) -> Self {
        Self { points: rule.nodes.clone(), weights: rule.weights.clone() }
    }
}

impl From<&DiscreteMeasure> for WeightedPoints {
    fn from(m: &DiscreteMeasure) -> Self {
        Self { points: m.points.clone(), weights: m.masses.clone() }
    }
}

/// RKHS distance between the embeddings of two weighted point sets.
pub fn mmd(a: &WeightedPoints, b: &WeightedPoints, kernel: &KernelSpec) -> Result<f64> {
    if a.points.dim() != b.points.dim() {
        return Err(Error::DimensionMismatch { expected: a.points.dim(), found: b.points.dim() });
    }
    kernel.check_dim(a.points.dim())?;
    let aa = weighted_self_energy(kernel, &a.points, &a.weights);
    let bb = weighted_self_energy(kernel, &b.points, &b.weights);
    let ab = compensated_sum(a.points.rows().zip(&a.weights).map(|(x, wa)| {
        wa * compensated_sum(b.points.rows().zip(&b.weights).map(|(y, wb)| wb * kernel.value(x, y)))
    }));
    Ok(compensated_sum([aa, bb, -2.0 * ab]).max(0.0).sqrt())
}

/// Wall-clock time spent in each phase of [`compress`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseTimings {
    pub sampling: Duration,
    pub weights: Duration,
}

impl PhaseTimings {
    pub fn total(&self) -> Duration {
        self.sampling + self.weights
    }
}

#[derive(Clone, Debug)]
pub struct Compression {
    pub rule: QuadratureRule,
    pub timings: PhaseTimings,
}

/// Subsamples nodes from `data` and weights them optimally for the
/// empirical measure of `data`.
pub fn compress(data: &Dataset, kernel: &KernelSpec, sampler: &SamplerConfig) -> Result<Compression> {
    let target = TargetMeasure::empirical(data.points.clone())?;
    compress_for(data, kernel, sampler, &target)
}

/// Like [`compress`], with the weights optimized for an explicit target.
pub fn compress_for(
    data: &Dataset,
    kernel: &KernelSpec,
    sampler: &SamplerConfig,
    target: &TargetMeasure,
) -> Result<Compression> {
    kernel.check_dim(data.dim())?;
    let start = Instant::now();
    let idx = sampler.select(&data.points, kernel)?;
    let sampling = start.elapsed();
    let start = Instant::now();
    let rule = optimal_weights(kernel, &data.points.select(&idx), target)?.with_source(idx)?;
    let weights = start.elapsed();
    Ok(Compression { rule, timings: PhaseTimings { sampling, weights } })
}

//! Greedy node selection over the data: f-greedy, P-greedy and f/P-greedy.
//!
//! All three maintain the same state, updated in `O(n t)` per iteration:
//! the coefficients `C` of every data feature in the incrementally built
//! Newton (Gram-Schmidt) basis of the selected features, the residual
//! `r = f − P_t f` at the data, the squared power function
//! `‖P_t^⊥ φ(x_i)‖²`, and the coefficients `c_f` of `f` in the basis.
//! They differ only in the selection criterion:
//!
//! * P-greedy maximizes the power function, i.e. greedily maximizes `det(K_t)`;
//! * f-greedy maximizes `|r|`;
//! * f/P-greedy maximizes `r² / powfun²`, the largest decrease of `‖P_t^⊥ f‖`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{kernel_row, KernelSpec};
use crate::numerics::CompensatedSum;
use crate::points::{Dataset, Points};
use crate::quadrature::{optimal_weights, QuadratureRule, TargetMeasure};

/// Candidates whose squared power function is at or below this value are
/// already in the span of the selected features and are never updated or
/// selected.
pub const POWER_FLOOR: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GreedyVariant {
    F,
    P,
    FOverP,
}

impl fmt::Display for GreedyVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GreedyVariant::F => "f-greedy",
            GreedyVariant::P => "p-greedy",
            GreedyVariant::FOverP => "fp-greedy",
        })
    }
}

impl FromStr for GreedyVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f-greedy" => Ok(GreedyVariant::F),
            "p-greedy" => Ok(GreedyVariant::P),
            "fp-greedy" => Ok(GreedyVariant::FOverP),
            other => Err(Error::invalid(format!("unknown greedy method `{other}`"))),
        }
    }
}

/// Running state of a greedy selection.
#[derive(Clone, Debug)]
pub struct GreedyState<'a> {
    data: &'a Points,
    kernel: KernelSpec,
    variant: GreedyVariant,
    /// Row `k` holds `⟨u_k, φ(x_i)⟩` for every data point.
    coeffs: Vec<Vec<f64>>,
    residual: Vec<f64>,
    powfun2: Vec<f64>,
    c_f: Vec<f64>,
    selected: Vec<usize>,
    taken: Vec<bool>,
}

impl<'a> GreedyState<'a> {
    /// `f_at_x` may be empty for P-greedy.
    pub fn new(data: &'a Points, kernel: &KernelSpec, f_at_x: &[f64], variant: GreedyVariant) -> Result<Self> {
        let n = data.len();
        if n == 0 {
            return Err(Error::invalid("greedy selection needs data"));
        }
        kernel.check_dim(data.dim())?;
        let residual = if f_at_x.is_empty() && variant == GreedyVariant::P {
            vec![0.0; n]
        } else if f_at_x.len() == n {
            f_at_x.to_vec()
        } else {
            return Err(Error::DimensionMismatch { expected: n, found: f_at_x.len() });
        };
        if residual.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("function values must be finite"));
        }
        let powfun2 = data.rows().map(|x| kernel.value(x, x)).collect();
        Ok(Self {
            data,
            kernel: *kernel,
            variant,
            coeffs: Vec::new(),
            residual,
            powfun2,
            c_f: Vec::new(),
            selected: Vec::new(),
            taken: vec![false; n],
        })
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn residual(&self) -> &[f64] {
        &self.residual
    }

    pub fn powfun2(&self) -> &[f64] {
        &self.powfun2
    }

    pub fn coefficients_of_f(&self) -> &[f64] {
        &self.c_f
    }

    /// Newton-basis coefficients of the data features, one row per step.
    pub fn basis_coefficients(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    fn criterion(&self, i: usize) -> f64 {
        match self.variant {
            GreedyVariant::P => self.powfun2[i],
            GreedyVariant::F => self.residual[i].abs(),
            GreedyVariant::FOverP => self.residual[i] * self.residual[i] / self.powfun2[i],
        }
    }

    /// Lowest-index argmax of the criterion over unselected points whose
    /// power function exceeds [`POWER_FLOOR`].
    fn next_index(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.powfun2.len() {
            if self.taken[i] || self.powfun2[i] <= POWER_FLOOR {
                continue;
            }
            let c = self.criterion(i);
            if best.is_none_or(|(_, b)| c > b) {
                best = Some((i, c));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Selects one more point; `None` once every candidate lies in the span.
    pub fn step(&mut self) -> Option<usize> {
        let j = self.next_index()?;
        let pj = self.powfun2[j].sqrt();
        let xj = self.data.row(j);
        let mut row = kernel_row(&self.kernel, xj, self.data);
        for prev in &self.coeffs {
            let a = prev[j];
            if a != 0.0 {
                row.iter_mut().zip(prev).for_each(|(r, c)| *r -= a * c);
            }
        }
        let powfun2 = &self.powfun2;
        row.par_iter_mut().enumerate().for_each(|(i, v)| {
            *v = if powfun2[i] > POWER_FLOOR { *v / pj } else { 0.0 };
        });
        let cf = self.residual[j] / pj;
        for ((r, p), c) in self.residual.iter_mut().zip(self.powfun2.iter_mut()).zip(&row) {
            *r -= cf * c;
            *p = (*p - c * c).max(0.0);
        }
        self.c_f.push(cf);
        self.coeffs.push(row);
        self.selected.push(j);
        self.taken[j] = true;
        Some(j)
    }
}

/// Result of a greedy run.
#[derive(Clone, Debug, PartialEq)]
pub struct GreedySelection {
    pub indices: Vec<usize>,
    /// Set when the span was exhausted before `m` points were selected.
    pub truncated: bool,
    /// Coefficients of `f` in the Newton basis; `Σ c_f²` is the squared
    /// RKHS norm of the projection of `f`.
    pub c_f: Vec<f64>,
}

/// Runs `m` greedy iterations over the rows of `data`.
pub fn greedy_select(
    data: &Points,
    kernel: &KernelSpec,
    f_at_x: &[f64],
    m: usize,
    variant: GreedyVariant,
) -> Result<GreedySelection> {
    if m == 0 || m > data.len() {
        return Err(Error::invalid(format!("greedy m must lie in [1, {}], got {m}", data.len())));
    }
    let mut state = GreedyState::new(data, kernel, f_at_x, variant)?;
    while state.selected.len() < m {
        if state.step().is_none() {
            break;
        }
    }
    Ok(GreedySelection {
        truncated: state.selected.len() < m,
        indices: state.selected,
        c_f: state.c_f,
    })
}

/// `κ(x,x) − k_tᵀ K_t⁻¹ k_t`, the squared power function recomputed from
/// scratch. Equals `det(K_{t∪{x}}) / det(K_t)`.
pub fn power_function_bruteforce(selected: &[usize], x: &[f64], kernel: &KernelSpec, data: &Points) -> Result<f64> {
    if x.len() != data.dim() {
        return Err(Error::DimensionMismatch { expected: data.dim(), found: x.len() });
    }
    let kxx = kernel.eval(x, x)?;
    if selected.is_empty() {
        return Ok(kxx);
    }
    let t = selected.len();
    let k_t = DMatrix::from_fn(t, t, |a, b| kernel.value(data.row(selected[a]), data.row(selected[b])));
    let k_x = DVector::from_fn(t, |a, _| kernel.value(data.row(selected[a]), x));
    let chol = Cholesky::new(k_t).ok_or_else(|| Error::numerical("selected kernel matrix is singular"))?;
    Ok((kxx - k_x.dot(&chol.solve(&k_x))).max(0.0))
}

/// `μ̂_n(X_i) = (1/n) Σ_j κ(X_i, X_j)` at every data point.
pub fn empirical_embedding(data: &Points, kernel: &KernelSpec) -> Vec<f64> {
    let n = data.len() as f64;
    (0..data.len())
        .into_par_iter()
        .map(|i| {
            let xi = data.row(i);
            data.rows().map(|xj| kernel.value(xi, xj)).collect::<CompensatedSum>().value() / n
        })
        .collect()
}

/// A greedy quadrature rule with the trace of its selection.
#[derive(Clone, Debug)]
pub struct GreedyQuadrature {
    pub rule: QuadratureRule,
    pub selection: GreedySelection,
    /// `‖P_t^⊥ μ̂_n‖` for `t = 0..=len`.
    pub residual_norms: Vec<f64>,
}

/// Greedy nodes for `f = μ̂_n`, weighted optimally for the empirical measure.
pub fn greedy_quadrature(data: &Dataset, kernel: &KernelSpec, m: usize, variant: GreedyVariant) -> Result<GreedyQuadrature> {
    let target = TargetMeasure::empirical(data.points.clone())?;
    greedy_quadrature_for(data, kernel, m, variant, &target)
}

/// As [`greedy_quadrature`], with weights optimized for `target`.
pub fn greedy_quadrature_for(
    data: &Dataset,
    kernel: &KernelSpec,
    m: usize,
    variant: GreedyVariant,
    target: &TargetMeasure,
) -> Result<GreedyQuadrature> {
    let f = if variant == GreedyVariant::P { Vec::new() } else { empirical_embedding(&data.points, kernel) };
    let selection = greedy_select(&data.points, kernel, &f, m, variant)?;
    let nodes = data.points.select(&selection.indices);
    let rule = optimal_weights(kernel, &nodes, target)?.with_source(selection.indices.clone())?;
    // ‖μ̂_n‖² = (1/n) Σ_i μ̂_n(X_i)
    let mut residual_norms = Vec::new();
    if !f.is_empty() {
        let mut sq = f.iter().sum::<f64>() / f.len() as f64;
        residual_norms.push(sq.max(0.0).sqrt());
        for c in &selection.c_f {
            sq -= c * c;
            residual_norms.push(sq.max(0.0).sqrt());
        }
    }
    Ok(GreedyQuadrature { rule, selection, residual_norms })
}

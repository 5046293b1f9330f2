//! Node selection: uniform subsampling and ridge-leverage-score sampling.
//!
//! Exact ridge leverage scores are the diagonal of `K (K + λnI)^{-1}`.
//! Approximate scores come from a single uniform pilot: the data are mapped
//! to Nyström features against `p` pilot points and the exact formula is
//! applied in that `p`-dimensional feature space, at `O(np²)` cost. With
//! `p = n` the approximation is exact.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::kernels::{gram, parse_value, split_spec, GramMatrix, KernelSpec};
use crate::numerics::eig_sym;
use crate::points::Points;
use crate::spectral::{lambda_rule, LambdaStrategy};

/// `m` indices in `[0, n)`; without replacement they are distinct and come
/// from a partial Fisher-Yates shuffle.
pub fn uniform_subsample<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    with_replacement: bool,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(Error::invalid("subsample size must be at least 1"));
    }
    if n == 0 {
        return Err(Error::invalid("cannot subsample from an empty set"));
    }
    if with_replacement {
        return Ok((0..m).map(|_| rng.random_range(0..n)).collect());
    }
    if m > n {
        return Err(Error::invalid(format!(
            "cannot draw {m} distinct indices out of {n} without replacement"
        )));
    }
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..m {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(m);
    Ok(pool)
}

/// How a set of leverage scores was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScoreMode {
    Exact,
    Pilot { size: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeverageScores {
    pub lambda: f64,
    pub values: Vec<f64>,
    pub mode: ScoreMode,
}

impl LeverageScores {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("regularization must be positive, got {lambda}")))
    }
}

/// Exact ridge leverage scores `diag(K (K + λnI)^{-1})`.
///
/// Computed from the eigendecomposition `K = V Σ Vᵀ` as
/// `Σ_j σ_j / (σ_j + λn) V_ij²`. Eigenvalues below `-1e-8 · max diag` mean
/// the matrix is not PSD; smaller negative ones are treated as zero.
pub fn exact_rls(k: &GramMatrix, lambda: f64) -> Result<LeverageScores> {
    check_lambda(lambda)?;
    let n = k.nrows();
    if n == 0 || k.ncols() != n {
        return Err(Error::invalid("exact leverage scores need a square nonempty Gram matrix"));
    }
    let eig = eig_sym(&k.entries)?;
    let floor = -1e-8 * k.max_diagonal().abs().max(f64::MIN_POSITIVE);
    if let Some(&min) = eig.eigenvalues.last() {
        if min < floor {
            return Err(Error::numerical(format!(
                "kernel matrix is not positive semi-definite: eigenvalue {min:e}"
            )));
        }
    }
    let ln = lambda * n as f64;
    let mut values = vec![0.0; n];
    for (j, &s) in eig.eigenvalues.iter().enumerate() {
        let s = s.max(0.0);
        let ratio = s / (s + ln);
        if ratio == 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(j);
        for (out, vij) in values.iter_mut().zip(v.iter()) {
            *out += ratio * vij * vij;
        }
    }
    Ok(LeverageScores { lambda, values, mode: ScoreMode::Exact })
}

/// Cholesky factor of `a`, adding diagonal jitter `1e-12·tr(a)/p`, then ten
/// times more per retry, for up to six retries.
fn jittered_cholesky(a: &DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = Cholesky::new(a.clone()) {
        return Ok(c);
    }
    let p = a.nrows();
    let mut jitter = 1e-12 * a.trace() / p as f64;
    for _ in 0..6 {
        let shifted = a + DMatrix::identity(p, p) * jitter;
        if let Some(c) = Cholesky::new(shifted) {
            return Ok(c);
        }
        jitter *= 10.0;
    }
    Err(Error::numerical(
        "pilot kernel matrix is numerically singular after maximal jitter; use a larger pilot or a larger lambda",
    ))
}

/// Approximate ridge leverage scores from a uniform pilot of `pilot_size` points.
///
/// With `K_p = L Lᵀ` the pilot Gram and `b_i = L^{-1} k_p(x_i)`, returns
/// `b_iᵀ (BᵀB + λnI)^{-1} b_i`.
pub fn approx_rls_pilot<R: Rng + ?Sized>(
    data: &Points,
    kernel: &KernelSpec,
    lambda: f64,
    pilot_size: usize,
    rng: &mut R,
) -> Result<LeverageScores> {
    check_lambda(lambda)?;
    let n = data.len();
    if pilot_size == 0 || pilot_size > n {
        return Err(Error::invalid(format!("pilot size must lie in [1, {n}], got {pilot_size}")));
    }
    kernel.check_dim(data.dim())?;
    let pilot_idx = uniform_subsample(n, pilot_size, false, rng)?;
    let pilot = data.select(&pilot_idx);
    let k_p = gram(kernel, &pilot, None)?.entries;
    let chol = jittered_cholesky(&k_p)?;
    // K_pn, then B^T = L^{-1} K_pn (p x n)
    let k_pn = gram(kernel, &pilot, Some(data))?.entries;
    let bt = chol
        .l_dirty()
        .solve_lower_triangular(&k_pn)
        .ok_or_else(|| Error::numerical("triangular solve failed for the pilot factor"))?;
    let p = pilot_size;
    let mut m = &bt * bt.transpose();
    let ln = lambda * n as f64;
    for i in 0..p {
        m[(i, i)] += ln;
    }
    let chol_m = Cholesky::new(m)
        .ok_or_else(|| Error::numerical("regularized pilot system is not positive definite"))?;
    // ℓ_i = ‖L_M^{-1} b_i‖²
    let z = chol_m
        .l_dirty()
        .solve_lower_triangular(&bt)
        .ok_or_else(|| Error::numerical("triangular solve failed for the regularized system"))?;
    let values = z.column_iter().map(|c| c.norm_squared()).collect();
    Ok(LeverageScores { lambda, values, mode: ScoreMode::Pilot { size: p } })
}

/// `m` i.i.d. draws with probability proportional to the scores.
pub fn sample_proportional<R: Rng + ?Sized>(
    scores: &LeverageScores,
    m: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    let dist = WeightedIndex::new(&scores.values).map_err(|e| match e {
        rand::distr::weighted::Error::InsufficientNonZero => {
            Error::invalid("all leverage scores are zero")
        }
        other => Error::invalid(format!("invalid leverage scores: {other}")),
    })?;
    Ok((0..m).map(|_| dist.sample(rng)).collect())
}

/// Node sampling strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    UniformWithoutReplacement,
    UniformWithReplacement,
    Arls,
}

/// Everything needed to draw `m` nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    pub strategy: Strategy,
    pub m: usize,
    /// ARLS regularization; `None` selects `19K² log(32n/δ)/n`.
    pub lambda: Option<f64>,
    /// ARLS pilot size; `None` selects `min(n, ⌈4√n⌉)`.
    pub pilot_size: Option<usize>,
    pub z_claim: f64,
    pub lambda0: f64,
    pub delta: f64,
    pub seed: u64,
}

pub const DEFAULT_DELTA: f64 = 0.1;

impl SamplerConfig {
    pub fn new(strategy: Strategy, m: usize, seed: u64) -> Self {
        Self {
            strategy,
            m,
            lambda: None,
            pilot_size: None,
            z_claim: 1.0,
            lambda0: f64::MIN_POSITIVE,
            delta: DEFAULT_DELTA,
            seed,
        }
    }

    /// Parses a CLI strategy string: `uniform`, `uniform-wr` or
    /// `arls:lambda=<float|auto>,pilot=<int|auto>`.
    pub fn parse(strategy: &str, m: usize, seed: u64) -> Result<Self> {
        let (name, params) = split_spec(strategy)?;
        let mut cfg = match name {
            "uniform" => SamplerConfig::new(Strategy::UniformWithoutReplacement, m, seed),
            "uniform-wr" => SamplerConfig::new(Strategy::UniformWithReplacement, m, seed),
            "arls" => SamplerConfig::new(Strategy::Arls, m, seed),
            other => return Err(Error::invalid(format!("unknown sampling strategy `{other}`"))),
        };
        for (k, v) in params {
            if cfg.strategy != Strategy::Arls {
                return Err(Error::invalid(format!("strategy `{name}` takes no parameters")));
            }
            let auto = v.eq_ignore_ascii_case("auto");
            match k {
                "lambda" => cfg.lambda = if auto { None } else { Some(parse_value(k, v)?) },
                "pilot" => cfg.pilot_size = if auto { None } else { Some(parse_value(k, v)?) },
                "delta" => cfg.delta = parse_value(k, v)?,
                _ => return Err(Error::invalid(format!("unknown arls parameter `{k}`"))),
            }
        }
        cfg.validate(None)?;
        Ok(cfg)
    }

    pub fn validate(&self, n: Option<usize>) -> Result<()> {
        if self.m == 0 {
            return Err(Error::invalid("m must be at least 1"));
        }
        if let (Some(n), Strategy::UniformWithoutReplacement) = (n, self.strategy) {
            if self.m > n {
                return Err(Error::invalid(format!("m = {} exceeds n = {n} without replacement", self.m)));
            }
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!("delta must lie in (0,1), got {}", self.delta)));
        }
        if !(self.z_claim >= 1.0) {
            return Err(Error::invalid("z must be at least 1"));
        }
        if let Some(l) = self.lambda {
            check_lambda(l)?;
        }
        if self.pilot_size == Some(0) {
            return Err(Error::invalid("pilot size must be at least 1"));
        }
        Ok(())
    }

    /// The ARLS regularization that will be used on `n` points.
    pub fn arls_lambda(&self, n: usize, kernel: &KernelSpec) -> f64 {
        self.lambda.unwrap_or_else(|| {
            lambda_rule(LambdaStrategy::Arls, n, kernel.sup_norm_bound(), self.delta)
        })
    }

    pub fn arls_pilot_size(&self, n: usize) -> usize {
        self.pilot_size
            .unwrap_or_else(|| default_pilot_size(n))
            .min(n)
    }

    /// Draws node indices into `data` from the stream seeded by `self.seed`.
    pub fn select(&self, data: &Points, kernel: &KernelSpec) -> Result<Vec<usize>> {
        let mut rng = crate::rng::stream(self.seed);
        self.select_with(data, kernel, &mut rng)
    }

    pub fn select_with<R: Rng + ?Sized>(&self, data: &Points, kernel: &KernelSpec, rng: &mut R) -> Result<Vec<usize>> {
        let n = data.len();
        self.validate(Some(n))?;
        match self.strategy {
            Strategy::UniformWithoutReplacement => uniform_subsample(n, self.m, false, rng),
            Strategy::UniformWithReplacement => uniform_subsample(n, self.m, true, rng),
            Strategy::Arls => {
                let lambda = self.arls_lambda(n, kernel);
                let p = self.arls_pilot_size(n);
                let scores = approx_rls_pilot(data, kernel, lambda, p, rng)?;
                sample_proportional(&scores, self.m, rng)
            }
        }
    }
}

/// `min(n, ⌈4√n⌉)`.
pub fn default_pilot_size(n: usize) -> usize {
    ((4.0 * (n as f64).sqrt()).ceil() as usize).clamp(1, n.max(1))
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::UniformWithoutReplacement => "uniform",
            Strategy::UniformWithReplacement => "uniform-wr",
            Strategy::Arls => "arls",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(SamplerConfig::parse(s, 1, 0)?.strategy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_points(seed: u64, n: usize, d: usize) -> Points {
        let mut rng = crate::rng::stream(seed);
        Points::new((0..n * d).map(|_| rng.random::<f64>()).collect(), d).unwrap()
    }

    #[test]
    fn uniform_examples() {
        let mut rng = crate::rng::stream(0);
        let mut perm = uniform_subsample(5, 5, false, &mut rng).unwrap();
        perm.sort_unstable();
        assert_eq!(perm, vec![0, 1, 2, 3, 4]);
        assert_eq!(uniform_subsample(1, 3, true, &mut rng).unwrap(), vec![0, 0, 0]);
        let a = uniform_subsample(10_000, 100, false, &mut crate::rng::stream(7)).unwrap();
        let b = uniform_subsample(10_000, 100, false, &mut crate::rng::stream(7)).unwrap();
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 100);
        assert!(uniform_subsample(3, 4, false, &mut rng).is_err());
        assert!(uniform_subsample(3, 0, true, &mut rng).is_err());
    }

    #[test]
    fn exact_scores_identity_and_duplicates() {
        let n = 7;
        let lambda = 0.3;
        let k = GramMatrix { entries: DMatrix::identity(n, n), symmetric: true };
        let s = exact_rls(&k, lambda).unwrap();
        for v in &s.values {
            assert_abs_diff_eq!(*v, 1.0 / (1.0 + lambda * n as f64), epsilon = 1e-12);
        }
        let k = GramMatrix { entries: DMatrix::from_element(2, 2, 1.0), symmetric: true };
        let s = exact_rls(&k, lambda).unwrap();
        for v in &s.values {
            assert_abs_diff_eq!(*v, 1.0 / (2.0 + 2.0 * lambda), epsilon = 1e-12);
        }
    }

    #[test]
    fn exact_scores_reject_indefinite_matrix() {
        let k = GramMatrix { entries: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]), symmetric: true };
        let err = exact_rls(&k, 0.1).unwrap_err();
        assert!(err.is_numerical());
        assert!(exact_rls(&k, 0.0).is_err());
    }

    #[test]
    fn pilot_with_full_pilot_matches_exact() {
        let x = random_points(3, 16, 2);
        let kernel = KernelSpec::gaussian(0.5).unwrap();
        let exact = exact_rls(&gram(&kernel, &x, None).unwrap(), 1e-3).unwrap();
        let approx = approx_rls_pilot(&x, &kernel, 1e-3, 16, &mut crate::rng::stream(1)).unwrap();
        assert_eq!(approx.mode, ScoreMode::Pilot { size: 16 });
        for (a, e) in approx.values.iter().zip(&exact.values) {
            assert_abs_diff_eq!(*a, *e, epsilon = 1e-6);
        }
    }

    #[test]
    fn pilot_single_point() {
        let x = Points::from_scalars(&[0.4]).unwrap();
        let kernel = KernelSpec::periodic_sobolev(1, 1).unwrap();
        let lambda = 0.2;
        let s = approx_rls_pilot(&x, &kernel, lambda, 1, &mut crate::rng::stream(0)).unwrap();
        let kxx = kernel.value(&[0.4], &[0.4]);
        assert_abs_diff_eq!(s.values[0], kxx / (kxx + lambda), epsilon = 1e-12);
    }

    #[test]
    fn pilot_scores_equal_on_duplicates() {
        let base = random_points(8, 10, 2);
        let doubled = base.concat(&base).unwrap();
        let kernel = KernelSpec::gaussian(0.4).unwrap();
        // the first 10 rows are one full copy; pick a seed whose pilot covers it
        let mut found = false;
        for seed in 0..2000 {
            let mut rng = crate::rng::stream(seed);
            let idx = uniform_subsample(20, 10, false, &mut rng).unwrap();
            let mut covered: Vec<usize> = idx.iter().map(|i| i % 10).collect();
            covered.sort_unstable();
            covered.dedup();
            if covered.len() == 10 {
                let s = approx_rls_pilot(&doubled, &kernel, 1e-2, 10, &mut crate::rng::stream(seed)).unwrap();
                for i in 0..10 {
                    assert_abs_diff_eq!(s.values[i], s.values[i + 10], epsilon = 1e-6);
                }
                found = true;
                break;
            }
        }
        assert!(found);
    }

    #[test]
    fn pilot_bounds() {
        let x = random_points(1, 5, 1);
        let k = KernelSpec::gaussian(1.0).unwrap();
        assert!(approx_rls_pilot(&x, &k, 0.1, 0, &mut crate::rng::stream(0)).is_err());
        assert!(approx_rls_pilot(&x, &k, 0.1, 6, &mut crate::rng::stream(0)).is_err());
    }

    #[test]
    fn proportional_examples() {
        let mut rng = crate::rng::stream(2);
        let point_mass = LeverageScores { lambda: 1.0, values: vec![1.0, 0.0, 0.0], mode: ScoreMode::Exact };
        assert_eq!(sample_proportional(&point_mass, 4, &mut rng).unwrap(), vec![0, 0, 0, 0]);

        let flat = LeverageScores { lambda: 1.0, values: vec![0.5; 4], mode: ScoreMode::Exact };
        let draws = sample_proportional(&flat, 100_000, &mut rng).unwrap();
        for i in 0..4 {
            let freq = draws.iter().filter(|&&d| d == i).count() as f64 / 1e5;
            assert!((freq - 0.25).abs() < 0.01, "index {i}: {freq}");
        }

        let skew = LeverageScores { lambda: 1.0, values: vec![3.0, 1.0], mode: ScoreMode::Exact };
        let draws = sample_proportional(&skew, 100_000, &mut rng).unwrap();
        let freq = draws.iter().filter(|&&d| d == 0).count() as f64 / 1e5;
        assert!((0.74..=0.76).contains(&freq), "{freq}");

        let zero = LeverageScores { lambda: 1.0, values: vec![0.0; 3], mode: ScoreMode::Exact };
        assert!(sample_proportional(&zero, 1, &mut rng).is_err());
    }

    #[test]
    fn parses_strategies() {
        let c = SamplerConfig::parse("arls:lambda=0.01,pilot=auto", 10, 3).unwrap();
        assert_eq!(c.strategy, super::Strategy::Arls);
        assert_eq!(c.lambda, Some(0.01));
        assert_eq!(c.pilot_size, None);
        assert_eq!(SamplerConfig::parse("uniform-wr", 10, 3).unwrap().strategy, super::Strategy::UniformWithReplacement);
        assert!(SamplerConfig::parse("uniform:pilot=3", 10, 3).is_err());
        assert!(SamplerConfig::parse("dpp", 10, 3).is_err());
        assert_eq!(default_pilot_size(4096), 256);
        assert_eq!(default_pilot_size(4), 4);
    }

    /// n·ℓ_i = ‖(Ĉ_n + λI)^{-1/2} φ(x_i)‖² with features taken from a
    /// Cholesky factor of the Gram matrix, `φ(x_i) = L[i, :]`.
    fn whitened_norms(k: &DMatrix<f64>, lambda: f64) -> Vec<f64> {
        let n = k.nrows();
        let l = Cholesky::new(k.clone()).unwrap().unpack();
        let cov = l.transpose() * &l / n as f64 + DMatrix::identity(n, n) * lambda;
        let chol = Cholesky::new(cov).unwrap();
        (0..n)
            .map(|i| {
                let phi = l.row(i).transpose();
                let sol = chol.solve(&phi);
                phi.dot(&sol)
            })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn trace_identity(seed in 0u64..10_000, n in 2usize..64, lambda in 1e-4f64..1.0) {
            let x = random_points(seed, n, 2);
            let g = gram(&KernelSpec::gaussian(0.3).unwrap(), &x, None).unwrap();
            let scores = exact_rls(&g, lambda).unwrap();
            let eig = eig_sym(&g.entries).unwrap();
            let ln = lambda * n as f64;
            let expected: f64 = eig.eigenvalues.iter().map(|&s| { let s = s.max(0.0); s / (s + ln) }).sum();
            prop_assert!((scores.sum() - expected).abs() <= 1e-8);
            prop_assert!(scores.values.iter().all(|&v| v > 0.0 && v < 1.0));
        }

        #[test]
        fn whitened_feature_identity(seed in 0u64..10_000, n in 2usize..=16, lambda in 1e-3f64..1.0) {
            let x = random_points(seed, n, 1);
            let g = gram(&KernelSpec::periodic_sobolev(1, 1).unwrap(), &x, None).unwrap();
            let scores = exact_rls(&g, lambda).unwrap();
            let oracle = whitened_norms(&g.entries, lambda);
            for (s, o) in scores.values.iter().zip(&oracle) {
                prop_assert!((n as f64 * s - o).abs() <= 1e-8 * (1.0 + o.abs()));
            }
        }

        #[test]
        fn scores_decrease_with_lambda(seed in 0u64..10_000, n in 2usize..32, lambda in 1e-4f64..1.0) {
            let x = random_points(seed, n, 2);
            let g = gram(&KernelSpec::laplacian(0.5).unwrap(), &x, None).unwrap();
            let a = exact_rls(&g, lambda).unwrap();
            let b = exact_rls(&g, lambda * 1.5).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!(y < x);
            }
        }

        #[test]
        fn pilot_ratio_is_bounded(seed in 0u64..10_000, half in 4usize..=64) {
            let n = 2 * half;
            let x = random_points(seed, n, 2);
            let kernel = KernelSpec::gaussian(0.5).unwrap();
            let lambda = 1e-3;
            let exact = exact_rls(&gram(&kernel, &x, None).unwrap(), lambda).unwrap();
            let approx = approx_rls_pilot(&x, &kernel, lambda, half, &mut crate::rng::stream(seed)).unwrap();
            let worst = exact.values.iter().zip(&approx.values)
                .map(|(e, a)| (a / e).max(e / a))
                .fold(0.0f64, f64::max);
            prop_assert!(worst.is_finite() && worst <= 100.0, "worst ratio {}", worst);
        }
    }
}

//! Kernel families, Gram assembly and bandwidth selection.
//!
//! Three families are supported:
//!
//! * Gaussian, `exp(-‖x-y‖² / (2σ²))`
//! * Laplacian, `exp(-‖x-y‖ / σ)`
//! * periodic Sobolev of order `s` on `[0,1)^d`, the tensor product over
//!   coordinates of `1 + 2 Σ_{k≥1} k^{-2s} cos(2πk(x-y))`, evaluated in
//!   closed form through the Bernoulli polynomial `B_{2s}`.
//!
//! The periodic Sobolev kernel integrates to one against the uniform
//! measure in each argument, which is what makes its worst-case errors
//! available in closed form.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::points::Points;
use crate::sampling::uniform_subsample;

/// Default number of points used by the median heuristic.
pub const DEFAULT_MEDIAN_SUBSET: usize = 1000;

/// A positive-definite kernel together with its parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelSpec {
    Gaussian { bandwidth: f64 },
    Laplacian { scale: f64 },
    PeriodicSobolev { order: u32, dim: usize },
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        check_positive("gaussian bandwidth", bandwidth)?;
        Ok(KernelSpec::Gaussian { bandwidth })
    }

    pub fn laplacian(scale: f64) -> Result<Self> {
        check_positive("laplacian scale", scale)?;
        Ok(KernelSpec::Laplacian { scale })
    }

    /// Orders 1, 2 and 3 are available.
    pub fn periodic_sobolev(order: u32, dim: usize) -> Result<Self> {
        if !(1..=3).contains(&order) {
            return Err(Error::invalid(format!("sobolev order must be 1, 2 or 3, got {order}")));
        }
        if dim == 0 {
            return Err(Error::invalid("sobolev dimension must be at least 1"));
        }
        Ok(KernelSpec::PeriodicSobolev { order, dim })
    }

    /// Input dimension fixed by the kernel, if any.
    pub fn input_dim(&self) -> Option<usize> {
        match *self {
            KernelSpec::PeriodicSobolev { dim, .. } => Some(dim),
            _ => None,
        }
    }

    /// Checks that points of dimension `dim` can be fed to this kernel.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        match self.input_dim() {
            Some(d) if d != dim => Err(Error::DimensionMismatch { expected: d, found: dim }),
            _ => Ok(()),
        }
    }

    /// κ(x, y) with input validation.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
        }
        if x.is_empty() {
            return Err(Error::invalid("points must have at least one coordinate"));
        }
        self.check_dim(x.len())?;
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite coordinate"));
        }
        Ok(self.value(x, y))
    }

    /// κ(x, y) without validation; both slices must have the kernel's
    /// dimension and finite entries.
    ///
    /// Depends on the coordinates only through `|x_k - y_k|`, so the result
    /// is bitwise symmetric in its arguments.
    #[inline]
    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Gaussian { bandwidth } => {
                let d2 = squared_distance(x, y);
                (-d2 / (2.0 * bandwidth * bandwidth)).exp()
            }
            KernelSpec::Laplacian { scale } => (-squared_distance(x, y).sqrt() / scale).exp(),
            KernelSpec::PeriodicSobolev { order, .. } => x
                .iter()
                .zip(y)
                .map(|(a, b)| sobolev_1d(order, (a - b).abs()))
                .product(),
        }
    }

    /// `K = sup_x √κ(x, x)`.
    pub fn sup_norm_bound(&self) -> f64 {
        match *self {
            KernelSpec::Gaussian { .. } | KernelSpec::Laplacian { .. } => 1.0,
            KernelSpec::PeriodicSobolev { order, dim } => sobolev_1d(order, 0.0).powi(dim as i32).sqrt(),
        }
    }

    pub fn is_translation_invariant(&self) -> bool {
        true
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            KernelSpec::Gaussian { bandwidth } => write!(f, "gaussian:sigma={bandwidth}"),
            KernelSpec::Laplacian { scale } => write!(f, "laplacian:sigma={scale}"),
            KernelSpec::PeriodicSobolev { order, dim } => write!(f, "sobolev:s={order},d={dim}"),
        }
    }
}

fn check_positive(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} must be positive and finite, got {v}")))
    }
}

#[inline]
fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Bernoulli polynomial `B_{2s}(t)` for `s ∈ {1,2,3}`.
pub fn bernoulli_even(order: u32, t: f64) -> f64 {
    let t2 = t * t;
    match order {
        1 => t2 - t + 1.0 / 6.0,
        2 => t2 * t2 - 2.0 * t2 * t + t2 - 1.0 / 30.0,
        3 => {
            let t4 = t2 * t2;
            t4 * t2 - 3.0 * t4 * t + 2.5 * t4 - 0.5 * t2 + 1.0 / 42.0
        }
        _ => unreachable!("sobolev order validated at construction"),
    }
}

/// One-dimensional periodic Sobolev kernel at offset `delta ≥ 0`.
#[inline]
fn sobolev_1d(order: u32, delta: f64) -> f64 {
    let t = delta - delta.floor();
    // B_{2s} is symmetric about 1/2
    let t = t.min(1.0 - t);
    let s = order as i32;
    let sign = if order % 2 == 1 { 1.0 } else { -1.0 };
    let fact: f64 = (1..=2 * order).map(f64::from).product();
    1.0 + sign * (2.0 * PI).powi(2 * s) / fact * bernoulli_even(order, t)
}

/// Dense kernel matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    pub entries: DMatrix<f64>,
    pub symmetric: bool,
}

impl GramMatrix {
    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn max_diagonal(&self) -> f64 {
        self.entries.diagonal().iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Kernel matrix between `x` and `y`, or the symmetric Gram of `x`.
///
/// Rows are filled in parallel; each entry is a single kernel evaluation so
/// the result does not depend on the thread count.
pub fn gram(kernel: &KernelSpec, x: &Points, y: Option<&Points>) -> Result<GramMatrix> {
    if x.is_empty() {
        return Err(Error::invalid("gram needs a nonempty point sequence"));
    }
    kernel.check_dim(x.dim())?;
    match y {
        Some(y) => {
            if y.is_empty() {
                return Err(Error::invalid("gram needs a nonempty point sequence"));
            }
            if y.dim() != x.dim() {
                return Err(Error::DimensionMismatch { expected: x.dim(), found: y.dim() });
            }
            let rows: Vec<Vec<f64>> = (0..x.len())
                .into_par_iter()
                .map(|i| y.rows().map(|yj| kernel.value(x.row(i), yj)).collect())
                .collect();
            let entries = DMatrix::from_fn(x.len(), y.len(), |i, j| rows[i][j]);
            Ok(GramMatrix { entries, symmetric: false })
        }
        None => {
            let n = x.len();
            let upper: Vec<Vec<f64>> = (0..n)
                .into_par_iter()
                .map(|i| (i..n).map(|j| kernel.value(x.row(i), x.row(j))).collect())
                .collect();
            let entries = DMatrix::from_fn(n, n, |i, j| {
                let (a, b) = if i <= j { (i, j) } else { (j, i) };
                upper[a][b - a]
            });
            Ok(GramMatrix { entries, symmetric: true })
        }
    }
}

/// Kernel evaluations between one point and every row of `x`.
pub fn kernel_row(kernel: &KernelSpec, point: &[f64], x: &Points) -> Vec<f64> {
    x.rows().map(|xi| kernel.value(point, xi)).collect()
}

/// Median pairwise Euclidean distance over a random subset of the rows.
///
/// The subset has `min(subset_size, n)` points drawn without replacement.
/// Medians of an even number of distances take the midpoint.
pub fn median_heuristic<R: Rng + ?Sized>(x: &Points, subset_size: usize, rng: &mut R) -> Result<f64> {
    let n = x.len();
    if n < 2 {
        return Err(Error::invalid("median heuristic needs at least two points"));
    }
    if subset_size < 2 {
        return Err(Error::invalid("median heuristic subset must hold at least two points"));
    }
    let k = subset_size.min(n);
    let idx = if k == n { (0..n).collect() } else { uniform_subsample(n, k, false, rng)? };
    let mut dists = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in a + 1..k {
            dists.push(squared_distance(x.row(idx[a]), x.row(idx[b])).sqrt());
        }
    }
    dists.sort_by(f64::total_cmp);
    let len = dists.len();
    let median = if len % 2 == 1 {
        dists[len / 2]
    } else {
        0.5 * (dists[len / 2 - 1] + dists[len / 2])
    };
    if median > 0.0 {
        Ok(median)
    } else {
        Err(Error::invalid("median pairwise distance is zero; bandwidth must be positive"))
    }
}

/// Bandwidth given either explicitly or through the median heuristic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    Median,
}

/// A kernel as written on the command line or in a config file, before
/// any data-dependent bandwidth is resolved.
///
/// Grammar: `gaussian:sigma=<float|median>`, `laplacian:sigma=<float|median>`,
/// `sobolev:s=<int>,d=<int>`. `σ` is accepted in place of `sigma`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelChoice {
    Gaussian(Bandwidth),
    Laplacian(Bandwidth),
    Sobolev { order: u32, dim: usize },
}

impl KernelChoice {
    pub fn needs_data(&self) -> bool {
        matches!(
            self,
            KernelChoice::Gaussian(Bandwidth::Median) | KernelChoice::Laplacian(Bandwidth::Median)
        )
    }

    /// Builds the kernel, running the median heuristic on `data` if needed.
    pub fn resolve<R: Rng + ?Sized>(&self, data: &Points, subset_size: usize, rng: &mut R) -> Result<KernelSpec> {
        let bw = |b: Bandwidth, rng: &mut R| match b {
            Bandwidth::Fixed(v) => Ok(v),
            Bandwidth::Median => median_heuristic(data, subset_size, rng),
        };
        let kernel = match *self {
            KernelChoice::Gaussian(b) => KernelSpec::gaussian(bw(b, rng)?)?,
            KernelChoice::Laplacian(b) => KernelSpec::laplacian(bw(b, rng)?)?,
            KernelChoice::Sobolev { order, dim } => KernelSpec::periodic_sobolev(order, dim)?,
        };
        kernel.check_dim(data.dim())?;
        Ok(kernel)
    }
}

/// Splits `name:k=v,k=v` into the name and its key/value pairs.
pub fn split_spec(s: &str) -> Result<(&str, Vec<(&str, &str)>)> {
    let (name, rest) = match s.split_once(':') {
        Some((n, r)) => (n.trim(), r.trim()),
        None => (s.trim(), ""),
    };
    let mut params = Vec::new();
    for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("expected key=value in `{s}`, got `{part}`")))?;
        params.push((k.trim(), v.trim()));
    }
    Ok((name, params))
}

/// Parses one spec value, naming the key on failure.
pub fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::invalid(format!("cannot parse value `{v}` for `{key}`")))
}

fn parse_bandwidth(v: &str) -> Result<Bandwidth> {
    if v.eq_ignore_ascii_case("median") {
        Ok(Bandwidth::Median)
    } else {
        let b: f64 = parse_value("sigma", v)?;
        check_positive("bandwidth", b)?;
        Ok(Bandwidth::Fixed(b))
    }
}

impl FromStr for KernelChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, params) = split_spec(s)?;
        match name.to_ascii_lowercase().as_str() {
            "gaussian" | "laplacian" => {
                let mut bw = Bandwidth::Median;
                for (k, v) in params {
                    match k {
                        "sigma" | "σ" => bw = parse_bandwidth(v)?,
                        _ => return Err(Error::invalid(format!("unknown kernel parameter `{k}`"))),
                    }
                }
                Ok(if name.eq_ignore_ascii_case("gaussian") {
                    KernelChoice::Gaussian(bw)
                } else {
                    KernelChoice::Laplacian(bw)
                })
            }
            "sobolev" => {
                let (mut order, mut dim) = (None, None);
                for (k, v) in params {
                    match k {
                        "s" => order = Some(parse_value::<u32>(k, v)?),
                        "d" => dim = Some(parse_value::<usize>(k, v)?),
                        _ => return Err(Error::invalid(format!("unknown kernel parameter `{k}`"))),
                    }
                }
                let order = order.ok_or_else(|| Error::invalid("sobolev kernel needs s=<int>"))?;
                let dim = dim.unwrap_or(1);
                KernelSpec::periodic_sobolev(order, dim)?;
                Ok(KernelChoice::Sobolev { order, dim })
            }
            other => Err(Error::invalid(format!("unknown kernel `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use proptest::prelude::*;

    /// `1 + 2 Σ_{k≤terms} k^{-2s} cos(2πk t)`, summed from the smallest term up.
    fn sobolev_series(order: u32, t: f64, terms: u64) -> f64 {
        let mut acc = 0.0;
        for k in (1..=terms).rev() {
            let kf = k as f64;
            acc += (2.0 * PI * kf * t).cos() / kf.powi(2 * order as i32);
        }
        1.0 + 2.0 * acc
    }

    #[test]
    fn gaussian_and_laplacian_diagonal() {
        let g = KernelSpec::gaussian(0.7).unwrap();
        let l = KernelSpec::laplacian(0.7).unwrap();
        let x = [0.3, -1.2];
        assert_eq!(g.eval(&x, &x).unwrap(), 1.0);
        assert_eq!(l.eval(&x, &x).unwrap(), 1.0);
    }

    #[test]
    fn sobolev_diagonal_and_half_offset() {
        let k = KernelSpec::periodic_sobolev(1, 1).unwrap();
        let diag = k.eval(&[0.2], &[0.2]).unwrap();
        assert_abs_diff_eq!(diag, 1.0 + PI * PI / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(diag, 4.289868, epsilon = 1e-6);
        let half = k.eval(&[0.1], &[0.6]).unwrap();
        assert_abs_diff_eq!(half, 1.0 - PI * PI / 6.0, epsilon = 1e-12);
        // truncated-series oracle at the half offset converges fast
        assert_abs_diff_eq!(half, sobolev_series(1, 0.5, 1_000_000), epsilon = 1e-10);
    }

    #[test]
    fn bernoulli_matches_series_off_the_diagonal() {
        for order in 1..=3 {
            let k = KernelSpec::periodic_sobolev(order, 1).unwrap();
            for i in 0..100 {
                let t = (i as f64 + 0.5) / 100.0;
                let closed = k.value(&[t], &[0.0]);
                let series = sobolev_series(order, t, 1_000_000);
                assert!((closed - series).abs() <= 1e-8, "s={order} t={t}: {closed} vs {series}");
            }
        }
    }

    #[test]
    fn errors_on_bad_input() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        assert!(matches!(k.eval(&[0.0], &[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(k.eval(&[f64::INFINITY], &[0.0]).is_err());
        let s = KernelSpec::periodic_sobolev(1, 2).unwrap();
        assert!(s.eval(&[0.0], &[0.0]).is_err());
        assert!(KernelSpec::gaussian(0.0).is_err());
        assert!(KernelSpec::laplacian(-1.0).is_err());
        assert!(KernelSpec::periodic_sobolev(4, 1).is_err());
        assert!(KernelSpec::periodic_sobolev(1, 0).is_err());
    }

    #[test]
    fn sup_norm_bounds() {
        assert_eq!(KernelSpec::gaussian(2.0).unwrap().sup_norm_bound(), 1.0);
        let d1 = KernelSpec::periodic_sobolev(1, 1).unwrap().sup_norm_bound();
        assert_abs_diff_eq!(d1, (1.0 + PI * PI / 3.0).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(d1, 2.07120, epsilon = 1e-5);
        let d2 = KernelSpec::periodic_sobolev(1, 2).unwrap().sup_norm_bound();
        assert_abs_diff_eq!(d2, 1.0 + PI * PI / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn gram_examples() {
        let g = KernelSpec::gaussian(1.0).unwrap();
        let one = Points::from_scalars(&[3.0]).unwrap();
        assert_eq!(gram(&g, &one, None).unwrap().entries[(0, 0)], 1.0);

        let s = KernelSpec::periodic_sobolev(1, 1).unwrap();
        let x = Points::from_scalars(&[0.0, 0.5]).unwrap();
        let m = gram(&s, &x, None).unwrap().entries;
        let diag = sobolev_series(1, 0.0, 1_000_000);
        let off = sobolev_series(1, 0.5, 1_000_000);
        // the diagonal series tail is ~2/N
        assert_abs_diff_eq!(m[(0, 0)], diag, epsilon = 3e-6);
        assert_abs_diff_eq!(m[(1, 1)], diag, epsilon = 3e-6);
        assert_abs_diff_eq!(m[(0, 1)], off, epsilon = 1e-10);
        assert_eq!(m[(0, 1)], m[(1, 0)]);
    }

    #[test]
    fn cross_gram_shape_and_mismatch() {
        let g = KernelSpec::gaussian(1.0).unwrap();
        let x = Points::from_scalars(&[0.0, 1.0, 2.0]).unwrap();
        let y = Points::from_scalars(&[0.5]).unwrap();
        let m = gram(&g, &x, Some(&y)).unwrap();
        assert_eq!((m.nrows(), m.ncols()), (3, 1));
        assert!(!m.symmetric);
        let y2 = Points::from_rows(&[vec![0.0, 0.0]]).unwrap();
        assert!(gram(&g, &x, Some(&y2)).is_err());
    }

    #[test]
    fn median_examples() {
        let mut rng = crate::rng::stream(1);
        let x = Points::from_scalars(&[0.0, 1.0]).unwrap();
        assert_eq!(median_heuristic(&x, 1000, &mut rng).unwrap(), 1.0);
        let x = Points::from_scalars(&[0.0, 1.0, 3.0]).unwrap();
        assert_eq!(median_heuristic(&x, 1000, &mut rng).unwrap(), 2.0);
        let same = Points::from_scalars(&[2.0, 2.0, 2.0]).unwrap();
        assert!(median_heuristic(&same, 1000, &mut rng).is_err());
        assert!(median_heuristic(&x, 1, &mut rng).is_err());
    }

    #[test]
    fn median_is_reproducible() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = crate::rng::stream(5);
        let data: Vec<f64> = (0..200).map(|_| StandardNormal.sample(&mut rng)).collect();
        let x = Points::new(data, 2).unwrap();
        let a = median_heuristic(&x, 50, &mut crate::rng::stream(9)).unwrap();
        let b = median_heuristic(&x, 50, &mut crate::rng::stream(9)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn parses_kernel_strings() {
        assert_eq!("gaussian:σ=median".parse::<KernelChoice>().unwrap(), KernelChoice::Gaussian(Bandwidth::Median));
        assert_eq!(
            "laplacian:sigma=2.5".parse::<KernelChoice>().unwrap(),
            KernelChoice::Laplacian(Bandwidth::Fixed(2.5))
        );
        assert_eq!(
            "sobolev:s=3,d=2".parse::<KernelChoice>().unwrap(),
            KernelChoice::Sobolev { order: 3, dim: 2 }
        );
        assert!("sobolev:s=7".parse::<KernelChoice>().is_err());
        assert!("gaussian:sigma=-1".parse::<KernelChoice>().is_err());
        assert!("cauchy".parse::<KernelChoice>().is_err());
    }

    #[test]
    fn gram_of_distinct_points_is_psd() {
        let mut rng = crate::rng::stream(11);
        let x = Points::new((0..60).map(|_| rng.random::<f64>()).collect(), 2).unwrap();
        for k in [
            KernelSpec::gaussian(0.3).unwrap(),
            KernelSpec::laplacian(0.3).unwrap(),
            KernelSpec::periodic_sobolev(2, 2).unwrap(),
        ] {
            let g = gram(&k, &x, None).unwrap();
            assert_eq!(g.entries, g.entries.transpose());
            let e = crate::numerics::eig_sym(&g.entries).unwrap();
            let min = *e.eigenvalues.last().unwrap();
            assert!(min >= -1e-8 * g.max_diagonal(), "{k}: min eigenvalue {min}");
        }
    }

    fn kernels() -> impl Strategy<Value = KernelSpec> {
        prop_oneof![
            (0.1f64..3.0).prop_map(|b| KernelSpec::gaussian(b).unwrap()),
            (0.1f64..3.0).prop_map(|b| KernelSpec::laplacian(b).unwrap()),
            (1u32..=3).prop_map(|s| KernelSpec::periodic_sobolev(s, 2).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(k in kernels(), x in prop::array::uniform2(-3.0f64..3.0), y in prop::array::uniform2(-3.0f64..3.0)) {
            let kxy = k.value(&x, &y);
            prop_assert_eq!(kxy.to_bits(), k.value(&y, &x).to_bits());
            let kxx = k.value(&x, &x);
            let bound = k.sup_norm_bound();
            prop_assert!(kxx > 0.0);
            prop_assert!(kxx <= bound * bound * (1.0 + 1e-12));
        }

        #[test]
        fn translation_invariance(b in 0.1f64..3.0, x in prop::array::uniform2(-3.0f64..3.0),
                                  y in prop::array::uniform2(-3.0f64..3.0), c in prop::array::uniform2(-2.0f64..2.0)) {
            let shift = |p: [f64; 2], c: [f64; 2]| [p[0] + c[0], p[1] + c[1]];
            for k in [KernelSpec::gaussian(b).unwrap(), KernelSpec::laplacian(b).unwrap()] {
                prop_assert!((k.value(&shift(x, c), &shift(y, c)) - k.value(&x, &y)).abs() <= 1e-12);
            }
            // periodic kernel, shift in [0,1) and coordinates reduced mod 1
            let frac = |v: f64| v - v.floor();
            let c01 = [frac(c[0]), frac(c[1])];
            let xs = [frac(x[0] + c01[0]), frac(x[1] + c01[1])];
            let ys = [frac(y[0] + c01[0]), frac(y[1] + c01[1])];
            let s = KernelSpec::periodic_sobolev(2, 2).unwrap();
            prop_assert!((s.value(&xs, &ys) - s.value(&x, &y)).abs() <= 1e-12);
        }
    }
}

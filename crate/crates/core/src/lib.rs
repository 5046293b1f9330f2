//! Kernel quadrature through Nyström subsampling.
//!
//! An empirical measure over `n` points is compressed into an `m`-node
//! quadrature rule: nodes are subsampled from the data (uniformly, by
//! approximate ridge leverage scores, or greedily) and the weights are the
//! least-squares optimal ones, i.e. the projection of the empirical kernel
//! mean embedding onto the span of the node features.
//!
//! Module map:
//!
//! | module | contents |
//! |--------|----------|
//! | [`kernels`] | kernel families, Gram assembly, median heuristic |
//! | [`numerics`] | symmetric eigendecomposition, pseudo-inverse, compensated sums |
//! | [`sampling`] | uniform and leverage-score node selection |
//! | [`quadrature`] | optimal weights, worst-case error, MMD, compression pipeline |
//! | [`greedy`] | f-, P- and f/P-greedy node selection |
//! | [`spectral`] | effective dimension, decay bounds, parameter rules, rate curves |
//!
//! ```
//! use kquad_core::kernels::KernelSpec;
//! use kquad_core::points::Points;
//! use kquad_core::quadrature::{optimal_weights, worst_case_error, TargetMeasure};
//!
//! let kernel = KernelSpec::periodic_sobolev(1, 1).unwrap();
//! let nodes = Points::from_scalars(&(0..16).map(|i| i as f64 / 16.0).collect::<Vec<_>>()).unwrap();
//! let target = TargetMeasure::UniformUnitCube { dim: 1 };
//! let rule = optimal_weights(&kernel, &nodes, &target).unwrap();
//! let err = worst_case_error(&rule, &target, &kernel).unwrap();
//! // equispaced nodes alias exactly the frequencies divisible by 16
//! let a = std::f64::consts::PI.powi(2) / 768.0;
//! assert!(rule.weights.iter().all(|w| (w - 1.0 / (16.0 * (1.0 + a))).abs() < 1e-12));
//! assert!((err - (a / (1.0 + a)).sqrt()).abs() < 1e-9);
//! ```

pub mod error;
pub mod greedy;
pub mod kernels;
pub mod numerics;
pub mod points;
pub mod quadrature;
pub mod rng;
pub mod sampling;
pub mod spectral;

pub use error::{Error, Result};
pub use kernels::{GramMatrix, KernelSpec};
pub use points::{Dataset, Points};
pub use quadrature::{QuadratureRule, TargetMeasure};
pub use sampling::{LeverageScores, SamplerConfig};

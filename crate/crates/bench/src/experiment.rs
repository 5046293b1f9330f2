//! Method × m × trial sweeps.

use std::io::Write;
use std::time::{Duration, Instant};

use kquad_core::greedy::{empirical_embedding, GreedyState, GreedyVariant};
use kquad_core::kernels::{KernelChoice, KernelSpec};
use kquad_core::quadrature::{compress_for, optimal_weights, worst_case_error, QuadratureRule, TargetMeasure};
use kquad_core::rng::{derive_seed, stream};
use kquad_core::sampling::uniform_subsample;
use kquad_core::Dataset;
use rayon::prelude::*;

use crate::config::{DatasetSource, ExperimentConfig, Method, TargetChoice};
use crate::data::{gen_synthetic, load_csv};
use crate::error::{BenchError, Result};

/// Counter reserved for the median-heuristic subset draw.
const BANDWIDTH_STREAM: u64 = 0xB4D;

pub const RAW_HEADER: &str = "method,m,trial,error,sample_time_s,weight_time_s,total_time_s";

/// One (method, m, trial) measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub method: String,
    pub m: usize,
    pub trial: usize,
    pub error: f64,
    pub sample_time_s: f64,
    pub weight_time_s: f64,
    pub total_time_s: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentResult {
    /// Sorted by method (in config order), then `m`, then trial.
    pub rows: Vec<Row>,
}

impl ExperimentResult {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{RAW_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{:e},{:e},{:e},{:e}",
                r.method, r.m, r.trial, r.error, r.sample_time_s, r.weight_time_s, r.total_time_s
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}

/// Loads or generates the configured dataset.
pub fn load_dataset(config: &ExperimentConfig) -> Result<Dataset> {
    let data = match &config.dataset {
        DatasetSource::Synthetic { spec, n, seed } => gen_synthetic(spec, *n, *seed)?,
        DatasetSource::File { path, delimiter } => load_csv(path, false, *delimiter)?,
    };
    Ok(if config.standardize { data.standardize()? } else { data })
}

/// A configured experiment with its data, resolved kernel and target.
#[derive(Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub data: Dataset,
    pub kernel: KernelSpec,
    pub target: TargetMeasure,
}

impl Experiment {
    pub fn prepare(config: ExperimentConfig) -> Result<Self> {
        let data = load_dataset(&config)?;
        Self::new(config, data)
    }

    /// Resolves the kernel bandwidth and the target for `data`.
    pub fn new(config: ExperimentConfig, data: Dataset) -> Result<Self> {
        config.validate()?;
        let n = data.len();
        let largest = *config.m_grid.last().expect("validated grid is nonempty");
        if largest > n {
            return Err(BenchError::input(format!("m = {largest} exceeds the dataset size n = {n}")));
        }
        let mut rng = stream(derive_seed(config.master_seed, &[BANDWIDTH_STREAM]));
        let kernel = config.kernel.resolve(&data.points, config.median_subset, &mut rng)?;
        let target = match config.target {
            TargetChoice::Empirical => TargetMeasure::empirical(data.points.clone())?,
            TargetChoice::UniformCube => {
                if !matches!(kernel, KernelSpec::PeriodicSobolev { .. }) {
                    return Err(BenchError::input("the uniform_cube target needs a sobolev kernel"));
                }
                TargetMeasure::UniformUnitCube { dim: data.dim() }
            }
        };
        // warm the cached ∬κ before the workers start
        target.self_energy(&kernel)?;
        Ok(Self { config, data, kernel, target })
    }

    /// Runs every unit on a pool of `workers` threads. The output does not
    /// depend on `workers`.
    pub fn run(&self, workers: usize) -> Result<ExperimentResult> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| BenchError::input(format!("cannot start worker pool: {e}")))?;
        let cfg = &self.config;
        let mut units = Vec::new();
        for (k, method) in cfg.methods.iter().enumerate() {
            if method.is_deterministic() {
                units.push((k, None));
            } else {
                for &m in &cfg.m_grid {
                    units.extend((0..cfg.trials).map(|t| (k, Some((m, t)))));
                }
            }
        }
        let blocks: Vec<Result<Vec<Row>>> = pool.install(|| {
            units
                .par_iter()
                .map(|&(k, unit)| match unit {
                    Some((m, trial)) => self.random_trial(&cfg.methods[k], m, trial).map(|r| vec![r]),
                    None => self.greedy_sweep(&cfg.methods[k]),
                })
                .collect()
        });
        let mut rows = Vec::with_capacity(cfg.methods.len() * cfg.m_grid.len() * cfg.trials);
        for block in blocks {
            rows.extend(block?);
        }
        let order = |name: &str| cfg.methods.iter().position(|m| m.to_string() == name);
        rows.sort_by_key(|r| (order(&r.method), r.m, r.trial));
        Ok(ExperimentResult { rows })
    }

    fn row(&self, method: &Method, m: usize, trial: usize, error: f64, times: (Duration, Duration)) -> Row {
        let (s, w) = if self.config.timings { (times.0.as_secs_f64(), times.1.as_secs_f64()) } else { (0.0, 0.0) };
        Row { method: method.to_string(), m, trial, error, sample_time_s: s, weight_time_s: w, total_time_s: s + w }
    }

    fn random_rule(&self, method: &Method, m: usize, trial: usize) -> Result<(QuadratureRule, (Duration, Duration))> {
        let context = |source| BenchError::Trial { method: method.to_string(), m, trial, source };
        let seed = derive_seed(self.config.master_seed, &[method.id(), m as u64, trial as u64]);
        match method {
            Method::MonteCarlo => {
                let start = Instant::now();
                let idx = uniform_subsample(self.data.len(), m, true, &mut stream(seed)).map_err(context)?;
                let nodes = self.data.points.select(&idx);
                let sampling = start.elapsed();
                let start = Instant::now();
                let rule = QuadratureRule::new(nodes, vec![1.0 / m as f64; m])
                    .and_then(|r| r.with_source(idx))
                    .map_err(context)?;
                Ok((rule, (sampling, start.elapsed())))
            }
            Method::Nystrom(template) => {
                let mut sampler = template.clone();
                sampler.m = m;
                sampler.seed = seed;
                let c = compress_for(&self.data, &self.kernel, &sampler, &self.target).map_err(context)?;
                Ok((c.rule, (c.timings.sampling, c.timings.weights)))
            }
            Method::Greedy(_) => unreachable!("greedy methods run as one sweep"),
        }
    }

    fn random_trial(&self, method: &Method, m: usize, trial: usize) -> Result<Row> {
        let (rule, times) = self.random_rule(method, m, trial)?;
        let error = worst_case_error(&rule, &self.target, &self.kernel)
            .map_err(|source| BenchError::Trial { method: method.to_string(), m, trial, source })?;
        Ok(self.row(method, m, trial, error, times))
    }

    /// One greedy run up to the largest `m`; the selections are nested, so
    /// every grid point is read off the same run. Rows are replicated over
    /// the trials.
    fn greedy_sweep(&self, method: &Method) -> Result<Vec<Row>> {
        let Method::Greedy(variant) = *method else { unreachable!("only greedy methods sweep") };
        let grid = &self.config.m_grid;
        let context = |m, source| BenchError::Trial { method: method.to_string(), m, trial: 0, source };
        let start = Instant::now();
        let f = if variant == GreedyVariant::P { Vec::new() } else { empirical_embedding(&self.data.points, &self.kernel) };
        let mut state = GreedyState::new(&self.data.points, &self.kernel, &f, variant).map_err(|e| context(grid[0], e))?;
        let mut selecting = start.elapsed();
        let mut rows = Vec::new();
        let mut exhausted = false;
        for &m in grid {
            let start = Instant::now();
            while !exhausted && state.selected().len() < m {
                exhausted = state.step().is_none();
            }
            selecting += start.elapsed();
            let start = Instant::now();
            let idx = state.selected().to_vec();
            let rule = optimal_weights(&self.kernel, &self.data.points.select(&idx), &self.target)
                .and_then(|r| r.with_source(idx))
                .map_err(|e| context(m, e))?;
            let weighting = start.elapsed();
            let error = worst_case_error(&rule, &self.target, &self.kernel).map_err(|e| context(m, e))?;
            rows.extend((0..self.config.trials).map(|t| self.row(method, m, t, error, (selecting, weighting))));
        }
        Ok(rows)
    }
}

/// Compresses a whole dataset with one method, as the `compress` command
/// does. Returns the rule and its worst-case error for the empirical measure.
pub fn compress_dataset(
    data: &Dataset,
    kernel: &KernelChoice,
    method: &Method,
    m: usize,
    seed: u64,
    median_subset: usize,
) -> Result<(QuadratureRule, f64)> {
    let mut config = ExperimentConfig::new(
        DatasetSource::Synthetic { spec: crate::data::SyntheticSpec::UniformCube { dim: 1 }, n: data.len(), seed: 0 },
        *kernel,
        vec![method.clone()],
        vec![m],
    );
    config.master_seed = seed;
    config.median_subset = median_subset;
    let exp = Experiment::new(config, data.clone())?;
    let rule = match method {
        Method::Greedy(variant) => {
            kquad_core::greedy::greedy_quadrature_for(&exp.data, &exp.kernel, m, *variant, &exp.target)?.rule
        }
        _ => exp.random_rule(method, m, 0)?.0,
    };
    let error = worst_case_error(&rule, &exp.target, &exp.kernel)?;
    Ok((rule, error))
}

pub fn run_experiment(config: ExperimentConfig, workers: usize) -> Result<ExperimentResult> {
    Experiment::prepare(config)?.run(workers)
}

/// Worker count: the request (or every core), capped by `KQUAD_THREADS`.
pub fn worker_count(requested: Option<usize>) -> Result<usize> {
    worker_count_with(requested, std::env::var("KQUAD_THREADS").ok().as_deref())
}

pub fn worker_count_with(requested: Option<usize>, cap: Option<&str>) -> Result<usize> {
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let mut workers = requested.unwrap_or(cores);
    if let Some(cap) = cap {
        let cap: usize = cap
            .trim()
            .parse()
            .ok()
            .filter(|&c| c > 0)
            .ok_or_else(|| BenchError::input(format!("KQUAD_THREADS must be a positive integer, got `{cap}`")))?;
        workers = workers.min(cap);
    }
    Ok(workers.max(1))
}

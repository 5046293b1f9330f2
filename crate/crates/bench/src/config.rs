//! Experiment configuration files.
//!
//! One `key = value` pair per line; `#` starts a comment. Relative paths are
//! resolved against the directory holding the config file.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use kquad_core::greedy::GreedyVariant;
use kquad_core::kernels::{split_spec, KernelChoice, DEFAULT_MEDIAN_SUBSET};
use kquad_core::sampling::{SamplerConfig, Strategy};

use crate::data::SyntheticSpec;
use crate::error::{BenchError, Result};

/// Where the points come from.
#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSource {
    Synthetic { spec: SyntheticSpec, n: usize, seed: u64 },
    File { path: PathBuf, delimiter: char },
}

/// Measure the rules are weighted for and scored against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TargetChoice {
    /// Uniform weights on the whole dataset.
    Empirical,
    /// Lebesgue measure on `[0,1]^d`; periodic Sobolev kernels only.
    UniformCube,
}

impl FromStr for TargetChoice {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "empirical" => Ok(TargetChoice::Empirical),
            "uniform_cube" => Ok(TargetChoice::UniformCube),
            other => Err(BenchError::input(format!("unknown target `{other}`"))),
        }
    }
}

/// A quadrature method under test.
#[derive(Clone, Debug, PartialEq)]
pub enum Method {
    /// Uniform i.i.d. nodes with equal weights `1/m`.
    MonteCarlo,
    /// Subsampled nodes with optimal weights. The sampler's `m` and `seed`
    /// are filled in per trial.
    Nystrom(SamplerConfig),
    Greedy(GreedyVariant),
}

impl Method {
    /// Stable identifier mixed into the per-trial seeds.
    pub fn id(&self) -> u64 {
        match self {
            Method::MonteCarlo => 0,
            Method::Nystrom(s) => match s.strategy {
                Strategy::UniformWithoutReplacement => 1,
                Strategy::UniformWithReplacement => 2,
                Strategy::Arls => 3,
            },
            Method::Greedy(GreedyVariant::F) => 4,
            Method::Greedy(GreedyVariant::P) => 5,
            Method::Greedy(GreedyVariant::FOverP) => 6,
        }
    }

    /// Greedy methods ignore the trial seed.
    pub fn is_deterministic(&self) -> bool {
        matches!(self, Method::Greedy(_))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::MonteCarlo => f.write_str("monte-carlo"),
            Method::Nystrom(s) => write!(f, "{}", s.strategy),
            Method::Greedy(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for Method {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        let (name, params) = split_spec(s)?;
        match name {
            "monte-carlo" | "f-greedy" | "p-greedy" | "fp-greedy" if !params.is_empty() => {
                Err(BenchError::input(format!("method `{name}` takes no parameters")))
            }
            "monte-carlo" => Ok(Method::MonteCarlo),
            "f-greedy" | "p-greedy" | "fp-greedy" => Ok(Method::Greedy(name.parse()?)),
            _ => Ok(Method::Nystrom(SamplerConfig::parse(s, 1, 0)?)),
        }
    }
}

/// One experiment: every method at every `m`, `trials` times.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub standardize: bool,
    pub kernel: KernelChoice,
    pub median_subset: usize,
    pub target: TargetChoice,
    pub methods: Vec<Method>,
    pub m_grid: Vec<usize>,
    pub trials: usize,
    pub master_seed: u64,
    pub output: PathBuf,
    pub summary: Option<PathBuf>,
    /// Record wall-clock phase times. Off by default so that reruns are
    /// byte-identical; when off every time column is written as 0.
    pub timings: bool,
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    /// A config with one method set, defaults elsewhere.
    pub fn new(dataset: DatasetSource, kernel: KernelChoice, methods: Vec<Method>, m_grid: Vec<usize>) -> Self {
        Self {
            dataset,
            standardize: false,
            kernel,
            median_subset: DEFAULT_MEDIAN_SUBSET,
            target: TargetChoice::Empirical,
            methods,
            m_grid,
            trials: 1,
            master_seed: 0,
            output: PathBuf::from("results.csv"),
            summary: None,
            timings: false,
            workers: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base).map_err(|e| match e {
            BenchError::Input(msg) => BenchError::input(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut entries: HashMap<String, (usize, String)> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| BenchError::input(format!("line {}: expected `key = value`", i + 1)))?;
            let key = k.trim().to_string();
            if !KEYS.contains(&key.as_str()) {
                return Err(BenchError::input(format!("line {}: unknown key `{key}`", i + 1)));
            }
            if let Some((first, _)) = entries.insert(key.clone(), (i + 1, v.trim().to_string())) {
                return Err(BenchError::input(format!("line {}: `{key}` already set on line {first}", i + 1)));
            }
        }
        let get = |key: &str| entries.get(key).map(|(line, v)| (*line, v.as_str()));
        let require = |key: &str| get(key).ok_or_else(|| BenchError::input(format!("missing key `{key}`")));
        let at = |line: usize, e: BenchError| BenchError::input(format!("line {line}: {e}"));
        fn num<T: FromStr>(key: &str, line: usize, v: &str) -> Result<T> {
            v.parse().map_err(|_| BenchError::input(format!("line {line}: cannot parse `{v}` for `{key}`")))
        }
        fn flag(key: &str, line: usize, v: &str) -> Result<bool> {
            match v {
                "on" | "true" | "yes" => Ok(true),
                "off" | "false" | "no" => Ok(false),
                _ => Err(BenchError::input(format!("line {line}: `{key}` must be on or off, got `{v}`"))),
            }
        }
        let resolve = |v: &str| base_dir.join(v);

        let (line, ds) = require("dataset")?;
        let dataset = match ds.strip_prefix("file:") {
            Some(path) => {
                let delimiter = match get("delimiter") {
                    None => ',',
                    Some((_, "tab")) => '\t',
                    Some((l, d)) => {
                        let mut chars = d.chars();
                        match (chars.next(), chars.next()) {
                            (Some(c), None) => c,
                            _ => return Err(BenchError::input(format!("line {l}: delimiter must be one character"))),
                        }
                    }
                };
                DatasetSource::File { path: resolve(path.trim()), delimiter }
            }
            None => {
                let spec = ds.parse().map_err(|e| at(line, e))?;
                let (nl, n) = require("n")?;
                let seed = match get("dataset_seed") {
                    Some((l, v)) => num("dataset_seed", l, v)?,
                    None => 0,
                };
                DatasetSource::Synthetic { spec, n: num("n", nl, n)?, seed }
            }
        };

        let (line, k) = require("kernel")?;
        let kernel = k.parse().map_err(|e: kquad_core::Error| at(line, e.into()))?;

        let (line, ms) = require("methods")?;
        let methods = ms
            .split(|c: char| c.is_whitespace() || c == ';')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<Method>().map_err(|e| at(line, e)))
            .collect::<Result<Vec<_>>>()?;

        let (line, grid) = require("m_grid")?;
        let m_grid = grid
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| num("m_grid", line, s))
            .collect::<Result<Vec<usize>>>()?;

        let mut cfg = ExperimentConfig::new(dataset, kernel, methods, m_grid);
        if let Some((l, v)) = get("standardize") {
            cfg.standardize = flag("standardize", l, v)?;
        }
        if let Some((l, v)) = get("median_subset") {
            cfg.median_subset = num("median_subset", l, v)?;
        }
        if let Some((l, v)) = get("target") {
            cfg.target = v.parse().map_err(|e| at(l, e))?;
        }
        if let Some((l, v)) = get("trials") {
            cfg.trials = num("trials", l, v)?;
        }
        if let Some((l, v)) = get("seed") {
            cfg.master_seed = num("seed", l, v)?;
        }
        cfg.output = resolve(require("output")?.1);
        cfg.summary = get("summary").map(|(_, v)| resolve(v));
        if let Some((l, v)) = get("timings") {
            cfg.timings = flag("timings", l, v)?;
        }
        if let Some((l, v)) = get("workers") {
            cfg.workers = Some(num("workers", l, v)?);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(BenchError::input("at least one method is required"));
        }
        let mut names: Vec<String> = self.methods.iter().map(|m| m.to_string()).collect();
        names.sort();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(BenchError::input(format!("method `{}` listed twice", w[0])));
        }
        if self.m_grid.is_empty() || self.m_grid[0] == 0 {
            return Err(BenchError::input("m_grid needs positive entries"));
        }
        if self.m_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(BenchError::input("m_grid must be strictly increasing"));
        }
        if self.trials == 0 {
            return Err(BenchError::input("trials must be at least 1"));
        }
        if self.median_subset < 2 {
            return Err(BenchError::input("median_subset must be at least 2"));
        }
        if self.workers == Some(0) {
            return Err(BenchError::input("workers must be at least 1"));
        }
        if let DatasetSource::Synthetic { n: 0, .. } = self.dataset {
            return Err(BenchError::input("n must be at least 1"));
        }
        Ok(())
    }
}

const KEYS: &[&str] = &[
    "dataset",
    "n",
    "dataset_seed",
    "delimiter",
    "standardize",
    "kernel",
    "median_subset",
    "target",
    "methods",
    "m_grid",
    "trials",
    "seed",
    "output",
    "summary",
    "timings",
    "workers",
];

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kquad::data::load_csv;
use kquad::experiment::Experiment;
use kquad::rates::{parse_rate_model, rate_reports, write_reports};
use kquad::summary::{read_summary, summarize, write_summary};
use kquad::{compress_dataset, worker_count, BenchError, ExperimentConfig, Method, Result};
use kquad_core::kernels::{KernelChoice, DEFAULT_MEDIAN_SUBSET};

#[derive(Parser)]
#[command(name = "kquad", version, about = "Kernel quadrature by Nyström subsampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Worker threads (default: all cores; KQUAD_THREADS caps it).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Compress a CSV dataset into a weighted quadrature rule.
    Compress {
        #[arg(long)]
        input: PathBuf,
        /// e.g. `gaussian:sigma=median`, `laplacian:sigma=0.5`, `sobolev:s=1,d=2`.
        #[arg(long)]
        kernel: String,
        /// monte-carlo, uniform, uniform-wr, arls[:lambda=..,pilot=..], f-greedy, p-greedy, fp-greedy.
        #[arg(long)]
        method: String,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        standardize: bool,
        #[arg(long, default_value_t = ',')]
        delimiter: char,
        #[arg(long, default_value_t = DEFAULT_MEDIAN_SUBSET)]
        median_subset: usize,
    },
    /// Fit log-log slopes of a summary CSV and compare them with a rate model.
    Rates {
        #[arg(long)]
        summary: PathBuf,
        /// monte-carlo, sobolev:s=..,d=.., uniform-poly:gamma=.., uniform-exp,
        /// arls-poly:gamma=.., arls-exp:c=..
        #[arg(long)]
        model: String,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| BenchError::io(path, e))
}

fn finish(path: &Path, written: std::io::Result<()>, out: BufWriter<File>) -> Result<()> {
    written
        .and_then(|_| out.into_inner().map_err(|e| e.into_error()).map(drop))
        .map_err(|e| BenchError::io(path, e))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Run { config, workers } => {
            let cfg = ExperimentConfig::load(&config)?;
            let workers = worker_count(workers.or(cfg.workers))?;
            let exp = Experiment::prepare(cfg)?;
            let result = exp.run(workers)?;
            let mut out = create(&exp.config.output)?;
            let written = result.write_csv(&mut out);
            finish(&exp.config.output, written, out)?;
            if let Some(path) = &exp.config.summary {
                let mut out = create(path)?;
                let written = write_summary(&summarize(&result)?, &mut out);
                finish(path, written, out)?;
            }
            eprintln!("{} rows -> {}", result.rows.len(), exp.config.output.display());
        }
        Command::Compress { input, kernel, method, m, seed, output, standardize, delimiter, median_subset } => {
            let data = load_csv(&input, standardize, delimiter)?;
            let kernel: KernelChoice = kernel.parse()?;
            let method: Method = method.parse()?;
            let (rule, error) = compress_dataset(&data, &kernel, &method, m, seed, median_subset)?;
            let mut out = create(&output)?;
            let written = rule.write_csv(&mut out);
            finish(&output, written, out)?;
            println!("method={method} n={} m={} error={error:e}", data.len(), rule.len());
        }
        Command::Rates { summary, model } => {
            let text = std::fs::read_to_string(&summary).map_err(|e| BenchError::io(&summary, e))?;
            let model = parse_rate_model(&model)?;
            let reports = rate_reports(&read_summary(&text)?, &model)?;
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_reports(&reports, &mut lock)
                .and_then(|_| lock.flush())
                .map_err(|e| BenchError::io("<stdout>", e))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

mod commands;
mod report;
mod vectors;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serpens::Config;
use tracing_subscriber::EnvFilter;

use crate::vectors::VectorSource;

/// Exit codes. Stable; scripts depend on them.
pub mod exit {
    pub const VERIFY_FAILED: u8 = 1;
    pub const INPUT: u8 = 2;
    pub const IMAGE: u8 = 3;
    pub const EXECUTION: u8 = 4;
}

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub trait WithCode<T> {
    fn code(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> WithCode<T> for Result<T, E> {
    fn code(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure { code, error: e.into() })
    }
}

#[derive(Parser)]
#[command(
    name = "serpens",
    version,
    about = "Serpens SpMV accelerator toolchain: compile, simulate, model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
pub struct ConfigArgs {
    /// HBM channels carrying the sparse matrix
    #[arg(long, default_value_t = 16)]
    channels: usize,
    /// x-segment length in elements (multiple of 16)
    #[arg(long, default_value_t = 8192)]
    segment_width: usize,
    /// accumulation latency T in cycles
    #[arg(long = "latency-T", default_value_t = 2)]
    latency: usize,
    /// URAMs per PE
    #[arg(long = "uram-per-pe", default_value_t = 3)]
    urams_per_pe: usize,
    /// URAM depth at 72-bit width
    #[arg(long, default_value_t = 4096)]
    uram_depth: usize,
    #[arg(long, default_value_t = 223.0)]
    freq_mhz: f64,
}

impl ConfigArgs {
    pub fn config(&self) -> Result<Config, Failure> {
        let c = Config {
            channels: self.channels,
            segment_width: self.segment_width,
            latency: self.latency,
            urams_per_pe: self.urams_per_pe,
            uram_depth: self.uram_depth,
            freq_mhz: self.freq_mhz,
        };
        c.validate().code(exit::INPUT)?;
        Ok(c)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a Matrix Market file into a .srp image
    Preprocess {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// also write the compile statistics to this file
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run a .srp image on the simulator
    Simulate {
        image: PathBuf,
        /// ones | zeros | random | file:PATH
        #[arg(long, default_value = "ones")]
        x: VectorSource,
        /// ones | zeros | random | file:PATH
        #[arg(long, default_value = "zeros")]
        y: VectorSource,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        alpha: f32,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        beta: f32,
        /// seed for random vectors (x uses seed, y uses seed + 1)
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// compare against the reference SpMV and check hazards and traces
        #[arg(long)]
        verify: bool,
        /// original matrix; with --verify also checks the image holds exactly its entries
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// write the off-chip access trace as CSV
        #[arg(long)]
        trace: Option<PathBuf>,
        /// include y_out in the report
        #[arg(long)]
        include_y: bool,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Evaluate the analytic resource and cycle models
    Model {
        /// read M, K, nnz from a Matrix Market file
        #[arg(long, conflicts_with_all = ["m", "matrix_id", "paper_table"])]
        matrix: Option<PathBuf>,
        /// one of the published matrices, G1..G12
        #[arg(long, conflicts_with_all = ["m", "paper_table"])]
        matrix_id: Option<String>,
        #[arg(long = "M", requires_all = ["k", "nnz"])]
        m: Option<u64>,
        #[arg(long = "K")]
        k: Option<u64>,
        #[arg(long)]
        nnz: Option<u64>,
        /// model all twelve published matrices against their measured results
        #[arg(long)]
        paper_table: bool,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Compile, simulate and verify many matrices in parallel
    Batch {
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// worker threads (0 = all cores)
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Write a seeded random matrix in Matrix Market format
    Generate {
        #[arg(long = "M")]
        m: usize,
        #[arg(long = "K")]
        k: usize,
        #[arg(long)]
        nnz: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// power-law row-degree exponent (0 = uniform)
        #[arg(long, default_value_t = 0.0)]
        skew: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Preprocess {
            input,
            output,
            config,
            json,
        } => commands::preprocess(&input, &output, &config.config()?, json.as_deref()),
        Command::Simulate {
            image,
            x,
            y,
            alpha,
            beta,
            seed,
            verify,
            matrix,
            trace,
            include_y,
            json,
        } => commands::simulate(commands::SimulateArgs {
            image,
            x,
            y,
            alpha,
            beta,
            seed,
            verify,
            matrix,
            trace,
            include_y,
            json,
        }),
        Command::Model {
            matrix,
            matrix_id,
            m,
            k,
            nnz,
            paper_table,
            config,
            format,
            json,
        } => {
            let cfg = config.config()?;
            if paper_table {
                commands::model_paper_table(&cfg, format, json.as_deref())
            } else {
                let shape =
                    commands::ModelShape::resolve(matrix, matrix_id, m.zip(k).zip(nnz).map(|((m, k), n)| (m, k, n)))?;
                commands::model(shape, &cfg, format, json.as_deref())
            }
        }
        Command::Batch {
            inputs,
            config,
            seed,
            threads,
            json,
        } => commands::batch(&inputs, &config.config()?, seed, threads, json.as_deref()),
        Command::Generate {
            m,
            k,
            nnz,
            seed,
            skew,
            output,
        } => commands::generate(m, k, nnz, seed, skew, &output),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("SERPENS_LOG").unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::INPUT } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use rayon::prelude::*;
use serde::Serialize;
use serpens::generate::{generate_random, RandomSpec};
use serpens::layout::{read_image, write_image, FormatError, LANES_PER_CHANNEL};
use serpens::models::{published_matrices, ModelEstimate, PublishedMatrix, SERPENS_PLATFORM, SERPENS_V24_FREQ_MHZ};
use serpens::mtx::{read_matrix_market, write_matrix_market, MtxError};
use serpens::sim::check_hazards;
use serpens::sparse::max_relative_error;
use serpens::{compile, reference_spmv, Config, DenseVector, SerpensImage, SimOptions, SparseMatrix};
use tracing::{debug, info, warn};

use crate::report::{channel_balance, emit, PreprocessReport, RunReport, SimSummary, Verdict, SCHEMA_VERSION};
use crate::vectors::VectorSource;
use crate::{exit, Failure, Format, WithCode};

const ORACLE_TOLERANCE: f64 = 1e-4;

fn load_matrix(path: &Path) -> Result<SparseMatrix, Failure> {
    let t = Instant::now();
    let a = read_matrix_market(path)
        .map_err(|e| match e {
            MtxError::Io(io) => anyhow!(io).context(format!("cannot read {}", path.display())),
            other => anyhow!(other).context(format!("cannot parse {}", path.display())),
        })
        .code(exit::INPUT)?;
    info!(path = %path.display(), m = a.nrows(), k = a.ncols(), nnz = a.nnz(), ms = t.elapsed().as_millis() as u64, "loaded matrix");
    Ok(a)
}

fn load_image(path: &Path) -> Result<SerpensImage, Failure> {
    read_image(path).map_err(|e| match e {
        FormatError::Io(io) => Failure {
            code: exit::INPUT,
            error: anyhow!(io).context(format!("cannot read {}", path.display())),
        },
        other => Failure {
            code: exit::IMAGE,
            error: anyhow!(other).context(format!("cannot decode {}", path.display())),
        },
    })
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn preprocess(input: &Path, output: &Path, cfg: &Config, json: Option<&Path>) -> Result<u8, Failure> {
    let a = load_matrix(input)?;
    let t = Instant::now();
    let img = compile(&a, cfg).context("compile failed").code(exit::EXECUTION)?;
    info!(
        ms = t.elapsed().as_millis() as u64,
        words = img.total_words(),
        "compiled"
    );
    write_image(&img, output)
        .with_context(|| format!("cannot write {}", output.display()))
        .code(exit::INPUT)?;
    let stats = img.stats();
    let h = img.header();
    let report = PreprocessReport {
        schema_version: SCHEMA_VERSION,
        input: input.display().to_string(),
        output: output.display().to_string(),
        nrows: h.nrows,
        ncols: h.ncols,
        config: *cfg,
        row_windows: h.row_windows,
        segments: h.segments,
        channel_balance: channel_balance(&stats),
        stats,
        image_bytes: std::fs::metadata(output).map(|m| m.len()).unwrap_or(0),
    };
    emit(&report, json).code(exit::INPUT)?;
    Ok(0)
}

pub struct SimulateArgs {
    pub image: PathBuf,
    pub x: VectorSource,
    pub y: VectorSource,
    pub alpha: f32,
    pub beta: f32,
    pub seed: u64,
    pub verify: bool,
    pub matrix: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub include_y: bool,
    pub json: Option<PathBuf>,
}

struct RunInputs<'a> {
    id: String,
    x: DenseVector,
    y: DenseVector,
    alpha: f32,
    beta: f32,
    verify: bool,
    /// the matrix the image is expected to hold
    original: Option<&'a SparseMatrix>,
    trace: Option<&'a Path>,
    include_y: bool,
    sources: BTreeMap<&'static str, String>,
}

fn run_image(img: &SerpensImage, run: RunInputs<'_>) -> Result<RunReport, Failure> {
    let h = img.header();
    let cfg = *img.config();
    let model = ModelEstimate::new(h.nrows as u64, h.ncols as u64, h.nnz as u64, &cfg, &SERPENS_PLATFORM);
    let options = SimOptions {
        trace: run.verify || run.trace.is_some(),
        abort_on_hazard: !run.verify,
    };
    let t = Instant::now();
    let result = serpens::simulate(img, &run.x, &run.y, run.alpha, run.beta, options)
        .context("simulation failed")
        .code(exit::EXECUTION)?;
    info!(
        ms = t.elapsed().as_millis() as u64,
        cycles = result.cycles.total,
        "simulated"
    );

    if let (Some(path), Some(trace)) = (run.trace, &result.trace) {
        let file = std::fs::File::create(path)
            .with_context(|| format!("cannot write {}", path.display()))
            .code(exit::INPUT)?;
        trace
            .to_csv(std::io::BufWriter::new(file))
            .context("writing trace")
            .code(exit::INPUT)?;
    }

    let mut verdicts = BTreeMap::new();
    if run.verify {
        let decoded = img
            .decode_matrix()
            .context("image holds an undecodable matrix")
            .code(exit::IMAGE)?;
        if let Some(original) = run.original {
            let same = original.nrows() == decoded.nrows()
                && original.ncols() == decoded.ncols()
                && original.row_ptr() == decoded.row_ptr()
                && original.col_idx() == decoded.col_idx()
                && original
                    .values()
                    .iter()
                    .zip(decoded.values())
                    .all(|(a, b)| a.to_bits() == b.to_bits());
            verdicts.insert(
                "matrix",
                Verdict::new(
                    same,
                    format!("image holds {} entries, matrix file {}", decoded.nnz(), original.nnz()),
                ),
            );
        }
        let want = reference_spmv(&decoded, &run.x, &run.y, run.alpha, run.beta)
            .context("reference SpMV failed")
            .code(exit::EXECUTION)?;
        let err = max_relative_error(result.y_out.as_slice(), want.as_slice());
        verdicts.insert(
            "oracle",
            Verdict::new(
                err <= ORACLE_TOLERANCE,
                format!("max relative error {err:.3e} (tolerance {ORACLE_TOLERANCE:e})"),
            ),
        );

        let static_hazards: usize = (0..cfg.channels)
            .flat_map(|c| (0..LANES_PER_CHANNEL).map(move |l| (c, l)))
            .map(|(c, l)| check_hazards(&img.lane_stream(c, l), cfg.latency).len())
            .sum();
        verdicts.insert(
            "hazards",
            Verdict::new(
                static_hazards == 0 && result.hazard_violations == 0,
                format!(
                    "{static_hazards} in lane streams, {} during simulation",
                    result.hazard_violations
                ),
            ),
        );

        let tv = result.verify_trace();
        let mut notes: Vec<String> = tv
            .channels
            .iter()
            .filter_map(|c| match (&c.detail, &c.deviation) {
                (Some(d), _) if !c.pass => Some(format!("{}: {d}", c.name)),
                (_, Some(d)) => Some(format!("{}: deviation: {d}", c.name)),
                _ => None,
            })
            .collect();
        if notes.is_empty() {
            notes.push(format!("{} channels streamed sequentially", tv.channels.len()));
        }
        verdicts.insert("trace", Verdict::new(tv.pass, notes.join("; ")));

        verdicts.insert(
            "model_bound",
            Verdict::new(
                result.cycles.total >= model.cycles,
                format!(
                    "simulated {} cycles, analytic lower bound {}",
                    result.cycles.total, model.cycles
                ),
            ),
        );
    }

    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        matrix: run.id,
        config: cfg,
        inputs: run.sources,
        sim: SimSummary::new(&result, &model, run.include_y),
        model,
        verdicts,
    })
}

fn sources(x: &VectorSource, y: &VectorSource, alpha: f32, beta: f32, seed: u64) -> BTreeMap<&'static str, String> {
    BTreeMap::from([
        ("x", x.to_string()),
        ("y", y.to_string()),
        ("alpha", alpha.to_string()),
        ("beta", beta.to_string()),
        ("seed", seed.to_string()),
    ])
}

pub fn simulate(args: SimulateArgs) -> Result<u8, Failure> {
    let img = load_image(&args.image)?;
    let original = args.matrix.as_deref().map(load_matrix).transpose()?;
    let h = img.header();
    let x = args.x.materialize(h.ncols, args.seed).context("x").code(exit::INPUT)?;
    let y = args
        .y
        .materialize(h.nrows, args.seed.wrapping_add(1))
        .context("y")
        .code(exit::INPUT)?;
    let id = args.matrix.as_deref().map(stem).unwrap_or_else(|| stem(&args.image));
    let report = run_image(
        &img,
        RunInputs {
            id,
            x,
            y,
            alpha: args.alpha,
            beta: args.beta,
            verify: args.verify,
            original: original.as_ref(),
            trace: args.trace.as_deref(),
            include_y: args.include_y,
            sources: sources(&args.x, &args.y, args.alpha, args.beta, args.seed),
        },
    )?;
    emit(&report, args.json.as_deref()).code(exit::INPUT)?;
    if report.passed() {
        Ok(0)
    } else {
        for (name, v) in report.verdicts.iter().filter(|(_, v)| !v.pass) {
            eprintln!("verify failed: {name}: {}", v.detail.as_deref().unwrap_or(""));
        }
        Ok(exit::VERIFY_FAILED)
    }
}

pub enum ModelShape {
    Dims { id: String, m: u64, k: u64, nnz: u64 },
    Published(&'static PublishedMatrix),
}

impl ModelShape {
    pub fn resolve(
        matrix: Option<PathBuf>,
        id: Option<String>,
        dims: Option<(u64, u64, u64)>,
    ) -> Result<Self, Failure> {
        if let Some(path) = matrix {
            let a = load_matrix(&path)?;
            return Ok(ModelShape::Dims {
                id: stem(&path),
                m: a.nrows() as u64,
                k: a.ncols() as u64,
                nnz: a.nnz() as u64,
            });
        }
        if let Some(id) = id {
            return published_matrices()
                .iter()
                .find(|p| p.id.eq_ignore_ascii_case(&id) || p.name.eq_ignore_ascii_case(&id))
                .map(ModelShape::Published)
                .ok_or_else(|| anyhow!("unknown matrix id {id:?}; expected G1..G12"))
                .code(exit::INPUT);
        }
        match dims {
            Some((m, k, nnz)) if nnz <= m.saturating_mul(k) => Ok(ModelShape::Dims {
                id: String::new(),
                m,
                k,
                nnz,
            }),
            Some((m, k, nnz)) => Err(anyhow!("nnz {nnz} exceeds {m} x {k}")).code(exit::INPUT),
            None => Err(anyhow!("give --matrix, --matrix-id, --M/--K/--nnz or --paper-table")).code(exit::INPUT),
        }
    }
}

#[derive(Serialize)]
struct ModelReport {
    schema_version: u32,
    matrix: String,
    config: Config,
    estimate: ModelEstimate,
    /// the same matrix on the default 16-channel build, when `config` differs
    #[serde(skip_serializing_if = "Option::is_none")]
    baseline_16: Option<ModelEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    speedup_vs_16: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    published: Option<&'static PublishedMatrix>,
}

pub fn model(shape: ModelShape, cfg: &Config, format: Format, json: Option<&Path>) -> Result<u8, Failure> {
    let (id, m, k, nnz, published) = match shape {
        ModelShape::Dims { id, m, k, nnz } => (id, m, k, nnz, None),
        ModelShape::Published(p) => (p.id.clone(), p.nrows(), p.ncols(), p.nnz, Some(p)),
    };
    let estimate = ModelEstimate::new(m, k, nnz, cfg, &SERPENS_PLATFORM);
    let baseline_16 =
        (*cfg != Config::default()).then(|| ModelEstimate::new(m, k, nnz, &Config::default(), &SERPENS_PLATFORM));
    let speedup_vs_16 = baseline_16
        .as_ref()
        .filter(|_| estimate.time_ms > 0.0)
        .map(|b| b.time_ms / estimate.time_ms);
    let report = ModelReport {
        schema_version: SCHEMA_VERSION,
        matrix: id,
        config: *cfg,
        estimate,
        baseline_16,
        speedup_vs_16,
        published,
    };
    match format {
        Format::Json => emit(&report, json).code(exit::INPUT)?,
        Format::Table => {
            let e = &report.estimate;
            let mut out = std::io::stdout().lock();
            let rows: Vec<(&str, String)> = vec![
                (
                    "matrix",
                    if report.matrix.is_empty() {
                        "-".into()
                    } else {
                        report.matrix.clone()
                    },
                ),
                ("M x K", format!("{} x {}", e.nrows, e.ncols)),
                ("nnz", e.nnz.to_string()),
                ("channels", e.channels.to_string()),
                ("BRAMs", e.brams.to_string()),
                ("URAMs", e.urams.to_string()),
                ("row depth", e.row_depth.to_string()),
                ("row windows", e.row_windows.to_string()),
                ("cycles", e.cycles.to_string()),
                ("time (ms)", format!("{:.4}", e.time_ms)),
                ("MTEPS", format!("{:.1}", e.mteps)),
                ("MTEPS / (GB/s)", format!("{:.2}", e.bandwidth_eff)),
                ("MTEPS / W", format!("{:.1}", e.energy_eff)),
            ];
            for (k, v) in rows {
                writeln!(out, "{k:<16}{v}").code(exit::INPUT)?;
            }
            if let Some(s) = report.speedup_vs_16 {
                writeln!(out, "{:<16}{s:.3}x", "vs 16 channels").code(exit::INPUT)?;
            }
            if let Some(p) = report.published {
                writeln!(
                    out,
                    "{:<16}{:.4} ms, {:.1} MTEPS",
                    "published", p.serpens_ms, p.serpens_mteps
                )
                .code(exit::INPUT)?;
            }
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct PublishedRow {
    id: String,
    name: String,
    nrows: u64,
    nnz: u64,
    cycles: u64,
    modeled_ms: f64,
    published_ms: f64,
    /// modeled over published time; below 1 means the model is optimistic
    time_ratio: f64,
    modeled_mteps: f64,
    published_mteps: f64,
    v24_cycles: u64,
    v24_modeled_mteps: f64,
    v24_published_mteps: f64,
}

pub fn model_paper_table(cfg: &Config, format: Format, json: Option<&Path>) -> Result<u8, Failure> {
    let v24 = Config {
        channels: 24,
        freq_mhz: SERPENS_V24_FREQ_MHZ,
        ..*cfg
    };
    let rows: Vec<PublishedRow> = published_matrices()
        .iter()
        .map(|p| {
            let e = ModelEstimate::new(p.nrows(), p.ncols(), p.nnz, cfg, &SERPENS_PLATFORM);
            let e24 = ModelEstimate::new(p.nrows(), p.ncols(), p.nnz, &v24, &SERPENS_PLATFORM);
            PublishedRow {
                id: p.id.clone(),
                name: p.name.clone(),
                nrows: p.nrows(),
                nnz: p.nnz,
                cycles: e.cycles,
                modeled_ms: e.time_ms,
                published_ms: p.serpens_ms,
                time_ratio: e.time_ms / p.serpens_ms,
                modeled_mteps: e.mteps,
                published_mteps: p.serpens_mteps,
                v24_cycles: e24.cycles,
                v24_modeled_mteps: e24.mteps,
                v24_published_mteps: p.v24_mteps,
            }
        })
        .collect();
    match format {
        Format::Json => emit(&rows, json).code(exit::INPUT)?,
        Format::Table => {
            let mut out = std::io::stdout().lock();
            let mut line = |s: String| writeln!(out, "{s}").code(exit::INPUT);
            line(format!(
                "{:<4} {:<18} {:>10} {:>11} {:>10} {:>10} {:>10} {:>6} {:>10} {:>10} {:>10} {:>10}",
                "id",
                "name",
                "M",
                "nnz",
                "cycles",
                "model ms",
                "pub ms",
                "ratio",
                "model MT",
                "pub MT",
                "v24 model",
                "v24 pub"
            ))?;
            for r in &rows {
                line(format!(
                    "{:<4} {:<18} {:>10} {:>11} {:>10} {:>10.4} {:>10.4} {:>6.3} {:>10.1} {:>10.1} {:>10.1} {:>10.1}",
                    r.id,
                    r.name,
                    r.nrows,
                    r.nnz,
                    r.cycles,
                    r.modeled_ms,
                    r.published_ms,
                    r.time_ratio,
                    r.modeled_mteps,
                    r.published_mteps,
                    r.v24_modeled_mteps,
                    r.v24_published_mteps
                ))?;
            }
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct BatchEntry {
    input: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<RunReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    exit_code: Option<u8>,
}

fn batch_one(path: &Path, cfg: &Config, seed: u64) -> Result<RunReport, Failure> {
    let a = load_matrix(path)?;
    let img = compile(&a, cfg).context("compile failed").code(exit::EXECUTION)?;
    let random = VectorSource::Random;
    let x = random.materialize(a.ncols(), seed).code(exit::INPUT)?;
    let y = random.materialize(a.nrows(), seed.wrapping_add(1)).code(exit::INPUT)?;
    run_image(
        &img,
        RunInputs {
            id: stem(path),
            x,
            y,
            alpha: 1.0,
            beta: 1.0,
            verify: true,
            original: Some(&a),
            trace: None,
            include_y: false,
            sources: sources(&random, &random, 1.0, 1.0, seed),
        },
    )
}

pub fn batch(inputs: &[PathBuf], cfg: &Config, seed: u64, threads: usize, json: Option<&Path>) -> Result<u8, Failure> {
    if inputs.is_empty() {
        return Err(anyhow!("no input matrices given")).code(exit::INPUT);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("thread pool")
        .code(exit::EXECUTION)?;
    let entries: Vec<BatchEntry> = pool.install(|| {
        inputs
            .par_iter()
            .map(|path| {
                debug!(path = %path.display(), "batch item");
                let input = path.display().to_string();
                match batch_one(path, cfg, seed) {
                    Ok(report) => BatchEntry {
                        input,
                        exit_code: Some(if report.passed() { 0 } else { exit::VERIFY_FAILED }),
                        report: Some(report),
                        error: None,
                    },
                    Err(f) => {
                        warn!(path = %path.display(), error = %format!("{:#}", f.error), "batch item failed");
                        BatchEntry {
                            input,
                            report: None,
                            error: Some(format!("{:#}", f.error)),
                            exit_code: Some(f.code),
                        }
                    }
                }
            })
            .collect()
    });
    emit(&entries, json).code(exit::INPUT)?;
    // the first non-zero code in input order decides
    Ok(entries
        .iter()
        .filter_map(|e| e.exit_code)
        .find(|&c| c != 0)
        .unwrap_or(0))
}

pub fn generate(m: usize, k: usize, nnz: usize, seed: u64, skew: f64, output: &Path) -> Result<u8, Failure> {
    let a = generate_random(&RandomSpec {
        nrows: m,
        ncols: k,
        nnz,
        seed,
        skew,
    })
    .code(exit::INPUT)?;
    let file = std::fs::File::create(output)
        .with_context(|| format!("cannot write {}", output.display()))
        .code(exit::INPUT)?;
    write_matrix_market(&a, std::io::BufWriter::new(file)).code(exit::INPUT)?;
    Ok(0)
}

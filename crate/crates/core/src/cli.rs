//! The `mcsfb` command line.
//!
//! Every command writes JSON artifacts, CSV plot data and a `manifest.json`
//! into `--out-dir`. JSON artifacts carry the digest of the graph they were
//! computed on, and commands that consume them refuse a different graph.
//! Vertex indices in outputs are 0-based. Exit codes: 0 on success, 2 for
//! bad input, 3 for numerical failure.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cheby::{estimate_cdf, CacheStorage, ChebyshevBasisCache, SpectralDensityEstimate};
use crate::coeffs::AnalysisCoefficients;
use crate::design::{build_filter_bank, FilterBankDesign, Spacing};
use crate::error::Error;
use crate::exact::{
    dense_eigendecomposition, dictionary, exact_analyze, exact_band_ends, exact_synthesize,
    omp_sparse_code, partition_spectrum, partition_uniqueness_sets, EigenDecomposition,
    SpectralPartition, VertexPartition,
};
use crate::fast::{FastDesign, FastParams};
use crate::graph::{
    generate_graph, load_graph, load_signal, Graph, GraphKind, GraphSignal, Mask, Stencil,
};
use crate::laplacian::{build_laplacian, LaplacianKind, LaplacianOperator, DEFAULT_LANCZOS_STEPS};
use crate::sampling::{compute_weights, fast_analyze, weights_table, CountMode, SamplingPlan};
use crate::synthesis::{
    synthesize_fast, PenaltyKind, SynthesisConfig, SynthesisReport, DEFAULT_EPSILON,
};

/// Rows of the CDF and filter response tables.
const PLOT_ROWS: usize = 1000;

#[derive(Debug, Parser)]
#[command(
    name = "mcsfb",
    version,
    about = "Spectral band filter banks for graph signals"
)]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, env = "MCSFB_THREADS", global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the cumulative spectral density.
    Density(DensityArgs),
    /// Design a spectrum-adapted filter bank.
    Design(DesignArgs),
    /// Compute analysis coefficients of a signal.
    Analyze(AnalyzeArgs),
    /// Reconstruct a signal from analysis coefficients.
    Synthesize(SynthesizeArgs),
    /// Analyze, synthesize and report the reconstruction error.
    Roundtrip(RoundtripArgs),
    /// Sparse coding with the exact dictionary against the delta basis.
    Compress(CompressArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CommonArgs {
    /// Graph file (Matrix Market or 1-based edge list) or a generator such
    /// as `gen:ring:64`, `gen:path:N`, `gen:sensor:N`, `gen:community:N`,
    /// `gen:grid:ROWS:COLS`, `gen:disc:RADIUS`.
    #[arg(long)]
    pub graph: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DensityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[arg(long = "K", default_value_t = crate::cheby::DEFAULT_DENSITY_DEGREE)]
    pub k: usize,
    #[arg(long = "J", default_value_t = crate::cheby::DEFAULT_PROBES)]
    pub j: usize,
    #[arg(long = "T-points", default_value_t = crate::cheby::DEFAULT_T_POINTS)]
    pub t_points: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BankArgs {
    #[arg(long = "M", default_value_t = 5)]
    pub m: usize,
    /// Filter degree.
    #[arg(long = "K", default_value_t = crate::cheby::DEFAULT_FILTER_DEGREE)]
    pub k: usize,
    /// Degree of the probe recurrence behind the density and the weights.
    #[arg(long = "density-K", default_value_t = crate::cheby::DEFAULT_DENSITY_DEGREE)]
    pub density_k: usize,
    #[arg(long = "J", default_value_t = crate::cheby::DEFAULT_PROBES)]
    pub j: usize,
    #[arg(long = "T-points", default_value_t = crate::cheby::DEFAULT_T_POINTS)]
    pub t_points: usize,
    #[arg(long, default_value_t = crate::design::DEFAULT_DELTA)]
    pub delta: f64,
    #[arg(long, value_enum, default_value_t = Spacing::AdaptedLog)]
    pub spacing: Spacing,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DesignArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub bank: BankArgs,
    /// Density artifact to design from instead of estimating one.
    #[arg(long)]
    pub density: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Exact,
    Fast,
    FastAdapted,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SamplingArgs {
    /// Stored values relative to N; 1.0 is critical sampling.
    #[arg(long, default_value_t = 1.0)]
    pub samples_factor: f64,
    #[arg(long, value_enum, default_value_t = CountMode::Trace)]
    pub count_mode: CountMode,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub cg_tol: f64,
    #[arg(long, default_value_t = 250)]
    pub cg_max_iters: usize,
    #[arg(long, value_enum, default_value_t = PenaltyKind::Rational)]
    pub penalty: PenaltyKind,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
}

impl SolverArgs {
    fn config(&self) -> SynthesisConfig {
        SynthesisConfig {
            kappa: self.kappa,
            cg_tolerance: self.cg_tol,
            cg_max_iters: self.cg_max_iters,
            penalty: self.penalty,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub signal: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Fast)]
    pub mode: Mode,
    #[command(flatten)]
    #[serde(flatten)]
    pub bank: BankArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub sampling: SamplingArgs,
    /// Filter bank artifact from `design` (fast modes).
    #[arg(long)]
    pub design: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthesizeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum, default_value_t = Mode::Fast)]
    pub mode: Mode,
    /// `coeffs.json` from `analyze`.
    #[arg(long)]
    pub coeffs: PathBuf,
    /// `design.json` (fast modes).
    #[arg(long)]
    pub design: Option<PathBuf>,
    /// `plan.json` (fast modes).
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// `partition.json` (exact mode).
    #[arg(long)]
    pub partition: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RoundtripArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub signal: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Fast)]
    pub mode: Mode,
    #[command(flatten)]
    #[serde(flatten)]
    pub bank: BankArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub sampling: SamplingArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompressArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub signal: PathBuf,
    #[arg(long = "M", default_value_t = 5)]
    pub m: usize,
    #[arg(long, value_enum, default_value_t = Spacing::AdaptedLog)]
    pub spacing: Spacing,
    /// Comma-separated sparsity levels; defaults to N/20, N/10, N/5, N/2, N.
    #[arg(long = "T-list", value_delimiter = ',')]
    pub t_list: Vec<usize>,
}

/// A JSON artifact tied to the graph it was computed on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub graph_digest: String,
    #[serde(flatten)]
    pub body: T,
}

/// The exact transform's spectral and vertex partitions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExactStructure {
    #[serde(flatten)]
    pub spectral: SpectralPartition,
    #[serde(flatten)]
    pub vertices: VertexPartition,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub seed: u64,
    pub params: serde_json::Value,
    pub input_digests: BTreeMap<String, String>,
    /// Seconds per stage.
    pub timings: BTreeMap<String, f64>,
    pub results: BTreeMap<String, serde_json::Value>,
}

impl RunManifest {
    fn new(command: &str, seed: u64, params: &impl Serialize) -> Self {
        RunManifest {
            command: command.to_string(),
            args: std::env::args().collect(),
            seed,
            params: serde_json::to_value(params).unwrap_or(serde_json::Value::Null),
            input_digests: BTreeMap::new(),
            timings: BTreeMap::new(),
            results: BTreeMap::new(),
        }
    }

    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        *self.timings.entry(stage.to_string()).or_default() += t.elapsed().as_secs_f64();
        out
    }

    fn result(&mut self, key: &str, value: impl Serialize) {
        self.results.insert(
            key.to_string(),
            serde_json::to_value(value).unwrap_or(serde_json::Value::Null),
        );
    }
}

/// A failure and its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError {
            code: if e.is_input_error() { 2 } else { 3 },
            message: e.to_string(),
        }
    }
}

fn input_error(msg: impl Into<String>) -> CliError {
    CliError {
        code: 2,
        message: msg.into(),
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses the arguments, runs the command and maps the outcome to an exit code.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

pub fn run(command: &Command) -> CliResult<()> {
    match command {
        Command::Density(a) => cmd_density(a),
        Command::Design(a) => cmd_design(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Synthesize(a) => cmd_synthesize(a),
        Command::Roundtrip(a) => cmd_roundtrip(a),
        Command::Compress(a) => cmd_compress(a),
    }
}

fn parse_generator(spec: &str, seed: u64) -> CliResult<Graph> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |i: usize| -> CliResult<usize> {
        parts
            .get(i)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| input_error(format!("bad generator spec `{spec}`")))
    };
    let kind = match parts.first().copied() {
        Some("ring") => GraphKind::Ring { n: num(1)? },
        Some("path") => GraphKind::Path { n: num(1)? },
        Some("sensor") => GraphKind::sensor(num(1)?),
        Some("community") => GraphKind::community(num(1)?),
        Some("grid") => GraphKind::GridFromMask {
            mask: Mask::full(num(1)?, num(2)?),
            stencil: Stencil::Six,
        },
        Some("disc") => {
            let r = num(1)?;
            let d = 2 * r + 1;
            let c = r as f64;
            let mask = Mask::from_fn(d, d, |i, j| {
                (i as f64 - c).powi(2) + (j as f64 - c).powi(2) <= (c + 0.5).powi(2)
            });
            GraphKind::GridFromMask {
                mask,
                stencil: Stencil::Six,
            }
        }
        _ => return Err(input_error(format!("unknown generator `{spec}`"))),
    };
    Ok(generate_graph(&kind, seed)?)
}

fn load_graph_arg(common: &CommonArgs, manifest: &mut RunManifest) -> CliResult<Graph> {
    let graph = match common.graph.strip_prefix("gen:") {
        Some(spec) => parse_generator(spec, common.seed)?,
        None => load_graph(&common.graph)?,
    };
    manifest
        .input_digests
        .insert("graph".into(), graph.digest());
    Ok(graph)
}

fn load_signal_arg(
    path: &Path,
    graph: &Graph,
    manifest: &mut RunManifest,
) -> CliResult<GraphSignal> {
    let s = load_signal(path)?;
    if s.len() != graph.n_vertices() {
        return Err(Error::DimensionMismatch {
            expected: graph.n_vertices(),
            got: s.len(),
        }
        .into());
    }
    manifest
        .input_digests
        .insert("signal".into(), file_digest(path)?);
    Ok(s)
}

fn file_digest(path: &Path) -> CliResult<String> {
    use sha2::{Digest, Sha256};
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// The combinatorial Laplacian with a given or estimated λmax.
fn operator(graph: &Graph, lambda_max: Option<f64>, seed: u64) -> CliResult<LaplacianOperator> {
    let mut op = build_laplacian(graph, LaplacianKind::Combinatorial)?;
    match lambda_max {
        Some(l) => op.set_lambda_max(l)?,
        None => {
            op.estimate_lambda_max(DEFAULT_LANCZOS_STEPS, seed)?;
        }
    }
    Ok(op)
}

fn read_artifact<T: DeserializeOwned>(
    path: &Path,
    graph: &Graph,
    manifest: &mut RunManifest,
    name: &str,
) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let art: Artifact<T> =
        serde_json::from_str(&text).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    if art.graph_digest != graph.digest() {
        return Err(Error::ArtifactMismatch(format!(
            "{} was computed on a different graph",
            path.display()
        ))
        .into());
    }
    manifest
        .input_digests
        .insert(name.to_string(), file_digest(path)?);
    Ok(art.body)
}

fn out_path(common: &CommonArgs, name: &str) -> PathBuf {
    common.out_dir.join(name)
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e).into())
}

fn write_artifact<T: Serialize>(
    common: &CommonArgs,
    name: &str,
    graph: &Graph,
    body: &T,
) -> CliResult<()> {
    let art = Artifact {
        graph_digest: graph.digest(),
        body,
    };
    let text = serde_json::to_string_pretty(&art).map_err(Error::from)?;
    write_text(&out_path(common, name), &(text + "\n"))
}

fn write_manifest(common: &CommonArgs, manifest: &RunManifest) -> CliResult<()> {
    let text = serde_json::to_string_pretty(manifest).map_err(Error::from)?;
    write_text(&out_path(common, "manifest.json"), &(text + "\n"))
}

fn signal_csv(values: &[f64]) -> String {
    let mut s = String::from("value\n");
    for v in values {
        writeln!(s, "{v:e}").unwrap();
    }
    s
}

fn cdf_table(density: &SpectralDensityEstimate) -> String {
    let mut s = String::from("z,cdf\n");
    for i in 0..PLOT_ROWS {
        let z = density.lambda_max() * i as f64 / (PLOT_ROWS - 1) as f64;
        writeln!(s, "{z:e},{:e}", density.cdf(z)).unwrap();
    }
    s
}

fn cmd_density(a: &DensityArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new("density", a.common.seed, a);
    let graph = load_graph_arg(&a.common, &mut manifest)?;
    let density = manifest.time("setup", || -> CliResult<_> {
        let op = operator(&graph, None, a.common.seed)?;
        let cache =
            ChebyshevBasisCache::build(&op, a.k, a.j, a.common.seed, CacheStorage::default())?;
        Ok(estimate_cdf(&cache, a.t_points)?)
    })?;
    write_artifact(&a.common, "density.json", &graph, &density)?;
    write_text(&out_path(&a.common, "cdf.csv"), &cdf_table(&density))?;
    manifest.result("lambda_max", density.lambda_max());
    write_manifest(&a.common, &manifest)
}

fn fast_params(
    common: &CommonArgs,
    bank: &BankArgs,
    sampling: Option<&SamplingArgs>,
) -> FastParams {
    let mut p = FastParams {
        bands: bank.m,
        spacing: bank.spacing,
        density_degree: bank.density_k,
        filter_degree: bank.k,
        probes: bank.j,
        t_points: bank.t_points,
        delta: bank.delta,
        seed: common.seed,
        ..FastParams::default()
    };
    if let Some(s) = sampling {
        p.samples_factor = s.samples_factor;
        p.count_mode = s.count_mode;
    }
    p
}

/// Builds the operator and the fast design, reusing a filter bank artifact
/// if one is given. The probe cache is always rebuilt from the seed. Timed
/// as setup.
fn fast_setup(
    graph: &Graph,
    params: &FastParams,
    design_path: Option<&Path>,
    manifest: &mut RunManifest,
) -> CliResult<(LaplacianOperator, FastDesign)> {
    let loaded: Option<FilterBankDesign> = design_path
        .map(|p| read_artifact(p, graph, manifest, "design"))
        .transpose()?;
    manifest.time("setup", || {
        let op = operator(graph, loaded.as_ref().map(|b| b.lambda_max), params.seed)?;
        let design = match loaded {
            Some(bank) => {
                let cache = ChebyshevBasisCache::build(
                    &op,
                    params.density_degree,
                    params.probes,
                    params.seed,
                    CacheStorage::default(),
                )?;
                let density = estimate_cdf(&cache, params.t_points)?;
                FastDesign {
                    cache,
                    density,
                    bank,
                }
            }
            None => crate::fast::fast_design(&op, params, CacheStorage::default())?,
        };
        Ok((op, design))
    })
}

fn cmd_design(a: &DesignArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new("design", a.common.seed, a);
    let graph = load_graph_arg(&a.common, &mut manifest)?;
    let bank = match &a.density {
        Some(path) => {
            let density: SpectralDensityEstimate =
                read_artifact(path, &graph, &mut manifest, "density")?;
            manifest.time("setup", || {
                build_filter_bank(&density, a.bank.m, a.bank.spacing, a.bank.k, a.bank.delta)
            })?
        }
        None => {
            let params = fast_params(&a.common, &a.bank, None);
            fast_setup(&graph, &params, None, &mut manifest)?.1.bank
        }
    };
    write_artifact(&a.common, "design.json", &graph, &bank)?;
    write_text(
        &out_path(&a.common, "filters.csv"),
        &bank.response_table(PLOT_ROWS),
    )?;
    manifest.result("adjusted_ends", &bank.adjusted_ends);
    write_manifest(&a.common, &manifest)
}

struct ExactRun {
    eig: EigenDecomposition,
    structure: ExactStructure,
}

fn exact_setup(graph: &Graph, m: usize, spacing: Spacing) -> CliResult<ExactRun> {
    let op = build_laplacian(graph, LaplacianKind::Combinatorial)?;
    let eig = dense_eigendecomposition(&op)?;
    let ends = exact_band_ends(&eig, m, spacing)?;
    let spectral = partition_spectrum(&eig, &ends)?;
    let vertices = partition_uniqueness_sets(&eig, &spectral)?;
    Ok(ExactRun {
        eig,
        structure: ExactStructure { spectral, vertices },
    })
}

fn write_coeffs(
    common: &CommonArgs,
    graph: &Graph,
    coeffs: &AnalysisCoefficients,
) -> CliResult<()> {
    write_artifact(common, "coeffs.json", graph, coeffs)?;
    write_text(&out_path(common, "coeffs.csv"), &coeffs.to_csv())
}

fn cmd_analyze(a: &AnalyzeArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new("analyze", a.common.seed, a);
    let graph = load_graph_arg(&a.common, &mut manifest)?;
    let f = load_signal_arg(&a.signal, &graph, &mut manifest)?;
    let coeffs = match a.mode {
        Mode::Exact => {
            let run = manifest.time("setup", || exact_setup(&graph, a.bank.m, a.bank.spacing))?;
            let coeffs = manifest.time("analysis", || {
                exact_analyze(
                    &run.eig,
                    &run.structure.spectral,
                    &run.structure.vertices,
                    &f,
                )
            })?;
            write_artifact(&a.common, "partition.json", &graph, &run.structure)?;
            coeffs
        }
        Mode::Fast | Mode::FastAdapted => {
            let params = fast_params(&a.common, &a.bank, Some(&a.sampling));
            let (op, design) = fast_setup(&graph, &params, a.design.as_deref(), &mut manifest)?;
            let adapted = a.mode == Mode::FastAdapted;
            let plan = manifest.time("setup", || {
                design.plan(&op, &params, adapted.then_some(&f[..]))
            })?;
            let coeffs =
                manifest.time("analysis", || fast_analyze(&op, &design.bank, &plan, &f))?;
            let weights = compute_weights(&op, &design.cache, &design.bank)?;
            if a.design.is_none() {
                write_artifact(&a.common, "design.json", &graph, &design.bank)?;
            }
            write_artifact(&a.common, "plan.json", &graph, &plan)?;
            write_text(
                &out_path(&a.common, "weights.csv"),
                &weights_table(&weights),
            )?;
            manifest.result("counts", plan.bands.iter().map(|b| b.n).collect::<Vec<_>>());
            coeffs
        }
    };
    manifest.result("stored_values", coeffs.stored_count());
    write_coeffs(&a.common, &graph, &coeffs)?;
    write_manifest(&a.common, &manifest)
}

fn cmd_synthesize(a: &SynthesizeArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new("synthesize", a.common.seed, a);
    let graph = load_graph_arg(&a.common, &mut manifest)?;
    let coeffs: AnalysisCoefficients = read_artifact(&a.coeffs, &graph, &mut manifest, "coeffs")?;
    let rec = match a.mode {
        Mode::Exact => {
            let path = a
                .partition
                .as_deref()
                .ok_or_else(|| input_error("exact synthesis needs --partition"))?;
            let st: ExactStructure = read_artifact(path, &graph, &mut manifest, "partition")?;
            let eig = manifest.time("setup", || -> CliResult<_> {
                Ok(dense_eigendecomposition(&build_laplacian(
                    &graph,
                    LaplacianKind::Combinatorial,
                )?)?)
            })?;
            manifest.time("synthesis", || {
                exact_synthesize(&eig, &st.spectral, &st.vertices, &coeffs)
            })?
        }
        Mode::Fast | Mode::FastAdapted => {
            let dp = a
                .design
                .as_deref()
                .ok_or_else(|| input_error("fast synthesis needs --design"))?;
            let pp = a
                .plan
                .as_deref()
                .ok_or_else(|| input_error("fast synthesis needs --plan"))?;
            let bank: FilterBankDesign = read_artifact(dp, &graph, &mut manifest, "design")?;
            let plan: SamplingPlan = read_artifact(pp, &graph, &mut manifest, "plan")?;
            let op = operator(&graph, Some(bank.lambda_max), a.common.seed)?;
            let (rec, report) = manifest.time("synthesis", || {
                synthesize_fast(&op, &bank, &plan, &coeffs, &a.solver.config())
            })?;
            write_artifact(&a.common, "report.json", &graph, &report)?;
            rec
        }
    };
    write_text(
        &out_path(&a.common, "reconstruction.csv"),
        &signal_csv(&rec),
    )?;
    write_manifest(&a.common, &manifest)
}

fn cmd_roundtrip(a: &RoundtripArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new("roundtrip", a.common.seed, a);
    let graph = load_graph_arg(&a.common, &mut manifest)?;
    let f = load_signal_arg(&a.signal, &graph, &mut manifest)?;
    let (rec, stored) = match a.mode {
        Mode::Exact => {
            let run = manifest.time("setup", || exact_setup(&graph, a.bank.m, a.bank.spacing))?;
            let st = &run.structure;
            let coeffs = manifest.time("analysis", || {
                exact_analyze(&run.eig, &st.spectral, &st.vertices, &f)
            })?;
            let rec = manifest.time("synthesis", || {
                exact_synthesize(&run.eig, &st.spectral, &st.vertices, &coeffs)
            })?;
            write_artifact(&a.common, "partition.json", &graph, st)?;
            write_coeffs(&a.common, &graph, &coeffs)?;
            (rec, coeffs.stored_count())
        }
        Mode::Fast | Mode::FastAdapted => {
            let params = fast_params(&a.common, &a.bank, Some(&a.sampling));
            let (op, design) = fast_setup(&graph, &params, None, &mut manifest)?;
            let adapted = a.mode == Mode::FastAdapted;
            let plan = manifest.time("setup", || {
                design.plan(&op, &params, adapted.then_some(&f[..]))
            })?;
            let coeffs =
                manifest.time("analysis", || fast_analyze(&op, &design.bank, &plan, &f))?;
            let (rec, report): (Vec<f64>, SynthesisReport) = manifest.time("synthesis", || {
                synthesize_fast(&op, &design.bank, &plan, &coeffs, &a.solver.config())
            })?;
            write_artifact(&a.common, "design.json", &graph, &design.bank)?;
            write_artifact(&a.common, "plan.json", &graph, &plan)?;
            write_artifact(&a.common, "report.json", &graph, &report)?;
            write_coeffs(&a.common, &graph, &coeffs)?;
            (rec, coeffs.stored_count())
        }
    };
    manifest.result("nmse", crate::nmse(&rec, &f));
    manifest.result("stored_values", stored);
    write_text(
        &out_path(&a.common, "reconstruction.csv"),
        &signal_csv(&rec),
    )?;
    write_manifest(&a.common, &manifest)
}

/// NMSE after each of the first `t_max` greedy selections.
fn omp_curve(dict: &DMatrix<f64>, f: &[f64], t_max: usize) -> CliResult<Vec<f64>> {
    let out = omp_sparse_code(dict, f, t_max)?;
    let energy: f64 = f.iter().map(|v| v * v).sum();
    let mut curve: Vec<f64> = out.residual_norms.iter().map(|r| r * r / energy).collect();
    let last = *curve.last().unwrap();
    curve.resize(t_max + 1, last);
    Ok(curve)
}

fn cmd_compress(a: &CompressArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new("compress", a.common.seed, a);
    let graph = load_graph_arg(&a.common, &mut manifest)?;
    let f = load_signal_arg(&a.signal, &graph, &mut manifest)?;
    let n = graph.n_vertices();
    let t_list: Vec<usize> = if a.t_list.is_empty() {
        [n / 20, n / 10, n / 5, n / 2, n]
            .into_iter()
            .map(|t| t.max(1))
            .collect()
    } else {
        a.t_list.clone()
    };
    if let Some(&t) = t_list.iter().find(|&&t| t == 0 || t > n) {
        return Err(input_error(format!("sparsity {t} is outside 1..={n}")));
    }
    let run = manifest.time("setup", || exact_setup(&graph, a.m, a.spacing))?;
    let st = &run.structure;
    let coeffs = manifest.time("analysis", || {
        exact_analyze(&run.eig, &st.spectral, &st.vertices, &f)
    })?;

    let mut ranked: Vec<(usize, usize, f64)> = coeffs
        .bands
        .iter()
        .enumerate()
        .flat_map(|(m, b)| {
            b.vertices
                .iter()
                .zip(&b.values)
                .map(move |(&v, &y)| (m + 1, v, y))
        })
        .collect();
    ranked.sort_by(|x, y| {
        y.2.abs()
            .total_cmp(&x.2.abs())
            .then((x.0, x.1).cmp(&(y.0, y.1)))
    });
    let mut sorted = String::from("rank,band,vertex,value\n");
    for (r, (m, v, y)) in ranked.iter().enumerate() {
        writeln!(sorted, "{},{m},{v},{y:e}", r + 1).unwrap();
    }

    let t_max = *t_list.iter().max().unwrap();
    let (ours, delta) = manifest.time("sparse_coding", || -> CliResult<_> {
        let dict = dictionary(&run.eig, &st.spectral, &st.vertices)?;
        Ok((
            omp_curve(&dict, &f, t_max)?,
            omp_curve(&DMatrix::identity(n, n), &f, t_max)?,
        ))
    })?;
    let mut curve = String::from("T,mcsfb,delta\n");
    for &t in &t_list {
        writeln!(curve, "{t},{:e},{:e}", ours[t], delta[t]).unwrap();
    }
    write_text(&out_path(&a.common, "sorted_coeffs.csv"), &sorted)?;
    write_text(&out_path(&a.common, "nmse_vs_T.csv"), &curve)?;
    manifest.result("T", &t_list);
    manifest.result(
        "nmse_mcsfb",
        t_list.iter().map(|&t| ours[t]).collect::<Vec<_>>(),
    );
    manifest.result(
        "nmse_delta",
        t_list.iter().map(|&t| delta[t]).collect::<Vec<_>>(),
    );
    write_manifest(&a.common, &manifest)
}

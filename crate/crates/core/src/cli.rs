//! `crossrank` command line: synth, rerank, eval, sweep, compare.
//!
//! Exit codes: 0 success, 1 I/O or data error, 2 usage or parameter error.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::baselines::{self, EcnParams, KReciprocalParams};
use crate::dataio::{self, FeatureSet, ScoreFile, SynthSpec};
use crate::dense::Matrix;
use crate::error::Error;
use crate::hhcr::{self, HhcrParams};
use crate::metrics::{self, EvalReport, ScoreOrder};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "crossrank", version, about = "Cross-modal re-ranking and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic visible/infrared pair of FEAT files.
    Synth(SynthArgs),
    /// Re-rank a query set against a gallery set and evaluate the result.
    Rerank(RerankArgs),
    /// Evaluate a previously written score file.
    Eval(EvalArgs),
    /// Evaluate HHCR over a parameter grid, or the fixed ablation table.
    Sweep(SweepArgs),
    /// Run every method with its defaults on the same data.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Hhcr,
    Kreciprocal,
    Ecn,
    Cosine,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Hhcr => "hhcr",
            Method::Kreciprocal => "kreciprocal",
            Method::Ecn => "ecn",
            Method::Cosine => "cosine",
        }
    }

    pub fn order(self) -> ScoreOrder {
        match self {
            Method::Hhcr | Method::Cosine => ScoreOrder::HigherIsBetter,
            Method::Kreciprocal | Method::Ecn => ScoreOrder::LowerIsBetter,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

impl From<Toggle> for bool {
    fn from(t: Toggle) -> bool {
        t == Toggle::On
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Tsv,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub ids: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub per: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub dim: u64,
    #[arg(long, default_value_t = 0.4)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.3)]
    pub offset: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out_vis: PathBuf,
    #[arg(long)]
    pub out_ir: PathBuf,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Query FEAT file (occupies the visible block of the joint set).
    #[arg(long)]
    pub query: PathBuf,
    /// Gallery FEAT file.
    #[arg(long)]
    pub gallery: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct HhcrArgs {
    #[arg(long, default_value_t = 20)]
    pub k1: usize,
    #[arg(long, default_value_t = 6)]
    pub k2: usize,
    #[arg(long, default_value_t = 6)]
    pub k3: usize,
    #[arg(long, default_value_t = 20)]
    pub k4: usize,
    #[arg(long, default_value_t = 6)]
    pub k5: usize,
    #[arg(long, default_value_t = 6)]
    pub k6: usize,
    #[arg(long, default_value_t = 0.3)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value_t = Toggle::On)]
    pub rtf: Toggle,
    #[arg(long, value_enum, default_value_t = Toggle::On)]
    pub lqe: Toggle,
}

impl HhcrArgs {
    pub fn params(&self) -> HhcrParams {
        HhcrParams {
            k1: self.k1,
            k2: self.k2,
            k3: self.k3,
            k4: self.k4,
            k5: self.k5,
            k6: self.k6,
            lambda: self.lambda,
            rtf_enabled: self.rtf.into(),
            lqe_enabled: self.lqe.into(),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct BaselineArgs {
    #[arg(long = "kr-k1", default_value_t = 20)]
    pub kr_k1: usize,
    #[arg(long = "kr-k2", default_value_t = 6)]
    pub kr_k2: usize,
    #[arg(long = "kr-lambda", default_value_t = 0.3)]
    pub kr_lambda: f64,
    #[arg(long = "ecn-t", default_value_t = 3)]
    pub ecn_t: usize,
    #[arg(long = "ecn-q", default_value_t = 8)]
    pub ecn_q: usize,
}

impl BaselineArgs {
    fn kreciprocal(&self) -> KReciprocalParams {
        KReciprocalParams {
            k1: self.kr_k1,
            k2: self.kr_k2,
            lambda: self.kr_lambda,
        }
    }

    fn ecn(&self) -> EcnParams {
        EcnParams {
            t: self.ecn_t,
            q: self.ecn_q,
        }
    }
}

#[derive(Debug, Args)]
pub struct RerankArgs {
    #[arg(long, value_enum, default_value_t = Method::Hhcr)]
    pub method: Method,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hhcr: HhcrArgs,
    #[command(flatten)]
    pub baseline: BaselineArgs,
    /// Score file to write.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Evaluation report to write (stdout always gets a copy).
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [20])]
    pub k1: Vec<usize>,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [6])]
    pub k2: Vec<usize>,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [6])]
    pub k3: Vec<usize>,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [20])]
    pub k4: Vec<usize>,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [6])]
    pub k5: Vec<usize>,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [6])]
    pub k6: Vec<usize>,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [0.3])]
    pub lambda: Vec<f64>,
    #[arg(long, value_enum, value_delimiter = ',', num_args = 1.., default_values_t = [Toggle::On])]
    pub rtf: Vec<Toggle>,
    #[arg(long, value_enum, value_delimiter = ',', num_args = 1.., default_values_t = [Toggle::On])]
    pub lqe: Vec<Toggle>,
    /// Emit the fixed four-row ablation table (baseline, ICR, ICR+HR,
    /// ICR+HR without RTF) using the first value of every grid.
    #[arg(long)]
    pub ablation: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Tsv)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hhcr: HhcrArgs,
    #[command(flatten)]
    pub baseline: BaselineArgs,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Tsv)]
    pub format: OutputFormat,
}

/// Error carrying the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parameter(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError {
            code: EXIT_DATA,
            message: format!("{}: {e}", path.display()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{rendered}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{rendered}");
                EXIT_OK
            };
        }
    };
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Rerank(a) => cmd_rerank(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Compare(a) => cmd_compare(&a),
    };
    match result {
        Ok(text) => {
            let _ = write!(out, "{text}");
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

/// Writes `bytes` next to `path` and renames into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::io(path, e)
    })
}

fn load(path: &Path) -> CliResult<FeatureSet> {
    dataio::load_features(path).map_err(|e| CliError::io(path, e))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn cmd_synth(a: &SynthArgs) -> CliResult<String> {
    let spec = SynthSpec {
        num_identities: a.ids as usize,
        per_identity_per_modality: a.per as usize,
        dim: a.dim as usize,
        noise_sigma: a.noise,
        modality_offset_sigma: a.offset,
        seed: a.seed,
    };
    let (vis, ir) = dataio::synth_generate(&spec)?;
    let mut text = format!(
        "spec\t{}\n",
        serde_json::to_string(&spec).expect("spec serialises")
    );
    for (fs, path) in [(&vis, &a.out_vis), (&ir, &a.out_ir)] {
        let bytes = dataio::encode_features(fs);
        write_atomic(path, &bytes)?;
        writeln!(text, "{}\t{}\tsha256:{}", fs.modality(), path.display(), sha256_hex(&bytes)).unwrap();
    }
    Ok(text)
}

/// Runs one method on already loaded sets.
pub fn run_method(
    method: Method,
    query: &FeatureSet,
    gallery: &FeatureSet,
    hhcr_params: &HhcrParams,
    baseline: &BaselineArgs,
) -> crate::Result<Matrix> {
    match method {
        Method::Hhcr => hhcr::hhcr_final(query, gallery, hhcr_params),
        Method::Cosine => baselines::cosine_rank(query, gallery),
        Method::Kreciprocal => baselines::kreciprocal_rerank(query, gallery, &baseline.kreciprocal()),
        Method::Ecn => baselines::ecn_rerank(query, gallery, &baseline.ecn()),
    }
}

fn evaluate_sets(scores: &Matrix, order: ScoreOrder, q: &FeatureSet, g: &FeatureSet) -> crate::Result<EvalReport> {
    metrics::evaluate(scores, order, q.person_ids(), g.person_ids(), q.camera_ids(), g.camera_ids())
}

fn render_report(report: &EvalReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => report.to_json() + "\n",
        OutputFormat::Tsv => report.to_tsv(),
    }
}

pub fn cmd_rerank(a: &RerankArgs) -> CliResult<String> {
    let query = load(&a.data.query)?;
    let gallery = load(&a.data.gallery)?;
    let scores = run_method(a.method, &query, &gallery, &a.hhcr.params(), &a.baseline)?;
    let order = a.method.order();
    let report = evaluate_sets(&scores, order, &query, &gallery)?;
    if let Some(path) = &a.output {
        let file = ScoreFile {
            method: a.method.name().to_string(),
            order,
            scores,
        };
        write_atomic(path, &dataio::encode_scores(&file))?;
    }
    let text = render_report(&report, a.format);
    if let Some(path) = &a.report {
        write_atomic(path, text.as_bytes())?;
    }
    Ok(text)
}

pub fn cmd_eval(a: &EvalArgs) -> CliResult<String> {
    let sf = dataio::load_scores(&a.scores).map_err(|e| CliError::io(&a.scores, e))?;
    let query = load(&a.data.query)?;
    let gallery = load(&a.data.gallery)?;
    let report = evaluate_sets(&sf.scores, sf.order, &query, &gallery)?;
    Ok(render_report(&report, a.format))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub k1: usize,
    pub k2: usize,
    pub k3: usize,
    pub k4: usize,
    pub k5: usize,
    pub k6: usize,
    pub lambda: f64,
    pub rtf: bool,
    pub lqe: bool,
    pub rank1: f64,
    #[serde(rename = "mAP")]
    pub map: f64,
    #[serde(rename = "mINP")]
    pub minp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub config: &'static str,
    #[serde(rename = "ICR")]
    pub icr: bool,
    #[serde(rename = "HR")]
    pub hr: bool,
    #[serde(rename = "HR w/o RTF")]
    pub hr_without_rtf: bool,
    pub rank1: f64,
    #[serde(rename = "mAP")]
    pub map: f64,
    #[serde(rename = "mINP")]
    pub minp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub method: &'static str,
    pub rank1: f64,
    #[serde(rename = "mAP")]
    pub map: f64,
    #[serde(rename = "mINP")]
    pub minp: f64,
}

fn check_grid<T>(name: &str, values: &[T]) -> CliResult<()> {
    if values.is_empty() {
        return Err(CliError::usage(format!("empty grid for --{name}")));
    }
    Ok(())
}

/// Every grid point in a fixed nesting order (k1 outermost, lqe innermost).
fn grid_points(a: &SweepArgs) -> Vec<HhcrParams> {
    let mut points = Vec::new();
    for &k1 in &a.k1 {
        for &k2 in &a.k2 {
            for &k3 in &a.k3 {
                for &k4 in &a.k4 {
                    for &k5 in &a.k5 {
                        for &k6 in &a.k6 {
                            for &lambda in &a.lambda {
                                for &rtf in &a.rtf {
                                    for &lqe in &a.lqe {
                                        points.push(HhcrParams {
                                            k1,
                                            k2,
                                            k3,
                                            k4,
                                            k5,
                                            k6,
                                            lambda,
                                            rtf_enabled: rtf.into(),
                                            lqe_enabled: lqe.into(),
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    points
}

fn fmt_metric(v: f64) -> String {
    format!("{v:.6}")
}

fn render_table<R: Serialize>(rows: &[R], header: &[&str], cells: impl Fn(&R) -> Vec<String>, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => serde_json::to_string_pretty(rows).expect("rows serialise") + "\n",
        OutputFormat::Tsv => {
            let mut out = header.join("\t") + "\n";
            for r in rows {
                out += &(cells(r).join("\t") + "\n");
            }
            out
        }
    }
}

fn on_off(b: bool) -> String {
    if b { "on" } else { "off" }.to_string()
}

fn check(b: bool) -> String {
    if b { "x" } else { "-" }.to_string()
}

pub fn sweep_rows(a: &SweepArgs, query: &FeatureSet, gallery: &FeatureSet) -> CliResult<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for p in grid_points(a) {
        let scores = hhcr::hhcr_final(query, gallery, &p)?;
        let r = evaluate_sets(&scores, ScoreOrder::HigherIsBetter, query, gallery)?;
        rows.push(SweepRow {
            k1: p.k1,
            k2: p.k2,
            k3: p.k3,
            k4: p.k4,
            k5: p.k5,
            k6: p.k6,
            lambda: p.lambda,
            rtf: p.rtf_enabled,
            lqe: p.lqe_enabled,
            rank1: r.rank1,
            map: r.map,
            minp: r.minp,
        });
    }
    // stable: equal mAP keeps grid order
    rows.sort_by(|x, y| y.map.total_cmp(&x.map));
    Ok(rows)
}

/// Baseline, homogeneous stage only (lambda = 1), full pipeline, and full
/// pipeline with a one-sided neighbour graph.
pub fn ablation_rows(base: &HhcrParams, query: &FeatureSet, gallery: &FeatureSet) -> CliResult<Vec<AblationRow>> {
    let configs: [(&'static str, bool, bool, bool, Option<HhcrParams>); 4] = [
        ("baseline", false, false, false, None),
        ("ICR", true, false, false, Some(HhcrParams { lambda: 1.0, ..*base })),
        ("ICR+HR", true, true, false, Some(HhcrParams { rtf_enabled: true, ..*base })),
        ("ICR+HR w/o RTF", true, false, true, Some(HhcrParams { rtf_enabled: false, ..*base })),
    ];
    let mut rows = Vec::new();
    for (config, icr, hr, hr_without_rtf, params) in configs {
        let scores = match params {
            None => baselines::cosine_rank(query, gallery)?,
            Some(p) => hhcr::hhcr_final(query, gallery, &p)?,
        };
        let r = evaluate_sets(&scores, ScoreOrder::HigherIsBetter, query, gallery)?;
        rows.push(AblationRow {
            config,
            icr,
            hr,
            hr_without_rtf,
            rank1: r.rank1,
            map: r.map,
            minp: r.minp,
        });
    }
    Ok(rows)
}

pub fn cmd_sweep(a: &SweepArgs) -> CliResult<String> {
    check_grid("k1", &a.k1)?;
    check_grid("k2", &a.k2)?;
    check_grid("k3", &a.k3)?;
    check_grid("k4", &a.k4)?;
    check_grid("k5", &a.k5)?;
    check_grid("k6", &a.k6)?;
    check_grid("lambda", &a.lambda)?;
    check_grid("rtf", &a.rtf)?;
    check_grid("lqe", &a.lqe)?;
    let query = load(&a.data.query)?;
    let gallery = load(&a.data.gallery)?;
    let text = if a.ablation {
        let base = grid_points(a)[0];
        let rows = ablation_rows(&base, &query, &gallery)?;
        render_table(
            &rows,
            &["config", "ICR", "HR", "HR w/o RTF", "rank1", "mAP", "mINP"],
            |r| {
                vec![
                    r.config.to_string(),
                    check(r.icr),
                    check(r.hr),
                    check(r.hr_without_rtf),
                    fmt_metric(r.rank1),
                    fmt_metric(r.map),
                    fmt_metric(r.minp),
                ]
            },
            a.format,
        )
    } else {
        let rows = sweep_rows(a, &query, &gallery)?;
        render_table(
            &rows,
            &["k1", "k2", "k3", "k4", "k5", "k6", "lambda", "rtf", "lqe", "rank1", "mAP", "mINP"],
            |r| {
                vec![
                    r.k1.to_string(),
                    r.k2.to_string(),
                    r.k3.to_string(),
                    r.k4.to_string(),
                    r.k5.to_string(),
                    r.k6.to_string(),
                    r.lambda.to_string(),
                    on_off(r.rtf),
                    on_off(r.lqe),
                    fmt_metric(r.rank1),
                    fmt_metric(r.map),
                    fmt_metric(r.minp),
                ]
            },
            a.format,
        )
    };
    if let Some(path) = &a.output {
        write_atomic(path, text.as_bytes())?;
    }
    Ok(text)
}

pub fn compare_rows(
    query: &FeatureSet,
    gallery: &FeatureSet,
    hhcr_params: &HhcrParams,
    baseline: &BaselineArgs,
) -> CliResult<Vec<CompareRow>> {
    let mut rows = Vec::new();
    for method in [Method::Cosine, Method::Kreciprocal, Method::Ecn, Method::Hhcr] {
        let scores = run_method(method, query, gallery, hhcr_params, baseline)?;
        let r = evaluate_sets(&scores, method.order(), query, gallery)?;
        rows.push(CompareRow {
            method: method.name(),
            rank1: r.rank1,
            map: r.map,
            minp: r.minp,
        });
    }
    Ok(rows)
}

pub fn cmd_compare(a: &CompareArgs) -> CliResult<String> {
    let query = load(&a.data.query)?;
    let gallery = load(&a.data.gallery)?;
    let rows = compare_rows(&query, &gallery, &a.hhcr.params(), &a.baseline)?;
    let text = render_table(
        &rows,
        &["method", "rank1", "mAP", "mINP"],
        |r| vec![r.method.to_string(), fmt_metric(r.rank1), fmt_metric(r.map), fmt_metric(r.minp)],
        a.format,
    );
    if let Some(path) = &a.output {
        write_atomic(path, text.as_bytes())?;
    }
    Ok(text)
}

//! The `rematch` command line.
//!
//! Every subcommand accepts `--config FILE`, a TOML file whose keys are
//! the subcommand's long flag names (`j = 1`, `no-retrieval = true`).
//! Flags given on the command line win over the file.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::ffi::OsString;
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use thiserror::Error;

use rematch_core::docgen::{build_corpora, DocMode};
use rematch_core::embed::EmbedderSpec;
use rematch_core::http::ApiEnv;
use rematch_core::pipeline::{auto_guidance, grid_search, Backends, PipelineConfig, RunManifest};
use rematch_core::rank::{GenerationParams, RankerSpec, TranscriptLog};
use rematch_core::schema::{dataset_stats, load_ground_truth, load_schema, target_stats, GroundTruth, Schema};
use rematch_core::{run_rematch, RunOptions};

use crate::api::{parse_k_list, AppState, ServiceOptions};
use crate::jobs::default_backend_factory;
use crate::store::to_json;

pub const EVAL_JSON: &str = "eval.json";
pub const EVAL_TEXT: &str = "eval.txt";
pub const GRID_JSON: &str = "grid.json";
pub const GRID_TEXT: &str = "grid.txt";

const DEFAULT_HASH_DIM: usize = 1024;
/// Width of the hosted embedding model used by default.
const DEFAULT_REMOTE_DIM: usize = 1536;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    fn failure(e: impl std::fmt::Display) -> Self {
        CliError::Failure(e.to_string())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rematch", version, about = "Retrieval-enhanced schema matching")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Match a source schema against a target schema.
    Match(MatchArgs),
    /// Score a run against ground truth.
    Eval(EvalArgs),
    /// Run and score every (J, K) combination.
    Grid(GridArgs),
    /// Write source and target documents to a directory.
    Docgen(DocgenArgs),
    /// Start the HTTP service.
    Serve(ServeArgs),
    /// Print dataset statistics.
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbedderKind {
    /// Offline character-trigram hashing.
    Hash,
    /// Hosted embeddings endpoint.
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankerKind {
    /// Offline similarity ranker.
    Oracle,
    /// Hosted chat-completions model.
    Remote,
}

fn parse_mode(s: &str) -> Result<DocMode, String> {
    s.parse()
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

/// Fills unset fields of `$a` from `$b`.
macro_rules! merge_fields {
    ($a:ident, $b:ident; $($f:ident),* $(,)?) => {
        $( if $a.$f.is_none() { $a.$f = $b.$f; } )*
    };
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct BackendArgs {
    /// Embedding backend.
    #[arg(long, value_enum)]
    pub embedder: Option<EmbedderKind>,
    /// Ranking backend.
    #[arg(long, value_enum)]
    pub ranker: Option<RankerKind>,
    /// Embedding width (default 1024 for hash, 1536 for remote).
    #[arg(long, value_parser = positive)]
    pub embed_dim: Option<usize>,
    /// Remote embedding model (default: REMATCH_EMBED_MODEL).
    #[arg(long)]
    pub embed_model: Option<String>,
    /// Remote generation model (default: REMATCH_GEN_MODEL).
    #[arg(long)]
    pub gen_model: Option<String>,
}

impl BackendArgs {
    fn merge(&mut self, file: BackendArgs) {
        merge_fields!(self, file; embedder, ranker, embed_dim, embed_model, gen_model);
    }

    fn specs(&self) -> Result<(EmbedderSpec, RankerSpec), CliError> {
        let embedder = match self.embedder.unwrap_or(EmbedderKind::Hash) {
            EmbedderKind::Hash => EmbedderSpec::LocalHashTrigram {
                dim: self.embed_dim.unwrap_or(DEFAULT_HASH_DIM),
            },
            EmbedderKind::Remote => EmbedderSpec::Remote {
                base_url: None,
                model: self
                    .embed_model
                    .clone()
                    .or(ApiEnv::from_env().embed_model)
                    .ok_or_else(|| {
                        CliError::Usage("--embedder remote needs --embed-model or REMATCH_EMBED_MODEL".into())
                    })?,
                dim: self.embed_dim.unwrap_or(DEFAULT_REMOTE_DIM),
                max_in_flight: 8,
            },
        };
        let ranker = match self.ranker.unwrap_or(RankerKind::Oracle) {
            RankerKind::Oracle => RankerSpec::LocalSimilarityOracle,
            RankerKind::Remote => RankerSpec::RemoteLlm {
                base_url: None,
                model: self.gen_model.clone(),
                params: GenerationParams::default(),
            },
        };
        Ok((embedder, ranker))
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct MatchArgs {
    /// Source schema (JSON).
    #[arg(long)]
    pub source: Option<PathBuf>,
    /// Target schema (JSON).
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Target tables retrieved per source attribute.
    #[arg(long, value_parser = positive, conflicts_with = "no_retrieval")]
    pub j: Option<usize>,
    /// Send every target table to the ranker.
    #[arg(long)]
    #[serde(default)]
    pub no_retrieval: bool,
    /// Ranked targets per source attribute.
    #[arg(long, value_parser = positive)]
    pub k: Option<usize>,
    /// Document mode: full or names-only.
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<DocMode>,
    #[command(flatten)]
    #[serde(flatten)]
    pub backends: BackendArgs,
    /// Known mappings (SRC_ENT,SRC_ATT,TGT_ENT,TGT_ATT CSV).
    #[arg(long)]
    pub guidance: Option<PathBuf>,
    /// Use the primary-key mappings of this ground truth as guidance.
    #[arg(long)]
    pub auto_guidance_from: Option<PathBuf>,
    /// Worker threads for source tables.
    #[arg(long, value_parser = positive)]
    pub parallelism: Option<usize>,
    /// Prompt size limit in characters.
    #[arg(long, value_parser = positive)]
    pub prompt_budget: Option<usize>,
    /// Free-form label stored with the run.
    #[arg(long)]
    pub tag: Option<String>,
    /// Per-table checkpoints for resuming interrupted runs.
    #[arg(long)]
    pub checkpoint_dir: Option<PathBuf>,
    /// Append every ranker call to this JSONL file.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    /// Output directory for manifest.json and predictions.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML file supplying any of these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl MatchArgs {
    fn merge(&mut self, file: MatchArgs) {
        merge_fields!(self, file; source, target, j, k, mode, guidance, auto_guidance_from,
            parallelism, prompt_budget, tag, checkpoint_dir, transcript, out);
        // A J from the command line overrides no-retrieval from the file.
        if self.j.is_none() {
            self.no_retrieval |= file.no_retrieval;
        }
        self.backends.merge(file.backends);
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct EvalArgs {
    /// Run directory or manifest file.
    #[arg(long)]
    pub results: Option<PathBuf>,
    /// Ground truth CSV.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Comma-separated K values.
    #[arg(long)]
    pub k: Option<String>,
    /// Directory for eval.json and eval.txt (default: the run directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl EvalArgs {
    fn merge(&mut self, file: EvalArgs) {
        merge_fields!(self, file; results, truth, k, out);
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct GridArgs {
    #[arg(long)]
    pub source: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<PathBuf>,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Comma-separated J values; `inf` means retrieval off.
    #[arg(long)]
    pub j: Option<String>,
    /// Comma-separated K values.
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<DocMode>,
    #[command(flatten)]
    #[serde(flatten)]
    pub backends: BackendArgs,
    #[arg(long, value_parser = positive)]
    pub parallelism: Option<usize>,
    /// Directory for grid.json and grid.txt.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl GridArgs {
    fn merge(&mut self, file: GridArgs) {
        merge_fields!(self, file; source, target, truth, j, k, mode, parallelism, out);
        self.backends.merge(file.backends);
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct DocgenArgs {
    #[arg(long)]
    pub source: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<DocMode>,
    /// Output directory; documents go to `source/` and `target/` inside it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl DocgenArgs {
    fn merge(&mut self, file: DocgenArgs) {
        merge_fields!(self, file; source, target, mode, out);
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ServeArgs {
    /// Address to listen on.
    #[arg(long)]
    pub bind: Option<SocketAddr>,
    /// Directory holding projects and runs.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Concurrent jobs allowed per project.
    #[arg(long, value_parser = positive)]
    pub max_jobs_per_project: Option<usize>,
    /// Static files served outside /api (the review UI build).
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl ServeArgs {
    fn merge(&mut self, file: ServeArgs) {
        merge_fields!(self, file; bind, data_dir, max_jobs_per_project, static_dir);
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct StatsArgs {
    #[arg(long)]
    pub source: Option<PathBuf>,
    /// Ground truth CSV; without it only sizes are reported.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Target schema, for target-side sizes.
    #[arg(long)]
    pub target: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl StatsArgs {
    fn merge(&mut self, file: StatsArgs) {
        merge_fields!(self, file; source, truth, target);
    }
}

fn load_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
}

fn required<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T, CliError> {
    value
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("missing required flag --{flag}")))
}

fn nonzero(value: Option<usize>, flag: &str) -> Result<Option<usize>, CliError> {
    match value {
        Some(0) => Err(CliError::Usage(format!("--{flag} must be at least 1"))),
        v => Ok(v),
    }
}

fn read_schema(path: &Path) -> Result<Schema, CliError> {
    load_schema(path).map_err(CliError::failure)
}

fn read_truth(path: &Path) -> Result<GroundTruth, CliError> {
    load_ground_truth(path).map_err(CliError::failure)
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Failure(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::Failure(format!("cannot create {}: {e}", path.display())))
}

/// Parses `1,2,inf`: `inf` means retrieval off.
pub fn parse_j_list(text: &str) -> Result<Vec<Option<usize>>, String> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            if s.eq_ignore_ascii_case("inf") {
                Ok(None)
            } else {
                positive(s).map(Some).map_err(|e| format!("J `{s}`: {e}"))
            }
        })
        .collect()
}

/// Builds the run configuration from merged `match` flags.
pub fn match_config(args: &MatchArgs) -> Result<PipelineConfig, CliError> {
    let defaults = PipelineConfig::default();
    let top_j = match (nonzero(args.j, "j")?, args.no_retrieval) {
        (Some(_), true) => return Err(CliError::Usage("--j conflicts with --no-retrieval".into())),
        (Some(j), false) => Some(j),
        (None, true) => None,
        (None, false) => defaults.top_j,
    };
    let (embedder, ranker) = args.backends.specs()?;
    let mut guidance = Vec::new();
    if let Some(path) = &args.guidance {
        guidance.extend(read_truth(path)?.pairs.into_iter().filter(|p| !p.is_null()));
    }
    if let Some(path) = &args.auto_guidance_from {
        let source = read_schema(required(&args.source, "source")?)?;
        guidance.extend(auto_guidance(&source, &read_truth(path)?));
    }
    Ok(PipelineConfig {
        top_j,
        top_k: nonzero(args.k, "k")?.unwrap_or(defaults.top_k),
        mode: args.mode.unwrap_or_default(),
        embedder,
        ranker,
        guidance,
        tag: args.tag.clone().unwrap_or_default(),
        parallelism: nonzero(args.parallelism, "parallelism")?.unwrap_or(defaults.parallelism),
        prompt_budget_chars: nonzero(args.prompt_budget, "prompt-budget")?.unwrap_or(defaults.prompt_budget_chars),
    })
}

fn cmd_match(args: MatchArgs) -> Result<(), CliError> {
    let source_path = required(&args.source, "source")?;
    let target_path = required(&args.target, "target")?;
    let out = required(&args.out, "out")?;
    let config = match_config(&args)?;
    let source = read_schema(source_path)?;
    let target = read_schema(target_path)?;
    let mut backends = Backends::<f64>::from_config(&config).map_err(CliError::failure)?;
    if let Some(path) = &args.transcript {
        backends = backends.with_transcript(Arc::new(TranscriptLog::open(path).map_err(CliError::failure)?));
    }
    let options = RunOptions {
        checkpoint_dir: args.checkpoint_dir.clone(),
    };
    let outcome = run_rematch(&source, &target, &config, &backends, &options).map_err(CliError::failure)?;
    let manifest = RunManifest::new(&outcome);
    manifest
        .write_to_dir(out)
        .map_err(|e| CliError::Failure(format!("cannot write run to {}: {e}", out.display())))?;
    println!(
        "{} rows for {} source tables, avg #T {:.2}, {} diagnostics -> {}",
        manifest.predictions.rows.len(),
        manifest.predictions.tables.len(),
        manifest.avg_candidate_tables,
        manifest.diagnostics_summary.total,
        out.display()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let results = required(&args.results, "results")?;
    let truth = read_truth(required(&args.truth, "truth")?)?;
    let manifest = RunManifest::load(results).map_err(CliError::failure)?;
    let ks = match &args.k {
        Some(text) => parse_k_list(text).map_err(|e| CliError::Usage(format!("--k: {e}")))?,
        None => vec![manifest.predictions.k],
    };
    let report = manifest.predictions.evaluate(&truth, &ks).map_err(CliError::failure)?;
    let out = match &args.out {
        Some(dir) => dir.clone(),
        None if results.is_dir() => results.clone(),
        None => results.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    create_dir(&out)?;
    let text = report.to_text();
    write_file(&out.join(EVAL_JSON), &to_json(&report))?;
    write_file(&out.join(EVAL_TEXT), &text)?;
    print!("{text}");
    Ok(())
}

fn cmd_grid(args: GridArgs) -> Result<(), CliError> {
    let (source, target, truth) = (
        required(&args.source, "source")?,
        required(&args.target, "target")?,
        required(&args.truth, "truth")?,
    );
    let js =
        parse_j_list(args.j.as_deref().unwrap_or("1,2,3,5,7")).map_err(|e| CliError::Usage(format!("--j: {e}")))?;
    let ks =
        parse_k_list(args.k.as_deref().unwrap_or("1,2,3,5,7")).map_err(|e| CliError::Usage(format!("--k: {e}")))?;
    let (embedder, ranker) = args.backends.specs()?;
    let source = read_schema(source)?;
    let target = read_schema(target)?;
    let truth = read_truth(truth)?;
    let template = PipelineConfig {
        mode: args.mode.unwrap_or_default(),
        embedder,
        ranker,
        parallelism: nonzero(args.parallelism, "parallelism")?.unwrap_or(PipelineConfig::default().parallelism),
        ..PipelineConfig::default()
    };
    let backends = Backends::<f64>::from_config(&template).map_err(CliError::failure)?;
    let report = grid_search(&source, &target, &truth, &js, &ks, &template, &backends);
    let text = report.to_text();
    if let Some(out) = &args.out {
        create_dir(out)?;
        write_file(&out.join(GRID_JSON), &to_json(&report))?;
        write_file(&out.join(GRID_TEXT), &text)?;
    }
    print!("{text}");
    if report.cells.iter().all(|c| c.error.is_some()) {
        return Err(CliError::Failure("every grid cell failed".into()));
    }
    Ok(())
}

fn cmd_docgen(args: DocgenArgs) -> Result<(), CliError> {
    let source = read_schema(required(&args.source, "source")?)?;
    let target = read_schema(required(&args.target, "target")?)?;
    let out = required(&args.out, "out")?;
    let (source_docs, target_docs) = build_corpora(&source, &target, args.mode.unwrap_or_default());
    for (corpus, dir) in [(&source_docs, out.join("source")), (&target_docs, out.join("target"))] {
        corpus
            .write_to_dir(&dir)
            .map_err(|e| CliError::Failure(format!("cannot write {}: {e}", dir.display())))?;
    }
    println!(
        "source: {} documents, target: {} documents -> {}",
        source_docs.len(),
        target_docs.len(),
        out.display()
    );
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> Result<(), CliError> {
    let source = read_schema(required(&args.source, "source")?)?;
    let truth = match &args.truth {
        Some(p) => read_truth(p)?,
        None => GroundTruth::default(),
    };
    let mut out = serde_json::json!({
        "source": dataset_stats(&source, &truth).map_err(CliError::failure)?,
    });
    if let Some(p) = &args.target {
        out["target"] = serde_json::to_value(target_stats(&read_schema(p)?, &truth)).expect("stats serialize");
    }
    print!("{}", to_json(&out));
    Ok(())
}

fn cmd_serve(args: ServeArgs) -> Result<(), CliError> {
    let addr = args
        .bind
        .unwrap_or_else(|| "127.0.0.1:8080".parse().expect("literal address"));
    let options = ServiceOptions {
        data_dir: args.data_dir.clone().unwrap_or_else(|| PathBuf::from("rematch-data")),
        max_active_jobs_per_project: args.max_jobs_per_project.unwrap_or(1),
        backends: default_backend_factory(),
    };
    let runtime = tokio::runtime::Runtime::new().map_err(CliError::failure)?;
    runtime.block_on(async move {
        let state = AppState::open(options).map_err(CliError::failure)?;
        crate::api::serve(addr, state, args.static_dir)
            .await
            .map_err(CliError::failure)
    })
}

/// Applies `--config` and dispatches.
pub fn execute(cli: Cli) -> Result<(), CliError> {
    macro_rules! with_config {
        ($args:ident) => {{
            let mut args = $args;
            if let Some(path) = args.config.clone() {
                args.merge(load_config(&path)?);
            }
            args
        }};
    }
    match cli.command {
        Command::Match(a) => cmd_match(with_config!(a)),
        Command::Eval(a) => cmd_eval(with_config!(a)),
        Command::Grid(a) => cmd_grid(with_config!(a)),
        Command::Docgen(a) => cmd_docgen(with_config!(a)),
        Command::Serve(a) => cmd_serve(with_config!(a)),
        Command::Stats(a) => cmd_stats(with_config!(a)),
    }
}

/// Entry point: parses `args`, runs, and maps errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut stderr = std::io::stderr();
            let _ = writeln!(stderr, "error: {e}");
            if let CliError::Usage(_) = e {
                let _ = writeln!(stderr, "\n{}", Cli::command().render_usage());
            }
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j_lists_accept_inf_and_reject_zero() {
        assert_eq!(parse_j_list("1, 3,inf").unwrap(), vec![Some(1), Some(3), None]);
        assert!(parse_j_list("0").is_err());
        assert!(parse_j_list("x").is_err());
    }

    #[test]
    fn config_file_fills_missing_flags_and_flags_win() {
        let file: MatchArgs =
            toml::from_str("source = \"s.json\"\nj = 5\nk = 2\nranker = \"oracle\"\nembed-dim = 64\n").unwrap();
        let mut args = MatchArgs {
            j: Some(1),
            ..Default::default()
        };
        args.merge(file);
        assert_eq!(args.source, Some(PathBuf::from("s.json")));
        assert_eq!(args.j, Some(1));
        assert_eq!(args.k, Some(2));
        assert_eq!(args.backends.embed_dim, Some(64));
        let config = match_config(&args).unwrap();
        assert_eq!((config.top_j, config.top_k), (Some(1), 2));
        assert_eq!(config.embedder, EmbedderSpec::LocalHashTrigram { dim: 64 });
    }

    #[test]
    fn unknown_config_keys_and_zero_values_are_usage_errors() {
        assert!(toml::from_str::<MatchArgs>("jj = 1").is_err());
        let file: MatchArgs = toml::from_str("j = 0").unwrap();
        let mut args = MatchArgs::default();
        args.merge(file);
        assert!(matches!(match_config(&args), Err(CliError::Usage(_))));
    }

    #[test]
    fn no_retrieval_from_file_yields_to_flag_j() {
        let file: MatchArgs = toml::from_str("no-retrieval = true").unwrap();
        let mut args = MatchArgs::default();
        args.merge(file.clone());
        assert_eq!(match_config(&args).unwrap().top_j, None);
        let mut args = MatchArgs {
            j: Some(2),
            ..Default::default()
        };
        args.merge(file);
        assert_eq!(match_config(&args).unwrap().top_j, Some(2));
    }

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}

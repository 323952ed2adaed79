//! Subcommands of the `bsr` binary.

use anyhow::{anyhow, Context};
use bsr_core::corpus::{
    generate_test_with_id, generate_with_id, generate_without_id, split, CorpusConfig, Dataset, IdentityType,
    PromptInstance,
};
use bsr_core::jsonl::{read_jsonl, write_jsonl};
use bsr_core::lambda::{Lexicon, ResponseMapper};
use bsr_core::metrics::{
    beta_sweep, grouped_report, join_records, log_grid, trend_series, EvalRecord, GroupKey, MetricsSummary,
};
use bsr_core::modelio::{checkpoint_family, infer_batch, ModelSource, RawResponse, ResponseCache};
use bsr_core::{plot, report};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_PARTIAL_FAILURE: u8 = 2;
pub const EXIT_SCORING: u8 = 3;
/// Inference failed for every instance (e.g. unreachable endpoint).
pub const EXIT_TOTAL_FAILURE: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "bsr", version, about = "Binary statutory reasoning corpora and legal safety scoring")]
pub struct Cli {
    /// Seed for every seeded choice (overrides the config seed)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Weight of fairness relative to F1
    #[arg(long, global = true, default_value_t = 1.0)]
    pub beta: f64,
    /// Write into an existing output directory
    #[arg(long, global = true)]
    pub force: bool,
    /// Output directory
    #[arg(long, global = true, default_value = "bsr-out")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the with-identity, identity-stripped and test corpora
    Generate {
        /// Corpus config (JSON); the bundled config is used when omitted
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Obtain model responses for a dataset
    Infer {
        #[arg(long)]
        dataset: PathBuf,
        /// Model source config (JSON)
        #[arg(long)]
        model: PathBuf,
        /// Response cache; defaults to <out-dir>/cache.jsonl
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Score responses and write JSON / CSV reports
    Score {
        #[command(flatten)]
        input: ScoreInput,
        /// Comma-separated grouping keys: law_id, identity_type, checkpoint
        #[arg(long, value_delimiter = ',')]
        group_by: Vec<GroupKey>,
        /// Restrict scoring to one law
        #[arg(long)]
        law: Option<String>,
        /// Restrict scoring to one identity type
        #[arg(long)]
        identity_type: Option<IdentityType>,
    },
    /// Evaluate the legal safety score over a grid of beta values
    Sweep {
        #[command(flatten)]
        input: ScoreInput,
        /// Comma-separated beta values; defaults to 41 log-spaced values in [0.01, 100]
        #[arg(long, value_delimiter = ',')]
        beta_grid: Vec<f64>,
    },
    /// Metrics across checkpoints
    Trend {
        #[arg(long)]
        dataset: PathBuf,
        /// Checkpoint responses as `id=path`, in series order
        #[arg(long = "responses")]
        responses: Vec<String>,
        /// Mock checkpoint family progress values, e.g. 0,0.25,0.5,0.75,1
        #[arg(long, value_delimiter = ',', conflicts_with = "responses")]
        family: Vec<f64>,
        /// Let family checkpoints treat identities of a sample differently
        #[arg(long)]
        identity_noise: bool,
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct ScoreInput {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Responses file, optionally labelled as `checkpoint=path`; repeatable
    #[arg(long = "responses", required = true)]
    pub responses: Vec<String>,
    /// Verdict lexicon (JSON); the bundled lexicon is used when omitted
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
}

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

trait ExitCode<T> {
    fn usage(self) -> Result<T, Failure>;
    fn scoring(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ExitCode<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure { code: EXIT_USAGE, error: e.into() })
    }
    fn scoring(self) -> Result<T, Failure> {
        self.map_err(|e| Failure { code: EXIT_SCORING, error: e.into() })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub seed: Option<u64>,
    /// SHA-256 of the config document that drove the run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    pub paths: BTreeMap<String, String>,
    #[serde(default)]
    pub counts: BTreeMap<String, usize>,
    /// With-identity instances per identity-stripped instance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub with_to_without_ratio: Option<f64>,
}

struct Run<'a> {
    cli: &'a Cli,
    command: &'static str,
    started: chrono::DateTime<chrono::Utc>,
    manifest_paths: BTreeMap<String, String>,
    counts: BTreeMap<String, usize>,
    config_sha256: Option<String>,
    model_id: Option<String>,
    ratio: Option<f64>,
}

impl<'a> Run<'a> {
    fn start(cli: &'a Cli, command: &'static str) -> Result<Self, Failure> {
        if !(cli.beta.is_finite() && cli.beta > 0.0) {
            return Err(anyhow!("--beta must be a positive number, got {}", cli.beta)).usage();
        }
        let dir = &cli.out_dir;
        if dir.exists() && !cli.force {
            return Err(anyhow!(
                "output directory {} already exists; pass --force to write into it",
                dir.display()
            ))
            .usage();
        }
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))
            .usage()?;
        Ok(Run {
            cli,
            command,
            started: chrono::Utc::now(),
            manifest_paths: BTreeMap::new(),
            counts: BTreeMap::new(),
            config_sha256: None,
            model_id: None,
            ratio: None,
        })
    }

    fn path(&mut self, name: &str, file: &str) -> PathBuf {
        let p = self.cli.out_dir.join(file);
        self.manifest_paths.insert(name.to_string(), p.display().to_string());
        p
    }

    fn write(&mut self, name: &str, file: &str, contents: &str) -> Result<PathBuf, Failure> {
        let p = self.path(name, file);
        report::write_text(&p, contents).usage()?;
        Ok(p)
    }

    fn finish(self) -> Result<RunManifest, Failure> {
        let finished = chrono::Utc::now();
        let stamp = self.started.to_rfc3339_opts(chrono::SecondsFormat::Nanos, true);
        let run_id = format!(
            "{}-{}",
            self.command,
            &sha256_hex(format!("{stamp}\u{0}{}", self.cli.out_dir.display()).as_bytes())[..12]
        );
        let manifest = RunManifest {
            run_id,
            command: self.command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: stamp,
            finished_at: finished.to_rfc3339_opts(chrono::SecondsFormat::Nanos, true),
            seed: self.cli.seed,
            config_sha256: self.config_sha256,
            model_id: self.model_id,
            paths: self.manifest_paths,
            counts: self.counts,
            with_to_without_ratio: self.ratio,
        };
        let p = self.cli.out_dir.join("manifest.json");
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        report::write_text(&p, &json).usage()?;
        Ok(manifest)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Runs a parsed command line, returning the process exit code.
pub fn run(cli: &Cli) -> Result<u8, Failure> {
    match &cli.command {
        Command::Generate { config } => cmd_generate(cli, config.as_deref()),
        Command::Infer { dataset, model, cache } => cmd_infer(cli, dataset, model, cache.as_deref()),
        Command::Score {
            input,
            group_by,
            law,
            identity_type,
        } => cmd_score(cli, input, group_by, law.as_deref(), *identity_type),
        Command::Sweep { input, beta_grid } => cmd_sweep(cli, input, beta_grid),
        Command::Trend {
            dataset,
            responses,
            family,
            identity_noise,
            lexicon,
        } => cmd_trend(cli, dataset, responses, family, *identity_noise, lexicon.as_deref()),
    }
}

fn cmd_generate(cli: &Cli, config_path: Option<&Path>) -> Result<u8, Failure> {
    let (mut config, source) = match config_path {
        Some(p) => {
            let config = CorpusConfig::load(p)
                .with_context(|| format!("invalid corpus config {}", p.display()))
                .usage()?;
            let source = std::fs::read(p).usage()?;
            (config, source)
        }
        None => (CorpusConfig::bundled(), CorpusConfig::bundled_source().as_bytes().to_vec()),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let mut run = Run::start(cli, "generate")?;
    run.config_sha256 = Some(sha256_hex(&source));

    let with_id = generate_with_id(&config).usage()?;
    let without_id = generate_without_id(&config).usage()?;
    let test = generate_test_with_id(&config).usage()?;
    for d in [&with_id, &without_id, &test] {
        write_dataset(&mut run, d)?;
        run.counts.insert(format!("{}.instances", d.name), d.instances.len());
        if d.has_samples() {
            run.counts.insert(format!("{}.samples", d.name), d.samples.len());
            for t in IdentityType::ALL {
                run.counts.insert(format!("{}.instances.{t}", d.name), d.instances_of_type(t));
            }
        }
    }
    run.counts.insert(
        "bsr_without_id.yes_instances".into(),
        without_id.instances.iter().filter(|i| i.label == bsr_core::Label::Yes).count(),
    );
    if !without_id.instances.is_empty() {
        run.ratio = Some(with_id.instances.len() as f64 / without_id.instances.len() as f64);
    }

    let splits: BTreeMap<&str, _> = [
        (with_id.name.as_str(), split(&with_id, &config.split_spec, config.seed).usage()?),
        (without_id.name.as_str(), split(&without_id, &config.split_spec, config.seed).usage()?),
    ]
    .into_iter()
    .collect();
    for (name, p) in &splits {
        run.counts.insert(format!("{name}.train"), p.train.len());
        run.counts.insert(format!("{name}.validation"), p.validation.len());
    }
    run.write("splits", "splits.json", &serde_json::to_string_pretty(&splits).usage()?)?;
    let m = run.finish()?;
    println!(
        "generated {} with-identity, {} identity-stripped and {} test instances in {}",
        with_id.instances.len(),
        without_id.instances.len(),
        test.instances.len(),
        cli.out_dir.display()
    );
    log::info!("run {}", m.run_id);
    Ok(EXIT_OK)
}

fn write_dataset(run: &mut Run, d: &Dataset) -> Result<(), Failure> {
    let p = run.path(&d.name, &format!("{}.jsonl", d.name));
    write_jsonl(&p, &d.instances).usage()?;
    if d.has_samples() {
        let p = run.path(&format!("{}.samples", d.name), &format!("{}.samples.jsonl", d.name));
        write_jsonl(&p, &d.samples).usage()?;
    }
    Ok(())
}

fn load_instances(path: &Path) -> Result<Vec<PromptInstance>, Failure> {
    let instances: Vec<PromptInstance> = read_jsonl(path)
        .with_context(|| format!("cannot load dataset {}", path.display()))
        .usage()?;
    let mut seen = HashSet::new();
    for i in &instances {
        if !seen.insert(i.instance_id.as_str()) {
            return Err(anyhow!("dataset {} repeats instance id {}", path.display(), i.instance_id)).usage();
        }
    }
    Ok(instances)
}

#[derive(Debug, Serialize)]
struct InferSummary<'a> {
    model_id: &'a str,
    instances: usize,
    responses: usize,
    stats: bsr_core::modelio::InferStats,
    failures: Vec<&'a bsr_core::modelio::InferFailure>,
}

fn cmd_infer(cli: &Cli, dataset: &Path, model: &Path, cache: Option<&Path>) -> Result<u8, Failure> {
    let instances = load_instances(dataset)?;
    let source = ModelSource::load(model).usage()?;
    let model_bytes = std::fs::read(model).usage()?;
    let mut run = Run::start(cli, "infer")?;
    run.config_sha256 = Some(sha256_hex(&model_bytes));
    run.model_id = Some(source.model_id.clone());
    run.manifest_paths.insert("dataset".into(), dataset.display().to_string());

    let cache_path = cache.map(Path::to_path_buf).unwrap_or_else(|| cli.out_dir.join("cache.jsonl"));
    run.manifest_paths.insert("cache".into(), cache_path.display().to_string());
    let mut cache = ResponseCache::open(&cache_path).usage()?;
    if cache.corrupt_lines() > 0 {
        log::warn!("skipped {} corrupt cache line(s)", cache.corrupt_lines());
    }
    let started = Instant::now();
    let batch = infer_batch(&instances, &source, &mut cache).usage()?;
    let responses: Vec<RawResponse> = batch.responses().cloned().collect();
    let failures: Vec<_> = batch.failures().collect();

    let p = run.path("responses", "responses.jsonl");
    write_jsonl(&p, &responses).usage()?;
    let summary = InferSummary {
        model_id: &source.model_id,
        instances: instances.len(),
        responses: responses.len(),
        stats: batch.stats,
        failures: failures.clone(),
    };
    run.write("failures", "infer_summary.json", &serde_json::to_string_pretty(&summary).usage()?)?;
    run.counts.insert("instances".into(), instances.len());
    run.counts.insert("responses".into(), responses.len());
    run.counts.insert("failures".into(), failures.len());
    run.counts.insert("cache_hits".into(), batch.stats.cache_hits);
    run.counts.insert("network_calls".into(), batch.stats.network_calls);
    run.finish()?;
    println!(
        "{} responses, {} failures ({} cache hits, {} network calls, {} mock calls) in {:.2?}",
        responses.len(),
        failures.len(),
        batch.stats.cache_hits,
        batch.stats.network_calls,
        batch.stats.mock_calls,
        started.elapsed()
    );
    Ok(match (failures.len(), instances.len()) {
        (0, _) => EXIT_OK,
        (f, n) if f == n => {
            eprintln!("error: inference failed for every instance");
            EXIT_TOTAL_FAILURE
        }
        (f, n) => {
            eprintln!("warning: inference failed for {f} of {n} instances; see infer_summary.json");
            EXIT_PARTIAL_FAILURE
        }
    })
}

fn load_mapper(lexicon: Option<&Path>) -> Result<ResponseMapper, Failure> {
    let lexicon = match lexicon {
        Some(p) => Lexicon::load(p).usage()?,
        None => Lexicon::bundled(),
    };
    Ok(ResponseMapper::new(&lexicon))
}

/// `id=path` or a bare path.
fn parse_labelled(spec: &str) -> (Option<String>, PathBuf) {
    match spec.split_once('=') {
        Some((id, path)) if !id.is_empty() && !Path::new(spec).exists() => (Some(id.to_string()), PathBuf::from(path)),
        _ => (None, PathBuf::from(spec)),
    }
}

fn joined_records(
    instances: &[PromptInstance],
    specs: &[String],
    mapper: &ResponseMapper,
) -> Result<(Vec<EvalRecord>, usize), Failure> {
    let mut records = Vec::new();
    let mut uncovered = 0;
    let labelled = specs.len() > 1;
    for spec in specs {
        let (id, path) = parse_labelled(spec);
        let id = id.or_else(|| labelled.then(|| path.file_stem().unwrap_or_default().to_string_lossy().into_owned()));
        let responses: Vec<RawResponse> = read_jsonl(&path)
            .with_context(|| format!("cannot load responses {}", path.display()))
            .usage()?;
        let joined = join_records(instances, &responses, mapper, id.as_deref())
            .with_context(|| format!("cannot join {} with the dataset", path.display()))
            .scoring()?;
        if !joined.uncovered.is_empty() {
            log::warn!(
                "{}: {} dataset instance(s) have no response, e.g. {}",
                path.display(),
                joined.uncovered.len(),
                joined.uncovered[0]
            );
        }
        uncovered += joined.uncovered.len();
        records.extend(joined.records);
    }
    Ok((records, uncovered))
}

fn cmd_score(
    cli: &Cli,
    input: &ScoreInput,
    group_by: &[GroupKey],
    law: Option<&str>,
    identity_type: Option<IdentityType>,
) -> Result<u8, Failure> {
    let instances = load_instances(&input.dataset)?;
    let mapper = load_mapper(input.lexicon.as_deref())?;
    let (mut records, uncovered) = joined_records(&instances, &input.responses, &mapper)?;
    records.retain(|r| law.is_none_or(|l| r.law_id == l) && identity_type.is_none_or(|t| r.identity_type == Some(t)));
    if records.is_empty() {
        return Err(anyhow!("no records left to score")).scoring();
    }
    let mut run = Run::start(cli, "score")?;
    let rep = grouped_report(&records, group_by, cli.beta).scoring()?;
    run.write("report_json", "report.json", &report::report_json(&rep).scoring()?)?;
    run.write("report_csv", "report.csv", &report::report_csv(&rep).scoring()?)?;
    let p = run.path("verdicts", "verdicts.jsonl");
    write_jsonl(&p, &records).usage()?;
    if group_by.contains(&GroupKey::LawId) && group_by.contains(&GroupKey::IdentityType) {
        let title = format!("LSS (beta = {}) by law and identity type", report::fmt_metric(cli.beta));
        run.write("heatmap", "heatmap.svg", &plot::heatmap_svg(&rep, &title))?;
    }
    run.counts.insert("records".into(), records.len());
    run.counts.insert("uncovered".into(), uncovered);
    run.finish()?;
    print_summary(&rep.overall);
    Ok(EXIT_OK)
}

fn print_summary(m: &MetricsSummary) {
    println!(
        "rfs={} f1={} lss={} beta={} samples={} instances={} excluded={} excluded_samples={}",
        report::fmt_metric(m.rfs),
        report::fmt_metric(m.f1),
        report::fmt_metric(m.lss),
        report::fmt_metric(m.beta),
        m.n_samples,
        m.n_instances,
        m.n_excluded,
        m.n_excluded_samples
    );
}

fn cmd_sweep(cli: &Cli, input: &ScoreInput, grid: &[f64]) -> Result<u8, Failure> {
    let grid = if grid.is_empty() { log_grid(0.01, 100.0, 41) } else { grid.to_vec() };
    if let Some(b) = grid.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
        return Err(anyhow!("beta grid values must be positive, got {b}")).usage();
    }
    let instances = load_instances(&input.dataset)?;
    let mapper = load_mapper(input.lexicon.as_deref())?;
    let (records, _) = joined_records(&instances, &input.responses, &mapper)?;
    let mut run = Run::start(cli, "sweep")?;
    let m = MetricsSummary::compute(&records, cli.beta).scoring()?;
    let sweep = beta_sweep(m.rfs, m.f1, &grid).scoring()?;
    run.write("sweep_csv", "sweep.csv", &report::sweep_csv(m.rfs, m.f1, &sweep).scoring()?)?;
    run.write("sweep_svg", "sweep.svg", &plot::sweep_svg(m.rfs, m.f1, &sweep))?;
    run.finish()?;
    print_summary(&m);
    Ok(EXIT_OK)
}

fn cmd_trend(
    cli: &Cli,
    dataset: &Path,
    responses: &[String],
    family: &[f64],
    identity_noise: bool,
    lexicon: Option<&Path>,
) -> Result<u8, Failure> {
    if responses.is_empty() == family.is_empty() {
        return Err(anyhow!("give either --responses id=path (repeatable) or --family t1,t2,...")).usage();
    }
    let instances = load_instances(dataset)?;
    let mapper = load_mapper(lexicon)?;
    let mut checkpoints: Vec<(String, Vec<EvalRecord>)> = Vec::new();
    let mut run = Run::start(cli, "trend")?;
    if family.is_empty() {
        for spec in responses {
            let (id, path) = parse_labelled(spec);
            let id = id.unwrap_or_else(|| path.file_stem().unwrap_or_default().to_string_lossy().into_owned());
            let (records, _) = joined_records(&instances, std::slice::from_ref(spec), &mapper)?;
            checkpoints.push((id, records));
        }
    } else {
        let seed = cli.seed.unwrap_or(0);
        for &t in family {
            let spec = checkpoint_family(t, identity_noise, seed).usage()?;
            let id = format!("t{t}");
            let source = ModelSource::mock(format!("checkpoint-{id}"), spec);
            let batch = infer_batch(&instances, &source, &mut ResponseCache::in_memory()).usage()?;
            let responses: Vec<RawResponse> = batch.responses().cloned().collect();
            let p = run.path(&format!("responses.{id}"), &format!("responses_{id}.jsonl"));
            write_jsonl(&p, &responses).usage()?;
            let joined = join_records(&instances, &responses, &mapper, Some(&id)).scoring()?;
            checkpoints.push((id, joined.records));
        }
    }
    let series = trend_series(&checkpoints, cli.beta).scoring()?;
    for w in &series.warnings {
        eprintln!("warning: {w}");
    }
    let csv = report::trend_csv(&series).scoring()?;
    run.write("trend_csv", "trend.csv", &csv)?;
    run.write("trend_svg", "trend.svg", &plot::trend_svg(&series))?;
    run.counts.insert("checkpoints".into(), series.rows.len());
    run.finish()?;
    print!("{csv}");
    Ok(EXIT_OK)
}

/// Parses arguments and runs; clap errors map to the usage exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.code
        }
    }
}

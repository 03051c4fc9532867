//! Command implementations behind the `vidsum` binary.
//!
//! Every command reads the corpus files described by a manifest and writes
//! pretty-printed JSON documents that embed the tool version and the full
//! run configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use vidsum_core::corpus::{load_corpus, load_ground_truth, load_ground_truth_unchecked, write_corpus, QueryCorpus};
use vidsum_core::eval::{consistency, prf, ConsistencyReport, MatchConfig, MatchOrder, MetricsReport};
use vidsum_core::events::{assemble_ekp, fuse_graphs, graph_cut, label_events, FusionConfig, KEvents};
use vidsum_core::render::{emit_html, emit_json, read_json, write_json, Provenance, RenderConfig};
use vidsum_core::solver::{adaptive_weights, select_keyframes, solve, ImportanceScores, SolverConfig, Summary};
use vidsum_core::synth::{planted_corpus, planted_ground_truth, PlantedSpec};
use vidsum_core::textgraph::{SigmaMode, Stopwords, TextConfig, TextFields, TextModel};
use vidsum_core::visgraph::{visual_graph, NearDuplicateConfig};
use vidsum_core::{Error, ErrorClass, Result};

pub const SUMMARY_FILE: &str = "summary.json";
pub const SCORES_FILE: &str = "scores.json";
pub const EKP_FILE: &str = "ekp.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const CONSISTENCY_FILE: &str = "consistency.json";
pub const GROUND_TRUTH_FILE: &str = "groundtruth.json";

#[derive(Debug, Parser)]
#[command(name = "vidsum", version, about = "Query-aware keyframe summaries of web video collections")]
pub struct Cli {
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every candidate keyframe and keep the important ones.
    Summarize(SummarizeArgs),
    /// Group a summary into events and render the event/keyframe page.
    Events(EventsArgs),
    /// Precision, recall and F-score of a summary against annotators.
    Eval(EvalArgs),
    /// Agreement between annotators.
    Consistency(ConsistencyArgs),
    /// Write a synthetic corpus with planted events and annotators.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = vidsum_core::solver::DEFAULT_GAMMA)]
    pub gamma: f64,
    #[arg(long, default_value_t = vidsum_core::solver::DEFAULT_TC)]
    pub tc: f64,
    #[arg(long, default_value_t = vidsum_core::solver::DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    #[arg(long, default_value_t = vidsum_core::solver::DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    /// L2-normalize frame and web-image features before solving.
    #[arg(long)]
    pub normalize_features: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FieldsArg {
    Title,
    TitleDescription,
}

impl From<FieldsArg> for TextFields {
    fn from(f: FieldsArg) -> Self {
        match f {
            FieldsArg::Title => TextFields::Title,
            FieldsArg::TitleDescription => TextFields::TitleDescription,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    GeneratedFirst,
    TruthFirst,
}

impl From<OrderArg> for MatchOrder {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::GeneratedFirst => MatchOrder::GeneratedFirst,
            OrderArg::TruthFirst => MatchOrder::TruthFirst,
        }
    }
}

#[derive(Debug, Args)]
pub struct EventsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// `summary.json` written by `summarize` for the same corpus.
    #[arg(long)]
    pub summary: PathBuf,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = vidsum_core::events::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = vidsum_core::visgraph::DEFAULT_TAU_ND)]
    pub tau_nd: f64,
    /// Number of events, or `auto`.
    #[arg(long, default_value = "auto")]
    pub k_events: KEvents,
    /// Word clusters for the text graph; derived from the vocabulary size
    /// when omitted.
    #[arg(long)]
    pub k_words: Option<usize>,
    /// Stopword file, one token per line. A small English list is used
    /// otherwise.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "title-description")]
    pub text_fields: FieldsArg,
    /// Directory of `<frame_id>.jpg` thumbnails to inline into the page.
    #[arg(long)]
    pub thumbnails: Option<PathBuf>,
    #[arg(long)]
    pub include_scores: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub summary: PathBuf,
    #[arg(long)]
    pub ground_truth: PathBuf,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Normalized distance below which two keyframes match.
    #[arg(long, default_value_t = vidsum_core::eval::DEFAULT_DISTANCE_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value = "generated-first")]
    pub match_order: OrderArg,
}

#[derive(Debug, Args)]
pub struct ConsistencyArgs {
    #[arg(long)]
    pub ground_truth: PathBuf,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub topics: usize,
    #[arg(long, default_value_t = 5)]
    pub videos_per_topic: usize,
    #[arg(long, default_value_t = 4)]
    pub frames_per_video: usize,
    #[arg(long, default_value_t = 4)]
    pub annotators: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TextOptions {
    pub fields: TextFields,
    pub k_words: Option<usize>,
    pub stopwords: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Inputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
}

/// Every tunable of the pipeline. Each command fills the parts it uses and
/// echoes the whole value into its outputs. Output locations are left out
/// so that reruns into another directory produce identical files.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunConfig {
    pub solver: SolverConfig,
    pub fusion: FusionConfig,
    pub near_duplicate: NearDuplicateConfig,
    pub matching: MatchConfig,
    pub text: TextOptions,
    pub seed: u64,
    pub normalize_features: bool,
    pub inputs: Inputs,
}

impl RunConfig {
    pub fn provenance(&self) -> Provenance {
        Provenance::new(serde_json::to_value(self).expect("config serializes"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryDocument {
    pub provenance: Provenance,
    pub query: String,
    #[serde(flatten)]
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoresDocument {
    pub provenance: Provenance,
    pub query: String,
    #[serde(flatten)]
    pub scores: ImportanceScores,
    /// Adaptive weight of every web image.
    pub rho: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsDocument {
    pub provenance: Provenance,
    #[serde(flatten)]
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyDocument {
    pub provenance: Provenance,
    #[serde(flatten)]
    pub report: ConsistencyReport,
}

/// 1 for bad configuration, 2 for bad or inconsistent data, 3 for numerical
/// failures.
pub fn exit_code(err: &Error) -> u8 {
    match err.class() {
        ErrorClass::Config => 1,
        ErrorClass::Data => 2,
        ErrorClass::Numerical => 3,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Runs one parsed command and returns the files it wrote.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    match &cli.command {
        Command::Summarize(args) => summarize(args),
        Command::Events(args) => events(args),
        Command::Eval(args) => eval(args),
        Command::Consistency(args) => consistency_cmd(args),
        Command::Synth(args) => synth(args),
    }
}

pub fn summarize(args: &SummarizeArgs) -> Result<Vec<PathBuf>> {
    let config = RunConfig {
        solver: SolverConfig {
            gamma: args.gamma,
            tc: args.tc,
            max_iters: args.max_iters,
            tolerance: args.tolerance,
        },
        normalize_features: args.normalize_features,
        inputs: Inputs {
            manifest: Some(args.manifest.clone()),
            ..Inputs::default()
        },
        ..RunConfig::default()
    };
    config.solver.validate()?;

    let mut corpus = load_corpus(&args.manifest)?;
    if args.normalize_features {
        corpus = corpus.l2_normalized();
    }
    log::info!(
        "{} videos, {} candidate keyframes, {} web images",
        corpus.videos().len(),
        corpus.frame_count(),
        corpus.web_image_count()
    );
    let weights = adaptive_weights(&corpus);
    for w in &weights.warnings {
        log::warn!("{w}");
    }
    let scores = solve(&corpus, &weights.rho, &config.solver)?;
    let summary = select_keyframes(&scores, config.solver.tc);
    log::info!(
        "{} keyframes selected after {} sweeps",
        summary.len(),
        scores.iterations_used
    );

    create_dir(&args.out_dir)?;
    let provenance = config.provenance();
    let summary_path = args.out_dir.join(SUMMARY_FILE);
    write_json(
        &SummaryDocument {
            provenance: provenance.clone(),
            query: corpus.query().to_string(),
            summary,
        },
        &summary_path,
    )?;
    let scores_path = args.out_dir.join(SCORES_FILE);
    write_json(
        &ScoresDocument {
            provenance,
            query: corpus.query().to_string(),
            scores,
            rho: weights.rho,
            warnings: weights.warnings,
        },
        &scores_path,
    )?;
    Ok(vec![summary_path, scores_path])
}

/// Loads a summary and checks that it was produced from `corpus`.
pub fn load_summary(path: &Path, corpus: &QueryCorpus) -> Result<Summary> {
    let doc: SummaryDocument = read_json(path)?;
    if doc.query != corpus.query() {
        return Err(Error::SummaryMismatch(format!(
            "summary is for query `{}`, corpus for `{}`",
            doc.query,
            corpus.query()
        )));
    }
    if let Some(kf) = doc.summary.keyframes.iter().find(|k| corpus.frame(&k.frame_id).is_none()) {
        return Err(Error::SummaryMismatch(format!(
            "keyframe `{}` is not a candidate keyframe of this corpus",
            kf.frame_id
        )));
    }
    Ok(doc.summary)
}

pub fn events(args: &EventsArgs) -> Result<Vec<PathBuf>> {
    let config = RunConfig {
        fusion: FusionConfig {
            alpha: args.alpha,
            k_events: args.k_events,
        },
        near_duplicate: NearDuplicateConfig { tau_nd: args.tau_nd },
        text: TextOptions {
            fields: args.text_fields.into(),
            k_words: args.k_words,
            stopwords: args.stopwords.clone(),
        },
        seed: args.seed,
        inputs: Inputs {
            manifest: Some(args.manifest.clone()),
            summary: Some(args.summary.clone()),
            ground_truth: None,
        },
        ..RunConfig::default()
    };
    config.fusion.validate()?;
    config.near_duplicate.validate()?;

    let corpus = load_corpus(&args.manifest)?;
    let summary = load_summary(&args.summary, &corpus)?;
    let stopwords = match &args.stopwords {
        Some(path) => Stopwords::load(path)?,
        None => Stopwords::default(),
    };
    let text = TextModel::build(
        &corpus,
        &TextConfig {
            stopwords,
            fields: config.text.fields,
            k_words: config.text.k_words,
            sigma: SigmaMode::Median,
            seed: config.seed,
        },
    )?;
    let visual = visual_graph(&corpus, &config.near_duplicate)?;
    for w in &visual.warnings {
        log::warn!("{w}");
    }
    let fused = fuse_graphs(&visual.graph, &text.graph(SigmaMode::Median)?, config.fusion.alpha)?;
    let partition = graph_cut(&fused, config.fusion.k_events, config.seed)?;
    log::info!("{} events over {} videos", partition.event_count(), corpus.videos().len());
    let labels = label_events(&partition, &text);
    let ekp = assemble_ekp(&summary, &partition, &labels, &corpus)?;

    create_dir(&args.out_dir)?;
    let json_path = args.out_dir.join(EKP_FILE);
    emit_json(&ekp, Some(&config.provenance()), &json_path)?;
    let html_path = emit_html(
        &ekp,
        &RenderConfig {
            output_dir: args.out_dir.clone(),
            thumbnail_dir: args.thumbnails.clone(),
            include_scores: args.include_scores,
        },
    )?;
    Ok(vec![json_path, html_path])
}

pub fn eval(args: &EvalArgs) -> Result<Vec<PathBuf>> {
    let config = RunConfig {
        matching: MatchConfig {
            distance_threshold: args.threshold,
            order: args.match_order.into(),
        },
        inputs: Inputs {
            manifest: Some(args.manifest.clone()),
            summary: Some(args.summary.clone()),
            ground_truth: Some(args.ground_truth.clone()),
        },
        ..RunConfig::default()
    };
    config.matching.validate()?;

    let corpus = load_corpus(&args.manifest)?;
    let summary = load_summary(&args.summary, &corpus)?;
    let truth = load_ground_truth(&args.ground_truth, &corpus)?;
    let report = prf(&summary, &truth, &corpus, &config.matching)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }

    create_dir(&args.out_dir)?;
    let path = args.out_dir.join(METRICS_FILE);
    write_json(
        &MetricsDocument {
            provenance: config.provenance(),
            report,
        },
        &path,
    )?;
    Ok(vec![path])
}

pub fn consistency_cmd(args: &ConsistencyArgs) -> Result<Vec<PathBuf>> {
    let config = RunConfig {
        inputs: Inputs {
            ground_truth: Some(args.ground_truth.clone()),
            ..Inputs::default()
        },
        ..RunConfig::default()
    };
    let truth = load_ground_truth_unchecked(&args.ground_truth)?;
    let report = consistency(&truth)?;

    create_dir(&args.out_dir)?;
    let path = args.out_dir.join(CONSISTENCY_FILE);
    write_json(
        &ConsistencyDocument {
            provenance: config.provenance(),
            report,
        },
        &path,
    )?;
    Ok(vec![path])
}

pub fn synth(args: &SynthArgs) -> Result<Vec<PathBuf>> {
    if args.topics == 0 || args.videos_per_topic == 0 || args.frames_per_video == 0 {
        return Err(Error::InvalidConfig("synthetic corpus sizes must be positive".into()));
    }
    let spec = PlantedSpec {
        topics: args.topics,
        videos_per_topic: args.videos_per_topic,
        frames_per_video: args.frames_per_video,
        ..PlantedSpec::default()
    };
    let planted = planted_corpus(&spec, args.seed)?;
    create_dir(&args.out_dir)?;
    let manifest = write_corpus(&planted.corpus, &args.out_dir)?;
    let mut written = vec![manifest];
    if args.annotators > 0 {
        let truth = planted_ground_truth(&planted.corpus, args.annotators, args.seed);
        let path = args.out_dir.join(GROUND_TRUTH_FILE);
        fs::write(&path, truth.to_json() + "\n").map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}

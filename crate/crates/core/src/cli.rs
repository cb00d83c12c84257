//! The `xdis` command line.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use crate::agreement::{MetricId, RankBasis};
use crate::attribution::{import_attributions, AggregationMode, AttributionStore, MethodId, SegmentSource};
use crate::corpus::{
    load_clean_corpus, load_corpus, truncate_to_budget, write_clean_corpus, CleanArticle, TokenBudget,
};
use crate::pipeline::{self, AnalysisConfig, SegmentWeighting};
use crate::segmentation::{
    lexical_fallback_embed, load_embeddings, load_segmentations, write_segmentations, EmbeddingSet,
};
use crate::Error;

pub const LOG_ENV: &str = "XDIS_LOG";
pub const DEFAULT_EMBED_DIM: usize = 256;

#[derive(Debug, Parser)]
#[command(
    name = "xdis",
    version,
    about = "Global and regional disagreement between sentence-level explanations"
)]
pub struct Cli {
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Preprocess, sentence-split and truncate a raw JSONL corpus.
    Ingest(IngestArgs),
    /// Aggregate token attributions onto sentences.
    AttrImport(AttrImportArgs),
    /// Agreement over whole articles.
    AgreeGlobal(GlobalArgs),
    /// Cluster each article's sentences into segments.
    Segment(SegmentArgs),
    /// Agreement over segments, averaged per article.
    AgreeRegional(RegionalArgs),
    /// Regional minus global, cell by cell.
    Compare(CompareArgs),
    /// Sentence weights for one article and method, for the viewer.
    ExportViz(VizArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Maximum whitespace tokens per article.
    #[arg(long, default_value_t = 1024)]
    pub budget: usize,
}

#[derive(Debug, Args)]
pub struct AttrImportArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// How token scores combine into a sentence score: sum or mean.
    #[arg(long, default_value = "sum")]
    pub agg: AggregationMode,
}

#[derive(Debug, Args)]
pub struct AnalysisArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Sentence-level attributions written by attr-import.
    #[arg(long)]
    pub attributions: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated methods (default: every imported method).
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<MethodId>>,
    /// k values: a range like 2..11, a list like 2,4,6, or a single value.
    #[arg(long)]
    pub k: Option<String>,
    /// Comma-separated metrics: fa, ra, pra, spearman.
    #[arg(long, value_delimiter = ',', default_value = "fa,ra,pra,spearman")]
    pub metrics: Vec<MetricId>,
    /// Rank sentences by |score| (magnitude) or by signed score.
    #[arg(long, default_value = "magnitude")]
    pub basis: String,
    /// Also write a flat CSV table here.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    #[command(flatten)]
    pub analysis: AnalysisArgs,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Per-sentence embeddings (JSONL). Without it a lexical fallback is used.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_EMBED_DIM)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = crate::kmeans::DEFAULT_RESTARTS)]
    pub restarts: usize,
    /// Range searched for each article's cluster count.
    #[arg(long, default_value = "2..10")]
    pub k_search: String,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub cluster: ClusterArgs,
}

#[derive(Debug, Args)]
pub struct RegionalArgs {
    #[command(flatten)]
    pub analysis: AnalysisArgs,
    #[command(flatten)]
    pub cluster: ClusterArgs,
    /// Precomputed segments from `segment`; skips clustering.
    #[arg(long)]
    pub segmentation: Option<PathBuf>,
    /// native: per-segment attribution records; slice: project article scores.
    #[arg(long, default_value = "native")]
    pub segment_source: SegmentSource,
    /// Weight segments equally or by sentence count when averaging.
    #[arg(long, default_value = "unweighted")]
    pub weighting: String,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub global: PathBuf,
    #[arg(long)]
    pub regional: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VizArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub attributions: PathBuf,
    #[arg(long)]
    pub article: String,
    #[arg(long)]
    pub method: MethodId,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "")]
    pub summary: String,
    /// Defaults to the article id.
    #[arg(long)]
    pub title: Option<String>,
}

/// Parses `2..11`, `2..=11`, `2,4,6` or `5`.
pub fn parse_k_values(s: &str) -> Result<Vec<usize>, String> {
    let bad = || format!("invalid k specification {s:?}");
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    if let Some((lo, hi)) = s.split_once("..") {
        let hi = hi.strip_prefix('=').unwrap_or(hi);
        let (lo, hi) = (num(lo)?, num(hi)?);
        if lo > hi {
            return Err(bad());
        }
        return Ok((lo..=hi).collect());
    }
    s.split(',').map(num).collect()
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let v = parse_k_values(s)?;
    match (v.first(), v.last()) {
        (Some(&lo), Some(&hi)) => Ok((lo, hi)),
        _ => Err(format!("invalid range {s:?}")),
    }
}

fn parse_basis(s: &str) -> Result<RankBasis, Error> {
    match s {
        "magnitude" | "abs" => Ok(RankBasis::Magnitude),
        "signed" => Ok(RankBasis::Signed),
        other => Err(Error::Usage(format!(
            "unknown rank basis {other:?} (expected magnitude or signed)"
        ))),
    }
}

fn parse_weighting(s: &str) -> Result<SegmentWeighting, Error> {
    match s {
        "unweighted" => Ok(SegmentWeighting::Unweighted),
        "sentences" | "sentence_count" => Ok(SegmentWeighting::SentenceCount),
        other => Err(Error::Usage(format!(
            "unknown weighting {other:?} (expected unweighted or sentences)"
        ))),
    }
}

fn load_inputs(a: &AnalysisArgs) -> Result<(Vec<CleanArticle>, AttributionStore), Error> {
    let corpus = load_clean_corpus(&a.corpus)?;
    let store = import_attributions(&a.attributions, &corpus, AggregationMode::Sum)?;
    Ok((corpus, store))
}

fn build_config(
    a: &AnalysisArgs,
    store: &AttributionStore,
    mut config: AnalysisConfig,
) -> Result<AnalysisConfig, Error> {
    config.methods = match &a.methods {
        Some(m) => m.clone(),
        None => store.methods().to_vec(),
    };
    if let Some(k) = &a.k {
        config.k_values = parse_k_values(k).map_err(Error::Usage)?;
    }
    config.metrics = a.metrics.clone();
    config.rank_basis = parse_basis(&a.basis)?;
    Ok(config)
}

fn apply_cluster(c: &ClusterArgs, config: &mut AnalysisConfig) -> Result<(), Error> {
    config.seed = c.seed;
    config.restarts = c.restarts;
    config.k_search = parse_range(&c.k_search).map_err(Error::Usage)?;
    Ok(())
}

fn embeddings_for(c: &ClusterArgs, corpus: &[CleanArticle]) -> Result<BTreeMap<String, EmbeddingSet>, Error> {
    match &c.embeddings {
        Some(path) => Ok(load_embeddings(path, corpus)?),
        None => {
            warn!("no embeddings given; using the lexical fallback (dim {})", c.embed_dim);
            let mut out = BTreeMap::new();
            for a in corpus.iter().filter(|a| a.sentence_count() > 0) {
                out.insert(
                    a.id.clone(),
                    lexical_fallback_embed(&a.id, &a.sentence_texts(), c.embed_dim)?,
                );
            }
            Ok(out)
        }
    }
}

fn write_outputs(report: &pipeline::Report, a: &AnalysisArgs) -> Result<(), Error> {
    pipeline::write_report(report, &a.out)?;
    if let Some(t) = &a.table {
        pipeline::write_flat_table(report, t)?;
    }
    Ok(())
}

pub fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Ingest(a) => {
            let budget = TokenBudget::new(a.budget)?;
            let raw = load_corpus(&a.input)?;
            let mut clean = Vec::with_capacity(raw.len());
            for r in &raw {
                let t = truncate_to_budget(&CleanArticle::from_raw(r), &budget)?;
                if let Some(w) = t.warning {
                    warn!(
                        "article {:?}: first sentence has {} tokens, over the budget of {}",
                        w.article_id, w.tokens, w.max_tokens
                    );
                }
                clean.push(t.article);
            }
            info!("ingested {} articles", clean.len());
            write_clean_corpus(&a.out, &clean)?;
        }
        Command::AttrImport(a) => {
            let corpus = load_clean_corpus(&a.corpus)?;
            let store = import_attributions(&a.input, &corpus, a.agg)?;
            for (article, method) in store.missing_pairs() {
                warn!("article {article:?} has no attribution for {method}");
            }
            store.write_sentence_level(&a.out)?;
        }
        Command::AgreeGlobal(a) => {
            let (corpus, store) = load_inputs(&a.analysis)?;
            let config = build_config(&a.analysis, &store, AnalysisConfig::global(Vec::new()))?;
            let report = pipeline::run_global_analysis(&corpus, &store, &config)?;
            write_outputs(&report, &a.analysis)?;
        }
        Command::Segment(a) => {
            let corpus = load_clean_corpus(&a.corpus)?;
            let mut config = AnalysisConfig::regional(Vec::new());
            apply_cluster(&a.cluster, &mut config)?;
            let embeddings = embeddings_for(&a.cluster, &corpus)?;
            let plan = pipeline::plan_segmentation(&corpus, &embeddings, &config)?;
            info!("average k = {:?}", plan.average_k);
            let ordered: Vec<_> = corpus
                .iter()
                .filter_map(|c| plan.segmentations.get(&c.id).cloned())
                .collect();
            write_segmentations(&a.out, &ordered)?;
        }
        Command::AgreeRegional(a) => {
            let (corpus, store) = load_inputs(&a.analysis)?;
            let mut config = build_config(&a.analysis, &store, AnalysisConfig::regional(Vec::new()))?;
            apply_cluster(&a.cluster, &mut config)?;
            config.segment_source = a.segment_source;
            config.segment_weighting = parse_weighting(&a.weighting)?;
            let report = match &a.segmentation {
                Some(path) => {
                    let segs = load_segmentations(path, &corpus)?;
                    pipeline::regional_from_segmentations(&corpus, &store, &segs, &config)?
                }
                None => {
                    let embeddings = embeddings_for(&a.cluster, &corpus)?;
                    pipeline::run_regional_analysis(&corpus, &store, &embeddings, &config)?
                }
            };
            write_outputs(&report, &a.analysis)?;
        }
        Command::Compare(a) => {
            let g = pipeline::read_report(&a.global)?;
            let r = pipeline::read_report(&a.regional)?;
            let cmp = pipeline::compare_reports(&g, &r)?;
            for note in &cmp.notes {
                warn!("{note}");
            }
            pipeline::write_comparison(&cmp, &a.out, a.table.as_deref())?;
        }
        Command::ExportViz(a) => {
            let corpus = load_clean_corpus(&a.corpus)?;
            let store = import_attributions(&a.attributions, &corpus, AggregationMode::Sum)?;
            let article = corpus
                .iter()
                .find(|c| c.id == a.article)
                .ok_or_else(|| Error::Usage(format!("unknown article {:?}", a.article)))?;
            let expl = store
                .get(&article.id, &a.method)
                .ok_or_else(|| Error::Usage(format!("no {} attribution for article {:?}", a.method, a.article)))?;
            let title = a.title.clone().unwrap_or_else(|| article.id.clone());
            let payload = pipeline::export_viz_payload(article, expl, &a.summary, &title)?;
            pipeline::write_viz_payload(&payload, &a.out)?;
        }
    }
    Ok(())
}

/// Runs the CLI and returns the process exit code: 0 on success, 1 for
/// usage and validation errors, 2 for file errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "error")).try_init();

    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match pool.install(|| execute(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                2
            } else {
                1
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_specs() {
        assert_eq!(parse_k_values("2..5").unwrap(), vec![2, 3, 4, 5]);
        assert_eq!(parse_k_values("2..=3").unwrap(), vec![2, 3]);
        assert_eq!(parse_k_values("2,4,6").unwrap(), vec![2, 4, 6]);
        assert_eq!(parse_k_values("7").unwrap(), vec![7]);
        assert!(parse_k_values("5..2").is_err());
        assert!(parse_k_values("x").is_err());
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run(["xdis", "--help"]), 0);
        assert_eq!(run(["xdis", "agree-regional", "--help"]), 0);
        assert_eq!(run(["xdis", "bogus"]), 1);
    }
}

//! Command-line interface.
//!
//! Every option can also come from a `key = value` config file given with
//! `--config`; command-line values take precedence.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::trec_io::save_run;
use crate::Result;
use config::{check_inputs, Config, Settings};

#[derive(Debug, Parser)]
#[command(name = "lexmatch", version, about = "Lexical-matching diagnostics for retrieval runs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest a collection into an index artifact.
    Index(IndexArgs),
    /// Produce a BM25 run from an index artifact.
    Retrieve(RetrieveArgs),
    /// Compute per-term user and system RSJ weights for one or more runs.
    Rsj(RsjArgs),
    /// Aggregate RSJ records into bin, split and significance reports.
    Analyze(AnalyzeArgs),
    /// Run the whole pipeline from a config file.
    Repro(ReproArgs),
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// Config file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Collection file.
    #[arg(long)]
    collection: Option<PathBuf>,
    /// Collection format: tsv or jsonl.
    #[arg(long)]
    format: Option<String>,
    /// Collection identifier (default: file stem).
    #[arg(long)]
    id: Option<String>,
    /// Output artifact.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    /// Config file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Index artifact written by `index`.
    #[arg(long)]
    index: Option<PathBuf>,
    /// Queries file.
    #[arg(long)]
    queries: Option<PathBuf>,
    /// Queries format: tsv or jsonl.
    #[arg(long)]
    queries_format: Option<String>,
    /// Retrieval depth [default: 1000].
    #[arg(long)]
    k: Option<usize>,
    /// Run tag [default: bm25].
    #[arg(long)]
    tag: Option<String>,
    /// BM25 k1 [default: 0.9].
    #[arg(long)]
    k1: Option<f64>,
    /// BM25 b [default: 0.4].
    #[arg(long)]
    b: Option<f64>,
    /// Stopword list, one word per line, removed from the index.
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Output run file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RsjArgs {
    /// Config file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Index artifact of the target collection.
    #[arg(long)]
    index: Option<PathBuf>,
    /// Queries file.
    #[arg(long)]
    queries: Option<PathBuf>,
    /// Queries format: tsv or jsonl.
    #[arg(long)]
    queries_format: Option<String>,
    /// Relevance judgments.
    #[arg(long)]
    qrels: Option<PathBuf>,
    /// Qrels format: trec or beir.
    #[arg(long)]
    qrels_format: Option<String>,
    /// Minimum grade counted as relevant [default: 1].
    #[arg(long)]
    rel_threshold: Option<u32>,
    /// A run to analyze, as `name=path`. Repeatable.
    #[arg(long = "run", value_name = "NAME=PATH")]
    runs: Vec<String>,
    /// Pseudo-relevance depth [default: 100].
    #[arg(long)]
    k: Option<usize>,
    /// Logarithm base: e, 2 or 10 [default: e].
    #[arg(long)]
    log_base: Option<String>,
    /// Re-sort runs by score instead of rejecting inconsistent ranks.
    #[arg(long)]
    lenient: bool,
    /// Directory receiving `rsj_<name>.csv`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Config file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// RSJ records of a system, as `name=path`. Repeatable.
    #[arg(long = "rsj", value_name = "NAME=PATH")]
    rsj: Vec<String>,
    /// Training queries for the IT/OOT split.
    #[arg(long)]
    training_queries: Option<PathBuf>,
    /// Training queries format: tsv or jsonl.
    #[arg(long)]
    training_format: Option<String>,
    /// Source-collection index artifact for the IDF+/IDF- split.
    #[arg(long)]
    source_index: Option<PathBuf>,
    /// Target-collection index artifact for the IDF+/IDF- split.
    #[arg(long = "target-index")]
    index: Option<PathBuf>,
    /// Bin edges, e.g. `-inf,0,5,8,17`.
    #[arg(long, allow_hyphen_values = true)]
    bins: Option<String>,
    /// Training occurrences making a term in-training [default: 10].
    #[arg(long)]
    it_threshold: Option<u64>,
    /// Relative document-frequency ratio for IDF shifts [default: 5].
    #[arg(long)]
    idf_ratio: Option<f64>,
    /// welch or pooled [default: welch].
    #[arg(long)]
    t_test: Option<String>,
    /// Also report the mean of per-query ΔRSJ means.
    #[arg(long)]
    per_query_mean: bool,
    /// System normalizing the ΔRSJ standard deviation.
    #[arg(long)]
    baseline: Option<String>,
    /// User-weight interval of the ndcg subset comparison [default: (8,17]].
    #[arg(long, allow_hyphen_values = true)]
    subset_bin: Option<String>,
    /// Qrels for ndcg.
    #[arg(long)]
    qrels: Option<PathBuf>,
    /// Qrels format: trec or beir.
    #[arg(long)]
    qrels_format: Option<String>,
    /// Run of a system for ndcg, as `name=path`. Repeatable.
    #[arg(long = "run", value_name = "NAME=PATH")]
    runs: Vec<String>,
    /// Re-sort runs by score instead of rejecting inconsistent ranks.
    #[arg(long)]
    lenient: bool,
    /// ndcg cutoff [default: 10].
    #[arg(long)]
    ndcg_k: Option<usize>,
    /// linear or exponential [default: linear].
    #[arg(long)]
    gain: Option<String>,
    /// Output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReproArgs {
    /// Pipeline config file.
    #[arg(long)]
    config: PathBuf,
    /// Skip stages already completed with identical settings.
    #[arg(long)]
    resume: bool,
    /// Overrides `out_dir` of the config.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Index(a) => {
            let mut s = Settings::from_optional_file(a.config.as_deref())?;
            s.set("collection", a.collection.map(|p| p.display().to_string()));
            s.set("collection_format", a.format);
            s.set("collection_id", a.id);
            s.set("out", a.out.map(|p| p.display().to_string()));
            let c = Config::resolve(&s)?;
            let out = Config::require(&c.out, "out")?;
            commands::build_index(&c, out)?;
        }
        Command::Retrieve(a) => {
            let mut s = Settings::from_optional_file(a.config.as_deref())?;
            s.set("index", a.index.map(|p| p.display().to_string()));
            s.set("queries", a.queries.map(|p| p.display().to_string()));
            s.set("queries_format", a.queries_format);
            s.set("retrieve_k", a.k);
            s.set("tag", a.tag);
            s.set("k1", a.k1);
            s.set("b", a.b);
            s.set("stopwords", a.stopwords.map(|p| p.display().to_string()));
            s.set("out", a.out.map(|p| p.display().to_string()));
            let c = Config::resolve(&s)?;
            let index = Config::require(&c.index, "index")?;
            let queries = Config::require(&c.queries, "queries")?;
            let out = Config::require(&c.out, "out")?;
            let mut inputs = vec![("index", index.as_path()), ("queries", queries.as_path())];
            inputs.extend(c.stopwords.as_deref().map(|p| ("stopwords", p)));
            check_inputs(inputs)?;
            let collection = crate::corpus_index::IndexedCollection::load(index)?;
            let run = commands::bm25_run(&c, &collection)?;
            save_run(&run, out)?;
            info!("{} queries retrieved into {}", run.queries.len(), out.display());
        }
        Command::Rsj(a) => {
            let mut s = Settings::from_optional_file(a.config.as_deref())?;
            s.set("index", a.index.map(|p| p.display().to_string()));
            s.set("queries", a.queries.map(|p| p.display().to_string()));
            s.set("queries_format", a.queries_format);
            s.set("qrels", a.qrels.map(|p| p.display().to_string()));
            s.set("qrels_format", a.qrels_format);
            s.set("rel_threshold", a.rel_threshold);
            s.set_list("runs", &a.runs);
            s.set("k", a.k);
            s.set("log_base", a.log_base);
            s.set_flag("lenient", a.lenient);
            s.set("out_dir", a.out_dir.map(|p| p.display().to_string()));
            let c = Config::resolve(&s)?;
            if c.runs.is_empty() {
                return Err(crate::Error::Config("no run given".into()));
            }
            let index = Config::require(&c.index, "index")?;
            let out_dir = Config::require(&c.out_dir, "out_dir")?;
            let mut inputs = vec![
                ("index", index.as_path()),
                ("queries", Config::require(&c.queries, "queries")?.as_path()),
                ("qrels", Config::require(&c.qrels, "qrels")?.as_path()),
            ];
            inputs.extend(c.runs.iter().map(|(_, p)| ("runs", p.as_path())));
            check_inputs(inputs)?;
            let collection = crate::corpus_index::IndexedCollection::load(index)?;
            commands::compute_rsj(&c, &collection, &c.runs, out_dir)?;
        }
        Command::Analyze(a) => {
            let mut s = Settings::from_optional_file(a.config.as_deref())?;
            s.set_list("rsj", &a.rsj);
            s.set("training_queries", a.training_queries.map(|p| p.display().to_string()));
            s.set("training_format", a.training_format);
            s.set("source_index", a.source_index.map(|p| p.display().to_string()));
            s.set("index", a.index.map(|p| p.display().to_string()));
            s.set("bins", a.bins);
            s.set("it_threshold", a.it_threshold);
            s.set("idf_ratio", a.idf_ratio);
            s.set("t_test", a.t_test);
            s.set_flag("per_query_mean", a.per_query_mean);
            s.set("baseline", a.baseline);
            s.set("subset_bin", a.subset_bin);
            s.set("qrels", a.qrels.map(|p| p.display().to_string()));
            s.set("qrels_format", a.qrels_format);
            s.set_list("runs", &a.runs);
            s.set_flag("lenient", a.lenient);
            s.set("ndcg_k", a.ndcg_k);
            s.set("gain", a.gain);
            s.set("out_dir", a.out_dir.map(|p| p.display().to_string()));
            let c = Config::resolve(&s)?;
            let out_dir = Config::require(&c.out_dir, "out_dir")?;
            commands::analyze(&c, &c.rsj, &c.runs, out_dir)?;
        }
        Command::Repro(a) => {
            let mut s = Settings::load(&a.config)?;
            s.set("out_dir", a.out_dir.map(|p| p.display().to_string()));
            let c = Config::resolve(&s)?;
            commands::repro(&c, a.resume)?;
        }
    }
    Ok(())
}

//! Subcommand implementations over resolved [`Config`]s.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;

use super::config::{check_inputs, Config};
use super::report;
use crate::analysis::{
    build_report, count_training_occurrences, ndcg_at_k, AnalysisReport, AnalysisSettings, SplitSources,
    SystemInput,
};
use crate::bm25::{random_run, InvertedIndex};
use crate::corpus_index::{read_documents, CorpusStats, IndexedCollection};
use crate::rsj::{read_records_csv, run_records, write_records_csv, RsjInputs};
use crate::textproc::StopwordSet;
use crate::trec_io::{binarize, read_qrels, read_queries, read_run, save_run, Run, RunOrdering};
use crate::{Error, Result};

pub const INDEX_FILE: &str = "collection.idx";
pub const SUMMARY_FILE: &str = "summary.json";
pub const RANDOM_SYSTEM: &str = "random";

pub fn rsj_file_name(system: &str) -> String {
    format!("rsj_{system}.csv")
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn default_collection_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "collection".to_owned())
}

/// Ingests the collection and saves the index artifact to `out`.
pub fn build_index(config: &Config, out: &Path) -> Result<IndexedCollection> {
    let path = Config::require(&config.collection, "collection")?;
    check_inputs([("collection", path.as_path())])?;
    let id = config.collection_id.clone().unwrap_or_else(|| default_collection_id(path));
    let collection = IndexedCollection::ingest(read_documents(path, config.collection_format)?, &id)?;
    if collection.num_docs() == 0 {
        return Err(Error::EmptyCollection(id));
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    collection.save(out)?;
    info!(
        "indexed {} documents, {} terms into {}",
        collection.num_docs(),
        collection.vocabulary().len(),
        out.display()
    );
    Ok(collection)
}

/// BM25 run over `collection` for every configured query.
pub fn bm25_run(config: &Config, collection: &IndexedCollection) -> Result<Run> {
    let queries_path = Config::require(&config.queries, "queries")?;
    let queries = read_queries(queries_path, config.queries_format)?;
    let stopwords = config.stopwords.as_deref().map(StopwordSet::load).transpose()?;
    let index = InvertedIndex::from_collection(collection, stopwords.as_ref());
    let run = index.retrieve_run(&queries, config.retrieve_k, config.bm25, &config.tag);
    let empty = queries.len() - run.queries.len();
    if empty > 0 {
        warn!("{empty} queries matched no document and are absent from the BM25 run");
    }
    Ok(run)
}

pub fn seeded_random_run(config: &Config, collection: &IndexedCollection) -> Result<Run> {
    let queries_path = Config::require(&config.queries, "queries")?;
    let queries = read_queries(queries_path, config.queries_format)?;
    Ok(random_run(
        &queries,
        collection.doc_term_index().doc_ids().map(str::to_owned).collect::<Vec<_>>().as_slice(),
        config.retrieve_k,
        config.seed,
        RANDOM_SYSTEM,
    ))
}

fn ordering(config: &Config) -> RunOrdering {
    if config.lenient {
        RunOrdering::Lenient
    } else {
        RunOrdering::Strict
    }
}

/// Computes and writes `rsj_<system>.csv` for every run. Returns the written
/// files by system name.
pub fn compute_rsj(
    config: &Config,
    collection: &IndexedCollection,
    runs: &[(String, PathBuf)],
    out_dir: &Path,
) -> Result<Vec<(String, PathBuf)>> {
    let queries = read_queries(Config::require(&config.queries, "queries")?, config.queries_format)?;
    let qrels = read_qrels(Config::require(&config.qrels, "qrels")?, config.qrels_format)?;
    let relevant = binarize(&qrels, config.rel_threshold);
    let stats = collection.corpus_stats();
    let index = collection.doc_term_index();
    let inputs = RsjInputs {
        queries: &queries,
        relevant: &relevant,
        stats: &stats,
        index: &index,
        k: config.k,
        base: config.log_base,
    };
    ensure_dir(out_dir)?;
    let mut written = Vec::new();
    for (name, path) in runs {
        let run = read_run(path, ordering(config))?;
        let (records, diagnostics) = run_records(&inputs, &run).map_err(|e| match e {
            Error::QueryNotInRun(q) => Error::Config(format!("run `{name}` ({}) lacks judged query `{q}`", path.display())),
            other => other,
        })?;
        for d in &diagnostics {
            warn!("{name}: {d}");
        }
        let out = out_dir.join(rsj_file_name(name));
        let file = File::create(&out).map_err(|e| Error::io(&out, e))?;
        write_records_csv(&records, BufWriter::new(file))?;
        info!("{name}: {} records written to {}", records.len(), out.display());
        written.push((name.clone(), out));
    }
    Ok(written)
}

fn metadata(config: &Config) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        m.insert(k.to_owned(), v);
    };
    put("k", config.k.to_string());
    put("log_base", config.log_base.as_str().to_owned());
    put("rel_threshold", config.rel_threshold.to_string());
    put("bins", config.bins.to_string());
    put("it_threshold", config.it_threshold.to_string());
    put("idf_ratio", config.idf_ratio.to_string());
    put("t_test", format!("{:?}", config.t_test).to_lowercase());
    put("ndcg_k", config.ndcg_k.to_string());
    put("gain", format!("{:?}", config.gain).to_lowercase());
    put("subset_bin", config.subset_bin.to_string());
    put("seed", config.seed.to_string());
    put("retrieve_k", config.retrieve_k.to_string());
    put("bm25_k1", config.bm25.k1.to_string());
    put("bm25_b", config.bm25.b.to_string());
    m
}

fn load_stats(path: &Path) -> Result<CorpusStats> {
    Ok(IndexedCollection::load(path)?.corpus_stats())
}

/// Runs the analyses the configured inputs allow and writes the report files.
pub fn analyze(config: &Config, rsj: &[(String, PathBuf)], runs: &[(String, PathBuf)], out_dir: &Path) -> Result<AnalysisReport> {
    if rsj.is_empty() {
        return Err(Error::Config("no RSJ record files given".into()));
    }
    if config.source_index.is_some() && config.index.is_none() {
        return Err(Error::Config("`source_index` needs the target `index` as well".into()));
    }
    let mut inputs: Vec<(&str, &Path)> = rsj.iter().map(|(_, p)| ("rsj", p.as_path())).collect();
    inputs.extend(runs.iter().map(|(_, p)| ("runs", p.as_path())));
    for (key, value) in [
        ("training_queries", &config.training_queries),
        ("source_index", &config.source_index),
        ("qrels", &config.qrels),
    ] {
        if let Some(p) = value {
            inputs.push((key, p.as_path()));
        }
    }
    if config.source_index.is_some() {
        inputs.push(("index", config.index.as_deref().unwrap_or(Path::new(""))));
    }
    check_inputs(inputs)?;

    let mut extra_warnings = Vec::new();
    let qrels = config.qrels.as_deref().map(|p| read_qrels(p, config.qrels_format)).transpose()?;
    let mut ndcg_by_system = BTreeMap::new();
    match &qrels {
        Some(qrels) => {
            for (name, path) in runs {
                if !rsj.iter().any(|(n, _)| n == name) {
                    extra_warnings.push(format!("run `{name}` has no RSJ records; ignored"));
                    continue;
                }
                let result = ndcg_at_k(&read_run(path, ordering(config))?, qrels, config.ndcg_k, config.gain);
                for d in &result.diagnostics {
                    warn!("{name}: {d}");
                }
                ndcg_by_system.insert(name.clone(), result.per_query);
            }
        }
        None if !runs.is_empty() => extra_warnings.push("runs given without qrels; ndcg skipped".to_owned()),
        None => {}
    }

    let mut systems = Vec::new();
    for (name, path) in rsj {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        systems.push(SystemInput {
            name: name.clone(),
            records: read_records_csv(file, &path.display().to_string())?,
            ndcg: ndcg_by_system.remove(name),
        });
    }

    let training = config
        .training_queries
        .as_deref()
        .map(|p| read_queries(p, config.training_format))
        .transpose()?
        .map(|q| count_training_occurrences(&q));
    let source = config.source_index.as_deref().map(load_stats).transpose()?;
    let target = match &source {
        Some(_) => config.index.as_deref().map(load_stats).transpose()?,
        None => None,
    };

    let settings = AnalysisSettings {
        bins: config.bins.clone(),
        it_threshold: config.it_threshold,
        idf_ratio: config.idf_ratio,
        t_test: config.t_test,
        per_query_mean: config.per_query_mean,
        baseline: config.baseline.clone(),
        subset_bin: config.subset_bin,
    };
    let sources = SplitSources {
        training_counts: training.as_ref(),
        collections: source.as_ref().zip(target.as_ref()),
    };
    let mut report = build_report(&systems, &settings, sources, metadata(config))?;
    report.warnings.extend(extra_warnings);
    for w in &report.warnings {
        warn!("{w}");
    }
    ensure_dir(out_dir)?;
    report::write_all(&report, out_dir)?;
    Ok(report)
}

#[derive(Debug, Serialize)]
struct StageStatus {
    stage: &'static str,
    status: &'static str,
}

#[derive(Debug, Serialize)]
struct SystemLine {
    system: String,
    rsj_records: PathBuf,
    mean_delta: Option<f64>,
    mean_ndcg: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct ReproSummary {
    stages: Vec<StageStatus>,
    index: PathBuf,
    systems: Vec<SystemLine>,
    warnings: Vec<String>,
}

/// Marker content: resumed stages are only skipped for identical settings.
fn fingerprint(config: &Config) -> String {
    format!("{config:?}\n")
}

fn marker(out_dir: &Path, stage: &str) -> PathBuf {
    out_dir.join(format!(".{stage}.done"))
}

struct Stages<'a> {
    out_dir: &'a Path,
    resume: bool,
    fingerprint: String,
    status: Vec<StageStatus>,
}

impl Stages<'_> {
    fn run(&mut self, stage: &'static str, body: impl FnOnce() -> Result<()>) -> Result<()> {
        let path = marker(self.out_dir, stage);
        if self.resume && fs::read_to_string(&path).is_ok_and(|f| f == self.fingerprint) {
            info!("{stage}: already complete, skipped");
            self.status.push(StageStatus { stage, status: "skipped" });
            return Ok(());
        }
        let _ = fs::remove_file(&path);
        body().map_err(|e| e.in_stage(stage))?;
        fs::write(&path, &self.fingerprint).map_err(|e| Error::io(&path, e).in_stage(stage))?;
        self.status.push(StageStatus { stage, status: "done" });
        Ok(())
    }
}

/// Full pipeline: index, BM25 (and optional random) retrieval, RSJ records
/// for every system, analysis and a summary.
pub fn repro(config: &Config, resume: bool) -> Result<ReproSummary> {
    let out_dir = Config::require(&config.out_dir, "out_dir")?.clone();
    let mut required: Vec<(&str, &Path)> = Vec::new();
    for (key, value) in [
        ("collection", &config.collection),
        ("queries", &config.queries),
        ("qrels", &config.qrels),
    ] {
        required.push((key, Config::require(value, key)?.as_path()));
    }
    for (key, value) in [
        ("stopwords", &config.stopwords),
        ("training_queries", &config.training_queries),
        ("source_index", &config.source_index),
    ] {
        if let Some(p) = value {
            required.push((key, p.as_path()));
        }
    }
    required.extend(config.runs.iter().map(|(_, p)| ("runs", p.as_path())));
    check_inputs(required)?;
    let mut names: Vec<&str> = vec![config.tag.as_str()];
    if config.random_baseline {
        names.push(RANDOM_SYSTEM);
    }
    for (name, _) in &config.runs {
        if names.contains(&name.as_str()) {
            return Err(Error::Config(format!("run name `{name}` clashes with a generated system")));
        }
        names.push(name);
    }
    ensure_dir(&out_dir)?;

    let index_path = out_dir.join(INDEX_FILE);
    let bm25_path = out_dir.join(format!("run_{}.trec", config.tag));
    let random_path = out_dir.join(format!("run_{RANDOM_SYSTEM}.trec"));
    let mut stages = Stages {
        out_dir: &out_dir,
        resume,
        fingerprint: fingerprint(config),
        status: Vec::new(),
    };

    let mut collection: Option<IndexedCollection> = None;
    stages.run("index", || {
        collection = Some(build_index(config, &index_path)?);
        Ok(())
    })?;
    let loaded = |c: &mut Option<IndexedCollection>| -> Result<()> {
        if c.is_none() {
            *c = Some(IndexedCollection::load(&index_path)?);
        }
        Ok(())
    };

    stages.run("retrieve", || {
        loaded(&mut collection)?;
        let coll = collection.as_ref().expect("loaded");
        save_run(&bm25_run(config, coll)?, &bm25_path)?;
        if config.random_baseline {
            save_run(&seeded_random_run(config, coll)?, &random_path)?;
        }
        Ok(())
    })?;

    let mut runs = vec![(config.tag.clone(), bm25_path.clone())];
    if config.random_baseline {
        runs.push((RANDOM_SYSTEM.to_owned(), random_path.clone()));
    }
    runs.extend(config.runs.iter().cloned());
    let rsj: Vec<(String, PathBuf)> =
        runs.iter().map(|(n, _)| (n.clone(), out_dir.join(rsj_file_name(n)))).collect();

    stages.run("rsj", || {
        loaded(&mut collection)?;
        compute_rsj(config, collection.as_ref().expect("loaded"), &runs, &out_dir).map(|_| ())
    })?;

    let mut analysis_config = config.clone();
    analysis_config.index = Some(index_path.clone());
    if analysis_config.baseline.is_none() {
        analysis_config.baseline = Some(config.tag.clone());
    }
    let mut report = None;
    stages.run("analyze", || {
        report = Some(analyze(&analysis_config, &rsj, &runs, &out_dir)?);
        Ok(())
    })?;
    let report: serde_json::Value = match report {
        Some(r) => serde_json::to_value(&r).map_err(|e| Error::Internal(e.to_string()))?,
        None => {
            let path = out_dir.join(report::JSON_FILE);
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), 0, e.to_string()))?
        }
    };

    let systems = rsj
        .iter()
        .map(|(name, path)| {
            let entry = report["systems"]
                .as_array()
                .and_then(|s| s.iter().find(|s| s["system"] == name.as_str()));
            SystemLine {
                system: name.clone(),
                rsj_records: path.clone(),
                mean_delta: entry.and_then(|e| e["mean"].as_f64()),
                mean_ndcg: entry.and_then(|e| e["mean_ndcg"].as_f64()),
            }
        })
        .collect();
    let warnings = report["warnings"]
        .as_array()
        .map(|w| w.iter().filter_map(|s| s.as_str().map(str::to_owned)).collect())
        .unwrap_or_default();
    let summary = ReproSummary {
        stages: stages.status,
        index: index_path,
        systems,
        warnings,
    };
    report::write_json(&summary, &out_dir.join(SUMMARY_FILE))?;
    Ok(summary)
}

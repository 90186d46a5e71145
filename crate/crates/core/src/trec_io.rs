//! Readers and writers for TREC run files, qrels and query files.
//!
//! All readers stream line by line, tolerate CRLF line endings and skip blank
//! lines. Every other malformed line is reported with its 1-based line number.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// One retrieved document of a ranked list.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedDoc {
    pub doc_id: String,
    pub rank: u32,
    pub score: f64,
}

/// Ranked lists for every query of one system.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Run {
    pub system_tag: String,
    pub queries: BTreeMap<String, Vec<RankedDoc>>,
}

impl Run {
    pub fn new(system_tag: impl Into<String>) -> Self {
        Run {
            system_tag: system_tag.into(),
            queries: BTreeMap::new(),
        }
    }

    /// Builds a run from scored lists already in rank order; ranks are assigned 1..n.
    pub fn from_scored_lists(
        system_tag: impl Into<String>,
        lists: impl IntoIterator<Item = (String, Vec<(String, f64)>)>,
    ) -> Self {
        let queries = lists
            .into_iter()
            .map(|(qid, docs)| {
                let ranked = docs
                    .into_iter()
                    .enumerate()
                    .map(|(i, (doc_id, score))| RankedDoc {
                        doc_id,
                        rank: i as u32 + 1,
                        score,
                    })
                    .collect();
                (qid, ranked)
            })
            .collect();
        Run {
            system_tag: system_tag.into(),
            queries,
        }
    }

    pub fn ranking(&self, query_id: &str) -> Option<&[RankedDoc]> {
        self.queries.get(query_id).map(Vec::as_slice)
    }

    /// Doc ids of the first `k` entries (fewer if the list is shorter).
    pub fn top_k(&self, query_id: &str, k: usize) -> Option<Vec<&str>> {
        self.ranking(query_id)
            .map(|docs| docs.iter().take(k).map(|d| d.doc_id.as_str()).collect())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RunOrdering {
    /// Rank and score ordering violations are errors.
    #[default]
    Strict,
    /// Each ranked list is re-sorted by descending score (ties keep file order)
    /// and ranks are reassigned from 1.
    Lenient,
}

fn source_name(path: &Path) -> String {
    path.display().to_string()
}

pub fn read_run(path: &Path, ordering: RunOrdering) -> Result<Run> {
    let name = source_name(path);
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_run(BufReader::new(file), &name, ordering)
}

/// Parses the 6-column `qid Q0 docid rank score tag` format.
pub fn parse_run(reader: impl BufRead, source: &str, ordering: RunOrdering) -> Result<Run> {
    let mut run = Run::default();
    let mut seen: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    // Line of the most recent entry per query, for ordering diagnostics.
    let mut last_line: BTreeMap<String, usize> = BTreeMap::new();
    let mut tag: Option<String> = None;

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::parse(source, lineno, e.to_string()))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 6 {
            return Err(Error::parse(
                source,
                lineno,
                format!("expected 6 columns, found {}", cols.len()),
            ));
        }
        let (qid, doc_id) = (cols[0], cols[2]);
        let rank: u32 = cols[3]
            .parse()
            .map_err(|_| Error::parse(source, lineno, format!("non-numeric rank `{}`", cols[3])))?;
        let score: f64 = cols[4]
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| Error::parse(source, lineno, format!("non-numeric score `{}`", cols[4])))?;
        if tag.is_none() {
            tag = Some(cols[5].to_owned());
        }
        if !seen.entry(qid.to_owned()).or_default().insert(doc_id.to_owned()) {
            return Err(Error::parse(
                source,
                lineno,
                format!("duplicate document `{doc_id}` for query `{qid}`"),
            ));
        }

        let list = run.queries.entry(qid.to_owned()).or_default();
        if ordering == RunOrdering::Strict {
            match list.last() {
                None if rank != 1 => {
                    return Err(Error::parse(
                        source,
                        lineno,
                        format!("first rank of query `{qid}` is {rank}, expected 1"),
                    ))
                }
                Some(prev) if rank <= prev.rank => {
                    return Err(Error::parse(
                        source,
                        lineno,
                        format!(
                            "rank {rank} does not increase after rank {} (line {})",
                            prev.rank, last_line[qid]
                        ),
                    ))
                }
                Some(prev) if score > prev.score => {
                    return Err(Error::parse(
                        source,
                        lineno,
                        format!(
                            "score {score} at rank {rank} exceeds score {} at rank {}",
                            prev.score, prev.rank
                        ),
                    ))
                }
                _ => {}
            }
            last_line.insert(qid.to_owned(), lineno);
        }
        list.push(RankedDoc {
            doc_id: doc_id.to_owned(),
            rank,
            score,
        });
    }

    if ordering == RunOrdering::Lenient {
        for list in run.queries.values_mut() {
            list.sort_by(|a, b| b.score.total_cmp(&a.score));
            for (i, d) in list.iter_mut().enumerate() {
                d.rank = i as u32 + 1;
            }
        }
    }
    run.system_tag = tag.unwrap_or_default();
    Ok(run)
}

/// Writes `run` in the 6-column TREC format. Scores use the shortest
/// representation that parses back to the same value.
pub fn write_run(run: &Run, mut out: impl Write) -> std::io::Result<()> {
    let is_field = |s: &str| !s.is_empty() && !s.contains(char::is_whitespace);
    if !run.queries.is_empty() && !is_field(&run.system_tag) {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            format!("system tag `{}` is not a single non-empty field", run.system_tag),
        ));
    }
    for (qid, docs) in &run.queries {
        for d in docs {
            writeln!(
                out,
                "{qid} Q0 {} {} {} {}",
                d.doc_id, d.rank, d.score, run.system_tag
            )?;
        }
    }
    out.flush()
}

pub fn save_run(run: &Run, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_run(run, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

/// Graded relevance judgments.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn insert(&mut self, query_id: &str, doc_id: &str, grade: u32) -> bool {
        self.judgments
            .entry(query_id.to_owned())
            .or_default()
            .insert(doc_id.to_owned(), grade)
            .is_none()
    }

    pub fn grade(&self, query_id: &str, doc_id: &str) -> Option<u32> {
        self.judgments.get(query_id)?.get(doc_id).copied()
    }

    pub fn query(&self, query_id: &str) -> Option<&BTreeMap<String, u32>> {
        self.judgments.get(query_id)
    }

    pub fn queries(&self) -> impl Iterator<Item = (&String, &BTreeMap<String, u32>)> {
        self.judgments.iter()
    }

    pub fn num_queries(&self) -> usize {
        self.judgments.len()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum QrelsFormat {
    /// `qid 0 docid grade`, whitespace separated.
    #[default]
    Trec,
    /// BEIR `query-id<TAB>corpus-id<TAB>score` with a header line.
    BeirTsv,
}

pub fn read_qrels(path: &Path, format: QrelsFormat) -> Result<Qrels> {
    let name = source_name(path);
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        QrelsFormat::Trec => parse_qrels(BufReader::new(file), &name),
        QrelsFormat::BeirTsv => parse_beir_qrels(BufReader::new(file), &name),
    }
}

fn parse_grade(raw: &str, source: &str, lineno: usize) -> Result<u32> {
    raw.parse()
        .map_err(|_| Error::parse(source, lineno, format!("grade `{raw}` is not a non-negative integer")))
}

pub fn parse_qrels(reader: impl BufRead, source: &str) -> Result<Qrels> {
    let mut qrels = Qrels::default();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::parse(source, lineno, e.to_string()))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 4 {
            return Err(Error::parse(
                source,
                lineno,
                format!("expected 4 columns, found {}", cols.len()),
            ));
        }
        let grade = parse_grade(cols[3], source, lineno)?;
        if !qrels.insert(cols[0], cols[2], grade) {
            return Err(Error::parse(
                source,
                lineno,
                format!("duplicate judgment for query `{}` document `{}`", cols[0], cols[2]),
            ));
        }
    }
    Ok(qrels)
}

pub fn parse_beir_qrels(reader: impl BufRead, source: &str) -> Result<Qrels> {
    let mut qrels = Qrels::default();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::parse(source, lineno, e.to_string()))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || (lineno == 1 && line.starts_with("query-id")) {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::parse(
                source,
                lineno,
                format!("expected 3 tab-separated columns, found {}", cols.len()),
            ));
        }
        let grade = parse_grade(cols[2].trim(), source, lineno)?;
        if !qrels.insert(cols[0], cols[1], grade) {
            return Err(Error::parse(
                source,
                lineno,
                format!("duplicate judgment for query `{}` document `{}`", cols[0], cols[1]),
            ));
        }
    }
    Ok(qrels)
}

/// Relevant documents per query: grade ≥ `threshold`. Judged queries with no
/// document reaching the threshold map to an empty set.
pub fn binarize(qrels: &Qrels, threshold: u32) -> BTreeMap<String, BTreeSet<String>> {
    qrels
        .queries()
        .map(|(qid, grades)| {
            let relevant = grades
                .iter()
                .filter(|(_, &g)| g >= threshold)
                .map(|(d, _)| d.clone())
                .collect();
            (qid.clone(), relevant)
        })
        .collect()
}

/// Query texts keyed by query id.
pub type QuerySet = BTreeMap<String, String>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum QueryFormat {
    /// `qid<TAB>text`
    #[default]
    Tsv,
    /// BEIR `{"_id": ..., "text": ...}` per line.
    Jsonl,
}

pub fn read_queries(path: &Path, format: QueryFormat) -> Result<QuerySet> {
    let name = source_name(path);
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        QueryFormat::Tsv => parse_queries_tsv(BufReader::new(file), &name),
        QueryFormat::Jsonl => parse_queries_jsonl(BufReader::new(file), &name),
    }
}

pub fn parse_queries_tsv(reader: impl BufRead, source: &str) -> Result<QuerySet> {
    let mut queries = QuerySet::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::parse(source, lineno, e.to_string()))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (qid, text) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(source, lineno, "missing tab between query id and text"))?;
        if queries.insert(qid.to_owned(), text.to_owned()).is_some() {
            return Err(Error::parse(source, lineno, format!("duplicate query id `{qid}`")));
        }
    }
    Ok(queries)
}

#[derive(Deserialize)]
struct JsonQuery {
    #[serde(rename = "_id")]
    id: String,
    text: String,
}

pub fn parse_queries_jsonl(reader: impl BufRead, source: &str) -> Result<QuerySet> {
    let mut queries = QuerySet::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::parse(source, lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let q: JsonQuery =
            serde_json::from_str(&line).map_err(|e| Error::parse(source, lineno, e.to_string()))?;
        if queries.insert(q.id.clone(), q.text).is_some() {
            return Err(Error::parse(source, lineno, format!("duplicate query id `{}`", q.id)));
        }
    }
    Ok(queries)
}

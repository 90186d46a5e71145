//! Robertson–Sparck Jones term weights for user relevance (judged relevant
//! documents) and system relevance (a run's top-K), and their difference.
//!
//! Both weights come from the same 2×2 contingency table of term occurrence
//! against a document set, estimated with 0.5 added to every cell:
//!
//! ```text
//! w = log[ (r + 0.5)(N − n − R + r + 0.5) / ((R − r + 0.5)(n − r + 0.5)) ]
//! ```
//!
//! where `R` is the size of the set, `r` the number of its documents
//! containing the term, `n` the document frequency and `N` the collection size.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus_index::{CorpusStats, DocTermIndex};
use crate::error::{Error, Result};
use crate::textproc::{analyze, Term};
use crate::trec_io::{QuerySet, Run};

/// Rank cutoff treated as "relevant to the system".
pub const DEFAULT_TOP_K: usize = 100;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyCounts {
    /// Documents in the set containing the term.
    pub r: u64,
    /// Size of the set.
    pub big_r: u64,
    /// Documents in the collection containing the term.
    pub n: u64,
    /// Collection size.
    pub big_n: u64,
}

impl ContingencyCounts {
    pub fn new(r: u64, big_r: u64, n: u64, big_n: u64) -> Self {
        ContingencyCounts { r, big_r, n, big_n }
    }

    pub fn validate(&self) -> Result<()> {
        let &ContingencyCounts { r, big_r, n, big_n } = self;
        let bound = if r > big_r {
            "r <= R"
        } else if r > n {
            "r <= n"
        } else if big_r > big_n {
            "R <= N"
        } else if n > big_n {
            "n <= N"
        } else if n - r > big_n - big_r {
            "n - r <= N - R"
        } else {
            return Ok(());
        };
        Err(Error::InvalidCounts {
            r,
            big_r,
            n,
            big_n,
            bound,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogBase {
    #[default]
    #[serde(rename = "e")]
    Natural,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "10")]
    Ten,
}

impl LogBase {
    fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Two => x.log2(),
            LogBase::Ten => x.log10(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LogBase::Natural => "e",
            LogBase::Two => "2",
            LogBase::Ten => "10",
        }
    }
}

impl FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "e" | "ln" | "natural" => Ok(LogBase::Natural),
            "2" => Ok(LogBase::Two),
            "10" => Ok(LogBase::Ten),
            other => Err(Error::Config(format!("unknown log base `{other}` (expected e, 2 or 10)"))),
        }
    }
}

/// Smoothed RSJ weight in natural log.
pub fn rsj_weight(counts: &ContingencyCounts) -> Result<f64> {
    rsj_weight_in(counts, LogBase::Natural)
}

pub fn rsj_weight_in(counts: &ContingencyCounts, base: LogBase) -> Result<f64> {
    counts.validate()?;
    let r = counts.r as f64;
    let big_r = counts.big_r as f64;
    let n = counts.n as f64;
    let big_n = counts.big_n as f64;
    let numerator = (r + 0.5) * (big_n - n - big_r + r + 0.5);
    let denominator = (big_r - r + 0.5) * (n - r + 0.5);
    Ok(base.log(numerator / denominator))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TermWeight {
    pub weight: f64,
    pub counts: ContingencyCounts,
}

pub type TermWeights = BTreeMap<Term, TermWeight>;

/// Distinct analyzed terms of a query.
pub fn query_terms(text: &str) -> BTreeSet<Term> {
    analyze(text).into_iter().collect()
}

/// Weights every query term against an arbitrary document set.
fn weights_for_set(
    query_terms: &BTreeSet<Term>,
    docs: &[&str],
    stats: &CorpusStats,
    index: &DocTermIndex,
    base: LogBase,
) -> Result<TermWeights> {
    if let Some(missing) = docs.iter().find(|d| !index.has_doc(d)) {
        return Err(Error::UnknownDocument {
            doc_id: (*missing).to_owned(),
        });
    }
    let big_r = docs.len() as u64;
    query_terms
        .iter()
        .map(|term| {
            let r = docs
                .iter()
                .filter(|d| index.contains(d, term.as_str()) == Some(true))
                .count() as u64;
            let counts = ContingencyCounts::new(r, big_r, stats.df(term.as_str()), stats.num_docs);
            let weight = rsj_weight_in(&counts, base)?;
            Ok((term.clone(), TermWeight { weight, counts }))
        })
        .collect()
}

/// User-relevance weights, with the judged relevant documents as the set.
pub fn user_rsj(
    query_id: &str,
    query_terms: &BTreeSet<Term>,
    relevant: &BTreeSet<String>,
    stats: &CorpusStats,
    index: &DocTermIndex,
    base: LogBase,
) -> Result<TermWeights> {
    if relevant.is_empty() {
        return Err(Error::NoRelevantDocuments(query_id.to_owned()));
    }
    let docs: Vec<&str> = relevant.iter().map(String::as_str).collect();
    weights_for_set(query_terms, &docs, stats, index, base)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemWeights {
    pub weights: TermWeights,
    /// `min(K, ranked list length)`.
    pub effective_k: usize,
}

/// System-relevance weights, with the first `k` retrieved documents as the set.
pub fn system_rsj(
    query_id: &str,
    query_terms: &BTreeSet<Term>,
    run: &Run,
    k: usize,
    stats: &CorpusStats,
    index: &DocTermIndex,
    base: LogBase,
) -> Result<SystemWeights> {
    let top = run
        .top_k(query_id, k)
        .ok_or_else(|| Error::QueryNotInRun(query_id.to_owned()))?;
    let weights = weights_for_set(query_terms, &top, stats, index, base)?;
    Ok(SystemWeights {
        weights,
        effective_k: top.len(),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordFlags {
    /// The term occurs in no document of the collection.
    pub oov_collection: bool,
}

impl RecordFlags {
    fn render(&self) -> &'static str {
        if self.oov_collection {
            "oov_collection"
        } else {
            ""
        }
    }

    fn parse(s: &str) -> std::result::Result<Self, String> {
        let mut flags = RecordFlags::default();
        for f in s.split(';').filter(|f| !f.is_empty()) {
            match f {
                "oov_collection" => flags.oov_collection = true,
                other => return Err(format!("unknown flag `{other}`")),
            }
        }
        Ok(flags)
    }
}

/// One (query, term) comparison of user and system weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RsjRecord {
    pub query_id: String,
    pub term: Term,
    pub rsj_u: f64,
    pub rsj_s: f64,
    /// `rsj_s - rsj_u`; positive when the system over-retrieves the term.
    pub delta: f64,
    pub counts_u: ContingencyCounts,
    pub counts_s: ContingencyCounts,
    pub flags: RecordFlags,
}

pub fn delta_rsj(query_id: &str, user: &TermWeights, system: &TermWeights) -> Result<Vec<RsjRecord>> {
    let missing: Vec<String> = user
        .keys()
        .filter(|t| !system.contains_key(*t))
        .chain(system.keys().filter(|t| !user.contains_key(*t)))
        .map(Term::to_string)
        .collect();
    if !missing.is_empty() {
        return Err(Error::TermDomainMismatch {
            query_id: query_id.to_owned(),
            missing,
        });
    }
    Ok(user
        .iter()
        .map(|(term, u)| {
            let s = &system[term];
            RsjRecord {
                query_id: query_id.to_owned(),
                term: term.clone(),
                rsj_u: u.weight,
                rsj_s: s.weight,
                delta: s.weight - u.weight,
                counts_u: u.counts,
                counts_s: s.counts,
                flags: RecordFlags {
                    oov_collection: u.counts.n == 0,
                },
            }
        })
        .collect())
}

/// Inputs shared by every query of a run.
pub struct RsjInputs<'a> {
    pub queries: &'a QuerySet,
    pub relevant: &'a BTreeMap<String, BTreeSet<String>>,
    pub stats: &'a CorpusStats,
    pub index: &'a DocTermIndex,
    pub k: usize,
    pub base: LogBase,
}

/// Records for every judged query of `run`, sorted by query id then term,
/// together with diagnostics for skipped queries.
///
/// Judged queries without a relevant document or without query text are
/// skipped; a judged query absent from the run is an error.
pub fn run_records(inputs: &RsjInputs<'_>, run: &Run) -> Result<(Vec<RsjRecord>, Vec<String>)> {
    let mut diagnostics = Vec::new();
    let mut work = Vec::new();
    for (qid, relevant) in inputs.relevant {
        let Some(text) = inputs.queries.get(qid) else {
            diagnostics.push(format!("query `{qid}` has judgments but no query text; skipped"));
            continue;
        };
        if relevant.is_empty() {
            diagnostics.push(format!("query `{qid}` has no relevant documents; skipped"));
            continue;
        }
        if !run.queries.contains_key(qid) {
            return Err(Error::QueryNotInRun(qid.clone()));
        }
        work.push((qid, text, relevant));
    }

    let per_query: Vec<Result<(Vec<RsjRecord>, Option<String>)>> = work
        .par_iter()
        .map(|(qid, text, relevant)| {
            let terms = query_terms(text);
            let user = user_rsj(qid, &terms, relevant, inputs.stats, inputs.index, inputs.base)?;
            let system = system_rsj(qid, &terms, run, inputs.k, inputs.stats, inputs.index, inputs.base)?;
            let note = (system.effective_k < inputs.k).then(|| {
                format!(
                    "query `{qid}`: ranked list shorter than K={}, using {}",
                    inputs.k, system.effective_k
                )
            });
            Ok((delta_rsj(qid, &user, &system.weights)?, note))
        })
        .collect();

    let mut records = Vec::new();
    for result in per_query {
        let (mut recs, note) = result?;
        records.append(&mut recs);
        diagnostics.extend(note);
    }
    Ok((records, diagnostics))
}

pub const RECORD_COLUMNS: [&str; 12] = [
    "query_id", "term", "rsj_u", "rsj_s", "delta", "r_u", "R_u", "r_s", "K", "n", "N", "flags",
];

pub fn write_records_csv(records: &[RsjRecord], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let internal = |e: csv::Error| Error::Internal(format!("writing record CSV: {e}"));
    w.write_record(RECORD_COLUMNS).map_err(internal)?;
    for rec in records {
        w.write_record([
            rec.query_id.clone(),
            rec.term.to_string(),
            format!("{:.6}", rec.rsj_u),
            format!("{:.6}", rec.rsj_s),
            format!("{:.6}", rec.delta),
            rec.counts_u.r.to_string(),
            rec.counts_u.big_r.to_string(),
            rec.counts_s.r.to_string(),
            rec.counts_s.big_r.to_string(),
            rec.counts_u.n.to_string(),
            rec.counts_u.big_n.to_string(),
            rec.flags.render().to_owned(),
        ])
        .map_err(internal)?;
    }
    w.flush().map_err(|e| Error::Internal(format!("writing record CSV: {e}")))
}

/// Reads records written by [`write_records_csv`]. Weights carry the six
/// decimals of the file.
pub fn read_records_csv(input: impl Read, source: &str) -> Result<Vec<RsjRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(source, 1, e.to_string()))?
        .clone();
    for (i, expected) in RECORD_COLUMNS.iter().enumerate() {
        match headers.get(i) {
            Some(h) if h == *expected => {}
            Some(h) => {
                return Err(Error::parse(
                    source,
                    1,
                    format!("column {} is `{h}`, expected `{expected}`", i + 1),
                ))
            }
            None => return Err(Error::parse(source, 1, format!("missing column `{expected}`"))),
        }
    }
    if headers.len() != RECORD_COLUMNS.len() {
        return Err(Error::parse(source, 1, format!("unexpected extra column `{}`", &headers[RECORD_COLUMNS.len()])));
    }

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(source, line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let real = |i: usize| -> Result<f64> {
            row[i].parse::<f64>().map_err(|_| {
                Error::parse(source, line, format!("column `{}`: `{}` is not a number", RECORD_COLUMNS[i], &row[i]))
            })
        };
        let count = |i: usize| -> Result<u64> {
            row[i].parse::<u64>().map_err(|_| {
                Error::parse(source, line, format!("column `{}`: `{}` is not a count", RECORD_COLUMNS[i], &row[i]))
            })
        };
        let (n, big_n) = (count(9)?, count(10)?);
        let flags = RecordFlags::parse(&row[11])
            .map_err(|m| Error::parse(source, line, format!("column `flags`: {m}")))?;
        records.push(RsjRecord {
            query_id: row[0].to_owned(),
            term: Term::new(&row[1]),
            rsj_u: real(2)?,
            rsj_s: real(3)?,
            delta: real(4)?,
            counts_u: ContingencyCounts::new(count(5)?, count(6)?, n, big_n),
            counts_s: ContingencyCounts::new(count(7)?, count(8)?, n, big_n),
            flags,
        });
    }
    Ok(records)
}

//! BM25 over an in-memory inverted index, used as the reference lexical system.

use std::collections::{BTreeSet, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus_index::{Document, IndexedCollection};
use crate::error::Result;
use crate::textproc::{analyze, StopwordSet, Term};
use crate::trec_io::{QuerySet, Run};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 0.9, b: 0.4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Posting {
    /// Position of the document in the index's sorted doc id list.
    pub doc: u32,
    pub tf: u32,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct InvertedIndex {
    /// Postings sorted by doc id.
    postings: HashMap<Term, Vec<Posting>>,
    /// Sorted ascending; postings refer to positions in this list.
    doc_ids: Vec<String>,
    doc_len: Vec<u32>,
    avg_doc_len: f64,
}

/// `ln((N - df + 0.5) / (df + 0.5) + 1)`; never negative.
pub fn idf(df: u64, num_docs: u64) -> f64 {
    let df = df as f64;
    ((num_docs as f64 - df + 0.5) / (df + 0.5) + 1.0).ln()
}

/// Saturated, length-normalized term frequency component.
pub fn tf_component(tf: u32, doc_len: u32, avg_doc_len: f64, params: Bm25Params) -> f64 {
    let tf = tf as f64;
    let norm = 1.0 - params.b + params.b * doc_len as f64 / avg_doc_len;
    tf * (params.k1 + 1.0) / (tf + params.k1 * norm)
}

impl InvertedIndex {
    pub fn build(documents: impl IntoIterator<Item = Result<Document>>, stopwords: Option<&StopwordSet>) -> Result<Self> {
        let collection = IndexedCollection::ingest(documents, "")?;
        Ok(Self::from_collection(&collection, stopwords))
    }

    /// Builds postings from an ingested collection. Stopword terms are dropped
    /// and do not count towards document length.
    pub fn from_collection(collection: &IndexedCollection, stopwords: Option<&StopwordSet>) -> Self {
        let keep: Vec<bool> = collection
            .vocab
            .iter()
            .map(|t| stopwords.is_none_or(|s| !s.contains(t)))
            .collect();
        let mut lists: Vec<Vec<Posting>> = vec![Vec::new(); collection.vocab.len()];
        let mut doc_len = Vec::with_capacity(collection.docs.len());
        for (doc, entries) in collection.docs.iter().enumerate() {
            let mut len = 0u32;
            for &(tid, tf) in entries {
                if keep[tid as usize] {
                    lists[tid as usize].push(Posting { doc: doc as u32, tf });
                    len += tf;
                }
            }
            doc_len.push(len);
        }
        let avg_doc_len = if doc_len.is_empty() {
            0.0
        } else {
            doc_len.iter().map(|&l| l as f64).sum::<f64>() / doc_len.len() as f64
        };
        let postings = collection
            .vocab
            .iter()
            .zip(lists)
            .filter(|(_, list)| !list.is_empty())
            .map(|(t, list)| (t.clone(), list))
            .collect();
        InvertedIndex {
            postings,
            doc_ids: collection.doc_ids.clone(),
            doc_len,
            avg_doc_len,
        }
    }

    pub fn num_docs(&self) -> u64 {
        self.doc_ids.len() as u64
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    pub fn doc_id(&self, doc: u32) -> &str {
        &self.doc_ids[doc as usize]
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    fn position(&self, doc_id: &str) -> Option<u32> {
        self.doc_ids
            .binary_search_by(|d| d.as_str().cmp(doc_id))
            .ok()
            .map(|p| p as u32)
    }

    pub fn doc_len(&self, doc_id: &str) -> Option<u32> {
        self.position(doc_id).map(|p| self.doc_len[p as usize])
    }

    pub fn df(&self, term: &str) -> u64 {
        self.postings(term).len() as u64
    }

    /// BM25 score of one document; `None` if the document is not indexed.
    /// Repeated query terms count once.
    pub fn score(&self, query_terms: &[Term], doc_id: &str, params: Bm25Params) -> Option<f64> {
        let doc = self.position(doc_id)?;
        let unique: BTreeSet<&Term> = query_terms.iter().collect();
        let mut score = 0.0;
        for term in unique {
            let list = self.postings(term.as_str());
            if let Ok(i) = list.binary_search_by_key(&doc, |p| p.doc) {
                let w = idf(list.len() as u64, self.num_docs());
                score += w * tf_component(list[i].tf, self.doc_len[doc as usize], self.avg_doc_len, params);
            }
        }
        Some(score)
    }

    /// Top `k` documents by descending score, ties by ascending doc id.
    /// Only positively scored documents are returned.
    pub fn retrieve(&self, query_text: &str, k: usize, params: Bm25Params) -> Vec<(String, f64)> {
        let unique: BTreeSet<Term> = analyze(query_text).into_iter().collect();
        let mut acc: HashMap<u32, f64> = HashMap::new();
        // Term-at-a-time in sorted term order, the same summation order as `score`.
        for term in &unique {
            let list = self.postings(term.as_str());
            if list.is_empty() {
                continue;
            }
            let w = idf(list.len() as u64, self.num_docs());
            for p in list {
                *acc.entry(p.doc).or_insert(0.0) +=
                    w * tf_component(p.tf, self.doc_len[p.doc as usize], self.avg_doc_len, params);
            }
        }
        let mut hits: Vec<(u32, f64)> = acc.into_iter().filter(|&(_, s)| s > 0.0).collect();
        // Doc positions follow doc id order, so comparing positions breaks ties by id.
        let by_rank = |a: &(u32, f64), b: &(u32, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
        if hits.len() > k {
            hits.select_nth_unstable_by(k, by_rank);
            hits.truncate(k);
        }
        hits.sort_unstable_by(by_rank);
        hits.into_iter()
            .map(|(doc, s)| (self.doc_ids[doc as usize].clone(), s))
            .collect()
    }

    /// Retrieves every query in parallel and assembles a run.
    pub fn retrieve_run(&self, queries: &QuerySet, k: usize, params: Bm25Params, tag: &str) -> Run {
        let lists: Vec<(String, Vec<(String, f64)>)> = queries
            .par_iter()
            .map(|(qid, text)| (qid.clone(), self.retrieve(text, k, params)))
            .filter(|(_, list)| !list.is_empty())
            .collect();
        Run::from_scored_lists(tag, lists)
    }
}

/// A term-blind control system: every query gets an independent random
/// permutation of the collection, truncated to `k`, with descending dummy scores.
pub fn random_run(queries: &QuerySet, doc_ids: &[String], k: usize, seed: u64, tag: &str) -> Run {
    let lists = queries.keys().enumerate().map(|(i, qid)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let picked: Vec<(String, f64)> = rand::seq::index::sample(&mut rng, doc_ids.len(), k.min(doc_ids.len()))
            .into_iter()
            .enumerate()
            .map(|(rank, d)| (doc_ids[d].clone(), (k - rank) as f64))
            .collect();
        (qid.clone(), picked)
    });
    Run::from_scored_lists(tag, lists)
}

//! Collection ingestion: document frequencies, per-document term sets, and the
//! on-disk collection artifact that the other commands reload.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::textproc::{analyze, Term};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub text: String,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            text: text.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CollectionFormat {
    /// `doc_id<TAB>text` per line.
    #[default]
    Tsv,
    /// BEIR corpus: `{"_id", "title", "text"}` per line.
    Jsonl,
}

#[derive(Deserialize)]
struct JsonDocument {
    #[serde(rename = "_id")]
    id: String,
    #[serde(default)]
    title: String,
    text: String,
}

/// Streams documents from a collection file.
pub fn read_documents(
    path: &Path,
    format: CollectionFormat,
) -> Result<impl Iterator<Item = Result<Document>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    let lines = BufReader::new(file).lines().enumerate();
    Ok(lines.filter_map(move |(idx, line)| {
        let lineno = idx + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some(Err(Error::parse(&name, lineno, e.to_string()))),
        };
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            return None;
        }
        Some(parse_document(line, format).map_err(|m| Error::parse(&name, lineno, m)))
    }))
}

fn parse_document(line: &str, format: CollectionFormat) -> std::result::Result<Document, String> {
    match format {
        CollectionFormat::Tsv => {
            let (id, text) = line
                .split_once('\t')
                .ok_or("missing tab between document id and text")?;
            Ok(Document::new(id, text))
        }
        CollectionFormat::Jsonl => {
            let d: JsonDocument = serde_json::from_str(line).map_err(|e| e.to_string())?;
            Ok(Document::new(d.id, format!("{} {}", d.title, d.text)))
        }
    }
}

/// Collection size and document frequencies of stemmed terms.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub collection_id: String,
    pub num_docs: u64,
    /// Only terms with at least one containing document are present.
    pub doc_freq: HashMap<Term, u64>,
}

impl CorpusStats {
    pub fn df(&self, term: &str) -> u64 {
        self.doc_freq.get(term).copied().unwrap_or(0)
    }

    /// Fraction of documents containing `term`.
    pub fn relative_df(&self, term: &str) -> Result<f64> {
        if self.num_docs == 0 {
            return Err(Error::EmptyCollection(self.collection_id.clone()));
        }
        Ok(self.df(term) as f64 / self.num_docs as f64)
    }
}

/// Which stemmed terms occur in which documents.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DocTermIndex {
    vocab: Vec<Term>,
    term_ids: HashMap<Term, u32>,
    doc_ids: Vec<String>,
    doc_pos: HashMap<String, u32>,
    /// Sorted term ids per document, parallel to `doc_ids`.
    doc_terms: Vec<Box<[u32]>>,
}

impl DocTermIndex {
    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn has_doc(&self, doc_id: &str) -> bool {
        self.doc_pos.contains_key(doc_id)
    }

    /// `None` when the document is not indexed.
    pub fn contains(&self, doc_id: &str, term: &str) -> Option<bool> {
        let pos = *self.doc_pos.get(doc_id)? as usize;
        let Some(&tid) = self.term_ids.get(term) else {
            return Some(false);
        };
        Some(self.doc_terms[pos].binary_search(&tid).is_ok())
    }

    /// Terms of a document in sorted order.
    pub fn terms(&self, doc_id: &str) -> Option<impl Iterator<Item = &Term> + '_> {
        let pos = *self.doc_pos.get(doc_id)? as usize;
        Some(self.doc_terms[pos].iter().map(|&t| &self.vocab[t as usize]))
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.doc_ids.iter().map(String::as_str)
    }
}

/// A tokenized collection with per-document term frequencies; the persisted
/// form of `index`. Both the RSJ statistics and the BM25 index derive from it.
///
/// Vocabulary and documents are kept in sorted order, so the structure is
/// identical whatever the order documents were ingested in.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IndexedCollection {
    pub(crate) collection_id: String,
    pub(crate) vocab: Vec<Term>,
    pub(crate) doc_ids: Vec<String>,
    /// `(term id, term frequency)` sorted by term id, parallel to `doc_ids`.
    pub(crate) docs: Vec<Vec<(u32, u32)>>,
}

const INGEST_BATCH: usize = 8192;
const ARTIFACT_MAGIC: &str = "lexmatch-collection";
const ARTIFACT_VERSION: u32 = 1;

fn term_counts(text: &str) -> BTreeMap<Term, u32> {
    let mut counts = BTreeMap::new();
    for term in analyze(text) {
        *counts.entry(term).or_insert(0) += 1;
    }
    counts
}

impl IndexedCollection {
    /// Analyzes a document stream in parallel batches.
    pub fn ingest(
        documents: impl IntoIterator<Item = Result<Document>>,
        collection_id: impl Into<String>,
    ) -> Result<Self> {
        let mut term_ids: HashMap<Term, u32> = HashMap::new();
        let mut vocab: Vec<Term> = Vec::new();
        let mut seen: HashSet<String> = HashSet::new();
        let mut doc_ids = Vec::new();
        let mut docs = Vec::new();

        let mut batch = Vec::with_capacity(INGEST_BATCH);
        let mut iter = documents.into_iter();
        loop {
            batch.clear();
            for doc in iter.by_ref().take(INGEST_BATCH) {
                batch.push(doc?);
            }
            if batch.is_empty() {
                break;
            }
            let analyzed: Vec<BTreeMap<Term, u32>> =
                batch.par_iter().map(|d| term_counts(&d.text)).collect();
            for (doc, counts) in batch.drain(..).zip(analyzed) {
                if !seen.insert(doc.id.clone()) {
                    return Err(Error::DuplicateDocument(doc.id));
                }
                let entries = counts
                    .into_iter()
                    .map(|(term, tf)| {
                        let id = *term_ids.entry(term).or_insert_with_key(|t| {
                            vocab.push(t.clone());
                            vocab.len() as u32 - 1
                        });
                        (id, tf)
                    })
                    .collect();
                doc_ids.push(doc.id);
                docs.push(entries);
            }
        }

        let mut collection = IndexedCollection {
            collection_id: collection_id.into(),
            vocab,
            doc_ids,
            docs,
        };
        collection.canonicalize();
        Ok(collection)
    }

    /// Sorts the vocabulary and documents and remaps term ids accordingly.
    fn canonicalize(&mut self) {
        let mut order: Vec<u32> = (0..self.vocab.len() as u32).collect();
        order.sort_by(|&a, &b| self.vocab[a as usize].cmp(&self.vocab[b as usize]));
        let mut remap = vec![0u32; order.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old as usize] = new as u32;
        }
        let mut vocab: Vec<Option<Term>> = std::mem::take(&mut self.vocab).into_iter().map(Some).collect();
        self.vocab = order.iter().map(|&old| vocab[old as usize].take().expect("permutation")).collect();

        let mut pairs: Vec<(String, Vec<(u32, u32)>)> = std::mem::take(&mut self.doc_ids)
            .into_iter()
            .zip(std::mem::take(&mut self.docs))
            .collect();
        pairs.par_iter_mut().for_each(|(_, entries)| {
            for e in entries.iter_mut() {
                e.0 = remap[e.0 as usize];
            }
            entries.sort_unstable();
        });
        pairs.par_sort_unstable_by(|a, b| a.0.cmp(&b.0));
        (self.doc_ids, self.docs) = pairs.into_iter().unzip();
    }

    pub fn collection_id(&self) -> &str {
        &self.collection_id
    }

    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn vocabulary(&self) -> &[Term] {
        &self.vocab
    }

    pub fn corpus_stats(&self) -> CorpusStats {
        let mut df = vec![0u64; self.vocab.len()];
        for entries in &self.docs {
            for &(tid, _) in entries {
                df[tid as usize] += 1;
            }
        }
        let doc_freq = self
            .vocab
            .iter()
            .zip(df)
            .filter(|(_, n)| *n > 0)
            .map(|(t, n)| (t.clone(), n))
            .collect();
        CorpusStats {
            collection_id: self.collection_id.clone(),
            num_docs: self.doc_ids.len() as u64,
            doc_freq,
        }
    }

    pub fn doc_term_index(&self) -> DocTermIndex {
        DocTermIndex {
            vocab: self.vocab.clone(),
            term_ids: self
                .vocab
                .iter()
                .enumerate()
                .map(|(i, t)| (t.clone(), i as u32))
                .collect(),
            doc_ids: self.doc_ids.clone(),
            doc_pos: self
                .doc_ids
                .iter()
                .enumerate()
                .map(|(i, d)| (d.clone(), i as u32))
                .collect(),
            doc_terms: self
                .docs
                .iter()
                .map(|entries| entries.iter().map(|&(t, _)| t).collect())
                .collect(),
        }
    }

    /// Writes the versioned line-oriented artifact:
    /// a header, one term per line, then `doc_id<TAB>tid:tf tid:tf ...` per document.
    pub fn write(&self, mut out: impl Write) -> std::io::Result<()> {
        let invalid = |what: String| std::io::Error::new(std::io::ErrorKind::InvalidInput, what);
        if self.collection_id.contains(['\t', '\n', '\r']) {
            return Err(invalid(format!("collection id `{}` contains a tab or newline", self.collection_id)));
        }
        writeln!(out, "{ARTIFACT_MAGIC}\t{ARTIFACT_VERSION}")?;
        writeln!(out, "collection_id\t{}", self.collection_id)?;
        writeln!(out, "num_terms\t{}", self.vocab.len())?;
        writeln!(out, "num_docs\t{}", self.doc_ids.len())?;
        for term in &self.vocab {
            writeln!(out, "{term}")?;
        }
        for (id, entries) in self.doc_ids.iter().zip(&self.docs) {
            if id.is_empty() || id.contains(['\t', '\n', '\r']) {
                return Err(invalid(format!("document id `{id}` cannot be stored")));
            }
            write!(out, "{id}\t")?;
            for (i, (tid, tf)) in entries.iter().enumerate() {
                if i > 0 {
                    out.write_all(b" ")?;
                }
                write!(out, "{tid}:{tf}")?;
            }
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(file), &path.display().to_string())
    }

    pub fn read(reader: impl BufRead, source: &str) -> Result<Self> {
        let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((n, Ok(l))) => Ok((n, l)),
                Some((n, Err(e))) => Err(Error::parse(source, n, e.to_string())),
                None => Err(Error::parse(source, 0, format!("unexpected end of file, expected {what}"))),
            }
        };
        let header = |line: (usize, String), key: &str| -> Result<String> {
            let (n, l) = line;
            match l.split_once('\t') {
                Some((k, v)) if k == key => Ok(v.to_owned()),
                _ => Err(Error::parse(source, n, format!("expected `{key}` header"))),
            }
        };
        let count = |line: (usize, String), key: &str| -> Result<usize> {
            let n = line.0;
            header(line, key)?
                .parse()
                .map_err(|_| Error::parse(source, n, format!("`{key}` is not a count")))
        };

        let version = header(next("header")?, ARTIFACT_MAGIC)?;
        if version != ARTIFACT_VERSION.to_string() {
            return Err(Error::parse(source, 1, format!("unsupported artifact version {version}")));
        }
        let collection_id = header(next("collection id")?, "collection_id")?;
        let num_terms = count(next("term count")?, "num_terms")?;
        let num_docs = count(next("document count")?, "num_docs")?;

        let mut vocab = Vec::with_capacity(num_terms);
        for _ in 0..num_terms {
            let (n, term) = next("term")?;
            if term.is_empty() || vocab.last().is_some_and(|prev: &Term| prev.as_str() >= term.as_str()) {
                return Err(Error::parse(source, n, "terms must be non-empty and strictly sorted"));
            }
            vocab.push(Term::new(term));
        }
        let mut doc_ids: Vec<String> = Vec::with_capacity(num_docs);
        let mut docs = Vec::with_capacity(num_docs);
        for _ in 0..num_docs {
            let (n, line) = next("document")?;
            let (id, rest) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(source, n, "missing tab after document id"))?;
            if doc_ids.last().is_some_and(|prev| prev.as_str() >= id) {
                return Err(Error::parse(source, n, "document ids must be strictly sorted"));
            }
            let mut entries: Vec<(u32, u32)> = Vec::new();
            for field in rest.split(' ').filter(|f| !f.is_empty()) {
                let parsed = field
                    .split_once(':')
                    .and_then(|(t, f)| Some((t.parse::<u32>().ok()?, f.parse::<u32>().ok()?)));
                match parsed {
                    Some((tid, tf))
                        if (tid as usize) < num_terms
                            && tf > 0
                            && entries.last().is_none_or(|&(prev, _)| prev < tid) =>
                    {
                        entries.push((tid, tf))
                    }
                    _ => return Err(Error::parse(source, n, format!("invalid posting `{field}`"))),
                }
            }
            doc_ids.push(id.to_owned());
            docs.push(entries);
        }
        if let Some((n, Ok(extra))) = lines.next() {
            if !extra.trim().is_empty() {
                return Err(Error::parse(source, n, "trailing data after last document"));
            }
        }
        Ok(IndexedCollection {
            collection_id,
            vocab,
            doc_ids,
            docs,
        })
    }
}

/// Ingests `documents` and derives the RSJ statistics in one pass.
pub fn build_corpus_stats(
    documents: impl IntoIterator<Item = Result<Document>>,
    collection_id: impl Into<String>,
) -> Result<(CorpusStats, DocTermIndex)> {
    let collection = IndexedCollection::ingest(documents, collection_id)?;
    Ok((collection.corpus_stats(), collection.doc_term_index()))
}

//! Acceptance suite: one PASS/FAIL/SKIP line per criterion.
//!
//! Run with `cargo test --release --test acceptance`. Exits non-zero when a
//! criterion fails.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use lexmatch::analysis::{ndcg_at_k, welch_t_test, BinSpec, Gain};
use lexmatch::bm25::{idf, random_run, tf_component, Bm25Params, InvertedIndex};
use lexmatch::corpus_index::{read_documents, CollectionFormat, Document, IndexedCollection};
use lexmatch::rsj::{
    rsj_weight, run_records, system_rsj, user_rsj, ContingencyCounts, LogBase, RsjInputs, RsjRecord,
    DEFAULT_TOP_K,
};
use lexmatch::textproc::{stem, Term};
use lexmatch::trec_io::{
    binarize, parse_beir_qrels, parse_qrels, parse_queries_jsonl, parse_queries_tsv, parse_run, read_qrels,
    read_queries, write_run, QrelsFormat, QueryFormat, Qrels, QuerySet, Run, RunOrdering,
};
use lexmatch::Error;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RSJ_REL_TOL: f64 = 1e-12;
const RSJ_TIME_LIMIT: Duration = Duration::from_secs(10);
const CLOSED_LOOP_TIME_LIMIT: Duration = Duration::from_secs(60);
const WELCH_TOL: f64 = 1e-3;
const NDCG_TOL: f64 = 1e-9;
const BM25_REL_TOL: f64 = 1e-12;
const FIQA_DELTA_RANGE: (f64, f64) = (0.0, 2.0);

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

use Outcome::{Fail, Pass, Skip};

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

/// Random corpus of `w<i>` words; the analyzer leaves these tokens untouched.
fn random_corpus(rng: &mut ChaCha8Rng, num_docs: usize, vocab: usize, max_len: usize) -> Vec<(String, Vec<String>)> {
    (0..num_docs)
        .map(|d| {
            let len = rng.random_range(1..=max_len);
            let words = (0..len).map(|_| format!("w{}", rng.random_range(0..vocab))).collect();
            (format!("d{d:04}"), words)
        })
        .collect()
}

fn ingest(corpus: &[(String, Vec<String>)]) -> IndexedCollection {
    let docs = corpus.iter().map(|(id, words)| Ok(Document::new(id.clone(), words.join(" "))));
    IndexedCollection::ingest(docs, "synthetic").expect("ingest")
}

fn oracle_weight(r: u64, big_r: u64, n: u64, big_n: u64) -> f64 {
    let (r, big_r, n, big_n) = (r as f64, big_r as f64, n as f64, big_n as f64);
    ((r + 0.5) * (big_n - n - big_r + r + 0.5) / ((big_r - r + 0.5) * (n - r + 0.5))).ln()
}

/// Brute-force weight of `term` against `set` by scanning raw word lists.
fn oracle_set_weight(corpus: &[(String, Vec<String>)], set: &[&str], term: &str) -> f64 {
    let has = |words: &Vec<String>| words.iter().any(|w| w == term);
    let n = corpus.iter().filter(|(_, w)| has(w)).count() as u64;
    let r = corpus.iter().filter(|(id, w)| set.contains(&id.as_str()) && has(w)).count() as u64;
    oracle_weight(r, set.len() as u64, n, corpus.len() as u64)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * b.abs()
}

fn rsj_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut compared = 0usize;
    let mut worst = 0f64;
    for case in 0..200 {
        let num_docs = rng.random_range(1..=100);
        let vocab = rng.random_range(1..=50);
        let corpus = random_corpus(&mut rng, num_docs, vocab, 12);
        let coll = ingest(&corpus);
        let (stats, index) = (coll.corpus_stats(), coll.doc_term_index());
        let ids: Vec<&str> = corpus.iter().map(|(id, _)| id.as_str()).collect();

        let mut words: Vec<String> = (0..rng.random_range(1..=5))
            .map(|_| format!("w{}", rng.random_range(0..vocab + 5)))
            .collect();
        words.sort();
        words.dedup();
        let terms: BTreeSet<Term> = words.iter().map(|w| Term::from(w.as_str())).collect();

        let size = rng.random_range(1..=num_docs);
        let relevant: BTreeSet<String> = ids
            .choose_multiple(&mut rng, size)
            .map(|s| s.to_string())
            .collect();
        let mut ranked: Vec<&str> = ids.clone();
        ranked.shuffle(&mut rng);
        ranked.truncate(rng.random_range(1..=num_docs));
        let run = Run::from_scored_lists(
            "r",
            [("q".to_owned(), ranked.iter().enumerate().map(|(i, d)| (d.to_string(), -(i as f64))).collect())],
        );
        let k = rng.random_range(1..=120);

        let user = match user_rsj("q", &terms, &relevant, &stats, &index, LogBase::Natural) {
            Ok(u) => u,
            Err(e) => return Fail(format!("case {case}: {e}")),
        };
        let system = match system_rsj("q", &terms, &run, k, &stats, &index, LogBase::Natural) {
            Ok(s) => s,
            Err(e) => return Fail(format!("case {case}: {e}")),
        };
        let rel_vec: Vec<&str> = relevant.iter().map(String::as_str).collect();
        let top: Vec<&str> = ranked.iter().take(k).copied().collect();
        for w in &words {
            let expected_u = oracle_set_weight(&corpus, &rel_vec, w);
            let expected_s = oracle_set_weight(&corpus, &top, w);
            let got_u = user[w.as_str()].weight;
            let got_s = system.weights[w.as_str()].weight;
            for (got, exp) in [(got_u, expected_u), (got_s, expected_s)] {
                if !close(got, exp, RSJ_REL_TOL) {
                    return Fail(format!("case {case}, term {w}: {got} vs oracle {exp}"));
                }
                if exp != 0.0 {
                    worst = worst.max((got - exp).abs() / exp.abs());
                }
                compared += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        elapsed < RSJ_TIME_LIMIT,
        format!("{compared} weights, max rel err {worst:.1e}, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn identity_invariant() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut records = 0usize;
    for case in 0..100 {
        let num_docs = rng.random_range(2..=80);
        let vocab = rng.random_range(2..=40);
        let corpus = random_corpus(&mut rng, num_docs, vocab, 10);
        let coll = ingest(&corpus);
        let (stats, index) = (coll.corpus_stats(), coll.doc_term_index());
        let ids: Vec<String> = corpus.iter().map(|(id, _)| id.clone()).collect();

        let mut queries = QuerySet::new();
        let mut relevant = BTreeMap::new();
        let mut lists = Vec::new();
        for q in 0..rng.random_range(1..=4) {
            let qid = format!("q{q}");
            let text: Vec<String> = (0..rng.random_range(1..=4)).map(|_| format!("w{}", rng.random_range(0..vocab))).collect();
            queries.insert(qid.clone(), text.join(" "));
            let size = rng.random_range(1..=num_docs);
            let rel: BTreeSet<String> = ids.choose_multiple(&mut rng, size).cloned().collect();
            let mut head: Vec<String> = rel.iter().cloned().collect();
            head.shuffle(&mut rng);
            let tail = ids.iter().filter(|d| !rel.contains(*d)).cloned();
            let ranking: Vec<(String, f64)> =
                head.into_iter().chain(tail).enumerate().map(|(i, d)| (d, -(i as f64))).collect();
            lists.push((qid.clone(), ranking));
            relevant.insert(qid, rel);
        }
        let run = Run::from_scored_lists("r", lists);
        for (qid, rel) in &relevant {
            let inputs = RsjInputs {
                queries: &queries,
                relevant: &BTreeMap::from([(qid.clone(), rel.clone())]),
                stats: &stats,
                index: &index,
                k: rel.len(),
                base: LogBase::Natural,
            };
            let (recs, _) = match run_records(&inputs, &run) {
                Ok(r) => r,
                Err(e) => return Fail(format!("case {case}: {e}")),
            };
            if let Some(bad) = recs.iter().find(|r| r.delta != 0.0) {
                return Fail(format!("case {case}: {}/{} has delta {}", bad.query_id, bad.term, bad.delta));
            }
            records += recs.len();
        }
    }
    Pass(format!("100 cases, {records} records, all deltas exactly 0"))
}

fn monotonicity() -> Outcome {
    let (mut pairs, mut violations) = (0u64, 0u64);
    for big_n in 1..=30u64 {
        for big_r in 0..=big_n {
            for n in 0..=big_n {
                let lo = (n + big_r).saturating_sub(big_n);
                let hi = big_r.min(n);
                for r in lo..hi {
                    let a = rsj_weight(&ContingencyCounts::new(r, big_r, n, big_n));
                    let b = rsj_weight(&ContingencyCounts::new(r + 1, big_r, n, big_n));
                    match (a, b) {
                        (Ok(a), Ok(b)) if b > a => {}
                        _ => violations += 1,
                    }
                    pairs += 1;
                }
            }
        }
    }
    check(violations == 0, format!("{pairs} adjacent pairs, {violations} violations"))
}

fn top_bin_mean(records: &[RsjRecord]) -> Option<f64> {
    let top = BinSpec::default().intervals().last()?;
    let deltas: Vec<f64> = records.iter().filter(|r| top.contains(r.rsj_u)).map(|r| r.delta).collect();
    (!deltas.is_empty()).then(|| deltas.iter().sum::<f64>() / deltas.len() as f64)
}

/// 1000 documents over a Zipf-like background vocabulary; every query owns a
/// rare term planted only in its 10 relevant documents.
fn closed_loop() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (num_docs, background, num_queries, per_query) = (1000usize, 300usize, 40usize, 10usize);
    let weights: Vec<f64> = (1..=background).map(|i| 1.0 / i as f64).collect();
    let total: f64 = weights.iter().sum();
    let draw = |rng: &mut ChaCha8Rng| {
        let mut x = rng.random::<f64>() * total;
        for (i, w) in weights.iter().enumerate() {
            x -= w;
            if x <= 0.0 {
                return format!("bg{i}");
            }
        }
        format!("bg{}", background - 1)
    };
    let mut texts: Vec<Vec<String>> = (0..num_docs)
        .map(|_| (0..rng.random_range(20..60)).map(|_| draw(&mut rng)).collect())
        .collect();
    let ids: Vec<String> = (0..num_docs).map(|d| format!("doc{d:04}")).collect();
    let mut queries = QuerySet::new();
    let mut relevant = BTreeMap::new();
    for q in 0..num_queries {
        let planted = format!("planted{q}");
        let rel: BTreeSet<usize> = rand::seq::index::sample(&mut rng, num_docs, per_query).into_iter().collect();
        for &d in &rel {
            texts[d].push(planted.clone());
        }
        let qid = format!("q{q:02}");
        queries.insert(qid.clone(), format!("{planted} {} {}", draw(&mut rng), draw(&mut rng)));
        relevant.insert(qid, rel.into_iter().map(|d| ids[d].clone()).collect::<BTreeSet<_>>());
    }
    let docs = ids.iter().zip(&texts).map(|(id, t)| Ok(Document::new(id.clone(), t.join(" "))));
    let coll = IndexedCollection::ingest(docs, "closed-loop").expect("ingest");
    let (stats, index) = (coll.corpus_stats(), coll.doc_term_index());

    let bm25 = InvertedIndex::from_collection(&coll, None).retrieve_run(&queries, 1000, Bm25Params::default(), "bm25");
    let random = random_run(&queries, &ids, 1000, 17, "random");
    let inputs = RsjInputs {
        queries: &queries,
        relevant: &relevant,
        stats: &stats,
        index: &index,
        k: DEFAULT_TOP_K,
        base: LogBase::Natural,
    };
    let means = [&bm25, &random].map(|run| run_records(&inputs, run).ok().and_then(|(recs, _)| top_bin_mean(&recs)));
    let elapsed = start.elapsed();
    match means {
        [Some(b), Some(r)] => check(
            b > r && r < 0.0 && elapsed < CLOSED_LOOP_TIME_LIMIT,
            format!("top-bin mean delta: bm25 {b:.4}, random {r:.4}, {:.2}s", elapsed.as_secs_f64()),
        ),
        _ => Fail("top bin empty or RSJ computation failed".into()),
    }
}

fn porter_conformance() -> Outcome {
    let read = |name: &str| fs::read_to_string(data_dir().join(name)).expect("vendored vocabulary");
    let (voc, expected) = (read("porter_voc.txt"), read("porter_output.txt"));
    let (mut total, mut mismatches) = (0usize, Vec::new());
    for (word, exp) in voc.lines().zip(expected.lines()) {
        total += 1;
        let got = stem(word);
        if got.as_str() != exp {
            mismatches.push(format!("{word}→{got} (want {exp})"));
        }
    }
    if voc.lines().count() != expected.lines().count() {
        return Fail("vocabulary and output differ in length".into());
    }
    check(
        mismatches.is_empty(),
        format!("{}/{total} words match{}", total - mismatches.len(), mismatches.first().map(|m| format!("; first: {m}")).unwrap_or_default()),
    )
}

fn welch() -> Outcome {
    // scipy.stats.ttest_ind(equal_var=False): p = 0.34659350708733416
    let a = [1.0, 2.0, 3.0, 4.0, 5.0];
    let b = [2.0, 3.0, 4.0, 5.0, 6.0];
    let Ok(t) = welch_t_test(&a, &b) else {
        return Fail("test undefined".into());
    };
    let derived = (t.t + 1.0).abs() < WELCH_TOL && (t.df - 8.0).abs() < WELCH_TOL && (t.p - 0.346_593_507_087_334_2).abs() < WELCH_TOL;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut symmetric = true;
    let mut identical = true;
    for _ in 0..100 {
        let x: Vec<f64> = (0..rng.random_range(2..20)).map(|_| rng.random_range(-5.0..5.0)).collect();
        let y: Vec<f64> = (0..rng.random_range(2..20)).map(|_| rng.random_range(-5.0..5.0)).collect();
        match (welch_t_test(&x, &y), welch_t_test(&y, &x)) {
            (Ok(xy), Ok(yx)) => symmetric &= xy.t == -yx.t && (xy.p - yx.p).abs() < 1e-12 && xy.df == yx.df,
            _ => symmetric = false,
        }
        match welch_t_test(&x, &x) {
            Ok(same) => identical &= same.t == 0.0 && (same.p - 1.0).abs() < 1e-12,
            Err(_) => identical = false,
        }
    }
    check(
        derived && symmetric && identical,
        format!("t={:.6} df={:.6} p={:.6}; symmetry {symmetric}; identical samples {identical}", t.t, t.df, t.p),
    )
}

fn ndcg_cases() -> Outcome {
    fn case(grades: &[(&str, u32)], ranking: &[&str], expected: f64) -> (Qrels, Run, f64) {
        let mut qrels = Qrels::default();
        for (d, g) in grades {
            qrels.insert("q", d, *g);
        }
        let list = ranking.iter().enumerate().map(|(i, d)| (d.to_string(), -(i as f64))).collect();
        (qrels, Run::from_scored_lists("r", [("q".to_owned(), list)]), expected)
    }
    let eleven: Vec<String> = (0..10).map(|i| format!("x{i}")).chain(["a".to_owned()]).collect();
    let ten: Vec<String> = (0..9).map(|i| format!("x{i}")).chain(["a".to_owned()]).collect();
    let twelve: Vec<String> = (0..12).map(|i| format!("r{i}")).collect();
    let twelve_grades: Vec<(&str, u32)> = twelve.iter().map(|d| (d.as_str(), 1)).collect();
    fn refs(v: &[String]) -> Vec<&str> {
        v.iter().map(String::as_str).collect()
    }
    // Reference values computed independently: sum(g_i / log2(i + 1)) / ideal.
    let cases = [
        case(&[("a", 1)], &["x", "a"], 0.6309297535714575),
        case(&[("a", 1)], &["a"], 1.0),
        case(&[("a", 2), ("b", 1)], &["b", "a"], 0.8597186998521972),
        case(&[("a", 3), ("b", 2), ("c", 1)], &["c", "x", "b", "y", "a"], 0.6637235762547601),
        case(&[("a", 1), ("b", 1)], &["x", "y", "z"], 0.0),
        case(&[("a", 1)], &refs(&eleven), 0.0),
        case(&twelve_grades, &refs(&twelve), 1.0),
        case(&[("a", 2), ("b", 0), ("c", 1)], &["b", "c", "a"], 0.6199062332840657),
        case(&[("a", 1), ("b", 2), ("c", 3), ("d", 1)], &["d", "c", "x", "a", "b"], 0.7890501638886874),
        case(&[("a", 1)], &refs(&ten), 0.2890648263178879),
    ];
    let mut worst = 0f64;
    for (i, (qrels, run, expected)) in cases.iter().enumerate() {
        let Some(&got) = ndcg_at_k(run, qrels, 10, Gain::Linear).per_query.get("q") else {
            return Fail(format!("case {}: no value", i + 1));
        };
        worst = worst.max((got - expected).abs());
        if (got - expected).abs() > NDCG_TOL {
            return Fail(format!("case {}: {got} vs {expected}", i + 1));
        }
    }
    Pass(format!("10 rankings, max abs err {worst:.1e}"))
}

fn line_of(err: Error) -> Option<usize> {
    match err {
        Error::Parse { line, .. } => Some(line),
        _ => None,
    }
}

fn parser_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..1000 {
        let tag = format!("sys{}", rng.random_range(0..100));
        let lists = (0..rng.random_range(0..6)).map(|q| {
            let len = rng.random_range(1..30);
            let mut scores: Vec<f64> = (0..len)
                .map(|_| if rng.random_bool(0.2) { 1.5 } else { rng.random_range(-1e6..1e6) })
                .collect();
            scores.sort_by(|a, b| b.total_cmp(a));
            let docs = scores.into_iter().enumerate().map(|(d, s)| (format!("D{q}-{d}"), s)).collect();
            (format!("Q{q}"), docs)
        });
        let run = Run::from_scored_lists(tag, lists.collect::<Vec<_>>());
        let mut buf = Vec::new();
        write_run(&run, &mut buf).expect("write");
        match parse_run(Cursor::new(&buf), "rt", RunOrdering::Strict) {
            Ok(back) if back.queries == run.queries => {}
            Ok(_) => return Fail(format!("run {i} changed on round trip")),
            Err(e) => return Fail(format!("run {i}: {e}")),
        }
    }

    let ok_run = "q1 Q0 d1 1 2.0 t\n";
    let ok_qrels = "q1 0 d1 1\n";
    type Parser = fn(&str) -> Result<(), Error>;
    let fixtures: Vec<(&str, String, Parser)> = vec![
        ("run: 5 columns", format!("{ok_run}q1 Q0 d2 2 1.0\n"), |s| strict(s)),
        ("run: bad rank", format!("{ok_run}q1 Q0 d2 two 1.0 t\n"), |s| strict(s)),
        ("run: bad score", format!("{ok_run}q1 Q0 d2 2 high t\n"), |s| strict(s)),
        ("run: repeated doc", format!("{ok_run}q1 Q0 d1 2 1.0 t\n"), |s| strict(s)),
        ("run: repeated rank", format!("{ok_run}q1 Q0 d2 1 1.0 t\n"), |s| strict(s)),
        ("run: score rises", format!("{ok_run}q1 Q0 d2 2 3.0 t\n"), |s| strict(s)),
        ("run: first rank not 1", format!("{ok_run}q2 Q0 d2 3 1.0 t\n"), |s| strict(s)),
        ("run: bad score (lenient)", format!("{ok_run}q1 Q0 d2 2 nan? t\n"), |s| {
            parse_run(Cursor::new(s), "f", RunOrdering::Lenient).map(|_| ())
        }),
        ("qrels: 3 columns", format!("{ok_qrels}q1 0 d2\n"), |s| parse_qrels(Cursor::new(s), "f").map(|_| ())),
        ("qrels: negative grade", format!("{ok_qrels}q1 0 d2 -1\n"), |s| parse_qrels(Cursor::new(s), "f").map(|_| ())),
        ("qrels: text grade", format!("{ok_qrels}q1 0 d2 high\n"), |s| parse_qrels(Cursor::new(s), "f").map(|_| ())),
        ("beir qrels: 2 columns", "query-id\tcorpus-id\tscore\nq1\td1\n".into(), |s| {
            parse_beir_qrels(Cursor::new(s), "f").map(|_| ())
        }),
        ("queries: no tab", "q1\tcats\nq2 dogs\n".into(), |s| parse_queries_tsv(Cursor::new(s), "f").map(|_| ())),
        ("queries: duplicate id", "q1\tcats\nq1\tdogs\n".into(), |s| parse_queries_tsv(Cursor::new(s), "f").map(|_| ())),
        ("queries jsonl: bad json", "{\"_id\":\"q1\",\"text\":\"a\"}\n{oops\n".into(), |s| {
            parse_queries_jsonl(Cursor::new(s), "f").map(|_| ())
        }),
    ];
    fn strict(s: &str) -> Result<(), Error> {
        parse_run(Cursor::new(s), "f", RunOrdering::Strict).map(|_| ())
    }
    for (name, text, parse) in &fixtures {
        match parse(text).map_err(line_of) {
            Err(Some(2)) => {}
            other => return Fail(format!("fixture `{name}`: expected line 2 error, got {other:?}")),
        }
    }
    Pass(format!("1000 runs round-trip; {} malformed fixtures report line 2", fixtures.len()))
}

/// Exhaustive BM25 over raw word lists: every document is scored from its
/// own counts with the shared per-term primitives, in sorted term order.
/// Each score is also checked against the closed form written out here.
fn brute_force_bm25(
    corpus: &[(String, Vec<String>)],
    query: &[String],
    k: usize,
    p: Bm25Params,
) -> Result<Vec<(String, f64)>, String> {
    let n = corpus.len() as f64;
    let avg = corpus.iter().map(|(_, w)| w.len()).sum::<usize>() as f64 / n;
    let unique: BTreeSet<&String> = query.iter().collect();
    let df: HashMap<&String, usize> = unique
        .iter()
        .map(|t| (*t, corpus.iter().filter(|(_, w)| w.contains(t)).count()))
        .collect();
    let mut scored = Vec::new();
    for (id, words) in corpus {
        let (mut s, mut closed_form) = (0.0, 0.0);
        for t in &unique {
            let tf = words.iter().filter(|w| w == t).count();
            if tf > 0 {
                s += idf(df[t] as u64, corpus.len() as u64) * tf_component(tf as u32, words.len() as u32, avg, p);
                let (tf, d) = (tf as f64, df[t] as f64);
                closed_form += ((n - d + 0.5) / (d + 0.5) + 1.0).ln() * tf * (p.k1 + 1.0)
                    / (tf + p.k1 * (1.0 - p.b + p.b * words.len() as f64 / avg));
            }
        }
        if !close(s, closed_form, BM25_REL_TOL) {
            return Err(format!("{id}: {s} vs closed form {closed_form}"));
        }
        if s > 0.0 {
            scored.push((id.clone(), s));
        }
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}

fn bm25_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut queries_checked, mut ties) = (0usize, 0usize);
    for case in 0..50 {
        let num_docs = rng.random_range(1..=1000);
        let vocab = rng.random_range(3..=40);
        let mut corpus = random_corpus(&mut rng, num_docs, vocab, 15);
        // Duplicated texts force exact score ties.
        for d in 0..num_docs / 10 {
            let src = rng.random_range(0..num_docs);
            corpus[d].1 = corpus[src].1.clone();
        }
        let params = Bm25Params {
            k1: rng.random_range(0.0..2.0),
            b: rng.random_range(0.0..=1.0),
        };
        let index = InvertedIndex::from_collection(&ingest(&corpus), None);
        for _ in 0..5 {
            let query: Vec<String> = (0..rng.random_range(1..=4)).map(|_| format!("w{}", rng.random_range(0..vocab + 3))).collect();
            let k = rng.random_range(1..=num_docs + 5);
            let got = index.retrieve(&query.join(" "), k, params);
            let want = match brute_force_bm25(&corpus, &query, k, params) {
                Ok(w) => w,
                Err(e) => return Fail(format!("case {case}: {e}")),
            };
            if got.len() != want.len() {
                return Fail(format!("case {case}: {} hits vs {} expected", got.len(), want.len()));
            }
            for (i, ((gd, gs), (wd, ws))) in got.iter().zip(&want).enumerate() {
                if gd != wd || gs != ws {
                    return Fail(format!("case {case} rank {}: {gd} {gs} vs {wd} {ws}", i + 1));
                }
            }
            ties += want.windows(2).filter(|w| w[0].1 == w[1].1).count();
            queries_checked += 1;
        }
    }
    check(ties > 0, format!("{queries_checked} queries over 50 corpora, {ties} tied neighbours ordered by id"))
}

/// Needs a BEIR FiQA-2018 directory (corpus.jsonl, queries.jsonl, qrels/test.tsv).
fn fiqa_sanity() -> Outcome {
    let Some(dir) = std::env::var_os("LEXMATCH_FIQA_DIR").map(PathBuf::from) else {
        return Skip("LEXMATCH_FIQA_DIR not set".into());
    };
    let run = || -> lexmatch::Result<f64> {
        let coll = IndexedCollection::ingest(read_documents(&dir.join("corpus.jsonl"), CollectionFormat::Jsonl)?, "fiqa")?;
        let qrels = read_qrels(&dir.join("qrels/test.tsv"), QrelsFormat::BeirTsv)?;
        let relevant = binarize(&qrels, 1);
        let queries: QuerySet = read_queries(&dir.join("queries.jsonl"), QueryFormat::Jsonl)?
            .into_iter()
            .filter(|(q, _)| relevant.contains_key(q))
            .collect();
        let bm25 = InvertedIndex::from_collection(&coll, None).retrieve_run(&queries, 1000, Bm25Params::default(), "bm25");
        let (stats, index) = (coll.corpus_stats(), coll.doc_term_index());
        let inputs = RsjInputs {
            queries: &queries,
            relevant: &relevant,
            stats: &stats,
            index: &index,
            k: DEFAULT_TOP_K,
            base: LogBase::Natural,
        };
        let (records, _) = run_records(&inputs, &bm25)?;
        Ok(records.iter().map(|r| r.delta).sum::<f64>() / records.len() as f64)
    };
    match run() {
        Ok(mean) => check(
            mean > FIQA_DELTA_RANGE.0 && mean < FIQA_DELTA_RANGE.1,
            format!("mean delta {mean:.4}"),
        ),
        Err(e) => Fail(e.to_string()),
    }
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("RSJ oracle equivalence", rsj_oracle_equivalence),
        ("identity invariant", identity_invariant),
        ("monotonicity in r", monotonicity),
        ("closed-loop direction", closed_loop),
        ("Porter conformance", porter_conformance),
        ("Welch t-test", welch),
        ("ndcg@10", ndcg_cases),
        ("parser round trip", parser_round_trip),
        ("BM25 exhaustive equivalence", bm25_equivalence),
        ("zero-shot BM25 sanity", fiqa_sanity),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (status, detail) = match f() {
            Pass(d) => ("PASS", d),
            Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Skip(d) => ("SKIP", d),
        };
        println!("[{status}] {:>2}. {name}: {detail}", i + 1);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

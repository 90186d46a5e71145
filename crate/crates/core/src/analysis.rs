//! Aggregations over ΔRSJ records: binning by user weight, in-training vs
//! out-of-training and IDF-shift splits, t-tests, ndcg@k and dispersion.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::corpus_index::CorpusStats;
use crate::error::{Error, Result};
use crate::rsj::{query_terms, RsjRecord};
use crate::textproc::Term;
use crate::trec_io::{QuerySet, Qrels, Run};

pub const DEFAULT_IT_THRESHOLD: u64 = 10;
pub const DEFAULT_IDF_RATIO: f64 = 5.0;

/// Number of distinct training queries containing each term.
pub fn count_training_occurrences(training: &QuerySet) -> BTreeMap<Term, u64> {
    let mut counts = BTreeMap::new();
    for text in training.values() {
        for term in query_terms(text) {
            *counts.entry(term).or_insert(0) += 1;
        }
    }
    counts
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TermSplit {
    /// In training: seen in at least `threshold` training queries.
    It,
    /// Out of training.
    Oot,
}

impl TermSplit {
    pub fn as_str(self) -> &'static str {
        match self {
            TermSplit::It => "IT",
            TermSplit::Oot => "OOT",
        }
    }
}

pub fn split_it_oot(term: &Term, counts: &BTreeMap<Term, u64>, threshold: u64) -> TermSplit {
    if counts.get(term).copied().unwrap_or(0) < threshold {
        TermSplit::Oot
    } else {
        TermSplit::It
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IdfShift {
    /// Relatively much more frequent in the target collection.
    Plus,
    /// Statistics roughly preserved.
    Minus,
}

impl IdfShift {
    pub fn as_str(self) -> &'static str {
        match self {
            IdfShift::Plus => "IDF+",
            IdfShift::Minus => "IDF-",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IdfShiftLabel {
    pub shift: IdfShift,
    /// The term does not occur in the target collection.
    pub oov_target: bool,
}

/// IDF+ when the term's relative document frequency in `target` is at least
/// `ratio` times that in `source`. Terms unseen in `source` but present in
/// `target` count as an infinite ratio.
pub fn idf_shift_split(term: &Term, source: &CorpusStats, target: &CorpusStats, ratio: f64) -> Result<IdfShiftLabel> {
    let in_target = target.relative_df(term.as_str())?;
    let in_source = source.relative_df(term.as_str())?;
    if in_target == 0.0 {
        return Ok(IdfShiftLabel {
            shift: IdfShift::Minus,
            oov_target: true,
        });
    }
    let shift = if in_source == 0.0 || in_target >= ratio * in_source {
        IdfShift::Plus
    } else {
        IdfShift::Minus
    };
    Ok(IdfShiftLabel {
        shift,
        oov_target: false,
    })
}

/// Half-open interval `(lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x <= self.hi
    }
}

fn fmt_edge(x: f64) -> String {
    if x == f64::NEG_INFINITY {
        "-inf".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else {
        format!("{x}")
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{}]", fmt_edge(self.lo), fmt_edge(self.hi))
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl FromStr for Interval {
    type Err = Error;

    /// Parses `lo,hi` or `(lo,hi]`.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(']');
        let edges = parse_edges(inner)?;
        match edges[..] {
            [lo, hi] if lo < hi => Ok(Interval { lo, hi }),
            _ => Err(Error::Config(format!("`{s}` is not an interval lo,hi with lo < hi"))),
        }
    }
}

fn parse_edges(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|e| {
            let e = e.trim();
            match e {
                "-inf" => Some(f64::NEG_INFINITY),
                "inf" | "+inf" => Some(f64::INFINITY),
                _ => e.parse::<f64>().ok().filter(|x| x.is_finite()),
            }
            .ok_or_else(|| Error::Config(format!("bad bin edge `{e}`")))
        })
        .collect()
}

/// Consecutive half-open intervals `(e0,e1], (e1,e2], …`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinSpec {
    edges: Vec<f64>,
}

impl Default for BinSpec {
    fn default() -> Self {
        BinSpec {
            edges: vec![f64::NEG_INFINITY, 0.0, 5.0, 8.0, 17.0],
        }
    }
}

impl BinSpec {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::Config("bins need at least two edges".into()));
        }
        if edges.iter().any(|e| e.is_nan()) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!("bin edges {edges:?} are not strictly increasing")));
        }
        Ok(BinSpec { edges })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn intervals(&self) -> impl Iterator<Item = Interval> + '_ {
        self.edges.windows(2).map(|w| Interval::new(w[0], w[1]))
    }

    pub fn bin_of(&self, x: f64) -> Option<usize> {
        if x.is_nan() || x <= self.edges[0] || x > *self.edges.last().expect("non-empty") {
            return None;
        }
        // First edge >= x closes the containing interval.
        let upper = self.edges.partition_point(|&e| e < x);
        Some(upper - 1)
    }
}

impl FromStr for BinSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BinSpec::new(parse_edges(s)?)
    }
}

impl fmt::Display for BinSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let edges: Vec<String> = self.edges.iter().map(|&e| fmt_edge(e)).collect();
        f.write_str(&edges.join(","))
    }
}

/// Count, mean and sample standard deviation (n − 1 denominator).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

pub fn summarize(values: &[f64]) -> Summary {
    let count = values.len();
    if count == 0 {
        return Summary {
            count,
            mean: None,
            std: None,
        };
    }
    let mean = values.iter().sum::<f64>() / count as f64;
    let std = (count > 1).then(|| {
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (count - 1) as f64).sqrt()
    });
    Summary {
        count,
        mean: Some(mean),
        std,
    }
}

/// One cell of a binned aggregate. `bin == None` is the out-of-range bucket.
#[derive(Clone, Debug, PartialEq)]
pub struct BinCell<L> {
    pub label: L,
    pub bin: Option<Interval>,
    pub summary: Summary,
}

/// Groups records by `label_of` and by the bin containing their user weight.
///
/// Every label gets one cell per bin (empty cells included) and an
/// out-of-range cell when any of its records fall outside all bins.
pub fn bin_aggregate<L: Ord + Clone>(
    records: &[RsjRecord],
    bins: &BinSpec,
    label_of: impl Fn(&RsjRecord) -> L,
) -> Vec<BinCell<L>> {
    let num_bins = bins.intervals().count();
    let mut groups: BTreeMap<L, (Vec<Vec<f64>>, Vec<f64>)> = BTreeMap::new();
    for rec in records {
        let (cells, outside) = groups
            .entry(label_of(rec))
            .or_insert_with(|| (vec![Vec::new(); num_bins], Vec::new()));
        match bins.bin_of(rec.rsj_u) {
            Some(b) => cells[b].push(rec.delta),
            None => outside.push(rec.delta),
        }
    }
    let mut out = Vec::new();
    for (label, (cells, outside)) in groups {
        for (interval, deltas) in bins.intervals().zip(&cells) {
            out.push(BinCell {
                label: label.clone(),
                bin: Some(interval),
                summary: summarize(deltas),
            });
        }
        if !outside.is_empty() {
            out.push(BinCell {
                label,
                bin: None,
                summary: summarize(&outside),
            });
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum TTestKind {
    /// Unequal variances, Welch–Satterthwaite degrees of freedom.
    #[default]
    #[serde(rename = "welch")]
    Welch,
    /// Pooled variance.
    #[serde(rename = "pooled")]
    Pooled,
}

impl FromStr for TTestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "welch" => Ok(TTestKind::Welch),
            "pooled" | "student" => Ok(TTestKind::Pooled),
            other => Err(Error::Config(format!("unknown t-test `{other}` (expected welch or pooled)"))),
        }
    }
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let s = summarize(x);
    (s.mean.unwrap_or(f64::NAN), s.std.map_or(f64::NAN, |sd| sd * sd))
}

fn two_sided_p(t: f64, df: f64) -> Result<f64> {
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::UndefinedStatistic(format!("t distribution with {df} degrees of freedom: {e}")))?;
    Ok((2.0 * dist.sf(t.abs())).min(1.0))
}

fn check_samples(a: &[f64], b: &[f64]) -> Result<((f64, f64), (f64, f64))> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::UndefinedStatistic(format!(
            "t-test needs at least two values per sample (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    if va == 0.0 && vb == 0.0 {
        return Err(Error::UndefinedStatistic("both samples have zero variance".into()));
    }
    Ok(((ma, va), (mb, vb)))
}

pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    let ((ma, va), (mb, vb)) = check_samples(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let t = (ma - mb) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(TTest {
        t,
        df,
        p: two_sided_p(t, df)?,
    })
}

pub fn pooled_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    let ((ma, va), (mb, vb)) = check_samples(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let df = na + nb - 2.0;
    let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
    let t = (ma - mb) / (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    Ok(TTest {
        t,
        df,
        p: two_sided_p(t, df)?,
    })
}

pub fn t_test(kind: TTestKind, a: &[f64], b: &[f64]) -> Result<TTest> {
    match kind {
        TTestKind::Welch => welch_t_test(a, b),
        TTestKind::Pooled => pooled_t_test(a, b),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum Gain {
    /// The grade itself.
    #[default]
    #[serde(rename = "linear")]
    Linear,
    /// `2^grade − 1`.
    #[serde(rename = "exponential")]
    Exponential,
}

impl Gain {
    fn of(self, grade: u32) -> f64 {
        match self {
            Gain::Linear => grade as f64,
            Gain::Exponential => 2f64.powi(grade as i32) - 1.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NdcgResult {
    pub per_query: BTreeMap<String, f64>,
    /// Queries excluded from `per_query`, with the reason.
    pub diagnostics: Vec<String>,
}

impl NdcgResult {
    pub fn mean(&self) -> Option<f64> {
        let values: Vec<f64> = self.per_query.values().copied().collect();
        summarize(&values).mean
    }
}

/// ndcg@k of every run query, with log2(rank + 1) discounts and unjudged
/// documents treated as grade 0.
pub fn ndcg_at_k(run: &Run, qrels: &Qrels, k: usize, gain: Gain) -> NdcgResult {
    let mut result = NdcgResult::default();
    for (qid, ranking) in &run.queries {
        let Some(judged) = qrels.query(qid) else {
            result.diagnostics.push(format!("query `{qid}` has no judgments; excluded from ndcg"));
            continue;
        };
        let mut ideal: Vec<u32> = judged.values().copied().filter(|&g| g > 0).collect();
        if ideal.is_empty() {
            result.diagnostics.push(format!("query `{qid}` has no positively graded document; excluded from ndcg"));
            continue;
        }
        ideal.sort_unstable_by(|a, b| b.cmp(a));
        let discount = |i: usize| 1.0 / ((i + 2) as f64).log2();
        let dcg: f64 = ranking
            .iter()
            .take(k)
            .enumerate()
            .map(|(i, d)| gain.of(judged.get(&d.doc_id).copied().unwrap_or(0)) * discount(i))
            .sum();
        let idcg: f64 = ideal.iter().take(k).enumerate().map(|(i, &g)| gain.of(g) * discount(i)).sum();
        result.per_query.insert(qid.clone(), dcg / idcg);
    }
    result
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct QuerySubset {
    pub queries: BTreeSet<String>,
    /// Mean ndcg over members that have an ndcg value.
    pub mean_ndcg: Option<f64>,
    pub with_ndcg: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SubsetComparison {
    pub it: QuerySubset,
    pub oot: QuerySubset,
    /// Queries belonging to both subsets.
    pub both: usize,
}

/// Splits queries by whether they contain at least one IT (resp. OOT) term
/// whose user weight falls in `bin`, and averages ndcg within each subset.
pub fn subset_performance_compare(
    records: &[RsjRecord],
    label_of: impl Fn(&Term) -> TermSplit,
    bin: Interval,
    ndcg: &BTreeMap<String, f64>,
) -> SubsetComparison {
    let mut it = BTreeSet::new();
    let mut oot = BTreeSet::new();
    for rec in records.iter().filter(|r| bin.contains(r.rsj_u)) {
        match label_of(&rec.term) {
            TermSplit::It => it.insert(rec.query_id.clone()),
            TermSplit::Oot => oot.insert(rec.query_id.clone()),
        };
    }
    let subset = |queries: BTreeSet<String>| {
        let values: Vec<f64> = queries.iter().filter_map(|q| ndcg.get(q).copied()).collect();
        QuerySubset {
            mean_ndcg: summarize(&values).mean,
            with_ndcg: values.len(),
            queries,
        }
    };
    let both = it.intersection(&oot).count();
    SubsetComparison {
        it: subset(it),
        oot: subset(oot),
        both,
    }
}

/// Standard deviation of the model's deltas divided by the baseline's.
pub fn normalized_std(model: &[RsjRecord], baseline: &[RsjRecord]) -> Result<f64> {
    let deltas = |rs: &[RsjRecord]| rs.iter().map(|r| r.delta).collect::<Vec<_>>();
    let base = summarize(&deltas(baseline)).std.unwrap_or(0.0);
    if base == 0.0 {
        return Err(Error::UndefinedStatistic("baseline ΔRSJ standard deviation is zero".into()));
    }
    let model_std = summarize(&deltas(model))
        .std
        .ok_or_else(|| Error::UndefinedStatistic("model needs at least two records".into()))?;
    Ok(model_std / base)
}

/// Mean ΔRSJ over all records, or over per-query means when `per_query` is set.
pub fn mean_delta(records: &[RsjRecord], per_query: bool) -> Option<f64> {
    if !per_query {
        let deltas: Vec<f64> = records.iter().map(|r| r.delta).collect();
        return summarize(&deltas).mean;
    }
    let mut by_query: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records {
        by_query.entry(&r.query_id).or_default().push(r.delta);
    }
    let means: Vec<f64> = by_query.values().filter_map(|d| summarize(d).mean).collect();
    summarize(&means).mean
}

/// Settings of a full analysis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisSettings {
    #[serde(serialize_with = "serialize_display")]
    pub bins: BinSpec,
    pub it_threshold: u64,
    pub idf_ratio: f64,
    pub t_test: TTestKind,
    pub per_query_mean: bool,
    /// System whose ΔRSJ dispersion normalizes the others.
    pub baseline: Option<String>,
    /// User-weight interval for the ndcg subset comparison.
    pub subset_bin: Interval,
}

fn serialize_display<T: fmt::Display, S: Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            bins: BinSpec::default(),
            it_threshold: DEFAULT_IT_THRESHOLD,
            idf_ratio: DEFAULT_IDF_RATIO,
            t_test: TTestKind::Welch,
            per_query_mean: false,
            baseline: None,
            subset_bin: Interval::new(8.0, 17.0),
        }
    }
}

/// Records of one system, with its per-query ndcg when available.
#[derive(Clone, Debug, Default)]
pub struct SystemInput {
    pub name: String,
    pub records: Vec<RsjRecord>,
    pub ndcg: Option<BTreeMap<String, f64>>,
}

/// Optional term splits available for the analysis.
#[derive(Clone, Copy, Debug, Default)]
pub struct SplitSources<'a> {
    pub training_counts: Option<&'a BTreeMap<Term, u64>>,
    /// `(source, target)` collections.
    pub collections: Option<(&'a CorpusStats, &'a CorpusStats)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BinRow {
    pub system: String,
    /// `all`, `IT`, `OOT`, `IDF+` or `IDF-`.
    pub split: String,
    /// `None` for the out-of-range bucket.
    pub bin: Option<Interval>,
    #[serde(flatten)]
    pub summary: Summary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TTestRow {
    pub system: String,
    pub bin: Interval,
    pub test: Option<TTest>,
    pub n_it: usize,
    pub n_oot: usize,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplitSummary {
    pub split: String,
    pub distinct_terms: usize,
    #[serde(flatten)]
    pub summary: Summary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SystemSummary {
    pub system: String,
    #[serde(flatten)]
    pub summary: Summary,
    pub per_query_mean_delta: Option<f64>,
    pub mean_ndcg: Option<f64>,
    pub splits: Vec<SplitSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormalizedStdRow {
    pub system: String,
    pub baseline: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubsetRow {
    pub system: String,
    pub bin: Interval,
    #[serde(flatten)]
    pub comparison: SubsetComparison,
    /// OOT mean minus IT mean.
    pub difference: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub settings: AnalysisSettings,
    /// Free-form provenance (K, log base, thresholds, input paths…).
    pub metadata: BTreeMap<String, String>,
    pub systems: Vec<SystemSummary>,
    pub bins: Vec<BinRow>,
    pub t_tests: Vec<TTestRow>,
    pub normalized_std: Vec<NormalizedStdRow>,
    pub ndcg_subsets: Vec<SubsetRow>,
    pub warnings: Vec<String>,
}

type Labeler<'a> = Box<dyn Fn(&Term) -> Result<&'static str> + 'a>;

/// Runs every analysis the available inputs allow. Skipped analyses are
/// listed in `warnings`.
pub fn build_report(
    systems: &[SystemInput],
    settings: &AnalysisSettings,
    sources: SplitSources<'_>,
    metadata: BTreeMap<String, String>,
) -> Result<AnalysisReport> {
    let mut warnings = Vec::new();
    let it_label = sources.training_counts.map(|counts| {
        let threshold = settings.it_threshold;
        move |term: &Term| split_it_oot(term, counts, threshold)
    });
    if it_label.is_none() {
        warnings.push("no training queries given; IT/OOT split, t-tests and ndcg subsets skipped".to_owned());
    }
    if sources.collections.is_none() {
        warnings.push("no source collection given; IDF+/IDF- split skipped".to_owned());
    }

    let mut labelers: Vec<Labeler<'_>> = Vec::new();
    if let Some(label) = &it_label {
        labelers.push(Box::new(move |t| Ok(label(t).as_str())));
    }
    if let Some((source, target)) = sources.collections {
        let ratio = settings.idf_ratio;
        labelers.push(Box::new(move |t| Ok(idf_shift_split(t, source, target, ratio)?.shift.as_str())));
    }

    let mut report = AnalysisReport {
        settings: settings.clone(),
        metadata,
        systems: Vec::new(),
        bins: Vec::new(),
        t_tests: Vec::new(),
        normalized_std: Vec::new(),
        ndcg_subsets: Vec::new(),
        warnings: Vec::new(),
    };

    for system in systems {
        let records = &system.records;
        let mut splits = Vec::new();
        for cell in bin_aggregate(records, &settings.bins, |_| "all") {
            report.bins.push(BinRow {
                system: system.name.clone(),
                split: cell.label.to_owned(),
                bin: cell.bin,
                summary: cell.summary,
            });
        }
        for labeler in &labelers {
            let mut term_labels: BTreeMap<&Term, &'static str> = BTreeMap::new();
            for rec in records {
                if !term_labels.contains_key(&rec.term) {
                    term_labels.insert(&rec.term, labeler(&rec.term)?);
                }
            }
            let mut grouped: BTreeMap<&str, (Vec<f64>, BTreeSet<&Term>)> = BTreeMap::new();
            for rec in records {
                let entry = grouped.entry(term_labels[&rec.term]).or_default();
                entry.0.push(rec.delta);
                entry.1.insert(&rec.term);
            }
            for (label, (deltas, terms)) in grouped {
                splits.push(SplitSummary {
                    split: label.to_owned(),
                    distinct_terms: terms.len(),
                    summary: summarize(&deltas),
                });
            }
            for cell in bin_aggregate(records, &settings.bins, |r| term_labels[&r.term]) {
                report.bins.push(BinRow {
                    system: system.name.clone(),
                    split: cell.label.to_owned(),
                    bin: cell.bin,
                    summary: cell.summary,
                });
            }
        }

        let deltas: Vec<f64> = records.iter().map(|r| r.delta).collect();
        let mean_ndcg = system.ndcg.as_ref().and_then(|n| summarize(&n.values().copied().collect::<Vec<_>>()).mean);
        report.systems.push(SystemSummary {
            system: system.name.clone(),
            summary: summarize(&deltas),
            per_query_mean_delta: settings.per_query_mean.then(|| mean_delta(records, true)).flatten(),
            mean_ndcg,
            splits,
        });

        if let Some(label) = &it_label {
            for bin in settings.bins.intervals() {
                let (mut it, mut oot) = (Vec::new(), Vec::new());
                for rec in records.iter().filter(|r| bin.contains(r.rsj_u)) {
                    match label(&rec.term) {
                        TermSplit::It => it.push(rec.delta),
                        TermSplit::Oot => oot.push(rec.delta),
                    }
                }
                let (test, note) = match t_test(settings.t_test, &it, &oot) {
                    Ok(t) => (Some(t), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                report.t_tests.push(TTestRow {
                    system: system.name.clone(),
                    bin,
                    test,
                    n_it: it.len(),
                    n_oot: oot.len(),
                    note,
                });
            }
            match &system.ndcg {
                Some(ndcg) => {
                    let comparison = subset_performance_compare(records, label, settings.subset_bin, ndcg);
                    let difference = comparison.oot.mean_ndcg.zip(comparison.it.mean_ndcg).map(|(o, i)| o - i);
                    report.ndcg_subsets.push(SubsetRow {
                        system: system.name.clone(),
                        bin: settings.subset_bin,
                        comparison,
                        difference,
                    });
                }
                None => warnings.push(format!(
                    "system `{}` has no run/qrels for ndcg; subset comparison skipped",
                    system.name
                )),
            }
        }
    }

    match &settings.baseline {
        Some(name) => match systems.iter().find(|s| &s.name == name) {
            Some(base) => {
                for system in systems {
                    match normalized_std(&system.records, &base.records) {
                        Ok(value) => report.normalized_std.push(NormalizedStdRow {
                            system: system.name.clone(),
                            baseline: name.clone(),
                            value,
                        }),
                        Err(e) => warnings.push(format!("normalized std for `{}`: {e}", system.name)),
                    }
                }
            }
            None => warnings.push(format!("baseline system `{name}` not among the analyzed systems")),
        },
        None => warnings.push("no baseline system given; normalized standard deviation skipped".to_owned()),
    }

    report.warnings = warnings;
    Ok(report)
}

//! Flat `key = value` configuration with command-line overrides.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::analysis::{BinSpec, Gain, Interval, TTestKind, DEFAULT_IDF_RATIO, DEFAULT_IT_THRESHOLD};
use crate::bm25::Bm25Params;
use crate::corpus_index::CollectionFormat;
use crate::rsj::{LogBase, DEFAULT_TOP_K};
use crate::trec_io::{QrelsFormat, QueryFormat};
use crate::{Error, Result};

pub const KEYS: &[&str] = &[
    "collection",
    "collection_format",
    "collection_id",
    "index",
    "queries",
    "queries_format",
    "qrels",
    "qrels_format",
    "rel_threshold",
    "runs",
    "rsj",
    "lenient",
    "k",
    "log_base",
    "retrieve_k",
    "k1",
    "b",
    "stopwords",
    "tag",
    "random_baseline",
    "seed",
    "training_queries",
    "training_format",
    "source_index",
    "bins",
    "it_threshold",
    "idf_ratio",
    "t_test",
    "per_query_mean",
    "baseline",
    "subset_bin",
    "ndcg_k",
    "gain",
    "out",
    "out_dir",
];

/// Raw key/value layer: a config file with command-line values on top.
#[derive(Clone, Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::parse(source, idx + 1, "expected `key = value`"));
            };
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(Error::parse(source, idx + 1, format!("unknown key `{key}`")));
            }
            if values.insert(key.to_owned(), value.trim().to_owned()).is_some() {
                return Err(Error::parse(source, idx + 1, format!("duplicate key `{key}`")));
            }
        }
        Ok(Settings { values })
    }

    pub fn from_optional_file(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Settings::default()), Settings::load)
    }

    /// Overrides `key` when `value` is given.
    pub fn set<T: ToString>(&mut self, key: &str, value: Option<T>) {
        debug_assert!(KEYS.contains(&key), "{key}");
        if let Some(v) = value {
            self.values.insert(key.to_owned(), v.to_string());
        }
    }

    pub fn set_flag(&mut self, key: &str, flag: bool) {
        if flag {
            self.set(key, Some("true"));
        }
    }

    /// Overrides a list-valued key with `name=path` entries.
    pub fn set_list(&mut self, key: &str, items: &[String]) {
        if !items.is_empty() {
            self.set(key, Some(items.join(",")));
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    fn get_with<T>(&self, key: &str, parse: impl FnOnce(&str) -> Option<T>) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => parse(v)
                .map(Some)
                .ok_or_else(|| Error::Config(format!("invalid value `{v}` for `{key}`"))),
        }
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get_with(key, |v| v.parse().ok())
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(PathBuf::from)
    }

    fn bool(&self, key: &str) -> Result<bool> {
        Ok(self
            .get_with(key, |v| match v {
                "true" | "yes" | "1" => Some(true),
                "false" | "no" | "0" => Some(false),
                _ => None,
            })?
            .unwrap_or(false))
    }

    fn named_paths(&self, key: &str) -> Result<Vec<(String, PathBuf)>> {
        let Some(v) = self.raw(key) else {
            return Ok(Vec::new());
        };
        let mut out: Vec<(String, PathBuf)> = Vec::new();
        for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (name, path) = parse_named_path(item)?;
            if out.iter().any(|(n, _)| *n == name) {
                return Err(Error::Config(format!("system `{name}` given twice in `{key}`")));
            }
            out.push((name, path));
        }
        Ok(out)
    }
}

/// Parses `name=path`.
pub fn parse_named_path(item: &str) -> Result<(String, PathBuf)> {
    match item.split_once('=') {
        Some((name, path)) if valid_system_name(name.trim()) && !path.trim().is_empty() => {
            Ok((name.trim().to_owned(), PathBuf::from(path.trim())))
        }
        _ => Err(Error::Config(format!(
            "expected `name=path` with a name of letters, digits, `-`, `_` or `.`, got `{item}`"
        ))),
    }
}

fn valid_system_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
}

fn collection_format(v: &str) -> Option<CollectionFormat> {
    match v {
        "tsv" => Some(CollectionFormat::Tsv),
        "jsonl" => Some(CollectionFormat::Jsonl),
        _ => None,
    }
}

fn query_format(v: &str) -> Option<QueryFormat> {
    match v {
        "tsv" => Some(QueryFormat::Tsv),
        "jsonl" => Some(QueryFormat::Jsonl),
        _ => None,
    }
}

fn qrels_format(v: &str) -> Option<QrelsFormat> {
    match v {
        "trec" => Some(QrelsFormat::Trec),
        "beir" | "tsv" => Some(QrelsFormat::BeirTsv),
        _ => None,
    }
}

fn gain(v: &str) -> Option<Gain> {
    match v {
        "linear" => Some(Gain::Linear),
        "exponential" | "exp" => Some(Gain::Exponential),
        _ => None,
    }
}

/// Fully resolved settings, with defaults applied.
#[derive(Clone, Debug)]
pub struct Config {
    pub collection: Option<PathBuf>,
    pub collection_format: CollectionFormat,
    pub collection_id: Option<String>,
    pub index: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub queries_format: QueryFormat,
    pub qrels: Option<PathBuf>,
    pub qrels_format: QrelsFormat,
    pub rel_threshold: u32,
    pub runs: Vec<(String, PathBuf)>,
    pub rsj: Vec<(String, PathBuf)>,
    pub lenient: bool,
    pub k: usize,
    pub log_base: LogBase,
    pub retrieve_k: usize,
    pub bm25: Bm25Params,
    pub stopwords: Option<PathBuf>,
    pub tag: String,
    pub random_baseline: bool,
    pub seed: u64,
    pub training_queries: Option<PathBuf>,
    pub training_format: QueryFormat,
    pub source_index: Option<PathBuf>,
    pub bins: BinSpec,
    pub it_threshold: u64,
    pub idf_ratio: f64,
    pub t_test: TTestKind,
    pub per_query_mean: bool,
    pub baseline: Option<String>,
    pub subset_bin: Interval,
    pub ndcg_k: usize,
    pub gain: Gain,
    pub out: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl Config {
    pub fn resolve(s: &Settings) -> Result<Self> {
        let defaults = Bm25Params::default();
        let config = Config {
            collection: s.path("collection"),
            collection_format: s.get_with("collection_format", collection_format)?.unwrap_or_default(),
            collection_id: s.raw("collection_id").map(str::to_owned),
            index: s.path("index"),
            queries: s.path("queries"),
            queries_format: s.get_with("queries_format", query_format)?.unwrap_or_default(),
            qrels: s.path("qrels"),
            qrels_format: s.get_with("qrels_format", qrels_format)?.unwrap_or_default(),
            rel_threshold: s.get("rel_threshold")?.unwrap_or(1),
            runs: s.named_paths("runs")?,
            rsj: s.named_paths("rsj")?,
            lenient: s.bool("lenient")?,
            k: s.get("k")?.unwrap_or(DEFAULT_TOP_K),
            log_base: s.get("log_base")?.unwrap_or_default(),
            retrieve_k: s.get("retrieve_k")?.unwrap_or(1000),
            bm25: Bm25Params {
                k1: s.get("k1")?.unwrap_or(defaults.k1),
                b: s.get("b")?.unwrap_or(defaults.b),
            },
            stopwords: s.path("stopwords"),
            tag: s.raw("tag").unwrap_or("bm25").to_owned(),
            random_baseline: s.bool("random_baseline")?,
            seed: s.get("seed")?.unwrap_or(0),
            training_queries: s.path("training_queries"),
            training_format: s.get_with("training_format", query_format)?.unwrap_or_default(),
            source_index: s.path("source_index"),
            bins: s.get("bins")?.unwrap_or_default(),
            it_threshold: s.get("it_threshold")?.unwrap_or(DEFAULT_IT_THRESHOLD),
            idf_ratio: s.get("idf_ratio")?.unwrap_or(DEFAULT_IDF_RATIO),
            t_test: s.get("t_test")?.unwrap_or_default(),
            per_query_mean: s.bool("per_query_mean")?,
            baseline: s.raw("baseline").map(str::to_owned),
            subset_bin: s.get("subset_bin")?.unwrap_or(Interval::new(8.0, 17.0)),
            ndcg_k: s.get("ndcg_k")?.unwrap_or(10),
            gain: s.get_with("gain", gain)?.unwrap_or_default(),
            out: s.path("out"),
            out_dir: s.path("out_dir"),
        };
        config.check_ranges()?;
        Ok(config)
    }

    fn check_ranges(&self) -> Result<()> {
        if self.k == 0 || self.retrieve_k == 0 || self.ndcg_k == 0 {
            return Err(Error::Config("`k`, `retrieve_k` and `ndcg_k` must be positive".into()));
        }
        if self.rel_threshold == 0 {
            return Err(Error::Config("`rel_threshold` must be at least 1".into()));
        }
        if !(self.bm25.k1 >= 0.0 && self.bm25.k1.is_finite()) || !(0.0..=1.0).contains(&self.bm25.b) {
            return Err(Error::Config("BM25 needs finite `k1` >= 0 and `b` in [0, 1]".into()));
        }
        if !(self.idf_ratio > 1.0 && self.idf_ratio.is_finite()) {
            return Err(Error::Config("`idf_ratio` must be a finite number above 1".into()));
        }
        if self.tag.is_empty() || self.tag.chars().any(char::is_whitespace) {
            return Err(Error::Config("`tag` must be a non-empty word".into()));
        }
        Ok(())
    }

    /// The value of a mandatory key.
    pub fn require<'a, T>(value: &'a Option<T>, key: &str) -> Result<&'a T> {
        value.as_ref().ok_or_else(|| Error::Config(format!("missing `{key}`")))
    }
}

/// Fails when any of the given input paths does not exist.
pub fn check_inputs<'a>(inputs: impl IntoIterator<Item = (&'a str, &'a Path)>) -> Result<()> {
    let missing: Vec<String> = inputs
        .into_iter()
        .filter(|(_, p)| !p.exists())
        .map(|(key, p)| format!("{key} ({})", p.display()))
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(format!("input paths do not exist: {}", missing.join(", "))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blank_lines() {
        let s = Settings::parse("# run\nk = 50\n\nlog_base = 2 # bits\nruns = a=x.run, b=y.run\n", "cfg").unwrap();
        let c = Config::resolve(&s).unwrap();
        assert_eq!(c.k, 50);
        assert_eq!(c.log_base, LogBase::Two);
        assert_eq!(c.runs, vec![("a".into(), "x.run".into()), ("b".into(), "y.run".into())]);
        assert_eq!(c.retrieve_k, 1000);
    }

    #[test]
    fn overrides_win_over_file() {
        let mut s = Settings::parse("k = 50\nseed = 3", "cfg").unwrap();
        s.set("k", Some(7));
        s.set::<u64>("seed", None);
        let c = Config::resolve(&s).unwrap();
        assert_eq!((c.k, c.seed), (7, 3));
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(matches!(Settings::parse("k 5", "cfg"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(Settings::parse("\nkay = 5", "cfg"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(Settings::parse("k=1\nk=2", "cfg"), Err(Error::Parse { line: 2, .. })));
        let s = Settings::parse("k = many", "cfg").unwrap();
        assert!(matches!(Config::resolve(&s), Err(Error::Config(_))));
        let s = Settings::parse("runs = a=x,a=y", "cfg").unwrap();
        assert!(Config::resolve(&s).is_err());
        let s = Settings::parse("b = 1.5", "cfg").unwrap();
        assert!(Config::resolve(&s).is_err());
    }

    #[test]
    fn named_path_syntax() {
        assert_eq!(parse_named_path("bm25=runs/a.trec").unwrap().0, "bm25");
        assert!(parse_named_path("noequals").is_err());
        assert!(parse_named_path("bad name=x").is_err());
        assert!(parse_named_path("a=").is_err());
    }

    #[test]
    fn missing_inputs_are_listed() {
        let err = check_inputs([("collection", Path::new("/nonexistent/c.tsv"))]).unwrap_err();
        assert!(err.to_string().contains("collection"));
    }
}

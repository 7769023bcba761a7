//! Cosine-similarity overlap between benchmark items and corpus entries,
//! computed from precomputed sentence embeddings.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BINARY_MAGIC: &[u8; 8] = b"CFEMB\x00\x01\n";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingSet {
    ids: Vec<String>,
    vectors: Vec<Vec<f64>>,
    dim: usize,
    source: String,
}

#[derive(Deserialize)]
struct Header {
    dim: usize,
    #[serde(default)]
    source: String,
}

#[derive(Serialize, Deserialize)]
struct Row {
    #[serde(deserialize_with = "id_as_string")]
    id: String,
    vector: Vec<f64>,
}

fn id_as_string<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<String, D::Error> {
    match serde_json::Value::deserialize(d)? {
        serde_json::Value::String(s) => Ok(s),
        serde_json::Value::Number(n) => Ok(n.to_string()),
        other => Err(serde::de::Error::custom(format!("invalid id {other}"))),
    }
}

impl EmbeddingSet {
    pub fn new(source: impl Into<String>, rows: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let mut set = EmbeddingSet {
            source: source.into(),
            ..Default::default()
        };
        for (id, v) in rows {
            set.push(id, v, None)?;
        }
        Ok(set)
    }

    fn push(&mut self, id: String, v: Vec<f64>, declared: Option<usize>) -> Result<()> {
        let expected = declared.or(if self.ids.is_empty() { None } else { Some(self.dim) });
        if let Some(d) = expected {
            if v.len() != d {
                return Err(Error::Data(format!(
                    "embedding {id} has dimension {}, expected {d}",
                    v.len()
                )));
            }
        }
        if v.is_empty() {
            return Err(Error::Data(format!("embedding {id} is empty")));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Data(format!("embedding {id} has a non-finite component")));
        }
        self.dim = v.len();
        self.ids.push(id);
        self.vectors.push(v);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.ids.iter().map(String::as_str).zip(self.vectors.iter().map(Vec::as_slice))
    }

    /// Keeps only the entries whose id is in `keep`.
    pub fn retain_ids(&mut self, keep: &HashSet<String>) {
        let (ids, vectors): (Vec<_>, Vec<_>) = std::mem::take(&mut self.ids)
            .into_iter()
            .zip(std::mem::take(&mut self.vectors))
            .filter(|(id, _)| keep.contains(id))
            .unzip();
        self.ids = ids;
        self.vectors = vectors;
    }

    /// Binary layout: magic, u32 dim, u64 count, then per entry a u32 id
    /// length, the UTF-8 id and `dim` little-endian f64s.
    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = BINARY_MAGIC.to_vec();
        out.extend((self.dim as u32).to_le_bytes());
        out.extend((self.len() as u64).to_le_bytes());
        for (id, v) in self.iter() {
            out.extend((id.len() as u32).to_le_bytes());
            out.extend(id.as_bytes());
            for x in v {
                out.extend(x.to_le_bytes());
            }
        }
        out
    }
}

/// Loads embeddings from JSONL (`{"id","vector"}` per line, optionally
/// preceded by a `{"dim","source"}` header line) or the binary layout of
/// [`EmbeddingSet::to_binary`].
pub fn load_embeddings(path: &Path) -> Result<EmbeddingSet> {
    let bytes = crate::io::read_bytes(path)?;
    let source = path.display().to_string();
    let wrap = |e: Error, line: usize| match e {
        Error::Data(msg) => Error::format(path, line, msg),
        other => other,
    };
    if bytes.starts_with(BINARY_MAGIC) {
        return parse_binary(&bytes[BINARY_MAGIC.len()..], source).map_err(|e| wrap(e, 0));
    }
    let text = String::from_utf8(bytes).map_err(|e| Error::format(path, 0, e.to_string()))?;
    let mut set = EmbeddingSet {
        source,
        ..Default::default()
    };
    let mut declared = None;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| Error::format(path, i + 1, e.to_string()))?;
        if value.get("id").is_none() && value.get("dim").is_some() && set.is_empty() {
            let h: Header = serde_json::from_value(value)
                .map_err(|e| Error::format(path, i + 1, e.to_string()))?;
            declared = Some(h.dim);
            if !h.source.is_empty() {
                set.source = h.source;
            }
            continue;
        }
        let row: Row = serde_json::from_value(value).map_err(|e| Error::format(path, i + 1, e.to_string()))?;
        set.push(row.id, row.vector, declared).map_err(|e| wrap(e, i + 1))?;
    }
    if let Some(d) = declared {
        set.dim = d;
    }
    Ok(set)
}

fn parse_binary(mut b: &[u8], source: String) -> Result<EmbeddingSet> {
    fn take<'a>(b: &mut &'a [u8], n: usize) -> Result<&'a [u8]> {
        if b.len() < n {
            return Err(Error::Data("truncated binary embedding file".into()));
        }
        let (head, rest) = b.split_at(n);
        *b = rest;
        Ok(head)
    }
    let dim = u32::from_le_bytes(take(&mut b, 4)?.try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(take(&mut b, 8)?.try_into().unwrap());
    let mut set = EmbeddingSet {
        source,
        dim,
        ..Default::default()
    };
    for _ in 0..count {
        let len = u32::from_le_bytes(take(&mut b, 4)?.try_into().unwrap()) as usize;
        let id = String::from_utf8(take(&mut b, len)?.to_vec())
            .map_err(|e| Error::Data(format!("embedding id is not UTF-8: {e}")))?;
        let v = take(&mut b, dim * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        set.push(id, v, Some(dim))?;
    }
    Ok(set)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// `dot(u, v) / (|u| |v|)`; zero when either vector is zero.
pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let denom = norm(u) * norm(v);
    if denom == 0.0 {
        0.0
    } else {
        dot(u, v) / denom
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityPair {
    pub bench_id: String,
    pub corpus_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PairSearch {
    /// Skip pairs whose Cauchy-Schwarz upper bound, computed from a prefix
    /// of the normalized vectors, is already below the threshold.
    pub prefilter: bool,
}

struct Prepared {
    unit: Vec<f64>,
    /// Norm of `unit[k..]` for the prefilter split point k.
    tail_norm: f64,
    norm: f64,
}

fn prepare(v: &[f64], split: usize) -> Prepared {
    let n = norm(v);
    let unit: Vec<f64> = if n == 0.0 { vec![0.0; v.len()] } else { v.iter().map(|x| x / n).collect() };
    Prepared {
        tail_norm: norm(&unit[split..]),
        unit,
        norm: n,
    }
}

/// Every (benchmark, corpus) pair with cosine similarity at least
/// `threshold`, sorted by score descending, then benchmark id, then corpus id.
pub fn pairs_above(
    bench: &EmbeddingSet,
    corpus: &EmbeddingSet,
    threshold: f64,
    search: PairSearch,
) -> Result<Vec<SimilarityPair>> {
    if bench.is_empty() || corpus.is_empty() {
        return Ok(Vec::new());
    }
    if bench.dim != corpus.dim {
        return Err(Error::Data(format!(
            "dimension mismatch: benchmark {} vs corpus {}",
            bench.dim, corpus.dim
        )));
    }
    let split = bench.dim / 4;
    let corpus_prep: Vec<Prepared> = if search.prefilter {
        corpus.vectors.iter().map(|v| prepare(v, split)).collect()
    } else {
        Vec::new()
    };

    let mut pairs: Vec<SimilarityPair> = bench
        .vectors
        .par_iter()
        .enumerate()
        .flat_map_iter(|(bi, u)| {
            let up = search.prefilter.then(|| prepare(u, split));
            let corpus_prep = &corpus_prep;
            corpus.vectors.iter().enumerate().filter_map(move |(ci, v)| {
                if let Some(up) = &up {
                    let cp = &corpus_prep[ci];
                    if up.norm == 0.0 || cp.norm == 0.0 {
                        if threshold > 0.0 {
                            return None;
                        }
                    } else {
                        let bound = dot(&up.unit[..split], &cp.unit[..split]) + up.tail_norm * cp.tail_norm;
                        if bound < threshold - 1e-9 {
                            return None;
                        }
                    }
                }
                let score = cosine(u, v);
                (score >= threshold).then(|| SimilarityPair {
                    bench_id: bench.ids[bi].clone(),
                    corpus_id: corpus.ids[ci].clone(),
                    score,
                })
            })
        })
        .collect();
    pairs.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.bench_id.cmp(&b.bench_id))
            .then_with(|| a.corpus_id.cmp(&b.corpus_id))
    });
    Ok(pairs)
}

pub fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OverlapSummary {
    /// Pair counts at each reporting threshold, keyed by the threshold
    /// printed with two decimals.
    pub counts: BTreeMap<String, usize>,
    pub bench_items_with_pairs: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapReport {
    pub text: String,
    pub jsonl: Vec<u8>,
    pub summary: OverlapSummary,
}

/// Builds the human-readable table (best corpus match per benchmark item)
/// and the machine-readable pair list.
pub fn report(
    pairs: &[SimilarityPair],
    bench_texts: &HashMap<String, String>,
    corpus_texts: &HashMap<String, String>,
    thresholds: &[f64],
) -> OverlapReport {
    let mut summary = OverlapSummary::default();
    for &t in thresholds {
        summary
            .counts
            .insert(format!("{t:.2}"), pairs.iter().filter(|p| p.score >= t).count());
    }

    // pairs are sorted by score, so the first pair seen per item is its best
    let mut best: Vec<&SimilarityPair> = Vec::new();
    let mut seen = HashSet::new();
    for p in pairs {
        if seen.insert(p.bench_id.as_str()) {
            best.push(p);
        }
    }
    summary.bench_items_with_pairs = best.len();

    let mut text = String::new();
    let _ = writeln!(text, "score\tbenchmark\tcorpus");
    for p in &best {
        let lookup = |map: &HashMap<String, String>, id: &str, what: &str, warnings: &mut Vec<String>| {
            map.get(id).cloned().unwrap_or_else(|| {
                warnings.push(format!("no text for {what} id {id}"));
                format!("[missing {what} text: {id}]")
            })
        };
        let b = lookup(bench_texts, &p.bench_id, "benchmark", &mut summary.warnings);
        let c = lookup(corpus_texts, &p.corpus_id, "corpus", &mut summary.warnings);
        let _ = writeln!(text, "{:.4}\t{b}\t{c}", p.score);
    }
    let _ = writeln!(text);
    for (t, n) in &summary.counts {
        let _ = writeln!(text, "pairs with score >= {t}: {n}");
    }
    for w in &summary.warnings {
        log::warn!("{w}");
    }

    let rounded: Vec<SimilarityPair> = pairs
        .iter()
        .map(|p| SimilarityPair {
            score: round4(p.score),
            ..p.clone()
        })
        .collect();
    OverlapReport {
        text,
        jsonl: crate::io::to_jsonl(&rounded),
        summary,
    }
}

/// Reads `{"id", "text"}` JSONL into a map; numeric ids become strings.
pub fn load_texts(path: &Path) -> Result<HashMap<String, String>> {
    #[derive(Deserialize)]
    struct TextRow {
        #[serde(deserialize_with = "id_as_string")]
        id: String,
        text: String,
    }
    let body = crate::io::read_to_string(path)?;
    let mut out = HashMap::new();
    for (i, line) in body.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: TextRow = serde_json::from_str(line).map_err(|e| Error::format(path, i + 1, e.to_string()))?;
        out.insert(row.id, row.text);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rows: &[(&str, &[f64])]) -> EmbeddingSet {
        EmbeddingSet::new("t", rows.iter().map(|(i, v)| (i.to_string(), v.to_vec())).collect()).unwrap()
    }

    #[test]
    fn identical_vectors_score_one() {
        let v = [0.3, -1.2, 4.0, 0.01];
        assert!((cosine(&v, &v) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn orthogonal_vectors_are_excluded() {
        let b = set(&[("b", &[1.0, 0.0])]);
        let c = set(&[("c", &[0.0, 2.0])]);
        for prefilter in [false, true] {
            assert!(pairs_above(&b, &c, 0.5, PairSearch { prefilter }).unwrap().is_empty());
        }
    }

    #[test]
    fn dimension_mismatch_is_fatal() {
        let b = set(&[("b", &[1.0, 0.0])]);
        let c = set(&[("c", &[0.0, 2.0, 1.0])]);
        assert!(pairs_above(&b, &c, 0.5, PairSearch::default()).is_err());
        assert!(EmbeddingSet::new("t", vec![("a".into(), vec![1.0]), ("b".into(), vec![1.0, 2.0])]).is_err());
    }

    #[test]
    fn nan_names_the_id() {
        let err = EmbeddingSet::new("t", vec![("bad-7".into(), vec![1.0, f64::NAN])]).unwrap_err();
        assert!(err.to_string().contains("bad-7"));
    }

    #[test]
    fn sort_order_and_ties() {
        let b = set(&[("b2", &[1.0, 0.0]), ("b1", &[1.0, 0.0])]);
        let c = set(&[("c", &[1.0, 0.0]), ("d", &[1.0, 1.0])]);
        let got = pairs_above(&b, &c, 0.5, PairSearch::default()).unwrap();
        let order: Vec<(&str, &str)> = got.iter().map(|p| (p.bench_id.as_str(), p.corpus_id.as_str())).collect();
        assert_eq!(order, vec![("b1", "c"), ("b2", "c"), ("b1", "d"), ("b2", "d")]);
    }

    #[test]
    fn binary_round_trip() {
        let s = set(&[("a", &[1.0, 2.0]), ("b", &[-0.5, 3.25])]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.bin");
        std::fs::write(&p, s.to_binary()).unwrap();
        let back = load_embeddings(&p).unwrap();
        assert_eq!(back.ids(), s.ids());
        assert_eq!(back.iter().map(|(_, v)| v.to_vec()).collect::<Vec<_>>(), vec![vec![1.0, 2.0], vec![-0.5, 3.25]]);
    }

    #[test]
    fn report_rows_and_counts() {
        let pairs = vec![
            SimilarityPair { bench_id: "1".into(), corpus_id: "a".into(), score: 0.71234 },
            SimilarityPair { bench_id: "1".into(), corpus_id: "b".into(), score: 0.55 },
            SimilarityPair { bench_id: "2".into(), corpus_id: "a".into(), score: 0.52 },
        ];
        let bench: HashMap<String, String> = [("1".to_string(), "The phone rang.".to_string())].into();
        let corpus: HashMap<String, String> = [("a".to_string(), "The guy answers the phone.".to_string())].into();
        let r = report(&pairs, &bench, &corpus, &[0.5, 0.6]);
        assert_eq!(r.summary.counts["0.50"], 3);
        assert_eq!(r.summary.counts["0.60"], 1);
        assert_eq!(r.summary.bench_items_with_pairs, 2);
        assert_eq!(r.summary.warnings.len(), 1);
        assert!(r.text.contains("0.7123\tThe phone rang.\tThe guy answers the phone."));
        assert!(String::from_utf8(r.jsonl).unwrap().starts_with(r#"{"bench_id":"1","corpus_id":"a","score":0.7123}"#));

        let empty = report(&[], &bench, &corpus, &[0.5, 0.6]);
        assert_eq!(empty.summary.counts["0.50"], 0);
        assert_eq!(empty.jsonl, Vec::<u8>::new());
    }
}

//! Corpus statistics: relation distribution and whitespace-token lengths.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::kg_ingest::Triple;
use crate::relations::Category;
use crate::verbalizer::VerbalizedSample;

pub const LENGTH_LIMIT: usize = 30;
pub const LENGTH_CLAIM_FRACTION: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationCount {
    pub relation: String,
    pub category: Category,
    pub count: usize,
}

/// Triples per relation, largest first (ties by name).
pub fn relation_distribution(triples: &[Triple]) -> Vec<RelationCount> {
    let mut counts: BTreeMap<(&str, Category), usize> = BTreeMap::new();
    for t in triples {
        *counts.entry((t.relation.as_str(), t.category)).or_default() += 1;
    }
    let mut out: Vec<RelationCount> = counts
        .into_iter()
        .map(|((relation, category), count)| RelationCount {
            relation: relation.to_string(),
            category,
            count,
        })
        .collect();
    out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.relation.cmp(&b.relation)));
    out
}

pub fn whitespace_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub samples: usize,
    pub within_limit: usize,
    pub fraction_within_limit: f64,
    pub max_tokens: usize,
    pub mean_tokens: f64,
    /// token count -> number of samples
    pub histogram: BTreeMap<usize, usize>,
}

impl LengthStats {
    pub fn claim_holds(&self) -> bool {
        self.samples == 0 || self.fraction_within_limit >= LENGTH_CLAIM_FRACTION
    }
}

pub fn length_stats<'a>(texts: impl IntoIterator<Item = &'a str>) -> LengthStats {
    let mut s = LengthStats::default();
    let mut total = 0usize;
    for t in texts {
        let n = whitespace_tokens(t);
        s.samples += 1;
        total += n;
        s.max_tokens = s.max_tokens.max(n);
        if n <= LENGTH_LIMIT {
            s.within_limit += 1;
        }
        *s.histogram.entry(n).or_default() += 1;
    }
    if s.samples > 0 {
        s.fraction_within_limit = s.within_limit as f64 / s.samples as f64;
        s.mean_tokens = total as f64 / s.samples as f64;
    }
    s
}

pub fn sample_length_stats(samples: &[VerbalizedSample]) -> LengthStats {
    length_stats(samples.iter().map(|s| s.text.as_str()))
}

pub fn relation_table_tsv(rows: &[RelationCount]) -> String {
    let total: usize = rows.iter().map(|r| r.count).sum();
    let mut out = String::from("relation\tcategory\tcount\tpercent\n");
    for r in rows {
        let pct = if total == 0 { 0.0 } else { 100.0 * r.count as f64 / total as f64 };
        let _ = writeln!(out, "{}\t{}\t{}\t{:.2}", r.relation, r.category, r.count, pct);
    }
    out
}

/// One row per token count with a column per named corpus.
pub fn histogram_tsv(named: &[(&str, &LengthStats)]) -> String {
    let max = named.iter().map(|(_, s)| s.max_tokens).max().unwrap_or(0);
    let mut out = String::from("tokens");
    for (name, _) in named {
        let _ = write!(out, "\t{name}");
    }
    out.push('\n');
    for n in 0..=max {
        if named.iter().all(|(_, s)| !s.histogram.contains_key(&n)) {
            continue;
        }
        let _ = write!(out, "{n}");
        for (_, s) in named {
            let _ = write!(out, "\t{}", s.histogram.get(&n).copied().unwrap_or(0));
        }
        out.push('\n');
    }
    out
}

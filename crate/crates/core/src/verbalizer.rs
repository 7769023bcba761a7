//! Turns ATOMIC triples and GLUCOSE statements into sentences.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::LazyLock;

use crate::error::{Error, Result};
use crate::io::seeded_key;
use crate::kg_ingest::{GlucoseRecord, Split, Triple, GLUCOSE_CONNECTIVES};
use crate::relations::{Category, RelationTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Atomic,
    Glucose,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Atomic => "atomic",
            Source::Glucose => "glucose",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerbalizedSample {
    pub id: u64,
    pub text: String,
    pub source: Source,
    pub source_id: u64,
    /// `event`, `physical` or `social` for ATOMIC; `dimension-<d>` for GLUCOSE.
    pub category: String,
    pub split: Split,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input: usize,
    pub duplicates: usize,
    pub none_targets: usize,
    pub blanks: usize,
    pub kept: usize,
    pub kept_by_category: BTreeMap<Category, usize>,
}

static BLANK: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"_{2,}").unwrap());
static PLACEHOLDER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\bperson ?([xyz])\b").unwrap());

pub fn has_blank(text: &str) -> bool {
    BLANK.is_match(text)
}

pub fn has_placeholder(text: &str) -> bool {
    PLACEHOLDER.is_match(text)
}

fn is_none_target(tail: &str) -> bool {
    tail.trim().eq_ignore_ascii_case("none")
}

/// Drops duplicate triples, triples whose target is `none` and triples with
/// a blank in the head or tail. Survivors keep their input order.
pub fn filter_triples(triples: Vec<Triple>) -> (Vec<Triple>, FilterReport) {
    let mut report = FilterReport {
        input: triples.len(),
        ..Default::default()
    };
    for c in Category::ALL {
        report.kept_by_category.insert(c, 0);
    }
    let mut seen: HashSet<(String, String, String)> = HashSet::with_capacity(triples.len());
    let mut kept = Vec::new();
    for t in triples {
        if !seen.insert((t.head.clone(), t.relation.clone(), t.tail.clone())) {
            report.duplicates += 1;
        } else if is_none_target(&t.tail) {
            report.none_targets += 1;
        } else if has_blank(&t.head) || has_blank(&t.tail) {
            report.blanks += 1;
        } else {
            *report.kept_by_category.entry(t.category).or_default() += 1;
            kept.push(t);
        }
    }
    report.kept = kept.len();
    (kept, report)
}

const SHIPPED_NAMES: &str = include_str!("../data/names.v1.txt");

/// Names substituted for the PersonX/PersonY/PersonZ placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NameList {
    names: Vec<String>,
}

impl NameList {
    pub fn shipped() -> Self {
        Self::from_lines(SHIPPED_NAMES).expect("shipped name list is valid")
    }

    pub fn from_lines(text: &str) -> Result<Self> {
        let names: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
        let distinct: HashSet<&String> = names.iter().collect();
        if names.len() < 3 || distinct.len() != names.len() {
            return Err(Error::Data("name list needs at least 3 distinct names".into()));
        }
        Ok(Self { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// PersonX gets a name picked by a seeded hash of the sample id; PersonY
    /// and PersonZ get the following names in the list.
    pub fn assign(&self, seed: u64, sample_id: u64) -> NameAssignment {
        let n = self.names.len();
        let i = (seeded_key(seed, &[b"names", &sample_id.to_le_bytes()]) % n as u64) as usize;
        NameAssignment {
            x: self.names[i].clone(),
            y: self.names[(i + 1) % n].clone(),
            z: self.names[(i + 2) % n].clone(),
        }
    }
}

impl Default for NameList {
    fn default() -> Self {
        Self::shipped()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NameAssignment {
    pub x: String,
    pub y: String,
    pub z: String,
}

impl NameAssignment {
    pub fn substitute(&self, text: &str) -> String {
        PLACEHOLDER
            .replace_all(text, |caps: &regex::Captures| {
                match caps[1].to_ascii_lowercase().as_str() {
                    "x" => self.x.clone(),
                    "y" => self.y.clone(),
                    _ => self.z.clone(),
                }
            })
            .into_owned()
    }
}

/// Renders a filtered triple with its relation template and substitutes
/// names. The text is not yet grammar-normalized.
pub fn verbalize_triple(
    t: &Triple,
    table: &RelationTable,
    names: &NameAssignment,
) -> Result<VerbalizedSample> {
    let template = table
        .get_any(&t.relation)
        .ok_or_else(|| Error::Config(format!("no template for relation {}", t.relation)))?;
    let text = names.substitute(&template.render(&t.head, &t.tail));
    Ok(VerbalizedSample {
        id: t.id,
        text,
        source: Source::Atomic,
        source_id: t.id,
        category: t.category.to_string(),
        split: t.split,
    })
}

/// Verbalizes every triple in parallel; output order follows the input.
pub fn verbalize_triples(
    triples: &[Triple],
    table: &RelationTable,
    names: &NameList,
    seed: u64,
) -> Result<Vec<VerbalizedSample>> {
    triples
        .par_iter()
        .map(|t| verbalize_triple(t, table, &names.assign(seed, t.id)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Connective {
    pub marker: String,
    pub phrase: String,
}

const SHIPPED_CONNECTIVES: &str = include_str!("../data/glucose_connectives.v1.json");

/// Maps each GLUCOSE connective marker to the phrase joining its two spans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectiveTable {
    pub version: String,
    pub connectives: Vec<Connective>,
}

impl ConnectiveTable {
    pub fn shipped() -> Self {
        Self::from_json(SHIPPED_CONNECTIVES).expect("shipped connective table is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&crate::io::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let table: ConnectiveTable = serde_json::from_str(text)
            .map_err(|e| Error::Data(format!("connective table: {e}")))?;
        let markers: HashSet<&str> = table.connectives.iter().map(|c| c.marker.as_str()).collect();
        let phrases: HashSet<&str> = table.connectives.iter().map(|c| c.phrase.as_str()).collect();
        if markers != GLUCOSE_CONNECTIVES.iter().copied().collect()
            || table.connectives.len() != GLUCOSE_CONNECTIVES.len()
        {
            return Err(Error::Data(
                "connective table must cover exactly the five GLUCOSE connectives".into(),
            ));
        }
        if phrases.len() != table.connectives.len() || phrases.iter().any(|p| p.trim().is_empty()) {
            return Err(Error::Data("connective phrases must be distinct and non-empty".into()));
        }
        Ok(table)
    }

    pub fn phrase(&self, marker: &str) -> Option<&str> {
        self.connectives
            .iter()
            .find(|c| c.marker == marker)
            .map(|c| c.phrase.as_str())
    }
}

impl Default for ConnectiveTable {
    fn default() -> Self {
        Self::shipped()
    }
}

pub fn verbalize_glucose(r: &GlucoseRecord, table: &ConnectiveTable) -> Result<VerbalizedSample> {
    let phrase = table
        .phrase(&r.connective)
        .ok_or_else(|| Error::Data(format!("unknown connective {:?}", r.connective)))?;
    Ok(VerbalizedSample {
        id: r.id,
        text: format!("{} {} {}", r.antecedent, phrase, r.consequent),
        source: Source::Glucose,
        source_id: r.id,
        category: format!("dimension-{}", r.dimension),
        split: Split::Train,
    })
}

pub fn verbalize_glucose_records(
    records: &[GlucoseRecord],
    table: &ConnectiveTable,
) -> Result<Vec<VerbalizedSample>> {
    records.par_iter().map(|r| verbalize_glucose(r, table)).collect()
}

/// Randomly assigns 90% of the GLUCOSE samples to train and 10% to dev.
/// Returned samples carry their split and are ordered by id.
pub fn split_glucose(samples: Vec<VerbalizedSample>, seed: u64) -> (Vec<VerbalizedSample>, Vec<VerbalizedSample>) {
    let (mut train, mut dev) = crate::split::seeded_split(samples, seed, |s| s.id.to_le_bytes());
    for s in &mut train {
        s.split = Split::Train;
    }
    for s in &mut dev {
        s.split = Split::Dev;
    }
    train.sort_by_key(|s| s.id);
    dev.sort_by_key(|s| s.id);
    (train, dev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg_ingest::{triple_id, Specificity};

    fn triple(row: usize, head: &str, relation: &str, tail: &str) -> Triple {
        let table = RelationTable::shipped();
        Triple {
            id: triple_id(Split::Train, row),
            head: head.into(),
            relation: relation.into(),
            tail: tail.into(),
            category: table.category(relation).unwrap(),
            split: Split::Train,
        }
    }

    fn alex() -> NameAssignment {
        NameAssignment {
            x: "Alex".into(),
            y: "Sam".into(),
            z: "Jordan".into(),
        }
    }

    #[test]
    fn filter_drops_blank_example() {
        let (kept, report) = filter_triples(vec![triple(0, "PersonX affords another ___", "xAttr", "useful")]);
        assert!(kept.is_empty());
        assert_eq!(report.blanks, 1);
    }

    #[test]
    fn filter_drops_duplicates_and_none() {
        let input = vec![
            triple(0, "PersonX eats", "xEffect", "gets full"),
            triple(1, "PersonX eats", "xEffect", "gets full"),
            triple(2, "PersonX eats", "xWant", "none"),
            triple(3, "PersonX eats", "xWant", " NONE "),
            triple(4, "bread", "AtLocation", "bakery"),
            triple(5, "PersonX sees __ of it", "xReact", "glad"),
        ];
        let (kept, r) = filter_triples(input);
        assert_eq!(kept.iter().map(|t| t.id).collect::<Vec<_>>(), vec![0, 4]);
        assert_eq!((r.duplicates, r.none_targets, r.blanks, r.kept), (1, 2, 1, 2));
        assert_eq!(r.kept + r.duplicates + r.none_targets + r.blanks, r.input);
        assert_eq!(r.kept_by_category[&Category::Social], 1);
        assert_eq!(r.kept_by_category[&Category::Physical], 1);
        assert_eq!(r.kept_by_category[&Category::Event], 0);
    }

    #[test]
    fn xeffect_concatenation() {
        let t = triple(0, "PersonX drinks coffee", "xEffect", "stays awake");
        let s = verbalize_triple(&t, &RelationTable::shipped(), &alex()).unwrap();
        assert_eq!(s.text, "Alex drinks coffee. as a result, Alex will stays awake");
        assert_eq!(s.source_id, t.id);
        assert_eq!(s.category, "social");
    }

    #[test]
    fn has_prerequisite_template() {
        let t = Triple {
            id: 0,
            head: "pack a suitcase".into(),
            relation: "HasPrerequisite".into(),
            tail: "open the suitcase".into(),
            category: Category::Event,
            split: Split::Train,
        };
        let s = verbalize_triple(&t, &RelationTable::shipped(), &alex()).unwrap();
        assert!(s.text.contains("to do this, one requires"));
        assert!(!s.text.contains("Alex"));
    }

    #[test]
    fn unknown_relation_is_a_config_error() {
        let mut t = triple(0, "a", "Causes", "b");
        t.relation = "Nope".into();
        assert_eq!(verbalize_triple(&t, &RelationTable::shipped(), &alex()).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn no_placeholder_means_no_names() {
        let t = triple(0, "bread", "AtLocation", "bakery");
        let s = verbalize_triple(&t, &RelationTable::shipped(), &alex()).unwrap();
        assert_eq!(s.text, "bread is located or found at bakery");
    }

    #[test]
    fn placeholder_variants_are_resolved() {
        let text = alex().substitute("PersonX gives PersonY's book to personz and Person X");
        assert_eq!(text, "Alex gives Sam's book to Jordan and Alex");
        assert!(!has_placeholder(&text));
    }

    #[test]
    fn name_assignment_is_deterministic_and_distinct() {
        let names = NameList::shipped();
        assert_eq!(names.len(), 20);
        for id in 0..200 {
            let a = names.assign(5, id);
            assert_eq!(a, names.assign(5, id));
            assert_ne!(a.x, a.y);
            assert_ne!(a.y, a.z);
        }
        let spread: HashSet<String> = (0..200).map(|id| names.assign(5, id).x).collect();
        assert!(spread.len() > 10);
    }

    fn record(antecedent: &str, connective: &str, consequent: &str) -> GlucoseRecord {
        GlucoseRecord {
            id: 1,
            dimension: 1,
            specificity: Specificity::Specific,
            antecedent: antecedent.into(),
            connective: connective.into(),
            consequent: consequent.into(),
        }
    }

    #[test]
    fn glucose_causes_enables() {
        let r = record("The trash bag is full", ">Causes/Enables>", "I pick up the bag");
        let s = verbalize_glucose(&r, &ConnectiveTable::shipped()).unwrap();
        assert_eq!(s.text, "The trash bag is full causes/enables I pick up the bag");
        assert_eq!(s.category, "dimension-1");
    }

    #[test]
    fn glucose_identical_spans_still_emitted() {
        let r = record("it rains", ">Causes>", "it rains");
        assert_eq!(
            verbalize_glucose(&r, &ConnectiveTable::shipped()).unwrap().text,
            "it rains causes it rains"
        );
    }

    #[test]
    fn every_connective_has_a_distinct_phrase() {
        let t = ConnectiveTable::shipped();
        let phrases: HashSet<&str> = GLUCOSE_CONNECTIVES.iter().map(|c| t.phrase(c).unwrap()).collect();
        assert_eq!(phrases.len(), 5);
        assert!(phrases.iter().all(|p| !p.is_empty()));
    }

    #[test]
    fn connective_table_must_be_complete() {
        let bad = r#"{"version":"x","connectives":[{"marker":">Causes>","phrase":"causes"}]}"#;
        assert!(ConnectiveTable::from_json(bad).is_err());
    }

    #[test]
    fn glucose_split_marks_samples() {
        let samples: Vec<VerbalizedSample> = (0..100u64)
            .map(|i| VerbalizedSample {
                id: i,
                text: format!("s{i}"),
                source: Source::Glucose,
                source_id: i,
                category: "dimension-1".into(),
                split: Split::Train,
            })
            .collect();
        let (train, dev) = split_glucose(samples.clone(), 11);
        assert_eq!((train.len(), dev.len()), (90, 10));
        assert!(train.iter().all(|s| s.split == Split::Train));
        assert!(dev.iter().all(|s| s.split == Split::Dev));
        assert_eq!(split_glucose(samples, 11), (train, dev));
    }
}
